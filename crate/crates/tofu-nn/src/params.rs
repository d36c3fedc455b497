//! Named parameter storage and initialization.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tape::{NodeId, Tape};
use crate::tensor::{Scalar, Tensor};
use crate::NnError;

/// All trainable tensors of one model, keyed by dotted path. The map is
/// ordered, so iteration (and therefore the optimizer and the checkpoint
/// format) is deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    map: BTreeMap<String, Tensor<f32>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, t: Tensor<f32>) {
        let prev = self.map.insert(name.to_string(), t);
        assert!(prev.is_none(), "duplicate parameter {name}");
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<f32>, NnError> {
        self.map
            .get(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<f32>, NnError> {
        self.map
            .get_mut(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<f32>)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Total number of scalars across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.map.values().map(|t| t.len()).sum()
    }

    /// Pushes every parameter onto a tape as a grad-requiring leaf and
    /// returns the name to node mapping.
    pub fn leaves_on<T: Scalar>(&self, tape: &mut Tape<T>) -> Result<ParamNodes, NnError> {
        let mut nodes = BTreeMap::new();
        for (name, t) in &self.map {
            let id = tape.leaf(t.cast::<T>(), true)?;
            nodes.insert(name.clone(), id);
        }
        Ok(ParamNodes { map: nodes })
    }
}

/// Tape locations of the parameters inserted by [`ParamStore::leaves_on`].
#[derive(Debug)]
pub struct ParamNodes {
    map: BTreeMap<String, NodeId>,
}

impl ParamNodes {
    pub fn get(&self, name: &str) -> Result<NodeId, NnError> {
        self.map
            .get(name)
            .copied()
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, NodeId)> {
        self.map.iter().map(|(n, id)| (n, *id))
    }
}

/// He-normal initialization for a conv weight `[c_out, c_in, k, k]`, plus a
/// zero bias. Samples are drawn in a fixed order from the caller's stream.
pub fn init_conv(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    c_out: usize,
    c_in: usize,
    k: usize,
) {
    let std = (2.0 / (c_in * k * k) as f64).sqrt();
    let n = c_out * c_in * k * k;
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push((gauss(rng) * std) as f32);
    }
    store.insert(
        &format!("{prefix}.w"),
        Tensor::new(vec![c_out, c_in, k, k], data).expect("conv weight shape"),
    );
    store.insert(&format!("{prefix}.b"), Tensor::zeros(vec![c_out]));
}

/// One standard normal draw via Box-Muller; two uniforms per call keeps the
/// stream layout independent of any library's rejection strategy.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Convolution layer reading `{prefix}.w` / `{prefix}.b` from the store.
pub(crate) fn conv_layer<T: Scalar>(
    tape: &mut Tape<T>,
    nodes: &ParamNodes,
    prefix: &str,
    x: NodeId,
    stride: usize,
) -> Result<NodeId, NnError> {
    let w = nodes.get(&format!("{prefix}.w"))?;
    let b = nodes.get(&format!("{prefix}.b"))?;
    tape.conv2d(x, w, b, stride)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn init_is_deterministic_for_a_seed() {
        let mut a = ParamStore::new();
        let mut b = ParamStore::new();
        let mut ra = ChaCha8Rng::seed_from_u64(7);
        let mut rb = ChaCha8Rng::seed_from_u64(7);
        init_conv(&mut a, &mut ra, "c", 4, 3, 3);
        init_conv(&mut b, &mut rb, "c", 4, 3, 3);
        assert_eq!(a.get("c.w").unwrap(), b.get("c.w").unwrap());
        let mut rc = ChaCha8Rng::seed_from_u64(8);
        let mut c = ParamStore::new();
        init_conv(&mut c, &mut rc, "c", 4, 3, 3);
        assert_ne!(a.get("c.w").unwrap(), c.get("c.w").unwrap());
    }

    #[test]
    fn scalar_count_sums_every_tensor() {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        init_conv(&mut s, &mut rng, "layer", 2, 3, 3);
        // 2*3*3*3 weights + 2 biases.
        assert_eq!(s.scalar_count(), 56);
    }

    #[test]
    #[should_panic(expected = "duplicate parameter")]
    fn duplicate_names_panic() {
        let mut s = ParamStore::new();
        s.insert("x", Tensor::zeros(vec![1]));
        s.insert("x", Tensor::zeros(vec![1]));
    }
}
