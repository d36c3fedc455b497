//! Adam with a stepped learning-rate decay.

use std::collections::BTreeMap;

use crate::params::ParamStore;
use crate::tensor::Tensor;
use crate::NnError;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;
/// The learning rate is multiplied by DECAY after every DECAY_EVERY steps.
const DECAY: f64 = 0.95;
const DECAY_EVERY: u64 = 1000;

pub const DEFAULT_LR: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct Adam {
    m: BTreeMap<String, Tensor<f32>>,
    v: BTreeMap<String, Tensor<f32>>,
    step: u64,
    base_lr: f64,
}

impl Adam {
    pub fn new(base_lr: f64) -> Self {
        Adam {
            m: BTreeMap::new(),
            v: BTreeMap::new(),
            step: 0,
            base_lr,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn base_lr(&self) -> f64 {
        self.base_lr
    }

    /// Learning rate for the next update.
    pub fn lr(&self) -> f64 {
        self.base_lr * DECAY.powi((self.step / DECAY_EVERY) as i32)
    }

    /// One update over every gradient in the map. Parameters without a
    /// gradient this step are left alone; moments are created on first use.
    pub fn apply(
        &mut self,
        params: &mut ParamStore,
        grads: &BTreeMap<String, Tensor<f32>>,
    ) -> Result<(), NnError> {
        let lr = self.lr();
        let t = (self.step + 1) as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        for (name, g) in grads {
            let p = params.get_mut(name)?;
            if p.dims() != g.dims() {
                return Err(NnError::Shape(format!(
                    "gradient shape {:?} does not match parameter {name} {:?}",
                    g.dims(),
                    p.dims()
                )));
            }
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.dims().to_vec()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.dims().to_vec()));
            for ((pe, ge), (me, ve)) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut()))
            {
                let gf = *ge as f64;
                let mf = BETA1 * *me as f64 + (1.0 - BETA1) * gf;
                let vf = BETA2 * *ve as f64 + (1.0 - BETA2) * gf * gf;
                *me = mf as f32;
                *ve = vf as f32;
                let update = lr * (mf / bc1) / ((vf / bc2).sqrt() + EPS);
                *pe = (*pe as f64 - update) as f32;
            }
        }
        self.step += 1;
        Ok(())
    }

    /// Moment maps, step count, and base rate, for serialization.
    pub fn parts(
        &self,
    ) -> (
        &BTreeMap<String, Tensor<f32>>,
        &BTreeMap<String, Tensor<f32>>,
        u64,
        f64,
    ) {
        (&self.m, &self.v, self.step, self.base_lr)
    }

    pub fn from_parts(
        m: BTreeMap<String, Tensor<f32>>,
        v: BTreeMap<String, Tensor<f32>>,
        step: u64,
        base_lr: f64,
    ) -> Self {
        Adam {
            m,
            v,
            step,
            base_lr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_decays_every_thousand_steps() {
        let mut a = Adam::new(1e-4);
        assert_eq!(a.lr(), 1e-4);
        a.step = 999;
        assert_eq!(a.lr(), 1e-4);
        a.step = 1000;
        assert!((a.lr() - 9.5e-5).abs() < 1e-12);
        a.step = 2500;
        assert!((a.lr() - 1e-4 * 0.9025).abs() < 1e-12);
    }

    #[test]
    fn first_step_moves_against_the_gradient_by_about_lr() {
        let mut params = ParamStore::new();
        params.insert("p", Tensor::new(vec![2], vec![1.0f32, -2.0]).unwrap());
        let mut grads = BTreeMap::new();
        grads.insert(
            "p".to_string(),
            Tensor::new(vec![2], vec![0.5f32, -3.0]).unwrap(),
        );
        let mut adam = Adam::new(1e-4);
        adam.apply(&mut params, &grads).unwrap();
        let p = params.get("p").unwrap().data();
        // Bias-corrected first step is lr * g / (|g| + eps), i.e. lr-sized.
        assert!((p[0] - (1.0 - 1e-4)).abs() < 1e-8);
        assert!((p[1] - (-2.0 + 1e-4)).abs() < 1e-8);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn unknown_gradient_names_error() {
        let mut params = ParamStore::new();
        params.insert("p", Tensor::zeros(vec![2]));
        let mut grads = BTreeMap::new();
        grads.insert("q".to_string(), Tensor::zeros(vec![2]));
        assert!(Adam::new(1e-4).apply(&mut params, &grads).is_err());
    }
}
