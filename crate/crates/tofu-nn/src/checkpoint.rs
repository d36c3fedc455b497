//! TOFW checkpoint files: named tensors, little-endian, no compression.
//!
//! Layout: `b"TOFW"`, version u32, entry count u32, then per entry a
//! u16-length UTF-8 name, dtype u8 (0 = f32, 1 = f64), rank u8, dims as
//! u32s, and the payload. Parameters and optimizer moments are f32; the
//! net configuration and optimizer counters are f64 so a reloaded run
//! continues with exactly the values it was saved with.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::adam::Adam;
use crate::fusion::FusionKind;
use crate::net::{NetConfig, Placement};
use crate::params::ParamStore;
use crate::tensor::Tensor;
use crate::NnError;

const MAGIC: &[u8; 4] = b"TOFW";
const VERSION: u32 = 1;
const MAX_RANK: usize = 8;

enum Payload {
    F32(Vec<usize>, Vec<f32>),
    F64(Vec<usize>, Vec<f64>),
}

impl Payload {
    fn of(t: &Tensor<f32>) -> Self {
        Payload::F32(t.dims().to_vec(), t.data().to_vec())
    }

    fn dims(&self) -> &[usize] {
        match self {
            Payload::F32(d, _) => d,
            Payload::F64(d, _) => d,
        }
    }
}

fn bad(reason: impl Into<String>) -> NnError {
    NnError::Checkpoint(reason.into())
}

fn gather(config: &NetConfig, params: &ParamStore, adam: &Adam) -> BTreeMap<String, Payload> {
    let mut entries = BTreeMap::new();
    entries.insert(
        "config".to_string(),
        Payload::F64(
            vec![4],
            vec![
                config.placement.code() as f64,
                config.kind.code() as f64,
                config.d_min,
                config.d_max,
            ],
        ),
    );
    for (name, t) in params.iter() {
        entries.insert(format!("param.{name}"), Payload::of(t));
    }
    let (m, v, step, base_lr) = adam.parts();
    for (name, t) in m {
        entries.insert(format!("adam.m.{name}"), Payload::of(t));
    }
    for (name, t) in v {
        entries.insert(format!("adam.v.{name}"), Payload::of(t));
    }
    entries.insert(
        "adam.meta".to_string(),
        Payload::F64(vec![2], vec![step as f64, base_lr]),
    );
    entries
}

pub fn save(
    path: &Path,
    config: &NetConfig,
    params: &ParamStore,
    adam: &Adam,
) -> Result<(), NnError> {
    let entries = gather(config, params, adam);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, payload) in &entries {
        let bytes = name.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(bad(format!("tensor name too long: {name}")));
        }
        let dims = payload.dims();
        if dims.len() > MAX_RANK {
            return Err(bad(format!("tensor rank {} too high", dims.len())));
        }
        w.write_all(&(bytes.len() as u16).to_le_bytes())?;
        w.write_all(bytes)?;
        let dtype = match payload {
            Payload::F32(..) => 0u8,
            Payload::F64(..) => 1u8,
        };
        w.write_all(&[dtype, dims.len() as u8])?;
        for d in dims {
            w.write_all(&(*d as u32).to_le_bytes())?;
        }
        match payload {
            Payload::F32(_, data) => {
                for v in data {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            Payload::F64(_, data) => {
                for v in data {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(NetConfig, ParamStore, Adam), NnError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a TOFW checkpoint"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut entries: BTreeMap<String, Payload> = BTreeMap::new();
    for _ in 0..count {
        let name_len = read_u16(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        let mut head = [0u8; 2];
        r.read_exact(&mut head)?;
        let (dtype, rank) = (head[0], head[1] as usize);
        if rank == 0 || rank > MAX_RANK {
            return Err(bad(format!("tensor {name} has rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = read_u32(&mut r)? as usize;
            if d == 0 {
                return Err(bad(format!("tensor {name} has a zero dimension")));
            }
            dims.push(d);
        }
        let n: usize = dims.iter().product();
        let payload = match dtype {
            0 => {
                let mut raw = vec![0u8; n * 4];
                r.read_exact(&mut raw)?;
                let data = raw
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect();
                Payload::F32(dims, data)
            }
            1 => {
                let mut raw = vec![0u8; n * 8];
                r.read_exact(&mut raw)?;
                let data = raw
                    .chunks_exact(8)
                    .map(|b| {
                        f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]])
                    })
                    .collect();
                Payload::F64(dims, data)
            }
            other => return Err(bad(format!("tensor {name} has unknown dtype {other}"))),
        };
        if entries.insert(name.clone(), payload).is_some() {
            return Err(bad(format!("duplicate tensor {name}")));
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes after the last tensor"));
    }

    let config = match entries.remove("config") {
        Some(Payload::F64(dims, data)) if dims == [4] => {
            let config = NetConfig {
                placement: Placement::from_code(data[0] as u32)?,
                kind: FusionKind::from_code(data[1] as u32)?,
                d_min: data[2],
                d_max: data[3],
            };
            config.validate()?;
            config
        }
        _ => return Err(bad("missing or malformed config entry")),
    };
    let (step, base_lr) = match entries.remove("adam.meta") {
        Some(Payload::F64(dims, data)) if dims == [2] => (data[0] as u64, data[1]),
        _ => return Err(bad("missing or malformed adam.meta entry")),
    };

    let mut params = ParamStore::new();
    let mut m = BTreeMap::new();
    let mut v = BTreeMap::new();
    for (name, payload) in entries {
        let Payload::F32(dims, data) = payload else {
            return Err(bad(format!("tensor {name} must be f32")));
        };
        let t = Tensor::new(dims, data).map_err(|e| bad(e.to_string()))?;
        if let Some(p) = name.strip_prefix("param.") {
            params.insert(p, t);
        } else if let Some(p) = name.strip_prefix("adam.m.") {
            m.insert(p.to_string(), t);
        } else if let Some(p) = name.strip_prefix("adam.v.") {
            v.insert(p.to_string(), t);
        } else {
            return Err(bad(format!("unexpected tensor {name}")));
        }
    }
    if params.is_empty() {
        return Err(bad("checkpoint holds no parameters"));
    }
    Ok((config, params, Adam::from_parts(m, v, step, base_lr)))
}

fn read_u32(r: &mut impl Read) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u16(r: &mut impl Read) -> Result<u16, NnError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::FusionNet;

    fn sample() -> (NetConfig, ParamStore, Adam) {
        let config = NetConfig {
            placement: Placement::Bottleneck,
            kind: FusionKind::Gated,
            d_min: 0.1,
            d_max: 15.0,
        };
        let net = FusionNet::new(config).unwrap();
        let params = net.init_params(42);
        (config, params, Adam::new(1e-4))
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.tofw");
        let (config, params, adam) = sample();
        save(&path, &config, &params, &adam).unwrap();
        let (c2, p2, a2) = load(&path).unwrap();
        assert_eq!(c2, config);
        assert_eq!(c2.d_min.to_bits(), config.d_min.to_bits());
        assert_eq!(p2.len(), params.len());
        for (name, t) in params.iter() {
            let u = p2.get(name).unwrap();
            assert_eq!(t.dims(), u.dims());
            for (a, b) in t.data().iter().zip(u.data()) {
                assert_eq!(a.to_bits(), b.to_bits(), "{name}");
            }
        }
        assert_eq!(a2.step_count(), 0);
        // Saving the loaded state reproduces the file byte for byte.
        let path2 = dir.path().join("net2.tofw");
        save(&path2, &c2, &p2, &a2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn truncated_and_trailing_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.tofw");
        let (config, params, adam) = sample();
        save(&path, &config, &params, &adam).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let cut = dir.path().join("cut.tofw");
        std::fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load(&cut).is_err());

        let fat = dir.path().join("fat.tofw");
        let mut extended = bytes.clone();
        extended.push(0);
        std::fs::write(&fat, &extended).unwrap();
        assert!(load(&fat).is_err());

        let wrong = dir.path().join("wrong.tofw");
        let mut flipped = bytes;
        flipped[0] = b'X';
        std::fs::write(&wrong, &flipped).unwrap();
        assert!(load(&wrong).is_err());
    }
}
