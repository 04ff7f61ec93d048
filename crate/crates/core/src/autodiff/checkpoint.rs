//! Parameter checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic   b"VCKP"
//! version u32
//! hlen    u32            length of the JSON header in bytes
//! header  [u8; hlen]     {"version", "layers": [{name, frozen, weights: [{name, shape}]}], "meta"}
//! data    f64 × Σ sizes  every weight, row-major, in header order
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::params::{LayerParams, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    layers: Vec<LayerHeader>,
    #[serde(default)]
    meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct LayerHeader {
    name: String,
    frozen: bool,
    weights: Vec<WeightHeader>,
}

#[derive(Serialize, Deserialize)]
struct WeightHeader {
    name: String,
    shape: Vec<usize>,
}

pub fn write_checkpoint<W: Write>(mut w: W, store: &ParamStore, meta: &serde_json::Value) -> Result<()> {
    let header = Header {
        version: FORMAT_VERSION,
        layers: store
            .layers()
            .iter()
            .map(|l| LayerHeader {
                name: l.name.clone(),
                frozen: l.frozen,
                weights: l
                    .weights
                    .iter()
                    .map(|(n, t)| WeightHeader {
                        name: n.clone(),
                        shape: t.shape().to_vec(),
                    })
                    .collect(),
            })
            .collect(),
        meta: meta.clone(),
    };
    let hbytes = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(hbytes.len() as u32).to_le_bytes())?;
    w.write_all(&hbytes)?;
    for l in store.layers() {
        for t in l.weights.values() {
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Reads a checkpoint, returning the parameters and the free-form metadata.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(ParamStore, serde_json::Value)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::contract("not a checkpoint file (bad magic)"));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::contract(format!("unsupported checkpoint version {version}")));
    }
    let hlen = read_u32(&mut r)? as usize;
    let mut hbytes = vec![0u8; hlen];
    r.read_exact(&mut hbytes)?;
    let header: Header = serde_json::from_slice(&hbytes)?;
    let mut store = ParamStore::new();
    let mut buf = [0u8; 8];
    for lh in header.layers {
        let mut lp = LayerParams::new(lh.name);
        for wh in lh.weights {
            let n: usize = wh.shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            lp = lp.with(&wh.name, Tensor::new(wh.shape, data)?);
        }
        lp.frozen = lh.frozen;
        store.add(lp);
    }
    Ok((store, header.meta))
}

/// Loads checkpoint values into an existing store, rejecting any layout
/// or shape mismatch.
pub fn load_into<R: Read>(r: R, store: &mut ParamStore) -> Result<serde_json::Value> {
    let (loaded, meta) = read_checkpoint(r)?;
    store.copy_values_from(&loaded)?;
    Ok(meta)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store(cols: usize) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ParamStore::new();
        s.add(
            LayerParams::new("a")
                .with("w", Tensor::glorot(3, cols, &mut rng))
                .with("b", Tensor::zeros(1, cols)),
        );
        s
    }

    #[test]
    fn roundtrip_is_exact() {
        let s = store(4);
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &s, &serde_json::json!({"arch": "coatt"})).unwrap();
        let (back, meta) = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(meta["arch"], "coatt");
        assert_eq!(back.layers()[0].weights, s.layers()[0].weights);
    }

    #[test]
    fn load_rejects_shape_mismatch() {
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &store(4), &serde_json::Value::Null).unwrap();
        let mut other = store(5);
        let err = load_into(bytes.as_slice(), &mut other).unwrap_err();
        assert!(matches!(err, Error::Shape(_)), "{err}");
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOPE...."[..]).is_err());
    }
}
