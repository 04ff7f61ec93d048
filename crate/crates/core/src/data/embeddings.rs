//! Precomputed contextual embeddings.
//!
//! File layout (little-endian): magic `VEMB`, u32 version, u32 d, then one
//! record per document: u32 id length, id bytes (UTF-8), and for Q1 then
//! Q2 a u32 token count N followed by d·N f32 values in row-major d×N
//! order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VEMB";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct DocEmbedding {
    pub q1: Tensor,
    pub q2: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub d: usize,
    pub docs: BTreeMap<String, DocEmbedding>,
}

impl EmbeddingSet {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            docs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, q1: Tensor, q2: Tensor) -> Result<()> {
        for t in [&q1, &q2] {
            if t.rows() != self.d {
                return Err(Error::config(format!("embedding has d={}, set declares {}", t.rows(), self.d)));
            }
        }
        self.docs.insert(id.into(), DocEmbedding { q1, q2 });
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&DocEmbedding> {
        self.docs
            .get(id)
            .ok_or_else(|| Error::Lookup(format!("no embedding for document {id:?}")))
    }

    /// Fails with the full list of ids that have no embedding.
    pub fn check_covers<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let missing: Vec<&str> = ids.into_iter().filter(|id| !self.docs.contains_key(*id)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Lookup(format!("documents without embeddings: {}", missing.join(", "))))
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.d != d {
            return Err(Error::config(format!("embedding file has d={}, model expects d={d}", self.d)));
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&u32_of(self.d)?.to_le_bytes())?;
        for (id, doc) in &self.docs {
            w.write_all(&u32_of(id.len())?.to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            for t in [&doc.q1, &doc.q2] {
                w.write_all(&u32_of(t.cols())?.to_le_bytes())?;
                for &v in t.data() {
                    w.write_all(&(v as f32).to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::config("not an embedding file (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::config(format!("unsupported embedding file version {version}")));
        }
        let d = read_u32(&mut r)? as usize;
        if d == 0 {
            return Err(Error::config("embedding file declares d=0"));
        }
        let mut set = Self::new(d);
        loop {
            let mut len = [0u8; 4];
            match r.read(&mut len[..1])? {
                0 => break,
                _ => r.read_exact(&mut len[1..])?,
            }
            let mut id = vec![0u8; u32::from_le_bytes(len) as usize];
            r.read_exact(&mut id)?;
            let id = String::from_utf8(id).map_err(|_| Error::config("embedding id is not UTF-8"))?;
            let q1 = read_matrix(&mut r, d)?;
            let q2 = read_matrix(&mut r, d)?;
            if set.docs.insert(id.clone(), DocEmbedding { q1, q2 }).is_some() {
                return Err(Error::config(format!("duplicate embedding id {id:?}")));
            }
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::file(path, e))?;
        self.write(BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read(BufReader::new(f))
    }
}

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::config(format!("{n} does not fit the embedding file format")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_matrix<R: Read>(r: &mut R, d: usize) -> Result<Tensor> {
    let n = read_u32(r)? as usize;
    let mut bytes = vec![0u8; d * n * 4];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Tensor::matrix(d, n, data)
}
