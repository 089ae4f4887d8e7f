//! Binary dataset cache.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic  b"MLLTRDS\0"
//! u32    version (1)
//! u32    feature_dim p, u32 label_count K
//! K x    (u32 byte length, UTF-8 label name)
//! u32    query count m
//! m x    (u32 len, UTF-8 qid) u32 n_q, n_q x (p f64 features, K f64 labels, K f64 raw labels)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Item, MultiLabelDataset, QueryGroup};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"MLLTRDS\0";
pub const CACHE_VERSION: u32 = 1;

pub fn write_cache<W: Write>(data: &MultiLabelDataset, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    write_u32(&mut out, CACHE_VERSION)?;
    write_u32(&mut out, data.feature_dim() as u32)?;
    write_u32(&mut out, data.label_count() as u32)?;
    for name in data.label_names() {
        write_str(&mut out, name)?;
    }
    write_u32(&mut out, data.num_queries() as u32)?;
    for g in data.groups() {
        write_str(&mut out, &g.query_id)?;
        write_u32(&mut out, g.len() as u32)?;
        for item in &g.items {
            for v in item.features.iter().chain(&item.labels).chain(&item.raw_labels) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_cache<R: Read>(mut input: R) -> Result<MultiLabelDataset> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a dataset cache file".into()));
    }
    let version = read_u32(&mut input)?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let p = read_u32(&mut input)? as usize;
    let k = read_u32(&mut input)? as usize;
    let names = (0..k).map(|_| read_str(&mut input)).collect::<Result<Vec<_>>>()?;
    let m = read_u32(&mut input)? as usize;
    let mut groups = Vec::with_capacity(m);
    for _ in 0..m {
        let query_id = read_str(&mut input)?;
        let n = read_u32(&mut input)? as usize;
        let mut items = Vec::with_capacity(n);
        for _ in 0..n {
            let features = read_f64s(&mut input, p)?;
            let labels = read_f64s(&mut input, k)?;
            let raw_labels = read_f64s(&mut input, k)?;
            items.push(Item { features, labels, raw_labels });
        }
        groups.push(QueryGroup { query_id, items });
    }
    MultiLabelDataset::new(groups, p, names)
}

pub fn write_cache_file(data: &MultiLabelDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_cache(data, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_cache_file(path: impl AsRef<Path>) -> Result<MultiLabelDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_cache(BufReader::new(file))
}

fn write_u32<W: Write>(out: &mut W, v: u32) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_str<W: Write>(out: &mut W, s: &str) -> Result<()> {
    write_u32(out, s.len() as u32)?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(input: &mut R) -> Result<String> {
    let len = read_u32(input)? as usize;
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format("invalid UTF-8 in cache".into()))
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut b = [0u8; 8];
    (0..n)
        .map(|_| {
            input.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        })
        .collect()
}
