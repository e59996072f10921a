//! Precomputed sentence embeddings.
//!
//! Binary layout, little-endian: magic `HEMB`, version `u32`, dimension
//! `u32`, then until end of file records of (id length `u32`, UTF-8 id,
//! token count `u32`, `T·D` `f32` values). The text variant repeats blocks of
//! an `id T D` header line followed by `T` whitespace-separated rows.

use std::path::Path;

use hermit_core::layers::PrecomputedEmbeddings;
use hermit_core::numerics::Tensor;

use crate::error::{AppError, Context, Result};

pub const MAGIC: &[u8; 4] = b"HEMB";
pub const VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or_else(|| {
            AppError::Data(format!("truncated embedding file at byte {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<PrecomputedEmbeddings> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(AppError::Data("not a binary embedding file".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(AppError::Data(format!("unsupported embedding file version {version}")));
    }
    let dim = c.u32()? as usize;
    let mut table = PrecomputedEmbeddings::new(dim);
    while !c.done() {
        let len = c.u32()? as usize;
        let id = std::str::from_utf8(c.take(len)?)
            .map_err(|_| AppError::Data("sentence id is not UTF-8".into()))?
            .to_string();
        let t = c.u32()? as usize;
        let raw = c.take(t * dim * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect();
        let m = Tensor::new(vec![t, dim], data).context(|| format!("embedding {id}"))?;
        table.insert(id.clone(), m).context(|| format!("embedding {id}"))?;
    }
    Ok(table)
}

/// Values are stored as `f32`.
pub fn encode_binary(table: &PrecomputedEmbeddings) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(table.dim() as u32).to_le_bytes());
    for (id, m) in table.iter() {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        for v in m.data() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn parse_text(text: &str) -> Result<PrecomputedEmbeddings> {
    let bad = |line: usize, reason: &str| AppError::Data(format!("embedding text line {line}: {reason}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut table: Option<PrecomputedEmbeddings> = None;
    while let Some((i, header)) = lines.next() {
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [id, t, d] = fields[..] else {
            return Err(bad(i + 1, "expected header `id T D`"));
        };
        let t: usize = t.parse().map_err(|_| bad(i + 1, "bad token count"))?;
        let d: usize = d.parse().map_err(|_| bad(i + 1, "bad dimension"))?;
        let table = table.get_or_insert_with(|| PrecomputedEmbeddings::new(d));
        let mut data = Vec::with_capacity(t * d);
        for _ in 0..t {
            let (j, row) = lines.next().ok_or_else(|| bad(i + 1, "missing rows"))?;
            let before = data.len();
            for v in row.split_whitespace() {
                data.push(v.parse::<f64>().map_err(|_| bad(j + 1, "bad number"))?);
            }
            if data.len() - before != d {
                return Err(bad(j + 1, "row width differs from header"));
            }
        }
        let m = Tensor::new(vec![t, d], data).context(|| format!("embedding {id}"))?;
        table.insert(id, m).context(|| format!("embedding {id}"))?;
    }
    table.ok_or_else(|| AppError::Data("embedding file is empty".into()))
}

/// Reads either variant, telling them apart by the magic bytes.
pub fn load(path: &Path) -> Result<PrecomputedEmbeddings> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| AppError::Data(format!("{}: not UTF-8", path.display())))?;
        parse_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn binary_round_trip(dim in 1usize..5, rows in prop::collection::vec(prop::collection::vec(-1e3f32..1e3, 1..20), 1..4)) {
            let mut table = PrecomputedEmbeddings::new(dim);
            for (i, r) in rows.iter().enumerate() {
                let t = r.len();
                let data: Vec<f64> = (0..t * dim).map(|k| r[k % t] as f64).collect();
                table.insert(format!("s{i}"), Tensor::new(vec![t, dim], data).unwrap()).unwrap();
            }
            let back = decode_binary(&encode_binary(&table)).unwrap();
            prop_assert_eq!(back.len(), table.len());
            for (id, m) in table.iter() {
                prop_assert_eq!(back.get(id).unwrap(), m);
            }
        }
    }

    #[test]
    fn text_variant_and_errors() {
        let t = parse_text("a 2 3\n1 2 3\n4 5 6\nb 1 3\n0 0 0.5\n").unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("a").unwrap().row(1), &[4.0, 5.0, 6.0]);
        assert!(parse_text("a 2 3\n1 2 3\n").is_err());
        assert!(parse_text("a 1 3\n1 2\n").is_err());
        assert!(decode_binary(b"HEMB\x02\x00\x00\x00").is_err());
        let mut bytes = encode_binary(&t);
        bytes.pop();
        assert!(decode_binary(&bytes).is_err());
    }
}
