//! Model checkpoints.
//!
//! Little-endian layout: magic `HMT1`, version `u32`, then length-prefixed
//! (`u32`) UTF-8 strings for the settings (`key=value` lines) and the DA, FR
//! and AR label lists (one label per line, index order), a `u8` flag followed
//! by the token list when embeddings are trainable, and finally the parameter
//! count `u32` and each parameter as (name, rank `u32`, dims `u32`…, values
//! `f64`).

use std::path::Path;
use std::sync::Arc;

use hermit_core::corpus::{LabelVocabulary, TaskLabels};
use hermit_core::layers::{PrecomputedEmbeddings, TokenVocabulary};
use hermit_core::model::{HermitConfig, HermitModel, ModelSettings};
use hermit_core::numerics::{ParamStore, Tensor};

use crate::error::{AppError, Context, Result};

pub const MAGIC: &[u8; 4] = b"HMT1";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn lines(items: &[String]) -> String {
    items.join("\n")
}

pub fn encode(model: &HermitModel) -> Vec<u8> {
    let config = model.config();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let settings: Vec<String> = config.settings.to_pairs().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
    put_str(&mut out, &lines(&settings));
    for vocab in [&config.labels.da, &config.labels.fr, &config.labels.ar] {
        put_str(&mut out, &lines(vocab.labels()));
    }
    match &config.tokens {
        Some(t) => {
            out.push(1);
            // index 0 is the unknown token, restored on load
            put_str(&mut out, &lines(&t.tokens()[1..]));
        }
        None => out.push(0),
    }
    put_u32(&mut out, model.params().len());
    for (_, p) in model.params().iter() {
        put_str(&mut out, &p.name);
        put_u32(&mut out, p.value.rank());
        for &d in p.value.shape() {
            put_u32(&mut out, d);
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| AppError::Data(format!("truncated checkpoint at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn string(&mut self) -> Result<&'a str> {
        let n = self.u32()?;
        std::str::from_utf8(self.take(n)?).map_err(|_| AppError::Data("checkpoint string is not UTF-8".into()))
    }

    fn list(&mut self) -> Result<Vec<&'a str>> {
        let s = self.string()?;
        Ok(if s.is_empty() { Vec::new() } else { s.split('\n').collect() })
    }
}

fn labels(list: Vec<&str>) -> Result<LabelVocabulary> {
    LabelVocabulary::from_ordered(list).context(|| "checkpoint label vocabulary".into())
}

/// Decodes the configuration and parameter values without building a model.
pub fn decode(bytes: &[u8]) -> Result<(HermitConfig, ParamStore)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(AppError::Data("not a model checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(AppError::Data(format!(
            "checkpoint format version {version} is not supported (expected {VERSION})"
        )));
    }
    let mut settings = ModelSettings::default();
    for line in r.list()? {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| AppError::Data(format!("bad checkpoint setting {line:?}")))?;
        if !settings.set(k, v).context(|| "checkpoint settings".into())? {
            return Err(AppError::Data(format!("unknown checkpoint setting {k:?}")));
        }
    }
    let labels = TaskLabels {
        da: labels(r.list()?)?,
        fr: labels(r.list()?)?,
        ar: labels(r.list()?)?,
    };
    let tokens = match r.take(1)?[0] {
        0 => None,
        1 => Some(TokenVocabulary::from_ordered(r.list()?)),
        b => return Err(AppError::Data(format!("bad token flag {b}"))),
    };
    let mut store = ParamStore::new();
    for _ in 0..r.u32()? {
        let name = r.string()?.to_string();
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(8).ok_or_else(|| AppError::Data("parameter too large".into()))?)?;
        let data = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        let value = Tensor::new(shape, data).context(|| format!("parameter {name}"))?;
        store.add(name.clone(), value).context(|| format!("parameter {name}"))?;
    }
    if r.pos != bytes.len() {
        return Err(AppError::Data("trailing bytes after checkpoint".into()));
    }
    Ok((HermitConfig { settings, labels, tokens }, store))
}

/// Rebuilds the model and restores its parameter values. Precomputed
/// embedding mode needs the embedding table.
pub fn restore(bytes: &[u8], precomputed: Option<Arc<PrecomputedEmbeddings>>) -> Result<HermitModel> {
    let (config, store) = decode(bytes)?;
    let mut model = HermitModel::build(config, 0, precomputed).context(|| "checkpoint".into())?;
    model.params_mut().load_values(&store).context(|| "checkpoint parameters".into())?;
    Ok(model)
}

pub fn save(path: &Path, model: &HermitModel) -> Result<()> {
    crate::error::write_file(path, encode(model))
}

pub fn load(path: &Path, precomputed: Option<Arc<PrecomputedEmbeddings>>) -> Result<HermitModel> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    restore(&bytes, precomputed)
}
