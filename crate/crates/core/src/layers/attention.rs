use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::rng::Rng;

/// Scaled dot-product self-attention with learned projections.
///
/// `a_t = Σ_u α_{t,u} · (s_u Wv)` where row `t` of `α` is the masked softmax
/// of `(s_t Wq)·(s_u Wk) / √A`. The value projection keeps the input width
/// and there is no residual connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelfAttentionParams {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub input: usize,
    pub width: usize,
}

impl SelfAttentionParams {
    pub fn init(store: &mut ParamStore, prefix: &str, input: usize, width: usize, rng: &mut Rng) -> Result<Self> {
        if width == 0 || input == 0 {
            return Err(Error::Config(format!("{prefix}: attention widths must be positive")));
        }
        let bound = 1.0 / math::sqrt(input as f64);
        Ok(SelfAttentionParams {
            wq: store.add(format!("{prefix}.wq"), super::uniform(rng, &[input, width], bound))?,
            wk: store.add(format!("{prefix}.wk"), super::uniform(rng, &[input, width], bound))?,
            wv: store.add(format!("{prefix}.wv"), super::uniform(rng, &[input, input], bound))?,
            input,
            width,
        })
    }
}

/// Attends over `s[T, H']`; rows at masked positions come out as zeros.
pub fn self_attention(
    tape: &mut Tape,
    store: &ParamStore,
    p: &SelfAttentionParams,
    s: Var,
    mask: &[bool],
) -> Result<Var> {
    let shape = tape.shape(s).to_vec();
    if shape.len() != 2 || shape[0] != mask.len() || shape[1] != p.input {
        return Err(Error::ShapeMismatch {
            op: "self_attention",
            left: shape,
            right: vec![mask.len(), p.input],
        });
    }
    if !mask.iter().any(|m| *m) {
        return Err(Error::AllMasked { op: "self_attention" });
    }
    let wq = tape.param(store, p.wq);
    let wk = tape.param(store, p.wk);
    let wv = tape.param(store, p.wv);
    let q = tape.matmul(s, wq)?;
    let k = tape.matmul(s, wk)?;
    let v = tape.matmul(s, wv)?;
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, 1.0 / math::sqrt(p.width as f64))?;
    let alpha = tape.masked_softmax(scores, mask)?;
    let out = tape.matmul(alpha, v)?;
    if mask.iter().all(|m| *m) {
        return Ok(out);
    }
    let keep: Vec<f64> = mask
        .iter()
        .flat_map(|m| core::iter::repeat_n(if *m { 1.0 } else { 0.0 }, p.input))
        .collect();
    let keep = tape.constant(Tensor::matrix(mask.len(), p.input, keep)?);
    tape.mul(out, keep)
}
