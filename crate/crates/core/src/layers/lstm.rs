use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::rng::Rng;

/// One LSTM direction. Gates are packed `[input | forget | cell | output]`
/// along the `4H` axis; the input weights are stored as `[D, 4H]` so that a
/// row vector multiplies from the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    /// Uniform `±1/√H` weights, zero bias except the forget gate at 1.
    pub fn init(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config(format!("{prefix}: hidden size must be positive")));
        }
        let bound = 1.0 / crate::math::sqrt(hidden as f64);
        let w = super::uniform(rng, &[input, 4 * hidden], bound);
        let u = super::uniform(rng, &[hidden, 4 * hidden], bound);
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
        Ok(LstmParams {
            w: store.add(format!("{prefix}.w"), w)?,
            u: store.add(format!("{prefix}.u"), u)?,
            b: store.add(format!("{prefix}.b"), Tensor::vector(b))?,
            input,
            hidden,
        })
    }
}

/// Independent forward and backward directions over the same input width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl BiLstmParams {
    pub fn init(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        Ok(BiLstmParams {
            forward: LstmParams::init(store, &format!("{prefix}.fwd"), input, hidden, rng)?,
            backward: LstmParams::init(store, &format!("{prefix}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn output_width(&self) -> usize {
        2 * self.forward.hidden
    }
}

/// Gate nonlinearities and state update given `pre = xW + b` as a `[1, 4H]` row.
fn cell(tape: &mut Tape, u: Var, hidden: usize, pre: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
    let rec = tape.matmul(h_prev, u)?;
    let z = tape.add(pre, rec)?;
    let i = tape.slice_cols(z, 0, hidden)?;
    let f = tape.slice_cols(z, hidden, 2 * hidden)?;
    let g = tape.slice_cols(z, 2 * hidden, 3 * hidden)?;
    let o = tape.slice_cols(z, 3 * hidden, 4 * hidden)?;
    let i = tape.sigmoid(i)?;
    let f = tape.sigmoid(f)?;
    let g = tape.tanh(g)?;
    let o = tape.sigmoid(o)?;
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c)?;
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Single LSTM step on `[1, D]` input and `[1, H]` states.
pub fn lstm_step(
    tape: &mut Tape,
    store: &ParamStore,
    p: &LstmParams,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var)> {
    let h_shape = [1, p.hidden];
    for (what, v, shape) in [("x", x, [1, p.input]), ("h", h_prev, h_shape), ("c", c_prev, h_shape)] {
        if tape.shape(v) != shape {
            return Err(Error::ShapeMismatch {
                op: match what {
                    "x" => "lstm_step input",
                    "h" => "lstm_step hidden state",
                    _ => "lstm_step cell state",
                },
                left: shape.to_vec(),
                right: tape.shape(v).to_vec(),
            });
        }
    }
    let w = tape.param(store, p.w);
    let u = tape.param(store, p.u);
    let b = tape.param(store, p.b);
    let xw = tape.matmul(x, w)?;
    let pre = tape.add_bias(xw, b)?;
    cell(tape, u, p.hidden, pre, h_prev, c_prev)
}

/// Runs one direction; masked positions are skipped and yield zero rows.
fn run_direction(
    tape: &mut Tape,
    store: &ParamStore,
    p: &LstmParams,
    x: Var,
    mask: &[bool],
    reverse: bool,
) -> Result<Var> {
    let t_len = mask.len();
    let w = tape.param(store, p.w);
    let u = tape.param(store, p.u);
    let b = tape.param(store, p.b);
    let xw = tape.matmul(x, w)?;
    let pre_all = tape.add_bias(xw, b)?;
    let zero = tape.constant(Tensor::zeros(vec![1, p.hidden]));
    let (mut h, mut c) = (zero, zero);
    let mut rows = vec![zero; t_len];
    let order: Vec<usize> = if reverse {
        (0..t_len).rev().collect()
    } else {
        (0..t_len).collect()
    };
    for t in order {
        if !mask[t] {
            continue;
        }
        let pre = tape.slice_rows(pre_all, t, t + 1)?;
        (h, c) = cell(tape, u, p.hidden, pre, h, c)?;
        rows[t] = h;
    }
    tape.stack_rows(&rows)
}

/// Bidirectional encoding of `x[T, D]`; row `t` is `[forward_t | backward_t]`.
pub fn bilstm_forward(
    tape: &mut Tape,
    store: &ParamStore,
    p: &BiLstmParams,
    x: Var,
    mask: &[bool],
) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    if shape.len() != 2 || shape[0] == 0 {
        return Err(Error::Empty { op: "bilstm_forward" });
    }
    if shape[0] != mask.len() || shape[1] != p.forward.input {
        return Err(Error::ShapeMismatch {
            op: "bilstm_forward",
            left: shape,
            right: vec![mask.len(), p.forward.input],
        });
    }
    let fwd = run_direction(tape, store, &p.forward, x, mask, false)?;
    let bwd = run_direction(tape, store, &p.backward, x, mask, true)?;
    tape.concat(fwd, bwd)
}
