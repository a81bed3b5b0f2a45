//! Peephole LSTM with full-matrix peephole connections.
//!
//! ```text
//! i_t = σ(W_ix x_t + W_ih h_{t-1} + W_ic c_{t-1} + b_i)
//! f_t = σ(W_fx x_t + W_fh h_{t-1} + W_fc c_{t-1} + b_f)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ tanh(W_cx x_t + W_ch h_{t-1} + b_c)
//! o_t = σ(W_ox x_t + W_oh h_{t-1} + W_oc c_t + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! Initial states are zero vectors.

use super::{NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::error::{Error, Result};
use crate::SeededRng;

/// Gate parameters of one LSTM direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub w_ix: ParamId,
    pub w_ih: ParamId,
    pub w_ic: ParamId,
    pub b_i: ParamId,
    pub w_fx: ParamId,
    pub w_fh: ParamId,
    pub w_fc: ParamId,
    pub b_f: ParamId,
    pub w_cx: ParamId,
    pub w_ch: ParamId,
    pub b_c: ParamId,
    pub w_ox: ParamId,
    pub w_oh: ParamId,
    pub w_oc: ParamId,
    pub b_o: ParamId,
    pub input_dim: usize,
    pub state_dim: usize,
}

impl LstmParams {
    /// Registers the fifteen tensors in the order of the field list above.
    /// Every tensor is named `{prefix}.{field}` and grouped under `prefix`.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        state_dim: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let (di, ds) = (input_dim, state_dim);
        let mut add = |field: &str, shape: &[usize]| {
            store.add_uniform(format!("{prefix}.{field}"), prefix, shape, rng)
        };
        LstmParams {
            w_ix: add("w_ix", &[ds, di]),
            w_ih: add("w_ih", &[ds, ds]),
            w_ic: add("w_ic", &[ds, ds]),
            b_i: add("b_i", &[ds]),
            w_fx: add("w_fx", &[ds, di]),
            w_fh: add("w_fh", &[ds, ds]),
            w_fc: add("w_fc", &[ds, ds]),
            b_f: add("b_f", &[ds]),
            w_cx: add("w_cx", &[ds, di]),
            w_ch: add("w_ch", &[ds, ds]),
            b_c: add("b_c", &[ds]),
            w_ox: add("w_ox", &[ds, di]),
            w_oh: add("w_oh", &[ds, ds]),
            w_oc: add("w_oc", &[ds, ds]),
            b_o: add("b_o", &[ds]),
            input_dim,
            state_dim,
        }
    }

    pub fn ids(&self) -> [ParamId; 15] {
        [
            self.w_ix, self.w_ih, self.w_ic, self.b_i, self.w_fx, self.w_fh, self.w_fc,
            self.b_f, self.w_cx, self.w_ch, self.b_c, self.w_ox, self.w_oh, self.w_oc,
            self.b_o,
        ]
    }

    /// Closed-form parameter count: three peephole gates plus the candidate.
    pub fn closed_form_count(input_dim: usize, state_dim: usize) -> usize {
        let (di, ds) = (input_dim, state_dim);
        3 * (ds * di + ds * ds + ds * ds + ds) + (ds * di + ds * ds + ds)
    }
}

/// Hidden and cell state after one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmState {
    pub h: NodeId,
    pub c: NodeId,
}

impl LstmState {
    pub fn zeros(tape: &mut Tape, state_dim: usize) -> Self {
        let h = tape.constant(Tensor::zeros(&[state_dim]));
        let c = tape.constant(Tensor::zeros(&[state_dim]));
        LstmState { h, c }
    }
}

fn check_len(tape: &Tape, node: NodeId, len: usize, operand: &'static str) -> Result<()> {
    let t = tape.value(node);
    if !t.is_vector() || t.len() != len {
        return Err(Error::dim("lstm_step", operand, [len], t.shape()));
    }
    Ok(())
}

fn gate_sum(
    tape: &mut Tape,
    store: &ParamStore,
    terms: &[(ParamId, NodeId)],
    bias: ParamId,
) -> Result<NodeId> {
    let mut nodes = Vec::with_capacity(terms.len() + 1);
    for &(w, x) in terms {
        let wn = tape.param(store, w);
        nodes.push(tape.matvec(wn, x)?);
    }
    nodes.push(tape.param(store, bias));
    tape.add_n(&nodes)
}

pub fn lstm_step(
    tape: &mut Tape,
    store: &ParamStore,
    p: &LstmParams,
    x: NodeId,
    prev: LstmState,
) -> Result<LstmState> {
    check_len(tape, x, p.input_dim, "x_t")?;
    check_len(tape, prev.h, p.state_dim, "h_prev")?;
    check_len(tape, prev.c, p.state_dim, "c_prev")?;
    let (h, c) = (prev.h, prev.c);

    let i_pre = gate_sum(tape, store, &[(p.w_ix, x), (p.w_ih, h), (p.w_ic, c)], p.b_i)?;
    let i = tape.sigmoid(i_pre);
    let f_pre = gate_sum(tape, store, &[(p.w_fx, x), (p.w_fh, h), (p.w_fc, c)], p.b_f)?;
    let f = tape.sigmoid(f_pre);
    let g_pre = gate_sum(tape, store, &[(p.w_cx, x), (p.w_ch, h)], p.b_c)?;
    let g = tape.tanh(g_pre);
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_t = tape.add(keep, write)?;
    let o_pre = gate_sum(tape, store, &[(p.w_ox, x), (p.w_oh, h), (p.w_oc, c_t)], p.b_o)?;
    let o = tape.sigmoid(o_pre);
    let tc = tape.tanh(c_t);
    let h_t = tape.mul(o, tc)?;
    Ok(LstmState { h: h_t, c: c_t })
}

/// Folds [`lstm_step`] over `xs` from the given initial state, returning one
/// state per input.
pub fn lstm_forward_from(
    tape: &mut Tape,
    store: &ParamStore,
    p: &LstmParams,
    xs: &[NodeId],
    init: LstmState,
) -> Result<Vec<LstmState>> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("lstm_forward"));
    }
    let mut state = init;
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        state = lstm_step(tape, store, p, x, state)?;
        out.push(state);
    }
    Ok(out)
}

/// [`lstm_forward_from`] starting at zero state.
pub fn lstm_forward(
    tape: &mut Tape,
    store: &ParamStore,
    p: &LstmParams,
    xs: &[NodeId],
) -> Result<Vec<LstmState>> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("lstm_forward"));
    }
    let init = LstmState::zeros(tape, p.state_dim);
    lstm_forward_from(tape, store, p, xs, init)
}
