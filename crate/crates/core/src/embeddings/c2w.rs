//! Character-to-word composition: a bidirectional LSTM over the characters
//! of a word whose two final states are projected into the word space,
//! `e_w = D_f s_f + D_b s_b + b_d`.

use crate::error::{Error, Result};
use crate::nncore::{lstm_forward, LstmParams, NodeId, ParamId, ParamStore, Tape};
use crate::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct C2WParams {
    /// Character lookup table, `char_dim × |C|`.
    pub char_table: ParamId,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub d_fwd: ParamId,
    pub d_bwd: ParamId,
    pub b_d: ParamId,
    pub char_dim: usize,
    pub state_dim: usize,
    pub word_dim: usize,
    pub num_chars: usize,
}

impl C2WParams {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        num_chars: usize,
        char_dim: usize,
        state_dim: usize,
        word_dim: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let name = |s: &str| format!("{prefix}.{s}");
        let char_table = store.add_uniform(name("char_table"), name("char_table"), &[char_dim, num_chars], rng);
        let fwd = LstmParams::new(store, &name("fwd"), char_dim, state_dim, rng);
        let bwd = LstmParams::new(store, &name("bwd"), char_dim, state_dim, rng);
        let d_fwd = store.add_uniform(name("d_fwd"), name("d_fwd"), &[word_dim, state_dim], rng);
        let d_bwd = store.add_uniform(name("d_bwd"), name("d_bwd"), &[word_dim, state_dim], rng);
        let b_d = store.add_uniform(name("b_d"), name("b_d"), &[word_dim], rng);
        C2WParams {
            char_table,
            fwd,
            bwd,
            d_fwd,
            d_bwd,
            b_d,
            char_dim,
            state_dim,
            word_dim,
            num_chars,
        }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.char_table];
        ids.extend(self.fwd.ids());
        ids.extend(self.bwd.ids());
        ids.extend([self.d_fwd, self.d_bwd, self.b_d]);
        ids
    }

    /// Composition parameters (both LSTMs and the output combination),
    /// excluding the character table.
    pub fn closed_form_composition(char_dim: usize, state_dim: usize, word_dim: usize) -> usize {
        2 * LstmParams::closed_form_count(char_dim, state_dim) + 2 * word_dim * state_dim + word_dim
    }

    pub fn closed_form_char_table(num_chars: usize, char_dim: usize) -> usize {
        num_chars * char_dim
    }
}

/// Composes the word vector for `char_ids` on the tape.
///
/// The forward LSTM reads the characters left to right, the backward LSTM
/// right to left; each contributes its final state.
pub fn compose_word(tape: &mut Tape, store: &ParamStore, p: &C2WParams, char_ids: &[usize]) -> Result<NodeId> {
    if char_ids.is_empty() {
        return Err(Error::EmptyInput("compose_word"));
    }
    let table = tape.param(store, p.char_table);
    let mut chars = Vec::with_capacity(char_ids.len());
    for &c in char_ids {
        if c >= p.num_chars {
            return Err(Error::Index {
                op: "compose_word",
                index: c,
                size: p.num_chars,
            });
        }
        chars.push(tape.column(table, c)?);
    }
    let s_f = lstm_forward(tape, store, &p.fwd, &chars)?
        .last()
        .expect("nonempty")
        .h;
    chars.reverse();
    let s_b = lstm_forward(tape, store, &p.bwd, &chars)?
        .last()
        .expect("nonempty")
        .h;
    let df = tape.param(store, p.d_fwd);
    let db = tape.param(store, p.d_bwd);
    let bd = tape.param(store, p.b_d);
    let a = tape.matvec(df, s_f)?;
    let b = tape.matvec(db, s_b)?;
    tape.add_n(&[a, b, bd])
}
