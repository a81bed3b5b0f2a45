//! Straight-line scalar reimplementations of the LSTM step, word
//! composition and tagger forward pass. Shared with the acceptance run.
#![allow(dead_code)]

use c2w::embeddings::C2WParams;
use c2w::nncore::{LstmParams, ParamId, ParamStore};
use c2w::seeded_rng;
use c2w::tagger::TaggerModel;
use rand::Rng;

pub const TOL: f64 = 1e-12;

pub type Mat = Vec<Vec<f64>>;

pub fn mat(store: &ParamStore, id: ParamId) -> Mat {
    let t = store.value(id);
    (0..t.rows()).map(|r| (0..t.cols()).map(|c| t.get2(r, c)).collect()).collect()
}

pub fn vecp(store: &ParamStore, id: ParamId) -> Vec<f64> {
    store.value(id).data().to_vec()
}

pub fn mv(m: &Mat, x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| {
            let mut s = 0.0;
            for j in 0..x.len() {
                s += row[j] * x[j];
            }
            s
        })
        .collect()
}

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub struct ScalarLstm {
    w_ix: Mat,
    w_ih: Mat,
    w_ic: Mat,
    b_i: Vec<f64>,
    w_fx: Mat,
    w_fh: Mat,
    w_fc: Mat,
    b_f: Vec<f64>,
    w_cx: Mat,
    w_ch: Mat,
    b_c: Vec<f64>,
    w_ox: Mat,
    w_oh: Mat,
    w_oc: Mat,
    b_o: Vec<f64>,
}

impl ScalarLstm {
    pub fn read(store: &ParamStore, p: &LstmParams) -> Self {
        ScalarLstm {
            w_ix: mat(store, p.w_ix),
            w_ih: mat(store, p.w_ih),
            w_ic: mat(store, p.w_ic),
            b_i: vecp(store, p.b_i),
            w_fx: mat(store, p.w_fx),
            w_fh: mat(store, p.w_fh),
            w_fc: mat(store, p.w_fc),
            b_f: vecp(store, p.b_f),
            w_cx: mat(store, p.w_cx),
            w_ch: mat(store, p.w_ch),
            b_c: vecp(store, p.b_c),
            w_ox: mat(store, p.w_ox),
            w_oh: mat(store, p.w_oh),
            w_oc: mat(store, p.w_oc),
            b_o: vecp(store, p.b_o),
        }
    }

    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.b_i.len();
        let (ix, ih, ic) = (mv(&self.w_ix, x), mv(&self.w_ih, h), mv(&self.w_ic, c));
        let (fx, fh, fc) = (mv(&self.w_fx, x), mv(&self.w_fh, h), mv(&self.w_fc, c));
        let (cx, ch) = (mv(&self.w_cx, x), mv(&self.w_ch, h));
        let mut c_new = vec![0.0; n];
        for k in 0..n {
            let i = sig(ix[k] + ih[k] + ic[k] + self.b_i[k]);
            let f = sig(fx[k] + fh[k] + fc[k] + self.b_f[k]);
            let g = (cx[k] + ch[k] + self.b_c[k]).tanh();
            c_new[k] = f * c[k] + i * g;
        }
        let (ox, oh, oc) = (mv(&self.w_ox, x), mv(&self.w_oh, h), mv(&self.w_oc, &c_new));
        let h_new = (0..n)
            .map(|k| sig(ox[k] + oh[k] + oc[k] + self.b_o[k]) * c_new[k].tanh())
            .collect();
        (h_new, c_new)
    }

    pub fn last_h(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let n = self.b_i.len();
        let (mut h, mut c) = (vec![0.0; n], vec![0.0; n]);
        for x in xs {
            (h, c) = self.step(x, &h, &c);
        }
        h
    }

    pub fn all_h(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.b_i.len();
        let (mut h, mut c) = (vec![0.0; n], vec![0.0; n]);
        let mut out = Vec::new();
        for x in xs {
            (h, c) = self.step(x, &h, &c);
            out.push(h.clone());
        }
        out
    }
}

pub fn scalar_compose(store: &ParamStore, p: &C2WParams, ids: &[usize]) -> Vec<f64> {
    let table = mat(store, p.char_table);
    let cols: Vec<Vec<f64>> = ids.iter().map(|&c| table.iter().map(|row| row[c]).collect()).collect();
    let s_f = ScalarLstm::read(store, &p.fwd).last_h(&cols);
    let rev: Vec<Vec<f64>> = cols.iter().rev().cloned().collect();
    let s_b = ScalarLstm::read(store, &p.bwd).last_h(&rev);
    let (a, b) = (mv(&mat(store, p.d_fwd), &s_f), mv(&mat(store, p.d_bwd), &s_b));
    let bd = vecp(store, p.b_d);
    (0..bd.len()).map(|k| a[k] + b[k] + bd[k]).collect()
}

pub fn assert_close(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (k, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= TOL, "component {k}: {g} vs {w}");
    }
}

/// Values drawn wider than the ±0.1 init so the nonlinearities are exercised.
pub fn spread(store: &mut ParamStore, seed: u64) {
    let mut rng = seeded_rng(seed ^ 0xABCD);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        store.value_mut(id).data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
}

/// Per-token tag distributions.
pub fn scalar_tag_forward(model: &TaggerModel, tokens: &[String]) -> Vec<Vec<f64>> {
    let store = &model.store;
    let emb = &model.embedder;
    // The tanh flag only applies when the C2W vector is combined with a lookup vector.
    let tanh = emb.config.c2w_tanh && emb.lookup.is_some();
    let xs: Vec<Vec<f64>> = tokens
        .iter()
        .map(|t| {
            let mut v = vec![0.0; emb.config.d];
            if let (Some(c2w), Some(charset)) = (&emb.c2w, &emb.charset) {
                let mut c = scalar_compose(store, c2w, &charset.char_ids(t));
                if tanh {
                    c.iter_mut().for_each(|x| *x = x.tanh());
                }
                v = c;
            }
            if let Some(lookup) = &emb.lookup {
                let table = mat(store, lookup.table);
                let id = lookup.vocab.id(t);
                v.iter_mut().enumerate().for_each(|(k, x)| *x += table[k][id]);
            }
            v
        })
        .collect();
    let f = ScalarLstm::read(store, &model.fwd).all_h(&xs);
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let mut b = ScalarLstm::read(store, &model.bwd).all_h(&rev);
    b.reverse();
    let (l_f, l_b, b_l) = (mat(store, model.l_f), mat(store, model.l_b), vecp(store, model.b_l));
    let (proj, bias) = (mat(store, model.tag_proj), vecp(store, model.tag_bias));
    (0..tokens.len())
        .map(|i| {
            let (a, c) = (mv(&l_f, &f[i]), mv(&l_b, &b[i]));
            let l: Vec<f64> = (0..b_l.len()).map(|k| (a[k] + c[k] + b_l[k]).tanh()).collect();
            let z: Vec<f64> = mv(&proj, &l).iter().zip(&bias).map(|(p, q)| p + q).collect();
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = z.iter().map(|v| (v - m).exp()).sum();
            z.iter().map(|v| (v - m).exp() / total).collect()
        })
        .collect()
}

/// Largest componentwise difference.
pub fn max_diff(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max)
}
