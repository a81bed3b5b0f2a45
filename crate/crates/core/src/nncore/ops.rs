use super::{NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::error::{Error, Result};

/// Logistic sigmoid, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|v| v - log_total).collect()
}

/// Softmax of a vector tensor.
pub fn softmax_tensor(logits: &Tensor) -> Result<Tensor> {
    if !logits.is_vector() {
        return Err(Error::dim("softmax", "logits", "vector", logits.shape()));
    }
    Ok(Tensor::vector(softmax(logits.data())))
}

/// `-ln dist[target]`.
pub fn cross_entropy(dist: &Tensor, target: usize) -> Result<f64> {
    if target >= dist.len() {
        return Err(Error::Index {
            op: "cross_entropy",
            index: target,
            size: dist.len(),
        });
    }
    Ok(-dist.data()[target].ln())
}

/// `W x + b`, recorded on the tape.
pub fn affine(
    tape: &mut Tape,
    store: &ParamStore,
    w: ParamId,
    x: NodeId,
    b: ParamId,
) -> Result<NodeId> {
    let (wv, bv) = (store.value(w), store.value(b));
    if !wv.is_matrix() {
        return Err(Error::dim("affine", "W", "matrix", wv.shape()));
    }
    if !bv.is_vector() || bv.len() != wv.rows() {
        return Err(Error::dim("affine", "b", [wv.rows()], bv.shape()));
    }
    let wn = tape.param(store, w);
    let bn = tape.param(store, b);
    let wx = tape.matvec(wn, x)?;
    tape.add(wx, bn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Parameter;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_examples() {
        assert!(close(&softmax(&[0.0; 4]), &[0.25; 4], 1e-15));
        assert!(close(&softmax(&[1000.0, 1000.0]), &[0.5, 0.5], 1e-15));
        assert!(close(
            &softmax(&[1.0, 2.0, 3.0]),
            &[0.09003, 0.24473, 0.66524],
            1e-5
        ));
    }

    #[test]
    fn cross_entropy_examples() {
        let uniform = Tensor::vector(vec![0.25; 4]);
        assert!((cross_entropy(&uniform, 3).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!((4f64.ln() - 1.38629).abs() < 1e-5);
        let one_hot = Tensor::vector(vec![0.0, 1.0]);
        assert_eq!(cross_entropy(&one_hot, 1).unwrap(), 0.0);
        let d = Tensor::vector(vec![0.09003, 0.24473, 0.66524]);
        assert!((cross_entropy(&d, 2).unwrap() - 0.40761).abs() < 1e-4);
        assert!(matches!(
            cross_entropy(&d, 3),
            Err(Error::Index { index: 3, .. })
        ));
    }

    #[test]
    fn sigmoid_extremes_are_finite() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    fn affine_fixture(w: Tensor, b: Tensor, x: Vec<f64>) -> Result<Vec<f64>> {
        let mut store = ParamStore::new();
        let wid = store.add(Parameter::new("w", "w", w));
        let bid = store.add(Parameter::new("b", "b", b));
        let mut tape = Tape::new();
        let xn = tape.constant(Tensor::vector(x));
        let out = affine(&mut tape, &store, wid, xn, bid)?;
        Ok(tape.value(out).data().to_vec())
    }

    #[test]
    fn affine_identity_and_zero() {
        let eye = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = affine_fixture(eye, Tensor::zeros(&[2]), vec![3.0, -1.0]).unwrap();
        assert_eq!(out, vec![3.0, -1.0]);
        let out = affine_fixture(
            Tensor::zeros(&[2, 2]),
            Tensor::vector(vec![0.5, 0.5]),
            vec![9.0, -4.0],
        )
        .unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn affine_matches_double_loop() {
        // 3x2 W, fixed pseudo-random entries.
        let w = [0.3, -0.7, 0.11, 0.42, -0.25, 0.9];
        let x = [0.6, -1.3];
        let b = [0.05, -0.02, 0.4];
        let mut expected = [0.0; 3];
        for r in 0..3 {
            let mut acc = 0.0;
            for c in 0..2 {
                acc += w[r * 2 + c] * x[c];
            }
            expected[r] = acc + b[r];
        }
        let out = affine_fixture(
            Tensor::matrix(3, 2, w.to_vec()).unwrap(),
            Tensor::vector(b.to_vec()),
            x.to_vec(),
        )
        .unwrap();
        assert!(close(&out, &expected, 1e-15));
    }

    #[test]
    fn affine_names_offending_operand() {
        let err = affine_fixture(Tensor::zeros(&[2, 2]), Tensor::zeros(&[3]), vec![1.0, 1.0])
            .unwrap_err();
        assert!(err.to_string().contains("`b`"), "{err}");
        let err = affine_fixture(Tensor::zeros(&[2, 2]), Tensor::zeros(&[2]), vec![1.0])
            .unwrap_err();
        assert!(err.to_string().contains("`x`"), "{err}");
    }
}
