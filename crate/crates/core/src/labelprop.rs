//! Harmonic-function label propagation on a dense similarity graph.

use crate::error::{invalid, Error, Result};
use crate::label::Label;
use crate::numerics::{gaussian, solve_spd, squared_distance, Matrix};

/// Propagated scores for the unlabeled block.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    /// `u x 2`; column 0 is the positive-class score.
    pub f_u: Matrix,
    pub y_lp: Vec<Label>,
    /// `|F_u[i,0] - F_u[i,1]|`
    pub h: Vec<f64>,
}

/// Dense Gaussian similarity graph with an empty diagonal.
pub fn gaussian_weights(x: &Matrix, width: f64) -> Result<Matrix> {
    if !(width.is_finite() && width > 0.0) {
        return Err(invalid(format!(
            "graph width must be positive, got {width}"
        )));
    }
    let m = x.rows();
    if m < 2 {
        return Err(invalid("a graph needs at least two nodes"));
    }
    let mut w = Matrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = gaussian(squared_distance(x.row(i), x.row(j)), width);
            w.set(i, j, v);
            w.set(j, i, v);
        }
    }
    Ok(w)
}

/// Solves `Lap_uu F_u = W_ul F_l` where the first `labels_l.len()` nodes of
/// `w` are the labeled ones.
pub fn harmonic_solve(w: &Matrix, labels_l: &[Label]) -> Result<PropagationResult> {
    if !w.is_square() {
        return Err(invalid("weight matrix must be square"));
    }
    let m = w.rows();
    let l = labels_l.len();
    if l > m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: l,
        });
    }
    if w.asymmetry() > 1e-12 * (1.0 + w.max_abs()) {
        return Err(invalid("weight matrix is not symmetric"));
    }
    if w.as_slice().iter().any(|&v| v < 0.0) {
        return Err(invalid("weights must be nonnegative"));
    }
    let u = m - l;

    let mut lap = Matrix::zeros(u, u);
    let mut rhs = Matrix::zeros(u, 2);
    for a in 0..u {
        let i = l + a;
        let degree: f64 = (0..m).filter(|&j| j != i).map(|j| w.get(i, j)).sum();
        if degree <= 0.0 {
            return Err(Error::DisconnectedNode { node: i });
        }
        lap.set(a, a, degree);
        for b in 0..u {
            if b != a {
                lap.set(a, b, -w.get(i, l + b));
            }
        }
        let (mut pos, mut neg) = (0.0, 0.0);
        for (j, lab) in labels_l.iter().enumerate() {
            match lab {
                Label::Positive => pos += w.get(i, j),
                Label::Negative => neg += w.get(i, j),
            }
        }
        rhs.set(a, 0, pos);
        rhs.set(a, 1, neg);
    }

    let f_u = solve_spd(&lap, &rhs)?;
    let mut y_lp = Vec::with_capacity(u);
    let mut h = Vec::with_capacity(u);
    for a in 0..u {
        let diff = f_u.get(a, 0) - f_u.get(a, 1);
        y_lp.push(Label::from_score(diff));
        h.push(diff.abs());
    }
    Ok(PropagationResult { f_u, y_lp, h })
}

/// Confidences signed by agreement with the semi-supervised predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedConfidence {
    pub h: Vec<f64>,
    /// Number of entries with `h >= 0`.
    pub nonnegative: usize,
}

/// `h_i <- y_s3vm_i * y_lp_i * h_i`.
pub fn lp_confidence_ranking(
    prop: &PropagationResult,
    y_s3vm: &[Label],
) -> Result<SignedConfidence> {
    if y_s3vm.len() != prop.h.len() {
        return Err(Error::DimensionMismatch {
            expected: prop.h.len(),
            got: y_s3vm.len(),
        });
    }
    let h: Vec<f64> = prop
        .h
        .iter()
        .zip(&prop.y_lp)
        .zip(y_s3vm)
        .map(|((&h, &lp), &s)| if lp == s { h } else { -h })
        .collect();
    let nonnegative = h.iter().filter(|&&v| v >= 0.0).count();
    Ok(SignedConfidence { h, nonnegative })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative as N, Positive as P};

    fn graph(m: usize, edges: &[(usize, usize, f64)]) -> Matrix {
        let mut w = Matrix::zeros(m, m);
        for &(i, j, v) in edges {
            w.set(i, j, v);
            w.set(j, i, v);
        }
        w
    }

    #[test]
    fn chain_from_one_positive() {
        // L(+1) - U1 - U2
        let w = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let r = harmonic_solve(&w, &[P]).unwrap();
        for a in 0..2 {
            assert!((r.f_u.get(a, 0) - 1.0).abs() < 1e-12);
            assert!(r.f_u.get(a, 1).abs() < 1e-12);
        }
        assert_eq!(r.y_lp, vec![P, P]);
        assert!(r.h.iter().all(|&h| (h - 1.0).abs() < 1e-12));
    }

    #[test]
    fn midpoint_between_classes_is_a_tie() {
        // L(+1) - U - L(-1), labeled first
        let w = graph(3, &[(0, 2, 1.0), (1, 2, 1.0)]);
        let r = harmonic_solve(&w, &[P, N]).unwrap();
        assert!((r.f_u.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((r.f_u.get(0, 1) - 0.5).abs() < 1e-12);
        assert!(r.h[0] < 1e-12);
    }

    #[test]
    fn isolated_unlabeled_node_is_named() {
        let w = graph(3, &[(0, 1, 1.0)]);
        match harmonic_solve(&w, &[P]) {
            Err(Error::DisconnectedNode { node }) => assert_eq!(node, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn asymmetric_weights_rejected() {
        let mut w = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        w.set(0, 2, 0.5);
        assert!(matches!(
            harmonic_solve(&w, &[P]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn gaussian_weight_conventions() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.6, 0.8], [3.0, 1.0]]).unwrap();
        let w = gaussian_weights(&x, 1.0).unwrap();
        for i in 0..3 {
            assert_eq!(w.get(i, i), 0.0);
        }
        assert!((w.get(0, 1) - (-0.5f64).exp()).abs() < 1e-15);
        assert!(w.asymmetry() <= 1e-12);
        assert!(gaussian_weights(&x, 0.0).is_err());
        assert!(gaussian_weights(&x, -2.0).is_err());
    }

    fn prop_with(h: Vec<f64>, y_lp: Vec<Label>) -> PropagationResult {
        PropagationResult {
            f_u: Matrix::zeros(h.len(), 2),
            y_lp,
            h,
        }
    }

    #[test]
    fn confidence_signing() {
        let p = prop_with(vec![0.9, 0.4], vec![P, P]);
        let s = lp_confidence_ranking(&p, &[P, N]).unwrap();
        assert_eq!(s.h, vec![0.9, -0.4]);
        assert_eq!(s.nonnegative, 1);

        let s = lp_confidence_ranking(&p, &[P, P]).unwrap();
        assert_eq!(s.h, p.h);
        assert_eq!(s.nonnegative, 2);

        let zero = prop_with(vec![0.0, 0.3], vec![P, N]);
        let s = lp_confidence_ranking(&zero, &[N, P]).unwrap();
        assert_eq!(s.nonnegative, 1);

        assert!(lp_confidence_ranking(&p, &[P]).is_err());
    }
}
