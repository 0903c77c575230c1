//! Soft-margin kernel SVM trained by SMO on the dual.
//!
//! The dual problem is
//!
//! ```text
//! min  1/2 a'Qa - e'a    s.t.  y'a = 0,  0 <= a_i <= C_i
//! ```
//!
//! with `Q_ij = y_i y_j K(x_i, x_j)`. Per-instance upper bounds `C_i` let the
//! transductive trainer give unlabeled points their own penalty.

use crate::error::{invalid, Error, Result};
use crate::label::Label;
use crate::numerics::{gram, KernelSpec, Matrix};

/// Stopping threshold on the maximal KKT violation.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
/// Hard cap on the number of pair updates.
pub const MAX_PAIR_UPDATES: usize = 10_000_000;

const TAU: f64 = 1e-12;

/// A trained binary SVM. Only instances with nonzero dual weight are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    alphas: Vec<f64>,
    bias: f64,
    kernel: KernelSpec,
    support_x: Matrix,
    support_y: Vec<Label>,
    c: f64,
}

impl SvmModel {
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn support_x(&self) -> &Matrix {
        &self.support_x
    }

    pub fn support_y(&self) -> &[Label] {
        &self.support_y
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.support_x.cols()
    }

    /// `sum_ij a_i a_j y_i y_j K(x_i, x_j)`, the squared RKHS norm of `w`.
    pub fn weight_norm_sq(&self) -> f64 {
        let n = self.alphas.len();
        let mut total = 0.0;
        for i in 0..n {
            let ci = self.alphas[i] * self.support_y[i].value();
            for j in 0..n {
                let cj = self.alphas[j] * self.support_y[j].value();
                total += ci
                    * cj
                    * self
                        .kernel
                        .eval(self.support_x.row(i), self.support_x.row(j));
            }
        }
        total
    }

    /// Dual objective `sum a - 1/2 |w|^2` (to be maximized).
    pub fn dual_objective(&self) -> f64 {
        self.alphas.iter().sum::<f64>() - 0.5 * self.weight_norm_sq()
    }

    fn decision_one(&self, x: &[f64]) -> f64 {
        let mut f = self.bias;
        for (i, &a) in self.alphas.iter().enumerate() {
            f += a * self.support_y[i].value() * self.kernel.eval(self.support_x.row(i), x);
        }
        f
    }
}

/// Output of the raw dual solver over a fixed gram matrix.
#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
}

/// SMO with maximal-violating-pair working set selection.
pub(crate) fn solve_dual(k: &Matrix, y: &[f64], upper: &[f64], tol: f64) -> DualSolution {
    let n = y.len();
    debug_assert_eq!(k.rows(), n);
    debug_assert_eq!(upper.len(), n);

    let mut alpha = vec![0.0; n];
    // gradient of 1/2 a'Qa - e'a
    let mut grad = vec![-1.0; n];

    let is_up = |t: usize, a: &[f64]| {
        if y[t] > 0.0 {
            a[t] < upper[t]
        } else {
            a[t] > 0.0
        }
    };
    let is_low = |t: usize, a: &[f64]| {
        if y[t] > 0.0 {
            a[t] > 0.0
        } else {
            a[t] < upper[t]
        }
    };

    for _ in 0..MAX_PAIR_UPDATES {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if is_up(t, &alpha) && v > gmax {
                gmax = v;
                i = t;
            }
            if is_low(t, &alpha) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            break;
        }

        let (ci, cj) = (upper[i], upper[j]);
        let qij = y[i] * y[j] * k.get(i, j);
        let (qii, qjj) = (k.get(i, i), k.get(j, j));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        if y[i] != y[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        if di == 0.0 && dj == 0.0 {
            break;
        }
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k.get(t, i) * di + y[j] * k.get(t, j) * dj);
        }
    }

    let bias = compute_bias(&alpha, &grad, y, upper);
    DualSolution { alpha, bias }
}

/// Mean of `y_i - sum_j a_j y_j K_ji` over free vectors, else the midpoint of
/// the bracket implied by the bounded ones.
fn compute_bias(alpha: &[f64], grad: &[f64], y: &[f64], upper: &[f64]) -> f64 {
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut lb = f64::NEG_INFINITY;
    let mut ub = f64::INFINITY;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= upper[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else if lb.is_finite() && ub.is_finite() {
        0.5 * (lb + ub)
    } else if lb.is_finite() {
        lb
    } else if ub.is_finite() {
        ub
    } else {
        0.0
    };
    -rho
}

/// Builds a model from a dual solution, dropping zero-weight instances.
pub(crate) fn model_from_solution(
    x: &Matrix,
    y: &[Label],
    sol: &DualSolution,
    kernel: KernelSpec,
    c: f64,
) -> SvmModel {
    let keep: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
    SvmModel {
        alphas: keep.iter().map(|&i| sol.alpha[i]).collect(),
        bias: sol.bias,
        kernel,
        support_x: x.select_rows(&keep),
        support_y: keep.iter().map(|&i| y[i]).collect(),
        c,
    }
}

pub(crate) fn check_labels(y: &[Label]) -> Result<()> {
    if y.is_empty() {
        return Err(invalid("training set is empty"));
    }
    let pos = y.contains(&Label::Positive);
    let neg = y.contains(&Label::Negative);
    if !(pos && neg) {
        return Err(Error::DegenerateLabels(
            "training labels must contain both classes".into(),
        ));
    }
    Ok(())
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("C must be positive, got {c}")))
    }
}

/// Trains the inductive SVM on labeled instances `x` with labels `y`.
pub fn train_svc(x: &Matrix, y: &[Label], kernel: KernelSpec, c: f64) -> Result<SvmModel> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    check_labels(y)?;
    check_c(c)?;
    let k = gram(x, kernel)?;
    let yv: Vec<f64> = y.iter().map(|l| l.value()).collect();
    let upper = vec![c; y.len()];
    let sol = solve_dual(&k, &yv, &upper, DEFAULT_TOLERANCE);
    Ok(model_from_solution(x, y, &sol, kernel, c))
}

/// `f(x) = sum_i a_i y_i K(x_i, x) + b` for every row of `x`.
pub fn decision_values(model: &SvmModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.cols(),
        });
    }
    Ok(x.iter_rows().map(|r| model.decision_one(r)).collect())
}

/// Signs of the decision values, with ties going to `+1`.
pub fn predict_labels(model: &SvmModel, x: &Matrix) -> Result<Vec<Label>> {
    Ok(decision_values(model, x)?
        .into_iter()
        .map(Label::from_score)
        .collect())
}
