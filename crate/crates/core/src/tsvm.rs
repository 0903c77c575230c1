//! Transductive SVM by label switching under an annealed unlabeled penalty.
//!
//! Unlabeled instances start with the inductive SVM's labels, with the
//! positive count fixed by the balance constraint. For each penalty `C_u` in
//! the schedule `1e-5 C, 2e-5 C, ..., C`, the trainer repeatedly swaps the
//! positive/negative pair whose swap lowers the objective most, retraining
//! after every swap, until no swap helps.

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::label::Label;
use crate::numerics::{gram, KernelSpec, Matrix};
use crate::svm::{
    check_labels, decision_values, model_from_solution, solve_dual, train_svc, SvmModel,
    DEFAULT_TOLERANCE,
};

/// Initial unlabeled penalty as a fraction of `C`.
pub const INITIAL_PENALTY_FRACTION: f64 = 1e-5;

const MIN_IMPROVEMENT: f64 = 1e-12;

/// Share of unlabeled instances to be labeled positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PosFraction {
    /// Labeled positive proportion, clamped to `[1/u, 1 - 1/u]`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub c_u: f64,
    /// Objective after the stage's first retrain and after every accepted swap.
    pub objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsvmResult {
    pub model: SvmModel,
    /// Final labels of the unlabeled instances, in index order.
    pub unlabeled_labels: Vec<Label>,
    /// Balanced labeling derived from the inductive SVM, before any swap.
    pub initial_labels: Vec<Label>,
    pub objective_trace: Vec<StageTrace>,
}

impl TsvmResult {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace
            .last()
            .and_then(|s| s.objectives.last().copied())
    }
}

/// `C_u` values: `1e-5 C` doubling until capped at `C`.
pub fn annealing_schedule(c: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut c_u = INITIAL_PENALTY_FRACTION * c;
    while c_u < c {
        out.push(c_u);
        c_u *= 2.0;
    }
    out.push(c);
    out
}

/// `round(fraction * u)` for the resolved fraction.
pub fn target_positive_count(
    pos_fraction: PosFraction,
    labeled: &[Label],
    u: usize,
) -> Result<usize> {
    let frac = match pos_fraction {
        PosFraction::Fixed(f) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(invalid(format!(
                    "positive fraction must lie in (0, 1), got {f}"
                )));
            }
            f
        }
        PosFraction::Auto => {
            if labeled.is_empty() {
                return Err(invalid(
                    "no labeled instances to estimate the class balance",
                ));
            }
            let p = labeled.iter().filter(|&&l| l == Label::Positive).count() as f64
                / labeled.len() as f64;
            if u >= 2 {
                let lo = 1.0 / u as f64;
                p.clamp(lo, 1.0 - lo)
            } else {
                p
            }
        }
    };
    Ok((frac * u as f64).round() as usize)
}

fn hinge(f: f64, y: Label) -> f64 {
    (1.0 - y.value() * f).max(0.0)
}

/// `1/2 |w|^2 + C sum_L hinge + C_u sum_U hinge` with the unlabeled
/// instances taking `labels_u`.
pub fn tsvm_objective(
    model: &SvmModel,
    d: &Dataset,
    labels_u: &[Label],
    c: f64,
    c_u: f64,
) -> Result<f64> {
    if labels_u.len() != d.n_unlabeled() {
        return Err(Error::DimensionMismatch {
            expected: d.n_unlabeled(),
            got: labels_u.len(),
        });
    }
    let f_l = decision_values(model, &d.labeled_x())?;
    let f_u = decision_values(model, &d.unlabeled_x())?;
    let loss_l: f64 = f_l
        .iter()
        .zip(d.labeled_labels())
        .map(|(&f, y)| hinge(f, y))
        .sum();
    let loss_u: f64 = f_u.iter().zip(labels_u).map(|(&f, &y)| hinge(f, y)).sum();
    Ok(0.5 * model.weight_norm_sq() + c * loss_l + c_u * loss_u)
}

/// Precomputed training problem over `[labeled; unlabeled]`.
struct Problem {
    x: Matrix,
    k: Matrix,
    y_l: Vec<Label>,
    kernel: KernelSpec,
    c: f64,
}

struct Fit {
    alpha: Vec<f64>,
    bias: f64,
    y: Vec<Label>,
    /// decision values on every training instance
    f: Vec<f64>,
    objective: f64,
}

impl Problem {
    fn new(d: &Dataset, kernel: KernelSpec, c: f64) -> Result<Self> {
        let mut order = d.labeled_indices();
        order.extend(d.unlabeled_indices());
        let x = d.x().select_rows(&order);
        let k = gram(&x, kernel)?;
        Ok(Self {
            x,
            k,
            y_l: d.labeled_labels(),
            kernel,
            c,
        })
    }

    fn l(&self) -> usize {
        self.y_l.len()
    }

    fn all_labels(&self, labels_u: &[Label]) -> Vec<Label> {
        self.y_l.iter().chain(labels_u).copied().collect()
    }

    fn decision(&self, alpha: &[f64], y: &[Label], bias: f64) -> Vec<f64> {
        let n = y.len();
        let mut f = vec![bias; n];
        for (j, (&a, &yj)) in alpha.iter().zip(y).enumerate() {
            if a == 0.0 {
                continue;
            }
            let coef = a * yj.value();
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += coef * self.k.get(i, j);
            }
        }
        debug_assert_eq!(f.len(), n);
        f
    }

    fn objective(&self, alpha: &[f64], y: &[Label], f: &[f64], c_u: f64) -> f64 {
        let l = self.l();
        let mut w2 = 0.0;
        for i in 0..y.len() {
            if alpha[i] == 0.0 {
                continue;
            }
            let ci = alpha[i] * y[i].value();
            for j in 0..y.len() {
                if alpha[j] != 0.0 {
                    w2 += ci * alpha[j] * y[j].value() * self.k.get(i, j);
                }
            }
        }
        let mut loss = 0.0;
        for i in 0..y.len() {
            let pen = if i < l { self.c } else { c_u };
            loss += pen * hinge(f[i], y[i]);
        }
        0.5 * w2 + loss
    }

    fn train(&self, labels_u: &[Label], c_u: f64) -> Fit {
        let y = self.all_labels(labels_u);
        let yv: Vec<f64> = y.iter().map(|l| l.value()).collect();
        let upper: Vec<f64> = (0..y.len())
            .map(|i| if i < self.l() { self.c } else { c_u })
            .collect();
        let sol = solve_dual(&self.k, &yv, &upper, DEFAULT_TOLERANCE);
        let f = self.decision(&sol.alpha, &y, sol.bias);
        let objective = self.objective(&sol.alpha, &y, &f, c_u);
        Fit {
            alpha: sol.alpha,
            bias: sol.bias,
            y,
            f,
            objective,
        }
    }

    fn to_model(&self, fit: &Fit) -> SvmModel {
        let sol = crate::svm::DualSolution {
            alpha: fit.alpha.clone(),
            bias: fit.bias,
        };
        model_from_solution(&self.x, &fit.y, &sol, self.kernel, self.c)
    }
}

/// Trains an SVM on the labeled instances plus the unlabeled ones under
/// `labels_u`, with penalty `c_u` on the latter.
pub fn fit_with_labels(
    d: &Dataset,
    labels_u: &[Label],
    kernel: KernelSpec,
    c: f64,
    c_u: f64,
) -> Result<SvmModel> {
    if labels_u.len() != d.n_unlabeled() {
        return Err(Error::DimensionMismatch {
            expected: d.n_unlabeled(),
            got: labels_u.len(),
        });
    }
    if !(c > 0.0 && c_u > 0.0) {
        return Err(invalid("penalties must be positive"));
    }
    let p = Problem::new(d, kernel, c)?;
    Ok(p.to_model(&p.train(labels_u, c_u)))
}

/// Best swap under the current decision values: the positive-labeled `i`
/// and negative-labeled `j` minimizing the hinge change, with its value.
fn best_swap(f_u: &[f64], labels: &[Label]) -> Option<(usize, usize, f64)> {
    let mut best_pos: Option<(usize, f64)> = None;
    let mut best_neg: Option<(usize, f64)> = None;
    for (i, (&f, &y)) in f_u.iter().zip(labels).enumerate() {
        let gain = hinge(f, y.flipped()) - hinge(f, y);
        let slot = match y {
            Label::Positive => &mut best_pos,
            Label::Negative => &mut best_neg,
        };
        if slot.is_none_or(|(_, g)| gain < g) {
            *slot = Some((i, gain));
        }
    }
    let ((i, gi), (j, gj)) = (best_pos?, best_neg?);
    Some((i, j, gi + gj))
}

pub fn train_tsvm(
    d: &Dataset,
    kernel: KernelSpec,
    c: f64,
    pos_fraction: PosFraction,
) -> Result<TsvmResult> {
    let y_l = d.labeled_labels();
    check_labels(&y_l)?;
    let u = d.n_unlabeled();
    let svm = train_svc(&d.labeled_x(), &y_l, kernel, c)?;
    if u == 0 {
        return Ok(TsvmResult {
            model: svm,
            unlabeled_labels: Vec::new(),
            initial_labels: Vec::new(),
            objective_trace: Vec::new(),
        });
    }

    let n_pos = target_positive_count(pos_fraction, &y_l, u)?;
    let scores = decision_values(&svm, &d.unlabeled_x())?;
    let mut rank: Vec<usize> = (0..u).collect();
    rank.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut labels = vec![Label::Negative; u];
    for &i in &rank[..n_pos] {
        labels[i] = Label::Positive;
    }
    let initial_labels = labels.clone();

    let problem = Problem::new(d, kernel, c)?;
    let l = problem.l();
    let mut trace = Vec::new();
    let mut fit = None;

    for c_u in annealing_schedule(c) {
        let mut current = problem.train(&labels, c_u);
        let mut objectives = vec![current.objective];
        while let Some((i, j, gain)) = best_swap(&current.f[l..], &labels) {
            let swapped_objective = current.objective + c_u * gain;
            if !(swapped_objective
                < current.objective - MIN_IMPROVEMENT * (1.0 + current.objective.abs()))
            {
                break;
            }
            labels[i] = Label::Negative;
            labels[j] = Label::Positive;
            let retrained = problem.train(&labels, c_u);
            if retrained.objective <= swapped_objective {
                current = retrained;
            } else {
                // inexact retrain: keep the previous hyperplane, which scores
                // better under the new labels
                current.objective = swapped_objective;
            }
            objectives.push(current.objective);
        }
        trace.push(StageTrace { c_u, objectives });
        fit = Some(current);
    }

    let fit = fit.expect("schedule is never empty");
    Ok(TsvmResult {
        model: problem.to_model(&fit),
        unlabeled_labels: labels,
        initial_labels,
        objective_trace: trace,
    })
}
