//! Accuracy, paired t-tests and win/tie/loss tallies.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::label::Label;

/// Default significance level of the paired test.
pub const ALPHA: f64 = 0.05;

/// Fraction of positions where `predicted` and `truth` agree.
pub fn accuracy(predicted: &[Label], truth: &[Label]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(invalid("accuracy of an empty prediction"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Student-t cumulative distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse of [`student_t_cdf`] by bisection.
pub fn student_t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    if !(df > 0.0 && df.is_finite()) {
        return Err(invalid(format!(
            "degrees of freedom must be positive, got {df}"
        )));
    }
    if p < 0.5 {
        return Ok(-student_t_quantile(1.0 - p, df)?);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while student_t_cdf(hi, df) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-sided critical value `t_{1 - alpha/2, df}`.
pub fn t_critical(df: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    student_t_quantile(1.0 - alpha / 2.0, df as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Win,
    Tie,
    Loss,
}

impl Outcome {
    pub fn reversed(self) -> Outcome {
        match self {
            Outcome::Win => Outcome::Loss,
            Outcome::Tie => Outcome::Tie,
            Outcome::Loss => Outcome::Win,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Win => "win",
            Outcome::Tie => "tie",
            Outcome::Loss => "loss",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub outcome: Outcome,
    /// Infinite for a zero-variance difference with nonzero mean.
    pub t: f64,
    pub critical: f64,
}

/// Two-sided paired t-test of `a` against `b`.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(invalid("a paired t-test needs at least two pairs"));
    }
    let critical = t_critical(n - 1, alpha)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();

    // rounding noise from shifting both samples must not read as signal
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * (1.0 + scale);
    let by_sign = |m: f64| if m > 0.0 { Outcome::Win } else { Outcome::Loss };
    if sd <= tol {
        return Ok(if mean.abs() <= tol {
            TTest {
                outcome: Outcome::Tie,
                t: 0.0,
                critical,
            }
        } else {
            TTest {
                outcome: by_sign(mean),
                t: f64::INFINITY.copysign(mean),
                critical,
            }
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let outcome = if t.abs() > critical {
        by_sign(mean)
    } else {
        Outcome::Tie
    };
    Ok(TTest {
        outcome,
        t,
        critical,
    })
}

/// Per-repeat accuracies of one method on one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub name: String,
    pub accuracies: Vec<f64>,
}

impl MethodRun {
    pub fn new(name: impl Into<String>, accuracies: Vec<f64>) -> Result<Self> {
        if let Some(a) = accuracies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(invalid(format!("accuracy {a} outside [0, 1]")));
        }
        Ok(Self {
            name: name.into(),
            accuracies,
        })
    }

    pub fn mean(&self) -> f64 {
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }

    /// Sample standard deviation; zero for a single repeat.
    pub fn std(&self) -> f64 {
        let n = self.accuracies.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.accuracies.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub method: String,
    pub baseline: String,
    pub outcome: Outcome,
    pub t: f64,
    pub alpha: f64,
}

/// Compares every run against `baseline` at level [`ALPHA`].
pub fn wtl_table(runs: &[MethodRun], baseline: &MethodRun) -> Result<Vec<Comparison>> {
    runs.iter()
        .map(|run| {
            if run.accuracies.len() != baseline.accuracies.len() {
                return Err(invalid(format!(
                    "{} has {} repeats but {} has {}",
                    run.name,
                    run.accuracies.len(),
                    baseline.name,
                    baseline.accuracies.len()
                )));
            }
            let test = paired_t_test(&run.accuracies, &baseline.accuracies, ALPHA)?;
            Ok(Comparison {
                method: run.name.clone(),
                baseline: baseline.name.clone(),
                outcome: test.outcome,
                t: test.t,
                alpha: ALPHA,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WtlCounts {
    pub win: usize,
    pub tie: usize,
    pub loss: usize,
}

impl WtlCounts {
    pub fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Win => self.win += 1,
            Outcome::Tie => self.tie += 1,
            Outcome::Loss => self.loss += 1,
        }
    }
}

impl fmt::Display for WtlCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.win, self.tie, self.loss)
    }
}

/// Tallies outcomes per method over several settings, in first-seen order.
pub fn aggregate_wtl<'a>(
    tables: impl IntoIterator<Item = &'a [Comparison]>,
) -> Vec<(String, WtlCounts)> {
    let mut out: Vec<(String, WtlCounts)> = Vec::new();
    for table in tables {
        for c in table {
            match out.iter_mut().find(|(name, _)| *name == c.method) {
                Some((_, counts)) => counts.add(c.outcome),
                None => {
                    let mut counts = WtlCounts::default();
                    counts.add(c.outcome);
                    out.push((c.method.clone(), counts));
                }
            }
        }
    }
    out
}
