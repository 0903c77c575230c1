//! Independent reference implementations used by the integration tests.
#![allow(
    dead_code,
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord
)]

use rand::Rng;
use rand_xoshiro::Xoshiro256StarStar;

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub fn linear_kernel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn gaussian_kernel(a: &[f64], b: &[f64], width: f64) -> f64 {
    (-sq_dist(a, b) / (2.0 * width * width)).exp()
}

/// Result of the reference soft-margin dual solve.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub alpha: Vec<f64>,
    /// `sum a - 1/2 a'Qa` at the returned (feasible) point.
    pub dual: f64,
    /// Primal objective of `w(alpha)` with the best bias.
    pub primal: f64,
    /// Midpoint of the interval of optimal biases for `w(alpha)`.
    pub bias: f64,
}

/// Euclidean projection onto `{0 <= a <= upper, y'a = 0}`.
///
/// `y'a(lambda)` with `a(lambda) = clip(v - lambda y)` is piecewise linear and
/// non-increasing, so the root is found exactly between two breakpoints.
fn project(v: &[f64], y: &[f64], upper: &[f64]) -> Vec<f64> {
    let balance = |lambda: f64| -> f64 {
        v.iter()
            .zip(y)
            .zip(upper)
            .map(|((&vi, &yi), &ui)| yi * (vi - lambda * yi).clamp(0.0, ui))
            .sum()
    };
    let mut knots: Vec<f64> = v
        .iter()
        .zip(y)
        .zip(upper)
        .flat_map(|((&vi, &yi), &ui)| [yi * vi, yi * (vi - ui)])
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let values: Vec<f64> = knots.iter().map(|&k| balance(k)).collect();
    let lambda = if values[0] <= 0.0 {
        knots[0]
    } else if *values.last().unwrap() >= 0.0 {
        *knots.last().unwrap()
    } else {
        let i = values.iter().position(|&h| h <= 0.0).unwrap();
        let (k0, k1, h0, h1) = (knots[i - 1], knots[i], values[i - 1], values[i]);
        k0 + (k1 - k0) * h0 / (h0 - h1)
    };
    let mut a: Vec<f64> = v
        .iter()
        .zip(y)
        .zip(upper)
        .map(|((&vi, &yi), &ui)| (vi - lambda * yi).clamp(0.0, ui))
        .collect();
    // rounding can leave a tiny imbalance; absorb it where there is room
    let mut rest: f64 = a.iter().zip(y).map(|(a, y)| a * y).sum();
    for i in 0..a.len() {
        if rest == 0.0 {
            break;
        }
        let moved = (a[i] - rest * y[i]).clamp(0.0, upper[i]);
        rest -= (a[i] - moved) * y[i];
        a[i] = moved;
    }
    a
}

fn qform(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            s += a[i] * q[i][j] * a[j];
        }
    }
    s
}

/// Primal value and bias interval midpoint for the weight vector of `alpha`.
fn primal_at(k: &[Vec<f64>], y: &[f64], upper: &[f64], alpha: &[f64]) -> (f64, f64) {
    let n = y.len();
    let f: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| alpha[j] * y[j] * k[i][j]).sum())
        .collect();
    let norm: f64 = (0..n).map(|i| alpha[i] * y[i] * f[i]).sum();
    let loss = |b: f64| -> f64 {
        (0..n)
            .map(|i| upper[i] * (1.0 - y[i] * (f[i] + b)).max(0.0))
            .sum()
    };
    let candidates: Vec<f64> = (0..n).map(|i| y[i] - f[i]).collect();
    let values: Vec<f64> = candidates.iter().map(|&b| loss(b)).collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + best.abs());
    let near: Vec<f64> = candidates
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v <= best + tol)
        .map(|(&b, _)| b)
        .collect();
    let lo = near.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = near.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0.5 * norm + best, 0.5 * (lo + hi))
}

/// Solves `a x = b` by Gaussian elimination; `None` when (nearly) singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Exact optimum on the active set suggested by `a`, if it is feasible.
fn polish(q: &[Vec<f64>], y: &[f64], upper: &[f64], a: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let tol = 1e-7 * upper.iter().fold(0.0f64, |m, &u| m.max(u));
    let free: Vec<usize> = (0..n)
        .filter(|&i| a[i] > tol && a[i] < upper[i] - tol)
        .collect();
    if free.is_empty() {
        return None;
    }
    let mut out: Vec<f64> = (0..n)
        .map(|i| if a[i] <= tol { 0.0 } else { upper[i] })
        .collect();
    let fixed: Vec<usize> = (0..n).filter(|i| !free.contains(i)).collect();
    let f = free.len();
    let mut m = vec![vec![0.0; f + 1]; f + 1];
    let mut rhs = vec![0.0; f + 1];
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            m[r][c] = q[i][j];
        }
        m[r][f] = y[i];
        m[f][r] = y[i];
        rhs[r] = 1.0 - fixed.iter().map(|&j| q[i][j] * out[j]).sum::<f64>();
    }
    rhs[f] = -fixed.iter().map(|&j| y[j] * out[j]).sum::<f64>();
    let x = solve_linear(m, rhs)?;
    for (r, &i) in free.iter().enumerate() {
        if !(0.0..=upper[i]).contains(&x[r]) {
            return None;
        }
        out[i] = x[r];
    }
    Some(out)
}

/// Accelerated projected gradient on the dual, finished by an exact
/// active-set solve and stopped on the duality gap.
pub fn svm_dual_oracle(k: &[Vec<f64>], y: &[f64], upper: &[f64]) -> QpSolution {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect())
        .collect();
    let matvec = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| q[i][j] * a[j]).sum::<f64>())
            .collect()
    };
    // largest eigenvalue by power iteration, padded
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = matvec(&v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / norm).collect();
    }
    let step = 1.0 / (1.05 * lambda).max(1e-12);
    let dual = |a: &[f64]| a.iter().sum::<f64>() - 0.5 * qform(&q, a);
    let gap = |a: &[f64]| primal_at(k, y, upper, a).0 - dual(a);

    let mut a = project(&vec![0.0; n], y, upper);
    let mut z = a.clone();
    let mut t = 1.0f64;
    for it in 1..=200_000 {
        let g: Vec<f64> = matvec(&z).iter().map(|v| v - 1.0).collect();
        let v: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&v, y, upper);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // restart when the objective goes down
        if dual(&next) < dual(&a) {
            z = a.clone();
            t = 1.0;
            continue;
        }
        z = next
            .iter()
            .zip(&a)
            .map(|(n1, a0)| n1 + (t - 1.0) / t_next * (n1 - a0))
            .collect();
        a = next;
        t = t_next;
        if it % 50 == 0 {
            let target = 1e-10 * (1.0 + dual(&a).abs());
            if gap(&a) <= target {
                break;
            }
            if let Some(p) = polish(&q, y, upper, &a) {
                if dual(&p) >= dual(&a) && gap(&p) <= target {
                    a = p;
                    break;
                }
            }
        }
    }
    let (primal, bias) = primal_at(k, y, upper, &a);
    QpSolution {
        dual: dual(&a),
        alpha: a,
        primal,
        bias,
    }
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let factor = m[r][col];
                if factor != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= factor * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Largest edge on the minimum spanning tree path between every pair.
pub fn minimax_distances(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    // Prim on the complete graph
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut link = vec![usize::MAX; n];
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    best[0] = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&i| !in_tree[i])
            .min_by(|&i, &j| best[i].total_cmp(&best[j]))
            .unwrap();
        in_tree[u] = true;
        if link[u] != usize::MAX {
            let w = dist(&points[u], &points[link[u]]);
            adj[u].push((link[u], w));
            adj[link[u]].push((u, w));
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = dist(&points[u], &points[v]);
                if d < best[v] {
                    best[v] = d;
                    link[v] = u;
                }
            }
        }
    }
    let mut out = vec![vec![0.0; n]; n];
    for (s, row) in out.iter_mut().enumerate() {
        let mut stack = vec![(s, usize::MAX, 0.0f64)];
        while let Some((u, from, m)) = stack.pop() {
            row[u] = m;
            for &(v, w) in &adj[u] {
                if v != from {
                    stack.push((v, u, m.max(w)));
                }
            }
        }
    }
    out
}

/// Student-t quantile by bisection on a Simpson-rule CDF.
pub fn t_quantile_by_quadrature(p: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let norm = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp()
        / (df * std::f64::consts::PI).sqrt();
    let pdf = |x: f64| norm * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let cdf = |t: f64| {
        let n = 20_000;
        let h = t / n as f64;
        let mut s = pdf(0.0) + pdf(t);
        for i in 1..n {
            s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        0.5 + s * h / 3.0
    };
    let (mut lo, mut hi) = (0.0, 50.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Random ±1 labels containing both classes.
pub fn both_classes(rng: &mut Xoshiro256StarStar, n: usize) -> Vec<bool> {
    loop {
        let v: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if v.iter().any(|&b| b) && v.iter().any(|&b| !b) {
            return v;
        }
    }
}

/// Every labeling of `u` items with exactly `pos` positives.
pub fn balanced_labelings(u: usize, pos: usize) -> Vec<Vec<bool>> {
    (0u32..(1 << u))
        .filter(|mask| mask.count_ones() as usize == pos)
        .map(|mask| (0..u).map(|i| mask >> i & 1 == 1).collect())
        .collect()
}
