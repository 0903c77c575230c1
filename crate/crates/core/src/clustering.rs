//! k-means partitioning and single-linkage hierarchical clustering.
//!
//! The dendrogram uses scipy-style node numbering: leaves are `0..n`, and the
//! cluster created by merge step `s` (1-based) is node `n + s - 1`.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{invalid, Error, Result};
use crate::label::Label;
use crate::numerics::{euclidean, squared_distance, Matrix};

pub const KMEANS_MAX_ITER: usize = 300;

/// Hard assignment of instances to `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assignments: Vec<usize>,
    pub k: usize,
}

impl Partition {
    /// Member indices of every cluster, in ascending order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// Partition plus the within-cluster sum of squares after every Lloyd pass.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub partition: Partition,
    pub centroids: Matrix,
    pub sse_trace: Vec<f64>,
}

pub fn kmeans(x: &Matrix, k: usize, seed: u64) -> Result<Partition> {
    kmeans_fit(x, k, seed).map(|f| f.partition)
}

fn nearest_centroid(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.iter().enumerate() {
        let d = squared_distance(p, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_plus_plus(x: &Matrix, k: usize, rng: &mut Xoshiro256StarStar) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![x.row(first).to_vec()];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(x.row(i), x.row(first)))
        .collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            // rounding can leave target just past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // fewer distinct points than k
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.push(x.row(pick).to_vec());
        for i in 0..n {
            d2[i] = d2[i].min(squared_distance(x.row(i), x.row(pick)));
        }
    }
    centroids
}

fn recompute(x: &Matrix, assign: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let d = x.cols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in assign.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for (s, &cnt) in sums.iter_mut().zip(&counts) {
        if cnt > 0 {
            s.iter_mut().for_each(|v| *v /= cnt as f64);
        }
    }
    (sums, counts)
}

fn sse(x: &Matrix, assign: &[usize], centroids: &[Vec<f64>]) -> f64 {
    assign
        .iter()
        .enumerate()
        .map(|(i, &c)| squared_distance(x.row(i), &centroids[c]))
        .sum()
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(x: &Matrix, assign: &mut [usize], k: usize) -> Vec<Vec<f64>> {
    loop {
        let (centroids, counts) = recompute(x, assign, k);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return centroids;
        };
        let mut far = None;
        let mut far_d = f64::NEG_INFINITY;
        for (i, &c) in assign.iter().enumerate() {
            if counts[c] < 2 {
                continue;
            }
            let d = squared_distance(x.row(i), &centroids[c]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        // k <= n guarantees some cluster has a spare point
        assign[far.expect("k <= n")] = empty;
    }
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans_fit(x: &Matrix, k: usize, seed: u64) -> Result<KMeansFit> {
    let n = x.rows();
    if k < 1 {
        return Err(invalid("k must be at least 1"));
    }
    if k > n {
        return Err(invalid(format!(
            "k = {k} exceeds the number of instances {n}"
        )));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(x, k, &mut rng);
    let mut assign: Vec<usize> = (0..n)
        .map(|i| nearest_centroid(x.row(i), &centroids).0)
        .collect();
    centroids = repair_empty(x, &mut assign, k);
    let mut sse_trace = vec![sse(x, &assign, &centroids)];

    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for i in 0..n {
            let (c, d) = nearest_centroid(x.row(i), &centroids);
            // stay put on ties so the fixpoint test is stable
            if c != assign[i] && d < squared_distance(x.row(i), &centroids[assign[i]]) {
                assign[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        centroids = repair_empty(x, &mut assign, k);
        sse_trace.push(sse(x, &assign, &centroids));
    }

    let d = x.cols();
    let flat: Vec<f64> = centroids.into_iter().flatten().collect();
    Ok(KMeansFit {
        partition: Partition {
            assignments: assign,
            k,
        },
        centroids: Matrix::from_raw(k, d, flat),
        sse_trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

/// Ordered single-linkage merge list over `n` leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
    parent: Vec<usize>,
}

impl Dendrogram {
    pub fn from_merges(n: usize, merges: Vec<Merge>) -> Result<Self> {
        if n < 2 || merges.len() != n - 1 {
            return Err(invalid(format!(
                "a dendrogram over {n} leaves needs {} merges, got {}",
                n.saturating_sub(1),
                merges.len()
            )));
        }
        let total = 2 * n - 1;
        let mut parent = vec![usize::MAX; total];
        for (s, m) in merges.iter().enumerate() {
            let node = n + s;
            for child in [m.left, m.right] {
                if child >= node || parent[child] != usize::MAX {
                    return Err(invalid(format!(
                        "invalid child {child} at merge step {}",
                        s + 1
                    )));
                }
                parent[child] = node;
            }
        }
        if merges.windows(2).any(|w| w[1].height < w[0].height) {
            return Err(invalid("merge heights must be non-decreasing"));
        }
        Ok(Self { n, merges, parent })
    }

    pub fn n_leaves(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Merge step (1-based) that created `node`.
    fn step_of(&self, node: usize) -> usize {
        node - self.n + 1
    }

    fn check_leaf(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(invalid(format!(
                "leaf {i} out of range for {} leaves",
                self.n
            )))
        } else {
            Ok(())
        }
    }

    /// Lowest common ancestor of two distinct leaves.
    fn join_node(&self, i: usize, j: usize) -> usize {
        let mut on_path = vec![false; 2 * self.n - 1];
        let mut a = i;
        while a != usize::MAX {
            on_path[a] = true;
            a = self.parent[a];
        }
        let mut b = j;
        while !on_path[b] {
            b = self.parent[b];
        }
        b
    }

    /// Height at which leaves `i` and `j` first share a cluster.
    pub fn cophenetic_height(&self, i: usize, j: usize) -> Result<f64> {
        let step = cophenetic_step(self, i, j)?;
        Ok(self.merges[step - 1].height)
    }
}

/// Greedy single linkage; equal distances go to the lexicographically
/// smallest `(left, right)` node pair.
pub fn single_linkage(x: &Matrix) -> Result<Dendrogram> {
    let n = x.rows();
    if n < 2 {
        return Err(invalid("single linkage needs at least two instances"));
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(x.row(i), x.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    // slot s holds the cluster whose current node id is node[s]
    let mut node: Vec<usize> = (0..n).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..(n - 1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let d = dist[a * n + b];
                let key = (node[a].min(node[b]), node[a].max(node[b]));
                let better = match best {
                    None => true,
                    Some((bd, _, _, l, r)) => d < bd || (d == bd && key < (l, r)),
                };
                if better {
                    best = Some((d, a, b, key.0, key.1));
                }
            }
        }
        let (height, a, b, left, right) = best.expect("at least two active clusters");
        merges.push(Merge {
            left,
            right,
            height,
        });
        for &r in &active {
            if r != a && r != b {
                let d = dist[a * n + r].min(dist[b * n + r]);
                dist[a * n + r] = d;
                dist[r * n + a] = d;
            }
        }
        node[a] = n + step;
        active.retain(|&s| s != b);
    }
    Dendrogram::from_merges(n, merges)
}

/// 1-based merge step at which leaves `i` and `j` first co-cluster.
pub fn cophenetic_step(d: &Dendrogram, i: usize, j: usize) -> Result<usize> {
    d.check_leaf(i)?;
    d.check_leaf(j)?;
    if i == j {
        return Err(invalid("cophenetic step needs two distinct leaves"));
    }
    Ok(d.step_of(d.join_node(i, j)))
}

/// Merge-step distances from an unlabeled leaf to the nearest labeled leaf of
/// each class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSteps {
    pub index: usize,
    pub positive: usize,
    pub negative: usize,
}

impl LabelSteps {
    /// `n_i - p_i`; positive values lean towards the positive class.
    pub fn t(&self) -> i64 {
        self.negative as i64 - self.positive as i64
    }
}

/// `(p_i, n_i)` for every leaf whose state is `None`, in ascending order.
pub fn nearest_label_steps(d: &Dendrogram, state: &[Option<Label>]) -> Result<Vec<LabelSteps>> {
    let n = d.n_leaves();
    if state.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: state.len(),
        });
    }
    if !state.contains(&Some(Label::Positive)) || !state.contains(&Some(Label::Negative)) {
        return Err(Error::DegenerateLabels(
            "both classes must have a labeled instance".into(),
        ));
    }
    let total = 2 * n - 1;
    let mut has_pos = vec![false; total];
    let mut has_neg = vec![false; total];
    for (i, s) in state.iter().enumerate() {
        has_pos[i] = *s == Some(Label::Positive);
        has_neg[i] = *s == Some(Label::Negative);
    }
    for (s, m) in d.merges.iter().enumerate() {
        has_pos[n + s] = has_pos[m.left] || has_pos[m.right];
        has_neg[n + s] = has_neg[m.left] || has_neg[m.right];
    }
    let mut out = Vec::new();
    for (i, s) in state.iter().enumerate() {
        if s.is_some() {
            continue;
        }
        let (mut p, mut q) = (None, None);
        let mut a = d.parent[i];
        while a != usize::MAX && (p.is_none() || q.is_none()) {
            if p.is_none() && has_pos[a] {
                p = Some(d.step_of(a));
            }
            if q.is_none() && has_neg[a] {
                q = Some(d.step_of(a));
            }
            a = d.parent[a];
        }
        out.push(LabelSteps {
            index: i,
            positive: p.expect("root contains every label"),
            negative: q.expect("root contains every label"),
        });
    }
    Ok(out)
}
