//! Per-instance choice between the inductive SVM and the S3VM prediction.
//!
//! All selectors take the two prediction vectors over the unlabeled
//! instances of a [`Dataset`], in ascending index order, and return fused
//! labels in the same order.
//!
//! * [`select_c`] votes per k-means cluster: the S3VM labels are adopted on a
//!   cluster when both learners lean the same way and the S3VM leans harder.
//! * [`select_p`] ranks instances by label-propagation confidence signed by
//!   agreement with the S3VM, and adopts the top few.
//! * [`select_us`] looks only at disagreements, scores them by how much
//!   sooner they meet one class than the other in a single-linkage
//!   dendrogram, and adopts the confident ones by weighted vote.

use crate::clustering::{kmeans, nearest_label_steps, single_linkage, LabelSteps};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::label::Label;
use crate::labelprop::{harmonic_solve, lp_confidence_ranking};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Svm,
    S3vm,
}

/// Label bias and confidence of one learner on one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vote {
    /// Sign of the label sum; `0` for a perfect split.
    pub bias: i8,
    pub confidence: i64,
}

impl Vote {
    pub fn of(labels: impl IntoIterator<Item = Label>) -> Vote {
        let sum: i64 = labels.into_iter().map(Label::sign).sum();
        Vote {
            bias: sum.signum() as i8,
            confidence: sum.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterVote {
    pub members: Vec<usize>,
    pub svm: Vote,
    pub s3vm: Vote,
    pub use_s3vm: bool,
}

/// The cluster rule: same nonzero bias and strictly higher S3VM confidence.
pub fn cluster_decision(svm: Vote, s3vm: Vote) -> bool {
    svm.bias != 0 && svm.bias == s3vm.bias && s3vm.confidence > svm.confidence
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostics {
    Cluster(Vec<ClusterVote>),
    Propagation {
        /// Confidence signed by S3VM/propagation agreement, per unlabeled instance.
        signed_h: Vec<f64>,
        nonnegative: usize,
        adopted: usize,
    },
    Hierarchical {
        /// Positions (in the unlabeled order) where the learners disagree.
        disagreements: Vec<usize>,
        /// `(p, n)` steps for each disagreement, same order.
        steps: Vec<LabelSteps>,
        /// Positions whose `|t|` clears the threshold.
        confident: Vec<usize>,
        threshold: f64,
        s3vm_score: i64,
        svm_score: i64,
        confident_by_s3vm: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub final_labels: Vec<Label>,
    pub source: Vec<Source>,
    pub diagnostics: Diagnostics,
}

impl SelectionOutcome {
    fn assemble(
        y_svm: &[Label],
        y_s3vm: &[Label],
        source: Vec<Source>,
        diagnostics: Diagnostics,
    ) -> Self {
        let final_labels = source
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                Source::Svm => y_svm[i],
                Source::S3vm => y_s3vm[i],
            })
            .collect();
        Self {
            final_labels,
            source,
            diagnostics,
        }
    }

    pub fn s3vm_adopted(&self) -> usize {
        self.source.iter().filter(|&&s| s == Source::S3vm).count()
    }
}

fn check_predictions(y_svm: &[Label], y_s3vm: &[Label], d: &Dataset) -> Result<()> {
    let u = d.n_unlabeled();
    for len in [y_svm.len(), y_s3vm.len()] {
        if len != u {
            return Err(Error::DimensionMismatch {
                expected: u,
                got: len,
            });
        }
    }
    Ok(())
}

/// Cluster-vote selection. Labeled members vote with their true label for
/// both learners.
pub fn select_c(
    y_svm: &[Label],
    y_s3vm: &[Label],
    d: &Dataset,
    k: usize,
    seed: u64,
) -> Result<SelectionOutcome> {
    check_predictions(y_svm, y_s3vm, d)?;
    let partition = kmeans(d.x(), k, seed)?;

    let mut position = vec![None; d.len()];
    for (p, i) in d.unlabeled_indices().into_iter().enumerate() {
        position[i] = Some(p);
    }
    let state = d.label_state();
    let pick = |i: usize, preds: &[Label]| match position[i] {
        Some(p) => preds[p],
        None => state[i].expect("labeled instance"),
    };

    let mut source = vec![Source::Svm; y_svm.len()];
    let mut votes = Vec::with_capacity(k);
    for members in partition.members() {
        let svm = Vote::of(members.iter().map(|&i| pick(i, y_svm)));
        let s3vm = Vote::of(members.iter().map(|&i| pick(i, y_s3vm)));
        let use_s3vm = cluster_decision(svm, s3vm);
        if use_s3vm {
            for &i in &members {
                if let Some(p) = position[i] {
                    source[p] = Source::S3vm;
                }
            }
        }
        votes.push(ClusterVote {
            members,
            svm,
            s3vm,
            use_s3vm,
        });
    }
    Ok(SelectionOutcome::assemble(
        y_svm,
        y_s3vm,
        source,
        Diagnostics::Cluster(votes),
    ))
}

/// `min(floor(eta * u), c)`.
pub fn propagation_quota(eta: f64, u: usize, nonnegative: usize) -> usize {
    // the small offset keeps e.g. 0.29 * 100 from flooring to 28
    let quota = (eta * u as f64 + 1e-9).floor() as usize;
    quota.min(nonnegative)
}

/// Adopts S3VM labels on the `min(floor(eta u), c)` instances with the largest
/// signed confidence; ties go to the lower index.
pub fn select_from_signed_confidence(
    y_svm: &[Label],
    y_s3vm: &[Label],
    signed_h: Vec<f64>,
    nonnegative: usize,
    eta: f64,
) -> SelectionOutcome {
    let u = signed_h.len();
    let adopted = propagation_quota(eta, u, nonnegative);
    let mut order: Vec<usize> = (0..u).collect();
    order.sort_by(|&a, &b| signed_h[b].total_cmp(&signed_h[a]).then(a.cmp(&b)));
    let mut source = vec![Source::Svm; u];
    for &p in &order[..adopted] {
        source[p] = Source::S3vm;
    }
    SelectionOutcome::assemble(
        y_svm,
        y_s3vm,
        source,
        Diagnostics::Propagation {
            signed_h,
            nonnegative,
            adopted,
        },
    )
}

/// Propagation-confidence selection over graph `w` (indexed like `d`).
pub fn select_p(
    y_svm: &[Label],
    y_s3vm: &[Label],
    d: &Dataset,
    w: &Matrix,
    eta: f64,
) -> Result<SelectionOutcome> {
    check_predictions(y_svm, y_s3vm, d)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid(format!("eta must lie in (0, 1], got {eta}")));
    }
    if w.rows() != d.len() || w.cols() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: d.len(),
            got: w.rows(),
        });
    }
    let mut order = d.labeled_indices();
    order.extend(d.unlabeled_indices());
    let prop = harmonic_solve(&w.select(&order, &order), &d.labeled_labels())?;
    let signed = lp_confidence_ranking(&prop, y_s3vm)?;
    Ok(select_from_signed_confidence(
        y_svm,
        y_s3vm,
        signed.h,
        signed.nonnegative,
        eta,
    ))
}

/// Dendrogram steps for every unlabeled instance of `d`, in index order.
pub fn unlabeled_label_steps(d: &Dataset) -> Result<Vec<LabelSteps>> {
    let tree = single_linkage(d.x())?;
    nearest_label_steps(&tree, &d.label_state())
}

/// Hierarchical-clustering selection; builds the dendrogram on demand.
pub fn select_us(
    y_svm: &[Label],
    y_s3vm: &[Label],
    d: &Dataset,
    epsilon: f64,
) -> Result<SelectionOutcome> {
    check_predictions(y_svm, y_s3vm, d)?;
    let labeled = d.labeled_labels();
    if !labeled.contains(&Label::Positive) || !labeled.contains(&Label::Negative) {
        return Err(Error::DegenerateLabels(
            "both classes must be labeled".into(),
        ));
    }
    let steps = if y_svm == y_s3vm {
        Vec::new()
    } else {
        unlabeled_label_steps(d)?
    };
    select_us_with_steps(y_svm, y_s3vm, &steps, d.len(), epsilon)
}

/// [`select_us`] with precomputed steps (one entry per unlabeled instance,
/// or empty when the learners agree everywhere).
pub fn select_us_with_steps(
    y_svm: &[Label],
    y_s3vm: &[Label],
    steps: &[LabelSteps],
    m: usize,
    epsilon: f64,
) -> Result<SelectionOutcome> {
    if y_svm.len() != y_s3vm.len() {
        return Err(Error::DimensionMismatch {
            expected: y_svm.len(),
            got: y_s3vm.len(),
        });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let disagreements: Vec<usize> = (0..y_svm.len())
        .filter(|&p| y_svm[p] != y_s3vm[p])
        .collect();
    if !disagreements.is_empty() && steps.len() != y_svm.len() {
        return Err(Error::DimensionMismatch {
            expected: y_svm.len(),
            got: steps.len(),
        });
    }
    let threshold = epsilon * m as f64;
    let confident: Vec<usize> = disagreements
        .iter()
        .copied()
        .filter(|&p| steps[p].t().abs() as f64 >= threshold)
        .collect();
    let s3vm_score: i64 = confident
        .iter()
        .map(|&p| y_s3vm[p].sign() * steps[p].t())
        .sum();
    let svm_score: i64 = confident
        .iter()
        .map(|&p| y_svm[p].sign() * steps[p].t())
        .sum();
    let confident_by_s3vm = s3vm_score >= svm_score;

    let mut source = vec![Source::Svm; y_svm.len()];
    if confident_by_s3vm {
        for &p in &confident {
            source[p] = Source::S3vm;
        }
    }
    let diag = Diagnostics::Hierarchical {
        steps: disagreements.iter().map(|&p| steps[p]).collect(),
        disagreements,
        confident,
        threshold,
        s3vm_score,
        svm_score,
        confident_by_s3vm,
    };
    Ok(SelectionOutcome::assemble(y_svm, y_s3vm, source, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelprop::gaussian_weights;
    use proptest::prelude::*;
    use Label::{Negative as N, Positive as P};

    #[test]
    fn cluster_rule_examples() {
        let svm = Vote::of([P, P, N]);
        let s3vm = Vote::of([P, P, P]);
        assert_eq!(
            svm,
            Vote {
                bias: 1,
                confidence: 1
            }
        );
        assert_eq!(
            s3vm,
            Vote {
                bias: 1,
                confidence: 3
            }
        );
        assert!(cluster_decision(svm, s3vm));

        // bias mismatch
        assert!(!cluster_decision(Vote::of([P, P, N]), Vote::of([N, N, N])));
        // equal confidence is not enough
        assert!(!cluster_decision(Vote::of([P, P, N]), Vote::of([N, P, P])));
        // perfectly split clusters never match
        assert!(!cluster_decision(Vote::of([P, N]), Vote::of([N, P])));
        assert_eq!(Vote::of([P, N]).bias, 0);
    }

    fn toy() -> Dataset {
        let x = Matrix::column(&[0.0, 0.2, 0.4, 0.6, 5.0, 5.2, 5.4, 5.6, 2.4, 2.6]).unwrap();
        let y = [P, P, P, P, N, N, N, N, P, N];
        let mut mask = vec![false; 10];
        mask[0] = true;
        mask[7] = true;
        Dataset::from_split(x, &y, mask).unwrap()
    }

    #[test]
    fn select_c_respects_cluster_votes() {
        let d = toy();
        // unlabeled order: 1,2,3,4,5,6,8,9
        let svm = [P, P, N, N, N, N, P, N];
        let s3vm = [P, P, P, N, N, N, P, N];
        let out = select_c(&svm, &s3vm, &d, 2, 1).unwrap();
        // the left cluster leans positive under both, harder under the S3VM
        assert_eq!(out.final_labels[2], P);
        assert!(out
            .final_labels
            .iter()
            .zip(svm.iter().zip(&s3vm))
            .all(|(f, (a, b))| f == a || f == b));
        assert!(select_c(&svm, &s3vm, &d, 11, 1).is_err());
        assert!(select_c(&svm, &s3vm, &d, 0, 1).is_err());
    }

    #[test]
    fn propagation_quota_rule() {
        // u = 10, eta = 0.1, c = 2 -> one instance
        let svm = vec![N; 10];
        let s3vm = vec![P; 10];
        let mut h = vec![-0.1; 10];
        h[0] = 0.3;
        h[1] = 0.8;
        h[2] = -0.2;
        let out = select_from_signed_confidence(&svm, &s3vm, h, 2, 0.1);
        assert_eq!(out.s3vm_adopted(), 1);
        assert_eq!(out.source[1], Source::S3vm);

        let out = select_from_signed_confidence(&svm, &s3vm, vec![-0.5; 10], 0, 0.5);
        assert_eq!(out.s3vm_adopted(), 0);
        assert_eq!(out.final_labels, svm);

        assert_eq!(propagation_quota(0.29, 100, 100), 29);
        assert_eq!(propagation_quota(0.1, 9, 5), 0);
    }

    #[test]
    fn propagation_ties_prefer_lower_index() {
        let svm = vec![N; 4];
        let s3vm = vec![P; 4];
        let out = select_from_signed_confidence(&svm, &s3vm, vec![0.5, 0.7, 0.7, 0.7], 4, 0.5);
        assert_eq!(
            out.source,
            vec![Source::Svm, Source::S3vm, Source::S3vm, Source::Svm]
        );
    }

    #[test]
    fn select_p_with_agreeing_learners() {
        let d = toy();
        let w = gaussian_weights(d.x(), 1.0).unwrap();
        let y = [P, P, P, N, N, N, P, N];
        let out = select_p(&y, &y, &d, &w, 0.5).unwrap();
        assert_eq!(out.final_labels, y.to_vec());
        assert!(select_p(&y, &y, &d, &w, 0.0).is_err());
    }

    #[test]
    fn select_us_without_disagreement() {
        let d = toy();
        let y = [P, P, P, N, N, N, P, N];
        let out = select_us(&y, &y, &d, 0.1).unwrap();
        assert_eq!(out.final_labels, y.to_vec());
        assert_eq!(out.s3vm_adopted(), 0);
    }

    fn worked() -> Dataset {
        // {0, 1, 3, 10}: 0 labeled +1, 10 labeled -1
        let x = Matrix::column(&[0.0, 1.0, 3.0, 10.0]).unwrap();
        Dataset::from_split(x, &[P, P, P, N], vec![true, false, false, true]).unwrap()
    }

    #[test]
    fn select_us_threshold_and_vote() {
        let d = worked();
        // unlabeled: leaf 1 (p=1, n=3, t=2), leaf 2 (p=2, n=3, t=1)
        // disagreement on leaf 2 only; threshold 0.1 * 4 = 0.4 <= |1|
        let out = select_us(&[P, N], &[P, P], &d, 0.1).unwrap();
        match &out.diagnostics {
            Diagnostics::Hierarchical {
                confident,
                threshold,
                s3vm_score,
                svm_score,
                ..
            } => {
                assert_eq!(confident, &vec![1]);
                assert!((threshold - 0.4).abs() < 1e-12);
                assert_eq!((*s3vm_score, *svm_score), (1, -1));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(out.final_labels, vec![P, P]);
        assert_eq!(out.source, vec![Source::Svm, Source::S3vm]);

        // S3VM pulls against the tree: the vote goes to the SVM
        let out = select_us(&[P, P], &[P, N], &d, 0.1).unwrap();
        assert_eq!(out.final_labels, vec![P, P]);

        // above the threshold nothing is eligible
        let out = select_us(&[P, N], &[P, P], &d, 0.3).unwrap();
        assert_eq!(out.final_labels, vec![P, N]);
        assert_eq!(out.s3vm_adopted(), 0);
    }

    #[test]
    fn select_us_equal_scores_go_to_s3vm() {
        // t = 0 instances clear a tiny threshold only if |t| >= eps m, so use
        // a hand-built step table with opposite t on two disagreements
        let steps = vec![
            LabelSteps {
                index: 0,
                positive: 1,
                negative: 3,
            },
            LabelSteps {
                index: 1,
                positive: 3,
                negative: 1,
            },
        ];
        // scores: s3vm = (+1)(2) + (+1)(-2) = 0, svm = (-1)(2) + (-1)(-2) = 0
        let out = select_us_with_steps(&[N, N], &[P, P], &steps, 4, 0.1).unwrap();
        assert_eq!(out.source, vec![Source::S3vm, Source::S3vm]);
    }

    #[test]
    fn select_us_needs_both_classes() {
        let x = Matrix::column(&[0.0, 1.0, 3.0]).unwrap();
        let d = Dataset::new(x, vec![Some(P), None, Some(N)], vec![true, false, true]).unwrap();
        assert!(select_us(&[P], &[N], &d, 0.1).is_ok());
        assert!(select_us(&[P, P], &[N], &d, 0.1).is_err());
    }

    fn scenario() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<Label>, Vec<Label>)> {
        (6usize..20).prop_flat_map(|m| {
            (
                proptest::collection::vec(-5.0f64..5.0, m),
                proptest::collection::vec(any::<bool>(), m - 2),
                proptest::collection::vec(prop_oneof![Just(P), Just(N)], m - 2),
                proptest::collection::vec(prop_oneof![Just(P), Just(N)], m - 2),
            )
        })
    }

    /// Instances 0 and 1 are the guaranteed labeled pair; predictions are
    /// cut down to the unlabeled count.
    fn dataset_from(
        xs: &[f64],
        extra: &[bool],
        svm: &[Label],
        s3vm: &[Label],
    ) -> (Dataset, Vec<Label>, Vec<Label>) {
        let mut mask = vec![true, true];
        mask.extend(extra.iter().copied());
        let mut y = vec![P, N];
        y.extend(xs[2..].iter().map(|&v| Label::from_score(v)));
        let d = Dataset::from_split(Matrix::column(xs).unwrap(), &y, mask).unwrap();
        let u = d.n_unlabeled();
        (d, svm[..u].to_vec(), s3vm[..u].to_vec())
    }

    proptest! {
        #[test]
        fn selectors_only_return_candidate_labels((xs, extra, svm, s3vm) in scenario(), eps in 0.01f64..0.5) {
            let (d, svm, s3vm) = dataset_from(&xs, &extra, &svm, &s3vm);
            let w = gaussian_weights(d.x(), 2.0).unwrap();
            let outs = [
                select_c(&svm, &s3vm, &d, 3, 7).unwrap(),
                select_p(&svm, &s3vm, &d, &w, 0.3).unwrap(),
                select_us(&svm, &s3vm, &d, eps).unwrap(),
            ];
            for out in &outs {
                for (p, (&f, s)) in out.final_labels.iter().zip(&out.source).enumerate() {
                    let want = match s { Source::Svm => svm[p], Source::S3vm => s3vm[p] };
                    prop_assert_eq!(f, want);
                }
            }
            prop_assert!(outs[1].s3vm_adopted() <= (0.3 * svm.len() as f64).floor() as usize);
        }

        #[test]
        fn caution_grows_with_epsilon((xs, extra, svm, s3vm) in scenario(), e1 in 0.01f64..0.5, de in 0.0f64..0.5) {
            let (d, svm, s3vm) = dataset_from(&xs, &extra, &svm, &s3vm);
            let confident = |eps: f64| match select_us(&svm, &s3vm, &d, eps).unwrap().diagnostics {
                Diagnostics::Hierarchical { confident, .. } => confident,
                _ => unreachable!(),
            };
            let lo = confident(e1);
            let hi = confident(e1 + de);
            prop_assert!(hi.iter().all(|p| lo.contains(p)));
            let wide = select_us(&svm, &s3vm, &d, 1.5).unwrap();
            prop_assert_eq!(wide.final_labels, svm.clone());
        }

        #[test]
        fn select_c_with_identical_predictions((xs, extra, svm, s3vm) in scenario(), k in 1usize..6, seed in any::<u64>()) {
            let (d, svm, _) = dataset_from(&xs, &extra, &svm, &s3vm);
            let out = select_c(&svm, &svm, &d, k, seed).unwrap();
            prop_assert_eq!(out.final_labels, svm);
        }
    }
}
