//! Repeated-split experiments comparing the inductive SVM, the TSVM and the
//! three selectors.
//!
//! Each repeat draws a labeled/unlabeled split, trains both learners, fuses
//! their predictions with every selector and scores all five methods on the
//! unlabeled instances. Repeats are independent and may run in parallel;
//! results are collected in repeat order so reports are byte-stable.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;

use crate::data::{
    make_moons, make_split, read_labeled, repeat_stream, Dataset, Format, MoonVariant, Placement,
    SplitSpec,
};
use crate::error::{invalid, Error, Result};
use crate::eval::{accuracy, aggregate_wtl, wtl_table, Comparison, MethodRun, Outcome, WtlCounts};
use crate::label::Label;
use crate::labelprop::gaussian_weights;
use crate::numerics::{average_pairwise_distance, dot, KernelSpec, Matrix};
use crate::selectors::{select_c, select_p, select_us_with_steps, unlabeled_label_steps};
use crate::svm::{predict_labels, train_svc};
use crate::tsvm::{train_tsvm, PosFraction};

pub const METHODS: [&str; 5] = ["SVM", "TSVM", "S3VM-c", "S3VM-p", "S3VM-us"];
pub const DEFAULT_K: usize = 50;
pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Keeps the k-means seeds apart from the split streams.
const CLUSTER_STREAM: u64 = 0x6b6d_6561_6e73_0001;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File {
        path: PathBuf,
        format: Format,
    },
    Moons {
        variant: MoonVariant,
        n_per_moon: usize,
        noise: f64,
        seed: u64,
    },
}

impl DataSource {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let format = Format::from_path(&path);
        DataSource::File { path, format }
    }

    /// Features and full ground truth.
    pub fn load(&self) -> Result<(Matrix, Vec<Label>)> {
        match self {
            DataSource::File { path, format } => {
                let data = read_labeled(path, *format)?;
                let labels = data.complete_labels().ok_or_else(|| {
                    invalid(format!(
                        "{}: every instance needs a ground-truth label for evaluation",
                        path.display()
                    ))
                })?;
                Ok((data.x, labels))
            }
            DataSource::Moons {
                variant,
                n_per_moon,
                noise,
                seed,
            } => make_moons(*variant, *n_per_moon, *noise, *seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Gaussian,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Gaussian => "gaussian",
        }
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelKind::Linear),
            "gaussian" => Ok(KernelKind::Gaussian),
            other => Err(invalid(format!(
                "unknown kernel '{other}' (linear|gaussian)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CRule {
    Fixed(f64),
    /// `m / sum_i ||x_i||^2` over all instances.
    MOverSumSq,
}

impl CRule {
    pub fn resolve(self, x: &Matrix) -> Result<f64> {
        match self {
            CRule::Fixed(c) => Ok(c),
            CRule::MOverSumSq => {
                let sum: f64 = x.iter_rows().map(|r| dot(r, r)).sum();
                if sum <= 0.0 {
                    return Err(invalid(
                        "C rule m/sum|x|^2 is undefined when every instance is zero",
                    ));
                }
                Ok(x.rows() as f64 / sum)
            }
        }
    }
}

/// Named hyperparameter protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `C = m / sum ||x||^2`, width = average distance.
    Benchmark10,
    /// `C = 1`, width = average distance.
    Uci10,
}

impl Preset {
    pub fn c_rule(self) -> CRule {
        match self {
            Preset::Benchmark10 => CRule::MOverSumSq,
            Preset::Uci10 => CRule::Fixed(1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Benchmark10 => "benchmark10",
            Preset::Uci10 => "uci10",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benchmark10" => Ok(Preset::Benchmark10),
            "uci10" => Ok(Preset::Uci10),
            other => Err(invalid(format!(
                "unknown preset '{other}' (benchmark10|uci10)"
            ))),
        }
    }
}

/// One experimental setting: a dataset, a kernel and the method parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: DataSource,
    pub kernel: KernelKind,
    pub n_labeled: usize,
    pub placement: Placement,
    pub repeats: usize,
    pub seed: u64,
    pub c_rule: CRule,
    /// Kernel and graph width as a multiple of the average pairwise distance.
    pub width_factor: f64,
    pub k: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub pos_fraction: PosFraction,
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(
        name: impl Into<String>,
        source: DataSource,
        kernel: KernelKind,
        n_labeled: usize,
        preset: Preset,
    ) -> Self {
        Self {
            name: name.into(),
            source,
            kernel,
            n_labeled,
            placement: Placement::Random,
            repeats: 30,
            seed: 0,
            c_rule: preset.c_rule(),
            width_factor: 1.0,
            k: DEFAULT_K,
            eta: DEFAULT_ETA,
            epsilon: DEFAULT_EPSILON,
            pos_fraction: PosFraction::Auto,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(invalid("repeats must be at least 1"));
        }
        if let CRule::Fixed(c) = self.c_rule {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("C must be positive, got {c}")));
            }
        }
        if !(self.width_factor > 0.0 && self.width_factor.is_finite()) {
            return Err(invalid(format!(
                "width factor must be positive, got {}",
                self.width_factor
            )));
        }
        if self.k < 1 {
            return Err(invalid("k must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        self.split_spec().validate()
    }

    fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            n_labeled: self.n_labeled,
            seed: self.seed,
            repeats: self.repeats,
            placement: self.placement,
        }
    }
}

/// Data shared by every repeat of a setting.
struct Prepared {
    x: Matrix,
    y: Vec<Label>,
    c: f64,
    width: f64,
    kernel: KernelSpec,
}

impl Prepared {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (x, y) = config.source.load()?;
        let width = config.width_factor * average_pairwise_distance(&x)?;
        let kernel = match config.kernel {
            KernelKind::Linear => KernelSpec::Linear,
            KernelKind::Gaussian => KernelSpec::gaussian(width)?,
        };
        let c = config.c_rule.resolve(&x)?;
        Ok(Self {
            x,
            y,
            c,
            width,
            kernel,
        })
    }
}

/// Both learners' predictions on one split.
struct RepeatCore {
    d: Dataset,
    truth_u: Vec<Label>,
    y_svm: Vec<Label>,
    y_s3vm: Vec<Label>,
}

fn repeat_core(config: &ExperimentConfig, prep: &Prepared, repeat: usize) -> Result<RepeatCore> {
    let d = make_split(&prep.x, &prep.y, &config.split_spec(), repeat)?;
    let truth_u = d.unlabeled_truth().expect("split of fully labeled data");
    let svm = train_svc(&d.labeled_x(), &d.labeled_labels(), prep.kernel, prep.c)?;
    let y_svm = predict_labels(&svm, &d.unlabeled_x())?;
    let y_s3vm = train_tsvm(&d, prep.kernel, prep.c, config.pos_fraction)?.unlabeled_labels;
    Ok(RepeatCore {
        d,
        truth_u,
        y_svm,
        y_s3vm,
    })
}

fn cluster_seed(seed: u64, repeat: usize) -> u64 {
    repeat_stream(seed ^ CLUSTER_STREAM, repeat).next_u64()
}

/// Accuracies of the five methods, in [`METHODS`] order.
fn run_repeat(config: &ExperimentConfig, prep: &Prepared, repeat: usize) -> Result<[f64; 5]> {
    let core = repeat_core(config, prep, repeat)?;
    let d = &core.d;
    let k = config.k.min(d.len());
    let by_c = select_c(
        &core.y_svm,
        &core.y_s3vm,
        d,
        k,
        cluster_seed(config.seed, repeat),
    )?;
    let w = gaussian_weights(d.x(), prep.width)?;
    let by_p = select_p(&core.y_svm, &core.y_s3vm, d, &w, config.eta)?;
    let steps = if core.y_svm == core.y_s3vm {
        Vec::new()
    } else {
        unlabeled_label_steps(d)?
    };
    let by_us = select_us_with_steps(&core.y_svm, &core.y_s3vm, &steps, d.len(), config.epsilon)?;

    let acc = |pred: &[Label]| accuracy(pred, &core.truth_u);
    Ok([
        acc(&core.y_svm)?,
        acc(&core.y_s3vm)?,
        acc(&by_c.final_labels)?,
        acc(&by_p.final_labels)?,
        acc(&by_us.final_labels)?,
    ])
}

fn for_each_repeat<T: Send>(
    config: &ExperimentConfig,
    f: impl Fn(usize) -> T + Sync + Send,
) -> Vec<T> {
    if config.parallel {
        (0..config.repeats).into_par_iter().map(f).collect()
    } else {
        (0..config.repeats).map(f).collect()
    }
}

/// Outcome of one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingReport {
    pub name: String,
    pub m: usize,
    pub n_labeled: usize,
    pub repeats: usize,
    pub result: std::result::Result<SettingResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettingResult {
    /// One run per entry of [`METHODS`].
    pub runs: Vec<MethodRun>,
    /// Every non-baseline method against the SVM; empty with a single repeat.
    pub comparisons: Vec<Comparison>,
}

impl SettingResult {
    pub fn run(&self, method: &str) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.name == method)
    }

    pub fn outcome(&self, method: &str) -> Option<Outcome> {
        self.comparisons
            .iter()
            .find(|c| c.method == method)
            .map(|c| c.outcome)
    }
}

impl SettingReport {
    pub fn ok(&self) -> Option<&SettingResult> {
        self.result.as_ref().ok()
    }
}

/// Runs every repeat of one setting. Module errors are captured in the
/// returned report; only an invalid configuration is an `Err`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SettingReport> {
    config.validate()?;
    let mut report = SettingReport {
        name: config.name.clone(),
        m: 0,
        n_labeled: config.n_labeled,
        repeats: config.repeats,
        result: Err(String::new()),
    };
    let prep = match Prepared::new(config) {
        Ok(p) => p,
        Err(e) => {
            report.result = Err(e.to_string());
            return Ok(report);
        }
    };
    report.m = prep.x.rows();

    let outcomes = for_each_repeat(config, |r| run_repeat(config, &prep, r));
    let mut per_method = vec![Vec::with_capacity(config.repeats); METHODS.len()];
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(accs) => {
                for (slot, a) in per_method.iter_mut().zip(accs) {
                    slot.push(a);
                }
            }
            Err(e) => failures.push(format!("repeat {r}: {e}")),
        }
    }
    if !failures.is_empty() {
        report.result = Err(failures.join("; "));
        return Ok(report);
    }
    let runs = METHODS
        .iter()
        .zip(per_method)
        .map(|(name, accs)| MethodRun::new(*name, accs))
        .collect::<Result<Vec<_>>>()?;
    let comparisons = if config.repeats >= 2 {
        wtl_table(&runs[1..], &runs[0])?
    } else {
        Vec::new()
    };
    report.result = Ok(SettingResult { runs, comparisons });
    Ok(report)
}

/// Results of several settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub settings: Vec<SettingReport>,
}

/// Fixed-precision number without a negative zero.
fn fixed(v: f64, precision: usize) -> String {
    let s = format!("{v:.precision$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

fn pad_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

impl Report {
    pub fn run(configs: &[ExperimentConfig]) -> Result<Report> {
        let settings = configs
            .iter()
            .map(run_experiment)
            .collect::<Result<Vec<_>>>()?;
        Ok(Report { settings })
    }

    /// Win/tie/loss of each method against the SVM over successful settings.
    pub fn aggregate(&self) -> Vec<(String, WtlCounts)> {
        aggregate_wtl(
            self.settings
                .iter()
                .filter_map(|s| s.ok())
                .map(|r| r.comparisons.as_slice()),
        )
    }

    pub fn failed(&self) -> impl Iterator<Item = &SettingReport> {
        self.settings.iter().filter(|s| s.result.is_err())
    }

    /// Tab-separated rendering with fixed precision.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("setting\tm\tlabeled\trepeats\tmethod\tmean\tstd\tvs_svm\tt\n");
        for s in &self.settings {
            let head = format!("{}\t{}\t{}\t{}", s.name, s.m, s.n_labeled, s.repeats);
            match &s.result {
                Ok(res) => {
                    for run in &res.runs {
                        let cmp = res.comparisons.iter().find(|c| c.method == run.name);
                        let (outcome, t) = match cmp {
                            Some(c) => (c.outcome.to_string(), fixed(c.t, 6)),
                            None => ("-".into(), "-".into()),
                        };
                        let _ = writeln!(
                            out,
                            "{head}\t{}\t{}\t{}\t{outcome}\t{t}",
                            run.name,
                            fixed(run.mean(), 6),
                            fixed(run.std(), 6)
                        );
                    }
                }
                Err(msg) => {
                    let _ = writeln!(
                        out,
                        "{head}\tFAILED\t-\t-\t-\t{}",
                        msg.replace(['\t', '\n'], " ")
                    );
                }
            }
        }
        for (method, counts) in self.aggregate() {
            let _ = writeln!(out, "total\t-\t-\t-\t{method}\t-\t-\t{counts}\t-");
        }
        out
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.settings {
            let _ = writeln!(
                out,
                "{} (m = {}, labeled = {}, repeats = {})",
                s.name, s.m, s.n_labeled, s.repeats
            );
            match &s.result {
                Ok(res) => {
                    let mut rows = vec![vec![
                        "method".to_string(),
                        "mean".into(),
                        "std".into(),
                        "vs SVM".into(),
                    ]];
                    for run in &res.runs {
                        let outcome = res
                            .outcome(&run.name)
                            .map_or("-".to_string(), |o| o.to_string());
                        rows.push(vec![
                            run.name.clone(),
                            fixed(run.mean(), 4),
                            fixed(run.std(), 4),
                            outcome,
                        ]);
                    }
                    out.push_str(&pad_table(&rows));
                }
                Err(msg) => {
                    let _ = writeln!(out, "FAILED: {msg}");
                }
            }
            out.push('\n');
        }
        let agg = self.aggregate();
        if !agg.is_empty() {
            let mut rows = vec![vec!["W/T/L vs SVM".to_string()]];
            for (method, counts) in agg {
                rows.push(vec![method, counts.to_string()]);
            }
            out.push_str(&pad_table(&rows));
        }
        out
    }
}

/// Mean improvement of the hierarchical selector over the SVM, per epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSeries {
    pub epsilons: Vec<f64>,
    /// `per_repeat[e][r]`: accuracy difference for epsilon `e` on repeat `r`.
    pub per_repeat: Vec<Vec<f64>>,
}

impl SweepSeries {
    pub fn mean_improvement(&self) -> Vec<f64> {
        self.per_repeat
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect()
    }

    /// Two columns, epsilon and mean improvement, one row per epsilon.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (e, m) in self.epsilons.iter().zip(self.mean_improvement()) {
            let _ = writeln!(out, "{e}\t{}", fixed(m, 6));
        }
        out
    }
}

pub fn epsilon_sweep(config: &ExperimentConfig, epsilons: &[f64]) -> Result<SweepSeries> {
    config.validate()?;
    if epsilons.is_empty() {
        return Err(invalid("the sweep needs at least one epsilon"));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(invalid(format!(
            "sweep epsilons must lie in (0, 1], got {e}"
        )));
    }
    let prep = Prepared::new(config)?;
    let rows = for_each_repeat(config, |r| -> Result<Vec<f64>> {
        let core = repeat_core(config, &prep, r)?;
        let base = accuracy(&core.y_svm, &core.truth_u)?;
        let steps = if core.y_svm == core.y_s3vm {
            Vec::new()
        } else {
            unlabeled_label_steps(&core.d)?
        };
        epsilons
            .iter()
            .map(|&e| {
                let out = select_us_with_steps(&core.y_svm, &core.y_s3vm, &steps, core.d.len(), e)?;
                Ok(accuracy(&out.final_labels, &core.truth_u)? - base)
            })
            .collect()
    });
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(r, row)| row.map_err(|e| invalid(format!("repeat {r}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let per_repeat = (0..epsilons.len())
        .map(|e| rows.iter().map(|row| row[e]).collect())
        .collect();
    Ok(SweepSeries {
        epsilons: epsilons.to_vec(),
        per_repeat,
    })
}

/// Shipped moon settings with frozen seeds.
pub mod fixtures {
    use super::*;

    pub const MOONS_PER_ARC: usize = 100;
    pub const DATA_SEED: u64 = 1;

    pub fn moons(variant: MoonVariant, noise: f64) -> DataSource {
        DataSource::Moons {
            variant,
            n_per_moon: MOONS_PER_ARC,
            noise,
            seed: DATA_SEED,
        }
    }

    fn variant_name(v: MoonVariant) -> &'static str {
        match v {
            MoonVariant::Two => "two-moons",
            MoonVariant::Three => "three-moons",
        }
    }

    /// Two-moon data whose labeled set over-represents one class, so the
    /// class ratio handed to the TSVM is wrong.
    pub fn skewed_two_moons(kernel: KernelKind) -> ExperimentConfig {
        let (positive, negative) = match kernel {
            KernelKind::Linear => (5, 15),
            KernelKind::Gaussian => (8, 32),
        };
        let name = format!(
            "two-moons-skewed/{}/{}+{}",
            kernel.name(),
            positive,
            negative
        );
        let mut c = ExperimentConfig::new(
            name,
            moons(MoonVariant::Two, 0.1),
            kernel,
            positive + negative,
            Preset::Uci10,
        );
        c.placement = Placement::PerClass { positive, negative };
        c
    }

    /// Three interleaved moons where the TSVM helps on average.
    pub fn three_moons() -> ExperimentConfig {
        ExperimentConfig::new(
            "three-moons/gaussian/0.1",
            moons(MoonVariant::Three, 0.1),
            KernelKind::Gaussian,
            10,
            Preset::Uci10,
        )
    }

    /// Two- and three-moon data at two noise levels under both kernels with
    /// six random labels, plus both skewed two-moon settings.
    pub fn safety_suite() -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for variant in [MoonVariant::Two, MoonVariant::Three] {
            for noise in [0.1, 0.2] {
                for kernel in [KernelKind::Linear, KernelKind::Gaussian] {
                    let name = format!("{}/{}/{noise}", variant_name(variant), kernel.name());
                    out.push(ExperimentConfig::new(
                        name,
                        moons(variant, noise),
                        kernel,
                        6,
                        Preset::Uci10,
                    ));
                }
            }
        }
        out.push(skewed_two_moons(KernelKind::Linear));
        out.push(skewed_two_moons(KernelKind::Gaussian));
        out
    }
}
