//! Datasets, text loaders, seeded labeled/unlabeled splits and the moon
//! generators.
//!
//! All randomness comes from xoshiro256** seeded through SplitMix64
//! (`seed_from_u64`). Repeat `r` of an experiment uses the base stream
//! advanced by `r` jumps of 2^128 steps, so repeats never share state.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{invalid, Error, Result};
use crate::label::Label;
use crate::numerics::Matrix;

/// Features plus per-instance label state.
///
/// `truth` holds whatever ground truth is known (used only for scoring);
/// `labeled` marks the instances whose label the learners may see.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    truth: Vec<Option<Label>>,
    labeled: Vec<bool>,
}

impl Dataset {
    pub fn new(x: Matrix, truth: Vec<Option<Label>>, labeled: Vec<bool>) -> Result<Self> {
        let m = x.rows();
        for len in [truth.len(), labeled.len()] {
            if len != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: len,
                });
            }
        }
        if let Some(i) = (0..m).find(|&i| labeled[i] && truth[i].is_none()) {
            return Err(invalid(format!(
                "instance {i} is marked labeled but has no label"
            )));
        }
        let ds = Self { x, truth, labeled };
        let y = ds.labeled_labels();
        if y.len() < 2 {
            return Err(Error::DegenerateLabels(
                "need at least two labeled instances".into(),
            ));
        }
        if !y.contains(&Label::Positive) || !y.contains(&Label::Negative) {
            return Err(Error::DegenerateLabels(
                "labeled instances must cover both classes".into(),
            ));
        }
        Ok(ds)
    }

    /// Fully known ground truth with the given labeled mask.
    pub fn from_split(x: Matrix, y: &[Label], labeled: Vec<bool>) -> Result<Self> {
        Self::new(x, y.iter().copied().map(Some).collect(), labeled)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    /// l + u
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn labeled_mask(&self) -> &[bool] {
        &self.labeled
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled.iter().filter(|&&b| b).count()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.len() - self.n_labeled()
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labeled[i]).collect()
    }

    pub fn unlabeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.labeled[i]).collect()
    }

    /// Labels of the labeled instances, in index order.
    pub fn labeled_labels(&self) -> Vec<Label> {
        (0..self.len())
            .filter(|&i| self.labeled[i])
            .map(|i| self.truth[i].expect("labeled instances carry labels"))
            .collect()
    }

    /// Visible label per instance: `Some` exactly for labeled instances.
    pub fn label_state(&self) -> Vec<Option<Label>> {
        (0..self.len())
            .map(|i| if self.labeled[i] { self.truth[i] } else { None })
            .collect()
    }

    pub fn truth(&self) -> &[Option<Label>] {
        &self.truth
    }

    /// Ground truth of the unlabeled instances, if all of it is known.
    pub fn unlabeled_truth(&self) -> Option<Vec<Label>> {
        self.unlabeled_indices()
            .into_iter()
            .map(|i| self.truth[i])
            .collect()
    }

    pub fn labeled_x(&self) -> Matrix {
        self.x.select_rows(&self.labeled_indices())
    }

    pub fn unlabeled_x(&self) -> Matrix {
        self.x.select_rows(&self.unlabeled_indices())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Sparse,
}

impl Format {
    /// `.csv` means CSV; anything else is read as sparse text.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Sparse,
        }
    }
}

/// Raw file contents: features plus optional labels (`?` gives `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub x: Matrix,
    pub labels: Vec<Option<Label>>,
}

impl LabeledData {
    /// All labels, or `None` if any instance is unlabeled.
    pub fn complete_labels(&self) -> Option<Vec<Label>> {
        self.labels.iter().copied().collect()
    }
}

fn parse_label(tok: &str) -> std::result::Result<Option<Label>, String> {
    if tok == "?" {
        return Ok(None);
    }
    match tok.parse::<f64>() {
        Ok(1.0) => Ok(Some(Label::Positive)),
        Ok(-1.0) => Ok(Some(Label::Negative)),
        _ => Err(format!("invalid label {tok:?}; expected +1, -1 or ?")),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses CSV text: label first, then features. A first line whose feature
/// fields are not all numeric is taken as a header.
pub fn parse_csv(text: &str, path: &Path) -> Result<LabeledData> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut first = true;
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let feats: std::result::Result<Vec<f64>, _> =
            fields[1..].iter().map(|f| f.parse::<f64>()).collect();
        if first {
            first = false;
            if feats.is_err() {
                continue;
            }
        }
        let feats = feats.map_err(|e| perr(line_no, format!("bad feature value: {e}")))?;
        if feats.iter().any(|v| !v.is_finite()) {
            return Err(perr(line_no, "non-finite feature value".into()));
        }
        if let Some(prev) = rows.first() {
            if prev.len() != feats.len() {
                return Err(perr(
                    line_no,
                    format!("expected {} features, found {}", prev.len(), feats.len()),
                ));
            }
        }
        labels.push(parse_label(fields[0]).map_err(|m| perr(line_no, m))?);
        rows.push(feats);
    }
    if rows.is_empty() {
        return Err(perr(0, "no data rows".into()));
    }
    Ok(LabeledData {
        x: Matrix::from_rows(&rows)?,
        labels,
    })
}

/// Parses sparse text: `label idx:val ...` with 1-based indices. Text after
/// `#` is ignored.
pub fn parse_sparse(text: &str, path: &Path) -> Result<LabeledData> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0usize;
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label =
            parse_label(toks.next().expect("non-empty line")).map_err(|m| perr(line_no, m))?;
        let mut feats = Vec::new();
        for tok in toks {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| perr(line_no, format!("expected idx:val, found {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| perr(line_no, format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(perr(line_no, "feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| perr(line_no, format!("bad feature value {val:?}")))?;
            if !val.is_finite() {
                return Err(perr(line_no, "non-finite feature value".into()));
            }
            if feats.iter().any(|&(j, _)| j == idx) {
                return Err(perr(line_no, format!("duplicate feature index {idx}")));
            }
            dim = dim.max(idx);
            feats.push((idx, val));
        }
        labels.push(label);
        entries.push(feats);
    }
    if entries.is_empty() {
        return Err(perr(0, "no data rows".into()));
    }
    let mut data = vec![0.0; entries.len() * dim];
    for (i, feats) in entries.iter().enumerate() {
        for &(j, v) in feats {
            data[i * dim + j - 1] = v;
        }
    }
    Ok(LabeledData {
        x: Matrix::new(entries.len(), dim, data)?,
        labels,
    })
}

pub fn read_labeled(path: &Path, format: Format) -> Result<LabeledData> {
    let text = read_text(path)?;
    match format {
        Format::Csv => parse_csv(&text, path),
        Format::Sparse => parse_sparse(&text, path),
    }
}

/// Loads a file as a dataset whose labeled set is the instances with a
/// `+1`/`-1` label.
pub fn load_dataset(path: &Path, format: Format) -> Result<Dataset> {
    let raw = read_labeled(path, format)?;
    let labeled = raw.labels.iter().map(Option::is_some).collect();
    Dataset::new(raw.x, raw.labels, labeled)
}

fn label_token(l: Option<Label>) -> &'static str {
    match l {
        Some(Label::Positive) => "+1",
        Some(Label::Negative) => "-1",
        None => "?",
    }
}

pub fn format_csv(x: &Matrix, labels: &[Option<Label>]) -> String {
    let mut out = String::from("label");
    for j in 0..x.cols() {
        let _ = write!(out, ",x{}", j + 1);
    }
    out.push('\n');
    for (row, &l) in x.iter_rows().zip(labels) {
        out.push_str(label_token(l));
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Zero features are omitted except the last column, which is always
/// written so the dimension survives a round trip.
pub fn format_sparse(x: &Matrix, labels: &[Option<Label>]) -> String {
    let mut out = String::new();
    let d = x.cols();
    for (row, &l) in x.iter_rows().zip(labels) {
        out.push_str(label_token(l));
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 || j + 1 == d {
                let _ = write!(out, " {}:{v}", j + 1);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_labeled(
    path: &Path,
    format: Format,
    x: &Matrix,
    labels: &[Option<Label>],
) -> Result<()> {
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: labels.len(),
        });
    }
    let text = match format {
        Format::Csv => format_csv(x, labels),
        Format::Sparse => format_sparse(x, labels),
    };
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Random stream for repeat `repeat` under base `seed`.
pub fn repeat_stream(seed: u64, repeat: usize) -> Xoshiro256StarStar {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    for _ in 0..repeat {
        rng.jump();
    }
    rng
}

/// How the labeled instances of a split are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Uniform without replacement; redrawn until both classes appear.
    Random,
    /// Exactly this many labeled instances of each class.
    PerClass { positive: usize, negative: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub n_labeled: usize,
    pub seed: u64,
    pub repeats: usize,
    pub placement: Placement,
}

impl SplitSpec {
    pub fn random(n_labeled: usize, seed: u64, repeats: usize) -> Self {
        Self {
            n_labeled,
            seed,
            repeats,
            placement: Placement::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_labeled < 2 {
            return Err(invalid("at least two labeled instances are required"));
        }
        if self.repeats < 1 {
            return Err(invalid("at least one repeat is required"));
        }
        if let Placement::PerClass { positive, negative } = self.placement {
            if positive + negative != self.n_labeled || positive == 0 || negative == 0 {
                return Err(invalid(
                    "per-class placement needs positive and negative counts summing to n_labeled",
                ));
            }
        }
        Ok(())
    }
}

/// Picks `k` of `pool` by a partial Fisher-Yates shuffle.
fn sample_indices(pool: &[usize], k: usize, rng: &mut Xoshiro256StarStar) -> Vec<usize> {
    let mut pool = pool.to_vec();
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Deterministic labeled/unlabeled split for repeat `repeat_index`.
pub fn make_split(
    x: &Matrix,
    y: &[Label],
    spec: &SplitSpec,
    repeat_index: usize,
) -> Result<Dataset> {
    spec.validate()?;
    let m = x.rows();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    if spec.n_labeled >= m {
        return Err(invalid(format!(
            "n_labeled = {} leaves no unlabeled instances among {m}",
            spec.n_labeled
        )));
    }
    let pos: Vec<usize> = (0..m).filter(|&i| y[i] == Label::Positive).collect();
    let neg: Vec<usize> = (0..m).filter(|&i| y[i] == Label::Negative).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateLabels(
            "ground truth lacks one of the classes".into(),
        ));
    }
    let mut rng = repeat_stream(spec.seed, repeat_index);
    let chosen = match spec.placement {
        Placement::Random => {
            let all: Vec<usize> = (0..m).collect();
            loop {
                let pick = sample_indices(&all, spec.n_labeled, &mut rng);
                let has_pos = pick.iter().any(|&i| y[i] == Label::Positive);
                let has_neg = pick.iter().any(|&i| y[i] == Label::Negative);
                if has_pos && has_neg {
                    break pick;
                }
            }
        }
        Placement::PerClass { positive, negative } => {
            if positive > pos.len() || negative > neg.len() {
                return Err(invalid(
                    "not enough instances of a class for per-class placement",
                ));
            }
            let mut pick = sample_indices(&pos, positive, &mut rng);
            pick.extend(sample_indices(&neg, negative, &mut rng));
            pick
        }
    };
    let mut mask = vec![false; m];
    for i in chosen {
        mask[i] = true;
    }
    Dataset::from_split(x.clone(), y, mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoonVariant {
    Two,
    Three,
}

/// Horizontal and vertical offset of the second (negative) moon.
pub const SECOND_MOON_CENTER: (f64, f64) = (1.0, 0.5);
/// Vertical offset of the third moon above the first.
pub const THIRD_MOON_OFFSET: f64 = 1.5;

/// Interleaved half-circles of radius 1.
///
/// The first moon is the upper arc around the origin (label +1). The second is
/// the lower arc around [`SECOND_MOON_CENTER`] (label -1). The three-moon
/// variant repeats the first arc [`THIRD_MOON_OFFSET`] higher, also labeled
/// +1. Arc positions are evenly spaced; only the noise is random.
pub fn make_moons(
    variant: MoonVariant,
    n_per_moon: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Matrix, Vec<Label>)> {
    if n_per_moon < 1 {
        return Err(invalid("n_per_moon must be at least 1"));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(invalid(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let angle = |i: usize| {
        if n_per_moon == 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (n_per_moon - 1) as f64
        }
    };
    let mut rows: Vec<[f64; 2]> = Vec::new();
    let mut y = Vec::new();
    for i in 0..n_per_moon {
        let t = angle(i);
        rows.push([t.cos(), t.sin()]);
        y.push(Label::Positive);
    }
    let (cx, cy) = SECOND_MOON_CENTER;
    for i in 0..n_per_moon {
        let t = angle(i);
        rows.push([cx - t.cos(), cy - t.sin()]);
        y.push(Label::Negative);
    }
    if variant == MoonVariant::Three {
        for i in 0..n_per_moon {
            let t = angle(i);
            rows.push([t.cos(), t.sin() + THIRD_MOON_OFFSET]);
            y.push(Label::Positive);
        }
    }
    if noise_sigma > 0.0 {
        for r in &mut rows {
            for v in r.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += noise_sigma * z;
            }
        }
    }
    Ok((Matrix::from_rows(&rows)?, y))
}
