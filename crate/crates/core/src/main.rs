use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use s3vm::data::{make_moons, write_labeled, Format, MoonVariant, Placement};
use s3vm::error::{Error, Result};
use s3vm::harness::{
    epsilon_sweep, DataSource, ExperimentConfig, KernelKind, Preset, Report, DEFAULT_EPSILON,
    DEFAULT_ETA, DEFAULT_K,
};

#[derive(Parser)]
#[command(name = "s3vm", version, about = "Safe semi-supervised SVM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a two- or three-moon dataset as CSV.
    Gen(GenArgs),
    /// Run one split and print the per-method accuracy table.
    Run(RunArgs),
    /// Run repeated splits and write the report as TSV.
    Bench(BenchArgs),
    /// Write the mean improvement of S3VM-us over SVM for each epsilon.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Two,
    Three,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// C = m / sum |x|^2, width = average pairwise distance
    Benchmark10,
    /// C = 1, width = average pairwise distance
    Uci10,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Sparse,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    variant: VariantArg,
    /// Points per moon
    #[arg(long)]
    n: usize,
    /// Standard deviation of the Gaussian noise
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Labeled dataset (CSV, or sparse for any other extension)
    #[arg(long)]
    data: PathBuf,
    /// Override the format guessed from the extension
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Number of labeled instances per split
    #[arg(long, default_value_t = 10)]
    labeled: usize,
    /// Draw exactly this many positive labeled instances (needs --negative)
    #[arg(long, requires = "negative")]
    positive: Option<usize>,
    /// Draw exactly this many negative labeled instances (needs --positive)
    #[arg(long, requires = "positive")]
    negative: Option<usize>,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelArg,
    #[arg(long, value_enum, default_value = "uci10")]
    preset: PresetArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clusters for S3VM-c
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Fraction of unlabeled instances S3VM-p may take from the S3VM
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    /// Confidence threshold of S3VM-us, as a fraction of the dataset size
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Run repeats on one thread
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = 30)]
    repeats: usize,
    /// Destination of the TSV report
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = 30)]
    repeats: usize,
    /// Comma-separated values in (0, 1]
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
    epsilons: Vec<f64>,
    /// Destination of the two-column TSV; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(&self, repeats: usize) -> ExperimentConfig {
        let source = match self.format {
            None => DataSource::file(&self.data),
            Some(f) => DataSource::File {
                path: self.data.clone(),
                format: match f {
                    FormatArg::Csv => Format::Csv,
                    FormatArg::Sparse => Format::Sparse,
                },
            },
        };
        let kernel = match self.kernel {
            KernelArg::Linear => KernelKind::Linear,
            KernelArg::Gaussian => KernelKind::Gaussian,
        };
        let preset = match self.preset {
            PresetArg::Benchmark10 => Preset::Benchmark10,
            PresetArg::Uci10 => Preset::Uci10,
        };
        let name = self
            .data
            .file_stem()
            .map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
        let mut c = ExperimentConfig::new(
            format!("{name}/{}", kernel.name()),
            source,
            kernel,
            self.labeled,
            preset,
        );
        if let (Some(positive), Some(negative)) = (self.positive, self.negative) {
            c.placement = Placement::PerClass { positive, negative };
            c.n_labeled = positive + negative;
        }
        c.repeats = repeats;
        c.seed = self.seed;
        c.k = self.k;
        c.eta = self.eta;
        c.epsilon = self.epsilon;
        c.parallel = !self.sequential;
        c
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn report_or_fail(report: Report) -> Result<Report> {
    if let Some(failed) = report.failed().next() {
        let msg = failed.result.as_ref().err().cloned().unwrap_or_default();
        return Err(Error::InvalidInput(format!(
            "{} failed: {msg}",
            failed.name
        )));
    }
    Ok(report)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => {
            let variant = match a.variant {
                VariantArg::Two => MoonVariant::Two,
                VariantArg::Three => MoonVariant::Three,
            };
            let (x, y) = make_moons(variant, a.n, a.noise, a.seed)?;
            let labels: Vec<_> = y.into_iter().map(Some).collect();
            write_labeled(&a.out, Format::Csv, &x, &labels)
        }
        Command::Run(a) => {
            let config = a.exp.config(1);
            config.source.load()?;
            let report = report_or_fail(Report::run(&[config])?)?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Bench(a) => {
            let config = a.exp.config(a.repeats);
            config.source.load()?;
            let report = report_or_fail(Report::run(&[config])?)?;
            write_text(&a.out, &report.to_tsv())?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Sweep(a) => {
            let series = epsilon_sweep(&a.exp.config(a.repeats), &a.epsilons)?;
            match &a.out {
                Some(path) => write_text(path, &series.to_tsv()),
                None => {
                    print!("{}", series.to_tsv());
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
