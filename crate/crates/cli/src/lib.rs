//! Command-line front end for `despeckle-core`: file I/O, flag/config
//! resolution and the benchmark table.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use despeckle_core::image::{read_pgm, read_rawf32, write_pgm, write_rawf32};
use despeckle_core::metrics::MetricsReport;
use despeckle_core::pipeline::{
    self, PipelineConfig, DEFAULT_FROST_DAMPING, DEFAULT_FROST_WINDOW, DEFAULT_LEVELS,
    MAX_PIPELINE_LEVELS,
};
use despeckle_core::shrink::DEFAULT_WINDOW;
use despeckle_core::specksim::{
    apply_speckle, generate_phantom, PhantomKind, SpeckleMode, SpeckleSpec, PHANTOM_MIN_SIDE,
};
use despeckle_core::specteq::EqualizerConfig;
use despeckle_core::Image;

/// Extension that selects the lossless raw-float format.
pub const RAW_EXTENSION: &str = "dspk";
pub const CSV_HEADER: &str = "seed,method,beta,snr_db,runtime_ms";
pub const METHODS: [&str; 4] = ["noisy", "frost", "logwav", "proposed"];

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or config values; exit code 2.
    #[error("usage: {0}")]
    Usage(String),

    #[error("{stage}: {source}")]
    Processing {
        stage: &'static str,
        #[source]
        source: despeckle_core::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The benchmark medians broke the expected SNR ordering.
    #[error("SNR ordering violated: {0}")]
    Ordering(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> Stage<T> for despeckle_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Processing { stage, source })
    }
}

#[derive(Debug, Parser)]
#[command(name = "despeckle", version, about = "Ultrasound speckle simulation, despeckling and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a noise-free test phantom.
    Phantom(PhantomArgs),
    /// Multiply an image by simulated speckle.
    Speckle(SpeckleArgs),
    /// Run the full despeckling pipeline.
    Despeckle(DespeckleArgs),
    /// Frost adaptive filter baseline.
    Frost(FrostArgs),
    /// Log-domain wavelet soft-threshold baseline.
    Logwav(LogwavArgs),
    /// Compare a test image against a reference.
    Metrics(MetricsArgs),
    /// Simulate, run all methods and emit a CSV table plus a median summary.
    Bench(BenchArgs),
}

/// Flags shared by every subcommand. All optional so that an explicit flag
/// can be told apart from a config-file value.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// DTCWT levels (default 3).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Equalizer epsilon (default 0.1).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Window side: signal-scale window for despeckle (default 7), filter window for frost (default 5).
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub no_equalize: bool,
    #[arg(long)]
    pub eq_block: Option<usize>,
    #[arg(long)]
    pub eq_overlap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SpeckleArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// iid or correlated.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub psf_sigma: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DespeckleArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FrostArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub damping: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct LogwavArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub size: Option<usize>,
    /// Comma-separated seed list, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub psf_sigma: Option<f64>,
    /// CSV destination; without it the table goes to standard error.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

/// Config file contents. Keys mirror the long flag names with underscores.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub levels: Option<usize>,
    pub epsilon: Option<f64>,
    pub window: Option<usize>,
    pub equalize: Option<bool>,
    pub eq_block: Option<usize>,
    pub eq_overlap: Option<f64>,
    pub kind: Option<String>,
    pub size: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub mode: Option<String>,
    pub psf_sigma: Option<f64>,
    pub damping: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }
}

/// Flag values and config values after precedence, before defaults.
#[derive(Debug, Clone, Default)]
struct Layered {
    file: FileConfig,
    common: Common,
}

impl Layered {
    fn new(common: &Common) -> Result<Self> {
        let file = match &common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(Layered {
            file,
            common: common.clone(),
        })
    }

    fn seed(&self) -> u64 {
        self.common.seed.or(self.file.seed).unwrap_or(0)
    }

    fn levels(&self) -> Result<usize> {
        let levels = self.common.levels.or(self.file.levels).unwrap_or(DEFAULT_LEVELS);
        if !(1..=MAX_PIPELINE_LEVELS).contains(&levels) {
            return Err(CliError::usage(format!("--levels {levels} outside 1..={MAX_PIPELINE_LEVELS}")));
        }
        Ok(levels)
    }

    fn window_or(&self, default: usize) -> Result<usize> {
        let w = self.common.window.or(self.file.window).unwrap_or(default);
        if w < 3 || w.is_multiple_of(2) {
            return Err(CliError::usage(format!("--window {w} must be odd and >= 3")));
        }
        Ok(w)
    }

    fn pipeline(&self) -> Result<PipelineConfig> {
        let defaults = EqualizerConfig::default();
        let equalizer = EqualizerConfig {
            epsilon: self.common.epsilon.or(self.file.epsilon).unwrap_or(defaults.epsilon),
            block: self.common.eq_block.or(self.file.eq_block).unwrap_or(defaults.block),
            overlap: self.common.eq_overlap.or(self.file.eq_overlap).unwrap_or(defaults.overlap),
        };
        let enable_equalization = if self.common.no_equalize {
            false
        } else {
            self.file.equalize.unwrap_or(true)
        };
        let cfg = PipelineConfig {
            levels: self.levels()?,
            equalizer,
            window: self.window_or(DEFAULT_WINDOW)?,
            enable_equalization,
        };
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(cfg)
    }

    fn kind(&self, flag: &Option<String>) -> Result<(String, PhantomKind)> {
        let name = flag.clone().or(self.file.kind.clone()).unwrap_or_else(|| "blocks".into());
        let kind = name.parse().map_err(|e: despeckle_core::Error| CliError::usage(e.to_string()))?;
        Ok((name, kind))
    }

    fn size(&self, flag: Option<usize>) -> Result<usize> {
        let size = flag.or(self.file.size).unwrap_or(256);
        if size < PHANTOM_MIN_SIDE {
            return Err(CliError::usage(format!("--size {size} below {PHANTOM_MIN_SIDE}")));
        }
        Ok(size)
    }

    fn speckle(&self, mode: &Option<String>, psf_sigma: Option<f64>, seed: u64) -> Result<SpeckleSpec> {
        let mode: SpeckleMode = mode
            .clone()
            .or(self.file.mode.clone())
            .unwrap_or_else(|| "iid".into())
            .parse()
            .map_err(|e: despeckle_core::Error| CliError::usage(e.to_string()))?;
        let spec = SpeckleSpec {
            mode,
            psf_sigma: psf_sigma.or(self.file.psf_sigma).unwrap_or(SpeckleSpec::default().psf_sigma),
            seed,
            ..Default::default()
        };
        spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(spec)
    }
}

pub fn is_raw_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == RAW_EXTENSION)
}

pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if is_raw_path(path) {
        read_rawf32(&bytes).stage("read raw image")
    } else {
        read_pgm(&bytes).stage("read PGM")
    }
}

/// Writes `img` as raw float (`.dspk`) or binary PGM. PGM uses maxval 255
/// when every sample fits, 65535 otherwise. Returns the clamped sample count.
pub fn write_image(path: &Path, img: &Image) -> Result<usize> {
    let (bytes, clamped) = if is_raw_path(path) {
        (write_rawf32(img), 0)
    } else {
        let maxval = if img.max() <= 255.0 { 255 } else { 65535 };
        let out = write_pgm(img, maxval, true).stage("write PGM")?;
        (out.bytes, out.clamped)
    };
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(clamped)
}

/// `%g`-style formatting with 6 significant digits.
pub fn format_g6(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // Exponent after rounding, so 999999.5 becomes 1e+06.
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn print_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

#[derive(Debug, Serialize)]
struct ImageReport<'a> {
    command: &'a str,
    out: String,
    width: usize,
    height: usize,
    mean: f64,
    clamped: usize,
}

fn image_report(command: &str, out: &Path, img: &Image, clamped: usize) -> String {
    print_json(&ImageReport {
        command,
        out: out.display().to_string(),
        width: img.width(),
        height: img.height(),
        mean: img.mean(),
        clamped,
    })
}

#[derive(Debug, Serialize)]
struct DespeckleJson {
    command: &'static str,
    out: String,
    levels: usize,
    window: usize,
    equalized: bool,
    equalizer_epsilon: f64,
    sigma_n2: f64,
    mean_k: Vec<f64>,
    clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub seed: u64,
    pub method: &'static str,
    pub beta: f64,
    pub snr_db: f64,
    pub runtime_ms: f64,
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.seed,
            self.method,
            format_g6(self.beta),
            format_g6(self.snr_db),
            format_g6(self.runtime_ms)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub beta: f64,
    pub snr_db: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Medians {
    pub noisy: MethodSummary,
    pub frost: MethodSummary,
    pub logwav: MethodSummary,
    pub proposed: MethodSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ordering {
    /// `snr(noisy) < snr(frost) < snr(logwav) <= snr(proposed)`.
    pub snr: bool,
    /// `min(beta(noisy), beta(frost)) < beta(logwav) <= beta(proposed)`.
    pub beta: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub command: &'static str,
    pub kind: String,
    pub size: usize,
    pub seeds: Vec<u64>,
    pub rows: usize,
    pub medians: Medians,
    pub ordering: Ordering,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn summarize(rows: &[BenchRow], method: &str) -> MethodSummary {
    let pick = |f: fn(&BenchRow) -> f64| {
        let mut v: Vec<f64> = rows.iter().filter(|r| r.method == method).map(f).collect();
        median(&mut v)
    };
    MethodSummary {
        beta: pick(|r| r.beta),
        snr_db: pick(|r| r.snr_db),
        runtime_ms: pick(|r| r.runtime_ms),
    }
}

pub fn medians(rows: &[BenchRow]) -> Medians {
    Medians {
        noisy: summarize(rows, "noisy"),
        frost: summarize(rows, "frost"),
        logwav: summarize(rows, "logwav"),
        proposed: summarize(rows, "proposed"),
    }
}

pub fn ordering(m: &Medians) -> Ordering {
    Ordering {
        snr: m.noisy.snr_db < m.frost.snr_db
            && m.frost.snr_db < m.logwav.snr_db
            && m.logwav.snr_db <= m.proposed.snr_db,
        beta: m.noisy.beta.min(m.frost.beta) < m.logwav.beta && m.logwav.beta <= m.proposed.beta,
    }
}

/// Simulates one seed and evaluates every method against the clean phantom.
pub fn bench_seed(
    clean: &Image,
    speckle: &SpeckleSpec,
    cfg: &PipelineConfig,
    frost_window: usize,
    damping: f64,
) -> Result<Vec<BenchRow>> {
    let noisy = apply_speckle(clean, speckle).stage("speckle simulation")?;
    let mut rows = Vec::with_capacity(METHODS.len());
    for method in METHODS {
        let start = Instant::now();
        let out = match method {
            "noisy" => noisy.clone(),
            "frost" => pipeline::frost_filter(&noisy, frost_window, damping).stage("frost")?,
            "logwav" => pipeline::log_wavelet_baseline(&noisy, cfg.levels).stage("logwav")?,
            _ => pipeline::despeckle(&noisy, cfg).stage("despeckle")?.output,
        };
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        let report = MetricsReport::compute(clean, &out).stage("metrics")?;
        rows.push(BenchRow {
            seed: speckle.seed,
            method,
            beta: report.beta,
            snr_db: report.snr_db,
            runtime_ms,
        });
    }
    Ok(rows)
}

/// What a subcommand produced: one JSON line for standard output and,
/// for `bench` without `--out`, a CSV table for standard error. `failure`
/// is set when the reports were produced but a check failed (exit 1).
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub failure: Option<CliError>,
}

/// Executes a parsed command. Output files are written here; the JSON
/// report is returned for the caller to print.
pub fn run(cli: Cli) -> Result<Output> {
    match cli.command {
        Command::Phantom(a) => {
            let layer = Layered::new(&a.common)?;
            let (name, kind) = layer.kind(&a.kind)?;
            let size = layer.size(a.size)?;
            let img = generate_phantom(size, size, kind).stage("phantom")?;
            let clamped = write_image(&a.out, &img)?;
            #[derive(Serialize)]
            struct PhantomJson<'a> {
                command: &'a str,
                kind: String,
                out: String,
                width: usize,
                height: usize,
                clamped: usize,
            }
            Ok(Output {
                stdout: print_json(&PhantomJson {
                    command: "phantom",
                    kind: name,
                    out: a.out.display().to_string(),
                    width: size,
                    height: size,
                    clamped,
                }),
                ..Default::default()
            })
        }
        Command::Speckle(a) => {
            let layer = Layered::new(&a.common)?;
            let spec = layer.speckle(&a.mode, a.psf_sigma, layer.seed())?;
            let img = read_image(&a.input)?;
            let out = apply_speckle(&img, &spec).stage("speckle simulation")?;
            let clamped = write_image(&a.out, &out)?;
            Ok(Output {
                stdout: image_report("speckle", &a.out, &out, clamped),
                ..Default::default()
            })
        }
        Command::Despeckle(a) => {
            let layer = Layered::new(&a.common)?;
            let cfg = layer.pipeline()?;
            let img = read_image(&a.input)?;
            let report = pipeline::despeckle(&img, &cfg).stage("despeckle")?;
            let clamped = write_image(&a.out, &report.output)?;
            Ok(Output {
                stdout: print_json(&DespeckleJson {
                    command: "despeckle",
                    out: a.out.display().to_string(),
                    levels: cfg.levels,
                    window: cfg.window,
                    equalized: cfg.enable_equalization,
                    equalizer_epsilon: report.equalizer_epsilon,
                    sigma_n2: report.sigma_n2,
                    mean_k: report.mean_k,
                    clamped,
                }),
                ..Default::default()
            })
        }
        Command::Frost(a) => {
            let layer = Layered::new(&a.common)?;
            let window = layer.window_or(DEFAULT_FROST_WINDOW)?;
            let damping = a.damping.or(layer.file.damping).unwrap_or(DEFAULT_FROST_DAMPING);
            if !(damping > 0.0) {
                return Err(CliError::usage(format!("--damping {damping} must be positive")));
            }
            let img = read_image(&a.input)?;
            let out = pipeline::frost_filter(&img, window, damping).stage("frost")?;
            let clamped = write_image(&a.out, &out)?;
            Ok(Output {
                stdout: image_report("frost", &a.out, &out, clamped),
                ..Default::default()
            })
        }
        Command::Logwav(a) => {
            let layer = Layered::new(&a.common)?;
            let levels = layer.levels()?;
            let img = read_image(&a.input)?;
            let out = pipeline::log_wavelet_baseline(&img, levels).stage("logwav")?;
            let clamped = write_image(&a.out, &out)?;
            Ok(Output {
                stdout: image_report("logwav", &a.out, &out, clamped),
                ..Default::default()
            })
        }
        Command::Metrics(a) => {
            Layered::new(&a.common)?;
            let reference = read_image(&a.reference)?;
            let test = read_image(&a.test)?;
            let report = MetricsReport::compute(&reference, &test).stage("metrics")?;
            #[derive(Serialize)]
            struct MetricsJson {
                beta: f64,
                snr_db: f64,
                mse: f64,
            }
            Ok(Output {
                stdout: print_json(&MetricsJson {
                    beta: report.beta,
                    snr_db: report.snr_db,
                    mse: report.mse,
                }),
                ..Default::default()
            })
        }
        Command::Bench(a) => run_bench(a),
    }
}

fn run_bench(a: BenchArgs) -> Result<Output> {
    let layer = Layered::new(&a.common)?;
    let cfg = layer.pipeline()?;
    let (name, kind) = layer.kind(&a.kind)?;
    let size = layer.size(a.size)?;
    let seeds = a
        .seeds
        .clone()
        .or(layer.file.seeds.clone())
        .unwrap_or_else(|| vec![layer.seed()]);
    if seeds.is_empty() {
        return Err(CliError::usage("--seeds is empty"));
    }
    let damping = layer.file.damping.unwrap_or(DEFAULT_FROST_DAMPING);
    let clean = generate_phantom(size, size, kind).stage("phantom")?;

    let results: Vec<Result<Vec<BenchRow>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let (clean, cfg, layer) = (&clean, &cfg, &layer);
                let mode = &a.mode;
                scope.spawn(move || {
                    let spec = layer.speckle(mode, a.psf_sigma, seed)?;
                    bench_seed(clean, &spec, cfg, DEFAULT_FROST_WINDOW, damping)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by(|x, y| (x.seed, x.method).cmp(&(y.seed, y.method)));

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    let mut output = Output::default();
    match &a.out {
        Some(path) => fs::write(path, &csv).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => output.stderr = csv,
    }

    let medians = medians(&rows);
    let ordering = ordering(&medians);
    let summary = BenchSummary {
        command: "bench",
        kind: name,
        size,
        seeds,
        rows: rows.len(),
        medians,
        ordering,
    };
    output.stdout = print_json(&summary);
    if !summary.ordering.snr {
        let m = &summary.medians;
        output.failure = Some(CliError::Ordering(format!(
            "median SNR noisy {} frost {} logwav {} proposed {}",
            format_g6(m.noisy.snr_db),
            format_g6(m.frost.snr_db),
            format_g6(m.logwav.snr_db),
            format_g6(m.proposed.snr_db),
        )));
    }
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (21.675432, "21.6754"),
            (123456.7, "123457"),
            (999999.5, "1e+06"),
            (1234567.0, "1.23457e+06"),
            (0.0001234567, "0.000123457"),
            (0.00001234567, "1.23457e-05"),
            (-0.0349123, "-0.0349123"),
            (100.0, "100"),
            (f64::INFINITY, "inf"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g6(x), want, "{x}");
        }
    }

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    fn summary(snr: [f64; 4], beta: [f64; 4]) -> Medians {
        let s = |i: usize| MethodSummary {
            beta: beta[i],
            snr_db: snr[i],
            runtime_ms: 0.0,
        };
        Medians {
            noisy: s(0),
            frost: s(1),
            logwav: s(2),
            proposed: s(3),
        }
    }

    #[test]
    fn ordering_checks() {
        let ok = ordering(&summary([5.0, 19.0, 19.4, 21.7], [0.46, 0.5, 0.6, 0.87]));
        assert!(ok.snr && ok.beta);
        let tie = ordering(&summary([5.0, 19.0, 21.0, 21.0], [0.5, 0.4, 0.45, 0.45]));
        assert!(tie.snr && tie.beta);
        let bad = ordering(&summary([5.0, 19.0, 18.0, 21.0], [0.5, 0.6, 0.4, 0.3]));
        assert!(!bad.snr && !bad.beta);
    }

    #[test]
    fn csv_line_format() {
        let row = BenchRow {
            seed: 3,
            method: "frost",
            beta: 0.0298123456,
            snr_db: 18.9561234,
            runtime_ms: 12.5,
        };
        assert_eq!(row.csv_line(), "3,frost,0.0298123,18.9561,12.5");
    }

    #[test]
    fn raw_extension_detection() {
        assert!(is_raw_path(Path::new("a/b.dspk")));
        assert!(!is_raw_path(Path::new("a/b.pgm")));
        assert!(!is_raw_path(Path::new("dspk")));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<FileConfig>(r#"{"levels": 3, "bogus": 1}"#);
        assert!(err.is_err());
        let cfg: FileConfig = serde_json::from_str(r#"{"levels": 4, "equalize": false}"#).unwrap();
        assert_eq!(cfg.levels, Some(4));
        assert_eq!(cfg.equalize, Some(false));
    }

    #[test]
    fn flags_override_config_override_defaults() {
        let layer = Layered {
            file: FileConfig {
                levels: Some(4),
                epsilon: Some(0.5),
                equalize: Some(false),
                ..Default::default()
            },
            common: Common {
                levels: Some(2),
                ..Default::default()
            },
        };
        let cfg = layer.pipeline().unwrap();
        assert_eq!(cfg.levels, 2);
        assert_eq!(cfg.equalizer.epsilon, 0.5);
        assert!(!cfg.enable_equalization);
        assert_eq!(cfg.window, DEFAULT_WINDOW);
        assert_eq!(cfg.equalizer.block, EqualizerConfig::default().block);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let layer = Layered {
            common: Common {
                levels: Some(9),
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(layer.pipeline().unwrap_err().exit_code(), 2);
        let layer = Layered {
            common: Common {
                window: Some(4),
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(layer.pipeline().unwrap_err().exit_code(), 2);
    }
}
