//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numerical or
//! validation error. Every failure prints one diagnostic line on stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{
    nmse, rows_to_csv, run_benchmark, simulate, BenchConfig, BenchSignal, NoiseKind, NoiseSpec,
    SimulationSpec, DEFAULT_AR_COEFFS,
};
use crate::dictionary::{Dictionary, DictionarySpec, DEFAULT_SHIFT_GRANULARITY};
use crate::error::Error;
use crate::io::{load_signal, save_signal, SignalFormat};
use crate::pursuit::{
    bird_multichannel, with_jobs, BirdParams, StopReason, DEFAULT_RESIDUAL_FLOOR, DEFAULT_SEED,
};
use crate::rng::{derive_stream, namespace};
use crate::signal::MultichannelSignal;
use crate::stopping::{calibrate_threshold_mc, lambda_threshold, ThresholdSpec, ThresholdVariant};
use crate::structured::sbird;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Report layout version, bumped on incompatible changes.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "bird", version, about = "Noise-level-blind sparse denoising")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the blind stopping threshold (and optionally a Monte-Carlo estimate).
    Threshold(ThresholdArgs),
    /// Generate a synthetic noisy signal.
    Simulate(SimulateArgs),
    /// Denoise each channel independently with BIRD.
    Denoise(DenoiseArgs),
    /// Denoise all channels jointly with structured BIRD.
    DenoiseMulti(DenoiseMultiArgs),
    /// Run a benchmark sweep described by a JSON file.
    Bench(BenchArgs),
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("{p} is not in the open interval (0, 1)"))
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let l: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if l > 0.0 && l <= 1.0 {
        Ok(l)
    } else {
        Err(format!("{l} is not in (0, 1]"))
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v == 0 {
        Err("must be at least 1".into())
    } else {
        Ok(v)
    }
}

fn parse_finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not finite"))
    }
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Signal length N.
    #[arg(long, value_parser = parse_positive)]
    pub n: usize,
    /// Dictionary size M (defaults to the size of the dictionary built from
    /// --scales and --shift-granularity).
    #[arg(long, value_parser = parse_positive)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_probability)]
    pub p: f64,
    #[arg(long, default_value = "corrected")]
    pub variant: ThresholdVariant,
    /// Also estimate the threshold from this many white-noise draws.
    #[arg(long)]
    pub mc_trials: Option<usize>,
    #[command(flatten)]
    pub dict: DictArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct DictArgs {
    /// Comma-separated window lengths (default: 32..1024, those not above N).
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_SHIFT_GRANULARITY, value_parser = parse_positive)]
    pub shift_granularity: usize,
}

impl DictArgs {
    fn spec(&self, n: usize) -> DictionarySpec {
        match &self.scales {
            Some(s) => DictionarySpec::new(s.clone(), n, self.shift_granularity),
            None => DictionarySpec {
                shift_granularity: self.shift_granularity,
                ..DictionarySpec::with_defaults(n)
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub signal: BenchSignal,
    #[arg(long, value_parser = parse_positive)]
    pub n: usize,
    #[arg(long, default_value_t = 1, value_parser = parse_positive)]
    pub channels: usize,
    /// Number of shared atoms for the evoked signal.
    #[arg(long, default_value_t = 5, value_parser = parse_positive)]
    pub atoms: usize,
    #[arg(long, value_parser = parse_finite, allow_negative_numbers = true)]
    pub snr: f64,
    #[arg(long, default_value = "white")]
    pub noise: NoiseKind,
    /// Comma-separated AR coefficients for `--noise ar`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ar_coeffs: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub dict: DictArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the noise-free signal here.
    #[arg(long)]
    pub clean_out: Option<PathBuf>,
    #[command(flatten)]
    pub file: FileArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FileArgs {
    /// File format (default: from the extension, `.csv` or raw-f64).
    #[arg(long)]
    pub format: Option<SignalFormat>,
    /// CSV files carry a header row.
    #[arg(long)]
    pub header: bool,
}

impl FileArgs {
    fn format_for(&self, path: &Path) -> SignalFormat {
        self.format
            .unwrap_or_else(|| SignalFormat::from_extension(path))
    }
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub file: FileArgs,
    /// Number of randomized pursuits J.
    #[arg(long, default_value_t = 30, value_parser = parse_positive)]
    pub runs: usize,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_probability)]
    pub p: f64,
    #[arg(long, default_value = "corrected")]
    pub variant: ThresholdVariant,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub dict: DictArgs,
    /// Iteration cap per run (default N/4).
    #[arg(long, value_parser = parse_positive)]
    pub max_iter: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_parser = parse_positive)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Ground truth for an NMSE score in the report.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DenoiseMultiArgs {
    #[command(flatten)]
    pub common: DenoiseArgs,
    /// Fraction of channels aggregated for selection and stopping.
    #[arg(long, default_value_t = 1.0, value_parser = parse_fraction)]
    pub l: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Record wall-clock times (otherwise the column is 0).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, value_parser = parse_positive)]
    pub jobs: Option<usize>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("bird: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        _ => EXIT_NUMERIC,
    }
}

pub fn execute(command: &Command) -> crate::Result<()> {
    match command {
        Command::Threshold(a) => threshold(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Denoise(a) => denoise(a),
        Command::DenoiseMulti(a) => denoise_multi(a),
        Command::Bench(a) => bench(a),
    }
}

fn threshold(a: &ThresholdArgs) -> crate::Result<()> {
    let dict = match (a.m, a.mc_trials) {
        (Some(_), None) => None,
        _ => Some(Dictionary::new(a.dict.spec(a.n))?),
    };
    let m =
        a.m.unwrap_or_else(|| dict.as_ref().map_or(0, |d| d.num_atoms()));
    let value = lambda_threshold(&ThresholdSpec {
        n: a.n,
        m,
        p: a.p,
        variant: a.variant,
    })?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{value}").map_err(|e| Error::io("<stdout>", e))?;
    if let (Some(trials), Some(dict)) = (a.mc_trials, &dict) {
        let mut rng = derive_stream(a.seed, namespace::CALIBRATION);
        let mc = calibrate_threshold_mc(dict, a.p, trials, &mut rng)?;
        writeln!(out, "{mc}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn noise_spec(kind: NoiseKind, coeffs: &Option<Vec<f64>>) -> crate::Result<NoiseSpec> {
    let spec = NoiseSpec {
        kind,
        ar_coeffs: coeffs.clone().unwrap_or_else(|| DEFAULT_AR_COEFFS.to_vec()),
    };
    spec.validate()?;
    Ok(spec)
}

fn simulate_cmd(a: &SimulateArgs) -> crate::Result<()> {
    let dict = Dictionary::new(a.dict.spec(a.n))?;
    let spec = SimulationSpec {
        signal: a.signal,
        channels: a.channels,
        evoked_atoms: a.atoms,
        noise: noise_spec(a.noise, &a.ar_coeffs)?,
        snr_db: a.snr,
    };
    let inst = simulate(&spec, &dict, a.seed, 0)?;
    save_signal(
        &inst.noisy,
        &a.out,
        a.file.format_for(&a.out),
        a.file.header,
    )?;
    if let Some(path) = &a.clean_out {
        save_signal(&inst.clean, path, a.file.format_for(path), a.file.header)?;
    }
    Ok(())
}

/// Fully resolved settings echoed into every denoising report.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub input: String,
    pub format: SignalFormat,
    pub header: bool,
    pub out: String,
    pub reference: Option<String>,
    pub runs: usize,
    pub p: f64,
    pub variant: ThresholdVariant,
    pub seed: u64,
    pub scales: Vec<usize>,
    pub shift_granularity: usize,
    pub max_iterations: usize,
    pub residual_floor: f64,
    pub l: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DictionaryInfo {
    pub signal_length: usize,
    pub padded_length: usize,
    pub num_atoms: usize,
    pub subdictionary_len: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub channel: usize,
    pub run: usize,
    pub iterations: usize,
    pub atom_ids: Vec<u64>,
    pub coeffs: Vec<f64>,
    pub final_residual_norm: f64,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuredRunReport {
    pub run: usize,
    pub iterations: usize,
    pub atom_ids: Vec<u64>,
    /// Channels updated at each iteration.
    pub active_channels: Vec<Vec<usize>>,
    /// Coefficients aligned with `active_channels`.
    pub coeffs: Vec<Vec<f64>>,
    pub final_residual_norms: Vec<f64>,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum PerRun {
    Mono(Vec<RunReport>),
    Structured(Vec<StructuredRunReport>),
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub report_version: u32,
    pub command: &'static str,
    pub config: ResolvedConfig,
    pub seed: u64,
    #[serde(rename = "J")]
    pub j: usize,
    pub p: f64,
    pub variant: ThresholdVariant,
    pub threshold: f64,
    pub n: usize,
    pub channels: usize,
    pub dictionary: DictionaryInfo,
    pub mean_iterations: f64,
    pub zero_atom_runs: usize,
    pub per_run: PerRun,
    pub nmse_if_reference_given: Option<f64>,
}

struct Prepared {
    y: MultichannelSignal,
    dict: Dictionary,
    params: BirdParams,
    config: ResolvedConfig,
    reference: Option<MultichannelSignal>,
    out_format: SignalFormat,
}

fn prepare(a: &DenoiseArgs, l: Option<f64>) -> crate::Result<Prepared> {
    let in_format = a.file.format_for(&a.input);
    let y = load_signal(&a.input, in_format, a.file.header)?;
    let reference = match &a.reference {
        Some(path) => {
            let r = load_signal(path, a.file.format_for(path), a.file.header)?;
            y.check_same_shape(&r)?;
            Some(r)
        }
        None => None,
    };
    let dict = Dictionary::new(a.dict.spec(y.len()))?;
    let params = BirdParams {
        runs: a.runs,
        p: a.p,
        variant: a.variant,
        master_seed: a.seed,
        max_iterations: a.max_iter,
        residual_floor: DEFAULT_RESIDUAL_FLOOR,
        threshold_override: None,
    };
    let pc = params.pursuit_config(&dict)?;
    let config = ResolvedConfig {
        input: a.input.display().to_string(),
        format: in_format,
        header: a.file.header,
        out: a.out.display().to_string(),
        reference: a.reference.as_ref().map(|p| p.display().to_string()),
        runs: a.runs,
        p: a.p,
        variant: a.variant,
        seed: a.seed,
        scales: dict.spec().scales.clone(),
        shift_granularity: dict.shift_granularity(),
        max_iterations: pc.max_iterations,
        residual_floor: pc.residual_floor,
        l,
    };
    Ok(Prepared {
        y,
        out_format: a.file.format_for(&a.out),
        dict,
        params,
        config,
        reference,
    })
}

fn dictionary_info(dict: &Dictionary) -> DictionaryInfo {
    DictionaryInfo {
        signal_length: dict.signal_length(),
        padded_length: dict.padded_len(),
        num_atoms: dict.num_atoms(),
        subdictionary_len: dict.subdictionary_len(),
    }
}

fn finish(
    a: &DenoiseArgs,
    prep: Prepared,
    command: &'static str,
    estimate: &MultichannelSignal,
    threshold: f64,
    iterations: Vec<usize>,
    per_run: PerRun,
) -> crate::Result<()> {
    save_signal(estimate, &a.out, prep.out_format, a.file.header)?;
    let nmse_db = prep
        .reference
        .as_ref()
        .map(|r| nmse(estimate, r))
        .transpose()?;
    let total = iterations.len().max(1) as f64;
    let report = Report {
        report_version: REPORT_VERSION,
        command,
        seed: prep.params.master_seed,
        j: prep.params.runs,
        p: prep.params.p,
        variant: prep.params.variant,
        threshold,
        n: prep.y.len(),
        channels: prep.y.n_channels(),
        dictionary: dictionary_info(&prep.dict),
        mean_iterations: iterations.iter().sum::<usize>() as f64 / total,
        zero_atom_runs: iterations.iter().filter(|&&i| i == 0).count(),
        per_run,
        nmse_if_reference_given: nmse_db,
        config: prep.config,
    };
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> crate::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn denoise(a: &DenoiseArgs) -> crate::Result<()> {
    let prep = prepare(a, None)?;
    let res = with_jobs(a.jobs, || {
        bird_multichannel(&prep.y, &prep.dict, &prep.params)
    })??;
    let mut runs = Vec::new();
    for (c, ch) in res.channels.iter().enumerate() {
        for (j, r) in ch.runs.iter().enumerate() {
            runs.push(RunReport {
                channel: c,
                run: j,
                iterations: r.iterations,
                atom_ids: r.selections.iter().map(|(id, _)| id.0).collect(),
                coeffs: r.selections.iter().map(|(_, c)| *c).collect(),
                final_residual_norm: r.final_residual_norm,
                stop: r.stop,
            });
        }
    }
    let iterations = runs.iter().map(|r| r.iterations).collect();
    finish(
        a,
        prep,
        "denoise",
        &res.estimate,
        res.threshold,
        iterations,
        PerRun::Mono(runs),
    )
}

fn denoise_multi(a: &DenoiseMultiArgs) -> crate::Result<()> {
    let prep = prepare(&a.common, Some(a.l))?;
    let res = with_jobs(a.common.jobs, || {
        sbird(&prep.y, &prep.dict, &prep.params, a.l)
    })??;
    let runs: Vec<StructuredRunReport> = res
        .runs
        .iter()
        .enumerate()
        .map(|(j, r)| StructuredRunReport {
            run: j,
            iterations: r.iterations,
            atom_ids: r.atoms.iter().map(|id| id.0).collect(),
            active_channels: r.active.clone(),
            coeffs: r.coeffs.clone(),
            final_residual_norms: r.final_residual_norms(),
            stop: r.stop,
        })
        .collect();
    let iterations = runs.iter().map(|r| r.iterations).collect();
    finish(
        &a.common,
        prep,
        "denoise-multi",
        &res.estimate,
        res.threshold,
        iterations,
        PerRun::Structured(runs),
    )
}

fn bench(a: &BenchArgs) -> crate::Result<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let config = BenchConfig::from_json(&text)?;
    let rows = with_jobs(a.jobs, || run_benchmark(&config, a.timing))??;
    fs::write(&a.out, rows_to_csv(&rows)).map_err(|e| Error::io(&a.out, e))
}
