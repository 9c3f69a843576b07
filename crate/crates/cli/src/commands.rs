//! Subcommands, their resolved jobs and execution.
//!
//! Every invocation is first resolved into a [`Job`] with all defaults
//! materialized (bundled config files are inlined, `STC_SEED` applied). The
//! job is what gets executed and what the manifest stores, so a manifest
//! replays to byte-identical outputs.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use stc_core::array::{
    angle_grid, array_factor, column_coefficients, find_peak, steering_angle_with_spacing,
    ArrayGeometry, ElementPattern, SteeringPlan,
};
use stc_core::codebook::{
    bits_to_symbols, design_by_shift, search_codebook, strongest_code, Codebook, CodebookDocument,
    ModulationScheme, SearchOptions,
};
use stc_core::codes::{Alphabet, TimeCode, DEFAULT_ENUMERATION_CAP};
use stc_core::export::fmt_num;
use stc_core::harmonics::{constellation_map, spectrum, write_map_csv, write_spectrum_csv};
use stc_core::linksim::{
    angular_sweep, build_codebook, column_schedules, run_link, write_sweep_csv, LinkConfig,
    DEFAULT_BIT_DURATION,
};

use crate::manifest;
use crate::schedule::{parse_payload, render, ScheduleHeader};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, inputs or configuration; exit status 2.
    Usage(String),
    /// Anything else; exit status 1.
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

fn usage<E: fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("writing {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "stc",
    version,
    about = "Space-time coded metasurface simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Harmonic amplitudes and phases of one code.
    Spectrum(SpectrumArgs),
    /// Constellation map of every code of a given length.
    Map(MapArgs),
    /// Design a PSK codebook.
    Codebook(CodebookArgs),
    /// Steering angle and array-factor pattern for a column shift.
    Steer(SteerArgs),
    /// Run the simulated radio link from a JSON config.
    Linksim(LinksimArgs),
    /// Run the link at a range of receiver angles.
    Sweep(SweepArgs),
    /// Export the per-column bit schedule for a payload.
    ExportSchedule(ExportArgs),
    /// Regenerate an output set from its manifest.
    Replay(ReplayArgs),
}

fn parse_alphabet(s: &str) -> Result<Alphabet, String> {
    s.parse()
}

fn parse_element(s: &str) -> Result<ElementPattern, String> {
    match s {
        "isotropic" => Ok(ElementPattern::Isotropic),
        "cosine" => Ok(ElementPattern::Cosine),
        other => Err(format!(
            "unknown element pattern {other:?} (isotropic or cosine)"
        )),
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub code: String,
    /// Bit duration in seconds.
    #[arg(long, default_value_t = DEFAULT_BIT_DURATION)]
    pub tau: f64,
    #[arg(long, default_value_t = 10)]
    pub nmax: u32,
    #[arg(long, default_value = "binary", value_parser = parse_alphabet)]
    pub alphabet: Alphabet,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MapArgs {
    #[arg(long)]
    pub length: usize,
    #[arg(long, default_value_t = 1)]
    pub harmonic: i64,
    #[arg(long, default_value = "binary", value_parser = parse_alphabet)]
    pub alphabet: Alphabet,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum SchemeName {
    #[value(name = "bpsk")]
    #[serde(rename = "bpsk")]
    Bpsk,
    #[value(name = "qpsk")]
    #[serde(rename = "qpsk")]
    Qpsk,
    #[value(name = "8psk")]
    #[serde(rename = "8psk")]
    Psk8,
    #[value(name = "16psk")]
    #[serde(rename = "16psk")]
    Psk16,
}

impl SchemeName {
    fn order(self) -> usize {
        match self {
            SchemeName::Bpsk => 2,
            SchemeName::Qpsk => 4,
            SchemeName::Psk8 => 8,
            SchemeName::Psk16 => 16,
        }
    }

    /// 16-PSK defaults to L = 16 where shifts alone reach every phase.
    fn default_length(self) -> usize {
        if self == SchemeName::Psk16 {
            16
        } else {
            8
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Shift,
    Search,
}

#[derive(Debug, Clone, Args)]
pub struct CodebookArgs {
    #[arg(long, value_enum)]
    pub scheme: SchemeName,
    /// Code length; 16 for 16psk, otherwise 8.
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub harmonic: i64,
    #[arg(long, value_enum, default_value = "shift")]
    pub method: MethodName,
    /// Base code for the shift method; defaults to the strongest code.
    #[arg(long)]
    pub base: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub amp_tol: f64,
    /// Phase tolerance in radians; defaults to pi/(2M).
    #[arg(long)]
    pub phase_tol: Option<f64>,
    /// Target phase of symbol 0 in radians (search method).
    #[arg(long, default_value_t = 0.0)]
    pub offset: f64,
    #[arg(long, default_value_t = DEFAULT_BIT_DURATION)]
    pub tau: f64,
    #[arg(long, default_value = "binary", value_parser = parse_alphabet)]
    pub alphabet: Alphabet,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodebookJob {
    pub scheme: SchemeName,
    pub length: usize,
    pub harmonic: i64,
    pub method: MethodName,
    pub base: Option<String>,
    pub amp_tol: f64,
    pub phase_tol: f64,
    pub offset: f64,
    pub tau: f64,
    pub alphabet: Alphabet,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SteerArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub shift: i64,
    #[arg(long, default_value_t = 8)]
    pub length: usize,
    #[arg(long, default_value_t = 1)]
    pub harmonic: i64,
    #[arg(long, default_value_t = 8)]
    pub columns: usize,
    /// Column pitch in wavelengths.
    #[arg(long, default_value_t = 0.5)]
    pub spacing: f64,
    /// Angle grid step in degrees.
    #[arg(long, default_value_t = 0.1)]
    pub grid: f64,
    /// Base code; defaults to the strongest code of the length.
    #[arg(long)]
    pub base: Option<String>,
    #[arg(long, default_value = "isotropic", value_parser = parse_element)]
    pub element: ElementPattern,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteerJob {
    pub shift: i64,
    pub length: usize,
    pub harmonic: i64,
    pub columns: usize,
    pub spacing: f64,
    pub grid: f64,
    pub base: String,
    pub element: ElementPattern,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct LinksimArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Column shift; defaults to the config's shift_per_column.
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<i64>,
    #[arg(long, default_value_t = -90.0, allow_hyphen_values = true)]
    pub start: f64,
    #[arg(long, default_value_t = 90.0, allow_hyphen_values = true)]
    pub stop: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub codebook: PathBuf,
    /// Hex digits, or a binary string prefixed with 0b.
    #[arg(long)]
    pub payload: String,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 8)]
    pub columns: usize,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub shift: i64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write the regenerated outputs here instead of the original location.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A fully resolved invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Job {
    Spectrum(SpectrumArgs),
    Map(MapArgs),
    Codebook(CodebookJob),
    Steer(SteerJob),
    Linksim {
        config: LinkConfig,
        out: PathBuf,
    },
    Sweep {
        config: LinkConfig,
        shift: i64,
        angles: Vec<f64>,
        out: PathBuf,
    },
    ExportSchedule {
        codebook: CodebookDocument,
        payload: String,
        reps: usize,
        columns: usize,
        shift: i64,
        out: PathBuf,
    },
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Spectrum(_) => "spectrum",
            Job::Map(_) => "map",
            Job::Codebook(_) => "codebook",
            Job::Steer(_) => "steer",
            Job::Linksim { .. } => "linksim",
            Job::Sweep { .. } => "sweep",
            Job::ExportSchedule { .. } => "export-schedule",
        }
    }

    pub fn out(&self) -> &Path {
        match self {
            Job::Spectrum(a) => &a.out,
            Job::Map(a) => &a.out,
            Job::Codebook(a) => &a.out,
            Job::Steer(a) => &a.out,
            Job::Linksim { out, .. } | Job::Sweep { out, .. } | Job::ExportSchedule { out, .. } => {
                out
            }
        }
    }

    fn set_out(&mut self, path: PathBuf) {
        match self {
            Job::Spectrum(a) => a.out = path,
            Job::Map(a) => a.out = path,
            Job::Codebook(a) => a.out = path,
            Job::Steer(a) => a.out = path,
            Job::Linksim { out, .. } | Job::Sweep { out, .. } | Job::ExportSchedule { out, .. } => {
                *out = path
            }
        }
    }

    pub fn writes_directory(&self) -> bool {
        matches!(self, Job::Linksim { .. } | Job::Sweep { .. })
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::Linksim { config, .. } | Job::Sweep { config, .. } => Some(config.seed),
            _ => None,
        }
    }
}

pub fn run(command: Command) -> Result<Option<String>, CliError> {
    let job = match command {
        Command::Replay(args) => {
            let m = manifest::read(&args.manifest)?;
            let mut job = m.job;
            if let Some(out) = args.out {
                job.set_out(out);
            }
            job
        }
        other => resolve(other)?,
    };
    let (outputs, summary) = execute(&job)?;
    manifest::write(&job, &outputs)?;
    Ok(summary)
}

fn load_link_config(path: &Path) -> Result<LinkConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("reading config {}: {e}", path.display())))?;
    let mut cfg: LinkConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("parsing config {}: {e}", path.display())))?;
    if let Ok(seed) = std::env::var("STC_SEED") {
        cfg.seed = seed.trim().parse().map_err(|_| {
            CliError::Usage(format!("STC_SEED={seed:?} is not an unsigned integer"))
        })?;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn resolve(command: Command) -> Result<Job, CliError> {
    Ok(match command {
        Command::Spectrum(a) => Job::Spectrum(a),
        Command::Map(a) => Job::Map(a),
        Command::Codebook(a) => {
            let order = a.scheme.order();
            Job::Codebook(CodebookJob {
                scheme: a.scheme,
                length: a.length.unwrap_or(a.scheme.default_length()),
                harmonic: a.harmonic,
                method: a.method,
                base: a.base,
                amp_tol: a.amp_tol,
                phase_tol: a.phase_tol.unwrap_or(PI / (2.0 * order as f64)),
                offset: a.offset,
                tau: a.tau,
                alphabet: a.alphabet,
                out: a.out,
            })
        }
        Command::Steer(a) => {
            let base = match a.base {
                Some(b) => b,
                None => {
                    strongest_code(a.length, a.harmonic, Alphabet::Binary, DEFAULT_BIT_DURATION)
                        .map_err(usage)?
                        .to_string()
                }
            };
            Job::Steer(SteerJob {
                shift: a.shift,
                length: a.length,
                harmonic: a.harmonic,
                columns: a.columns,
                spacing: a.spacing,
                grid: a.grid,
                base,
                element: a.element,
                out: a.out,
            })
        }
        Command::Linksim(a) => Job::Linksim {
            config: load_link_config(&a.config)?,
            out: a.out,
        },
        Command::Sweep(a) => {
            let config = load_link_config(&a.config)?;
            if !(a.step.is_finite() && a.step > 0.0) || a.start > a.stop {
                return Err(CliError::Usage(
                    "sweep needs start <= stop and step > 0".into(),
                ));
            }
            Job::Sweep {
                shift: a.shift.unwrap_or(config.shift_per_column),
                config,
                angles: angle_grid(a.start, a.stop, a.step),
                out: a.out,
            }
        }
        Command::ExportSchedule(a) => {
            let text = fs::read_to_string(&a.codebook).map_err(|e| {
                CliError::Usage(format!("reading codebook {}: {e}", a.codebook.display()))
            })?;
            let codebook: CodebookDocument = serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("parsing codebook {}: {e}", a.codebook.display()))
            })?;
            Job::ExportSchedule {
                codebook,
                payload: a.payload,
                reps: a.reps,
                columns: a.columns,
                shift: a.shift,
                out: a.out,
            }
        }
        Command::Replay(_) => unreachable!("replay is handled by run"),
    })
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut f = create_file(path)?;
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    f.flush().map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(format!("serializing JSON: {e}")))
}

type Outcome = (Vec<PathBuf>, Option<String>);

fn execute(job: &Job) -> Result<Outcome, CliError> {
    match job {
        Job::Spectrum(a) => run_spectrum(a),
        Job::Map(a) => run_map(a),
        Job::Codebook(a) => run_codebook(a),
        Job::Steer(a) => run_steer(a),
        Job::Linksim { config, out } => run_linksim(config, out),
        Job::Sweep {
            config,
            shift,
            angles,
            out,
        } => run_sweep(config, *shift, angles, out),
        Job::ExportSchedule {
            codebook,
            payload,
            reps,
            columns,
            shift,
            out,
        } => run_export(codebook, payload, *reps, *columns, *shift, out),
    }
}

fn run_spectrum(a: &SpectrumArgs) -> Result<Outcome, CliError> {
    let code = TimeCode::parse(&a.code, a.tau, a.alphabet).map_err(usage)?;
    let points = spectrum(&code, a.nmax);
    let mut f = create_file(&a.out)?;
    write_spectrum_csv(&mut f, &points).map_err(|e| io_err(&a.out, e))?;
    drop(f);
    Ok((
        vec![a.out.clone()],
        Some(format!(
            "{} harmonics, spacing {} Hz",
            points.len(),
            fmt_num(1.0 / code.period())
        )),
    ))
}

fn run_map(a: &MapArgs) -> Result<Outcome, CliError> {
    let map = constellation_map(
        a.length,
        a.harmonic,
        a.alphabet,
        DEFAULT_BIT_DURATION,
        a.cap,
    )
    .map_err(usage)?;
    let mut f = create_file(&a.out)?;
    write_map_csv(&mut f, &map).map_err(|e| io_err(&a.out, e))?;
    drop(f);
    Ok((
        vec![a.out.clone()],
        Some(format!("{} codes", map.points.len())),
    ))
}

fn design(a: &CodebookJob) -> Result<Codebook, CliError> {
    let order = a.scheme.order();
    let scheme = ModulationScheme::new(order, a.harmonic, a.offset).map_err(usage)?;
    match a.method {
        MethodName::Shift => {
            let base = match &a.base {
                Some(b) => TimeCode::parse(b, a.tau, a.alphabet).map_err(usage)?,
                None => strongest_code(a.length, a.harmonic, a.alphabet, a.tau).map_err(usage)?,
            };
            if base.len() != a.length {
                return Err(CliError::Usage(format!(
                    "base code {base} is not {} bits long",
                    a.length
                )));
            }
            design_by_shift(&base, &scheme).map_err(usage)
        }
        MethodName::Search => {
            let opts = SearchOptions {
                amp_tol: a.amp_tol,
                phase_tol: a.phase_tol,
                alphabet: a.alphabet,
                bit_duration: a.tau,
                cap: DEFAULT_ENUMERATION_CAP,
            };
            search_codebook(a.length, &scheme, &opts).map_err(usage)
        }
    }
}

fn run_codebook(a: &CodebookJob) -> Result<Outcome, CliError> {
    let book = design(a)?;
    write_text(&a.out, &to_json(&book.to_document())?)?;
    Ok((
        vec![a.out.clone()],
        Some(format!(
            "{}-PSK L={} ring={} max_phase_err_rad={} leakage={}",
            book.scheme().order(),
            book.code_length(),
            fmt_num(book.ring_amplitude()),
            fmt_num(book.quality().max_phase_err_rad),
            fmt_num(book.quality().leakage)
        )),
    ))
}

fn run_steer(a: &SteerJob) -> Result<Outcome, CliError> {
    let predicted =
        steering_angle_with_spacing(a.harmonic, a.shift, a.length, a.spacing).map_err(usage)?;
    if predicted.endfire {
        eprintln!("warning: endfire steering (sin theta = +/-1), pattern computed as-is");
    }
    let base = TimeCode::parse(&a.base, DEFAULT_BIT_DURATION, Alphabet::Binary).map_err(usage)?;
    if base.len() != a.length {
        return Err(CliError::Usage(format!(
            "base code {} is not {} bits long",
            a.base, a.length
        )));
    }
    if !(a.grid.is_finite() && a.grid > 0.0) {
        return Err(CliError::Usage("grid step must be positive".into()));
    }
    let plan = SteeringPlan {
        base,
        shift: a.shift,
        harmonic: a.harmonic,
    };
    let geom = ArrayGeometry {
        columns: a.columns,
        spacing: a.spacing,
        element: a.element,
    };
    let coeffs = column_coefficients(&plan, a.columns);
    if coeffs.first().is_some_and(|c| c.norm() == 0.0) {
        eprintln!("warning: base code has no harmonic-{} content", a.harmonic);
    }
    let pattern = array_factor(&coeffs, &geom, &angle_grid(-90.0, 90.0, a.grid)).map_err(usage)?;
    let peak = find_peak(&pattern).map_err(usage)?;
    let mut f = create_file(&a.out)?;
    pattern.write_csv(&mut f).map_err(|e| io_err(&a.out, e))?;
    drop(f);
    Ok((
        vec![a.out.clone()],
        Some(format!(
            "predicted_deg={} peak_deg={}",
            fmt_num(predicted.degrees),
            fmt_num(peak.angle_deg)
        )),
    ))
}

fn run_linksim(config: &LinkConfig, out: &Path) -> Result<Outcome, CliError> {
    let run = run_link(config).map_err(usage)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let report_path = out.join("report.json");
    let spectrum_path = out.join("spectrum.csv");
    let constellation_path = out.join("constellation.csv");
    let codebook_path = out.join("codebook.json");
    write_text(&report_path, &to_json(&run.report)?)?;
    let mut f = create_file(&spectrum_path)?;
    run.report
        .spectrum
        .write_csv(&mut f)
        .map_err(|e| io_err(&spectrum_path, e))?;
    drop(f);
    let mut f = create_file(&constellation_path)?;
    run.report
        .write_constellation_csv(&mut f)
        .map_err(|e| io_err(&constellation_path, e))?;
    drop(f);
    write_text(&codebook_path, &to_json(&run.codebook.to_document())?)?;
    Ok((
        vec![
            report_path,
            spectrum_path,
            constellation_path,
            codebook_path,
        ],
        Some(format!(
            "ser={} evm_pct={} snr_db={}",
            fmt_num(run.report.ser),
            fmt_num(run.report.evm_pct),
            fmt_num(run.report.post_filter_snr_db)
        )),
    ))
}

fn run_sweep(
    config: &LinkConfig,
    shift: i64,
    angles: &[f64],
    out: &Path,
) -> Result<Outcome, CliError> {
    let book = build_codebook(config).map_err(usage)?;
    let points = angular_sweep(shift, &book, config, angles).map_err(usage)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let path = out.join("sweep.csv");
    let mut f = create_file(&path)?;
    write_sweep_csv(&mut f, &points).map_err(|e| io_err(&path, e))?;
    drop(f);
    let peak = points
        .iter()
        .max_by(|a, b| {
            a.power_db
                .total_cmp(&b.power_db)
                .then(b.angle_deg.abs().total_cmp(&a.angle_deg.abs()))
        })
        .map(|p| p.angle_deg)
        .unwrap_or(0.0);
    Ok((vec![path], Some(format!("peak_deg={}", fmt_num(peak)))))
}

fn run_export(
    doc: &CodebookDocument,
    payload: &str,
    reps: usize,
    columns: usize,
    shift: i64,
    out: &Path,
) -> Result<Outcome, CliError> {
    let book = Codebook::from_document(doc).map_err(usage)?;
    let bits = parse_payload(payload).map_err(CliError::Usage)?;
    let symbols = bits_to_symbols(&bits, book.scheme().order()).map_err(usage)?;
    if columns == 0 {
        return Err(CliError::Usage("columns must be at least 1".into()));
    }
    let schedules = column_schedules(&book, &symbols, columns, shift, reps).map_err(usage)?;
    let text = render(
        &ScheduleHeader {
            bit_duration: book.bit_duration(),
            code_length: book.code_length(),
            reps,
            shift,
            symbols: symbols.len(),
        },
        &schedules,
    );
    write_text(out, &text)?;
    Ok((
        vec![out.to_path_buf()],
        Some(format!(
            "{} symbols, {} bit intervals",
            symbols.len(),
            symbols.len() * reps * book.code_length()
        )),
    ))
}
