//! Argument parsing and subcommand dispatch for the `angloc` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use angloc_core::aoa::analyze;
use angloc_core::csi::{parse_intel5300, records_to_trace, save_trace, RadioConfig};
use angloc_core::locator::{
    build_radio_map, locate, loocv_tune, MatchParams, RadioMap, TuningGrid,
};
use angloc_core::prep::calibrate;
use angloc_core::sim::SceneSpec;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{CliConfig, ParamOverrides};
use crate::error::{CliError, CliResult, Context};
use crate::eval::{evaluate, EvalReport};
use crate::output::{read_json, write_atomic, write_json, Provenance};
use crate::simulate::{
    load_trace_file, simulate, write_simulation, LoadedManifest, SimulationPlan,
    DEFAULT_TEST_POINTS,
};
use crate::study;

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "angloc",
    version,
    about = "Indoor localization from Wi-Fi CSI fingerprints"
)]
pub struct Cli {
    /// JSON configuration file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file, or directory for `simulate`. Files go to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate survey and test traces for a scene.
    Simulate(SimulateArgs),
    /// Convert an Intel 5300 log into a portable trace.
    Ingest(IngestArgs),
    /// Build a radio map from a survey manifest.
    BuildMap(BuildMapArgs),
    /// Tune matching parameters by leave-one-out cross-validation.
    Tune(TuneArgs),
    /// Locate one set of online traces.
    Locate(LocateArgs),
    /// Locate every test point of a manifest and report the errors.
    Evaluate(EvaluateArgs),
    /// Run a Monte Carlo study.
    Study(StudyArgs),
    /// Export the AoA-ToF pseudo-spectrum of a trace.
    AoaSpectrum(SpectrumArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Packets per RP trace.
    #[arg(long)]
    pub packets: Option<usize>,
    /// Packets per test-point trace.
    #[arg(long)]
    pub test_packets: Option<usize>,
    /// Random test points when the scene lists none.
    #[arg(long)]
    pub test_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "")]
    pub source_id: String,
    /// Survey location as `x,y` meters.
    #[arg(long, value_parser = parse_point)]
    pub location: Option<[f64; 2]>,
}

#[derive(Debug, Args)]
pub struct BuildMapArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Tune the matching parameters before saving.
    #[arg(long)]
    pub tune: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Search with the angle term switched off.
    #[arg(long)]
    pub entropy_only: bool,
    /// Also write the tuned parameters back into the map file.
    #[arg(long)]
    pub update_map: bool,
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct ParamFlags {
    #[arg(long)]
    pub m_c: Option<usize>,
    /// Angle weight; the entropy weight becomes `1 - w_a`.
    #[arg(long)]
    pub w_a: Option<f64>,
    #[arg(long)]
    pub rho_e: Option<f64>,
    #[arg(long)]
    pub rho_a: Option<f64>,
    #[arg(long)]
    pub tau_scale: Option<f64>,
}

impl From<ParamFlags> for ParamOverrides {
    fn from(f: ParamFlags) -> Self {
        ParamOverrides {
            m_c: f.m_c,
            w_a: f.w_a,
            rho_e: f.rho_e,
            rho_a: f.rho_a,
            tau_scale: f.tau_scale,
        }
    }
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Online trace per AP as `AP=FILE`; one per map AP.
    #[arg(long = "trace", value_parser = parse_ap_trace, required = true)]
    pub traces: Vec<(String, PathBuf)>,
    /// Parameter file written by `tune`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ParamFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Where to write the error CDF; defaults to the report path with a
    /// `.cdf.csv` suffix.
    #[arg(long)]
    pub cdf: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ParamFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    EntropyPackets,
    AoaPackets,
    SmoothingSweep,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, value_enum)]
    pub kind: StudyKind,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long, default_value_t = 15.0)]
    pub snr_db: f64,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Calibrate the trace first.
    #[arg(long)]
    pub calibrate: bool,
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected x,y, got {s:?}"));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    Ok([num(parts[0])?, num(parts[1])?])
}

fn parse_ap_trace(s: &str) -> Result<(String, PathBuf), String> {
    let (ap, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected AP=FILE, got {s:?}"))?;
    if ap.is_empty() || path.is_empty() {
        return Err(format!("expected AP=FILE, got {s:?}"));
    }
    Ok((ap.to_string(), PathBuf::from(path)))
}

/// Output of `tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub provenance: Provenance,
    pub params: MatchParams,
    /// Mean leave-one-out error at `params`, meters.
    pub mean_error: f64,
    pub evaluated: usize,
}

/// Parameter files may be a bare parameter object or a [`TuneReport`].
#[derive(Deserialize)]
#[serde(untagged)]
enum ParamsFile {
    Report { params: MatchParams },
    Bare(MatchParams),
}

fn load_params(path: &Path) -> CliResult<MatchParams> {
    Ok(match read_json::<ParamsFile>(path)? {
        ParamsFile::Report { params } | ParamsFile::Bare(params) => params,
    })
}

/// Parameter precedence: flags, then a parameter file, then the config
/// file, then whatever the map stores.
fn resolve_params(
    map: &RadioMap,
    file: Option<&Path>,
    config: &CliConfig,
    flags: ParamFlags,
) -> CliResult<MatchParams> {
    let base = match file {
        Some(p) => load_params(p)?,
        None => config.params.unwrap_or(map.params),
    };
    let p = ParamOverrides::from(flags).apply(base);
    p.validate(map.rps.len()).context("matching parameters")?;
    Ok(p)
}

fn load_map(path: &Path) -> CliResult<RadioMap> {
    let text = std::fs::read_to_string(path).context(format!("reading {}", path.display()))?;
    RadioMap::from_json(&text).context(format!("loading {}", path.display()))
}

/// Writes to `--out` atomically, or to stdout.
fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => match std::io::stdout().write_all(bytes) {
            // A closed reader (`angloc ... | head`) is not a failure.
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.context("writing to stdout"),
        },
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
            text.push('\n');
            emit(None, text.as_bytes())
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let config = CliConfig::load(cli.config.as_deref())?;
    let out = cli.out.as_deref();
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, &config, seed, out),
        Command::Ingest(a) => cmd_ingest(&a, out),
        Command::BuildMap(a) => cmd_build_map(&a, &config, out),
        Command::Tune(a) => cmd_tune(&a, &config, out),
        Command::Locate(a) => cmd_locate(&a, &config, out),
        Command::Evaluate(a) => cmd_evaluate(&a, &config, out),
        Command::Study(a) => cmd_study(&a, &config, seed, out),
        Command::AoaSpectrum(a) => cmd_aoa_spectrum(&a, &config, out),
    }
}

fn cmd_simulate(
    a: &SimulateArgs,
    config: &CliConfig,
    seed: u64,
    out: Option<&Path>,
) -> CliResult<()> {
    let dir = out.ok_or_else(|| CliError::usage("simulate needs --out DIR"))?;
    let text =
        std::fs::read_to_string(&a.scene).context(format!("reading {}", a.scene.display()))?;
    let mut scene = SceneSpec::from_json(&text)
        .context(format!("scene {}", a.scene.display()))
        .map_err(CliError::into_config)?;
    let d = &config.simulate;
    if let Some(snr) = a.snr_db.or(d.snr_db) {
        scene.snr_db = snr;
    }
    let mut plan = SimulationPlan::for_pipeline(scene, &config.pipeline, seed);
    plan.rp_packets = a.packets.or(d.rp_packets).unwrap_or(plan.rp_packets);
    plan.test_packets = a
        .test_packets
        .or(d.test_packets)
        .unwrap_or(plan.test_packets);
    plan.n_test_points = a
        .test_points
        .or(d.n_test_points)
        .unwrap_or(DEFAULT_TEST_POINTS);
    let sim = simulate(&plan).map_err(CliError::into_config)?;
    let provenance = Provenance::new(
        "simulate",
        Some(seed),
        &(
            &plan.scene,
            plan.rp_packets,
            plan.test_packets,
            plan.n_test_points,
        ),
    )
    .with_input(&a.scene)?;
    write_simulation(&sim, dir, provenance)?;
    log::info!(
        "wrote {} RPs and {} test points to {}",
        sim.rps.len(),
        sim.tests.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_ingest(a: &IngestArgs, out: Option<&Path>) -> CliResult<()> {
    let bytes = std::fs::read(&a.input).context(format!("reading {}", a.input.display()))?;
    let records = parse_intel5300(&bytes).context(format!("parsing {}", a.input.display()))?;
    let first = records.first().ok_or_else(|| CliError::Core {
        context: a.input.display().to_string(),
        source: angloc_core::Error::InvalidInput("no CSI records found".into()),
    })?;
    let (n_rx, n_tx, _) = first.packet.dims();
    let radio = RadioConfig {
        n_rx,
        n_tx,
        ..RadioConfig::default()
    };
    let source = if a.source_id.is_empty() {
        a.input.display().to_string()
    } else {
        a.source_id.clone()
    };
    let mut trace = records_to_trace(&records, radio, &source).context("assembling trace")?;
    if let Some([x, y]) = a.location {
        trace = trace.with_location(x, y);
    }
    let mut buf = Vec::new();
    save_trace(&trace, &mut buf).context("encoding trace")?;
    log::info!("ingested {} packets", trace.len());
    emit(out, &buf)
}

fn cmd_build_map(a: &BuildMapArgs, config: &CliConfig, out: Option<&Path>) -> CliResult<()> {
    let loaded = LoadedManifest::open(&a.manifest)?;
    let surveys = loaded.surveys()?;
    let mut params = config.params.unwrap_or_default();
    params.m_c = params.m_c.min(surveys.len());
    let mut map = build_radio_map(&surveys, &loaded.manifest.aps, &config.pipeline, params)
        .context("building radio map")?;
    if a.tune {
        let r = loocv_tune(&map, &config.tuning).context("tuning")?;
        log::info!(
            "tuned {:?}, LOOCV mean error {:.3} m",
            r.params,
            r.mean_error
        );
        map.params = r.params;
    }
    let text = map.to_json().context("serializing map")?;
    emit(out, format!("{text}\n").as_bytes())
}

fn cmd_tune(a: &TuneArgs, config: &CliConfig, out: Option<&Path>) -> CliResult<()> {
    let mut map = load_map(&a.map)?;
    let grid = if a.entropy_only {
        TuningGrid {
            w_a: vec![0.0],
            rho_a: vec![config.tuning.rho_a[0]],
            ..config.tuning.clone()
        }
    } else {
        config.tuning.clone()
    };
    let r = loocv_tune(&map, &grid).context("tuning")?;
    let report = TuneReport {
        provenance: Provenance::new("tune", None, &grid).with_input(&a.map)?,
        params: r.params,
        mean_error: r.mean_error,
        evaluated: r.evaluated,
    };
    if a.update_map {
        map.params = r.params;
        let text = map.to_json().context("serializing map")?;
        write_atomic(&a.map, format!("{text}\n").as_bytes())?;
    }
    emit_json(out, &report)
}

fn cmd_locate(a: &LocateArgs, config: &CliConfig, out: Option<&Path>) -> CliResult<()> {
    let map = load_map(&a.map)?;
    let params = resolve_params(&map, a.params.as_deref(), config, a.flags)?;
    let mut traces = Vec::with_capacity(map.aps.len());
    for ap in &map.aps {
        let (_, path) = a
            .traces
            .iter()
            .find(|(id, _)| id == ap)
            .ok_or_else(|| CliError::usage(format!("missing --trace {ap}=FILE")))?;
        traces.push(load_trace_file(path)?);
    }
    if let Some((id, _)) = a.traces.iter().find(|(id, _)| !map.aps.contains(id)) {
        return Err(CliError::usage(format!("map has no AP named {id}")));
    }
    let est = locate(&traces, &map, Some(&params)).context("locating")?;
    emit_json(out, &est)
}

fn cmd_evaluate(a: &EvaluateArgs, config: &CliConfig, out: Option<&Path>) -> CliResult<()> {
    let map = load_map(&a.map)?;
    let params = resolve_params(&map, a.params.as_deref(), config, a.flags)?;
    let loaded = LoadedManifest::open(&a.manifest)?;
    if loaded.manifest.aps != map.aps {
        return Err(CliError::usage(format!(
            "manifest APs {:?} differ from map APs {:?}",
            loaded.manifest.aps, map.aps
        )));
    }
    let tests = loaded.test_points()?;
    let mut report: EvalReport = evaluate(&map, &tests, &params)?;
    report.provenance = Some(
        Provenance::new("evaluate", None, &params)
            .with_input(&a.map)?
            .with_input(&a.manifest)?,
    );
    log::info!("{}", report.summary());
    let cdf_path = a.cdf.clone().or_else(|| {
        out.map(|p| {
            let mut s = p.as_os_str().to_owned();
            s.push(".cdf.csv");
            PathBuf::from(s)
        })
    });
    if let Some(p) = cdf_path {
        let mut buf = Vec::new();
        report.write_cdf_csv(&mut buf).context("writing CDF")?;
        write_atomic(&p, &buf)?;
    }
    emit_json(out, &report)
}

fn cmd_study(a: &StudyArgs, config: &CliConfig, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let seeds = |n: usize| seed..seed + a.seeds.unwrap_or(n) as u64;
    let mut buf = Vec::new();
    match a.kind {
        StudyKind::EntropyPackets => {
            let rows = study::entropy_packets(
                &study::ENTROPY_PACKET_COUNTS,
                seeds(20),
                a.snr_db,
                &angloc_core::entropy::EntropyConfig {
                    rescale: angloc_core::entropy::RescaleMode::PerStream,
                    ..config.pipeline.entropy
                },
            )?;
            study::write_entropy_csv(&rows, &mut buf)
        }
        StudyKind::AoaPackets => {
            let rows = study::aoa_packets(&study::AOA_PACKET_COUNTS, seeds(100), a.snr_db)?;
            study::write_aoa_csv(&rows, &mut buf)
        }
        StudyKind::SmoothingSweep => {
            let rows = study::smoothing_sweep(
                &study::SWEEP_LENGTHS,
                seeds(20),
                a.snr_db,
                config.pipeline.aoa.smoothing.n_packets,
            )?;
            study::write_sweep_csv(&rows, &mut buf)
        }
    }
    .context("writing CSV")?;
    emit(out, &buf)
}

fn cmd_aoa_spectrum(a: &SpectrumArgs, config: &CliConfig, out: Option<&Path>) -> CliResult<()> {
    let mut trace = load_trace_file(&a.trace)?;
    if a.calibrate {
        trace = calibrate(&trace, &config.pipeline.calibration)
            .context("calibrating")?
            .0;
    }
    let analysis = analyze(&trace, &config.pipeline.aoa).context("AoA analysis")?;
    let mut buf = Vec::new();
    analysis
        .spectrum
        .write_csv(&mut buf)
        .context("writing spectrum")?;
    emit(out, &buf)
}
