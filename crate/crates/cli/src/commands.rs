use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use fundlim::bounds::{
    error_bound_generic, error_bound_lti, error_bound_p2, error_bound_pinf, error_bound_spectral,
    output_bound,
};
use fundlim::disturbance::{
    entropy_summary, negentropy_rate, power_spectrum, szego_entropy_rate, DEFAULT_GRID,
};
use fundlim::norm::parse_order_list;
use fundlim::plant::analyze;
use fundlim::simulation::{run_closed_loop, verify_bound};
use fundlim::{
    BoundReport, Certification, DisturbanceModel, EntropySummary, Error, NormOrder,
    PlantCharacteristics, Signal, SimulationConfig, SimulationResult, SpectralDensity,
    StateSpaceModel, Theorem,
};
use serde::Serialize;

use crate::controller::parse_controller;
use crate::manifest::RunManifest;
use crate::{Cli, Command};

const DEFAULT_HORIZON: usize = 200;
const DEFAULT_TRAJECTORIES: usize = 10_000;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Unstable(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Input(_) => 2,
            CliError::Unstable(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Unstable(m) => write!(f, "unstable loop: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnstableLoop(_) => CliError::Unstable(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CertificationFailed,
    Unstable,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::CertificationFailed => 3,
            Outcome::Unstable => 4,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Analyze { plant } => cmd_analyze(cli, plant),
        Command::Bound {
            plant,
            dist,
            theorem,
        } => cmd_bound(cli, plant.as_deref(), dist, theorem.as_deref()),
        Command::Verify {
            plant,
            dist,
            controller,
            config,
        } => cmd_verify(cli, plant, dist, controller, config.as_deref()),
        Command::Szego {
            dist,
            spectrum,
            negentropy,
        } => cmd_szego(cli, dist.as_deref(), spectrum.as_deref(), *negentropy),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_plant(path: &Path) -> CliResult<StateSpaceModel> {
    StateSpaceModel::from_json(&read(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_disturbance(path: &Path) -> CliResult<DisturbanceModel> {
    DisturbanceModel::from_json(&read(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn orders(cli: &Cli) -> CliResult<Option<Vec<NormOrder>>> {
    cli.p
        .as_deref()
        .map(|s| parse_order_list(s).map_err(CliError::from))
        .transpose()
}

fn grid(cli: &Cli) -> usize {
    cli.grid.unwrap_or(DEFAULT_GRID)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Print the report on stdout and, with `--out`, write it to `<dir>/<name>.json`.
fn emit<T: Serialize>(
    cli: &Cli,
    name: &str,
    report: &T,
    extra: &[(&str, String)],
) -> CliResult<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        write_file(&dir.join(format!("{name}.json")), &(text + "\n"))?;
        for (file, body) in extra {
            write_file(&dir.join(file), body)?;
        }
    }
    Ok(())
}

fn write_file(path: &PathBuf, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct AnalyzeReport {
    manifest: RunManifest,
    characteristics: PlantCharacteristics,
}

fn cmd_analyze(cli: &Cli, plant_path: &Path) -> CliResult<Outcome> {
    let plant = load_plant(plant_path)?;
    let characteristics = analyze(&plant)?;
    for w in &characteristics.warnings {
        eprintln!("warning: {w}");
    }
    let manifest = RunManifest::new("analyze").input("plant", &path_str(plant_path));
    emit(
        cli,
        "analyze",
        &AnalyzeReport {
            manifest,
            characteristics,
        },
        &[],
    )?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct BoundOutput {
    manifest: RunManifest,
    #[serde(skip_serializing_if = "Option::is_none")]
    plant: Option<PlantCharacteristics>,
    entropy: EntropySummary,
    reports: Vec<BoundReport>,
}

fn cmd_bound(
    cli: &Cli,
    plant_path: Option<&Path>,
    dist_path: &Path,
    theorem: Option<&str>,
) -> CliResult<Outcome> {
    let dist = load_disturbance(dist_path)?;
    let chars = plant_path
        .map(load_plant)
        .transpose()?
        .map(|m| analyze(&m))
        .transpose()?;
    let theorem = match theorem {
        Some(t) => t.parse::<Theorem>().map_err(CliError::Input)?,
        None if chars.is_some() => Theorem::T1,
        None => Theorem::T3,
    };
    let p_list = match (orders(cli)?, theorem) {
        (Some(list), _) => list,
        (None, Theorem::C3) => vec![NormOrder::Infinity],
        (None, _) => vec![NormOrder::Finite(2.0)],
    };
    let ent = entropy_summary(&dist)?;
    let needs_plant = || {
        chars
            .as_ref()
            .ok_or_else(|| CliError::Input(format!("{theorem:?} needs a plant (--plant FILE)")))
    };
    let mut reports = Vec::with_capacity(p_list.len());
    for &p in &p_list {
        let report = match theorem {
            Theorem::T1 => error_bound_lti(p, needs_plant()?, &ent)?,
            Theorem::T2 => output_bound(p, needs_plant()?, &ent)?,
            Theorem::T3 => error_bound_generic(p, &ent)?,
            Theorem::C2 if p == NormOrder::Finite(2.0) => error_bound_p2(needs_plant()?, &ent)?,
            Theorem::C3 if p.is_infinite() => error_bound_pinf(needs_plant()?, &ent)?,
            Theorem::C2 | Theorem::C3 => {
                return Err(CliError::Input(format!(
                    "{theorem:?} is defined for a single norm order, got p={p}"
                )))
            }
            Theorem::C4 | Theorem::KS => {
                let spectrum = power_spectrum(&dist, grid(cli))?;
                let r =
                    error_bound_spectral(p, needs_plant()?, &spectrum, negentropy_rate(&dist)?)?;
                if theorem == Theorem::KS && r.theorem != Theorem::KS {
                    return Err(CliError::Input(
                        "KS needs p=2, a plant with no unstable poles and a Gaussian disturbance"
                            .into(),
                    ));
                }
                r
            }
        };
        reports.push(report);
    }
    let mut manifest = RunManifest::new("bound")
        .input("disturbance", &path_str(dist_path))
        .param("theorem", theorem)
        .param("p_list", &p_list);
    if let Some(p) = plant_path {
        manifest = manifest.input("plant", &path_str(p));
    }
    if matches!(theorem, Theorem::C4 | Theorem::KS) {
        manifest = manifest.param("grid", grid(cli));
    }
    emit(
        cli,
        "bound",
        &BoundOutput {
            manifest,
            plant: chars,
            entropy: ent,
            reports,
        },
        &[],
    )?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct SimulationSummary {
    horizon: usize,
    trajectories: usize,
    burn_in: usize,
    tail_window: usize,
    seed: u64,
    p_list: Vec<NormOrder>,
    tail_error: Vec<f64>,
    tail_output: Vec<f64>,
    max_state_mean_square: f64,
    stable: bool,
    diverged_trajectories: usize,
}

impl From<&SimulationResult> for SimulationSummary {
    fn from(r: &SimulationResult) -> Self {
        Self {
            horizon: r.horizon,
            trajectories: r.trajectories,
            burn_in: r.burn_in,
            tail_window: r.tail_window,
            seed: r.seed,
            p_list: r.p_list.clone(),
            tail_error: r.tail_error.clone(),
            tail_output: r.tail_output.clone(),
            max_state_mean_square: r.state_mean_square.iter().copied().fold(0.0, f64::max),
            stable: r.stable,
            diverged_trajectories: r.diverged_trajectories,
        }
    }
}

#[derive(Serialize)]
struct CheckedBound {
    report: BoundReport,
    certification: Certification,
}

#[derive(Serialize)]
struct VerifyReport {
    manifest: RunManifest,
    plant: PlantCharacteristics,
    entropy: EntropySummary,
    simulation: SimulationSummary,
    checks: Vec<CheckedBound>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    skipped: Vec<String>,
    all_satisfied: bool,
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("FUNDLIM_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Input(format!(
                "FUNDLIM_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_verify(
    cli: &Cli,
    plant_path: &Path,
    dist_path: &Path,
    controller_spec: &str,
    config_path: Option<&Path>,
) -> CliResult<Outcome> {
    let plant = load_plant(plant_path)?;
    let dist = load_disturbance(dist_path)?;
    let controller = parse_controller(controller_spec).map_err(CliError::Input)?;
    let mut config = match config_path {
        Some(path) => serde_json::from_str::<SimulationConfig>(&read(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => SimulationConfig::new(
            DEFAULT_HORIZON,
            DEFAULT_TRAJECTORIES,
            0,
            vec![NormOrder::Finite(2.0)],
        ),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(list) = orders(cli)? {
        config.p_list = list;
    }
    // pin the defaults so the manifest fully determines the run
    config.tail_window = Some(config.resolved_tail_window());
    config.burn_in = Some(config.resolved_burn_in());
    config.validate()?;

    let chars = analyze(&plant)?;
    let ent = entropy_summary(&dist)?;
    for w in &chars.warnings {
        eprintln!("warning: {w}");
    }

    let result = thread_pool()?.install(|| run_closed_loop(&plant, &controller, &dist, &config))?;

    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    if result.stable {
        for &p in &config.p_list {
            let report = error_bound_lti(p, &chars, &ent)?;
            let certification = verify_bound(&result, &report, Signal::Error)?;
            checks.push(CheckedBound {
                report,
                certification,
            });
            match output_bound(p, &chars, &ent) {
                Ok(report) => {
                    let certification = verify_bound(&result, &report, Signal::Output)?;
                    checks.push(CheckedBound {
                        report,
                        certification,
                    });
                }
                Err(Error::ZeroTransferFunction(_)) => skipped.push(format!(
                    "output bound at p={p}: plant transfer function is zero"
                )),
                Err(e) => return Err(e.into()),
            }
        }
    }
    let all_satisfied = result.stable && checks.iter().all(|c| c.certification.satisfied);

    let manifest = RunManifest::new("verify")
        .input("plant", &path_str(plant_path))
        .input("disturbance", &path_str(dist_path))
        .param("controller", controller_spec)
        .param("simulation", &config);
    let manifest = match config_path {
        Some(p) => manifest.input("config", &path_str(p)),
        None => manifest,
    };
    let report = VerifyReport {
        manifest,
        plant: chars,
        entropy: ent,
        simulation: SimulationSummary::from(&result),
        checks,
        skipped,
        all_satisfied,
    };
    emit(
        cli,
        "verify",
        &report,
        &[("verify_norms.csv", result.to_csv())],
    )?;

    Ok(if !result.stable {
        eprintln!(
            "fundlim: unstable loop: state mean square exceeded {} or {} trajectories diverged",
            config.divergence_threshold, result.diverged_trajectories
        );
        Outcome::Unstable
    } else if all_satisfied {
        Outcome::Success
    } else {
        eprintln!("fundlim: certification failed for at least one bound");
        Outcome::CertificationFailed
    })
}

#[derive(Serialize)]
struct SzegoReport {
    manifest: RunManifest,
    grid_points: usize,
    /// `(1/2π) ∫ log₂ S(ω) dω`.
    log_integral_bits: f64,
    negentropy_bits: f64,
    entropy_rate_bits: f64,
    mean_power: f64,
}

fn cmd_szego(
    cli: &Cli,
    dist_path: Option<&Path>,
    spectrum_path: Option<&Path>,
    negentropy: f64,
) -> CliResult<Outcome> {
    let (spectrum, negentropy, manifest) = match (dist_path, spectrum_path) {
        (Some(path), None) => {
            let dist = load_disturbance(path)?;
            let n = grid(cli);
            let manifest = RunManifest::new("szego")
                .input("disturbance", &path_str(path))
                .param("grid", n);
            (power_spectrum(&dist, n)?, negentropy_rate(&dist)?, manifest)
        }
        (None, Some(path)) => {
            let spectrum = SpectralDensity::from_csv(&read(path)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let manifest = RunManifest::new("szego")
                .input("spectrum", &path_str(path))
                .param("negentropy", negentropy);
            (spectrum, negentropy, manifest)
        }
        _ => {
            return Err(CliError::Input(
                "exactly one of --dist or --spectrum is required".into(),
            ))
        }
    };
    let log_integral_bits = spectrum.log_integral()?;
    let entropy_rate_bits = szego_entropy_rate(&spectrum, negentropy)?;
    let report = SzegoReport {
        manifest,
        grid_points: spectrum.len(),
        log_integral_bits,
        negentropy_bits: negentropy,
        entropy_rate_bits,
        mean_power: spectrum.mean_power(),
    };
    emit(cli, "szego", &report, &[])?;
    Ok(Outcome::Success)
}
