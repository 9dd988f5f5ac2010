//! Configuration-driven commands behind the `entsim` binary.
//!
//! Every command reads an optional TOML file whose schema is one of the
//! `*Config` types below (unknown keys are rejected) and produces either a
//! [`Table`] rendered as CSV or JSON, or a JSON document. The command functions
//! are pure; [`run`] adds file handling, flag overrides and the thread pool.
//!
//! Units: cavity couplings and interaction times are dimensionless products
//! `gτ`; geometry lengths are metres, speeds m/s and angles radians; all
//! Monte Carlo rates and times share one arbitrary unit (conventionally `g = 1`).

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::{wigner, BridgeError, WignerGrid};
use crate::cavity::{
    epsilon_estimate, fidelity_asymmetric, fidelity_ideal, passage_along_path, state_after_passage, success_probability,
    AtomPath, CavityError, CavityGeometry,
};
use crate::distill::{run_protocol, ChannelSpec, DistillError, InputSpec, ProtocolConfig};
use crate::fock::{FockDensityMatrix, FockError, MatrixDump};
use crate::io::{OutputFormat, Table};
use crate::jumpmc::{run_trajectories, Estimate, JumpConfig, JumpError, MCStats};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "ENTSIM_THREADS";

const DEFAULT_STATE_CUTOFF: usize = 8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for numerical validity failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<CavityError> for CliError {
    fn from(e: CavityError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<FockError> for CliError {
    fn from(e: FockError) -> Self {
        match e {
            FockError::Dump(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<BridgeError> for CliError {
    fn from(e: BridgeError) -> Self {
        match e {
            BridgeError::Grid(_) | BridgeError::NotSingleMode | BridgeError::NotCenteredTwoMode => CliError::Config(e.to_string()),
            BridgeError::Fock(f) => f.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DistillError> for CliError {
    fn from(e: DistillError) -> Self {
        match e {
            DistillError::Parameter { .. } | DistillError::Spec(_) | DistillError::EmptySchmidt => CliError::Config(e.to_string()),
            DistillError::Fock(f) => f.into(),
            DistillError::Bridge(b) => b.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<JumpError> for CliError {
    fn from(e: JumpError) -> Self {
        match e {
            JumpError::Parameter { .. } | JumpError::StepTooCoarse { .. } | JumpError::AdiabaticSpontaneous => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Flags shared by all commands; `None` leaves the config value in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalOptions {
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub seed: Option<u64>,
    pub cutoff: Option<usize>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CavityIdeal,
    CavityPath,
    Mc,
    Distill,
    Wigner,
    State,
}

/// Parses a TOML config, naming the offending key on schema violations.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
}

fn grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points < 2 || !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(CliError::Config(format!("grid needs max > min and at least 2 points, got [{min}, {max}] × {points}")));
    }
    Ok((0..points).map(|i| min + (max - min) * i as f64 / (points - 1) as f64).collect())
}

// ---------------------------------------------------------------------------
// cavity-ideal
// ---------------------------------------------------------------------------

/// Sweep of the equal interaction product `gτ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityIdealConfig {
    #[serde(default)]
    pub gtau_min: f64,
    #[serde(default = "one")]
    pub gtau_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn one() -> f64 {
    1.0
}

fn default_points() -> usize {
    101
}

impl Default for CavityIdealConfig {
    fn default() -> Self {
        Self { gtau_min: 0.0, gtau_max: 1.0, points: default_points() }
    }
}

/// Columns `gtau, F, P`.
pub fn cmd_cavity_ideal(config: &CavityIdealConfig) -> Result<Table, CliError> {
    let xs = grid(config.gtau_min, config.gtau_max, config.points)?;
    let rows: Vec<Vec<f64>> = xs.par_iter().map(|&g| vec![g, fidelity_ideal(g), success_probability(g)]).collect();
    let mut t = Table::new(["gtau", "F", "P"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

// ---------------------------------------------------------------------------
// cavity-path
// ---------------------------------------------------------------------------

/// Either a direct sweep of the asymmetry `ε = 1 - τ_B/τ_A`, or a family of atomic
/// paths `scale × path` through a two-cavity geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CavityPathConfig {
    Epsilon {
        gtau: f64,
        min: f64,
        max: f64,
        #[serde(default = "default_points")]
        points: usize,
    },
    Path {
        /// Vacuum Rabi frequency (rad/s).
        g: f64,
        geometry: CavityGeometry,
        path: AtomPath,
        #[serde(default)]
        scale_min: f64,
        #[serde(default = "one")]
        scale_max: f64,
        #[serde(default = "default_path_points")]
        points: usize,
    },
}

fn default_path_points() -> usize {
    11
}

/// `epsilon, F, P` for an ε sweep; `scale, epsilon, epsilon_estimate, F, P` for a path sweep.
pub fn cmd_cavity_path(config: &CavityPathConfig) -> Result<Table, CliError> {
    match config {
        CavityPathConfig::Epsilon { gtau, min, max, points } => {
            let xs = grid(*min, *max, *points)?;
            let mut t = Table::new(["epsilon", "F", "P"]);
            let rows: Vec<Vec<f64>> = xs
                .par_iter()
                .map(|&e| vec![e, fidelity_asymmetric(*gtau, e), state_after_passage(*gtau, (1.0 - e) * gtau).p_success])
                .collect();
            rows.into_iter().for_each(|r| t.push(r));
            Ok(t)
        }
        CavityPathConfig::Path { g, geometry, path, scale_min, scale_max, points } => {
            geometry.validate()?;
            let scales = grid(*scale_min, *scale_max, *points)?;
            let rows: Vec<Vec<f64>> = scales
                .par_iter()
                .map(|&s| {
                    let p = AtomPath { y0: path.y0 * s, z0: path.z0 * s, phi: path.phi * s, theta: path.theta * s, v: path.v };
                    let passage = passage_along_path(*g, geometry, &p)?;
                    Ok(vec![s, passage.epsilon, epsilon_estimate(geometry, &p), passage.result.fidelity_on_success, passage.result.p_success])
                })
                .collect::<Result<_, CavityError>>()?;
            let mut t = Table::new(["scale", "epsilon", "epsilon_estimate", "F", "P"]);
            rows.into_iter().for_each(|r| t.push(r));
            Ok(t)
        }
    }
}

// ---------------------------------------------------------------------------
// mc
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McParameter {
    Eta,
    /// Sets both spontaneous-emission rates.
    Gamma,
    GammaA,
    GammaB,
    TWait,
    DarkRate,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSweep {
    pub parameter: McParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub run: JumpConfig,
    #[serde(default)]
    pub sweep: Option<McSweep>,
    /// JSON-lines file receiving one record per trajectory.
    #[serde(default)]
    pub trajectory_log: Option<PathBuf>,
}

impl McConfig {
    fn point(&self, parameter: McParameter, value: f64) -> JumpConfig {
        let mut c = self.run.clone();
        match parameter {
            McParameter::Eta => c.eta = value,
            McParameter::Gamma => {
                c.params.gamma_a = value;
                c.params.gamma_b = value;
            }
            McParameter::GammaA => c.params.gamma_a = value,
            McParameter::GammaB => c.params.gamma_b = value,
            McParameter::TWait => c.t_wait = value,
            McParameter::DarkRate => c.dark_rate = value,
            McParameter::Delta => c.params.delta = value,
        }
        c
    }
}

pub const MC_COLUMNS: [&str; 13] = [
    "value",
    "n_traj",
    "p_success",
    "p_success_stderr",
    "fidelity",
    "fidelity_stderr",
    "fidelity_single_click",
    "fidelity_single_click_stderr",
    "t_click",
    "t_click_stderr",
    "multi_click_fraction",
    "lost_fraction",
    "t_av",
];

/// Statistics table (one row per sweep value) and the trajectory log lines.
#[derive(Debug, Clone, PartialEq)]
pub struct McOutput {
    pub table: Table,
    pub log: Vec<String>,
}

fn stats_row(value: f64, config: &JumpConfig, s: &MCStats) -> Vec<f64> {
    let split = |e: Option<Estimate>| e.map_or((f64::NAN, f64::NAN), |e| (e.value, e.stderr));
    let (f, fe) = split(s.mean_fidelity);
    let (fs, fse) = split(s.mean_fidelity_single_click);
    let (t, te) = split(s.mean_first_click_time);
    vec![
        value,
        s.n_traj as f64,
        s.p_success.value,
        s.p_success.stderr,
        f,
        fe,
        fs,
        fse,
        t,
        te,
        s.multi_click_fraction.value,
        s.lost_fraction.value,
        config.params.mean_first_click_time(),
    ]
}

/// Runs the trajectory ensemble once, or once per sweep value. Without a sweep the
/// `value` column is `NaN`.
pub fn cmd_mc(config: &McConfig) -> Result<McOutput, CliError> {
    let points: Vec<(f64, JumpConfig)> = match &config.sweep {
        None => vec![(f64::NAN, config.run.clone())],
        Some(sweep) => {
            if sweep.values.is_empty() {
                return Err(CliError::Config("sweep.values is empty".into()));
            }
            sweep.values.iter().map(|&v| (v, config.point(sweep.parameter, v))).collect()
        }
    };
    let mut table = Table::new(MC_COLUMNS);
    let mut log = Vec::new();
    for (value, run) in points {
        let (records, stats) = run_trajectories(&run)?;
        table.push(stats_row(value, &run, &stats));
        if config.trajectory_log.is_some() {
            log.extend(records.iter().map(|r| r.to_json_line()));
        }
    }
    Ok(McOutput { table, log })
}

// ---------------------------------------------------------------------------
// distill
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillParameter {
    /// Detector efficiency.
    Eta,
    /// Strength of the configured channel.
    Channel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillSweep {
    pub parameter: DistillParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillConfig {
    pub input: InputSpec,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub sweep: Option<DistillSweep>,
}

pub const DISTILL_COLUMNS: [&str; 8] =
    ["value", "iteration", "E_N", "S_vN", "P", "distance_to_limit", "cutoff", "truncated_weight"];

/// One row per iteration (iteration 0 is the input), repeated per sweep value.
pub fn cmd_distill(config: &DistillConfig) -> Result<Table, CliError> {
    let runs: Vec<(f64, ProtocolConfig)> = match &config.sweep {
        None => vec![(f64::NAN, config.protocol.clone())],
        Some(sweep) => {
            if sweep.values.is_empty() {
                return Err(CliError::Config("sweep.values is empty".into()));
            }
            if sweep.parameter == DistillParameter::Channel && config.protocol.channel == ChannelSpec::None {
                return Err(CliError::Config("a channel sweep needs protocol.channel".into()));
            }
            sweep
                .values
                .iter()
                .map(|&v| {
                    let mut p = config.protocol.clone();
                    match sweep.parameter {
                        DistillParameter::Eta => p.eta = v,
                        DistillParameter::Channel => p.channel = p.channel.with_parameter(v),
                    }
                    (v, p)
                })
                .collect()
        }
    };
    let rho0 = config.input.to_density(config.protocol.cutoff)?;
    let traces: Vec<_> = runs
        .par_iter()
        .map(|(_, p)| run_protocol(&rho0, p))
        .collect::<Result<_, DistillError>>()?;
    let mut table = Table::new(DISTILL_COLUMNS);
    for ((value, _), trace) in runs.iter().zip(traces) {
        for r in trace.records {
            table.push(vec![
                *value,
                r.iteration as f64,
                r.log_negativity,
                r.entropy,
                r.probability,
                r.distance_to_limit.unwrap_or(f64::NAN),
                r.cutoff as f64,
                r.truncated_weight,
            ]);
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// wigner
// ---------------------------------------------------------------------------

/// Wigner function of one mode of a two-mode state, optionally after a number of
/// ideal Gaussification steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerConfig {
    pub state: InputSpec,
    #[serde(default = "default_wigner_cutoff")]
    pub cutoff: usize,
    /// Mode kept after tracing out the other one (0 or 1).
    #[serde(default)]
    pub keep_mode: usize,
    #[serde(default)]
    pub gaussify_iterations: usize,
    #[serde(default)]
    pub grid: WignerGrid,
}

fn default_wigner_cutoff() -> usize {
    DEFAULT_STATE_CUTOFF
}

/// Columns `X, P, W`.
pub fn cmd_wigner(config: &WignerConfig) -> Result<Table, CliError> {
    if config.keep_mode > 1 {
        return Err(CliError::Config(format!("keep_mode must be 0 or 1, got {}", config.keep_mode)));
    }
    let mut rho = config.state.to_density(config.cutoff)?;
    if config.gaussify_iterations > 0 {
        let protocol = ProtocolConfig {
            iterations: config.gaussify_iterations,
            cutoff: config.cutoff,
            ..ProtocolConfig::default()
        };
        rho = run_protocol(&rho, &protocol)?.final_state;
    }
    let reduced = rho.partial_trace(1 - config.keep_mode)?;
    Ok(wigner(&reduced, &config.grid)?.to_table())
}

// ---------------------------------------------------------------------------
// state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateAction {
    /// Table of trace, purity, log-negativity and entropies.
    #[default]
    Measure,
    /// The density matrix as a sparse JSON dump.
    Save,
}

/// A state given inline (`[state]`) or as a dump file (`file`), exactly one of the two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    #[serde(default)]
    pub action: StateAction,
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default)]
    pub state: Option<InputSpec>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

pub const STATE_COLUMNS: [&str; 7] = ["n_modes", "cutoff", "trace", "purity", "E_N", "S_vN", "S_vN_reduced"];

#[derive(Debug, Clone, PartialEq)]
pub enum StateOutput {
    Measures(Table),
    Dump(MatrixDump),
}

/// Reads a sparse JSON dump; schema errors name the offending key.
pub fn load_state(path: &Path) -> Result<FockDensityMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let dump: MatrixDump = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(FockDensityMatrix::from_dump(&dump)?)
}

pub fn measure(rho: &FockDensityMatrix) -> Result<Table, CliError> {
    let (e_n, reduced) = if rho.n_modes() == 2 {
        (rho.log_negativity()?, rho.normalized()?.partial_trace(1)?.vn_entropy()?)
    } else {
        (f64::NAN, f64::NAN)
    };
    let mut t = Table::new(STATE_COLUMNS);
    t.push(vec![
        rho.n_modes() as f64,
        rho.cutoff() as f64,
        rho.trace(),
        rho.normalized()?.purity(),
        e_n,
        rho.vn_entropy()?,
        reduced,
    ]);
    Ok(t)
}

pub fn cmd_state(config: &StateConfig) -> Result<StateOutput, CliError> {
    let rho = match (&config.state, &config.file) {
        (Some(spec), None) => spec.to_density(config.cutoff.unwrap_or(DEFAULT_STATE_CUTOFF))?,
        (None, Some(path)) => {
            let rho = load_state(path)?;
            match config.cutoff {
                Some(c) => rho.with_cutoff(c),
                None => rho,
            }
        }
        _ => return Err(CliError::Config("give exactly one of `state` and `file`".into())),
    };
    match config.action {
        StateAction::Measure => Ok(StateOutput::Measures(measure(&rho)?)),
        StateAction::Save => Ok(StateOutput::Dump(rho.to_dump())),
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

fn read_config<T: DeserializeOwned>(path: Option<&Path>) -> Result<Option<T>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            parse_config(&text).map(Some)
        }
    }
}

fn require<T>(config: Option<T>, command: &str) -> Result<T, CliError> {
    config.ok_or_else(|| CliError::Config(format!("`{command}` needs --config")))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Config(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

/// Renders the output of `command` for the given config file and flags.
pub fn execute(command: Command, config_path: Option<&Path>, opts: &GlobalOptions) -> Result<String, CliError> {
    let fmt = opts.format;
    match command {
        Command::CavityIdeal => {
            let config = read_config(config_path)?.unwrap_or_default();
            Ok(cmd_cavity_ideal(&config)?.render(fmt))
        }
        Command::CavityPath => {
            let config: CavityPathConfig = require(read_config(config_path)?, "cavity-path")?;
            Ok(cmd_cavity_path(&config)?.render(fmt))
        }
        Command::Mc => {
            let mut config: McConfig = require(read_config(config_path)?, "mc")?;
            if let Some(seed) = opts.seed {
                config.run.seed = seed;
            }
            if let Some(cutoff) = opts.cutoff {
                config.run.cutoff = cutoff;
            }
            let out = cmd_mc(&config)?;
            if let Some(log_path) = &config.trajectory_log {
                let mut text = out.log.join("\n");
                text.push('\n');
                write_output(Some(log_path), &text)?;
            }
            Ok(out.table.render(fmt))
        }
        Command::Distill => {
            let mut config: DistillConfig = require(read_config(config_path)?, "distill")?;
            if let Some(cutoff) = opts.cutoff {
                config.protocol.cutoff = cutoff;
                config.protocol.max_cutoff = config.protocol.max_cutoff.max(cutoff);
            }
            Ok(cmd_distill(&config)?.render(fmt))
        }
        Command::Wigner => {
            let mut config: WignerConfig = require(read_config(config_path)?, "wigner")?;
            if let Some(cutoff) = opts.cutoff {
                config.cutoff = cutoff;
            }
            Ok(cmd_wigner(&config)?.render(fmt))
        }
        Command::State => {
            let mut config: StateConfig = require(read_config(config_path)?, "state")?;
            if opts.cutoff.is_some() {
                config.cutoff = opts.cutoff;
            }
            Ok(match cmd_state(&config)? {
                StateOutput::Measures(t) => t.render(fmt),
                StateOutput::Dump(d) => d.to_json() + "\n",
            })
        }
    }
}

/// Runs `command` on a pool of `opts.threads` workers and writes to `opts.out` or stdout.
pub fn run(command: Command, config_path: Option<&Path>, opts: &GlobalOptions) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    let text = pool.install(|| execute(command, config_path, opts))?;
    write_output(opts.out.as_deref(), &text)
}
