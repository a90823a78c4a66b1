//! Config-driven batch runs behind the `osseq` command line tool.
//!
//! Each command writes a comment-free CSV table plus a JSON document that
//! embeds the resolved config and the tool version. Numbers are written with
//! 12 significant digits. Nothing time- or host-dependent is recorded, so a
//! rerun with the same inputs produces byte-identical files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::calibration::{
    binned_log_rank_fit, generate_synthetic_repo_counts, implied_gamma, ingest_values_csv, write_values_csv,
};
use crate::error::{CalibrationError, ModelError};
use crate::mc::{
    choice_probabilities, simulate_market, simulate_package_choice, simulate_usage_nest, MarketSimSettings, RngSpec,
};
use crate::model::{
    min_monetization, solve_scenario, sustainability_checks, utility_multiplier, vibe_share, zeta_for_share,
    Equilibrium,
};
use crate::params::{ModelParams, PARAM_NAMES};
use crate::solvers::{first_best, SolverSettings};
use crate::{BusinessModel, Scenario};

pub const TOOL: &str = "osseq";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SOLVE_COLUMNS: [&str; 15] = [
    "v",
    "u",
    "u_user",
    "pi",
    "m",
    "q0",
    "q_bar",
    "m_s",
    "phi",
    "utility",
    "interior",
    "m_ratio",
    "ms_ratio",
    "qbar_ratio",
    "utility_ratio",
];

pub const SWEEP_BOUND_COLUMNS: [&str; 3] = ["omega_bound", "pi_floor_ratio", "max_decline"];

pub const SWEEP_BUSINESS_COLUMNS: [&str; 6] = [
    "pi_ratio",
    "constraint_lhs",
    "constraint_rhs",
    "sustainable",
    "rho_max",
    "alpha_min",
];

pub const SIMULATION_COLUMNS: [&str; 21] = [
    "v",
    "m",
    "m_hat",
    "m_dev",
    "q0",
    "q0_hat",
    "ms_share",
    "ms_share_hat",
    "m_s",
    "m_s_hat",
    "residual",
    "iterations",
    "m_ratio",
    "m_ratio_hat",
    "ms_ratio",
    "ms_ratio_hat",
    "top_decile_share",
    "top_decile_share_hat",
    "v_nest_hat",
    "u_mult",
    "u_mult_hat",
];

/// Quality vector used for the choice-probability check in `simulate`.
const CHOICE_CHECK_QUALITIES: [f64; 3] = [1.0, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad config, arguments or input file.
    Input,
    /// The model has no admissible solution for these inputs.
    Domain,
    /// An iterative method failed to converge.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct RunError {
    pub kind: ErrorKind,
    pub message: String,
}

impl RunError {
    pub fn input(message: impl Into<String>) -> Self {
        RunError {
            kind: ErrorKind::Input,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Domain => 3,
            ErrorKind::Numerical => 4,
        }
    }

    fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl From<ModelError> for RunError {
    fn from(e: ModelError) -> Self {
        let kind = match e {
            ModelError::InvalidParameter { .. } => ErrorKind::Input,
            ModelError::NonInterior { .. } | ModelError::Degenerate(_) => ErrorKind::Domain,
            ModelError::NoConvergence { .. } | ModelError::BracketFailure { .. } => ErrorKind::Numerical,
        };
        RunError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<CalibrationError> for RunError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Model(m) => m.into(),
            other => RunError::input(other.to_string()),
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Baseline,
    ShortRun,
    LongRun,
    CustomBusinessModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// `v`, `zeta`, or a parameter name.
    pub name: String,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_users: usize,
    /// Simulated developers per unit mass of entry.
    pub n_dev_scale: f64,
    pub seed: u64,
}

/// JSON run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub params: ModelParams,
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub business_model: Option<BusinessModel>,
    #[serde(default)]
    pub v_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    /// Where outputs go unless `--out` is given. Not echoed into outputs.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Treat any non-interior counterfactual row as an error, not just the baseline.
    #[serde(default)]
    pub require_interior: bool,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> RunResult<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| RunError::input(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(path.display()))
    }

    pub fn validate(&self) -> RunResult<()> {
        check_v_grid(&self.v_grid, "v_grid")?;
        if self.scenario == ScenarioKind::CustomBusinessModel && self.business_model.is_none() {
            return Err(RunError::input(
                "scenario custom_business_model requires a business_model block",
            ));
        }
        if let Some(axis) = &self.sweep_axis {
            validate_axis(axis)?;
        }
        if let Some(mc) = &self.mc {
            if mc.n_users == 0 {
                return Err(RunError::input("mc.n_users must be positive"));
            }
            if !(mc.n_dev_scale >= 1.0) || !mc.n_dev_scale.is_finite() {
                return Err(RunError::input("mc.n_dev_scale must be finite and at least 1"));
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        match self.scenario {
            ScenarioKind::Baseline => Scenario::Baseline,
            ScenarioKind::ShortRun => Scenario::ShortRun,
            ScenarioKind::LongRun => Scenario::LongRun,
            ScenarioKind::CustomBusinessModel => Scenario::Custom(
                self.business_model
                    .expect("validated: custom scenario has a business model"),
            ),
        }
    }

    /// `--out` wins over the config's `output_dir`, which wins over the current directory.
    pub fn resolve_output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        cli_out
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

pub fn sweep_axes() -> Vec<&'static str> {
    let mut axes = vec!["v", "zeta"];
    axes.extend(PARAM_NAMES.iter().filter(|n| **n != "zeta"));
    axes
}

fn validate_axis(axis: &SweepAxis) -> RunResult<()> {
    if !sweep_axes().contains(&axis.name.as_str()) {
        return Err(RunError::input(format!(
            "unknown sweep axis `{}`; valid axes: {}",
            axis.name,
            sweep_axes().join(", ")
        )));
    }
    if axis.grid.is_empty() {
        return Err(RunError::input(format!("sweep grid for `{}` is empty", axis.name)));
    }
    if let Some(x) = axis.grid.iter().find(|x| !x.is_finite()) {
        return Err(RunError::input(format!("sweep grid for `{}` contains {x}", axis.name)));
    }
    match axis.name.as_str() {
        "v" => check_v_grid(&axis.grid, "sweep_axis.grid"),
        "zeta" => {
            check_sorted_unique(&axis.grid, "sweep_axis.grid")?;
            match axis.grid.iter().find(|z| **z < 0.0) {
                Some(z) => Err(RunError::input(format!("zeta grid value {z} is negative"))),
                None => Ok(()),
            }
        }
        _ => Ok(()),
    }
}

fn check_sorted_unique(grid: &[f64], what: &str) -> RunResult<()> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(RunError::input(format!(
            "{what} must be sorted ascending without duplicates"
        )));
    }
    Ok(())
}

fn check_v_grid(grid: &[f64], what: &str) -> RunResult<()> {
    if let Some(v) = grid.iter().find(|v| !(**v >= 0.0 && **v < 1.0)) {
        return Err(RunError::input(format!("{what} value {v} outside [0, 1)")));
    }
    check_sorted_unique(grid, what)
}

/// Prepends the `v = 0` denominator row when the grid lacks it.
fn with_zero(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len() + 1);
    if grid.first() != Some(&0.0) {
        out.push(0.0);
    }
    out.extend_from_slice(grid);
    out
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() && x != 0.0 {
        format!("{x:.11e}").parse().unwrap_or(x)
    } else {
        x
    }
}

/// CSV rendering of a number: 12 significant digits, plain decimal notation
/// for moderate magnitudes and exponent notation otherwise.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round12(x);
    let a = r.abs();
    if r == 0.0 {
        "0".into()
    } else if (1e-6..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(i) => json!(i),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(round12(x)).map_or(Value::Null, Value::Number)
}

/// Rounds every float in a JSON tree to 12 significant digits.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => num(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn to_json<T: Serialize>(x: &T) -> Value {
    round_json(serde_json::to_value(x).expect("plain data serializes"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn to_json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    Value::Object(
                        self.columns
                            .iter()
                            .zip(row)
                            .map(|(c, cell)| (c.to_string(), cell.json()))
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

/// Files written by a command plus notes worth showing to the user.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

fn header(command: &str, cfg: Option<&ScenarioConfig>) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("tool".into(), json!(TOOL));
    m.insert("version".into(), json!(VERSION));
    m.insert("command".into(), json!(command));
    if let Some(cfg) = cfg {
        m.insert("config".into(), to_json(cfg));
    }
    m
}

fn write_file(dir: &Path, name: &str, contents: &str, out: &mut RunOutput) -> RunResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| RunError::input(format!("cannot create output directory {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| RunError::input(format!("cannot write {}: {e}", path.display())))?;
    out.files.push(path);
    Ok(())
}

fn write_json(dir: &Path, name: &str, doc: serde_json::Map<String, Value>, out: &mut RunOutput) -> RunResult<()> {
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json values serialize");
    text.push('\n');
    write_file(dir, name, &text, out)
}

fn equilibrium_cells(eq: &Equilibrium, base: &Equilibrium) -> Vec<Cell> {
    let r = eq.ratios_to(base);
    vec![
        Cell::Num(eq.v),
        Cell::Num(eq.u),
        Cell::Num(eq.u_user),
        Cell::Num(eq.pi),
        Cell::Num(eq.m),
        Cell::Num(eq.q0),
        Cell::Num(eq.q_bar),
        Cell::Num(eq.m_s),
        Cell::Num(eq.phi),
        Cell::Num(eq.utility),
        Cell::Bool(eq.interior),
        Cell::Num(r.m_ratio),
        Cell::Num(r.ms_ratio),
        Cell::Num(r.qbar_ratio),
        Cell::Num(r.utility_ratio),
    ]
}

/// Solves the baseline and every counterfactual on `grid` (which must start
/// at `v = 0`). The baseline must be interior; counterfactual rows are
/// reported with their `interior` flag unless `require_interior` is set.
fn solve_grid(
    params: &ModelParams,
    scenario: &Scenario,
    grid: &[f64],
    require_interior: bool,
    notes: &mut Vec<String>,
) -> RunResult<Vec<Equilibrium>> {
    let base = solve_scenario(params, &Scenario::Baseline, 0.0)?;
    base.require_interior(params)
        .map_err(|e| RunError::from(e).context("baseline (v = 0)"))?;
    let mut eqs = Vec::with_capacity(grid.len());
    for &v in grid {
        let eq = if v == 0.0 {
            base
        } else {
            solve_scenario(params, scenario, v)?
        };
        if !eq.interior {
            if require_interior {
                return Err(RunError::from(eq.require_interior(params).unwrap_err()).context(format!("v = {v}")));
            }
            notes.push(format!(
                "v = {v}: sharing cutoff q0 = {} < 1 (non-interior); closed forms reported as a formal extension",
                fmt_num(eq.q0)
            ));
        }
        eqs.push(eq);
    }
    Ok(eqs)
}

/// Writes `equilibrium.csv` and `equilibrium.json`.
pub fn cmd_solve(cfg: &ScenarioConfig, out_dir: &Path) -> RunResult<RunOutput> {
    if cfg.v_grid.is_empty() {
        return Err(RunError::input("v_grid is empty"));
    }
    let mut out = RunOutput::default();
    let params = &cfg.params;
    let grid = with_zero(&cfg.v_grid);
    let eqs = solve_grid(params, &cfg.scenario(), &grid, cfg.require_interior, &mut out.notes)?;
    let table = Table {
        columns: SOLVE_COLUMNS.to_vec(),
        rows: eqs.iter().map(|eq| equilibrium_cells(eq, &eqs[0])).collect(),
    };

    let mut doc = header("solve", Some(cfg));
    doc.insert("derived".into(), to_json(&params.derived()));
    doc.insert("columns".into(), json!(table.columns));
    doc.insert("rows".into(), table.to_json_rows());
    match first_best(params, &SolverSettings::default()) {
        Ok(fb) => {
            let mut block = to_json(&fb);
            block["contradicts_underprovision_claim"] = json!(fb.contradicts_underprovision_claim());
            doc.insert("first_best".into(), block);
        }
        Err(e) => {
            doc.insert("first_best".into(), Value::Null);
            doc.insert("first_best_error".into(), json!(e.to_string()));
        }
    }

    write_file(out_dir, "equilibrium.csv", &table.to_csv(), &mut out)?;
    write_json(out_dir, "equilibrium.json", doc, &mut out)?;
    Ok(out)
}

struct SweepPoint {
    axis_value: f64,
    params: ModelParams,
    grid: Vec<f64>,
}

fn sweep_points(cfg: &ScenarioConfig, axis: &SweepAxis) -> RunResult<Vec<SweepPoint>> {
    let p = cfg.params;
    match axis.name.as_str() {
        "v" => Ok(vec![SweepPoint {
            axis_value: f64::NAN,
            params: p,
            grid: with_zero(&axis.grid),
        }]),
        "zeta" => {
            let mut zetas = axis.grid.clone();
            if zetas.first() != Some(&0.0) {
                zetas.insert(0, 0.0);
            }
            let grid = zetas
                .iter()
                .map(|&z| vibe_share(z, p.theta()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(vec![SweepPoint {
                axis_value: f64::NAN,
                params: p,
                grid,
            }])
        }
        name => {
            if cfg.v_grid.is_empty() {
                return Err(RunError::input(format!("sweeping `{name}` needs a non-empty v_grid")));
            }
            axis.grid
                .iter()
                .map(|&x| {
                    let params = p
                        .with(name, x)
                        .map_err(|e| RunError::from(e).context(format!("{name} = {x}")))?;
                    Ok(SweepPoint {
                        axis_value: x,
                        params,
                        grid: with_zero(&cfg.v_grid),
                    })
                })
                .collect()
        }
    }
}

fn sweep_rows(
    point: &SweepPoint,
    axis: &str,
    scenario: &Scenario,
    business: Option<&BusinessModel>,
    require_interior: bool,
) -> RunResult<(Vec<Vec<Cell>>, Vec<String>)> {
    let mut notes = Vec::new();
    let eqs = solve_grid(&point.params, scenario, &point.grid, require_interior, &mut notes).map_err(|e| {
        if point.axis_value.is_nan() {
            e
        } else {
            e.context(format!("{axis} = {}", point.axis_value))
        }
    })?;
    let mut rows = Vec::with_capacity(eqs.len());
    for eq in &eqs {
        let axis_value = match axis {
            "v" => eq.v,
            "zeta" => {
                if eq.v == 0.0 {
                    0.0
                } else {
                    zeta_for_share(eq.v, point.params.theta())?
                }
            }
            _ => point.axis_value,
        };
        let mut row = vec![Cell::Num(axis_value)];
        row.extend(equilibrium_cells(eq, &eqs[0]));
        let bound = min_monetization(&point.params, eq.v)?;
        row.extend([
            Cell::Num(bound.omega_bound),
            Cell::Num(bound.pi_floor_ratio),
            Cell::Num(bound.max_decline()),
        ]);
        if let Some(bm) = business {
            let s = sustainability_checks(&point.params, bm, eq.v)?;
            row.extend([
                Cell::Num(bm.pi_ratio(eq.v)?),
                Cell::Num(s.constraint_lhs),
                Cell::Num(s.constraint_rhs),
                Cell::Bool(s.sustainable),
                Cell::Num(s.rho_max),
                Cell::Num(s.alpha_min),
            ]);
        }
        rows.push(row);
    }
    let notes = if point.axis_value.is_nan() {
        notes
    } else {
        notes
            .into_iter()
            .map(|n| format!("{axis} = {}: {n}", point.axis_value))
            .collect()
    };
    Ok((rows, notes))
}

/// Column layout of `sweep.csv` for a config.
pub fn sweep_columns(with_business_model: bool) -> Vec<&'static str> {
    let mut cols = vec!["axis_value"];
    cols.extend(SOLVE_COLUMNS);
    cols.extend(SWEEP_BOUND_COLUMNS);
    if with_business_model {
        cols.extend(SWEEP_BUSINESS_COLUMNS);
    }
    cols
}

/// Writes `sweep.csv` and `sweep.meta.json`. For a parameter axis each grid
/// value is crossed with `v_grid`; for `v` and `zeta` the axis itself is the
/// counterfactual grid. Monetization-floor columns are always present and
/// sustainability columns are added when the config has a business model.
pub fn cmd_sweep(cfg: &ScenarioConfig, out_dir: &Path) -> RunResult<RunOutput> {
    let axis = cfg.sweep_axis.as_ref().ok_or_else(|| {
        RunError::input(format!(
            "sweep needs a sweep_axis; valid axes: {}",
            sweep_axes().join(", ")
        ))
    })?;
    validate_axis(axis)?;
    let points = sweep_points(cfg, axis)?;
    let scenario = cfg.scenario();
    let business = cfg.business_model.as_ref();
    let run = |pt: &SweepPoint| sweep_rows(pt, &axis.name, &scenario, business, cfg.require_interior);

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        points.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = points.iter().map(run).collect();

    let mut out = RunOutput::default();
    let mut table = Table {
        columns: sweep_columns(business.is_some()),
        rows: Vec::new(),
    };
    for r in results {
        let (rows, notes) = r?;
        table.rows.extend(rows);
        out.notes.extend(notes);
    }

    let mut doc = header("sweep", Some(cfg));
    doc.insert("axis".into(), json!(axis.name));
    doc.insert("columns".into(), json!(table.columns));
    write_file(out_dir, "sweep.csv", &table.to_csv(), &mut out)?;
    write_json(out_dir, "sweep.meta.json", doc, &mut out)?;
    Ok(out)
}

/// Writes `simulation.csv` and `simulation.meta.json`: the agent-level market
/// against the closed form at every `v`, the usage-mode nest against its
/// share and option value, and a package-choice check in the metadata.
pub fn cmd_simulate(cfg: &ScenarioConfig, out_dir: &Path) -> RunResult<RunOutput> {
    let mc = cfg
        .mc
        .ok_or_else(|| RunError::input("simulate needs an mc block {n_users, n_dev_scale, seed}"))?;
    if cfg.v_grid.is_empty() {
        return Err(RunError::input("v_grid is empty"));
    }
    let params = &cfg.params;
    let scenario = cfg.scenario();
    let grid = with_zero(&cfg.v_grid);
    let settings = MarketSimSettings::default();
    let market_spec = RngSpec::new(mc.seed, 0);

    // The agent-level market only exists where the sharing cutoff is interior.
    let mut closed_forms = Vec::with_capacity(grid.len());
    for &v in &grid {
        let scen = if v == 0.0 { Scenario::Baseline } else { scenario };
        let closed = solve_scenario(params, &scen, v)?
            .require_interior(params)
            .map_err(|e| RunError::from(e).context(format!("market at v = {v}")))?;
        closed_forms.push((scen, closed));
    }
    let mut sims = Vec::with_capacity(grid.len());
    for (scen, closed) in closed_forms {
        let v = closed.v;
        let sim = simulate_market(params, &scen, v, mc.n_users, mc.n_dev_scale, &settings, &market_spec)
            .map_err(|e| RunError::from(e).context(format!("market at v = {v}")))?;
        sims.push((closed, sim));
    }

    let (base, base_sim) = sims[0];
    let mut table = Table {
        columns: SIMULATION_COLUMNS.to_vec(),
        rows: Vec::new(),
    };
    for (i, (closed, sim)) in sims.iter().enumerate() {
        let ratios = closed.ratios_to(&base);
        let mut row = vec![
            Cell::Num(closed.v),
            Cell::Num(closed.m),
            Cell::Num(sim.m_hat),
            Cell::Num(sim.m_hat / closed.m - 1.0),
            Cell::Num(closed.q0),
            Cell::Num(sim.q0_hat),
            Cell::Num(closed.m_s / closed.m),
            Cell::Num(sim.ms_share_hat),
            Cell::Num(closed.m_s),
            Cell::Num(sim.m_s_hat),
            Cell::Num(sim.residual),
            Cell::Int(sim.iterations as u64),
            Cell::Num(ratios.m_ratio),
            Cell::Num(sim.m_hat / base_sim.m_hat),
            Cell::Num(ratios.ms_ratio),
            Cell::Num(sim.m_s_hat / base_sim.m_s_hat),
            Cell::Num(sim.top_decile_user_share_closed),
            Cell::Num(sim.top_decile_user_share_hat),
        ];
        if closed.v > 0.0 {
            let zeta = zeta_for_share(closed.v, params.theta())?;
            let nest = simulate_usage_nest(zeta, params.theta(), mc.n_users, &RngSpec::new(mc.seed, 2 + i as u64))?;
            row.extend([
                Cell::Num(nest.v_hat),
                Cell::Num(utility_multiplier(closed.v, params.theta())?),
                Cell::Num(nest.mean_hat),
            ]);
        } else {
            row.extend([Cell::Empty, Cell::Empty, Cell::Empty]);
        }
        table.rows.push(row);
    }

    let probs = choice_probabilities(&CHOICE_CHECK_QUALITIES, params.sigma());
    let choice = simulate_package_choice(
        &CHOICE_CHECK_QUALITIES,
        params.sigma(),
        params.u_base(),
        mc.n_users,
        &RngSpec::new(mc.seed, 1 << 20),
    )?;

    let mut out = RunOutput::default();
    let mut doc = header("simulate", Some(cfg));
    doc.insert("columns".into(), json!(table.columns));
    doc.insert("market_settings".into(), to_json(&settings));
    doc.insert(
        "choice_check".into(),
        json!({
            "qualities": CHOICE_CHECK_QUALITIES,
            "closed_form": probs.iter().map(|p| num(*p)).collect::<Vec<_>>(),
            "simulated": choice.frequencies.iter().map(|p| num(*p)).collect::<Vec<_>>(),
            "standard_errors": choice.standard_errors.iter().map(|p| num(*p)).collect::<Vec<_>>(),
            "n_draws": choice.n_draws,
        }),
    );
    write_file(out_dir, "simulation.csv", &table.to_csv(), &mut out)?;
    write_json(out_dir, "simulation.meta.json", doc, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrateOptions {
    pub input: PathBuf,
    pub column: String,
    pub bins: usize,
    pub tail_cut: f64,
    pub sigma: Option<f64>,
}

/// Writes `tailfit.json`: the binned log-rank fit of one CSV column and,
/// given `sigma`, the implied quality tail `gamma = sigma * slope`.
pub fn cmd_calibrate(opts: &CalibrateOptions, out_dir: &Path) -> RunResult<RunOutput> {
    let report = ingest_values_csv(&opts.input, &opts.column)?;
    let fit = binned_log_rank_fit(&report.values, opts.bins, opts.tail_cut)?;
    let gamma = opts
        .sigma
        .map(|s| implied_gamma(s, fit.slope))
        .transpose()
        .map_err(|e| RunError::input(e.to_string()))?;

    let mut out = RunOutput::default();
    if report.dropped + report.malformed > 0 {
        out.notes.push(format!(
            "{} non-positive or empty and {} malformed rows skipped",
            report.dropped, report.malformed
        ));
    }
    let mut doc = header("calibrate", None);
    doc.insert(
        "input".into(),
        json!({
            "path": opts.input.display().to_string(),
            "column": opts.column,
            "n_values": report.values.len(),
            "dropped": report.dropped,
            "malformed": report.malformed,
        }),
    );
    doc.insert(
        "options".into(),
        json!({ "bins": opts.bins, "tail_cut": num(opts.tail_cut), "sigma": opts.sigma.map(num) }),
    );
    doc.insert("fit".into(), to_json(&fit));
    doc.insert("implied_gamma".into(), gamma.map_or(Value::Null, num));
    write_json(out_dir, "tailfit.json", doc, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub gamma: f64,
    pub sigma: f64,
    pub n: usize,
    pub seed: u64,
    pub column: String,
}

/// Writes `synthetic.csv`: `n` user counts `q^sigma` with `q ~ Pareto(gamma)`.
pub fn cmd_synth(opts: &SynthOptions, out_dir: &Path) -> RunResult<RunOutput> {
    let values = generate_synthetic_repo_counts(opts.gamma, opts.sigma, opts.n, &RngSpec::new(opts.seed, 0))?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| RunError::input(format!("cannot create output directory {}: {e}", out_dir.display())))?;
    let path = out_dir.join("synthetic.csv");
    write_values_csv(&path, &opts.column, &values)?;
    Ok(RunOutput {
        files: vec![path],
        notes: Vec::new(),
    })
}
