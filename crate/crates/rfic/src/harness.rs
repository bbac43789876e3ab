//! Experiment orchestration: sweeps, trials, per-method rows, CSV
//! output, and summary statistics.
//!
//! One experiment is a JSON description ([`ExperimentSpec`]): a base
//! scenario, a geometry, one parameter to sweep over a list of values,
//! a set of methods, and a trial count. For every (value, trial) pair
//! the harness draws one channel realization and hands the *same*
//! realization to every method, so rows differing only in `method` are
//! directly comparable; the `channel_checksum` column lets that be
//! audited after the fact.
//!
//! Reproducibility contract: the RNG seed of a (value, trial) cell is
//! derived from `base_seed` and the trial index with a stable SplitMix
//! hash — never from std's unspecified hasher — and, for sweeps over a
//! channel-shaping parameter (`d_bs_ris`, `N`, `K`), from the sweep
//! value as well. Power sweeps (`P_D_max`, `P_U_max`) deliberately
//! leave the value out of the derivation: transmit power does not
//! shape propagation, so a trial keeps the identical channel set
//! across the whole power axis and per-trial curves are smooth in the
//! power rather than re-rolled at every point.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_no_ris, baseline_null_steering};
use crate::channel::{generate_channel_set, splitmix64, ChannelSet, FadingModel, Geometry};
use crate::error::{Error, Result};
use crate::solver::{
    solve_coordinate_descent, solve_interference, CD_DEFAULT_GRID, CD_DEFAULT_MAX_SWEEPS,
    CD_DEFAULT_TOLERANCE,
};
use crate::sysmodel::{
    constraints_satisfied, rate_breakdown, RateBreakdown, RisConfig, ScenarioConfig,
};

/// Salt separating the surface-phase draw stream from the channel
/// stream of the same cell.
const RIS_STREAM_SALT: u64 = 0x5249_5321_0000_0001;

/// Which scenario knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "P_D_max")]
    PDMax,
    #[serde(rename = "P_U_max")]
    PUMax,
    #[serde(rename = "d_bs_ris")]
    DBsRis,
    #[serde(rename = "N")]
    N,
    #[serde(rename = "K")]
    K,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::PDMax => "P_D_max",
            SweepParameter::PUMax => "P_U_max",
            SweepParameter::DBsRis => "d_bs_ris",
            SweepParameter::N => "N",
            SweepParameter::K => "K",
        }
    }

    /// Whether this parameter shapes propagation (and therefore must
    /// enter the seed derivation). Transmit powers do not.
    pub fn affects_channels(&self) -> bool {
        !matches!(self, SweepParameter::PDMax | SweepParameter::PUMax)
    }
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The parameter to sweep and the values to visit. Values are plain
/// f64 on the wire even for the integer-valued parameters `N` and `K`,
/// which must come as whole non-negative numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// A scheme the harness can evaluate on a channel realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Closed-form solve, relaxed (arbitrary-modulus) reflection.
    #[serde(rename = "rfic-relaxed")]
    RficRelaxed,
    /// Closed-form solve projected onto phase-only elements.
    #[serde(rename = "rfic-unit")]
    RficUnit,
    /// Phase-grid coordinate descent honoring the signal floors.
    #[serde(rename = "rfic-qos")]
    RficQos,
    /// No surface.
    #[serde(rename = "no-ris")]
    NoRis,
    /// Surface with random phases.
    #[serde(rename = "random-ris")]
    RandomRis,
    /// Receive-side projection at the random-phase setting.
    #[serde(rename = "null-steering")]
    NullSteering,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::RficRelaxed,
        Method::RficUnit,
        Method::RficQos,
        Method::NoRis,
        Method::RandomRis,
        Method::NullSteering,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::RficRelaxed => "rfic-relaxed",
            Method::RficUnit => "rfic-unit",
            Method::RficQos => "rfic-qos",
            Method::NoRis => "no-ris",
            Method::RandomRis => "random-ris",
            Method::NullSteering => "null-steering",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                Error::Config(format!("unknown method '{s}'; expected one of {names:?}"))
            })
    }
}

fn default_grid_size() -> usize {
    CD_DEFAULT_GRID
}
fn default_max_sweeps() -> usize {
    CD_DEFAULT_MAX_SWEEPS
}
fn default_cd_tolerance() -> f64 {
    CD_DEFAULT_TOLERANCE
}

/// A complete experiment description, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Scenario the sweep perturbs.
    pub base: ScenarioConfig,
    pub geometry: Geometry,
    #[serde(default)]
    pub fading: FadingModel,
    pub sweep: SweepSpec,
    pub methods: Vec<Method>,
    /// Independent channel realizations per sweep value.
    pub trials: usize,
    pub base_seed: u64,
    /// Phase-grid size for the `rfic-qos` coordinate descent.
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    /// Per-sweep improvement (watts) under which the descent stops.
    #[serde(default = "default_cd_tolerance")]
    pub cd_tolerance: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.geometry.validate()?;
        self.fading.validate()?;
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods list is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.grid_size < 2 {
            return Err(Error::Config(format!(
                "grid_size needs at least 2 points, got {}",
                self.grid_size
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be at least 1".into()));
        }
        if !(self.cd_tolerance >= 0.0) || !self.cd_tolerance.is_finite() {
            return Err(Error::Config(format!(
                "cd_tolerance must be non-negative and finite, got {}",
                self.cd_tolerance
            )));
        }
        // Surface every bad sweep value before any work happens.
        for &v in &self.sweep.values {
            self.instantiate(v)?;
        }
        Ok(())
    }

    /// Apply one sweep value to the base scenario.
    fn instantiate(&self, value: f64) -> Result<(ScenarioConfig, Geometry)> {
        let mut cfg = self.base;
        let mut geom = self.geometry;
        match self.sweep.parameter {
            SweepParameter::PDMax => cfg.p_d_max = value,
            SweepParameter::PUMax => cfg.p_u_max = value,
            SweepParameter::DBsRis => geom.d_bs_ris = value,
            SweepParameter::N => cfg.n = as_count(self.sweep.parameter, value)?,
            SweepParameter::K => cfg.k = as_count(self.sweep.parameter, value)?,
        }
        cfg.validate()?;
        geom.validate()?;
        Ok((cfg, geom))
    }
}

fn as_count(param: SweepParameter, value: f64) -> Result<usize> {
    if !value.is_finite() || value < 0.0 || value.fract() != 0.0 || value > usize::MAX as f64 {
        return Err(Error::Config(format!(
            "sweep over {param} needs whole non-negative values, got {value}"
        )));
    }
    Ok(value as usize)
}

/// Load and validate an [`ExperimentSpec`] from a JSON file.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let spec: ExperimentSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("cannot parse {}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

/// Channel seed of one (sweep value, trial) cell. `channel_key` is the
/// sweep value's bit pattern for channel-shaping sweeps and 0 for power
/// sweeps (see the module docs for why).
pub fn derive_seed(base_seed: u64, channel_key: u64, trial: u64) -> u64 {
    base_seed ^ splitmix64(splitmix64(channel_key) ^ trial)
}

fn channel_key(param: SweepParameter, value: f64) -> u64 {
    if param.affects_channels() {
        value.to_bits()
    } else {
        0
    }
}

/// One (sweep value, trial, method) measurement. Serializes in
/// declaration order as the raw CSV schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_parameter: SweepParameter,
    pub sweep_value: f64,
    pub trial: usize,
    pub method: Method,
    /// Channel RNG seed of this row's cell.
    pub seed: u64,
    /// Hex content hash of the channel realization; equal across all
    /// methods of one cell.
    pub channel_checksum: String,
    /// Solver branch taken; `none` for baselines and for rows where no
    /// solve happened (K = 0, or a flagged numerical failure).
    pub regime: String,
    /// `ok`, or the numerical failure that made this row fall back to
    /// the surface-off setting (`singular`, `rank-deficient`).
    pub status: String,
    pub r_u: f64,
    pub r_d: f64,
    pub r_total: f64,
    pub ul_interference_w: f64,
    pub dl_interference_w: f64,
    /// For `rfic-relaxed`/`rfic-unit`: how far the relaxed solution
    /// strayed from modulus alpha (the projection price). 0 for
    /// everything else.
    pub modulus_deviation: f64,
    /// Signal floors evaluated at this row's surface setting.
    pub qos_feasible: bool,
}

/// Run every (sweep value, trial, method) cell of an experiment.
///
/// Rows come back sorted by (sweep value ascending, trial, method
/// name); together with the stable seed derivation this makes the CSV
/// output byte-reproducible for a given spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.sweep.values.len() * spec.trials * spec.methods.len());
    for &value in &spec.sweep.values {
        let (cfg, geom) = spec.instantiate(value)?;
        for trial in 0..spec.trials {
            let seed = derive_seed(
                spec.base_seed,
                channel_key(spec.sweep.parameter, value),
                trial as u64,
            );
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ch = generate_channel_set(&cfg, &geom, &spec.fading, &mut rng)?;
            let checksum = format!("{:016x}", ch.checksum());
            // One unsteered draw per cell, shared by the random-surface
            // and null-steering rows so they differ only in the receiver.
            let shared_ris = if cfg.k > 0 {
                let mut ris_rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ RIS_STREAM_SALT));
                RisConfig::random(cfg.alpha, cfg.k, &mut ris_rng)
            } else {
                RisConfig::off(0)
            };
            for &method in &spec.methods {
                rows.push(evaluate_cell(
                    spec, &cfg, &ch, method, value, trial, seed, &checksum, &shared_ris,
                )?);
            }
        }
    }
    rows.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then(a.trial.cmp(&b.trial))
            .then(a.method.as_str().cmp(b.method.as_str()))
    });
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_cell(
    spec: &ExperimentSpec,
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    method: Method,
    value: f64,
    trial: usize,
    seed: u64,
    checksum: &str,
    shared_ris: &RisConfig,
) -> Result<ResultRow> {
    let mut regime = "none".to_string();
    let mut status = "ok".to_string();
    let mut modulus_deviation = 0.0;
    let mut qos_override: Option<bool> = None;

    let (rb, setting): (RateBreakdown, RisConfig) = match method {
        Method::NoRis => (baseline_no_ris(cfg, ch)?, RisConfig::off(cfg.k)),
        Method::RandomRis => (rate_breakdown(cfg, ch, shared_ris)?, shared_ris.clone()),
        Method::NullSteering => (
            baseline_null_steering(cfg, ch, shared_ris)?,
            shared_ris.clone(),
        ),
        Method::RficRelaxed | Method::RficUnit if cfg.k == 0 => {
            // Nothing to steer: the solved setting degenerates to the
            // surface-off scenario.
            (baseline_no_ris(cfg, ch)?, RisConfig::off(0))
        }
        Method::RficRelaxed | Method::RficUnit => match solve_interference(cfg, ch) {
            Ok(out) => {
                regime = out.regime.as_str().to_string();
                modulus_deviation = out.modulus_deviation;
                let ris = if method == Method::RficRelaxed {
                    out.ris_relaxed()
                } else {
                    out.ris_unit_modulus()
                };
                (rate_breakdown(cfg, ch, &ris)?, ris)
            }
            Err(e) if e.is_numerical() => {
                // Flag the cell and fall back to the surface-off
                // setting; a lost determinant must not kill a sweep.
                status = match e {
                    Error::Singular { .. } => "singular".to_string(),
                    Error::RankDeficient { .. } => "rank-deficient".to_string(),
                    other => format!("numerical-failure: {other}"),
                };
                (baseline_no_ris(cfg, ch)?, RisConfig::off(cfg.k))
            }
            Err(e) => return Err(e),
        },
        Method::RficQos if cfg.k == 0 => (baseline_no_ris(cfg, ch)?, RisConfig::off(0)),
        Method::RficQos => {
            let out = solve_coordinate_descent(
                cfg,
                ch,
                spec.grid_size,
                spec.max_sweeps,
                spec.cd_tolerance,
            )?;
            regime = out.regime.as_str().to_string();
            qos_override = Some(out.qos_feasible);
            let ris = out.ris_unit_modulus();
            (rate_breakdown(cfg, ch, &ris)?, ris)
        }
    };

    let qos_feasible = match qos_override {
        Some(flag) => flag,
        None => constraints_satisfied(cfg, ch, &setting.reflection)?.both(),
    };

    Ok(ResultRow {
        sweep_parameter: spec.sweep.parameter,
        sweep_value: value,
        trial,
        method,
        seed,
        channel_checksum: checksum.to_string(),
        regime,
        status,
        r_u: rb.r_u,
        r_d: rb.r_d,
        r_total: rb.total(),
        ul_interference_w: rb.ul_interference_power,
        dl_interference_w: rb.dl_interference_power,
        modulus_deviation,
        qos_feasible,
    })
}

/// Aggregate statistics of one (method, sweep value) group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_parameter: SweepParameter,
    pub sweep_value: f64,
    pub method: Method,
    pub trials: usize,
    pub r_u_mean: f64,
    pub r_u_sd: f64,
    pub r_u_ci95: f64,
    pub r_d_mean: f64,
    pub r_d_sd: f64,
    pub r_d_ci95: f64,
    pub r_total_mean: f64,
    pub r_total_sd: f64,
    pub r_total_ci95: f64,
}

fn mean_sd_ci(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        // A single observation has no spread estimate; report 0 by
        // convention rather than NaN.
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    (mean, sd, 1.96 * sd / n.sqrt())
}

/// Collapse raw rows into per-(method, sweep value) means with sample
/// standard deviations and 95% normal confidence half-widths. Output is
/// sorted like the raw rows: (sweep value ascending, method name).
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    use std::collections::BTreeMap;
    // Positive floats order correctly by bit pattern; sweep values are
    // validated positive or whole counts.
    let mut groups: BTreeMap<(u64, &'static str), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.sweep_value.to_bits(), row.method.as_str()))
            .or_default()
            .push(row);
    }
    groups
        .into_values()
        .map(|group| {
            let r_u: Vec<f64> = group.iter().map(|r| r.r_u).collect();
            let r_d: Vec<f64> = group.iter().map(|r| r.r_d).collect();
            let r_total: Vec<f64> = group.iter().map(|r| r.r_total).collect();
            let (r_u_mean, r_u_sd, r_u_ci95) = mean_sd_ci(&r_u);
            let (r_d_mean, r_d_sd, r_d_ci95) = mean_sd_ci(&r_d);
            let (r_total_mean, r_total_sd, r_total_ci95) = mean_sd_ci(&r_total);
            SummaryRow {
                sweep_parameter: group[0].sweep_parameter,
                sweep_value: group[0].sweep_value,
                method: group[0].method,
                trials: group.len(),
                r_u_mean,
                r_u_sd,
                r_u_ci95,
                r_d_mean,
                r_d_sd,
                r_d_ci95,
                r_total_mean,
                r_total_sd,
                r_total_ci95,
            }
        })
        .collect()
}

/// Write raw rows as CSV. Field order is the [`ResultRow`] declaration
/// order; floats print in shortest round-trip form, so equal inputs
/// produce byte-equal files.
pub fn write_raw_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write summary rows as CSV; same determinism contract as
/// [`write_raw_csv`].
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
