//! Scenario description, effective channels, rates, and the stacked
//! cancellation system the solvers operate on.
//!
//! The physical picture: a full-duplex base station serves `M` downlink
//! users while receiving from `N` uplink users on the same band, with a
//! `K`-element reflective surface placed to help. Two nuisance paths
//! couple the directions — the base station's own transmit-to-receive
//! self-interference loop and the uplink-user-to-downlink-user
//! co-channel path — and the surface is steered so its reflections
//! cancel them. Everything here works in plain watts; rates come out in
//! bits/s/Hz.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};

/// Dimensions, power budgets, and thresholds of one scenario.
///
/// Wire names (JSON) keep the conventional symbols (`N_t`, `P_U_max`,
/// ...); the Rust fields are the same things in snake case. Powers are
/// watts, bandwidth Hz, noise density W/Hz.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Base-station transmit antennas.
    #[serde(rename = "N_t")]
    pub n_t: usize,
    /// Base-station receive antennas.
    #[serde(rename = "N_r")]
    pub n_r: usize,
    /// Uplink users (single antenna each).
    #[serde(rename = "N")]
    pub n: usize,
    /// Downlink users (single antenna each).
    #[serde(rename = "M")]
    pub m: usize,
    /// Reflective surface elements.
    #[serde(rename = "K")]
    pub k: usize,
    /// Total uplink power budget, watts, split evenly over the `N` users.
    #[serde(rename = "P_U_max")]
    pub p_u_max: f64,
    /// Total downlink power budget, watts, split evenly over the `N_t`
    /// transmit antennas.
    #[serde(rename = "P_D_max")]
    pub p_d_max: f64,
    /// Reflection amplitude of each surface element, in (0, 1].
    pub alpha: f64,
    /// Noise power spectral density, W/Hz.
    #[serde(rename = "N0")]
    pub n0: f64,
    /// Bandwidth, Hz.
    #[serde(rename = "B")]
    pub b: f64,
    /// Weight of the co-channel term in the cancellation objective.
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Minimum acceptable uplink received signal power, watts.
    #[serde(rename = "t_thr_U", default)]
    pub t_thr_u: f64,
    /// Minimum acceptable downlink received signal power, watts.
    #[serde(rename = "t_thr_D", default)]
    pub t_thr_d: f64,
    /// Reporting-only uplink SINR threshold (not enforced anywhere).
    #[serde(rename = "gamma_thr_U", default)]
    pub gamma_thr_u: f64,
    /// Reporting-only downlink SINR threshold (not enforced anywhere).
    #[serde(rename = "gamma_thr_D", default)]
    pub gamma_thr_d: f64,
}

fn default_mu() -> f64 {
    1.0
}

impl ScenarioConfig {
    /// Per-user uplink transmit power, watts.
    pub fn p_u(&self) -> f64 {
        self.p_u_max / self.n as f64
    }

    /// Per-antenna downlink transmit power, watts.
    pub fn p_d(&self) -> f64 {
        self.p_d_max / self.n_t as f64
    }

    /// Total uplink-side thermal noise power `N0 * B * N_r`, watts.
    pub fn noise_ul(&self) -> f64 {
        self.n0 * self.b * self.n_r as f64
    }

    /// Total downlink-side thermal noise power `N0 * B * M`, watts.
    pub fn noise_dl(&self) -> f64 {
        self.n0 * self.b * self.m as f64
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("N_t", self.n_t),
            ("N_r", self.n_r),
            ("N", self.n),
            ("M", self.m),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [
            ("P_U_max", self.p_u_max),
            ("P_D_max", self.p_d_max),
            ("N0", self.n0),
            ("B", self.b),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        for (name, v) in [
            ("mu", self.mu),
            ("t_thr_U", self.t_thr_u),
            ("t_thr_D", self.t_thr_d),
            ("gamma_thr_U", self.gamma_thr_u),
            ("gamma_thr_D", self.gamma_thr_d),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Whether a surface setting is constrained to a fixed modulus or free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RisMode {
    /// Every element is `alpha * e^{j theta}`: phase is the only knob.
    UnitModulus,
    /// Elements are arbitrary complex numbers (analysis mode; an ideal
    /// surface that can also attenuate or amplify per element).
    Relaxed,
}

/// One concrete setting of the surface: the diagonal of its reflection
/// matrix, plus which regime the entries are supposed to live in.
#[derive(Debug, Clone, PartialEq)]
pub struct RisConfig {
    pub alpha: f64,
    pub mode: RisMode,
    /// Diagonal of the reflection matrix, length `K`.
    pub reflection: DVector<Complex64>,
}

impl RisConfig {
    /// A surface that reflects nothing (all-zero diagonal); also the
    /// natural stand-in for "no surface at all".
    pub fn off(k: usize) -> Self {
        RisConfig {
            alpha: 1.0,
            mode: RisMode::Relaxed,
            reflection: DVector::zeros(k),
        }
    }

    /// Unit-modulus setting from explicit phases (radians).
    pub fn from_phases(alpha: f64, phases: &[f64]) -> Self {
        RisConfig {
            alpha,
            mode: RisMode::UnitModulus,
            reflection: DVector::from_iterator(
                phases.len(),
                phases.iter().map(|&t| Complex64::from_polar(alpha, t)),
            ),
        }
    }

    /// Relaxed setting carrying an arbitrary complex diagonal.
    pub fn relaxed(alpha: f64, reflection: DVector<Complex64>) -> Self {
        RisConfig {
            alpha,
            mode: RisMode::Relaxed,
            reflection,
        }
    }

    /// Unit-modulus setting with phases drawn uniformly from [0, 2pi),
    /// element by element in index order.
    pub fn random(alpha: f64, k: usize, rng: &mut impl Rng) -> Self {
        let phases: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
        Self::from_phases(alpha, &phases)
    }

    pub fn k(&self) -> usize {
        self.reflection.len()
    }

    /// Element phases wrapped to [0, 2pi); exact zeros report phase 0.
    pub fn phases(&self) -> Vec<f64> {
        self.reflection
            .iter()
            .map(|e| if e.norm() == 0.0 { 0.0 } else { wrap_phase(e.arg()) })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "reflection amplitude must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.mode == RisMode::UnitModulus {
            let dev = unit_modulus_deviation(&self.reflection, self.alpha);
            if dev > 1e-12 {
                return Err(Error::Config(format!(
                    "unit-modulus setting drifted off |.| = alpha by {dev:.3e}"
                )));
            }
        }
        Ok(())
    }
}

/// Wrap an angle into [0, 2pi). Guards the rounding case where a tiny
/// negative angle lands exactly on 2pi after the shift.
pub fn wrap_phase(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut w = theta % tau;
    if w < 0.0 {
        w += tau;
    }
    if w >= tau {
        w = 0.0;
    }
    w
}

/// Largest relative deviation of any entry's modulus from `target`:
/// `max_i | |p_i| / target - 1 |`. Empty input reports 0.
pub fn unit_modulus_deviation(p: &DVector<Complex64>, target: f64) -> f64 {
    p.iter()
        .map(|e| (e.norm() / target - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Build the K x K diagonal reflection matrix from a surface setting.
pub fn assemble_ris_matrix(ris: &RisConfig) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&ris.reflection)
}

/// The four end-to-end channels once the surface is folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    /// Downlink signal, `D + D2 Theta D1`, M x N_t.
    pub dl_sig: DMatrix<Complex64>,
    /// Co-channel interference into downlink users, `V + D2 Theta U1`, M x N.
    pub dl_int: DMatrix<Complex64>,
    /// Uplink signal, `U + U2 Theta U1`, N_r x N.
    pub ul_sig: DMatrix<Complex64>,
    /// Self-interference into the base-station receiver,
    /// `S + U2 Theta D1`, N_r x N_t.
    pub ul_int: DMatrix<Complex64>,
}

/// Fold a reflection matrix into the raw channels. `theta` must be the
/// K x K diagonal for the same `K` the channels were drawn with; a
/// mismatch is a structural error.
pub fn effective_channels(ch: &ChannelSet, theta: &DMatrix<Complex64>) -> Result<EffectiveChannels> {
    let k = ch.k();
    if theta.shape() != (k, k) {
        return Err(Error::Dimension(format!(
            "reflection matrix is {:?}, channels were drawn for K = {k}",
            theta.shape()
        )));
    }
    let bounce = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| a * theta * b;
    Ok(EffectiveChannels {
        dl_sig: &ch.d + bounce(&ch.d2, &ch.d1),
        dl_int: &ch.v + bounce(&ch.d2, &ch.u1),
        ul_sig: &ch.u + bounce(&ch.u2, &ch.u1),
        ul_int: &ch.s + bounce(&ch.u2, &ch.d1),
    })
}

/// Row sums of each channel matrix — what the all-ones transmit
/// convention collapses every matrix to. Lengths: `d1`, `u1` are K;
/// `s`, `u` are N_r; `v`, `d` are M.
#[derive(Debug, Clone, PartialEq)]
pub struct Reductions {
    pub d1: DVector<Complex64>,
    pub u1: DVector<Complex64>,
    pub s: DVector<Complex64>,
    pub v: DVector<Complex64>,
    pub u: DVector<Complex64>,
    pub d: DVector<Complex64>,
}

pub(crate) fn row_sums(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    let ones = DVector::from_element(m.ncols(), Complex64::new(1.0, 0.0));
    m * ones
}

/// Collapse every channel matrix to its row sums.
pub fn reductions(ch: &ChannelSet) -> Reductions {
    Reductions {
        d1: row_sums(&ch.d1),
        u1: row_sums(&ch.u1),
        s: row_sums(&ch.s),
        v: row_sums(&ch.v),
        u: row_sums(&ch.u),
        d: row_sums(&ch.d),
    }
}

/// The linear system whose solution cancels both interference paths at
/// once. Rows are receive dimensions (base-station antennas first, then
/// downlink users), columns are surface elements: for a diagonal
/// reflection vector `p`, `W_c p + r` stacks the two interference
/// residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem {
    /// `(N_r + M) x K`; top block `U2 diag(d1)`, bottom `D2 diag(u1)`
    /// where `d1`, `u1` are the row-sum reductions.
    pub w_c: DMatrix<Complex64>,
    /// Stacked direct-path leakage, `[s; v]`, length `N_r + M`.
    pub r: DVector<Complex64>,
    /// How many rows belong to the top (self-interference) block.
    pub ul_rows: usize,
}

impl StackedSystem {
    pub fn rows(&self) -> usize {
        self.w_c.nrows()
    }

    pub fn k(&self) -> usize {
        self.w_c.ncols()
    }

    /// Stacked residual `W_c p + r` at a physical reflection vector.
    pub fn residual(&self, p: &DVector<Complex64>) -> DVector<Complex64> {
        &self.w_c * p + &self.r
    }
}

/// Scale each column `j` of `m` by `diag[j]` — i.e. `m * diag(diag)`
/// without materializing the diagonal matrix.
pub(crate) fn scale_columns(m: &DMatrix<Complex64>, diag: &DVector<Complex64>) -> DMatrix<Complex64> {
    let mut out = m.clone();
    for (j, &g) in diag.iter().enumerate() {
        for i in 0..out.nrows() {
            out[(i, j)] *= g;
        }
    }
    out
}

/// The two cancellation blocks plus the direct leakage vectors, valid
/// for any K including 0 (empty blocks).
pub(crate) fn cancellation_blocks(
    ch: &ChannelSet,
) -> (
    DMatrix<Complex64>,
    DMatrix<Complex64>,
    DVector<Complex64>,
    DVector<Complex64>,
) {
    let red = reductions(ch);
    let u_c = scale_columns(&ch.u2, &red.d1);
    let d_c = scale_columns(&ch.d2, &red.u1);
    (u_c, d_c, red.s, red.v)
}

/// Assemble the stacked cancellation system for a channel realization.
/// Needs at least one surface element; with `K = 0` there is nothing to
/// steer and assembly is a structural error.
pub fn stacked_system(ch: &ChannelSet) -> Result<StackedSystem> {
    let k = ch.k();
    if k == 0 {
        return Err(Error::Dimension(
            "stacked system needs at least one surface element (K >= 1)".into(),
        ));
    }
    let (u_c, d_c, s, v) = cancellation_blocks(ch);
    let n_r = u_c.nrows();
    let m = d_c.nrows();
    let w_c = DMatrix::from_fn(n_r + m, k, |i, j| {
        if i < n_r {
            u_c[(i, j)]
        } else {
            d_c[(i - n_r, j)]
        }
    });
    let r = DVector::from_fn(n_r + m, |i, _| if i < n_r { s[i] } else { v[i - n_r] });
    Ok(StackedSystem { w_c, r, ul_rows: n_r })
}

/// Received powers and spectral efficiencies of both directions for one
/// (channels, surface setting) pair. All powers in watts, rates in
/// bits/s/Hz summed over the direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    pub ul_signal_power: f64,
    pub ul_interference_power: f64,
    pub ul_noise_power: f64,
    pub dl_signal_power: f64,
    pub dl_interference_power: f64,
    pub dl_noise_power: f64,
    /// Uplink spectral efficiency, `log2(1 + SINR_U)`.
    pub r_u: f64,
    /// Downlink spectral efficiency, `log2(1 + SINR_D)`.
    pub r_d: f64,
}

impl RateBreakdown {
    /// Rates from powers, guarding the all-zero corner (a fully
    /// projected-out receiver has zero signal, zero interference, and
    /// zero effective noise; its rate is zero, not 0/0).
    pub fn from_powers(
        ul_signal_power: f64,
        ul_interference_power: f64,
        ul_noise_power: f64,
        dl_signal_power: f64,
        dl_interference_power: f64,
        dl_noise_power: f64,
    ) -> Self {
        let rate = |sig: f64, int: f64, noise: f64| {
            if sig == 0.0 {
                0.0
            } else {
                (1.0 + sig / (int + noise)).log2()
            }
        };
        RateBreakdown {
            ul_signal_power,
            ul_interference_power,
            ul_noise_power,
            dl_signal_power,
            dl_interference_power,
            dl_noise_power,
            r_u: rate(ul_signal_power, ul_interference_power, ul_noise_power),
            r_d: rate(dl_signal_power, dl_interference_power, dl_noise_power),
        }
    }

    /// Sum rate `R_U + R_D`, bits/s/Hz.
    pub fn total(&self) -> f64 {
        self.r_u + self.r_d
    }
}

/// Evaluate both directions under the all-ones transmit convention:
/// every uplink user sends `sqrt(P_U_max / N)` and every base-station
/// antenna sends `sqrt(P_D_max / N_t)`, so received powers are squared
/// norms of effective-channel row sums. Noise is taken at its expected
/// power, not sampled.
pub fn rate_breakdown(cfg: &ScenarioConfig, ch: &ChannelSet, ris: &RisConfig) -> Result<RateBreakdown> {
    cfg.validate()?;
    if ris.k() != ch.k() {
        return Err(Error::Dimension(format!(
            "surface setting has {} elements, channels were drawn for K = {}",
            ris.k(),
            ch.k()
        )));
    }
    let theta = assemble_ris_matrix(ris);
    let eff = effective_channels(ch, &theta)?;
    let p_u = cfg.p_u();
    let p_d = cfg.p_d();
    Ok(RateBreakdown::from_powers(
        p_u * row_sums(&eff.ul_sig).norm_squared(),
        p_d * row_sums(&eff.ul_int).norm_squared(),
        cfg.noise_ul(),
        p_d * row_sums(&eff.dl_sig).norm_squared(),
        p_u * row_sums(&eff.dl_int).norm_squared(),
        cfg.noise_dl(),
    ))
}

/// Residual interference power left by a physical reflection vector
/// `p` (the diagonal of the reflection matrix):
///
/// `P_D/N_t * ||s + U_c p||^2  +  mu * P_U/N * ||v + D_c p||^2`  — watts.
///
/// This is exactly the transmit-weighted power of the stacked residual,
/// so it hits 0 precisely when `W_c p = -r`.
pub fn objective(cfg: &ScenarioConfig, ch: &ChannelSet, p: &DVector<Complex64>) -> Result<f64> {
    let (ul, dl) = objective_parts(cfg, ch, p)?;
    Ok(ul + cfg.mu * dl)
}

/// The two unweighted-by-mu components of [`objective`]: the uplink
/// self-interference power and the downlink co-channel power at `p`,
/// each already scaled by its transmit power. `objective = ul + mu*dl`.
pub fn objective_parts(cfg: &ScenarioConfig, ch: &ChannelSet, p: &DVector<Complex64>) -> Result<(f64, f64)> {
    cfg.validate()?;
    if p.len() != ch.k() {
        return Err(Error::Dimension(format!(
            "reflection vector has {} entries, channels were drawn for K = {}",
            p.len(),
            ch.k()
        )));
    }
    let (u_c, d_c, s, v) = cancellation_blocks(ch);
    let r_ul = u_c * p + s;
    let r_dl = d_c * p + v;
    Ok((cfg.p_d() * r_ul.norm_squared(), cfg.p_u() * r_dl.norm_squared()))
}

/// Received *signal* powers at a physical reflection vector and whether
/// they clear the configured floors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    /// `P_U/N * ||u + U2 diag(u1) p||^2`, watts.
    pub ul_signal_power: f64,
    /// `P_D/N_t * ||d + D2 diag(d1) p||^2`, watts.
    pub dl_signal_power: f64,
    /// `ul_signal_power >= t_thr_U` (inclusive).
    pub ul_ok: bool,
    /// `dl_signal_power >= t_thr_D` (inclusive).
    pub dl_ok: bool,
}

impl ConstraintReport {
    pub fn both(&self) -> bool {
        self.ul_ok && self.dl_ok
    }
}

/// Check the signal-floor constraints at a physical reflection vector.
/// The powers reported here coincide with the signal powers of
/// [`rate_breakdown`] at the same setting.
pub fn constraints_satisfied(cfg: &ScenarioConfig, ch: &ChannelSet, p: &DVector<Complex64>) -> Result<ConstraintReport> {
    cfg.validate()?;
    if p.len() != ch.k() {
        return Err(Error::Dimension(format!(
            "reflection vector has {} entries, channels were drawn for K = {}",
            p.len(),
            ch.k()
        )));
    }
    let red = reductions(ch);
    let u_sig = scale_columns(&ch.u2, &red.u1);
    let d_sig = scale_columns(&ch.d2, &red.d1);
    let ul_signal_power = cfg.p_u() * (u_sig * p + red.u).norm_squared();
    let dl_signal_power = cfg.p_d() * (d_sig * p + red.d).norm_squared();
    Ok(ConstraintReport {
        ul_signal_power,
        dl_signal_power,
        ul_ok: ul_signal_power >= cfg.t_thr_u,
        dl_ok: dl_signal_power >= cfg.t_thr_d,
    })
}

/// Gradient of [`objective`] along unit-modulus phases: with
/// `p_i = alpha e^{j theta_i}`,
///
/// `d/d theta_i = 2 P_D/N_t Re( conj((U_c^H r_ul)_i) j alpha e^{j theta_i} )
///              + 2 mu P_U/N Re( conj((D_c^H r_dl)_i) j alpha e^{j theta_i} )`
///
/// where `r_ul`, `r_dl` are the two residuals at `p`. Used to sanity-
/// check descent directions, not as a solver.
pub fn gradient_objective(cfg: &ScenarioConfig, ch: &ChannelSet, theta: &[f64]) -> Result<Vec<f64>> {
    cfg.validate()?;
    if theta.len() != ch.k() {
        return Err(Error::Dimension(format!(
            "phase vector has {} entries, channels were drawn for K = {}",
            theta.len(),
            ch.k()
        )));
    }
    let (u_c, d_c, s, v) = cancellation_blocks(ch);
    let q = DVector::from_iterator(
        theta.len(),
        theta.iter().map(|&t| Complex64::from_polar(cfg.alpha, t)),
    );
    let r_ul = &u_c * &q + s;
    let r_dl = &d_c * &q + v;
    let a_ul = u_c.adjoint() * r_ul;
    let a_dl = d_c.adjoint() * r_dl;
    let j = Complex64::new(0.0, 1.0);
    Ok((0..theta.len())
        .map(|i| {
            let spin = j * q[i]; // j alpha e^{j theta_i}
            2.0 * cfg.p_d() * (a_ul[i].conj() * spin).re
                + 2.0 * cfg.mu * cfg.p_u() * (a_dl[i].conj() * spin).re
        })
        .collect())
}
