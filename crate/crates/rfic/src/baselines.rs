//! Reference schemes the surface solvers are measured against.
//!
//! Three rungs: no surface at all, a surface with uniformly random
//! phases (what you get from reflection without steering), and
//! receive-side null steering — the classical answer that burns
//! receive dimensions to project the self-interference away instead of
//! cancelling it over the air.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::sysmodel::{
    assemble_ris_matrix, effective_channels, rate_breakdown, row_sums, RateBreakdown, RisConfig,
    ScenarioConfig,
};

/// Singular values below `1e-10 * sigma_max` count as zero when
/// deciding how many receive dimensions the interference occupies.
const RANK_RTOL: f64 = 1e-10;

/// Rates with the surface absent: identical by construction to
/// [`rate_breakdown`] with an all-zero reflection diagonal.
pub fn baseline_no_ris(cfg: &ScenarioConfig, ch: &ChannelSet) -> Result<RateBreakdown> {
    rate_breakdown(cfg, ch, &RisConfig::off(ch.k()))
}

/// Rates with an unsteered surface: phases drawn uniformly from
/// [0, 2pi) at modulus `cfg.alpha`. Needs at least one element — with
/// none, use [`baseline_no_ris`].
pub fn baseline_random_ris(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    rng: &mut impl Rng,
) -> Result<RateBreakdown> {
    if ch.k() == 0 {
        return Err(Error::Dimension(
            "random-surface baseline needs K >= 1; use the no-surface baseline instead".into(),
        ));
    }
    let ris = RisConfig::random(cfg.alpha, ch.k(), rng);
    rate_breakdown(cfg, ch, &ris)
}

/// Orthogonal projector onto the complement of the column space of
/// `h`: `P = I - U_r U_r^H` with `U_r` the left singular vectors whose
/// singular values exceed `1e-10 * sigma_max`. `P` is Hermitian,
/// idempotent, annihilates `h`, and its trace counts the receive
/// dimensions that survive.
pub fn null_projector(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = h.nrows();
    let svd = h.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors were requested");
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let eps = RANK_RTOL * sigma_max;
    let mut p = DMatrix::identity(n, n);
    for j in 0..svd.singular_values.len() {
        if svd.singular_values[j] > eps {
            let col = u.column(j);
            p -= &col * col.adjoint();
        }
    }
    p
}

/// Receive-side null steering at a fixed surface setting (the same
/// unsteered setting the random baseline uses, so the two differ only
/// in the receiver).
///
/// The base station projects its receive signal onto the complement of
/// the effective self-interference channel's column space. That zeroes
/// the self-interference exactly but costs signal dimensions: both the
/// projected uplink signal power and the surviving noise
/// `N0 B trace(P)` shrink. When the interference fills every receive
/// dimension the projector is zero and the uplink rate is zero — not
/// 0/0. The downlink side has no projector and matches
/// [`rate_breakdown`].
pub fn baseline_null_steering(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    ris: &RisConfig,
) -> Result<RateBreakdown> {
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
    let p = null_projector(&eff.ul_int);
    // Projector eigenvalues are 0 or 1, so the trace is an integer up
    // to rounding; it counts the surviving receive dimensions.
    let surviving = p.trace().re.round();
    let (ul_sig, ul_int, ul_noise) = if surviving <= 0.0 {
        // Fully projected out: everything at the receiver is zero.
        (0.0, 0.0, 0.0)
    } else {
        (
            cfg.p_u() * (&p * row_sums(&eff.ul_sig)).norm_squared(),
            cfg.p_d() * (&p * row_sums(&eff.ul_int)).norm_squared(),
            cfg.n0 * cfg.b * surviving,
        )
    };
    Ok(RateBreakdown::from_powers(
        ul_sig,
        ul_int,
        ul_noise,
        cfg.p_d() * row_sums(&eff.dl_sig).norm_squared(),
        cfg.p_u() * row_sums(&eff.dl_int).norm_squared(),
        cfg.noise_dl(),
    ))
}
