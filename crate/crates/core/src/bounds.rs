//! Lower bounds on `L_p` norms of loop signals.
//!
//! Every bound has the shape `c_p · (plant factor) · 2^{entropy rate}` with
//! `c_p = 1 / (2 Γ((p+1)/p) (p e)^{1/p})`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::disturbance::{szego_entropy_rate, EntropySummary, SpectralDensity};
use crate::error::{Error, Result};
use crate::norm::NormOrder;
use crate::plant::PlantCharacteristics;

/// Which formula produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Error signal, LTI plant, general `p`.
    T1,
    /// Plant output, LTI plant.
    T2,
    /// Error signal, any strictly causal plant.
    T3,
    /// Error signal at `p = 2` (minimum-variance floor).
    C2,
    /// Error signal at `p = ∞` (maximum deviation).
    C3,
    /// Error signal via the power spectrum and negentropy rate.
    C4,
    /// The `p = 2`, stable-plant, Gaussian case of `C4`: the one-step
    /// prediction error of the Kolmogorov–Szegő formula.
    KS,
}

impl std::str::FromStr for Theorem {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "T1" => Theorem::T1,
            "T2" => Theorem::T2,
            "T3" => Theorem::T3,
            "C2" => Theorem::C2,
            "C3" => Theorem::C3,
            "C4" => Theorem::C4,
            "KS" => Theorem::KS,
            other => return Err(format!("unknown theorem tag {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundFactors {
    pub cp: f64,
    pub plant_factor: f64,
    pub entropy_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub p: NormOrder,
    #[serde(rename = "theorem")]
    pub theorem: Theorem,
    #[serde(rename = "bound")]
    pub bound_value: f64,
    pub factors: BoundFactors,
    /// Squared form `bound²`, reported for `p = 2` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_floor: Option<f64>,
    /// Entropy rate (bits) that fed the entropy factor.
    pub entropy_rate_bits: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    fn new(
        p: NormOrder,
        theorem: Theorem,
        cp: f64,
        plant_factor: f64,
        entropy_rate_bits: f64,
    ) -> Result<Self> {
        if !entropy_rate_bits.is_finite() {
            return Err(Error::InvalidDisturbance(format!(
                "entropy rate must be finite, got {entropy_rate_bits}"
            )));
        }
        let entropy_factor = entropy_rate_bits.exp2();
        let bound_value = cp * plant_factor * entropy_factor;
        let variance_floor = (p == NormOrder::Finite(2.0)).then_some(bound_value * bound_value);
        Ok(Self {
            p,
            theorem,
            bound_value,
            factors: BoundFactors {
                cp,
                plant_factor,
                entropy_factor,
            },
            variance_floor,
            entropy_rate_bits,
            notes: Vec::new(),
        })
    }
}

/// `1 / (2 Γ((p+1)/p) (p e)^{1/p})`; `1/2` at `p = ∞`.
pub fn cp_constant(p: NormOrder) -> Result<f64> {
    match p {
        NormOrder::Infinity => Ok(0.5),
        NormOrder::Finite(p) if p.is_finite() && p >= 1.0 => {
            let ln_denominator = 2f64.ln() + ln_gamma((p + 1.0) / p) + (p.ln() + 1.0) / p;
            Ok((-ln_denominator).exp())
        }
        NormOrder::Finite(p) => Err(Error::InvalidOrder(p.to_string())),
    }
}

fn limsup_note() -> String {
    "asymptotic bound on limsup_k; assumes the controller stabilizes the plant".to_string()
}

/// Error-signal bound for an LTI plant:
/// `c_p · Π max{1,|λ_i(A)|} · 2^{limsup h(d_k | d_0..d_{k-1})}`.
pub fn error_bound_lti(
    p: NormOrder,
    chars: &PlantCharacteristics,
    ent: &EntropySummary,
) -> Result<BoundReport> {
    let mut r = BoundReport::new(
        p,
        Theorem::T1,
        cp_constant(p)?,
        chars.unstable_pole_product,
        ent.conditional_entropy_rate,
    )?;
    r.notes.push(limsup_note());
    Ok(r)
}

/// Minimum-variance floor: the `p = 2` specialization, with the squared form.
pub fn error_bound_p2(chars: &PlantCharacteristics, ent: &EntropySummary) -> Result<BoundReport> {
    let mut r = error_bound_lti(NormOrder::Finite(2.0), chars, ent)?;
    r.theorem = Theorem::C2;
    Ok(r)
}

/// Worst-case deviation floor: the `p = ∞` specialization.
pub fn error_bound_pinf(chars: &PlantCharacteristics, ent: &EntropySummary) -> Result<BoundReport> {
    let mut r = error_bound_lti(NormOrder::Infinity, chars, ent)?;
    r.theorem = Theorem::C3;
    Ok(r)
}

/// Error-signal bound from the power spectrum:
/// `√(2πe) c_p · Π max{1,|λ_i|} · 2^{-J_∞} · 2^{(1/2π)∫ log₂ √S dω}`.
///
/// The entropy factor stores `2^{h_∞}` with `h_∞` from the Szegő integral, so
/// the stored factors still multiply to the bound.
pub fn error_bound_spectral(
    p: NormOrder,
    chars: &PlantCharacteristics,
    spectrum: &SpectralDensity,
    negentropy: f64,
) -> Result<BoundReport> {
    if !(negentropy.is_finite() && negentropy >= 0.0) {
        return Err(Error::InvalidDisturbance(format!(
            "negentropy rate must be >= 0, got {negentropy}"
        )));
    }
    let h = szego_entropy_rate(spectrum, negentropy)?;
    let ks = p == NormOrder::Finite(2.0) && chars.unstable_pole_product == 1.0 && negentropy == 0.0;
    let theorem = if ks { Theorem::KS } else { Theorem::C4 };
    let mut r = BoundReport::new(p, theorem, cp_constant(p)?, chars.unstable_pole_product, h)?;
    let log_mean = spectrum.log_integral()?;
    r.notes.push(format!(
        "spectral route: (1/2pi) int log2 S = {log_mean:.12} bits on {} grid points, negentropy {negentropy:.12} bits, sqrt(2 pi e) c_p = {:.12}",
        spectrum.len(),
        (2.0 * PI * E).sqrt() * r.factors.cp
    ));
    r.notes.push(limsup_note());
    Ok(r)
}

/// Output bound: `c_p · |ρ| · Π_{φ∈Z} max{1,|φ|} · 2^{limsup h(d_{k-ν} | ...)}`.
///
/// For the stationary disturbances supported here the `ν`-shifted conditional
/// entropy has the same limsup as the unshifted one, so the summary's rate is
/// used directly. The plant factor is `|ρ| · Π max{1,|φ|}` and may be below 1
/// when `|ρ| < 1`.
pub fn output_bound(
    p: NormOrder,
    chars: &PlantCharacteristics,
    ent: &EntropySummary,
) -> Result<BoundReport> {
    if chars.markov_gain == 0.0 || !chars.markov_gain.is_finite() {
        return Err(Error::ZeroTransferFunction(chars.state_dim));
    }
    let plant_factor = chars.markov_gain.abs() * chars.nmp_zero_product;
    let mut r = BoundReport::new(
        p,
        Theorem::T2,
        cp_constant(p)?,
        plant_factor,
        ent.conditional_entropy_rate,
    )?;
    r.notes.push(format!(
        "plant factor = |rho| {} x NMP zero product {}; relative degree {}",
        chars.markov_gain.abs(),
        chars.nmp_zero_product,
        chars.relative_degree
    ));
    if chars.relative_degree == 0 {
        r.notes.push("relative degree 0 (CB != 0)".to_string());
    }
    if !ent.stationary {
        r.notes
            .push("nonstationary disturbance: shifted entropy limsup assumed equal".to_string());
    }
    r.notes.push(limsup_note());
    Ok(r)
}

/// Error bound for any strictly causal plant: `c_p · 2^{limsup h(d_k | ...)}`.
pub fn error_bound_generic(p: NormOrder, ent: &EntropySummary) -> Result<BoundReport> {
    let mut r = BoundReport::new(
        p,
        Theorem::T3,
        cp_constant(p)?,
        1.0,
        ent.conditional_entropy_rate,
    )?;
    r.notes.push(limsup_note());
    Ok(r)
}

/// Non-asymptotic form at a single time `k`, given `h(d_k | d_0..d_{k-1})`.
pub fn error_bound_generic_at(p: NormOrder, conditional_entropy_bits: f64) -> Result<BoundReport> {
    let mut r = BoundReport::new(
        p,
        Theorem::T3,
        cp_constant(p)?,
        1.0,
        conditional_entropy_bits,
    )?;
    r.notes
        .push("non-asymptotic bound on (E|e_k|^p)^(1/p) at a single k".to_string());
    Ok(r)
}
