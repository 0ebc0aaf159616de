//! Parametric disturbance processes and their information quantities.
//!
//! All entropies are in bits. The supported families have closed-form
//! conditional entropy rates, which is what the bounds consume.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::norm::NormOrder;

/// Default grid size for spectral quadrature.
pub const DEFAULT_GRID: usize = 4096;

/// A zero-mean stochastic disturbance `{d_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceModel {
    /// i.i.d. `N(0, σ²)`.
    IidGaussian { sigma: f64 },
    /// i.i.d. uniform on `[-a, a]`.
    IidUniform { half_width: f64 },
    /// i.i.d. maximum-entropy density under `(E|x|^p)^{1/p} = norm`.
    #[serde(rename = "iid_gengauss")]
    IidGeneralizedGaussian { shape: f64, norm: f64 },
    /// `d_k = Σ_i coeffs[i] d_{k-1-i} + w_k`, `w_k ~ N(0, σ_w²)`.
    GaussAr { coeffs: Vec<f64>, sigma_w: f64 },
}

impl DisturbanceModel {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDisturbance(format!(
                    "{name} must be finite and > 0, got {v}"
                )))
            }
        };
        match self {
            DisturbanceModel::IidGaussian { sigma } => positive("sigma", *sigma),
            DisturbanceModel::IidUniform { half_width } => positive("half_width", *half_width),
            DisturbanceModel::IidGeneralizedGaussian { shape, norm } => {
                if !(shape.is_finite() && *shape >= 1.0) {
                    return Err(Error::UnsupportedShape(*shape));
                }
                positive("norm", *norm)
            }
            DisturbanceModel::GaussAr { coeffs, sigma_w } => {
                positive("sigma_w", *sigma_w)?;
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidDisturbance("coeffs must be finite".into()));
                }
                let radius = ar_spectral_radius(coeffs);
                if radius >= 1.0 {
                    return Err(Error::InvalidDisturbance(format!(
                        "AR polynomial is not stable (largest root magnitude {radius})"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: DisturbanceModel =
            serde_json::from_str(text).map_err(|e| Error::InvalidDisturbance(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn is_gaussian(&self) -> bool {
        match self {
            DisturbanceModel::IidGaussian { .. } | DisturbanceModel::GaussAr { .. } => true,
            DisturbanceModel::IidGeneralizedGaussian { shape, .. } => *shape == 2.0,
            DisturbanceModel::IidUniform { .. } => false,
        }
    }

    /// Every supported variant is (asymptotically) stationary.
    pub fn is_stationary(&self) -> bool {
        true
    }

    /// Marginal variance of an i.i.d. variant, or the stationary variance of
    /// the AR process.
    pub fn variance(&self) -> f64 {
        match self {
            DisturbanceModel::IidGaussian { sigma } => sigma * sigma,
            DisturbanceModel::IidUniform { half_width } => half_width * half_width / 3.0,
            DisturbanceModel::IidGeneralizedGaussian { shape, norm } => {
                let scale = shape.powf(1.0 / shape) * norm;
                scale * scale * gamma(3.0 / shape) / gamma(1.0 / shape)
            }
            DisturbanceModel::GaussAr { coeffs, sigma_w } => {
                ar_stationary_variance(coeffs, *sigma_w)
            }
        }
    }

    /// The same process scaled by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            DisturbanceModel::IidGaussian { sigma } => {
                DisturbanceModel::IidGaussian { sigma: sigma * s }
            }
            DisturbanceModel::IidUniform { half_width } => DisturbanceModel::IidUniform {
                half_width: half_width * s,
            },
            DisturbanceModel::IidGeneralizedGaussian { shape, norm } => {
                DisturbanceModel::IidGeneralizedGaussian {
                    shape: *shape,
                    norm: norm * s,
                }
            }
            DisturbanceModel::GaussAr { coeffs, sigma_w } => DisturbanceModel::GaussAr {
                coeffs: coeffs.clone(),
                sigma_w: sigma_w * s,
            },
        }
    }
}

/// Largest root magnitude of `z^m - α_1 z^{m-1} - ... - α_m`.
fn ar_spectral_radius(coeffs: &[f64]) -> f64 {
    let m = coeffs.len();
    if m == 0 {
        return 0.0;
    }
    let mut companion = DMatrix::zeros(m, m);
    for (j, c) in coeffs.iter().enumerate() {
        companion[(0, j)] = *c;
    }
    for i in 1..m {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Stationary variance of a stable AR process, from the Yule-Walker system.
fn ar_stationary_variance(coeffs: &[f64], sigma_w: f64) -> f64 {
    let m = coeffs.len();
    if m == 0 {
        return sigma_w * sigma_w;
    }
    // Unknowns R(0..=m): R(k) - Σ_i α_i R(|k-1-i|) = δ_k σ_w².
    let mut sys = DMatrix::zeros(m + 1, m + 1);
    let mut rhs = nalgebra::DVector::zeros(m + 1);
    for k in 0..=m {
        sys[(k, k)] += 1.0;
        for (i, a) in coeffs.iter().enumerate() {
            let lag = (k as isize - 1 - i as isize).unsigned_abs();
            sys[(k, lag)] -= a;
        }
    }
    rhs[0] = sigma_w * sigma_w;
    sys.lu().solve(&rhs).map(|r| r[0]).unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------------
// Maximum-entropy densities under an L_p constraint.

/// Density of the maximum-entropy distribution with `(E|x|^p)^{1/p} = μ`:
/// `exp(-|x|^p / (p μ^p)) / (2 Γ((p+1)/p) p^{1/p} μ)`, and for `p = ∞` the
/// uniform density on `[-μ, μ]`.
pub fn max_entropy_pdf(p: NormOrder, mu: f64, x: f64) -> Result<f64> {
    check_mu(mu)?;
    match p {
        NormOrder::Infinity => Ok(if x.abs() <= mu { 0.5 / mu } else { 0.0 }),
        NormOrder::Finite(p) => {
            if p < 1.0 {
                return Err(Error::UnsupportedShape(p));
            }
            let norm = 2.0 * gamma((p + 1.0) / p) * p.powf(1.0 / p) * mu;
            Ok((-(x.abs().powf(p)) / (p * mu.powf(p))).exp() / norm)
        }
    }
}

/// `log₂[2 Γ((p+1)/p) (p e)^{1/p} μ]`; `log₂(2μ)` for `p = ∞`.
pub fn max_entropy_value(p: NormOrder, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    match p {
        NormOrder::Infinity => Ok((2.0 * mu).log2()),
        NormOrder::Finite(p) => {
            if p < 1.0 {
                return Err(Error::UnsupportedShape(p));
            }
            let ln = 2f64.ln() + ln_gamma((p + 1.0) / p) + (p.ln() + 1.0) / p + mu.ln();
            Ok(ln / 2f64.ln())
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDisturbance(format!(
            "L_p norm must be finite and > 0, got {mu}"
        )))
    }
}

/// Differential entropy of `N(0, var)` in bits.
pub fn gaussian_entropy(var: f64) -> f64 {
    0.5 * (2.0 * PI * E * var).log2()
}

// ---------------------------------------------------------------------------
// Sampling

/// Stateful sampler for one realization of a disturbance process. Draws
/// come from the caller's RNG, so a trajectory owns its randomness.
#[derive(Debug, Clone)]
pub struct DisturbanceSampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Gaussian {
        sigma: f64,
    },
    Uniform {
        half_width: f64,
    },
    GenGauss {
        scale: f64,
        inv_shape: f64,
        gamma: Gamma<f64>,
    },
    Ar {
        coeffs: Vec<f64>,
        sigma_w: f64,
        history: Vec<f64>,
        head: usize,
    },
}

impl DisturbanceSampler {
    pub fn new(model: &DisturbanceModel) -> Result<Self> {
        model.validate()?;
        let kind = match model {
            DisturbanceModel::IidGaussian { sigma } => SamplerKind::Gaussian { sigma: *sigma },
            DisturbanceModel::IidUniform { half_width } => SamplerKind::Uniform {
                half_width: *half_width,
            },
            DisturbanceModel::IidGeneralizedGaussian { shape, norm } => SamplerKind::GenGauss {
                // |x| = (p μ^p G)^{1/p} = p^{1/p} μ G^{1/p}
                scale: shape.powf(1.0 / shape) * norm,
                inv_shape: 1.0 / shape,
                gamma: Gamma::new(1.0 / shape, 1.0)
                    .map_err(|e| Error::InvalidDisturbance(e.to_string()))?,
            },
            DisturbanceModel::GaussAr { coeffs, sigma_w } => SamplerKind::Ar {
                coeffs: coeffs.clone(),
                sigma_w: *sigma_w,
                history: vec![0.0; coeffs.len()],
                head: 0,
            },
        };
        Ok(Self { kind })
    }

    /// Clear the process memory (AR history starts from zero).
    pub fn reset(&mut self) {
        if let SamplerKind::Ar { history, head, .. } = &mut self.kind {
            history.iter_mut().for_each(|h| *h = 0.0);
            *head = 0;
        }
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        match &mut self.kind {
            SamplerKind::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                *sigma * z
            }
            SamplerKind::Uniform { half_width } => {
                let u: f64 = rng.random_range(-1.0..=1.0);
                *half_width * u
            }
            SamplerKind::GenGauss {
                scale,
                inv_shape,
                gamma,
            } => {
                let g = gamma.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * *scale * g.powf(*inv_shape)
            }
            SamplerKind::Ar {
                coeffs,
                sigma_w,
                history,
                head,
            } => {
                let m = coeffs.len();
                let z: f64 = StandardNormal.sample(rng);
                let mut d = *sigma_w * z;
                // history[(head + m - 1 - i) % m] holds d_{k-1-i}
                for (i, a) in coeffs.iter().enumerate() {
                    d += a * history[(*head + m - 1 - i) % m];
                }
                if m > 0 {
                    history[*head] = d;
                    *head = (*head + 1) % m;
                }
                d
            }
        }
    }
}

/// `length` consecutive draws, deterministic in `seed`.
pub fn sample(model: &DisturbanceModel, seed: u64, length: usize) -> Result<Vec<f64>> {
    let mut sampler = DisturbanceSampler::new(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..length).map(|_| sampler.next(&mut rng)).collect())
}

// ---------------------------------------------------------------------------
// Entropy summaries

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropySummary {
    /// `limsup_k h(d_k | d_0..d_{k-1})`, bits.
    pub conditional_entropy_rate: f64,
    /// `h_∞(d)`, bits.
    pub entropy_rate: f64,
    /// `J_∞(d) >= 0`, bits.
    pub negentropy_rate: f64,
    pub stationary: bool,
}

impl EntropySummary {
    /// A summary for a stationary process with the given rate and no
    /// negentropy information.
    pub fn from_rate(rate: f64) -> Self {
        Self {
            conditional_entropy_rate: rate,
            entropy_rate: rate,
            negentropy_rate: 0.0,
            stationary: true,
        }
    }
}

fn marginal_entropy(model: &DisturbanceModel) -> f64 {
    match model {
        DisturbanceModel::IidGaussian { sigma } => gaussian_entropy(sigma * sigma),
        DisturbanceModel::IidUniform { half_width } => (2.0 * half_width).log2(),
        DisturbanceModel::IidGeneralizedGaussian { shape, norm } => {
            max_entropy_value(NormOrder::Finite(*shape), *norm).expect("validated")
        }
        DisturbanceModel::GaussAr { sigma_w, .. } => gaussian_entropy(sigma_w * sigma_w),
    }
}

/// Closed-form `limsup h(d_k | d_0..d_{k-1})`. For i.i.d. variants this is the
/// marginal entropy; for AR processes it is the innovation entropy.
pub fn conditional_entropy_rate(model: &DisturbanceModel) -> Result<f64> {
    model.validate()?;
    Ok(marginal_entropy(model))
}

/// `J_∞(d)`: zero for Gaussian variants, otherwise the gap between the
/// Gaussian entropy at the same variance and the actual entropy.
pub fn negentropy_rate(model: &DisturbanceModel) -> Result<f64> {
    model.validate()?;
    if model.is_gaussian() {
        return Ok(0.0);
    }
    Ok((gaussian_entropy(model.variance()) - marginal_entropy(model)).max(0.0))
}

pub fn entropy_summary(model: &DisturbanceModel) -> Result<EntropySummary> {
    let rate = conditional_entropy_rate(model)?;
    Ok(EntropySummary {
        conditional_entropy_rate: rate,
        entropy_rate: rate,
        negentropy_rate: negentropy_rate(model)?,
        stationary: model.is_stationary(),
    })
}

// ---------------------------------------------------------------------------
// Power spectra

#[derive(Debug, Clone, PartialEq)]
enum SpectrumSource {
    Constant(f64),
    Ar {
        coeffs: Vec<f64>,
        innovation_var: f64,
    },
    Tabulated,
}

/// A power spectral density on `[-π, π]` with a tabulation for quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    source: SpectrumSource,
    omega: Vec<f64>,
    values: Vec<f64>,
}

fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -PI + 2.0 * PI * j as f64 / n as f64)
        .collect()
}

fn ar_spectrum_at(coeffs: &[f64], innovation_var: f64, omega: f64) -> f64 {
    // |1 - Σ α_i e^{-jωi}|²
    let (mut re, mut im) = (1.0, 0.0);
    for (i, a) in coeffs.iter().enumerate() {
        let phase = omega * (i + 1) as f64;
        re -= a * phase.cos();
        im += a * phase.sin();
    }
    innovation_var / (re * re + im * im)
}

impl SpectralDensity {
    /// Build from tabulated samples `(ω_j, S_j)` with `ω_j` strictly increasing
    /// inside `[-π, π]`. Values between samples are interpolated linearly with
    /// periodic wrap-around.
    pub fn tabulated(omega: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if omega.len() != values.len() {
            return Err(Error::InvalidSpectrum(format!(
                "{} frequencies but {} values",
                omega.len(),
                values.len()
            )));
        }
        if omega.len() < 2 {
            return Err(Error::InvalidSpectrum("need at least two samples".into()));
        }
        let eps = 1e-12;
        if omega
            .iter()
            .any(|w| !w.is_finite() || *w < -PI - eps || *w > PI + eps)
        {
            return Err(Error::InvalidSpectrum(
                "frequencies must lie in [-pi, pi]".into(),
            ));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpectrum(
                "frequencies must be strictly increasing".into(),
            ));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidSpectrum(format!(
                "S must be finite and >= 0, got {v} at index {i}"
            )));
        }
        Ok(Self {
            source: SpectrumSource::Tabulated,
            omega,
            values,
        })
    }

    /// Parse a CSV with a header row and columns `omega,S`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut omega = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (Some(w), Some(s), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::InvalidSpectrum(format!(
                    "line {}: expected two columns",
                    lineno + 1
                )));
            };
            match (w.parse::<f64>(), s.parse::<f64>()) {
                (Ok(w), Ok(s)) => {
                    omega.push(w);
                    values.push(s);
                }
                _ if omega.is_empty() && lineno == 0 => continue, // header
                _ => {
                    return Err(Error::InvalidSpectrum(format!(
                        "line {}: non-numeric entry",
                        lineno + 1
                    )))
                }
            }
        }
        Self::tabulated(omega, values)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,S\n");
        for (w, s) in self.omega.iter().zip(&self.values) {
            out.push_str(&format!("{w:.17e},{s:.17e}\n"));
        }
        out
    }

    pub fn grid(&self) -> &[f64] {
        &self.omega
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// `S(ω)` for any `ω`, reduced into `[-π, π)`.
    pub fn eval(&self, omega: f64) -> f64 {
        let w = (omega + PI).rem_euclid(2.0 * PI) - PI;
        match &self.source {
            SpectrumSource::Constant(v) => *v,
            SpectrumSource::Ar {
                coeffs,
                innovation_var,
            } => ar_spectrum_at(coeffs, *innovation_var, w),
            SpectrumSource::Tabulated => self.interpolate(w),
        }
    }

    fn interpolate(&self, w: f64) -> f64 {
        let n = self.omega.len();
        let idx = self.omega.partition_point(|&x| x <= w);
        let (i0, i1, w0, w1) = match idx {
            0 => (n - 1, 0, self.omega[n - 1] - 2.0 * PI, self.omega[0]),
            i if i == n => (n - 1, 0, self.omega[n - 1], self.omega[0] + 2.0 * PI),
            i => (i - 1, i, self.omega[i - 1], self.omega[i]),
        };
        if w1 - w0 <= 0.0 {
            return self.values[i0];
        }
        let t = (w - w0) / (w1 - w0);
        self.values[i0] * (1.0 - t) + self.values[i1] * t
    }

    /// `(1/2π) ∫_{-π}^{π} f(S(ω)) dω` by the composite trapezoid rule on the
    /// tabulated grid, closing the period with the wrap-around segment.
    fn periodic_mean(&self, f: impl Fn(f64) -> f64) -> f64 {
        let n = self.omega.len();
        let fv: Vec<f64> = self.values.iter().map(|&s| f(s)).collect();
        let mut acc = 0.0;
        for j in 0..n {
            let (jn, w_next) = if j + 1 < n {
                (j + 1, self.omega[j + 1])
            } else {
                (0, self.omega[0] + 2.0 * PI)
            };
            acc += 0.5 * (fv[j] + fv[jn]) * (w_next - self.omega[j]);
        }
        acc / (2.0 * PI)
    }

    /// `(1/2π) ∫ log₂ S(ω) dω`, the log-spectral mean in bits.
    pub fn log_integral(&self) -> Result<f64> {
        if let Some((index, &value)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v <= 0.0)
        {
            return Err(Error::SpectrumNotLogIntegrable { index, value });
        }
        Ok(self.periodic_mean(f64::log2))
    }

    /// `(1/2π) ∫ S(ω) dω`, the variance implied by the spectrum.
    pub fn mean_power(&self) -> f64 {
        self.periodic_mean(|s| s)
    }
}

/// Tabulate the asymptotic power spectrum on `n` uniform points over `[-π, π)`.
pub fn power_spectrum(model: &DisturbanceModel, n: usize) -> Result<SpectralDensity> {
    model.validate()?;
    if n < 16 || !n.is_multiple_of(2) {
        return Err(Error::InvalidSpectrum(format!(
            "grid size must be even and >= 16, got {n}"
        )));
    }
    let source = match model {
        DisturbanceModel::GaussAr { coeffs, sigma_w } => SpectrumSource::Ar {
            coeffs: coeffs.clone(),
            innovation_var: sigma_w * sigma_w,
        },
        iid => SpectrumSource::Constant(iid.variance()),
    };
    let omega = uniform_grid(n);
    let values = omega
        .iter()
        .map(|&w| match &source {
            SpectrumSource::Constant(v) => *v,
            SpectrumSource::Ar {
                coeffs,
                innovation_var,
            } => ar_spectrum_at(coeffs, *innovation_var, w),
            SpectrumSource::Tabulated => unreachable!(),
        })
        .collect();
    Ok(SpectralDensity {
        source,
        omega,
        values,
    })
}

/// `h_∞ = (1/2π) ∫ log₂ √(2πe S(ω)) dω - J_∞`, in bits.
pub fn szego_entropy_rate(spectrum: &SpectralDensity, negentropy: f64) -> Result<f64> {
    Ok(0.5 * (2.0 * PI * E).log2() + 0.5 * spectrum.log_integral()? - negentropy)
}
