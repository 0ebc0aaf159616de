//! Monte Carlo closed-loop simulation and empirical certification of bounds.
//!
//! Loop semantics at each step `k`:
//!
//! ```text
//! y_k = C x_k
//! z_k = K(y_0..y_k)
//! e_k = z_k + d_k
//! x_{k+1} = A x_k + B e_k
//! ```
//!
//! Trajectory `m` draws from its own stream seeded with `seed + m`. Work is
//! split into fixed-size blocks of trajectories and the block partial sums are
//! combined in block order, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;
use crate::disturbance::{DisturbanceModel, DisturbanceSampler};
use crate::error::{Error, Result};
use crate::norm::NormOrder;
use crate::plant::StateSpaceModel;

const BLOCK: usize = 256;
const BOOTSTRAP_RESAMPLES: usize = 200;
const CONTROLLER_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const BOOTSTRAP_STREAM: u64 = 0xd1b5_4a32_d192_ed03;

/// A causal output-feedback controller `z_k = K_k(y_0..y_k)`.
pub trait CausalController {
    /// Clear internal state before a new trajectory.
    fn reset(&mut self);

    /// Seed any internal randomness. Deterministic controllers ignore it.
    fn reseed(&mut self, _seed: u64) {}

    fn step(&mut self, y: f64) -> f64;
}

/// `z ≡ 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroController;

impl CausalController for ZeroController {
    fn reset(&mut self) {}

    fn step(&mut self, _y: f64) -> f64 {
        0.0
    }
}

/// `z_k = -c y_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticGain(pub f64);

impl CausalController for StaticGain {
    fn reset(&mut self) {}

    fn step(&mut self, y: f64) -> f64 {
        -self.0 * y
    }
}

/// Difference equation `z_k = Σ_{i>=0} b_i y_{k-i} - Σ_{j>=1} a_j z_{k-j}`,
/// i.e. the transfer function `(b_0 + b_1 q⁻¹ + ...) / (1 + a_1 q⁻¹ + ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    y_hist: Vec<f64>,
    z_hist: Vec<f64>,
}

impl LinearFilter {
    pub fn new(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::InvalidConfig(
                "ARMA controller needs at least one b coefficient".into(),
            ));
        }
        if b.iter().chain(&a).any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig(
                "ARMA coefficients must be finite".into(),
            ));
        }
        let (nb, na) = (b.len(), a.len());
        Ok(Self {
            b,
            a,
            y_hist: vec![0.0; nb],
            z_hist: vec![0.0; na],
        })
    }

    pub fn numerator(&self) -> &[f64] {
        &self.b
    }

    pub fn denominator(&self) -> &[f64] {
        &self.a
    }
}

impl CausalController for LinearFilter {
    fn reset(&mut self) {
        self.y_hist.iter_mut().for_each(|v| *v = 0.0);
        self.z_hist.iter_mut().for_each(|v| *v = 0.0);
    }

    fn step(&mut self, y: f64) -> f64 {
        // y_hist[i] = y_{k-i}, z_hist[j] = z_{k-1-j}
        self.y_hist.rotate_right(1);
        self.y_hist[0] = y;
        let mut z: f64 = self.b.iter().zip(&self.y_hist).map(|(b, y)| b * y).sum();
        z -= self
            .a
            .iter()
            .zip(&self.z_hist)
            .map(|(a, z)| a * z)
            .sum::<f64>();
        if !self.z_hist.is_empty() {
            self.z_hist.rotate_right(1);
            self.z_hist[0] = z;
        }
        z
    }
}

/// The built-in controllers behind one type.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinController {
    Zero(ZeroController),
    Gain(StaticGain),
    Arma(LinearFilter),
}

impl CausalController for BuiltinController {
    fn reset(&mut self) {
        match self {
            BuiltinController::Zero(c) => c.reset(),
            BuiltinController::Gain(c) => c.reset(),
            BuiltinController::Arma(c) => c.reset(),
        }
    }

    fn step(&mut self, y: f64) -> f64 {
        match self {
            BuiltinController::Zero(c) => c.step(y),
            BuiltinController::Gain(c) => c.step(y),
            BuiltinController::Arma(c) => c.step(y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Zero,
    /// Each state coordinate i.i.d. `N(0, std²)`, independent of the disturbance.
    Gaussian { std: f64 },
}

fn default_divergence_threshold() -> f64 {
    1e12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Number of simulated steps `K`.
    pub horizon: usize,
    /// Number of Monte Carlo trajectories `M`.
    pub trajectories: usize,
    /// Steps excluded from the tail window. Defaults to `K/2`, capped so the
    /// tail window fits.
    #[serde(default)]
    pub burn_in: Option<usize>,
    /// Length `W` of the tail window over which the limsup is approximated.
    /// Defaults to `K/5`.
    #[serde(default)]
    pub tail_window: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub p_list: Vec<NormOrder>,
    #[serde(default = "default_divergence_threshold")]
    pub divergence_threshold: f64,
    #[serde(default)]
    pub initial_state: InitialState,
}

impl SimulationConfig {
    pub fn new(horizon: usize, trajectories: usize, seed: u64, p_list: Vec<NormOrder>) -> Self {
        Self {
            horizon,
            trajectories,
            burn_in: None,
            tail_window: None,
            seed,
            p_list,
            divergence_threshold: default_divergence_threshold(),
            initial_state: InitialState::Zero,
        }
    }

    pub fn resolved_tail_window(&self) -> usize {
        self.tail_window.unwrap_or((self.horizon / 5).max(1))
    }

    pub fn resolved_burn_in(&self) -> usize {
        let w = self.resolved_tail_window();
        self.burn_in
            .unwrap_or_else(|| (self.horizon / 2).min(self.horizon.saturating_sub(w)))
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.resolved_tail_window();
        let burn = self.resolved_burn_in();
        if self.trajectories == 0 {
            return Err(Error::InvalidConfig("trajectories must be >= 1".into()));
        }
        if w == 0 {
            return Err(Error::InvalidConfig("tail_window must be >= 1".into()));
        }
        if burn + w > self.horizon {
            return Err(Error::InvalidConfig(format!(
                "burn_in ({burn}) + tail_window ({w}) exceeds horizon ({})",
                self.horizon
            )));
        }
        if self.divergence_threshold.is_nan() || self.divergence_threshold <= 0.0 {
            return Err(Error::InvalidConfig(
                "divergence_threshold must be > 0".into(),
            ));
        }
        if self.p_list.is_empty() {
            return Err(Error::InvalidConfig("p_list must not be empty".into()));
        }
        if let InitialState::Gaussian { std } = self.initial_state {
            if !(std.is_finite() && std >= 0.0) {
                return Err(Error::InvalidConfig(
                    "initial_state std must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per-trajectory tail summaries used for bootstrap error bars: for finite
/// `p` the tail-window mean of `|s_k|^p`, for `p = ∞` the tail-window max of
/// `|s_k|`. Diverged trajectories are omitted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryTails {
    pub error: Vec<Vec<f64>>,
    pub output: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub horizon: usize,
    pub trajectories: usize,
    pub burn_in: usize,
    pub tail_window: usize,
    pub seed: u64,
    pub p_list: Vec<NormOrder>,
    /// `error_norms[i][k]` is the empirical `‖e_k‖_{p_i}`.
    pub error_norms: Vec<Vec<f64>>,
    pub output_norms: Vec<Vec<f64>>,
    /// Max over the tail window of the per-step norms, per `p`.
    pub tail_error: Vec<f64>,
    pub tail_output: Vec<f64>,
    /// Sample mean of `x_kᵀ x_k`; infinite once any trajectory has diverged.
    pub state_mean_square: Vec<f64>,
    pub stable: bool,
    pub diverged_trajectories: usize,
    #[serde(skip)]
    pub tails: TrajectoryTails,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Error,
    Output,
}

impl SimulationResult {
    fn index_of(&self, p: NormOrder) -> Option<usize> {
        self.p_list.iter().position(|q| *q == p)
    }

    pub fn tail_norm(&self, signal: Signal, p: NormOrder) -> Option<f64> {
        let i = self.index_of(p)?;
        Some(match signal {
            Signal::Error => self.tail_error[i],
            Signal::Output => self.tail_output[i],
        })
    }

    /// CSV with columns `k`, then `e_p<p>` for each `p`, then `y_p<p>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k");
        for prefix in ["e", "y"] {
            for p in &self.p_list {
                out.push_str(&format!(",{prefix}_p{}", p.label()));
            }
        }
        out.push('\n');
        for k in 0..self.horizon {
            out.push_str(&k.to_string());
            for series in self.error_norms.iter().chain(&self.output_norms) {
                out.push_str(&format!(",{}", series[k]));
            }
            out.push('\n');
        }
        out
    }
}

/// `((1/M) Σ |x_i|^p)^{1/p}`, or `max |x_i|` at `p = ∞`.
pub fn empirical_lp(samples: &[f64], p: NormOrder) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(match p {
        NormOrder::Infinity => samples.iter().fold(0.0, |m, x| m.max(x.abs())),
        NormOrder::Finite(p) => {
            let mean = samples.iter().map(|x| x.abs().powf(p)).sum::<f64>() / samples.len() as f64;
            mean.powf(1.0 / p)
        }
    })
}

fn abs_pow(x: f64, p: NormOrder) -> f64 {
    match p {
        NormOrder::Infinity => x.abs(),
        NormOrder::Finite(2.0) => x * x,
        NormOrder::Finite(1.0) => x.abs(),
        NormOrder::Finite(p) => x.abs().powf(p),
    }
}

/// Partial sums over a block of trajectories.
struct BlockSums {
    /// `[p][k]`: Σ|e|^p for finite p, max|e| for p = ∞.
    error: Vec<Vec<f64>>,
    output: Vec<Vec<f64>>,
    state_sq: Vec<f64>,
    alive: Vec<usize>,
    tail_error: Vec<Vec<f64>>,
    tail_output: Vec<Vec<f64>>,
    diverged: usize,
}

impl BlockSums {
    fn new(np: usize, horizon: usize) -> Self {
        Self {
            error: vec![vec![0.0; horizon]; np],
            output: vec![vec![0.0; horizon]; np],
            state_sq: vec![0.0; horizon],
            alive: vec![0; horizon],
            tail_error: vec![Vec::new(); np],
            tail_output: vec![Vec::new(); np],
            diverged: 0,
        }
    }

    fn absorb(&mut self, other: BlockSums, p_list: &[NormOrder]) {
        for (i, p) in p_list.iter().enumerate() {
            let merge = |acc: &mut Vec<f64>, add: &[f64]| {
                for (a, b) in acc.iter_mut().zip(add) {
                    if p.is_infinite() {
                        *a = a.max(*b);
                    } else {
                        *a += b;
                    }
                }
            };
            merge(&mut self.error[i], &other.error[i]);
            merge(&mut self.output[i], &other.output[i]);
            self.tail_error[i].extend_from_slice(&other.tail_error[i]);
            self.tail_output[i].extend_from_slice(&other.tail_output[i]);
        }
        for (a, b) in self.state_sq.iter_mut().zip(&other.state_sq) {
            *a += b;
        }
        for (a, b) in self.alive.iter_mut().zip(&other.alive) {
            *a += b;
        }
        self.diverged += other.diverged;
    }
}

struct Plant {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Plant {
    fn from_model(m: &StateSpaceModel) -> Self {
        let n = m.state_dim();
        Self {
            n,
            a: (0..n * n).map(|idx| m.a()[(idx / n, idx % n)]).collect(),
            b: m.b().iter().copied().collect(),
            c: m.c().iter().copied().collect(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_block<C: CausalController + Clone>(
    plant: &Plant,
    controller: &C,
    dist: &DisturbanceModel,
    cfg: &SimulationConfig,
    first: usize,
    count: usize,
) -> Result<BlockSums> {
    let np = cfg.p_list.len();
    let horizon = cfg.horizon;
    let tail_start = horizon - cfg.resolved_tail_window();
    let tail_len = (horizon - tail_start) as f64;
    let mut sums = BlockSums::new(np, horizon);
    let mut sampler = DisturbanceSampler::new(dist)?;
    let mut ctrl = controller.clone();
    let n = plant.n;
    let mut x = vec![0.0; n];
    let mut x_next = vec![0.0; n];
    let mut tail_e = vec![0.0f64; np];
    let mut tail_y = vec![0.0f64; np];

    for m in first..first + count {
        let stream = cfg.seed.wrapping_add(m as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        ctrl.reset();
        ctrl.reseed(stream ^ CONTROLLER_STREAM);
        sampler.reset();
        match cfg.initial_state {
            InitialState::Zero => x.iter_mut().for_each(|v| *v = 0.0),
            InitialState::Gaussian { std } => {
                for v in x.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = std * z;
                }
            }
        }
        tail_e.iter_mut().for_each(|v| *v = 0.0);
        tail_y.iter_mut().for_each(|v| *v = 0.0);

        let mut diverged = false;
        for k in 0..horizon {
            let y: f64 = plant.c.iter().zip(&x).map(|(c, x)| c * x).sum();
            let z = ctrl.step(y);
            let d = sampler.next(&mut rng);
            let e = z + d;
            let x_sq: f64 = x.iter().map(|v| v * v).sum();
            if !(e.is_finite() && y.is_finite() && x_sq.is_finite()) {
                diverged = true;
                break;
            }
            sums.alive[k] += 1;
            sums.state_sq[k] += x_sq;
            for (i, &p) in cfg.p_list.iter().enumerate() {
                let (ep, yp) = (abs_pow(e, p), abs_pow(y, p));
                if p.is_infinite() {
                    sums.error[i][k] = sums.error[i][k].max(ep);
                    sums.output[i][k] = sums.output[i][k].max(yp);
                } else {
                    sums.error[i][k] += ep;
                    sums.output[i][k] += yp;
                }
                if k >= tail_start {
                    if p.is_infinite() {
                        tail_e[i] = tail_e[i].max(ep);
                        tail_y[i] = tail_y[i].max(yp);
                    } else {
                        tail_e[i] += ep / tail_len;
                        tail_y[i] += yp / tail_len;
                    }
                }
            }
            for (r, xn) in x_next.iter_mut().enumerate() {
                let row = &plant.a[r * n..(r + 1) * n];
                *xn = row.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() + plant.b[r] * e;
            }
            std::mem::swap(&mut x, &mut x_next);
        }
        if diverged {
            sums.diverged += 1;
        } else {
            for i in 0..np {
                sums.tail_error[i].push(tail_e[i]);
                sums.tail_output[i].push(tail_y[i]);
            }
        }
    }
    Ok(sums)
}

/// Simulate `cfg.trajectories` independent closed loops and aggregate the
/// empirical norms of `e_k` and `y_k`.
///
/// Runs on the current rayon pool. Overflowing trajectories are dropped from
/// the norm estimates and mark the run unstable; if every trajectory
/// overflows the loop is reported as unstable with an error.
pub fn run_closed_loop<C>(
    model: &StateSpaceModel,
    controller: &C,
    dist: &DisturbanceModel,
    cfg: &SimulationConfig,
) -> Result<SimulationResult>
where
    C: CausalController + Clone + Send + Sync,
{
    cfg.validate()?;
    dist.validate()?;
    let plant = Plant::from_model(model);
    let np = cfg.p_list.len();
    let horizon = cfg.horizon;
    let blocks = cfg.trajectories.div_ceil(BLOCK);

    let partials = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let first = b * BLOCK;
            let count = BLOCK.min(cfg.trajectories - first);
            simulate_block(&plant, controller, dist, cfg, first, count)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = BlockSums::new(np, horizon);
    for part in partials {
        total.absorb(part, &cfg.p_list);
    }
    if total.diverged == cfg.trajectories {
        return Err(Error::UnstableLoop(cfg.trajectories));
    }

    let finish = |sums: &[Vec<f64>]| -> Vec<Vec<f64>> {
        cfg.p_list
            .iter()
            .zip(sums)
            .map(|(p, series)| {
                series
                    .iter()
                    .zip(&total.alive)
                    .map(|(&s, &alive)| match p {
                        NormOrder::Infinity => s,
                        NormOrder::Finite(p) => (s / alive.max(1) as f64).powf(1.0 / p),
                    })
                    .collect()
            })
            .collect()
    };
    let error_norms = finish(&total.error);
    let output_norms = finish(&total.output);

    let tail_window = cfg.resolved_tail_window();
    let tail_max = |series: &Vec<Vec<f64>>| -> Vec<f64> {
        series
            .iter()
            .map(|s| {
                s[horizon - tail_window..]
                    .iter()
                    .fold(0.0, |m: f64, v| m.max(*v))
            })
            .collect()
    };
    let tail_error = tail_max(&error_norms);
    let tail_output = tail_max(&output_norms);

    let state_mean_square: Vec<f64> = total
        .state_sq
        .iter()
        .zip(&total.alive)
        .map(|(&s, &alive)| {
            if alive < cfg.trajectories {
                f64::INFINITY
            } else {
                s / alive as f64
            }
        })
        .collect();
    let stable = total.diverged == 0
        && state_mean_square
            .iter()
            .all(|&v| v <= cfg.divergence_threshold);

    Ok(SimulationResult {
        horizon,
        trajectories: cfg.trajectories,
        burn_in: cfg.resolved_burn_in(),
        tail_window,
        seed: cfg.seed,
        p_list: cfg.p_list.clone(),
        error_norms,
        output_norms,
        tail_error,
        tail_output,
        state_mean_square,
        stable,
        diverged_trajectories: total.diverged,
        tails: TrajectoryTails {
            error: total.tail_error,
            output: total.tail_output,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub signal: Signal,
    pub p: NormOrder,
    pub tail_norm: f64,
    pub bound: f64,
    pub ratio: f64,
    pub margin_stderr: f64,
    pub satisfied: bool,
}

/// Compare the tail empirical norm with a bound.
///
/// `margin_stderr` is the bootstrap standard error of the ratio, resampling
/// whole trajectories. At `p = ∞` the sample maximum underestimates the
/// essential supremum, so the margin is at least the mean spacing of the ten
/// largest trajectory maxima (relative to the bound).
pub fn verify_bound(
    result: &SimulationResult,
    report: &BoundReport,
    which: Signal,
) -> Result<Certification> {
    if !result.stable {
        return Err(Error::CertificationRefused(
            "closed loop is not mean-square stable; the bound presumes a stabilizing controller"
                .into(),
        ));
    }
    let idx = result.index_of(report.p).ok_or_else(|| {
        Error::CertificationRefused(format!("norm order {} was not simulated", report.p))
    })?;
    let (tail_norm, tails) = match which {
        Signal::Error => (result.tail_error[idx], &result.tails.error[idx]),
        Signal::Output => (result.tail_output[idx], &result.tails.output[idx]),
    };
    let bound = report.bound_value;
    if bound.is_nan() || bound <= 0.0 {
        return Err(Error::CertificationRefused(format!(
            "bound must be positive, got {bound}"
        )));
    }
    let ratio = tail_norm / bound;

    let mut rng = ChaCha8Rng::seed_from_u64(result.seed ^ BOOTSTRAP_STREAM);
    let stat = |values: &mut dyn Iterator<Item = f64>| -> f64 {
        match report.p {
            NormOrder::Infinity => values.fold(0.0, f64::max),
            NormOrder::Finite(p) => {
                let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                (sum / count.max(1) as f64).powf(1.0 / p)
            }
        }
    };
    let mut margin_stderr = 0.0;
    if tails.len() > 1 {
        let m = tails.len();
        let draws: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .map(|_| {
                let mut it = (0..m).map(|_| tails[rng.random_range(0..m)]);
                stat(&mut it)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        margin_stderr = var.sqrt() / bound;

        if report.p.is_infinite() {
            let mut sorted = tails.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let top = 10.min(m - 1);
            let spacing = (sorted[0] - sorted[top]) / top as f64;
            margin_stderr = margin_stderr.max(spacing / bound);
        }
    }
    Ok(Certification {
        signal: which,
        p: report.p,
        tail_norm,
        bound,
        ratio,
        margin_stderr,
        satisfied: ratio >= 1.0 - 3.0 * margin_stderr,
    })
}
