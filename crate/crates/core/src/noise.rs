//! Correlated Gaussian phase noise.
//!
//! The shared phase reference fluctuates as δ(t) = ΔE(t)/ħ (rad/s) with
//! stationary autocovariance σ²·e^{−γ|τ|}. All energies are stored as angular
//! frequencies (ħ ≡ 1). The accumulated phase φ(t) = ∫₀ᵗ δ is Gaussian with
//!
//! ```text
//! Var φ(t) = 2σ²(e^{−γt} + γt − 1)/γ²
//! ```
//!
//! and an N-qubit GHZ coherence picks up N·φ, so the error probability is
//! ε(N, t) = N²·Var φ(t)/4 and the fidelity is F = ½(1 + e^{−2ε}).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{Estimate, MeanAccumulator};
use crate::rng;

/// Stationary variance and correlation rate of the collective noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    sigma2: f64,
    gamma: f64,
}

impl NoiseParams {
    /// `sigma2` in rad²/s², `gamma` in 1/s.
    pub fn new(sigma2: f64, gamma: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid(format!("sigma2 must be finite and >= 0, got {sigma2}")));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be finite and > 0, got {gamma}")));
        }
        Ok(Self { sigma2, gamma })
    }

    /// Noise whose single-qubit Markovian decay time is `t2_single` seconds.
    pub fn from_single_qubit_t2(t2_single: f64, gamma: f64) -> Result<Self> {
        if !(t2_single > 0.0) {
            return Err(Error::invalid(format!("T2 must be > 0, got {t2_single}")));
        }
        Self::new(gamma / t2_single, gamma)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// A decay time that may be infinite (no noise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timescale {
    Finite(f64),
    Infinite,
}

impl Timescale {
    pub fn seconds(self) -> f64 {
        match self {
            Timescale::Finite(t) => t,
            Timescale::Infinite => f64::INFINITY,
        }
    }
}

/// One realization of δ(t) on a uniform grid starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
}

impl Trajectory {
    /// Trapezoidal estimate of φ = ∫ δ dt over the whole trajectory.
    pub fn accumulated_phase(&self) -> f64 {
        trapezoid(&self.samples, self.dt)
    }
}

fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    match samples {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dt * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub points: Vec<(f64, f64)>,
}

/// Exact OU stepping: x ← x·e^{−γdt} + √(σ²(1−e^{−2γdt}))·ξ.
struct OuStepper {
    decay: f64,
    kick: f64,
    x: f64,
}

impl OuStepper {
    fn start<R: Rng>(params: &NoiseParams, dt: f64, rng: &mut R) -> Self {
        let decay = (-params.gamma * dt).exp();
        let kick = (params.sigma2 * -(-2.0 * params.gamma * dt).exp_m1()).sqrt();
        let x0: f64 = rng.sample(StandardNormal);
        Self {
            decay,
            kick,
            x: params.sigma2.sqrt() * x0,
        }
    }

    fn step<R: Rng>(&mut self, rng: &mut R) -> f64 {
        let xi: f64 = rng.sample(StandardNormal);
        self.x = self.x * self.decay + self.kick * xi;
        self.x
    }
}

fn grid(t_max: f64, dt: f64) -> usize {
    (t_max / dt + 1e-9).floor() as usize
}

/// Sample δ(t) on t = 0, dt, 2dt, … ≤ t_max from the stationary OU process.
pub fn ou_sample_trajectory(params: &NoiseParams, t_max: f64, dt: f64, seed: u64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_max > 0.0) || t_max < dt {
        return Err(Error::invalid(format!(
            "need t_max >= dt > 0, got t_max = {t_max}, dt = {dt}"
        )));
    }
    let steps = grid(t_max, dt);
    let mut rng = rng::from_seed(seed);
    let mut ou = OuStepper::start(params, dt, &mut rng);
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(ou.x);
    samples.extend((0..steps).map(|_| ou.step(&mut rng)));
    Ok(Trajectory { dt, samples, seed })
}

/// e^{−x} + x − 1, accurate for small x.
fn ou_shape(x: f64) -> f64 {
    if x < 1e-3 {
        x * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)))
    } else {
        (-x).exp_m1() + x
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be >= 0, got {t}")));
    }
    Ok(())
}

fn check_qubits(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::invalid("qubit count must be >= 1"));
    }
    Ok(())
}

/// Var φ(t) = 2σ²(e^{−γt} + γt − 1)/γ².
pub fn integrated_phase_variance(params: &NoiseParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let g = params.gamma;
    Ok(2.0 * params.sigma2 * ou_shape(g * t) / (g * g))
}

/// ε(N, t) = N²·Var φ(t)/4.
pub fn error_probability(n: usize, params: &NoiseParams, t: f64) -> Result<f64> {
    check_qubits(n)?;
    let nf = n as f64;
    Ok(nf * nf * integrated_phase_variance(params, t)? / 4.0)
}

pub fn fidelity_from_error_probability(eps: f64) -> f64 {
    0.5 * (1.0 + (-2.0 * eps).exp())
}

pub fn fidelity_analytic(n: usize, params: &NoiseParams, t: f64) -> Result<f64> {
    Ok(fidelity_from_error_probability(error_probability(n, params, t)?))
}

pub fn fidelity_curve(n: usize, params: &NoiseParams, times: &[f64]) -> Result<FidelityCurve> {
    let points = times
        .iter()
        .map(|&t| fidelity_analytic(n, params, t).map(|f| (t, f)))
        .collect::<Result<_>>()?;
    Ok(FidelityCurve { points })
}

/// ½(1 + e^{−t/T₂}), valid for γt ≫ 1.
pub fn fidelity_markov_limit(n: usize, params: &NoiseParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let rate = match t2_markovian(n, params)? {
        Timescale::Finite(t2) => t / t2,
        Timescale::Infinite => 0.0,
    };
    Ok(0.5 * (1.0 + (-rate).exp()))
}

/// ½(1 + e^{−½(t/τ)²}), valid for γt ≪ 1.
pub fn fidelity_static_limit(n: usize, params: &NoiseParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let x = match tau_static(n, params)? {
        Timescale::Finite(tau) => t / tau,
        Timescale::Infinite => 0.0,
    };
    Ok(0.5 * (1.0 + (-0.5 * x * x).exp()))
}

/// T₂ = γ/(N²σ²).
pub fn t2_markovian(n: usize, params: &NoiseParams) -> Result<Timescale> {
    check_qubits(n)?;
    if params.sigma2 == 0.0 {
        return Ok(Timescale::Infinite);
    }
    let nf = n as f64;
    Ok(Timescale::Finite(params.gamma / (nf * nf * params.sigma2)))
}

/// τ = 1/(N·σ).
pub fn tau_static(n: usize, params: &NoiseParams) -> Result<Timescale> {
    check_qubits(n)?;
    if params.sigma2 == 0.0 {
        return Ok(Timescale::Infinite);
    }
    Ok(Timescale::Finite(1.0 / (n as f64 * params.sigma2.sqrt())))
}

/// Monte Carlo estimate of the ensemble-averaged fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McFidelity {
    pub estimate: Estimate,
    /// Set when dt > 1/(10γ), where trapezoidal phase accumulation starts to
    /// bias the result.
    pub discretization_warning: bool,
}

/// Average ½(1 + cos Nφ) over `n_traj` independent OU trajectories.
///
/// Trajectory `i` is seeded from `derive_seed(seed, [i])`, so the estimate is
/// independent of how the work is scheduled. If `t` is not a multiple of `dt`
/// the step is shrunk to `t / ceil(t/dt)`.
pub fn mc_fidelity(
    n: usize,
    params: &NoiseParams,
    t: f64,
    n_traj: usize,
    dt: f64,
    seed: u64,
) -> Result<McFidelity> {
    check_qubits(n)?;
    check_time(t)?;
    if n_traj < 1 {
        return Err(Error::invalid("n_traj must be >= 1"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
    }
    let discretization_warning = dt > 1.0 / (10.0 * params.gamma);
    let steps = (t / dt - 1e-9).ceil().max(0.0) as usize;
    let nf = n as f64;

    let fidelity_of = |i: usize| -> f64 {
        if steps == 0 {
            return 1.0;
        }
        let h = t / steps as f64;
        let mut rng = rng::from_seed(rng::derive_seed(seed, &[i as u64]));
        let mut ou = OuStepper::start(params, h, &mut rng);
        let mut phase = 0.5 * ou.x;
        for _ in 1..steps {
            phase += ou.step(&mut rng);
        }
        phase += 0.5 * ou.step(&mut rng);
        0.5 * (1.0 + (nf * phase * h).cos())
    };

    const CHUNK: usize = 4096;
    let partials: Vec<MeanAccumulator> = (0..n_traj.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n_traj)).map(fidelity_of).collect())
        .collect();
    let total = partials
        .iter()
        .fold(MeanAccumulator::default(), |acc, p| acc.merge(p));
    Ok(McFidelity {
        estimate: total.estimate(),
        discretization_warning,
    })
}
