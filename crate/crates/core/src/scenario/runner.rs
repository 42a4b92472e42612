use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use super::config::{Detection, ExperimentConfig, InitialState, ScenarioKind};
use super::report::{
    decay_csv, scaling_csv, Artifacts, CharacterizeReport, DecayReport, DecayRow, DfsReport, ScalingRate, ScalingReport,
    ScalingRow,
};
use crate::error::{Error, Result};
use crate::estimation::lsq::weighted_linear_fit;
use crate::estimation::{
    bayes_populations_pmt, bootstrap_criteria, bootstrap_parity_fit, coherence_to_error_probability,
    criterion_distillability, criterion_fidelity_threshold, criterion_genuine_entanglement, estimate_populations_camera,
    fit_decay_timescale, fit_parity_curve, fit_pmt_parity_curve, fit_scaling_exponent, ghz_fidelity, DecayCurve,
    DecayPoint, DiagonalPopulations, Estimate, ScalingPoint,
};
use crate::measurement::{
    bright_count_distribution, measure_populations_direct, sample_parity_dataset, sample_pmt_counts,
    sample_pmt_parity_dataset, write_camera_csv, write_pmt_csv,
};
use crate::noise::{error_probability, NoiseParams};
use crate::oracle::StateVector;
use crate::register::{Bitstring, BranchPairState};
use crate::rng::derive_seed;

// Substream labels.
const POPULATIONS: u64 = 1;
const PARITY: u64 = 2;
const PARITY_BOOTSTRAP: u64 = 3;
const CRITERIA_BOOTSTRAP: u64 = 4;
const DECAY: u64 = 5;

/// Waiting-time channels: collective dephasing, then spontaneous decay.
fn evolve(state: &BranchPairState, noise: Option<&NoiseParams>, t1: Option<f64>, t: f64) -> Result<BranchPairState> {
    let mut s = match noise {
        Some(p) => state.apply_gaussian_dephasing(p, t)?,
        None => *state,
    };
    if let Some(t1) = t1 {
        s = s.apply_amplitude_damping(t, t1)?;
    }
    Ok(s)
}

/// Time at which the model coherence first falls to 1/e of its initial
/// value, or `None` if it never does.
pub fn coherence_time(state: &BranchPairState, noise: Option<&NoiseParams>, t1: Option<f64>) -> Result<Option<f64>> {
    let c0 = state.coherence();
    if c0 <= 0.0 {
        return Ok(None);
    }
    let target = c0 / std::f64::consts::E;
    let below = |t: f64| evolve(state, noise, t1, t).map(|s| s.coherence() <= target);
    let mut hi = 1e-9;
    while !below(hi)? {
        hi *= 2.0;
        if hi > 1e15 {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

fn wait_times(
    cfg: &ExperimentConfig,
    state: &BranchPairState,
    noise: Option<&NoiseParams>,
    t1: Option<f64>,
) -> Result<Vec<f64>> {
    if let Some(times) = &cfg.wait_times_s {
        return Ok(times.clone());
    }
    let tc = coherence_time(state, noise, t1)?.ok_or_else(|| {
        Error::config("wait_times_s", "the state does not decay under the configured channels; give explicit times")
    })?;
    let (lo, hi, m) = (cfg.wait_min_coherence_times, cfg.wait_max_coherence_times, cfg.wait_points);
    Ok((0..m)
        .map(|i| tc * lo * (hi / lo).powf(i as f64 / (m - 1) as f64))
        .collect())
}

fn prepared_ghz(cfg: &ExperimentConfig, n: usize) -> Result<BranchPairState> {
    if cfg.prepare_via_ms {
        check_ms_preparation(n)?;
    }
    match (cfg.degrade_populations, cfg.degrade_coherence) {
        (Some(p), Some(c)) => BranchPairState::ghz_with(n, p, c),
        _ => BranchPairState::ghz_ideal(n),
    }
}

/// Build the GHZ state with a statevector MS gate and confirm it matches the
/// compact model's ideal state.
fn check_ms_preparation(n: usize) -> Result<()> {
    let sv = StateVector::basis(n, Bitstring::ones(n))?.apply_ms(FRAC_PI_2, 0.0);
    let fid = sv.ghz_family_fidelity();
    if fid < 1.0 - 1e-9 {
        return Err(Error::Internal(format!("MS preparation reached GHZ fidelity {fid} for n = {n}")));
    }
    Ok(())
}

/// Parity-amplitude estimate of the coherence C = 2|c|.
fn measure_coherence(cfg: &ExperimentConfig, state: &BranchPairState, seed: u64) -> Result<Estimate> {
    if cfg.analytic {
        return Ok(Estimate::exact(state.coherence()));
    }
    let phis = cfg.phis(state.n());
    let fit = match cfg.detection {
        Detection::Camera => fit_parity_curve(&sample_parity_dataset(state, &phis, cfg.shots_per_setting, seed)?)?,
        Detection::Pmt => {
            let ds = sample_pmt_parity_dataset(state, &phis, cfg.shots_per_setting, cfg.pmt_rates(), seed)?;
            fit_pmt_parity_curve(&ds, cfg.pmt_rates())?
        }
    };
    Ok(fit.coherence)
}

fn state_label(kind: InitialState) -> (u64, &'static str) {
    match kind {
        InitialState::Ghz => (0, "ghz"),
        InitialState::Dfs => (1, "dfs"),
    }
}

/// Coherence against waiting time for `state0`, with a decay fit.
fn decay_run(
    cfg: &ExperimentConfig,
    kind: InitialState,
    state0: &BranchPairState,
    times: &[f64],
) -> Result<DecayReport> {
    let seed = cfg.seed()?;
    let noise = cfg.noise()?;
    let n = state0.n();
    let (label, name) = state_label(kind);
    let c_prep = Estimate::exact(state0.coherence());
    let rows = times
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let s = evolve(state0, noise.as_ref(), cfg.t1_s, t)?;
            let c = measure_coherence(cfg, &s, derive_seed(seed, &[DECAY, label, n as u64, i as u64]))?;
            let eps = coherence_to_error_probability(c, c_prep).ok();
            Ok(DecayRow {
                t_s: t,
                coherence: c.value,
                coherence_err: c.std_error,
                eps: eps.map(|e| e.value),
                eps_err: eps.map(|e| e.std_error),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let last = times.last().copied().unwrap_or(0.0);
    let decays = evolve(state0, noise.as_ref(), cfg.t1_s, last)?.coherence() < state0.coherence() * (1.0 - 1e-12);
    let fit = if decays {
        let points = rows
            .iter()
            .map(|r| DecayPoint {
                t: r.t_s,
                coherence: Estimate::new(r.coherence, r.coherence_err, cfg.shots_per_setting),
            })
            .collect();
        Some(fit_decay_timescale(&DecayCurve::new(points)?, cfg.decay_model)?)
    } else {
        None
    };
    Ok(DecayReport {
        n,
        state: name.to_string(),
        rows,
        fit,
    })
}

fn initial_state(cfg: &ExperimentConfig, kind: InitialState, n: usize) -> Result<BranchPairState> {
    match kind {
        InitialState::Ghz => prepared_ghz(cfg, n),
        InitialState::Dfs => BranchPairState::dfs_state(n),
    }
}

fn require_n(cfg: &ExperimentConfig) -> Result<usize> {
    cfg.n.ok_or_else(|| Error::config("n", "required"))
}

pub fn run_ghz_characterize(cfg: &ExperimentConfig) -> Result<(CharacterizeReport, Artifacts)> {
    cfg.validate()?;
    let n = require_n(cfg)?;
    let seed = cfg.seed()?;
    let state = prepared_ghz(cfg, n)?;
    let mut artifacts = Artifacts::default();

    let (p, c, criteria_tail) = if cfg.analytic {
        let p = Estimate::exact(state.populations());
        let c = Estimate::exact(state.coherence());
        let pops = DiagonalPopulations::from_state(&state)?;
        let tail = vec![
            criterion_distillability(c, &pops)?,
            criterion_genuine_entanglement(c, &pops)?,
        ];
        (p, c, tail)
    } else {
        let phis = cfg.phis(n);
        match cfg.detection {
            Detection::Camera => {
                let direct = measure_populations_direct(&state, cfg.population_shots, derive_seed(seed, &[POPULATIONS]))?;
                let p = estimate_populations_camera(&direct, n)?;
                let parity = sample_parity_dataset(&state, &phis, cfg.shots_per_setting, derive_seed(seed, &[PARITY]))?;
                let fit = fit_parity_curve(&parity)?;
                let boot =
                    bootstrap_parity_fit(&parity, cfg.bootstrap_resamples, derive_seed(seed, &[PARITY_BOOTSTRAP]))?;
                let c = Estimate::new(fit.coherence.value, boot.std_error, fit.coherence.n_samples);
                let tail = bootstrap_criteria(
                    &direct,
                    &parity,
                    c,
                    cfg.bootstrap_resamples,
                    derive_seed(seed, &[CRITERIA_BOOTSTRAP]),
                )?;
                let mut raw = Vec::new();
                write_camera_csv(&parity, &mut raw)?;
                artifacts.insert("parity_raw.csv", raw);
                (p, c, tail)
            }
            Detection::Pmt => {
                let rates = cfg.pmt_rates();
                let counts = sample_pmt_counts(
                    &bright_count_distribution(&state),
                    rates,
                    cfg.population_shots,
                    derive_seed(seed, &[POPULATIONS]),
                )?;
                let p = bayes_populations_pmt(&counts, rates, n)?.populations;
                let parity = sample_pmt_parity_dataset(&state, &phis, cfg.shots_per_setting, rates, derive_seed(seed, &[PARITY]))?;
                let c = fit_pmt_parity_curve(&parity, rates)?.coherence;
                let mut raw = Vec::new();
                write_pmt_csv(&parity, &mut raw)?;
                artifacts.insert("parity_raw.csv", raw);
                // Bright counts cannot tell which ions are bright, so only
                // the fidelity threshold applies.
                (p, c, Vec::new())
            }
        }
    };
    let f = ghz_fidelity(p, c);
    let mut criteria = vec![criterion_fidelity_threshold(f)];
    criteria.extend(criteria_tail);
    let report = CharacterizeReport {
        n,
        p: p.value,
        p_err: p.std_error,
        c: c.value,
        c_err: c.std_error,
        f: f.value,
        f_err: f.std_error,
        criteria,
    };
    artifacts.insert_json("report.json", &report)?;
    Ok((report, artifacts))
}

pub fn run_ghz_decay(cfg: &ExperimentConfig) -> Result<(DecayReport, Artifacts)> {
    cfg.validate()?;
    let n = require_n(cfg)?;
    let state0 = initial_state(cfg, cfg.initial_state, n)?;
    let times = wait_times(cfg, &state0, cfg.noise()?.as_ref(), cfg.t1_s)?;
    let report = decay_run(cfg, cfg.initial_state, &state0, &times)?;
    let mut artifacts = Artifacts::default();
    artifacts.insert("decay.csv", decay_csv(&report.rows)?);
    artifacts.insert_json("report.json", &report)?;
    Ok((report, artifacts))
}

/// Fit ln C(t) = ln C₀ − 2·r·ε(1, t) [− b·t with spontaneous decay] and return
/// r with its standard error.
fn fit_rate(report: &DecayReport, noise: &NoiseParams, with_damping: bool) -> Result<Estimate> {
    if let Some(r) = report.rows.iter().find(|r| !(r.coherence > 0.0)) {
        return Err(Error::FitFailure(format!(
            "coherence {} at t = {} s leaves ln C undefined (n = {})",
            r.coherence, r.t_s, report.n
        )));
    }
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let mut x = vec![1.0, -2.0 * error_probability(1, noise, r.t_s)?];
            if with_damping {
                x.push(-r.t_s);
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = report.rows.iter().map(|r| r.coherence.ln()).collect();
    let absolute = report.rows.iter().all(|r| r.coherence_err > 0.0);
    let w: Vec<f64> = report
        .rows
        .iter()
        .map(|r| if absolute { (r.coherence / r.coherence_err).powi(2) } else { 1.0 })
        .collect();
    let fit = weighted_linear_fit(&rows, &y, &w)?;
    let cov = fit.scaled_cov(absolute);
    let samples = report.rows.len();
    Ok(Estimate::new(fit.params[1], cov[(1, 1)].max(0.0).sqrt(), samples))
}

pub fn run_scaling_study(cfg: &ExperimentConfig) -> Result<(ScalingReport, Artifacts)> {
    cfg.validate()?;
    let noise = cfg.noise()?.ok_or_else(|| Error::config("sigma2_rad2_per_s2", "required"))?;
    let n_list = cfg.n_list.clone().ok_or_else(|| Error::config("n_list", "required"))?;
    let mut artifacts = Artifacts::default();

    let runs = n_list
        .par_iter()
        .map(|&n| {
            let state0 = BranchPairState::ghz_ideal(n)?;
            let times = wait_times(cfg, &state0, Some(&noise), cfg.t1_s)?;
            let report = decay_run(cfg, InitialState::Ghz, &state0, &times)?;
            let rate = fit_rate(&report, &noise, cfg.t1_s.is_some())?;
            Ok((n, report, rate))
        })
        .collect::<Result<Vec<_>>>()?;

    let r1 = runs.iter().find(|(n, ..)| *n == 1).map(|(.., r)| *r).expect("validated n_list");
    if !(r1.value > 0.0) {
        return Err(Error::FitFailure(format!("single-qubit error rate {} is not positive", r1.value)));
    }
    let rel = |e: &Estimate| if e.value != 0.0 { e.std_error / e.value.abs() } else { 0.0 };
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut rates = Vec::new();
    for (n, report, rate) in &runs {
        let ratio = rate.value / r1.value;
        let full_err = if *n == 1 { 0.0 } else { ratio.abs() * rel(rate).hypot(rel(&r1)) };
        rows.push(ScalingRow {
            n: *n,
            eps_ratio: ratio,
            eps_ratio_err: full_err,
        });
        // The common factor 1/r₁ is absorbed by the fitted intercept, so each
        // point only carries its own rate's uncertainty.
        points.push(ScalingPoint {
            n: *n,
            ratio: Estimate::new(ratio, ratio.abs() * rel(rate), rate.n_samples),
        });
        rates.push(ScalingRate {
            n: *n,
            rate: rate.value,
            rate_err: rate.std_error,
            wait_times_s: report.rows.iter().map(|r| r.t_s).collect(),
        });
        artifacts.insert(&format!("decay_n{n}.csv"), decay_csv(&report.rows)?);
    }
    let fit = fit_scaling_exponent(&points).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::FitFailure(m),
        other => other,
    })?;
    let report = ScalingReport {
        alpha: fit.alpha,
        alpha_err: fit.alpha_err,
        rows,
        rates,
    };
    artifacts.insert("scaling.csv", scaling_csv(&report.rows)?);
    artifacts.insert_json("report.json", &report)?;
    Ok((report, artifacts))
}

pub fn run_dfs_contrast(cfg: &ExperimentConfig) -> Result<(DfsReport, Artifacts)> {
    cfg.validate()?;
    let n = require_n(cfg)?;
    if n % 2 != 0 {
        return Err(Error::invalid(format!("DFS contrast needs an even register size, got {n}")));
    }
    let noise = cfg.noise()?;
    let run = |kind: InitialState| -> Result<DecayReport> {
        let state0 = initial_state(cfg, kind, n)?;
        let times = wait_times(cfg, &state0, noise.as_ref(), cfg.t1_s)?;
        decay_run(cfg, kind, &state0, &times)
    };
    let dfs = run(InitialState::Dfs)?;
    let ghz = run(InitialState::Ghz)?;
    let timescale_ratio = dfs.timescale().zip(ghz.timescale()).map(|(d, g)| d / g);
    let report = DfsReport {
        n,
        t1_s: cfg.t1_s,
        dfs,
        ghz,
        timescale_ratio,
    };
    let mut artifacts = Artifacts::default();
    artifacts.insert("decay.csv", decay_csv(&report.dfs.rows)?);
    artifacts.insert("decay_ghz.csv", decay_csv(&report.ghz.rows)?);
    artifacts.insert_json("report.json", &report)?;
    Ok((report, artifacts))
}

/// Run whichever scenario the config names and collect its output files.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<Artifacts> {
    Ok(match cfg.scenario {
        ScenarioKind::GhzCharacterize => run_ghz_characterize(cfg)?.1,
        ScenarioKind::GhzDecay => run_ghz_decay(cfg)?.1,
        ScenarioKind::ScalingStudy => run_scaling_study(cfg)?.1,
        ScenarioKind::DfsContrast => run_dfs_contrast(cfg)?.1,
    })
}
