//! Readout simulation: per-qubit camera detection after a collective analysis
//! pulse, unrotated population measurements, and global PMT photon counting.
//!
//! All sampling is counter based: shot `i` of a call draws from
//! `rng::stream(seed, [i])`, so a record depends only on (seed, index).

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::Estimate;
use crate::register::{Bitstring, BranchPairState};
use crate::rng;

/// One camera shot: the measured bitstring.
pub type Shot = Bitstring;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmtShot {
    pub counts: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParitySetting {
    pub phi: f64,
    pub shots: Vec<Shot>,
}

/// Camera shots for a sweep of analysis-pulse phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityDataset {
    pub n: usize,
    pub shots_per_setting: usize,
    pub entries: Vec<ParitySetting>,
}

/// PMT counts for a sweep of analysis-pulse phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PmtParityDataset {
    pub n: usize,
    pub entries: Vec<(f64, Vec<PmtShot>)>,
}

/// Detection rates in counts per detection window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmtRates {
    pub lambda_ion: f64,
    pub lambda_bg: f64,
}

impl Default for PmtRates {
    fn default() -> Self {
        Self {
            lambda_ion: 20.0,
            lambda_bg: 1.0,
        }
    }
}

/// `m` equally spaced analysis phases covering one parity period 2π/n.
pub fn phi_grid(n: usize, m: usize) -> Vec<f64> {
    let period = std::f64::consts::TAU / n as f64;
    (0..m).map(|j| j as f64 * period / m as f64).collect()
}

/// The default grid has 3n + 1 settings.
pub fn default_phi_grid(n: usize) -> Vec<f64> {
    phi_grid(n, 3 * n + 1)
}

fn ghz_frame(state: &BranchPairState) -> Result<BranchPairState> {
    state.to_ghz_frame()
}

/// c·i^n·e^{inφ} for the GHZ-frame coherence; the parity-dependent part of
/// every outcome probability.
fn oscillating_term(state: &BranchPairState, phi: f64) -> Complex64 {
    let n = state.n();
    let i_pow = match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    state.coherence_element() * i_pow * Complex64::from_polar(1.0, n as f64 * phi)
}

/// ⟨P_even − P_odd⟩ after the collective π/2 pulse of phase φ:
/// 2·Re[c·(−i)^n·e^{inφ}].
///
/// The state is first mapped into the GHZ frame (local bit flips taking
/// branch_a to 0…0), so complementary branch pairs such as the DFS state are
/// analysed the same way as a GHZ state. Leaked population is diagonal and
/// contributes nothing.
pub fn parity_expectation(state: &BranchPairState, phi: f64) -> Result<f64> {
    let g = ghz_frame(state)?;
    let sign = if g.n() % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * 2.0 * oscillating_term(&g, phi).re)
}

/// Probability that a camera shot has (−1)^{n−k} = +1, i.e. that the number
/// of dark qubits is even.
fn even_dark_probability(state: &BranchPairState, phi: f64) -> Result<f64> {
    let g = ghz_frame(state)?;
    let osc = 2.0 * oscillating_term(&g, phi).re;
    let total = g.p_a() + g.p_b() + g.p_leak();
    let n_strings = 2f64.powi(g.n() as i32);
    if (total - osc.abs()) * n_strings.recip() < -1e-12 {
        return Err(Error::Internal(format!(
            "negative outcome probability ({total} - |{osc}|) at phi = {phi}"
        )));
    }
    Ok((0.5 * (total + osc)).clamp(0.0, 1.0))
}

/// Closed-form camera outcome distribution after the collective π/2 pulse:
///
/// ```text
/// p(s) = 2^{−n}[(p_a + p_b + p_leak) + 2·Re(c·i^n·(−1)^{n−k(s)}·e^{inφ})]
/// ```
///
/// in the GHZ frame. The leak term is exact because leaked population is
/// diagonal in the computational basis and every basis string is mapped to
/// the uniform distribution by the pulse. Indexed by bitstring value.
pub fn outcome_probabilities(state: &BranchPairState, phi: f64) -> Result<Vec<f64>> {
    let n = state.n();
    if n > 20 {
        return Err(Error::invalid("explicit outcome tables are limited to n <= 20"));
    }
    let p_even = even_dark_probability(state, phi)?;
    let per_class = 2f64.powi(n as i32 - 1);
    Ok((0..1usize << n)
        .map(|s| {
            let dark = n - s.count_ones() as usize;
            if dark.is_multiple_of(2) {
                p_even / per_class
            } else {
                (1.0 - p_even) / per_class
            }
        })
        .collect())
}

/// Draw camera shots after a collective π/2 pulse of phase φ.
///
/// The outcome distribution depends on the string only through the parity of
/// its dark count, so each shot picks the parity class and then a uniform
/// string within it. The returned strings are in the GHZ frame.
pub fn sample_camera_shots(state: &BranchPairState, phi: f64, n_shots: usize, seed: u64) -> Result<Vec<Shot>> {
    let n = state.n();
    let p_even = even_dark_probability(state, phi)?;
    let mask = Bitstring::ones(n).0;
    Ok((0..n_shots)
        .map(|i| {
            let mut rng = rng::stream(seed, &[i as u64]);
            let want_even_dark = rng.random::<f64>() < p_even;
            let bits = rng.random::<u64>() & mask;
            let dark_even = (n - bits.count_ones() as usize).is_multiple_of(2);
            // Flipping the last qubit toggles the dark-count parity.
            if dark_even == want_even_dark {
                Bitstring(bits)
            } else {
                Bitstring(bits ^ 1)
            }
        })
        .collect())
}

/// Camera shots for every phase in `phis`; setting `j` uses the substream
/// `derive_seed(seed, [j])`.
pub fn sample_parity_dataset(
    state: &BranchPairState,
    phis: &[f64],
    shots_per_setting: usize,
    seed: u64,
) -> Result<ParityDataset> {
    if shots_per_setting == 0 {
        return Err(Error::invalid("shots_per_setting must be > 0"));
    }
    let entries = phis
        .iter()
        .enumerate()
        .map(|(j, &phi)| {
            sample_camera_shots(state, phi, shots_per_setting, rng::derive_seed(seed, &[j as u64]))
                .map(|shots| ParitySetting { phi, shots })
        })
        .collect::<Result<_>>()?;
    Ok(ParityDataset {
        n: state.n(),
        shots_per_setting,
        entries,
    })
}

/// Unrotated fluorescence measurement: branch_a with p_a, branch_b with p_b,
/// otherwise a uniformly chosen non-branch string.
pub fn measure_populations_direct(state: &BranchPairState, n_shots: usize, seed: u64) -> Result<Vec<Shot>> {
    let n = state.n();
    let (a, b) = (state.branch_a(), state.branch_b());
    if state.p_leak() > 0.0 && n == 1 {
        return Err(Error::invalid("a one-qubit register has no non-branch strings"));
    }
    let mask = Bitstring::ones(n).0;
    Ok((0..n_shots)
        .map(|i| {
            let mut rng = rng::stream(seed, &[i as u64]);
            let u: f64 = rng.random();
            if u < state.p_a() {
                a
            } else if u < state.p_a() + state.p_b() {
                b
            } else {
                loop {
                    let s = Bitstring(rng.random::<u64>() & mask);
                    if s != a && s != b {
                        break s;
                    }
                }
            }
        })
        .collect())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Distribution of the number of bright ions (1-bits) in an unrotated
/// measurement, with leaked population spread uniformly over non-branch
/// strings.
pub fn bright_count_distribution(state: &BranchPairState) -> Vec<f64> {
    let n = state.n();
    let (ka, kb) = (state.branch_a().weight() as usize, state.branch_b().weight() as usize);
    let others = 2f64.powi(n as i32) - 2.0;
    (0..=n)
        .map(|k| {
            let mut slots = binomial(n, k);
            let mut p = 0.0;
            if k == ka {
                p += state.p_a();
                slots -= 1.0;
            }
            if k == kb {
                p += state.p_b();
                slots -= 1.0;
            }
            if others > 0.0 {
                p += state.p_leak() * slots / others;
            }
            p
        })
        .collect()
}

/// Bright-count distribution of camera outcomes after the analysis pulse.
pub fn rotated_bright_count_distribution(state: &BranchPairState, phi: f64) -> Result<Vec<f64>> {
    let n = state.n();
    let p_even = even_dark_probability(state, phi)?;
    let per_class = 2f64.powi(n as i32 - 1);
    Ok((0..=n)
        .map(|k| {
            let class = if (n - k).is_multiple_of(2) { p_even } else { 1.0 - p_even };
            binomial(n, k) * class / per_class
        })
        .collect())
}

/// Photon counts: per shot draw k from `bright_probabilities`, then
/// counts ~ Poisson(k·λ_ion + λ_bg).
pub fn sample_pmt_counts(
    bright_probabilities: &[f64],
    rates: PmtRates,
    n_shots: usize,
    seed: u64,
) -> Result<Vec<PmtShot>> {
    if !(rates.lambda_ion > 0.0) || !(rates.lambda_bg >= 0.0) {
        return Err(Error::invalid(format!(
            "PMT rates must satisfy lambda_ion > 0, lambda_bg >= 0, got {rates:?}"
        )));
    }
    if bright_probabilities.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::invalid("bright-count probabilities must be non-negative"));
    }
    let total: f64 = bright_probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("bright-count probabilities sum to {total}")));
    }
    let cdf: Vec<f64> = bright_probabilities
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    Ok((0..n_shots)
        .map(|i| {
            let mut rng = rng::stream(seed, &[i as u64]);
            let u = rng.random::<f64>() * total;
            let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let mean = k as f64 * rates.lambda_ion + rates.lambda_bg;
            let counts = if mean > 0.0 {
                Poisson::new(mean).expect("positive Poisson mean").sample(&mut rng) as u64
            } else {
                0
            };
            PmtShot { counts }
        })
        .collect())
}

/// PMT counts for every analysis phase; setting `j` uses
/// `derive_seed(seed, [j])`.
pub fn sample_pmt_parity_dataset(
    state: &BranchPairState,
    phis: &[f64],
    shots_per_setting: usize,
    rates: PmtRates,
    seed: u64,
) -> Result<PmtParityDataset> {
    let entries = phis
        .iter()
        .enumerate()
        .map(|(j, &phi)| {
            let dist = rotated_bright_count_distribution(state, phi)?;
            sample_pmt_counts(&dist, rates, shots_per_setting, rng::derive_seed(seed, &[j as u64])).map(|s| (phi, s))
        })
        .collect::<Result<_>>()?;
    Ok(PmtParityDataset { n: state.n(), entries })
}

/// Mean of (−1)^{k(s)} with standard error √((1 − m²)/M).
pub fn parity_from_shots(shots: &[Shot]) -> Result<Estimate> {
    parity_from_signs(shots.iter().map(|s| s.weight() % 2 == 0))
}

pub(crate) fn parity_from_signs(even: impl ExactSizeIterator<Item = bool>) -> Result<Estimate> {
    let m = even.len();
    if m == 0 {
        return Err(Error::invalid("cannot estimate parity from zero shots"));
    }
    let sum: i64 = even.map(|e| if e { 1 } else { -1 }).sum();
    let mean = sum as f64 / m as f64;
    Ok(Estimate::new(mean, ((1.0 - mean * mean).max(0.0) / m as f64).sqrt(), m))
}

pub const CAMERA_CSV_HEADER: [&str; 3] = ["setting_phi_rad", "shot_index", "bitstring"];
pub const PMT_CSV_HEADER: [&str; 3] = ["setting_id", "shot_index", "counts"];

pub fn write_camera_csv<W: Write>(dataset: &ParityDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CAMERA_CSV_HEADER)?;
    for e in &dataset.entries {
        for (i, s) in e.shots.iter().enumerate() {
            w.write_record([e.phi.to_string(), i.to_string(), s.to_string_n(dataset.n)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parse a camera CSV back into a dataset. Settings appear in file order.
pub fn read_camera_csv<R: Read>(input: R) -> Result<ParityDataset> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(CAMERA_CSV_HEADER) {
        return Err(Error::invalid("unexpected camera CSV header"));
    }
    let mut entries: Vec<ParitySetting> = Vec::new();
    let mut n = None;
    for rec in r.records() {
        let rec = rec?;
        let phi: f64 = rec[0].parse().map_err(|_| Error::invalid("bad phi value"))?;
        let (bits, len) = Bitstring::parse_n(&rec[2])?;
        if *n.get_or_insert(len) != len {
            return Err(Error::invalid("inconsistent bitstring lengths"));
        }
        match entries.last_mut() {
            Some(e) if e.phi.to_bits() == phi.to_bits() => e.shots.push(bits),
            _ => entries.push(ParitySetting { phi, shots: vec![bits] }),
        }
    }
    let n = n.ok_or_else(|| Error::invalid("empty camera CSV"))?;
    let shots_per_setting = entries.first().map_or(0, |e| e.shots.len());
    Ok(ParityDataset {
        n,
        shots_per_setting,
        entries,
    })
}

pub fn write_pmt_csv<W: Write>(dataset: &PmtParityDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PMT_CSV_HEADER)?;
    for (id, (_, shots)) in dataset.entries.iter().enumerate() {
        for (i, s) in shots.iter().enumerate() {
            w.write_record([id.to_string(), i.to_string(), s.counts.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
