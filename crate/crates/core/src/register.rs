//! Compact model of GHZ-class states.
//!
//! A [`BranchPairState`] tracks the four density-matrix elements spanned by
//! two computational-basis strings (the branches) plus an unstructured leak
//! bucket holding whatever population has left them. Bit value 1 is the
//! bright S ground state, bit 0 the metastable D state.
//!
//! Sign convention: the collective noise unitary exp(−i(φ/2)Σσ_z) gives basis
//! string |s⟩ the phase e^{−i(φ/2)(n−2k(s))}, so the tracked coherence
//! c = ⟨a|ρ|b⟩ picks up e^{−i·Δk·φ} with Δk = k(b) − k(a).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{self, NoiseParams};

pub const MAX_QUBITS: usize = 62;
const TOL: f64 = 1e-12;

/// A computational-basis string, stored as an integer whose most significant
/// of `n` bits is the leftmost qubit (|11⟩ ↔ 3, |00001111⟩ ↔ 15).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bitstring(pub u64);

impl Bitstring {
    pub fn zeros() -> Self {
        Bitstring(0)
    }

    pub fn ones(n: usize) -> Self {
        debug_assert!(n <= 64);
        if n == 64 {
            Bitstring(u64::MAX)
        } else {
            Bitstring((1u64 << n) - 1)
        }
    }

    /// Number of 1-bits (bright ions).
    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    pub fn complement(self, n: usize) -> Self {
        Bitstring(!self.0 & Self::ones(n).0)
    }

    /// Value of qubit `j`, counted from the left.
    pub fn qubit(self, n: usize, j: usize) -> bool {
        (self.0 >> (n - 1 - j)) & 1 == 1
    }

    pub fn fits(self, n: usize) -> bool {
        self.0 & !Self::ones(n).0 == 0
    }

    pub fn to_string_n(self, n: usize) -> String {
        (0..n).map(|j| if self.qubit(n, j) { '1' } else { '0' }).collect()
    }

    pub fn parse_n(s: &str) -> Result<(Self, usize)> {
        let n = s.len();
        if n == 0 || n > 64 {
            return Err(Error::invalid(format!("bitstring length must be 1..=64, got {n}")));
        }
        let v = u64::from_str_radix(s, 2)
            .map_err(|_| Error::invalid(format!("not a bitstring: {s:?}")))?;
        Ok((Bitstring(v), n))
    }
}

impl fmt::Binary for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Binary::fmt(&self.0, f)
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_n(s).map(|(b, _)| b)
    }
}

/// Difference in 1-bit counts between the two branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DephasingWeight(pub i32);

impl DephasingWeight {
    pub fn magnitude(self) -> usize {
        self.0.unsigned_abs() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPairState {
    n: usize,
    branch_a: Bitstring,
    branch_b: Bitstring,
    p_a: f64,
    p_b: f64,
    c: Complex64,
    p_leak: f64,
}

impl BranchPairState {
    /// Build a state, checking every invariant. The leak bucket takes
    /// 1 − p_a − p_b.
    pub fn new(
        n: usize,
        branch_a: Bitstring,
        branch_b: Bitstring,
        p_a: f64,
        p_b: f64,
        c: Complex64,
    ) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n) {
            return Err(Error::invalid(format!("qubit count must be 1..={MAX_QUBITS}, got {n}")));
        }
        if !branch_a.fits(n) || !branch_b.fits(n) {
            return Err(Error::invalid("branch has bits beyond the register"));
        }
        if branch_a == branch_b {
            return Err(Error::invalid("branches must differ"));
        }
        for p in [p_a, p_b] {
            if !(-TOL..=1.0 + TOL).contains(&p) {
                return Err(Error::invalid(format!("population {p} outside [0, 1]")));
            }
        }
        let p_leak = 1.0 - p_a - p_b;
        if p_leak < -TOL {
            return Err(Error::invalid(format!("branch populations sum to {} > 1", p_a + p_b)));
        }
        if c.norm() > (p_a * p_b).max(0.0).sqrt() + TOL {
            return Err(Error::invalid(format!(
                "|c| = {} exceeds sqrt(p_a p_b) = {}",
                c.norm(),
                (p_a * p_b).sqrt()
            )));
        }
        Ok(Self {
            n,
            branch_a,
            branch_b,
            p_a: p_a.max(0.0),
            p_b: p_b.max(0.0),
            c,
            p_leak: p_leak.max(0.0),
        })
    }

    /// (|0…0⟩ + |1…1⟩)/√2.
    pub fn ghz_ideal(n: usize) -> Result<Self> {
        Self::ghz_with(n, 1.0, 1.0)
    }

    /// GHZ-branch state with populations P (split evenly) and coherence
    /// C = 2|c|, real and positive.
    pub fn ghz_with(n: usize, populations: f64, coherence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&populations) || !(0.0..=1.0).contains(&coherence) {
            return Err(Error::invalid(format!(
                "populations and coherence must be in [0, 1], got P = {populations}, C = {coherence}"
            )));
        }
        Self::new(
            n,
            Bitstring::zeros(),
            Bitstring::ones(n),
            0.5 * populations,
            0.5 * populations,
            Complex64::new(0.5 * coherence, 0.0),
        )
    }

    /// (|0^{n/2}1^{n/2}⟩ + |1^{n/2}0^{n/2}⟩)/√2, insensitive to collective
    /// dephasing.
    pub fn dfs_state(n: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!("DFS state needs an even qubit count, got {n}")));
        }
        let half = n / 2;
        let low = Bitstring::ones(half);
        let high = Bitstring(low.0 << half);
        Self::new(n, low, high, 0.5, 0.5, Complex64::new(0.5, 0.0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn branch_a(&self) -> Bitstring {
        self.branch_a
    }

    pub fn branch_b(&self) -> Bitstring {
        self.branch_b
    }

    pub fn p_a(&self) -> f64 {
        self.p_a
    }

    pub fn p_b(&self) -> f64 {
        self.p_b
    }

    pub fn coherence_element(&self) -> Complex64 {
        self.c
    }

    pub fn p_leak(&self) -> f64 {
        self.p_leak
    }

    /// P = p_a + p_b.
    pub fn populations(&self) -> f64 {
        self.p_a + self.p_b
    }

    /// C = 2|c|.
    pub fn coherence(&self) -> f64 {
        2.0 * self.c.norm()
    }

    pub fn dephasing_weight(&self) -> DephasingWeight {
        DephasingWeight(self.branch_b.weight() as i32 - self.branch_a.weight() as i32)
    }

    pub fn is_complementary(&self) -> bool {
        self.branch_a.complement(self.n) == self.branch_b
    }

    /// Relabel qubits by local bit flips so that branch_a becomes 0…0. Only
    /// defined for complementary branches; populations and c are unchanged.
    pub fn to_ghz_frame(&self) -> Result<Self> {
        if !self.is_complementary() {
            return Err(Error::UnsupportedConfiguration(format!(
                "branches {} and {} are not complementary",
                self.branch_a.to_string_n(self.n),
                self.branch_b.to_string_n(self.n)
            )));
        }
        Ok(Self {
            branch_a: Bitstring::zeros(),
            branch_b: Bitstring::ones(self.n),
            ..*self
        })
    }

    /// Evolve under exp(−i(φ/2)Σσ_z) for a fixed phase φ.
    pub fn apply_collective_phase(&self, phi: f64) -> Self {
        let dk = self.dephasing_weight().0 as f64;
        Self {
            c: self.c * Complex64::from_polar(1.0, -dk * phi),
            ..*self
        }
    }

    /// Average over a zero-mean Gaussian collective phase of the given
    /// variance: c ← c·exp(−Δk²·Var/2).
    pub fn apply_phase_variance(&self, variance: f64) -> Self {
        let dk = self.dephasing_weight().0 as f64;
        Self {
            c: self.c * (-0.5 * dk * dk * variance).exp(),
            ..*self
        }
    }

    /// Ensemble-averaged collective dephasing accumulated over [0, t] from
    /// the preparation time: c ← c·exp(−2ε(|Δk|, t)).
    ///
    /// For correlated noise this must be applied once for the full interval;
    /// splitting it into segments discards the correlations between them.
    pub fn apply_gaussian_dephasing(&self, params: &NoiseParams, t: f64) -> Result<Self> {
        Ok(self.apply_phase_variance(noise::integrated_phase_variance(params, t)?))
    }

    /// Independent D→S decay (0-bit → 1-bit) of every qubit with survival
    /// s = e^{−t/t1}.
    ///
    /// Tracked populations scale as s^{d} for d zero-bits, plus the flow from
    /// one branch into the other when the latter is reachable by decay alone
    /// (e.g. 0…0 → 1…1). The coherence scales as s^{(d_a+d_b)/2}. Population
    /// already in the leak bucket is assumed not to flow back into a branch,
    /// which is exact when starting from a leak-free state.
    pub fn apply_amplitude_damping(&self, t: f64, t1: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("time must be >= 0, got {t}")));
        }
        if !(t1 > 0.0) {
            return Err(Error::invalid(format!("t1 must be > 0, got {t1}")));
        }
        let n = self.n as i32;
        let d_a = n - self.branch_a.weight() as i32;
        let d_b = n - self.branch_b.weight() as i32;
        let log_s = -t / t1;
        let s_pow = |d: i32| (log_s * d as f64).exp();
        // P(x → y) for y reachable from x by decay only.
        let flow = |x: Bitstring, y: Bitstring, d_x: i32, d_y: i32| -> f64 {
            if t == 0.0 || x.0 & !y.0 != 0 {
                return 0.0;
            }
            s_pow(d_y) * (-(log_s.exp_m1())).powi(d_x - d_y)
        };
        let p_a = self.p_a * s_pow(d_a) + self.p_b * flow(self.branch_b, self.branch_a, d_b, d_a);
        let p_b = self.p_b * s_pow(d_b) + self.p_a * flow(self.branch_a, self.branch_b, d_a, d_b);
        let c = self.c * (0.5 * log_s * (d_a + d_b) as f64).exp();
        Ok(Self {
            p_a,
            p_b,
            c,
            p_leak: (1.0 - p_a - p_b).max(0.0),
            ..*self
        })
    }
}
