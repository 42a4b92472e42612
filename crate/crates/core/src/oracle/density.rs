use num_complex::Complex64;

use super::statevector::{half_pi_rotation, Gate, StateVector};
use crate::error::{Error, Result};
use crate::register::{Bitstring, BranchPairState};

pub const MAX_DENSITY_QUBITS: usize = 8;

/// Dense 2^n × 2^n density matrix, row-major, for small registers.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    rho: Vec<Complex64>,
}

impl DensityMatrix {
    fn dim(&self) -> usize {
        1 << self.n
    }

    fn check_n(n: usize) -> Result<()> {
        if n == 0 || n > MAX_DENSITY_QUBITS {
            return Err(Error::invalid(format!(
                "density oracle supports 1..={MAX_DENSITY_QUBITS} qubits, got {n}"
            )));
        }
        Ok(())
    }

    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let n = state.n();
        Self::check_n(n)?;
        let a = state.amplitudes();
        let rho = a
            .iter()
            .flat_map(|x| a.iter().map(move |y| x * y.conj()))
            .collect();
        Ok(Self { n, rho })
    }

    /// Embed a leak-free branch-pair state.
    pub fn from_branch_pair(state: &BranchPairState) -> Result<Self> {
        let n = state.n();
        Self::check_n(n)?;
        if state.p_leak() > 1e-12 {
            return Err(Error::UnsupportedConfiguration(
                "leak bucket has no density-matrix embedding".into(),
            ));
        }
        let dim = 1usize << n;
        let mut rho = vec![Complex64::new(0.0, 0.0); dim * dim];
        let (a, b) = (state.branch_a().0 as usize, state.branch_b().0 as usize);
        let c = state.coherence_element();
        rho[a * dim + a] = Complex64::new(state.p_a(), 0.0);
        rho[b * dim + b] = Complex64::new(state.p_b(), 0.0);
        rho[a * dim + b] = c;
        rho[b * dim + a] = c.conj();
        Ok(Self { n, rho })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn element(&self, row: Bitstring, col: Bitstring) -> Complex64 {
        self.rho[row.0 as usize * self.dim() + col.0 as usize]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.rho[i * self.dim() + i].re).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.rho[i * self.dim() + i].re).collect()
    }

    /// Σ_k K ρ K† with the Kraus operators `kraus` acting on qubit `j`.
    fn apply_kraus(&mut self, j: usize, kraus: &[Gate]) {
        let dim = self.dim();
        let stride = 1usize << (self.n - 1 - j);
        let bit = |i: usize| (i / stride) % 2;
        let flip = |i: usize, v: usize| if bit(i) == v { i } else { i ^ stride };
        let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                let (br, bc) = (bit(r), bit(c));
                let mut acc = Complex64::new(0.0, 0.0);
                for k in kraus {
                    for x in 0..2 {
                        for y in 0..2 {
                            let kr = k[br][x];
                            let kc = k[bc][y].conj();
                            if kr.norm_sqr() == 0.0 || kc.norm_sqr() == 0.0 {
                                continue;
                            }
                            acc += kr * self.rho[flip(r, x) * dim + flip(c, y)] * kc;
                        }
                    }
                }
                out[r * dim + c] = acc;
            }
        }
        self.rho = out;
    }

    pub fn apply_collective_rotation(&self, phi: f64) -> Self {
        let g = half_pi_rotation(phi);
        let mut out = self.clone();
        for j in 0..self.n {
            out.apply_kraus(j, &[g]);
        }
        out
    }

    pub fn apply_x(&self, j: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let mut out = self.clone();
        out.apply_kraus(j, &[[[zero, one], [one, zero]]]);
        out
    }

    /// Conjugation by exp(−i(φ/2)Σσ_z).
    pub fn apply_collective_z_phase(&self, phi: f64) -> Self {
        let dim = self.dim();
        let n = self.n as f64;
        let phase = |i: usize| -0.5 * phi * (n - 2.0 * i.count_ones() as f64);
        let mut out = self.clone();
        for r in 0..dim {
            for c in 0..dim {
                out.rho[r * dim + c] *= Complex64::from_polar(1.0, phase(r) - phase(c));
            }
        }
        out
    }

    /// Average of the collective z-phase evolution over φ ~ N(0, variance),
    /// i.e. ρ_{rc} ↦ ρ_{rc}·E[e^{iφ(k_r − k_c)}].
    pub fn apply_gaussian_collective_dephasing(&self, variance: f64) -> Self {
        let dim = self.dim();
        let mut out = self.clone();
        for r in 0..dim {
            for c in 0..dim {
                let d = r.count_ones() as f64 - c.count_ones() as f64;
                out.rho[r * dim + c] *= (-0.5 * variance * d * d).exp();
            }
        }
        out
    }

    /// Per-qubit D→S decay with survival `survival` of the |0⟩ state:
    /// K₀ = |1⟩⟨1| + √s|0⟩⟨0|, K₁ = √(1−s)|1⟩⟨0|.
    pub fn apply_amplitude_damping(&self, survival: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        let k0: Gate = [[Complex64::new(survival.sqrt(), 0.0), z], [z, Complex64::new(1.0, 0.0)]];
        let k1: Gate = [[z, z], [Complex64::new((1.0 - survival).sqrt(), 0.0), z]];
        let mut out = self.clone();
        for j in 0..self.n {
            out.apply_kraus(j, &[k0, k1]);
        }
        out
    }

    pub fn parity(&self) -> f64 {
        self.diagonal()
            .iter()
            .enumerate()
            .map(|(i, p)| if i.count_ones() % 2 == 0 { *p } else { -p })
            .sum()
    }
}
