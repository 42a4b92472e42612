use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::register::Bitstring;

pub const MAX_ORACLE_QUBITS: usize = 14;

pub(crate) type Gate = [[Complex64; 2]; 2];

const I: Complex64 = Complex64::new(0.0, 1.0);

/// (I + iσ_φ)/√2 = exp(i(π/4)σ_φ), with σ_φ = σ_x cos φ + σ_y sin φ.
pub(crate) fn half_pi_rotation(phi: f64) -> Gate {
    let s = FRAC_1_SQRT_2;
    [
        [Complex64::new(s, 0.0), I * Complex64::from_polar(s, -phi)],
        [I * Complex64::from_polar(s, phi), Complex64::new(s, 0.0)],
    ]
}

/// Full 2^n amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Basis state |bits⟩, e.g. `"1111"`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let (b, n) = Bitstring::parse_n(bits)?;
        Self::basis(n, b)
    }

    pub fn basis(n: usize, bits: Bitstring) -> Result<Self> {
        if n == 0 || n > MAX_ORACLE_QUBITS {
            return Err(Error::invalid(format!(
                "oracle supports 1..={MAX_ORACLE_QUBITS} qubits, got {n}"
            )));
        }
        if !bits.fits(n) {
            return Err(Error::invalid("basis string longer than register"));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[bits.0 as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    /// Wrap raw amplitudes; must be normalized.
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n == 0 || n > MAX_ORACLE_QUBITS || amps.len() != 1 << n {
            return Err(Error::invalid("amplitude vector length must be 2^n with 1 <= n <= 14"));
        }
        let s = Self { n, amps };
        if (s.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("state norm² is {}", s.norm_sqr())));
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, bits: Bitstring) -> Complex64 {
        self.amps[bits.0 as usize]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Apply a 2×2 unitary to qubit `j` (counted from the left).
    pub(crate) fn apply_gate(&mut self, j: usize, g: &Gate) {
        let stride = 1usize << (self.n - 1 - j);
        for base in (0..self.amps.len()).step_by(2 * stride) {
            for i in base..base + stride {
                let (x0, x1) = (self.amps[i], self.amps[i + stride]);
                self.amps[i] = g[0][0] * x0 + g[0][1] * x1;
                self.amps[i + stride] = g[1][0] * x0 + g[1][1] * x1;
            }
        }
    }

    fn apply_gate_all(&mut self, g: &Gate) {
        for j in 0..self.n {
            self.apply_gate(j, g);
        }
    }

    /// σ_x on qubit `j`.
    pub fn apply_x(&self, j: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let mut out = self.clone();
        out.apply_gate(j, &[[zero, one], [one, zero]]);
        out
    }

    /// Mølmer–Sørensen interaction exp(−i(θ/2)·Σ_{j<k} σ_φ^{(j)}σ_φ^{(k)}).
    ///
    /// The pairwise sum equals (S_φ² − n)/2 with S_φ = Σ_j σ_φ^{(j)}, so the
    /// unitary is diagonal in the product eigenbasis of σ_φ: rotate every
    /// qubit into that basis, multiply basis state with k negative
    /// eigenvalues by exp(−i(θ/4)((n−2k)² − n)), and rotate back. Exact for
    /// any input state.
    pub fn apply_ms(&self, theta: f64, phi_g: f64) -> Self {
        let s = FRAC_1_SQRT_2;
        let e = Complex64::from_polar(s, phi_g);
        let h = Complex64::new(s, 0.0);
        // Columns are the σ_φ eigenvectors (|0⟩ ± e^{iφ}|1⟩)/√2.
        let w: Gate = [[h, h], [e, -e]];
        let w_dag: Gate = [[h, e.conj()], [h, -e.conj()]];
        let mut out = self.clone();
        out.apply_gate_all(&w_dag);
        let n = self.n as f64;
        for (idx, a) in out.amps.iter_mut().enumerate() {
            let m = n - 2.0 * idx.count_ones() as f64;
            *a *= Complex64::from_polar(1.0, -0.25 * theta * (m * m - n));
        }
        out.apply_gate_all(&w);
        out
    }

    /// exp(i(π/4)σ_φ) on every qubit: the parity-analysis pulse.
    pub fn apply_collective_rotation(&self, phi: f64) -> Self {
        let mut out = self.clone();
        out.apply_gate_all(&half_pi_rotation(phi));
        out
    }

    /// exp(−i(φ/2)Σσ_z): |s⟩ ↦ e^{−i(φ/2)(n − 2k(s))}|s⟩.
    pub fn apply_collective_z_phase(&self, phi: f64) -> Self {
        let n = self.n as f64;
        let mut out = self.clone();
        for (idx, a) in out.amps.iter_mut().enumerate() {
            *a *= Complex64::from_polar(1.0, -0.5 * phi * (n - 2.0 * idx.count_ones() as f64));
        }
        out
    }

    /// |amplitude|² for every basis string, indexed by its integer value.
    pub fn outcome_distribution(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// ⟨(−1)^{k}⟩ over the computational-basis distribution.
    pub fn parity(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i.count_ones() % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    fn ghz_overlap(&self) -> f64 {
        let a0 = self.amps[0].norm();
        let a1 = self.amps[self.amps.len() - 1].norm();
        0.5 * (a0 + a1) * (a0 + a1)
    }

    /// Best overlap with (|0…0⟩ + e^{iχ}|1…1⟩)/√2 over χ, allowing collective
    /// z-rotations and, for odd n, one collective π/2 rotation of any phase
    /// beforehand.
    pub fn ghz_family_fidelity(&self) -> f64 {
        let direct = self.ghz_overlap();
        if self.n.is_multiple_of(2) {
            return direct;
        }
        let rotated = |phi: f64| self.apply_collective_rotation(phi).ghz_overlap();
        const GRID: usize = 64;
        let step = std::f64::consts::TAU / GRID as f64;
        let (mut best_phi, mut best) = (0.0, rotated(0.0));
        for k in 1..GRID {
            let phi = k as f64 * step;
            let f = rotated(phi);
            if f > best {
                best = f;
                best_phi = phi;
            }
        }
        // Golden-section refinement around the best grid point.
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (best_phi - step, best_phi + step);
        let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut f1, mut f2) = (rotated(x1), rotated(x2));
        for _ in 0..60 {
            if f1 > f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = rotated(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = rotated(x2);
            }
        }
        direct.max(best).max(f1).max(f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn init_layout() {
        let s = StateVector::from_bits("11").unwrap();
        assert_eq!(s.amplitudes()[3], c(1.0, 0.0));
        let s = StateVector::from_bits("00001111").unwrap();
        assert_eq!(s.amplitudes().len(), 256);
        assert_eq!(s.amplitudes()[15], c(1.0, 0.0));
        assert_eq!(s.norm_sqr(), 1.0);
        assert!(StateVector::from_bits("").is_err());
        assert!(StateVector::from_bits("000000000000000").is_err());
    }

    #[test]
    fn ms_two_qubits() {
        let s = StateVector::from_bits("11").unwrap().apply_ms(PI / 2.0, 0.0);
        let r = FRAC_1_SQRT_2;
        assert_relative_eq!(s.amplitudes()[3].re, r, epsilon = 1e-14);
        assert_relative_eq!(s.amplitudes()[3].im, 0.0, epsilon = 1e-14);
        assert_relative_eq!(s.amplitudes()[0].re, 0.0, epsilon = 1e-14);
        assert_relative_eq!(s.amplitudes()[0].im, -r, epsilon = 1e-14);
        let id = StateVector::from_bits("101").unwrap();
        let out = id.apply_ms(0.0, 0.3);
        for (a, b) in out.amplitudes().iter().zip(id.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn rotation_single_qubit() {
        let s = StateVector::from_bits("0").unwrap().apply_collective_rotation(0.0);
        assert_relative_eq!(s.amplitudes()[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(s.amplitudes()[1].im, FRAC_1_SQRT_2, epsilon = 1e-15);
        let phi = 0.7;
        let s = StateVector::from_bits("0").unwrap().apply_collective_rotation(phi);
        let expected = I * Complex64::from_polar(FRAC_1_SQRT_2, phi);
        assert!((s.amplitudes()[1] - expected).norm() < 1e-15);
    }

    #[test]
    fn four_rotations_are_a_global_phase() {
        let s = StateVector::from_bits("0110").unwrap().apply_ms(PI / 2.0, 0.0);
        let mut r = s.clone();
        for _ in 0..4 {
            r = r.apply_collective_rotation(0.4);
        }
        let overlap: Complex64 = s.amplitudes().iter().zip(r.amplitudes()).map(|(a, b)| a.conj() * b).sum();
        assert_relative_eq!(overlap.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bell_parity_after_rotation() {
        let r = FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(2, vec![c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)]).unwrap();
        assert_relative_eq!(bell.apply_collective_rotation(0.0).parity(), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn z_phase() {
        let r = FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(2, vec![c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)]).unwrap();
        let phi = 0.37;
        let out = bell.apply_collective_z_phase(phi);
        let rel = out.amplitudes()[3] / out.amplitudes()[0];
        assert!((rel - Complex64::from_polar(1.0, 2.0 * phi)).norm() < 1e-14);
        assert_eq!(bell.apply_collective_z_phase(0.0), bell);
        let dfs = StateVector::from_bits("00001111").unwrap().apply_ms(PI / 2.0, 0.0);
        let out = dfs.apply_collective_z_phase(1.1);
        for (a, b) in out.amplitudes().iter().zip(dfs.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn distributions() {
        let s = StateVector::from_bits("101").unwrap();
        let d = s.outcome_distribution();
        assert_eq!(d[5], 1.0);
        assert_eq!(d.iter().sum::<f64>(), 1.0);
        let r = FRAC_1_SQRT_2;
        let mut amps = vec![c(0.0, 0.0); 8];
        amps[0] = c(r, 0.0);
        amps[7] = c(r, 0.0);
        let ghz = StateVector::from_amplitudes(3, amps).unwrap();
        let d = ghz.outcome_distribution();
        assert_relative_eq!(d[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(d[7], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn family_fidelity() {
        let r = FRAC_1_SQRT_2;
        let mut amps = vec![c(0.0, 0.0); 16];
        amps[0] = c(r, 0.0);
        amps[15] = c(0.0, r);
        let ghz = StateVector::from_amplitudes(4, amps).unwrap();
        assert_relative_eq!(ghz.ghz_family_fidelity(), 1.0, epsilon = 1e-14);
        let branch = StateVector::from_bits("0000").unwrap();
        assert_relative_eq!(branch.ghz_family_fidelity(), 0.5, epsilon = 1e-14);
        let ms3 = StateVector::from_bits("111").unwrap().apply_ms(PI / 2.0, 0.0);
        assert!(ms3.ghz_family_fidelity() >= 1.0 - 1e-9);
    }
}
