//! Dense statevector simulation of the QAOA circuit family.
//!
//! Only three kinds of layers occur: a diagonal cost phase, a product of
//! identical-form single-qubit mixers, and product-state preparation. The
//! cost operator is diagonal in the computational basis, so it is applied
//! from a precomputed table of classical costs rather than synthesized from
//! Pauli terms.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::QuboProblem;

/// Dense vectors beyond this size are refused.
pub const MAX_QUBITS: usize = 24;

type Gate = [[Complex64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amplitudes: Vec<Complex64>,
    n_qubits: usize,
}

/// Classical cost of every basis state, indexed by basis-state integer.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCost {
    values: Vec<f64>,
    n_qubits: usize,
}

impl DiagonalCost {
    pub fn from_qubo(problem: &QuboProblem) -> Result<Self> {
        let n = problem.n_vars();
        check_qubits(n)?;
        let values = (0..1usize << n)
            .map(|z| problem.evaluate_index(z))
            .collect();
        Ok(DiagonalCost {
            values,
            n_qubits: n,
        })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let len = values.len();
        if !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "cost table length {len} is not a power of two"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        Ok(DiagonalCost { values, n_qubits })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits { n, max: MAX_QUBITS });
    }
    Ok(())
}

fn check_angles(thetas: &[f64]) -> Result<()> {
    match thetas
        .iter()
        .find(|t| !(0.0..=std::f64::consts::PI).contains(*t))
    {
        Some(t) => Err(Error::InvalidArgument(format!("angle {t} outside [0, pi]"))),
        None => Ok(()),
    }
}

/// `θᵢ = 2·arcsin(√x*ᵢ)`, so that `sin²(θᵢ/2) = x*ᵢ`.
pub fn warmstart_angles(x_star: &[f64]) -> Result<Vec<f64>> {
    x_star
        .iter()
        .map(|&x| {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidArgument(format!(
                    "relaxed value {x} outside [0, 1]"
                )));
            }
            Ok(2.0 * x.sqrt().asin())
        })
        .collect()
}

impl Statevector {
    /// Uniform superposition `|+⟩^⊗n`.
    pub fn init_plus(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one qubit".into()));
        }
        check_qubits(n)?;
        let dim = 1usize << n;
        let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(Statevector {
            amplitudes: vec![amp; dim],
            n_qubits: n,
        })
    }

    /// Product state `⊗ᵢ R_Y(θᵢ)|0⟩` with per-qubit amplitudes `(cos θᵢ/2, sin θᵢ/2)`.
    pub fn init_warmstart(thetas: &[f64]) -> Result<Self> {
        let n = thetas.len();
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one qubit".into()));
        }
        check_qubits(n)?;
        check_angles(thetas)?;
        let halves: Vec<(f64, f64)> = thetas
            .iter()
            .map(|t| ((t / 2.0).cos(), (t / 2.0).sin()))
            .collect();
        let amplitudes = (0..1usize << n)
            .map(|z| {
                let re = halves
                    .iter()
                    .enumerate()
                    .map(|(i, &(c, s))| if (z >> i) & 1 == 1 { s } else { c })
                    .product::<f64>();
                Complex64::new(re, 0.0)
            })
            .collect();
        Ok(Statevector {
            amplitudes,
            n_qubits: n,
        })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        if index >= 1usize << n {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1usize << n];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Statevector {
            amplitudes,
            n_qubits: n,
        })
    }

    /// Wraps raw amplitudes; the caller is responsible for normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        Ok(Statevector {
            amplitudes,
            n_qubits,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `amplitude[z] *= exp(−i·γ·cost[z])`.
    pub fn apply_cost_phase(&mut self, diag: &DiagonalCost, gamma: f64) -> Result<()> {
        if diag.n_qubits != self.n_qubits {
            return Err(Error::LengthMismatch {
                expected: self.n_qubits,
                got: diag.n_qubits,
            });
        }
        if gamma == 0.0 {
            return Ok(());
        }
        for (amp, &c) in self.amplitudes.iter_mut().zip(&diag.values) {
            let (s, co) = (-gamma * c).sin_cos();
            *amp *= Complex64::new(co, s);
        }
        Ok(())
    }

    fn apply_single_qubit(&mut self, qubit: usize, gate: &Gate) {
        let stride = 1usize << qubit;
        let [[a, b], [c, d]] = *gate;
        for block in self.amplitudes.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (x0, x1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (v0, v1) = (*x0, *x1);
                *x0 = a * v0 + b * v1;
                *x1 = c * v0 + d * v1;
            }
        }
    }

    /// `⊗ᵢ exp(iβXᵢ) = ⊗ᵢ (cos β·I + i·sin β·X)`.
    pub fn apply_standard_mixer(&mut self, beta: f64) {
        if beta == 0.0 {
            return;
        }
        let (s, c) = beta.sin_cos();
        let gate = [
            [Complex64::new(c, 0.0), Complex64::new(0.0, s)],
            [Complex64::new(0.0, s), Complex64::new(c, 0.0)],
        ];
        for q in 0..self.n_qubits {
            self.apply_single_qubit(q, &gate);
        }
    }

    /// `⊗ᵢ exp(iβ(sin θᵢ·X + cos θᵢ·Z))`, the warm-start mixer `exp(−iβM_ws)`.
    pub fn apply_warmstart_mixer(&mut self, beta: f64, thetas: &[f64]) -> Result<()> {
        if thetas.len() != self.n_qubits {
            return Err(Error::LengthMismatch {
                expected: self.n_qubits,
                got: thetas.len(),
            });
        }
        check_angles(thetas)?;
        if beta == 0.0 {
            return Ok(());
        }
        let (sb, cb) = beta.sin_cos();
        for (q, &theta) in thetas.iter().enumerate() {
            let (st, ct) = theta.sin_cos();
            let off = Complex64::new(0.0, sb * st);
            let gate = [
                [Complex64::new(cb, sb * ct), off],
                [off, Complex64::new(cb, -sb * ct)],
            ];
            self.apply_single_qubit(q, &gate);
        }
        Ok(())
    }

    /// Born-rule probabilities of every basis state.
    pub fn measure_probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Multinomial shot sample of the measurement distribution.
    pub fn sample_shots(&self, shots: u64, seed: u64) -> Result<Histogram> {
        sample_from_probabilities(&self.measure_probabilities(), shots, seed)
    }

    /// Probability of reading bit 1 on `qubit`.
    pub fn marginal_one(&self, qubit: usize) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(z, _)| (z >> qubit) & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

/// Shot counts per observed basis state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub n_qubits: usize,
    pub counts: BTreeMap<usize, u64>,
}

impl Histogram {
    pub fn total_shots(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn frequency(&self, index: usize) -> f64 {
        let total = self.total_shots();
        if total == 0 {
            return 0.0;
        }
        self.counts.get(&index).copied().unwrap_or(0) as f64 / total as f64
    }
}

/// Draws `shots` independent outcomes by inverse-CDF lookup on a seeded ChaCha stream.
pub fn sample_from_probabilities(probs: &[f64], shots: u64, seed: u64) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    let len = probs.len();
    if !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "distribution length {len} is not a power of two"
        )));
    }
    let mut cdf = Vec::with_capacity(len);
    let mut acc = 0.0;
    for &p in probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    if acc <= 0.0 {
        return Err(Error::InvalidArgument("distribution has no mass".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(len - 1);
        *counts.entry(idx).or_insert(0u64) += 1;
    }
    Ok(Histogram {
        n_qubits: len.trailing_zeros() as usize,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn random_state(n: usize, seed: u64) -> Statevector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<Complex64> = (0..1usize << n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Statevector::from_amplitudes(amps).unwrap()
    }

    fn assert_close(a: &Statevector, b: &Statevector, tol: f64) {
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn plus_state() {
        let s = Statevector::init_plus(1).unwrap();
        assert!((s.amplitudes()[0].re - 0.7071067812).abs() < 1e-10);
        assert!((s.amplitudes()[1].re - 0.7071067812).abs() < 1e-10);
        let s = Statevector::init_plus(10).unwrap();
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| a.re == 1.0 / 32.0 && a.im == 0.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn qubit_limits() {
        assert!(Statevector::init_plus(0).is_err());
        assert!(matches!(
            Statevector::init_plus(25),
            Err(Error::TooManyQubits { n: 25, .. })
        ));
    }

    #[test]
    fn warmstart_state_marginals() {
        let s = Statevector::init_warmstart(&[0.0]).unwrap();
        assert_eq!(s.amplitudes()[0].re, 1.0);
        assert_eq!(s.amplitudes()[1].re, 0.0);
        let s = Statevector::init_warmstart(&[FRAC_PI_2]).unwrap();
        assert!((s.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amplitudes()[1].re - FRAC_1_SQRT_2).abs() < 1e-15);

        let xs = [0.0, 0.13, 0.5, 0.77, 1.0];
        let thetas = warmstart_angles(&xs).unwrap();
        let s = Statevector::init_warmstart(&thetas).unwrap();
        for (q, &x) in xs.iter().enumerate() {
            assert!((s.marginal_one(q) - x).abs() < 1e-12);
        }
        assert!(Statevector::init_warmstart(&[-0.1]).is_err());
        assert!(Statevector::init_warmstart(&[PI + 0.1]).is_err());
    }

    #[test]
    fn cost_phase_properties() {
        let s0 = random_state(4, 3);
        let diag =
            DiagonalCost::from_values((0..16).map(|z| z as f64 * 0.37 - 1.0).collect()).unwrap();
        let mut s = s0.clone();
        s.apply_cost_phase(&diag, 0.0).unwrap();
        assert_eq!(s, s0);

        s.apply_cost_phase(&diag, 1.3).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        for (p, q) in s
            .measure_probabilities()
            .iter()
            .zip(s0.measure_probabilities())
        {
            assert!((p - q).abs() < 1e-12);
        }

        let flat = DiagonalCost::from_values(vec![2.5; 16]).unwrap();
        let mut g = s0.clone();
        g.apply_cost_phase(&flat, 0.4).unwrap();
        let phase = Complex64::from_polar(1.0, -0.4 * 2.5);
        for (a, b) in g.amplitudes().iter().zip(s0.amplitudes()) {
            assert!((a - b * phase).norm() < 1e-12);
        }

        let wrong = DiagonalCost::from_values(vec![0.0; 8]).unwrap();
        assert!(s.apply_cost_phase(&wrong, 1.0).is_err());
    }

    /// exp(iβX) by truncated power series on a 2x2 matrix.
    fn series_exp_ix(beta: f64) -> Gate {
        let x = [[0.0, 1.0], [1.0, 0.0]];
        let mut result = [
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ];
        let mut term = result;
        for k in 1..40 {
            let mut next = [[Complex64::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for m in 0..2 {
                        next[i][j] += term[i][m] * Complex64::new(0.0, beta) * x[m][j];
                    }
                    next[i][j] /= k as f64;
                }
            }
            term = next;
            for i in 0..2 {
                for j in 0..2 {
                    result[i][j] += term[i][j];
                }
            }
        }
        result
    }

    #[test]
    fn standard_mixer_matches_series() {
        for (seed, beta) in [(1u64, 0.3), (2, -1.1), (3, 2.7)] {
            let s0 = random_state(1, seed);
            let mut s = s0.clone();
            s.apply_standard_mixer(beta);
            let m = series_exp_ix(beta);
            let a = s0.amplitudes();
            let expect = [
                m[0][0] * a[0] + m[0][1] * a[1],
                m[1][0] * a[0] + m[1][1] * a[1],
            ];
            assert!((s.amplitudes()[0] - expect[0]).norm() < 1e-12);
            assert!((s.amplitudes()[1] - expect[1]).norm() < 1e-12);
        }
    }

    #[test]
    fn standard_mixer_flips_all_bits_at_half_pi() {
        let mut s = Statevector::basis(4, 0).unwrap();
        s.apply_standard_mixer(FRAC_PI_2);
        let probs = s.measure_probabilities();
        assert!((probs[15] - 1.0).abs() < 1e-12);
        // i^4 = 1
        assert!((s.amplitudes()[15] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let before = random_state(3, 9);
        let mut after = before.clone();
        after.apply_standard_mixer(0.0);
        assert_eq!(after, before);
    }

    #[test]
    fn warmstart_mixer_reduces_to_standard() {
        let thetas = vec![FRAC_PI_2; 5];
        for (seed, beta) in [(4u64, 0.2), (5, 1.9)] {
            let s0 = random_state(5, seed);
            let mut a = s0.clone();
            let mut b = s0.clone();
            a.apply_warmstart_mixer(beta, &thetas).unwrap();
            b.apply_standard_mixer(beta);
            assert_close(&a, &b, 1e-12);
        }
    }

    #[test]
    fn warmstart_state_is_mixer_eigenstate() {
        let thetas = [0.0, 0.4, 1.2, FRAC_PI_2, 2.9, PI];
        let s0 = Statevector::init_warmstart(&thetas).unwrap();
        let beta = 0.83;
        let mut s = s0.clone();
        s.apply_warmstart_mixer(beta, &thetas).unwrap();
        let phase = Complex64::from_polar(1.0, thetas.len() as f64 * beta);
        for (a, b) in s.amplitudes().iter().zip(s0.amplitudes()) {
            assert!((a - b * phase).norm() < 1e-12);
        }
        let mut same = s0.clone();
        same.apply_warmstart_mixer(0.0, &thetas).unwrap();
        assert_eq!(same, s0);
        assert!(s.apply_warmstart_mixer(0.1, &thetas[..3]).is_err());
    }

    #[test]
    fn probabilities_of_special_states() {
        let probs = Statevector::init_plus(3).unwrap().measure_probabilities();
        assert!(probs.iter().all(|&p| (p - 0.125).abs() < 1e-15));
        let probs = Statevector::basis(3, 7).unwrap().measure_probabilities();
        assert_eq!(probs, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let total: f64 = random_state(6, 1).measure_probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shots_on_basis_state_and_determinism() {
        let s = Statevector::basis(5, 19).unwrap();
        let h = s.sample_shots(500, 1).unwrap();
        assert_eq!(h.counts.len(), 1);
        assert_eq!(h.counts[&19], 500);

        let u = Statevector::init_plus(6).unwrap();
        assert_eq!(
            u.sample_shots(1000, 42).unwrap(),
            u.sample_shots(1000, 42).unwrap()
        );
        assert_ne!(
            u.sample_shots(1000, 42).unwrap(),
            u.sample_shots(1000, 43).unwrap()
        );
        assert!(u.sample_shots(0, 1).is_err());
    }

    #[test]
    fn uniform_shots_follow_binomial_band() {
        let s = Statevector::init_plus(10).unwrap();
        let shots = 1000u64;
        let h = s.sample_shots(shots, 7).unwrap();
        assert_eq!(h.total_shots(), shots);

        // Per-qubit marginals are Binomial(1000, 1/2): a 5-sigma band is meaningful.
        let sd = (shots as f64 * 0.25).sqrt();
        for q in 0..10 {
            let ones: u64 = h
                .counts
                .iter()
                .filter(|(z, _)| (*z >> q) & 1 == 1)
                .map(|(_, k)| k)
                .sum();
            assert!((ones as f64 - 500.0).abs() <= 5.0 * sd, "qubit {q}: {ones}");
        }

        // Per-state counts have mean ~0.98, where the normal approximation breaks
        // down; bound them by the exact binomial tail instead, at a family-wise
        // false-alarm rate below 1e-6 over all 1024 states.
        let p: f64 = 1.0 / 1024.0;
        let n = shots as f64;
        let mut pmf = (1.0 - p).powf(n);
        let mut tail = 1.0 - pmf;
        let mut c_max = 0u64;
        while tail * 1024.0 > 1e-6 {
            c_max += 1;
            pmf *= (n - c_max as f64 + 1.0) / c_max as f64 * p / (1.0 - p);
            tail -= pmf;
        }
        for (z, &c) in &h.counts {
            assert!(c <= c_max, "state {z}: {c} > {c_max}");
        }
    }
}
