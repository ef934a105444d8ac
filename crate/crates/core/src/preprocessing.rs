//! Classical preprocessing for standard QAOA: round relaxed values that are
//! close to 0 or 1, substitute them into the QUBO, and lift reduced-register
//! outcomes back to full selections.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bits::index_from_bits;
use crate::error::{Error, Result};
use crate::metrics::{approx_ratio, FeasibleSpectrum};
use crate::portfolio::{PortfolioInstance, QuboProblem};
use crate::statevector::Histogram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundingBounds {
    delta0: f64,
    delta1: f64,
}

impl RoundingBounds {
    pub fn new(delta0: f64, delta1: f64) -> Result<Self> {
        let ok = |d: f64| d.is_finite() && (0.0..=1.0).contains(&d);
        if !ok(delta0) || !ok(delta1) {
            return Err(Error::InvalidArgument(format!(
                "rounding bounds ({delta0}, {delta1}) must lie in [0, 1]"
            )));
        }
        if delta0 + delta1 > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "rounding bounds ({delta0}, {delta1}) overlap: delta0 + delta1 > 1"
            )));
        }
        Ok(RoundingBounds { delta0, delta1 })
    }

    /// Naive rounding of every variable at 0.5.
    pub fn classical() -> Self {
        RoundingBounds {
            delta0: 0.5,
            delta1: 0.5,
        }
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }
    pub fn delta1(&self) -> f64 {
        self.delta1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rounding {
    /// Original index to fixed value.
    pub fixed: BTreeMap<usize, u8>,
    /// Indices left free, ascending.
    pub free: Vec<usize>,
}

/// `x*ᵢ ≤ δ₀ → 0`, else `x*ᵢ ≥ 1−δ₁ → 1`, else free. The 0-branch is tested
/// first, so at `δ₀ = δ₁ = 0.5` a value of exactly 0.5 rounds to 0.
pub fn round_relaxed(x_star: &[f64], bounds: &RoundingBounds) -> Result<Rounding> {
    let mut fixed = BTreeMap::new();
    let mut free = Vec::new();
    for (i, &x) in x_star.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!(
                "relaxed value x*[{i}] = {x} outside [0, 1]"
            )));
        }
        if x <= bounds.delta0 {
            fixed.insert(i, 0);
        } else if x >= 1.0 - bounds.delta1 {
            fixed.insert(i, 1);
        } else {
            free.push(i);
        }
    }
    Ok(Rounding { fixed, free })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    /// QUBO over the free variables; its offset already contains every
    /// constant produced by substitution.
    pub qubo: QuboProblem,
    pub fixed: BTreeMap<usize, u8>,
    pub free_index_map: Vec<usize>,
    /// Constant contributed by the fixed variables (the original offset excluded).
    pub offset_accumulated: f64,
    pub n_original: usize,
}

impl ReducedProblem {
    pub fn n_free(&self) -> usize {
        self.free_index_map.len()
    }

    pub fn evaluate(&self, y: &[u8]) -> Result<f64> {
        self.qubo.evaluate(y)
    }

    /// Inserts `y` into the free positions, fixed values elsewhere.
    pub fn lift(&self, y: &[u8]) -> Result<Vec<u8>> {
        if y.len() != self.n_free() {
            return Err(Error::LengthMismatch {
                expected: self.n_free(),
                got: y.len(),
            });
        }
        let mut bits = vec![0u8; self.n_original];
        for (&i, &v) in &self.fixed {
            bits[i] = v;
        }
        for (&i, &v) in self.free_index_map.iter().zip(y) {
            bits[i] = v;
        }
        Ok(bits)
    }

    /// Lift on basis-state indices.
    pub fn lift_index(&self, reduced_index: usize) -> usize {
        let mut z = self
            .fixed
            .iter()
            .filter(|(_, &v)| v == 1)
            .fold(0usize, |acc, (&i, _)| acc | (1 << i));
        for (k, &i) in self.free_index_map.iter().enumerate() {
            if (reduced_index >> k) & 1 == 1 {
                z |= 1 << i;
            }
        }
        z
    }

    /// Inverse of [`lift`](Self::lift) on the free positions.
    pub fn restrict(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.n_original {
            return Err(Error::LengthMismatch {
                expected: self.n_original,
                got: bits.len(),
            });
        }
        Ok(self.free_index_map.iter().map(|&i| bits[i]).collect())
    }

    /// Maps a reduced-register histogram onto the full register.
    pub fn lift_histogram(&self, hist: &Histogram) -> Histogram {
        let mut counts = BTreeMap::new();
        for (&z, &k) in &hist.counts {
            *counts.entry(self.lift_index(z)).or_insert(0) += k;
        }
        Histogram {
            n_qubits: self.n_original,
            counts,
        }
    }

    /// Maps a reduced-register probability vector onto the full register.
    pub fn lift_probabilities(&self, probs: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; 1usize << self.n_original];
        for (z, &p) in probs.iter().enumerate() {
            full[self.lift_index(z)] += p;
        }
        full
    }

    /// Full bitstring when nothing is free.
    pub fn fixed_bits(&self) -> Vec<u8> {
        let mut bits = vec![0u8; self.n_original];
        for (&i, &v) in &self.fixed {
            bits[i] = v;
        }
        bits
    }
}

/// Substitutes the fixed values into `xᵀFx + fᵀx + c`.
///
/// Fixed–fixed products and fixed linear terms become constants, fixed–free
/// cross terms `2·F_ij·x_j` move into the free variables' linear
/// coefficients, and the free×free block is kept as is.
pub fn eliminate(problem: &QuboProblem, fixed: &BTreeMap<usize, u8>) -> Result<ReducedProblem> {
    let n = problem.n_vars();
    if let Some((&i, _)) = fixed.iter().find(|(&i, &v)| i >= n || v > 1) {
        return Err(Error::InvalidArgument(format!(
            "fixed entry {i} is out of range or not binary"
        )));
    }
    let free: Vec<usize> = (0..n).filter(|i| !fixed.contains_key(i)).collect();
    let ones: Vec<usize> = fixed
        .iter()
        .filter(|(_, &v)| v == 1)
        .map(|(&i, _)| i)
        .collect();

    let mut constant = 0.0;
    for &i in &ones {
        constant += problem.lin[i];
        for &j in &ones {
            constant += problem.quad[(i, j)];
        }
    }

    let k = free.len();
    let quad = DMatrix::from_fn(k, k, |a, b| problem.quad[(free[a], free[b])]);
    let lin = DVector::from_fn(k, |a, _| {
        let i = free[a];
        problem.lin[i] + 2.0 * ones.iter().map(|&j| problem.quad[(i, j)]).sum::<f64>()
    });
    Ok(ReducedProblem {
        qubo: QuboProblem {
            quad,
            lin,
            offset: problem.offset + constant,
        },
        fixed: fixed.clone(),
        free_index_map: free,
        offset_accumulated: constant,
        n_original: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub bits: Vec<u8>,
    pub ratio: f64,
    /// 1 when the rounded selection is optimal, else 0.
    pub probability: f64,
}

/// Rounds every relaxed value at 0.5 and scores the resulting selection.
pub fn classical_baseline(
    instance: &PortfolioInstance,
    x_star: &[f64],
    spectrum: &FeasibleSpectrum,
) -> Result<BaselineOutcome> {
    if x_star.len() != instance.n_assets() {
        return Err(Error::LengthMismatch {
            expected: instance.n_assets(),
            got: x_star.len(),
        });
    }
    let rounding = round_relaxed(x_star, &RoundingBounds::classical())?;
    debug_assert!(rounding.free.is_empty());
    let mut bits = vec![0u8; x_star.len()];
    for (&i, &v) in &rounding.fixed {
        bits[i] = v;
    }
    let ratio = approx_ratio(&bits, instance, spectrum)?;
    let optimal = spectrum
        .optimal_indices
        .binary_search(&index_from_bits(&bits))
        .is_ok();
    Ok(BaselineOutcome {
        bits,
        ratio,
        probability: if optimal { 1.0 } else { 0.0 },
    })
}
