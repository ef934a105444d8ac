//! Brute-force oracles and the two scoring measures: the feasibility-gated
//! approximation ratio `r` and the ground-state probability `P`.
//!
//! Both are computed from the unpenalized portfolio cost, so neither depends
//! on the penalty weight.

use serde::{Deserialize, Serialize};

use crate::bits::{bits_from_index, weight};
use crate::error::{Error, Result};
use crate::portfolio::PortfolioInstance;
use crate::statevector::{Histogram, MAX_QUBITS};

/// Relative tolerance for treating two feasible costs as the same optimum.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSpectrum {
    pub fc_min: f64,
    pub fc_max: f64,
    pub argmin_bits: Vec<u8>,
    pub argmin_index: usize,
    /// Every feasible basis index whose cost ties the minimum.
    pub optimal_indices: Vec<usize>,
    pub feasible_count: usize,
    pub n_assets: usize,
    pub budget: usize,
}

impl FeasibleSpectrum {
    pub fn is_degenerate(&self) -> bool {
        self.fc_min == self.fc_max
    }

    pub fn has_ties(&self) -> bool {
        self.optimal_indices.len() > 1
    }
}

/// Enumerates every selection with exactly `B` assets.
pub fn brute_force_spectrum(instance: &PortfolioInstance) -> Result<FeasibleSpectrum> {
    let n = instance.n_assets();
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits { n, max: MAX_QUBITS });
    }
    let budget = instance.budget();
    let mut fc_min = f64::INFINITY;
    let mut fc_max = f64::NEG_INFINITY;
    let mut argmin_index = 0;
    let mut feasible = Vec::new();
    for z in 0..1usize << n {
        if weight(z) as usize != budget {
            continue;
        }
        let c = instance.portfolio_cost_index(z);
        // Strict comparison: the lowest index wins ties.
        if c < fc_min {
            fc_min = c;
            argmin_index = z;
        }
        fc_max = fc_max.max(c);
        feasible.push((z, c));
    }
    let tie_band = TIE_TOL * fc_min.abs().max(1.0);
    let optimal_indices = feasible
        .iter()
        .filter(|(_, c)| (c - fc_min).abs() <= tie_band)
        .map(|&(z, _)| z)
        .collect();
    Ok(FeasibleSpectrum {
        fc_min,
        fc_max,
        argmin_bits: bits_from_index(argmin_index, n),
        argmin_index,
        optimal_indices,
        feasible_count: feasible.len(),
        n_assets: n,
        budget,
    })
}

/// Minimizer of the penalized objective over all `2^N` selections, lowest index on ties.
pub fn brute_force_penalized_argmin(instance: &PortfolioInstance) -> Result<(usize, f64)> {
    let n = instance.n_assets();
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits { n, max: MAX_QUBITS });
    }
    let qubo = instance.to_qubo();
    let mut best = (0, f64::INFINITY);
    for z in 0..1usize << n {
        let v = qubo.evaluate_index(z);
        if v < best.1 {
            best = (z, v);
        }
    }
    Ok(best)
}

fn ratio_for_index(index: usize, instance: &PortfolioInstance, spectrum: &FeasibleSpectrum) -> f64 {
    if weight(index) as usize != spectrum.budget {
        return 0.0;
    }
    if spectrum.is_degenerate() {
        return 1.0;
    }
    let c = instance.portfolio_cost_index(index);
    ((c - spectrum.fc_max) / (spectrum.fc_min - spectrum.fc_max)).clamp(0.0, 1.0)
}

/// `(F_C(x) − F_C^max)/(F_C^min − F_C^max)` on feasible `x`, 0 otherwise.
///
/// When all feasible selections cost the same, every one of them is optimal
/// and scores 1.
pub fn approx_ratio(
    bits: &[u8],
    instance: &PortfolioInstance,
    spectrum: &FeasibleSpectrum,
) -> Result<f64> {
    if bits.len() != spectrum.n_assets || bits.len() != instance.n_assets() {
        return Err(Error::LengthMismatch {
            expected: spectrum.n_assets,
            got: bits.len(),
        });
    }
    Ok(ratio_for_index(
        crate::bits::index_from_bits(bits),
        instance,
        spectrum,
    ))
}

/// Approximation ratio of every basis state.
pub fn ratio_table(instance: &PortfolioInstance, spectrum: &FeasibleSpectrum) -> Vec<f64> {
    (0..1usize << spectrum.n_assets)
        .map(|z| ratio_for_index(z, instance, spectrum))
        .collect()
}

/// Measurement outcomes over the full `N`-qubit register.
#[derive(Debug, Clone, Copy)]
pub enum Distribution<'a> {
    Probabilities(&'a [f64]),
    Shots(&'a Histogram),
}

impl Distribution<'_> {
    fn check(&self, n: usize) -> Result<()> {
        let got = match self {
            Distribution::Probabilities(p) => p.len(),
            Distribution::Shots(h) => 1usize << h.n_qubits,
        };
        if got != 1usize << n {
            return Err(Error::LengthMismatch {
                expected: 1usize << n,
                got,
            });
        }
        if let Distribution::Shots(h) = self {
            if h.total_shots() == 0 {
                return Err(Error::InvalidArgument("histogram has no shots".into()));
            }
        }
        Ok(())
    }

    /// Expectation of `f(index)` under this distribution.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        match self {
            Distribution::Probabilities(p) => p.iter().enumerate().map(|(z, &w)| w * f(z)).sum(),
            Distribution::Shots(h) => {
                let total = h.total_shots() as f64;
                h.counts.iter().map(|(&z, &k)| k as f64 * f(z)).sum::<f64>() / total
            }
        }
    }
}

pub fn mean_approx_ratio(
    dist: Distribution<'_>,
    instance: &PortfolioInstance,
    spectrum: &FeasibleSpectrum,
) -> Result<f64> {
    dist.check(spectrum.n_assets)?;
    Ok(dist.expect(|z| ratio_for_index(z, instance, spectrum)))
}

/// Mass on the optimal selection; exact ties all count as optimal.
pub fn ground_state_probability(
    dist: Distribution<'_>,
    spectrum: &FeasibleSpectrum,
) -> Result<f64> {
    dist.check(spectrum.n_assets)?;
    Ok(dist.expect(|z| {
        if spectrum.optimal_indices.binary_search(&z).is_ok() {
            1.0
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance_lab::appendix_instance;
    use nalgebra::DMatrix;
    use std::collections::BTreeMap;

    fn two_asset() -> PortfolioInstance {
        PortfolioInstance::new(vec![1.0, 0.0], DMatrix::zeros(2, 2), 0.5, 1, None).unwrap()
    }

    #[test]
    fn forced_two_asset_spectrum() {
        let s = brute_force_spectrum(&two_asset()).unwrap();
        assert_eq!(s.argmin_bits, vec![1, 0]);
        assert_eq!(s.fc_min, -0.5);
        assert_eq!(s.fc_max, 0.0);
        assert_eq!(s.feasible_count, 2);
    }

    #[test]
    fn appendix_enumerates_252_portfolios() {
        let inst = appendix_instance();
        let s = brute_force_spectrum(&inst).unwrap();
        assert_eq!(s.feasible_count, 252);
        assert!(s.fc_min < s.fc_max);
        assert!(inst.is_feasible(&s.argmin_bits));
    }

    #[test]
    fn degenerate_spectrum_scores_one() {
        let inst =
            PortfolioInstance::new(vec![0.0; 4], DMatrix::identity(4, 4), 0.5, 2, None).unwrap();
        let s = brute_force_spectrum(&inst).unwrap();
        assert!(s.is_degenerate());
        assert_eq!(s.optimal_indices.len(), 6);
        assert_eq!(approx_ratio(&[1, 1, 0, 0], &inst, &s).unwrap(), 1.0);
        assert_eq!(approx_ratio(&[1, 1, 1, 0], &inst, &s).unwrap(), 0.0);
        let uniform = vec![1.0 / 16.0; 16];
        let p = ground_state_probability(Distribution::Probabilities(&uniform), &s).unwrap();
        assert!((p - 6.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_extremes() {
        let inst = appendix_instance();
        let s = brute_force_spectrum(&inst).unwrap();
        assert_eq!(approx_ratio(&s.argmin_bits, &inst, &s).unwrap(), 1.0);
        let worst = (0..1024usize)
            .filter(|&z| weight(z) == 5)
            .max_by(|&a, &b| {
                inst.portfolio_cost_index(a)
                    .total_cmp(&inst.portfolio_cost_index(b))
            })
            .unwrap();
        assert_eq!(
            approx_ratio(&bits_from_index(worst, 10), &inst, &s).unwrap(),
            0.0
        );
        assert_eq!(approx_ratio(&[1; 10], &inst, &s).unwrap(), 0.0);
        assert!(approx_ratio(&[1; 9], &inst, &s).is_err());
    }

    #[test]
    fn ratio_ignores_penalty_weight() {
        let inst = appendix_instance();
        let other = inst.with_penalty(123.0).unwrap();
        let s1 = brute_force_spectrum(&inst).unwrap();
        let s2 = brute_force_spectrum(&other).unwrap();
        for z in (0..1024).step_by(7) {
            let b = bits_from_index(z, 10);
            assert_eq!(
                approx_ratio(&b, &inst, &s1).unwrap(),
                approx_ratio(&b, &other, &s2).unwrap()
            );
        }
    }

    #[test]
    fn point_masses_and_infeasible_mass() {
        let inst = appendix_instance();
        let s = brute_force_spectrum(&inst).unwrap();
        let mut point = vec![0.0; 1024];
        point[s.argmin_index] = 1.0;
        let d = Distribution::Probabilities(&point);
        assert_eq!(mean_approx_ratio(d, &inst, &s).unwrap(), 1.0);
        assert_eq!(ground_state_probability(d, &s).unwrap(), 1.0);

        let mut bad = vec![0.0; 1024];
        bad[0] = 0.5;
        bad[1023] = 0.5;
        let d = Distribution::Probabilities(&bad);
        assert_eq!(mean_approx_ratio(d, &inst, &s).unwrap(), 0.0);
        assert_eq!(ground_state_probability(d, &s).unwrap(), 0.0);

        let uniform = vec![1.0 / 1024.0; 1024];
        let p = ground_state_probability(Distribution::Probabilities(&uniform), &s).unwrap();
        assert!((p - 1.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_distribution() {
        let inst = appendix_instance();
        let s = brute_force_spectrum(&inst).unwrap();
        let mut counts = BTreeMap::new();
        counts.insert(s.argmin_index, 3);
        counts.insert(0, 1);
        let h = Histogram {
            n_qubits: 10,
            counts,
        };
        let d = Distribution::Shots(&h);
        assert_eq!(mean_approx_ratio(d, &inst, &s).unwrap(), 0.75);
        assert_eq!(ground_state_probability(d, &s).unwrap(), 0.75);
        let empty = Histogram {
            n_qubits: 10,
            counts: BTreeMap::new(),
        };
        assert!(mean_approx_ratio(Distribution::Shots(&empty), &inst, &s).is_err());
    }
}
