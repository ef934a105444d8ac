//! Depth-`p` QAOA ansatz, its expectation objective, and the gradient-free
//! outer loop over `(γ, β)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::portfolio::QuboProblem;
use crate::seeding::derive_seed;
use crate::statevector::{DiagonalCost, Statevector};

#[derive(Debug, Clone, PartialEq)]
pub enum Mixer {
    /// `|+⟩^⊗N` start, `exp(iβΣX)` mixer.
    Standard,
    /// Product start `⊗R_Y(θᵢ)|0⟩`, tilted mixer with the same angles.
    WarmStart { thetas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSpec {
    mixer: Mixer,
    depth: usize,
    cost: DiagonalCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpectationMode {
    #[default]
    Exact,
    Shots {
        shots: u64,
        seed: u64,
    },
}

impl AnsatzSpec {
    pub fn new(problem: &QuboProblem, mixer: Mixer, depth: usize) -> Result<Self> {
        Self::from_cost(DiagonalCost::from_qubo(problem)?, mixer, depth)
    }

    pub fn from_cost(cost: DiagonalCost, mixer: Mixer, depth: usize) -> Result<Self> {
        if let Mixer::WarmStart { thetas } = &mixer {
            if thetas.len() != cost.n_qubits() {
                return Err(Error::LengthMismatch {
                    expected: cost.n_qubits(),
                    got: thetas.len(),
                });
            }
            // Validates the angle range up front.
            Statevector::init_warmstart(thetas)?;
        }
        Ok(AnsatzSpec { mixer, depth, cost })
    }

    /// Same circuit family at another depth.
    pub fn with_depth(&self, depth: usize) -> Self {
        AnsatzSpec {
            depth,
            ..self.clone()
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn mixer(&self) -> &Mixer {
        &self.mixer
    }
    pub fn cost(&self) -> &DiagonalCost {
        &self.cost
    }
    pub fn n_qubits(&self) -> usize {
        self.cost.n_qubits()
    }

    pub fn initial_state(&self) -> Result<Statevector> {
        match &self.mixer {
            Mixer::Standard => Statevector::init_plus(self.n_qubits()),
            Mixer::WarmStart { thetas } => Statevector::init_warmstart(thetas),
        }
    }

    /// Applies `p` layers of cost phase followed by mixer to the initial state.
    pub fn build_state(&self, gammas: &[f64], betas: &[f64]) -> Result<Statevector> {
        for len in [gammas.len(), betas.len()] {
            if len != self.depth {
                return Err(Error::LengthMismatch {
                    expected: self.depth,
                    got: len,
                });
            }
        }
        let mut state = self.initial_state()?;
        for (&gamma, &beta) in gammas.iter().zip(betas) {
            state.apply_cost_phase(&self.cost, gamma)?;
            match &self.mixer {
                Mixer::Standard => state.apply_standard_mixer(beta),
                Mixer::WarmStart { thetas } => state.apply_warmstart_mixer(beta, thetas)?,
            }
        }
        Ok(state)
    }

    pub fn expectation(&self, gammas: &[f64], betas: &[f64], mode: ExpectationMode) -> Result<f64> {
        let state = self.build_state(gammas, betas)?;
        self.state_expectation(&state, mode)
    }

    /// `⟨F⟩` of an arbitrary state of this ansatz's register.
    pub fn state_expectation(&self, state: &Statevector, mode: ExpectationMode) -> Result<f64> {
        let values = self.cost.values();
        match mode {
            ExpectationMode::Exact => Ok(state
                .amplitudes()
                .iter()
                .zip(values)
                .map(|(a, c)| a.norm_sqr() * c)
                .sum()),
            ExpectationMode::Shots { shots, seed } => {
                let hist = state.sample_shots(shots, seed)?;
                let total: f64 = hist
                    .counts
                    .iter()
                    .map(|(&z, &k)| values[z] * k as f64)
                    .sum();
                Ok(total / shots as f64)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Total starts per optimization, including any supplied seed points.
    pub restarts: usize,
    /// Evaluation budget per start is `max_evals_per_layer · p`.
    pub max_evals_per_layer: usize,
    pub simplex_tol: f64,
    pub initial_step: f64,
    pub seed: u64,
    pub mode: ExpectationMode,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 10,
            max_evals_per_layer: 2000,
            simplex_tol: 1e-6,
            initial_step: 0.1,
            seed: 0,
            mode: ExpectationMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_gammas: Vec<f64>,
    pub best_betas: Vec<f64>,
    pub best_expectation: f64,
    pub evaluations: usize,
    pub restarts_used: usize,
    /// Index of the start that produced the optimum.
    pub best_restart: usize,
    pub final_state: Statevector,
}

/// Mixer angles have period π up to a global phase.
fn wrap_beta(beta: f64) -> f64 {
    beta.rem_euclid(PI)
}

fn split_params(x: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let gammas = x[..p].to_vec();
    let betas = x[p..].iter().map(|&b| wrap_beta(b)).collect();
    (gammas, betas)
}

/// Multi-start Nelder–Mead over the `2p` parameters.
///
/// `seed_points` (γ, β) pairs are tried first, each counting as one start;
/// the remaining starts draw γ ∈ [0, 2π), β ∈ [0, π) from a ChaCha stream
/// keyed by `config.seed`. At least one random start always runs. The best
/// value wins, ties going to the earlier start.
pub fn optimize(
    spec: &AnsatzSpec,
    config: &OptimizerConfig,
    seed_points: &[(Vec<f64>, Vec<f64>)],
) -> Result<OptimizationResult> {
    let p = spec.depth();
    if p == 0 {
        let state = spec.initial_state()?;
        let value = spec.state_expectation(&state, config.mode)?;
        return Ok(OptimizationResult {
            best_gammas: Vec::new(),
            best_betas: Vec::new(),
            best_expectation: value,
            evaluations: 0,
            restarts_used: 0,
            best_restart: 0,
            final_state: state,
        });
    }
    for (g, b) in seed_points {
        if g.len() != p || b.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                got: g.len().max(b.len()),
            });
        }
    }

    let n_random = config.restarts.saturating_sub(seed_points.len()).max(1);
    let mut starts: Vec<Vec<f64>> = seed_points
        .iter()
        .map(|(g, b)| g.iter().chain(b.iter()).copied().collect())
        .collect();
    for r in 0..n_random {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[r as u64]));
        let mut x: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        x.extend((0..p).map(|_| rng.random_range(0.0..PI)));
        starts.push(x);
    }

    let opts = NelderMeadOptions {
        initial_step: config.initial_step,
        f_tol: config.simplex_tol,
        max_evals: config.max_evals_per_layer.saturating_mul(p).max(1),
    };

    let mut total_evals = 0;
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for (idx, x0) in starts.iter().enumerate() {
        let mode = match config.mode {
            ExpectationMode::Exact => ExpectationMode::Exact,
            ExpectationMode::Shots { shots, seed } => ExpectationMode::Shots {
                shots,
                seed: derive_seed(seed, &[idx as u64]),
            },
        };
        // Track the best point ever evaluated, independent of simplex bookkeeping.
        let mut seen: Option<(Vec<f64>, f64)> = None;
        let mut first_err = None;
        let result = nelder_mead::minimize(
            |x| {
                let (g, b) = split_params(x, p);
                match spec.expectation(&g, &b, mode) {
                    Ok(v) => {
                        if seen.as_ref().map_or(true, |(_, fv)| v < *fv) {
                            seen = Some((x.to_vec(), v));
                        }
                        v
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                        f64::INFINITY
                    }
                }
            },
            x0,
            &opts,
        );
        if let Some(e) = first_err {
            return Err(e);
        }
        total_evals += result.evaluations;
        let (x, fx) = seen.unwrap_or((result.x, result.fx));
        if best.as_ref().map_or(true, |(_, _, fb)| fx < *fb) {
            best = Some((idx, x, fx));
        }
    }

    let (best_restart, x, _) = best.expect("at least one start runs");
    let (best_gammas, best_betas) = split_params(&x, p);
    let final_state = spec.build_state(&best_gammas, &best_betas)?;
    // Recompute at the reported (wrapped) parameters so the stored value is
    // reproducible from them.
    let best_expectation = match config.mode {
        ExpectationMode::Exact => spec.state_expectation(&final_state, ExpectationMode::Exact)?,
        ExpectationMode::Shots { shots, seed } => spec.state_expectation(
            &final_state,
            ExpectationMode::Shots {
                shots,
                seed: derive_seed(seed, &[best_restart as u64]),
            },
        )?,
    };
    Ok(OptimizationResult {
        best_gammas,
        best_betas,
        best_expectation,
        evaluations: total_evals,
        restarts_used: starts.len(),
        best_restart,
        final_state,
    })
}

/// Depth-`p` optimum padded with an identity layer, as a start for depth `p+1`.
pub fn pad_with_identity_layer(gammas: &[f64], betas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut g = gammas.to_vec();
    let mut b = betas.to_vec();
    g.push(0.0);
    b.push(0.0);
    (g, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::warmstart_angles;
    use nalgebra::{DMatrix, DVector};

    fn small_problem() -> QuboProblem {
        QuboProblem::new(
            DMatrix::from_row_slice(2, 2, &[0.3, 0.8, 0.8, -0.2]),
            DVector::from_vec(vec![-0.9, 0.4]),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn depth_zero_is_initial_state() {
        let spec = AnsatzSpec::new(&small_problem(), Mixer::Standard, 0).unwrap();
        let s = spec.build_state(&[], &[]).unwrap();
        assert_eq!(s, Statevector::init_plus(2).unwrap());
        assert!(spec.build_state(&[0.1], &[0.2]).is_err());
    }

    #[test]
    fn identity_layers_keep_uniform_state() {
        let spec = AnsatzSpec::new(&small_problem(), Mixer::Standard, 3).unwrap();
        let s = spec.build_state(&[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(s, Statevector::init_plus(2).unwrap());
    }

    #[test]
    fn uniform_expectation_is_cost_average() {
        let problem = small_problem();
        let spec = AnsatzSpec::new(&problem, Mixer::Standard, 0).unwrap();
        let mean = (0..4).map(|z| problem.evaluate_index(z)).sum::<f64>() / 4.0;
        let e = spec.expectation(&[], &[], ExpectationMode::Exact).unwrap();
        assert!((e - mean).abs() < 1e-14);
    }

    #[test]
    fn basis_state_expectation_is_its_cost() {
        let problem = small_problem();
        // θ = (π, 0) prepares |01⟩ read as index 1.
        let spec = AnsatzSpec::new(
            &problem,
            Mixer::WarmStart {
                thetas: vec![PI, 0.0],
            },
            0,
        )
        .unwrap();
        let e = spec.expectation(&[], &[], ExpectationMode::Exact).unwrap();
        assert!((e - problem.evaluate_index(1)).abs() < 1e-12);
    }

    #[test]
    fn warmstart_probabilities_survive_mixer_only_layers() {
        let problem = small_problem();
        let thetas = warmstart_angles(&[0.3, 0.8]).unwrap();
        let spec = AnsatzSpec::new(&problem, Mixer::WarmStart { thetas }, 2).unwrap();
        let s0 = spec.initial_state().unwrap().measure_probabilities();
        let s = spec
            .build_state(&[0.0, 0.0], &[0.7, 2.1])
            .unwrap()
            .measure_probabilities();
        for (a, b) in s.iter().zip(&s0) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_cost_is_optimal_everywhere() {
        let cost = DiagonalCost::from_values(vec![1.75; 8]).unwrap();
        let spec = AnsatzSpec::from_cost(cost, Mixer::Standard, 2).unwrap();
        let cfg = OptimizerConfig {
            restarts: 2,
            ..Default::default()
        };
        let r = optimize(&spec, &cfg, &[]).unwrap();
        assert!((r.best_expectation - 1.75).abs() < 1e-12);
    }

    #[test]
    fn reported_expectation_matches_parameters() {
        let spec = AnsatzSpec::new(&small_problem(), Mixer::Standard, 2).unwrap();
        let r = optimize(&spec, &OptimizerConfig::default(), &[]).unwrap();
        let again = spec
            .expectation(&r.best_gammas, &r.best_betas, ExpectationMode::Exact)
            .unwrap();
        assert!((again - r.best_expectation).abs() < 1e-10);
        assert!(r.best_betas.iter().all(|b| (0.0..PI).contains(b)));
        assert_eq!(r.restarts_used, 10);
    }

    #[test]
    fn p1_matches_dense_grid_search() {
        let spec = AnsatzSpec::new(&small_problem(), Mixer::Standard, 1).unwrap();
        let cfg = OptimizerConfig {
            restarts: 20,
            ..Default::default()
        };
        let r = optimize(&spec, &cfg, &[]).unwrap();
        let mut grid_best = f64::INFINITY;
        for i in 0..200 {
            for j in 0..200 {
                let g = 2.0 * PI * i as f64 / 200.0;
                let b = PI * j as f64 / 200.0;
                let v = spec
                    .expectation(&[g], &[b], ExpectationMode::Exact)
                    .unwrap();
                grid_best = grid_best.min(v);
            }
        }
        assert!(
            r.best_expectation <= grid_best + 1e-3,
            "{} vs {grid_best}",
            r.best_expectation
        );
        assert!(
            r.best_expectation >= grid_best - 1e-3,
            "{} vs {grid_best}",
            r.best_expectation
        );
    }

    #[test]
    fn optimum_respects_spectrum_lower_bound() {
        let problem = small_problem();
        let spec = AnsatzSpec::new(&problem, Mixer::Standard, 2).unwrap();
        let r = optimize(&spec, &OptimizerConfig::default(), &[]).unwrap();
        assert!(r.best_expectation >= spec.cost().min_value() - 1e-12);
    }

    #[test]
    fn shots_mode_is_deterministic() {
        let spec = AnsatzSpec::new(&small_problem(), Mixer::Standard, 1).unwrap();
        let cfg = OptimizerConfig {
            restarts: 2,
            mode: ExpectationMode::Shots {
                shots: 200,
                seed: 3,
            },
            ..Default::default()
        };
        let a = optimize(&spec, &cfg, &[]).unwrap();
        let b = optimize(&spec, &cfg, &[]).unwrap();
        assert_eq!(a.best_gammas, b.best_gammas);
        assert_eq!(a.best_expectation, b.best_expectation);
    }
}
