//! Oracle checks run by `warmqaoa verify` against a single instance.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::{bits_from_index, weight};
use crate::error::Result;
use crate::metrics::{
    brute_force_penalized_argmin, brute_force_spectrum, ground_state_probability,
    mean_approx_ratio, ratio_table, Distribution,
};
use crate::portfolio::PortfolioInstance;
use crate::preprocessing::{eliminate, round_relaxed, RoundingBounds};
use crate::qaoa::{AnsatzSpec, Mixer};
use crate::relaxation::{convexify, relax, satisfies_box_kkt};
use crate::statevector::{warmstart_angles, Statevector};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn max_amp_diff(a: &Statevector, b: &Statevector) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> Result<Statevector> {
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Statevector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect())
}

/// Runs every check; an `Err` means a check could not even be set up.
pub fn verify_instance(instance: &PortfolioInstance, seed: u64) -> Result<Vec<CheckOutcome>> {
    let n = instance.n_assets();
    let dim = 1usize << n;
    let qubo = instance.to_qubo();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for z in 0..dim {
        let bits = bits_from_index(z, n);
        worst = worst.max((qubo.evaluate(&bits)? - instance.penalized_cost(&bits)?).abs());
    }
    out.push(outcome(
        "qubo_equivalence",
        worst <= 1e-12,
        format!("max |diff| = {worst:e}"),
    ));

    let (opt, _) = brute_force_penalized_argmin(instance)?;
    out.push(outcome(
        "penalty_separation",
        weight(opt) as usize == instance.budget(),
        format!("penalized optimum selects {} assets", weight(opt)),
    ));

    let relaxed = relax(&qubo)?;
    let convex = convexify(&qubo);
    let kkt = satisfies_box_kkt(&convex, &relaxed.x_star, 1e-9);
    let binary_min = (0..dim)
        .map(|z| qubo.evaluate_index(z))
        .fold(f64::INFINITY, f64::min);
    out.push(outcome(
        "relaxation_optimality",
        kkt && relaxed.objective <= binary_min + 1e-12,
        format!(
            "kkt = {kkt}, relaxed {:.12} vs binary min {:.12}",
            relaxed.objective, binary_min
        ),
    ));

    let thetas = warmstart_angles(&relaxed.x_star)?;
    let start = Statevector::init_warmstart(&thetas)?;
    let before = start.measure_probabilities();
    let mut worst = 0.0f64;
    for _ in 0..8 {
        let beta = rng.random_range(0.0..std::f64::consts::PI);
        let mut s = start.clone();
        s.apply_warmstart_mixer(beta, &thetas)?;
        for (a, b) in s.measure_probabilities().iter().zip(&before) {
            worst = worst.max((a - b).abs());
        }
    }
    out.push(outcome(
        "warmstart_eigenstate",
        worst <= 1e-12,
        format!("max probability change = {worst:e}"),
    ));

    let half_pi = vec![FRAC_PI_2; n];
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let beta = rng.random_range(0.0..std::f64::consts::PI);
        let base = random_state(n, &mut rng)?;
        let mut a = base.clone();
        a.apply_standard_mixer(beta);
        let mut b = base;
        b.apply_warmstart_mixer(beta, &half_pi)?;
        worst = worst.max(max_amp_diff(&a, &b));
    }
    out.push(outcome(
        "half_pi_reduction",
        worst <= 1e-12,
        format!("max amplitude diff = {worst:e}"),
    ));

    let spectrum = brute_force_spectrum(instance)?;
    let spec = AnsatzSpec::new(&qubo, Mixer::Standard, 0)?;
    let probs = spec.initial_state()?.measure_probabilities();
    let d = Distribution::Probabilities(&probs);
    let p0 = ground_state_probability(d, &spectrum)?;
    let r0 = mean_approx_ratio(d, instance, &spectrum)?;
    let enumerated = ratio_table(instance, &spectrum).iter().sum::<f64>() / dim as f64;
    let expected_p = spectrum.optimal_indices.len() as f64 / dim as f64;
    out.push(outcome(
        "uniform_baseline",
        p0 == expected_p && (r0 - enumerated).abs() <= 1e-12,
        format!("P = {p0:e}, r = {r0:.15} vs {enumerated:.15}"),
    ));

    let gammas: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..6.0)).collect();
    let betas: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..3.0)).collect();
    let shallow = spec.with_depth(2).build_state(&gammas, &betas)?;
    let deep = spec
        .with_depth(3)
        .build_state(&[gammas[0], gammas[1], 0.0], &[betas[0], betas[1], 0.0])?;
    let diff = max_amp_diff(&shallow, &deep);
    out.push(outcome(
        "identity_layer",
        diff <= 1e-12,
        format!("max amplitude diff = {diff:e}"),
    ));

    let rounding = round_relaxed(&relaxed.x_star, &RoundingBounds::new(0.25, 0.25)?)?;
    let reduced = eliminate(&qubo, &rounding.fixed)?;
    let mut worst = 0.0f64;
    for y in 0..1usize << reduced.n_free() {
        let reduced_value = reduced.qubo.evaluate_index(y);
        worst = worst.max((reduced_value - qubo.evaluate_index(reduced.lift_index(y))).abs());
    }
    out.push(outcome(
        "elimination_equivalence",
        worst <= 1e-12,
        format!(
            "{} free variables, max |diff| = {worst:e}",
            reduced.n_free()
        ),
    ));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance_lab::appendix_instance;

    #[test]
    fn appendix_passes_every_check() {
        let checks = verify_instance(&appendix_instance(), 0).unwrap();
        assert_eq!(checks.len(), 8);
        for c in checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
