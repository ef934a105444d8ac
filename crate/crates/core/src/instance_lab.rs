//! Random instance generation, relaxed-vs-binary deviation measures, and
//! hot/cold subset selection over large ensembles.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{bits_from_index, bits_to_string};
use crate::error::{Error, Result};
use crate::metrics::brute_force_penalized_argmin;
use crate::portfolio::PortfolioInstance;
use crate::relaxation::relax;

/// Stamped into every ensemble manifest; bump whenever generated numbers change.
pub const GENERATOR_VERSION: &str = "gaussian-two-factor-v2";

const TRADING_DAYS: f64 = 252.0;
const N_FACTORS: usize = 2;
const APPENDIX_JSON: &str = include_str!("../fixtures/dax10.json");

/// Ten DAX assets with the published returns and covariances, `q = 0.5`, `B = 5`.
pub fn appendix_instance() -> PortfolioInstance {
    PortfolioInstance::from_json_str(APPENDIX_JSON).expect("bundled fixture is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_assets: usize,
    pub t_samples: usize,
    pub q: f64,
    pub budget: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            n_assets: 10,
            t_samples: 10080,
            q: 0.5,
            budget: 5,
        }
    }
}

/// Synthetic instance from simulated daily returns with `q = 0.5`, `B = ⌊n/2⌋`.
pub fn generate_instance(n: usize, seed: u64, t_samples: usize) -> Result<PortfolioInstance> {
    generate_with(
        &GeneratorParams {
            n_assets: n,
            t_samples,
            q: 0.5,
            budget: n / 2,
        },
        seed,
    )
}

/// Two common factors plus idiosyncratic noise, sampled for `t_samples` days.
///
/// Each asset gets an annual drift from U(0.08, 0.12), an annual volatility
/// from U(0.4, 0.5), and a systematic variance share from U(0.5, 0.9) spread
/// over the factors by a random Gaussian loading direction. Loadings of mixed
/// sign give mixed correlations. `μ` is the annualized sample mean and `σ` the
/// annualized sample covariance, so `σ` is a Gram matrix and PSD by construction.
pub fn generate_with(params: &GeneratorParams, seed: u64) -> Result<PortfolioInstance> {
    let n = params.n_assets;
    let t = params.t_samples;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 assets, got {n}"
        )));
    }
    if t < n + 1 {
        return Err(Error::InvalidArgument(format!(
            "t_samples = {t} must be at least n + 1 = {}",
            n + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drift: Vec<f64> = (0..n).map(|_| rng.random_range(0.08..0.12)).collect();
    let vol: Vec<f64> = (0..n).map(|_| rng.random_range(0.4..0.5)).collect();
    let share: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..0.9)).collect();
    let loadings: Vec<[f64; N_FACTORS]> = share
        .iter()
        .map(|&s| {
            let mut v = [0.0; N_FACTORS];
            for l in v.iter_mut() {
                *l = rng.sample(StandardNormal);
            }
            let norm = v.iter().map(|l| l * l).sum::<f64>().sqrt();
            v.map(|l| l / norm * s.sqrt())
        })
        .collect();

    let day_scale = TRADING_DAYS.sqrt().recip();
    let mut returns = DMatrix::<f64>::zeros(t, n);
    for day in 0..t {
        let mut factors = [0.0; N_FACTORS];
        for f in factors.iter_mut() {
            *f = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            let common: f64 = loadings[i].iter().zip(&factors).map(|(l, f)| l * f).sum();
            let shock = common + (1.0 - share[i]).sqrt() * e;
            returns[(day, i)] = drift[i] / TRADING_DAYS + vol[i] * day_scale * shock;
        }
    }

    let means: Vec<f64> = (0..n).map(|i| returns.column(i).mean()).collect();
    let mut sigma = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let cov = (0..t)
                .map(|d| (returns[(d, i)] - means[i]) * (returns[(d, j)] - means[j]))
                .sum::<f64>()
                / (t - 1) as f64;
            sigma[(i, j)] = cov * TRADING_DAYS;
            sigma[(j, i)] = sigma[(i, j)];
        }
    }
    let mu: Vec<f64> = means.iter().map(|m| m * TRADING_DAYS).collect();
    PortfolioInstance::new(mu, sigma, params.q, params.budget, None)
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// Largest componentwise deviation `max |x*ᵢ − x_optᵢ|`.
pub fn epsilon_measure(x_star: &[f64], x_opt: &[u8]) -> Result<f64> {
    check_lengths(x_star.len(), x_opt.len())?;
    Ok(x_star
        .iter()
        .zip(x_opt)
        .map(|(&x, &b)| (x - b as f64).abs())
        .fold(0.0, f64::max))
}

/// Root-mean-square deviation between relaxed and binary optimum.
pub fn sigma_measure(x_star: &[f64], x_opt: &[u8]) -> Result<f64> {
    check_lengths(x_star.len(), x_opt.len())?;
    if x_star.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = x_star
        .iter()
        .zip(x_opt)
        .map(|(&x, &b)| (x - b as f64).powi(2))
        .sum();
    Ok((ss / x_star.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationMeasure {
    Epsilon,
    Sigma,
}

impl DeviationMeasure {
    pub fn label(&self) -> &'static str {
        match self {
            DeviationMeasure::Epsilon => "eps",
            DeviationMeasure::Sigma => "sigma",
        }
    }
}

impl std::str::FromStr for DeviationMeasure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" | "eps" => Ok(DeviationMeasure::Epsilon),
            "sigma" | "rmse" => Ok(DeviationMeasure::Sigma),
            other => Err(Error::InvalidArgument(format!("unknown measure '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub x_star: Vec<f64>,
    pub x_opt: Vec<u8>,
    pub epsilon: f64,
    pub sigma: f64,
    pub relax_converged: bool,
}

impl Annotation {
    pub fn measure(&self, m: DeviationMeasure) -> f64 {
        match m {
            DeviationMeasure::Epsilon => self.epsilon,
            DeviationMeasure::Sigma => self.sigma,
        }
    }
}

/// Relaxes the instance and finds the penalized brute-force optimum.
pub fn annotate_instance(instance: &PortfolioInstance) -> Result<Annotation> {
    let relaxed = relax(&instance.to_qubo())?;
    let (opt_index, _) = brute_force_penalized_argmin(instance)?;
    let x_opt = bits_from_index(opt_index, instance.n_assets());
    if !instance.is_feasible(&x_opt) {
        return Err(Error::InfeasibleOptimum {
            bits: bits_to_string(&x_opt),
        });
    }
    Ok(Annotation {
        epsilon: epsilon_measure(&relaxed.x_star, &x_opt)?,
        sigma: sigma_measure(&relaxed.x_star, &x_opt)?,
        x_star: relaxed.x_star,
        x_opt,
        relax_converged: relaxed.converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEnsemble {
    pub generator_version: String,
    pub params: Option<GeneratorParams>,
    pub seeds: Vec<u64>,
    pub instances: Vec<PortfolioInstance>,
    pub annotations: Option<Vec<Annotation>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HotCold {
    /// Positions in the ensemble, smallest deviation first.
    pub hot: Vec<usize>,
    /// Positions in the ensemble, largest deviation first.
    pub cold: Vec<usize>,
}

impl InstanceEnsemble {
    /// `count` instances with seeds `base_seed, base_seed + 1, …`.
    pub fn generate(params: &GeneratorParams, count: usize, base_seed: u64) -> Result<Self> {
        let seeds: Vec<u64> = (0..count as u64)
            .map(|i| base_seed.wrapping_add(i))
            .collect();
        let instances = seeds
            .par_iter()
            .map(|&s| generate_with(params, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(InstanceEnsemble {
            generator_version: GENERATOR_VERSION.to_string(),
            params: Some(*params),
            seeds,
            instances,
            annotations: None,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Computes `(x*, x_opt, ε, σ)` for every instance, in parallel.
    pub fn annotate(&mut self) -> Result<()> {
        let ann = self
            .instances
            .par_iter()
            .map(annotate_instance)
            .collect::<Result<Vec<_>>>()?;
        self.annotations = Some(ann);
        Ok(())
    }

    pub fn annotations(&self) -> Result<&[Annotation]> {
        self.annotations.as_deref().ok_or(Error::MissingAnnotations)
    }

    /// Sub-ensemble at the given positions, annotations carried along.
    pub fn subset(&self, positions: &[usize]) -> InstanceEnsemble {
        InstanceEnsemble {
            generator_version: self.generator_version.clone(),
            params: self.params,
            seeds: positions.iter().map(|&i| self.seeds[i]).collect(),
            instances: positions
                .iter()
                .map(|&i| self.instances[i].clone())
                .collect(),
            annotations: self
                .annotations
                .as_ref()
                .map(|a| positions.iter().map(|&i| a[i].clone()).collect()),
        }
    }

    /// The `k` smallest (hot) and `k` largest (cold) instances under `measure`,
    /// ties broken by ascending seed.
    pub fn classify_hot_cold(&self, measure: DeviationMeasure, k: usize) -> Result<HotCold> {
        let ann = self.annotations()?;
        if 2 * k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} exceeds half the ensemble size {}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            ann[a]
                .measure(measure)
                .total_cmp(&ann[b].measure(measure))
                .then(self.seeds[a].cmp(&self.seeds[b]))
        });
        let hot = order[..k].to_vec();
        order.sort_by(|&a, &b| {
            ann[b]
                .measure(measure)
                .total_cmp(&ann[a].measure(measure))
                .then(self.seeds[a].cmp(&self.seeds[b]))
        });
        let cold = order[..k].to_vec();
        Ok(HotCold { hot, cold })
    }

    /// Per-instance `seed,epsilon,sigma,subset` rows for the ε-vs-σ scatter.
    /// `subset` joins every hot/cold label the instance carries with `+`.
    pub fn scatter_csv(&self, k: usize) -> Result<String> {
        let ann = self.annotations()?;
        let eps = self.classify_hot_cold(DeviationMeasure::Epsilon, k)?;
        let sig = self.classify_hot_cold(DeviationMeasure::Sigma, k)?;
        let mut out = String::from("seed,epsilon,sigma,subset\n");
        for (i, a) in ann.iter().enumerate() {
            let mut labels = Vec::new();
            for (name, set) in [
                ("eps-hot", &eps.hot),
                ("eps-cold", &eps.cold),
                ("sigma-hot", &sig.hot),
                ("sigma-cold", &sig.cold),
            ] {
                if set.contains(&i) {
                    labels.push(name);
                }
            }
            let label = if labels.is_empty() {
                "none".to_string()
            } else {
                labels.join("+")
            };
            writeln!(
                out,
                "{},{:.10},{:.10},{}",
                self.seeds[i], a.epsilon, a.sigma, label
            )
            .expect("writing to a String cannot fail");
        }
        Ok(out)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let inst_dir = dir.join("instances");
        std::fs::create_dir_all(&inst_dir).map_err(|e| Error::io(&inst_dir, e))?;
        let mut entries = Vec::with_capacity(self.len());
        for (i, inst) in self.instances.iter().enumerate() {
            let file = format!("instances/seed_{}.json", self.seeds[i]);
            inst.save(dir.join(&file))?;
            entries.push(ManifestEntry {
                seed: self.seeds[i],
                file,
                annotation: self.annotations.as_ref().map(|a| a[i].clone()),
            });
        }
        let manifest = Manifest {
            generator_version: self.generator_version.clone(),
            params: self.params,
            entries,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let mut seeds = Vec::new();
        let mut instances = Vec::new();
        let mut annotations = Vec::new();
        for entry in manifest.entries {
            seeds.push(entry.seed);
            instances.push(PortfolioInstance::load(dir.join(&entry.file))?);
            annotations.push(entry.annotation);
        }
        let annotations = if !annotations.is_empty() && annotations.iter().all(Option::is_some) {
            Some(annotations.into_iter().flatten().collect())
        } else {
            None
        };
        Ok(InstanceEnsemble {
            generator_version: manifest.generator_version,
            params: manifest.params,
            seeds,
            instances,
            annotations,
        })
    }

    pub fn report(&self, k: usize) -> Result<EnsembleReport> {
        let ann = self.annotations()?;
        let eps = self.classify_hot_cold(DeviationMeasure::Epsilon, k)?;
        let frac = |set: &[usize], pred: &dyn Fn(&Annotation) -> bool| {
            if set.is_empty() {
                0.0
            } else {
                set.iter().filter(|&&i| pred(&ann[i])).count() as f64 / set.len() as f64
            }
        };
        Ok(EnsembleReport {
            size: self.len(),
            k,
            eps_cold_above_half: frac(&eps.cold, &|a| a.epsilon > 0.5),
            eps_cold_above_three_quarters: frac(&eps.cold, &|a| a.epsilon > 0.75),
            eps_hot_below_half: frac(&eps.hot, &|a| a.epsilon < 0.5),
            mean_epsilon: ann.iter().map(|a| a.epsilon).sum::<f64>() / ann.len().max(1) as f64,
            mean_sigma: ann.iter().map(|a| a.sigma).sum::<f64>() / ann.len().max(1) as f64,
            unconverged_relaxations: ann.iter().filter(|a| !a.relax_converged).count(),
        })
    }
}

/// Ensemble-level statistics for comparison with published qualitative observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub size: usize,
    pub k: usize,
    pub eps_cold_above_half: f64,
    pub eps_cold_above_three_quarters: f64,
    pub eps_hot_below_half: f64,
    pub mean_epsilon: f64,
    pub mean_sigma: f64,
    pub unconverged_relaxations: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    generator_version: String,
    #[serde(default)]
    params: Option<GeneratorParams>,
    entries: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    seed: u64,
    file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotation: Option<Annotation>,
}
