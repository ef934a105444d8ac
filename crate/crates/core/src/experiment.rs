//! Experiment driver: instance sets × variants × depths, persisted records,
//! and plot-ready CSV tables.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance_lab::{appendix_instance, DeviationMeasure, GeneratorParams, InstanceEnsemble};
use crate::metrics::{
    brute_force_spectrum, ground_state_probability, mean_approx_ratio, Distribution,
    FeasibleSpectrum,
};
use crate::portfolio::{PortfolioInstance, QuboProblem};
use crate::preprocessing::{eliminate, round_relaxed, ReducedProblem, RoundingBounds};
use crate::qaoa::{
    optimize, pad_with_identity_layer, AnsatzSpec, ExpectationMode, Mixer, OptimizerConfig,
};
use crate::relaxation::relax;
use crate::seeding::{derive_seed, label_hash};
use crate::statevector::{sample_from_probabilities, warmstart_angles, DiagonalCost};

pub const RECORD_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Standard,
    Warmstart,
    /// Round with the given bounds, then run standard QAOA on what is left.
    Preprocessed {
        delta0: f64,
        delta1: f64,
    },
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::Standard => "standard".into(),
            Variant::Warmstart => "warmstart".into(),
            Variant::Preprocessed { delta0, delta1 } => format!("preprocessed({delta0},{delta1})"),
        }
    }

    fn bounds(&self) -> Result<Option<RoundingBounds>> {
        match *self {
            Variant::Preprocessed { delta0, delta1 } => {
                RoundingBounds::new(delta0, delta1).map(Some)
            }
            _ => Ok(None),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    /// Accepts `standard`, `warmstart` and `preprocessed(d0,d1)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "standard" => return Ok(Variant::Standard),
            "warmstart" | "warm-start" => return Ok(Variant::Warmstart),
            _ => {}
        }
        let inner = s
            .strip_prefix("preprocessed(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant '{s}'")))?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        let parse = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad bound '{t}' in '{s}'")))
        };
        match parts.as_slice() {
            [a, b] => Ok(Variant::Preprocessed {
                delta0: parse(a)?,
                delta1: parse(b)?,
            }),
            _ => Err(Error::InvalidArgument(format!(
                "expected two bounds in '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Hot,
    Cold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetSelector {
    pub measure: DeviationMeasure,
    pub k: usize,
    pub side: Side,
}

impl SubsetSelector {
    pub fn label(&self) -> String {
        let side = match self.side {
            Side::Hot => "hot",
            Side::Cold => "cold",
        };
        format!("{}-{side}", self.measure.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSource {
    Generate {
        count: usize,
        seed: u64,
        #[serde(default)]
        params: GeneratorParams,
    },
    /// An instance file, or the bundled DAX fixture when `path` is absent.
    Fixture {
        #[serde(default)]
        path: Option<PathBuf>,
    },
    Ensemble {
        path: PathBuf,
        #[serde(default)]
        subset: Option<SubsetSelector>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// `r` and `P` from a sampled histogram of `shots` measurements.
    #[default]
    Shots,
    /// `r` and `P` from the exact output distribution.
    Exact,
}

fn default_depths() -> Vec<usize> {
    (0..=7).collect()
}

fn default_shots() -> u64 {
    1000
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Standard, Variant::Warmstart]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Instance-set label used by the exports; derived from the source when empty.
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub seed: u64,
    pub source: InstanceSource,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub scoring: Scoring,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(source: InstanceSource) -> Self {
        ExperimentConfig {
            label: String::new(),
            seed: 0,
            source,
            variants: default_variants(),
            depths: default_depths(),
            shots: default_shots(),
            scoring: Scoring::default(),
            optimizer: OptimizerConfig::default(),
            out: None,
            threads: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "depths must be strictly ascending, got {:?}",
                self.depths
            )));
        }
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("no variants configured".into()));
        }
        let mut labels: Vec<String> = self.variants.iter().map(Variant::label).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.variants.len() {
            return Err(Error::Config("duplicate variants".into()));
        }
        for v in &self.variants {
            v.bounds().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.optimizer.restarts == 0 {
            return Err(Error::Config(
                "optimizer.restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn set_label(&self) -> String {
        if !self.label.is_empty() {
            return self.label.clone();
        }
        match &self.source {
            InstanceSource::Generate { .. } => "random".into(),
            InstanceSource::Fixture { .. } => "fixture".into(),
            InstanceSource::Ensemble {
                subset: Some(s), ..
            } => s.label(),
            InstanceSource::Ensemble { subset: None, .. } => "ensemble".into(),
        }
    }

    /// Resolves the configured source to `(seed, instance)` pairs.
    pub fn load_instances(&self) -> Result<(Vec<u64>, Vec<PortfolioInstance>, Option<String>)> {
        match &self.source {
            InstanceSource::Generate {
                count,
                seed,
                params,
            } => {
                let e = InstanceEnsemble::generate(params, *count, *seed)?;
                Ok((e.seeds, e.instances, Some(e.generator_version)))
            }
            InstanceSource::Fixture { path } => {
                let inst = match path {
                    Some(p) => PortfolioInstance::load(p)?,
                    None => appendix_instance(),
                };
                Ok((vec![0], vec![inst], None))
            }
            InstanceSource::Ensemble { path, subset } => {
                let mut e = InstanceEnsemble::load(path)?;
                if let Some(sel) = subset {
                    if e.annotations.is_none() {
                        e.annotate()?;
                    }
                    let hc = e.classify_hot_cold(sel.measure, sel.k)?;
                    let picks = match sel.side {
                        Side::Hot => hc.hot,
                        Side::Cold => hc.cold,
                    };
                    e = e.subset(&picks);
                }
                Ok((e.seeds, e.instances, Some(e.generator_version)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerMeta {
    pub evaluations: usize,
    pub restarts_used: usize,
    pub best_restart: usize,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub instance: usize,
    pub seed: u64,
    pub variant: String,
    pub p: usize,
    pub r_mean: Option<f64>,
    pub probability: Option<f64>,
    /// Exact `⟨F⟩` of the penalized objective on the full register.
    pub expectation: Option<f64>,
    pub optimizer: Option<OptimizerMeta>,
    /// Qubits left after rounding; preprocessed variants only.
    pub n_free: Option<usize>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

impl CellRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.r_mean.is_some() && self.probability.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variant: String,
    pub p: usize,
    /// Instances contributing; failed cells are excluded.
    pub n: usize,
    pub failed: usize,
    pub r_mean: f64,
    pub r_std: f64,
    pub p_mean: f64,
    pub p_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub instance: usize,
    pub seed: u64,
    pub fc_min: Option<f64>,
    pub fc_max: Option<f64>,
    pub optimal_indices: Vec<usize>,
    pub x_star: Vec<f64>,
    pub relax_converged: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub format: u32,
    pub label: String,
    pub generator_version: Option<String>,
    /// Always "population standard deviation over instances".
    pub dispersion: String,
    pub config: ExperimentConfig,
    pub instances: Vec<InstanceSummary>,
    pub cells: Vec<CellRecord>,
    pub aggregates: Vec<Aggregate>,
}

const DISPERSION: &str = "population standard deviation over instances";

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-(variant, p) mean and population standard deviation over instances.
pub fn compute_aggregates(config: &ExperimentConfig, cells: &[CellRecord]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for v in &config.variants {
        let label = v.label();
        for &p in &config.depths {
            let mut rs = Vec::new();
            let mut ps = Vec::new();
            let mut failed = 0;
            for c in cells.iter().filter(|c| c.variant == label && c.p == p) {
                if c.ok() {
                    rs.push(c.r_mean.unwrap());
                    ps.push(c.probability.unwrap());
                } else {
                    failed += 1;
                }
            }
            let (r_mean, r_std) = mean_std(&rs);
            let (p_mean, p_std) = mean_std(&ps);
            out.push(Aggregate {
                variant: label.clone(),
                p,
                n: rs.len(),
                failed,
                r_mean,
                r_std,
                p_mean,
                p_std,
            });
        }
    }
    out
}

fn same_float(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

impl ExperimentRecord {
    pub fn aggregate(&self, variant: &str, p: usize) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.variant == variant && a.p == p)
    }

    pub fn cell(&self, seed: u64, variant: &str, p: usize) -> Option<&CellRecord> {
        self.cells
            .iter()
            .find(|c| c.seed == seed && c.variant == variant && c.p == p)
    }

    /// Recomputes the aggregates from the rows and compares them bit for bit.
    pub fn verify_integrity(&self) -> Result<()> {
        let fresh = compute_aggregates(&self.config, &self.cells);
        if fresh.len() != self.aggregates.len() {
            return Err(Error::Integrity(format!(
                "expected {} aggregates, found {}",
                fresh.len(),
                self.aggregates.len()
            )));
        }
        for (a, b) in fresh.iter().zip(&self.aggregates) {
            let same = a.variant == b.variant
                && a.p == b.p
                && a.n == b.n
                && a.failed == b.failed
                && same_float(a.r_mean, b.r_mean)
                && same_float(a.r_std, b.r_std)
                && same_float(a.p_mean, b.p_mean)
                && same_float(a.p_std, b.p_std);
            if !same {
                return Err(Error::Integrity(format!(
                    "aggregate for {} at p={} does not match its rows",
                    b.variant, b.p
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let rec: ExperimentRecord = serde_json::from_str(text)?;
        if rec.format != RECORD_FORMAT {
            return Err(Error::Integrity(format!(
                "unsupported record format {}",
                rec.format
            )));
        }
        rec.verify_integrity()?;
        Ok(rec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

struct Prepared {
    instance: PortfolioInstance,
    qubo: QuboProblem,
    cost: DiagonalCost,
    x_star: Vec<f64>,
    spectrum: FeasibleSpectrum,
}

fn prepare(instance: PortfolioInstance) -> Result<(Prepared, bool)> {
    let qubo = instance.to_qubo();
    let relaxed = relax(&qubo)?;
    let spectrum = brute_force_spectrum(&instance)?;
    let cost = DiagonalCost::from_qubo(&qubo)?;
    Ok((
        Prepared {
            instance,
            qubo,
            cost,
            x_star: relaxed.x_star,
            spectrum,
        },
        relaxed.converged,
    ))
}

/// How a variant maps onto a circuit, and how its output maps back.
enum Plan {
    Circuit {
        spec: AnsatzSpec,
        reduced: Option<ReducedProblem>,
    },
    /// Nothing left to optimize after rounding.
    Fixed { reduced: ReducedProblem },
}

fn plan(prep: &Prepared, variant: &Variant) -> Result<Plan> {
    match variant {
        Variant::Standard => Ok(Plan::Circuit {
            spec: AnsatzSpec::from_cost(prep.cost.clone(), Mixer::Standard, 0)?,
            reduced: None,
        }),
        Variant::Warmstart => {
            let thetas = warmstart_angles(&prep.x_star)?;
            Ok(Plan::Circuit {
                spec: AnsatzSpec::from_cost(prep.cost.clone(), Mixer::WarmStart { thetas }, 0)?,
                reduced: None,
            })
        }
        Variant::Preprocessed { .. } => {
            let bounds = variant.bounds()?.expect("preprocessed has bounds");
            let rounding = round_relaxed(&prep.x_star, &bounds)?;
            let reduced = eliminate(&prep.qubo, &rounding.fixed)?;
            if reduced.n_free() == 0 {
                Ok(Plan::Fixed { reduced })
            } else {
                Ok(Plan::Circuit {
                    spec: AnsatzSpec::new(&reduced.qubo, Mixer::Standard, 0)?,
                    reduced: Some(reduced),
                })
            }
        }
    }
}

struct Scored {
    r: f64,
    prob: f64,
    expectation: f64,
}

fn score(
    prep: &Prepared,
    probs: &[f64],
    config: &ExperimentConfig,
    sample_seed: u64,
) -> Result<Scored> {
    let expectation = probs
        .iter()
        .zip(prep.cost.values())
        .map(|(w, c)| w * c)
        .sum();
    let (r, prob) = match config.scoring {
        Scoring::Exact => {
            let d = Distribution::Probabilities(probs);
            (
                mean_approx_ratio(d, &prep.instance, &prep.spectrum)?,
                ground_state_probability(d, &prep.spectrum)?,
            )
        }
        Scoring::Shots => {
            let hist = sample_from_probabilities(probs, config.shots, sample_seed)?;
            let d = Distribution::Shots(&hist);
            (
                mean_approx_ratio(d, &prep.instance, &prep.spectrum)?,
                ground_state_probability(d, &prep.spectrum)?,
            )
        }
    };
    Ok(Scored {
        r,
        prob,
        expectation,
    })
}

fn padded_to(start: &(Vec<f64>, Vec<f64>), p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut point = start.clone();
    while point.0.len() < p {
        point = pad_with_identity_layer(&point.0, &point.1);
    }
    point
}

type CellKey = (u64, String, usize);

/// Runs every configured depth for one (instance, variant) pair. Depth `p`
/// starts from the previous depth's optimum padded with identity layers.
fn run_sequence(
    position: usize,
    seed: u64,
    prep: &Result<Prepared>,
    variant: &Variant,
    config: &ExperimentConfig,
    previous: &HashMap<CellKey, CellRecord>,
) -> Vec<CellRecord> {
    let label = variant.label();
    let blank = |p: usize| CellRecord {
        instance: position,
        seed,
        variant: label.clone(),
        p,
        r_mean: None,
        probability: None,
        expectation: None,
        optimizer: None,
        n_free: None,
        wall_time_s: 0.0,
        error: None,
    };
    let fail_all = |msg: String| {
        config
            .depths
            .iter()
            .map(|&p| CellRecord {
                error: Some(msg.clone()),
                ..blank(p)
            })
            .collect::<Vec<_>>()
    };
    let prep = match prep {
        Ok(p) => p,
        Err(e) => return fail_all(format!("instance preparation failed: {e}")),
    };
    let plan = match plan(prep, variant) {
        Ok(p) => p,
        Err(e) => return fail_all(format!("variant setup failed: {e}")),
    };

    let variant_hash = label_hash(&label);
    let mut cells = Vec::with_capacity(config.depths.len());
    let mut last_opt: Option<(Vec<f64>, Vec<f64>)> = None;
    for &p in &config.depths {
        let key = (seed, label.clone(), p);
        if let Some(prev) = previous.get(&key).filter(|c| c.ok()) {
            last_opt = prev
                .optimizer
                .as_ref()
                .map(|m| (m.gammas.clone(), m.betas.clone()));
            cells.push(CellRecord {
                instance: position,
                ..prev.clone()
            });
            continue;
        }
        let started = Instant::now();
        let sample_seed = derive_seed(config.seed, &[seed, variant_hash, p as u64, 1]);
        let outcome: Result<(Scored, Option<OptimizerMeta>, Option<usize>)> = (|| match &plan {
            Plan::Fixed { reduced } => {
                let mut probs = vec![0.0; 1usize << reduced.n_original];
                probs[reduced.lift_index(0)] = 1.0;
                let s = score(prep, &probs, config, sample_seed)?;
                Ok((s, None, Some(0)))
            }
            Plan::Circuit { spec, reduced } => {
                let spec = spec.with_depth(p);
                let (state, meta) = if p == 0 {
                    (spec.initial_state()?, None)
                } else {
                    let mut opt_cfg = config.optimizer;
                    opt_cfg.seed = derive_seed(config.seed, &[seed, variant_hash, p as u64, 0]);
                    if let ExpectationMode::Shots { shots, .. } = opt_cfg.mode {
                        opt_cfg.mode = ExpectationMode::Shots {
                            shots,
                            seed: derive_seed(config.seed, &[seed, variant_hash, p as u64, 2]),
                        };
                    }
                    let seeds: Vec<(Vec<f64>, Vec<f64>)> =
                        last_opt.iter().map(|s| padded_to(s, p)).collect();
                    let res = optimize(&spec, &opt_cfg, &seeds)?;
                    let meta = OptimizerMeta {
                        evaluations: res.evaluations,
                        restarts_used: res.restarts_used,
                        best_restart: res.best_restart,
                        gammas: res.best_gammas,
                        betas: res.best_betas,
                    };
                    (res.final_state, Some(meta))
                };
                let probs = state.measure_probabilities();
                let full = match reduced {
                    Some(red) => red.lift_probabilities(&probs),
                    None => probs,
                };
                let s = score(prep, &full, config, sample_seed)?;
                Ok((s, meta, reduced.as_ref().map(ReducedProblem::n_free)))
            }
        })();
        let elapsed = started.elapsed().as_secs_f64();
        match outcome {
            Ok((s, meta, n_free)) => {
                last_opt = meta.as_ref().map(|m| (m.gammas.clone(), m.betas.clone()));
                cells.push(CellRecord {
                    r_mean: Some(s.r),
                    probability: Some(s.prob),
                    expectation: Some(s.expectation),
                    optimizer: meta,
                    n_free,
                    wall_time_s: elapsed,
                    ..blank(p)
                });
            }
            Err(e) => {
                log::warn!("cell seed={seed} variant={label} p={p} failed: {e}");
                last_opt = None;
                cells.push(CellRecord {
                    wall_time_s: elapsed,
                    error: Some(e.to_string()),
                    ..blank(p)
                });
            }
        }
    }
    log::info!(
        "instance seed={seed} variant={label}: {} cells, {} failed",
        cells.len(),
        cells.iter().filter(|c| !c.ok()).count()
    );
    cells
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    run_experiment_resuming(config, None)
}

/// Every variant and depth of `config` on one in-memory instance, sequentially.
/// The config's instance source is ignored.
pub fn run_single(
    instance: PortfolioInstance,
    instance_seed: u64,
    config: &ExperimentConfig,
) -> Result<Vec<CellRecord>> {
    config.validate()?;
    let prep = prepare(instance).map(|(p, _)| p);
    let previous = HashMap::new();
    Ok(config
        .variants
        .iter()
        .flat_map(|v| run_sequence(0, instance_seed, &prep, v, config, &previous))
        .collect())
}

/// Like [`run_experiment`], reusing successful cells of `previous` keyed by
/// (instance seed, variant, p).
pub fn run_experiment_resuming(
    config: &ExperimentConfig,
    previous: Option<&ExperimentRecord>,
) -> Result<ExperimentRecord> {
    config.validate()?;
    let (seeds, instances, generator_version) = config.load_instances()?;
    let previous: HashMap<CellKey, CellRecord> = previous
        .map(|rec| {
            rec.cells
                .iter()
                .map(|c| ((c.seed, c.variant.clone(), c.p), c.clone()))
                .collect()
        })
        .unwrap_or_default();

    let work = || {
        let prepared: Vec<(Result<Prepared>, Option<bool>)> = instances
            .into_par_iter()
            .map(|inst| match prepare(inst) {
                Ok((p, conv)) => (Ok(p), Some(conv)),
                Err(e) => (Err(e), None),
            })
            .collect();
        let jobs: Vec<(usize, &Variant)> = (0..prepared.len())
            .flat_map(|i| config.variants.iter().map(move |v| (i, v)))
            .collect();
        let results: Vec<Vec<CellRecord>> = jobs
            .par_iter()
            .map(|&(i, v)| run_sequence(i, seeds[i], &prepared[i].0, v, config, &previous))
            .collect();
        (prepared, results)
    };
    let (prepared, results) = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let summaries = prepared
        .iter()
        .enumerate()
        .map(|(i, (prep, conv))| match prep {
            Ok(p) => InstanceSummary {
                instance: i,
                seed: seeds[i],
                fc_min: Some(p.spectrum.fc_min),
                fc_max: Some(p.spectrum.fc_max),
                optimal_indices: p.spectrum.optimal_indices.clone(),
                x_star: p.x_star.clone(),
                relax_converged: *conv,
                error: None,
            },
            Err(e) => InstanceSummary {
                instance: i,
                seed: seeds[i],
                fc_min: None,
                fc_max: None,
                optimal_indices: Vec::new(),
                x_star: Vec::new(),
                relax_converged: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let cells: Vec<CellRecord> = results.into_iter().flatten().collect();
    let aggregates = compute_aggregates(config, &cells);
    Ok(ExperimentRecord {
        format: RECORD_FORMAT,
        label: config.set_label(),
        generator_version,
        dispersion: DISPERSION.into(),
        config: config.clone(),
        instances: summaries,
        cells,
        aggregates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Standard vs warm-start on the random set.
    Fig1,
    /// Standard vs warm-start on random, hot and cold sets, one panel per measure.
    Fig3,
    /// Every variant on the random set.
    Fig4,
    /// Every variant on each hot and cold set, one panel per set.
    Fig5,
}

impl std::str::FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            other => Err(Error::InvalidArgument(format!("unknown figure '{other}'"))),
        }
    }
}

impl Figure {
    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }
}

/// One `<name>_r.csv` / `<name>_p.csv` pair.
struct Panel {
    name: String,
    sets: Vec<String>,
    /// `None` takes every variant present in the set's record.
    variants: Option<Vec<String>>,
    prefix_set: bool,
}

fn panels(figure: Figure) -> Vec<Panel> {
    let pair = Some(vec!["standard".to_string(), "warmstart".to_string()]);
    match figure {
        Figure::Fig1 => vec![Panel {
            name: "fig1".into(),
            sets: vec!["random".into()],
            variants: pair,
            prefix_set: false,
        }],
        Figure::Fig3 => ["sigma", "eps"]
            .iter()
            .map(|m| Panel {
                name: format!("fig3_{m}"),
                sets: vec!["random".into(), format!("{m}-hot"), format!("{m}-cold")],
                variants: pair.clone(),
                prefix_set: true,
            })
            .collect(),
        Figure::Fig4 => vec![Panel {
            name: "fig4".into(),
            sets: vec!["random".into()],
            variants: None,
            prefix_set: false,
        }],
        Figure::Fig5 => ["eps-cold", "sigma-cold", "eps-hot", "sigma-hot"]
            .iter()
            .map(|s| Panel {
                name: format!("fig5_{s}"),
                sets: vec![s.to_string()],
                variants: None,
                prefix_set: false,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tables {
    /// `(file name, CSV text)` in a fixed order.
    pub files: Vec<(String, String)>,
    /// `set`, `set:variant` or `set:variant:p=…` for everything the figure needs but lacks.
    pub missing: Vec<String>,
}

const CSV_HEADER: &str = "p,variant,mean,stddev\n";

/// Builds the CSV tables of `figure` from records identified by their set label.
pub fn figure_tables(records: &[ExperimentRecord], figure: Figure) -> Tables {
    let mut files = Vec::new();
    let mut missing = Vec::new();
    for panel in panels(figure) {
        let mut r_csv = String::from(CSV_HEADER);
        let mut p_csv = String::from(CSV_HEADER);
        for set in &panel.sets {
            let Some(rec) = records.iter().find(|r| &r.label == set) else {
                missing.push(set.clone());
                continue;
            };
            let present: Vec<String> = rec.config.variants.iter().map(Variant::label).collect();
            let wanted = panel.variants.clone().unwrap_or_else(|| present.clone());
            for v in &wanted {
                if !present.contains(v) {
                    missing.push(format!("{set}:{v}"));
                    continue;
                }
                let name = if panel.prefix_set {
                    format!("{set}:{v}")
                } else {
                    v.clone()
                };
                for &p in &rec.config.depths {
                    match rec.aggregate(v, p).filter(|a| a.n > 0) {
                        Some(a) => {
                            let _ = writeln!(r_csv, "{p},{name},{},{}", a.r_mean, a.r_std);
                            let _ = writeln!(p_csv, "{p},{name},{},{}", a.p_mean, a.p_std);
                        }
                        None => missing.push(format!("{set}:{v}:p={p}")),
                    }
                }
            }
        }
        files.push((format!("{}_r.csv", panel.name), r_csv));
        files.push((format!("{}_p.csv", panel.name), p_csv));
    }
    missing.dedup();
    Tables { files, missing }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportReport {
    pub files: Vec<PathBuf>,
    pub missing: Vec<String>,
}

/// Writes the figure's CSV files into `dir`; missing cells are skipped and listed.
pub fn export_tables(
    records: &[ExperimentRecord],
    figure: Figure,
    dir: impl AsRef<Path>,
) -> Result<ExportReport> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tables = figure_tables(records, figure);
    let mut files = Vec::new();
    for (name, text) in &tables.files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    Ok(ExportReport {
        files,
        missing: tables.missing,
    })
}

/// Writes the ε-vs-σ scatter of an annotated ensemble to `dir/fig2_scatter.csv`.
pub fn export_scatter(
    ensemble: &InstanceEnsemble,
    k: usize,
    dir: impl AsRef<Path>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("fig2_scatter.csv");
    std::fs::write(&path, ensemble.scatter_csv(k)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
