use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use warmqaoa::experiment::{
    export_scatter, export_tables, run_experiment_resuming, ExperimentConfig, ExperimentRecord,
    Figure,
};
use warmqaoa::instance_lab::{GeneratorParams, InstanceEnsemble};
use warmqaoa::verify::verify_instance;
use warmqaoa::{appendix_instance, Error, PortfolioInstance};

const OUT_ENV: &str = "WARMQAOA_OUT";
const DEFAULT_OUT: &str = "warmqaoa-out";

#[derive(Parser, Debug)]
#[command(
    name = "warmqaoa",
    version,
    about = "Warm-start and preprocessed QAOA experiments for portfolio QUBOs"
)]
struct Cli {
    /// Base seed; overrides the config file's seed where one applies.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config (TOML), required by `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. Falls back to $WARMQAOA_OUT, then the config, then ./warmqaoa-out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random instance ensemble into the output directory.
    GenerateEnsemble {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = GeneratorParams::default().n_assets)]
        n_assets: usize,
        #[arg(long, default_value_t = GeneratorParams::default().t_samples)]
        t_samples: usize,
    },
    /// Annotate an ensemble with relaxed and binary optima and write the ε/σ scatter.
    Classify {
        #[arg(long)]
        ensemble: PathBuf,
        /// Hot/cold subset size.
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Run the experiment described by --config.
    Run {
        /// Reuse finished cells from an existing record in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Write plot-ready CSV tables.
    Export {
        /// fig1, fig3, fig4, fig5 or scatter.
        #[arg(long)]
        figure: String,
        /// Record files; defaults to every *.record.json in the output directory.
        #[arg(long, num_args = 1..)]
        records: Vec<PathBuf>,
        /// Annotated ensemble, for the scatter.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Run the oracle checks on an instance (the bundled DAX fixture by default).
    Verify {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
}

/// Usage and configuration problems exit with 2, runtime failures with 1.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn out_dir(cli: &Cli, from_config: Option<&Path>) -> PathBuf {
    if let Some(p) = &cli.out {
        return p.clone();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    from_config
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn record_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".record.json"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::GenerateEnsemble {
            count,
            n_assets,
            t_samples,
        } => {
            let params = GeneratorParams {
                n_assets: *n_assets,
                t_samples: *t_samples,
                budget: n_assets / 2,
                ..GeneratorParams::default()
            };
            let dir = out_dir(cli, None);
            let ensemble = with_threads(cli.threads, || {
                InstanceEnsemble::generate(&params, *count, cli.seed.unwrap_or(0))
            })??;
            ensemble.save(&dir)?;
            println!("wrote {} instances to {}", ensemble.len(), dir.display());
        }
        Command::Classify { ensemble, k } => {
            let mut ens = InstanceEnsemble::load(ensemble)?;
            if ens.annotations.is_none() {
                with_threads(cli.threads, || ens.annotate())??;
                ens.save(ensemble)?;
            }
            let dir = out_dir(cli, None);
            let scatter = export_scatter(&ens, *k, &dir)?;
            let report = ens.report(*k)?;
            let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
            let report_path = dir.join("classification_report.json");
            std::fs::write(&report_path, &text).map_err(|e| Error::io(&report_path, e))?;
            println!("{text}");
            println!("scatter: {}", scatter.display());
        }
        Command::Run { resume } => {
            let Some(path) = &cli.config else {
                return Err(Failure::Usage("run requires --config <FILE>".into()));
            };
            let mut config = ExperimentConfig::load(path).map_err(|e| match e {
                Error::Io { .. } => Failure::Usage(e.to_string()),
                other => other.into(),
            })?;
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            if cli.threads.is_some() {
                config.threads = cli.threads;
            }
            config.validate()?;
            let dir = out_dir(cli, config.out.as_deref());
            let record_path = dir.join(format!("{}.record.json", config.set_label()));
            let previous = if *resume && record_path.exists() {
                Some(ExperimentRecord::load(&record_path)?)
            } else {
                None
            };
            let record = run_experiment_resuming(&config, previous.as_ref())?;
            record.save(&record_path)?;
            for a in &record.aggregates {
                println!(
                    "{:<26} p={} r={:.4}±{:.4} P={:.4}±{:.4} n={}",
                    a.variant, a.p, a.r_mean, a.r_std, a.p_mean, a.p_std, a.n
                );
            }
            println!("record: {}", record_path.display());
            let failed = record.cells.iter().filter(|c| !c.ok()).count();
            if failed > 0 {
                return Err(Failure::Runtime(format!(
                    "{failed} cells failed; see the record"
                )));
            }
        }
        Command::Export {
            figure,
            records,
            ensemble,
            k,
        } => {
            let dir = out_dir(cli, None);
            if figure == "scatter" {
                let Some(path) = ensemble else {
                    return Err(Failure::Usage(
                        "scatter export requires --ensemble <DIR>".into(),
                    ));
                };
                let ens = InstanceEnsemble::load(path)?;
                println!("{}", export_scatter(&ens, *k, &dir)?.display());
                return Ok(());
            }
            let figure: Figure = figure
                .parse()
                .map_err(|e: Error| Failure::Usage(e.to_string()))?;
            let paths = if records.is_empty() {
                record_files(&dir)?
            } else {
                records.clone()
            };
            let loaded = paths
                .iter()
                .map(ExperimentRecord::load)
                .collect::<Result<Vec<_>, _>>()?;
            let report = export_tables(&loaded, figure, &dir)?;
            for f in &report.files {
                println!("{}", f.display());
            }
            if !report.missing.is_empty() {
                for m in &report.missing {
                    eprintln!("missing: {m}");
                }
                return Err(Failure::Runtime(format!(
                    "{} required cells missing; tables are partial",
                    report.missing.len()
                )));
            }
        }
        Command::Verify { instance } => {
            let inst = match instance {
                Some(p) => PortfolioInstance::load(p)?,
                None => appendix_instance(),
            };
            let checks = verify_instance(&inst, cli.seed.unwrap_or(0))?;
            let mut all = true;
            for c in &checks {
                println!(
                    "{} {:<24} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                all &= c.passed;
            }
            if !all {
                return Err(Failure::Runtime("verification failed".into()));
            }
        }
    }
    Ok(())
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, Failure> {
    match threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Failure::Runtime(e.to_string())),
        None => Ok(f()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
