use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

use warmqaoa::experiment::ExperimentRecord;

fn warmqaoa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warmqaoa"))
        .current_dir(dir)
        .env_remove("WARMQAOA_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const SMALL_RUN: &str = r#"
seed = 5
depths = [0, 1, 2]
variants = [{ kind = "standard" }, { kind = "warmstart" }]
[source]
kind = "generate"
count = 2
seed = 40
[source.params]
n_assets = 6
t_samples = 300
q = 0.5
budget = 3
[optimizer]
restarts = 2
max_evals_per_layer = 40
"#;

#[test]
fn verify_on_bundled_fixture_succeeds() {
    let tmp = TempDir::new().unwrap();
    let out = warmqaoa(tmp.path(), &["verify"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 8);
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&warmqaoa(tmp.path(), &["run"])), 2);
    assert_eq!(code(&warmqaoa(tmp.path(), &["run", "--config", "nope.toml"])), 2);
    assert_eq!(code(&warmqaoa(tmp.path(), &["verify", "--bogus"])), 2);
    assert_eq!(code(&warmqaoa(tmp.path(), &["export", "--figure", "fig9"])), 2);
    std::fs::write(
        tmp.path().join("bad.toml"),
        "shots = 0\n[source]\nkind = \"fixture\"\n",
    )
    .unwrap();
    assert_eq!(code(&warmqaoa(tmp.path(), &["run", "--config", "bad.toml"])), 2);
    std::fs::write(tmp.path().join("typo.toml"), "shot = 5\n[source]\nkind = \"fixture\"\n").unwrap();
    assert_eq!(code(&warmqaoa(tmp.path(), &["run", "--config", "typo.toml"])), 2);
}

#[test]
fn missing_cells_make_export_fail() {
    let tmp = TempDir::new().unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = warmqaoa(tmp.path(), &["--out", "empty", "export", "--figure", "fig1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn ensemble_classification_writes_scatter() {
    let tmp = TempDir::new().unwrap();
    let gen = warmqaoa(
        tmp.path(),
        &[
            "--out", "ens", "--seed", "7", "generate-ensemble", "--count", "12", "--n-assets",
            "6", "--t-samples", "300",
        ],
    );
    assert_eq!(code(&gen), 0, "{}", String::from_utf8_lossy(&gen.stderr));
    let cls = warmqaoa(
        tmp.path(),
        &["--out", "report", "classify", "--ensemble", "ens", "--k", "3"],
    );
    assert_eq!(code(&cls), 0, "{}", String::from_utf8_lossy(&cls.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("report/fig2_scatter.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "seed,epsilon,sigma,subset");
    assert_eq!(lines.len(), 13);
    assert!(tmp.path().join("report/classification_report.json").exists());

    // The scatter export reproduces the classify output from the annotated ensemble.
    let exp = warmqaoa(
        tmp.path(),
        &["--out", "again", "export", "--figure", "scatter", "--ensemble", "ens", "--k", "3"],
    );
    assert_eq!(code(&exp), 0);
    let again = std::fs::read_to_string(tmp.path().join("again/fig2_scatter.csv")).unwrap();
    assert_eq!(csv, again);
}

#[test]
fn run_export_and_thread_independence() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("small.toml"), SMALL_RUN).unwrap();
    let one = warmqaoa(
        tmp.path(),
        &["--config", "small.toml", "--out", "t1", "--threads", "1", "run"],
    );
    assert_eq!(code(&one), 0, "{}", String::from_utf8_lossy(&one.stderr));
    let two = warmqaoa(
        tmp.path(),
        &["--config", "small.toml", "--out", "t2", "--threads", "2", "run"],
    );
    assert_eq!(code(&two), 0);

    let a = ExperimentRecord::load(tmp.path().join("t1/random.record.json")).unwrap();
    let b = ExperimentRecord::load(tmp.path().join("t2/random.record.json")).unwrap();
    assert_eq!(a.cells.len(), 2 * 2 * 3);
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert_eq!(
            (x.instance, x.seed, &x.variant, x.p),
            (y.instance, y.seed, &y.variant, y.p)
        );
        assert_eq!(x.r_mean.map(f64::to_bits), y.r_mean.map(f64::to_bits));
        assert_eq!(x.probability.map(f64::to_bits), y.probability.map(f64::to_bits));
        assert_eq!(x.optimizer, y.optimizer);
        assert_eq!(x.p == 0, x.optimizer.is_none());
    }

    let exports: Vec<String> = ["t1", "t2", "t1"]
        .iter()
        .map(|dir| {
            let out = warmqaoa(tmp.path(), &["--out", dir, "export", "--figure", "fig1"]);
            assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
            std::fs::read_to_string(tmp.path().join(dir).join("fig1_r.csv")).unwrap()
        })
        .collect();
    assert_eq!(exports[0], exports[1]);
    assert_eq!(exports[0], exports[2]);
    assert_eq!(exports[0].lines().count(), 1 + 2 * 3);
}

#[test]
fn resume_keeps_finished_cells() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("small.toml"), SMALL_RUN).unwrap();
    let args = ["--config", "small.toml", "--out", "o", "run"];
    assert_eq!(code(&warmqaoa(tmp.path(), &args)), 0);
    let first = std::fs::read(tmp.path().join("o/random.record.json")).unwrap();
    let resumed = warmqaoa(tmp.path(), &["--config", "small.toml", "--out", "o", "run", "--resume"]);
    assert_eq!(code(&resumed), 0);
    let a = ExperimentRecord::from_json_str(std::str::from_utf8(&first).unwrap()).unwrap();
    let b = ExperimentRecord::load(tmp.path().join("o/random.record.json")).unwrap();
    assert_eq!(a.cells, b.cells);
}

#[test]
fn out_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_warmqaoa"))
        .current_dir(tmp.path())
        .env("WARMQAOA_OUT", "from-env")
        .args(["--seed", "1", "generate-ensemble", "--count", "2", "--n-assets", "4", "--t-samples", "50"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("from-env").is_dir());
    assert!(!tmp.path().join("warmqaoa-out").exists());

    let flag_wins = Command::new(env!("CARGO_BIN_EXE_warmqaoa"))
        .current_dir(tmp.path())
        .env("WARMQAOA_OUT", "from-env2")
        .args(["--out", "from-flag", "generate-ensemble", "--count", "2", "--n-assets", "4", "--t-samples", "50"])
        .output()
        .unwrap();
    assert_eq!(code(&flag_wins), 0);
    assert!(tmp.path().join("from-flag").is_dir());
    assert!(!tmp.path().join("from-env2").exists());
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut labels = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = warmqaoa::experiment::ExperimentConfig::load(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        labels.push(cfg.set_label());
    }
    labels.sort();
    assert_eq!(
        labels,
        ["eps-cold", "eps-hot", "fixture", "random", "sigma-cold", "sigma-hot"]
    );
}
