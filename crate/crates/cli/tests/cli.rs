use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_calibstruct"));
    c.env_remove("CALIB_OUTPUT_DIR").env("RUST_LOG", "warn");
    c
}

fn mini_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mini").canonicalize().unwrap()
}

fn write_config(dir: &Path, out: &str, extra: &str) -> PathBuf {
    let data = mini_data();
    let text = format!(
        r#"
seed = 5
folds = 2
output_dir = "{out}"

[dataset]
name = "mini"
source = {{ format = "movielens", ratings = "{}", movies = "{}" }}

[recommender]
n_trials = 2
cv_folds = 2

[structure]
algorithms = ["kmeans", "dbscan", "lof"]
{extra}
"#,
        data.join("ratings.dat").display(),
        data.join("movies.dat").display()
    );
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn staged_subcommands_match_run_all() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "staged", "");
    for sub in ["ingest", "tune", "recommend", "calibrate", "analyze", "report"] {
        run(bin().args([sub, "--config"]).arg(&cfg));
    }
    run(bin().args(["run-all", "--config"]).arg(&cfg).env("CALIB_OUTPUT_DIR", dir.path().join("all")));

    for f in ["metrics.csv", "fig-jaccard.csv", "fig-ranking.csv", "original/fold-1/matrices/C@0.5.csv"] {
        let staged = fs::read(dir.path().join("staged").join(f)).unwrap();
        let all = fs::read(dir.path().join("all").join(f)).unwrap();
        assert_eq!(staged, all, "{f} differs");
    }
    assert!(dir.path().join("all/manifest.json").is_file());
    assert!(!dir.path().join("staged/manifest.json").exists());
}

#[test]
fn single_fold_flag_limits_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "out", "");
    run(bin().args(["tune", "--config"]).arg(&cfg));
    run(bin().args(["recommend", "--fold", "1", "--config"]).arg(&cfg));
    assert!(dir.path().join("out/original/fold-1/candidates.csv").is_file());
    assert!(!dir.path().join("out/original/fold-0").exists());

    let out = bin().args(["recommend", "--fold", "2", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn invalid_configs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "out", "[calibration]\nlambda_grid = []\n");
    let out = bin().args(["run-all", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda grid is empty"));

    let out = bin().args(["analyze", "--config", "/nonexistent/exp.toml"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn stage_errors_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    // Nobody has 500 interactions, so ingest empties the dataset.
    let cfg = write_config(dir.path(), "out", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("name = \"mini\"", "name = \"mini\"\nmin_user_tx = 500");
    fs::write(&cfg, text).unwrap();
    let out = bin().args(["ingest", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ingest"), "{err}");
}

#[test]
fn gen_mini_reproduces_bundled_data() {
    let dir = tempfile::tempdir().unwrap();
    run(bin().args(["gen-mini", "--out"]).arg(dir.path()));
    for f in ["ratings.dat", "movies.dat"] {
        assert_eq!(
            fs::read(dir.path().join(f)).unwrap(),
            fs::read(mini_data().join(f)).unwrap(),
            "{f}"
        );
    }
}
