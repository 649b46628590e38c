//! The command-line front end, driven through the built binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mdmt::evaluation::read_results;

const TINY: &str = "\
# small enough for a test
synth.n_tau1 = 60
synth.n_tau2 = 120
synth.image_size = 16
data.image_size = 16
schedule.max_epochs = 4
schedule.warmup_epochs = 1
schedule.patience = 2
split = cv:3
pipeline.seeds = 2
pipeline.splits = cv:3
";

fn mdmt(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.conf");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_mdmt"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_writes_manifests_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let o = mdmt(dir.path(), TINY, &["generate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let data = dir.path().join("out/data");
    for task in ["tau1", "tau2"] {
        let manifest = fs::read_to_string(data.join(task).join("manifest.csv")).unwrap();
        assert!(manifest.contains(&format!("# task={task}")));
        let first_image = fs::read_dir(data.join(task).join("images")).unwrap().next().unwrap().unwrap();
        assert!(fs::read(first_image.path()).unwrap().starts_with(b"P5"));
    }
    let log = fs::read_to_string(dir.path().join("out/logs/generate.log")).unwrap();
    assert!(log.contains("synth.n_tau1") && log.contains("config"));
}

#[test]
fn train_respects_prerequisites_and_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let ft = mdmt(dir.path(), TINY, &["train", "--experiment", "ft"]);
    assert_eq!(code(&ft), 2);
    assert!(stderr(&ft).contains("stl_tau2"), "{}", stderr(&ft));

    for kind in ["stl_tau2", "stl_tau1", "ft", "mdmt"] {
        let o = mdmt(dir.path(), TINY, &["train", "--experiment", kind]);
        assert_eq!(code(&o), 0, "{kind}: {}", stderr(&o));
    }
    let results = dir.path().join("out/results/seed-0/cv3");
    let mdmt_rows = read_results(&results.join("mdmt.csv")).unwrap();
    assert_eq!(mdmt_rows.results.len(), 6, "3 folds x 2 tasks");
    let text = fs::read_to_string(results.join("ft.csv")).unwrap();
    assert!(text.starts_with("# schema_version=1\n"));
    assert!(text.contains("experiment,backbone,fold,task,acc,f1,gm,epochs_run,best_epoch,seed"));

    let o = mdmt(
        dir.path(),
        TINY,
        &["compare", results.join("mdmt.csv").to_str().unwrap(), results.join("stl_tau1.csv").to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("mdmt vs stl_tau1"));
    assert!(dir.path().join("out/comparison.csv").is_file());

    let o = mdmt(dir.path(), TINY, &["report", results.join("mdmt.csv").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(dir.path().join("out/report.txt")).unwrap().contains("mdmt"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 6] = [
        ("bogus.key = 1\n", &["generate"]),
        ("schedule.warmup_epochs = 500\n", &["generate"]),
        ("not a key value line\n", &["generate"]),
        ("split = cv:1\n", &["generate"]),
        ("", &["train"]),
        ("", &["frobnicate"]),
    ];
    for (config, args) in cases {
        let o = mdmt(dir.path(), &format!("{TINY}{config}"), args);
        assert_eq!(code(&o), 2, "{config:?} {args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_mdmt"))
        .args(["--config", "/nonexistent/run.conf", "generate"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{TINY}optimizer.learning_rate = 1e300\n");
    let o = mdmt(dir.path(), &config, &["train", "--experiment", "stl_tau1"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn mismatched_result_files_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let header = "# schema_version=1\n# split=cv:5\nexperiment,backbone,fold,task,acc,f1,gm,epochs_run,best_epoch,seed\n";
    fs::write(&a, format!("{header}mdmt,cnn,0,tau1,0.7,0.7,0.7,10,5,0\nmdmt,cnn,1,tau1,0.7,0.7,0.7,10,5,0\n")).unwrap();
    fs::write(&b, format!("{header}stl_tau1,cnn,0,tau1,0.6,0.6,0.6,10,5,1\nstl_tau1,cnn,1,tau1,0.6,0.6,0.6,10,5,1\n")).unwrap();
    let o = mdmt(dir.path(), TINY, &["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("only in A"), "{}", stderr(&o));
}
