use std::path::Path;
use std::process::{Command, Output};

fn methsmc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_methsmc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("failed to launch methsmc")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = methsmc(args, cwd);
    assert!(
        out.status.success(),
        "methsmc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: [&str; 10] = [
    "--set", "fit_particles=30",
    "--set", "filter_particles=20",
    "--set", "backward_samples=10",
    "--set", "runs=2",
    "--set", "passes=1",
];

#[test]
fn full_chain_from_simulation_to_scores() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    ok(&["simulate", "--out", "sim", "--sites", "1500", "--samples", "2", "--datasets", "2", "--write-config"], cwd);
    for f in ["control.tsv", "case.tsv", "truth.tsv", "config.toml"] {
        assert!(cwd.join("sim/dataset_001").join(f).is_file(), "{f} missing");
    }

    let config = "sim/dataset_000/config.toml";
    let mut fit = vec!["fit", "--config", config, "--control", "sim/dataset_000/control.tsv", "--out", "fit0"];
    fit.extend(SMALL);
    ok(&fit, cwd);
    assert!(cwd.join("fit0/fit.toml").is_file());
    assert!(cwd.join("fit0/posteriors.tsv").is_file());

    let mut infer = vec![
        "infer", "--config", config, "--control", "sim/dataset_000/control.tsv", "--case",
        "sim/dataset_000/case.tsv", "--fit", "fit0/fit.toml", "--out", "run0", "--all",
    ];
    infer.extend(SMALL);
    ok(&infer, cwd);
    for f in ["sites.tsv", "regions.tsv", "trajectories.bin", "paired_posteriors.tsv"] {
        assert!(cwd.join("run0").join(f).is_file(), "{f} missing");
    }

    ok(&["test-positions", "--config", config, "--trajectories", "run0/trajectories.bin", "--out", "sites.tsv"], cwd);
    ok(
        &["test-regions", "--config", config, "--trajectories", "run0/trajectories.bin", "--set", "gamma=[0.9]", "--out", "regions.tsv"],
        cwd,
    );
    let regions = std::fs::read_to_string(cwd.join("regions.tsv")).unwrap();
    assert!(regions.lines().skip(1).all(|l| l.contains("\t0.9\t")));

    // re-testing the saved trajectories with the same settings reproduces the sites table
    let a = std::fs::read_to_string(cwd.join("sites.tsv")).unwrap();
    let b = std::fs::read_to_string(cwd.join("run0/sites.tsv")).unwrap();
    assert_eq!(a, b);

    let report = ok(
        &["score", "--config", config, "--truth", "sim/dataset_000/truth.tsv", "--sites", "sites.tsv", "--regions", "regions.tsv"],
        cwd,
    );
    assert!(report.contains("regime-diff"), "unexpected score output:\n{report}");
}

#[test]
fn bad_input_reports_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.tsv"), "chrom\tpos\ta_meth\ta_total\nchr1\t5\t3\t2\n").unwrap();
    let out = methsmc(&["fit", "--control", "bad.tsv", "--out", "o"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("bad.tsv"), "{err}");

    let out = methsmc(&["fit", "--control", "bad.tsv", "--out", "o", "--set", "no_such_key=1"], dir.path());
    assert!(!out.status.success());
}
