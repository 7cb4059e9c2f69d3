use std::path::Path;
use std::process::Command;

use plaplab::config::{schema_json, ForcingSpec, ShapeConfig};
use plaplab::manifest::MANIFEST_NAME;
use plaplab::{emit_outputs, run_experiment, ExperimentConfig, Format, RunError, RunManifest, Verb};
use plaplab_core::grid::Rank;
use plaplab_core::io::FieldEnvelope;
use plaplab_core::Field;

const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Svg];

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.domain.h = 1.0 / 8.0;
    c.radius = 0.4;
    c.k_schedule = vec![1.0, 4.0, 16.0];
    c.forcing.f = ForcingSpec::GaussianBump { amplitude: 3.0, width: 0.3, center: [0.1, -0.2] };
    c.forcing.g = ForcingSpec::Constant { value: 0.5 };
    c.whitney.cells = 16;
    c.whitney.random_masks = 3;
    c.weights.ball_samples = 100;
    c.weights.lambda_points = 400;
    c
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn manifest_json(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(dir, MANIFEST_NAME)).unwrap()
}

#[test]
fn config_round_trips_and_shipped_files_are_current() {
    for c in [ExperimentConfig::default(), small()] {
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(again, c);
        assert!(c.validate().is_empty());
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let shipped =
        ExperimentConfig::from_json(&std::fs::read_to_string(root.join("configs/blowup.json")).unwrap()).unwrap();
    assert_eq!(shipped, ExperimentConfig::default());
    let schema = std::fs::read_to_string(root.join("schema/experiment-config.schema.json")).unwrap();
    assert_eq!(schema, schema_json(), "regenerate with `plaplab --print-schema`");
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&small().to_json()).unwrap();
    v["exponents"]["q"] = 1.5.into();
    assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
}

#[test]
fn validation_lists_every_violation() {
    let mut c = small();
    c.exponents.p = 0.5;
    c.delta = 2.0;
    c.k_schedule = vec![4.0, 2.0];
    c.tol = -1.0;
    c.radius = 5.0;
    c.thresholds.t2 = 0.0;
    c.forcing.f = ForcingSpec::GaussianBump { amplitude: 1.0, width: 0.0, center: [0.0, 0.0] };
    let paths: Vec<String> = c.validate().into_iter().map(|v| v.path).collect();
    for want in ["exponents.p", "delta", "k_schedule", "tol", "R", "thresholds.t2", "forcing.f.width"] {
        assert!(paths.iter().any(|p| p == want), "{want} missing from {paths:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    match run_experiment(&c, Verb::Solve, &ALL, dir.path()) {
        Err(RunError::Invalid(v)) => assert_eq!(v.len(), paths.len()),
        other => panic!("expected rejection, got {other:?}"),
    }
    assert!(!dir.path().join(MANIFEST_NAME).exists());
}

#[test]
fn zero_forcing_solves_to_zero() {
    let mut c = small();
    c.forcing.f = ForcingSpec::Zero;
    c.forcing.g = ForcingSpec::Zero;
    let dir = tempfile::tempdir().unwrap();
    let (m, _) = run_experiment(&c, Verb::Solve, &[Format::Csv], dir.path()).unwrap();
    assert!(m.complete && m.invariants_passed);
    assert_eq!(m.files.len(), 1);
    assert_eq!(m.files[0].path, "solution.csv");
    let csv = read(dir.path(), "solution.csv");
    for line in csv.lines().skip(1) {
        assert_eq!(line.rsplit(',').next().unwrap(), "0e0", "{line}");
    }
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&c, Verb::Solve, &ALL, dir.path()).unwrap();
    let rep: serde_json::Value = serde_json::from_str(&read(dir.path(), "solve_report.json")).unwrap();
    assert_eq!(rep["residual_norm"].as_f64(), Some(0.0));
    assert_eq!(rep["converged"].as_bool(), Some(true));
}

#[test]
fn reruns_are_byte_identical() {
    let c = small();
    for verb in [Verb::Ksweep, Verb::Whitney, Verb::Weights] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (ma, _) = run_experiment(&c, verb, &ALL, a.path()).unwrap();
        let (mb, _) = run_experiment(&c, verb, &ALL, b.path()).unwrap();
        assert_eq!(ma.config_hash, mb.config_hash);
        // JSON reports carry solver wall times; CSV and SVG bodies must match exactly
        let stable =
            |m: &RunManifest| m.files.iter().filter(|f| !f.path.ends_with(".json")).cloned().collect::<Vec<_>>();
        assert_eq!(stable(&ma), stable(&mb), "{verb:?}");
        assert!(ma.files.iter().any(|f| f.path.ends_with(".csv")));
    }
    let mut other = c.clone();
    other.rng_seed = 1;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&c, Verb::Whitney, &ALL, a.path()).unwrap();
    run_experiment(&other, Verb::Whitney, &ALL, b.path()).unwrap();
    assert_ne!(read(a.path(), "whitney.csv"), read(b.path(), "whitney.csv"));
}

#[test]
fn manifest_lists_every_file_with_checksum() {
    let c = small();
    for verb in [Verb::Solve, Verb::Ksweep, Verb::Blowup, Verb::Whitney, Verb::Weights, Verb::Report] {
        let dir = tempfile::tempdir().unwrap();
        let (m, summary) = run_experiment(&c, verb, &ALL, dir.path()).unwrap();
        assert!(m.complete, "{verb:?}: {:?}", m.failures);
        assert!(m.invariants_passed, "{verb:?}: {summary}");
        let mut on_disk: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != MANIFEST_NAME)
            .collect();
        on_disk.sort();
        let listed: Vec<String> = m.files.iter().map(|f| f.path.clone()).collect();
        assert_eq!(on_disk, listed, "{verb:?}");
        assert!(m.verify(dir.path()).is_empty());
        assert_eq!(manifest_json(dir.path())["files"].as_array().unwrap().len(), listed.len());
        for svg in listed.iter().filter(|p| p.ends_with(".svg")) {
            let text = read(dir.path(), svg);
            assert!(text.starts_with("<svg") && !text.contains("href"), "{svg} is not self-contained");
        }
    }
}

#[test]
fn ksweep_outputs_follow_the_schema() {
    let c = small();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&c, Verb::Ksweep, &ALL, dir.path()).unwrap();
    let csv = read(dir.path(), "ksweep.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), plaplab_core::io::KSWEEP_COLUMNS.join(","));
    assert_eq!(lines.count(), c.k_schedule.len());
    let svg = read(dir.path(), "ksweep.svg");
    assert_eq!(svg.matches(r#"class="series""#).count(), 2);
    assert!(svg.contains(r#"data-name="weighted""#) && svg.contains(r#"data-name="unweighted""#));

    let dir = tempfile::tempdir().unwrap();
    run_experiment(&c, Verb::Report, &ALL, dir.path()).unwrap();
    let csv = read(dir.path(), "estimates.csv");
    assert_eq!(csv.lines().next().unwrap(), plaplab_core::estimate::EstimateReport::COLUMNS.join(","));
    assert_eq!(csv.lines().count(), 1 + c.k_schedule.len());
}

#[test]
fn empty_outputs_and_unwritable_targets() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = RunManifest::new("solve", "{}", 0);
    emit_outputs(&[], &ALL, dir.path(), &mut m).unwrap();
    assert!(m.files.is_empty());

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    match run_experiment(&small(), Verb::Whitney, &ALL, &blocker.join("out")) {
        Err(RunError::Io { path, .. }) => assert!(path.starts_with(&blocker)),
        other => panic!("expected an IO error, got {other:?}"),
    }
}

#[test]
fn file_forcing_matches_the_analytic_profile() {
    let c = small();
    let dom = c.domain().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let f = c.forcing.f.profile().unwrap().field(Rank::Gradient, &dom);
    std::fs::write(dir.path().join("f.json"), FieldEnvelope::new(&f, &dom).to_json()).unwrap();

    let config_path = dir.path().join("config.json");
    let mut from_file = c.clone();
    from_file.forcing.f = ForcingSpec::File { path: "f.json".into() };
    std::fs::write(&config_path, from_file.to_json()).unwrap();
    from_file.resolve_paths(dir.path());

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_experiment(&c, Verb::Solve, &ALL, &a).unwrap();
    let (m, _) = run_experiment(&from_file, Verb::Solve, &ALL, &b).unwrap();
    assert!(m.complete);
    assert_eq!(read(&a, "solution.csv"), read(&b, "solution.csv"));

    // the solution envelope loads back as the same field
    let env = FieldEnvelope::from_json(&read(&a, "solution.json")).unwrap();
    let u: Field = env.into_field(&dom).unwrap();
    assert_eq!(u.rank, Rank::Scalar);

    // a scalar file where gradient data is expected is flagged against forcing.f
    let mut wrong = c.clone();
    wrong.forcing.f = ForcingSpec::File { path: a.join("solution.json") };
    let out = dir.path().join("c");
    let (m, _) = run_experiment(&wrong, Verb::Solve, &ALL, &out).unwrap();
    assert!(!m.complete && !m.invariants_passed);
    assert!(m.failures[0].starts_with("forcing.f:"), "{:?}", m.failures);
    assert!(m.files.is_empty());
    assert_eq!(manifest_json(&out)["complete"].as_bool(), Some(false));

    // the binary resolves the relative path against the config file
    let status = Command::new(env!("CARGO_BIN_EXE_plaplab"))
        .args(["solve", "--format", "csv", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path().join("d"))
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(read(&a, "solution.csv"), read(&dir.path().join("d"), "solution.csv"));
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_plaplab");
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, c: &ExperimentConfig| {
        let p = dir.path().join(name);
        std::fs::write(&p, c.to_json()).unwrap();
        p
    };
    let run = |args: &[&str], config: &Path, out: &str| {
        Command::new(bin)
            .args(args)
            .arg("--config")
            .arg(config)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap()
    };

    let ok = write("ok.json", &small());
    let o = run(&["whitney", "--seed", "5", "--threads", "2"], &ok, "ok");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest_json(&dir.path().join("ok"))["seed"].as_u64(), Some(5));

    let mut bad = small();
    bad.delta = 0.0;
    bad.exponents.eps = 5.0;
    let o = run(&["solve"], &write("bad.json", &bad), "bad");
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    let paths: Vec<&str> = err["violations"].as_array().unwrap().iter().map(|v| v["path"].as_str().unwrap()).collect();
    assert_eq!(paths, ["exponents.eps", "delta"]);

    let o = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let mut missing = small();
    missing.forcing.g = ForcingSpec::File { path: "nowhere.json".into() };
    let o = run(&["solve"], &write("missing.json", &missing), "missing");
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("forcing.g"));

    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let o = run(&["whitney"], &ok, "blocker/out");
    assert_eq!(o.status.code(), Some(3));

    let mut interval = small();
    interval.domain.shape = ShapeConfig::Interval { lo: -1.0, hi: 1.0 };
    interval.max_iters = 1;
    let o = run(&["solve", "--format", "json"], &write("capped.json", &interval), "capped");
    assert_eq!(o.status.code(), Some(4), "a capped solve does not converge");
}
