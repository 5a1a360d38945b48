use std::path::Path;
use std::process::{Command, Output};

use acidfit::forward::ForwardModel;
use acidfit::objective::ObservationSet;

fn acidfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acidfit")).args(args).output().expect("spawn acidfit")
}

fn ok(args: &[&str]) -> String {
    let out = acidfit(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn short<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["--t-final", "2", "--tau", "0.5"];
    v.extend_from_slice(extra);
    v
}

#[test]
fn forward_writes_every_node_and_level() {
    let text = ok(&short(&["forward", "--delta1", "12.5"]));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,u1,u2,u3"));
    assert_eq!(lines.count(), 201 * 5);
}

#[test]
fn fit_recovers_from_observation_file() {
    let dir = tempfile::tempdir().unwrap();
    let obs_path = dir.path().join("obs.csv");
    let truth = ForwardModel::experiment(4.0, 201, 0.5, 5.0).unwrap();
    let obs = ObservationSet::from_trajectory(&truth.solve().unwrap());
    obs.write_csv(std::fs::File::create(&obs_path).unwrap()).unwrap();
    let read = ObservationSet::read_csv(std::fs::File::open(&obs_path).unwrap()).unwrap();
    assert_eq!(read.levels(), obs.levels());

    let trace = ok(&["fit", "--t-final", "5", "--obs", obs_path.to_str().unwrap(), "--delta1-init", "9"]);
    assert!(trace.starts_with("iter,delta1,J,grad"));
    let last: f64 = trace.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((last - 4.0).abs() < 1e-4, "{last}");
}

#[test]
fn config_file_feeds_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.cfg");
    std::fs::write(&config, "# short study\nt-final = 2\ntrials = 2\nsigma = 0.05, 0.1\nseed = 3\n").unwrap();
    let cfg = config.to_str().unwrap();
    let text = ok(&["noise-study", "--config", cfg]);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# seed=3 "), "{}", lines[0]);
    assert!(lines[0].contains(" trials=2 "));
    assert_eq!(lines[1], "sigma,mean,std,rel_error,failures,flagged");
    assert_eq!(lines.len(), 4);
    let overridden = ok(&["noise-study", "--config", cfg, "--seed", "4"]);
    assert!(overridden.starts_with("# seed=4 "));
}

#[test]
fn gradcheck_reports_small_error() {
    let text = ok(&["gradcheck", "--delta1-hat", "12.5"]);
    let row = text.lines().nth(1).unwrap();
    let rel: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(row.starts_with("continuous,201,0.5,8,"), "{row}");
    assert!(rel < 1e-2, "{rel}");
}

#[test]
fn sweep_and_estimate_write_their_formats() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.csv");
    ok(&short(&["sweep", "--samples", "5", "--out", sweep.to_str().unwrap()]));
    let text = std::fs::read_to_string(&sweep).unwrap();
    assert_eq!(text.lines().next(), Some("delta1,J"));
    assert_eq!(text.lines().count(), 6);

    let est = ok(&short(&["error-estimate"]));
    assert_eq!(est.lines().next(), Some("field,step,element,indicator"));
    assert_eq!(est.lines().count(), 1 + 3 * 4 * 200 + 3);
}

#[test]
fn adjoint_ends_at_zero_terminal_level() {
    let text = ok(&short(&["adjoint", "--scheme", "lagged"]));
    assert_eq!(text.lines().next(), Some("t,x,lambda1,lambda2,lambda3"));
    for line in text.lines().filter(|l| l.split(',').next() == Some("2")) {
        let vals: Vec<f64> = line.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals, [0.0; 3], "{line}");
    }
}

#[test]
fn bad_input_fails_cleanly() {
    for args in [
        &["fit", "--scheme", "sideways"][..],
        &["forward", "--bounds", "5"],
        &["noise-study", "--trials", "0"],
        &["fit", "--obs", "/nonexistent/obs.csv"],
    ] {
        let out = acidfit(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "), "{args:?}");
    }
    assert!(!Path::new("sideways").exists());
}
