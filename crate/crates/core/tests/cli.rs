use std::process::{Command, Output};

fn storelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storelab"))
        .args(args)
        .env_remove("STORELAB_SEED")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

const SMALL: [&str; 6] = ["--set", "episodes=10", "--set", "horizon=6", "--set", "rounds=5"];

#[test]
fn estimate_prints_header_and_echoes_threshold() {
    let out = storelab(&["estimate", "--set", "history_len=200"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("n,alpha,mean,s,mu_lo,mu_hi,sigma_lo,sigma_hi,m_hat,M_hat,theta_hat,conservative\n"));
    assert!(stderr(&out).contains("theta_hat"));
}

#[test]
fn missing_history_names_the_path() {
    let out = storelab(&["estimate", "--set", "history=/definitely/missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/definitely/missing.csv"));

    let out = storelab(&["estimate", "--config", "/definitely/missing.conf"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/definitely/missing.conf"));
}

#[test]
fn bad_values_are_config_errors() {
    for args in [
        vec!["policy-compare", "--set", "alpha=2"],
        vec!["policy-compare", "--set", "nonsense=1"],
        vec!["policy-compare", "--set", "novalue"],
        vec!["no-such-command"],
    ] {
        let out = storelab(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let history = dir.path().join("h.csv");
    std::fs::write(&history, "5\n5\n5\n").unwrap();
    let path = history.to_str().unwrap();
    let out = storelab(&["estimate", "--set", &format!("history={path}"), "--set", "clamp=false"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn seed_flag_beats_environment_and_output_is_reproducible() {
    let mut args = vec!["policy-compare"];
    args.extend(SMALL);
    let a = storelab(&[args.as_slice(), &["--seed", "5"]].concat());
    let env = Command::new(env!("CARGO_BIN_EXE_storelab"))
        .args(&args)
        .env("STORELAB_SEED", "5")
        .output()
        .unwrap();
    let both = Command::new(env!("CARGO_BIN_EXE_storelab"))
        .args([args.as_slice(), &["--seed", "5", "--workers", "3"]].concat())
        .env("STORELAB_SEED", "6")
        .output()
        .unwrap();
    let other = storelab(&[args.as_slice(), &["--seed", "6"]].concat());
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&env));
    assert_eq!(stdout(&a), stdout(&both));
    assert_ne!(stdout(&a), stdout(&other));
}

#[test]
fn out_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "# small run\nepisodes = 10\nhorizon = 6\n").unwrap();
    let out_path = dir.path().join("compare.csv");
    let out = storelab(&[
        "policy-compare",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("round,n,policy_id,alg_cost,opt_cost,cr,cr_bound,violated,regret,theta_hat,seed\n"));
    assert_eq!(csv.lines().count(), 31);
    let summary = std::fs::read_to_string(dir.path().join("compare.csv.summary.csv")).unwrap();
    assert!(summary.starts_with("policy_id,episodes,mean_cost,mean_opt_cost,regret,regret_se,cr_p50,cr_p95,cr_max\n"));
}

#[test]
fn every_subcommand_has_its_header() {
    let cases = [
        ("violation-curve", "n,p_hat,stderr,violations,valid_rounds,failed_rounds"),
        ("adaptive", "warmup,stride,episodes,mean_cost,mean_true_dp_cost,mean_opt_cost,"),
        ("relax", "scenario,policy_id,episodes,mean_cost,"),
    ];
    for (cmd, header) in cases {
        let mut args = vec![cmd];
        args.extend(SMALL);
        args.extend(["--set", "n_grid=10", "--set", "warmup_grid=10"]);
        let out = storelab(&args);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
        assert!(stdout(&out).starts_with(header), "{cmd}");
    }
}

#[test]
fn violation_curve_single_row() {
    let out = storelab(&["violation-curve", "--set", "n_grid=10", "--set", "rounds=1", "--set", "eval_episodes=1"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 2);
}
