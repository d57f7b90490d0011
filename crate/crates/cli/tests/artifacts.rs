use std::sync::OnceLock;

use gridplan_cli::compare::{compare_report, convergence_csv, parse_scaling_csv, scaling_csv, scaling_rows, CompareReport, ScalingRow};
use gridplan_cli::fixtures::{self, FixtureSpec};
use gridplan_cli::run::{
    load_spec, parse_plan, plan_json, run_plan, verify_plan, Mode, PlanConfig, RunArtifacts, RunError, PLAN_FILE,
    TRACE_FILE,
};
use gridplan_coord::ConvergenceTrace;
use gridplan_core::Network;

fn t1_runs() -> &'static (RunArtifacts, RunArtifacts) {
    static RUNS: OnceLock<(RunArtifacts, RunArtifacts)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let spec = fixtures::preset_t1();
        let cfg = PlanConfig::default();
        (
            run_plan(&spec, Mode::Centralized, &cfg).unwrap(),
            run_plan(&spec, Mode::Decomposed, &cfg).unwrap(),
        )
    })
}

#[test]
fn presets_validate() {
    for name in ["T1", "t2"] {
        let spec = fixtures::preset(name).unwrap();
        let net = Network::from_spec(spec).unwrap();
        assert!(net.partition.is_some());
    }
    assert!(fixtures::preset("T9").is_none());
}

#[test]
fn generator_is_seeded() {
    let a = fixtures::gen_fixture(&FixtureSpec::default()).unwrap();
    let b = fixtures::gen_fixture(&FixtureSpec::default()).unwrap();
    assert_eq!(fixtures::to_json(&a), fixtures::to_json(&b));
    let c = fixtures::gen_fixture(&FixtureSpec {
        seed: 2,
        ..FixtureSpec::default()
    })
    .unwrap();
    assert_ne!(fixtures::to_json(&a), fixtures::to_json(&c));
    for seed in 1..=5 {
        let spec = fixtures::gen_fixture(&FixtureSpec {
            seed,
            sub_areas: 3,
            ..FixtureSpec::default()
        })
        .unwrap();
        Network::from_spec(spec).unwrap();
    }
}

#[test]
fn generator_rejects_bad_spec() {
    assert!(fixtures::gen_fixture(&FixtureSpec {
        density: 0.0,
        ..FixtureSpec::default()
    })
    .is_err());
    assert!(fixtures::gen_fixture(&FixtureSpec {
        sub_areas: 0,
        ..FixtureSpec::default()
    })
    .is_err());
}

#[test]
fn uniform_areas_share_shape() {
    let spec = |k| {
        let s = fixtures::gen_fixture(&FixtureSpec {
            sub_areas: k,
            nodes_per_area: 6,
            seed: 3,
            uniform_areas: true,
            ..FixtureSpec::default()
        })
        .unwrap();
        ScalingRow::new(&Network::from_spec(s).unwrap())
    };
    let (a, b) = (spec(2), spec(4));
    assert_eq!(a.max_subproblem_binaries, b.max_subproblem_binaries);
    assert!(b.centralized_binaries > 2 * a.centralized_binaries);
}

#[test]
fn fixture_json_round_trip() {
    let spec = fixtures::preset_t2();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t2.json");
    std::fs::write(&path, fixtures::to_json(&spec)).unwrap();
    let back = load_spec(&path).unwrap();
    assert_eq!(fixtures::to_json(&back), fixtures::to_json(&spec));
}

#[test]
fn t1_runs_agree_and_pass() {
    let (cen, dec) = t1_runs();
    assert!(cen.passed() && dec.passed());
    let gap = (dec.summary.cost.total - cen.summary.cost.total) / cen.summary.cost.total;
    assert!(gap.abs() <= 0.01, "gap {}", gap);
    assert!(cen.trace.is_none() && dec.trace.is_some());
    assert_eq!(cen.summary.binaries.len(), 1);
    assert_eq!(dec.summary.binaries.len(), 2);
}

#[test]
fn artifacts_round_trip() {
    let (_, dec) = t1_runs();
    let dir = tempfile::tempdir().unwrap();
    dec.write(dir.path()).unwrap();
    let back = RunArtifacts::read(dir.path()).unwrap();
    assert_eq!(back.summary, dec.summary);
    assert_eq!(back.plan, dec.plan);
    assert_eq!(back.reliability, dec.reliability);
    let csv = std::fs::read_to_string(dir.path().join(TRACE_FILE)).unwrap();
    assert_eq!(back.trace.unwrap().to_csv(), csv);
}

#[test]
fn plan_file_carries_hash() {
    let (cen, _) = t1_runs();
    let text = plan_json(&cen.plan, &cen.summary.network_hash);
    let (plan, hash) = parse_plan(&text).unwrap();
    assert_eq!(plan, cen.plan);
    assert_eq!(hash.as_deref(), Some(cen.summary.network_hash.as_str()));
    let bare = serde_json::to_string(&cen.plan).unwrap();
    assert_eq!(parse_plan(&bare).unwrap(), (cen.plan.clone(), None));
}

#[test]
fn verify_matches_run() {
    let (cen, _) = t1_runs();
    let text = plan_json(&cen.plan, &cen.summary.network_hash);
    let (report, check) = verify_plan(&fixtures::preset_t1(), &text).unwrap();
    assert_eq!(report, cen.reliability);
    assert_eq!(check, cen.summary.requirements);
    // Same plan against another network is refused.
    assert!(matches!(verify_plan(&fixtures::preset_t2(), &text), Err(RunError::Config(_))));
}

#[test]
fn tampered_plan_hash_rejected() {
    let (cen, _) = t1_runs();
    let dir = tempfile::tempdir().unwrap();
    cen.write(dir.path()).unwrap();
    std::fs::write(dir.path().join(PLAN_FILE), plan_json(&cen.plan, "0000")).unwrap();
    assert!(RunArtifacts::read(dir.path()).is_err());
}

#[test]
fn trace_csv_round_trip() {
    let (_, dec) = t1_runs();
    let t = dec.trace.as_ref().unwrap();
    let untimed = t.to_csv_untimed();
    assert!(!untimed.contains("wallMs"));
    let back = ConvergenceTrace::from_csv(&untimed).unwrap();
    assert_eq!(back.to_csv_untimed(), untimed);
    assert!(ConvergenceTrace::from_csv("k,x\n").is_err());
}

#[test]
fn compare_reports_gap() {
    let (cen, dec) = t1_runs();
    let runs = vec![cen.clone(), dec.clone(), dec.clone()];
    let r = compare_report(&runs).unwrap();
    let labels: Vec<&str> = r.methods.iter().map(|m| m.label.as_str()).collect();
    assert_eq!(labels, ["centralized", "decomposed", "decomposed-2"]);
    let gap = r.gap.unwrap();
    assert!((gap - (dec.summary.cost.total - cen.summary.cost.total) / cen.summary.cost.total).abs() < 1e-15);
    assert_eq!(CompareReport::from_json(&r.to_json()).unwrap(), r);
    let conv = convergence_csv(&runs);
    let rows = dec.trace.as_ref().unwrap().rows.len();
    assert_eq!(conv.lines().count(), 1 + 2 * rows);
    assert!(compare_report(&runs[..1]).is_err());
}

#[test]
fn compare_refuses_mixed_networks() {
    let (cen, _) = t1_runs();
    let mut other = cen.clone();
    other.summary.network_hash = "different".into();
    assert!(compare_report(&[cen.clone(), other.clone()]).is_err());
    // The scaling table spans networks.
    assert_eq!(scaling_rows(&[cen.clone(), other, cen.clone()]).len(), 2);
}

#[test]
fn scaling_csv_round_trip() {
    let (cen, dec) = t1_runs();
    let rows = scaling_rows(&[cen.clone(), dec.clone()]);
    assert_eq!(rows.len(), 1);
    let text = scaling_csv(&rows);
    assert_eq!(parse_scaling_csv(&text).unwrap(), rows);
    assert!(parse_scaling_csv("a,b\n").is_err());
    assert_eq!(rows[0].centralized_binaries, cen.summary.binaries[0]);
    assert_eq!(rows[0].max_subproblem_binaries, dec.summary.max_subproblem_binaries());
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cfg.json");
    std::fs::write(&p, r#"{"coordination": {"kMax": 5, "workers": 2}, "solver": {"nodeLimit": 100}}"#).unwrap();
    let cfg = PlanConfig::load(&p).unwrap();
    assert_eq!(cfg.coordination.k_max, 5);
    assert_eq!(cfg.coordination.workers, 2);
    assert_eq!(cfg.solver.node_limit, 100);
    std::fs::write(&p, r#"{"coordination": {"kmax": 5}}"#).unwrap();
    assert!(PlanConfig::load(&p).is_err());
}

#[test]
fn invalid_coordination_config() {
    let mut cfg = PlanConfig::default();
    cfg.coordination.workers = 0;
    assert!(run_plan(&fixtures::preset_t1(), Mode::Decomposed, &cfg).is_err());
}
