//! End-to-end acceptance run. Prints one PASS / FAIL line per criterion and
//! exits non-zero if any fails.

#[path = "../../milp/tests/oracle/mod.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gridplan_cli::compare::{parse_scaling_csv, scaling_csv, ScalingRow};
use gridplan_cli::fixtures::{self, FixtureSpec};
use gridplan_cli::run::{plan_json, run_plan, Mode, PlanConfig};
use gridplan_coord::{
    accelerate_multipliers, run_coordination_with, update_penalty, CoordConfig, CoordinationResult,
    CoordinationState,
};
use gridplan_core::builder::{build_centralized, build_subproblems, BuildOptions};
use gridplan_core::plan::{extract_plan, internal_reliability_indices};
use gridplan_core::{Network, NetworkSpec, Plan, StageIndices};
use gridplan_milp::{solve_lp, solve_milp, LpStatus, SolverConfig};
use gridplan_oracle::{check_requirements, evaluate_plan_reliability, RequirementCheck};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Central {
    cost: f64,
    objective: f64,
    plan: Plan,
    indices: Vec<StageIndices>,
    time: Duration,
}

struct Decomposed {
    result: CoordinationResult,
    indices: Vec<StageIndices>,
    time: Duration,
}

struct Case {
    name: String,
    net: Network,
    cen: Central,
    dec: Decomposed,
}

fn cases() -> Vec<(String, NetworkSpec)> {
    let mut v = vec![
        ("T1".to_string(), fixtures::preset_t1()),
        ("T2".to_string(), fixtures::preset_t2()),
    ];
    for seed in 1..=3 {
        let spec = fixtures::gen_fixture(&FixtureSpec {
            seed,
            ..FixtureSpec::default()
        })
        .unwrap();
        v.push((format!("R{}", seed), spec));
    }
    v
}

fn centralized(net: &Network) -> Central {
    let start = Instant::now();
    let built = build_centralized(net, &BuildOptions::default());
    let sol = solve_milp(&built.model, &SolverConfig::default()).unwrap();
    assert!(sol.status.has_solution(), "{}: {:?}", net.name, sol.status);
    let plan = extract_plan(net, &built, &sol.x, 1e-6).unwrap();
    let indices = internal_reliability_indices(net, &built, &sol.x, 1e-6).unwrap();
    Central {
        cost: built.cost(&sol.x).total,
        objective: sol.objective,
        plan,
        indices,
        time: start.elapsed(),
    }
}

fn decomposed(net: &Network, cfg: &CoordConfig) -> Decomposed {
    let start = Instant::now();
    let result = run_coordination_with(net, cfg, &SolverConfig::default()).unwrap();
    let time = start.elapsed();
    let blocks = build_subproblems(net, &BuildOptions::default());
    let mut indices = vec![StageIndices::default(); net.stages()];
    for (b, x) in blocks.iter().zip(&result.repaired.x) {
        for (t, si) in internal_reliability_indices(net, b, x, 1e-6).unwrap().into_iter().enumerate() {
            indices[t].cif.extend(si.cif);
            indices[t].cid.extend(si.cid);
        }
    }
    Decomposed { result, indices, time }
}

fn requirements(net: &Network, plan: &Plan) -> RequirementCheck {
    let report = evaluate_plan_reliability(net, plan).unwrap();
    check_requirements(&report, &net.horizon)
}

/// Largest CIF / CID difference between internal indices and the oracle,
/// over every node the oracle reports; infinite if a node is missing.
fn index_gap(net: &Network, plan: &Plan, internal: &[StageIndices]) -> f64 {
    let report = evaluate_plan_reliability(net, plan).unwrap();
    let mut worst: f64 = 0.0;
    for (st, si) in report.stages.iter().zip(internal) {
        for (maps, ours) in [(&st.cif, &si.cif), (&st.cid, &si.cid)] {
            for (id, v) in maps.iter() {
                worst = worst.max(ours.get(id).map_or(f64::INFINITY, |o| (o - v).abs()));
            }
        }
    }
    worst
}

fn parity(cases: &[Case], total: Duration) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for c in cases {
        let gap = (c.dec.result.cost.total - c.cen.cost) / c.cen.cost;
        worst = worst.max(gap.abs());
        parts.push(format!("{} {:+.3}%", c.name, 100.0 * gap));
    }
    let pass = worst <= 0.01 && total <= Duration::from_secs(600);
    Outcome::new(pass, format!("{}; {:.0} s total", parts.join(", "), total.as_secs_f64()))
}

fn feasibility(cases: &[Case]) -> Outcome {
    let mut pass = true;
    let mut worst = f64::NEG_INFINITY;
    let mut plans = 0;
    for c in cases {
        for plan in [&c.cen.plan, &c.dec.result.plan] {
            let check = requirements(&c.net, plan);
            plans += 1;
            for a in &check.areas {
                worst = worst.max(a.saidi - a.limit);
                pass &= a.saidi <= a.limit + 1e-6;
            }
            pass &= check.pass;
        }
    }
    Outcome::new(pass, format!("{} plans, max SAIDI - limit {:.3e}", plans, worst))
}

fn agreement(cases: &[Case]) -> Outcome {
    let mut worst: f64 = 0.0;
    for c in cases {
        worst = worst.max(index_gap(&c.net, &c.cen.plan, &c.cen.indices));
        worst = worst.max(index_gap(&c.net, &c.dec.result.plan, &c.dec.indices));
    }
    Outcome::new(worst <= 1e-6, format!("max |internal - oracle| {:.3e}", worst))
}

fn milp_core() -> Outcome {
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for i in 0..20u64 {
        let nbin = 4 + (i as usize % 9);
        let m = oracle::random_model(1000 + i, nbin, 3, 6);
        let want = oracle::enumerate_milp(&m);
        let got = solve_milp(&m, &cfg).unwrap();
        match want {
            Some(w) if got.status.has_solution() => worst = worst.max((got.objective - w).abs()),
            None => ok &= !got.status.has_solution(),
            Some(_) => ok = false,
        }
    }
    let milp_ok = ok && worst <= 1e-6;
    let mut lp_worst: f64 = 0.0;
    let mut lp_ok = true;
    for i in 0..10u64 {
        let m = oracle::random_model(2000 + i, 0, 4, 6);
        let got = solve_lp(&m).unwrap();
        match oracle::enumerate_lp(&m) {
            Some(w) if got.status == LpStatus::Optimal => lp_worst = lp_worst.max((got.objective - w).abs()),
            None => lp_ok &= got.status != LpStatus::Optimal,
            Some(_) => lp_ok = false,
        }
    }
    let lp_ok = lp_ok && lp_worst <= 1e-7;
    Outcome::new(
        milp_ok && lp_ok,
        format!("20 MILPs max error {:.3e}; 10 LPs max error {:.3e}", worst, lp_worst),
    )
}

fn mechanics(cases: &[Case], extra: &[&CoordinationResult], cfg: &CoordConfig) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let runs = cases
        .iter()
        .map(|c| (c.name.as_str(), &c.dec.result, Some(c.cen.objective)))
        .chain(extra.iter().map(|r| ("T2-noaccel", *r, None)));
    let (mut lb_ok, mut rho_ok, mut z_ok) = (true, true, true);
    let mut projections = 0;
    for (name, r, cen) in runs {
        let lb = &r.audit.lower_bounds;
        let mono = lb.windows(2).all(|w| w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()));
        let below = match (cen, lb.last()) {
            (Some(c), Some(&l)) => l <= c + 1e-6,
            _ => true,
        };
        if !(mono && below) {
            notes.push(format!("{} bound {:?} vs {:?}", name, lb.last(), cen));
        }
        lb_ok &= mono && below && !lb.is_empty();
        rho_ok &= r.audit.rho_history.iter().all(|&p| p >= cfg.rho_min && p <= cfg.rho_max);
        z_ok &= r.audit.projection_failures == 0 && r.audit.projections > 0;
        projections += r.audit.projections;
    }
    let up = (update_penalty(1.0, 1.0, cfg.rho_min, cfg.rho_max) - 10.0).abs() < 1e-12
        && (update_penalty(1.0, 0.0, cfg.rho_min, cfg.rho_max) - 0.5).abs() < 1e-12;
    pass &= lb_ok && rho_ok && z_ok && up;
    Outcome::new(
        pass,
        format!(
            "(a) {} (b) {} (c) {} over {} projections (d) {}{}",
            ok(lb_ok),
            ok(rho_ok),
            ok(z_ok),
            projections,
            ok(up),
            if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

/// Momentum restart: alpha back to 1 and the extrapolated point rolled
/// back to the previous center.
fn restart_cases() -> bool {
    let cfg = CoordConfig::default();
    let mut st = CoordinationState::new(&[2], &cfg);
    st.w_prev = vec![vec![1.0, 0.0]];
    st.w = vec![vec![3.0, 1.0]];
    st.w_hat = vec![vec![0.0, 0.0]];
    st.alpha = 2.5;
    st.c_prev = 1.0;
    let restarted = accelerate_multipliers(&mut st, 0.99);
    let rolled = restarted && st.alpha == 1.0 && st.w_hat == vec![vec![1.0, 0.0]];

    let mut st = CoordinationState::new(&[1], &cfg);
    st.w_prev = vec![vec![0.0]];
    st.w = vec![vec![1.0]];
    st.w_hat = vec![vec![0.9]];
    st.alpha = 2.0;
    st.c_prev = 1.0;
    let kept = !accelerate_multipliers(&mut st, 0.99) && st.alpha > 1.0 && st.w_hat[0][0] > 1.0;
    rolled && kept
}

fn acceleration(t2: &CoordinationResult, noacc: &CoordinationResult) -> Outcome {
    let a = t2.trace.reach_index(0.005);
    let n = noacc.trace.reach_index(0.005);
    let restart = restart_cases();
    let pass = restart && matches!((a, n), (Some(a), Some(n)) if a <= n);
    Outcome::new(
        pass,
        format!(
            "T2 within 0.5% at k={:?} accelerated vs k={:?} plain; restart cases {}",
            a,
            n,
            ok(restart)
        ),
    )
}

fn scaling() -> Outcome {
    let rows: Vec<ScalingRow> = (2..=5)
        .map(|k| {
            let spec = fixtures::gen_fixture(&FixtureSpec {
                sub_areas: k,
                nodes_per_area: 8,
                seed: 7,
                uniform_areas: true,
                ..FixtureSpec::default()
            })
            .unwrap();
            ScalingRow::new(&Network::from_spec(spec).unwrap())
        })
        .collect();
    let csv = scaling_csv(&rows);
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("scaling.csv");
    std::fs::write(&path, &csv).unwrap();
    let back = parse_scaling_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let per_branch: Vec<f64> = back
        .iter()
        .map(|r| r.centralized_binaries as f64 / r.branches as f64)
        .collect();
    let superlinear = back.windows(2).all(|w| w[1].branches > w[0].branches)
        && per_branch.windows(2).all(|w| w[1] > w[0]);
    let base = back[0].max_subproblem_binaries as f64;
    let flat = back
        .iter()
        .all(|r| (r.max_subproblem_binaries as f64 - base).abs() <= 0.1 * base);
    let summary: Vec<String> = back
        .iter()
        .map(|r| format!("{}:{}/{}/{}", r.sub_areas, r.branches, r.centralized_binaries, r.max_subproblem_binaries))
        .collect();
    Outcome::new(
        superlinear && flat && back == rows,
        format!("subAreas:branches/centralized/maxSub {}; {}", summary.join(" "), path.display()),
    )
}

fn determinism(cases: &[Case]) -> Outcome {
    let mut pass = true;
    let mut checked = Vec::new();
    for c in cases.iter().filter(|c| ["T1", "T2", "R1"].contains(&c.name.as_str())) {
        let cfg = CoordConfig {
            workers: 4,
            ..CoordConfig::default()
        };
        let r = run_coordination_with(&c.net, &cfg, &SolverConfig::default()).unwrap();
        let same_plan = serde_json::to_string(&r.plan).unwrap() == serde_json::to_string(&c.dec.result.plan).unwrap();
        let same_trace = r.trace.to_csv_untimed() == c.dec.result.trace.to_csv_untimed();
        pass &= same_plan && same_trace;
        checked.push(format!("{} {}", c.name, ok(same_plan && same_trace)));
    }
    // Artifact path: the written plan file is identical across runs.
    let spec = fixtures::preset_t1();
    let files: Vec<(String, String)> = [1, 4]
        .iter()
        .map(|&w| {
            let mut cfg = PlanConfig::default();
            cfg.coordination.workers = w;
            let run = run_plan(&spec, Mode::Decomposed, &cfg).unwrap();
            let trace = run.trace.as_ref().unwrap().to_csv_untimed();
            (plan_json(&run.plan, &run.summary.network_hash), trace)
        })
        .collect();
    let same_files = files[0] == files[1];
    pass &= same_files;
    checked.push(format!("T1 plan file {}", ok(same_files)));
    Outcome::new(pass, format!("workers 1 vs 4: {}", checked.join(", ")))
}

fn main() -> ExitCode {
    let cfg = CoordConfig::default();
    let mut results: BTreeMap<usize, Outcome> = BTreeMap::new();
    results.insert(4, milp_core());
    results.insert(7, scaling());

    let mut all = Vec::new();
    let mut total = Duration::ZERO;
    for (name, spec) in cases() {
        let net = Network::from_spec(spec).unwrap();
        let cen = centralized(&net);
        let dec = decomposed(&net, &cfg);
        eprintln!(
            "  {}: centralized {:.4} in {:.1} s, decomposed {:.4} in {:.1} s ({} iterations)",
            name,
            cen.cost,
            cen.time.as_secs_f64(),
            dec.result.cost.total,
            dec.time.as_secs_f64(),
            dec.result.iterations
        );
        total += cen.time + dec.time;
        all.push(Case { name, net, cen, dec });
    }
    let t2 = all.iter().find(|c| c.name == "T2").unwrap();
    let noacc = decomposed(
        &t2.net,
        &CoordConfig {
            accelerate: false,
            ..cfg.clone()
        },
    );

    results.insert(1, parity(&all, total));
    results.insert(2, feasibility(&all));
    results.insert(3, agreement(&all));
    results.insert(5, mechanics(&all, &[&noacc.result], &cfg));
    results.insert(6, acceleration(&t2.dec.result, &noacc.result));
    results.insert(8, determinism(&all));

    let mut failed = 0;
    for (n, o) in &results {
        println!("criterion {} {}: {}", n, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    if failed > 0 {
        println!("{} of {} criteria failed", failed, results.len());
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
