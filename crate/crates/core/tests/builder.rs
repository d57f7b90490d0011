use gridplan_core::builder::{
    boundary_box, build_centralized, build_subarea, build_subproblems, flow_big_m, product_big_m, voltage_big_m,
    BuildOptions, BuiltModel,
};
use gridplan_core::plan::{extract_plan, internal_reliability_indices, saidi};
use gridplan_core::Network;
use gridplan_milp::{solve_milp, SolverConfig};
use serde_json::Value;

const T1: &str = include_str!("data/t1.json");

fn net_with(f: impl FnOnce(&mut Value)) -> Network {
    let mut v: Value = serde_json::from_str(T1).unwrap();
    f(&mut v);
    Network::from_json(&v.to_string()).unwrap()
}

fn t1() -> Network {
    net_with(|_| {})
}

fn solve(b: &BuiltModel) -> (f64, Vec<f64>) {
    let s = solve_milp(&b.model, &SolverConfig::default()).unwrap();
    assert!(s.status.has_solution(), "{:?}", s.status);
    (b.cost(&s.x).total, s.x)
}

#[test]
fn big_m_values() {
    let net = t1();
    assert!((flow_big_m(&net) - 14.142_135_6).abs() < 1e-6);
    assert_eq!(product_big_m(0.5, 4.0), 2.0);
    // (1.21 - 0.81) + 2 * 0.02 * 1 km * sqrt2 * 10 / 10 base
    let expect = 0.4 + 2.0 * 0.02 * 2f64.sqrt();
    assert!((voltage_big_m(&net, 1.0) - expect).abs() < 1e-12);
}

#[test]
fn scenario_sets() {
    let net = t1();
    let cen = build_centralized(&net, &BuildOptions::default());
    let st = &cen.atlas.stages[0];
    assert_eq!(st.scenarios.len(), 8);
    assert!(st.scenarios[0].fault.is_none());
    for sv in &st.scenarios[1..] {
        let f = sv.fault.unwrap();
        assert!(sv.s[f].is_none());
    }
    let s_vars: usize = st.scenarios.iter().map(|sv| sv.s.iter().flatten().count()).sum();
    assert_eq!(s_vars, 7 + 7 * 6);

    let sa = build_subarea(&net, 0, &BuildOptions::default());
    assert_eq!(sa.atlas.stages[0].scenarios.len(), 5);
}

#[test]
fn coordination_slices_pair_up() {
    let net = t1();
    let subs = build_subproblems(&net, &BuildOptions::default());
    assert_eq!(subs.len(), 2);
    assert_eq!(subs[0].atlas.coord_vars().len(), 6);
    assert_eq!(subs[1].atlas.coord_vars().len(), 6);
    assert_eq!(subs[0].atlas.coord_labels.len(), subs[1].atlas.coord_labels.len());
}

#[test]
fn boundary_box_sums_sub_area() {
    let net = t1();
    let b = boundary_box(&net, 0);
    assert_eq!(b.load_p, vec![2.0]);
    assert_eq!(b.load_q, vec![1.0]);
    // Boundary plus three internal branches, 1 km each at the max rate 0.1.
    assert!((b.rate - 0.4).abs() < 1e-12);
    assert!((b.duration - 1.6).abs() < 1e-12);
}

#[test]
fn saidi_weighting() {
    assert!((saidi(&[10.0, 30.0], &[2.0, 1.0]) - 1.25).abs() < 1e-12);
    assert_eq!(saidi(&[0.0], &[3.0]), 0.0);
}

#[test]
fn centralized_solution_decodes() {
    let net = t1();
    let cen = build_centralized(&net, &BuildOptions::default());
    let (_, x) = solve(&cen);
    let plan = extract_plan(&net, &cen, &x, 1e-6).unwrap();
    let sp = &plan.stages[0];
    let loads = net.nodes.iter().filter(|n| n.substation.is_none()).count();
    assert_eq!(sp.closed.len(), loads);
    assert_eq!(sp.feeder_of.len(), loads);
    let idx = internal_reliability_indices(&net, &cen, &x, 1e-6).unwrap();
    for (area, v) in &idx[0].saidi {
        assert!(*v <= net.saidi_limit(area).unwrap() + 1e-6, "{} {}", area, v);
    }
}

#[test]
fn fractional_switch_rejected() {
    let net = t1();
    let cen = build_centralized(&net, &BuildOptions::default());
    let (_, mut x) = solve(&cen);
    let s = cen.atlas.stages[0].scenarios[0].s.iter().flatten().next().copied().unwrap();
    x[s.0] = 0.4;
    assert!(extract_plan(&net, &cen, &x, 1e-6).is_err());
}

#[test]
fn indices_catch_inconsistent_cif() {
    let net = t1();
    let cen = build_centralized(&net, &BuildOptions::default());
    let (_, mut x) = solve(&cen);
    let st = &cen.atlas.stages[0];
    let i = cen.atlas.view.non_source().next().unwrap();
    x[st.cif[i].unwrap().0] += 0.01;
    assert!(internal_reliability_indices(&net, &cen, &x, 1e-6).is_err());
}

#[test]
fn looser_saidi_never_costs_more() {
    let mut costs = Vec::new();
    for lim in [0.8, 1.0, 2.0] {
        let net = net_with(|v| {
            v["horizon"]["saidiLimit"]["area1"] = Value::from(lim);
            v["horizon"]["saidiLimit"]["backbone"] = Value::from(lim);
        });
        costs.push(solve(&build_centralized(&net, &BuildOptions::default())).0);
    }
    assert!(costs[1] <= costs[0] + 1e-6 && costs[2] <= costs[1] + 1e-6, "{:?}", costs);
}

#[test]
fn binaries_grow_with_branches() {
    let small = build_centralized(&t1(), &BuildOptions::default()).model.num_binaries();
    // A second sub-area hung off node 2: 7 branches become 11.
    let big = net_with(|v| {
        for (id, p) in [("13", 0.0), ("14", 1.0), ("15", 1.0)] {
            v["nodes"].as_array_mut().unwrap().push(serde_json::json!(
                {"id": id, "loadP": [p], "loadQ": [p / 2.0], "customers": if p > 0.0 { 100 } else { 0 }}));
        }
        for (a, b) in [("2", "13"), ("13", "14"), ("13", "15"), ("14", "15")] {
            v["branches"].as_array_mut().unwrap().push(serde_json::json!(
                {"from": a, "to": b, "lengthKm": 1.0, "switchTimeH": 0.5, "repairTimeH": 4.0}));
        }
        v["partition"]["subAreas"].as_array_mut().unwrap().push(serde_json::json!(
            {"id": "area2", "nodes": ["13", "14", "15"], "boundaryBranch": "2-13"}));
        v["horizon"]["saidiLimit"]["area2"] = Value::from(1.0);
    });
    let big = build_centralized(&big, &BuildOptions::default()).model.num_binaries();
    assert!(big > 2 * small, "{} vs {}", big, small);
}
