use std::collections::BTreeMap;

use gridplan_core::{Horizon, Network, Plan, StagePlan};
use gridplan_oracle::{
    check_requirements, evaluate_plan_reliability, simulate_fault, OracleError, ReliabilityReport,
    StageReliability, StageTopology, RESTORE_TIE_BREAK,
};
use proptest::prelude::*;
use serde_json::json;

fn node(id: &str, p: f64, customers: u32) -> serde_json::Value {
    json!({"id": id, "loadP": [p], "loadQ": [0.3 * p], "customers": customers})
}

fn source(id: &str) -> serde_json::Value {
    json!({"id": id, "substation": {"existing": true, "maxTransformers": 1}})
}

fn branch(from: &str, to: &str) -> serde_json::Value {
    json!({"from": from, "to": to, "lengthKm": 1.0, "switchTimeH": 0.5, "repairTimeH": 4.0})
}

/// One conductor type with rate 0.1/km/yr, one 10 MVA transformer type.
fn network(nodes: Vec<serde_json::Value>, branches: Vec<serde_json::Value>, heads: &[(&str, &str)]) -> Network {
    let slots: Vec<_> = heads
        .iter()
        .enumerate()
        .map(|(i, (n, b))| json!({"id": format!("tr{}", i + 1), "node": n, "outletBranch": b}))
        .collect();
    let feeders: Vec<_> = heads
        .iter()
        .enumerate()
        .map(|(i, (_, b))| json!({"id": format!("f{}", i + 1), "headBranch": b}))
        .collect();
    let spec = json!({
        "name": "test",
        "nodes": nodes,
        "branches": branches,
        "transformerSlots": slots,
        "feeders": feeders,
        "catalog": {
            "conductors": [{"id": "c1", "capacityMva": 8.0, "r": 0.01, "x": 0.01, "failureRate": 0.1, "investCost": 1.0}],
            "transformers": [{"id": "t10", "capacityMva": 10.0, "investCost": 1.0}]
        },
        "horizon": {"stages": 1, "stageYears": [0, 1], "interestRate": 0.1, "eensWeight": 1.0,
                    "saidiLimit": {"system": 10.0}}
    });
    Network::from_json(&spec.to_string()).unwrap()
}

fn stage(net: &Network, built: &[&str], closed: &[&str]) -> StagePlan {
    let conductors: BTreeMap<String, String> = built.iter().map(|b| (b.to_string(), "c1".to_string())).collect();
    let mut sp = StagePlan {
        stage: 1,
        conductors,
        closed: closed.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    for s in &net.slots {
        sp.transformers.insert(s.id.clone(), "t10".into());
    }
    for n in &net.nodes {
        if n.substation.is_some() {
            sp.substations.push(n.id.clone());
        }
    }
    sp
}

fn plan(net: &Network, built: &[&str], closed: &[&str]) -> Plan {
    Plan {
        network: net.name.clone(),
        stages: vec![stage(net, built, closed)],
    }
}

fn ids(net: &Network, mask: &[bool]) -> Vec<String> {
    (0..mask.len()).filter(|&i| mask[i]).map(|i| net.nodes[i].id.clone()).collect()
}

/// S - a - b with an optional tie b - T to a second source.
fn sab() -> Network {
    network(
        vec![source("S"), node("a", 0.5, 10), node("b", 0.5, 10), source("T")],
        vec![branch("S", "a"), branch("a", "b"), branch("T", "b")],
        &[("S", "S-a"), ("T", "T-b")],
    )
}

#[test]
fn radial_feeder_without_tie_loses_everything_downstream() {
    let net = sab();
    let sp = stage(&net, &["S-a", "a-b"], &["S-a", "a-b"]);
    let topo = StageTopology::from_plan(&net, &sp).unwrap();
    let out = simulate_fault(&net, &topo, net.branch_idx("S-a").unwrap()).unwrap();
    assert_eq!(ids(&net, &out.affected), ["a", "b"]);
    assert_eq!(ids(&net, &out.unrestored), ["a", "b"]);
}

#[test]
fn tie_restores_the_whole_feeder() {
    let net = sab();
    let sp = stage(&net, &["S-a", "a-b", "T-b"], &["S-a", "a-b"]);
    let topo = StageTopology::from_plan(&net, &sp).unwrap();
    let out = simulate_fault(&net, &topo, net.branch_idx("S-a").unwrap()).unwrap();
    assert_eq!(ids(&net, &out.affected), ["a", "b"]);
    assert!(ids(&net, &out.unrestored).is_empty());
    assert!(out.closed[net.branch_idx("T-b").unwrap()]);
    assert!(!out.closed[net.branch_idx("S-a").unwrap()]);
}

#[test]
fn fault_on_unbuilt_branch_is_rejected() {
    let net = sab();
    let sp = stage(&net, &["S-a", "a-b"], &["S-a", "a-b"]);
    let topo = StageTopology::from_plan(&net, &sp).unwrap();
    let r = simulate_fault(&net, &topo, net.branch_idx("T-b").unwrap());
    assert!(matches!(r, Err(OracleError::InvalidPlan(_))));
}

#[test]
fn invalid_topologies_are_rejected() {
    let net = sab();
    // b unsupplied
    let r = evaluate_plan_reliability(&net, &plan(&net, &["S-a"], &["S-a"]));
    assert!(matches!(r, Err(OracleError::InvalidPlan(_))));
    // closed but not built
    let r = evaluate_plan_reliability(&net, &plan(&net, &["S-a"], &["S-a", "a-b"]));
    assert!(matches!(r, Err(OracleError::InvalidPlan(_))));
    // loop through both sources
    let r = evaluate_plan_reliability(&net, &plan(&net, &["S-a", "a-b", "T-b"], &["S-a", "a-b", "T-b"]));
    assert!(matches!(r, Err(OracleError::InvalidPlan(_))));
}

#[test]
fn single_branch_feeder_indices() {
    let net = network(vec![source("S"), node("a", 1.0, 5)], vec![branch("S", "a")], &[("S", "S-a")]);
    let rep = evaluate_plan_reliability(&net, &plan(&net, &["S-a"], &["S-a"])).unwrap();
    let s = &rep.stages[0];
    assert!((s.cif["a"] - 0.1).abs() < 1e-12);
    // 0.1 * 0.5 + 0.1 * 3.5
    assert!((s.cid["a"] - 0.4).abs() < 1e-12);
    assert!((s.system_saidi - 0.4).abs() < 1e-12);
    assert_eq!(s.faults.len(), 1);
    assert_eq!(s.faults[0].unrestored, ["a"]);
}

#[test]
fn nothing_to_serve_gives_zero_indices() {
    let net = network(vec![source("S"), node("a", 0.0, 0), node("b", 0.0, 0)], vec![branch("S", "a"), branch("a", "b")], &[("S", "S-a")]);
    let rep = evaluate_plan_reliability(&net, &plan(&net, &[], &[])).unwrap();
    let s = &rep.stages[0];
    assert!(s.cif.values().chain(s.cid.values()).all(|&v| v == 0.0));
    assert_eq!(s.system_saidi, 0.0);
    assert!(s.faults.is_empty());
    // an idle junction left out does not block restoration elsewhere
    let net = network(
        vec![source("S"), node("a", 1.0, 5), node("j", 0.0, 0)],
        vec![branch("S", "a"), branch("a", "j")],
        &[("S", "S-a")],
    );
    let rep = evaluate_plan_reliability(&net, &plan(&net, &["S-a"], &["S-a"])).unwrap();
    assert!((rep.stages[0].cid["a"] - 0.4).abs() < 1e-12);
    assert_eq!(rep.stages[0].cid["j"], 0.0);
    let loaded = network(vec![source("S"), node("a", 0.0, 3)], vec![branch("S", "a")], &[("S", "S-a")]);
    assert!(evaluate_plan_reliability(&loaded, &plan(&loaded, &[], &[])).is_err());
}

#[test]
fn saidi_is_customer_weighted() {
    let net = sab();
    let rep = evaluate_plan_reliability(&net, &plan(&net, &["S-a", "a-b"], &["S-a", "a-b"])).unwrap();
    let s = &rep.stages[0];
    // a is switched back after the a-b fault, b waits for both repairs
    assert!((s.cid["a"] - 0.45).abs() < 1e-12);
    assert!((s.cid["b"] - 0.8).abs() < 1e-12);
    let w = (10.0 * s.cid["a"] + 10.0 * s.cid["b"]) / 20.0;
    assert!((s.system_saidi - w).abs() < 1e-9);
    for (n, &f) in &s.cif {
        assert!(s.cid[n] >= f * 0.5 - 1e-12);
    }
}

fn report_with(saidi: f64) -> ReliabilityReport {
    let mut area = BTreeMap::new();
    area.insert("area1".to_string(), saidi);
    ReliabilityReport {
        network: "n".into(),
        stages: vec![StageReliability {
            stage: 1,
            cif: BTreeMap::new(),
            cid: BTreeMap::new(),
            area_saidi: area,
            system_saidi: saidi,
            faults: vec![],
        }],
    }
}

fn horizon(limit: f64) -> Horizon {
    let net = sab();
    let mut h = net.horizon.clone();
    h.saidi_limit = [("area1".to_string(), limit)].into_iter().collect();
    h
}

#[test]
fn requirement_margins() {
    let c = check_requirements(&report_with(1.4997), &horizon(1.5));
    assert!(c.pass);
    assert!((c.areas[0].margin - 0.0003).abs() < 1e-12);
    assert!(check_requirements(&report_with(1.5), &horizon(1.5)).pass);
    assert!(check_requirements(&report_with(1.5 + 5e-7), &horizon(1.5)).pass);
    let f = check_requirements(&report_with(2.1), &horizon(2.0));
    assert!(!f.pass);
    assert!(!f.areas[0].pass);
    assert!((f.areas[0].margin + 0.1).abs() < 1e-12);
}

#[test]
fn report_round_trips() {
    let net = sab();
    let rep = evaluate_plan_reliability(&net, &plan(&net, &["S-a", "a-b", "T-b"], &["S-a", "a-b"])).unwrap();
    assert_eq!(ReliabilityReport::from_json(&rep.to_json()).unwrap(), rep);
    let csv = rep.to_csv();
    assert!(csv.starts_with("stage,node,cif,cid\n"));
    assert_eq!(csv.lines().count(), 3);
}

// Two feeders over six loads with four candidate ties; ten branches in all.
const MESH_TREE: [&str; 6] = ["S-1", "1-2", "2-3", "T-4", "4-5", "5-6"];
const MESH_TIES: [&str; 4] = ["3-6", "2-5", "1-4", "3-5"];

fn mesh(loads: &[f64; 6]) -> Network {
    let mut nodes = vec![source("S"), source("T")];
    for (i, &p) in loads.iter().enumerate() {
        nodes.push(node(&(i + 1).to_string(), p, 10 + i as u32));
    }
    let branches = MESH_TREE
        .iter()
        .chain(&MESH_TIES)
        .map(|b| {
            let (f, t) = b.split_once('-').unwrap();
            branch(f, t)
        })
        .collect();
    network(nodes, branches, &[("S", "S-1"), ("T", "T-4")])
}

/// Lowest unrestored weight over every subset of usable branches whose
/// energized components are trees with one source each. Capacity and
/// voltage are ignored, so loads must stay well inside the ratings.
fn best_restoration(net: &Network, topo: &StageTopology, fault: usize, affected: &[bool]) -> f64 {
    let usable: Vec<usize> = (0..net.branches.len())
        .filter(|&b| b != fault && topo.conductor[b].is_some())
        .collect();
    let nn = net.nodes.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << usable.len()) {
        let mut parent: Vec<usize> = (0..nn).collect();
        fn find(p: &mut Vec<usize>, i: usize) -> usize {
            if p[i] != i {
                let r = find(p, p[i]);
                p[i] = r;
            }
            p[i]
        }
        let mut cyclic = vec![false; nn];
        let chosen: Vec<usize> = (0..usable.len()).filter(|&j| mask >> j & 1 == 1).map(|j| usable[j]).collect();
        let mut cycle_edges = Vec::new();
        for &b in &chosen {
            let (u, v) = (net.branches[b].from, net.branches[b].to);
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru == rv {
                cycle_edges.push(u);
            } else {
                parent[ru] = rv;
            }
        }
        for u in cycle_edges {
            let r = find(&mut parent, u);
            cyclic[r] = true;
        }
        let mut sources = vec![0; nn];
        for n in 0..nn {
            if net.nodes[n].substation.is_some() {
                let r = find(&mut parent, n);
                sources[r] += 1;
            }
        }
        let mut ok = true;
        let mut lost = 0.0;
        for n in 0..nn {
            if net.nodes[n].substation.is_some() {
                continue;
            }
            let r = find(&mut parent, n);
            let fed = sources[r] == 1 && !cyclic[r];
            if !fed {
                if !affected[n] {
                    ok = false;
                    break;
                }
                lost += net.nodes[n].load_p[0] + RESTORE_TIE_BREAK;
            }
        }
        if ok && lost < best {
            best = lost;
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn restoration_matches_enumeration(
        loads in prop::array::uniform6(0.0f64..1.0),
        ties in prop::collection::vec(any::<bool>(), 4),
    ) {
        let net = mesh(&loads);
        let mut built: Vec<&str> = MESH_TREE.to_vec();
        built.extend(MESH_TIES.iter().zip(&ties).filter(|(_, &on)| on).map(|(b, _)| *b));
        let sp = stage(&net, &built, &MESH_TREE);
        let topo = StageTopology::from_plan(&net, &sp).unwrap();
        for b in MESH_TREE.iter().map(|b| net.branch_idx(b).unwrap()) {
            let out = simulate_fault(&net, &topo, b).unwrap();
            let got: f64 = (0..net.nodes.len())
                .filter(|&n| out.unrestored[n])
                .map(|n| net.nodes[n].load_p[0] + RESTORE_TIE_BREAK)
                .sum();
            let want = best_restoration(&net, &topo, b, &out.affected);
            prop_assert!((got - want).abs() < 1e-9, "fault {}: {} vs {}", net.branches[b].id, got, want);
        }
    }

    #[test]
    fn adding_a_tie_never_raises_cid(
        loads in prop::array::uniform6(0.1f64..1.0),
        ties in prop::collection::vec(any::<bool>(), 4),
        extra in 0usize..4,
    ) {
        let net = mesh(&loads);
        let mut built: Vec<&str> = MESH_TREE.to_vec();
        built.extend(MESH_TIES.iter().zip(&ties).filter(|(_, &on)| on).map(|(b, _)| *b));
        let before = evaluate_plan_reliability(&net, &plan(&net, &built, &MESH_TREE)).unwrap();
        if !built.contains(&MESH_TIES[extra]) {
            built.push(MESH_TIES[extra]);
        }
        let after = evaluate_plan_reliability(&net, &plan(&net, &built, &MESH_TREE)).unwrap();
        for (n, &c) in &after.stages[0].cid {
            prop_assert!(c <= before.stages[0].cid[n] + 1e-12, "node {}: {} > {}", n, c, before.stages[0].cid[n]);
        }
    }
}
