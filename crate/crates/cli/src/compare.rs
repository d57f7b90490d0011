//! Side-by-side reports over several runs, plus plot data.

use std::fmt::Write as _;

use gridplan_oracle::AreaCheck;
use serde::{Deserialize, Serialize};

use crate::run::{Mode, RunArtifacts, RunError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MethodResult {
    pub label: String,
    pub mode: Mode,
    pub accelerate: bool,
    pub total_cost: f64,
    pub saidi: Vec<AreaCheck>,
    pub iterations: usize,
    pub wall_ms: u128,
    pub total_binaries: usize,
    pub max_subproblem_binaries: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompareReport {
    pub network: String,
    pub network_hash: String,
    pub methods: Vec<MethodResult>,
    /// `(decomposed - centralized) / centralized` for the first run of each
    /// mode; absent unless both are present.
    pub gap: Option<f64>,
}

impl CompareReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn label(r: &RunArtifacts) -> String {
    match r.summary.mode {
        Mode::Centralized => "centralized".into(),
        Mode::Decomposed if r.summary.accelerate => "decomposed".into(),
        Mode::Decomposed => "decomposed-noaccel".into(),
    }
}

/// Labels made unique by a numeric suffix, in run order.
fn labels(runs: &[RunArtifacts]) -> Vec<String> {
    let base: Vec<String> = runs.iter().map(label).collect();
    base.iter()
        .enumerate()
        .map(|(i, l)| {
            let n = base[..i].iter().filter(|b| *b == l).count();
            if n == 0 {
                l.clone()
            } else {
                format!("{}-{}", l, n + 1)
            }
        })
        .collect()
}

pub fn compare_report(runs: &[RunArtifacts]) -> Result<CompareReport, RunError> {
    if runs.len() < 2 {
        return Err(RunError::Config("compare needs at least two runs".into()));
    }
    let hash = &runs[0].summary.network_hash;
    if let Some(r) = runs.iter().find(|r| &r.summary.network_hash != hash) {
        return Err(RunError::Config(format!(
            "runs are on different networks ({} vs {})",
            runs[0].summary.network, r.summary.network
        )));
    }
    let methods: Vec<MethodResult> = runs
        .iter()
        .zip(labels(runs))
        .map(|(r, label)| MethodResult {
            label,
            mode: r.summary.mode,
            accelerate: r.summary.accelerate,
            total_cost: r.summary.cost.total,
            saidi: r.summary.requirements.areas.clone(),
            iterations: r.summary.iterations,
            wall_ms: r.summary.wall_ms,
            total_binaries: r.summary.total_binaries(),
            max_subproblem_binaries: r.summary.max_subproblem_binaries(),
        })
        .collect();
    let first = |m: Mode| methods.iter().find(|x| x.mode == m).map(|x| x.total_cost);
    let gap = match (first(Mode::Centralized), first(Mode::Decomposed)) {
        (Some(c), Some(d)) => Some((d - c) / c),
        _ => None,
    };
    Ok(CompareReport {
        network: runs[0].summary.network.clone(),
        network_hash: hash.clone(),
        methods,
        gap,
    })
}

/// Iteration against incumbent cost for every decomposed run.
pub fn convergence_csv(runs: &[RunArtifacts]) -> String {
    let mut out = String::from("label,k,incumbentCost,sumEps\n");
    for (r, l) in runs.iter().zip(labels(runs)) {
        let Some(t) = &r.trace else { continue };
        for row in &t.rows {
            let inc = row.incumbent_cost.map(|c| format!("{:.12e}", c)).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{:.12e}", l, row.k, inc, row.sum_eps);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalingRow {
    pub network: String,
    pub sub_areas: usize,
    pub branches: usize,
    pub centralized_binaries: usize,
    pub max_subproblem_binaries: usize,
    pub decomposed_binaries: usize,
}

impl ScalingRow {
    pub fn new(net: &gridplan_core::Network) -> Self {
        let (cen, dec) = crate::run::binary_counts(net);
        Self {
            network: net.name.clone(),
            sub_areas: net.partition.as_ref().map_or(0, |p| p.sub_areas.len()),
            branches: net.branches.len(),
            centralized_binaries: cen,
            max_subproblem_binaries: dec.iter().copied().max().unwrap_or(0),
            decomposed_binaries: dec.iter().sum(),
        }
    }
}

pub const SCALING_HEADER: &str =
    "network,subAreas,branches,centralizedBinaries,maxSubproblemBinaries,decomposedBinaries";

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from(SCALING_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.network, r.sub_areas, r.branches, r.centralized_binaries, r.max_subproblem_binaries, r.decomposed_binaries
        );
    }
    out
}

pub fn parse_scaling_csv(text: &str) -> Result<Vec<ScalingRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(SCALING_HEADER) {
        return Err("unexpected scaling header".into());
    }
    let n = |s: &str| s.parse::<usize>().map_err(|e| format!("{}: {:?}", e, s));
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(format!("bad scaling row {:?}", l));
            }
            Ok(ScalingRow {
                network: f[0].to_string(),
                sub_areas: n(f[1])?,
                branches: n(f[2])?,
                centralized_binaries: n(f[3])?,
                max_subproblem_binaries: n(f[4])?,
                decomposed_binaries: n(f[5])?,
            })
        })
        .collect()
}

/// One scaling row per distinct network among `runs`, by sub-area count.
/// Unlike [`compare_report`] this spans networks on purpose.
pub fn scaling_rows(runs: &[RunArtifacts]) -> Vec<ScalingRow> {
    let mut rows: Vec<(String, ScalingRow)> = runs
        .iter()
        .map(|r| (r.summary.network_hash.clone(), r.summary.scaling.clone()))
        .collect();
    rows.sort_by(|a, b| (a.1.sub_areas, &a.1.network, &a.0).cmp(&(b.1.sub_areas, &b.1.network, &b.0)));
    rows.dedup_by(|a, b| a.0 == b.0);
    rows.into_iter().map(|r| r.1).collect()
}
