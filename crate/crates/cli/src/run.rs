//! Centralized and decomposed planning runs and their on-disk artifacts.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use gridplan_coord::{run_coordination_with, ConvergenceTrace, CoordConfig};
use gridplan_core::builder::{build_centralized, build_subproblems, BuildOptions, CostBreakdown};
use gridplan_core::{Network, NetworkSpec, Plan};
use gridplan_milp::{solve_lp, solve_milp, LpStatus, MilpModel, MilpStatus, SolverConfig};
use gridplan_oracle::{check_requirements, evaluate_plan_reliability, ReliabilityReport, RequirementCheck};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compare::ScalingRow;

pub const PLAN_FILE: &str = "plan.json";
pub const RELIABILITY_FILE: &str = "reliability.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "run.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Network(#[from] gridplan_core::NetworkError),
    #[error("model infeasible; binding constraint families: {}", .families.join(", "))]
    Infeasible { families: Vec<String> },
    #[error("solver stopped without a plan: {0}")]
    NoPlan(String),
    #[error(transparent)]
    Milp(#[from] gridplan_milp::MilpError),
    #[error(transparent)]
    Coord(#[from] gridplan_coord::CoordError),
    #[error(transparent)]
    Plan(#[from] gridplan_core::PlanError),
    #[error(transparent)]
    Oracle(#[from] gridplan_oracle::OracleError),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Centralized,
    Decomposed,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Centralized => "centralized",
            Mode::Decomposed => "decomposed",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "centralized" => Ok(Mode::Centralized),
            "decomposed" => Ok(Mode::Decomposed),
            _ => Err(format!("unknown mode {:?}", s)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SolverOptions {
    pub node_limit: usize,
    pub rel_gap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            node_limit: d.node_limit,
            rel_gap: d.rel_gap,
        }
    }
}

impl SolverOptions {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            node_limit: self.node_limit,
            rel_gap: self.rel_gap,
            ..SolverConfig::default()
        }
    }
}

/// Contents of the `--config` file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct PlanConfig {
    pub coordination: CoordConfig,
    pub solver: SolverOptions,
}

impl PlanConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {}", path.display(), e)))
    }
}

/// Hash of the network's canonical (compact, field-ordered) JSON form, so
/// formatting differences in the input file do not change it.
pub fn network_hash(spec: &NetworkSpec) -> String {
    Network::fingerprint(&serde_json::to_string(spec).expect("network serializes"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub mode: Mode,
    pub network: String,
    pub network_hash: String,
    pub cost: CostBreakdown,
    /// Model objective of the plan, tie-break included.
    pub objective: f64,
    /// Summed dual bound (decomposed) or branch-and-bound bound.
    pub lower_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: u128,
    /// Binary variables per model, backbone first when decomposed.
    pub binaries: Vec<usize>,
    pub accelerate: bool,
    pub workers: usize,
    pub requirements: RequirementCheck,
    pub scaling: ScalingRow,
}

impl RunSummary {
    pub fn total_binaries(&self) -> usize {
        self.binaries.iter().sum()
    }

    pub fn max_subproblem_binaries(&self) -> usize {
        self.binaries.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub plan: Plan,
    pub reliability: ReliabilityReport,
    pub trace: Option<ConvergenceTrace>,
}

fn read(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|e| RunError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("artifact serializes") + "\n"
}

impl RunArtifacts {
    pub fn passed(&self) -> bool {
        self.summary.requirements.pass
    }

    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Io {
            path: dir.display().to_string(),
            reason: e.to_string(),
        })?;
        write(&dir.join(SUMMARY_FILE), &json(&self.summary))?;
        write(&dir.join(PLAN_FILE), &plan_json(&self.plan, &self.summary.network_hash))?;
        write(&dir.join(RELIABILITY_FILE), &self.reliability.to_json())?;
        if let Some(t) = &self.trace {
            write(&dir.join(TRACE_FILE), &t.to_csv())?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, RunError> {
        let bad = |f: &str, e: String| RunError::Io {
            path: dir.join(f).display().to_string(),
            reason: e,
        };
        let summary: RunSummary =
            serde_json::from_str(&read(&dir.join(SUMMARY_FILE))?).map_err(|e| bad(SUMMARY_FILE, e.to_string()))?;
        let (plan, hash) = parse_plan(&read(&dir.join(PLAN_FILE))?).map_err(|e| bad(PLAN_FILE, e))?;
        if hash.as_deref().is_some_and(|h| h != summary.network_hash) {
            return Err(bad(PLAN_FILE, "network hash differs from the run summary".into()));
        }
        let reliability = ReliabilityReport::from_json(&read(&dir.join(RELIABILITY_FILE))?)
            .map_err(|e| bad(RELIABILITY_FILE, e.to_string()))?;
        let tp = dir.join(TRACE_FILE);
        let trace = if tp.exists() {
            Some(ConvergenceTrace::from_csv(&read(&tp)?).map_err(|e| bad(TRACE_FILE, e))?)
        } else {
            None
        };
        Ok(Self {
            summary,
            plan,
            reliability,
            trace,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PlanFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    network_hash: Option<String>,
    #[serde(flatten)]
    plan: Plan,
}

/// Plan JSON with the network hash alongside.
pub fn plan_json(plan: &Plan, hash: &str) -> String {
    json(&PlanFile {
        network_hash: Some(hash.to_string()),
        plan: plan.clone(),
    })
}

/// Reads a plan file; the hash is absent for bare plans.
pub fn parse_plan(text: &str) -> Result<(Plan, Option<String>), String> {
    let f: PlanFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok((f.plan, f.network_hash))
}

fn family(row: &str) -> &str {
    row.split('_').next().unwrap_or(row)
}

/// Constraint families whose removal alone makes the model feasible: first
/// tried on the LP relaxation, then, if the relaxation was already feasible,
/// with a short branch-and-bound.
pub fn binding_families(model: &MilpModel) -> Vec<String> {
    let families: BTreeSet<&str> = model.cons.iter().map(|c| family(&c.name)).collect();
    let lp_infeasible = solve_lp(model).map_or(false, |s| s.status == LpStatus::Infeasible);
    let quick = SolverConfig {
        node_limit: 2_000,
        ..SolverConfig::default()
    };
    let mut out = Vec::new();
    for f in families {
        let mut m = model.clone();
        m.cons.retain(|c| family(&c.name) != f);
        let feasible = if lp_infeasible {
            solve_lp(&m).map_or(false, |s| s.status == LpStatus::Optimal)
        } else {
            solve_milp(&m, &quick).map_or(false, |s| s.status.has_solution())
        };
        if feasible {
            out.push(f.to_string());
        }
    }
    out
}

fn solve_status(model: &MilpModel, status: MilpStatus) -> RunError {
    match status {
        MilpStatus::Infeasible => RunError::Infeasible {
            families: binding_families(model),
        },
        s => RunError::NoPlan(format!("{:?}", s)),
    }
}

/// Solves one network in the given mode and evaluates the plan with the
/// reliability oracle.
pub fn run_plan(spec: &NetworkSpec, mode: Mode, cfg: &PlanConfig) -> Result<RunArtifacts, RunError> {
    let net = Network::from_spec(spec.clone())?;
    let hash = network_hash(spec);
    let solver = cfg.solver.config();
    let opts = BuildOptions::default();
    let start = Instant::now();
    let (plan, cost, objective, lower_bound, iterations, converged, binaries, trace) = match mode {
        Mode::Centralized => {
            let built = build_centralized(&net, &opts);
            log::info!("centralized model: {} vars, {} binaries", built.model.num_vars(), built.model.num_binaries());
            let sol = solve_milp(&built.model, &solver)?;
            if !sol.status.has_solution() {
                return Err(solve_status(&built.model, sol.status));
            }
            let plan = gridplan_core::plan::extract_plan(&net, &built, &sol.x, 1e-6)?;
            (
                plan,
                built.cost(&sol.x),
                sol.objective,
                sol.bound,
                sol.nodes,
                sol.status == MilpStatus::Optimal,
                vec![built.model.num_binaries()],
                None,
            )
        }
        Mode::Decomposed => {
            let r = run_coordination_with(&net, &cfg.coordination, &solver)?;
            (
                r.plan,
                r.cost,
                r.objective,
                r.lower_bound,
                r.iterations,
                r.converged,
                r.binaries,
                Some(r.trace),
            )
        }
    };
    let wall_ms = start.elapsed().as_millis();
    let reliability = evaluate_plan_reliability(&net, &plan)?;
    let requirements = check_requirements(&reliability, &net.horizon);
    log::info!(
        "{} {}: cost {:.6}, requirements {}",
        mode,
        net.name,
        cost.total,
        if requirements.pass { "pass" } else { "fail" }
    );
    Ok(RunArtifacts {
        summary: RunSummary {
            mode,
            network: net.name.clone(),
            network_hash: hash,
            cost,
            objective,
            lower_bound,
            iterations,
            converged,
            wall_ms,
            binaries,
            accelerate: cfg.coordination.accelerate,
            workers: cfg.coordination.workers,
            requirements,
            scaling: ScalingRow::new(&net),
        },
        plan,
        reliability,
        trace,
    })
}

/// Binary counts of the centralized model and of each decomposed block,
/// without solving.
pub fn binary_counts(net: &Network) -> (usize, Vec<usize>) {
    let opts = BuildOptions::default();
    let cen = build_centralized(net, &opts).model.num_binaries();
    let dec = if net.partition.is_some() {
        build_subproblems(net, &opts).iter().map(|b| b.model.num_binaries()).collect()
    } else {
        Vec::new()
    };
    (cen, dec)
}

/// Oracle check of an existing plan file against a network.
pub fn verify_plan(spec: &NetworkSpec, plan_text: &str) -> Result<(ReliabilityReport, RequirementCheck), RunError> {
    let net = Network::from_spec(spec.clone())?;
    let (plan, hash) = parse_plan(plan_text).map_err(RunError::Config)?;
    if let Some(h) = hash {
        if h != network_hash(spec) {
            return Err(RunError::Config("plan was produced for a different network".into()));
        }
    }
    let report = evaluate_plan_reliability(&net, &plan)?;
    let check = check_requirements(&report, &net.horizon);
    Ok((report, check))
}

pub fn load_spec(path: &Path) -> Result<NetworkSpec, RunError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| RunError::Network(gridplan_core::NetworkError::Parse(e.to_string())))
}
