use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridplan_cli::compare::{compare_report, convergence_csv, scaling_csv, scaling_rows};
use gridplan_cli::fixtures::{self, FixtureSpec};
use gridplan_cli::run::{load_spec, run_plan, verify_plan, Mode, PlanConfig, RunArtifacts, RunError};

#[derive(Parser)]
#[command(name = "gridplan", version, about = "Reliability-constrained distribution network planning")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a preset or seeded synthetic network.
    GenFixture(GenArgs),
    /// Plan a network and write plan, reliability and trace artifacts.
    Plan(PlanArgs),
    /// Evaluate an existing plan with the reliability oracle.
    Verify {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Compare run directories on one network.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Only the scaling table; runs may then be on different networks.
        #[arg(long)]
        scaling: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    T1,
    T2,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, conflicts_with_all = ["subareas", "nodes", "seed", "uniform"])]
    preset: Option<Preset>,
    #[arg(long)]
    subareas: Option<usize>,
    /// Nodes per sub-area.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    backbone: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Same internal topology in every sub-area.
    #[arg(long)]
    uniform: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Centralized,
    Decomposed,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    no_accel: bool,
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Io {
            path: dir.display().to_string(),
            reason: e.to_string(),
        })?;
    }
    std::fs::write(path, text).map_err(|e| RunError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn gen(a: &GenArgs) -> Result<(), RunError> {
    let spec = match a.preset {
        Some(Preset::T1) => fixtures::preset_t1(),
        Some(Preset::T2) => fixtures::preset_t2(),
        None => {
            let d = FixtureSpec::default();
            let fs = FixtureSpec {
                sub_areas: a.subareas.unwrap_or(d.sub_areas),
                nodes_per_area: a.nodes.unwrap_or(d.nodes_per_area),
                backbone_nodes: a.backbone.unwrap_or(d.backbone_nodes),
                density: a.density.unwrap_or(d.density),
                seed: a.seed.unwrap_or(d.seed),
                uniform_areas: a.uniform,
                ..d
            };
            fixtures::gen_fixture(&fs).map_err(RunError::Config)?
        }
    };
    write(&a.out, &fixtures::to_json(&spec))
}

fn plan(a: &PlanArgs) -> Result<bool, RunError> {
    let spec = load_spec(&a.net)?;
    let mut cfg = match &a.config {
        Some(p) => PlanConfig::load(p)?,
        None => PlanConfig::default(),
    };
    if let Some(w) = a.workers {
        cfg.coordination.workers = w;
    }
    if a.no_accel {
        cfg.coordination.accelerate = false;
    }
    let mode = match a.mode {
        ModeArg::Centralized => Mode::Centralized,
        ModeArg::Decomposed => Mode::Decomposed,
    };
    let run = run_plan(&spec, mode, &cfg)?;
    run.write(&a.out)?;
    let s = &run.summary;
    println!("{} {}: total cost {:.6}", s.mode, s.network, s.cost.total);
    for c in &s.requirements.areas {
        println!(
            "  stage {} {}: SAIDI {:.6} limit {:.6} {}",
            c.stage,
            c.area,
            c.saidi,
            c.limit,
            if c.pass { "ok" } else { "VIOLATED" }
        );
    }
    Ok(run.passed())
}

fn verify(net: &Path, plan: &Path) -> Result<bool, RunError> {
    let spec = load_spec(net)?;
    let text = std::fs::read_to_string(plan).map_err(|e| RunError::Io {
        path: plan.display().to_string(),
        reason: e.to_string(),
    })?;
    let (report, check) = verify_plan(&spec, &text)?;
    print!("{}", report.to_json());
    for c in &check.areas {
        eprintln!("stage {} {}: SAIDI {:.6} limit {:.6} margin {:.6}", c.stage, c.area, c.saidi, c.limit, c.margin);
    }
    Ok(check.pass)
}

fn compare(dirs: &[PathBuf], out: &Path, scaling_only: bool) -> Result<(), RunError> {
    let runs = dirs.iter().map(|d| RunArtifacts::read(d)).collect::<Result<Vec<_>, _>>()?;
    if !scaling_only {
        let report = compare_report(&runs)?;
        write(&out.join("compare.json"), &report.to_json())?;
        write(&out.join("convergence.csv"), &convergence_csv(&runs))?;
        if let Some(g) = report.gap {
            println!("{}: cost gap {:+.4}%", report.network, 100.0 * g);
        }
    }
    write(&out.join("scaling.csv"), &scaling_csv(&scaling_rows(&runs)))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("GRIDPLAN_LOG", "error")).init();
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::GenFixture(a) => gen(a).map(|_| true),
        Cmd::Plan(a) => plan(a),
        Cmd::Verify { net, plan } => verify(net, plan),
        Cmd::Compare { runs, out, scaling } => compare(runs, out, *scaling).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("reliability requirements not met");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}
