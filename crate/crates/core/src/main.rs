use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scl_lagrange::report::ReportBundle;
use scl_lagrange::scenario::{convergence_study, mesh_study, run_scenario, CharacteristicSpec, Scenario, Stages};
use scl_lagrange::{par, Error, Exec};

#[derive(Parser)]
#[command(name = "scl-lagrange", version, about = "Front tracking and Lagrangian representation of scalar conservation laws")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; falls back to the scenario's `output`, then `out/<name>/<command>`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Override the ensemble seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel path.
    #[arg(long)]
    threads: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Front-tracking solution, weak residual and entropy production.
    Simulate(Common),
    /// Curve ensembles with pushforward, dissipation and no-crossing checks.
    Lagrangian(Common),
    /// Lagrangian entropy flux against the Eulerian trace on each surface.
    Fluxcheck(Common),
    /// Barrier characteristics and their verification.
    Characteristic {
        #[command(flatten)]
        common: Common,
        /// Start point; replaces the characteristics listed in the scenario.
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Grid refinement study.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [64usize, 128, 256])]
        grids: Vec<usize>,
        /// Rarefaction meshes; runs the front-tracking mesh study instead.
        #[arg(long, value_delimiter = ',')]
        meshes: Vec<f64>,
    },
    /// Every check in one report.
    Run(Common),
}

fn exec_for(c: &Common) -> Exec {
    if c.sequential {
        return Exec::Sequential;
    }
    if c.threads.is_some() && !Exec::Parallel.is_parallel() {
        eprintln!("warning: built without the `parallel` feature; --threads ignored");
    }
    par::init_threads(c.threads);
    Exec::Parallel
}

fn load(c: &Common) -> scl_lagrange::Result<(Scenario, String)> {
    let (mut sc, text) = Scenario::load(&c.config).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("{}: {io}", c.config.display())),
        other => other,
    })?;
    if let Some(seed) = c.seed {
        sc.grid.seed = seed;
    }
    Ok((sc, text))
}

fn out_dir(c: &Common, sc: &Scenario, verb: &str) -> PathBuf {
    c.out
        .clone()
        .or_else(|| sc.output.clone())
        .unwrap_or_else(|| Path::new("out").join(&sc.name).join(verb))
}

fn finish(bundle: &ReportBundle, dir: &Path) -> scl_lagrange::Result<bool> {
    bundle.write(dir)?;
    print!("{}", bundle.render());
    let passed = bundle.metrics.iter().filter(|m| m.pass).count();
    println!(
        "{}: {passed} of {} checks passed; report in {}",
        bundle.scenario,
        bundle.metrics.len(),
        dir.display()
    );
    Ok(bundle.all_pass())
}

fn run(cli: Cli) -> scl_lagrange::Result<bool> {
    let (verb, common, stages) = match &cli.cmd {
        Cmd::Simulate(c) => ("simulate", c, Stages::SIMULATE),
        Cmd::Lagrangian(c) => ("lagrangian", c, Stages { lagrangian: true, ..Stages::SIMULATE }),
        Cmd::Fluxcheck(c) => ("fluxcheck", c, Stages { flux: true, ..Stages::SIMULATE }),
        Cmd::Characteristic { common, .. } => ("characteristic", common, Stages { characteristics: true, ..Stages::SIMULATE }),
        Cmd::Converge { common, .. } => ("converge", common, Stages::SIMULATE),
        Cmd::Run(c) => ("run", c, Stages::ALL),
    };
    let (mut sc, text) = load(common)?;
    let exec = exec_for(common);
    let dir = out_dir(common, &sc, verb);

    match &cli.cmd {
        Cmd::Characteristic { x0, t0, levels, .. } => {
            if let Some(x0) = *x0 {
                sc.characteristics = vec![CharacteristicSpec {
                    x0,
                    t0: *t0,
                    levels: *levels,
                    expect_speed: None,
                    expect_tol: None,
                }];
            } else if let Some(l) = *levels {
                sc.characteristics.iter_mut().for_each(|c| c.levels = Some(l));
            }
            sc.validate()?;
            if sc.characteristics.is_empty() {
                return Err(Error::Config("no characteristic requested; pass --x0".into()));
            }
        }
        Cmd::Converge { grids, meshes, .. } => {
            let mut b = ReportBundle::new(&sc.name, sc.grid.seed, &text);
            if meshes.is_empty() {
                let table = convergence_study(&sc, grids, exec)?;
                let monotone = table.rows.windows(2).all(|w| w[1].flux_gap <= w[0].flux_gap);
                b.value("rates", table.rates);
                b.value("rows", &table.rows);
                b.value("flux_gap_monotone", monotone);
                b.table(
                    "convergence.csv",
                    "n [cells per axis], dx [length], dv [normalized state], errors [as reported]",
                    table.to_csv(),
                );
                println!(
                    "fitted orders (flux gap, characteristic residual, pushforward): {:?}; flux gap monotone: {monotone}",
                    table.rates
                );
            } else {
                let table = mesh_study(&sc, meshes)?;
                b.value("rates", table.rates);
                b.value("rows", &table.rows);
                b.value("probes", &table.probes);
                b.value("reference", &table.reference);
                b.table(
                    "mesh_convergence.csv",
                    "mesh [normalized state], probe_error [normalized state], l1_error [state x length]",
                    table.to_csv(),
                );
                println!(
                    "fitted orders against the {} solution (probe, L1): {:?}",
                    table.reference, table.rates
                );
            }
            return finish(&b, &dir);
        }
        _ => {}
    }
    let run = run_scenario(&sc, &text, stages, exec)?;
    finish(&run.bundle, &dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
