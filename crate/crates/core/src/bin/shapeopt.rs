use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shapeopt::mesh::{load_gmsh, TagMap};
use shapeopt::run::{self, Problem};
use shapeopt::{parse_config, Error, RunConfig};

#[derive(Parser)]
#[command(
    name = "shapeopt",
    version,
    about = "Obstacle shape optimization in 2D Stokes flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the α-continuation and write history, Newton log and fields.
    Optimize {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Compare the Jacobian with finite differences of the residual.
    CheckDerivatives { config: PathBuf },
    /// Stokes solve on the undeformed mesh.
    SolveState {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Mesh statistics and element quality.
    MeshInfo {
        mesh: PathBuf,
        /// JSON tag map, e.g. '{"gamma_d": 5}'.
        #[arg(long)]
        tags: Option<String>,
    },
}

fn load(config: &PathBuf, output_dir: Option<PathBuf>) -> Result<RunConfig, Error> {
    let mut cfg = parse_config(config)?;
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    Ok(cfg)
}

fn input_error(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Optimize { config, output_dir } => {
            let problem = match load(&config, output_dir).and_then(|c| Problem::new(&c)) {
                Ok(p) => p,
                Err(e) => return input_error(e),
            };
            let out = problem.config.output_dir.clone();
            let outcome = match run::optimize(&problem, &out) {
                Ok(o) => o,
                Err(e) => return input_error(e),
            };
            for e in &outcome.log.entries {
                println!(
                    "problem {:>3}  alpha {:.6e}  newton {:>2}  dissipation {:.10e}  min J {:.4}",
                    e.problem_index, e.alpha, e.report.iterations, e.dissipation, e.min_jacobian
                );
            }
            for (a, cause) in &outcome.log.failures {
                println!("failed at alpha {a:.6e}: {cause}");
            }
            println!("history: {}", outcome.history.display());
            if let Some(reason) = &outcome.log.aborted {
                eprintln!("continuation aborted: {reason}");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Command::CheckDerivatives { config } => {
            let problem = match load(&config, None).and_then(|c| Problem::new(&c)) {
                Ok(p) => p,
                Err(e) => return input_error(e),
            };
            let checks = match run::check_derivatives(&problem) {
                Ok(c) => c,
                Err(e) => return input_error(e),
            };
            let mut worst: f64 = 0.0;
            for (params, c) in &checks {
                println!(
                    "eta {:e}: {} directions, h = {:e}, active points {}/{}, max relative error {:.3e}",
                    params.eta,
                    c.errors.len(),
                    c.h,
                    c.active_points,
                    c.total_points,
                    c.max_rel_error
                );
                worst = worst.max(c.max_rel_error);
            }
            println!("max relative error {worst:.6e}");
            ExitCode::SUCCESS
        }
        Command::SolveState { config, output_dir } => {
            let problem = match load(&config, output_dir).and_then(|c| Problem::new(&c)) {
                Ok(p) => p,
                Err(e) => return input_error(e),
            };
            match run::solve_state_to(&problem, &problem.config.output_dir) {
                Ok(s) => {
                    println!("dissipation {:.12e}", s.dissipation);
                    println!("obstacle volume {:.12e}", s.obstacle_volume);
                    println!("residual {:.3e} (rhs {:.3e})", s.residual, s.rhs_norm);
                    ExitCode::SUCCESS
                }
                Err(e) => input_error(e),
            }
        }
        Command::MeshInfo { mesh, tags } => {
            let tags = match tags.map(|t| serde_json::from_str::<TagMap>(&t)) {
                None => TagMap::default(),
                Some(Ok(t)) => t,
                Some(Err(e)) => return input_error(Error::Config(format!("tags: {e}"))),
            };
            match load_gmsh(&mesh, &tags).and_then(|m| run::mesh_info(&m)) {
                Ok(info) => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&info).expect("serializable")
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => input_error(e),
            }
        }
    }
}
