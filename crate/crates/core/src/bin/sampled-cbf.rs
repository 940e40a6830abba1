use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sampled_cbf::scenarios::{
    build_scenario, emit_csv, emit_svg_plot, emit_tradeoff_csv, load_scenario, run_exit_code,
    run_scenario, run_tradeoff, tradeoff_to_csv, RunOptions, ScenarioError,
};

#[derive(Parser)]
#[command(
    name = "sampled-cbf",
    version,
    about = "Sampled-distance barrier safety filter simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its log as CSV.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Also write an SVG plot.
        #[arg(long)]
        svg: bool,
        /// Evaluate the dense clearance oracle at every logged step.
        #[arg(long)]
        oracle_check: bool,
    },
    /// Sweep boundary sample counts on a deadlock scenario.
    Tradeoff {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
        samples: Vec<usize>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the certified sampling error of every shape.
    Certify { scenario: PathBuf },
    /// Parse and validate, then print the config with defaults filled in.
    Validate { scenario: PathBuf },
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

fn run(cli: Cli) -> Result<i32, ScenarioError> {
    match cli.command {
        Command::Run {
            scenario,
            out_dir,
            svg,
            oracle_check,
        } => {
            let cfg = load_scenario(&scenario)?;
            let log = run_scenario(
                &cfg,
                RunOptions {
                    oracle: oracle_check,
                },
            )?;
            std::fs::create_dir_all(&out_dir)?;
            let name = stem(&scenario);
            let csv = out_dir.join(format!("{name}.csv"));
            emit_csv(&log, &csv)?;
            if svg {
                emit_svg_plot(&log, out_dir.join(format!("{name}.svg")))?;
            }
            let meta = serde_json::json!({
                "metadata": log.metadata,
                "summary": log.summary,
                "tracking": log.tracking_report().ok().map(|r| serde_json::json!({
                    "c": r.c, "lambda": r.lambda, "accepted": r.accepted,
                })),
            });
            std::fs::write(
                out_dir.join(format!("{name}.meta.json")),
                serde_json::to_string_pretty(&meta).expect("metadata serializes"),
            )?;
            let s = &log.summary;
            println!(
                "{name}: {} steps, min b = {:.6}, min sampled distance = {:.6} m, {} modified, {} infeasible",
                s.steps, s.min_b, s.min_d_sampled, s.modified_steps, s.infeasible_steps
            );
            if let Some(d) = s.min_d_oracle {
                let required = log.metadata.gamma.sqrt();
                println!("oracle clearance min = {d:.6} m (required {required:.6} m)");
            }
            println!("wrote {}", csv.display());
            Ok(run_exit_code(&log))
        }
        Command::Tradeoff {
            scenario,
            samples,
            out,
        } => {
            let cfg = load_scenario(&scenario)?;
            let report = run_tradeoff(&cfg, &samples)?;
            match out {
                Some(path) => {
                    emit_tradeoff_csv(&report, &path)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{}", tradeoff_to_csv(&report)),
            }
            Ok(0)
        }
        Command::Certify { scenario } => {
            let cfg = load_scenario(&scenario)?;
            let built = build_scenario(&cfg)?;
            println!("shape,n,rho_m2,epsilon_m2");
            for c in std::iter::once(&built.body_certificate).chain(&built.obstacle_certificates) {
                println!("{},{},{:.6e},{:.6e}", c.name, c.n, c.rho, c.epsilon);
            }
            println!(
                "barrier epsilon = {:.6e} m^2, gamma = {}, r_bar = {:.6e}",
                built.barrier.epsilon, built.barrier.gamma, built.barrier.r_bar
            );
            Ok(0)
        }
        Command::Validate { scenario } => {
            let cfg = load_scenario(&scenario)?;
            println!("{}", cfg.to_json());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
