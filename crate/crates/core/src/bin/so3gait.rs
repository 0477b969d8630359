use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use so3gait::planner::so3_plan;
use so3gait::report::{emit_report, write_log_file, ReportFormat};
use so3gait::scenario::{run_scenario, Scenario};
use so3gait::{Rot3, DEG};

#[derive(Parser)]
#[command(name = "so3gait", version, about = "Finger-gait SO(3) reorientation planner and compliant-hand simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and print a per-object summary.
    Run {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Write one JSONL trajectory per repetition here.
        #[arg(long, env = "SO3GAIT_LOG_DIR")]
        log_dir: Option<PathBuf>,
        #[arg(long, default_value = "table")]
        report: ReportFormat,
    },
    /// Plan a single rotation and print the mode actions as JSON.
    Plan {
        /// Start quaternion `w,x,y,z`.
        #[arg(long, value_parser = parse_quat, allow_hyphen_values = true)]
        start: Rot3,
        #[arg(long, value_parser = parse_quat, allow_hyphen_values = true)]
        goal: Rot3,
        /// Connection threshold, radians.
        #[arg(long, default_value_t = 0.2)]
        rho: f64,
        /// Step size, degrees.
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
    },
}

fn parse_quat(s: &str) -> Result<Rot3, String> {
    let v: Vec<f64> =
        s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    let q: [f64; 4] = v.try_into().map_err(|_| "expected four comma-separated numbers".to_string())?;
    Rot3::from_quaternion(q).map_err(|e| e.to_string())
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> std::io::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

fn run(cli: Cli) -> so3gait::Result<bool> {
    match cli.cmd {
        Cmd::Run { file, seed, reps, log_dir, report } => {
            let mut s = Scenario::load(&file)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(r) = reps {
                s.repetitions = r;
            }
            let out = run_scenario(&s)?;
            if let Some(dir) = log_dir {
                for (rep, log) in out.logs.iter().enumerate() {
                    write_log_file(&dir, &s.name, rep, log)?;
                }
            }
            emit(&emit_report(&out.metrics, report)?)?;
            for m in out.metrics.iter().filter(|m| !m.success) {
                eprintln!("rep {} (seed {}): {}", m.repetition, m.seed, m.failure.as_deref().unwrap_or("failed"));
            }
            Ok(out.all_succeeded())
        }
        Cmd::Plan { start, goal, rho, sigma } => {
            let plan = so3_plan(start, goal, rho, sigma * DEG)?;
            let json = serde_json::to_string_pretty(&plan).map_err(std::io::Error::from)?;
            emit(&format!("{json}\n"))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
