//! Command-line front end: solves a problem file, writes the iteration trace
//! and a run summary, and reports the outcome through the exit code
//! (0 = converged stop, 1 = max_iters/breakdown/non-finite, 2 = bad input).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ktproj::problem::{parse_problem, ModeSpec, Parsed, ProblemInstance};
use ktproj::solver::{kt_residual, solve, Mode, Schedule, SolveStatus, SolverConfig};
use ktproj::space::{InnerSpace, Vector};
use ktproj::systems::lift;
use ktproj::trace_io::{write_trace, Summary};

#[derive(Parser, Debug)]
#[command(
    name = "solve",
    about = "Projects a reference point onto the Kuhn-Tucker set of a composite monotone inclusion",
    version
)]
struct Cli {
    /// Problem file (TOML; see the README for the schema).
    problem: PathBuf,

    /// Iteration mode: haugazeau (strong convergence to the projection) or
    /// fejer (weak baseline).
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,

    /// Range parameter epsilon in (0, 1).
    #[arg(long)]
    eps: Option<f64>,

    /// Constant resolvent parameter gamma in [eps, 1/eps].
    #[arg(long)]
    gamma: Option<f64>,

    /// Constant resolvent parameter mu in [eps, 1/eps].
    #[arg(long)]
    mu: Option<f64>,

    /// Constant relaxation lambda (range depends on the mode).
    #[arg(long)]
    lambda: Option<f64>,

    /// Iteration cap.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,

    /// Kuhn-Tucker stop: halt once tau <= this value.
    #[arg(long = "tau-tol")]
    tau_tol: Option<f64>,

    /// Stall stop: halt after five consecutive steps of at most this size.
    #[arg(long = "dist-tol")]
    dist_tol: Option<f64>,

    /// Write the per-iteration trace (CSV) here.
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Write the run summary here.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "haugazeau" => Ok(Mode::Haugazeau),
        "fejer" => Ok(Mode::Fejer),
        other => Err(format!(
            "unknown mode '{other}' (expected haugazeau or fejer)"
        )),
    }
}

fn apply_cli_overrides(cli: &Cli, parsed: &Parsed) -> SolverConfig {
    let mut config = parsed.config.clone();
    if let Some(mode) = cli.mode {
        // Re-derive the mode defaults so --mode fejer alone picks up the
        // wider relaxation default, then reapply the file's explicit fields.
        let mut overrides = parsed.file.config.clone();
        overrides.mode = Some(match mode {
            Mode::Haugazeau => ModeSpec::Haugazeau,
            Mode::Fejer => ModeSpec::Fejer,
        });
        config = overrides.apply();
    }
    if let Some(e) = cli.eps {
        config.epsilon = e;
    }
    if let Some(g) = cli.gamma {
        config.gamma = Schedule::Constant(g);
    }
    if let Some(m) = cli.mu {
        config.mu = Schedule::Constant(m);
    }
    if let Some(l) = cli.lambda {
        config.lambda = Schedule::Constant(l);
    }
    if let Some(n) = cli.max_iter {
        config.max_iters = n;
    }
    if let Some(t) = cli.tau_tol {
        config.tau_tol = t;
    }
    if let Some(d) = cli.dist_tol {
        config.dist_tol = d;
    }
    config
}

fn run(cli: &Cli) -> Result<SolveStatus, (u8, String)> {
    let parsed = parse_problem(&cli.problem).map_err(|e| (2u8, e.to_string()))?;
    let config = apply_cli_overrides(cli, &parsed);
    config.validate().map_err(|e| (2u8, e.to_string()))?;

    let kt_problem = match &parsed.instance {
        ProblemInstance::Kt(p) => p.clone(),
        ProblemInstance::System(sys) => lift(sys).map_err(|e| (2u8, e.to_string()))?,
    };

    let solution = match solve(&kt_problem, &config) {
        Ok(s) => s,
        Err(e) => return Err((1u8, e.to_string())),
    };

    if let Some(path) = &cli.trace {
        let mut file = std::fs::File::create(path)
            .map_err(|e| (1u8, format!("cannot create trace file: {e}")))?;
        write_trace(&mut file, &solution.trace)
            .map_err(|e| (1u8, format!("cannot write trace file: {e}")))?;
    }

    let gamma = config.gamma.value(solution.trace.len());
    let mu = config.mu.value(solution.trace.len());
    let (s_norm, t_norm) = kt_residual(&kt_problem, &solution.x, &solution.v_star, gamma, mu)
        .map_err(|e| (1u8, e.to_string()))?;
    let start = Vector::new(kt_problem.x0.coords().to_vec()).expect("validated start");
    let start_v = Vector::new(kt_problem.v0_star.coords().to_vec()).expect("validated start");
    let distance_moved =
        (solution.x.sub(&start).norm_sq() + solution.v_star.sub(&start_v).norm_sq()).sqrt();

    let summary = Summary {
        status: solution.status,
        iterations: solution.trace.len(),
        s_norm,
        t_norm,
        distance_moved,
        x: solution.x.coords().to_vec(),
        v_star: solution.v_star.coords().to_vec(),
    };
    let rendered = summary.render();
    if let Some(path) = &cli.summary {
        std::fs::write(path, &rendered)
            .map_err(|e| (1u8, format!("cannot write summary file: {e}")))?;
    }
    print!("{rendered}");
    if let Some(scalars) = &solution.breakdown {
        eprintln!(
            "numerical breakdown: empty half-space intersection (q_chi={:.6e}, q_rho={:.6e})",
            scalars.q_chi, scalars.q_rho
        );
    }
    Ok(solution.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) if status.is_success() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
