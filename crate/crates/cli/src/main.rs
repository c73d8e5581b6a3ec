//! `ldnet` — rate functions, path costs, and rare-event estimates for
//! face-homogeneous lattice models, as CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ldnet_core::error::Error;
use ldnet_core::localproc::enumerate_truncation;
use ldnet_core::model::{NetworkModel, State, SubsetMask};
use ldnet_core::pathcost::{dilated_cost, PiecewisePath};
use ldnet_core::report;
use ldnet_core::simulate::{
    build_twist, ld_check, simulate_ctmc, tube_probability, twisted_tube_probability, LdLine,
    SimOpts, TubeSpec,
};
use ldnet_core::spectral::{lambda, LambdaOpts};
use ldnet_core::variational::{local_rate, RateOpts};

#[derive(Parser)]
#[command(
    name = "ldnet",
    version,
    about = "Large-deviation rate functions and rare-event Monte Carlo for lattice queueing networks"
)]
struct Cli {
    /// Worker threads for Monte Carlo replications (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the CSV here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the jump-range bound and box communication of a model.
    Validate(ValidateArgs),
    /// Face exponent λ_Λ(α) along a truncation schedule, per tilt.
    Lambda(LambdaArgs),
    /// Local rate function L_Λ(v) over a velocity grid.
    Rate(RateArgs),
    /// Cost of a piecewise-linear path, optionally with a dilation budget.
    Pathcost(PathcostArgs),
    /// Monte Carlo tube/endpoint probability at one scale.
    Tube(TubeArgs),
    /// Direct and twisted estimates against the analytic cost target.
    Ldcheck(LdcheckArgs),
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10)]
    box_radius: i64,
    /// Re-emit the parsed model in canonical form to this file.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct LambdaArgs {
    #[arg(long)]
    model: PathBuf,
    /// Face: `empty`, `full`, or 1-based indices like `1,2`.
    #[arg(long)]
    face: String,
    /// Tilt grid, one spec per face coordinate separated by commas;
    /// each spec is a value or `start:step:stop`. Omit for the empty face.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    alpha: String,
    /// Truncation radii, e.g. `25,50,100,200`. Overrides --kmax.
    #[arg(long)]
    schedule: Option<String>,
    /// Largest radius of the default doubling schedule 2,4,8,...
    #[arg(long, default_value_t = 128)]
    kmax: i64,
    /// Convergence tolerance on successive estimates.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    face: String,
    /// Velocity grid, one spec per model coordinate separated by commas.
    #[arg(long, allow_hyphen_values = true)]
    v: String,
    #[arg(long, default_value_t = 128)]
    kmax: i64,
}

#[derive(Args)]
struct PathcostArgs {
    #[arg(long)]
    model: PathBuf,
    /// Path CSV with header `t,x1,...,xN`.
    #[arg(long)]
    path: PathBuf,
    /// Dilation time budget ε ≥ 0.
    #[arg(long, default_value_t = 0.0)]
    budget: f64,
}

#[derive(Args)]
struct TubeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    path: PathBuf,
    /// Tube half-width δ in scaled units.
    #[arg(long)]
    delta: f64,
    /// Scaling parameter n.
    #[arg(long)]
    n: u64,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    /// Keep these coordinates strictly positive (hitting-time constraint).
    #[arg(long)]
    face: Option<String>,
    /// Check only the endpoint window instead of the whole tube.
    #[arg(long)]
    endpoint_only: bool,
    /// Use the exponentially twisted estimator (requires --face).
    #[arg(long)]
    twist: bool,
    /// Truncation radius for the twisted kernel (default: sized from the path).
    #[arg(long)]
    k_radius: Option<i64>,
    /// Dump the first replication's trajectory to this CSV file.
    #[arg(long)]
    dump_trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct LdcheckArgs {
    #[arg(long)]
    model: PathBuf,
    /// Start point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    /// Velocity, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    v: String,
    #[arg(long)]
    t_end: f64,
    /// Scales, e.g. `50,100,200`.
    #[arg(long)]
    n_list: String,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    /// Endpoint-window events instead of full tubes.
    #[arg(long)]
    endpoint_only: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = ldnet_core::configure_threads(threads) {
            eprintln!("error: {e}");
            return ExitCode::from(9);
        }
    }
    match run(&cli.command) {
        Ok(csv) => {
            let out = match &cli.output {
                Some(path) => std::fs::write(path, csv).map_err(io_error),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            };
            match out {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(10)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn io_error(e: std::io::Error) -> Error {
    Error::Invalid(format!("i/o failure: {e}"))
}

/// Distinct exit codes per error group (documented in the README).
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } => 2,
        Error::NegativeCoordinate { .. }
        | Error::SameState
        | Error::RangeViolation { .. }
        | Error::InfeasibleAtom { .. } => 3,
        Error::SizeOverflow { .. } => 4,
        Error::NotIrreducible { .. } | Error::NoConvergence { .. } => 5,
        Error::OracleFailure(_) => 6,
        Error::SamplerFailure { .. } => 7,
        Error::RateExplosion { .. } | Error::TubeExceedsTruncation { .. } => 8,
        Error::Invalid(_) => 9,
    }
}

fn load_model(path: &PathBuf) -> Result<NetworkModel<f64>, Error> {
    let text = std::fs::read_to_string(path).map_err(io_error)?;
    NetworkModel::parse_str(&text)
}

fn load_path(path: &PathBuf) -> Result<PiecewisePath<f64>, Error> {
    let text = std::fs::read_to_string(path).map_err(io_error)?;
    PiecewisePath::parse_csv(&text)
}

/// Parses a grid spec: a plain value or `start:step:stop` (inclusive).
fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = |s: &str| Error::Invalid(format!("bad grid spec `{s}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![single.trim().parse().map_err(|_| bad(spec))?]),
        [start, step, stop] => {
            let start: f64 = start.trim().parse().map_err(|_| bad(spec))?;
            let step: f64 = step.trim().parse().map_err(|_| bad(spec))?;
            let stop: f64 = stop.trim().parse().map_err(|_| bad(spec))?;
            if step <= 0.0 || stop < start {
                return Err(bad(spec));
            }
            let count = ((stop - start) / step + 1.5).floor() as usize;
            Ok((0..count).map(|k| start + step * k as f64).collect())
        }
        _ => Err(bad(spec)),
    }
}

/// Comma-separated per-coordinate grid specs, expanded as a cartesian product
/// in row-major order.
fn parse_grid_vectors(spec: &str, dims: usize) -> Result<Vec<Vec<f64>>, Error> {
    if dims == 0 {
        if spec.trim().is_empty() {
            return Ok(vec![Vec::new()]);
        }
        return Err(Error::Invalid(
            "tilt grid given for a face with no coordinates".into(),
        ));
    }
    let pieces: Vec<&str> = spec.split(',').map(str::trim).collect();
    if pieces.len() != dims {
        return Err(Error::Invalid(format!(
            "expected {dims} coordinate specs, found {}",
            pieces.len()
        )));
    }
    let axes: Vec<Vec<f64>> = pieces
        .iter()
        .map(|p| parse_grid(p))
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &value in axis {
                let mut row = prefix.clone();
                row.push(value);
                next.push(row);
            }
        }
        out = next;
    }
    Ok(out)
}

fn parse_list<T: std::str::FromStr>(spec: &str, what: &str) -> Result<Vec<T>, Error> {
    spec.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| Error::Invalid(format!("bad {what} `{p}`")))
        })
        .collect()
}

fn run(command: &Command) -> Result<String, Error> {
    match command {
        Command::Validate(args) => {
            let model = load_model(&args.model)?;
            if let Some(dump) = &args.dump {
                std::fs::write(dump, model.dump()).map_err(io_error)?;
            }
            let report = model.validate(args.box_radius)?;
            if !report.connected && !report.dead_faces.is_empty() {
                eprintln!(
                    "note: box graph disconnected; zero measures on faces: {}",
                    report
                        .dead_faces
                        .iter()
                        .map(|f| f.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                );
            }
            Ok(report::comm_report_csv(&report))
        }
        Command::Lambda(args) => {
            let model = load_model(&args.model)?;
            let face = SubsetMask::parse(&args.face, model.dimension())?;
            let tilts = parse_grid_vectors(&args.alpha, face.count())?;
            let schedule = match &args.schedule {
                Some(s) => parse_list::<i64>(s, "radius")?,
                None => {
                    let mut radii = Vec::new();
                    let mut m = 2i64;
                    while m <= args.kmax {
                        radii.push(m);
                        m *= 2;
                    }
                    if radii.is_empty() {
                        radii.push(args.kmax.max(1));
                    }
                    radii
                }
            };
            let opts = LambdaOpts {
                schedule,
                tol: args.tol,
                ..LambdaOpts::default()
            };
            let mut rows = Vec::new();
            for tilt in tilts {
                let est = lambda(&model, face, &tilt, &opts)?;
                rows.push((tilt, est));
            }
            Ok(report::lambda_sweep_csv(face.count(), &rows))
        }
        Command::Rate(args) => {
            let model = load_model(&args.model)?;
            let face = SubsetMask::parse(&args.face, model.dimension())?;
            let velocities = parse_grid_vectors(&args.v, model.dimension())?;
            let mut opts = RateOpts::default();
            retune_schedule(&mut opts, args.kmax);
            let mut rows = Vec::new();
            for v in velocities {
                let res = local_rate(&model, face, &v, &opts)?;
                rows.push((v, res));
            }
            Ok(report::rate_sweep_csv(
                model.dimension(),
                face.count(),
                &rows,
            ))
        }
        Command::Pathcost(args) => {
            let model = load_model(&args.model)?;
            let path = load_path(&args.path)?;
            let opts = RateOpts::default();
            let (breakdown, _) = dilated_cost(&model, &path, args.budget, &opts)?;
            eprintln!("total_cost={}", report::fmt(breakdown.total));
            Ok(report::cost_report_csv(&breakdown))
        }
        Command::Tube(args) => {
            let model = load_model(&args.model)?;
            let path = load_path(&args.path)?;
            let face = match &args.face {
                Some(f) => Some(SubsetMask::parse(f, model.dimension())?),
                None => None,
            };
            let spec = TubeSpec {
                path,
                delta: args.delta,
                n: args.n,
                constrain_face: face,
                endpoint_only: args.endpoint_only,
            };
            let sim_opts = SimOpts::default();
            if let Some(dump) = &args.dump_trajectory {
                let start = spec
                    .path
                    .start_point()
                    .iter()
                    .map(|&c| (c * args.n as f64).round().max(0.0) as i64)
                    .collect();
                let horizon = args.n as f64 * (spec.path.end_time() - spec.path.start_time());
                let traj =
                    simulate_ctmc(&model, &State::new(start)?, horizon, args.seed, &sim_opts)?;
                std::fs::write(dump, report::trajectory_csv(&traj)).map_err(io_error)?;
            }
            let estimate = if args.twist {
                let Some(face) = face else {
                    return Err(Error::Invalid("--twist requires --face".into()));
                };
                let rate_opts = RateOpts::default();
                let comp = face.complement(model.dimension());
                let radius = args.k_radius.unwrap_or_else(|| {
                    if comp.is_empty() {
                        1
                    } else {
                        let peak = spec
                            .path
                            .knots()
                            .iter()
                            .flat_map(|(_, x)| comp.iter().map(move |i| x[i]))
                            .fold(0.0f64, f64::max);
                        ((peak + args.delta) * args.n as f64).ceil() as i64 + 2
                    }
                });
                let trunc = enumerate_truncation(face, radius.max(1), model.dimension(), 1 << 21)?;
                let duration = spec.path.end_time() - spec.path.start_time();
                let v_face: Vec<f64> = face
                    .iter()
                    .map(|i| (spec.path.end_point()[i] - spec.path.start_point()[i]) / duration)
                    .collect();
                let kernel = build_twist(&model, face, &trunc, &v_face, &rate_opts)?;
                twisted_tube_probability(&model, &spec, &kernel, args.reps, args.seed, &sim_opts)?
            } else {
                tube_probability(&model, &spec, args.reps, args.seed, &sim_opts)?
            };
            Ok(report::tube_csv(args.n, &[estimate]))
        }
        Command::Ldcheck(args) => {
            let model = load_model(&args.model)?;
            let line = LdLine {
                x0: parse_list(&args.x, "coordinate")?,
                velocity: parse_list(&args.v, "velocity component")?,
                t_end: args.t_end,
            };
            let ns: Vec<u64> = parse_list(&args.n_list, "scale")?;
            let rows = ld_check(
                &model,
                &line,
                &ns,
                args.delta,
                args.reps,
                args.seed,
                args.endpoint_only,
                &RateOpts::default(),
                &SimOpts::default(),
            )?;
            Ok(report::ld_check_csv(&rows))
        }
    }
}

fn retune_schedule(opts: &mut RateOpts<f64>, kmax: i64) {
    let mut radii = Vec::new();
    let mut m = 2i64;
    while m <= kmax {
        radii.push(m);
        m *= 2;
    }
    if radii.is_empty() {
        radii.push(kmax.max(1));
    }
    opts.lambda.schedule = radii;
}
