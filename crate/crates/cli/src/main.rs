mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use cosserat::bench::{
    self, fmt_f64, grid_spacing_table, run_benchmark, shape_samples, step_bound_table, tip_error_metrics,
    write_shape_csv, AggregateScope, ReportFormat, RunOptions, SweepSpec,
};
use cosserat::magnus::{check_convergence_bound, max_step, MagnusOrder};
use cosserat::rod::{RodProperties, TipWrench, NITINOL_POISSON, NITINOL_YOUNGS, STRAIN_LIMIT};
use cosserat::solvers::{solve_collocation, solve_shooting, SolverConfig};
use cosserat::spectral::make_grid;
use cosserat::Error;

/// Static Cosserat rod solver: Chebyshev collocation with Magnus stepping.
#[derive(Parser, Debug)]
#[command(name = "cosserat", version, args_override_self = true)]
struct Cli {
    /// Flat `key = value` file with defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one tip wrench and print the tip pose.
    Solve(SolveArgs),
    /// Run the wrench sweep against the shooting reference.
    Sweep(SweepArgs),
    /// Step-size bounds per radius and grid spacing per order.
    Bounds(BoundsArgs),
    /// Dump the collocation grid and its operators.
    Grid(GridArgs),
}

#[derive(Args, Debug, Clone)]
struct RodArgs {
    /// Rod length, m.
    #[arg(long, default_value_t = 0.2)]
    length: f64,
    /// Rod radius, m.
    #[arg(long, default_value_t = 1e-3)]
    radius: f64,
    /// Young's modulus, Pa.
    #[arg(long, default_value_t = NITINOL_YOUNGS)]
    youngs: f64,
    /// Poisson ratio.
    #[arg(long, default_value_t = NITINOL_POISSON)]
    poisson: f64,
}

impl RodArgs {
    fn props(&self) -> Result<RodProperties, Error> {
        RodProperties::from_material(self.length, self.radius, self.youngs, self.poisson)
    }
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Residual tolerance, infinity norm.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig { residual_tolerance: self.tolerance, max_iterations: self.max_iterations, ..SolverConfig::default() }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TextFormat {
    Text,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SweepFormat {
    Csv,
    Json,
}

fn parse_order(s: &str) -> Result<MagnusOrder, String> {
    let k: u32 = s.parse().map_err(|_| format!("`{s}` is not 4 or 6"))?;
    MagnusOrder::from_int(k).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct SolveArgs {
    #[command(flatten)]
    rod: RodArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Collocation polynomial order.
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    /// Magnus order, 4 or 6.
    #[arg(long, default_value = "6", value_parser = parse_order)]
    order: MagnusOrder,
    /// Quadrature points per segment; defaults to the minimum for the order.
    #[arg(long)]
    nu: Option<usize>,
    /// Tip force fx,fy,fz in N, world frame.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 0.0, 0.0])]
    force: Vec<f64>,
    /// Tip moment mx,my,mz in N·m, world frame.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 0.0, 0.0])]
    moment: Vec<f64>,
    /// Also solve by shooting and report the tip difference.
    #[arg(long)]
    shooting: bool,
    /// Shape CSV (s, x, y, z, u_x, u_y, u_z) destination.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Number of shape samples written to --output.
    #[arg(long, default_value_t = 51)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    format: TextFormat,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    #[command(flatten)]
    rod: RodArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Collocation orders to compare.
    #[arg(short, long, value_delimiter = ',', default_values_t = [2, 4, 6, 8, 10])]
    n: Vec<usize>,
    /// Magnus orders to compare.
    #[arg(long, value_delimiter = ',', value_parser = parse_order, default_values = ["4", "6"])]
    order: Vec<MagnusOrder>,
    /// Force levels per axis, N.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.0, 0.0, 1.0])]
    force_levels: Vec<f64>,
    /// Moment levels per axis, N·m.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-0.5, 0.0, 0.5])]
    moment_levels: Vec<f64>,
    /// Interpolation steps from zero to each terminal wrench.
    #[arg(long, default_value_t = 3)]
    steps: usize,
    /// Run single-threaded so solve times are comparable.
    #[arg(long)]
    timing: bool,
    /// Report destination; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Report format; inferred from the --output extension when omitted.
    #[arg(long, value_enum)]
    format: Option<SweepFormat>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct BoundsArgs {
    /// Radii, m.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 2e-3, 3e-3, 4e-3])]
    radii: Vec<f64>,
    /// Surface strain limit.
    #[arg(long, default_value_t = STRAIN_LIMIT)]
    strain: f64,
    /// Collocation orders for the spacing table.
    #[arg(short, long, value_delimiter = ',', default_values_t = [2, 4, 6, 8, 10])]
    n: Vec<usize>,
    /// Rod length, m.
    #[arg(long, default_value_t = 0.2)]
    length: f64,
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    format: TextFormat,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct GridArgs {
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    /// Quadrature points per segment.
    #[arg(long, default_value_t = 3)]
    nu: usize,
    /// Rod length, m.
    #[arg(long, default_value_t = 0.2)]
    length: f64,
    /// Flag segments wider than the step bound for this curvature, 1/m.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    format: TextFormat,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    /// Reader went away; not an error for a CLI.
    Pipe,
    Runtime(String),
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::OutOfRange { .. } => {
                Failure::Usage(e.to_string())
            }
            Error::NonConvergence { .. } | Error::NotConverged => Failure::NotConverged(e.to_string()),
            Error::Io(io) => io.into(),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return Failure::Pipe;
        }
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn open_output(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn dense(m: &cosserat::nalgebra::DMatrix<f64>) -> Value {
    matrix_rows(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn matrix_rows(rows: usize, cols: usize, at: impl Fn(usize, usize) -> f64) -> Value {
    Value::Array((0..rows).map(|i| json!((0..cols).map(|j| at(i, j)).collect::<Vec<_>>())).collect())
}

fn solve(args: SolveArgs) -> Outcome {
    if args.force.len() != 3 || args.moment.len() != 3 {
        return Err(Failure::Usage("--force and --moment take three comma-separated components".into()));
    }
    let props = args.rod.props()?;
    let config = args.solver.config();
    let wrench = TipWrench::from_array([
        args.force[0],
        args.force[1],
        args.force[2],
        args.moment[0],
        args.moment[1],
        args.moment[2],
    ]);
    let nu = args.nu.unwrap_or(args.order.min_points());
    let grid = Arc::new(make_grid(args.n, props.length(), nu)?);
    let sol = solve_collocation(&props, &wrench, &grid, args.order, &config, None)?;
    let reference = if args.shooting { Some(solve_shooting(&props, &wrench, &config, None)?) } else { None };
    let errors = match &reference {
        Some(r) if sol.converged => Some(tip_error_metrics(&sol, r)?),
        _ => None,
    };
    if let Some(path) = &args.output {
        let rows = shape_samples(&sol, args.samples)?;
        let mut out = open_output(path)?;
        write_shape_csv(&rows, &mut out)?;
        out.flush()?;
    }

    let tip = sol.tip_pose();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match args.format {
        TextFormat::Json => {
            let mut doc = json!({
                "converged": sol.converged,
                "iterations": sol.iterations,
                "residual_norm": sol.residual_norm,
                "wall_time_s": sol.wall_time,
                "n": args.n,
                "magnus_order": args.order.as_int(),
                "tip": {
                    "position": tip.translation.as_slice(),
                    "rotation": matrix_rows(3, 3, |i, j| tip.rotation[(i, j)]),
                },
                "curvature": matrix_rows(sol.uc.nrows(), 3, |i, j| sol.uc[(i, j)]),
                "bound_exceeded": sol.advisory.as_ref().map(|a| a.any_exceeded()),
            });
            if let (Some(r), Some(e)) = (&reference, errors) {
                doc["shooting"] = json!({
                    "tip_position": r.tip_pose().translation.as_slice(),
                    "iterations": r.iterations,
                    "e_p_percent": e.e_p,
                    "e_r_deg": e.e_r,
                });
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json value"))?;
        }
        TextFormat::Text => {
            writeln!(
                out,
                "converged: {} ({} iterations, residual {:.3e}, {:.3} ms)",
                sol.converged,
                sol.iterations,
                sol.residual_norm,
                sol.wall_time * 1e3
            )?;
            let p = tip.translation;
            writeln!(out, "tip position [m]: {} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z))?;
            writeln!(out, "tip rotation:")?;
            for i in 0..3 {
                let r = tip.rotation.row(i);
                writeln!(out, "  {} {} {}", fmt_f64(r[0]), fmt_f64(r[1]), fmt_f64(r[2]))?;
            }
            if let Some(a) = &sol.advisory {
                writeln!(
                    out,
                    "advisory: curvature {:.2} 1/m exceeds the strain limit; step bound {:.2} mm, widest step {:.2} mm",
                    a.beta,
                    a.h_max * 1e3,
                    a.max_width() * 1e3
                )?;
            }
            if let (Some(r), Some(e)) = (&reference, errors) {
                writeln!(
                    out,
                    "shooting: {} iterations, tip difference {:.3e} % of length, {:.3e} deg",
                    r.iterations, e.e_p, e.e_r
                )?;
            }
        }
    }
    Ok(sol.converged)
}

fn sweep(args: SweepArgs) -> Outcome {
    let props = args.rod.props()?;
    let spec = SweepSpec {
        force_levels: args.force_levels,
        moment_levels: args.moment_levels,
        steps: args.steps,
        orders: args.n,
        magnus_orders: args.order,
    };
    let format = match (args.format, &args.output) {
        (Some(SweepFormat::Csv), _) => ReportFormat::Csv,
        (Some(SweepFormat::Json), _) => ReportFormat::Json,
        (None, Some(path)) if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => ReportFormat::Json,
        (None, _) => ReportFormat::Csv,
    };
    let report = run_benchmark(&spec, &props, &args.solver.config(), RunOptions { parallel: !args.timing })?;

    match &args.output {
        Some(path) => {
            let mut out = open_output(path)?;
            match format {
                ReportFormat::Csv => bench::write_csv(&report, &mut out)?,
                ReportFormat::Json => out.write_all(bench::to_json(&report)?.as_bytes())?,
            }
            out.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            match format {
                ReportFormat::Csv => bench::write_csv(&report, &mut out)?,
                ReportFormat::Json => writeln!(out, "{}", bench::to_json(&report)?)?,
            }
        }
    }

    let mut err = io::stderr().lock();
    for scope in [AggregateScope::All, AggregateScope::Terminal] {
        writeln!(err, "{scope:?} cases")?;
        writeln!(err, "  n  order  avg e_p %   max e_p %   avg e_r deg max e_r deg rate Hz   converged")?;
        for a in report.aggregates.iter().filter(|a| a.scope == scope) {
            writeln!(
                err,
                "{:>3}  {:>5}  {:<10.3e}  {:<10.3e}  {:<10.3e}  {:<10.3e}  {:<8.1}  {}/{}",
                a.n, a.magnus_order, a.avg_e_p, a.max_e_p, a.avg_e_r, a.max_e_r, a.rate_hz, a.converged, a.cases
            )?;
        }
    }
    writeln!(
        err,
        "shooting reference: {} solved, {} failed, {:.1} Hz",
        report.shooting.solved, report.shooting.failed, report.shooting.rate_hz
    )?;
    Ok(report.all_converged())
}

fn bounds(args: BoundsArgs) -> Outcome {
    let steps = step_bound_table(&args.radii, args.strain)?;
    let spacing = grid_spacing_table(&args.n, args.length)?;
    let mut out = io::stdout().lock();
    match args.format {
        TextFormat::Json => {
            let doc = json!({
                "strain": args.strain,
                "step_bounds": steps.iter().map(|r| json!({
                    "radius_m": r.radius, "beta": r.beta, "h_max_m": r.h_max,
                })).collect::<Vec<_>>(),
                "grid_spacing": spacing.iter().map(|r| json!({
                    "n": r.n, "max_spacing_m": r.max_spacing,
                })).collect::<Vec<_>>(),
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json value"))?;
        }
        TextFormat::Text => {
            writeln!(out, "step bound at {:.1} % strain", args.strain * 100.0)?;
            writeln!(out, "  radius mm  beta 1/m  h_max mm")?;
            for r in &steps {
                writeln!(out, "  {:>9.3}  {:>8.2}  {:>8.2}", r.radius * 1e3, r.beta, r.h_max * 1e3)?;
            }
            writeln!(out, "grid spacing, L = {} mm", args.length * 1e3)?;
            writeln!(out, "   n  max spacing mm")?;
            for r in &spacing {
                writeln!(out, "  {:>2}  {:>14.2}", r.n, r.max_spacing * 1e3)?;
            }
        }
    }
    Ok(true)
}

fn grid(args: GridArgs) -> Outcome {
    let g = make_grid(args.n, args.length, args.nu)?;
    let report = args.beta.map(|b| check_convergence_bound(&g, b)).transpose()?;
    let mut out = io::stdout().lock();
    match args.format {
        TextFormat::Json => {
            let mut doc = json!({
                "n": g.order(),
                "nu": g.nu(),
                "length": g.length(),
                "points": g.points(),
                "quadrature_points": g.quad_points(),
                "legendre_points": g.rule().points(),
                "diff_full": dense(g.diff_full()),
                "diff_reduced": dense(g.diff_reduced()),
                "modal_eval": dense(g.modal_eval()),
                "modal_coeff": dense(g.modal_coeff()),
                "boundary_row": g.boundary_row().iter().collect::<Vec<_>>(),
            });
            if let Some(r) = &report {
                doc["bound"] = json!({
                    "beta": r.beta,
                    "h_max": r.h_max,
                    "exceeded": r.segments.iter().map(|s| s.exceeds_bound).collect::<Vec<_>>(),
                });
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json value"))?;
        }
        TextFormat::Text => {
            writeln!(out, "n = {}, nu = {}, L = {}", g.order(), g.nu(), g.length())?;
            writeln!(out, "collocation points:")?;
            for c in g.points() {
                writeln!(out, "  {}", fmt_f64(*c))?;
            }
            writeln!(out, "segments (mm):")?;
            for (i, (a, b)) in g.segments().enumerate() {
                let flag = match &report {
                    Some(r) if r.segments[i].exceeds_bound => "  exceeds bound",
                    _ => "",
                };
                writeln!(out, "  {:>8.3} .. {:>8.3}  width {:>7.3}{flag}", a * 1e3, b * 1e3, (b - a) * 1e3)?;
            }
            if let Some(r) = &report {
                writeln!(out, "step bound for beta = {}: {:.3} mm", r.beta, max_step(r.beta)? * 1e3)?;
            }
            writeln!(out, "differentiation matrix:")?;
            for row in g.diff_full().row_iter() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.5e}")).collect();
                writeln!(out, "  {}", cells.join(" "))?;
            }
        }
    }
    Ok(true)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Bounds(a) => bounds(a),
        Command::Grid(a) => grid(a),
    }
}

fn main() -> ExitCode {
    let args = match config::apply(std::env::args().collect(), &Cli::command()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("not every case converged");
            ExitCode::from(1)
        }
        Err(Failure::Pipe) => ExitCode::SUCCESS,
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
