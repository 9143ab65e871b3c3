//! Wrench-sweep benchmark: collocation against the shooting reference.
//!
//! Every terminal wrench is reached from the straight rod through `steps`
//! linearly interpolated wrenches, each solve warm-started from the previous
//! one. Tip errors are reported as a percentage of arc length (`e_p`) and as a
//! geodesic angle in degrees (`e_r`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::Pose;
use crate::magnus::{max_step, MagnusOrder};
use crate::rod::{RodProperties, TipWrench};
use crate::solvers::{solve_collocation, solve_shooting, RodSolution, ShootingSolution, SolverConfig};
use crate::spectral::{make_grid, CollocationGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Levels applied independently to each force axis, N.
    pub force_levels: Vec<f64>,
    /// Levels applied independently to each moment axis, N·m.
    pub moment_levels: Vec<f64>,
    /// Interpolated wrenches from zero to each terminal wrench.
    pub steps: usize,
    /// Collocation polynomial orders.
    pub orders: Vec<usize>,
    pub magnus_orders: Vec<MagnusOrder>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            force_levels: vec![-1.0, 0.0, 1.0],
            moment_levels: vec![-0.5, 0.0, 0.5],
            steps: 3,
            orders: vec![2, 4, 6, 8, 10],
            magnus_orders: MagnusOrder::ALL.to_vec(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.force_levels.is_empty() || self.moment_levels.is_empty() {
            return Err(Error::invalid("force and moment level sets must be non-empty"));
        }
        if self.force_levels.iter().chain(&self.moment_levels).any(|x| !x.is_finite()) {
            return Err(Error::invalid("wrench levels must be finite"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::invalid("orders must be a non-empty list of positive integers"));
        }
        if self.magnus_orders.is_empty() {
            return Err(Error::invalid("at least one Magnus order is required"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrenchCase {
    pub case_id: usize,
    /// Index of the terminal wrench this case leads to.
    pub chain: usize,
    /// 1-based position along the chain; `step_index == steps` is the terminal wrench.
    pub step_index: usize,
    pub terminal: bool,
    pub wrench: TipWrench,
}

/// Cases ordered lexicographically over `(fx, fy, fz, mx, my, mz)` levels, then
/// by step index.
pub fn generate_sweep(spec: &SweepSpec) -> Result<Vec<WrenchCase>> {
    spec.validate()?;
    let f = &spec.force_levels;
    let m = &spec.moment_levels;
    let mut cases = Vec::with_capacity(f.len().pow(3) * m.len().pow(3) * spec.steps);
    let mut chain = 0;
    for &fx in f {
        for &fy in f {
            for &fz in f {
                for &mx in m {
                    for &my in m {
                        for &mz in m {
                            let terminal = TipWrench::from_array([fx, fy, fz, mx, my, mz]);
                            for step in 1..=spec.steps {
                                cases.push(WrenchCase {
                                    case_id: cases.len(),
                                    chain,
                                    step_index: step,
                                    terminal: step == spec.steps,
                                    wrench: terminal.scaled(step as f64 / spec.steps as f64),
                                });
                            }
                            chain += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(cases)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TipError {
    /// Position error, percent of arc length.
    pub e_p: f64,
    /// Rotation error, degrees.
    pub e_r: f64,
}

/// Tip errors between two frames on a rod of length `length`.
pub fn pose_error(candidate: &Pose, reference: &Pose, length: f64) -> TipError {
    let e_p = (candidate.translation - reference.translation).norm() / length * 100.0;
    let cos = ((reference.rotation * candidate.rotation.transpose()).trace() - 1.0) / 2.0;
    let e_r = cos.clamp(-1.0, 1.0).acos().to_degrees();
    TipError { e_p, e_r }
}

/// Tip errors of a collocation solution against a shooting solution.
pub fn tip_error_metrics(collocation: &RodSolution, shooting: &ShootingSolution) -> Result<TipError> {
    if !collocation.converged {
        return Err(Error::NotConverged);
    }
    Ok(pose_error(collocation.tip_pose(), shooting.tip_pose(), collocation.props.length()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: usize,
    #[serde(with = "sig17::array6")]
    pub wrench: [f64; 6],
    pub step_index: usize,
    pub terminal: bool,
    pub n: usize,
    pub magnus_order: u32,
    #[serde(with = "sig17")]
    pub e_p_percent: f64,
    #[serde(with = "sig17")]
    pub e_r_deg: f64,
    pub iterations: usize,
    #[serde(with = "sig17")]
    pub time_s: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateScope {
    /// Every case, interpolated wrenches included.
    All,
    /// Only the terminal wrench of each chain.
    Terminal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub magnus_order: u32,
    pub scope: AggregateScope,
    pub cases: usize,
    pub converged: usize,
    #[serde(with = "sig17")]
    pub avg_e_p: f64,
    #[serde(with = "sig17")]
    pub max_e_p: f64,
    #[serde(with = "sig17")]
    pub avg_e_r: f64,
    #[serde(with = "sig17")]
    pub max_e_r: f64,
    #[serde(with = "sig17")]
    pub mean_time_s: f64,
    #[serde(with = "sig17")]
    pub rate_hz: f64,
    #[serde(with = "sig17")]
    pub mean_iterations: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingSummary {
    pub solved: usize,
    pub failed: usize,
    #[serde(with = "sig17")]
    pub mean_time_s: f64,
    #[serde(with = "sig17")]
    pub rate_hz: f64,
    /// Case ids without a reference solution.
    pub failed_cases: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub cases: Vec<CaseResult>,
    pub aggregates: Vec<Aggregate>,
    pub shooting: ShootingSummary,
}

impl BenchmarkReport {
    pub fn all_converged(&self) -> bool {
        self.shooting.failed == 0 && self.cases.iter().all(|c| c.converged)
    }

    pub fn aggregate(&self, n: usize, order: MagnusOrder, scope: AggregateScope) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.n == n && a.magnus_order == order.as_int() && a.scope == scope)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Solve chains on the rayon pool. Off for reproducible timings.
    pub parallel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { parallel: true }
    }
}

fn map_chains<T, F>(chains: &[&[WrenchCase]], parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[WrenchCase]) -> T + Sync + Send,
{
    if parallel {
        chains.par_iter().map(|c| f(c)).collect()
    } else {
        chains.iter().map(|c| f(c)).collect()
    }
}

/// Shooting reference along one chain; `None` from the first failure onwards.
fn shoot_chain(
    chain: &[WrenchCase],
    props: &RodProperties,
    config: &SolverConfig,
) -> Vec<Option<ShootingSolution>> {
    let mut out = Vec::with_capacity(chain.len());
    let mut guess: Option<Vector3<f64>> = Some(Vector3::zeros());
    for case in chain {
        let Some(g) = guess else {
            out.push(None);
            continue;
        };
        let sol = solve_shooting(props, &case.wrench, config, Some(g))
            .or_else(|_| solve_shooting(props, &case.wrench, config, None))
            .ok();
        guess = sol.as_ref().map(|s| s.base_curvature);
        out.push(sol);
    }
    out
}

/// Warm-started collocation solve with a cold-start fallback.
fn solve_with_fallback(
    props: &RodProperties,
    wrench: &TipWrench,
    grid: &Arc<CollocationGrid>,
    order: MagnusOrder,
    config: &SolverConfig,
    guess: Option<&DMatrix<f64>>,
) -> Option<RodSolution> {
    let first = solve_collocation(props, wrench, grid, order, config, guess).ok();
    match first {
        Some(sol) if sol.converged => Some(sol),
        first if guess.is_some() => {
            let cold = solve_collocation(props, wrench, grid, order, config, None).ok();
            match cold {
                Some(sol) if sol.converged => Some(sol),
                _ => first.or(cold),
            }
        }
        first => first,
    }
}

fn aggregate(results: &[&CaseResult], n: usize, order: MagnusOrder, scope: AggregateScope) -> Aggregate {
    let ok: Vec<&&CaseResult> = results.iter().filter(|c| c.converged).collect();
    let count = ok.len() as f64;
    let mean = |f: &dyn Fn(&CaseResult) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|c| f(c)).sum::<f64>() / count
        }
    };
    let max = |f: &dyn Fn(&CaseResult) -> f64| ok.iter().map(|c| f(c)).fold(f64::NAN, f64::max);
    let mean_time = mean(&|c| c.time_s);
    Aggregate {
        n,
        magnus_order: order.as_int(),
        scope,
        cases: results.len(),
        converged: ok.len(),
        avg_e_p: mean(&|c| c.e_p_percent),
        max_e_p: max(&|c| c.e_p_percent),
        avg_e_r: mean(&|c| c.e_r_deg),
        max_e_r: max(&|c| c.e_r_deg),
        mean_time_s: mean_time,
        rate_hz: 1.0 / mean_time,
        mean_iterations: mean(&|c| c.iterations as f64),
    }
}

/// Runs every `(n, Magnus order)` combination over the sweep.
pub fn run_benchmark(
    spec: &SweepSpec,
    props: &RodProperties,
    config: &SolverConfig,
    options: RunOptions,
) -> Result<BenchmarkReport> {
    config.validate()?;
    let cases = generate_sweep(spec)?;
    let chains: Vec<&[WrenchCase]> = cases.chunks(spec.steps).collect();

    let references: Vec<Option<ShootingSolution>> =
        map_chains(&chains, options.parallel, |c| shoot_chain(c, props, config)).into_iter().flatten().collect();
    let solved: Vec<&ShootingSolution> = references.iter().flatten().collect();
    let shoot_time = solved.iter().map(|s| s.wall_time).sum::<f64>() / solved.len().max(1) as f64;
    let shooting = ShootingSummary {
        solved: solved.len(),
        failed: references.len() - solved.len(),
        mean_time_s: shoot_time,
        rate_hz: 1.0 / shoot_time,
        failed_cases: cases.iter().zip(&references).filter(|(_, r)| r.is_none()).map(|(c, _)| c.case_id).collect(),
    };

    let mut results = Vec::with_capacity(cases.len() * spec.orders.len() * spec.magnus_orders.len());
    let mut aggregates = Vec::new();
    for &n in &spec.orders {
        for &order in &spec.magnus_orders {
            let grid = Arc::new(make_grid(n, props.length(), order.min_points())?);
            let per_chain = map_chains(&chains, options.parallel, |chain| {
                let mut guess: Option<DMatrix<f64>> = None;
                let mut rows = Vec::with_capacity(chain.len());
                for case in chain {
                    let reference = references[case.case_id].as_ref();
                    let sol = solve_with_fallback(props, &case.wrench, &grid, order, config, guess.as_ref());
                    let converged = sol.as_ref().is_some_and(|s| s.converged);
                    let err = match (&sol, reference) {
                        (Some(s), Some(r)) if converged => tip_error_metrics(s, r).ok(),
                        _ => None,
                    };
                    rows.push(CaseResult {
                        case_id: case.case_id,
                        wrench: case.wrench.to_array(),
                        step_index: case.step_index,
                        terminal: case.terminal,
                        n,
                        magnus_order: order.as_int(),
                        e_p_percent: err.map_or(f64::NAN, |e| e.e_p),
                        e_r_deg: err.map_or(f64::NAN, |e| e.e_r),
                        iterations: sol.as_ref().map_or(0, |s| s.iterations),
                        time_s: sol.as_ref().map_or(f64::NAN, |s| s.wall_time),
                        converged: converged && reference.is_some(),
                    });
                    guess = sol.filter(|s| s.converged).map(|s| s.uc);
                }
                rows
            });
            let block: Vec<CaseResult> = per_chain.into_iter().flatten().collect();
            let all: Vec<&CaseResult> = block.iter().collect();
            let terminal: Vec<&CaseResult> = block.iter().filter(|c| c.terminal).collect();
            aggregates.push(aggregate(&all, n, order, AggregateScope::All));
            aggregates.push(aggregate(&terminal, n, order, AggregateScope::Terminal));
            results.extend(block);
        }
    }
    Ok(BenchmarkReport { cases: results, aggregates, shooting })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::invalid(format!("unknown report format '{other}'"))),
        }
    }
}

pub const CSV_HEADER: &str =
    "case_id,fx,fy,fz,mx,my,mz,step_index,n,magnus_order,e_p_percent,e_r_deg,iterations,time_s,converged";

/// Floating-point text with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn write_csv<W: Write>(report: &BenchmarkReport, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in &report.cases {
        let w: Vec<String> = c.wrench.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.case_id,
            w.join(","),
            c.step_index,
            c.n,
            c.magnus_order,
            fmt_f64(c.e_p_percent),
            fmt_f64(c.e_r_deg),
            c.iterations,
            fmt_f64(c.time_s),
            c.converged,
        )?;
    }
    Ok(())
}

pub fn to_json(report: &BenchmarkReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn from_json(text: &str) -> Result<BenchmarkReport> {
    Ok(serde_json::from_str(text)?)
}

/// Writes the report to `path`.
pub fn emit_report(report: &BenchmarkReport, format: ReportFormat, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        ReportFormat::Csv => write_csv(report, &mut out)?,
        ReportFormat::Json => out.write_all(to_json(report)?.as_bytes())?,
    }
    out.flush()?;
    Ok(())
}

/// One row of a sampled rod shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRow {
    pub s: f64,
    pub position: Vector3<f64>,
    pub curvature: Vector3<f64>,
}

/// `count` evenly spaced samples from base to tip, `count >= 2`.
pub fn shape_samples(sol: &RodSolution, count: usize) -> Result<Vec<ShapeRow>> {
    if count < 2 {
        return Err(Error::invalid("need at least two shape samples"));
    }
    let length = sol.props.length();
    (0..count)
        .map(|i| {
            let s = if i + 1 == count { length } else { length * i as f64 / (count - 1) as f64 };
            let (pose, curvature) = sol.evaluate(s)?;
            Ok(ShapeRow { s, position: pose.translation, curvature })
        })
        .collect()
}

pub fn write_shape_csv<W: Write>(rows: &[ShapeRow], mut out: W) -> Result<()> {
    writeln!(out, "s,x,y,z,u_x,u_y,u_z")?;
    for r in rows {
        let fields = [r.s, r.position.x, r.position.y, r.position.z, r.curvature.x, r.curvature.y, r.curvature.z];
        let text: Vec<String> = fields.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(out, "{}", text.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepBoundRow {
    /// m.
    pub radius: f64,
    /// 1/m.
    pub beta: f64,
    /// m.
    pub h_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpacingRow {
    pub n: usize,
    /// Widest Magnus step, m.
    pub max_spacing: f64,
}

/// Guaranteed-convergence step for each radius at a given surface strain.
pub fn step_bound_table(radii: &[f64], strain: f64) -> Result<Vec<StepBoundRow>> {
    radii
        .iter()
        .map(|&radius| {
            if !(radius > 0.0) {
                return Err(Error::invalid(format!("radius must be positive, got {radius}")));
            }
            let beta = strain / radius;
            Ok(StepBoundRow { radius, beta, h_max: max_step(beta)? })
        })
        .collect()
}

pub fn grid_spacing_table(orders: &[usize], length: f64) -> Result<Vec<GridSpacingRow>> {
    orders
        .iter()
        .map(|&n| Ok(GridSpacingRow { n, max_spacing: make_grid(n, length, 2)?.max_segment_width() }))
        .collect()
}

/// Serde helpers writing floats with 17 significant digits; non-finite values
/// become `null` and read back as NaN.
mod sig17 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::value::RawValue;

    fn raw(x: f64) -> Box<RawValue> {
        let text = if x.is_finite() { super::fmt_f64(x) } else { "null".to_string() };
        RawValue::from_string(text).expect("formatted float is valid JSON")
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        raw(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub mod array6 {
        use super::*;

        pub fn serialize<S: Serializer>(xs: &[f64; 6], s: S) -> Result<S::Ok, S::Error> {
            let raws: Vec<Box<RawValue>> = xs.iter().map(|x| raw(*x)).collect();
            raws.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 6], D::Error> {
            let v = <[Option<f64>; 6]>::deserialize(d)?;
            Ok(v.map(|x| x.unwrap_or(f64::NAN)))
        }
    }
}
