//! The `chamber` command line.
//!
//! Exit codes: 0 success, 1 invalid input (protocol, parameters, edges,
//! arguments), 2 file-system failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::dataset::{self, DatasetError, ExperimentWriter, Schema};
use crate::engine::{engine_for, EngineError, Fidelity};
use crate::graph::{edge_precision_recall, parse_edge_csv, Edge, GroundTruthGraph};
use crate::models::{fan, light, pressure, ColorFidelity, ModelError, ModelId};
use crate::params::{Params, ParamsError};
use crate::protocol::parse_protocol;
use crate::sensors;
use crate::stats::{linear_fit, r_squared, rmse};
use crate::validation::{self, ValidationOptions, ValidationSpec};
use crate::variables::Config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } | DatasetError::NotFound { .. } => CliError::Io(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ParamsError> for CliError {
    fn from(e: ParamsError) -> Self {
        match e {
            ParamsError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}
input_error!(EngineError, ModelError, validation::ValidationError, crate::graph::GraphError);

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Io(format!("output: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "chamber", version, about = "Simulated light and wind tunnels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Random seed; overrides the protocol's SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// steady_state or dynamic.
    #[arg(long, default_value = "steady_state")]
    pub fidelity: Fidelity,
    /// Flat key = value parameter file.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

impl SimArgs {
    fn load_params(&self) -> Result<Params, CliError> {
        Ok(match &self.params {
            Some(p) => Params::load(p)?,
            None => Params::default(),
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a protocol and write the experiment to a dataset directory.
    Run {
        protocol: PathBuf,
        /// Dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Experiment name; defaults to the protocol's file stem.
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Test graph edges with randomized interventions.
    Validate {
        /// lt_standard, lt_camera, wt_standard or wt_pressure_control.
        config: Config,
        /// CSV with `from,to` and optional `x_A,x_B` columns.
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        edges: Option<PathBuf>,
        /// Every edge of the ground-truth graph.
        #[arg(long)]
        all: bool,
        #[arg(long = "N", default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// Wait after each intervention, s.
        #[arg(long = "T", default_value_t = 10.0)]
        t: f64,
        /// Report file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Tabulate a mechanistic model, or score it against recorded data.
    Models {
        /// A1, A2, B1, C1, C2, C3, D1, E1, F1, F2 or F3.
        #[arg(long)]
        model: ModelId,
        /// `name=value` or `name=start:stop:step`; repeatable.
        #[arg(long)]
        grid: Vec<String>,
        /// Experiment CSV to compare against.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Recorded column for E1 (default ir_3).
        #[arg(long)]
        column: Option<String>,
        /// Plain CSV on stdout.
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Export or score ground-truth graphs.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum GraphAction {
    /// Write the edge list as `from,to` CSV.
    Export {
        config: Config,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precision and recall of an estimated edge list.
    Score { config: Config, estimate: PathBuf },
}

/// Parse arguments and run; returns the exit code.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Run { protocol, out: dir, name, sim } => cmd_run(&protocol, &dir, name, &sim, out),
        Command::Validate { config, edges, all, n, alpha, t, out: report, sim } => {
            let opts = ValidationOptions { n, alpha, t, fidelity: sim.fidelity, seed: sim.seed.unwrap_or(0) };
            cmd_validate(config, edges.as_deref(), all, &opts, &sim.load_params()?, report.as_deref(), out, err)
        }
        Command::Models { model, grid, data, column, csv, params } => {
            let params = match params {
                Some(p) => Params::load(&p)?,
                None => Params::default(),
            };
            match data {
                Some(path) => cmd_models_data(model, &path, column.as_deref(), &params, csv, out),
                None => cmd_models_grid(model, &grid, &params, csv, out),
            }
        }
        Command::Graph { action } => match action {
            GraphAction::Export { config, out: path } => {
                let text = GroundTruthGraph::for_config(config).to_csv();
                match path {
                    Some(p) => std::fs::write(&p, text).map_err(io(&p)),
                    None => out.write_all(text.as_bytes()).map_err(out_err),
                }
            }
            GraphAction::Score { config, estimate } => {
                let text = std::fs::read_to_string(&estimate).map_err(io(&estimate))?;
                let edges: Vec<Edge> = parse_edge_csv(&text)?.into_iter().map(|r| r.edge).collect();
                let (p, r) = edge_precision_recall(&edges, &GroundTruthGraph::for_config(config))?;
                writeln!(out, "precision,recall\n{p},{r}").map_err(out_err)
            }
        },
    }
}

pub fn cmd_run(
    protocol_path: &Path,
    dir: &Path,
    name: Option<String>,
    sim: &SimArgs,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(protocol_path).map_err(io(protocol_path))?;
    let protocol = parse_protocol(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", protocol_path.display())))?;
    let name = match name {
        Some(n) => n,
        None => protocol_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::Input("cannot derive an experiment name; use --name".into()))?
            .to_string(),
    };
    let params = sim.load_params()?;
    let start = Instant::now();
    let mut engine = engine_for(&protocol, params, sim.fidelity, sim.seed)?;
    let mut writer = ExperimentWriter::create(dir, &name, Schema::for_engine(&engine))?;
    for row in engine.run(&protocol) {
        writer.write_row(&row?)?;
    }
    let manifest = writer.finish()?;
    writeln!(
        out,
        "wrote {} rows to {} in {:.3} s",
        manifest.rows,
        manifest.csv.display(),
        start.elapsed().as_secs_f64()
    )
    .map_err(out_err)
}

/// Specs from an edges file; unusable lines are reported and skipped.
fn specs_from_file(
    config: Config,
    path: &Path,
    params: &Params,
    opts: &ValidationOptions,
    err: &mut dyn Write,
) -> Result<(Vec<ValidationSpec>, usize), CliError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let records = parse_edge_csv(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if records.is_empty() {
        return Err(CliError::Input("nothing to validate".into()));
    }
    let mut specs = Vec::new();
    let mut skipped = 0;
    for r in records {
        let spec = validation::default_spec(config, &r.edge, params, opts).and_then(|mut s| {
            let value = |key: &str| -> Result<Option<f64>, validation::ValidationError> {
                r.extra
                    .get(key)
                    .map(|v| {
                        v.parse().map_err(|_| validation::ValidationError::BadEdge {
                            edge: r.edge.clone(),
                            message: format!("malformed {key} '{v}'"),
                        })
                    })
                    .transpose()
            };
            if let Some(a) = value("x_A")? {
                s.x_a = a;
            }
            if let Some(b) = value("x_B")? {
                s.x_b = b;
            }
            s.check()?;
            Ok(s)
        });
        match spec {
            Ok(s) => specs.push(s),
            Err(e) => {
                skipped += 1;
                let _ = writeln!(err, "warning: line {}: skipping: {e}", r.line);
            }
        }
    }
    Ok((specs, skipped))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_validate(
    config: Config,
    edges: Option<&Path>,
    all: bool,
    opts: &ValidationOptions,
    params: &Params,
    report: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let specs = match (edges, all) {
        (_, true) => GroundTruthGraph::for_config(config)
            .edges()
            .map(|e| validation::default_spec(config, e, params, opts))
            .collect::<Result<Vec<_>, _>>()?,
        (Some(path), false) => {
            let (specs, skipped) = specs_from_file(config, path, params, opts, err)?;
            if specs.is_empty() {
                return Err(CliError::Input(format!("all {skipped} edge(s) were skipped")));
            }
            specs
        }
        (None, false) => return Err(CliError::Input("nothing to validate".into())),
    };
    let rows = validation::validate_specs(config, specs, params, opts)?;
    let csv = validation::report_csv(&rows);
    match report {
        Some(p) => std::fs::write(p, &csv).map_err(io(p))?,
        None => out.write_all(csv.as_bytes()).map_err(out_err)?,
    }
    let rejected = rows.iter().filter(|r| r.result.rejected()).count();
    let _ = writeln!(
        err,
        "rejected {rejected}/{} ({:.4}) at alpha = {}",
        rows.len(),
        rejected as f64 / rows.len() as f64,
        opts.alpha
    );
    if rows.iter().any(|r| r.drift) {
        let _ = writeln!(err, "warning: ambient drift is enabled; units are not identically distributed");
    }
    Ok(())
}

/// Values of one grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

/// `name=value` or `name=start:stop:step` (inclusive).
pub fn parse_grid(spec: &str) -> Result<GridAxis, String> {
    let (name, range) = spec.split_once('=').ok_or_else(|| format!("grid '{spec}': expected name=values"))?;
    let nums: Vec<f64> = range
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("grid '{spec}': malformed number"))?;
    if nums.iter().any(|v| !v.is_finite()) {
        return Err(format!("grid '{spec}': values must be finite"));
    }
    let values = match nums[..] {
        [v] => vec![v],
        [start, stop, step] => {
            if !(step > 0.0) || stop < start {
                return Err(format!("grid '{spec}': need step > 0 and stop >= start"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(format!("grid '{spec}': too many points"));
            }
            (0..=n).map(|k| if k == n && (start + k as f64 * step - stop).abs() < 1e-9 * step { stop } else { start + k as f64 * step }).collect()
        }
        _ => return Err(format!("grid '{spec}': expected value or start:stop:step")),
    };
    Ok(GridAxis { name: name.trim().to_string(), values })
}

/// Input names, their defaults and output names of a model.
pub fn model_signature(model: ModelId, p: &Params) -> (Vec<(&'static str, f64)>, Vec<&'static str>) {
    let w_max = p.fan.omega_max;
    match model {
        ModelId::A1 => (vec![("L", 1.0)], vec!["omega"]),
        ModelId::A2 => (vec![("L", 1.0), ("t", 1.0), ("omega0", 0.0)], vec!["omega"]),
        ModelId::B1 => (vec![("L", 1.0)], vec!["C"]),
        ModelId::C1 => (vec![("omega_in", w_max), ("omega_out", 0.0)], vec!["P_dw"]),
        ModelId::C2 => (vec![("omega", w_max), ("r", p.pressure.r0)], vec!["S"]),
        ModelId::C3 => (vec![("omega_in", w_max), ("omega_out", 0.0), ("H", 0.0)], vec!["P_dw"]),
        ModelId::D1 => (vec![("omega_in", 0.0)], vec!["dP"]),
        ModelId::E1 => (vec![("theta1", 0.0), ("theta2", 0.0)], vec!["I"]),
        ModelId::F1 | ModelId::F2 | ModelId::F3 => (
            vec![("R", 255.0), ("G", 255.0), ("B", 255.0), ("theta1", 0.0), ("theta2", 0.0)],
            vec!["r", "g", "b"],
        ),
    }
}

/// Evaluate a model at one input vector (ordered as in [`model_signature`]).
pub fn evaluate_model(model: ModelId, x: &[f64], p: &Params) -> Result<Vec<f64>, ModelError> {
    let w_max = p.fan.omega_max;
    Ok(match model {
        ModelId::A1 => vec![fan::steady_speed(x[0], &p.fan)?],
        ModelId::A2 => vec![fan::integrate_speed(x[2], x[0], x[1], p.dt, &p.fan)?],
        ModelId::B1 => vec![fan::drawn_current(x[0], &p.fan)?],
        ModelId::C1 => vec![pressure::downwind_pressure_affinity(x[0], x[1], w_max, &p.pressure)?],
        ModelId::C2 => vec![pressure::static_pressure(x[0], x[1], w_max, &p.pressure)?],
        ModelId::C3 => vec![pressure::downwind_pressure_hatch(x[0], x[1], x[2], w_max, &p.pressure)?],
        ModelId::D1 => vec![pressure::pitot_difference(x[0], &p.bernoulli)?],
        ModelId::E1 => vec![light::malus_intensity(x[0], x[1], &p.malus)],
        ModelId::F1 | ModelId::F2 | ModelId::F3 => {
            let fidelity = match model {
                ModelId::F1 => ColorFidelity::F1,
                ModelId::F2 => ColorFidelity::F2,
                _ => ColorFidelity::F3,
            };
            light::camera_color([x[0], x[1], x[2]], x[3], x[4], fidelity, &p.image)?.to_vec()
        }
    })
}

/// Cartesian product of the grid over the model's inputs.
pub fn tabulate(model: ModelId, grid: &[GridAxis], p: &Params) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let (inputs, outputs) = model_signature(model, p);
    for axis in grid {
        if !inputs.iter().any(|(n, _)| *n == axis.name) {
            let names: Vec<&str> = inputs.iter().map(|(n, _)| *n).collect();
            return Err(CliError::Input(format!(
                "model {model} has no input '{}' (inputs: {})",
                axis.name,
                names.join(", ")
            )));
        }
    }
    let axes: Vec<Vec<f64>> = inputs
        .iter()
        .map(|(n, d)| grid.iter().rev().find(|a| a.name == *n).map_or(vec![*d], |a| a.values.clone()))
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    if total > 1_000_000 {
        return Err(CliError::Input(format!("grid has {total} points; at most 1000000 allowed")));
    }
    let mut rows = Vec::with_capacity(total);
    for mut k in 0..total {
        // Last input varies fastest.
        let mut x = vec![0.0; axes.len()];
        for (i, axis) in axes.iter().enumerate().rev() {
            x[i] = axis[k % axis.len()];
            k /= axis.len();
        }
        let y = evaluate_model(model, &x, p)?;
        x.extend(y);
        rows.push(x);
    }
    let header = inputs.iter().map(|(n, _)| n.to_string()).chain(outputs.iter().map(|s| s.to_string())).collect();
    Ok((header, rows))
}

fn write_table(header: &[String], rows: &[Vec<String>], csv: bool, out: &mut dyn Write) -> Result<(), CliError> {
    if csv {
        writeln!(out, "{}", header.join(",")).map_err(out_err)?;
        for r in rows {
            writeln!(out, "{}", r.join(",")).map_err(out_err)?;
        }
        return Ok(());
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| -> String {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
    };
    writeln!(out, "{}", line(header)).map_err(out_err)?;
    for r in rows {
        writeln!(out, "{}", line(r)).map_err(out_err)?;
    }
    Ok(())
}

pub fn cmd_models_grid(
    model: ModelId,
    grid: &[String],
    params: &Params,
    csv: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let axes = grid.iter().map(|g| parse_grid(g)).collect::<Result<Vec<_>, _>>().map_err(CliError::Input)?;
    let (header, rows) = tabulate(model, &axes, params)?;
    let cells: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect();
    write_table(&header, &cells, csv, out)
}

/// Model predictions against recorded values.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelScore {
    pub target: String,
    pub rows: usize,
    pub rmse: f64,
    pub r2: f64,
    /// Fitted `(slope, intercept)` where the model is fitted, not fixed.
    pub fit: Option<(f64, f64)>,
}

const RPM_TO_RAD: f64 = std::f64::consts::TAU / 60.0;

/// Compare a model with an experiment file.
pub fn score_model(
    model: ModelId,
    table: &dataset::Table,
    column: Option<&str>,
    p: &Params,
) -> Result<ModelScore, CliError> {
    let col = |name: &str| {
        table.floats(name).ok_or_else(|| CliError::Input(format!("data has no numeric column '{name}'")))
    };
    let w_max = p.fan.omega_max;
    let speed = |rpm: f64| (rpm * RPM_TO_RAD).min(w_max);
    let (target, y, pred): (String, Vec<f64>, Vec<f64>) = match model {
        ModelId::A1 => {
            let (l, rpm) = (col("load_in")?, col("rpm_in")?);
            let pred = l.iter().map(|&l| fan::steady_speed(l, &p.fan)).collect::<Result<_, _>>()?;
            ("rpm_in".into(), rpm.iter().map(|r| r * RPM_TO_RAD).collect(), pred)
        }
        ModelId::B1 => {
            let (l, counts, vref) = (col("load_in")?, col("current_in")?, col("v_in")?);
            let y = counts
                .iter()
                .zip(&vref)
                .map(|(&c, &v)| {
                    let actual = sensors::vref_actual(crate::variables::Chamber::WindTunnel, v)
                        .map_err(|e| CliError::Input(e.to_string()))?;
                    sensors::calibrate_current(c, actual).map_err(|e| CliError::Input(e.to_string()))
                })
                .collect::<Result<_, _>>()?;
            let pred = l.iter().map(|&l| fan::drawn_current(l, &p.fan)).collect::<Result<_, _>>()?;
            ("current_in".into(), y, pred)
        }
        ModelId::C1 | ModelId::C3 => {
            let (ri, ro, amb, dw) =
                (col("rpm_in")?, col("rpm_out")?, col("pressure_ambient")?, col("pressure_downwind")?);
            let hatch = if model == ModelId::C3 { col("hatch")? } else { vec![0.0; ri.len()] };
            let mut pred = Vec::with_capacity(ri.len());
            for i in 0..ri.len() {
                let pp = pressure::PressureParams { p_amb: amb[i], ..p.pressure };
                let (wi, wo) = (speed(ri[i]), speed(ro[i]));
                pred.push(match model {
                    ModelId::C1 => pressure::downwind_pressure_affinity(wi, wo, w_max, &pp)?,
                    _ => pressure::downwind_pressure_hatch(wi, wo, hatch[i], w_max, &pp)?,
                });
            }
            ("pressure_downwind".into(), dw, pred)
        }
        ModelId::D1 => {
            let (ri, up, dw) = (col("rpm_in")?, col("pressure_upwind")?, col("pressure_downwind")?);
            let y = up.iter().zip(&dw).map(|(a, b)| a - b).collect();
            let pred = ri.iter().map(|&r| pressure::pitot_difference(r * RPM_TO_RAD, &p.bernoulli)).collect::<Result<_, _>>()?;
            ("pressure_upwind-pressure_downwind".into(), y, pred)
        }
        ModelId::E1 => {
            let name = column.unwrap_or("ir_3");
            let (a1, a2, y) = (col("pol_1")?, col("pol_2")?, col(name)?);
            let c2: Vec<f64> = a1.iter().zip(&a2).map(|(&t1, &t2)| crate::models::cos2_deg(t1, t2)).collect();
            let fit = linear_fit(&c2, &y).map_err(|e| CliError::Input(e.to_string()))?;
            return Ok(ModelScore {
                target: name.to_string(),
                rows: y.len(),
                rmse: rmse(&y, |i| fit.slope * c2[i] + fit.intercept),
                r2: fit.r2,
                fit: Some((fit.slope, fit.intercept)),
            });
        }
        other => {
            return Err(CliError::Input(format!("model {other} has no recorded counterpart; use --grid")));
        }
    };
    if y.is_empty() {
        return Err(CliError::Input("data has no rows".into()));
    }
    Ok(ModelScore {
        target,
        rows: y.len(),
        rmse: rmse(&y, |i| pred[i]),
        r2: r_squared(&y, |i| pred[i]),
        fit: None,
    })
}

pub fn cmd_models_data(
    model: ModelId,
    path: &Path,
    column: Option<&str>,
    params: &Params,
    csv: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::Input(format!("{}: not an experiment file", path.display())))?;
    let table = dataset::read_experiment(&dir, name)?;
    let s = score_model(model, &table, column, params)?;
    let (slope, intercept) = s.fit.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
    let header: Vec<String> =
        ["model", "target", "rows", "rmse", "r2", "slope", "intercept"].iter().map(|s| s.to_string()).collect();
    let row = vec![model.to_string(), s.target, s.rows.to_string(), s.rmse.to_string(), s.r2.to_string(), slope, intercept];
    write_table(&header, &[row], csv, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_args(std::iter::once("chamber").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("L=0:1:0.1").unwrap();
        assert_eq!(g.values.len(), 11);
        assert_eq!(g.values[10], 1.0);
        assert_eq!(parse_grid("r=1").unwrap().values, vec![1.0]);
        assert!(parse_grid("r").is_err());
        assert!(parse_grid("r=1:0:0.1").is_err());
        assert!(parse_grid("r=a").is_err());
    }

    #[test]
    fn b1_table() {
        let (code, out, _) = run(&["models", "--model", "B1", "--grid", "L=0:1:0.1", "--csv"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "L,C");
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[1], "0,0.166");
        assert_eq!(lines[11], "1,0.26");
    }

    #[test]
    fn c2_closed_system_is_zero() {
        let (code, out, _) = run(&["models", "--model", "C2", "--grid", "r=1", "--grid", "omega=0:314.16:31.416", "--csv"]);
        assert_eq!(code, 0);
        for line in out.lines().skip(1) {
            assert!(line.ends_with(",0"), "{line}");
        }
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(&["models", "--model", "Z9"]).0, 1);
        assert_eq!(run(&["models", "--model", "B1", "--grid", "x=1"]).0, 1);
        assert_eq!(run(&["bogus"]).0, 1);
        assert_eq!(run(&["--help"]).0, 0);
    }

    #[test]
    fn run_and_rate_limit() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("p.txt");
        std::fs::write(&good, "CHAMBER,wt,standard\nSET,load_in,0.5\nMSR,5,7\n").unwrap();
        let out_dir = dir.path().join("ds");
        let (code, out, _) = run(&["run", good.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.contains("wrote 5 rows"));
        assert!(out_dir.join("p.csv").is_file());
        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, "CHAMBER,lt,standard\nMSR,10,11\n").unwrap();
        let (code, _, err) = run(&["run", bad.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code, 1);
        assert!(err.contains("10 Hz"), "{err}");
        let (code, _, _) = run(&["run", "/nonexistent/p.txt", "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code, 2);
    }

    #[test]
    fn validate_edges_file() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "from,to\n").unwrap();
        let (code, _, err) = run(&["validate", "lt_standard", "--edges", empty.to_str().unwrap()]);
        assert_eq!(code, 1);
        assert!(err.contains("nothing to validate"));
        let edges = dir.path().join("e.csv");
        std::fs::write(&edges, "from,to,x_A,x_B\nred,ir_1,0,255\nfoo,ir_1,,\n").unwrap();
        let (code, out, err) = run(&["validate", "lt_standard", "--edges", edges.to_str().unwrap(), "--N", "30"]);
        assert_eq!(code, 0, "{err}");
        assert!(err.contains("skipping"));
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], validation::REPORT_HEADER);
        assert!(lines[1].starts_with("red->ir_1,0,255,10,30,0.01,"));
        let only_bad = dir.path().join("b.csv");
        std::fs::write(&only_bad, "from,to\nfoo,bar\n").unwrap();
        assert_eq!(run(&["validate", "lt_standard", "--edges", only_bad.to_str().unwrap()]).0, 1);
    }

    #[test]
    fn graph_export_and_score() {
        let (code, out, _) = run(&["graph", "export", "wt_pressure_control"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("from,to\n"));
        let dir = tempfile::tempdir().unwrap();
        let est = dir.path().join("est.csv");
        std::fs::write(&est, out).unwrap();
        let (code, out, _) = run(&["graph", "score", "wt_pressure_control", est.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(out, "precision,recall\n1,1\n");
    }
}
