//! Command-line front end. Each subcommand reads one JSON config.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use projfdi_core::additive::kgap_directed;
use projfdi_core::classification::{classifiability_check, multiclass_classify, Decision, FaultClassModel};
use projfdi_core::factorization::check_grid;
use projfdi_core::gap::{gap, BoundKind};
use projfdi_core::linalg::{self, Mat};
use projfdi_core::parity::{build_io_model, deadbeat_observer_gain, identify_io_model, sliding_parity};
use projfdi_core::projection::{observer_residual, projection_residual_norm};
use projfdi_core::riccati::{dare_stabilizing, Side};
use projfdi_core::thresholds::{adaptive_threshold_corrected, kernel_scheme_threshold, ThresholdReport, Verdict};
use projfdi_core::{normalized_gains, SignalWindow, StateSpaceModel};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::benchmark::{benchmark_plant, THREE_TANK_JSON};
use crate::dto::{check_schema, mat_to_rows, rows_to_mat, DataDto, PlantSpec, SCHEMA};
use crate::error::{Error, Result};
use crate::export::{export_report, read_json, Format};
use crate::harness::{run_scenario, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "projfdi", version, about = "Projection-based fault detection for discrete-time LTI systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalized coprime factorization of a plant.
    Factorize {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gap and directed gaps between two plants.
    Gap {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual and adaptive threshold on one data record.
    Detect {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-class classification of one data record.
    Classify {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sliding-window parity detection.
    Parity {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo scenario.
    Montecarlo {
        config: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Exit with status 1 when the false-alarm rate exceeds this.
        #[arg(long)]
        max_false_alarm_rate: Option<f64>,
        /// Exit with status 1 when the detection rate is below this.
        #[arg(long)]
        min_detection_rate: Option<f64>,
    },
    /// Benchmark plant fixture and its self-checks.
    Bench {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// `Ok(true)` on success, `Ok(false)` when an expectation in the config failed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Factorize { config, out } => factorize(&config, out.as_deref()),
        Command::Gap { config, out } => gap_cmd(&config, out.as_deref()),
        Command::Detect { config, out } => detect(&config, out.as_deref()),
        Command::Classify { config, out } => classify(&config, out.as_deref()),
        Command::Parity { config, out } => parity(&config, out.as_deref()),
        Command::Montecarlo { config, json, csv, max_false_alarm_rate, min_detection_rate } => {
            montecarlo(&config, json.as_deref(), csv.as_deref(), max_false_alarm_rate, min_detection_rate)
        }
        Command::Bench { out } => bench(out.as_deref()),
    }
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json value serializes") + "\n";
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io { path: p.to_path_buf(), source }),
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(|source| Error::Io { path: "<stdout>".into(), source })
        }
    }
}

/// Inline `data` or a CSV file whose first `p` columns are inputs and the rest outputs.
#[derive(Debug, Deserialize)]
struct DataSource {
    #[serde(default)]
    data: Option<DataDto>,
    #[serde(default)]
    data_csv: Option<PathBuf>,
}

impl DataSource {
    fn load(&self, base: &Path, p: usize, m: usize) -> Result<(SignalWindow, SignalWindow)> {
        match (&self.data, &self.data_csv) {
            (Some(d), None) => d.windows(p, m),
            (None, Some(path)) => read_csv_data(&resolve(base, path), p, m),
            _ => Err(Error::Config("give exactly one of data, data_csv".into())),
        }
    }
}

fn resolve(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

pub fn read_csv_data(path: &Path, p: usize, m: usize) -> Result<(SignalWindow, SignalWindow)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    let (mut u, mut y) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
        if rec.len() != p + m {
            return Err(Error::Config(format!("{}: expected {} columns, found {}", path.display(), p + m, rec.len())));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        u.push(vals[..p].to_vec());
        y.push(vals[p..].to_vec());
    }
    Ok((SignalWindow::new(0, p, u)?, SignalWindow::new(0, m, y)?))
}

fn load_plant(path: &Path) -> Result<StateSpaceModel> {
    read_json::<PlantSpec>(path)?.model()
}

fn threshold_json(r: &ThresholdReport) -> Value {
    json!({ "j": r.j, "j_th": r.j_th, "j_n": r.j_n, "j_th_n": r.j_th_n, "delta": r.delta, "verdict": verdict_str(r.verdict) })
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::FaultFree => "fault-free",
        Verdict::Faulty => "faulty",
    }
}

fn print_table(rows: &[(String, &ThresholdReport)]) {
    eprintln!("{:>8} {:>14} {:>14} {:>12} {:>12}  verdict", "", "J", "J_th", "J_N", "J_thN");
    for (label, r) in rows {
        eprintln!("{label:>8} {:>14.6e} {:>14.6e} {:>12.6} {:>12.6}  {}", r.j, r.j_th, r.j_n, r.j_th_n, verdict_str(r.verdict));
    }
}

fn factorize(config: &Path, out: Option<&Path>) -> Result<bool> {
    let plant = load_plant(config)?;
    let rep = normalized_gains(&plant)?;
    let grid = check_grid();
    let (dk, di) = rep.normalization_deviation(&grid)?;
    let bez = rep.bezout()?;
    let bezout_dev = projfdi_core::factorization::verify_bezout(&bez, &rep.skr, &rep.sir, &grid)?;
    let filt = dare_stabilizing(&plant, Side::Filter)?;
    let ctrl = dare_stabilizing(&plant, Side::Control)?;
    emit(
        &json!({
            "schema": SCHEMA,
            "l0": mat_to_rows(rep.l0()),
            "w0": mat_to_rows(rep.w0()),
            "f0": mat_to_rows(rep.f0()),
            "v0": mat_to_rows(rep.v0()),
            "riccati_p": mat_to_rows(&rep.riccati_p),
            "riccati_q": mat_to_rows(&rep.riccati_q),
            "riccati_residuals": [filt.residual, ctrl.residual],
            "skr_deviation": dk,
            "sir_deviation": di,
            "bezout_deviation": bezout_dev,
        }),
        out,
    )?;
    Ok(true)
}

#[derive(Debug, Deserialize)]
struct GapConfig {
    #[serde(default = "schema1")]
    schema: u32,
    plant1: PlantSpec,
    plant2: PlantSpec,
    #[serde(default = "default_tol")]
    tol: f64,
}

fn schema1() -> u32 {
    SCHEMA
}
fn default_tol() -> f64 {
    1e-4
}

fn kind_str(k: BoundKind) -> &'static str {
    match k {
        BoundKind::Certified => "certified",
        BoundKind::GridApproximate => "grid-approximate",
    }
}

fn gap_cmd(config: &Path, out: Option<&Path>) -> Result<bool> {
    let cfg: GapConfig = read_json(config)?;
    check_schema(cfg.schema)?;
    let r1 = normalized_gains(&cfg.plant1.model()?)?;
    let r2 = normalized_gains(&cfg.plant2.model()?)?;
    let g = gap(&r1, &r2, cfg.tol)?;
    let k12 = kgap_directed(&r1, &r2, cfg.tol)?;
    let k21 = kgap_directed(&r2, &r1, cfg.tol)?;
    emit(
        &json!({
            "schema": SCHEMA,
            "gap": g.gap,
            "directed_12": g.directed_12,
            "directed_21": g.directed_21,
            "bound_kind": kind_str(g.method_bound_kind),
            "oracle_estimate": g.oracle_estimate,
            "kgap_directed_12": k12.value,
            "kgap_directed_21": k21.value,
        }),
        out,
    )?;
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Expect {
    FaultFree,
    Faulty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
enum DetectScheme {
    #[serde(rename = "open-loop")]
    OpenLoop,
    #[serde(rename = "kernel-L2")]
    KernelL2,
}

#[derive(Debug, Deserialize)]
struct DetectConfig {
    #[serde(default = "schema1")]
    schema: u32,
    plant: PlantSpec,
    #[serde(default = "open_loop")]
    scheme: DetectScheme,
    delta: f64,
    #[serde(flatten)]
    source: DataSource,
    #[serde(default)]
    expect: Option<Expect>,
}

fn open_loop() -> DetectScheme {
    DetectScheme::OpenLoop
}

fn check_expect(expect: Option<Expect>, faulty: bool) -> bool {
    match expect {
        None => true,
        Some(Expect::FaultFree) => !faulty,
        Some(Expect::Faulty) => faulty,
    }
}

fn detect(config: &Path, out: Option<&Path>) -> Result<bool> {
    let cfg: DetectConfig = read_json(config)?;
    check_schema(cfg.schema)?;
    let plant = cfg.plant.model()?;
    let rep = normalized_gains(&plant)?;
    let (u, y) = cfg.source.load(config, plant.inputs(), plant.outputs())?;
    let report = match cfg.scheme {
        DetectScheme::OpenLoop => adaptive_threshold_corrected(cfg.delta, &projection_residual_norm(&rep, &u, &y)?)?,
        DetectScheme::KernelL2 => {
            let r0 = observer_residual(&rep, &u, &y, &DVector::zeros(plant.states()))?;
            kernel_scheme_threshold(cfg.delta, u.energy() + y.energy(), r0.energy())?
        }
    };
    print_table(&[("record".into(), &report)]);
    emit(&json!({ "schema": SCHEMA, "report": threshold_json(&report) }), out)?;
    Ok(check_expect(cfg.expect, report.verdict == Verdict::Faulty))
}

#[derive(Debug, Deserialize)]
struct ClassSpec {
    label: String,
    plant: PlantSpec,
    delta: f64,
}

#[derive(Debug, Deserialize)]
struct ClassifyConfig {
    #[serde(default = "schema1")]
    schema: u32,
    classes: Vec<ClassSpec>,
    #[serde(flatten)]
    source: DataSource,
    #[serde(default = "default_tol")]
    tol: f64,
    /// Label the record should be assigned to.
    #[serde(default)]
    expect: Option<String>,
}

fn classify(config: &Path, out: Option<&Path>) -> Result<bool> {
    let cfg: ClassifyConfig = read_json(config)?;
    check_schema(cfg.schema)?;
    let classes = cfg
        .classes
        .iter()
        .map(|c| FaultClassModel::new(c.label.clone(), normalized_gains(&c.plant.model()?)?, c.delta).map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    let first = classes.first().ok_or_else(|| Error::Config("no classes given".into()))?;
    let (p, m) = (first.rep.plant.inputs(), first.rep.plant.outputs());
    let (u, y) = cfg.source.load(config, p, m)?;
    let check = classifiability_check(&classes, cfg.tol)?;
    let verdict = multiclass_classify(&classes, &u, &y)?;
    eprintln!("{:>12} {:>14} {:>14}  member", "class", "J", "J_th");
    for e in &verdict.per_class {
        eprintln!("{:>12} {:>14.6e} {:>14.6e}  {}", e.label, e.j, e.j_th, e.in_class);
    }
    let (decision, members): (&str, Vec<String>) = match &verdict.decision {
        Decision::Single(l) => ("single", vec![l.clone()]),
        Decision::Multiple(ls) => ("multiple", ls.clone()),
        Decision::Warning => ("warning", vec![]),
        Decision::None => ("none", vec![]),
    };
    emit(
        &json!({
            "schema": SCHEMA,
            "decision": decision,
            "members": members,
            "per_class": verdict.per_class.iter().map(|e| json!({"label": e.label, "j": e.j, "j_th": e.j_th, "in_class": e.in_class})).collect::<Vec<_>>(),
            "classifiable": check.classifiable,
            "gaps": check.gaps,
        }),
        out,
    )?;
    Ok(match cfg.expect {
        None => true,
        Some(l) => matches!(&verdict.decision, Decision::Single(x) if *x == l),
    })
}

#[derive(Debug, Deserialize)]
struct IdentifySpec {
    #[serde(flatten)]
    source: DataSource,
    #[serde(default)]
    ridge: f64,
    inputs: usize,
    outputs: usize,
}

#[derive(Debug, Deserialize)]
struct ParityConfig {
    #[serde(default = "schema1")]
    schema: u32,
    #[serde(default)]
    plant: Option<PlantSpec>,
    /// Observer gain `K`; deadbeat when absent.
    #[serde(default)]
    gain: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    identify: Option<IdentifySpec>,
    s: usize,
    s_p: usize,
    /// Defaults to the held-out estimate when identifying.
    #[serde(default)]
    delta_io: Option<f64>,
    #[serde(flatten)]
    source: DataSource,
    #[serde(default)]
    expect: Option<Expect>,
}

fn parity(config: &Path, out: Option<&Path>) -> Result<bool> {
    let cfg: ParityConfig = read_json(config)?;
    check_schema(cfg.schema)?;
    let (io, estimated) = match (&cfg.plant, &cfg.identify) {
        (Some(spec), None) => {
            let plant = spec.model()?;
            let k = match &cfg.gain {
                Some(rows) => rows_to_mat(rows, plant.outputs(), "gain")?,
                None => deadbeat_observer_gain(&plant)?,
            };
            (build_io_model(&plant, &k, cfg.s, cfg.s_p)?, None)
        }
        (None, Some(id)) => {
            let (u, y) = id.source.load(config, id.inputs, id.outputs)?;
            let r = identify_io_model(&u, &y, cfg.s, cfg.s_p, id.ridge)?;
            (r.model, Some(r.delta_io))
        }
        _ => return Err(Error::Config("give exactly one of plant, identify".into())),
    };
    let delta = cfg.delta_io.or(estimated).ok_or_else(|| Error::Config("delta_io is required".into()))?;
    let (u, y) = cfg.source.load(config, io.inputs, io.outputs)?;
    let samples = sliding_parity(&io, delta, &u, &y)?;
    let rows: Vec<(String, &ThresholdReport)> = samples.iter().map(|s| (s.k.to_string(), &s.report)).collect();
    print_table(&rows);
    let alarms = samples.iter().filter(|s| s.report.verdict == Verdict::Faulty).count();
    let staleness = if io.staleness.is_finite() { Some(io.staleness) } else { None };
    emit(
        &json!({
            "schema": SCHEMA,
            "delta_io": delta,
            "staleness": staleness,
            "alarms": alarms,
            "samples": samples.iter().map(|s| json!({"k": s.k, "report": threshold_json(&s.report)})).collect::<Vec<_>>(),
        }),
        out,
    )?;
    Ok(check_expect(cfg.expect, alarms > 0))
}

fn montecarlo(config: &Path, json_out: Option<&Path>, csv_out: Option<&Path>, max_fa: Option<f64>, min_det: Option<f64>) -> Result<bool> {
    let cfg: ScenarioConfig = read_json(config)?;
    let report = run_scenario(&cfg)?;
    if let Some(p) = json_out {
        export_report(&report, p, Format::Json)?;
    }
    if let Some(p) = csv_out {
        export_report(&report, p, Format::Csv)?;
    }
    let s = &report.summary;
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    eprintln!(
        "trials {} completed {} failed {} alarms {} false-alarm rate {} detection rate {} mean J_N/J_thN {}",
        s.trials,
        s.completed,
        s.failed,
        s.alarms,
        show(s.false_alarm_rate),
        show(s.detection_rate),
        show(s.mean_ratio)
    );
    if json_out.is_none() {
        emit(&serde_json::to_value(s).expect("summary serializes"), None)?;
    }
    let fa_ok = match (max_fa, s.false_alarm_rate) {
        (Some(limit), Some(r)) => r <= limit,
        _ => true,
    };
    let det_ok = match (min_det, s.detection_rate) {
        (Some(limit), Some(r)) => r >= limit,
        (Some(_), None) => false,
        _ => true,
    };
    Ok(fa_ok && det_ok && !s.incomplete)
}

fn observability_rank(g: &StateSpaceModel) -> usize {
    let n = g.states();
    let mut rows = Vec::with_capacity(n);
    let mut blk = g.c().clone();
    for _ in 0..n {
        rows.push(blk.clone());
        blk = &blk * g.a();
    }
    let refs: Vec<&Mat> = rows.iter().collect();
    let o = linalg::vstack(&refs);
    let sv = o.svd(false, false).singular_values;
    let tol = 1e-10 * sv.max();
    sv.iter().filter(|s| **s > tol).count()
}

fn bench(out: Option<&Path>) -> Result<bool> {
    let g = benchmark_plant();
    let schur = projfdi_core::lti::is_schur(g.a(), 0.0)?;
    let rank = observability_rank(&g);
    let filt = dare_stabilizing(&g, Side::Filter)?;
    let ctrl = dare_stabilizing(&g, Side::Control)?;
    let fixture: Value = serde_json::from_str(THREE_TANK_JSON).expect("fixture parses");
    emit(
        &json!({
            "schema": SCHEMA,
            "plant": fixture,
            "is_schur": schur,
            "spectral_radius": linalg::spectral_radius(g.a())?,
            "observability_rank": rank,
            "riccati_residuals": [filt.residual, ctrl.residual],
        }),
        out,
    )?;
    Ok(schur && rank == g.states() && filt.residual <= 1e-10 && ctrl.residual <= 1e-10)
}
