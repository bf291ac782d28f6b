//! Monte Carlo scenario driver.

use nalgebra::DVector;
use projfdi_core::additive::{residual as additive_residual, unified_filter, AdditiveModel, UnifiedFilter};
use projfdi_core::classification::{BinaryClassifier, BinaryVerdict, FaultClassModel};
use projfdi_core::closed_loop::{
    closed_loop_sir_for, loop_sim, perturbation_from_loop, perturbed_loop_map, perturbed_plant, scheme_a_residual,
    scheme_a_setup, scheme_b_latent, scheme_b_residual, youla_controller, ClosedLoopSir, ControllerRealization, SchemeA,
};
use projfdi_core::linalg::{self, Mat};
use projfdi_core::lti::simulate;
use projfdi_core::parity::{build_io_model, deadbeat_observer_gain, io_threshold, parity_residual, sample_io_uncertainty, stack_at, IOKernelModel};
use projfdi_core::projection::{observer_residual, split_io, ImageSubspace};
use projfdi_core::random::{random_system_with_norm, trial_rng, uniform_mat};
use projfdi_core::thresholds::{adaptive_threshold_corrected, kernel_scheme_threshold, ThresholdReport, Verdict};
use projfdi_core::uncertainty::{inject_uncertainty_with, UncertaintyKind};
use projfdi_core::{normalized_gains, NormalizedRepresentation, SignalWindow, StateSpaceModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dto::{check_schema, PlantSpec, SCHEMA};
use crate::error::{Error, Result};

/// Thread count override; results do not depend on it.
pub const THREADS_ENV: &str = "PROJFDI_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "open-loop")]
    OpenLoop,
    #[serde(rename = "closed-A")]
    ClosedA,
    #[serde(rename = "closed-B")]
    ClosedB,
    #[serde(rename = "kernel-L2")]
    KernelL2,
    #[serde(rename = "parity")]
    Parity,
    #[serde(rename = "classify")]
    Classify,
    /// Co-inner residual for additive disturbances; needs an additive plant.
    #[serde(rename = "unified")]
    Unified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintySpecKind {
    RightCoprime,
    LeftCoprime,
    IoMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    pub kind: UncertaintySpecKind,
    pub magnitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// Output gain multiplied by `1 + magnitude` from the onset.
    ParametricScale,
    /// Actuator step of size `magnitude` on every input (fault channels for additive plants).
    AdditiveStep,
    /// Constant offset `magnitude` on every output.
    SensorBias,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    #[serde(default)]
    pub onset_index: i64,
    #[serde(default)]
    pub magnitude: f64,
}

impl FaultSpec {
    pub fn none() -> Self {
        FaultSpec { kind: FaultKind::None, onset_index: 0, magnitude: 0.0 }
    }
    pub fn present(&self) -> bool {
        self.kind != FaultKind::None
    }
}

fn default_schema() -> u32 {
    SCHEMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub plant: PlantSpec,
    pub scheme: Scheme,
    pub uncertainty: UncertaintySpec,
    pub fault: FaultSpec,
    /// Excited samples per trial.
    pub horizon: usize,
    pub trials: usize,
    /// Zero-input samples appended so the response decays; chosen from the
    /// slowest pole when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<usize>,
    /// Detector design radius; defaults to the uncertainty magnitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        let mag = self.uncertainty.magnitude;
        if !(0.0..1.0).contains(&mag) {
            return Err(Error::Config(format!("uncertainty magnitude {mag} outside [0, 1)")));
        }
        if let Some(d) = self.delta {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Config(format!("delta {d} outside [0, 1)")));
            }
        }
        if self.horizon < 1 || self.trials < 1 {
            return Err(Error::Config("horizon and trials must be at least one".into()));
        }
        if self.fault.onset_index < 0 || !self.fault.magnitude.is_finite() {
            return Err(Error::Config("fault onset must be nonnegative and magnitude finite".into()));
        }
        let kind = self.uncertainty.kind;
        let ok = match self.scheme {
            Scheme::Parity => kind == UncertaintySpecKind::IoMatrix,
            Scheme::OpenLoop | Scheme::KernelL2 => kind != UncertaintySpecKind::IoMatrix,
            Scheme::ClosedA | Scheme::ClosedB | Scheme::Classify => kind == UncertaintySpecKind::RightCoprime,
            Scheme::Unified => true,
        };
        if !ok {
            return Err(Error::Config(format!("uncertainty kind {kind:?} does not apply to scheme {:?}", self.scheme)));
        }
        if self.scheme == Scheme::Classify && !matches!(self.fault.kind, FaultKind::ParametricScale) {
            return Err(Error::Config("classify scenarios need a parametric-scale fault class".into()));
        }
        if self.scheme == Scheme::Unified && !matches!(self.plant, PlantSpec::Additive(_)) {
            return Err(Error::Config("the unified scheme needs an additive plant".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn design_delta(&self) -> f64 {
        self.delta.unwrap_or(self.uncertainty.magnitude)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<TrialOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub j: f64,
    pub j_th: f64,
    pub j_n: f64,
    pub j_th_n: f64,
    /// `J_N / J_thN`; absent when the threshold is zero.
    pub ratio: Option<f64>,
    pub alarm: bool,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    pub alarms: usize,
    pub quiet: usize,
    /// Alarms over completed trials, for fault-free scenarios.
    pub false_alarm_rate: Option<f64>,
    /// Alarms over completed trials, for faulty scenarios.
    pub detection_rate: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub incomplete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub schema: u32,
    pub digest: String,
    pub scenario: ScenarioConfig,
    pub per_trial: Vec<TrialRecord>,
    pub summary: Summary,
}

fn outcome_from(rep: &ThresholdReport) -> TrialOutcome {
    let alarm = rep.verdict == Verdict::Faulty;
    TrialOutcome {
        j: rep.j,
        j_th: rep.j_th,
        j_n: rep.j_n,
        j_th_n: rep.j_th_n,
        ratio: ratio(rep.j_n, rep.j_th_n),
        alarm,
        verdict: if alarm { "faulty" } else { "fault-free" }.into(),
    }
}

fn ratio(j_n: f64, j_th_n: f64) -> Option<f64> {
    (j_th_n > 0.0).then(|| j_n / j_th_n)
}

/// Scheme-specific precomputation shared by all trials.
enum Setup {
    Open { rep: NormalizedRepresentation, sub: ImageSubspace },
    Closed { rep: NormalizedRepresentation, ctrl: ControllerRealization, a: SchemeA, b: Option<(ClosedLoopSir, ImageSubspace)> },
    Parity { plant: StateSpaceModel, io: IOKernelModel },
    Classify { rep0: NormalizedRepresentation, rep1: NormalizedRepresentation, classifier: BinaryClassifier },
    Unified { am: AdditiveModel, uf: UnifiedFilter },
}

fn output_scaled(g: &StateSpaceModel, k: f64) -> Result<StateSpaceModel> {
    Ok(StateSpaceModel::new(g.a().clone(), g.b().clone(), g.c() * k, g.d() * k)?)
}

fn setup(cfg: &ScenarioConfig) -> Result<Setup> {
    let plant = cfg.plant.model()?;
    let delta = cfg.design_delta();
    Ok(match cfg.scheme {
        Scheme::OpenLoop | Scheme::KernelL2 => {
            let rep = normalized_gains(&plant)?;
            let sub = ImageSubspace::from_representation(&rep)?;
            Setup::Open { rep, sub }
        }
        Scheme::ClosedA | Scheme::ClosedB => {
            let rep = normalized_gains(&plant)?;
            let bez = rep.bezout()?;
            let q = StateSpaceModel::zero(plant.inputs(), plant.outputs());
            let ctrl = youla_controller(&rep, &bez, &q)?;
            let a = scheme_a_setup(&ctrl)?;
            let b = if cfg.scheme == Scheme::ClosedB {
                let cl = closed_loop_sir_for(&ctrl)?;
                let sub = cl.subspace()?;
                Some((cl, sub))
            } else {
                None
            };
            Setup::Closed { rep, ctrl, a, b }
        }
        Scheme::Parity => {
            let k = deadbeat_observer_gain(&plant)?;
            let s = plant.states().max(1);
            let io = build_io_model(&plant, &k, s, s)?;
            Setup::Parity { plant, io }
        }
        Scheme::Classify => {
            let rep0 = normalized_gains(&plant)?;
            let rep1 = normalized_gains(&output_scaled(&plant, 1.0 + cfg.fault.magnitude)?)?;
            let m0 = FaultClassModel::new("nominal", rep0.clone(), delta)?;
            let m1 = FaultClassModel::new("faulty", rep1.clone(), delta)?;
            let classifier = BinaryClassifier::new(m0, m1, 1e-4)?;
            Setup::Classify { rep0, rep1, classifier }
        }
        Scheme::Unified => {
            let am = cfg.plant.additive()?.ok_or_else(|| Error::Config("the unified scheme needs an additive plant".into()))?;
            let uf = unified_filter(&am)?;
            Setup::Unified { am, uf }
        }
    })
}

fn guard_for(cfg: &ScenarioConfig, a: &Mat) -> usize {
    if let Some(g) = cfg.guard {
        return g;
    }
    let rho = linalg::spectral_radius(a).unwrap_or(0.99).clamp(0.05, 0.999);
    ((1e-10f64).ln() / rho.ln()).ceil().clamp(20.0, 4000.0) as usize
}

fn excitation(rng: &mut ChaCha8Rng, channels: usize, horizon: usize, guard: usize) -> SignalWindow {
    let mut data = uniform_mat(rng, channels, horizon).as_slice().to_vec();
    data.resize((horizon + guard) * channels, 0.0);
    SignalWindow::from_flat(0, channels, data).expect("excitation is well-formed")
}

fn step_from(onset: i64, channels: usize, len: usize, level: f64) -> SignalWindow {
    let mut w = SignalWindow::zeros(0, channels, len);
    for i in (onset.max(0) as usize)..len {
        w.row_mut(i).fill(level);
    }
    w
}

/// Output-side fault effect on `y` produced by plant `g` from input `u`.
fn apply_fault(fault: &FaultSpec, g: &StateSpaceModel, y: &SignalWindow) -> Result<SignalWindow> {
    let len = y.len();
    let onset = fault.onset_index;
    Ok(match fault.kind {
        FaultKind::None => y.clone(),
        FaultKind::SensorBias => y.add(&step_from(onset, y.channels(), len, fault.magnitude))?,
        FaultKind::ParametricScale => {
            let mut out = y.clone();
            for i in (onset.max(0) as usize)..len {
                out.row_mut(i).iter_mut().for_each(|v| *v *= 1.0 + fault.magnitude);
            }
            out
        }
        FaultKind::AdditiveStep => {
            let f = step_from(onset, g.inputs(), len, fault.magnitude);
            y.add(&simulate(g, &f, &DVector::zeros(g.states()))?)?
        }
    })
}

fn open_loop_data(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng, rep: &NormalizedRepresentation) -> Result<(SignalWindow, SignalWindow)> {
    let p = rep.plant.inputs();
    let kind = match cfg.uncertainty.kind {
        UncertaintySpecKind::LeftCoprime => UncertaintyKind::LeftCoprime,
        _ => UncertaintyKind::RightCoprime,
    };
    let inj = inject_uncertainty_with(rng, rep, kind, cfg.uncertainty.magnitude)?;
    let (u, y) = match &inj.image {
        Some(image) => {
            let guard = guard_for(cfg, image.a());
            let v = excitation(rng, p, cfg.horizon, guard);
            let x = simulate(image, &v, &DVector::zeros(image.states()))?;
            split_io(&x, p)
        }
        None => {
            let guard = guard_for(cfg, inj.plant.a());
            let u = excitation(rng, p, cfg.horizon, guard);
            let y = simulate(&inj.plant, &u, &DVector::zeros(inj.plant.states()))?;
            (u, y)
        }
    };
    let y = apply_fault(&cfg.fault, &inj.plant, &y)?;
    Ok((u, y))
}

fn run_trial(cfg: &ScenarioConfig, st: &Setup, index: usize) -> Result<TrialOutcome> {
    let mut rng = trial_rng(cfg.uncertainty.seed, index as u64);
    let delta = cfg.design_delta();
    match st {
        Setup::Open { rep, sub } => {
            let (u, y) = open_loop_data(cfg, &mut rng, rep)?;
            let rep_th = if cfg.scheme == Scheme::OpenLoop {
                let dec = sub.decompose(&SignalWindow::stack(&[&u, &y])?)?;
                adaptive_threshold_corrected(delta, &dec)?
            } else {
                let r0 = observer_residual(rep, &u, &y, &DVector::zeros(rep.plant.states()))?;
                kernel_scheme_threshold(delta, u.energy() + y.energy(), r0.energy())?
            };
            Ok(outcome_from(&rep_th))
        }
        Setup::Closed { rep, ctrl, a, b } => {
            let (p, m) = (rep.plant.inputs(), rep.plant.outputs());
            let mag = cfg.uncertainty.magnitude;
            let dic = random_system_with_norm(&mut rng, p + m, p, mag)?;
            let pert = perturbation_from_loop(ctrl, &dic)?;
            let before = if mag == 0.0 { rep.plant.clone() } else { perturbed_plant(rep, &pert)? };
            let loop_map = perturbed_loop_map(ctrl, &pert)?;
            let guard = guard_for(cfg, loop_map.a());
            let v = excitation(&mut rng, p, cfg.horizon, guard);
            let onset = if cfg.fault.present() { cfg.fault.onset_index } else { i64::MAX };
            let (after, noise) = match cfg.fault.kind {
                FaultKind::ParametricScale => (output_scaled(&before, 1.0 + cfg.fault.magnitude)?, None),
                FaultKind::SensorBias => (before.clone(), Some(step_from(onset, m, v.len(), cfg.fault.magnitude))),
                FaultKind::AdditiveStep => {
                    let f = step_from(onset, p, v.len(), cfg.fault.magnitude);
                    (before.clone(), Some(simulate(&before, &f, &DVector::zeros(before.states()))?))
                }
                FaultKind::None => (before.clone(), None),
            };
            let (u, y) = loop_sim(&before, &after, onset, &ctrl.realization, &v, noise.as_ref())?;
            let det = match b {
                None => scheme_a_residual(a, &u, &y, delta)?,
                Some((cl, sub)) => {
                    let vh = scheme_b_latent(cl, ctrl, &v)?;
                    scheme_b_residual(sub, &vh, &u, &y, delta, a.gamma)?
                }
            };
            Ok(outcome_from(&det.report))
        }
        Setup::Parity { plant, io } => {
            let warm = io.s + io.s_p;
            let len = cfg.horizon + warm;
            let u = excitation(&mut rng, plant.inputs(), len, 0);
            let y = simulate(plant, &u, &DVector::zeros(plant.states()))?;
            let y = apply_fault(&cfg.fault, plant, &y)?;
            let (dx, du) = sample_io_uncertainty(&mut rng, io, cfg.uncertainty.magnitude)?;
            let mut worst: Option<ThresholdReport> = None;
            let mut alarm = false;
            for k in warm as i64..len as i64 {
                let Some((zp, us, ys)) = stack_at(io, &u, &y, k) else { continue };
                let ys = ys + &dx * &zp + &du * &us;
                let (_, rn) = parity_residual(io, &zp, &us, &ys)?;
                let rep = io_threshold(delta, &zp, &us, &ys, rn)?;
                alarm |= rep.verdict == Verdict::Faulty;
                let score = |r: &ThresholdReport| ratio(r.j_n, r.j_th_n).unwrap_or(if r.j_n > 0.0 { f64::MAX } else { 0.0 });
                if worst.as_ref().is_none_or(|w| score(&rep) > score(w)) {
                    worst = Some(rep);
                }
            }
            let worst = worst.ok_or_else(|| Error::Config("no complete parity window".into()))?;
            let mut out = outcome_from(&worst);
            out.alarm = alarm;
            out.verdict = if alarm { "faulty" } else { "fault-free" }.into();
            Ok(out)
        }
        Setup::Classify { rep0, rep1, classifier } => {
            let source = if cfg.fault.present() { rep1 } else { rep0 };
            let p = source.plant.inputs();
            let inj = inject_uncertainty_with(&mut rng, source, UncertaintyKind::RightCoprime, cfg.uncertainty.magnitude)?;
            let image = inj.image.expect("right-coprime injection carries its image");
            let guard = guard_for(cfg, image.a());
            let v = excitation(&mut rng, p, cfg.horizon, guard);
            let x = simulate(&image, &v, &DVector::zeros(image.states()))?;
            let out = classifier.classify_stacked(&x)?;
            let (j, th) = (out.nominal.j, out.nominal.j_th);
            let norm = x.norm();
            let (j_n, j_th_n) = if norm > 0.0 { (j / norm, th / norm) } else { (0.0, 0.0) };
            let verdict = match out.verdict {
                BinaryVerdict::FaultFree => "fault-free",
                BinaryVerdict::Warning => "warning",
                BinaryVerdict::Faulty => "faulty",
                BinaryVerdict::Inconsistent => "inconsistent",
            };
            Ok(TrialOutcome {
                j,
                j_th: th,
                j_n,
                j_th_n,
                ratio: ratio(j_n, j_th_n),
                alarm: out.verdict != BinaryVerdict::FaultFree,
                verdict: verdict.into(),
            })
        }
        Setup::Unified { am, uf } => {
            let (p, kd, kf) = (am.base.inputs(), am.e_d.ncols(), am.e_f.ncols());
            let aug = am.augmented();
            let guard = guard_for(cfg, am.base.a());
            let u = excitation(&mut rng, p, cfg.horizon, guard);
            let mut d = excitation(&mut rng, kd, cfg.horizon, guard);
            let scale = if d.norm() > 0.0 { am.delta_d * rng.random_range(0.5..1.0) / d.norm() } else { 0.0 };
            d = d.scaled(scale);
            let f = match cfg.fault.kind {
                FaultKind::AdditiveStep => step_from(cfg.fault.onset_index, kf, u.len(), cfg.fault.magnitude),
                _ => SignalWindow::zeros(0, kf, u.len()),
            };
            let y = simulate(&aug, &SignalWindow::stack(&[&u, &d, &f])?, &DVector::zeros(am.base.states()))?;
            let y = match cfg.fault.kind {
                FaultKind::AdditiveStep => y,
                _ => apply_fault(&cfg.fault, &am.base, &y)?,
            };
            let rbar = additive_residual(&am.base, &uf.l_d, &uf.w_d, &u, &y)?;
            let j = rbar.norm();
            let j_th = am.delta_d;
            let norm = SignalWindow::stack(&[&u, &y])?.norm();
            let (j_n, j_th_n) = if norm > 0.0 { (j / norm, j_th / norm) } else { (0.0, 0.0) };
            let alarm = j > j_th;
            Ok(TrialOutcome { j, j_th, j_n, j_th_n, ratio: ratio(j_n, j_th_n), alarm, verdict: if alarm { "faulty" } else { "fault-free" }.into() })
        }
    }
}

fn summarize(cfg: &ScenarioConfig, per_trial: &[TrialRecord]) -> Summary {
    let done: Vec<&TrialOutcome> = per_trial.iter().filter_map(|t| t.outcome.as_ref()).collect();
    let completed = done.len();
    let alarms = done.iter().filter(|o| o.alarm).count();
    let rate = (completed > 0).then(|| alarms as f64 / completed as f64);
    let ratios: Vec<f64> = done.iter().filter_map(|o| o.ratio).collect();
    let mean_ratio = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
    Summary {
        trials: per_trial.len(),
        completed,
        failed: per_trial.len() - completed,
        alarms,
        quiet: completed - alarms,
        false_alarm_rate: if cfg.fault.present() { None } else { rate },
        detection_rate: if cfg.fault.present() { rate } else { None },
        mean_ratio,
        incomplete: completed < per_trial.len(),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs every trial; a trial error is recorded and marks the summary incomplete.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<DetectionReport> {
    cfg.validate()?;
    let st = setup(cfg)?;
    let per_trial: Vec<TrialRecord> = thread_pool()?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| match run_trial(cfg, &st, i) {
                Ok(o) => TrialRecord { index: i, outcome: Some(o), error: None },
                Err(e) => TrialRecord { index: i, outcome: None, error: Some(e.to_string()) },
            })
            .collect()
    });
    let summary = summarize(cfg, &per_trial);
    Ok(DetectionReport { schema: SCHEMA, digest: cfg.digest(), scenario: cfg.clone(), per_trial, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(scheme: Scheme, kind: UncertaintySpecKind, fault: FaultSpec) -> ScenarioConfig {
        ScenarioConfig {
            schema: SCHEMA,
            plant: PlantSpec::Named("benchmark".into()),
            scheme,
            uncertainty: UncertaintySpec { kind, magnitude: 0.1, seed: 3 },
            fault,
            horizon: 40,
            trials: 4,
            guard: None,
            delta: None,
        }
    }

    #[test]
    fn every_scheme_runs_fault_free() {
        for (scheme, kind) in [
            (Scheme::OpenLoop, UncertaintySpecKind::RightCoprime),
            (Scheme::KernelL2, UncertaintySpecKind::LeftCoprime),
            (Scheme::ClosedA, UncertaintySpecKind::RightCoprime),
            (Scheme::ClosedB, UncertaintySpecKind::RightCoprime),
            (Scheme::Parity, UncertaintySpecKind::IoMatrix),
        ] {
            let r = run_scenario(&cfg(scheme, kind, FaultSpec::none())).unwrap();
            assert_eq!(r.summary.failed, 0, "{scheme:?}: {:?}", r.per_trial);
            assert_eq!(r.summary.false_alarm_rate, Some(0.0), "{scheme:?}");
            assert_eq!(r.summary.alarms + r.summary.quiet, r.summary.trials);
        }
    }

    #[test]
    fn mismatched_kind_is_rejected() {
        let c = cfg(Scheme::Parity, UncertaintySpecKind::RightCoprime, FaultSpec::none());
        assert!(matches!(run_scenario(&c), Err(Error::Config(_))));
    }
}
