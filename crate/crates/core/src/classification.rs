//! Fault classification by projection onto several class image subspaces.

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DVector;
use rand::Rng;

use crate::error::{bail, Result};
use crate::factorization::NormalizedRepresentation;
use crate::gap::{directed_gap_subspaces, gap, BoundKind};
use crate::lti::{simulate, SignalWindow};
use crate::projection::{ImageSubspace, ResidualDecomposition};
use crate::random::trial_rng;
use crate::thresholds::{adaptive_threshold, Verdict};

/// One fault class: its normalized model and uncertainty radius.
#[derive(Debug, Clone)]
pub struct FaultClassModel {
    pub label: String,
    pub rep: NormalizedRepresentation,
    pub delta_i: f64,
    subspace: ImageSubspace,
}

/// Residual of the data against one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEvaluation {
    pub label: String,
    pub j: f64,
    pub j_th: f64,
    pub in_class: bool,
    pub decomposition: ResidualDecomposition,
}

impl FaultClassModel {
    pub fn new(label: impl Into<String>, rep: NormalizedRepresentation, delta_i: f64) -> Result<Self> {
        if !(delta_i > 0.0 && delta_i < 1.0) {
            bail!(InvalidArgument, "class uncertainty radius {delta_i} outside (0, 1)");
        }
        let subspace = ImageSubspace::from_representation(&rep)?;
        Ok(FaultClassModel { label: label.into(), rep, delta_i, subspace })
    }

    pub fn subspace(&self) -> &ImageSubspace {
        &self.subspace
    }

    /// `J_i = ‖r_i‖` against `J_th,i = δ_i/√(1−δ_i²)·‖P_i x‖`.
    pub fn evaluate(&self, x: &SignalWindow) -> Result<ClassEvaluation> {
        let dec = self.subspace.decompose(x)?;
        let corrected = (dec.total_norm_sq - dec.truncation_bound).max(0.0);
        let rep = adaptive_threshold(self.delta_i, dec.data_norm_sq, corrected)?;
        Ok(ClassEvaluation {
            label: self.label.clone(),
            j: rep.j,
            j_th: rep.j_th,
            in_class: rep.verdict == Verdict::FaultFree,
            decomposition: dec,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryVerdict {
    FaultFree,
    Warning,
    Faulty,
    /// Neither class explains the data.
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryOutcome {
    pub verdict: BinaryVerdict,
    pub nominal: ClassEvaluation,
    pub faulty: ClassEvaluation,
}

/// Fault-free class `m0` against faulty class `m1`, with the gap checked once.
#[derive(Debug, Clone)]
pub struct BinaryClassifier {
    pub m0: FaultClassModel,
    pub m1: FaultClassModel,
    pub gap: f64,
}

impl BinaryClassifier {
    pub fn new(m0: FaultClassModel, m1: FaultClassModel, tol: f64) -> Result<Self> {
        let g = gap(&m0.rep, &m1.rep, tol)?.gap;
        if g <= tol || g >= 1.0 - tol {
            bail!(AssumptionViolation, "class gap {g} is not strictly inside (0, 1)");
        }
        Ok(BinaryClassifier { m0, m1, gap: g })
    }

    pub fn classify(&self, u: &SignalWindow, y: &SignalWindow) -> Result<BinaryOutcome> {
        let x = SignalWindow::stack(&[u, y])?;
        self.classify_stacked(&x)
    }

    pub fn classify_stacked(&self, x: &SignalWindow) -> Result<BinaryOutcome> {
        let nominal = self.m0.evaluate(x)?;
        let faulty = self.m1.evaluate(x)?;
        let verdict = match (nominal.in_class, faulty.in_class) {
            (true, false) => BinaryVerdict::FaultFree,
            (true, true) => BinaryVerdict::Warning,
            (false, true) => BinaryVerdict::Faulty,
            (false, false) => BinaryVerdict::Inconsistent,
        };
        Ok(BinaryOutcome { verdict, nominal, faulty })
    }
}

pub fn binary_classify(m0: &FaultClassModel, m1: &FaultClassModel, u: &SignalWindow, y: &SignalWindow) -> Result<BinaryOutcome> {
    BinaryClassifier::new(m0.clone(), m1.clone(), 1e-6)?.classify(u, y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeCheck {
    pub residual: f64,
    pub bound: f64,
    pub holds: bool,
}

/// For data from class `j`: `‖r_i‖ ≤ δ⃗(I_j, I_i)·‖x‖`, with the truncation bound as slack.
pub fn residual_range_bound(mi: &FaultClassModel, mj: &FaultClassModel, u: &SignalWindow, y: &SignalWindow) -> Result<RangeCheck> {
    let d = if core::ptr::eq(mi, mj) {
        0.0
    } else {
        directed_gap_subspaces(mj.subspace(), mi.subspace(), 1e-7)?.value
    };
    let x = SignalWindow::stack(&[u, y])?;
    let dec = mi.subspace().decompose(&x)?;
    let residual = libm::sqrt(dec.total_norm_sq);
    let bound = d * libm::sqrt(dec.data_norm_sq) + libm::sqrt(dec.truncation_bound) + 1e-9 * libm::sqrt(dec.data_norm_sq);
    Ok(RangeCheck { residual, bound, holds: residual <= bound })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifiability {
    /// `gaps[i][j] = δ(I_i, I_j)`.
    pub gaps: Vec<Vec<f64>>,
    /// Off-diagonal entries: gap exceeds both radii. The diagonal is `true`.
    pub pairs: Vec<Vec<bool>>,
    pub classifiable: bool,
    pub bound_kind: BoundKind,
}

pub fn classifiability_check(classes: &[FaultClassModel], tol: f64) -> Result<Classifiability> {
    let m = classes.len();
    if m < 2 {
        bail!(InvalidArgument, "classifiability needs at least two classes");
    }
    let mut gaps = alloc::vec![alloc::vec![0.0; m]; m];
    let mut pairs = alloc::vec![alloc::vec![true; m]; m];
    let mut kind = BoundKind::Certified;
    for i in 0..m {
        for j in i + 1..m {
            let g = gap(&classes[i].rep, &classes[j].rep, tol)?;
            if g.method_bound_kind != BoundKind::Certified {
                kind = BoundKind::GridApproximate;
            }
            gaps[i][j] = g.gap;
            gaps[j][i] = g.gap;
            let ok = g.gap > classes[i].delta_i.max(classes[j].delta_i);
            pairs[i][j] = ok;
            pairs[j][i] = ok;
        }
    }
    let classifiable = pairs.iter().all(|r| r.iter().all(|&b| b));
    Ok(Classifiability { gaps, pairs, classifiable, bound_kind: kind })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Single(String),
    Multiple(Vec<String>),
    /// Only produced by the binary scheme.
    Warning,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationVerdict {
    pub per_class: Vec<ClassEvaluation>,
    pub decision: Decision,
}

pub fn multiclass_classify(classes: &[FaultClassModel], u: &SignalWindow, y: &SignalWindow) -> Result<ClassificationVerdict> {
    let x = SignalWindow::stack(&[u, y])?;
    multiclass_classify_stacked(classes, &x)
}

pub fn multiclass_classify_stacked(classes: &[FaultClassModel], x: &SignalWindow) -> Result<ClassificationVerdict> {
    let per_class = classes.iter().map(|c| c.evaluate(x)).collect::<Result<Vec<_>>>()?;
    let members: Vec<String> = per_class.iter().filter(|e| e.in_class).map(|e| e.label.clone()).collect();
    let decision = match members.len() {
        0 => Decision::None,
        1 => Decision::Single(members[0].clone()),
        _ => Decision::Multiple(members),
    };
    Ok(ClassificationVerdict { per_class, decision })
}

/// Random latent input on `[0, len)` followed by `guard` zero samples.
pub fn latent_probe(rng: &mut impl Rng, channels: usize, len: usize, guard: usize) -> SignalWindow {
    let mut data = alloc::vec![0.0; (len + guard) * channels];
    for s in data.iter_mut().take(len * channels) {
        *s = rng.random_range(-1.0..1.0);
    }
    SignalWindow::from_flat(0, channels, data).expect("shape is consistent")
}

/// Image of `v` under the subspace generator, from rest.
pub fn image_of(sub: &ImageSubspace, v: &SignalWindow) -> Result<SignalWindow> {
    simulate(sub.sir(), v, &DVector::zeros(sub.sir().states()))
}

/// Fraction of random unit-energy signals of `I_{G1}` that `m0` accepts.
pub fn estimate_overlap(m0: &FaultClassModel, m1: &FaultClassModel, n_samples: usize, seed: u64, horizon: usize) -> Result<f64> {
    if n_samples == 0 || horizon == 0 {
        bail!(InvalidArgument, "overlap estimate needs samples and a horizon");
    }
    let guard = horizon;
    let mut hits = 0usize;
    for k in 0..n_samples {
        let mut rng = trial_rng(seed, k as u64);
        let v = latent_probe(&mut rng, m1.subspace().latent_dim(), horizon, guard);
        let x = image_of(m1.subspace(), &v)?;
        let norm = x.norm();
        if norm == 0.0 {
            continue;
        }
        if m0.evaluate(&x.scaled(1.0 / norm))?.in_class {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_samples as f64)
}

/// Signal of `I_{G1}` closest in angle to `I_{G0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapConstruction {
    /// Unit-energy data `[u; y]`.
    pub x: SignalWindow,
    pub iterations: usize,
    /// `‖x − P₀x‖`, the sine of the angle reached.
    pub residual_0: f64,
    pub residual_1: f64,
}

/// Renormalized alternating projections: with `x = I₁v`, `v` supported on
/// `[0, horizon)`, iterate `v ← trunc I₁∼P₀I₁v` and renormalize. This is a power
/// iteration converging to the direction of `I_{G1}` with the smallest angle to
/// `I_{G0}`. Distinct graphs intersect only in zero, so the residuals are not
/// driven to zero; they settle at the minimal angle reachable on the window.
pub fn construct_overlap(
    m0: &FaultClassModel,
    m1: &FaultClassModel,
    horizon: usize,
    guard: usize,
    seed: u64,
    max_iter: usize,
) -> Result<OverlapConstruction> {
    let s0 = m0.subspace();
    let s1 = m1.subspace();
    let q = s1.latent_dim();
    let total = (horizon + guard) as i64;
    let mut rng = trial_rng(seed, 0);
    let mut v = latent_probe(&mut rng, q, horizon, 0);
    v = v.scaled(1.0 / v.norm());
    let mut last = f64::NAN;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let x = image_of(s1, &v.reframe(0, total))?;
        let p0 = s0.project(&x, total)?;
        let back = s1.adjoint(&p0)?.sigma.reframe(0, horizon as i64);
        let lambda = v.dot(&back)?;
        let n = back.norm();
        if n == 0.0 {
            bail!(Numeric, "alternating projection collapsed to zero");
        }
        v = back.scaled(1.0 / n);
        if (lambda - last).abs() <= 1e-12 * lambda.abs().max(1e-300) {
            break;
        }
        last = lambda;
    }
    let x = image_of(s1, &v.reframe(0, total))?;
    let x = x.scaled(1.0 / x.norm());
    let r0 = libm::sqrt(s0.decompose(&x)?.total_norm_sq);
    let r1 = libm::sqrt(s1.decompose(&x)?.total_norm_sq);
    Ok(OverlapConstruction { x, iterations, residual_0: r0, residual_1: r1 })
}
