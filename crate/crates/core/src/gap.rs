//! Directed gap `inf_{Q∈H∞} ‖I₁ − I₂Q‖∞` between image subspaces and the gap metric.
//!
//! With `[K₂; I₂∼]` unitary the problem becomes the two-block distance
//! `inf_Q ‖[K₂I₁; I₂∼I₁ − Q]‖∞`. For a level γ above `‖K₂I₁‖∞` the spectral
//! factor `Φ∼Φ = γ² − (K₂I₁)∼K₂I₁` reduces feasibility to a Nehari test: the
//! Hankel norm of the antistable part of `I₂∼I₁Φ⁻¹` must not exceed one.

use crate::error::{bail, Result};
use crate::factorization::NormalizedRepresentation;
use crate::linalg::{self, Mat};
use crate::lti::{grid_peak, FrequencyGrid, StateSpaceModel};
use crate::projection::ImageSubspace;
use crate::riccati::solve_dare;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Certified,
    GridApproximate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectedGap {
    /// Upper end of the bracket; this is the reported gap.
    pub value: f64,
    pub lower: f64,
    pub kind: BoundKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapResult {
    pub directed_12: f64,
    pub directed_21: f64,
    pub gap: f64,
    pub method_bound_kind: BoundKind,
    /// Sampled sup-inf estimate for the larger direction (a lower bound).
    pub oracle_estimate: f64,
}

const MAX_BISECTIONS: usize = 200;
const ORACLE_HORIZON: usize = 64;

/// `v ↦ Σ_{j≥0} Āʲ B̃ v(j)` for the antistable part of `I₂∼S`, returning `B̃`.
fn hankel_input_map(i2: &StateSpaceModel, s: &StateSpaceModel) -> Result<Mat> {
    let abar = i2.a().transpose();
    let bbar = i2.c().transpose();
    let y = linalg::stein(&abar, s.a(), &(&bbar * s.c()))?;
    Ok(&bbar * s.d() + &abar * y * s.b())
}

/// `‖Γ‖²` of the Hankel operator of `P_{H₂⊥} I₂∼ S` restricted to `H₂`.
fn hankel_norm_sq(i2: &StateSpaceModel, wo: &Mat, s: &StateSpaceModel) -> Result<f64> {
    let abar = i2.a().transpose();
    if abar.nrows() == 0 {
        return Ok(0.0);
    }
    let bt = hankel_input_map(i2, s)?;
    let wc = linalg::ctrb_gramian(&abar, &bt)?;
    let r = linalg::sym_sqrt(wo)?;
    Ok(linalg::sym_max_eig(&(&r * wc * &r)).max(0.0))
}

struct Problem<'a> {
    i1: &'a StateSpaceModel,
    i2: &'a StateSpaceModel,
    a1: StateSpaceModel,
    wo: Mat,
}

impl Problem<'_> {
    fn feasible(&self, gamma: f64) -> bool {
        self.try_feasible(gamma).unwrap_or(false)
    }

    fn try_feasible(&self, gamma: f64) -> Result<bool> {
        let (a, b, c, d) = (self.a1.a(), self.a1.b(), self.a1.c(), self.a1.d());
        let p = b.ncols();
        let r = linalg::eye(p) * (gamma * gamma) - d.transpose() * d;
        let phi_inv = if a.nrows() == 0 {
            StateSpaceModel::static_gain(linalg::sym_inv_sqrt(&r, 1e-300)?)
        } else {
            let sol = solve_dare(a, b, &-(c.transpose() * c), &r, &-(c.transpose() * d))?;
            let rx = &r + b.transpose() * &sol.x * b;
            if linalg::sym_min_eig(&rx) <= 0.0 {
                return Ok(false);
            }
            let ri = linalg::sym_inv_sqrt(&rx, 1e-300)?;
            StateSpaceModel::new(a + b * &sol.gain, b * &ri, sol.gain.clone(), ri)?
        };
        let s = phi_inv.then(self.i1)?;
        Ok(hankel_norm_sq(self.i2, &self.wo, &s)? <= 1.0)
    }
}

/// Directed gap from the inner `i1` to the subspace of inner `i2` with co-inner
/// complement `k2`.
pub fn directed_gap_inner(i1: &StateSpaceModel, i2: &StateSpaceModel, k2: &StateSpaceModel, tol: f64) -> Result<DirectedGap> {
    if !(tol > 0.0) {
        bail!(InvalidArgument, "tolerance must be positive");
    }
    if i1.outputs() != i2.outputs() || k2.inputs() != i2.outputs() {
        bail!(DimensionMismatch, "subspaces live in different signal spaces");
    }
    let a1 = i1.then(k2)?;
    let (mut lo, _) = grid_peak(&a1, &FrequencyGrid::uniform(4096))?;
    lo = lo.min(1.0);
    let lower_cert = lo;
    if lo >= 1.0 - tol {
        return Ok(DirectedGap { value: 1.0, lower: lower_cert, kind: BoundKind::Certified });
    }
    let wo = linalg::obs_gramian(&i2.a().transpose(), &i2.b().transpose())?;
    let prob = Problem { i1, i2, a1, wo };
    let first = (lo + 0.5 * tol).min(1.0);
    if prob.feasible(first) {
        return Ok(DirectedGap { value: first, lower: lower_cert, kind: BoundKind::Certified });
    }
    lo = first;
    let mut hi = 1.0;
    let mut it = 0;
    while hi - lo > tol && it < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if prob.feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        it += 1;
    }
    let kind = if hi - lo <= tol { BoundKind::Certified } else { BoundKind::GridApproximate };
    Ok(DirectedGap { value: hi.clamp(0.0, 1.0), lower: lower_cert.max(lo - tol).max(0.0), kind })
}

pub fn directed_gap_subspaces(s1: &ImageSubspace, s2: &ImageSubspace, tol: f64) -> Result<DirectedGap> {
    let k2 = match s2.kernel() {
        Some(k) => k,
        None => bail!(InvalidArgument, "target subspace needs a kernel representation"),
    };
    directed_gap_inner(s1.sir(), s2.sir(), k2, tol)
}

fn subspaces(rep1: &NormalizedRepresentation, rep2: &NormalizedRepresentation) -> Result<(ImageSubspace, ImageSubspace)> {
    if rep1.plant.inputs() != rep2.plant.inputs() || rep1.plant.outputs() != rep2.plant.outputs() {
        bail!(InvalidArgument, "plants have different I/O dimensions");
    }
    let s1 = ImageSubspace::from_inner(rep1.sir_system(), Some(rep1.skr_system()))?;
    let s2 = ImageSubspace::from_inner(rep2.sir_system(), Some(rep2.skr_system()))?;
    Ok((s1, s2))
}

/// `δ⃗(I_{G1}, I_{G2})`.
pub fn directed_gap(rep1: &NormalizedRepresentation, rep2: &NormalizedRepresentation, tol: f64) -> Result<f64> {
    Ok(directed_gap_detail(rep1, rep2, tol)?.value)
}

pub fn directed_gap_detail(rep1: &NormalizedRepresentation, rep2: &NormalizedRepresentation, tol: f64) -> Result<DirectedGap> {
    let (s1, s2) = subspaces(rep1, rep2)?;
    directed_gap_subspaces(&s1, &s2, tol)
}

pub fn gap(rep1: &NormalizedRepresentation, rep2: &NormalizedRepresentation, tol: f64) -> Result<GapResult> {
    let (s1, s2) = subspaces(rep1, rep2)?;
    let d12 = directed_gap_subspaces(&s1, &s2, tol)?;
    let d21 = directed_gap_subspaces(&s2, &s1, tol)?;
    let gap = d12.value.max(d21.value);
    let mut kind = if d12.kind == BoundKind::Certified && d21.kind == BoundKind::Certified {
        BoundKind::Certified
    } else {
        BoundKind::GridApproximate
    };
    if gap < 1.0 && (d12.value - d21.value).abs() > 2.0 * tol {
        kind = BoundKind::GridApproximate;
    }
    let oracle = if d12.value >= d21.value {
        sampled_directed_gap(&s1, &s2, ORACLE_HORIZON)?
    } else {
        sampled_directed_gap(&s2, &s1, ORACLE_HORIZON)?
    };
    Ok(GapResult { directed_12: d12.value, directed_21: d21.value, gap, method_bound_kind: kind, oracle_estimate: oracle })
}

/// `sup ‖x − P₂x‖/‖x‖` over `x = I₁v` with `v` supported on `[0, horizon)`.
///
/// Since `I₁` is isometric on `H₂` and `dist²(x, I₂) = ‖K₂x‖² + ‖P_{H₂⊥}I₂∼x‖²`,
/// the ratio is the largest eigenvalue of the sum of the Toeplitz Gram matrix of
/// `K₂I₁` and the Hankel contribution; a lower bound on the directed gap that
/// increases with the horizon.
pub fn sampled_directed_gap(s1: &ImageSubspace, s2: &ImageSubspace, horizon: usize) -> Result<f64> {
    let k2 = match s2.kernel() {
        Some(k) => k,
        None => bail!(InvalidArgument, "target subspace needs a kernel representation"),
    };
    let i1 = s1.sir();
    let i2 = s2.sir();
    let q = i1.inputs();
    let dim = q * horizon;
    let mut gram = Mat::zeros(dim, dim);
    // Toeplitz part from r(τ) = Σ_t h(t)ᵀ h(t+τ) of A₁ = K₂I₁
    let a1 = i1.then(k2)?;
    let (a, b, c, d) = (a1.a(), a1.b(), a1.c(), a1.d());
    let wo1 = linalg::obs_gramian(a, c)?;
    let mut apow = linalg::eye(a.nrows()); // A^{τ−1}
    for tau in 0..horizon {
        let r = if tau == 0 {
            d.transpose() * d + b.transpose() * &wo1 * b
        } else {
            let rt = d.transpose() * c * &apow * b + b.transpose() * &wo1 * a * &apow * b;
            apow = &apow * a;
            rt
        };
        for i in 0..horizon - tau {
            let j = i + tau;
            gram.view_mut((j * q, i * q), (q, q)).copy_from(&r);
            if tau > 0 {
                gram.view_mut((i * q, j * q), (q, q)).copy_from(&r.transpose());
            }
        }
    }
    // Hankel part: ξ = Σ_j Āʲ B̃ v(j), energy ξᵀ W_o ξ
    let abar = i2.a().transpose();
    let n2 = abar.nrows();
    if n2 > 0 {
        let bt = hankel_input_map(i2, i1)?;
        let wo2 = linalg::obs_gramian(&abar, &i2.b().transpose())?;
        let mut cmap = Mat::zeros(n2, dim);
        let mut pw = linalg::eye(n2);
        for j in 0..horizon {
            cmap.view_mut((0, j * q), (n2, q)).copy_from(&(&pw * &bt));
            pw = &pw * &abar;
        }
        gram += cmap.transpose() * wo2 * &cmap;
    }
    Ok(libm::sqrt(linalg::sym_max_eig(&gram).clamp(0.0, 1.0)))
}
