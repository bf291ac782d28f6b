//! Additive disturbance model `x⁺ = Ax + Bu + E_d d + E_f f`, `y = Cx + Du + F_d d + F_f f`,
//! and the unified residual generator whose `d → r̄₀` map is co-inner.

use nalgebra::DVector;

use crate::error::{bail, Error, Result};
use crate::factorization::NormalizedRepresentation;
use crate::gap::{directed_gap_inner, DirectedGap};
use crate::linalg::{self, eye, hstack, inverse, Mat};
use crate::lti::{hinf_norm, is_schur, simulate, SignalWindow, StateSpaceModel};
use crate::riccati::solve_dare;

const RANK_ANGLES: usize = 64;
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveModel {
    pub base: StateSpaceModel,
    pub e_d: Mat,
    pub f_d: Mat,
    pub e_f: Mat,
    pub f_f: Mat,
    pub delta_d: f64,
}

impl AdditiveModel {
    pub fn new(base: StateSpaceModel, e_d: Mat, f_d: Mat, e_f: Mat, f_f: Mat, delta_d: f64) -> Result<Self> {
        let (n, m) = (base.states(), base.outputs());
        if e_d.nrows() != n || f_d.nrows() != m || e_d.ncols() != f_d.ncols() {
            bail!(DimensionMismatch, "disturbance matrices must be {n}×k and {m}×k");
        }
        if e_f.nrows() != n || f_f.nrows() != m || e_f.ncols() != f_f.ncols() {
            bail!(DimensionMismatch, "fault matrices must be {n}×k and {m}×k");
        }
        if !(delta_d >= 0.0) || !delta_d.is_finite() {
            bail!(InvalidArgument, "disturbance bound must be finite and nonnegative");
        }
        let am = AdditiveModel { base, e_d, f_d, e_f, f_f, delta_d };
        am.check_rank()?;
        Ok(am)
    }

    /// Without faults.
    pub fn disturbance_only(base: StateSpaceModel, e_d: Mat, f_d: Mat, delta_d: f64) -> Result<Self> {
        let (n, m) = (base.states(), base.outputs());
        Self::new(base, e_d, f_d, Mat::zeros(n, 0), Mat::zeros(m, 0), delta_d)
    }

    /// Smallest normalized singular value of `[A − e^{jθ}I, E_d; C, F_d]` over the
    /// probe angles, measured on the real embedding.
    pub fn rank_margin(&self) -> f64 {
        let (a, c) = (self.base.a(), self.base.c());
        let (n, m, kd) = (self.base.states(), self.base.outputs(), self.e_d.ncols());
        let rows = n + m;
        let cols = n + kd;
        if cols < rows {
            return 0.0;
        }
        let mut worst = f64::INFINITY;
        for t in linalg::probe_angles(RANK_ANGLES) {
            let (s, co) = libm::sincos(t);
            let mut re = Mat::zeros(rows, cols);
            re.view_mut((0, 0), (n, n)).copy_from(&(a - eye(n) * co));
            re.view_mut((0, n), (n, kd)).copy_from(&self.e_d);
            re.view_mut((n, 0), (m, n)).copy_from(c);
            re.view_mut((n, n), (m, kd)).copy_from(&self.f_d);
            let mut im = Mat::zeros(rows, cols);
            im.view_mut((0, 0), (n, n)).copy_from(&(eye(n) * -s));
            let emb = linalg::vstack(&[&hstack(&[&re, &-im.clone()]), &hstack(&[&im, &re])]);
            let scale = linalg::spectral_norm(&emb).max(f64::MIN_POSITIVE);
            worst = worst.min(linalg::min_singular(&emb) / scale);
        }
        worst
    }

    fn check_rank(&self) -> Result<()> {
        if self.rank_margin() <= RANK_TOL {
            return Err(Error::Structural("[A − zI, E_d; C, F_d] loses row rank on the unit circle".into()));
        }
        Ok(())
    }

    /// Plant with inputs `[u; d; f]`.
    pub fn augmented(&self) -> StateSpaceModel {
        let (a, b, c, d) = (self.base.a(), self.base.b(), self.base.c(), self.base.d());
        StateSpaceModel::new(a.clone(), hstack(&[b, &self.e_d, &self.e_f]), c.clone(), hstack(&[d, &self.f_d, &self.f_f]))
            .expect("augmented realization is consistent by construction")
    }

    /// `N̂_d = (A − LC, E_d − LF_d, WC, WF_d)` for an observer with gains `(L, W)`.
    pub fn disturbance_map(&self, l: &Mat, w: &Mat) -> Result<StateSpaceModel> {
        let (a, c) = (self.base.a(), self.base.c());
        StateSpaceModel::new(a - l * c, &self.e_d - l * &self.f_d, w * c, w * &self.f_d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedFilter {
    pub l_d: Mat,
    pub w_d: Mat,
    pub x: Mat,
}

pub fn unified_filter(am: &AdditiveModel) -> Result<UnifiedFilter> {
    let (a, c) = (am.base.a(), am.base.c());
    let (n, m) = (am.base.states(), am.base.outputs());
    let q = &am.e_d * am.e_d.transpose();
    let r = &am.f_d * am.f_d.transpose();
    let s = &am.e_d * am.f_d.transpose();
    let x = if n == 0 {
        Mat::zeros(0, 0)
    } else {
        let sol = solve_dare(&a.transpose(), &c.transpose(), &q, &r, &s)
            .map_err(|e| Error::Structural(alloc::format!("unified filter Riccati failed: {e}")))?;
        sol.x
    };
    if n > 0 && linalg::sym_min_eig(&x) < -1e-9 * (1.0 + x.norm()) {
        bail!(Structural, "unified filter Riccati solution is not positive semidefinite");
    }
    let re = linalg::symmetrize(&(c * &x * c.transpose() + &r));
    let l_d = (a * &x * c.transpose() + &s) * inverse(&re)?;
    let w_d = linalg::sym_inv_sqrt(&re, 1e-12).map_err(|_| Error::Structural("C X Cᵀ + F_d F_dᵀ is singular".into()))?;
    if n > 0 && !is_schur(&(a - &l_d * c), 0.0)? {
        bail!(Structural, "A − L_d C is not Schur");
    }
    debug_assert_eq!(l_d.shape(), (n, m));
    Ok(UnifiedFilter { l_d, w_d, x })
}

/// `N̂_{d,0}`, co-inner by construction.
pub fn unified_map(am: &AdditiveModel, uf: &UnifiedFilter) -> Result<StateSpaceModel> {
    am.disturbance_map(&uf.l_d, &uf.w_d)
}

/// `R = (A − L_dC, (L_d − L)W⁻¹, −W_dC, W_dW⁻¹)`, taking `r₀` to `r̄₀`.
pub fn post_filter(base: &StateSpaceModel, l: &Mat, w: &Mat, l_d: &Mat, w_d: &Mat) -> Result<StateSpaceModel> {
    let (a, c) = (base.a(), base.c());
    let wi = inverse(w).map_err(|_| Error::Structural("observer weight W is singular".into()))?;
    let ak = a - l_d * c;
    if base.states() > 0 && !is_schur(&ak, 0.0)? {
        bail!(InvalidGain, "A − L_d C is not Schur");
    }
    StateSpaceModel::new(ak, (l_d - l) * &wi, -(w_d * c), w_d * &wi)
}

/// Observer residual generator `[u; y] → W(y − Cx̂ − Du)` for gains `(L, W)`; the state is `−x̂`.
pub fn residual_generator(base: &StateSpaceModel, l: &Mat, w: &Mat) -> Result<StateSpaceModel> {
    let (a, b, c, d) = (base.a(), base.b(), base.c(), base.d());
    StateSpaceModel::new(a - l * c, hstack(&[&-(b - l * d), &-l.clone()]), w * c, hstack(&[&-(w * d), w]))
}

pub fn residual(base: &StateSpaceModel, l: &Mat, w: &Mat, u: &SignalWindow, y: &SignalWindow) -> Result<SignalWindow> {
    let g = residual_generator(base, l, w)?;
    simulate(&g, &SignalWindow::stack(&[u, y])?, &DVector::zeros(base.states()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnifiedThreshold {
    /// Threshold on `‖r̄₀‖₂`.
    pub unified: f64,
    /// `‖N̂_d‖∞ δ_d`, the bound on `‖r₀‖₂` for the plain observer.
    pub conservative: f64,
    pub nd_norm: f64,
}

pub fn unified_threshold(am: &AdditiveModel, l: &Mat, w: &Mat) -> Result<UnifiedThreshold> {
    let nd = am.disturbance_map(l, w)?;
    let nd_norm = hinf_norm(&nd, 1e-10)?;
    Ok(UnifiedThreshold { unified: am.delta_d, conservative: nd_norm * am.delta_d, nd_norm })
}

/// `inf_Q ‖[−N̂₁ M̂₁] − Q[−N̂₂ M̂₂]‖∞`, solved as a directed gap between the
/// transposed kernels.
pub fn kgap_directed(rep1: &NormalizedRepresentation, rep2: &NormalizedRepresentation, tol: f64) -> Result<DirectedGap> {
    if rep1.plant.inputs() != rep2.plant.inputs() || rep1.plant.outputs() != rep2.plant.outputs() {
        bail!(InvalidArgument, "plants have different I/O dimensions");
    }
    let k1t = rep1.skr_system().transpose();
    let k2t = rep2.skr_system().transpose();
    let i2t = rep2.sir_system().transpose();
    directed_gap_inner(&k1t, &k2t, &i2t, tol)
}
