//! Stabilizing solutions of the discrete algebraic Riccati equation
//!
//! `X = AᵀXA − (AᵀXB + S)(R + BᵀXB)⁻¹(BᵀXA + Sᵀ) + Q`
//!
//! by structure-preserving doubling, with a plain fixed-point iteration as fallback.

use crate::error::{bail, Error, Result};
use crate::linalg::{self, eye, inverse, symmetrize, Mat};
use crate::lti::StateSpaceModel;

pub const MAX_ITER: usize = 10_000;
pub const STEP_TOL: f64 = 1e-12;

/// Stabilizing DARE solution with its gain `K = −(R + BᵀXB)⁻¹(BᵀXA + Sᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DareSolution {
    pub x: Mat,
    pub gain: Mat,
    pub residual: f64,
    /// `1 − ρ(A + BK)`.
    pub margin: f64,
}

fn riccati_map(a: &Mat, b: &Mat, q: &Mat, r: &Mat, s: &Mat, x: &Mat) -> Result<Mat> {
    let bxa = b.transpose() * x * a + s.transpose();
    let rb = r + b.transpose() * x * b;
    let k = inverse(&rb)? * &bxa;
    Ok(symmetrize(&(a.transpose() * x * a - bxa.transpose() * k + q)))
}

/// Norm of `F(X) − X`.
pub fn dare_residual(a: &Mat, b: &Mat, q: &Mat, r: &Mat, s: &Mat, x: &Mat) -> Result<f64> {
    Ok((riccati_map(a, b, q, r, s, x)? - x).norm())
}

fn gain_of(a: &Mat, b: &Mat, r: &Mat, s: &Mat, x: &Mat) -> Result<Mat> {
    let rb = r + b.transpose() * x * b;
    Ok(-(inverse(&rb)? * (b.transpose() * x * a + s.transpose())))
}

fn finish(a: &Mat, b: &Mat, q: &Mat, r: &Mat, s: &Mat, x: Mat) -> Result<DareSolution> {
    let gain = gain_of(a, b, r, s, &x)?;
    let rho = linalg::spectral_radius(&(a + b * &gain))?;
    let residual = dare_residual(a, b, q, r, s, &x)?;
    Ok(DareSolution { x, gain, residual, margin: 1.0 - rho })
}

fn acceptable(sol: &DareSolution) -> bool {
    sol.margin > 1e-9 && sol.residual <= 1e-10 * (1.0 + sol.x.norm()) && linalg::all_finite(&sol.x)
}

fn sda(a: &Mat, b: &Mat, q: &Mat, r: &Mat, s: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let ri = inverse(r)?;
    let mut ak = a - b * &ri * s.transpose();
    let mut gk = symmetrize(&(b * &ri * b.transpose()));
    let mut hk = symmetrize(&(q - s * &ri * s.transpose()));
    let i = eye(n);
    for it in 0..200 {
        let w = inverse(&(&i + &gk * &hk))?;
        let a1 = &ak * &w * &ak;
        let g1 = symmetrize(&(&gk + &ak * &w * &gk * ak.transpose()));
        let h1 = symmetrize(&(&hk + ak.transpose() * &hk * &w * &ak));
        let step = (&h1 - &hk).norm();
        ak = a1;
        gk = g1;
        hk = h1;
        if !linalg::all_finite(&hk) {
            break;
        }
        if step <= STEP_TOL * (1.0 + hk.norm()) {
            return Ok(hk);
        }
        if it > 0 && ak.norm() == 0.0 && step == 0.0 {
            return Ok(hk);
        }
    }
    Err(Error::Convergence { iterations: 200, residual: f64::NAN })
}

fn fixed_point(a: &Mat, b: &Mat, q: &Mat, r: &Mat, s: &Mat, x0: Mat) -> Result<Mat> {
    let mut x = x0;
    let mut step = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let next = riccati_map(a, b, q, r, s, &x)?;
        step = (&next - &x).norm();
        x = next;
        if !linalg::all_finite(&x) {
            break;
        }
        if step <= STEP_TOL * (1.0 + x.norm()) {
            return Ok(x);
        }
    }
    Err(Error::Convergence { iterations: MAX_ITER, residual: step })
}

/// General stabilizing DARE solve. `R` must be invertible; it need not be
/// positive definite (indefinite problems arise in spectral factorization).
pub fn solve_dare(a: &Mat, b: &Mat, q: &Mat, r: &Mat, s: &Mat) -> Result<DareSolution> {
    let n = a.nrows();
    let p = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (p, p) || s.shape() != (n, p) {
        bail!(DimensionMismatch, "DARE operands have inconsistent shapes");
    }
    if n == 0 {
        return Ok(DareSolution { x: Mat::zeros(0, 0), gain: Mat::zeros(p, 0), residual: 0.0, margin: 1.0 });
    }
    let mut last_residual = f64::NAN;
    if let Ok(x) = sda(a, b, q, r, s) {
        let mut sol = finish(a, b, q, r, s, x)?;
        if sol.margin > 1e-9 && !acceptable(&sol) {
            // polish: the map contracts near the stabilizing solution
            if let Ok(x) = fixed_point(a, b, q, r, s, sol.x.clone()) {
                sol = finish(a, b, q, r, s, x)?;
            }
        }
        if acceptable(&sol) {
            return Ok(sol);
        }
        last_residual = sol.residual;
    }
    for x0 in [q.clone(), Mat::zeros(n, n)] {
        if let Ok(x) = fixed_point(a, b, q, r, s, x0) {
            let sol = finish(a, b, q, r, s, x)?;
            if acceptable(&sol) {
                return Ok(sol);
            }
            last_residual = sol.residual;
        }
    }
    Err(Error::Convergence { iterations: MAX_ITER, residual: last_residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Filter,
    Control,
}

fn pbh_rank_ok(a: &Mat, b: &Mat) -> Result<bool> {
    // (A, B) stabilizable iff rank [A − λI, B] = n at every |λ| ≥ 1.
    let n = a.nrows();
    for lam in linalg::eigenvalues(a)? {
        if lam.norm() < 1.0 - 1e-9 {
            continue;
        }
        let mut m = linalg::to_complex(&linalg::hstack(&[a, b]));
        for i in 0..n {
            m[(i, i)] -= lam;
        }
        let sv = m.svd(false, false).singular_values;
        let smax = sv.max().max(1.0);
        let rank = sv.iter().filter(|&&v| v > 1e-10 * smax).count();
        if rank < n {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn stabilizable(a: &Mat, b: &Mat) -> Result<bool> {
    pbh_rank_ok(a, b)
}

pub fn detectable(a: &Mat, c: &Mat) -> Result<bool> {
    pbh_rank_ok(&a.transpose(), &c.transpose())
}

/// Filter side returns `P` of
/// `P = APAᵀ + BBᵀ − (BDᵀ + APCᵀ)(I + DDᵀ + CPCᵀ)⁻¹(BDᵀ + APCᵀ)ᵀ`,
/// control side returns `Q` of the dual equation.
pub fn dare_stabilizing(model: &StateSpaceModel, side: Side) -> Result<DareSolution> {
    let (a, b, c, d) = (model.a(), model.b(), model.c(), model.d());
    if !stabilizable(a, b)? {
        bail!(Structural, "(A, B) is not stabilizable");
    }
    if !detectable(a, c)? {
        bail!(Structural, "(C, A) is not detectable");
    }
    match side {
        Side::Filter => solve_dare(
            &a.transpose(),
            &c.transpose(),
            &(b * b.transpose()),
            &(eye(model.outputs()) + d * d.transpose()),
            &(b * d.transpose()),
        ),
        Side::Control => solve_dare(
            a,
            b,
            &(c.transpose() * c),
            &(eye(model.inputs()) + d.transpose() * d),
            &(c.transpose() * d),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> StateSpaceModel {
        StateSpaceModel::new(
            Mat::from_element(1, 1, a),
            Mat::from_element(1, 1, b),
            Mat::from_element(1, 1, c),
            Mat::from_element(1, 1, d),
        )
        .unwrap()
    }

    #[test]
    fn scalar_filter_riccati() {
        let sol = dare_stabilizing(&scalar(0.5, 1.0, 1.0, 0.0), Side::Filter).unwrap();
        // P² − 0.25P − 1 = 0
        let root = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        assert!((sol.x[(0, 0)] - root).abs() < 1e-12);
        assert!((sol.x[(0, 0)] - 1.1328).abs() < 1e-4);
    }

    #[test]
    fn zero_input_gives_zero_filter_solution() {
        let m = StateSpaceModel::new(
            Mat::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]),
            Mat::zeros(2, 1),
            Mat::from_row_slice(1, 2, &[1.0, 1.0]),
            Mat::zeros(1, 1),
        )
        .unwrap();
        let sol = dare_stabilizing(&m, Side::Filter).unwrap();
        assert!(sol.x.norm() < 1e-14);
    }

    #[test]
    fn unstable_plant_is_stabilized() {
        let m = scalar(2.0, 1.0, 1.0, 0.0);
        let sol = dare_stabilizing(&m, Side::Control).unwrap();
        assert!(sol.margin > 0.0);
        let fp = fixed_point(m.a(), m.b(), &Mat::from_element(1, 1, 1.0), &Mat::from_element(1, 1, 1.0), &Mat::zeros(1, 1), Mat::from_element(1, 1, 10.0)).unwrap();
        assert!((fp - &sol.x).norm() < 1e-8);
    }

    #[test]
    fn undetectable_is_structural() {
        let m = scalar(2.0, 1.0, 0.0, 0.0);
        assert!(matches!(dare_stabilizing(&m, Side::Control), Err(Error::Structural(_))));
    }
}
