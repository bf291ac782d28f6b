//! Coprime factorizations, Bezout complements and the normalized SKR/SIR pair.

use crate::error::{bail, Error, Result};
use crate::linalg::{self, eye, hstack, inverse, vstack, CMat, Mat, EIG_FLOOR};
use crate::lti::{freq_response, is_schur, FrequencyGrid, StateSpaceModel, CHECK_GRID};
use crate::riccati::{dare_stabilizing, Side};


#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSide {
    Left,
    Right,
}

/// Left pair `(M̂, N̂)` with gains `(L, W)` or right pair `(M, N)` with `(F, V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoprimeFactorization {
    pub side: FactorSide,
    /// `M̂` or `M`.
    pub m: StateSpaceModel,
    /// `N̂` or `N`.
    pub n: StateSpaceModel,
    /// `L` (n×m) or `F` (p×n).
    pub gain: Mat,
    /// `W` or `V`.
    pub weight: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorGains {
    Left { l: Mat, w: Mat },
    Right { f: Mat, v: Mat },
}

fn check_probe_identity(model: &StateSpaceModel, cf: &CoprimeFactorization) -> Result<()> {
    for theta in linalg::probe_angles(16) {
        let Ok(g) = freq_response(model, theta) else { continue };
        let mm = freq_response(&cf.m, theta)?;
        let nn = freq_response(&cf.n, theta)?;
        let Some(mi) = mm.try_inverse() else { continue };
        let prod = match cf.side {
            FactorSide::Left => mi * nn,
            FactorSide::Right => nn * mi,
        };
        let dev = (prod - &g).norm();
        if dev > 1e-8 * (1.0 + g.norm()) {
            bail!(Numeric, "factorization identity off by {dev:e} at θ = {theta}");
        }
    }
    Ok(())
}

pub fn make_coprime(model: &StateSpaceModel, gains: FactorGains) -> Result<CoprimeFactorization> {
    let (a, b, c, d) = (model.a(), model.b(), model.c(), model.d());
    let cf = match gains {
        FactorGains::Left { l, w } => {
            if l.shape() != (model.states(), model.outputs()) || w.shape() != (model.outputs(), model.outputs()) {
                bail!(DimensionMismatch, "left gains have the wrong shape");
            }
            let ak = a - &l * c;
            if !is_schur(&ak, 0.0)? {
                bail!(InvalidGain, "A − LC is not Schur");
            }
            if inverse(&w).is_err() {
                bail!(InvalidGain, "W is singular");
            }
            CoprimeFactorization {
                side: FactorSide::Left,
                m: StateSpaceModel::new(ak.clone(), -l.clone(), &w * c, w.clone())?,
                n: StateSpaceModel::new(ak, b - &l * d, &w * c, &w * d)?,
                gain: l,
                weight: w,
            }
        }
        FactorGains::Right { f, v } => {
            if f.shape() != (model.inputs(), model.states()) || v.shape() != (model.inputs(), model.inputs()) {
                bail!(DimensionMismatch, "right gains have the wrong shape");
            }
            let af = a + b * &f;
            if !is_schur(&af, 0.0)? {
                bail!(InvalidGain, "A + BF is not Schur");
            }
            if inverse(&v).is_err() {
                bail!(InvalidGain, "V is singular");
            }
            CoprimeFactorization {
                side: FactorSide::Right,
                m: StateSpaceModel::new(af.clone(), b * &v, f.clone(), v.clone())?,
                n: StateSpaceModel::new(af, b * &v, c + d * &f, d * &v)?,
                gain: f,
                weight: v,
            }
        }
    };
    check_probe_identity(model, &cf)?;
    Ok(cf)
}

/// Complements `(X̂, Ŷ)` and `(X, Y)` of the double Bezout identity.
#[derive(Debug, Clone, PartialEq)]
pub struct BezoutSet {
    pub x_hat: StateSpaceModel,
    pub y_hat: StateSpaceModel,
    pub x: StateSpaceModel,
    pub y: StateSpaceModel,
}

/// `X̂ = (A+BF, LW⁻¹, C+DF, W⁻¹)`, `Ŷ = (A+BF, −LW⁻¹, F, 0)`,
/// `X = (A−LC, −(B−LD), V⁻¹F, V⁻¹)`, `Y = (A−LC, −L, V⁻¹F, 0)`.
pub fn bezout_complements(model: &StateSpaceModel, f: &Mat, l: &Mat, v: &Mat, w: &Mat) -> Result<BezoutSet> {
    let (a, b, c, d) = (model.a(), model.b(), model.c(), model.d());
    let wi = inverse(w).map_err(|_| Error::InvalidArgument("W is singular".into()))?;
    let vi = inverse(v).map_err(|_| Error::InvalidArgument("V is singular".into()))?;
    let af = a + b * f;
    let al = a - l * c;
    let (p, m) = (model.inputs(), model.outputs());
    Ok(BezoutSet {
        x_hat: StateSpaceModel::new(af.clone(), l * &wi, c + d * f, wi.clone())?,
        y_hat: StateSpaceModel::new(af, -(l * &wi), f.clone(), Mat::zeros(p, m))?,
        x: StateSpaceModel::new(al.clone(), -(b - l * d), &vi * f, vi.clone())?,
        y: StateSpaceModel::new(al, -l.clone(), &vi * f, Mat::zeros(p, m))?,
    })
}

fn block2(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> CMat {
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    let mut out = CMat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}

/// Left and right Bezout blocks at one angle:
/// `[X Y; −N̂ M̂]` and `[M −Ŷ; N X̂]`.
fn bezout_blocks(set: &BezoutSet, left: &CoprimeFactorization, right: &CoprimeFactorization, theta: f64) -> Result<(CMat, CMat)> {
    let x = freq_response(&set.x, theta)?;
    let y = freq_response(&set.y, theta)?;
    let xh = freq_response(&set.x_hat, theta)?;
    let yh = freq_response(&set.y_hat, theta)?;
    let mh = freq_response(&left.m, theta)?;
    let nh = freq_response(&left.n, theta)?;
    let mm = freq_response(&right.m, theta)?;
    let nn = freq_response(&right.n, theta)?;
    let lhs = block2(&x, &y, &(-nh), &mh);
    let rhs = block2(&mm, &(-yh), &nn, &xh);
    Ok((lhs, rhs))
}

/// Max over the grid of `‖[X Y; −N̂ M̂][M −Ŷ; N X̂] − I‖_F`.
pub fn verify_bezout(set: &BezoutSet, left: &CoprimeFactorization, right: &CoprimeFactorization, grid: &FrequencyGrid) -> Result<f64> {
    if left.side != FactorSide::Left || right.side != FactorSide::Right {
        bail!(InvalidArgument, "verify_bezout takes a left then a right factorization");
    }
    let mut worst: f64 = 0.0;
    for &t in grid.points() {
        let (l, r) = bezout_blocks(set, left, right, t)?;
        worst = worst.max(linalg::frob_dev_from_identity(&(l * r)));
    }
    Ok(worst)
}

/// The same check with the factors multiplied in the reverse order.
pub fn verify_bezout_reversed(set: &BezoutSet, left: &CoprimeFactorization, right: &CoprimeFactorization, grid: &FrequencyGrid) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in grid.points() {
        let (l, r) = bezout_blocks(set, left, right, t)?;
        worst = worst.max(linalg::frob_dev_from_identity(&(r * l)));
    }
    Ok(worst)
}

/// Normalized SKR `K_G = [−N̂₀ M̂₀]` and SIR `I_G = [M₀; N₀]` of a plant.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRepresentation {
    pub plant: StateSpaceModel,
    pub skr: CoprimeFactorization,
    pub sir: CoprimeFactorization,
    pub riccati_p: Mat,
    pub riccati_q: Mat,
}

impl NormalizedRepresentation {
    pub fn l0(&self) -> &Mat {
        &self.skr.gain
    }
    pub fn w0(&self) -> &Mat {
        &self.skr.weight
    }
    pub fn f0(&self) -> &Mat {
        &self.sir.gain
    }
    pub fn v0(&self) -> &Mat {
        &self.sir.weight
    }

    /// `I_G = (A+BF₀, BV₀, [F₀; C+DF₀], [V₀; DV₀])`, mapping `v` to `[u; y]`.
    pub fn sir_system(&self) -> StateSpaceModel {
        let (a, b, c, d) = (self.plant.a(), self.plant.b(), self.plant.c(), self.plant.d());
        let (f, v) = (self.f0(), self.v0());
        StateSpaceModel::new(
            a + b * f,
            b * v,
            vstack(&[f, &(c + d * f)]),
            vstack(&[v, &(d * v)]),
        )
        .expect("SIR realization is consistent by construction")
    }

    /// `K_G = (A−L₀C, [−(B−L₀D) −L₀], W₀C, [−W₀D W₀])`, mapping `[u; y]` to `r₀`.
    pub fn skr_system(&self) -> StateSpaceModel {
        let (a, b, c, d) = (self.plant.a(), self.plant.b(), self.plant.c(), self.plant.d());
        let (l, w) = (self.l0(), self.w0());
        StateSpaceModel::new(
            a - l * c,
            hstack(&[&(-(b - l * d)), &(-l.clone())]),
            w * c,
            hstack(&[&(-(w * d)), w]),
        )
        .expect("SKR realization is consistent by construction")
    }

    pub fn bezout(&self) -> Result<BezoutSet> {
        bezout_complements(&self.plant, self.f0(), self.l0(), self.v0(), self.w0())
    }

    /// Max grid deviations of `K_G K_G∼ = I` and `I_G∼ I_G = I`.
    pub fn normalization_deviation(&self, grid: &FrequencyGrid) -> Result<(f64, f64)> {
        let k = self.skr_system();
        let i = self.sir_system();
        let (mut dk, mut di): (f64, f64) = (0.0, 0.0);
        for &t in grid.points() {
            let kv = freq_response(&k, t)?;
            let iv = freq_response(&i, t)?;
            dk = dk.max(linalg::frob_dev_from_identity(&(&kv * kv.adjoint())));
            di = di.max(linalg::frob_dev_from_identity(&(iv.adjoint() * &iv)));
        }
        Ok((dk, di))
    }

    /// Max grid deviation of `K_G∼K_G + I_G I_G∼ = I`.
    pub fn complement_deviation(&self, grid: &FrequencyGrid) -> Result<f64> {
        let k = self.skr_system();
        let i = self.sir_system();
        let mut worst: f64 = 0.0;
        for &t in grid.points() {
            let kv = freq_response(&k, t)?;
            let iv = freq_response(&i, t)?;
            worst = worst.max(linalg::frob_dev_from_identity(&(kv.adjoint() * &kv + &iv * iv.adjoint())));
        }
        Ok(worst)
    }

    /// Residuals of the two normalization conditions on the gains.
    pub fn gain_normalization_residual(&self) -> (f64, f64) {
        let (b, c, d) = (self.plant.b(), self.plant.c(), self.plant.d());
        let (p, m) = (self.plant.inputs(), self.plant.outputs());
        let p_mat = &self.riccati_p;
        let q_mat = &self.riccati_q;
        let w = self.w0();
        let v = self.v0();
        let rw = w * (eye(m) + d * d.transpose() + c * p_mat * c.transpose()) * w.transpose() - eye(m);
        let rv = v.transpose() * (eye(p) + d.transpose() * d + b.transpose() * q_mat * b) * v - eye(p);
        (rw.norm(), rv.norm())
    }
}

/// Normalized gains from the two stabilizing Riccati solutions, with the free
/// orthogonal factors fixed to identity.
pub fn normalized_gains(model: &StateSpaceModel) -> Result<NormalizedRepresentation> {
    let (a, b, c, d) = (model.a(), model.b(), model.c(), model.d());
    let (p, m) = (model.inputs(), model.outputs());
    let filt = dare_stabilizing(model, Side::Filter)?;
    let ctrl = dare_stabilizing(model, Side::Control)?;
    let pm = filt.x;
    let qm = ctrl.x;
    let re = eye(m) + d * d.transpose() + c * &pm * c.transpose();
    let l0 = (b * d.transpose() + a * &pm * c.transpose()) * inverse(&re)?;
    let w0 = linalg::sym_inv_sqrt(&re, EIG_FLOOR)?;
    let rf = eye(p) + d.transpose() * d + b.transpose() * &qm * b;
    let f0 = -(inverse(&rf)? * (d.transpose() * c + b.transpose() * &qm * a));
    let v0 = linalg::sym_inv_sqrt(&rf, EIG_FLOOR)?;
    let skr = make_coprime(model, FactorGains::Left { l: l0, w: w0 })?;
    let sir = make_coprime(model, FactorGains::Right { f: f0, v: v0 })?;
    Ok(NormalizedRepresentation { plant: model.clone(), skr, sir, riccati_p: pm, riccati_q: qm })
}

/// Grid used by the identity checks.
pub fn check_grid() -> FrequencyGrid {
    FrequencyGrid::uniform(CHECK_GRID)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_plant, s1};
    use nalgebra::Complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_normalized_gains() {
        let rep = normalized_gains(&s1()).unwrap();
        let p = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        assert!((rep.riccati_p[(0, 0)] - p).abs() < 1e-12);
        assert!((rep.l0()[(0, 0)] - 0.5 * p / (1.0 + p)).abs() < 1e-12);
        assert!((rep.w0()[(0, 0)] - 1.0 / (1.0 + p).sqrt()).abs() < 1e-12);
        assert!((rep.l0()[(0, 0)] - 0.2656).abs() < 1e-4);
        assert!((rep.w0()[(0, 0)] - 0.6847).abs() < 1e-4);
    }

    #[test]
    fn zero_input_plant_has_trivial_filter() {
        let g = StateSpaceModel::new(
            Mat::from_element(1, 1, 0.4),
            Mat::zeros(1, 1),
            Mat::from_element(1, 1, 1.0),
            Mat::from_element(1, 1, 0.5),
        )
        .unwrap();
        let rep = normalized_gains(&g).unwrap();
        assert!(rep.riccati_p.norm() < 1e-14);
        assert!(rep.l0().norm() < 1e-14);
        assert!((rep.w0()[(0, 0)] - 1.0 / 1.25f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn deadbeat_left_factor_of_s1() {
        let cf = make_coprime(
            &s1(),
            FactorGains::Left { l: Mat::from_element(1, 1, 0.5), w: Mat::from_element(1, 1, 1.0) },
        )
        .unwrap();
        assert_eq!(cf.m.a()[(0, 0)], 0.0);
        for t in [0.3, 1.7, 3.0] {
            let z = Complex::new(libm::cos(t), libm::sin(t));
            let v = freq_response(&cf.m, t).unwrap()[(0, 0)];
            assert!((v - (Complex::new(1.0, 0.0) - z.inv() * 0.5)).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_plant_left_factor_is_identity() {
        let g = StateSpaceModel::new(Mat::from_element(1, 1, 0.3), Mat::zeros(1, 1), Mat::zeros(1, 1), Mat::zeros(1, 1)).unwrap();
        let cf = make_coprime(&g, FactorGains::Left { l: Mat::zeros(1, 1), w: eye(1) }).unwrap();
        for t in [0.0, 1.0] {
            assert!((freq_response(&cf.m, t).unwrap()[(0, 0)] - Complex::new(1.0, 0.0)).norm() < 1e-15);
            assert!(freq_response(&cf.n, t).unwrap()[(0, 0)].norm() < 1e-15);
        }
        let right = make_coprime(&g, FactorGains::Right { f: Mat::zeros(1, 1), v: eye(1) }).unwrap();
        let set = bezout_complements(&g, &Mat::zeros(1, 1), &Mat::zeros(1, 1), &eye(1), &eye(1)).unwrap();
        assert!(verify_bezout(&set, &cf, &right, &FrequencyGrid::uniform(64)).unwrap() < 1e-15);
    }

    #[test]
    fn non_schur_gain_is_rejected() {
        let r = make_coprime(&s1(), FactorGains::Left { l: Mat::from_element(1, 1, -1.0), w: eye(1) });
        assert!(matches!(r, Err(Error::InvalidGain(_))));
    }

    #[test]
    fn bezout_on_s1_and_corruption() {
        let rep = normalized_gains(&s1()).unwrap();
        let set = rep.bezout().unwrap();
        let grid = check_grid();
        assert!(verify_bezout(&set, &rep.skr, &rep.sir, &grid).unwrap() < 1e-8);
        assert!(verify_bezout_reversed(&set, &rep.skr, &rep.sir, &grid).unwrap() < 1e-8);
        let (l, r) = bezout_blocks(&set, &rep.skr, &rep.sir, 0.0).unwrap();
        assert!(linalg::frob_dev_from_identity(&(l * r)) < 1e-8);
        let bad = BezoutSet { y_hat: set.y_hat.scaled(2.0), ..set };
        assert!(verify_bezout(&bad, &rep.skr, &rep.sir, &grid).unwrap() > 0.1);
    }

    #[test]
    fn printed_complements_fail_when_weights_are_not_identity() {
        // (A+BF, L, C+DF, W⁻¹) and (A−LC, −(B−LD), F, V⁻¹) as printed
        let rep = normalized_gains(&s1()).unwrap();
        let g = &rep.plant;
        let (a, b, c, d) = (g.a(), g.b(), g.c(), g.d());
        let (f, l, v, w) = (rep.f0(), rep.l0(), rep.v0(), rep.w0());
        let set = rep.bezout().unwrap();
        let printed = BezoutSet {
            x_hat: StateSpaceModel::new(a + b * f, l.clone(), c + d * f, inverse(w).unwrap()).unwrap(),
            x: StateSpaceModel::new(a - l * c, -(b - l * d), f.clone(), inverse(v).unwrap()).unwrap(),
            ..set
        };
        assert!(verify_bezout(&printed, &rep.skr, &rep.sir, &check_grid()).unwrap() > 1e-3);
    }

    #[test]
    fn random_plants_satisfy_all_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = check_grid();
        for n in 1..=4 {
            let g = random_plant(&mut rng, n, 2, 1 + n % 2);
            let rep = normalized_gains(&g).unwrap();
            let set = rep.bezout().unwrap();
            assert!(verify_bezout(&set, &rep.skr, &rep.sir, &grid).unwrap() < 1e-8);
            assert!(verify_bezout_reversed(&set, &rep.skr, &rep.sir, &grid).unwrap() < 1e-8);
            let (dk, di) = rep.normalization_deviation(&grid).unwrap();
            assert!(dk < 1e-8 && di < 1e-8, "{dk} {di}");
            assert!(rep.complement_deviation(&grid).unwrap() < 1e-8);
            let (rw, rv) = rep.gain_normalization_residual();
            assert!(rw < 1e-10 && rv < 1e-10);
        }
    }
}
