//! Youla-parameterized controllers, loop simulation and the two closed-loop
//! detection schemes.

use alloc::vec;
use nalgebra::DVector;

use crate::error::{bail, Error, Result};
use crate::factorization::{normalized_gains, BezoutSet, NormalizedRepresentation};
use crate::linalg::{self, eye, inverse, CMat, Mat};
use crate::lti::{freq_response, hinf_norm, is_schur, simulate, FrequencyGrid, SignalWindow, StateSpaceModel};
use crate::projection::{ImageSubspace, ResidualDecomposition};
use crate::riccati::solve_dare;
use crate::thresholds::{scaled_threshold, ThresholdReport};

const OVERFLOW_GUARD: f64 = 1e30;

/// Controller `K = −(X₀−QN̂₀)⁻¹(Y₀+QM̂₀)` together with the pieces it was built from.
#[derive(Debug, Clone)]
pub struct ControllerRealization {
    pub q_param: StateSpaceModel,
    pub rep: NormalizedRepresentation,
    pub bezout: BezoutSet,
    /// States `[x̂; x_Q]`, input `y`, output `u_K`.
    pub realization: StateSpaceModel,
}

pub fn youla_controller(rep: &NormalizedRepresentation, bez: &BezoutSet, q: &StateSpaceModel) -> Result<ControllerRealization> {
    let plant = &rep.plant;
    let (p, m) = (plant.inputs(), plant.outputs());
    if q.inputs() != m || q.outputs() != p {
        bail!(DimensionMismatch, "Q must map {m} residual channels to {p} inputs");
    }
    if !q.is_stable()? {
        bail!(InvalidArgument, "Q is not stable");
    }
    let (a, b, c, d) = (plant.a(), plant.b(), plant.c(), plant.d());
    let (l, w, f, v) = (rep.l0(), rep.w0(), rep.f0(), rep.v0());
    let (aq, bq, cq, dq) = (q.a(), q.b(), q.c(), q.d());
    let (n, nq) = (plant.states(), q.states());

    // u_K = F x̂ − V (C_Q x_Q + D_Q W (y − C x̂ − D u_K))
    let e = eye(p) - v * dq * w * d;
    let ei = inverse(&e).map_err(|_| Error::IllPosed("controller algebraic loop is singular".into()))?;
    let cu = linalg::hstack(&[&(&ei * (f + v * dq * w * c)), &(-(&ei * v * cq))]);
    let du = -(&ei * v * dq * w);
    // r = W (y − C x̂ − D u_K)
    let cx = linalg::hstack(&[c, &Mat::zeros(m, nq)]);
    let cr = -(w * (&cx + d * &cu));
    let dr = w * (eye(m) - d * &du);

    let mut ak = Mat::zeros(n + nq, n + nq);
    ak.view_mut((0, 0), (n, n)).copy_from(&(a - l * c));
    ak.view_mut((n, n), (nq, nq)).copy_from(aq);
    let bl = b - l * d;
    let top = &bl * &cu;
    let mut ak_top = ak.view((0, 0), (n, n + nq)).clone_owned();
    ak_top += top;
    ak.view_mut((0, 0), (n, n + nq)).copy_from(&ak_top);
    let mut ak_bot = ak.view((n, 0), (nq, n + nq)).clone_owned();
    ak_bot += bq * &cr;
    ak.view_mut((n, 0), (nq, n + nq)).copy_from(&ak_bot);
    let bk = linalg::vstack(&[&(&bl * &du + l), &(bq * &dr)]);
    let realization = StateSpaceModel::new(ak, bk, cu, du)?;

    let ctrl = ControllerRealization { q_param: q.clone(), rep: rep.clone(), bezout: bez.clone(), realization };
    // (X₀ − QN̂₀) must stay invertible on the unit circle
    let vh = ctrl.v_hat0()?;
    for &t in FrequencyGrid::uniform(256).points() {
        let s = linalg::spectral_norm_c(&freq_response(&vh, t)?);
        let sm = min_singular_c(&freq_response(&vh, t)?);
        if sm <= 1e-10 * (1.0 + s) {
            bail!(IllPosed, "X₀ − QN̂₀ is singular near θ = {t}");
        }
    }
    Ok(ctrl)
}

fn min_singular_c(m: &CMat) -> f64 {
    m.clone().singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

impl ControllerRealization {
    fn m0(&self) -> &StateSpaceModel {
        &self.rep.sir.m
    }
    fn n0(&self) -> &StateSpaceModel {
        &self.rep.sir.n
    }
    fn mh0(&self) -> &StateSpaceModel {
        &self.rep.skr.m
    }
    fn nh0(&self) -> &StateSpaceModel {
        &self.rep.skr.n
    }

    /// `V̂₀ = X₀ − QN̂₀`.
    pub fn v_hat0(&self) -> Result<StateSpaceModel> {
        self.bezout.x.sub(&self.nh0().then(&self.q_param)?)
    }
    /// `Û₀ = −Y₀ − QM̂₀`.
    pub fn u_hat0(&self) -> Result<StateSpaceModel> {
        Ok(self.bezout.y.add(&self.mh0().then(&self.q_param)?)?.scaled(-1.0))
    }
    /// `U₀ = −Ŷ₀ − M₀Q`.
    pub fn u0(&self) -> Result<StateSpaceModel> {
        Ok(self.bezout.y_hat.add(&self.q_param.then(self.m0())?)?.scaled(-1.0))
    }
    /// `V₀ = X̂₀ − N₀Q`.
    pub fn v0(&self) -> Result<StateSpaceModel> {
        self.bezout.x_hat.sub(&self.q_param.then(self.n0())?)
    }
    /// `[U₀; V₀]`.
    pub fn uv0(&self) -> Result<StateSpaceModel> {
        self.u0()?.stack_outputs(&self.v0()?)
    }

    /// `[V̂₀ −Û₀; −N̂₀ M̂₀]`, mapping `[Δ_M; Δ_N]` to `[Δ₁; Δ₂]`.
    pub fn left_block(&self) -> Result<StateSpaceModel> {
        let top = self.v_hat0()?.concat_inputs(&self.u_hat0()?.scaled(-1.0))?;
        let bot = self.nh0().scaled(-1.0).concat_inputs(self.mh0())?;
        stack_rows(&top, &bot)
    }

    /// `[M₀ U₀; N₀ V₀]`, the inverse of [`Self::left_block`].
    pub fn right_block(&self) -> Result<StateSpaceModel> {
        let left = self.m0().stack_outputs(self.n0())?;
        left.concat_inputs(&self.uv0()?)
    }

    /// Max grid deviation of the extended Bezout product from identity.
    pub fn extended_bezout_deviation(&self, grid: &FrequencyGrid) -> Result<f64> {
        let l = self.left_block()?;
        let r = self.right_block()?;
        let mut worst: f64 = 0.0;
        for &t in grid.points() {
            let prod = freq_response(&r, t)? * freq_response(&l, t)?;
            worst = worst.max(linalg::frob_dev_from_identity(&prod));
        }
        Ok(worst)
    }

    /// Max grid deviation between the realization, the left form and the right form of `K`.
    pub fn parameterization_deviation(&self, grid: &FrequencyGrid) -> Result<f64> {
        let xq = self.v_hat0()?;
        let yq = self.bezout.y.add(&self.mh0().then(&self.q_param)?)?;
        let yh = self.bezout.y_hat.add(&self.q_param.then(self.m0())?)?;
        let xh = self.v0()?;
        let mut worst: f64 = 0.0;
        for &t in grid.points() {
            let k = freq_response(&self.realization, t)?;
            let left = -(inv_c(&freq_response(&xq, t)?)? * freq_response(&yq, t)?);
            let right = -(freq_response(&yh, t)? * inv_c(&freq_response(&xh, t)?)?);
            let scale = 1.0 + k.norm();
            worst = worst.max((&k - left).norm() / scale).max((&k - right).norm() / scale);
        }
        Ok(worst)
    }
}

fn inv_c(m: &CMat) -> Result<CMat> {
    m.clone().try_inverse().ok_or_else(|| Error::IllPosed("singular factor on the unit circle".into()))
}

/// `[top; bot]` for systems sharing an input.
fn stack_rows(top: &StateSpaceModel, bot: &StateSpaceModel) -> Result<StateSpaceModel> {
    top.stack_outputs(bot)
}

/// Loop `u = K y + v`, `y = G u + n` from zero initial states.
pub fn closed_loop_sim(
    plant: &StateSpaceModel,
    ctrl: &ControllerRealization,
    v: &SignalWindow,
    y_noise: Option<&SignalWindow>,
) -> Result<(SignalWindow, SignalWindow)> {
    loop_sim(plant, plant, i64::MAX, &ctrl.realization, v, y_noise)
}

/// Loop simulation where the plant switches from `before` to `after` at sample
/// `onset`; the plant state carries over, so both must have the same order.
pub fn loop_sim(
    before: &StateSpaceModel,
    after: &StateSpaceModel,
    onset: i64,
    k: &StateSpaceModel,
    v: &SignalWindow,
    y_noise: Option<&SignalWindow>,
) -> Result<(SignalWindow, SignalWindow)> {
    let (p, m) = (before.inputs(), before.outputs());
    if after.inputs() != p || after.outputs() != m || after.states() != before.states() {
        bail!(DimensionMismatch, "switched plants differ in shape");
    }
    if k.inputs() != m || k.outputs() != p || v.channels() != p {
        bail!(DimensionMismatch, "controller or reference does not fit the plant");
    }
    if let Some(nz) = y_noise {
        if nz.channels() != m {
            bail!(DimensionMismatch, "noise has {} channels, plant has {m} outputs", nz.channels());
        }
    }
    let solve = |g: &StateSpaceModel| -> Result<Mat> {
        inverse(&(eye(p) - k.d() * g.d())).map_err(|_| Error::IllPosed("I − D_K D is singular".into()))
    };
    let e_before = solve(before)?;
    let e_after = solve(after)?;
    let mut xp = DVector::zeros(before.states());
    let mut xk = DVector::zeros(k.states());
    let mut u_out = vec![0.0; v.len() * p];
    let mut y_out = vec![0.0; v.len() * m];
    for i in 0..v.len() {
        let t = v.start() + i as i64;
        let (g, ei) = if t >= onset { (after, &e_after) } else { (before, &e_before) };
        let nk = match y_noise.and_then(|nz| nz.at(t)) {
            Some(s) => DVector::from_column_slice(s),
            None => DVector::zeros(m),
        };
        let vk = DVector::from_column_slice(v.row(i));
        let u = ei * (k.c() * &xk + k.d() * (g.c() * &xp + &nk) + vk);
        let y = g.c() * &xp + g.d() * &u + nk;
        u_out[i * p..(i + 1) * p].copy_from_slice(u.as_slice());
        y_out[i * m..(i + 1) * m].copy_from_slice(y.as_slice());
        xp = g.a() * &xp + g.b() * &u;
        xk = k.a() * &xk + k.b() * &y;
        if xp.iter().chain(xk.iter()).any(|s| !(s.abs() <= OVERFLOW_GUARD)) {
            return Err(Error::NumericOverflow { index: t });
        }
    }
    Ok((SignalWindow::from_flat(v.start(), p, u_out)?, SignalWindow::from_flat(v.start(), m, y_out)?))
}

/// `R₀` with `V̂₀R₀` inner; identity when `V̂₀` is already inner.
pub fn inner_spectral_factor(vh: &StateSpaceModel) -> Result<StateSpaceModel> {
    let k = vh.inputs();
    let grid = FrequencyGrid::uniform(128);
    let mut dev: f64 = 0.0;
    for &t in grid.points() {
        let g = freq_response(vh, t)?;
        dev = dev.max(linalg::frob_dev_from_identity(&(g.adjoint() * g)));
    }
    if dev <= 1e-8 {
        return Ok(StateSpaceModel::identity(k));
    }
    let (a, b, c, d) = (vh.a(), vh.b(), vh.c(), vh.d());
    let sol = solve_dare(a, b, &(c.transpose() * c), &(d.transpose() * d), &(c.transpose() * d))
        .map_err(|e| Error::Numeric(alloc::format!("spectral factorization failed: {e}")))?;
    let wr = d.transpose() * d + b.transpose() * &sol.x * b;
    let wi = linalg::sym_inv_sqrt(&wr, 1e-300)?;
    let r0 = StateSpaceModel::new(a + b * &sol.gain, b * &wi, sol.gain.clone(), wi)?;
    let inner = r0.then(vh)?;
    for &t in grid.points() {
        let g = freq_response(&inner, t)?;
        let dev = linalg::frob_dev_from_identity(&(g.adjoint() * g));
        if dev > 1e-8 {
            bail!(Numeric, "spectral factor leaves an inner deviation of {dev:e}");
        }
    }
    Ok(r0)
}

fn threshold_factor(gamma: f64, b: f64) -> Result<(f64, f64)> {
    if !(b >= 0.0) || !(gamma >= 0.0) {
        bail!(InvalidArgument, "b and γ must be nonnegative");
    }
    let den = 1.0 - (1.0 + gamma * gamma) * b * b;
    if den <= 0.0 {
        bail!(ThresholdUndefined, "(1+γ²)b² = {} is not below one", 1.0 - den);
    }
    Ok((gamma * b / libm::sqrt(den), gamma * b / libm::sqrt(1.0 - b * b)))
}

/// Residual and threshold of one closed-loop detection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopDetection {
    pub decomposition: ResidualDecomposition,
    pub residual_norm: f64,
    pub j_th: f64,
    pub report: ThresholdReport,
}

fn detect(sub: &ImageSubspace, x: &SignalWindow, gamma: f64, b: f64) -> Result<ClosedLoopDetection> {
    let (factor, delta) = threshold_factor(gamma, b)?;
    let dec = sub.decompose(x)?;
    let corrected = (dec.total_norm_sq - dec.truncation_bound).max(0.0);
    let report = scaled_threshold(factor, delta, dec.data_norm_sq, corrected)?;
    Ok(ClosedLoopDetection { decomposition: dec, residual_norm: report.j, j_th: report.j_th, report })
}

/// Projection onto the image of `[M₀; N₀]V̂₀R₀` in the `[u; y]` space.
#[derive(Debug, Clone)]
pub struct SchemeA {
    pub subspace: ImageSubspace,
    pub r0: StateSpaceModel,
    /// `‖[U₀; V₀]‖∞`.
    pub gamma: f64,
}

pub fn scheme_a_setup(ctrl: &ControllerRealization) -> Result<SchemeA> {
    let vh = ctrl.v_hat0()?;
    let r0 = inner_spectral_factor(&vh)?;
    let ibar = r0.then(&vh)?.then(&ctrl.rep.sir_system())?;
    let subspace = ImageSubspace::from_inner(ibar, None)?;
    let gamma = hinf_norm(&ctrl.uv0()?, 1e-6)?;
    Ok(SchemeA { subspace, r0, gamma })
}

pub fn scheme_a_residual(setup: &SchemeA, u: &SignalWindow, y: &SignalWindow, b: f64) -> Result<ClosedLoopDetection> {
    let x = SignalWindow::stack(&[u, y])?;
    detect(&setup.subspace, &x, setup.gamma, b)
}

/// Normalized SIR of the stacked closed-loop model, acting on `[v̂; u; y]`, or
/// on `[v; u; y]` when the factor `V̂₀` is folded in.
#[derive(Debug, Clone)]
pub struct ClosedLoopSir {
    pub rep: NormalizedRepresentation,
    /// The stacked model `v̂ ↦ [u; y]` (or `v ↦ [u; y]` when folded).
    pub model: StateSpaceModel,
    pub folded: bool,
}

impl ClosedLoopSir {
    pub fn riccati_x(&self) -> &Mat {
        &self.rep.riccati_q
    }
    pub fn f_c(&self) -> &Mat {
        self.rep.f0()
    }
    pub fn v_c(&self) -> &Mat {
        self.rep.v0()
    }
    pub fn subspace(&self) -> Result<ImageSubspace> {
        ImageSubspace::from_representation(&self.rep)
    }

    /// Max grid deviation of `N₀,c = G_c⁰ M₀,c`.
    pub fn mapping_deviation(&self, grid: &FrequencyGrid) -> Result<f64> {
        let mc = &self.rep.sir.m;
        let nc = &self.rep.sir.n;
        let mut worst: f64 = 0.0;
        for &t in grid.points() {
            let lhs = freq_response(nc, t)?;
            let rhs = freq_response(&self.model, t)? * freq_response(mc, t)?;
            worst = worst.max((lhs - rhs).norm());
        }
        Ok(worst)
    }
}

/// `G_c⁰ = [M₀; N₀] = (A+BF₀, BV₀, [F₀; C+DF₀], [V₀; DV₀])` and its normalized SIR.
pub fn closed_loop_sir_build(rep: &NormalizedRepresentation) -> Result<ClosedLoopSir> {
    let model = rep.sir_system();
    Ok(ClosedLoopSir { rep: normalized_gains(&model)?, model, folded: false })
}

/// Variant consuming `v` directly through `[M₀; N₀]V̂₀`.
pub fn closed_loop_sir_build_folded(ctrl: &ControllerRealization) -> Result<ClosedLoopSir> {
    let model = ctrl.v_hat0()?.then(&ctrl.rep.sir_system())?;
    Ok(ClosedLoopSir { rep: normalized_gains(&model)?, model, folded: true })
}

/// Whether `V̂₀⁻¹` is stable, decided from the zeros of `V̂₀`.
pub fn v_hat_inverse_stable(ctrl: &ControllerRealization) -> Result<bool> {
    let vh = ctrl.v_hat0()?;
    match vh.inverse() {
        Ok(inv) => is_schur(inv.a(), 1e-9),
        Err(_) => Ok(false),
    }
}

/// Scheme B on the default path: folded when `V̂₀⁻¹` is unstable.
pub fn closed_loop_sir_for(ctrl: &ControllerRealization) -> Result<ClosedLoopSir> {
    if v_hat_inverse_stable(ctrl)? {
        closed_loop_sir_build(&ctrl.rep)
    } else {
        closed_loop_sir_build_folded(ctrl)
    }
}

/// The latent signal fed to scheme B: `V̂₀ v`, or `v` itself when folded.
pub fn scheme_b_latent(clsir: &ClosedLoopSir, ctrl: &ControllerRealization, v: &SignalWindow) -> Result<SignalWindow> {
    if clsir.folded {
        Ok(v.clone())
    } else {
        let vh = ctrl.v_hat0()?;
        simulate(&vh, v, &DVector::zeros(vh.states()))
    }
}

pub fn scheme_b_residual(
    sub: &ImageSubspace,
    vhat: &SignalWindow,
    u: &SignalWindow,
    y: &SignalWindow,
    b: f64,
    gamma: f64,
) -> Result<ClosedLoopDetection> {
    let x = SignalWindow::stack(&[vhat, u, y])?;
    detect(sub, &x, gamma, b)
}

/// Coprime perturbation `[Δ_M; Δ_N]` of the nominal SIR.
#[derive(Debug, Clone)]
pub struct CoprimePerturbation {
    pub dm: StateSpaceModel,
    pub dn: StateSpaceModel,
}

impl CoprimePerturbation {
    pub fn stacked(&self) -> Result<StateSpaceModel> {
        self.dm.stack_outputs(&self.dn)
    }

    /// Split a stacked `[Δ_M; Δ_N]` with `p` top rows.
    pub fn split(delta: &StateSpaceModel, p: usize) -> Result<Self> {
        let rows = delta.outputs();
        if p > rows {
            bail!(DimensionMismatch, "cannot split {rows} rows at {p}");
        }
        let top = delta.premul(&eye(rows).rows(0, p).clone_owned())?;
        let bot = delta.premul(&eye(rows).rows(p, rows - p).clone_owned())?;
        Ok(CoprimePerturbation { dm: top, dn: bot })
    }
}

/// `G = (N₀+Δ_N)(M₀+Δ_M)⁻¹`.
pub fn perturbed_plant(rep: &NormalizedRepresentation, pert: &CoprimePerturbation) -> Result<StateSpaceModel> {
    let m = rep.sir.m.add(&pert.dm)?;
    let n = rep.sir.n.add(&pert.dn)?;
    m.inverse()?.then(&n)
}

/// `[Δ₁; Δ₂] = [V̂₀ −Û₀; −N̂₀ M̂₀][Δ_M; Δ_N]`.
pub fn loop_uncertainty(ctrl: &ControllerRealization, pert: &CoprimePerturbation) -> Result<(StateSpaceModel, StateSpaceModel)> {
    let p = ctrl.rep.plant.inputs();
    let full = pert.stacked()?.then(&ctrl.left_block()?)?;
    let parts = CoprimePerturbation::split(&full, p)?;
    Ok((parts.dm, parts.dn))
}

/// `Δ₂(I+Δ₁)⁻¹`.
pub fn normalized_loop_uncertainty(ctrl: &ControllerRealization, pert: &CoprimePerturbation) -> Result<StateSpaceModel> {
    let (d1, d2) = loop_uncertainty(ctrl, pert)?;
    let p = d1.inputs();
    d1.add(&StateSpaceModel::identity(p))?.inverse()?.then(&d2)
}

/// `[M; N](I+Δ₁)⁻¹`, the closed-loop map from `v̂` to `[u; y]` under perturbation.
pub fn perturbed_loop_map(ctrl: &ControllerRealization, pert: &CoprimePerturbation) -> Result<StateSpaceModel> {
    let (d1, _) = loop_uncertainty(ctrl, pert)?;
    let p = d1.inputs();
    let mn = ctrl.rep.sir_system().add(&pert.stacked()?)?;
    d1.add(&StateSpaceModel::identity(p))?.inverse()?.then(&mn)
}

/// Perturbation of the re-normalized image, `[U₀; V₀]Δ₂(I+Δ₁)⁻¹V̂₀R₀`.
pub fn scheme_a_uncertainty(ctrl: &ControllerRealization, setup: &SchemeA, pert: &CoprimePerturbation) -> Result<StateSpaceModel> {
    setup
        .r0
        .then(&ctrl.v_hat0()?)?
        .then(&normalized_loop_uncertainty(ctrl, pert)?)?
        .then(&ctrl.uv0()?)
}

/// Coprime perturbation whose loop form `Δ_{I,c}` is the given stable system.
pub fn perturbation_from_loop(ctrl: &ControllerRealization, delta_ic: &StateSpaceModel) -> Result<CoprimePerturbation> {
    let full = delta_ic.then(&ctrl.right_block()?)?;
    CoprimePerturbation::split(&full, ctrl.rep.plant.inputs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::check_grid;
    use crate::lti::{eval_at, hinf_norm};
    use crate::random::{random_system_with_norm, trial_rng};
    use crate::testutil::{random_plant, s1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn controller(plant: &StateSpaceModel, q: StateSpaceModel) -> ControllerRealization {
        let rep = normalized_gains(plant).unwrap();
        let bez = rep.bezout().unwrap();
        youla_controller(&rep, &bez, &q).unwrap()
    }

    #[test]
    fn zero_parameter_is_observer_controller() {
        let ctrl = controller(&s1(), StateSpaceModel::zero(1, 1));
        let grid = check_grid();
        assert!(ctrl.parameterization_deviation(&grid).unwrap() < 1e-8);
        let x = &ctrl.bezout.x;
        let y = &ctrl.bezout.y;
        for &t in grid.points() {
            let k = freq_response(&ctrl.realization, t).unwrap();
            let want = -(inv_c(&freq_response(x, t).unwrap()).unwrap() * freq_response(y, t).unwrap());
            assert!((k - want).norm() < 1e-10);
        }
        assert!(ctrl.extended_bezout_deviation(&grid).unwrap() < 1e-8);
    }

    #[test]
    fn nominal_loop_is_internally_stable() {
        let ctrl = controller(&s1(), StateSpaceModel::zero(1, 1));
        let (g, k) = (&ctrl.rep.plant, &ctrl.realization);
        let e = inverse(&(eye(1) - k.d() * g.d())).unwrap();
        let n = g.states();
        let nk = k.states();
        let mut acl = Mat::zeros(n + nk, n + nk);
        acl.view_mut((0, 0), (n, n)).copy_from(&(g.a() + g.b() * &e * k.d() * g.c()));
        acl.view_mut((0, n), (n, nk)).copy_from(&(g.b() * &e * k.c()));
        let ey = eye(1) + g.d() * &e * k.d();
        acl.view_mut((n, 0), (nk, n)).copy_from(&(k.b() * &ey * g.c()));
        acl.view_mut((n, n), (nk, nk)).copy_from(&(k.a() + k.b() * g.d() * &e * k.c()));
        assert!(is_schur(&acl, 1e-6).unwrap());
    }

    #[test]
    fn random_parameter_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let g = random_plant(&mut rng, 3, 2, 2);
            let q = random_system_with_norm(&mut rng, 2, 2, 0.5).unwrap();
            let ctrl = controller(&g, q);
            let grid = check_grid();
            assert!(ctrl.parameterization_deviation(&grid).unwrap() < 1e-8);
            assert!(ctrl.extended_bezout_deviation(&grid).unwrap() < 1e-8);
            // nominal closed loop: [u; y] = [M₀; N₀]V̂₀ v
            let cl = ctrl.v_hat0().unwrap().then(&ctrl.rep.sir_system()).unwrap();
            let (gg, k) = (&ctrl.rep.plant, &ctrl.realization);
            for &t in grid.points().iter().step_by(16) {
                let gv = freq_response(gg, t).unwrap();
                let kv = freq_response(k, t).unwrap();
                let s = inv_c(&(CMat::identity(2, 2) - &kv * &gv)).unwrap();
                let mut want = CMat::zeros(4, 2);
                want.view_mut((0, 0), (2, 2)).copy_from(&s);
                want.view_mut((2, 0), (2, 2)).copy_from(&(&gv * &s));
                let got = freq_response(&cl, t).unwrap();
                assert!((got - want).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn loop_sim_zero_and_step() {
        let ctrl = controller(&s1(), StateSpaceModel::zero(1, 1));
        let v = SignalWindow::zeros(0, 1, 50);
        let (u, y) = closed_loop_sim(&ctrl.rep.plant, &ctrl, &v, None).unwrap();
        assert_eq!(u.max_abs() + y.max_abs(), 0.0);
        let v = SignalWindow::from_flat(0, 1, vec![1.0; 400]).unwrap();
        let (u, y) = closed_loop_sim(&ctrl.rep.plant, &ctrl, &v, None).unwrap();
        let cl = ctrl.v_hat0().unwrap().then(&ctrl.rep.sir_system()).unwrap();
        let dc = eval_at(&cl, nalgebra::Complex::new(1.0, 0.0)).unwrap();
        assert!((u.row(399)[0] - dc[(0, 0)].re).abs() < 1e-9);
        assert!((y.row(399)[0] - dc[(1, 0)].re).abs() < 1e-9);
    }

    #[test]
    fn spectral_factor_makes_inner() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_plant(&mut rng, 2, 1, 1);
        let q = random_system_with_norm(&mut rng, 1, 1, 0.3).unwrap();
        let ctrl = controller(&g, q);
        let vh = ctrl.v_hat0().unwrap();
        let r0 = inner_spectral_factor(&vh).unwrap();
        assert!(r0.is_stable().unwrap());
        let inner = r0.then(&vh).unwrap();
        for &t in check_grid().points() {
            let v = freq_response(&inner, t).unwrap();
            assert!(linalg::frob_dev_from_identity(&(v.adjoint() * v)) < 1e-8);
        }
    }

    #[test]
    fn closed_loop_sir_invariants() {
        for g in [s1(), StateSpaceModel::zero(1, 1)] {
            let rep = normalized_gains(&g).unwrap();
            let cl = closed_loop_sir_build(&rep).unwrap();
            let grid = check_grid();
            let (_, di) = cl.rep.normalization_deviation(&grid).unwrap();
            assert!(di < 1e-8);
            assert!(cl.mapping_deviation(&grid).unwrap() < 1e-8);
        }
    }

    #[test]
    fn nominal_schemes_have_negligible_residual() {
        let ctrl = controller(&s1(), StateSpaceModel::zero(1, 1));
        let mut rng = trial_rng(3, 0);
        let mut v = crate::random::uniform_mat(&mut rng, 120, 1).as_slice().to_vec();
        v.extend(core::iter::repeat_n(0.0, 80));
        let v = SignalWindow::from_flat(0, 1, v).unwrap();
        let (u, y) = closed_loop_sim(&ctrl.rep.plant, &ctrl, &v, None).unwrap();
        let a = scheme_a_setup(&ctrl).unwrap();
        let ra = scheme_a_residual(&a, &u, &y, 0.05).unwrap();
        assert!(ra.decomposition.total_norm_sq <= 1e-10 * ra.decomposition.data_norm_sq + ra.decomposition.truncation_bound);
        assert!(ra.j_th > 0.0);
        let cl = closed_loop_sir_for(&ctrl).unwrap();
        let vh = scheme_b_latent(&cl, &ctrl, &v).unwrap();
        let rb = scheme_b_residual(&cl.subspace().unwrap(), &vh, &u, &y, 0.05, a.gamma).unwrap();
        assert!(rb.decomposition.total_norm_sq <= 1e-10 * rb.decomposition.data_norm_sq + rb.decomposition.truncation_bound);
        let r0 = scheme_b_residual(&cl.subspace().unwrap(), &vh, &u, &y, 0.0, a.gamma).unwrap();
        assert_eq!(r0.j_th, 0.0);
        assert!(matches!(scheme_a_residual(&a, &u, &y, 0.99), Err(Error::ThresholdUndefined(_))));
    }

    #[test]
    fn loop_uncertainty_bound() {
        let ctrl = controller(&s1(), StateSpaceModel::zero(1, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b = 0.3;
        for _ in 0..5 {
            let dic = random_system_with_norm(&mut rng, 2, 1, b).unwrap();
            let pert = perturbation_from_loop(&ctrl, &dic).unwrap();
            let (d1, d2) = loop_uncertainty(&ctrl, &pert).unwrap();
            let back = d1.stack_outputs(&d2).unwrap();
            assert!((hinf_norm(&back, 1e-9).unwrap() - b).abs() < 1e-6);
            let g = hinf_norm(&normalized_loop_uncertainty(&ctrl, &pert).unwrap(), 1e-9).unwrap();
            assert!(g <= b / (1.0 - b * b).sqrt() + 1e-6);
        }
    }
}
