//! Finite-horizon I/O model `y_s = Γ_s L_p z_p + H_{u,s} u_s` and the parity residual.
//!
//! Stacked vectors run oldest sample first; `z_p = [u_p; y_p]`.

use alloc::vec::Vec;
use nalgebra::DVector;
use rand::Rng;

use crate::error::{bail, Error, Result};
use crate::linalg::{self, eye, hstack, inverse, vstack, Mat};
use crate::lti::{is_schur, SignalWindow, StateSpaceModel};
use crate::random::uniform_mat;
use crate::thresholds::{adaptive_threshold, ThresholdReport};

const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IOKernelModel {
    pub s: usize,
    pub s_p: usize,
    pub inputs: usize,
    pub outputs: usize,
    /// `Γ_s` and `L_p` when built from a state-space model.
    pub gamma_s: Option<Mat>,
    pub l_p: Option<Mat>,
    /// `Γ_s L_p`.
    pub theta_x: Mat,
    pub h_us: Mat,
    pub sigma: Mat,
    pub sigma_inv_sqrt: Mat,
    pub k_io: Mat,
    pub sigma_hat: Mat,
    pub i_io: Mat,
    /// `‖A_K^{s_p}‖`, how stale `L_p z_p` is as a state estimate.
    pub staleness: f64,
}

impl IOKernelModel {
    pub fn past_dim(&self) -> usize {
        self.s_p * (self.inputs + self.outputs)
    }
    pub fn us_dim(&self) -> usize {
        (self.s + 1) * self.inputs
    }
    pub fn ys_dim(&self) -> usize {
        (self.s + 1) * self.outputs
    }
    pub fn stacked_dim(&self) -> usize {
        self.past_dim() + self.us_dim() + self.ys_dim()
    }

    /// `[Γ_s L_p, H_{u,s}]`.
    pub fn combined(&self) -> Mat {
        hstack(&[&self.theta_x, &self.h_us])
    }

    fn from_parts(s: usize, s_p: usize, p: usize, m: usize, theta_x: Mat, h_us: Mat, gamma_s: Option<Mat>, l_p: Option<Mat>, staleness: f64) -> Result<Self> {
        let ny = (s + 1) * m;
        let kbar = hstack(&[&-theta_x.clone(), &-h_us.clone(), &eye(ny)]);
        let sigma = linalg::symmetrize(&(&kbar * kbar.transpose()));
        let sigma_inv_sqrt = linalg::sym_inv_sqrt(&sigma, SIGMA_FLOOR)?;
        let k_io = &sigma_inv_sqrt * &kbar;
        let nz = theta_x.ncols();
        let nu = h_us.ncols();
        let top = hstack(&[&eye(nz), &Mat::zeros(nz, nu)]);
        let mid = hstack(&[&Mat::zeros(nu, nz), &eye(nu)]);
        let ibar = vstack(&[&top, &mid, &hstack(&[&theta_x, &h_us])]);
        let sigma_hat = linalg::symmetrize(&(ibar.transpose() * &ibar));
        let i_io = &ibar * linalg::sym_inv_sqrt(&sigma_hat, SIGMA_FLOOR)?;
        Ok(IOKernelModel { s, s_p, inputs: p, outputs: m, gamma_s, l_p, theta_x, h_us, sigma, sigma_inv_sqrt, k_io, sigma_hat, i_io, staleness })
    }

    /// Max entry of `K I`, and deviations of `K Kᵀ` and `IᵀI` from identity.
    pub fn normalization_residuals(&self) -> (f64, f64, f64) {
        let ki = (&self.k_io * &self.i_io).amax();
        let kk = (&self.k_io * self.k_io.transpose() - eye(self.ys_dim())).amax();
        let ii = (self.i_io.transpose() * &self.i_io - eye(self.i_io.ncols())).amax();
        (ki, kk, ii)
    }
}

pub fn build_io_model(model: &StateSpaceModel, k: &Mat, s: usize, s_p: usize) -> Result<IOKernelModel> {
    if s < 1 || s_p < 1 {
        bail!(InvalidArgument, "horizons must be at least one");
    }
    let (a, b, c, d) = (model.a(), model.b(), model.c(), model.d());
    let (n, p, m) = (model.states(), model.inputs(), model.outputs());
    if k.shape() != (n, m) {
        bail!(DimensionMismatch, "observer gain must be {n}×{m}");
    }
    let ak = a - k * c;
    if n > 0 && !is_schur(&ak, 0.0)? {
        return Err(Error::InvalidGain("A − KC is not Schur".into()));
    }
    let bk = b - k * d;
    let mut gamma = Mat::zeros((s + 1) * m, n);
    let mut pw = eye(n);
    for i in 0..=s {
        gamma.view_mut((i * m, 0), (m, n)).copy_from(&(c * &pw));
        pw = &pw * a;
    }
    let mut h = Mat::zeros((s + 1) * m, (s + 1) * p);
    let mut markov = Vec::with_capacity(s + 1);
    markov.push(d.clone());
    let mut pw = eye(n);
    for _ in 1..=s {
        markov.push(c * &pw * b);
        pw = &pw * a;
    }
    for i in 0..=s {
        for j in 0..=i {
            h.view_mut((i * m, j * p), (m, p)).copy_from(&markov[i - j]);
        }
    }
    // L_p = [A_K^{s_p−1}B_K … B_K, A_K^{s_p−1}K … K]
    let mut lp = Mat::zeros(n, s_p * (p + m));
    let mut pw = eye(n);
    for j in (0..s_p).rev() {
        lp.view_mut((0, j * p), (n, p)).copy_from(&(&pw * &bk));
        lp.view_mut((0, s_p * p + j * m), (n, m)).copy_from(&(&pw * k));
        pw = &pw * &ak;
    }
    let staleness = linalg::spectral_norm(&pw);
    let theta_x = &gamma * &lp;
    IOKernelModel::from_parts(s, s_p, p, m, theta_x, h, Some(gamma), Some(lp), staleness)
}

/// Observer gain placing every eigenvalue of `A − KC` at zero, via Ackermann's
/// formula on a single output combination `cᵀy`.
pub fn deadbeat_observer_gain(model: &StateSpaceModel) -> Result<Mat> {
    let (a, c) = (model.a(), model.c());
    let (n, m) = (model.states(), model.outputs());
    if n == 0 {
        return Ok(Mat::zeros(0, m));
    }
    let mut candidates: Vec<DVector<f64>> = (0..m).map(|i| DVector::from_fn(m, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
    candidates.push(DVector::from_element(m, 1.0));
    candidates.push(DVector::from_fn(m, |j, _| 1.0 + 0.618 * j as f64));
    let mut best: Option<(f64, Mat)> = None;
    for cv in candidates {
        let ct = cv.transpose() * c;
        let mut obs = Mat::zeros(n, n);
        let mut row = ct.clone();
        for i in 0..n {
            obs.set_row(i, &row.row(0));
            row = &row * a;
        }
        let cond = linalg::min_singular(&obs) / linalg::spectral_norm(&obs).max(f64::MIN_POSITIVE);
        if cond > 1e-10 && best.as_ref().is_none_or(|(bc, _)| cond > *bc) {
            let oi = inverse(&obs)?;
            let mut an = eye(n);
            for _ in 0..n {
                an = &an * a;
            }
            let en = DVector::from_fn(n, |i, _| if i + 1 == n { 1.0 } else { 0.0 });
            let ks = an * oi * en;
            best = Some((cond, &ks * cv.transpose()));
        }
    }
    best.map(|(_, k)| k).ok_or_else(|| Error::Structural("no single output combination observes the state".into()))
}

/// Stacked `(z_p, u_s, y_s)` ending at sample `k`; `None` when the window
/// reaches before the logs.
pub fn stack_at(io: &IOKernelModel, u: &SignalWindow, y: &SignalWindow, k: i64) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let (s, sp) = (io.s as i64, io.s_p as i64);
    let first = k - s - sp;
    if first < u.start().max(y.start()) || k >= u.end().min(y.end()) {
        return None;
    }
    let (p, m) = (io.inputs, io.outputs);
    let mut up = Vec::with_capacity(io.s_p * p);
    let mut yp = Vec::with_capacity(io.s_p * m);
    for t in first..k - s {
        up.extend_from_slice(u.at(t)?);
        yp.extend_from_slice(y.at(t)?);
    }
    let mut us = Vec::with_capacity((io.s + 1) * p);
    let mut ys = Vec::with_capacity((io.s + 1) * m);
    for t in k - s..=k {
        us.extend_from_slice(u.at(t)?);
        ys.extend_from_slice(y.at(t)?);
    }
    up.extend(yp);
    Some((DVector::from_vec(up), DVector::from_vec(us), DVector::from_vec(ys)))
}

/// `r_s = Σ^{−1/2}(y_s − Γ_s L_p z_p − H_{u,s} u_s)` and its norm.
pub fn parity_residual(io: &IOKernelModel, z_p: &DVector<f64>, u_s: &DVector<f64>, y_s: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if z_p.len() != io.past_dim() || u_s.len() != io.us_dim() || y_s.len() != io.ys_dim() {
        bail!(DimensionMismatch, "stacked data does not match the horizons");
    }
    let e = y_s - &io.theta_x * z_p - &io.h_us * u_s;
    let r = &io.sigma_inv_sqrt * e;
    let n = r.norm();
    Ok((r, n))
}

/// `K_IOᵀ K_IO` applied to the full stacked vector.
pub fn full_projection_residual(io: &IOKernelModel, stacked: &DVector<f64>) -> Result<DVector<f64>> {
    if stacked.len() != io.stacked_dim() {
        bail!(DimensionMismatch, "stacked vector has the wrong length");
    }
    Ok(io.k_io.transpose() * (&io.k_io * stacked))
}

pub fn stacked(z_p: &DVector<f64>, u_s: &DVector<f64>, y_s: &DVector<f64>) -> DVector<f64> {
    let mut v = Vec::with_capacity(z_p.len() + u_s.len() + y_s.len());
    v.extend_from_slice(z_p.as_slice());
    v.extend_from_slice(u_s.as_slice());
    v.extend_from_slice(y_s.as_slice());
    DVector::from_vec(v)
}

pub fn io_threshold(delta_io: f64, z_p: &DVector<f64>, u_s: &DVector<f64>, y_s: &DVector<f64>, r_s_norm: f64) -> Result<ThresholdReport> {
    let total = z_p.norm_squared() + u_s.norm_squared() + y_s.norm_squared();
    adaptive_threshold(delta_io, total, r_s_norm * r_s_norm)
}

/// Per-sample parity detection over logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParitySample {
    pub k: i64,
    pub report: ThresholdReport,
}

pub fn sliding_parity(io: &IOKernelModel, delta_io: f64, u: &SignalWindow, y: &SignalWindow) -> Result<Vec<ParitySample>> {
    let mut out = Vec::new();
    let lo = u.start().max(y.start()) + (io.s + io.s_p) as i64;
    for k in lo..u.end().min(y.end()) {
        let Some((zp, us, ys)) = stack_at(io, u, y, k) else { continue };
        let (_, rn) = parity_residual(io, &zp, &us, &ys)?;
        out.push(ParitySample { k, report: io_threshold(delta_io, &zp, &us, &ys, rn)? });
    }
    Ok(out)
}

/// Regression matrices `Z = [z_p; u_s]` and `Y = y_s`, one column per usable sample.
fn regression(s: usize, s_p: usize, u: &SignalWindow, y: &SignalWindow, range: core::ops::Range<i64>) -> (Mat, Mat) {
    let (p, m) = (u.channels(), y.channels());
    let proto = IOKernelModel {
        s,
        s_p,
        inputs: p,
        outputs: m,
        gamma_s: None,
        l_p: None,
        theta_x: Mat::zeros(0, 0),
        h_us: Mat::zeros(0, 0),
        sigma: Mat::zeros(0, 0),
        sigma_inv_sqrt: Mat::zeros(0, 0),
        k_io: Mat::zeros(0, 0),
        sigma_hat: Mat::zeros(0, 0),
        i_io: Mat::zeros(0, 0),
        staleness: 0.0,
    };
    let cols: Vec<_> = range.filter_map(|k| stack_at(&proto, u, y, k)).collect();
    let nz = proto.past_dim() + proto.us_dim();
    let mut z = Mat::zeros(nz, cols.len());
    let mut yy = Mat::zeros(proto.ys_dim(), cols.len());
    for (j, (zp, us, ys)) in cols.iter().enumerate() {
        z.view_mut((0, j), (zp.len(), 1)).copy_from(zp);
        z.view_mut((zp.len(), j), (us.len(), 1)).copy_from(us);
        yy.set_column(j, ys);
    }
    (z, yy)
}

/// Identified I/O model with its fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedIoModel {
    pub model: IOKernelModel,
    pub residual_rms: f64,
    /// `σ̄` of the kernel perturbation explaining the held-out misfit.
    pub delta_io: f64,
}

fn least_squares(z: &Mat, y: &Mat, ridge: f64) -> Result<Mat> {
    let g = z * z.transpose();
    let scale = g.diagonal().amax().max(f64::MIN_POSITIVE);
    if ridge == 0.0 {
        let ev = linalg::sym_eig(&g).0;
        if ev[0] <= 1e-10 * scale {
            return Err(Error::Identification("regressor matrix is rank deficient; use a positive ridge".into()));
        }
    }
    let reg = g + eye(z.nrows()) * (ridge * scale);
    Ok(y * z.transpose() * inverse(&reg)?)
}

/// Batch least squares for `[Γ_s L_p, H_{u,s}]`; the last quarter of the usable
/// samples is held out to size `δ_I/O`.
pub fn identify_io_model(u: &SignalWindow, y: &SignalWindow, s: usize, s_p: usize, ridge: f64) -> Result<IdentifiedIoModel> {
    if s < 1 || s_p < 1 {
        bail!(InvalidArgument, "horizons must be at least one");
    }
    if !(ridge >= 0.0) {
        bail!(InvalidArgument, "ridge must be nonnegative");
    }
    let (p, m) = (u.channels(), y.channels());
    let need = 4 * (s + s_p + 1) * (p + m);
    let lo = u.start().max(y.start()) + (s + s_p) as i64;
    let hi = u.end().min(y.end());
    if hi - lo < need as i64 {
        bail!(InvalidArgument, "logs too short: need at least {need} usable samples");
    }
    let split = lo + (3 * (hi - lo)) / 4;
    let (z_fit, y_fit) = regression(s, s_p, u, y, lo..split);
    let theta = least_squares(&z_fit, &y_fit, ridge)?;
    let nz = s_p * (p + m);
    let model = IOKernelModel::from_parts(
        s,
        s_p,
        p,
        m,
        theta.columns(0, nz).clone_owned(),
        theta.columns(nz, (s + 1) * p).clone_owned(),
        None,
        None,
        f64::NAN,
    )?;
    let fit_err = &y_fit - &theta * &z_fit;
    let residual_rms = libm::sqrt(fit_err.norm_squared() / fit_err.len().max(1) as f64);
    let (z_ho, y_ho) = regression(s, s_p, u, y, split..hi);
    let e = &y_ho - &theta * &z_ho;
    // smallest-norm ΔΘ with ΔΘ Z = E
    let g = &z_ho * z_ho.transpose();
    let pinv = linalg::sym_eig(&g);
    let tol = 1e-12 * pinv.0.amax().max(f64::MIN_POSITIVE);
    let mut gi = Mat::zeros(g.nrows(), g.ncols());
    for i in 0..pinv.0.len() {
        if pinv.0[i] > tol {
            let v = pinv.1.column(i);
            gi += v * v.transpose() / pinv.0[i];
        }
    }
    let dtheta = e * z_ho.transpose() * gi;
    let dk = &model.sigma_inv_sqrt * hstack(&[&dtheta, &Mat::zeros(m * (s + 1), m * (s + 1))]);
    let delta_io = linalg::spectral_norm(&dk);
    Ok(IdentifiedIoModel { model, residual_rms, delta_io })
}

/// Random `(Δ_x, Δ_u)` scaled so that `σ̄(Σ^{−1/2}[−Δ_x −Δ_u 0]) = magnitude`.
pub fn sample_io_uncertainty(rng: &mut impl Rng, io: &IOKernelModel, magnitude: f64) -> Result<(Mat, Mat)> {
    if !(0.0..1.0).contains(&magnitude) {
        bail!(InvalidArgument, "uncertainty magnitude must lie in [0, 1)");
    }
    for _ in 0..10 {
        let dx = uniform_mat(rng, io.ys_dim(), io.past_dim());
        let du = uniform_mat(rng, io.ys_dim(), io.us_dim());
        let norm = linalg::spectral_norm(&(&io.sigma_inv_sqrt * hstack(&[&dx, &du])));
        if norm > 1e-9 {
            let k = magnitude / norm;
            return Ok((dx * k, du * k));
        }
    }
    bail!(Numeric, "ten consecutive random draws had negligible norm")
}
