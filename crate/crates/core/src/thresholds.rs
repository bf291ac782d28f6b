//! Residual-driven thresholds and detection decisions.

use crate::error::{bail, Result};
use crate::projection::ResidualDecomposition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    FaultFree,
    Faulty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub j: f64,
    pub j_th: f64,
    pub j_n: f64,
    pub j_th_n: f64,
    pub delta: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedDetection {
    pub j_n: f64,
    pub j_th_n: f64,
    /// `J_N / J_thN`; infinite when the threshold collapses to zero under a nonzero residual.
    pub ratio: f64,
    pub verdict: Verdict,
}

/// Slack allowed when a residual energy slightly exceeds the data energy through roundoff.
pub const ENERGY_SLACK: f64 = 1e-9;

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        bail!(InvalidArgument, "uncertainty size {delta} outside (0, 1)");
    }
    Ok(())
}

/// `δ/√(1−δ²)`.
pub fn gain_factor(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(delta / libm::sqrt(1.0 - delta * delta))
}

fn clamp_residual(data_norm_sq: f64, residual_norm_sq: f64) -> Result<f64> {
    if !(data_norm_sq >= 0.0) || !(residual_norm_sq >= 0.0) {
        bail!(InvalidArgument, "energies must be nonnegative");
    }
    if residual_norm_sq > data_norm_sq * (1.0 + ENERGY_SLACK) + f64::MIN_POSITIVE {
        bail!(Inconsistent, "residual energy {residual_norm_sq} exceeds data energy {data_norm_sq}");
    }
    Ok(residual_norm_sq.min(data_norm_sq))
}

/// Threshold `J_th = factor·√(‖x‖² − J²)` with the comparison `J > J_th`.
pub fn scaled_threshold(factor: f64, delta: f64, data_norm_sq: f64, residual_norm_sq: f64) -> Result<ThresholdReport> {
    let r = clamp_residual(data_norm_sq, residual_norm_sq)?;
    let j = libm::sqrt(r);
    let j_th = factor * libm::sqrt(data_norm_sq - r);
    let (j_n, j_th_n) = if data_norm_sq > 0.0 {
        let jn = (j / libm::sqrt(data_norm_sq)).min(1.0);
        (jn, factor * libm::sqrt(1.0 - jn * jn))
    } else {
        (0.0, factor)
    };
    let verdict = if j > j_th { Verdict::Faulty } else { Verdict::FaultFree };
    Ok(ThresholdReport { j, j_th, j_n, j_th_n, delta, verdict })
}

pub fn adaptive_threshold(delta: f64, data_norm_sq: f64, residual_norm_sq: f64) -> Result<ThresholdReport> {
    scaled_threshold(gain_factor(delta)?, delta, data_norm_sq, residual_norm_sq)
}

/// Same as [`adaptive_threshold`] with `J²` first reduced by the certified truncation
/// bound, so truncation error can only push toward the fault-free side.
pub fn adaptive_threshold_corrected(delta: f64, dec: &ResidualDecomposition) -> Result<ThresholdReport> {
    let r = (dec.total_norm_sq - dec.truncation_bound).max(0.0);
    adaptive_threshold(delta, dec.data_norm_sq, r)
}

pub fn normalized_detect(delta: f64, data_norm_sq: f64, residual_norm_sq: f64) -> Result<NormalizedDetection> {
    let rep = adaptive_threshold(delta, data_norm_sq, residual_norm_sq)?;
    let ratio = if rep.j_th_n > 0.0 {
        rep.j_n / rep.j_th_n
    } else if rep.j_n > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let verdict = if rep.j_n > rep.j_th_n { Verdict::Faulty } else { Verdict::FaultFree };
    Ok(NormalizedDetection { j_n: rep.j_n, j_th_n: rep.j_th_n, ratio, verdict })
}

/// Kernel-based scheme: only the observer residual `r₀` enters, no Hankel term.
pub fn kernel_scheme_threshold(delta_k: f64, data_norm_sq: f64, r0_norm_sq: f64) -> Result<ThresholdReport> {
    adaptive_threshold(delta_k, data_norm_sq, r0_norm_sq)
}

/// Classic observer-based bound `δ_K·√(1+δ_y²)·‖u‖`.
pub fn conservative_observer_threshold(delta_k: f64, delta_y: f64, u_norm: f64) -> f64 {
    delta_k * libm::sqrt(1.0 + delta_y * delta_y) * u_norm
}
