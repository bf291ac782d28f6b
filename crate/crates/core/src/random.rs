//! Seeded random models used by the Monte Carlo harness and the test suites.

use crate::linalg::{self, Mat};
use crate::lti::{hinf_norm, StateSpaceModel};
use crate::error::{bail, Result};
use core::f64::consts::PI;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream for trial `index` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn uniform_mat<R: RngCore>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random `n`-state plant with `ρ(A)` uniform in `[0.3, 0.9]`.
pub fn random_plant<R: RngCore>(rng: &mut R, n: usize, p: usize, m: usize) -> StateSpaceModel {
    let mut a = uniform_mat(rng, n, n);
    let rho = linalg::spectral_radius(&a).unwrap_or(1.0).max(1e-3);
    let target = rng.random_range(0.3..0.9);
    a *= target / rho;
    StateSpaceModel::new(a, uniform_mat(rng, n, p), uniform_mat(rng, m, n), uniform_mat(rng, m, p))
        .expect("random plant is well-formed")
}

/// Random 2-state stable system with poles of radius uniform in `[0.1, 0.8]`,
/// either a complex pair or two real poles.
pub fn random_stable_system<R: RngCore>(rng: &mut R, outputs: usize, inputs: usize) -> StateSpaceModel {
    let r1: f64 = rng.random_range(0.1..0.8);
    let a = if rng.random_bool(0.5) {
        let w: f64 = rng.random_range(0.0..PI);
        Mat::from_row_slice(2, 2, &[r1 * libm::cos(w), -r1 * libm::sin(w), r1 * libm::sin(w), r1 * libm::cos(w)])
    } else {
        let r2: f64 = rng.random_range(0.1..0.8);
        let s1 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let s2 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let t = uniform_mat(rng, 2, 2) + Mat::identity(2, 2) * 2.0;
        let ti = t.clone().try_inverse().unwrap_or_else(|| Mat::identity(2, 2));
        &t * Mat::from_row_slice(2, 2, &[s1 * r1, 0.0, 0.0, s2 * r2]) * ti
    };
    StateSpaceModel::new(a, uniform_mat(rng, 2, inputs), uniform_mat(rng, outputs, 2), uniform_mat(rng, outputs, inputs))
        .expect("random system is well-formed")
}

/// Random stable system rescaled so that its H∞ norm equals `target`.
pub fn random_system_with_norm<R: RngCore>(rng: &mut R, outputs: usize, inputs: usize, target: f64) -> Result<StateSpaceModel> {
    if target == 0.0 {
        return Ok(StateSpaceModel::zero(outputs, inputs));
    }
    for _ in 0..10 {
        let s = random_stable_system(rng, outputs, inputs);
        let norm = hinf_norm(&s, 1e-9)?;
        if norm > 1e-6 {
            return Ok(s.scaled(target / norm));
        }
    }
    bail!(Numeric, "ten consecutive random draws had negligible norm")
}
