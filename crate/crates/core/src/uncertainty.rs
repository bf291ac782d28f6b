//! Seeded coprime-factor perturbations for Monte Carlo runs.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::closed_loop::{perturbed_plant, CoprimePerturbation};
use crate::error::{bail, Result};
use crate::factorization::NormalizedRepresentation;
use crate::linalg::{eye, Mat};
use crate::lti::StateSpaceModel;
use crate::random::random_system_with_norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyKind {
    /// `[Δ_M; Δ_N]` added to the normalized SIR.
    RightCoprime,
    /// `Δ_K = [−Δ_N̂ Δ_M̂]` added to the normalized SKR.
    LeftCoprime,
}

#[derive(Debug, Clone)]
pub struct InjectedUncertainty {
    pub kind: UncertaintyKind,
    /// `[Δ_M; Δ_N]` or `Δ_K`.
    pub delta: StateSpaceModel,
    pub magnitude: f64,
    /// Perturbed plant from `u` to `y`.
    pub plant: StateSpaceModel,
    /// `I_G + Δ_I`, mapping the latent signal to `[u; y]` (right-coprime only).
    pub image: Option<StateSpaceModel>,
}

fn columns(k: usize, from: usize, count: usize) -> Mat {
    eye(k).columns(from, count).clone_owned()
}

pub fn inject_uncertainty(rep: &NormalizedRepresentation, kind: UncertaintyKind, magnitude: f64, seed: u64) -> Result<InjectedUncertainty> {
    inject_uncertainty_with(&mut ChaCha8Rng::seed_from_u64(seed), rep, kind, magnitude)
}

pub fn inject_uncertainty_with<R: RngCore>(rng: &mut R, rep: &NormalizedRepresentation, kind: UncertaintyKind, magnitude: f64) -> Result<InjectedUncertainty> {
    if !(0.0..1.0).contains(&magnitude) {
        bail!(InvalidArgument, "uncertainty magnitude must lie in [0, 1), got {magnitude}");
    }
    let (p, m) = (rep.plant.inputs(), rep.plant.outputs());
    match kind {
        UncertaintyKind::RightCoprime => {
            let delta = random_system_with_norm(rng, p + m, p, magnitude)?;
            let image = rep.sir_system().add(&delta)?;
            let plant = if magnitude == 0.0 {
                rep.plant.clone()
            } else {
                perturbed_plant(rep, &CoprimePerturbation::split(&delta, p)?)?
            };
            Ok(InjectedUncertainty { kind, delta, magnitude, plant, image: Some(image) })
        }
        UncertaintyKind::LeftCoprime => {
            let delta = random_system_with_norm(rng, m, p + m, magnitude)?;
            let plant = if magnitude == 0.0 {
                rep.plant.clone()
            } else {
                let dn = delta.postmul(&columns(p + m, 0, p))?.scaled(-1.0);
                let dm = delta.postmul(&columns(p + m, p, m))?;
                let mh = rep.skr.m.add(&dm)?;
                let nh = rep.skr.n.add(&dn)?;
                nh.then(&mh.inverse()?)?
            };
            Ok(InjectedUncertainty { kind, delta, magnitude, plant, image: None })
        }
    }
}
