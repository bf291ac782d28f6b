//! Orthogonal projection onto the image subspace of an inner SIR: observer
//! residual, anticausal adjoint filtering, the Hankel past term and the full
//! distance to the image.

use crate::error::{bail, Error, Result};
use crate::factorization::NormalizedRepresentation;
use crate::linalg::{self, DecayBound, Mat};
use crate::lti::{freq_response, simulate, FrequencyGrid, SignalWindow, StateSpaceModel};
use alloc::vec::Vec;
use nalgebra::DVector;

/// Relative size of the ignored geometric tail when extending recursions past the data.
const TAIL_REL: f64 = 1e-12;
const MAX_EXTENSION: usize = 1_000_000;

/// Energy split of `‖r‖² = ‖r₀‖² + ‖ς_H‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualDecomposition {
    pub observer_norm_sq: f64,
    pub hankel_norm_sq: f64,
    pub total_norm_sq: f64,
    pub truncation_bound: f64,
    pub data_norm_sq: f64,
    /// Disagreement between the observer-plus-Hankel energy and the kernel energy; zero without a kernel.
    pub route_discrepancy: f64,
}

impl ResidualDecomposition {
    pub fn distance(&self) -> f64 {
        libm::sqrt(self.total_norm_sq)
    }

    /// `‖P x‖² = ‖x‖² − ‖r‖²`, clamped at zero.
    pub fn projected_norm_sq(&self) -> f64 {
        (self.data_norm_sq - self.total_norm_sq).max(0.0)
    }
}

/// Output of the anticausal filter `I∼`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrace {
    /// `ς` on `[lo, data end)`, including the zero-input extension below the data.
    pub sigma: SignalWindow,
    pub energy: f64,
    /// Energy on `k < 0`, i.e. `‖ς_H‖²`.
    pub past_energy: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HankelTerm {
    /// `ς_H` on `[k_lo, −1]`.
    pub trace: SignalWindow,
    pub norm_sq: f64,
    pub truncation_bound: f64,
}

/// Image subspace `I·H₂` of an inner `I`, optionally with a co-inner
/// complement `K` (`K I = 0`, `K∼K + I I∼ = I`).
#[derive(Debug, Clone)]
pub struct ImageSubspace {
    sir: StateSpaceModel,
    kernel: Option<StateSpaceModel>,
    adj_decay: DecayBound,
    kernel_decay: DecayBound,
    /// `Σ (Āᵀ)^j C̄ᵀC̄ Ā^j` with `Ā = Aᵀ`, `C̄ = Bᵀ`.
    hankel_gram: Mat,
}

impl ImageSubspace {
    pub fn from_representation(rep: &NormalizedRepresentation) -> Result<Self> {
        Self::build(rep.sir_system(), Some(rep.skr_system()))
    }

    /// Generic inner SIR; checked to be inner on a 64-point grid.
    pub fn from_inner(sir: StateSpaceModel, kernel: Option<StateSpaceModel>) -> Result<Self> {
        let grid = FrequencyGrid::uniform(64);
        for &t in grid.points() {
            let v = freq_response(&sir, t)?;
            let dev = linalg::frob_dev_from_identity(&(v.adjoint() * v));
            if dev > 1e-6 {
                bail!(InvalidArgument, "image representation is not inner (deviation {dev:e})");
            }
        }
        Self::build(sir, kernel)
    }

    fn build(sir: StateSpaceModel, kernel: Option<StateSpaceModel>) -> Result<Self> {
        if let Some(k) = &kernel {
            if k.inputs() != sir.outputs() {
                bail!(DimensionMismatch, "kernel and image act on different signal spaces");
            }
        }
        let abar = sir.a().transpose();
        let adj_decay = DecayBound::of(&abar)?;
        let kernel_decay = match &kernel {
            Some(k) => DecayBound::of(k.a())?,
            None => DecayBound { c: 0.0, rho: 0.0 },
        };
        let cbar = sir.b().transpose();
        let hankel_gram = linalg::obs_gramian(&abar, &cbar)?;
        Ok(ImageSubspace { sir, kernel, adj_decay, kernel_decay, hankel_gram })
    }

    pub fn sir(&self) -> &StateSpaceModel {
        &self.sir
    }
    pub fn kernel(&self) -> Option<&StateSpaceModel> {
        self.kernel.as_ref()
    }
    /// Dimension of the signal space `[u; y]`.
    pub fn signal_dim(&self) -> usize {
        self.sir.outputs()
    }
    pub fn latent_dim(&self) -> usize {
        self.sir.inputs()
    }

    fn check(&self, x: &SignalWindow) -> Result<()> {
        if x.channels() != self.signal_dim() {
            bail!(DimensionMismatch, "data has {} channels, subspace lives in {}", x.channels(), self.signal_dim());
        }
        Ok(())
    }

    /// `ς = I∼x` by the backward recursion `ξ(k−1) = Āξ(k) + B̄x(k)`,
    /// `ς(k) = C̄ξ(k) + D̄x(k)`, with `ξ = 0` right of the data. The recursion is
    /// continued with zero input below `min(k₀, 0)` until the certified tail bound
    /// falls under `1e−12` of the accumulated energy.
    pub fn adjoint(&self, x: &SignalWindow) -> Result<AdjointTrace> {
        self.check(x)?;
        let abar = self.sir.a().transpose();
        let bbar = self.sir.c().transpose();
        let cbar = self.sir.b().transpose();
        let dbar = self.sir.d().transpose();
        let q = self.latent_dim();
        let n = abar.nrows();
        let lo = x.start().min(0);
        let mut xi = DVector::zeros(n);
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let mut k = x.end() - 1;
        while k >= lo {
            let xk = match x.at(k) {
                Some(s) => DVector::from_column_slice(s),
                None => DVector::zeros(x.channels()),
            };
            rows.push(&cbar * &xi + &dbar * &xk);
            xi = &abar * &xi + &bbar * &xk;
            k -= 1;
        }
        let cnorm = linalg::spectral_norm(&cbar);
        let mut energy: f64 = rows.iter().map(|r| r.norm_squared()).sum();
        let mut steps = 0;
        let tail = loop {
            let bound = cnorm * cnorm * self.adj_decay.tail_energy(xi.norm(), 0);
            if bound <= TAIL_REL * energy || xi.norm() == 0.0 || steps >= MAX_EXTENSION {
                break bound;
            }
            let s = &cbar * &xi;
            energy += s.norm_squared();
            rows.push(s);
            xi = &abar * &xi;
            steps += 1;
        };
        rows.reverse();
        let start = x.end() - rows.len() as i64;
        let mut flat = Vec::with_capacity(rows.len() * q);
        for r in &rows {
            flat.extend_from_slice(r.as_slice());
        }
        let sigma = SignalWindow::from_flat(start, q, flat)?;
        let past_energy = sigma.past_energy();
        Ok(AdjointTrace { sigma, energy, past_energy, tail_bound: tail })
    }

    /// Energy of `K x` over the window plus its free-response tail.
    pub fn kernel_energy(&self, x: &SignalWindow) -> Result<(f64, f64)> {
        self.check(x)?;
        let k = self
            .kernel
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("subspace has no kernel representation".into()))?;
        let (out, mut state) = crate::lti::simulate_with_state(k, x, &DVector::zeros(k.states()))?;
        let mut energy = out.energy();
        let cnorm = linalg::spectral_norm(k.c());
        let mut steps = 0;
        loop {
            let bound = cnorm * cnorm * self.kernel_decay.tail_energy(state.norm(), 0);
            if bound <= TAIL_REL * energy || state.norm() == 0.0 || steps >= MAX_EXTENSION {
                return Ok((energy, bound));
            }
            energy += (k.c() * &state).norm_squared();
            state = k.a() * &state;
            steps += 1;
        }
    }

    /// Both energy routes; the kernel route is returned when a kernel exists.
    pub fn decompose(&self, x: &SignalWindow) -> Result<ResidualDecomposition> {
        let data = x.energy();
        let adj = self.adjoint(x)?;
        let floor = 64.0 * f64::EPSILON * (x.len() as f64 + 1.0) * data;
        let route23 = (data - adj.energy + adj.past_energy).max(0.0);
        match &self.kernel {
            Some(_) => {
                let (r0, kb) = self.kernel_energy(x)?;
                let total = r0 + adj.past_energy;
                Ok(ResidualDecomposition {
                    observer_norm_sq: r0,
                    hankel_norm_sq: adj.past_energy,
                    total_norm_sq: total,
                    truncation_bound: adj.tail_bound + kb + floor,
                    data_norm_sq: data,
                    route_discrepancy: (route23 - total).abs(),
                })
            }
            None => Ok(ResidualDecomposition {
                observer_norm_sq: (data - adj.energy).max(0.0),
                hankel_norm_sq: adj.past_energy,
                total_norm_sq: route23,
                truncation_bound: adj.tail_bound + floor,
                data_norm_sq: data,
                route_discrepancy: 0.0,
            }),
        }
    }

    /// `ς_H` by the controllability/observability pair: `x_c = Σ_{i≥0} Āⁱ B̄ x(i)`
    /// accumulated with explicit powers, `ς_H(k) = C̄ Ā^{−1−k} x_c` for data on
    /// `k ≥ 0`; samples at negative indices are folded in by the recursion, and
    /// the norm beyond the trace comes from the observability gramian.
    pub fn hankel_past_term(&self, x: &SignalWindow) -> Result<HankelTerm> {
        self.check(x)?;
        let abar = self.sir.a().transpose();
        let bbar = self.sir.c().transpose();
        let cbar = self.sir.b().transpose();
        let dbar = self.sir.d().transpose();
        let n = abar.nrows();
        let q = self.latent_dim();
        let mut xc = DVector::zeros(n);
        let mut pw = linalg::eye(n);
        for k in 0..x.end().max(0) {
            if let Some(s) = x.at(k) {
                xc += &pw * (&bbar * DVector::from_column_slice(s));
            }
            pw = &pw * &abar;
        }
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let mut xi = xc;
        let mut k = -1;
        while k >= x.start() {
            let xk = DVector::from_column_slice(x.at(k).unwrap());
            rows.push(&cbar * &xi + &dbar * &xk);
            xi = &abar * &xi + &bbar * &xk;
            k -= 1;
        }
        let head: f64 = rows.iter().map(|r| r.norm_squared()).sum();
        let rest = (xi.transpose() * &self.hankel_gram * &xi)[(0, 0)].max(0.0);
        let norm_sq = head + rest;
        let gram_err = 1e-14 * self.hankel_gram.norm() * xi.norm_squared();
        // free-response trace below the data, long enough for the certified tail
        let cnorm = linalg::spectral_norm(&cbar);
        let mut bound;
        loop {
            bound = cnorm * cnorm * self.adj_decay.tail_energy(xi.norm(), 0);
            if bound <= TAIL_REL * norm_sq || xi.norm() == 0.0 || rows.len() >= MAX_EXTENSION {
                break;
            }
            rows.push(&cbar * &xi);
            xi = &abar * &xi;
        }
        rows.reverse();
        let mut flat = Vec::with_capacity(rows.len() * q);
        for r in &rows {
            flat.extend_from_slice(r.as_slice());
        }
        let trace = if rows.is_empty() {
            SignalWindow::zeros(-1, q, 0)
        } else {
            SignalWindow::from_flat(-(rows.len() as i64), q, flat)?
        };
        Ok(HankelTerm { trace, norm_sq, truncation_bound: bound + gram_err })
    }

    /// Adjoint of the Hankel map applied to a past trace: `x₀ = Σ_{k≤−1}
    /// (Āᵀ)^{−1−k} C̄ᵀ ς_H(k)`, then `B̄ᵀ (Āᵀ)^k x₀` on `[0, horizon)`.
    pub fn hankel_adjoint(&self, sigma_h: &SignalWindow, horizon: usize) -> Result<SignalWindow> {
        if sigma_h.channels() != self.latent_dim() {
            bail!(DimensionMismatch, "trace has {} channels, expected {}", sigma_h.channels(), self.latent_dim());
        }
        let at = self.sir.a().clone();
        let ct = self.sir.b().clone();
        let bt = self.sir.c().clone();
        let n = at.nrows();
        let mut x0 = DVector::zeros(n);
        let mut k = sigma_h.start();
        while k <= -1 && k < sigma_h.end() {
            // Horner from the oldest sample: x0 ← Āᵀ x0 + C̄ᵀ ς(k)
            x0 = &at * &x0 + &ct * DVector::from_column_slice(sigma_h.at(k).unwrap());
            k += 1;
        }
        let mut out = Vec::with_capacity(horizon * self.signal_dim());
        let mut s = x0;
        for _ in 0..horizon {
            out.extend_from_slice((&bt * &s).as_slice());
            s = &at * &s;
        }
        SignalWindow::from_flat(0, self.signal_dim(), out)
    }

    /// `p = I·(P_{H₂}ς)` on `[0, end)`.
    pub fn project(&self, x: &SignalWindow, end: i64) -> Result<SignalWindow> {
        let adj = self.adjoint(x)?;
        let vhat = adj.sigma.reframe(0, end.max(x.end()));
        let p = simulate(&self.sir, &vhat, &DVector::zeros(self.sir.states()))?;
        Ok(p.reframe(0, end))
    }
}

fn stack(u: &SignalWindow, y: &SignalWindow) -> Result<SignalWindow> {
    if u.start() != y.start() || u.len() != y.len() {
        bail!(InvalidArgument, "u and y windows are not aligned");
    }
    SignalWindow::stack(&[u, y])
}

fn check_io(rep: &NormalizedRepresentation, u: &SignalWindow, y: &SignalWindow) -> Result<()> {
    if u.channels() != rep.plant.inputs() || y.channels() != rep.plant.outputs() {
        bail!(
            InvalidArgument,
            "expected {} input and {} output channels, got {} and {}",
            rep.plant.inputs(),
            rep.plant.outputs(),
            u.channels(),
            y.channels()
        );
    }
    Ok(())
}

/// `r₀(k) = W₀(y(k) − C x̂(k) − D u(k))` with `x̂(k+1) = (A−L₀C)x̂ + (B−L₀D)u + L₀y`.
pub fn observer_residual(rep: &NormalizedRepresentation, u: &SignalWindow, y: &SignalWindow, xhat0: &DVector<f64>) -> Result<SignalWindow> {
    check_io(rep, u, y)?;
    let x = stack(u, y)?;
    // the SKR realization carries −x̂ as its state
    simulate(&rep.skr_system(), &x, &(-xhat0))
}

/// `ς = I_G∼[u; y]`.
pub fn sir_adjoint_output(rep: &NormalizedRepresentation, u: &SignalWindow, y: &SignalWindow) -> Result<AdjointTrace> {
    check_io(rep, u, y)?;
    ImageSubspace::from_representation(rep)?.adjoint(&stack(u, y)?)
}

pub fn hankel_past_term(rep: &NormalizedRepresentation, u: &SignalWindow, y: &SignalWindow) -> Result<HankelTerm> {
    check_io(rep, u, y)?;
    ImageSubspace::from_representation(rep)?.hankel_past_term(&stack(u, y)?)
}

pub fn projection_residual_norm(rep: &NormalizedRepresentation, u: &SignalWindow, y: &SignalWindow) -> Result<ResidualDecomposition> {
    check_io(rep, u, y)?;
    ImageSubspace::from_representation(rep)?.decompose(&stack(u, y)?)
}

pub fn distance_to_image(rep: &NormalizedRepresentation, u: &SignalWindow, y: &SignalWindow) -> Result<f64> {
    Ok(projection_residual_norm(rep, u, y)?.distance())
}

/// Channel split helper for callers holding stacked data.
pub fn split_io(x: &SignalWindow, p: usize) -> (SignalWindow, SignalWindow) {
    (x.select(0, p), x.select(p, x.channels()))
}
