//! ADMM for the eigenvalue-constrained penalized entropy problem
//!
//! ```text
//! minimize  tr(ΣΘ) − log det(ΣΘ) − p + Σ_{k<s} P_λ(Θ_ks)   s.t. σ_min(Θ) ≥ δ
//! ```
//!
//! The variable is split into three blocks, `Θ = Ω` (carries the penalty)
//! and `Θ = Γ` (carries the eigenvalue floor), with multipliers `Λ₁`, `Λ₂`
//! and augmentation weight `ψ`. Each block has a closed-form update.
//!
//! The `Ω` step applies the scalar proximal map with threshold `λ/ψ` to every
//! ordered off-diagonal entry, so a fixed point of the iteration minimizes the
//! entropy loss plus `Σ_{k≠s} P_{λ, γ/ψ}(Θ_ks)` for MCP (the lasso case reduces
//! to `λ Σ_{k≠s} |Θ_ks|`). Diagonal entries are never penalized.

use std::sync::atomic::{AtomicUsize, Ordering};

use log::warn;
use serde::{Deserialize, Serialize};

use super::loss::entropy_loss;
use super::penalty::{mcp_value, PenaltyFamily, PenaltySpec};
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// How the second multiplier enters the `Γ` projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaScaling {
    /// `[Θ + Λ₂/ψ, δ]₊`, the minimiser of the augmented Lagrangian in `Γ`.
    DivPsi,
    /// `[Θ + ψΛ₂, δ]₊`.
    MulPsi,
}

impl std::str::FromStr for GammaScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "div-psi" => Ok(GammaScaling::DivPsi),
            "mul-psi" => Ok(GammaScaling::MulPsi),
            other => Err(Error::InvalidParameter(format!(
                "gamma-update-scaling must be div-psi or mul-psi, got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Augmentation weight, in `(0, 0.2]`.
    pub psi: f64,
    /// Eigenvalue floor enforced through `Γ`.
    pub delta: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
    pub gamma_scaling: GammaScaling,
    /// Floor applied to `Σ` before inverting it for the starting point.
    pub init_floor: f64,
    pub record_history: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            psi: 0.1,
            delta: 0.01,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            max_iter: 5000,
            gamma_scaling: GammaScaling::DivPsi,
            init_floor: 0.05,
            record_history: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.psi > 0.0 && self.psi <= 0.2) {
            return bad(format!("psi must lie in (0, 0.2], got {}", self.psi));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if !(self.init_floor > 0.0) {
            return bad(format!("init_floor must be positive, got {}", self.init_floor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdmmState {
    pub theta: SymmetricMatrix,
    pub omega: SymmetricMatrix,
    pub gamma_mat: SymmetricMatrix,
    pub lambda1: SymmetricMatrix,
    pub lambda2: SymmetricMatrix,
    pub iter: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl AdmmState {
    /// `Θ = Ω = Γ = [Σ, δ_Σ]₊⁻¹` with zero multipliers.
    pub fn initial(sigma: &SymmetricMatrix, config: &AdmmConfig) -> Result<Self> {
        let start = sigma.clip_eigenvalues(config.init_floor)?.inverse()?;
        let gamma_mat = start.clip_eigenvalues(config.delta)?;
        let p = sigma.dim();
        Ok(AdmmState {
            theta: start.clone(),
            omega: start,
            gamma_mat,
            lambda1: SymmetricMatrix::zeros(p),
            lambda2: SymmetricMatrix::zeros(p),
            iter: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub lagrangian: f64,
}

#[derive(Debug, Clone)]
pub struct PrecisionFit {
    /// The final `Ω` iterate.
    pub precision: SymmetricMatrix,
    pub support: Vec<(usize, usize)>,
    pub converged: bool,
    pub iterations: usize,
    /// Entropy loss plus [`effective_penalty`] at `precision`.
    pub objective: f64,
    pub history: Vec<IterationRecord>,
}

impl PrecisionFit {
    /// Wraps a precision matrix, deriving the support from its nonzero entries.
    pub fn from_precision(precision: SymmetricMatrix, converged: bool, iterations: usize) -> Self {
        PrecisionFit {
            support: precision.off_diagonal_support(),
            precision,
            converged,
            iterations,
            objective: f64::NAN,
            history: Vec::new(),
        }
    }
}

fn check_psi(psi: f64) -> Result<()> {
    if psi > 0.0 && psi.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("psi must be positive, got {psi}")))
    }
}

/// Positive root of `2ψθ² + qθ − 1 = 0`, written to avoid cancellation for large `q`.
fn theta_root(q: f64, psi: f64) -> f64 {
    let disc = (q * q + 8.0 * psi).sqrt();
    if q > 0.0 {
        2.0 / (q + disc)
    } else {
        (disc - q) / (4.0 * psi)
    }
}

/// `Θ⁺ = (−Q + (Q² + 8ψI)^{1/2}) / 4ψ` with `Q = Σ + Λ₁ + Λ₂ − ψΩ − ψΓ`.
pub fn theta_update(sigma: &SymmetricMatrix, state: &AdmmState, psi: f64) -> Result<SymmetricMatrix> {
    check_psi(psi)?;
    let p = sigma.dim();
    let q = SymmetricMatrix::from_fn(p, |k, s| {
        sigma[(k, s)] + state.lambda1[(k, s)] + state.lambda2[(k, s)]
            - psi * (state.omega[(k, s)] + state.gamma_mat[(k, s)])
    });
    q.spectral_map(|v| theta_root(v, psi))
}

fn omega_entries(
    theta_plus: &SymmetricMatrix,
    lambda1: &SymmetricMatrix,
    psi: f64,
    penalty: &PenaltySpec,
    forced_zero: Option<&[bool]>,
) -> SymmetricMatrix {
    let p = theta_plus.dim();
    let scale = 1.0 / psi;
    SymmetricMatrix::from_fn(p, |k, s| {
        let x = theta_plus[(k, s)] + lambda1[(k, s)] / psi;
        if k == s {
            x
        } else if forced_zero.is_some_and(|mask| mask[k * p + s]) {
            0.0
        } else {
            penalty.prox(x, scale)
        }
    })
}

/// Entrywise proximal step with threshold `λ/ψ`; the diagonal passes through.
pub fn omega_update(
    theta_plus: &SymmetricMatrix,
    lambda1: &SymmetricMatrix,
    psi: f64,
    penalty: &PenaltySpec,
) -> SymmetricMatrix {
    omega_entries(theta_plus, lambda1, psi, penalty, None)
}

/// Projection onto `{σ_min ≥ δ}` of `Θ⁺` shifted by the scaled multiplier.
pub fn gamma_update(
    theta_plus: &SymmetricMatrix,
    lambda2: &SymmetricMatrix,
    psi: f64,
    delta: f64,
    scaling: GammaScaling,
) -> Result<SymmetricMatrix> {
    check_psi(psi)?;
    let factor = match scaling {
        GammaScaling::DivPsi => 1.0 / psi,
        GammaScaling::MulPsi => psi,
    };
    let shifted = SymmetricMatrix::from_fn(theta_plus.dim(), |k, s| theta_plus[(k, s)] + factor * lambda2[(k, s)]);
    shifted.clip_eigenvalues(delta)
}

/// Dual ascent on both multipliers using the primal blocks held in `state`.
pub fn dual_update(state: &AdmmState, psi: f64) -> (SymmetricMatrix, SymmetricMatrix) {
    let p = state.theta.dim();
    let l1 = SymmetricMatrix::from_fn(p, |k, s| {
        state.lambda1[(k, s)] + psi * (state.theta[(k, s)] - state.omega[(k, s)])
    });
    let l2 = SymmetricMatrix::from_fn(p, |k, s| {
        state.lambda2[(k, s)] + psi * (state.theta[(k, s)] - state.gamma_mat[(k, s)])
    });
    (l1, l2)
}

/// `Σ_{k≠s} P_{λ, γ/ψ}(Ω_ks)`, the penalty whose proximal map the `Ω` step applies.
pub fn effective_penalty(penalty: &PenaltySpec, omega: &SymmetricMatrix, psi: f64) -> f64 {
    let p = omega.dim();
    let mut total = 0.0;
    for k in 0..p {
        for s in (k + 1)..p {
            let x = omega[(k, s)];
            total += match penalty.family {
                PenaltyFamily::Lasso => penalty.lambda * x.abs(),
                PenaltyFamily::Mcp => mcp_value(x, penalty.lambda, penalty.gamma / psi),
            };
        }
    }
    2.0 * total
}

fn augmented_lagrangian(sigma: &SymmetricMatrix, state: &AdmmState, penalty: &PenaltySpec, psi: f64) -> f64 {
    let loss = entropy_loss(sigma, &state.theta).unwrap_or(f64::INFINITY);
    let d1 = &state.theta - &state.omega;
    let d2 = &state.theta - &state.gamma_mat;
    loss + effective_penalty(penalty, &state.omega, psi)
        + state.lambda1.trace_product(&d1)
        + 0.5 * psi * d1.frobenius_norm().powi(2)
        + state.lambda2.trace_product(&d2)
        + 0.5 * psi * d2.frobenius_norm().powi(2)
}

/// One ADMM problem instance over a fixed `Σ`.
#[derive(Debug, Clone)]
pub struct AdmmSolver<'a> {
    sigma: &'a SymmetricMatrix,
    penalty: PenaltySpec,
    config: AdmmConfig,
    forced_zero: Option<Vec<bool>>,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(sigma: &'a SymmetricMatrix, penalty: PenaltySpec, config: AdmmConfig) -> Result<Self> {
        config.validate()?;
        if !sigma.is_positive_definite() {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: sigma.min_eigenvalue(),
            });
        }
        Ok(AdmmSolver {
            sigma,
            penalty,
            config,
            forced_zero: None,
        })
    }

    /// Pins the given off-diagonal pairs of `Ω` at zero.
    pub fn with_forced_zeros(mut self, pairs: &[(usize, usize)]) -> Self {
        let p = self.sigma.dim();
        let mut mask = vec![false; p * p];
        for &(k, s) in pairs {
            mask[k * p + s] = true;
            mask[s * p + k] = true;
        }
        self.forced_zero = Some(mask);
        self
    }

    pub fn penalty(&self) -> &PenaltySpec {
        &self.penalty
    }

    /// Iterates from `init` (or the default start) until both residuals fall
    /// under tolerance or `max_iter` is reached. Running out of iterations is
    /// reported through `converged`, not as an error.
    pub fn run(&self, init: Option<AdmmState>) -> Result<(PrecisionFit, AdmmState)> {
        let cfg = &self.config;
        let psi = cfg.psi;
        let mut state = match init {
            Some(s) => s,
            None => AdmmState::initial(self.sigma, cfg)?,
        };
        if state.theta.dim() != self.sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.sigma.dim(),
                found: state.theta.dim(),
            });
        }
        state.iter = 0;
        let mut history = Vec::new();
        let mut converged = false;
        for it in 1..=cfg.max_iter {
            let theta = theta_update(self.sigma, &state, psi)?;
            let omega = omega_entries(&theta, &state.lambda1, psi, &self.penalty, self.forced_zero.as_deref());
            let gamma_mat = gamma_update(&theta, &state.lambda2, psi, cfg.delta, cfg.gamma_scaling)?;

            let primal = theta.max_abs_diff(&omega).max(theta.max_abs_diff(&gamma_mat));
            let dual = psi
                * omega
                    .max_abs_diff(&state.omega)
                    .max(gamma_mat.max_abs_diff(&state.gamma_mat));

            state.theta = theta;
            state.omega = omega;
            state.gamma_mat = gamma_mat;
            let (l1, l2) = dual_update(&state, psi);
            state.lambda1 = l1;
            state.lambda2 = l2;
            state.iter = it;
            state.primal_residual = primal;
            state.dual_residual = dual;

            if cfg.record_history {
                history.push(IterationRecord {
                    iter: it,
                    primal_residual: primal,
                    dual_residual: dual,
                    lagrangian: augmented_lagrangian(self.sigma, &state, &self.penalty, psi),
                });
            }
            if primal <= cfg.tol_primal && dual <= cfg.tol_dual {
                converged = true;
                break;
            }
        }

        let precision = state.omega.clone();
        if converged {
            audit_floor(&precision, cfg);
        }
        let objective = entropy_loss(self.sigma, &precision)
            .map(|e| e + effective_penalty(&self.penalty, &precision, psi))
            .unwrap_or(f64::INFINITY);
        let fit = PrecisionFit {
            support: precision.off_diagonal_support(),
            precision,
            converged,
            iterations: state.iter,
            objective,
            history,
        };
        Ok((fit, state))
    }
}

static FITS_CHECKED: AtomicUsize = AtomicUsize::new(0);
static FLOOR_VIOLATIONS: AtomicUsize = AtomicUsize::new(0);

/// Process-wide count of converged fits and of those whose smallest
/// eigenvalue fell below `δ − (tol_primal + tol_dual)·p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FloorAudit {
    pub checked: usize,
    pub violations: usize,
}

pub fn floor_audit() -> FloorAudit {
    FloorAudit {
        checked: FITS_CHECKED.load(Ordering::Relaxed),
        violations: FLOOR_VIOLATIONS.load(Ordering::Relaxed),
    }
}

fn audit_floor(precision: &SymmetricMatrix, cfg: &AdmmConfig) {
    let p = precision.dim() as f64;
    let bound = cfg.delta - (cfg.tol_primal + cfg.tol_dual) * p;
    let min = precision.min_eigenvalue();
    FITS_CHECKED.fetch_add(1, Ordering::Relaxed);
    if !(min >= bound) {
        FLOOR_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
        warn!("converged fit has smallest eigenvalue {min:e} below {bound:e}");
    }
}

/// Solves from the default starting point and returns the `Ω` estimate.
pub fn solve_penalized_entropy(
    sigma: &SymmetricMatrix,
    penalty: &PenaltySpec,
    config: &AdmmConfig,
) -> Result<PrecisionFit> {
    Ok(AdmmSolver::new(sigma, *penalty, *config)?.run(None)?.0)
}
