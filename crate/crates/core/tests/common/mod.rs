//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use egg_core::SymmetricMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, p: usize) -> SymmetricMatrix {
    let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    SymmetricMatrix::from_matrix(&a + a.transpose()).unwrap()
}

/// `AAᵀ/p + shift·I`, well conditioned for moderate `shift`.
pub fn random_pd(rng: &mut ChaCha8Rng, p: usize, shift: f64) -> SymmetricMatrix {
    let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let m = &a * a.transpose() / p as f64 + DMatrix::identity(p, p) * shift;
    SymmetricMatrix::from_matrix(m).unwrap()
}

/// Cyclic Jacobi eigenvalues, ascending.
pub fn jacobi_eigenvalues(a: &SymmetricMatrix) -> Vec<f64> {
    let p = a.dim();
    let mut m: Vec<Vec<f64>> = a.to_rows();
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                if m[i][j].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[j][j] - m[i][i]) / (2.0 * m[i][j]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (mki, mkj) = (m[k][i], m[k][j]);
                    m[k][i] = c * mki - s * mkj;
                    m[k][j] = s * mki + c * mkj;
                }
                for k in 0..p {
                    let (mik, mjk) = (m[i][k], m[j][k]);
                    m[i][k] = c * mik - s * mjk;
                    m[j][k] = s * mik + c * mjk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..p).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn mcp_penalty(x: f64, lambda: f64, gamma: f64) -> f64 {
    let a = x.abs();
    if a <= gamma * lambda {
        lambda * a - a * a / (2.0 * gamma)
    } else {
        gamma * lambda * lambda / 2.0
    }
}

/// Minimiser of `½(x−u)² + P(u)` over a grid of step `1e-4` around `x`.
pub fn grid_prox_mcp(x: f64, lambda: f64, gamma: f64) -> f64 {
    let step = 1e-4;
    let lo = x.min(0.0) - 0.01;
    let hi = x.max(0.0) + 0.01;
    let n = ((hi - lo) / step).ceil() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=n {
        let u = lo + i as f64 * step;
        let v = 0.5 * (x - u) * (x - u) + mcp_penalty(u, lambda, gamma);
        if v < best.0 {
            best = (v, u);
        }
    }
    // zero is a candidate the grid may step over
    if 0.5 * x * x + mcp_penalty(0.0, lambda, gamma) <= best.0 {
        return 0.0;
    }
    best.1
}

fn inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse())
}

fn entropy(sigma: &DMatrix<f64>, theta: &DMatrix<f64>) -> Option<f64> {
    let chol = theta.clone().cholesky()?;
    let logdet_theta: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let chol_s = sigma.clone().cholesky()?;
    let logdet_sigma: f64 = chol_s.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let p = sigma.nrows() as f64;
    Some((sigma * theta).trace() - logdet_sigma - logdet_theta - p)
}

/// Scalar proximal map of `t·P` for the reference solver.
#[derive(Clone, Copy)]
pub enum RefPenalty {
    /// MCP with the given `(λ, γ)`.
    Mcp(f64, f64),
    Lasso(f64),
}

impl RefPenalty {
    fn value(self, x: f64) -> f64 {
        match self {
            RefPenalty::Mcp(l, g) => mcp_penalty(x, l, g),
            RefPenalty::Lasso(l) => l * x.abs(),
        }
    }

    fn prox(self, x: f64, t: f64) -> f64 {
        let soft = |x: f64, l: f64| x.signum() * (x.abs() - l).max(0.0);
        match self {
            RefPenalty::Lasso(l) => soft(x, t * l),
            RefPenalty::Mcp(l, g) => {
                // t·P_{λ,γ} = P_{tλ, γ/t}
                let (lt, gt) = (t * l, g / t);
                if x.abs() > lt * gt {
                    x
                } else {
                    gt / (gt - 1.0) * soft(x, lt)
                }
            }
        }
    }
}

pub fn reference_objective(sigma: &SymmetricMatrix, theta: &DMatrix<f64>, penalty: RefPenalty) -> f64 {
    let p = theta.nrows();
    let Some(e) = entropy(sigma.as_matrix(), theta) else {
        return f64::INFINITY;
    };
    let mut pen = 0.0;
    for k in 0..p {
        for s in 0..p {
            if k != s {
                pen += penalty.value(theta[(k, s)]);
            }
        }
    }
    e + pen
}

/// Proximal gradient with backtracking on
/// `tr(ΣΘ) − log det(ΣΘ) − p + Σ_{k≠s} P(Θ_ks)`, started from `Σ⁻¹`.
pub fn reference_solve(sigma: &SymmetricMatrix, penalty: RefPenalty, iters: usize) -> DMatrix<f64> {
    let s = sigma.as_matrix().clone();
    let p = s.nrows();
    let mut theta = inverse(&s).unwrap();
    let mut f = reference_objective(sigma, &theta, penalty);
    let mut t = 0.5;
    for _ in 0..iters {
        let grad = &s - inverse(&theta).unwrap();
        let mut accepted = false;
        for _ in 0..60 {
            // each off-diagonal variable appears twice in the objective
            let cand = DMatrix::from_fn(p, p, |k, c| {
                if k == c {
                    theta[(k, c)] - t * grad[(k, c)]
                } else {
                    penalty.prox(theta[(k, c)] - 2.0 * t * grad[(k, c)], 2.0 * t)
                }
            });
            let fc = reference_objective(sigma, &cand, penalty);
            if fc <= f + 1e-15 {
                let moved = (&cand - &theta).amax();
                theta = cand;
                f = fc;
                accepted = true;
                t = (t * 1.5).min(1.0);
                if moved < 1e-13 {
                    return theta;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    theta
}
