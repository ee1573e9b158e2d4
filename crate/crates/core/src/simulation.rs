//! Synthetic summary statistics with known genetic networks, and the
//! replication harness that scores estimators against them.
//!
//! Effect estimates are drawn from their asymptotic sampling distribution:
//! true effects `β_j ~ N(0, Σ_β)` plus estimation errors whose correlation
//! across traits is `overlap_ks · phenotypic_cov`. Everything is generated on
//! the Z-score scale (`β̂_jk √n_k`).

use std::fmt;
use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::{estimate_error_covariance, CorrelationPipeline, Estimator, NullPanel, SummaryPanel};
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::selection::{select_network, PanelSource, SelectionConfig};
use crate::solver::{
    bic_score, entropy_loss, quadratic_loss, AdmmConfig, PenaltySpec, PrecisionFit, DEFAULT_MCP_GAMMA,
};
use crate::stats::quartiles;

const MIN_EIGENVALUE: f64 = 0.05;
const PLEIOTROPY_STREAM: u64 = 0x504c_4549;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArStructure {
    Ar1,
    Ar3,
}

impl ArStructure {
    pub fn order(self) -> usize {
        match self {
            ArStructure::Ar1 => 1,
            ArStructure::Ar3 => 3,
        }
    }

    pub fn default_coefficients(self) -> Vec<f64> {
        match self {
            ArStructure::Ar1 => vec![0.5],
            ArStructure::Ar3 => vec![0.4, 0.2, 0.1],
        }
    }
}

impl std::str::FromStr for ArStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ar1" => Ok(ArStructure::Ar1),
            "ar3" => Ok(ArStructure::Ar3),
            other => Err(Error::InvalidParameter(format!("unknown structure '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationDesign {
    pub p: usize,
    pub structure: ArStructure,
    pub band_coefficients: Vec<f64>,
    /// Replaces the banded precision when set.
    pub precision: Option<SymmetricMatrix>,
    /// Causal variants.
    pub m: usize,
    /// Null variants.
    pub null_count: usize,
    /// Per-trait GWAS sample size.
    pub n: u64,
    pub heritability: Vec<f64>,
    /// Sample-overlap fractions, unit diagonal.
    pub overlap: SymmetricMatrix,
    pub phenotypic_cov: f64,
    pub pleiotropy_fraction: f64,
    pub pleiotropy_shift_multiplier: f64,
    pub seed: u64,
}

impl SimulationDesign {
    /// Default design at `p` traits: heritability 0.2, two overlap blocks
    /// (0.9 within, 0.3 between), phenotypic covariance 0.5, `M = 5m`,
    /// shift multiplier 5 and no pleiotropy.
    pub fn new(p: usize, structure: ArStructure, m: usize, n: u64, seed: u64) -> Result<Self> {
        let half = p / 2;
        Ok(SimulationDesign {
            p,
            structure,
            band_coefficients: structure.default_coefficients(),
            precision: None,
            m,
            null_count: 5 * m,
            n,
            heritability: vec![0.2; p],
            overlap: build_overlap_matrix(&[half, p - half], 0.9, 0.3)?,
            phenotypic_cov: 0.5,
            pleiotropy_fraction: 0.0,
            pleiotropy_shift_multiplier: 5.0,
            seed,
        })
    }

    pub fn with_pleiotropy(mut self, fraction: f64) -> Self {
        self.pleiotropy_fraction = fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.p < 2 {
            return bad(format!("need at least 2 traits, got {}", self.p));
        }
        if self.m < 2 || self.null_count < self.p {
            return bad("need m >= 2 and at least p null variants".into());
        }
        if self.n == 0 {
            return bad("sample size must be positive".into());
        }
        if self.heritability.len() != self.p || self.heritability.iter().any(|h| !(*h > 0.0 && *h < 1.0)) {
            return bad("heritability must have p entries in (0, 1)".into());
        }
        if self.overlap.dim() != self.p {
            return bad("overlap matrix must be p x p".into());
        }
        for k in 0..self.p {
            if self.overlap[(k, k)] != 1.0 {
                return bad("overlap matrix must have unit diagonal".into());
            }
            for s in 0..self.p {
                if !(0.0..=1.0).contains(&self.overlap[(k, s)]) {
                    return bad("overlap fractions must lie in [0, 1]".into());
                }
            }
        }
        if let Some(theta) = &self.precision {
            if theta.dim() != self.p || !theta.is_positive_definite() {
                return bad("custom precision must be p x p and positive definite".into());
            }
        }
        if !(0.0..1.0).contains(&self.pleiotropy_fraction) {
            return bad("pleiotropy fraction must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// Banded precision matrix with unit diagonal.
///
/// Returns the matrix and the factor applied to the band; the band is shrunk
/// uniformly when needed so the smallest eigenvalue is at least 0.05.
pub fn build_ar_precision(
    p: usize,
    structure: ArStructure,
    band_coefficients: &[f64],
) -> Result<(SymmetricMatrix, f64)> {
    if p < 2 {
        return Err(Error::InvalidParameter("precision needs p >= 2".into()));
    }
    if band_coefficients.len() != structure.order() {
        return Err(Error::InvalidParameter(format!(
            "{structure:?} needs {} coefficients, got {}",
            structure.order(),
            band_coefficients.len()
        )));
    }
    if band_coefficients.iter().any(|c| !(c.abs() < 1.0)) {
        return Err(Error::InvalidParameter(
            "band coefficients must have magnitude below 1".into(),
        ));
    }
    let band = |scale: f64| {
        SymmetricMatrix::from_fn(p, |k, s| {
            let lag = s - k;
            if lag == 0 {
                1.0
            } else if lag <= band_coefficients.len() {
                scale * band_coefficients[lag - 1]
            } else {
                0.0
            }
        })
    };
    let theta = band(1.0);
    let min = theta.min_eigenvalue();
    if min >= MIN_EIGENVALUE {
        return Ok((theta, 1.0));
    }
    // eigenvalues of I + cB are 1 + c·eig(B)
    let scale = (1.0 - MIN_EIGENVALUE) / (1.0 - min);
    warn!("band coefficients rescaled by {scale:.4} to keep the precision positive definite");
    Ok((band(scale), scale))
}

/// Block-constant overlap fractions with unit diagonal.
pub fn build_overlap_matrix(block_sizes: &[usize], within: f64, between: f64) -> Result<SymmetricMatrix> {
    if !(0.0..=1.0).contains(&within) || !(0.0..=1.0).contains(&between) {
        return Err(Error::InvalidParameter("overlap fractions must lie in [0, 1]".into()));
    }
    let block_of: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    if block_of.is_empty() {
        return Err(Error::InvalidParameter("no blocks".into()));
    }
    Ok(SymmetricMatrix::from_fn(block_of.len(), |k, s| {
        if k == s {
            1.0
        } else if block_of[k] == block_of[s] {
            within
        } else {
            between
        }
    }))
}

/// One generated data set and its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub panel: SummaryPanel,
    pub nulls: NullPanel,
    /// Precision matrix of the genetic correlation (support = true network).
    pub truth: SymmetricMatrix,
    /// True genetic correlation.
    pub genetic_correlation: SymmetricMatrix,
    /// `Σ_β` on the effect-size scale.
    pub sigma_beta: SymmetricMatrix,
    /// Genetic covariance of Z-scores, `n Σ_β`.
    pub sigma_beta_z: SymmetricMatrix,
    /// Error correlation on the Z-score scale.
    pub error_correlation: SymmetricMatrix,
}

fn draw_rows(rng: &mut ChaCha8Rng, factor: &DMatrix<f64>, rows: usize) -> DMatrix<f64> {
    let p = factor.nrows();
    let mut out = DMatrix::zeros(rows, p);
    let mut u = DVector::zeros(p);
    for j in 0..rows {
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let x = factor * &u;
        for k in 0..p {
            out[(j, k)] = x[k];
        }
    }
    out
}

/// Draws a causal panel, a null panel and the ground truth for `design`.
pub fn simulate_summary_panel(design: &SimulationDesign) -> Result<SimulatedData> {
    design.validate()?;
    let p = design.p;
    let theta = match &design.precision {
        Some(t) => t.clone(),
        None => build_ar_precision(p, design.structure, &design.band_coefficients)?.0,
    };
    let inverse = theta.inverse()?;
    let sd: Vec<f64> = inverse.diagonal().iter().map(|v| v.sqrt()).collect();
    let genetic_correlation = inverse.cov2cor()?;
    let truth = theta.scale_by_diagonal(&sd);

    let m = design.m as f64;
    let per_trait: Vec<f64> = design.heritability.iter().map(|h| (h / m).sqrt()).collect();
    let sigma_beta = genetic_correlation.scale_by_diagonal(&per_trait);
    let root_n = (design.n as f64).sqrt();
    let sigma_beta_z = sigma_beta.scale(design.n as f64);
    let error_correlation = design
        .overlap
        .map_entries(|k, s, v| if k == s { 1.0 } else { v * design.phenotypic_cov });

    let beta_factor = genetic_correlation.cholesky_factor()?;
    let beta_factor = DMatrix::from_fn(p, p, |r, c| beta_factor[(r, c)] * per_trait[r] * root_n);
    let error_factor = error_correlation.cholesky_factor()?;

    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
    let beta = draw_rows(&mut rng, &beta_factor, design.m);
    let noise = draw_rows(&mut rng, &error_factor, design.m);
    let nulls = draw_rows(&mut rng, &error_factor, design.null_count);

    let traits = (1..=p).map(|k| format!("T{k}")).collect();
    let panel = SummaryPanel::new(beta + noise, traits, vec![design.n; p])?;
    Ok(SimulatedData {
        panel,
        nulls: NullPanel::new(nulls)?,
        truth,
        genetic_correlation,
        sigma_beta,
        sigma_beta_z,
        error_correlation,
    })
}

/// Adds a directional mean shift to `⌊fraction · m⌋` randomly chosen rows.
///
/// Each chosen row gets `multiplier · sd(β_k) · sign` added to every trait,
/// with one random sign per row. Returns the shifted panel and the chosen rows.
pub fn inject_pleiotropy(
    panel: &SummaryPanel,
    design: &SimulationDesign,
    sigma_beta_z: &SymmetricMatrix,
) -> Result<(SummaryPanel, Vec<usize>)> {
    if !(0.0..1.0).contains(&design.pleiotropy_fraction) {
        return Err(Error::InvalidParameter("pleiotropy fraction must lie in [0, 1)".into()));
    }
    let m = panel.n_variants();
    let count = (design.pleiotropy_fraction * m as f64).floor() as usize;
    if count == 0 || design.pleiotropy_shift_multiplier == 0.0 {
        return Ok((panel.clone(), Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed ^ PLEIOTROPY_STREAM);
    let mut rows = rand::seq::index::sample(&mut rng, m, count).into_vec();
    rows.sort_unstable();
    let sd: Vec<f64> = sigma_beta_z.diagonal().iter().map(|v| v.sqrt()).collect();
    let mut z = panel.z().clone();
    for &j in &rows {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for (k, sd_k) in sd.iter().enumerate() {
            z[(j, k)] += design.pleiotropy_shift_multiplier * sd_k * sign;
        }
    }
    let shifted = SummaryPanel::new(z, panel.traits().to_vec(), panel.sample_sizes().to_vec())?;
    Ok((shifted, rows))
}

/// `(t1, t2)`: false-positive and false-negative ordered off-diagonal pairs over `p²`.
pub fn edge_error_rates(estimate: &PrecisionFit, truth: &SymmetricMatrix) -> Result<(f64, f64)> {
    let p = truth.dim();
    if estimate.precision.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: estimate.precision.dim(),
        });
    }
    let mut selected = vec![false; p * p];
    for &(k, s) in &estimate.support {
        selected[k * p + s] = true;
        selected[s * p + k] = true;
    }
    let (mut fp, mut fn_) = (0usize, 0usize);
    for k in 0..p {
        for s in 0..p {
            if k == s {
                continue;
            }
            let true_edge = truth[(k, s)] != 0.0;
            match (selected[k * p + s], true_edge) {
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    let denom = (p * p) as f64;
    Ok((fp as f64 / denom, fn_ as f64 / denom))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub entropy: f64,
    pub quadratic: f64,
    pub t1: f64,
    pub t2: f64,
}

pub fn score_fit(fit: &PrecisionFit, data: &SimulatedData, delta: f64) -> Result<SimMetrics> {
    let r = &data.genetic_correlation;
    let entropy = match entropy_loss(r, &fit.precision) {
        Ok(v) => v,
        Err(_) => {
            warn!("estimate is not positive definite; scoring its floored version");
            entropy_loss(r, &fit.precision.clip_eigenvalues(delta)?)?
        }
    };
    let (t1, t2) = edge_error_rates(fit, &data.truth)?;
    Ok(SimMetrics {
        entropy,
        quadratic: quadratic_loss(r, &fit.precision)?,
        t1,
        t2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    EggPearson,
    EggSpearman,
    GlassoPearson,
    GlassoSpearman,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::EggPearson,
        Method::EggSpearman,
        Method::GlassoPearson,
        Method::GlassoSpearman,
    ];

    pub fn estimator(self) -> Estimator {
        match self {
            Method::EggPearson | Method::GlassoPearson => Estimator::Pearson,
            Method::EggSpearman | Method::GlassoSpearman => Estimator::Spearman,
        }
    }

    pub fn is_egg(self) -> bool {
        matches!(self, Method::EggPearson | Method::EggSpearman)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::EggPearson => "EGG-Pearson",
            Method::EggSpearman => "EGG-Spearman",
            Method::GlassoPearson => "Glasso-Pearson",
            Method::GlassoSpearman => "Glasso-Spearman",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

/// Solver and tuning settings shared by every replication.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSettings {
    /// Seed is overwritten per replication.
    pub selection: SelectionConfig,
    pub admm: AdmmConfig,
    pub mcp_gamma: f64,
    pub glasso_grid: Vec<f64>,
    /// Eigenvalue floor for the graphical-lasso baseline.
    pub glasso_delta: f64,
}

impl Default for MethodSettings {
    fn default() -> Self {
        let selection = SelectionConfig::new(0);
        MethodSettings {
            glasso_grid: selection.lambda_grid.clone(),
            selection,
            admm: AdmmConfig::default(),
            mcp_gamma: DEFAULT_MCP_GAMMA,
            glasso_delta: 1e-4,
        }
    }
}

/// Graphical lasso on `sigma` with `λ` chosen by BIC over `grid`.
pub fn glasso_bic(sigma: &SymmetricMatrix, m: usize, grid: &[f64], admm: &AdmmConfig) -> Result<PrecisionFit> {
    let mut best: Option<(f64, PrecisionFit)> = None;
    for &lambda in grid {
        let fit = crate::solver::solve_penalized_entropy(sigma, &PenaltySpec::lasso(lambda)?, admm)?;
        let Ok(score) = bic_score(sigma, &fit.precision, m) else {
            continue;
        };
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, fit));
        }
    }
    best.map(|(_, f)| f).ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: f64::NAN,
    })
}

/// Runs one estimator on simulated data and returns its network estimate.
pub fn run_method(
    method: Method,
    panel: &SummaryPanel,
    nulls: &NullPanel,
    settings: &MethodSettings,
    seed: u64,
) -> Result<PrecisionFit> {
    let err = estimate_error_covariance(nulls)?;
    if method.is_egg() {
        let source = PanelSource {
            panel,
            err: &err,
            pipeline: CorrelationPipeline::corrected(method.estimator()),
        };
        let mut cfg = settings.selection.clone();
        cfg.seed = seed;
        let penalty = PenaltySpec::mcp(cfg.lambda_grid[0], settings.mcp_gamma)?;
        Ok(select_network(&source, &cfg, &penalty, &settings.admm)?
            .stability
            .pruned_fit)
    } else {
        let sigma = CorrelationPipeline::uncorrected(method.estimator()).run(panel, &err)?;
        let admm = AdmmConfig {
            delta: settings.glasso_delta,
            ..settings.admm
        };
        glasso_bic(&sigma, panel.n_variants(), &settings.glasso_grid, &admm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub method: Method,
    pub rep: usize,
    pub m: usize,
    pub n: u64,
    pub pleio: f64,
    pub metrics: SimMetrics,
    pub converged: bool,
}

/// Generator seed of replication `rep`.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    seed ^ rep as u64
}

/// Simulates `reps` data sets and scores every method on each.
///
/// Failures are logged and recorded as rows with NaN metrics and
/// `converged = false`; they never abort the batch.
pub fn run_replication(
    design: &SimulationDesign,
    methods: &[Method],
    reps: usize,
    seed: u64,
    settings: &MethodSettings,
) -> Result<Vec<ReplicationRow>> {
    design.validate()?;
    let mut rows = Vec::with_capacity(reps * methods.len());
    for rep in 0..reps {
        let rep_design = SimulationDesign {
            seed: replication_seed(seed, rep),
            ..design.clone()
        };
        let data = simulate_summary_panel(&rep_design)?;
        let (panel, _) = inject_pleiotropy(&data.panel, &rep_design, &data.sigma_beta_z)?;
        for &method in methods {
            let outcome = run_method(method, &panel, &data.nulls, settings, rep_design.seed)
                .and_then(|fit| Ok((score_fit(&fit, &data, settings.admm.delta)?, fit.converged)));
            let (metrics, converged) = match outcome {
                Ok(v) => v,
                Err(e) => {
                    warn!("{method} failed on replication {rep}: {e}");
                    let nan = f64::NAN;
                    (
                        SimMetrics {
                            entropy: nan,
                            quadratic: nan,
                            t1: nan,
                            t2: nan,
                        },
                        false,
                    )
                }
            };
            rows.push(ReplicationRow {
                method,
                rep,
                m: design.m,
                n: design.n,
                pleio: design.pleiotropy_fraction,
                metrics,
                converged,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub reps: usize,
    pub failed: usize,
    pub entropy: Quartiles,
    pub quadratic: Quartiles,
    pub t1: Quartiles,
    pub t2: Quartiles,
}

/// Median and quartiles per method, skipping failed rows.
pub fn summarize(rows: &[ReplicationRow]) -> Vec<MethodSummary> {
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|method| {
            let mine: Vec<&ReplicationRow> = rows.iter().filter(|r| r.method == method).collect();
            let ok: Vec<&&ReplicationRow> = mine.iter().filter(|r| r.metrics.entropy.is_finite()).collect();
            let q = |f: fn(&SimMetrics) -> f64| {
                let v: Vec<f64> = ok.iter().map(|r| f(&r.metrics)).collect();
                if v.is_empty() {
                    return Quartiles {
                        lower: f64::NAN,
                        median: f64::NAN,
                        upper: f64::NAN,
                    };
                }
                let (lower, median, upper) = quartiles(&v);
                Quartiles { lower, median, upper }
            };
            MethodSummary {
                method,
                reps: mine.len(),
                failed: mine.len() - ok.len(),
                entropy: q(|m| m.entropy),
                quadratic: q(|m| m.quadratic),
                t1: q(|m| m.t1),
                t2: q(|m| m.t2),
            }
        })
        .collect()
}

/// Tab-separated results table, one row per method and replication.
pub fn write_results_table<W: Write>(rows: &[ReplicationRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "method\trep\tm\tn\tpleio\tentropy\tquadratic\tt1\tt2\tconverged")?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.method,
            r.rep,
            r.m,
            r.n,
            r.pleio,
            r.metrics.entropy,
            r.metrics.quadratic,
            r.metrics.t1,
            r.metrics.t2,
            r.converged
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_small_case() {
        let (theta, scale) = build_ar_precision(3, ArStructure::Ar1, &[0.5]).unwrap();
        assert_eq!(scale, 1.0);
        assert_eq!(
            theta.to_rows(),
            vec![vec![1.0, 0.5, 0.0], vec![0.5, 1.0, 0.5], vec![0.0, 0.5, 1.0]]
        );
        assert!((theta.min_eigenvalue() - (1.0 - 0.5 * 2f64.sqrt())).abs() < 1e-12);
        let (id, _) = build_ar_precision(4, ArStructure::Ar1, &[0.0]).unwrap();
        assert_eq!(id, SymmetricMatrix::identity(4));
    }

    #[test]
    fn ar3_band_structure() {
        let (theta, _) = build_ar_precision(6, ArStructure::Ar3, &[0.4, 0.2, 0.1]).unwrap();
        for k in 0..6usize {
            for s in 0..6 {
                let lag = k.abs_diff(s);
                let want = [1.0, 0.4, 0.2, 0.1, 0.0, 0.0][lag];
                assert_eq!(theta[(k, s)], want);
            }
        }
        assert!(theta.is_positive_definite());
    }

    #[test]
    fn ar_rescales_to_floor() {
        let (theta, scale) = build_ar_precision(20, ArStructure::Ar1, &[0.9]).unwrap();
        assert!(scale < 1.0);
        assert!((theta.min_eigenvalue() - MIN_EIGENVALUE).abs() < 1e-10);
        assert!(build_ar_precision(5, ArStructure::Ar1, &[1.0]).is_err());
        assert!(build_ar_precision(5, ArStructure::Ar3, &[0.1]).is_err());
    }

    #[test]
    fn overlap_cases() {
        let ones = build_overlap_matrix(&[3], 1.0, 0.0).unwrap();
        assert!(ones.to_rows().concat().iter().all(|v| *v == 1.0));
        assert_eq!(
            build_overlap_matrix(&[2, 2], 0.0, 0.0).unwrap(),
            SymmetricMatrix::identity(4)
        );
        let o = build_overlap_matrix(&[2, 2], 0.8, 0.3).unwrap();
        assert_eq!(
            o.to_rows(),
            vec![
                vec![1.0, 0.8, 0.3, 0.3],
                vec![0.8, 1.0, 0.3, 0.3],
                vec![0.3, 0.3, 1.0, 0.8],
                vec![0.3, 0.3, 0.8, 1.0]
            ]
        );
        assert!(build_overlap_matrix(&[2], 1.2, 0.0).is_err());
    }

    fn ar1_truth() -> SymmetricMatrix {
        build_ar_precision(3, ArStructure::Ar1, &[0.5]).unwrap().0
    }

    #[test]
    fn edge_rates_hand_counts() {
        let truth = ar1_truth();
        let same = PrecisionFit::from_precision(truth.clone(), true, 1);
        assert_eq!(edge_error_rates(&same, &truth).unwrap(), (0.0, 0.0));
        let dense = PrecisionFit::from_precision(SymmetricMatrix::from_fn(3, |_, _| 0.3), true, 1);
        assert_eq!(edge_error_rates(&dense, &truth).unwrap(), (2.0 / 9.0, 0.0));
        let diag = PrecisionFit::from_precision(SymmetricMatrix::identity(3), true, 1);
        assert_eq!(edge_error_rates(&diag, &truth).unwrap(), (0.0, 4.0 / 9.0));
    }

    #[test]
    fn heritability_identity() {
        let d = SimulationDesign::new(6, ArStructure::Ar3, 500, 50_000, 1).unwrap();
        let data = simulate_summary_panel(&d).unwrap();
        for k in 0..6 {
            assert!((500.0 * data.sigma_beta[(k, k)] - 0.2).abs() < 1e-12);
        }
        assert_eq!(data.truth.off_diagonal_support().len(), 3 + 4 + 5);
    }

    #[test]
    fn pleiotropy_noop_cases() {
        let d = SimulationDesign::new(4, ArStructure::Ar1, 200, 50_000, 2).unwrap();
        let data = simulate_summary_panel(&d).unwrap();
        let (same, rows) = inject_pleiotropy(&data.panel, &d, &data.sigma_beta_z).unwrap();
        assert_eq!(same, data.panel);
        assert!(rows.is_empty());
        let mut zero_shift = d.clone().with_pleiotropy(0.99);
        zero_shift.pleiotropy_shift_multiplier = 0.0;
        let (same, _) = inject_pleiotropy(&data.panel, &zero_shift, &data.sigma_beta_z).unwrap();
        assert_eq!(same, data.panel);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
    }
}
