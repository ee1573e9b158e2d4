//! Tuning-parameter choice and edge pruning by subsampling.
//!
//! Stage one picks `λ` from a grid by subsampled cross-validation of the
//! entropy loss: each split fits on a `⌊c_s m⌋` row subsample and scores the
//! fit against the covariance of the remaining rows. Stage two refits at the
//! chosen `λ` on `H` fresh subsamples, records how often each edge is
//! selected, and zeroes every edge whose frequency falls below `c_t` in the
//! full-data fit. `1 − frequency` is reported as an empirical p-value.
//!
//! Subsamples are drawn over variant rows and the whole covariance pipeline
//! re-runs on each one. Every subsample's index set is derived from the seed
//! and the subsample number alone, so results do not depend on scheduling.

use log::debug;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::{CorrelationPipeline, ErrorCovariance, SummaryPanel};
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::solver::{entropy_loss, AdmmConfig, AdmmSolver, AdmmState, PenaltySpec, PrecisionFit};
use crate::stats::sample_sd;

const CV_STREAM: u64 = 0x43_56;
const STABILITY_STREAM: u64 = 0x53_54;

/// Smallest number of rows that can be split into train and test halves.
pub const MIN_ROWS_TO_SPLIT: usize = 10;

/// Anything that can re-estimate the genetic correlation from a subset of variant rows.
pub trait CovarianceSource {
    fn n_rows(&self) -> usize;

    /// Floored correlation estimate from the given rows.
    fn estimate(&self, rows: &[usize]) -> Result<SymmetricMatrix>;

    fn estimate_all(&self) -> Result<SymmetricMatrix> {
        let all: Vec<usize> = (0..self.n_rows()).collect();
        self.estimate(&all)
    }
}

/// Re-runs a [`CorrelationPipeline`] on row subsets of a panel.
///
/// The error covariance is estimated once from the full null panel and reused
/// for every subsample.
#[derive(Debug, Clone, Copy)]
pub struct PanelSource<'a> {
    pub panel: &'a SummaryPanel,
    pub err: &'a ErrorCovariance,
    pub pipeline: CorrelationPipeline,
}

impl CovarianceSource for PanelSource<'_> {
    fn n_rows(&self) -> usize {
        self.panel.n_variants()
    }

    fn estimate(&self, rows: &[usize]) -> Result<SymmetricMatrix> {
        if rows.len() == self.panel.n_variants() && rows.iter().enumerate().all(|(i, &r)| i == r) {
            return self.pipeline.run(self.panel, self.err);
        }
        self.pipeline.run(&self.panel.select_rows(rows)?, self.err)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Ascending candidate values in `(0, 2)`.
    pub lambda_grid: Vec<f64>,
    /// Stability-selection subsample count `H`.
    pub subsamples: usize,
    /// Number of cross-validation splits averaged per `λ`.
    pub cv_splits: usize,
    /// Subsample fraction `c_s`.
    pub subsample_fraction: f64,
    /// Frequency threshold `c_t`.
    pub threshold: f64,
    pub seed: u64,
}

impl SelectionConfig {
    pub fn new(seed: u64) -> Self {
        SelectionConfig {
            lambda_grid: default_lambda_grid(),
            subsamples: 100,
            cv_splits: 100,
            subsample_fraction: 0.5,
            threshold: 0.95,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.lambda_grid.is_empty() {
            return bad("lambda grid is empty");
        }
        if self.lambda_grid.iter().any(|l| !(*l > 0.0 && *l < 2.0)) {
            return bad("lambda grid values must lie in (0, 2)");
        }
        if self.lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("lambda grid must be strictly ascending");
        }
        if self.subsamples == 0 || self.cv_splits == 0 {
            return bad("subsample counts must be >= 1");
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction < 1.0) {
            return bad("subsample fraction must lie in (0, 1)");
        }
        if !(self.threshold >= 0.5 && self.threshold < 1.0) {
            return bad("frequency threshold must lie in [0.5, 1)");
        }
        Ok(())
    }
}

/// Sixteen log-spaced values from 0.001 to 1.
pub fn default_lambda_grid() -> Vec<f64> {
    let n = 16;
    (0..n)
        .map(|i| 10f64.powf(-3.0 + 3.0 * i as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CveRow {
    pub lambda: f64,
    pub mean_cve: f64,
    pub sd_cve: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda_cv: f64,
    pub table: Vec<CveRow>,
}

#[derive(Debug, Clone)]
pub struct StabilityResult {
    pub lambda_cv: f64,
    /// Selection frequencies, unit diagonal.
    pub frequencies: SymmetricMatrix,
    pub pruned_fit: PrecisionFit,
    /// `1 − frequencies`.
    pub pvalues: SymmetricMatrix,
    /// Number of subsample fits that hit the iteration limit.
    pub unconverged_subsamples: usize,
}

fn mix(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the combined key
    let mut z = seed ^ stream.rotate_left(32) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sorted row indices of subsample `h`, size `⌊fraction · m⌋`.
pub fn subsample_rows(m: usize, fraction: f64, seed: u64, stream: u64, h: usize) -> Vec<usize> {
    let size = ((fraction * m as f64).floor() as usize).clamp(1, m);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, stream, h as u64));
    let mut rows = index::sample(&mut rng, m, size).into_vec();
    rows.sort_unstable();
    rows
}

fn complement(m: usize, rows: &[usize]) -> Vec<usize> {
    let mut keep = vec![true; m];
    for &r in rows {
        keep[r] = false;
    }
    (0..m).filter(|&r| keep[r]).collect()
}

/// Entropy loss of a fit against a test covariance; fits that lost positive
/// definiteness are floored at `delta` first.
fn held_out_entropy(test: &SymmetricMatrix, fit: &PrecisionFit, delta: f64) -> Result<f64> {
    match entropy_loss(test, &fit.precision) {
        Ok(v) => Ok(v),
        Err(_) => entropy_loss(test, &fit.precision.clip_eigenvalues(delta)?),
    }
}

fn check_rows(source: &impl CovarianceSource) -> Result<usize> {
    let m = source.n_rows();
    if m < MIN_ROWS_TO_SPLIT {
        return Err(Error::PanelTooSmall(format!(
            "need at least {MIN_ROWS_TO_SPLIT} variants to subsample, got {m}"
        )));
    }
    Ok(m)
}

/// Mean held-out entropy loss per grid value over `cv_splits` splits.
pub fn cross_validate_lambda(
    source: &impl CovarianceSource,
    config: &SelectionConfig,
    penalty: &PenaltySpec,
    admm: &AdmmConfig,
) -> Result<CvResult> {
    config.validate()?;
    let m = check_rows(source)?;
    cross_validate_with(source, config, penalty, admm, |h| {
        let train = subsample_rows(m, config.subsample_fraction, config.seed, CV_STREAM, h);
        let test = complement(m, &train);
        (train, test)
    })
}

pub(crate) fn cross_validate_with(
    source: &impl CovarianceSource,
    config: &SelectionConfig,
    penalty: &PenaltySpec,
    admm: &AdmmConfig,
    split: impl Fn(usize) -> (Vec<usize>, Vec<usize>),
) -> Result<CvResult> {
    config.validate()?;
    let grid = &config.lambda_grid;
    if grid.len() == 1 {
        return Ok(CvResult {
            lambda_cv: grid[0],
            table: vec![CveRow {
                lambda: grid[0],
                mean_cve: f64::NAN,
                sd_cve: f64::NAN,
            }],
        });
    }
    let mut scores = vec![Vec::with_capacity(config.cv_splits); grid.len()];
    for h in 0..config.cv_splits {
        let (train_rows, test_rows) = split(h);
        let train = source.estimate(&train_rows)?;
        let test = source.estimate(&test_rows)?;
        let mut warm: Option<AdmmState> = None;
        for (i, &lambda) in grid.iter().enumerate() {
            let solver = AdmmSolver::new(&train, penalty.with_lambda(lambda)?, *admm)?;
            let (fit, state) = solver.run(warm.take())?;
            scores[i].push(held_out_entropy(&test, &fit, admm.delta)?);
            warm = Some(state);
        }
    }
    let table: Vec<CveRow> = grid
        .iter()
        .zip(&scores)
        .map(|(&lambda, s)| CveRow {
            lambda,
            mean_cve: s.iter().sum::<f64>() / s.len() as f64,
            sd_cve: if s.len() > 1 { sample_sd(s) } else { 0.0 },
        })
        .collect();
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean_cve < table[best].mean_cve {
            best = i;
        }
    }
    debug!("cross-validation picked lambda = {}", table[best].lambda);
    Ok(CvResult {
        lambda_cv: table[best].lambda,
        table,
    })
}

/// Turns per-subsample supports into a symmetric frequency matrix with unit diagonal.
pub fn selection_frequencies(p: usize, supports: &[Vec<(usize, usize)>]) -> SymmetricMatrix {
    let mut counts = vec![0usize; p * p];
    for support in supports {
        for &(k, s) in support {
            counts[k * p + s] += 1;
        }
    }
    let h = supports.len() as f64;
    SymmetricMatrix::from_fn(p, |k, s| if k == s { 1.0 } else { counts[k * p + s] as f64 / h })
}

/// Zeroes every off-diagonal entry whose frequency is below `threshold`.
///
/// When zeroing leaves the matrix under the eigenvalue floor, the problem is
/// re-solved with the pruned entries pinned at zero, starting from `state`.
pub fn prune_fit(
    sigma: &SymmetricMatrix,
    fit: &PrecisionFit,
    state: AdmmState,
    frequencies: &SymmetricMatrix,
    threshold: f64,
    penalty: &PenaltySpec,
    admm: &AdmmConfig,
) -> Result<PrecisionFit> {
    let p = sigma.dim();
    let dropped: Vec<(usize, usize)> = (0..p)
        .flat_map(|k| ((k + 1)..p).map(move |s| (k, s)))
        .filter(|&(k, s)| frequencies[(k, s)] < threshold)
        .collect();
    let pruned = fit.precision.map_entries(|k, s, v| {
        if k != s && frequencies[(k, s)] < threshold {
            0.0
        } else {
            v
        }
    });
    let slack = (admm.tol_primal + admm.tol_dual) * p as f64;
    if pruned.min_eigenvalue() >= admm.delta - slack {
        let mut out = PrecisionFit::from_precision(pruned, fit.converged, fit.iterations);
        out.objective = fit.objective;
        return Ok(out);
    }
    debug!(
        "pruning broke the eigenvalue floor; refitting with {} pinned zeros",
        dropped.len()
    );
    let solver = AdmmSolver::new(sigma, *penalty, *admm)?.with_forced_zeros(&dropped);
    Ok(solver.run(Some(state))?.0)
}

/// Subsample frequencies at `lambda_cv` and the pruned full-data fit.
pub fn stability_select(
    source: &impl CovarianceSource,
    lambda_cv: f64,
    config: &SelectionConfig,
    penalty: &PenaltySpec,
    admm: &AdmmConfig,
) -> Result<StabilityResult> {
    config.validate()?;
    let m = check_rows(source)?;
    let penalty = penalty.with_lambda(lambda_cv)?;
    let full = source.estimate_all()?;
    let p = full.dim();

    let mut supports = Vec::with_capacity(config.subsamples);
    let mut unconverged = 0;
    for h in 0..config.subsamples {
        let rows = subsample_rows(m, config.subsample_fraction, config.seed, STABILITY_STREAM, h);
        let sigma = source.estimate(&rows)?;
        let (fit, _) = AdmmSolver::new(&sigma, penalty, *admm)?.run(None)?;
        if !fit.converged {
            unconverged += 1;
        }
        supports.push(fit.support);
    }
    let frequencies = selection_frequencies(p, &supports);

    let (full_fit, state) = AdmmSolver::new(&full, penalty, *admm)?.run(None)?;
    let pruned_fit = prune_fit(&full, &full_fit, state, &frequencies, config.threshold, &penalty, admm)?;
    let pvalues = frequencies.map_entries(|_, _, v| 1.0 - v);
    Ok(StabilityResult {
        lambda_cv,
        frequencies,
        pruned_fit,
        pvalues,
        unconverged_subsamples: unconverged,
    })
}

/// Cross-validation followed by stability selection.
#[derive(Debug, Clone)]
pub struct Selection {
    pub cv: CvResult,
    pub stability: StabilityResult,
}

pub fn select_network(
    source: &impl CovarianceSource,
    config: &SelectionConfig,
    penalty: &PenaltySpec,
    admm: &AdmmConfig,
) -> Result<Selection> {
    let cv = cross_validate_lambda(source, config, penalty, admm)?;
    let stability = stability_select(source, cv.lambda_cv, config, penalty, admm)?;
    Ok(Selection { cv, stability })
}
