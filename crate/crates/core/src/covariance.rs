//! Genetic and estimation-error covariance estimators on the Z-score scale.
//!
//! A [`SummaryPanel`] holds one row of Z-scores per independent variant. The
//! estimation-error covariance is the second moment of a [`NullPanel`] of
//! variants with no effect on any trait; it is subtracted from either the
//! Pearson second moment or the robust Spearman/MAD covariance of the panel.
//! [`genetic_correlation`] turns the (possibly indefinite) result into a
//! positive definite correlation matrix that the solver can consume.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::stats::{median, midranks};

/// Consistency constant turning a MAD into a normal standard deviation.
pub const MAD_CONSTANT: f64 = 1.483;

/// Default eigenvalue floor applied before the correlation rescaling.
pub const DEFAULT_COVARIANCE_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryPanel {
    z: DMatrix<f64>,
    traits: Vec<String>,
    sample_sizes: Vec<u64>,
}

impl SummaryPanel {
    pub fn new(z: DMatrix<f64>, traits: Vec<String>, sample_sizes: Vec<u64>) -> Result<Self> {
        let (m, p) = z.shape();
        if m < 2 || p < 2 {
            return Err(Error::PanelTooSmall(format!(
                "summary panel needs at least 2 variants and 2 traits, got {m}x{p}"
            )));
        }
        if traits.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: traits.len(),
            });
        }
        if sample_sizes.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: sample_sizes.len(),
            });
        }
        if sample_sizes.contains(&0) {
            return Err(Error::InvalidParameter("sample sizes must be positive".into()));
        }
        check_finite(&z)?;
        Ok(SummaryPanel {
            z,
            traits,
            sample_sizes,
        })
    }

    /// Panel with generated labels `T1..Tp` and a common sample size.
    pub fn unlabeled(z: DMatrix<f64>, sample_size: u64) -> Result<Self> {
        let p = z.ncols();
        let traits = (1..=p).map(|k| format!("T{k}")).collect();
        Self::new(z, traits, vec![sample_size; p])
    }

    pub fn n_variants(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_traits(&self) -> usize {
        self.z.ncols()
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn traits(&self) -> &[String] {
        &self.traits
    }

    pub fn sample_sizes(&self) -> &[u64] {
        &self.sample_sizes
    }

    pub fn column(&self, k: usize) -> &[f64] {
        // column-major storage keeps each trait contiguous
        &self.z.as_slice()[k * self.n_variants()..(k + 1) * self.n_variants()]
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.z.row(j).iter().copied().collect()
    }

    /// Panel restricted to `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let p = self.n_traits();
        let z = DMatrix::from_fn(rows.len(), p, |j, k| self.z[(rows[j], k)]);
        Self::new(z, self.traits.clone(), self.sample_sizes.clone())
    }
}

fn check_finite(z: &DMatrix<f64>) -> Result<()> {
    match z.iter().position(|v| !v.is_finite()) {
        Some(idx) => Err(Error::NonFinite {
            row: idx % z.nrows(),
            col: idx / z.nrows(),
        }),
        None => Ok(()),
    }
}

/// Z-scores of variants that are not associated with any trait.
#[derive(Debug, Clone, PartialEq)]
pub struct NullPanel {
    b: DMatrix<f64>,
}

impl NullPanel {
    pub fn new(b: DMatrix<f64>) -> Result<Self> {
        if b.ncols() == 0 || b.nrows() == 0 {
            return Err(Error::PanelTooSmall("null panel is empty".into()));
        }
        check_finite(&b)?;
        Ok(NullPanel { b })
    }

    pub fn n_variants(&self) -> usize {
        self.b.nrows()
    }

    pub fn n_traits(&self) -> usize {
        self.b.ncols()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCovariance {
    pub matrix: SymmetricMatrix,
}

impl ErrorCovariance {
    /// No error correction; used by the uncorrected baselines.
    pub fn zero(p: usize) -> Self {
        ErrorCovariance {
            matrix: SymmetricMatrix::zeros(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Pearson,
    Spearman,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(Estimator::Pearson),
            "spearman" => Ok(Estimator::Spearman),
            other => Err(Error::InvalidParameter(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneticCovariance {
    pub matrix: SymmetricMatrix,
    pub estimator: Estimator,
    pub floor_applied: bool,
}

/// `(1/M) Σ b_j b_jᵀ` without the rank check of [`estimate_error_covariance`].
pub fn outer_product_mean(b: &DMatrix<f64>) -> SymmetricMatrix {
    let m = b.nrows() as f64;
    SymmetricMatrix::symmetrize(b.transpose() * b / m)
}

/// Second moment of the null panel, on the Z-score scale.
pub fn estimate_error_covariance(nulls: &NullPanel) -> Result<ErrorCovariance> {
    let (m, p) = nulls.b.shape();
    if m < p {
        return Err(Error::InsufficientNulls { needed: p, found: m });
    }
    let matrix = outer_product_mean(&nulls.b);
    for (k, d) in matrix.diagonal().into_iter().enumerate() {
        if !(0.5..1.5).contains(&d) {
            warn!("error covariance diagonal {k} = {d:.4} is outside the expected band (0.5, 1.5)");
        }
    }
    Ok(ErrorCovariance { matrix })
}

fn check_dims(panel: &SummaryPanel, err: &ErrorCovariance) -> Result<()> {
    if err.matrix.dim() != panel.n_traits() {
        return Err(Error::DimensionMismatch {
            expected: panel.n_traits(),
            found: err.matrix.dim(),
        });
    }
    Ok(())
}

/// Sum of products accumulated in sorted order so the result does not depend
/// on the row order of the inputs.
fn order_free_dot(a: &[f64], b: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(a.iter().zip(b).map(|(x, y)| x * y));
    scratch.sort_unstable_by(f64::total_cmp);
    scratch.iter().sum()
}

/// Uncentered second moment `(1/m) Σ z_j z_jᵀ`.
pub fn second_moment(panel: &SummaryPanel) -> SymmetricMatrix {
    let m = panel.n_variants() as f64;
    let mut scratch = Vec::with_capacity(panel.n_variants());
    SymmetricMatrix::from_fn(panel.n_traits(), |k, s| {
        order_free_dot(panel.column(k), panel.column(s), &mut scratch) / m
    })
}

/// `(1/m) Σ z_j z_jᵀ − Σ̂_ω`; may be indefinite.
pub fn pearson_covariance(panel: &SummaryPanel, err: &ErrorCovariance) -> Result<GeneticCovariance> {
    check_dims(panel, err)?;
    Ok(GeneticCovariance {
        matrix: &second_moment(panel) - &err.matrix,
        estimator: Estimator::Pearson,
        floor_applied: false,
    })
}

/// Maps a Spearman rank correlation to the Pearson scale under normality.
pub fn sine_transform(rho: f64) -> f64 {
    if rho >= 1.0 {
        1.0
    } else if rho <= -1.0 {
        -1.0
    } else {
        2.0 * (std::f64::consts::PI * rho / 6.0).sin()
    }
}

/// Rank correlation between two midrank vectors of equal length.
fn rank_correlation(rk: &[f64], rs: &[f64]) -> f64 {
    let m = rk.len() as f64;
    let centre = 0.5 * (m + 1.0);
    if rk == rs {
        return 1.0;
    }
    if rk.iter().zip(rs).all(|(a, b)| a + b == m + 1.0) {
        return -1.0;
    }
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rk.iter().zip(rs) {
        let (x, y) = (a - centre, b - centre);
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Spearman correlation of every trait pair, mapped through [`sine_transform`].
pub fn spearman_correlation(panel: &SummaryPanel) -> Result<SymmetricMatrix> {
    if panel.n_variants() < 3 {
        return Err(Error::PanelTooSmall(
            "spearman correlation needs at least 3 variants".into(),
        ));
    }
    let p = panel.n_traits();
    let mut ranks = Vec::with_capacity(p);
    for k in 0..p {
        let col = panel.column(k);
        if col.iter().all(|v| *v == col[0]) {
            return Err(Error::DegenerateColumn(panel.traits[k].clone()));
        }
        ranks.push(midranks(col));
    }
    Ok(SymmetricMatrix::from_fn(p, |k, s| {
        if k == s {
            1.0
        } else {
            sine_transform(rank_correlation(&ranks[k], &ranks[s]))
        }
    }))
}

/// `1.483 · median |x_j − median(x)|`.
pub fn mad_scale(x: &[f64]) -> f64 {
    let centre = median(x);
    let deviations: Vec<f64> = x.iter().map(|v| (v - centre).abs()).collect();
    MAD_CONSTANT * median(&deviations)
}

/// Robust covariance `D R D − Σ̂_ω` with MAD scales `D` and Spearman correlation `R`.
pub fn spearman_covariance(panel: &SummaryPanel, err: &ErrorCovariance) -> Result<GeneticCovariance> {
    check_dims(panel, err)?;
    let r = spearman_correlation(panel)?;
    let d: Vec<f64> = (0..panel.n_traits()).map(|k| mad_scale(panel.column(k))).collect();
    Ok(GeneticCovariance {
        matrix: &r.scale_by_diagonal(&d) - &err.matrix,
        estimator: Estimator::Spearman,
        floor_applied: false,
    })
}

pub fn genetic_covariance(
    panel: &SummaryPanel,
    err: &ErrorCovariance,
    estimator: Estimator,
) -> Result<GeneticCovariance> {
    match estimator {
        Estimator::Pearson => pearson_covariance(panel, err),
        Estimator::Spearman => spearman_covariance(panel, err),
    }
}

/// Floors the spectrum at `floor` and rescales to a correlation matrix.
///
/// Rescaling can pull the smallest eigenvalue back under the floor; in that
/// case the correlation is shrunk towards the identity by the smallest amount
/// that restores `σ_min = floor`, which keeps the diagonal at exactly one.
pub fn genetic_correlation(cov: &GeneticCovariance, floor: f64) -> Result<GeneticCovariance> {
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "correlation floor must lie in (0, 1), got {floor}"
        )));
    }
    let clipped = cov.matrix.clip_eigenvalues(floor)?;
    let mut r = clipped.cov2cor()?;
    let min = r.min_eigenvalue();
    if min < floor {
        let t = (floor - min) / (1.0 - min);
        r = r.map_entries(|k, s, v| if k == s { 1.0 } else { (1.0 - t) * v });
    }
    Ok(GeneticCovariance {
        matrix: r,
        estimator: cov.estimator,
        floor_applied: true,
    })
}

/// Per-trait `Σ (z² − 1) / Σ z²`.
pub fn reliability_ratio(panel: &SummaryPanel) -> Result<Vec<f64>> {
    (0..panel.n_traits())
        .map(|k| {
            let col = panel.column(k);
            let ss: f64 = col.iter().map(|z| z * z).sum();
            if ss == 0.0 {
                return Err(Error::UndefinedRatio(panel.traits[k].clone()));
            }
            Ok((ss - col.len() as f64) / ss)
        })
        .collect()
}

/// Estimator settings for turning a panel into a floored genetic correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPipeline {
    pub estimator: Estimator,
    /// When false the error covariance is ignored (uncorrected baseline).
    pub subtract_error: bool,
    pub floor: f64,
}

impl CorrelationPipeline {
    pub fn corrected(estimator: Estimator) -> Self {
        CorrelationPipeline {
            estimator,
            subtract_error: true,
            floor: DEFAULT_COVARIANCE_FLOOR,
        }
    }

    pub fn uncorrected(estimator: Estimator) -> Self {
        CorrelationPipeline {
            subtract_error: false,
            ..Self::corrected(estimator)
        }
    }

    pub fn run(&self, panel: &SummaryPanel, err: &ErrorCovariance) -> Result<SymmetricMatrix> {
        let cov = if self.subtract_error {
            genetic_covariance(panel, err, self.estimator)?
        } else {
            genetic_covariance(panel, &ErrorCovariance::zero(panel.n_traits()), self.estimator)?
        };
        Ok(genetic_correlation(&cov, self.floor)?.matrix)
    }
}
