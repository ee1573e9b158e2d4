use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

fn check_same_dim(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// `log det(Σ Θ)`, via Cholesky when both factors are positive definite and
/// via the determinant of the product otherwise.
fn log_det_product(sigma: &SymmetricMatrix, theta: &SymmetricMatrix) -> Result<f64> {
    if let (Ok(a), Ok(b)) = (sigma.log_det(), theta.log_det()) {
        return Ok(a + b);
    }
    let det = (sigma.as_matrix() * theta.as_matrix()).determinant();
    if det > 0.0 && det.is_finite() {
        Ok(det.ln())
    } else {
        Err(Error::NonPositiveDeterminant)
    }
}

/// `tr(ΣΘ) − log det(ΣΘ) − p`; zero exactly when `Θ = Σ⁻¹`.
pub fn entropy_loss(sigma: &SymmetricMatrix, theta: &SymmetricMatrix) -> Result<f64> {
    check_same_dim(sigma, theta)?;
    let p = sigma.dim() as f64;
    Ok(sigma.trace_product(theta) - log_det_product(sigma, theta)? - p)
}

/// `‖ΣΘ − I‖_F²`.
pub fn quadratic_loss(sigma: &SymmetricMatrix, theta: &SymmetricMatrix) -> Result<f64> {
    check_same_dim(sigma, theta)?;
    let mut prod = sigma.as_matrix() * theta.as_matrix();
    for k in 0..sigma.dim() {
        prod[(k, k)] -= 1.0;
    }
    Ok(prod.norm_squared())
}

/// `m (tr(ΣΘ) − log det Θ) + log(m) · |edges|`.
pub fn bic_score(sigma: &SymmetricMatrix, precision: &SymmetricMatrix, m: usize) -> Result<f64> {
    check_same_dim(sigma, precision)?;
    if m == 0 {
        return Err(Error::InvalidParameter("BIC needs m >= 1".into()));
    }
    let log_det = precision.log_det()?;
    let edges = precision.off_diagonal_support().len() as f64;
    let m = m as f64;
    Ok(m * (sigma.trace_product(precision) - log_det) + m.ln() * edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_hand_value() {
        let i2 = SymmetricMatrix::identity(2);
        let two = i2.scale(2.0);
        let want = 2.0 * (1.0 - 2f64.ln());
        assert!((entropy_loss(&i2, &two).unwrap() - want).abs() < 1e-14);
        assert!(entropy_loss(&i2, &i2).unwrap().abs() < 1e-15);
    }

    #[test]
    fn entropy_rejects_negative_determinant() {
        let i2 = SymmetricMatrix::identity(2);
        let neg = SymmetricMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(entropy_loss(&i2, &neg), Err(Error::NonPositiveDeterminant)));
    }

    #[test]
    fn quadratic_hand_value() {
        let i4 = SymmetricMatrix::identity(4);
        assert!((quadratic_loss(&i4, &i4.scale(2.0)).unwrap() - 4.0).abs() < 1e-15);
        assert!(quadratic_loss(&i4, &SymmetricMatrix::identity(3)).is_err());
    }

    #[test]
    fn bic_hand_value_2x2() {
        let sigma = SymmetricMatrix::from_rows(&[&[1.0, 0.5], &[0.5, 1.0]]).unwrap();
        let theta = SymmetricMatrix::from_rows(&[&[2.0, -0.5], &[-0.5, 2.0]]).unwrap();
        // tr(ΣΘ) = 2 + 2 - 0.25 - 0.25 = 3.5, det Θ = 3.75
        let want = 100.0 * (3.5 - 3.75f64.ln()) + 100f64.ln();
        assert!((bic_score(&sigma, &theta, 100).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn bic_prefers_sparser_fit_with_equal_fit_term() {
        let sigma = SymmetricMatrix::identity(3);
        let sparse = SymmetricMatrix::identity(3);
        let mut dense = SymmetricMatrix::identity(3);
        // tiny entries leave the fit term essentially unchanged but add edges
        dense.set(0, 1, 1e-300);
        dense.set(1, 2, 1e-300);
        let a = bic_score(&sigma, &sparse, 50).unwrap();
        let b = bic_score(&sigma, &dense, 50).unwrap();
        assert!(b > a);
        assert!((b - a - 2.0 * 50f64.ln()).abs() < 1e-9);
    }
}
