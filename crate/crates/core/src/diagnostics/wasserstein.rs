use nalgebra::SymmetricEigen;

use crate::error::{invalid, Error, Result};
use crate::linalg::{psd_sqrt, Mat};

fn check_psd(c: &Mat, name: &str) -> Result<()> {
    if !c.is_square() {
        return Err(Error::Shape(format!("{name} must be square")));
    }
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if (c - c.transpose()).iter().any(|v| v.abs() > 1e-10 * scale) {
        return Err(invalid(format!("{name} is not symmetric")));
    }
    let eig = SymmetricEigen::new(c.clone()).eigenvalues;
    if eig.min() < -1e-10 * scale {
        return Err(invalid(format!(
            "{name} is not positive semidefinite (min eigenvalue {:e})",
            eig.min()
        )));
    }
    Ok(())
}

/// Bures–Wasserstein distance between `N(m₁, C₁)` and `N(m₂, C₂)`:
/// `√(‖m₁−m₂‖² + tr(C₁ + C₂ − 2(C₂^{1/2} C₁ C₂^{1/2})^{1/2}))`.
pub fn gaussian_w2(mean1: &[f64], cov1: &Mat, mean2: &[f64], cov2: &Mat) -> Result<f64> {
    let d = mean1.len();
    if mean2.len() != d || cov1.shape() != (d, d) || cov2.shape() != (d, d) {
        return Err(Error::Shape(
            "means and covariances must agree in dimension".into(),
        ));
    }
    check_psd(cov1, "cov1")?;
    check_psd(cov2, "cov2")?;
    let shift: f64 = mean1.iter().zip(mean2).map(|(a, b)| (a - b).powi(2)).sum();
    let root2 = psd_sqrt(cov2)?;
    let cross = psd_sqrt(&(&root2 * cov1 * &root2))?;
    let bures = cov1.trace() + cov2.trace() - 2.0 * cross.trace();
    Ok((shift + bures.max(0.0)).sqrt())
}
