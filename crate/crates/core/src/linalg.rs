//! Dense small-matrix kernels: matrix exponential, φ-functions, Van Loan
//! covariance integrals and PSD factorizations.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};

pub type Mat = DMatrix<f64>;

// Coefficients of the [13/13] Padé approximant to exp.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &Mat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "expm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(invalid("expm input has non-finite entries"));
    }
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-s);
    let b = &PADE13;
    let id = Mat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| invalid("Padé denominator is singular"))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// `[φ₀(M), φ₁(M), …, φ_{p_max}(M)]` with φ₀ = e^M and
/// `φ_k(M) = ∫₀¹ e^{(1−θ)M} θ^{k−1}/(k−1)! dθ`.
///
/// All values come from a single exponential of the block matrix
/// `[[M, I, 0, …], [0, 0, I, …], …, [0, …, 0]]`, whose first block row is
/// exactly the φ sequence.
pub fn phi_functions(m: &Mat, p_max: usize) -> Result<Vec<Mat>> {
    if !m.is_square() {
        return Err(Error::Shape("phi_functions needs a square matrix".into()));
    }
    let k = m.nrows();
    let size = k * (p_max + 1);
    let mut aug = Mat::zeros(size, size);
    aug.view_mut((0, 0), (k, k)).copy_from(m);
    for blk in 0..p_max {
        for i in 0..k {
            aug[(blk * k + i, (blk + 1) * k + i)] = 1.0;
        }
    }
    let e = expm(&aug)?;
    Ok((0..=p_max)
        .map(|j| e.view((0, j * k), (k, k)).into_owned())
        .collect())
}

/// `∫₀^t e^{sA} Q e^{sAᵀ} ds` by Van Loan's block-triangular exponential.
pub fn van_loan_integral(a: &Mat, q: &Mat, t: f64) -> Result<Mat> {
    let k = a.nrows();
    if t == 0.0 {
        return Ok(Mat::zeros(k, k));
    }
    let mut c = Mat::zeros(2 * k, 2 * k);
    c.view_mut((0, 0), (k, k)).copy_from(&(-a * t));
    c.view_mut((0, k), (k, k)).copy_from(&(q * t));
    c.view_mut((k, k), (k, k)).copy_from(&(a.transpose() * t));
    let e = expm(&c)?;
    let f = e.view((k, k), (k, k));
    let g = e.view((0, k), (k, k));
    let out = f.transpose() * g;
    Ok(symmetrize(&out))
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Factor `F` with `F Fᵀ ≈ sigma` via symmetric eigendecomposition.
///
/// Rows and columns that are identically zero are carried through as exact
/// zero rows of `F`. Small negative eigenvalues are clipped to zero; anything
/// below `−1e−8 · λ_max` is rejected.
pub fn psd_factor(sigma: &Mat) -> Result<Mat> {
    let n = sigma.nrows();
    if !sigma.is_square() {
        return Err(Error::Shape("covariance must be square".into()));
    }
    let scale = max_abs(sigma).max(f64::MIN_POSITIVE);
    if max_abs(&(sigma - sigma.transpose())) > 1e-10 * scale {
        return Err(invalid("covariance is not symmetric"));
    }
    let active: Vec<usize> = (0..n)
        .filter(|&i| sigma.row(i).iter().any(|v| *v != 0.0))
        .collect();
    let mut f = Mat::zeros(n, n);
    if active.is_empty() {
        return Ok(f);
    }
    let sub = Mat::from_fn(active.len(), active.len(), |i, j| {
        sigma[(active[i], active[j])]
    });
    let eig = SymmetricEigen::new(symmetrize(&sub));
    let max_eig = eig.eigenvalues.max();
    let min_eig = eig.eigenvalues.min();
    if min_eig < -1e-8 * max_eig.max(0.0) || max_eig < 0.0 {
        return Err(Error::NotPsd { min_eig, max_eig });
    }
    for (c, lambda) in eig.eigenvalues.iter().enumerate() {
        let root = lambda.max(0.0).sqrt();
        for (r, &row) in active.iter().enumerate() {
            f[(row, c)] = eig.eigenvectors[(r, c)] * root;
        }
    }
    Ok(f)
}

/// Principal square root of a symmetric PSD matrix (eigenvalues clipped at 0).
pub fn psd_sqrt(a: &Mat) -> Result<Mat> {
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    if max_abs(&(a - a.transpose())) > 1e-8 * scale {
        return Err(invalid("matrix is not symmetric"));
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let max_eig = eig.eigenvalues.max();
    let min_eig = eig.eigenvalues.min();
    if min_eig < -1e-8 * max_eig.max(1.0) {
        return Err(Error::NotPsd { min_eig, max_eig });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(symmetrize(
        &(v * Mat::from_diagonal(&roots) * v.transpose()),
    ))
}

/// Largest singular value.
pub fn spectral_norm(a: &Mat) -> f64 {
    a.clone().svd(false, false).singular_values.max()
}
