//! Dense Hermitian linear algebra shared by the operator modules.
//!
//! Every cochain operator is a complex matrix; real-orthogonal bundles simply
//! never populate the imaginary parts. Routines detect that case and drop to
//! real arithmetic, which roughly quarters the cost of an eigensolve.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<Complex64>;
pub type Vector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn is_real(m: &Mat) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn real_part(m: &Mat) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub fn from_real(m: &DMatrix<f64>) -> Mat {
    m.map(c)
}

pub fn hermitian_part(m: &Mat) -> Mat {
    (m + m.adjoint()).scale(0.5)
}

/// Frobenius norm of `a - b` divided by `max(|a|, |b|, floor)`.
pub fn relative_difference(a: &Mat, b: &Mat, floor: f64) -> f64 {
    let diff = (a - b).norm();
    if diff == 0.0 {
        return 0.0;
    }
    diff / a.norm().max(b.norm()).max(floor)
}

/// Ascending eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let h = hermitian_part(m);
    let mut values: Vec<f64> = if is_real(&h) {
        real_part(&h).symmetric_eigenvalues().iter().copied().collect()
    } else {
        SymmetricEigen::new(h).eigenvalues.iter().copied().collect()
    };
    values.sort_by(f64::total_cmp);
    values
}

/// Lower Cholesky factor of a Hermitian positive-definite matrix.
pub fn cholesky_factor(m: &Mat, what: &str) -> Result<Mat> {
    let h = hermitian_part(m);
    let factor = if is_real(&h) {
        Cholesky::new(real_part(&h)).map(|ch| from_real(&ch.unpack()))
    } else {
        Cholesky::new(h).map(|ch| ch.unpack())
    };
    factor.ok_or_else(|| not_positive_definite(m, what))
}

fn not_positive_definite(m: &Mat, what: &str) -> Error {
    let min = hermitian_eigenvalues(m).first().copied().unwrap_or(f64::NAN);
    Error::NotPositiveDefinite {
        what: what.to_string(),
        min_eigenvalue: min,
    }
}

/// `log det m` for Hermitian positive-definite `m`; zero for an empty matrix.
pub fn log_det_hpd(m: &Mat, what: &str) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let l = cholesky_factor(m, what)?;
    Ok(2.0 * l.diagonal().iter().map(|z| z.re.ln()).sum::<f64>())
}

/// Solves `m x = rhs` for Hermitian positive-definite `m`.
pub fn solve_hpd(m: &Mat, rhs: &Mat, what: &str) -> Result<Mat> {
    if m.nrows() == 0 {
        return Ok(Mat::zeros(0, rhs.ncols()));
    }
    let h = hermitian_part(m);
    if is_real(&h) && is_real(rhs) {
        let ch = Cholesky::new(real_part(&h)).ok_or_else(|| not_positive_definite(m, what))?;
        Ok(from_real(&ch.solve(&real_part(rhs))))
    } else {
        let ch = Cholesky::new(h).ok_or_else(|| not_positive_definite(m, what))?;
        Ok(ch.solve(rhs))
    }
}

pub fn inverse_hpd(m: &Mat, what: &str) -> Result<Mat> {
    solve_hpd(m, &Mat::identity(m.nrows(), m.nrows()), what)
}

/// Ascending eigenvalues of `q⁻¹ a` for Hermitian `a` and positive-definite
/// `q`, computed as the spectrum of `L⁻¹ a L⁻†` with `q = L L†`.
pub fn pencil_eigenvalues(a: &Mat, q: &Mat, what: &str) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if is_real(a) && is_real(q) {
        let l = Cholesky::new(real_part(&hermitian_part(q)))
            .ok_or_else(|| not_positive_definite(q, what))?
            .unpack();
        let x = l
            .solve_lower_triangular(&real_part(a))
            .ok_or_else(|| Error::Singular(what.to_string()))?;
        let y = l
            .solve_lower_triangular(&x.transpose())
            .ok_or_else(|| Error::Singular(what.to_string()))?;
        return Ok(hermitian_eigenvalues(&from_real(&y)));
    }
    let l = cholesky_factor(q, what)?;
    let x = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Singular(what.to_string()))?;
    let y = l
        .solve_lower_triangular(&x.adjoint())
        .ok_or_else(|| Error::Singular(what.to_string()))?;
    Ok(hermitian_eigenvalues(&y))
}

/// Submatrix with the given row and column indices.
pub fn select(m: &Mat, rows: &[usize], cols: &[usize]) -> Mat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn select_vector(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Expands vertex (or simplex) indices into fiber-basis indices.
pub fn fiber_indices(simplices: &[usize], rank: usize) -> Vec<usize> {
    simplices
        .iter()
        .flat_map(|&s| (0..rank).map(move |a| s * rank + a))
        .collect()
}

/// The sesquilinear form `x† m y`.
pub fn form(m: &Mat, x: &Vector, y: &Vector) -> Complex64 {
    (x.adjoint() * m * y)[(0, 0)]
}

/// Block-diagonal matrix from square blocks.
pub fn block_diagonal(blocks: &[Mat]) -> Mat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(n, n);
    let mut offset = 0;
    for b in blocks {
        out.view_mut((offset, offset), (b.nrows(), b.ncols())).copy_from(b);
        offset += b.nrows();
    }
    out
}

/// Schur complement of the `elim` block: `m_kk - m_ke m_ee⁻¹ m_ek`.
pub fn schur_complement(m: &Mat, keep: &[usize], elim: &[usize], what: &str) -> Result<Mat> {
    let m_kk = select(m, keep, keep);
    if elim.is_empty() {
        return Ok(m_kk);
    }
    let m_ke = select(m, keep, elim);
    let m_ee = select(m, elim, elim);
    let m_ek = select(m, elim, keep);
    let x = solve_hpd(&m_ee, &m_ek, what)?;
    Ok(m_kk - m_ke * x)
}
