//! Small dense Hermitian-matrix helpers shared by the engines and the oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance on Hermiticity, PSD-ness and trace for fidelity inputs.
pub const STATE_TOLERANCE: f64 = 1e-8;

/// Largest entrywise deviation `|a_ij - conj(a_ji)|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m^dagger) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Eigen-decomposition `(values, vectors)` of the symmetrized input.
///
/// Rows and columns that are exactly zero are eigenvectors with eigenvalue
/// zero; they are split off before decomposing the rest, because the
/// iterative solver can return NaN on such deflated structure.
fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = symmetrize(m);
    let n = h.nrows();
    let zero = Complex64::new(0.0, 0.0);
    let active: Vec<usize> = (0..n).filter(|&i| h.row(i).iter().any(|z| *z != zero)).collect();
    if active.len() == n {
        let eig = SymmetricEigen::new(h);
        return (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors);
    }
    let mut values = vec![0.0; n];
    let mut vectors = CMatrix::from_element(n, n, zero);
    let mut col = 0;
    if !active.is_empty() {
        let block = CMatrix::from_fn(active.len(), active.len(), |a, b| h[(active[a], active[b])]);
        let eig = SymmetricEigen::new(block);
        for (k, &v) in eig.eigenvalues.iter().enumerate() {
            values[col] = v;
            for (a, &i) in active.iter().enumerate() {
                vectors[(i, col)] = eig.eigenvectors[(a, k)];
            }
            col += 1;
        }
    }
    for i in (0..n).filter(|i| !active.contains(i)) {
        vectors[(i, col)] = Complex64::new(1.0, 0.0);
        col += 1;
    }
    (values, vectors)
}

/// Ascending eigenvalues of a Hermitian matrix (the input is symmetrized first).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut values = hermitian_eigen(m).0;
    values.sort_by(f64::total_cmp);
    values
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Principal square root of a PSD matrix; eigenvalues below zero are clamped.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let roots = CMatrix::from_fn(values.len(), values.len(), |i, j| {
        if i == j { Complex64::new(values[i].max(0.0).sqrt(), 0.0) } else { Complex64::new(0.0, 0.0) }
    });
    &vectors * roots * vectors.adjoint()
}

/// Trace distance `(1/2) * sum |lambda_i(a - b)|`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(a.nrows(), b.nrows()));
    }
    Ok(0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|v| v.abs()).sum::<f64>())
}

fn check_state(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
    }
    let defect = hermitian_defect(m);
    if defect > STATE_TOLERANCE {
        return Err(Error::NotHermitian(defect));
    }
    let tr = trace(m);
    if (tr.re - 1.0).abs() > STATE_TOLERANCE || tr.im.abs() > STATE_TOLERANCE {
        return Err(Error::InvalidTrace(tr.re));
    }
    let min = min_eigenvalue(m);
    if min < -STATE_TOLERANCE {
        return Err(Error::NotPsd(min));
    }
    Ok(())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))^2` of two density matrices.
///
/// Both arguments must be Hermitian, PSD and of unit trace to within
/// [`STATE_TOLERANCE`].
pub fn uhlmann_fidelity(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(a.nrows(), b.nrows()));
    }
    check_state(a)?;
    check_state(b)?;
    Ok(uhlmann_unchecked(a, b))
}

/// Same as [`uhlmann_fidelity`] without input validation. Also valid for
/// sub-normalized blocks, which is how support-compressed fidelities are
/// evaluated.
pub(crate) fn uhlmann_unchecked(a: &CMatrix, b: &CMatrix) -> f64 {
    let root = psd_sqrt(a);
    let inner = &root * b * &root;
    let sum: f64 = hermitian_eigenvalues(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
    (sum * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| Complex64::new(v, 0.0)),
        ))
    }

    fn projector(v: &[Complex64]) -> CMatrix {
        let col = nalgebra::DVector::from_column_slice(v);
        &col * col.adjoint()
    }

    #[test]
    fn fidelity_with_itself_is_one() {
        let rho = diag(&[0.2, 0.3, 0.5]);
        assert!((uhlmann_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pure_states_have_zero_fidelity() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = projector(&[Complex64::new(s, 0.0), Complex64::new(s, 0.0)]);
        let b = projector(&[Complex64::new(s, 0.0), Complex64::new(-s, 0.0)]);
        assert!(uhlmann_fidelity(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn sparse_rank_two_state() {
        // mostly-zero Hermitian input on which a plain decomposition returns NaN
        let mut m = CMatrix::from_element(36, 36, Complex64::new(0.0, 0.0));
        m[(17, 17)] = Complex64::new(0.5, 0.0);
        m[(32, 32)] = Complex64::new(0.5, 0.0);
        m[(17, 32)] = Complex64::new(0.1, 0.2);
        m[(32, 17)] = Complex64::new(0.1, -0.2);
        let values = hermitian_eigenvalues(&m);
        assert!(values.iter().all(|v| v.is_finite()));
        assert!((values[35] - 0.5 - 0.05f64.sqrt()).abs() < 1e-12);
        let root = psd_sqrt(&m);
        assert!((&root * &root - &m).norm() < 1e-12);
        assert!((uhlmann_fidelity(&m, &m).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn diagonal_states_reduce_to_classical_fidelity() {
        let a: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
        let b = [0.25, 0.05, 0.6, 0.1];
        let classical: f64 = a.iter().zip(&b).map(|(x, y)| (x * y).sqrt()).sum();
        let f = uhlmann_fidelity(&diag(&a), &diag(&b)).unwrap();
        assert!((f - classical * classical).abs() < 1e-10);
    }

    #[test]
    fn pure_state_fidelity_is_overlap_squared() {
        let a = projector(&[Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let b = projector(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert!((uhlmann_fidelity(&a, &b).unwrap() - 0.36).abs() < 1e-10);
        assert!((uhlmann_fidelity(&b, &a).unwrap() - 0.36).abs() < 1e-10);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let good = diag(&[0.5, 0.5]);
        assert!(matches!(uhlmann_fidelity(&diag(&[0.5, 0.6]), &good), Err(Error::InvalidTrace(_))));
        assert!(matches!(uhlmann_fidelity(&diag(&[1.2, -0.2]), &good), Err(Error::NotPsd(_))));
        let mut skew = good.clone();
        skew[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(matches!(uhlmann_fidelity(&skew, &good), Err(Error::NotHermitian(_))));
        assert!(matches!(uhlmann_fidelity(&diag(&[1.0]), &good), Err(Error::DimensionMismatch(1, 2))));
    }

    #[test]
    fn trace_distance_of_orthogonal_states() {
        assert!((trace_distance(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])).unwrap() - 1.0).abs() < 1e-12);
    }
}
