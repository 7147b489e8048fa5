//! Thin wrapper over the dense complex eigensolver.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn from_real(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> CMat {
    Mat::from_fn(rows, cols, |i, j| Complex64::new(f(i, j), 0.0))
}

/// Eigenvalues of a square complex matrix (QR algorithm on the Hessenberg form).
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Eigen(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let ev = match m.eigenvalues() {
        Ok(ev) => ev,
        // QR occasionally stalls on highly structured matrices; a fixed
        // unitary similarity changes the Hessenberg form but not the spectrum.
        Err(_) => {
            let q = householder(m.nrows());
            let b = &q * m * &q;
            b.eigenvalues().map_err(|e| Error::Eigen(format!("QR: {e:?}")))?
        }
    };
    check_finite(&ev)?;
    Ok(ev)
}

/// The Hermitian unitary reflector `I - 2 w w^H / |w|^2` for a fixed dense `w`.
fn householder(n: usize) -> CMat {
    let w: Vec<Complex64> =
        (0..n).map(|i| Complex64::new(1.0 + (i as f64 * 0.618_033_988_75).fract(), (i as f64 * 0.414_213_562_37).fract())).collect();
    let norm2: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    Mat::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        Complex64::new(d, 0.0) - w[i] * w[j].conj() * (2.0 / norm2)
    })
}

/// Eigenvalues and right eigenvectors (columns of the returned matrix).
pub fn eigen(m: &CMat) -> Result<(Vec<Complex64>, CMat)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Eigen(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let evd = m.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values: Vec<Complex64> = evd.S().column_vector().iter().copied().collect();
    check_finite(&values)?;
    Ok((values, evd.U().to_owned()))
}

/// Eigenvalues with the generalized null space split off first.
///
/// A defective zero eigenvalue (Jordan block of size `s`) is perturbed by
/// roughly `(eps * |A|)^(1/s)` under the QR algorithm, which can push real
/// parts far above round-off level. Here the null space is peeled off
/// repeatedly with orthogonal transforms (a staircase reduction): if `V0`
/// spans the numerical null space of `A` and `V1` its orthogonal complement,
/// then `[V1 V0]^H A [V1 V0]` is block lower triangular with a zero block, so
/// the remaining eigenvalues are those of `V1^H A V1`. A singular value is
/// treated as zero when below `rel_tol` times the largest singular value of
/// the original matrix. Returns the eigenvalues and the number of exact
/// zeros found.
pub fn eigenvalues_deflated(m: &CMat, rel_tol: f64) -> Result<(Vec<Complex64>, usize)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Eigen(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let mut a = m.to_owned();
    let mut zeros = 0usize;
    let mut threshold = None;
    while a.nrows() > 0 {
        let (s, v) = right_singular(&a)?;
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let tol = *threshold.get_or_insert(rel_tol * smax.max(f64::MIN_POSITIVE));
        let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > tol).collect();
        let dropped = a.nrows() - keep.len();
        if dropped == 0 {
            break;
        }
        zeros += dropped;
        let v1 = Mat::from_fn(a.nrows(), keep.len(), |i, j| v[(i, keep[j])]);
        a = v1.adjoint() * &a * &v1;
    }
    let mut values = eigenvalues(&a)?;
    values.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), zeros));
    Ok((values, zeros))
}

/// Singular values and right singular vectors. If the SVD does not converge,
/// it is retried on `A Q` for the reflector `Q`: from `A Q = U S W^H` and
/// `Q = Q^H`, the right singular vectors of `A` are `Q W`.
fn right_singular(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let (s, v) = match a.svd() {
        Ok(svd) => (svd.S().column_vector().iter().map(|z| z.re).collect(), svd.V().to_owned()),
        Err(_) => {
            let q = householder(a.nrows());
            let svd = (a * &q).svd().map_err(|e| Error::Eigen(format!("SVD: {e:?}")))?;
            (svd.S().column_vector().iter().map(|z| z.re).collect(), &q * svd.V())
        }
    };
    Ok((s, v))
}

fn check_finite(values: &[Complex64]) -> Result<()> {
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok(())
}

/// Number of stored entries with modulus above `tol`.
pub fn count_nonzeros(m: &CMat, tol: f64) -> usize {
    let mut count = 0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)].norm() > tol {
                count += 1;
            }
        }
    }
    count
}

/// Greedy nearest-neighbour matching distance between two eigenvalue
/// multisets of equal size: every element of `a` is paired with a distinct
/// element of `b`, closest pairs first. Returns the largest paired distance.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "multisets differ in size");
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    let mut matched = 0;
    for (d, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
            matched += 1;
            if matched == a.len() {
                break;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_rotation() {
        let m = from_real(2, 2, |i, j| [[0.0, -1.0], [1.0, 0.0]][i][j]);
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn eigenvectors_satisfy_definition() {
        let m = Mat::from_fn(5, 5, |i, j| Complex64::new((i * 3 + j) as f64 % 4.0 - 1.5, (i as f64 - j as f64) * 0.1));
        let (vals, vecs) = eigen(&m).unwrap();
        for (k, lambda) in vals.iter().enumerate() {
            let v = vecs.col(k);
            for i in 0..5 {
                let mut mv = Complex64::new(0.0, 0.0);
                for j in 0..5 {
                    mv += m[(i, j)] * v[j];
                }
                assert!((mv - lambda * v[i]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn reflector_is_unitary() {
        let q = householder(7);
        let p = &q * &q;
        for i in 0..7 {
            for j in 0..7 {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((p[(i, j)] - Complex64::new(d, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn matching_distance() {
        let a = [Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.0)];
        let b = [Complex64::new(2.0, 0.001), Complex64::new(0.0, 1.0)];
        assert!((multiset_distance(&a, &b) - 0.001).abs() < 1e-15);
    }
}
