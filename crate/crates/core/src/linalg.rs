//! Small dense complex helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Thin QR by modified Gram–Schmidt with one re-orthogonalisation pass;
/// `R` has a real, non-negative diagonal. Rank-deficient columns give a zero
/// column in `Q` and a zero diagonal entry in `R`.
pub fn qr_positive(a: &CMat) -> (CMat, CMat) {
    let (n, k) = a.shape();
    let mut q = a.clone();
    let mut r = CMat::zeros(k, k);
    for j in 0..k {
        for _pass in 0..2 {
            for i in 0..j {
                let proj: C64 = q.column(i).dotc(&q.column(j));
                r[(i, j)] += proj;
                let qi = q.column(i).clone_owned();
                let mut qj = q.column_mut(j);
                qj.axpy(-proj, &qi, Complex::new(1.0, 0.0));
            }
        }
        let norm = q.column(j).norm();
        r[(j, j)] = Complex::new(norm, 0.0);
        if norm > 0.0 {
            q.column_mut(j).unscale_mut(norm);
        } else {
            q.column_mut(j).fill(Complex::new(0.0, 0.0));
        }
    }
    debug_assert_eq!(q.nrows(), n);
    (q, r)
}

/// Eigenvalues of a general complex square matrix (complex Schur form).
pub fn eigenvalues(a: &CMat) -> Vec<C64> {
    let n = a.nrows();
    if n == 1 {
        return vec![a[(0, 0)]];
    }
    let schur = a.clone().schur();
    let (_, t) = schur.unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    // symmetrise against round-off
    let h = (a + a.adjoint()).unscale(2.0);
    let eig = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn to_complex(a: &DMatrix<f64>) -> CMat {
    a.map(|v| Complex::new(v, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_reconstructs() {
        let a = CMat::from_row_slice(3, 2, &[c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0), c(1.0, 3.0), c(4.0, 0.5), c(-2.0, 0.0)]);
        let (q, r) = qr_positive(&a);
        assert!((&q * &r - &a).norm() < 1e-13);
        assert!((q.adjoint() * &q - CMat::identity(2, 2)).norm() < 1e-14);
        assert_eq!(r[(1, 0)], c(0.0, 0.0));
        assert!(r[(0, 0)].re > 0.0 && r[(0, 0)].im == 0.0 && r[(1, 1)].re > 0.0);
    }

    #[test]
    fn schur_eigenvalues() {
        // rotation by 0.3: eigenvalues e^{±0.3 i}
        let (s, co) = (0.3f64.sin(), 0.3f64.cos());
        let a = CMat::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]);
        let mut ev = eigenvalues(&a);
        ev.sort_by(|x, y| x.im.total_cmp(&y.im));
        assert!((ev[0] - c(co, -s)).norm() < 1e-14);
        assert!((ev[1] - c(co, s)).norm() < 1e-14);
        let t = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(5.0, 0.0), c(0.0, 0.0), c(-1.0, 0.5)]);
        let mut ev = eigenvalues(&t);
        ev.sort_by(|x, y| x.re.total_cmp(&y.re));
        assert!((ev[0] - c(-1.0, 0.5)).norm() < 1e-13 && (ev[1] - c(1.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn hermitian_sorted() {
        let a = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let (vals, vecs) = hermitian_eigen(&a);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let v0 = vecs.column(0);
        assert!(((&a * v0) - v0 * c(1.0, 0.0)).norm() < 1e-14);
    }
}
