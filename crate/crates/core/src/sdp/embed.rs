use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::linalg::{CMat, HermitianOperator};

/// `X ↦ [[Re X, −Im X], [Im X, Re X]]`.
///
/// A Hermitian `X` is PSD iff its embedding is, and `Tr[A X] = ½ Tr[R(A) R(X)]`.
pub fn realify(x: &HermitianOperator) -> DMatrix<f64> {
    realify_matrix(x.matrix())
}

pub(crate) fn realify_matrix(x: &CMat) -> DMatrix<f64> {
    let d = x.nrows();
    DMatrix::from_fn(2 * d, 2 * d, |p, q| {
        let v = x[(p % d, q % d)];
        match (p < d, q < d) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// Inverse of [`realify`] on its image. Off-image input is projected onto
/// the complex structure by averaging the blocks.
pub fn derealify(r: &DMatrix<f64>) -> HermitianOperator {
    assert!(r.nrows() == r.ncols() && r.nrows() % 2 == 0, "embedding must be square of even size");
    let d = r.nrows() / 2;
    let m = CMat::from_fn(d, d, |i, j| {
        let re = 0.5 * (r[(i, j)] + r[(d + i, d + j)]);
        let im = 0.5 * (r[(d + i, j)] - r[(i, d + j)]);
        Complex64::new(re, im)
    });
    HermitianOperator::new(m).expect("square")
}

/// `Tr[A X]` evaluated through the embedding.
pub fn realified_trace(a: &HermitianOperator, x: &HermitianOperator) -> f64 {
    0.5 * (realify(a) * realify(x)).trace()
}

/// Position of real entry `(p, q)`, `p ≤ q`, in the column-major upper
/// triangle vectorization used by the PSD cone.
pub(crate) fn svec_index(p: usize, q: usize) -> usize {
    debug_assert!(p <= q);
    q * (q + 1) / 2 + p
}

pub(crate) fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper-triangle entries of the embedding of a complex Hermitian matrix given
/// by its upper-triangle entries `(i, j, v)`, `i ≤ j`. Off-diagonal real entries
/// carry the `√2` scaling of the cone vectorization.
pub(crate) fn embed_upper(d: usize, entries: &[(usize, usize, Complex64)], out: &mut Vec<(usize, f64)>) {
    let r2 = std::f64::consts::SQRT_2;
    for &(i, j, v) in entries {
        if i == j {
            out.push((svec_index(i, i), v.re));
            out.push((svec_index(d + i, d + i), v.re));
        } else {
            out.push((svec_index(i, j), r2 * v.re));
            out.push((svec_index(d + i, d + j), r2 * v.re));
            out.push((svec_index(i, d + j), -r2 * v.im));
            out.push((svec_index(j, d + i), r2 * v.im));
        }
    }
}

/// Real symmetric matrix from its scaled vectorization.
pub(crate) fn smat(n: usize, v: &[f64]) -> DMatrix<f64> {
    let r2 = std::f64::consts::SQRT_2;
    let mut m = DMatrix::zeros(n, n);
    for q in 0..n {
        for p in 0..=q {
            let x = v[svec_index(p, q)];
            if p == q {
                m[(p, p)] = x;
            } else {
                m[(p, q)] = x / r2;
                m[(q, p)] = x / r2;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{InstanceStream, Seed};

    fn sym_eigs(m: &DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    #[test]
    fn real_input_is_block_diagonal() {
        let x = HermitianOperator::from_real_diagonal(&[1.0, -2.0]);
        let r = realify(&x);
        assert_eq!(r[(0, 0)], 1.0);
        assert_eq!(r[(3, 3)], -2.0);
        assert_eq!(r[(0, 2)], 0.0);
        assert_eq!(r[(2, 0)], 0.0);
    }

    #[test]
    fn pauli_y_embedding() {
        let i = Complex64::new(0.0, 1.0);
        let y = HermitianOperator::new(CMat::from_row_slice(2, 2, &[0.0.into(), -i, i, 0.0.into()])).unwrap();
        let ev = sym_eigs(&realify(&y));
        for (a, b) in ev.iter().zip([1.0, 1.0, -1.0, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn psd_sign_preserved_and_round_trip() {
        let mut s = InstanceStream::new(Seed(1));
        for k in 0..200 {
            let x = s.hermitian(2 + k % 4);
            let emb_min = *sym_eigs(&realify(&x)).last().unwrap();
            let min = x.min_eigenvalue().unwrap();
            assert!((emb_min - min).abs() < 1e-10);
            assert!(derealify(&realify(&x)).max_abs_diff(&x) < 1e-12);
            let a = s.hermitian(x.dim());
            assert!((realified_trace(&a, &x) - a.trace_with(&x)).abs() < 1e-10);
        }
    }

    #[test]
    fn upper_embedding_matches_dense() {
        let mut s = InstanceStream::new(Seed(2));
        let x = s.hermitian(3);
        let mut entries = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                entries.push((i, j, x.matrix()[(i, j)]));
            }
        }
        let mut v = vec![0.0; svec_len(6)];
        let mut out = Vec::new();
        embed_upper(3, &entries, &mut out);
        for (k, val) in out {
            v[k] += val;
        }
        assert!((smat(6, &v) - realify(&x)).norm() < 1e-14);
    }
}
