use nalgebra::DVector;
use num_complex::Complex64;

use super::{CMat, HermitianOperator, State};
use crate::error::{Error, Result, dim_err, domain_err};

/// Relative eigenvalue cutoff used for ranks and supports.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Relative tolerance for grouping equal eigenvalues.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;

const EIGH_MAX_ITER: usize = 10_000;

/// Spectral decomposition with eigenvalues sorted in descending order.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns, in the same order as `values`.
    pub vectors: CMat,
}

impl Eigh {
    /// `V f(Λ) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = Complex64::new(f(lam), 0.0);
            for i in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        HermitianOperator::from_square(&scaled * self.vectors.adjoint())
    }

    /// Eigenvalue scale used by relative cutoffs.
    pub fn scale(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

pub fn eigh(a: &HermitianOperator) -> Result<Eigh> {
    let d = a.dim();
    if d == 1 {
        return Ok(Eigh { values: vec![a.matrix()[(0, 0)].re], vectors: CMat::identity(1, 1) });
    }
    let se = a
        .matrix()
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIGH_MAX_ITER)
        .ok_or_else(|| Error::Numerical(format!("eigendecomposition of {d}x{d} operator did not converge")))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| se.eigenvalues[j].total_cmp(&se.eigenvalues[i]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(d, d, |r, c| se.eigenvectors[(r, order[c])]);
    Ok(Eigh { values, vectors })
}

/// Scalar functions that can be lifted to Hermitian operators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatrixFunction {
    Log2,
    Pow(f64),
}

/// Applies `f` spectrally.
///
/// With `support_only`, `f` is evaluated only on eigenvalues above
/// `DEFAULT_RANK_TOL` times the spectral scale and the rest map to zero.
/// Without it, non-positive eigenvalues are an error for `Log2` and negative
/// powers; nonnegative powers clamp slightly negative eigenvalues to zero.
pub fn matrix_fn(a: &HermitianOperator, f: MatrixFunction, support_only: bool) -> Result<HermitianOperator> {
    let e = eigh(a)?;
    let cut = DEFAULT_RANK_TOL * e.scale();
    if support_only {
        return Ok(e.reconstruct_with(|x| if x > cut { eval(f, x) } else { 0.0 }));
    }
    let needs_positive = match f {
        MatrixFunction::Log2 => true,
        MatrixFunction::Pow(t) => t < 0.0,
    };
    if needs_positive && e.values.iter().any(|&x| x <= cut) {
        return domain_err(format!("{f:?} requires a positive definite argument"));
    }
    Ok(e.reconstruct_with(|x| eval(f, x.max(0.0))))
}

fn eval(f: MatrixFunction, x: f64) -> f64 {
    match f {
        MatrixFunction::Log2 => x.log2(),
        MatrixFunction::Pow(t) if t == 0.0 => 1.0,
        MatrixFunction::Pow(t) => x.powf(t),
    }
}

/// Projector onto the span of eigenvectors with eigenvalue above `rank_tol·λ_max`.
pub fn support_projector(rho: &HermitianOperator, rank_tol: f64) -> Result<HermitianOperator> {
    let e = eigh(rho)?;
    let cut = rank_tol * e.scale();
    Ok(e.reconstruct_with(|x| if x > cut { 1.0 } else { 0.0 }))
}

/// Orthonormal bases of the support and of the kernel, as matrix columns.
pub fn support_split(rho: &HermitianOperator, rank_tol: f64) -> Result<(CMat, CMat)> {
    let e = eigh(rho)?;
    let cut = rank_tol * e.scale();
    let r = e.values.iter().filter(|&&x| x > cut).count();
    let d = rho.dim();
    Ok((e.vectors.columns(0, r).into_owned(), e.vectors.columns(r, d - r).into_owned()))
}

pub fn rank(rho: &HermitianOperator, rank_tol: f64) -> Result<usize> {
    let e = eigh(rho)?;
    let cut = rank_tol * e.scale();
    Ok(e.values.iter().filter(|&&x| x > cut).count())
}

/// Which tensor factor survives a partial trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// Partial trace of an operator on `A ⊗ B` with `dim = dim_a · dim_b`.
pub fn partial_trace(x: &HermitianOperator, dim_a: usize, dim_b: usize, keep: Keep) -> Result<HermitianOperator> {
    if dim_a == 0 || dim_b == 0 || dim_a * dim_b != x.dim() {
        return dim_err(format!("dimension {} does not factor as {dim_a}x{dim_b}", x.dim()));
    }
    Ok(HermitianOperator::from_square(raw_partial_trace(x.matrix(), dim_a, dim_b, keep)))
}

pub(crate) fn raw_partial_trace(x: &CMat, dim_a: usize, dim_b: usize, keep: Keep) -> CMat {
    match keep {
        Keep::A => CMat::from_fn(dim_a, dim_a, |i, j| (0..dim_b).map(|k| x[(i * dim_b + k, j * dim_b + k)]).sum()),
        Keep::B => CMat::from_fn(dim_b, dim_b, |i, j| (0..dim_a).map(|k| x[(k * dim_b + i, k * dim_b + j)]).sum()),
    }
}

/// Eigenspace projectors of `sigma`, grouping eigenvalues that agree within
/// `degeneracy_tol` relative to the spectral scale.
pub fn eigenspace_projectors(sigma: &HermitianOperator, degeneracy_tol: f64) -> Result<Vec<HermitianOperator>> {
    let e = eigh(sigma)?;
    let d = e.values.len();
    let tol = degeneracy_tol * e.scale().max(f64::MIN_POSITIVE);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..d {
        match groups.last_mut() {
            Some(g) if (e.values[*g.last().unwrap()] - e.values[i]).abs() <= tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    Ok(groups
        .into_iter()
        .map(|g| {
            let mut p = CMat::zeros(d, d);
            for &k in &g {
                let v: DVector<Complex64> = e.vectors.column(k).into_owned();
                p += &v * v.adjoint();
            }
            HermitianOperator::from_square(p)
        })
        .collect())
}

/// Pinching of `rho` by the eigenspaces of `sigma`. Returns the pinched state
/// and the number of distinct eigenvalues of `sigma`.
pub fn pinch(rho: &State, sigma: &State, degeneracy_tol: f64) -> Result<(State, usize)> {
    if rho.dim() != sigma.dim() {
        return dim_err(format!("pinch: dims {} and {}", rho.dim(), sigma.dim()));
    }
    let projectors = eigenspace_projectors(sigma, degeneracy_tol)?;
    let d = rho.dim();
    let mut acc = CMat::zeros(d, d);
    for p in &projectors {
        acc += p.matrix() * rho.matrix() * p.matrix();
    }
    let pinched = State::new(HermitianOperator::from_square(acc))?;
    Ok((pinched, projectors.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{InstanceStream, Seed};

    fn rel_residual(a: &HermitianOperator, e: &Eigh) -> f64 {
        let rec = e.reconstruct_with(|x| x);
        (a.matrix() - rec.matrix()).norm() / a.frobenius_norm().max(1e-300)
    }

    #[test]
    fn diagonal_input() {
        let a = HermitianOperator::from_real_diagonal(&[1.0, 2.0]);
        let e = eigh(&a).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_x() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let x = HermitianOperator::new(CMat::from_row_slice(2, 2, &[zero, one, one, zero])).unwrap();
        let e = eigh(&x).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] + 1.0).abs() < 1e-14);
        let plus = e.vectors.column(0);
        assert!((plus[0].norm() - plus[1].norm()).abs() < 1e-14);
        assert!(((plus[0].conj() * plus[1]).re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction_and_unitarity() {
        let mut s = InstanceStream::new(Seed(11));
        for k in 0..1000 {
            let d = 2 + k % 7;
            let a = s.hermitian(d);
            let e = eigh(&a).unwrap();
            assert!(rel_residual(&a, &e) <= 1e-10, "residual at dim {d}");
            let g = e.vectors.adjoint() * &e.vectors;
            assert!((g - CMat::identity(d, d)).norm() <= 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn support_projector_examples() {
        let rho = HermitianOperator::from_real_diagonal(&[0.5, 0.5, 0.0]);
        let p = support_projector(&rho, DEFAULT_RANK_TOL).unwrap();
        assert!(p.max_abs_diff(&HermitianOperator::from_real_diagonal(&[1.0, 1.0, 0.0])) < 1e-12);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = HermitianOperator::outer(&DVector::from_vec(vec![Complex64::new(h, 0.0); 2]));
        let p = support_projector(&plus, DEFAULT_RANK_TOL).unwrap();
        assert!(p.max_abs_diff(&plus) < 1e-12);
    }

    #[test]
    fn support_projector_random_rank_two() {
        let mut s = InstanceStream::new(Seed(5));
        for _ in 0..50 {
            let rho = s.state(3, 2);
            let p = support_projector(&rho, DEFAULT_RANK_TOL).unwrap();
            assert!(HermitianOperator::from_square(p.matrix() * p.matrix()).max_abs_diff(&p) < 1e-9);
            assert!(rho.sandwich(&p).max_abs_diff(&rho) < 1e-9);
            assert!((p.trace() - 2.0).abs() < 1e-6);
            assert_eq!(rank(&rho, DEFAULT_RANK_TOL).unwrap(), 2);
        }
    }

    #[test]
    fn matrix_functions() {
        let a = HermitianOperator::from_real_diagonal(&[2.0, 4.0]);
        let l = matrix_fn(&a, MatrixFunction::Log2, false).unwrap();
        assert!(l.max_abs_diff(&HermitianOperator::from_real_diagonal(&[1.0, 2.0])) < 1e-14);

        let pi4 = HermitianOperator::from_real_diagonal(&[0.25, 0.75]);
        let p = matrix_fn(&pi4, MatrixFunction::Pow(-0.5), true).unwrap();
        let expect = HermitianOperator::from_real_diagonal(&[2.0, 2.0 / 3f64.sqrt()]);
        assert!(p.max_abs_diff(&expect) < 1e-12);

        let mut s = InstanceStream::new(Seed(3));
        for _ in 0..20 {
            let rho = s.state(3, 3);
            let r = matrix_fn(&rho, MatrixFunction::Pow(0.5), false).unwrap();
            let sq = HermitianOperator::from_square(r.matrix() * r.matrix());
            assert!(sq.max_abs_diff(&rho) < 1e-9);
        }
    }

    #[test]
    fn log_of_singular_needs_support_flag() {
        let a = HermitianOperator::from_real_diagonal(&[1.0, 0.0]);
        assert!(matches!(matrix_fn(&a, MatrixFunction::Log2, false), Err(Error::Domain(_))));
        let l = matrix_fn(&a, MatrixFunction::Log2, true).unwrap();
        assert!(l.frobenius_norm() < 1e-15);
    }

    #[test]
    fn partial_trace_examples() {
        let mut s = InstanceStream::new(Seed(8));
        let rho = s.state(2, 2);
        let sigma = s.state(3, 3);
        let joint = rho.kron(&sigma);
        let back = partial_trace(&joint, 2, 3, Keep::A).unwrap();
        assert!(back.max_abs_diff(&rho) < 1e-14);
        let back = partial_trace(&joint, 2, 3, Keep::B).unwrap();
        assert!(back.max_abs_diff(&sigma) < 1e-14);

        // Unnormalized maximally entangled operator.
        let mut gamma = CMat::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                gamma[(i * 2 + i, j * 2 + j)] = Complex64::new(1.0, 0.0);
            }
        }
        let g = HermitianOperator::new(gamma).unwrap();
        let tb = partial_trace(&g, 2, 2, Keep::A).unwrap();
        assert!(tb.max_abs_diff(&HermitianOperator::identity(2)) < 1e-15);

        let joint = s.state(6, 6);
        let ta = partial_trace(&joint, 2, 3, Keep::B).unwrap();
        assert!((ta.trace() - 1.0).abs() < 1e-12);
        assert!(ta.min_eigenvalue().unwrap() > -1e-12);

        assert!(matches!(partial_trace(&joint, 4, 2, Keep::A), Err(Error::Dimension(_))));
    }

    #[test]
    fn pinch_examples() {
        let mut s = InstanceStream::new(Seed(9));
        let rho = s.state(3, 3);
        let (p, k) = pinch(&rho, &State::maximally_mixed(3), DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!(k, 1);
        assert!(p.max_abs_diff(&rho) < 1e-12);

        let sigma = State::from_diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let (p, k) = pinch(&rho, &sigma, DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!(k, 3);
        let diag = HermitianOperator::from_real_diagonal(&rho.diagonal());
        assert!(p.max_abs_diff(&diag) < 1e-12);
    }

    #[test]
    fn pinching_inequality_random() {
        let mut s = InstanceStream::new(Seed(10));
        for _ in 0..200 {
            let r = 1 + s.index(3);
            let rho = s.state(3, r);
            let sigma = s.state(3, 3);
            let (p, k) = pinch(&rho, &sigma, DEFAULT_DEGENERACY_TOL).unwrap();
            let diff = &p.scale(k as f64) - &rho;
            assert!(diff.min_eigenvalue().unwrap() >= -1e-10);
        }
    }
}
