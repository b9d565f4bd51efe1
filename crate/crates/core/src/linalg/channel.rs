use num_complex::Complex64;

use super::decomp::raw_partial_trace;
use super::{CMat, HermitianOperator, Keep, State, eigh, partial_trace};
use crate::error::{Error, Result, dim_err};

/// Allowed entrywise deviation of `Tr_B J` from the identity.
pub const TP_TOL: f64 = 1e-9;

/// Quantum channel stored as its Choi operator
/// `J = Σ_ij |i⟩⟨j| ⊗ N(|i⟩⟨j|)` on `R ⊗ B` (input factor first).
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    dim_in: usize,
    dim_out: usize,
    choi: HermitianOperator,
}

impl Channel {
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: HermitianOperator) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 || choi.dim() != dim_in * dim_out {
            return dim_err(format!("Choi dim {} does not match {dim_in}x{dim_out}", choi.dim()));
        }
        let min = *eigh(&choi)?.values.last().expect("nonempty");
        if min < -super::PSD_TOL {
            return Err(Error::InvalidChannel(format!("Choi operator has eigenvalue {min:e}")));
        }
        let tr_out = partial_trace(&choi, dim_in, dim_out, Keep::A)?;
        let dev = tr_out.max_abs_diff(&HermitianOperator::identity(dim_in));
        if dev > TP_TOL {
            return Err(Error::InvalidChannel(format!("not trace preserving (deviation {dev:e})")));
        }
        Ok(Self { dim_in, dim_out, choi })
    }

    /// Builds the Choi operator from the action on matrix units `|i⟩⟨j|`.
    pub fn from_linear_map(dim_in: usize, dim_out: usize, f: impl Fn(&CMat) -> CMat) -> Result<Self> {
        let n = dim_in * dim_out;
        let mut j = CMat::zeros(n, n);
        for r in 0..dim_in {
            for c in 0..dim_in {
                let mut unit = CMat::zeros(dim_in, dim_in);
                unit[(r, c)] = Complex64::new(1.0, 0.0);
                let img = f(&unit);
                if img.nrows() != dim_out || img.ncols() != dim_out {
                    return dim_err(format!("map produced {}x{}, expected {dim_out}", img.nrows(), img.ncols()));
                }
                for b in 0..dim_out {
                    for bp in 0..dim_out {
                        j[(r * dim_out + b, c * dim_out + bp)] = img[(b, bp)];
                    }
                }
            }
        }
        Self::from_choi(dim_in, dim_out, HermitianOperator::new(j)?)
    }

    pub fn from_kraus(ops: &[CMat]) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::InvalidChannel("empty Kraus list".into()))?;
        let (dout, din) = (first.nrows(), first.ncols());
        if ops.iter().any(|k| k.nrows() != dout || k.ncols() != din) {
            return dim_err("Kraus operators have inconsistent shapes");
        }
        Self::from_linear_map(din, dout, |x| {
            ops.iter().fold(CMat::zeros(dout, dout), |acc, k| acc + k * x * k.adjoint())
        })
    }

    /// Channel from an approximately valid Choi matrix, as produced by a solver.
    ///
    /// Negative eigenvalues are clipped, then `J ↦ (T^{-1/2} ⊗ I) J (T^{-1/2} ⊗ I)`
    /// with `T = Tr_B J` restores trace preservation. Fails when the required
    /// correction exceeds `budget` in any entry.
    pub fn from_choi_repaired(dim_in: usize, dim_out: usize, choi: &CMat, budget: f64) -> Result<Self> {
        if choi.nrows() != dim_in * dim_out || choi.ncols() != dim_in * dim_out {
            return dim_err(format!("Choi dim {} does not match {dim_in}x{dim_out}", choi.nrows()));
        }
        let herm = HermitianOperator::new(choi.clone())?;
        let e = eigh(&herm)?;
        let clipped = e.reconstruct_with(|x| x.max(0.0));
        let t = partial_trace(&clipped, dim_in, dim_out, Keep::A)?;
        let drift = t.max_abs_diff(&HermitianOperator::identity(dim_in)).max(herm.max_abs_diff(&clipped));
        if !(drift <= budget) {
            return Err(Error::Numerical(format!("Choi matrix is {drift:e} away from a channel")));
        }
        let te = eigh(&t)?;
        if te.values.iter().any(|&x| x <= 0.0) {
            return Err(Error::Numerical("Choi input marginal is singular".into()));
        }
        let t_inv_sqrt = te.reconstruct_with(|x| 1.0 / x.sqrt());
        let k = t_inv_sqrt.matrix().kronecker(&CMat::identity(dim_out, dim_out));
        let fixed = HermitianOperator::new(&k * clipped.matrix() * &k)?;
        Self::from_choi(dim_in, dim_out, fixed)
    }

    pub fn identity(d: usize) -> Self {
        Self::from_linear_map(d, d, |x| x.clone()).expect("identity channel is valid")
    }

    /// `ω ↦ Tr[ω] τ`.
    pub fn replacer(dim_in: usize, tau: &State) -> Self {
        let choi = HermitianOperator::identity(dim_in).kron(tau);
        Self { dim_in, dim_out: tau.dim(), choi }
    }

    /// `ω ↦ Σ_k Tr[E_k ω] τ_k` for a POVM `{E_k}`.
    pub fn measure_prepare(povm: &[HermitianOperator], outputs: &[State]) -> Result<Self> {
        if povm.is_empty() || povm.len() != outputs.len() {
            return Err(Error::InvalidChannel("POVM and output lists must be nonempty and equal length".into()));
        }
        let din = povm[0].dim();
        let dout = outputs[0].dim();
        if povm.iter().any(|e| e.dim() != din) || outputs.iter().any(|t| t.dim() != dout) {
            return dim_err("measure-prepare components have inconsistent dimensions");
        }
        let mut choi = HermitianOperator::zeros(din * dout);
        for (e, t) in povm.iter().zip(outputs) {
            choi = &choi + &e.transpose().kron(t);
        }
        Self::from_choi(din, dout, choi)
    }

    /// `ω ↦ V ω V†`.
    pub fn isometric(v: &CMat) -> Result<Self> {
        let gram = v.adjoint() * v;
        let dev = (gram - CMat::identity(v.ncols(), v.ncols())).norm();
        if dev > 1e-10 {
            return Err(Error::Domain(format!("matrix is not an isometry (deviation {dev:e})")));
        }
        Self::from_kraus(std::slice::from_ref(v))
    }

    /// `ω ↦ ω ⊗ τ`.
    pub fn append(dim_in: usize, tau: &State) -> Self {
        let t = tau.matrix().clone();
        Self::from_linear_map(dim_in, dim_in * tau.dim(), |x| x.kronecker(&t)).expect("appending channel is valid")
    }

    /// Partial trace as a channel on `A ⊗ B`.
    pub fn discard(dim_a: usize, dim_b: usize, keep: Keep) -> Self {
        let dout = match keep {
            Keep::A => dim_a,
            Keep::B => dim_b,
        };
        Self::from_linear_map(dim_a * dim_b, dout, |x| raw_partial_trace(x, dim_a, dim_b, keep))
        .expect("partial trace channel is valid")
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi(&self) -> &HermitianOperator {
        &self.choi
    }

    /// `N(X)` for an arbitrary matrix `X` on the input space.
    pub fn apply_matrix(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.dim_in || x.ncols() != self.dim_in {
            return dim_err(format!("channel input dim {} but operand is {}x{}", self.dim_in, x.nrows(), x.ncols()));
        }
        Ok(raw_choi_apply(self.choi.matrix(), self.dim_in, self.dim_out, x))
    }

    pub fn apply_operator(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        Ok(HermitianOperator::from_square(self.apply_matrix(x.matrix())?))
    }

    /// Output state. Trace drift within `TP_TOL` is normalized away.
    pub fn apply(&self, rho: &State) -> Result<State> {
        let out = self.apply_operator(rho)?;
        let tr = out.trace();
        if (tr - 1.0).abs() > TP_TOL {
            return Err(Error::Numerical(format!("channel output trace {tr}")));
        }
        State::new(out.scale(1.0 / tr))
    }

    /// `self ∘ first` via the link product of Choi operators.
    pub fn compose(&self, first: &Channel) -> Result<Channel> {
        if first.dim_out != self.dim_in {
            return dim_err(format!("cannot compose: inner output {} vs outer input {}", first.dim_out, self.dim_in));
        }
        let (a, b, c) = (first.dim_in, first.dim_out, self.dim_out);
        let jm = first.choi.matrix();
        let jn = self.choi.matrix();
        let mut out = CMat::zeros(a * c, a * c);
        for r in 0..a {
            for rp in 0..a {
                for x in 0..b {
                    for xp in 0..b {
                        let w = jm[(r * b + x, rp * b + xp)];
                        if w == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for k in 0..c {
                            for kp in 0..c {
                                out[(r * c + k, rp * c + kp)] += w * jn[(x * c + k, xp * c + kp)];
                            }
                        }
                    }
                }
            }
        }
        Channel::from_choi(a, c, HermitianOperator::new(out)?)
    }

    /// `self ⊗ other` acting on `A ⊗ A'`.
    pub fn tensor(&self, other: &Channel) -> Result<Channel> {
        let (a1, b1, a2, b2) = (self.dim_in, self.dim_out, other.dim_in, other.dim_out);
        let j1 = self.choi.matrix();
        let j2 = other.choi.matrix();
        let (din, dout) = (a1 * a2, b1 * b2);
        let n = din * dout;
        let mut out = CMat::zeros(n, n);
        let idx = |r1: usize, r2: usize, s1: usize, s2: usize| ((r1 * a2 + r2) * b1 + s1) * b2 + s2;
        for r1 in 0..a1 {
            for r1p in 0..a1 {
                for s1 in 0..b1 {
                    for s1p in 0..b1 {
                        let w = j1[(r1 * b1 + s1, r1p * b1 + s1p)];
                        for r2 in 0..a2 {
                            for r2p in 0..a2 {
                                for s2 in 0..b2 {
                                    for s2p in 0..b2 {
                                        out[(idx(r1, r2, s1, s2), idx(r1p, r2p, s1p, s2p))] =
                                            w * j2[(r2 * b2 + s2, r2p * b2 + s2p)];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Channel::from_choi(din, dout, HermitianOperator::new(out)?)
    }
}

/// `Tr_R[(X^T ⊗ I) J]` for a Choi matrix `J` on `R ⊗ B`.
pub(crate) fn raw_choi_apply(j: &CMat, din: usize, dout: usize, x: &CMat) -> CMat {
    let mut out = CMat::zeros(dout, dout);
    for r in 0..din {
        for rp in 0..din {
            let w = x[(r, rp)];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            for b in 0..dout {
                for bp in 0..dout {
                    out[(b, bp)] += w * j[(r * dout + b, rp * dout + bp)];
                }
            }
        }
    }
    out
}

/// `N(ρ)`.
pub fn apply(n: &Channel, rho: &State) -> Result<State> {
    n.apply(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::support_projector;
    use crate::testkit::{InstanceStream, Seed};

    #[test]
    fn identity_and_replacer() {
        let mut s = InstanceStream::new(Seed(1));
        let rho = s.state(3, 3);
        let tau = s.state(2, 1);
        assert!(Channel::identity(3).apply(&rho).unwrap().max_abs_diff(&rho) < 1e-14);
        assert!(Channel::replacer(3, &tau).apply(&rho).unwrap().max_abs_diff(&tau) < 1e-14);
    }

    #[test]
    fn support_measurement_sends_rho_to_zero() {
        let mut s = InstanceStream::new(Seed(2));
        let rho = s.state(3, 2);
        let p = support_projector(&rho, 1e-9).unwrap();
        let q = &HermitianOperator::identity(3) - &p;
        let n = Channel::measure_prepare(&[p, q], &[State::basis(2, 0), State::basis(2, 1)]).unwrap();
        assert!(n.apply(&rho).unwrap().max_abs_diff(&State::basis(2, 0)) < 1e-9);
    }

    #[test]
    fn composition_matches_sequential_application() {
        let mut s = InstanceStream::new(Seed(3));
        for _ in 0..50 {
            let m = s.channel(2, 3, 2);
            let n = s.channel(3, 2, 3);
            let rho = s.state(2, 2);
            let nm = n.compose(&m).unwrap();
            let direct = n.apply(&m.apply(&rho).unwrap()).unwrap();
            assert!(nm.apply(&rho).unwrap().max_abs_diff(&direct) < 1e-9);
        }
    }

    #[test]
    fn tensor_acts_factorwise() {
        let mut s = InstanceStream::new(Seed(4));
        let m = s.channel(2, 2, 2);
        let n = s.channel(2, 3, 1);
        let (r1, r2) = (s.state(2, 2), s.state(2, 1));
        let joint = m.tensor(&n).unwrap().apply(&r1.tensor(&r2)).unwrap();
        let sep = m.apply(&r1).unwrap().tensor(&n.apply(&r2).unwrap());
        assert!(joint.max_abs_diff(&sep) < 1e-12);
    }

    #[test]
    fn trace_preservation_and_cp() {
        let mut s = InstanceStream::new(Seed(5));
        for _ in 0..100 {
            let n = s.channel(3, 2, 2);
            let rho = s.state(3, 3);
            let out = n.apply_operator(&rho).unwrap();
            assert!((out.trace() - 1.0).abs() < 1e-9);
            assert!(n.choi().min_eigenvalue().unwrap() >= -1e-10);
        }
    }

    #[test]
    fn append_then_discard() {
        let mut s = InstanceStream::new(Seed(6));
        let rho = s.state(2, 2);
        let tau = s.state(3, 3);
        let a = Channel::append(2, &tau);
        let t = Channel::discard(2, 3, Keep::A);
        let out = t.compose(&a).unwrap().apply(&rho).unwrap();
        assert!(out.max_abs_diff(&rho) < 1e-14);
        let joint = a.apply(&rho).unwrap();
        assert!(joint.max_abs_diff(&rho.tensor(&tau)) < 1e-14);
    }

    #[test]
    fn rejects_non_tp() {
        let choi = HermitianOperator::identity(4).scale(0.7);
        assert!(matches!(Channel::from_choi(2, 2, choi), Err(Error::InvalidChannel(_))));
        assert!(matches!(Channel::identity(2).apply(&State::basis(3, 0)), Err(Error::Dimension(_))));
    }
}
