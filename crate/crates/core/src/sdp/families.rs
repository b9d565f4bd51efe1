//! Program builders. Every optimization comes as a primal and a dual built
//! independently, so that agreement of the two optimal values is a real check.

use super::program::{AffineExpr, ConicProgram, MatVar, MatrixExpr, Sense};
use crate::error::Result;
use crate::linalg::{
    CMat, DEFAULT_RANK_TOL, HermitianOperator, Keep, State, raw_choi_apply, raw_partial_trace, support_split,
};

/// `max Tr[Λ(ρ−σ)]` over `0 ≤ Λ ≤ I`. Returns the program and `Λ`.
pub fn trace_distance_primal(rho: &State, sigma: &State) -> (ConicProgram, MatVar) {
    let d = rho.dim();
    let mut p = ConicProgram::new(Sense::Maximize);
    let lam = p.psd("lambda", d);
    p.add_psd("I - lambda", MatrixExpr::new(d).plus_const(&HermitianOperator::identity(d), 1.0).plus_var(&lam, -1.0));
    let diff = rho.operator() - sigma.operator();
    p.set_objective(AffineExpr::new().plus_trace(&lam, &diff, 1.0));
    (p, lam)
}

/// `min Tr[Y]` over `Y ≥ 0`, `Y ≥ ρ − σ`.
pub fn trace_distance_dual(rho: &State, sigma: &State) -> (ConicProgram, MatVar) {
    let d = rho.dim();
    let mut p = ConicProgram::new(Sense::Minimize);
    let y = p.psd("y", d);
    let diff = rho.operator() - sigma.operator();
    p.add_psd("y - (rho - sigma)", MatrixExpr::new(d).plus_var(&y, 1.0).plus_const(&diff, -1.0));
    p.set_objective(AffineExpr::new().plus_plain_trace(&y, 1.0));
    (p, y)
}

/// `min Tr[Λσ]` over `0 ≤ Λ ≤ I`, `Tr[Λρ] ≥ 1 − ε`. Returns the program and `Λ`.
pub fn smooth_dmin_primal(rho: &State, sigma: &State, eps: f64) -> (ConicProgram, MatVar) {
    let d = rho.dim();
    let mut p = ConicProgram::new(Sense::Minimize);
    let lam = p.psd("lambda", d);
    p.add_psd("I - lambda", MatrixExpr::new(d).plus_const(&HermitianOperator::identity(d), 1.0).plus_var(&lam, -1.0));
    p.add_ge(AffineExpr::new().plus_trace(&lam, rho, 1.0).plus_const(-(1.0 - eps)));
    p.set_objective(AffineExpr::new().plus_trace(&lam, sigma, 1.0));
    (p, lam)
}

/// `max μ(1−ε) − Tr[X]` over `μ ≥ 0`, `X ≥ 0`, `μρ ≤ σ + X`.
pub fn smooth_dmin_dual(rho: &State, sigma: &State, eps: f64) -> ConicProgram {
    let d = rho.dim();
    let mut p = ConicProgram::new(Sense::Maximize);
    let mu = p.nonneg_scalar("mu");
    let x = p.psd("x", d);
    p.add_psd(
        "sigma + x - mu rho",
        MatrixExpr::new(d).plus_const(sigma, 1.0).plus_var(&x, 1.0).plus_scalar(mu, rho, -1.0),
    );
    p.set_objective(AffineExpr::new().plus_scalar(mu, 1.0 - eps).plus_plain_trace(&x, -1.0));
    p
}

/// Handles of the smoothing primals.
pub struct SmoothDmaxVars {
    pub lambda: usize,
    /// `ρ̃` compressed to the support of `σ`.
    pub smoothed: MatVar,
    /// Support basis of `σ`.
    pub face: CMat,
}

impl SmoothDmaxVars {
    /// `ρ̃` on the full space.
    pub fn smoothed_value(&self, x: &[f64]) -> HermitianOperator {
        let inner = self.smoothed.hermitian_value(x);
        HermitianOperator::new(&self.face * inner.matrix() * self.face.adjoint()).expect("square")
    }
}

/// Support basis `V` of `ρ` and the compressed `V†ρV`.
fn face_of(rho: &State) -> (CMat, HermitianOperator) {
    let (v, _) = support_split(rho.operator(), DEFAULT_RANK_TOL).expect("state has finite entries");
    let compressed = HermitianOperator::new(v.adjoint() * rho.matrix() * &v).expect("square");
    (v, compressed)
}

/// `min λ` over `ρ̃ ≤ λσ`, `Tr[Y] ≤ ε`, `Tr[ρ̃] = 1`, `Y ≥ ρ − ρ̃`, `ρ̃, Y ≥ 0`.
///
/// `ρ̃ ≤ λσ` confines `ρ̃` to the support of `σ`, so `ρ̃ = VXV†` with `V` a
/// support basis and the operator inequality is imposed on `V†σV`.
pub fn smooth_dmax_trace_primal(rho: &State, sigma: &State, eps: f64) -> (ConicProgram, SmoothDmaxVars) {
    let d = rho.dim();
    let (v, sigma_c) = face_of(sigma);
    let r = v.ncols();
    let mut p = ConicProgram::new(Sense::Minimize);
    let lambda = p.scalar("lambda");
    let rt = p.psd("rho_tilde", r);
    let y = p.psd("y", d);
    p.add_psd("lambda sigma - rho_tilde", MatrixExpr::new(r).plus_scalar(lambda, &sigma_c, 1.0).plus_var(&rt, -1.0));
    p.add_ge(AffineExpr::constant(eps).plus_plain_trace(&y, -1.0));
    p.add_eq(AffineExpr::new().plus_plain_trace(&rt, 1.0).plus_const(-1.0));
    p.add_psd(
        "y - rho + rho_tilde",
        MatrixExpr::new(d).plus_var(&y, 1.0).plus_const(rho, -1.0).plus_image(&rt, 1.0, |b| &v * b * v.adjoint()),
    );
    p.set_objective(AffineExpr::new().plus_scalar(lambda, 1.0));
    (p, SmoothDmaxVars { lambda, smoothed: rt, face: v })
}

/// `max Tr[Qρ] + μ − εt` over `Tr[XV†σV] ≤ 1`, `Q ≤ tI`, `V†QV + μI ≤ X`, `X, Q, t ≥ 0`, `μ` free.
pub fn smooth_dmax_trace_dual(rho: &State, sigma: &State, eps: f64) -> ConicProgram {
    let d = rho.dim();
    let (v, sigma_c) = face_of(sigma);
    let r = v.ncols();
    let mut p = ConicProgram::new(Sense::Maximize);
    let x = p.psd("x", r);
    let q = p.psd("q", d);
    let t = p.nonneg_scalar("t");
    let mu = p.scalar("mu");
    p.add_ge(AffineExpr::constant(1.0).plus_trace(&x, &sigma_c, -1.0));
    p.add_psd("t I - q", MatrixExpr::new(d).plus_scalar(t, &HermitianOperator::identity(d), 1.0).plus_var(&q, -1.0));
    p.add_psd(
        "x - q - mu I",
        MatrixExpr::new(r)
            .plus_var(&x, 1.0)
            .plus_image(&q, -1.0, |b| v.adjoint() * b * &v)
            .plus_scalar(mu, &HermitianOperator::identity(r), -1.0),
    );
    p.set_objective(AffineExpr::new().plus_trace(&q, rho, 1.0).plus_scalar(mu, 1.0).plus_scalar(t, -eps));
    p
}

/// `min λ` over `ρ̃ ≤ λσ`, `Tr[ρ̃] = 1`, `F(ρ̃, ρ) ≥ 1 − ε_F` with `F` the squared fidelity.
///
/// With `ρ̃ = VXV†` and `ρ = UDU†` on their supports, the ball is
/// `[[X, K], [K†, D]] ≥ 0` and `Re Tr[K U†V] ≥ √(1 − ε_F)`: the block bounds
/// `‖√ρ̃ √ρ‖₁` from below by `Re Tr[VKU†]`. Keeping either kernel inside the
/// block would let tiny PSD violations buy off-diagonal mass of order their
/// square root.
pub fn smooth_dmax_fid_primal(rho: &State, sigma: &State, eps_f: f64) -> (ConicProgram, SmoothDmaxVars) {
    let (v, sigma_c) = face_of(sigma);
    let (u, rho_c) = face_of(rho);
    let (r, k) = (v.ncols(), u.ncols());
    let overlap = u.adjoint() * &v;
    let mut p = ConicProgram::new(Sense::Minimize);
    let lambda = p.scalar("lambda");
    // Positivity of ρ̃ is implied by the fidelity block.
    let rt = p.hermitian("rho_tilde", r);
    let x = p.general("k", r, k);
    p.add_psd("lambda sigma - rho_tilde", MatrixExpr::new(r).plus_scalar(lambda, &sigma_c, 1.0).plus_var(&rt, -1.0));
    p.add_eq(AffineExpr::new().plus_plain_trace(&rt, 1.0).plus_const(-1.0));
    let (zr, zrk, zk) = (CMat::zeros(r, r), CMat::zeros(r, k), CMat::zeros(k, k));
    let bottom = embed_block(&zr, &zrk, rho_c.matrix());
    let block = MatrixExpr::new(r + k)
        .plus_const(&HermitianOperator::new(bottom).expect("square"), 1.0)
        .plus_image(&rt, 1.0, |b| embed_block(b, &zrk, &zk))
        .plus_image(&x, 1.0, |b| embed_block(&zr, b, &zk));
    p.add_psd("fidelity block", block);
    p.add_ge(AffineExpr::constant(-(1.0 - eps_f).max(0.0).sqrt()).plus_functional(&x, 1.0, |b| (b * &overlap).trace().re));
    p.set_objective(AffineExpr::new().plus_scalar(lambda, 1.0));
    (p, SmoothDmaxVars { lambda, smoothed: rt, face: v })
}

/// Lagrange dual of [`smooth_dmax_fid_primal`], with `G = V†U`:
/// `max μ − Tr[Z₂₂ D] + s√(1 − ε_F)` over `Tr[A V†σV] = 1`, `A ≥ 0`, `s ≥ 0`,
/// `[[A − μI, −(s/2) G], [−(s/2) G†, Z₂₂]] ≥ 0`.
pub fn smooth_dmax_fid_dual(rho: &State, sigma: &State, eps_f: f64) -> ConicProgram {
    let (v, sigma_c) = face_of(sigma);
    let (u, rho_c) = face_of(rho);
    let (r, k) = (v.ncols(), u.ncols());
    let g = v.adjoint() * &u;
    let mut p = ConicProgram::new(Sense::Maximize);
    let a = p.psd("a", r);
    let z22 = p.hermitian("z22", k);
    let mu = p.scalar("mu");
    let s = p.nonneg_scalar("s");
    p.add_eq(AffineExpr::new().plus_trace(&a, &sigma_c, 1.0).plus_const(-1.0));
    let (zr, zrk, zk) = (CMat::zeros(r, r), CMat::zeros(r, k), CMat::zeros(k, k));
    let off = HermitianOperator::new(embed_block(&zr, &g, &zk)).expect("square");
    let top = HermitianOperator::new(embed_block(&CMat::identity(r, r), &zrk, &zk)).expect("square");
    let block = MatrixExpr::new(r + k)
        .plus_image(&a, 1.0, |b| embed_block(b, &zrk, &zk))
        .plus_scalar(mu, &top, -1.0)
        .plus_scalar(s, &off, -0.5)
        .plus_image(&z22, 1.0, |b| embed_block(&zr, &zrk, b));
    p.add_psd("dual block", block);
    p.set_objective(
        AffineExpr::new()
            .plus_scalar(mu, 1.0)
            .plus_trace(&z22, &rho_c, -1.0)
            .plus_scalar(s, (1.0 - eps_f).max(0.0).sqrt()),
    );
    p
}

/// `[[a, b], [b†, c]]`.
fn embed_block(a: &CMat, b: &CMat, c: &CMat) -> CMat {
    let (d, r) = (a.nrows(), c.nrows());
    let mut m = CMat::zeros(d + r, d + r);
    m.view_mut((0, 0), (d, d)).copy_from(a);
    m.view_mut((0, d), (d, r)).copy_from(b);
    m.view_mut((d, 0), (r, d)).copy_from(&b.adjoint());
    m.view_mut((d, d), (r, r)).copy_from(c);
    m
}

/// Handles of the box-transformation primal.
pub struct BoxTransformVars {
    pub choi: MatVar,
    pub y: MatVar,
    pub dim_in: usize,
    pub dim_out: usize,
    face: Option<CMat>,
}

impl BoxTransformVars {
    /// Choi matrix of the solution on `R ⊗ B`.
    pub fn choi_value(&self, x: &[f64]) -> CMat {
        let k = self.choi.value(x);
        match &self.face {
            Some(w) => w * k * w.adjoint(),
            None => k,
        }
    }
}

/// Subspace of `R ⊗ B` that any Choi matrix with `N(σ) = ω` must live in:
/// the complement of `supp σ^T ⊗ ker ω`. `None` when `ω` has full rank.
pub fn box_transform_face(sigma: &State, omega: &State) -> Result<Option<CMat>> {
    let (_, ker_w) = support_split(omega.operator(), DEFAULT_RANK_TOL)?;
    if ker_w.ncols() == 0 {
        return Ok(None);
    }
    let (sup_w, _) = support_split(omega.operator(), DEFAULT_RANK_TOL)?;
    let st = HermitianOperator::from_square(sigma.matrix().transpose());
    let (sup_s, ker_s) = support_split(&st, DEFAULT_RANK_TOL)?;
    let (din, dout) = (sigma.dim(), omega.dim());
    let k = ker_s.ncols() * dout + sup_s.ncols() * sup_w.ncols();
    let mut w = CMat::zeros(din * dout, k);
    let mut c = 0;
    let eye = CMat::identity(dout, dout);
    for (left, right) in [(&ker_s, &eye), (&sup_s, &sup_w)] {
        for i in 0..left.ncols() {
            for j in 0..right.ncols() {
                w.set_column(c, &left.column(i).kronecker(&right.column(j)));
                c += 1;
            }
        }
    }
    Ok(Some(w))
}

/// `min Tr[Y]` over `Y ≥ τ − N(ρ)`, `N(σ) = ω`, `Tr_B J = I_R`, `Y, J ≥ 0`,
/// with `N(X) = Tr_R[(X^T ⊗ I) J]`. With a `face` `W` the Choi matrix is
/// restricted to `J = W K W†`.
pub fn box_transform_primal(
    rho: &State,
    sigma: &State,
    tau: &State,
    omega: &State,
    face: Option<&CMat>,
) -> (ConicProgram, BoxTransformVars) {
    let (din, dout) = (rho.dim(), tau.dim());
    let mut p = ConicProgram::new(Sense::Minimize);
    let j = p.psd("choi", face.map_or(din * dout, |w| w.ncols()));
    let y = p.psd("y", dout);
    let rho_m = rho.matrix().clone();
    let sigma_m = sigma.matrix().clone();
    let lift = |b: &CMat| match face {
        Some(w) => w * b * w.adjoint(),
        None => b.clone(),
    };
    p.add_psd(
        "y - tau + N(rho)",
        MatrixExpr::new(dout)
            .plus_var(&y, 1.0)
            .plus_const(tau, -1.0)
            .plus_image(&j, 1.0, |b| raw_choi_apply(&lift(b), din, dout, &rho_m)),
    );
    p.add_matrix_eq(
        MatrixExpr::new(dout)
            .plus_image(&j, 1.0, |b| raw_choi_apply(&lift(b), din, dout, &sigma_m))
            .plus_const(omega, -1.0),
    );
    p.add_matrix_eq(
        MatrixExpr::new(din)
            .plus_image(&j, 1.0, |b| raw_partial_trace(&lift(b), din, dout, Keep::A))
            .plus_const(&HermitianOperator::identity(din), -1.0),
    );
    p.set_objective(AffineExpr::new().plus_plain_trace(&y, 1.0));
    (p, BoxTransformVars { choi: j, y, dim_in: din, dim_out: dout, face: face.cloned() })
}

/// `max Tr[τX] + Tr[ωW] + Tr[Z]` over `0 ≤ X ≤ I`, `ρ^T ⊗ X + σ^T ⊗ W + Z ⊗ I ≤ 0`,
/// `W`, `Z` Hermitian. With a `face` `V` only the compression `V†(…)V ≤ 0` is imposed.
pub fn box_transform_dual(rho: &State, sigma: &State, tau: &State, omega: &State, face: Option<&CMat>) -> ConicProgram {
    let (din, dout) = (rho.dim(), tau.dim());
    let mut p = ConicProgram::new(Sense::Maximize);
    let x = p.psd("x", dout);
    let w = p.hermitian("w", dout);
    let z = p.hermitian("z", din);
    p.add_psd("I - x", MatrixExpr::new(dout).plus_const(&HermitianOperator::identity(dout), 1.0).plus_var(&x, -1.0));
    let rt = rho.matrix().transpose();
    let st = sigma.matrix().transpose();
    let id_b = CMat::identity(dout, dout);
    let compress = |m: CMat| match face {
        Some(v) => v.adjoint() * m * v,
        None => m,
    };
    p.add_psd(
        "-(rho^T x + sigma^T w + z I)",
        MatrixExpr::new(face.map_or(din * dout, |v| v.ncols()))
            .plus_image(&x, -1.0, |b| compress(rt.kronecker(b)))
            .plus_image(&w, -1.0, |b| compress(st.kronecker(b)))
            .plus_image(&z, -1.0, |b| compress(b.kronecker(&id_b))),
    );
    p.set_objective(
        AffineExpr::new().plus_trace(&x, tau, 1.0).plus_trace(&w, omega, 1.0).plus_plain_trace(&z, 1.0),
    );
    p
}

/// `ε = 0` face of [`smooth_dmin_primal`]: there `Λ = Π_ρ ⊕ Λ'` with `Λ'` on
/// `ker ρ`, so the program is `Tr[Π_ρ σ] + min Tr[Λ' V†σV]` over `0 ≤ Λ' ≤ I`,
/// where the columns of `V` span `ker ρ`. Requires `V` to have at least one column.
pub fn dmin_face_primal(sigma: &State, pi_rho: &HermitianOperator, v: &CMat) -> (ConicProgram, MatVar) {
    let k = v.ncols();
    let compressed = HermitianOperator::new(v.adjoint() * sigma.matrix() * v).expect("square");
    let mut p = ConicProgram::new(Sense::Minimize);
    let lam = p.psd("lambda_ker", k);
    p.add_psd("I - lambda_ker", MatrixExpr::new(k).plus_const(&HermitianOperator::identity(k), 1.0).plus_var(&lam, -1.0));
    p.set_objective(AffineExpr::constant(pi_rho.trace_with(sigma)).plus_trace(&lam, &compressed, 1.0));
    (p, lam)
}

/// Dual of [`dmin_face_primal`]: `Tr[Π_ρ σ] + max −Tr[X]` over `X ≥ 0`, `X + V†σV ≥ 0`.
pub fn dmin_face_dual(sigma: &State, pi_rho: &HermitianOperator, v: &CMat) -> ConicProgram {
    let k = v.ncols();
    let compressed = HermitianOperator::new(v.adjoint() * sigma.matrix() * v).expect("square");
    let mut p = ConicProgram::new(Sense::Maximize);
    let x = p.psd("x", k);
    p.add_psd("x + sigma_ker", MatrixExpr::new(k).plus_var(&x, 1.0).plus_const(&compressed, 1.0));
    p.set_objective(AffineExpr::constant(pi_rho.trace_with(sigma)).plus_plain_trace(&x, -1.0));
    p
}

/// `min λ` over `ρ ≤ λσ`: the `ε = 0` face of both smoothing balls.
pub fn dmax_primal(rho: &State, sigma: &State) -> (ConicProgram, usize) {
    let d = rho.dim();
    let mut p = ConicProgram::new(Sense::Minimize);
    let lambda = p.scalar("lambda");
    p.add_psd("lambda sigma - rho", MatrixExpr::new(d).plus_scalar(lambda, sigma, 1.0).plus_const(rho, -1.0));
    p.set_objective(AffineExpr::new().plus_scalar(lambda, 1.0));
    (p, lambda)
}

/// `max Tr[Xρ]` over `Tr[Xσ] ≤ 1`, `X ≥ 0`.
pub fn dmax_dual(rho: &State, sigma: &State) -> ConicProgram {
    let d = rho.dim();
    let mut p = ConicProgram::new(Sense::Maximize);
    let x = p.psd("x", d);
    p.add_ge(AffineExpr::constant(1.0).plus_trace(&x, sigma, -1.0));
    p.set_objective(AffineExpr::new().plus_trace(&x, rho, 1.0));
    p
}

/// `min ½‖A − τ‖₁` over states `A = V X V†` supported on the range of `V`.
///
/// This is the box-transformation error from `(|0⟩⟨0|, π_M)` to `(τ, ω)` in the
/// limit `M → ∞` when `V` spans the support of `ω`.
pub fn supported_approx_primal(tau: &State, v: &CMat) -> (ConicProgram, MatVar) {
    let (d, k) = (tau.dim(), v.ncols());
    let mut p = ConicProgram::new(Sense::Minimize);
    let x = p.psd("x", k);
    let y = p.psd("y", d);
    let vc = v.clone();
    p.add_psd(
        "y - tau + V x V*",
        MatrixExpr::new(d).plus_var(&y, 1.0).plus_const(tau, -1.0).plus_image(&x, 1.0, |b| &vc * b * vc.adjoint()),
    );
    p.add_eq(AffineExpr::new().plus_plain_trace(&x, 1.0).plus_const(-1.0));
    p.set_objective(AffineExpr::new().plus_plain_trace(&y, 1.0));
    (p, x)
}

/// `max Tr[Zτ] + μ` over `0 ≤ Z ≤ I`, `V†ZV + μI ≤ 0`.
pub fn supported_approx_dual(tau: &State, v: &CMat) -> ConicProgram {
    let (d, k) = (tau.dim(), v.ncols());
    let mut p = ConicProgram::new(Sense::Maximize);
    let z = p.psd("z", d);
    let mu = p.scalar("mu");
    p.add_psd("I - z", MatrixExpr::new(d).plus_const(&HermitianOperator::identity(d), 1.0).plus_var(&z, -1.0));
    let vc = v.clone();
    p.add_psd(
        "-(V* z V + mu I)",
        MatrixExpr::new(k)
            .plus_image(&z, -1.0, |b| vc.adjoint() * b * &vc)
            .plus_scalar(mu, &HermitianOperator::identity(k), -1.0),
    );
    p.set_objective(AffineExpr::new().plus_trace(&z, tau, 1.0).plus_scalar(mu, 1.0));
    p
}
