use std::fmt::Write as _;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use num_complex::Complex64;

use super::embed::{derealify, embed_upper, smat, svec_len};
use super::polish::{KktPoint, refine};
use crate::linalg::{CMat, HermitianOperator};

/// Default bound on `|primal − dual|` for an optimal solve.
pub const DEFAULT_GAP_TOL: f64 = 1e-7;
/// Default bound on the constraint violation of an optimal point.
pub const DEFAULT_FEAS_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Complex matrix variable expanded in a real basis: `X = Σ_k x[ids[k]] · basis[k]`.
#[derive(Clone, Debug)]
pub struct MatVar {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    ids: Vec<usize>,
    basis: Vec<CMat>,
}

impl MatVar {
    pub fn value(&self, x: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.rows, self.cols);
        for (id, b) in self.ids.iter().zip(&self.basis) {
            m += b * Complex64::new(x[*id], 0.0);
        }
        m
    }

    pub fn hermitian_value(&self, x: &[f64]) -> HermitianOperator {
        HermitianOperator::new(self.value(x)).expect("hermitian variable is square")
    }

    fn components(&self) -> impl Iterator<Item = (usize, &CMat)> {
        self.ids.iter().copied().zip(self.basis.iter())
    }
}

/// Real affine function of the decision vector.
#[derive(Clone, Debug, Default)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus_scalar(mut self, id: usize, c: f64) -> Self {
        self.terms.push((id, c));
        self
    }

    /// Adds `c · g(X)` for a real-linear functional `g`.
    pub fn plus_functional(mut self, v: &MatVar, c: f64, g: impl Fn(&CMat) -> f64) -> Self {
        for (id, b) in v.components() {
            let w = g(b);
            if w != 0.0 {
                self.terms.push((id, c * w));
            }
        }
        self
    }

    /// Adds `c · Re Tr[A X]`.
    pub fn plus_trace(self, v: &MatVar, a: &HermitianOperator, c: f64) -> Self {
        let am = a.matrix().clone();
        self.plus_functional(v, c, move |b| (&am * b).trace().re)
    }

    /// Adds `c · Re Tr[X]`.
    pub fn plus_plain_trace(self, v: &MatVar, c: f64) -> Self {
        self.plus_functional(v, c, |b| b.trace().re)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }
}

/// Affine Hermitian-matrix-valued expression, stored by upper-triangle entries.
#[derive(Clone, Debug)]
pub struct MatrixExpr {
    pub dim: usize,
    pub(super) constant: CMat,
    pub(super) terms: Vec<(usize, Vec<(usize, usize, Complex64)>)>,
}

fn upper_entries(m: &CMat) -> Vec<(usize, usize, Complex64)> {
    let d = m.nrows();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            let v = m[(i, j)];
            if v.re != 0.0 || v.im != 0.0 {
                out.push((i, j, if i == j { Complex64::new(v.re, 0.0) } else { v }));
            }
        }
    }
    out
}

impl MatrixExpr {
    pub fn new(dim: usize) -> Self {
        Self { dim, constant: CMat::zeros(dim, dim), terms: Vec::new() }
    }

    pub fn plus_const(mut self, a: &HermitianOperator, c: f64) -> Self {
        assert_eq!(a.dim(), self.dim, "constant term dimension");
        self.constant += a.matrix() * Complex64::new(c, 0.0);
        self
    }

    /// Adds `c · x_id · A`.
    pub fn plus_scalar(mut self, id: usize, a: &HermitianOperator, c: f64) -> Self {
        assert_eq!(a.dim(), self.dim, "scalar term dimension");
        let scaled = a.matrix() * Complex64::new(c, 0.0);
        self.terms.push((id, upper_entries(&scaled)));
        self
    }

    /// Adds `c · f(X)` for a Hermiticity-preserving real-linear map `f`.
    pub fn plus_image(mut self, v: &MatVar, c: f64, f: impl Fn(&CMat) -> CMat) -> Self {
        for (id, b) in v.components() {
            let img = f(b);
            assert_eq!(img.nrows(), self.dim, "image dimension");
            let entries = upper_entries(&(img * Complex64::new(c, 0.0)));
            if !entries.is_empty() {
                self.terms.push((id, entries));
            }
        }
        self
    }

    /// Adds `c · X` for a square variable of matching size.
    pub fn plus_var(self, v: &MatVar, c: f64) -> Self {
        self.plus_image(v, c, |b| b.clone())
    }

    pub fn eval(&self, x: &[f64]) -> HermitianOperator {
        let mut m = self.constant.clone();
        for (id, entries) in &self.terms {
            for &(i, j, v) in entries {
                let w = v * x[*id];
                m[(i, j)] += w;
                if i != j {
                    m[(j, i)] += w.conj();
                }
            }
        }
        HermitianOperator::new(m).expect("square")
    }

    fn constant_upper(&self) -> Vec<(usize, usize, Complex64)> {
        upper_entries(&self.constant)
    }
}

/// Linear conic program over real scalars with affine equalities,
/// nonnegativity constraints and Hermitian linear matrix inequalities.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    pub sense: Sense,
    n_vars: usize,
    var_names: Vec<String>,
    pub objective: AffineExpr,
    pub equalities: Vec<AffineExpr>,
    pub inequalities: Vec<AffineExpr>,
    pub lmis: Vec<(String, MatrixExpr)>,
}

impl ConicProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            n_vars: 0,
            var_names: Vec::new(),
            objective: AffineExpr::new(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lmis: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n_vars
    }

    fn fresh(&mut self, name: String) -> usize {
        self.var_names.push(name);
        self.n_vars += 1;
        self.n_vars - 1
    }

    pub fn scalar(&mut self, name: &str) -> usize {
        self.fresh(name.to_string())
    }

    pub fn nonneg_scalar(&mut self, name: &str) -> usize {
        let id = self.scalar(name);
        self.inequalities.push(AffineExpr::new().plus_scalar(id, 1.0));
        id
    }

    /// Free Hermitian `d × d` variable (`d²` real parameters).
    pub fn hermitian(&mut self, name: &str, d: usize) -> MatVar {
        let mut ids = Vec::with_capacity(d * d);
        let mut basis = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in i..d {
                let mut b = CMat::zeros(d, d);
                if i == j {
                    b[(i, i)] = Complex64::new(1.0, 0.0);
                    ids.push(self.fresh(format!("{name}[{i},{i}]")));
                    basis.push(b);
                } else {
                    b[(i, j)] = Complex64::new(1.0, 0.0);
                    b[(j, i)] = Complex64::new(1.0, 0.0);
                    ids.push(self.fresh(format!("re {name}[{i},{j}]")));
                    basis.push(b);
                    let mut c = CMat::zeros(d, d);
                    c[(i, j)] = Complex64::new(0.0, 1.0);
                    c[(j, i)] = Complex64::new(0.0, -1.0);
                    ids.push(self.fresh(format!("im {name}[{i},{j}]")));
                    basis.push(c);
                }
            }
        }
        MatVar { name: name.to_string(), rows: d, cols: d, ids, basis }
    }

    /// Hermitian variable constrained PSD.
    pub fn psd(&mut self, name: &str, d: usize) -> MatVar {
        let v = self.hermitian(name, d);
        self.add_psd(&format!("{name} >= 0"), MatrixExpr::new(d).plus_var(&v, 1.0));
        v
    }

    /// Unconstrained complex `rows × cols` variable.
    pub fn general(&mut self, name: &str, rows: usize, cols: usize) -> MatVar {
        let mut ids = Vec::new();
        let mut basis = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                for (part, unit) in [("re", Complex64::new(1.0, 0.0)), ("im", Complex64::new(0.0, 1.0))] {
                    let mut b = CMat::zeros(rows, cols);
                    b[(i, j)] = unit;
                    ids.push(self.fresh(format!("{part} {name}[{i},{j}]")));
                    basis.push(b);
                }
            }
        }
        MatVar { name: name.to_string(), rows, cols, ids, basis }
    }

    pub fn set_objective(&mut self, e: AffineExpr) {
        self.objective = e;
    }

    /// `e = 0`.
    pub fn add_eq(&mut self, e: AffineExpr) {
        self.equalities.push(e);
    }

    /// `e ≥ 0`.
    pub fn add_ge(&mut self, e: AffineExpr) {
        self.inequalities.push(e);
    }

    /// `m ⪰ 0`.
    pub fn add_psd(&mut self, name: &str, m: MatrixExpr) {
        self.lmis.push((name.to_string(), m));
    }

    /// `m = 0`, imposed entrywise on real and imaginary parts of the upper triangle.
    pub fn add_matrix_eq(&mut self, m: MatrixExpr) {
        let d = m.dim;
        let idx = |i: usize, j: usize| i * d + j;
        let mut re: Vec<AffineExpr> = vec![AffineExpr::new(); d * d];
        let mut im: Vec<AffineExpr> = vec![AffineExpr::new(); d * d];
        for (i, j, v) in m.constant_upper() {
            re[idx(i, j)].constant += v.re;
            im[idx(i, j)].constant += v.im;
        }
        for (id, entries) in &m.terms {
            for &(i, j, v) in entries {
                if v.re != 0.0 {
                    re[idx(i, j)].terms.push((*id, v.re));
                }
                if v.im != 0.0 {
                    im[idx(i, j)].terms.push((*id, v.im));
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                self.equalities.push(std::mem::take(&mut re[idx(i, j)]));
                if i != j {
                    self.equalities.push(std::mem::take(&mut im[idx(i, j)]));
                }
            }
        }
    }

    /// Largest violation at `x` over all constraints: equality residuals,
    /// negative parts of inequalities and of LMI eigenvalues.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v = 0.0_f64;
        for e in &self.equalities {
            v = v.max(e.eval(x).abs());
        }
        for e in &self.inequalities {
            v = v.max(-e.eval(x));
        }
        for (_, m) in &self.lmis {
            match m.eval(x).min_eigenvalue() {
                Ok(l) => v = v.max(-l),
                Err(_) => return f64::INFINITY,
            }
        }
        if v.is_nan() { f64::INFINITY } else { v }
    }

    /// Total real PSD dimension after embedding.
    pub fn psd_dimension(&self) -> usize {
        self.lmis.iter().map(|(_, m)| 2 * m.dim).sum()
    }

    /// Sparse-triplet text dump.
    ///
    /// One record per line, `block row col value`. Block `obj` holds the
    /// objective (`row 0`, column = variable, `col -1` = constant), blocks
    /// `eq:k` and `ge:k` hold scalar constraints in the same way, and blocks
    /// `lmi:k` hold complex upper-triangle entries as `lmi:k.var row col re im`
    /// with `var = -1` for the constant term.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        let _ = writeln!(s, "# sense {sense} vars {}", self.n_vars);
        for (k, n) in self.var_names.iter().enumerate() {
            let _ = writeln!(s, "# var {k} {n}");
        }
        let scalar_block = |s: &mut String, tag: &str, e: &AffineExpr| {
            for &(i, c) in &e.terms {
                let _ = writeln!(s, "{tag} 0 {i} {c:e}");
            }
            if e.constant != 0.0 {
                let _ = writeln!(s, "{tag} 0 -1 {:e}", e.constant);
            }
        };
        scalar_block(&mut s, "obj", &self.objective);
        for (k, e) in self.equalities.iter().enumerate() {
            scalar_block(&mut s, &format!("eq:{k}"), e);
        }
        for (k, e) in self.inequalities.iter().enumerate() {
            scalar_block(&mut s, &format!("ge:{k}"), e);
        }
        for (k, (name, m)) in self.lmis.iter().enumerate() {
            let _ = writeln!(s, "# lmi {k} dim {} {name}", m.dim);
            for (i, j, v) in m.constant_upper() {
                let _ = writeln!(s, "lmi:{k}.-1 {i} {j} {:e} {:e}", v.re, v.im);
            }
            for (id, entries) in &m.terms {
                for &(i, j, v) in entries {
                    let _ = writeln!(s, "lmi:{k}.{id} {i} {j} {:e} {:e}", v.re, v.im);
                }
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Solver controls.
#[derive(Clone, Copy, Debug)]
pub struct SolverSettings {
    /// Bound on `|primal − dual|`, relative once the objective exceeds one in magnitude.
    pub gap_tol: f64,
    /// Target residual tolerance handed to the interior-point iteration.
    pub inner_tol: f64,
    pub max_iter: u32,
    /// Largest constraint violation of an optimal point, measured on the original program.
    pub feas_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { gap_tol: DEFAULT_GAP_TOL, inner_tol: 1e-10, max_iter: 400, feas_tol: DEFAULT_FEAS_TOL }
    }
}

impl SolverSettings {
    /// Defaults, with `gap_tol` overridden by `ADLAB_GAP_TOL` when set and valid.
    pub fn from_env() -> Self {
        let mut s = Self::default();
        if let Some(v) = std::env::var("ADLAB_GAP_TOL").ok().and_then(|v| v.parse::<f64>().ok()) {
            if v > 0.0 && v.is_finite() {
                s.gap_tol = v;
            }
        }
        s
    }

    /// [`SolverSettings::from_env`], read once per process.
    pub fn configured() -> Self {
        static CONFIGURED: std::sync::OnceLock<SolverSettings> = std::sync::OnceLock::new();
        *CONFIGURED.get_or_init(Self::from_env)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    /// Primal decision vector.
    pub x: Vec<f64>,
    /// Multipliers of the equality constraints.
    pub eq_duals: Vec<f64>,
    /// Multipliers of the `≥ 0` constraints.
    pub ineq_duals: Vec<f64>,
    /// Dual matrices of the LMIs, paired with the constraint as `Re Tr[Z F(x)]`.
    pub lmi_duals: Vec<HermitianOperator>,
    pub iterations: u32,
    /// Termination status as reported by the interior-point solver.
    pub solver_status: String,
    /// Constraint violation of `x`, as in [`ConicProgram::max_violation`].
    pub primal_residual: f64,
    /// Relative dual residual reported by the solver.
    pub dual_residual: f64,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn matrix(&self, v: &MatVar) -> CMat {
        v.value(&self.x)
    }

    pub fn hermitian(&self, v: &MatVar) -> HermitianOperator {
        v.hermitian_value(&self.x)
    }

    pub fn scalar(&self, id: usize) -> f64 {
        self.x[id]
    }
}

pub fn solve(p: &ConicProgram) -> SolveResult {
    solve_with(p, &SolverSettings::default())
}

pub fn solve_with(p: &ConicProgram, settings: &SolverSettings) -> SolveResult {
    let n = p.n_vars;
    let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut row = 0usize;

    // Equalities: a'x + c = 0  ->  a'x + s = -c, s = 0. Linearly dependent
    // rows are dropped; they make the KKT system singular.
    let kept = independent_rows(n, &p.equalities);
    for e in kept.iter().map(|&k| &p.equalities[k]) {
        for &(i, c) in &e.terms {
            rows.push(row);
            cols.push(i);
            vals.push(c);
        }
        b.push(-e.constant);
        row += 1;
    }
    if !kept.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(kept.len()));
    }
    // Inequalities: a'x + c >= 0  ->  -a'x + s = c, s >= 0.
    for e in &p.inequalities {
        for &(i, c) in &e.terms {
            rows.push(row);
            cols.push(i);
            vals.push(-c);
        }
        b.push(e.constant);
        row += 1;
    }
    if !p.inequalities.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(p.inequalities.len()));
    }
    // LMIs: svec(R(F0)) + Σ x_k svec(R(F_k)) = s in the PSD cone.
    let mut lmi_offsets = Vec::new();
    let mut buf = Vec::new();
    for (_, m) in &p.lmis {
        let d = m.dim;
        let len = svec_len(2 * d);
        lmi_offsets.push((row, 2 * d));
        let mut b_block = vec![0.0; len];
        buf.clear();
        embed_upper(d, &m.constant_upper(), &mut buf);
        for &(k, v) in &buf {
            b_block[k] += v;
        }
        b.extend_from_slice(&b_block);
        for (id, entries) in &m.terms {
            buf.clear();
            embed_upper(d, entries, &mut buf);
            for &(k, v) in &buf {
                rows.push(row + k);
                cols.push(*id);
                vals.push(-v);
            }
        }
        cones.push(SupportedConeT::PSDTriangleConeT(2 * d));
        row += len;
    }

    let m_rows = row;
    let a = CscMatrix::new_from_triplets(m_rows, n, rows, cols, vals);
    let pmat = CscMatrix::<f64>::zeros((n, n));
    let sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut q = vec![0.0; n];
    for &(i, c) in &p.objective.terms {
        q[i] += sign * c;
    }

    let failure = |iterations| SolveResult {
        status: SolveStatus::NumericalFailure,
        primal_value: f64::NAN,
        dual_value: f64::NAN,
        gap: f64::INFINITY,
        x: vec![0.0; n],
        eq_duals: Vec::new(),
        ineq_duals: Vec::new(),
        lmi_duals: Vec::new(),
        iterations,
        solver_status: "SetupFailed".to_string(),
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
    };

    let mut best: Option<SolveResult> = None;
    for &(step, equilibrate) in ATTEMPTS {
        let Some(r) = run_clarabel(p, settings, &Assembled { pmat: &pmat, q: &q, a: &a, b: &b, cones: &cones, kept: &kept }, sign, &lmi_offsets, step, equilibrate) else {
            return failure(0);
        };
        // Infeasibility certificates are not final: near-singular data can
        // trigger them spuriously, and a later attempt may still verify an optimum.
        // A reduced-accuracy stop can pass the checks with a biased objective;
        // keep it as a fallback and see whether another variant solves cleanly.
        if r.status == SolveStatus::Optimal && r.solver_status.starts_with("Solved") {
            return r;
        }
        let better = match &best {
            None => true,
            Some(bst) => rank_attempt(&r) < rank_attempt(bst),
        };
        if better {
            best = Some(r);
        }
    }
    best.unwrap_or_else(|| failure(0))
}

/// Step-length and equilibration variants tried in order until one solves cleanly.
const ATTEMPTS: &[(f64, bool)] = &[(0.99, true), (0.95, true), (0.95, false), (0.9, true), (0.8, false)];

struct Assembled<'a> {
    pmat: &'a CscMatrix<f64>,
    q: &'a [f64],
    a: &'a CscMatrix<f64>,
    b: &'a [f64],
    cones: &'a [SupportedConeT<f64>],
    kept: &'a [usize],
}

/// Indices of a maximal linearly independent subset of the equality rows
/// (modified Gram-Schmidt with one reorthogonalization pass).
fn independent_rows(n: usize, eqs: &[AffineExpr]) -> Vec<usize> {
    let dense = |e: &AffineExpr| {
        let mut v = vec![0.0; n];
        for &(i, c) in &e.terms {
            v[i] += c;
        }
        v
    };
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = eqs.iter().map(|e| l2(&dense(e))).fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for (k, e) in eqs.iter().enumerate() {
        let mut v = dense(e);
        let norm0 = l2(&v);
        if norm0 <= 1e-12 * scale {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= dot * qi);
            }
        }
        let norm = l2(&v);
        if norm > 1e-9 * norm0 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
            kept.push(k);
        }
    }
    kept
}

/// Ordering key for fallback attempts: optimal first, then by gap and violation.
fn rank_attempt(r: &SolveResult) -> (u8, f64) {
    let scale = r.primal_value.abs().max(1.0);
    let err = r.gap / scale + r.primal_residual;
    let bucket = match r.status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible | SolveStatus::Unbounded => 1,
        SolveStatus::NumericalFailure => 2,
    };
    (bucket, if err.is_nan() { f64::INFINITY } else { err })
}

#[allow(clippy::too_many_arguments)]
fn run_clarabel(
    p: &ConicProgram,
    settings: &SolverSettings,
    data: &Assembled<'_>,
    sign: f64,
    lmi_offsets: &[(usize, usize)],
    step: f64,
    equilibrate: bool,
) -> Option<SolveResult> {
    let tol = settings.inner_tol;
    let cfg = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(settings.max_iter)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .tol_infeas_abs(tol)
        .tol_infeas_rel(tol)
        .max_threads(1)
        .max_step_fraction(step)
        .equilibrate_enable(equilibrate)
        // The blocks are small and dense; clique splitting only costs accuracy.
        .chordal_decomposition_enable(false)
        .build()
        .ok()?;
    let mut solver = DefaultSolver::new(data.pmat, data.q, data.a, data.b, data.cones, cfg).ok()?;
    solver.solve();
    let sol = &solver.solution;
    let iterations = sol.iterations;

    let raw_status = sol.status;
    let c0 = p.objective.constant;
    let z = &sol.z;
    let n_eq = data.kept.len();
    let n_ineq = p.inequalities.len();
    let start = KktPoint {
        x: sol.x.clone(),
        y: z[..n_eq].iter().map(|v| -v).collect(),
        z: z[n_eq..n_eq + n_ineq].to_vec(),
        zs: lmi_offsets
            .iter()
            .map(|&(off, nn)| derealify(&smat(nn, &z[off..off + svec_len(nn)])).scale(2.0).matrix().clone())
            .collect(),
    };
    let mut primal_value = sign * sol.obj_val + c0;
    let mut dual_value = sign * sol.obj_val_dual + c0;
    let mut violation = p.max_violation(&sol.x);
    let mut point = start.clone();
    let mut refined = false;
    let mut dual_residual = sol.r_dual;
    // Stalled runs often end close to the optimum; polishing can still certify them.
    let stalled = matches!(
        raw_status,
        SolverStatus::InsufficientProgress | SolverStatus::NumericalError | SolverStatus::MaxIterations
    );
    if matches!(raw_status, SolverStatus::Solved | SolverStatus::AlmostSolved) || stalled {
        if let Some(r) = refine(p, data.kept, start) {
            let v = p.max_violation(&r.point.x);
            if v <= violation.max(settings.feas_tol) && (r.primal_value - r.dual_value).abs() <= (primal_value - dual_value).abs() {
                primal_value = r.primal_value;
                dual_value = r.dual_value;
                violation = v;
                dual_residual = r.residual;
                point = r.point;
                refined = true;
            }
        }
    }
    let gap = (primal_value - dual_value).abs();
    let scale = primal_value.abs().max(dual_value.abs()).max(1.0);
    let gap_ok = gap.is_finite() && gap <= settings.gap_tol * scale;
    let feas_ok = violation <= settings.feas_tol;

    let status = match raw_status {
        SolverStatus::Solved | SolverStatus::AlmostSolved if gap_ok && feas_ok => SolveStatus::Optimal,
        _ if stalled && refined && gap_ok && feas_ok && dual_residual <= settings.feas_tol => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    };

    let mut eq_duals = vec![0.0; p.equalities.len()];
    for (&k, &y) in data.kept.iter().zip(&point.y) {
        eq_duals[k] = -y;
    }
    let lmi_duals = point.zs.into_iter().map(HermitianOperator::from_square).collect();
    let solver_status = if refined { format!("{raw_status:?}+refined") } else { format!("{raw_status:?}") };

    Some(SolveResult {
        status,
        primal_value,
        dual_value,
        gap,
        x: point.x,
        eq_duals,
        ineq_duals: point.z,
        lmi_duals,
        iterations,
        solver_status,
        primal_residual: violation,
        dual_residual,
    })
}
