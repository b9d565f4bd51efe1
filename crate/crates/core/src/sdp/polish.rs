//! Refinement of an interior-point solution.
//!
//! From the solver's final iterate, a few primal-dual Newton steps are taken on
//! the optimality system with complementarity `SZ + ZS = 2μI` (and `s z = μ`
//! for scalar constraints), shrinking `μ` to zero. Under strict complementarity
//! the Jacobian stays nonsingular and the iterate reaches full double
//! precision. A refined point is kept only if it is feasible and its residual
//! is below the starting one.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::program::{ConicProgram, Sense};
use crate::linalg::{CMat, HermitianOperator};

/// Primal-dual point for `min c̃·x` (the objective is negated for maximization)
/// with multipliers for `a·x + b = 0`, `g·x + h ≥ 0` and `F(x) ≥ 0`.
#[derive(Clone, Debug)]
pub(super) struct KktPoint {
    pub x: Vec<f64>,
    /// One per retained equality row.
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub zs: Vec<CMat>,
}

/// Refined point with its primal and dual objective in the program's own sense.
pub(super) struct Refined {
    pub point: KktPoint,
    pub primal_value: f64,
    pub dual_value: f64,
    pub residual: f64,
}

const MAX_STEPS: usize = 40;
const CONE_SLACK: f64 = 1e-9;

struct Lmi {
    dim: usize,
    f0: CMat,
    /// `F_i` for every variable, dense, `None` when the variable does not appear.
    fi: Vec<Option<CMat>>,
}

struct Layout<'a> {
    p: &'a ConicProgram,
    kept: &'a [usize],
    c: Vec<f64>,
    lmis: Vec<Lmi>,
    n: usize,
}

fn dense(n: usize, terms: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &(i, c) in terms {
        v[i] += c;
    }
    v
}

/// Coordinates of a Hermitian matrix in an orthonormal real basis.
fn hvec(m: &CMat, out: &mut Vec<f64>) {
    let d = m.nrows();
    let r2 = std::f64::consts::SQRT_2;
    for i in 0..d {
        out.push(m[(i, i)].re);
        for j in i + 1..d {
            out.push(r2 * m[(i, j)].re);
            out.push(r2 * m[(i, j)].im);
        }
    }
}

/// Basis element `k` of the same basis.
fn hbasis(d: usize, k: usize) -> CMat {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut idx = 0;
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        if idx == k {
            m[(i, i)] = Complex64::new(1.0, 0.0);
            return m;
        }
        idx += 1;
        for j in i + 1..d {
            if idx == k {
                m[(i, j)] = Complex64::new(r, 0.0);
                m[(j, i)] = Complex64::new(r, 0.0);
                return m;
            }
            if idx + 1 == k {
                m[(i, j)] = Complex64::new(0.0, r);
                m[(j, i)] = Complex64::new(0.0, -r);
                return m;
            }
            idx += 2;
        }
    }
    unreachable!("basis index out of range")
}

fn re_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

impl<'a> Layout<'a> {
    fn new(p: &'a ConicProgram, kept: &'a [usize]) -> Self {
        let n = p.num_vars();
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let c = dense(n, &p.objective.terms).into_iter().map(|v| sign * v).collect();
        let lmis = p
            .lmis
            .iter()
            .map(|(_, m)| {
                let d = m.dim;
                let mut fi: Vec<Option<CMat>> = vec![None; n];
                for (id, entries) in &m.terms {
                    let f = fi[*id].get_or_insert_with(|| CMat::zeros(d, d));
                    for &(i, j, v) in entries {
                        f[(i, j)] += v;
                        if i != j {
                            f[(j, i)] += v.conj();
                        }
                    }
                }
                Lmi { dim: d, f0: m.constant.clone(), fi }
            })
            .collect();
        Self { p, kept, c, lmis, n }
    }

    fn size(&self) -> usize {
        self.n + self.kept.len() + self.p.inequalities.len() + self.lmis.iter().map(|l| l.dim * l.dim).sum::<usize>()
    }

    fn slack(&self, l: &Lmi, x: &[f64]) -> CMat {
        let mut s = l.f0.clone();
        for (i, f) in l.fi.iter().enumerate() {
            if let Some(f) = f {
                s += f * Complex64::new(x[i], 0.0);
            }
        }
        s
    }

    fn residual(&self, pt: &KktPoint) -> Vec<f64> {
        self.residual_at(pt, 0.0)
    }

    /// Optimality residual with complementarity targets `SZ + ZS = 2μI`, `s z = μ`.
    fn residual_at(&self, pt: &KktPoint, mu: f64) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.size());
        // Stationarity.
        let mut st = self.c.clone();
        for (&k, &y) in self.kept.iter().zip(&pt.y) {
            for &(i, a) in &self.p.equalities[k].terms {
                st[i] -= y * a;
            }
        }
        for (e, &z) in self.p.inequalities.iter().zip(&pt.z) {
            for &(i, g) in &e.terms {
                st[i] -= z * g;
            }
        }
        for (l, zk) in self.lmis.iter().zip(&pt.zs) {
            for (i, f) in l.fi.iter().enumerate() {
                if let Some(f) = f {
                    st[i] -= re_inner(zk, f);
                }
            }
        }
        r.extend(st);
        for &k in self.kept {
            r.push(self.p.equalities[k].eval(&pt.x));
        }
        for (e, &z) in self.p.inequalities.iter().zip(&pt.z) {
            r.push(z * e.eval(&pt.x) - mu);
        }
        for (l, zk) in self.lmis.iter().zip(&pt.zs) {
            let s = self.slack(l, &pt.x);
            let target = CMat::identity(l.dim, l.dim) * Complex64::new(2.0 * mu, 0.0);
            hvec(&(&s * zk + zk * &s - target), &mut r);
        }
        r
    }

    fn jacobian(&self, pt: &KktPoint) -> DMatrix<f64> {
        let size = self.size();
        let n = self.n;
        let (ne, ni) = (self.kept.len(), self.p.inequalities.len());
        let mut j = DMatrix::zeros(size, size);
        let off_y = n;
        let off_z = n + ne;
        let mut off_zk = n + ne + ni;
        // Stationarity rows.
        for (col, &k) in self.kept.iter().enumerate() {
            for &(i, a) in &self.p.equalities[k].terms {
                j[(i, off_y + col)] -= a;
                j[(n + col, i)] += a;
            }
        }
        let mut row = n + ne;
        for (q, e) in self.p.inequalities.iter().enumerate() {
            let s = e.eval(&pt.x);
            for &(i, g) in &e.terms {
                j[(i, off_z + q)] -= g;
                j[(row, i)] += pt.z[q] * g;
            }
            j[(row, off_z + q)] += s;
            row += 1;
        }
        for (l, zk) in self.lmis.iter().zip(&pt.zs) {
            let d = l.dim;
            let m = d * d;
            let s = self.slack(l, &pt.x);
            let mut buf = Vec::with_capacity(m);
            for b in 0..m {
                let e = hbasis(d, b);
                for (i, f) in l.fi.iter().enumerate() {
                    if let Some(f) = f {
                        j[(i, off_zk + b)] -= re_inner(&e, f);
                    }
                }
                buf.clear();
                hvec(&(&s * &e + &e * &s), &mut buf);
                for (t, v) in buf.iter().enumerate() {
                    j[(row + t, off_zk + b)] += v;
                }
            }
            for (i, f) in l.fi.iter().enumerate() {
                if let Some(f) = f {
                    buf.clear();
                    hvec(&(f * zk + zk * f), &mut buf);
                    for (t, v) in buf.iter().enumerate() {
                        j[(row + t, i)] += v;
                    }
                }
            }
            row += m;
            off_zk += m;
        }
        j
    }

    fn step(&self, pt: &KktPoint, delta: &DVector<f64>) -> KktPoint {
        let n = self.n;
        let (ne, ni) = (self.kept.len(), self.p.inequalities.len());
        let x = pt.x.iter().enumerate().map(|(i, v)| v + delta[i]).collect();
        let y = pt.y.iter().enumerate().map(|(i, v)| v + delta[n + i]).collect();
        let z = pt.z.iter().enumerate().map(|(i, v)| v + delta[n + ne + i]).collect();
        let mut off = n + ne + ni;
        let zs = self
            .lmis
            .iter()
            .zip(&pt.zs)
            .map(|(l, zk)| {
                let mut m = zk.clone();
                for b in 0..l.dim * l.dim {
                    m += hbasis(l.dim, b) * Complex64::new(delta[off + b], 0.0);
                }
                off += l.dim * l.dim;
                m
            })
            .collect();
        KktPoint { x, y, z, zs }
    }

    /// Smallest eigenvalue over every cone, primal and dual, scalars included.
    fn cone_margin(&self, pt: &KktPoint) -> f64 {
        let mut m = f64::INFINITY;
        for (e, &z) in self.p.inequalities.iter().zip(&pt.z) {
            m = m.min(z).min(e.eval(&pt.x));
        }
        for (l, zk) in self.lmis.iter().zip(&pt.zs) {
            for mat in [self.slack(l, &pt.x), zk.clone()] {
                match HermitianOperator::new(mat).and_then(|h| h.min_eigenvalue()) {
                    Ok(v) => m = m.min(v),
                    Err(_) => return f64::NEG_INFINITY,
                }
            }
        }
        m
    }

    /// Average complementarity `(Σ⟨S, Z⟩ + Σ s z) / (Σ dim + #scalars)`.
    fn mu(&self, pt: &KktPoint) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for (e, &z) in self.p.inequalities.iter().zip(&pt.z) {
            total += z * e.eval(&pt.x);
            count += 1;
        }
        for (l, zk) in self.lmis.iter().zip(&pt.zs) {
            total += re_inner(&self.slack(l, &pt.x), zk);
            count += l.dim;
        }
        if count == 0 { 0.0 } else { (total / count as f64).max(0.0) }
    }

    fn values(&self, pt: &KktPoint) -> (f64, f64) {
        let p = self.p;
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let primal: f64 = self.c.iter().zip(&pt.x).map(|(c, x)| c * x).sum();
        let mut dual = 0.0;
        for (&k, &y) in self.kept.iter().zip(&pt.y) {
            dual -= y * p.equalities[k].constant;
        }
        for (e, &z) in p.inequalities.iter().zip(&pt.z) {
            dual -= z * e.constant;
        }
        for (l, zk) in self.lmis.iter().zip(&pt.zs) {
            dual -= re_inner(zk, &l.f0);
        }
        let c0 = p.objective.constant;
        (sign * primal + c0, sign * dual + c0)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Newton-refines `start`. Returns `None` when no feasible improvement was found.
pub(super) fn refine(p: &ConicProgram, kept: &[usize], start: KktPoint) -> Option<Refined> {
    let lay = Layout::new(p, kept);
    let scale = 1.0 + inf_norm(&start.x) + start.zs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = CONE_SLACK * scale;
    let r0 = inf_norm(&lay.residual(&start));
    if !r0.is_finite() {
        return None;
    }
    let mut pt = start;
    let mut best: Option<(f64, KktPoint)> = None;
    for _ in 0..MAX_STEPS {
        let res = inf_norm(&lay.residual(&pt));
        if res <= 1e-14 * scale {
            break;
        }
        // Short path-following steps while complementarity dominates, pure
        // Newton once the iterate is close.
        let mu = lay.mu(&pt);
        let target = if mu <= 1e-9 * scale { 0.0 } else { 0.1 * mu };
        let r = DVector::from_vec(lay.residual_at(&pt, target));
        let jac = lay.jacobian(&pt);
        let delta = match jac.clone().lu().solve(&(-&r)) {
            Some(d) if d.iter().all(|v| v.is_finite()) && inf_norm(d.as_slice()) <= scale => d,
            // Singular or nearly so: the optimal set is not a point. Take the
            // minimum-norm step instead.
            _ => {
                let svd = jac.svd(true, true);
                let cut = 1e-10 * svd.singular_values.max();
                svd.solve(&(-&r), cut).ok()?
            }
        };
        if !delta.iter().all(|v| v.is_finite()) {
            break;
        }
        let margin = lay.cone_margin(&pt);
        let floor = if margin > 0.0 { 0.01 * margin } else { margin - tol };
        let mut alpha = 1.0;
        let mut next = None;
        while alpha >= 1e-4 {
            let cand = lay.step(&pt, &(&delta * alpha));
            let m = lay.cone_margin(&cand);
            if m >= floor || (target == 0.0 && m >= -tol) {
                next = Some(cand);
                break;
            }
            alpha *= 0.8;
        }
        let Some(next) = next else { break };
        pt = next;
        let res = inf_norm(&lay.residual(&pt));
        if lay.cone_margin(&pt) >= -tol && best.as_ref().is_none_or(|(b, _)| res < *b) {
            best = Some((res, pt.clone()));
        }
    }
    let (res, pt) = best?;
    if !(res < r0) {
        return None;
    }
    let (primal_value, dual_value) = lay.values(&pt);
    Some(Refined { point: pt, primal_value, dual_value, residual: res })
}
