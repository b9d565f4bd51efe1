//! Exact classical oracles: Neyman–Pearson tests over type classes and the
//! optimal stochastic map between diagonal boxes.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result, domain_err};
use crate::linalg::StateBox;

/// Largest number of type classes enumerated by [`classical_dmin_eps_exact`].
pub const MAX_TYPE_CLASSES: usize = 2_000_000;

fn check_prob(name: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
        return domain_err(format!("{name} must be a strictly positive probability vector"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return domain_err(format!("{name} sums to {s}"));
    }
    Ok(())
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

struct TypeClass {
    /// `ln Σ_{x^n ∈ T} p^n(x^n)`.
    log_p: f64,
    log_q: f64,
}

fn compositions(k: usize, n: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>) {
    if cur.len() == k - 1 {
        let used: usize = cur.iter().sum();
        cur.push(n - used);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    let used: usize = cur.iter().sum();
    for c in 0..=(n - used) {
        cur.push(c);
        compositions(k, n, out, cur);
        cur.pop();
    }
}

fn type_count(k: usize, n: usize) -> f64 {
    // C(n + k − 1, k − 1)
    (ln_gamma((n + k) as f64) - ln_gamma(k as f64) - ln_gamma((n + 1) as f64)).exp()
}

/// `D_min^ε(p^{⊗n} ‖ q^{⊗n})` in bits, by the optimal randomized
/// likelihood-ratio test.
///
/// Sequences are aggregated by type; types are admitted in decreasing
/// likelihood ratio until the `p`-mass reaches `1 − ε`, with the boundary type
/// admitted fractionally. All masses are kept as logarithms.
pub fn classical_dmin_eps_exact(p: &[f64], q: &[f64], eps: f64, n: usize) -> Result<f64> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    if p.len() != q.len() {
        return domain_err("p and q have different lengths");
    }
    if !(0.0..1.0).contains(&eps) {
        return domain_err(format!("eps must lie in [0, 1), got {eps}"));
    }
    if n == 0 {
        return domain_err("need n >= 1");
    }
    let k = p.len();
    if type_count(k, n) > MAX_TYPE_CLASSES as f64 {
        return domain_err(format!("{k} outcomes at n = {n} give too many type classes"));
    }
    let (lp, lq): (Vec<f64>, Vec<f64>) = p.iter().zip(q).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let ln_n_fact = ln_gamma((n + 1) as f64);
    let mut types = Vec::new();
    compositions(k, n, &mut types, &mut Vec::with_capacity(k));
    let mut classes: Vec<TypeClass> = types
        .iter()
        .map(|c| {
            let mult = ln_n_fact - c.iter().map(|&ci| ln_gamma((ci + 1) as f64)).sum::<f64>();
            let dot = |l: &[f64]| c.iter().zip(l).map(|(&ci, li)| ci as f64 * li).sum::<f64>();
            TypeClass { log_p: mult + dot(&lp), log_q: mult + dot(&lq) }
        })
        .collect();
    classes.sort_by(|a, b| (b.log_p - b.log_q).total_cmp(&(a.log_p - a.log_q)));
    // Reject from the low-ratio end, where the masses being summed are small
    // and the running total is accurate.
    let mut rejected = 0.0;
    let mut boundary = classes.len() - 1;
    while boundary > 0 {
        let pm = classes[boundary].log_p.exp();
        if rejected + pm > eps {
            break;
        }
        rejected += pm;
        boundary -= 1;
    }
    let b = &classes[boundary];
    let frac = (1.0 - (eps - rejected) / b.log_p.exp()).clamp(0.0, 1.0);
    let mut log_beta = classes[..boundary].iter().fold(f64::NEG_INFINITY, |acc, c| log_sum_exp(acc, c.log_q));
    if frac > 0.0 {
        log_beta = log_sum_exp(log_beta, frac.ln() + b.log_q);
    }
    Ok(-log_beta / std::f64::consts::LN_2)
}

/// Minimal `½‖Tp − t‖₁` over column-stochastic `T` with `Tq = w`.
pub fn classical_box_error_probs(p: &[f64], q: &[f64], t: &[f64], w: &[f64]) -> Result<f64> {
    let (din, dout) = (p.len(), t.len());
    if q.len() != din || w.len() != dout || din == 0 || dout == 0 {
        return domain_err("probability vectors have inconsistent lengths");
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = (0..dout).map(|_| (0..din).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect()).collect();
    let slack: Vec<_> = (0..dout).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for i in 0..din {
        let col: Vec<_> = (0..dout).map(|j| (vars[j][i], 1.0)).collect();
        lp.add_constraint(&col[..], ComparisonOp::Eq, 1.0);
    }
    // The last row of T q = w follows from the column sums.
    for j in 0..dout.saturating_sub(1) {
        let row: Vec<_> = (0..din).map(|i| (vars[j][i], q[i])).collect();
        lp.add_constraint(&row[..], ComparisonOp::Eq, w[j]);
    }
    for j in 0..dout {
        let mut row: Vec<_> = (0..din).map(|i| (vars[j][i], p[i])).collect();
        row.push((slack[j], 1.0));
        lp.add_constraint(&row[..], ComparisonOp::Ge, t[j]);
    }
    let sol = lp.solve().map_err(|e| Error::Numerical(format!("classical box LP: {e}")))?;
    Ok(sol.objective().clamp(0.0, 1.0))
}

/// [`classical_box_error_probs`] on the diagonals of four diagonal states.
pub fn classical_box_error_exact(source: &StateBox, target: &StateBox) -> Result<f64> {
    for s in [&source.first, &source.second, &target.first, &target.second] {
        if !s.is_diagonal(1e-12) {
            return domain_err("classical box error needs diagonal states");
        }
    }
    classical_box_error_probs(
        &source.first.diagonal(),
        &source.second.diagonal(),
        &target.first.diagonal(),
        &target.second.diagonal(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::StateBox;

    /// Neyman–Pearson by listing every sequence.
    fn enumerate(p: &[f64], q: &[f64], eps: f64, n: usize) -> f64 {
        let k = p.len();
        let total = k.pow(n as u32);
        let mut seqs: Vec<(f64, f64)> = (0..total)
            .map(|mut x| {
                let (mut a, mut b) = (1.0, 1.0);
                for _ in 0..n {
                    a *= p[x % k];
                    b *= q[x % k];
                    x /= k;
                }
                (a, b)
            })
            .collect();
        seqs.sort_by(|x, y| (y.0 / y.1).total_cmp(&(x.0 / x.1)));
        let (mut mass, mut beta) = (0.0, 0.0);
        for (a, b) in seqs {
            if mass + a >= 1.0 - eps {
                beta += b * (1.0 - eps - mass) / a;
                break;
            }
            mass += a;
            beta += b;
        }
        -beta.log2()
    }

    #[test]
    fn equal_distributions() {
        for eps in [0.0, 0.1, 0.5] {
            let v = classical_dmin_eps_exact(&[0.3, 0.7], &[0.3, 0.7], eps, 1).unwrap();
            assert!((v + (1.0 - eps).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_enumeration() {
        let (p, q) = ([0.9, 0.1], [0.5, 0.5]);
        for n in [1, 2, 5, 12] {
            for eps in [0.0, 0.05, 0.3] {
                let a = classical_dmin_eps_exact(&p, &q, eps, n).unwrap();
                let b = enumerate(&p, &q, eps, n);
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "n={n} eps={eps}: {a} vs {b}");
            }
        }
        let (p3, q3) = ([0.5, 0.3, 0.2], [0.2, 0.3, 0.5]);
        for n in [1, 3, 6] {
            let a = classical_dmin_eps_exact(&p3, &q3, 0.1, n).unwrap();
            let b = enumerate(&p3, &q3, 0.1, n);
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
        let a = classical_dmin_eps_exact(&[0.99, 0.01], &[0.5, 0.5], 0.0, 1).unwrap();
        assert!((a - enumerate(&[0.99, 0.01], &[0.5, 0.5], 0.0, 1)).abs() < 1e-12);
    }

    #[test]
    fn large_n_stays_finite() {
        let v = classical_dmin_eps_exact(&[0.9, 0.1], &[0.5, 0.5], 0.05, 5000).unwrap();
        assert!(v.is_finite() && v > 2000.0 && v < 5000.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(classical_dmin_eps_exact(&[1.0, 0.0], &[0.5, 0.5], 0.1, 3).is_err());
        assert!(classical_dmin_eps_exact(&[0.5, 0.5], &[0.5, 0.5], 1.0, 3).is_err());
        assert!(classical_dmin_eps_exact(&[0.2; 5], &[0.2; 5], 0.1, 5000).is_err());
    }

    #[test]
    fn bits_impossibility() {
        for (m, n) in [(1.0, 2.0), (1.0, 3.0), (2.0, 3.0), (0.5, 1.5)] {
            let e = classical_box_error_exact(&StateBox::bits(m).unwrap(), &StateBox::bits(n).unwrap()).unwrap();
            assert!((e - (1.0 - (m - n).exp2())).abs() < 1e-9, "{m}->{n}: {e}");
        }
        let b = StateBox::bits(1.0).unwrap();
        assert!(classical_box_error_exact(&b, &b).unwrap() < 1e-12);
    }
}
