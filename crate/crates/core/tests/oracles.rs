//! SDP routes checked against the classical brute-force oracles.

use adlab_core::linalg::{State, StateBox};
use adlab_core::sdp::{box_transform_error, smooth_dmin};
use adlab_core::testkit::{InstanceStream, Seed, classical_box_error_exact, classical_dmin_eps_exact};

fn diagonal(s: &mut InstanceStream, dim: usize) -> Vec<f64> {
    s.diagonal_state(dim).diagonal()
}

#[test]
fn hypothesis_testing_matches_type_class_count() {
    let mut worst = 0.0f64;
    for i in 0..20 {
        let mut s = InstanceStream::new(Seed(31).derive(i));
        let p = diagonal(&mut s, 2);
        let q = diagonal(&mut s, 2);
        let eps = s.uniform_range(0.02, 0.5);
        for n in 1..=3 {
            let rho = State::from_diagonal(&p).unwrap().tensor_power(n);
            let sigma = State::from_diagonal(&q).unwrap().tensor_power(n);
            let sdp = smooth_dmin(&rho, &sigma, eps).unwrap().value.to_f64();
            let exact = classical_dmin_eps_exact(&p, &q, eps, n).unwrap();
            worst = worst.max((sdp - exact).abs());
        }
    }
    assert!(worst <= 1e-7, "largest deviation {worst:e}");
}

#[test]
fn commuting_box_errors_match_linear_program() {
    let mut worst = 0.0f64;
    for i in 0..50 {
        let mut s = InstanceStream::new(Seed(32).derive(i));
        let (a, b) = (2 + i as usize % 2, 2 + (i as usize / 2) % 2);
        let src = StateBox::new(s.diagonal_state(a), s.diagonal_state(a)).unwrap();
        let tgt = StateBox::new(s.diagonal_state(b), s.diagonal_state(b)).unwrap();
        let sdp = box_transform_error(&src, &tgt).unwrap().error;
        let lp = classical_box_error_exact(&src, &tgt).unwrap();
        worst = worst.max((sdp - lp).abs());
    }
    assert!(worst <= 1e-6, "largest deviation {worst:e}");
}

#[test]
fn bit_expansion_error_is_analytic() {
    for (m, n) in [(1.0, 2.0), (1.0, 3.0), (0.5, 2.0), (2.0, 3.0)] {
        let e = box_transform_error(&StateBox::bits(m).unwrap(), &StateBox::bits(n).unwrap()).unwrap().error;
        let expected = 1.0 - f64::exp2(m - n);
        assert!((e - expected).abs() <= 1e-6, "{m} -> {n}: {e}");
    }
}
