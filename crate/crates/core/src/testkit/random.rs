use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{CMat, Channel, HermitianOperator, MatrixFunction, State, StateBox, matrix_fn};

/// 64-bit seed. Equal seeds give equal instance streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    /// Independent child seed for instance `index` (splitmix64 finalizer).
    pub fn derive(self, index: u64) -> Seed {
        let mut z = self.0 ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Seed(z ^ (z >> 31))
    }
}

/// Deterministic generator of random operators, states and channels.
pub struct InstanceStream {
    rng: ChaCha20Rng,
}

impl InstanceStream {
    pub fn new(seed: Seed) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed.0) }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Matrix with iid standard complex Gaussian entries.
    pub fn ginibre(&mut self, rows: usize, cols: usize) -> CMat {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMat::from_fn(rows, cols, |_, _| Complex64::new(s * self.normal(), s * self.normal()))
    }

    /// GUE-like Hermitian matrix.
    pub fn hermitian(&mut self, d: usize) -> HermitianOperator {
        let g = self.ginibre(d, d);
        HermitianOperator::new(&g + g.adjoint()).expect("square")
    }

    /// `GG†/Tr[GG†]` with `G` a `dim × rank` Ginibre matrix.
    pub fn state(&mut self, dim: usize, rank: usize) -> State {
        assert!(rank >= 1 && rank <= dim, "rank must lie in 1..=dim");
        let g = self.ginibre(dim, rank);
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        State::project(&HermitianOperator::new(m / Complex64::new(tr, 0.0)).expect("square")).expect("valid state")
    }

    /// `(1 − w) ρ + w I/d` with `ρ` a full-rank [`state`](Self::state); bounds
    /// the smallest eigenvalue below by `w/d`.
    pub fn mixed_state(&mut self, dim: usize, w: f64) -> State {
        assert!((0.0..=1.0).contains(&w), "mixing weight must lie in [0, 1]");
        let rho = self.state(dim, dim);
        let mixed = &rho.operator().scale(1.0 - w) + &HermitianOperator::identity(dim).scale(w / dim as f64);
        State::project(&mixed).expect("valid state")
    }

    pub fn pure_state(&mut self, dim: usize) -> State {
        self.state(dim, 1)
    }

    /// Diagonal state drawn from a flat Dirichlet distribution.
    pub fn diagonal_state(&mut self, dim: usize) -> State {
        let w: Vec<f64> = (0..dim).map(|_| -self.uniform().max(1e-300).ln()).collect();
        let s: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / s).collect();
        State::from_diagonal(&p).expect("probability vector")
    }

    /// Isometry `d_in → d_out` from the polar part of a Ginibre matrix.
    pub fn isometry(&mut self, dim_out: usize, dim_in: usize) -> CMat {
        assert!(dim_out >= dim_in, "isometry needs dim_out >= dim_in");
        let g = self.ginibre(dim_out, dim_in);
        polar(&g)
    }

    pub fn unitary(&mut self, d: usize) -> CMat {
        self.isometry(d, d)
    }

    /// Kraus channel `K_k = G_k S^{-1/2}`, `S = Σ G_k†G_k`, with `env` Gaussian `G_k`.
    pub fn channel(&mut self, dim_in: usize, dim_out: usize, env: usize) -> Channel {
        assert!(env >= 1 && dim_out * env >= dim_in, "need dim_out * env >= dim_in");
        let gs: Vec<CMat> = (0..env).map(|_| self.ginibre(dim_out, dim_in)).collect();
        let s = gs.iter().fold(CMat::zeros(dim_in, dim_in), |acc, g| acc + g.adjoint() * g);
        let s_inv_half = matrix_fn(&HermitianOperator::new(s).expect("square"), MatrixFunction::Pow(-0.5), false)
            .expect("Gram matrix of a generic Ginibre family is invertible");
        let kraus: Vec<CMat> = gs.iter().map(|g| g * s_inv_half.matrix()).collect();
        Channel::from_kraus(&kraus).expect("valid channel")
    }

    /// Box of two random states; `full_rank` forces rank = dim for both.
    pub fn state_box(&mut self, dim: usize, full_rank: bool) -> StateBox {
        let r1 = if full_rank { dim } else { 1 + self.index(dim) };
        let r2 = if full_rank { dim } else { 1 + self.index(dim) };
        StateBox::new(self.state(dim, r1), self.state(dim, r2)).expect("same dim")
    }

    /// Full-rank box whose states are mixed with `I/d` at weight `w`.
    pub fn mixed_box(&mut self, dim: usize, w: f64) -> StateBox {
        StateBox::new(self.mixed_state(dim, w), self.mixed_state(dim, w)).expect("same dim")
    }

    pub fn complex_vector(&mut self, d: usize) -> DVector<Complex64> {
        self.ginibre(d, 1).column(0).into_owned()
    }
}

fn polar(g: &CMat) -> CMat {
    let gram = HermitianOperator::new(g.adjoint() * g).expect("square");
    let inv = matrix_fn(&gram, MatrixFunction::Pow(-0.5), false).expect("full column rank");
    g * inv.matrix()
}

pub fn random_state(dim: usize, rank: usize, seed: Seed) -> State {
    InstanceStream::new(seed).state(dim, rank)
}

pub fn random_channel(dim_in: usize, dim_out: usize, env_dim: usize, seed: Seed) -> Channel {
    InstanceStream::new(seed).channel(dim_in, dim_out, env_dim)
}
