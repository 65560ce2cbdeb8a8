#![allow(dead_code)]

use num_complex::Complex64;
use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_kam::field::lambda;
use torus_kam::{Cochain, FourierField, Presentation, RotationAction, RotationVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Real field on the box of half-width `hw` with coefficients of size
/// `amp·e^{-decay·λ_k}`.
pub fn random_field(rng: &mut impl Rng, dim: usize, hw: usize, amp: f64, decay: f64) -> FourierField {
    let mb = torus_kam::field::ModeBox::new(dim, hw);
    let mut c = Vec::with_capacity(mb.len() * dim);
    for i in 0..mb.len() {
        let s = amp * (-decay * lambda(&mb.mode(i))).exp();
        for _ in 0..dim {
            c.push(Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * s);
        }
    }
    FourierField::from_dense(dim, hw, c).unwrap().symmetrized()
}

pub fn random_cochain(rng: &mut impl Rng, len: usize, dim: usize, hw: usize, amp: f64, decay: f64) -> Cochain {
    Cochain::new((0..len).map(|_| random_field(rng, dim, hw, amp, decay)).collect()).unwrap()
}

fn inverse_letter(l: usize, nu: usize) -> usize {
    if l <= nu {
        l + nu
    } else {
        l - nu
    }
}

/// Random relators whose exponent sum in every generator vanishes, so any
/// choice of rotation vectors is an action.
pub fn balanced_presentation(rng: &mut impl Rng, nu: usize, relators: usize) -> Presentation {
    let words: Vec<Vec<usize>> = (0..relators)
        .map(|_| {
            let len = rng.gen_range(1..=3);
            let mut w: Vec<usize> = (0..len).map(|_| rng.gen_range(1..=2 * nu)).collect();
            let mut back: Vec<usize> = w.iter().map(|&l| inverse_letter(l, nu)).collect();
            back.shuffle(rng);
            w.extend(back);
            w
        })
        .collect();
    Presentation::new(nu, &words).unwrap()
}

pub fn random_alpha(rng: &mut impl Rng, dim: usize) -> RotationVector {
    RotationVector::from_f64((0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
}

/// Rotation with small denominators, so that some modes resonate.
pub fn random_rational_alpha(rng: &mut impl Rng, dim: usize) -> RotationVector {
    RotationVector::from_rational(
        (0..dim)
            .map(|_| {
                let q = rng.gen_range(1..=4);
                Rational64::new(rng.gen_range(0..q), q)
            })
            .collect(),
    )
}

/// A presentation with zero exponent sums and an action on `T^dim`, rational
/// with probability one half.
pub fn random_setting(rng: &mut impl Rng, dim: usize) -> (Presentation, RotationAction) {
    let nu = rng.gen_range(1..=3);
    let rel = rng.gen_range(0..=2);
    let p = balanced_presentation(rng, nu, rel);
    let rational = rng.gen_bool(0.5);
    let gens = (0..nu)
        .map(|_| {
            if rational {
                random_rational_alpha(rng, dim)
            } else {
                random_alpha(rng, dim)
            }
        })
        .collect();
    let a = RotationAction::from_generators(&p, gens).unwrap();
    (p, a)
}

/// Modes of the box of half-width `hw`.
pub fn box_modes(dim: usize, hw: usize) -> Vec<Vec<i64>> {
    let mb = torus_kam::field::ModeBox::new(dim, hw);
    (0..mb.len()).map(|i| mb.mode(i)).collect()
}

pub fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    torus_kam::moser::torus_norm(&diff)
}

/// Property-test config without the on-disk regression file, which proptest
/// cannot locate from an integration test.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: n,
        failure_persistence: None,
        ..Default::default()
    }
}

/// The commuting pair used for the `T²` scenarios.
pub fn torus_pair() -> (Presentation, RotationAction) {
    let p = Presentation::free_abelian(2).unwrap();
    let a = RotationAction::from_f64(
        &p,
        vec![
            vec![golden(), 2f64.sqrt() - 1.0],
            vec![3f64.sqrt() - 1.0, (7f64.sqrt() - 2.0) / 2.0],
        ],
    )
    .unwrap();
    (p, a)
}

/// A conjugacy field on `T²` of size `s`.
pub fn torus_y(s: f64) -> FourierField {
    FourierField::from_trig_terms(
        2,
        &[
            (vec![1, 0], 0, 0.0, s),
            (vec![1, 1], 0, 0.5 * s, 0.0),
            (vec![0, 1], 1, 0.0, 0.7 * s),
            (vec![1, -1], 1, 0.3 * s, 0.2 * s),
        ],
    )
    .unwrap()
}

pub fn circle() -> (Presentation, RotationAction) {
    let p = Presentation::new(1, &[]).unwrap();
    let a = RotationAction::from_f64(&p, vec![vec![golden()]]).unwrap();
    (p, a)
}

pub fn sin_field(s: f64) -> FourierField {
    FourierField::from_trig_terms(1, &[(vec![1], 0, 0.0, s)]).unwrap()
}
