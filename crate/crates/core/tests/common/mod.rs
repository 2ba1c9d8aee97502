#![allow(dead_code)]

use mai_core::chain::{Chain, Simplex, SimplicialComplex};
use mai_core::persistence::Filtration;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random face-closed complex on at most 6 vertices with at most 30 simplices.
pub fn random_complex(rng: &mut impl Rng) -> SimplicialComplex {
    let n = rng.random_range(3..=6u32);
    let mut gens = Vec::new();
    for _ in 0..rng.random_range(0..=4) {
        let mut v: Vec<u32> = (0..n).collect();
        v.sort_by_key(|_| rng.random::<u32>());
        gens.push(Simplex::from_unsorted(v[..3].to_vec()).unwrap());
    }
    for _ in 0..rng.random_range(1..=6) {
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        gens.push(Simplex::edge(a, b));
    }
    for v in 0..n {
        gens.push(Simplex::vertex(v));
    }
    let k = SimplicialComplex::closure(gens);
    assert!(k.len() <= 30);
    k
}

/// Random subset of the `dim`-simplices of `k`.
pub fn random_chain(k: &SimplicialComplex, dim: usize, rng: &mut impl Rng) -> Chain {
    let picks = k.of_dim(dim).into_iter().filter(|_| rng.random_bool(0.5)).cloned();
    Chain::from_simplices(dim, picks).unwrap()
}

/// Random filtration of a random complex; births drawn from a small grid to force ties.
pub fn random_filtration(rng: &mut impl Rng) -> Filtration {
    let k = random_complex(rng);
    let mut births: std::collections::BTreeMap<Simplex, f64> = Default::default();
    for s in k.simplices().iter().filter(|s| s.dim() == 0) {
        births.insert(s.clone(), *[0.0, 0.0, 0.5].choose(rng).unwrap());
    }
    for dim in 1..=2 {
        for s in k.of_dim(dim) {
            let floor = s.faces().map(|f| births[&f]).fold(0.0, f64::max);
            let b = floor + *[0.0, 0.5, 1.0, 1.5].choose(rng).unwrap();
            births.insert(s.clone(), b);
        }
    }
    Filtration::new(births.into_iter().collect()).unwrap()
}

/// Betti number by enumerating every chain: |Z_k| / |B_k| = 2^β.
pub fn brute_force_betti(k: &SimplicialComplex, dim: usize) -> usize {
    let ks: Vec<&Simplex> = k.of_dim(dim);
    let hi: Vec<&Simplex> = k.of_dim(dim + 1);
    let lo: Vec<&Simplex> = if dim == 0 { vec![] } else { k.of_dim(dim - 1) };
    let mask_of = |faces: &[&Simplex], s: &Simplex| -> u64 {
        s.faces()
            .map(|f| 1u64 << faces.iter().position(|x| **x == f).unwrap())
            .fold(0, |a, b| a ^ b)
    };
    let d_k: Vec<u64> = ks.iter().map(|s| if dim == 0 { 0 } else { mask_of(&lo, s) }).collect();
    let d_hi: Vec<u64> = hi.iter().map(|s| mask_of(&ks, s)).collect();
    let mut cycles = 0usize;
    for c in 0u64..(1 << ks.len()) {
        let b = (0..ks.len()).filter(|i| c >> i & 1 == 1).fold(0, |a, i| a ^ d_k[i]);
        cycles += (b == 0) as usize;
    }
    let mut images = std::collections::BTreeSet::new();
    for c in 0u64..(1 << hi.len()) {
        images.insert((0..hi.len()).filter(|i| c >> i & 1 == 1).fold(0, |a, i| a ^ d_hi[i]));
    }
    (cycles / images.len()).trailing_zeros() as usize
}

pub fn circle_points(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect()
}

/// Moves each point by a uniform vector in the closed disc of radius `delta`.
pub fn jitter_disc(points: &[Vec<f64>], delta: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            let r = delta * rng.random::<f64>().sqrt();
            vec![p[0] + r * a.cos(), p[1] + r * a.sin()]
        })
        .collect()
}
