mod common;

use mai_core::chain::{betti, boundary, class_equal, is_boundary, is_cycle, Chain, Simplex, SimplicialComplex};
use mai_core::persistence::{
    bottleneck, build_vr, pers_tau, reduce, reduce_up_to, Bar, PersistenceDiagram, Reduction,
};
use proptest::prelude::*;

fn dims_sorted(d: &PersistenceDiagram, dim: usize) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = d.of_dim(dim).map(|b| (b.birth, b.death)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn bars(points: &[(f64, f64)]) -> PersistenceDiagram {
    PersistenceDiagram {
        bars: points
            .iter()
            .map(|&(b, l)| Bar { dim: 1, birth: b, death: b + l, representative: Chain::zero(1) })
            .collect(),
    }
}

fn diagram_strategy() -> impl Strategy<Value = PersistenceDiagram> {
    prop::collection::vec((0.0..5.0f64, 0.0..3.0f64), 0..6).prop_map(|v| bars(&v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn boundary_of_boundary_vanishes(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let k = common::random_complex(&mut rng);
        for dim in 0..=2 {
            let c = common::random_chain(&k, dim, &mut rng);
            prop_assert!(boundary(&boundary(&c)).is_empty());
        }
    }

    #[test]
    fn boundaries_are_cycles(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let k = common::random_complex(&mut rng);
        for dim in 0..=1 {
            let c = common::random_chain(&k, dim, &mut rng);
            if is_boundary(&c, &k) {
                prop_assert!(is_cycle(&c));
            }
        }
    }

    #[test]
    fn betti_matches_enumeration(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let k = common::random_complex(&mut rng);
        for dim in 0..=k.max_dim() {
            prop_assert_eq!(betti(&k, dim), common::brute_force_betti(&k, dim));
        }
    }

    #[test]
    fn class_equality_is_an_equivalence(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let k = common::random_complex(&mut rng);
        // Rejection-sample 1-cycles.
        let cycles: Vec<Chain> = (0..64)
            .map(|_| common::random_chain(&k, 1, &mut rng))
            .filter(is_cycle)
            .take(3)
            .collect();
        for a in &cycles {
            prop_assert!(class_equal(a, a, &k).unwrap());
            for b in &cycles {
                prop_assert_eq!(class_equal(a, b, &k).unwrap(), class_equal(b, a, &k).unwrap());
                for c in &cycles {
                    if class_equal(a, b, &k).unwrap() && class_equal(b, c, &k).unwrap() {
                        prop_assert!(class_equal(a, c, &k).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn bar_counts_match_betti_at_every_scale(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let f = common::random_filtration(&mut rng);
        let d = reduce(&f);
        for scale in f.scales() {
            let k = SimplicialComplex::new(f.complex_at(scale).cloned()).unwrap();
            for dim in 0..=k.max_dim() {
                prop_assert_eq!(d.alive_count(dim, scale), betti(&k, dim));
            }
        }
    }

    #[test]
    fn representatives_are_born_and_die_on_time(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let f = common::random_filtration(&mut rng);
        let r = Reduction::new(&f);
        for b in r.diagram().bars.iter().filter(|b| b.dim >= 1) {
            prop_assert!(is_cycle(&b.representative));
            prop_assert!(r.chain_birth(&b.representative).unwrap() <= b.birth);
            let death = r.boundary_death(&b.representative).unwrap();
            if b.is_infinite() {
                prop_assert_eq!(death, None);
            } else {
                prop_assert_eq!(death, Some(b.death));
            }
        }
    }

    #[test]
    fn truncated_reduction_agrees(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let f = common::random_filtration(&mut rng);
        let full = reduce(&f);
        let low = reduce_up_to(&f, 1);
        for dim in 0..=1 {
            prop_assert_eq!(dims_sorted(&full, dim), dims_sorted(&low, dim));
        }
        prop_assert_eq!(low.of_dim(2).count(), 0);
    }

    #[test]
    fn tau_filter_is_monotone(d in diagram_strategy(), t1 in 0.0..3.0f64, t2 in 0.0..3.0f64) {
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let strict = pers_tau(&d, hi);
        let loose = pers_tau(&d, lo);
        prop_assert!(strict.iter().all(|b| loose.contains(b)));
    }

    #[test]
    fn bottleneck_is_a_pseudometric(a in diagram_strategy(), b in diagram_strategy(), c in diagram_strategy()) {
        let ab = bottleneck(&a, &b, 1).unwrap();
        let ba = bottleneck(&b, &a, 1).unwrap();
        let bc = bottleneck(&b, &c, 1).unwrap();
        let ac = bottleneck(&a, &c, 1).unwrap();
        prop_assert_eq!(bottleneck(&a, &a, 1).unwrap(), 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-12);
    }
}

/// On a triangulated torus the class of a closed walk depends only on its multiset of moves.
#[test]
fn walk_class_ignores_move_order() {
    let (w, h) = (3u32, 3u32);
    let id = |x: u32, y: u32| (y % h) * w + (x % w);
    let mut gens = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let (a, b, c, d) = (id(x, y), id(x + 1, y), id(x, y + 1), id(x + 1, y + 1));
            gens.push(Simplex::from_unsorted(vec![a, b, d]).unwrap());
            gens.push(Simplex::from_unsorted(vec![a, c, d]).unwrap());
        }
    }
    let torus = SimplicialComplex::closure(gens);
    assert_eq!(betti(&torus, 1), 2);

    let walk = |moves: &[(i32, i32)]| {
        let (mut x, mut y) = (0i32, 0i32);
        let mut c = Chain::zero(1);
        for &(dx, dy) in moves {
            let a = id(x.rem_euclid(3) as u32, y.rem_euclid(3) as u32);
            x += dx;
            y += dy;
            let b = id(x.rem_euclid(3) as u32, y.rem_euclid(3) as u32);
            c.toggle(Simplex::edge(a, b)).unwrap();
        }
        c
    };
    let base: Vec<(i32, i32)> = [(1, 0); 3].into_iter().chain([(0, 1); 3]).chain([(1, 0), (-1, 0)]).collect();
    let reference = walk(&base);
    assert!(is_cycle(&reference));
    let mut rng = common::rng(7);
    for _ in 0..50 {
        let mut moves = base.clone();
        use rand::seq::SliceRandom;
        moves.shuffle(&mut rng);
        let c = walk(&moves);
        assert!(is_cycle(&c));
        assert!(class_equal(&reference, &c, &torus).unwrap());
    }
}

/// Distance-valued Rips edges move by at most 2δ under δ-perturbation, which bounds the
/// bottleneck distance by 2δ.
#[test]
fn rips_diagram_moves_by_at_most_twice_the_perturbation() {
    let pts = common::circle_points(24);
    let base = reduce_up_to(&build_vr(&pts, 2, 2.0).unwrap(), 1);
    let mut rng = common::rng(11);
    for delta in [0.01, 0.05, 0.1] {
        for _ in 0..10 {
            let moved = common::jitter_disc(&pts, delta, &mut rng);
            let d = reduce_up_to(&build_vr(&moved, 2, 2.0).unwrap(), 1);
            for dim in 0..=1 {
                assert!(bottleneck(&base, &d, dim).unwrap() <= 2.0 * delta + 1e-9);
            }
        }
    }
}
