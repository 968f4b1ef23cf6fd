use std::collections::HashSet;

use proptest::prelude::*;
use thermolim_core::coloring::{
    empirical_frequency, exact_frequency, grid_empirical_measure, lattice_grid, pattern_count,
    restrict,
};
use thermolim_core::group::cube;
use thermolim_core::{ColorSet, Coloring, Group, GroupElement, Pattern, SiteSet};

fn group(which: usize) -> Group {
    if which == 0 {
        Group::lattice(2).unwrap()
    } else {
        Group::heisenberg()
    }
}

fn pattern(g: &Group, cells: &[([i64; 3], bool)]) -> Pattern {
    let rank = g.kind().rank();
    Pattern::from_pairs(
        cells
            .iter()
            .map(|(c, b)| (g.element(&c[..rank]).unwrap(), f64::from(u8::from(*b)))),
    )
    .unwrap()
}

/// Every `h` that maps some site of `dom P` onto some site of `dom P'` is a
/// candidate; each is checked site by site.
fn brute_count(g: &Group, p: &Pattern, q: &Pattern) -> usize {
    let mut seen = HashSet::new();
    let mut count = 0;
    for (v, _) in p.iter() {
        for (w, _) in q.iter() {
            let h = g.multiply(g.inverse(v), w).unwrap();
            if !seen.insert(h) {
                continue;
            }
            let fits = p
                .iter()
                .all(|(u, c)| q.get(g.multiply(u, h).unwrap()) == Some(c));
            if fits {
                count += 1;
            }
        }
    }
    count
}

fn cells(max: usize, span: i64) -> impl Strategy<Value = Vec<([i64; 3], bool)>> {
    prop::collection::vec((prop::array::uniform3(0..span), any::<bool>()), 1..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn counting_matches_brute_force(which in 0usize..2, small in cells(6, 3), big in cells(100, 5)) {
        let g = group(which);
        let p = pattern(&g, &small);
        let q = pattern(&g, &big);
        prop_assert!(q.domain().len() <= 100);
        prop_assert_eq!(pattern_count(&g, &p, &q), brute_count(&g, &p, &q));
    }

    #[test]
    fn counting_is_translation_covariant(
        which in 0usize..2,
        small in cells(5, 2),
        big in cells(100, 5),
        shift in prop::array::uniform3(-50i64..50),
    ) {
        let g = group(which);
        let p = pattern(&g, &small);
        let q = pattern(&g, &big);
        let t = g.element(&shift[..g.kind().rank()]).unwrap();
        prop_assert_eq!(pattern_count(&g, &p.shift(&g, t), &q), pattern_count(&g, &p, &q));
        prop_assert_eq!(p.shift(&g, t).shift(&g, g.inverse(t)), p);
    }

    #[test]
    fn a_pattern_occurs_in_itself(which in 0usize..2, big in cells(40, 4)) {
        let g = group(which);
        let q = pattern(&g, &big);
        prop_assert!(pattern_count(&g, &q, &q) >= 1);
    }

    #[test]
    fn grid_measures_are_probability_vectors(
        seed in any::<u64>(),
        (l, j) in (1u64..5).prop_flat_map(|l| (Just(l), l..(8 * l))),
        p in 0.05f64..0.95,
    ) {
        let g = Group::lattice(2).unwrap();
        let omega = Coloring::iid(ColorSet::bernoulli(p).unwrap(), seed);
        let q = cube(&g, j).unwrap();
        let window = cube(&g, l).unwrap();
        let grid = lattice_grid(&g, j, l).unwrap();
        let m = grid_empirical_measure(&g, &omega, &q, &window, &grid).unwrap();
        prop_assert_eq!(m.counts.values().sum::<u64>(), m.total);
        let table = m.as_table();
        prop_assert!(table.frequencies.values().all(|&f| f >= 0.0));
        prop_assert!((table.total() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn restriction_is_replayable() {
    let g = Group::lattice(2).unwrap();
    let omega = Coloring::iid(ColorSet::bernoulli(0.3).unwrap(), 77);
    let q = cube(&g, 12).unwrap();
    assert_eq!(restrict(&omega, &q), restrict(&omega, &q));
    let other = Coloring::iid(ColorSet::bernoulli(0.3).unwrap(), 78);
    assert_ne!(restrict(&omega, &q), restrict(&other, &q));
}

#[test]
fn iid_pattern_frequencies_converge() {
    let g = Group::lattice(2).unwrap();
    let colors = ColorSet::bernoulli(0.5).unwrap();
    let window: SiteSet = cube(&g, 2).unwrap();
    let values = [1.0, 0.0, 0.0, 1.0];
    let target = Pattern::new(window.clone(), values.to_vec()).unwrap();
    let exact = exact_frequency(&target, &colors).unwrap();
    assert_eq!(exact, 1.0 / 16.0);
    for l in [64u64, 128, 256] {
        let q = cube(&g, l).unwrap();
        let tolerance = 3.0 * ((l as f64).ln() / (l * l) as f64).sqrt();
        let within = (0..200u64)
            .filter(|&s| {
                let omega = Coloring::iid(colors.clone(), 1000 + s);
                (empirical_frequency(&g, &target, &omega, &q).unwrap() - exact).abs() <= tolerance
            })
            .count();
        assert!(within >= 190, "L={l}: {within}/200 within {tolerance}");
    }
}

#[test]
fn shifting_moves_the_domain() {
    let g = Group::lattice(2).unwrap();
    let p = Pattern::from_pairs([(g.identity(), 1.0)]).unwrap();
    let t: GroupElement = g.element(&[1, 0]).unwrap();
    let moved = p.shift(&g, t);
    assert_eq!(moved.domain().iter().copied().collect::<Vec<_>>(), vec![t]);
}
