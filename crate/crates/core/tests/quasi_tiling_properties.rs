use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use thermolim_core::group::{lattice_box, FolnerFamily, FolnerSpec};
use thermolim_core::quasi_tiling::{
    construct_quasi_tiling_with, select_shapes, tiling_params, verify_quasi_tiling, QuasiTiling,
    ShapeRule, TargetPolicy, TilingOptions,
};
use thermolim_core::{Error, Group, GroupElement};

/// The three tiling conditions recomputed with plain hash sets.
fn conditions_hold(g: &Group, qt: &QuasiTiling, eps: f64) -> Result<(), String> {
    let q: HashSet<GroupElement> = qt.q.iter().copied().collect();
    let mut owner: HashMap<GroupElement, usize> = HashMap::new();
    for (i, shape) in qt.shapes.iter().enumerate() {
        let mut multiplicity: HashMap<GroupElement, usize> = HashMap::new();
        for &t in &qt.centers[i] {
            for &k in shape {
                let v = g.multiply(k, t).unwrap();
                if !q.contains(&v) {
                    return Err(format!("shape {i} leaves Q at {v}"));
                }
                if let Some(&j) = owner.get(&v) {
                    if j != i {
                        return Err(format!("shapes {i} and {j} overlap at {v}"));
                    }
                }
                owner.insert(v, i);
                *multiplicity.entry(v).or_default() += 1;
            }
        }
        // K̊: positions k with k·t never shared with another translate
        let core: Vec<GroupElement> = shape
            .iter()
            .copied()
            .filter(|&k| {
                qt.centers[i]
                    .iter()
                    .all(|&t| multiplicity[&g.multiply(k, t).unwrap()] == 1)
            })
            .collect();
        let removed = (shape.len() - core.len()) as f64 / shape.len() as f64;
        if removed > eps + 1e-12 {
            return Err(format!("shape {i} loses {removed} of its sites"));
        }
    }
    let uncovered = q.len() - owner.len();
    if uncovered as f64 > 2.0 * eps * q.len() as f64 + 1e-9 {
        return Err(format!("{uncovered} of {} sites uncovered", q.len()));
    }
    Ok(())
}

fn shapes_for(d: usize, eps: f64, cap: usize) -> Option<(Group, Vec<thermolim_core::SiteSet>)> {
    let spec = FolnerSpec {
        family: FolnerFamily::CubesRefined,
        ..FolnerSpec::cubes(d, (1..=600).collect())
    };
    select_shapes(&spec, eps, ShapeRule::Spread { max_size: cap }).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parameters_satisfy_their_identities(eps in 0.001f64..0.0999) {
        let p = tiling_params(eps).unwrap();
        let n = p.n as i32;
        prop_assert!((1.0 - eps).powi(n) <= eps);
        prop_assert!((1.0 - eps).powi(n - 1) > eps);
        let sum: f64 = p.eta.iter().sum();
        prop_assert!((sum - (1.0 - (1.0 - eps).powi(n))).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, max_shrink_iters: 32, ..ProptestConfig::default() })]

    #[test]
    fn emitted_tilings_pass_independent_checks(
        eps in 0.05f64..0.0999,
        dims in (140u64..200, 140u64..200),
        carry in any::<bool>(),
        offset in 0usize..5000,
    ) {
        let q_size = (dims.0 * dims.1) as usize;
        let (g, shapes) = shapes_for(2, eps, (eps * q_size as f64) as usize).unwrap();
        let q = lattice_box(&g, &[dims.0, dims.1]).unwrap();
        let policy = if carry { TargetPolicy::CarryOver } else { TargetPolicy::Strict };
        match construct_quasi_tiling_with(&g, &q, &shapes, eps, &TilingOptions { policy, offset: offset % q_size }) {
            Ok(qt) => {
                prop_assert!(verify_quasi_tiling(&g, &qt, eps).holds);
                prop_assert_eq!(conditions_hold(&g, &qt, eps), Ok(()));
            }
            Err(e) => prop_assert!(!carry && matches!(e, Error::PartialTiling { .. }), "{}", e),
        }
    }
}

#[test]
fn construction_ignores_the_thread_count() {
    let eps = 0.09;
    let (g, shapes) = shapes_for(2, eps, 900).unwrap();
    let q = lattice_box(&g, &[100, 100]).unwrap();
    let build = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                construct_quasi_tiling_with(&g, &q, &shapes, eps, &TilingOptions::default())
                    .unwrap()
            })
    };
    let one = build(1);
    let four = build(4);
    assert_eq!(one.centers, four.centers);
    assert_eq!(one.centers, build(1).centers);
    assert_eq!(conditions_hold(&g, &one, eps), Ok(()));
}
