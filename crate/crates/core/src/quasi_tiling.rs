//! ε-quasi-tilings of a finite set by right translates of nested shapes:
//! parameters, shape selection, greedy construction and certificates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coloring::{total_variation, ColorSource, FrequencyTable};
use crate::ergodic::{normalized, Field, PatternFunction};
use crate::error::{usage, Error, Result};
use crate::group::{
    lattice_box_boundary_size, refined_cube_dims, FolnerFamily, FolnerSpec, Group, GroupElement,
    GroupKind, SiteSet,
};
use crate::spectral::StepFunction;

/// `N(ε)` and the densities `η_i = ε(1−ε)^{N−i}`, `i = 1..N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TilingParams {
    pub epsilon: f64,
    pub n: usize,
    pub eta: Vec<f64>,
}

impl TilingParams {
    /// `ε²/N`, the tolerated deviation of a shape's covered fraction from `η_i`.
    pub fn density_threshold(&self) -> f64 {
        self.epsilon * self.epsilon / self.n as f64
    }
}

/// `N` is the least integer with `(1−ε)^N ≤ ε`, i.e. `⌈ln ε / ln(1−ε)⌉`.
pub fn tiling_params(epsilon: f64) -> Result<TilingParams> {
    if !(epsilon > 0.0 && epsilon < 0.1) {
        return usage(format!("ε must lie in (0, 0.1), got {epsilon}"));
    }
    let mut n = (epsilon.ln() / (1.0 - epsilon).ln()).ceil().max(1.0) as usize;
    // guard the ceiling against rounding on either side
    while n > 1 && (1.0 - epsilon).powi(n as i32 - 1) <= epsilon {
        n -= 1;
    }
    while (1.0 - epsilon).powi(n as i32) > epsilon {
        n += 1;
    }
    let eta = (1..=n)
        .map(|i| epsilon * (1.0 - epsilon).powi((n - i) as i32))
        .collect();
    Ok(TilingParams { epsilon, n, eta })
}

/// How shapes are picked from a nested Følner sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShapeRule {
    /// `K_1` is the first set; `K_{i+1}` is the first later set with
    /// `|∂^{diam K_i} K_{i+1}| / |K_{i+1}| ≤ ε²/4`.
    Shell,
    /// Among the sets with at most `max_size` sites, `N(ε)` sets spread
    /// evenly by position, always including the first.
    Spread { max_size: usize },
}

/// Chooses `N(ε)` strictly increasing nested shapes from `folner`, each
/// translated to contain the identity.
pub fn select_shapes(
    folner: &FolnerSpec,
    epsilon: f64,
    rule: ShapeRule,
) -> Result<(Group, Vec<SiteSet>)> {
    let params = tiling_params(epsilon)?;
    let group = folner.build_group()?;
    match rule {
        ShapeRule::Shell => {
            let chosen = shell_indices(folner, &group, &params)?;
            let spec = FolnerSpec {
                indices: chosen,
                nested: true,
                ..folner.clone()
            };
            let (group, sets) = spec.sets()?;
            if sets.len() != params.n {
                return Err(Error::Resource(format!(
                    "selected sets are not strictly nested: kept {} of {}",
                    sets.len(),
                    params.n
                )));
            }
            Ok((group, sets))
        }
        ShapeRule::Spread { max_size } => {
            // set sizes grow with the index, so stop at the first one over the cap
            let mut indices = folner.indices.clone();
            indices.sort_unstable();
            indices.dedup();
            let mut kept = Vec::new();
            for index in indices {
                if folner.set(&group, index)?.len() > max_size {
                    break;
                }
                kept.push(index);
            }
            let spec = FolnerSpec {
                nested: true,
                indices: kept,
                ..folner.clone()
            };
            let (group, sets) = spec.sets()?;
            let candidates: Vec<SiteSet> =
                sets.into_iter().filter(|s| s.len() <= max_size).collect();
            if candidates.len() < params.n {
                return Err(Error::Resource(format!(
                    "need {} nested sets of at most {max_size} sites, the sequence offers {}",
                    params.n,
                    candidates.len()
                )));
            }
            let m = candidates.len();
            let n = params.n;
            let picks: Vec<usize> = if n == 1 {
                vec![0]
            } else {
                (0..n).map(|i| i * (m - 1) / (n - 1)).collect()
            };
            let mut candidates: Vec<Option<SiteSet>> = candidates.into_iter().map(Some).collect();
            Ok((
                group,
                picks
                    .into_iter()
                    .map(|i| candidates[i].take().expect("distinct picks"))
                    .collect(),
            ))
        }
    }
}

/// Indices picked by the shell rule. Cube families on `Z^d` use closed-form
/// boundary sizes, so a failing search can name the index it would need.
fn shell_indices(folner: &FolnerSpec, group: &Group, params: &TilingParams) -> Result<Vec<u64>> {
    let limit = params.epsilon * params.epsilon / 4.0;
    let d = match group.kind() {
        GroupKind::Lattice(d) => Some(d as usize),
        GroupKind::Heisenberg => None,
    };
    let dims_of = |index: u64| -> Option<Vec<u64>> {
        match (folner.family, d) {
            (FolnerFamily::Cubes, Some(d)) => Some(vec![index; d]),
            (FolnerFamily::CubesRefined, Some(d)) if index > 0 => Some(refined_cube_dims(d, index)),
            _ => None,
        }
    };
    let passes = |index: u64, radius: u64| -> Result<bool> {
        match dims_of(index) {
            Some(dims) => {
                let volume: u128 = dims.iter().map(|&l| l as u128).product();
                Ok(volume > 0
                    && (lattice_box_boundary_size(&dims, radius) as f64) <= limit * volume as f64)
            }
            None => {
                let set = folner.set(group, index)?;
                Ok(group.folner_ratio(&set, radius as f64)? <= limit)
            }
        }
    };
    let mut indices = folner.indices.clone();
    indices.sort_unstable();
    indices.dedup();
    let mut iter = indices.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Usage("Følner index list is empty".into()))?;
    let mut chosen = vec![first];
    while chosen.len() < params.n {
        let last = *chosen.last().expect("nonempty");
        let radius = folner.diameter(group, last)?.max(1) as u64;
        let mut found = None;
        for index in iter.by_ref() {
            if passes(index, radius)? {
                found = Some(index);
                break;
            }
        }
        match found {
            Some(index) => chosen.push(index),
            None => {
                let needed = match dims_of(last) {
                    Some(_) => needed_cube_index(last, |i| passes(i, radius))?.map_or_else(
                        || "an index beyond 2^62".to_string(),
                        |i| format!("index {i}"),
                    ),
                    None => format!("an index beyond {last}"),
                };
                return Err(Error::Resource(format!(
                    "Følner sequence exhausted after {} of {} shapes; the shell rule at radius {radius} needs {needed}",
                    chosen.len(),
                    params.n
                )));
            }
        }
    }
    Ok(chosen)
}

/// Least index above `last` passing the shell test, by doubling and
/// bisection (boundary ratios of boxes decrease with size).
fn needed_cube_index(last: u64, passes: impl Fn(u64) -> Result<bool>) -> Result<Option<u64>> {
    let mut hi = last.max(1) * 2;
    while !passes(hi)? {
        if hi > 1 << 61 {
            return Ok(None);
        }
        hi *= 2;
    }
    let mut lo = last;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Shapes `K_1 ⊊ … ⊊ K_N` with center sets `T_i` inside a target set `Q`.
#[derive(Clone, Debug)]
pub struct QuasiTiling {
    pub epsilon: f64,
    /// Target density of each shape.
    pub eta: Vec<f64>,
    pub q: SiteSet,
    pub shapes: Vec<SiteSet>,
    pub centers: Vec<Vec<GroupElement>>,
    /// Shapes that fell short of their running target.
    pub shortfalls: Vec<Shortfall>,
}

impl QuasiTiling {
    pub fn tile(&self, group: &Group, shape: usize, t: GroupElement) -> SiteSet {
        group.translate(&self.shapes[shape], t)
    }

    /// Number of tiles per shape.
    pub fn tile_counts(&self) -> Vec<usize> {
        self.centers.iter().map(Vec::len).collect()
    }
}

const FREE: u32 = u32::MAX;

/// Greedy placement with densities `η_i(ε)`; `shapes` must have `N(ε)` members.
pub fn construct_quasi_tiling(
    group: &Group,
    q: &SiteSet,
    shapes: &[SiteSet],
    epsilon: f64,
) -> Result<QuasiTiling> {
    construct_quasi_tiling_with(group, q, shapes, epsilon, &TilingOptions::default())
}

/// What the greedy construction does when a shape cannot reach its running
/// coverage target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetPolicy {
    /// Fail with a partial-tiling error.
    #[default]
    Strict,
    /// Record the shortfall and let the smaller shapes make up the deficit.
    CarryOver,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TilingOptions {
    pub policy: TargetPolicy,
    /// Scan starts at this position of `Q` and wraps around.
    pub offset: usize,
}

/// A shape that stopped below its running target under [`TargetPolicy::CarryOver`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Shortfall {
    pub shape: usize,
    pub target: f64,
    pub achieved: f64,
}

/// Greedy placement with explicit target densities, scanning centers in
/// the canonical order of `Q`.
pub fn construct_with_densities(
    group: &Group,
    q: &SiteSet,
    shapes: &[SiteSet],
    epsilon: f64,
    eta: &[f64],
) -> Result<QuasiTiling> {
    construct_with_options(group, q, shapes, epsilon, eta, &TilingOptions::default())
}

/// Greedy placement with densities `η_i(ε)` and the given options.
pub fn construct_quasi_tiling_with(
    group: &Group,
    q: &SiteSet,
    shapes: &[SiteSet],
    epsilon: f64,
    options: &TilingOptions,
) -> Result<QuasiTiling> {
    let params = tiling_params(epsilon)?;
    if shapes.len() != params.n {
        return usage(format!(
            "expected N(ε) = {} shapes, got {}",
            params.n,
            shapes.len()
        ));
    }
    construct_with_options(group, q, shapes, epsilon, &params.eta, options)
}

fn check_shapes(
    group: &Group,
    q: &SiteSet,
    shapes: &[SiteSet],
    epsilon: f64,
    eta: &[f64],
) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return usage(format!("ε must lie in (0, 1), got {epsilon}"));
    }
    if shapes.is_empty() || shapes.len() != eta.len() {
        return usage("need one target density per shape and at least one shape");
    }
    for (i, k) in shapes.iter().enumerate() {
        if !k.contains(group.identity()) {
            return usage(format!("shape {} does not contain the identity", i + 1));
        }
        if i > 0 && (k.len() <= shapes[i - 1].len() || !shapes[i - 1].is_subset(k)) {
            return usage(format!(
                "shape {} does not strictly contain shape {i}",
                i + 1
            ));
        }
    }
    if let Some(v) = q.min() {
        group.check(v)?;
    }
    if shapes.last().expect("nonempty").len() > q.len() {
        return Err(Error::Resource(format!(
            "largest shape has {} sites but Q only {}",
            shapes.last().expect("nonempty").len(),
            q.len()
        )));
    }
    Ok(())
}

/// Dense position lookup over the bounding box of `Q`, falling back to the
/// hashed index of the site set when the box is sparse.
struct Locator<'a> {
    q: &'a SiteSet,
    low: [i64; 3],
    extent: [i64; 3],
    table: Vec<u32>,
}

impl<'a> Locator<'a> {
    fn new(q: &'a SiteSet) -> Self {
        let mut low = [i64::MAX; 3];
        let mut high = [i64::MIN; 3];
        for v in q {
            for c in 0..3 {
                low[c] = low[c].min(v.coord(c));
                high[c] = high[c].max(v.coord(c));
            }
        }
        let mut extent = [0i64; 3];
        let mut volume = 1u128;
        for c in 0..3 {
            extent[c] = if q.is_empty() {
                0
            } else {
                high[c] - low[c] + 1
            };
            volume = volume.saturating_mul(extent[c].max(0) as u128);
        }
        let mut table = Vec::new();
        if !q.is_empty() && volume <= 16 * q.len() as u128 + 4096 {
            table = vec![FREE; volume as usize];
            for (p, v) in q.iter().enumerate() {
                let cell = Self::cell(low, extent, *v).expect("inside bounding box");
                table[cell] = p as u32;
            }
        }
        Locator {
            q,
            low,
            extent,
            table,
        }
    }

    #[inline]
    fn cell(low: [i64; 3], extent: [i64; 3], v: GroupElement) -> Option<usize> {
        let mut cell = 0usize;
        for c in 0..3 {
            let x = v.coord(c) - low[c];
            if x < 0 || x >= extent[c] {
                return None;
            }
            cell = cell * extent[c] as usize + x as usize;
        }
        Some(cell)
    }

    #[inline]
    fn position(&self, v: GroupElement) -> Option<usize> {
        if self.table.is_empty() {
            return self.q.position(v);
        }
        match Self::cell(self.low, self.extent, v).map(|c| self.table[c]) {
            Some(p) if p != FREE => Some(p as usize),
            _ => None,
        }
    }
}

fn construct_with_options(
    group: &Group,
    q: &SiteSet,
    shapes: &[SiteSet],
    epsilon: f64,
    eta: &[f64],
    options: &TilingOptions,
) -> Result<QuasiTiling> {
    check_shapes(group, q, shapes, epsilon, eta)?;
    let n = shapes.len();
    let size = q.len();
    let slack = epsilon * epsilon / n as f64;
    let locator = Locator::new(q);
    // owner[p] = (shape, tile) for each covered position of Q
    let mut owner: Vec<(u32, u32)> = vec![(FREE, FREE); size];
    let mut centers: Vec<Vec<GroupElement>> = vec![Vec::new(); n];
    let mut shortfalls = Vec::new();
    let mut covered = 0usize;
    let mut fresh: Vec<usize> = Vec::new();
    let mut extra: Vec<usize> = Vec::new();
    for i in (0..n).rev() {
        let shape = &shapes[i];
        let me = i as u32;
        let target = eta[i..].iter().sum::<f64>() - slack;
        let budget = (epsilon * shape.len() as f64).floor() as usize;
        // shape positions already involved in same-shape overlaps
        let mut removed_mask = vec![false; shape.len()];
        let mut removed = 0usize;
        let m = shape.len().min(33);
        let probes: Vec<GroupElement> = (0..m)
            .map(|j| {
                shape.get(if m == 1 {
                    0
                } else {
                    j * (shape.len() - 1) / (m - 1)
                })
            })
            .collect();
        for step in 0..size {
            if covered as f64 >= target * size as f64 {
                break;
            }
            let t = q.get((step + options.offset) % size);
            let usable = |v: GroupElement| match locator.position(group.mul(v, t)) {
                Some(p) => owner[p].0 == FREE || owner[p].0 == me,
                None => false,
            };
            if !probes.iter().all(|&k| usable(k)) {
                continue;
            }
            fresh.clear();
            extra.clear();
            let mut ok = true;
            for (kp, &k) in shape.iter().enumerate() {
                let site = group.mul(k, t);
                let Some(p) = locator.position(site) else {
                    ok = false;
                    break;
                };
                let (s, tile) = owner[p];
                if s == FREE {
                    fresh.push(p);
                } else if s == me {
                    let old = centers[i][tile as usize];
                    let kq = shape
                        .position(group.mul(site, group.inverse(old)))
                        .expect("same-shape overlap lies in the shape");
                    for x in [kp, kq] {
                        if !removed_mask[x] {
                            removed_mask[x] = true;
                            extra.push(x);
                        }
                    }
                    if removed + extra.len() > budget {
                        ok = false;
                        break;
                    }
                } else {
                    ok = false;
                    break;
                }
            }
            if !ok {
                for &x in &extra {
                    removed_mask[x] = false;
                }
                continue;
            }
            removed += extra.len();
            let tile = centers[i].len() as u32;
            for &p in &fresh {
                owner[p] = (me, tile);
            }
            covered += fresh.len();
            centers[i].push(t);
        }
        let achieved = covered as f64 / size as f64;
        if achieved < target {
            match options.policy {
                TargetPolicy::Strict => {
                    let mut densities = vec![0.0; n];
                    for &(s, _) in &owner {
                        if s != FREE {
                            densities[s as usize] += 1.0 / size as f64;
                        }
                    }
                    return Err(Error::PartialTiling {
                        shape: i + 1,
                        target,
                        achieved,
                        densities,
                    });
                }
                TargetPolicy::CarryOver => shortfalls.push(Shortfall {
                    shape: i + 1,
                    target,
                    achieved,
                }),
            }
        }
    }
    Ok(QuasiTiling {
        epsilon,
        eta: eta.to_vec(),
        q: q.clone(),
        shapes: shapes.to_vec(),
        centers,
        shortfalls,
    })
}

/// Measured quantities of the three quasi-tiling conditions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TilingCertificate {
    pub epsilon: f64,
    /// Sites of `Q` lying in translates of two different shapes.
    pub cross_overlap_sites: usize,
    /// Tile sites outside `Q`.
    pub outside_sites: usize,
    pub disjoint_and_inside: bool,
    pub uncovered_fraction: f64,
    pub uncovered_ok: bool,
    /// `|K_i ∖ K̊_i| / |K_i|` per shape, with `K̊_i` the sites of `K_i` never
    /// involved in an overlap of two translates of `K_i`.
    pub core_deficits: Vec<f64>,
    /// Sites covered by two translates of the same core.
    pub core_collisions: usize,
    pub cores_ok: bool,
    pub holds: bool,
}

/// Recomputes every condition from the raw sets.
pub fn verify_quasi_tiling(group: &Group, qt: &QuasiTiling, epsilon: f64) -> TilingCertificate {
    let mut shape_of: HashMap<GroupElement, usize> = HashMap::new();
    let mut cross = 0usize;
    let mut outside = 0usize;
    let mut deficits = Vec::with_capacity(qt.shapes.len());
    let mut collisions = 0usize;
    for (i, shape) in qt.shapes.iter().enumerate() {
        // site → positions in K_i through which it is reached
        let mut hits: HashMap<GroupElement, Vec<usize>> = HashMap::new();
        for &t in &qt.centers[i] {
            for (kp, &k) in shape.iter().enumerate() {
                hits.entry(group.mul(k, t)).or_default().push(kp);
            }
        }
        let mut in_overlap = vec![false; shape.len()];
        for (&v, positions) in &hits {
            if !qt.q.contains(v) {
                outside += 1;
            }
            match shape_of.insert(v, i) {
                Some(j) if j != i => cross += 1,
                _ => {}
            }
            if positions.len() > 1 {
                for &kp in positions {
                    in_overlap[kp] = true;
                }
            }
        }
        let removed = in_overlap.iter().filter(|&&b| b).count();
        deficits.push(if shape.is_empty() {
            0.0
        } else {
            removed as f64 / shape.len() as f64
        });
        let mut core_seen: HashMap<GroupElement, ()> = HashMap::new();
        for &t in &qt.centers[i] {
            for (kp, &k) in shape.iter().enumerate() {
                if !in_overlap[kp] && core_seen.insert(group.mul(k, t), ()).is_some() {
                    collisions += 1;
                }
            }
        }
    }
    let covered_in_q = shape_of.keys().filter(|&&v| qt.q.contains(v)).count();
    let uncovered_fraction = if qt.q.is_empty() {
        0.0
    } else {
        (qt.q.len() - covered_in_q) as f64 / qt.q.len() as f64
    };
    let disjoint_and_inside = cross == 0 && outside == 0;
    let uncovered_ok = uncovered_fraction <= 2.0 * epsilon + 1e-12;
    let cores_ok = collisions == 0 && deficits.iter().all(|&r| r <= epsilon + 1e-12);
    TilingCertificate {
        epsilon,
        cross_overlap_sites: cross,
        outside_sites: outside,
        disjoint_and_inside,
        uncovered_fraction,
        uncovered_ok,
        core_deficits: deficits,
        core_collisions: collisions,
        cores_ok,
        holds: disjoint_and_inside && uncovered_ok && cores_ok,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageDensity {
    pub shape: usize,
    /// `|K_i T_i ∩ Q| / |Q|`.
    pub ratio: f64,
    pub eta: f64,
    pub deviation: f64,
    /// Deviation above `ε²/N`.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub threshold: f64,
    pub shapes: Vec<CoverageDensity>,
    pub total: f64,
}

pub fn coverage_densities(group: &Group, qt: &QuasiTiling) -> CoverageReport {
    let n = qt.shapes.len();
    let threshold = qt.epsilon * qt.epsilon / n as f64;
    let size = qt.q.len().max(1) as f64;
    let shapes: Vec<CoverageDensity> = (0..n)
        .map(|i| {
            let covered: SiteSet = qt.centers[i]
                .iter()
                .flat_map(|&t| qt.shapes[i].iter().map(move |&k| group.mul(k, t)))
                .filter(|&v| qt.q.contains(v))
                .collect();
            let ratio = covered.len() as f64 / size;
            let deviation = (ratio - qt.eta[i]).abs();
            CoverageDensity {
                shape: i + 1,
                ratio,
                eta: qt.eta[i],
                deviation,
                flagged: deviation > threshold,
            }
        })
        .collect();
    let total = shapes.iter().map(|s| s.ratio).sum();
    CoverageReport {
        threshold,
        shapes,
        total,
    }
}

/// The pattern-average approximation over the shapes of a quasi-tiling and
/// the four terms of its error bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiApproximation {
    #[serde(skip)]
    pub value: StepFunction,
    /// `‖F(Q)/|Q| − value‖`.
    pub lhs: f64,
    pub terms: [f64; 4],
    pub rhs: f64,
    /// Shell radius used for `∂^r Q`: the largest shape diameter.
    pub radius: usize,
    pub within: bool,
}

/// `value = Σ_i η_i Σ_P ν_P F̃(P)/|K_i|` using `tables[i] = (empirical, limit)`
/// over the window `K_i`.
pub fn quasi_pattern_approximation(
    field: &dyn Field,
    group: &Group,
    qt: &QuasiTiling,
    omega: &dyn ColorSource,
    tables: &[(FrequencyTable, FrequencyTable)],
) -> Result<QuasiApproximation> {
    if tables.len() != qt.shapes.len() {
        return usage("need one pair of frequency tables per shape");
    }
    let boundary = field.boundary(group);
    let (c_f, d_b) = (field.bound(), boundary.bound());
    let mut averages = Vec::with_capacity(tables.len());
    let mut term1 = 0.0;
    let mut term3 = 0.0;
    let mut radius = 0usize;
    let mut total_size = 0.0;
    for (i, (empirical, limit)) in tables.iter().enumerate() {
        let shape = &qt.shapes[i];
        let mut patterns = PatternFunction::new(field, group, shape.clone())?;
        averages.push(patterns.average(limit)?);
        if empirical.window != *shape {
            return usage(format!(
                "empirical table {} is over a different window",
                i + 1
            ));
        }
        term1 += qt.eta[i] * boundary.eval(group, shape)? / shape.len() as f64;
        term3 += qt.eta[i] * total_variation(empirical, limit).l1;
        radius = radius.max(group.diameter(shape)?);
        total_size += shape.len() as f64;
    }
    let weighted: Vec<(f64, &StepFunction)> = qt.eta.iter().copied().zip(averages.iter()).collect();
    let value = StepFunction::weighted_sum(&weighted);
    let actual = normalized(field, group, &qt.q, omega)?;
    let term2 = (c_f + 4.0 * d_b) * group.folner_ratio(&qt.q, radius.max(1) as f64)? * total_size;
    let terms = [
        4.0 * term1,
        term2,
        c_f * term3,
        (11.0 * c_f + 32.0 * d_b) * qt.epsilon,
    ];
    let rhs = terms.iter().sum();
    let lhs = StepFunction::sup_norm(&actual, &value);
    Ok(QuasiApproximation {
        value,
        lhs,
        terms,
        rhs,
        radius,
        within: lhs <= rhs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetricTileReport {
    pub symmetric: bool,
    pub disjoint: bool,
    pub covers: bool,
    pub holds: bool,
}

/// Checks that `T = T⁻¹` for every center whose tile meets the window,
/// that the translates `Λt` are disjoint and that they cover the window.
pub fn symmetric_tile_check(
    group: &Group,
    lambda: &SiteSet,
    t: &[GroupElement],
    window: &SiteSet,
) -> SymmetricTileReport {
    let centers: SiteSet = t.iter().copied().collect();
    let meets = |c: GroupElement| lambda.iter().any(|&k| window.contains(group.mul(k, c)));
    let symmetric = centers.iter().all(|&c| {
        let inv = group.inverse(c);
        centers.contains(inv) || !meets(inv)
    });
    let mut seen: HashMap<GroupElement, ()> = HashMap::new();
    let mut disjoint = true;
    for &c in centers.iter() {
        for &k in lambda {
            if seen.insert(group.mul(k, c), ()).is_some() {
                disjoint = false;
            }
        }
    }
    let covers = window.iter().all(|v| seen.contains_key(v));
    SymmetricTileReport {
        symmetric,
        disjoint,
        covers,
        holds: symmetric && disjoint && covers,
    }
}

/// Cover frequencies of `m` tilings built from shifted scan orders.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformityReport {
    pub tilings: usize,
    pub failures: usize,
    /// Mean over `Q` of `|freq(v ∈ T_i) − η_i/|K_i||` per shape.
    pub mean_deviation: Vec<f64>,
    pub max_deviation: Vec<f64>,
}

pub fn uniform_quasi_tilings(
    group: &Group,
    q: &SiteSet,
    shapes: &[SiteSet],
    epsilon: f64,
    eta: &[f64],
    m: usize,
    policy: TargetPolicy,
) -> Result<UniformityReport> {
    if m == 0 {
        return usage("need at least one tiling");
    }
    check_shapes(group, q, shapes, epsilon, eta)?;
    let n = shapes.len();
    let mut counts = vec![vec![0u32; q.len()]; n];
    let mut built = 0usize;
    let mut failures = 0usize;
    for s in 0..m {
        let options = TilingOptions {
            policy,
            offset: s * q.len() / m,
        };
        match construct_with_options(group, q, shapes, epsilon, eta, &options) {
            Ok(qt) => {
                built += 1;
                for (i, cs) in qt.centers.iter().enumerate() {
                    for &c in cs {
                        counts[i][q.position(c).expect("center in Q")] += 1;
                    }
                }
            }
            Err(Error::PartialTiling { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    let mut mean_deviation = vec![0.0; n];
    let mut max_deviation = vec![0.0f64; n];
    if built > 0 {
        for i in 0..n {
            let expected = eta[i] / shapes[i].len() as f64;
            for &c in &counts[i] {
                let dev = (c as f64 / built as f64 - expected).abs();
                mean_deviation[i] += dev / q.len() as f64;
                max_deviation[i] = max_deviation[i].max(dev);
            }
        }
    }
    Ok(UniformityReport {
        tilings: m,
        failures,
        mean_deviation,
        max_deviation,
    })
}

/// JSON form of a quasi-tiling: shapes as site lists, centers per shape and
/// the certificate.
#[derive(Clone, Debug, Serialize)]
pub struct QuasiTilingRecord {
    pub epsilon: f64,
    pub eta: Vec<f64>,
    pub q_size: usize,
    pub shapes: Vec<Vec<Vec<i64>>>,
    pub centers: Vec<Vec<Vec<i64>>>,
    pub shortfalls: Vec<Shortfall>,
    pub certificate: TilingCertificate,
    pub coverage: CoverageReport,
}

impl QuasiTilingRecord {
    pub fn new(group: &Group, qt: &QuasiTiling) -> Self {
        let coords = |v: &GroupElement| v.coords().to_vec();
        QuasiTilingRecord {
            epsilon: qt.epsilon,
            eta: qt.eta.clone(),
            q_size: qt.q.len(),
            shapes: qt
                .shapes
                .iter()
                .map(|s| s.iter().map(coords).collect())
                .collect(),
            centers: qt
                .centers
                .iter()
                .map(|c| c.iter().map(coords).collect())
                .collect(),
            shortfalls: qt.shortfalls.clone(),
            certificate: verify_quasi_tiling(group, qt, qt.epsilon),
            coverage: coverage_densities(group, qt),
        }
    }
}
