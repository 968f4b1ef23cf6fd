//! Finite-volume Hamiltonians and percolation subgraphs.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coloring::{ColorSet, ColorSource, Coloring};
use crate::error::{usage, Error, Result};
use crate::group::{Group, GroupElement, SiteSet};
use crate::mix::mix;

/// A real symmetric matrix indexed by the sites of a finite set, stored as
/// its diagonal plus the strict upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    sites: SiteSet,
    diagonal: Vec<f64>,
    upper: Vec<(usize, usize, f64)>,
}

impl SymmetricMatrix {
    /// Builds a matrix from its diagonal and off-diagonal entries. Entries
    /// `(i, j)` and `(j, i)` name the same position; repeated positions add.
    pub fn new(sites: SiteSet, diagonal: Vec<f64>, off: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = sites.len();
        if diagonal.len() != n {
            return usage(format!(
                "diagonal of length {} for {n} sites",
                diagonal.len()
            ));
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in off {
            if i == j || i >= n || j >= n {
                return usage(format!("invalid off-diagonal position ({i}, {j})"));
            }
            *merged.entry((i.min(j), i.max(j))).or_default() += v;
        }
        let upper: Vec<_> = merged.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        let m = SymmetricMatrix {
            sites,
            diagonal,
            upper,
        };
        if m.diagonal
            .iter()
            .chain(m.upper.iter().map(|e| &e.2))
            .any(|v| !v.is_finite())
        {
            return usage("matrix entries must be finite");
        }
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut off = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return usage("dense matrix must be square");
            }
            for j in i + 1..n {
                if row[j] != rows[j][i] {
                    return usage(format!("dense matrix is not symmetric at ({i}, {j})"));
                }
                if row[j] != 0.0 {
                    off.push((i, j, row[j]));
                }
            }
        }
        let g = Group::lattice(1).expect("Z");
        let sites = SiteSet::new(
            (0..n as i64)
                .map(|i| g.element(&[i]).expect("1d"))
                .collect(),
        );
        SymmetricMatrix::new(
            sites,
            rows.iter().enumerate().map(|(i, r)| r[i]).collect(),
            off,
        )
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Strict upper triangle `(i, j, value)` with `i < j`, row-major order.
    pub fn upper(&self) -> &[(usize, usize, f64)] {
        &self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        let key = (i.min(j), i.max(j));
        self.upper
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|k| self.upper[k].2)
            .unwrap_or(0.0)
    }

    /// Largest `|i − j|` over nonzero entries.
    pub fn bandwidth(&self) -> usize {
        self.upper.iter().map(|&(i, j, _)| j - i).max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = self.diagonal[i];
        }
        for &(i, j, v) in &self.upper {
            a[i][j] = v;
            a[j][i] = v;
        }
        a
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diagonal.iter().zip(x).map(|(d, x)| d * x).collect();
        for &(i, j, v) in &self.upper {
            y[i] += v * x[j];
            y[j] += v * x[i];
        }
        y
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut radius = vec![0.0; self.dim()];
        for &(i, j, v) in &self.upper {
            radius[i] += v.abs();
            radius[j] += v.abs();
        }
        let lo = self
            .diagonal
            .iter()
            .zip(&radius)
            .map(|(d, r)| d - r)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .diagonal
            .iter()
            .zip(&radius)
            .map(|(d, r)| d + r)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Upper bound for the operator norm.
    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Coordinate listing of the upper triangle and diagonal: one
    /// `row col value` line per entry, 0-based, 17 significant digits.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        let mut entries: Vec<(usize, usize, f64)> = self
            .diagonal
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, v))
            .collect();
        entries.extend_from_slice(&self.upper);
        entries.sort_by_key(|e| (e.0, e.1));
        for (i, j, v) in entries {
            let _ = writeln!(out, "{i} {j} {v:.16e}");
        }
        out
    }
}

/// `H_ω^Λ`: the clipping of `−Δ + ω` to `Λ`, diagonal `|S| + ω_v` and `−1`
/// between neighbors inside `Λ`.
pub fn build_anderson_matrix(
    group: &Group,
    omega: &(impl ColorSource + ?Sized),
    lambda: &SiteSet,
) -> Result<SymmetricMatrix> {
    if lambda.is_empty() {
        return usage("Anderson matrix over an empty set");
    }
    let degree = group.degree() as f64;
    let diagonal = lambda.iter().map(|&v| degree + omega.color(v)).collect();
    let mut off = Vec::new();
    for (i, &v) in lambda.iter().enumerate() {
        for w in group.neighbors(v) {
            if let Some(j) = lambda.position(w) {
                if i < j {
                    off.push((i, j, -1.0));
                }
            }
        }
    }
    SymmetricMatrix::new(lambda.clone(), diagonal, off)
}

/// Vertices and edges of a percolation subgraph restricted to a finite set.
/// Edges are stored as `(a, b)` with `a < b`, sorted.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PercolationGraph {
    pub vertices: SiteSet,
    pub edges: Vec<(GroupElement, GroupElement)>,
}

impl PercolationGraph {
    pub fn new(
        vertices: SiteSet,
        edges: impl IntoIterator<Item = (GroupElement, GroupElement)>,
    ) -> Result<Self> {
        let mut list: Vec<_> = edges
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        list.sort();
        list.dedup();
        for &(a, b) in &list {
            if a == b || !vertices.contains(a) || !vertices.contains(b) {
                return usage(format!(
                    "edge ({a}, {b}) is not between two distinct vertices"
                ));
            }
        }
        Ok(PercolationGraph {
            vertices,
            edges: list,
        })
    }

    pub fn degrees(&self) -> HashMap<GroupElement, usize> {
        let mut deg: HashMap<GroupElement, usize> = self.vertices.iter().map(|&v| (v, 0)).collect();
        for (a, b) in &self.edges {
            *deg.get_mut(a).expect("vertex") += 1;
            *deg.get_mut(b).expect("vertex") += 1;
        }
        deg
    }
}

/// Open sites of `Λ` and the edges between neighboring open sites. Colors
/// must be 0 (closed) or 1 (open); with `closed_marker = Some(α)` every
/// color other than `α` counts as open instead.
pub fn site_percolation_graph(
    group: &Group,
    omega: &(impl ColorSource + ?Sized),
    lambda: &SiteSet,
    closed_marker: Option<f64>,
) -> Result<PercolationGraph> {
    let mut open = Vec::new();
    for &v in lambda.iter() {
        let c = omega.color(v);
        let is_open = match closed_marker {
            Some(alpha) => c != alpha,
            None if c == 1.0 => true,
            None if c == 0.0 => false,
            None => return usage(format!("site percolation needs colors 0/1, got {c} at {v}")),
        };
        if is_open {
            open.push(v);
        }
    }
    let vertices = SiteSet::new(open);
    let mut edges = Vec::new();
    for &v in vertices.iter() {
        for w in group.neighbors(v) {
            if v < w && vertices.contains(w) {
                edges.push((v, w));
            }
        }
    }
    Ok(PercolationGraph {
        vertices,
        edges: sorted(edges),
    })
}

fn sorted(mut edges: Vec<(GroupElement, GroupElement)>) -> Vec<(GroupElement, GroupElement)> {
    edges.sort();
    edges
}

fn edge_bits(c: f64, k: usize, v: GroupElement) -> Result<u64> {
    if c.fract() != 0.0 || c < 0.0 || c >= (1u64 << k) as f64 {
        return usage(format!(
            "edge percolation needs {k}-bit integer colors, got {c} at {v}"
        ));
    }
    Ok(c as u64)
}

/// Edges `{v, s_j·v}` inside `Λ` whose bit `j` of `ω_v` is set, `s_j`
/// running over [`Group::forward_generators`]; vertices are the endpoints.
pub fn edge_percolation_graph(
    group: &Group,
    omega: &(impl ColorSource + ?Sized),
    lambda: &SiteSet,
) -> Result<PercolationGraph> {
    let forward = group.forward_generators();
    let mut edges = Vec::new();
    for &v in lambda.iter() {
        let bits = edge_bits(omega.color(v), forward.len(), v)?;
        for (j, &s) in forward.iter().enumerate() {
            if bits >> j & 1 == 1 {
                let w = group.mul(s, v);
                if lambda.contains(w) {
                    edges.push((v.min(w), v.max(w)));
                }
            }
        }
    }
    let vertices: SiteSet = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    Ok(PercolationGraph {
        vertices,
        edges: sorted(edges),
    })
}

/// Laplacian of the subgraph on its vertices, optionally plus a potential,
/// and `α` on the diagonal of the remaining sites of `Λ`.
pub fn build_percolation_matrix(
    graph: &PercolationGraph,
    lambda: &SiteSet,
    alpha: f64,
    potential: Option<&dyn ColorSource>,
) -> Result<SymmetricMatrix> {
    if !graph.vertices.is_subset(lambda) {
        return usage("percolation graph leaves the volume");
    }
    let degrees = graph.degrees();
    let diagonal = lambda
        .iter()
        .map(|&v| match degrees.get(&v) {
            Some(&deg) => deg as f64 + potential.map_or(0.0, |p| p.color(v)),
            None => alpha,
        })
        .collect();
    let off = graph
        .edges
        .iter()
        .map(|&(a, b)| {
            (
                lambda.position(a).expect("vertex"),
                lambda.position(b).expect("vertex"),
                -1.0,
            )
        })
        .collect();
    SymmetricMatrix::new(lambda.clone(), diagonal, off)
}

/// Connected components, each sorted, listed by their smallest vertex.
pub fn cluster_decomposition(graph: &PercolationGraph) -> Vec<SiteSet> {
    let n = graph.vertices.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in &graph.edges {
        let ra = find(&mut parent, graph.vertices.position(a).expect("vertex"));
        let rb = find(&mut parent, graph.vertices.position(b).expect("vertex"));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<GroupElement>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(graph.vertices.get(i));
    }
    groups.into_values().map(SiteSet::new).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Anderson,
    SitePercolation,
    EdgePercolation,
    AndersonPercolation,
    /// Anderson operator whose potential is the visible-points coloring.
    VisiblePoints,
}

/// Which Hamiltonian to assemble and how its colors are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Single-site potential law `A₀` (Anderson and Anderson-on-percolation).
    #[serde(default)]
    pub potential: Option<ColorSet>,
    /// Probability that a site (or edge) is open.
    #[serde(default)]
    pub p: Option<f64>,
    /// Energy of closed sites; defaults to `|S| + sup A₀ + 1`.
    #[serde(default)]
    pub alpha: Option<f64>,
}

impl ModelSpec {
    pub fn anderson(potential: ColorSet) -> Self {
        ModelSpec {
            kind: ModelKind::Anderson,
            potential: Some(potential),
            p: None,
            alpha: None,
        }
    }

    pub fn site_percolation(p: f64) -> Self {
        ModelSpec {
            kind: ModelKind::SitePercolation,
            potential: None,
            p: Some(p),
            alpha: None,
        }
    }

    pub fn edge_percolation(p: f64) -> Self {
        ModelSpec {
            kind: ModelKind::EdgePercolation,
            potential: None,
            p: Some(p),
            alpha: None,
        }
    }

    pub fn anderson_percolation(potential: ColorSet, p: f64) -> Self {
        ModelSpec {
            kind: ModelKind::AndersonPercolation,
            potential: Some(potential),
            p: Some(p),
            alpha: None,
        }
    }

    fn is_percolation(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::SitePercolation
                | ModelKind::EdgePercolation
                | ModelKind::AndersonPercolation
        )
    }

    fn potential_sup(&self) -> f64 {
        match (&self.kind, &self.potential) {
            (ModelKind::AndersonPercolation, Some(c)) => c.sup(),
            _ => 0.0,
        }
    }

    pub fn alpha(&self, group: &Group) -> f64 {
        self.alpha
            .unwrap_or(group.degree() as f64 + self.potential_sup() + 1.0)
    }

    pub fn validate(&self, group: &Group) -> Result<()> {
        let needs_potential = matches!(
            self.kind,
            ModelKind::Anderson | ModelKind::AndersonPercolation
        );
        match &self.potential {
            Some(c) if needs_potential => c.validate()?,
            None if needs_potential => return usage("model needs a potential color set"),
            Some(_) => return usage("this model takes no potential"),
            None => {}
        }
        if self.is_percolation() {
            match self.p {
                Some(p) if (0.0..=1.0).contains(&p) => {}
                Some(p) => return usage(format!("percolation probability {p} outside [0, 1]")),
                None => return usage("percolation model needs p"),
            }
            let alpha = self.alpha(group);
            let floor = group.degree() as f64 + self.potential_sup();
            if !(alpha > floor) || !alpha.is_finite() {
                return usage(format!("closed-site energy {alpha} must exceed {floor}"));
            }
            if self.kind == ModelKind::AndersonPercolation {
                if let Some(ColorSet::Finite { values, .. }) = &self.potential {
                    if values.contains(&alpha) {
                        return usage("closed-site energy collides with a potential value");
                    }
                }
            }
        } else if self.p.is_some() || self.alpha.is_some() {
            return usage("p and alpha only apply to percolation models");
        }
        if self.kind == ModelKind::VisiblePoints
            && !matches!(group.kind(), crate::GroupKind::Lattice(_))
        {
            return Err(Error::Unsupported("visible points live on Z^d".into()));
        }
        Ok(())
    }

    /// The random (or deterministic) coloring behind one realisation.
    pub fn coloring(&self, group: &Group, seed: u64) -> Result<Coloring> {
        self.validate(group)?;
        let p = self.p.unwrap_or(0.0);
        Ok(match self.kind {
            ModelKind::Anderson => Coloring::iid(self.potential.clone().expect("validated"), seed),
            ModelKind::SitePercolation => Coloring::iid(ColorSet::bernoulli(p)?, seed),
            ModelKind::EdgePercolation => Coloring::iid(
                ColorSet::edge_bits(group.forward_generators().len(), p)?,
                seed,
            ),
            ModelKind::AndersonPercolation => Coloring::Diluted {
                potential: self.potential.clone().expect("validated"),
                open: p,
                marker: self.alpha(group),
                seed,
            },
            ModelKind::VisiblePoints => Coloring::Visible,
        })
    }

    /// Percolation subgraph of a realisation; `None` for models without one.
    pub fn graph(
        &self,
        group: &Group,
        omega: &(impl ColorSource + ?Sized),
        lambda: &SiteSet,
    ) -> Result<Option<PercolationGraph>> {
        Ok(match self.kind {
            ModelKind::SitePercolation => Some(site_percolation_graph(group, omega, lambda, None)?),
            ModelKind::AndersonPercolation => Some(site_percolation_graph(
                group,
                omega,
                lambda,
                Some(self.alpha(group)),
            )?),
            ModelKind::EdgePercolation => Some(edge_percolation_graph(group, omega, lambda)?),
            ModelKind::Anderson | ModelKind::VisiblePoints => None,
        })
    }

    pub fn matrix(
        &self,
        group: &Group,
        omega: &(impl ColorSource + ?Sized),
        lambda: &SiteSet,
    ) -> Result<SymmetricMatrix> {
        match self.graph(group, omega, lambda)? {
            None => build_anderson_matrix(group, omega, lambda),
            Some(graph) => {
                let alpha = self.alpha(group);
                if self.kind == ModelKind::AndersonPercolation {
                    let omega: &dyn ColorSource = &Dyn(omega);
                    build_percolation_matrix(&graph, lambda, alpha, Some(omega))
                } else {
                    build_percolation_matrix(&graph, lambda, alpha, None)
                }
            }
        }
    }
}

struct Dyn<'a, C: ?Sized>(&'a C);

impl<C: ColorSource + ?Sized> ColorSource for Dyn<'_, C> {
    fn color(&self, v: GroupElement) -> f64 {
        self.0.color(v)
    }
}

/// Monte Carlo estimate with a 95% normal-approximation interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub trials: usize,
}

impl Estimate {
    pub fn from_hits(hits: usize, trials: usize) -> Self {
        let p = hits as f64 / trials as f64;
        let half = 1.96 * (p * (1.0 - p) / trials as f64).sqrt();
        Estimate {
            estimate: p,
            lower: p - half,
            upper: p + half,
            trials,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Size of the percolation cluster of the identity, or `None` once it
/// exceeds `cap`. Explores the infinite subgraph lazily.
pub fn origin_cluster_size(
    group: &Group,
    model: &ModelSpec,
    omega: &(impl ColorSource + ?Sized),
    cap: usize,
) -> Result<Option<usize>> {
    let forward = group.forward_generators();
    let origin = group.identity();
    let alpha = model.alpha(group);
    let site_open = |v: GroupElement| -> Result<bool> {
        let c = omega.color(v);
        match model.kind {
            ModelKind::AndersonPercolation => Ok(c != alpha),
            _ if c == 1.0 => Ok(true),
            _ if c == 0.0 => Ok(false),
            _ => usage(format!("site percolation needs colors 0/1, got {c}")),
        }
    };
    // Open edges at v: forward ones from v's own bits, backward ones from
    // the bits of the neighbor they start at.
    let open_neighbors = |v: GroupElement| -> Result<Vec<GroupElement>> {
        let mut out = Vec::new();
        match model.kind {
            ModelKind::EdgePercolation => {
                let bits = edge_bits(omega.color(v), forward.len(), v)?;
                for (j, &s) in forward.iter().enumerate() {
                    if bits >> j & 1 == 1 {
                        out.push(group.mul(s, v));
                    }
                    let u = group.mul(group.inverse(s), v);
                    if edge_bits(omega.color(u), forward.len(), u)? >> j & 1 == 1 {
                        out.push(u);
                    }
                }
            }
            ModelKind::SitePercolation | ModelKind::AndersonPercolation => {
                for w in group.neighbors(v) {
                    if site_open(w)? {
                        out.push(w);
                    }
                }
            }
            _ => {
                return Err(Error::Unsupported(
                    "cluster sizes need a percolation model".into(),
                ))
            }
        }
        Ok(out)
    };
    let first = open_neighbors(origin)?;
    let origin_in_graph = match model.kind {
        ModelKind::EdgePercolation => !first.is_empty(),
        _ => site_open(origin)?,
    };
    if !origin_in_graph {
        return Ok(Some(0));
    }
    let mut seen = HashSet::from([origin]);
    let mut queue = VecDeque::from([origin]);
    while let Some(v) = queue.pop_front() {
        let next = if v == origin {
            first.clone()
        } else {
            open_neighbors(v)?
        };
        for w in next {
            if seen.insert(w) {
                if seen.len() > cap {
                    return Ok(None);
                }
                queue.push_back(w);
            }
        }
    }
    Ok(Some(seen.len()))
}

/// Monte Carlo estimate of `P(cluster of the identity has exactly s sites)`.
pub fn cluster_size_at_origin_probability(
    group: &Group,
    model: &ModelSpec,
    s: usize,
    trials: usize,
    seed: u64,
) -> Result<Estimate> {
    if trials < 100 {
        return usage("cluster probabilities need at least 100 trials");
    }
    model.validate(group)?;
    let mut hits = 0;
    for t in 0..trials {
        let omega = model.coloring(group, mix(seed, t as u64))?;
        if origin_cluster_size(group, model, &omega, s)? == Some(s) {
            hits += 1;
        }
    }
    Ok(Estimate::from_hits(hits, trials))
}

/// Probability that the identity lies in a cluster of exactly two sites on
/// `Z^d`: `2d p²(1−p)^{4d−2}` for sites, `2d p(1−p)^{4d−2}` for edges.
pub fn two_cluster_probability(kind: ModelKind, d: usize, p: f64) -> Result<f64> {
    let d = d as i32;
    let rest = (1.0 - p).powi(4 * d - 2);
    match kind {
        ModelKind::SitePercolation => Ok(2.0 * d as f64 * p * p * rest),
        ModelKind::EdgePercolation => Ok(2.0 * d as f64 * p * rest),
        _ => Err(Error::Unsupported(
            "two-site cluster formula covers site and edge percolation".into(),
        )),
    }
}
