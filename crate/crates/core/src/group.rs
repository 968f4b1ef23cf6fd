//! Finitely generated groups as Cayley graphs.
//!
//! Two groups are built in: the lattice `Z^d` (d <= 3) with the standard
//! generators `±e_j`, and the discrete Heisenberg group in canonical
//! coordinates `(x, y, z)` with
//! `(x, y, z)·(x', y', z') = (x + x', y + y', z + z' + x·y')`
//! and generators `x^{±1}, y^{±1}`.
//!
//! Vertices `v, w` of the Cayley graph are adjacent iff `v·s = w` for a
//! generator `s`. The group acts on itself by `v ↦ v·g⁻¹`, so translates of
//! finite sets are right translates.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

pub const MAX_LATTICE_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupKind {
    Lattice(u8),
    Heisenberg,
}

impl GroupKind {
    /// Number of canonical coordinates.
    pub fn rank(self) -> usize {
        match self {
            GroupKind::Lattice(d) => d as usize,
            GroupKind::Heisenberg => 3,
        }
    }
}

/// An element in canonical coordinates. Unused trailing coordinates are zero,
/// so equality is coordinate equality.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    kind: GroupKind,
    coords: [i64; 3],
}

impl GroupElement {
    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.kind.rank()]
    }

    pub fn coord(&self, i: usize) -> i64 {
        self.coords[i]
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    kind: GroupKind,
    generators: Vec<GroupElement>,
}

impl Group {
    pub fn lattice(d: usize) -> Result<Self> {
        if d == 0 || d > MAX_LATTICE_DIM {
            return usage(format!(
                "lattice dimension must be in 1..={MAX_LATTICE_DIM}, got {d}"
            ));
        }
        let kind = GroupKind::Lattice(d as u8);
        let mut generators = Vec::with_capacity(2 * d);
        for j in 0..d {
            for sign in [1, -1] {
                let mut coords = [0; 3];
                coords[j] = sign;
                generators.push(GroupElement { kind, coords });
            }
        }
        Self::with_generators(kind, generators)
    }

    pub fn heisenberg() -> Self {
        let kind = GroupKind::Heisenberg;
        let g = |x, y| GroupElement {
            kind,
            coords: [x, y, 0],
        };
        let generators = vec![g(1, 0), g(-1, 0), g(0, 1), g(0, -1)];
        Self::with_generators(kind, generators).expect("standard generators are symmetric")
    }

    /// Builds a group with an explicit generating set, checking `S = S⁻¹`
    /// and `id ∉ S`.
    pub fn with_generators(kind: GroupKind, generators: Vec<GroupElement>) -> Result<Self> {
        let group = Group {
            kind,
            generators: Vec::new(),
        };
        let mut set = HashSet::new();
        for &s in &generators {
            group.check(s)?;
            if s == group.identity() {
                return usage("identity must not be a generator");
            }
            set.insert(s);
        }
        for &s in &generators {
            if !set.contains(&group.inverse(s)) {
                return usage(format!(
                    "generating set is not symmetric: {s} has no inverse in S"
                ));
            }
        }
        let mut generators: Vec<_> = set.into_iter().collect();
        generators.sort();
        Ok(Group { kind, generators })
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    /// Vertex degree of the Cayley graph, `|S|`.
    pub fn degree(&self) -> usize {
        self.generators.len()
    }

    /// One generator from each pair `{s, s⁻¹}`, in the order `e_1, …, e_d`
    /// on `Z^d` and `a, b` on the Heisenberg group.
    pub fn forward_generators(&self) -> Vec<GroupElement> {
        let mut out: Vec<_> = self
            .generators
            .iter()
            .copied()
            .filter(|&s| s > self.inverse(s))
            .collect();
        out.reverse();
        out
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement {
            kind: self.kind,
            coords: [0; 3],
        }
    }

    pub fn element(&self, coords: &[i64]) -> Result<GroupElement> {
        if coords.len() != self.kind.rank() {
            return usage(format!(
                "expected {} coordinates, got {}",
                self.kind.rank(),
                coords.len()
            ));
        }
        let mut c = [0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Ok(GroupElement {
            kind: self.kind,
            coords: c,
        })
    }

    /// Same as [`Group::element`] for callers that already know the arity.
    pub(crate) fn element_unchecked(&self, coords: [i64; 3]) -> GroupElement {
        GroupElement {
            kind: self.kind,
            coords,
        }
    }

    pub fn check(&self, g: GroupElement) -> Result<()> {
        if g.kind != self.kind {
            return usage(format!(
                "element {g} belongs to {:?}, not {:?}",
                g.kind, self.kind
            ));
        }
        Ok(())
    }

    pub fn multiply(&self, g: GroupElement, h: GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.mul(g, h))
    }

    #[inline]
    pub(crate) fn mul(&self, g: GroupElement, h: GroupElement) -> GroupElement {
        let (a, b) = (g.coords, h.coords);
        let coords = match self.kind {
            GroupKind::Lattice(_) => [a[0] + b[0], a[1] + b[1], a[2] + b[2]],
            GroupKind::Heisenberg => [a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]],
        };
        GroupElement {
            kind: self.kind,
            coords,
        }
    }

    #[inline]
    pub fn inverse(&self, g: GroupElement) -> GroupElement {
        let a = g.coords;
        let coords = match self.kind {
            GroupKind::Lattice(_) => [-a[0], -a[1], -a[2]],
            GroupKind::Heisenberg => [-a[0], -a[1], -a[2] + a[0] * a[1]],
        };
        GroupElement {
            kind: self.kind,
            coords,
        }
    }

    /// The action `τ̃_g v = v·g⁻¹`.
    #[inline]
    pub fn act(&self, g: GroupElement, v: GroupElement) -> GroupElement {
        self.mul(v, self.inverse(g))
    }

    /// Cayley-graph neighbours `s·v`, in generator order. Edges join `v`
    /// and `s·v`, so every right translation `v ↦ v·g` is a graph
    /// automorphism and the action `τ̃` preserves the word metric.
    pub fn neighbors(&self, v: GroupElement) -> impl Iterator<Item = GroupElement> + '_ {
        self.generators.iter().map(move |&s| self.mul(s, v))
    }

    /// Right translate `Λ·g`.
    pub fn translate(&self, set: &SiteSet, g: GroupElement) -> SiteSet {
        SiteSet::from_iter(set.iter().map(|&v| self.mul(v, g)))
    }

    /// Word length `|g|`, or `None` if it exceeds `cutoff`.
    pub fn word_length(&self, g: GroupElement, cutoff: usize) -> Option<usize> {
        match self.kind {
            GroupKind::Lattice(_) => {
                let n = g
                    .coords
                    .iter()
                    .map(|c| c.unsigned_abs() as usize)
                    .sum::<usize>();
                (n <= cutoff).then_some(n)
            }
            GroupKind::Heisenberg => self.bfs_word_length(g, cutoff),
        }
    }

    /// Breadth-first search from the identity. Used for non-abelian groups
    /// and as the oracle for the lattice closed form.
    pub fn bfs_word_length(&self, target: GroupElement, cutoff: usize) -> Option<usize> {
        let id = self.identity();
        if target == id {
            return Some(0);
        }
        let mut seen = HashSet::from([id]);
        let mut frontier = vec![id];
        for depth in 1..=cutoff {
            let mut next = Vec::new();
            for &v in &frontier {
                for w in self.neighbors(v) {
                    if w == target {
                        return Some(depth);
                    }
                    if seen.insert(w) {
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        None
    }

    /// Word-metric distance `|w·v⁻¹|`; `None` means "exceeds cutoff".
    pub fn word_distance(
        &self,
        v: GroupElement,
        w: GroupElement,
        cutoff: usize,
    ) -> Result<Option<usize>> {
        self.check(v)?;
        self.check(w)?;
        Ok(self.word_length(self.mul(w, self.inverse(v)), cutoff))
    }

    /// All elements of word length at most `radius`, with their lengths.
    pub fn ball(&self, radius: usize) -> HashMap<GroupElement, usize> {
        let id = self.identity();
        let mut dist = HashMap::from([(id, 0)]);
        let mut queue = VecDeque::from([id]);
        while let Some(v) = queue.pop_front() {
            let dv = dist[&v];
            if dv == radius {
                continue;
            }
            for w in self.neighbors(v) {
                dist.entry(w).or_insert_with(|| {
                    queue.push_back(w);
                    dv + 1
                });
            }
        }
        dist
    }

    /// The r-boundary: outside sites within distance `r` of `Λ` together
    /// with inside sites within distance `r` of the complement. Only
    /// `floor(r)` matters since distances are integers.
    pub fn r_boundary(&self, set: &SiteSet, r: f64) -> Result<SiteSet> {
        if !(r > 0.0) {
            return usage(format!("boundary radius must be positive, got {r}"));
        }
        if let Some(&v) = set.iter().next() {
            self.check(v)?;
        }
        let radius = r.floor() as usize;
        let mut out = Vec::new();
        if radius == 0 || set.is_empty() {
            return Ok(SiteSet::default());
        }

        // Outer part: BFS from Λ through the complement.
        let mut outer_dist: HashMap<GroupElement, usize> = HashMap::new();
        let mut frontier: Vec<GroupElement> = set.iter().copied().collect();
        for depth in 1..=radius {
            let mut next = Vec::new();
            for &v in &frontier {
                for w in self.neighbors(v) {
                    if !set.contains(w) && !outer_dist.contains_key(&w) {
                        outer_dist.insert(w, depth);
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        out.extend(outer_dist.iter().map(|(&w, _)| w));

        // Inner part: BFS from the outer 1-shell into Λ.
        let mut inner_seen: HashSet<GroupElement> = HashSet::new();
        let mut frontier: Vec<GroupElement> = outer_dist
            .iter()
            .filter(|(_, &d)| d == 1)
            .map(|(&w, _)| w)
            .collect();
        for _ in 1..=radius {
            let mut next = Vec::new();
            for &v in &frontier {
                for w in self.neighbors(v) {
                    if set.contains(w) && inner_seen.insert(w) {
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        out.extend(inner_seen);
        Ok(SiteSet::from_iter(out))
    }

    /// `|∂^r Λ| / |Λ|`.
    pub fn folner_ratio(&self, set: &SiteSet, r: f64) -> Result<f64> {
        if set.is_empty() {
            return usage("Følner ratio of the empty set");
        }
        Ok(self.r_boundary(set, r)?.len() as f64 / set.len() as f64)
    }

    /// Largest pairwise word distance.
    pub fn diameter(&self, set: &SiteSet) -> Result<usize> {
        if set.is_empty() {
            return usage("diameter of the empty set");
        }
        match self.kind {
            GroupKind::Lattice(d) => {
                // max |x - y|_1 = max over sign patterns of (max s·x - min s·x)
                let mut best = 0i64;
                for mask in 0..(1u32 << d) {
                    let dot = |v: &GroupElement| -> i64 {
                        (0..d as usize)
                            .map(|j| {
                                if mask >> j & 1 == 1 {
                                    -v.coords[j]
                                } else {
                                    v.coords[j]
                                }
                            })
                            .sum()
                    };
                    let (lo, hi) = set
                        .iter()
                        .map(dot)
                        .fold((i64::MAX, i64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
                    best = best.max(hi - lo);
                }
                Ok(best as usize)
            }
            GroupKind::Heisenberg => {
                let mut diffs = HashSet::new();
                for &x in set.iter() {
                    let xi = self.inverse(x);
                    for &y in set.iter() {
                        diffs.insert(self.mul(y, xi));
                    }
                }
                Ok(self.max_word_length(&diffs))
            }
        }
    }

    /// Maximum word length over a finite set of elements, by growing a BFS
    /// ball until every element has been reached.
    pub(crate) fn max_word_length(&self, targets: &HashSet<GroupElement>) -> usize {
        let id = self.identity();
        let mut remaining = targets.len() - usize::from(targets.contains(&id));
        if remaining == 0 {
            return 0;
        }
        let mut seen = HashSet::from([id]);
        let mut frontier = vec![id];
        let mut depth = 0;
        loop {
            depth += 1;
            let mut next = Vec::new();
            for &v in &frontier {
                for w in self.neighbors(v) {
                    if seen.insert(w) {
                        if targets.contains(&w) {
                            remaining -= 1;
                        }
                        next.push(w);
                    }
                }
            }
            if remaining == 0 {
                return depth;
            }
            frontier = next;
        }
    }

    /// `|⋃_{k<j} Q_k⁻¹ Q_j| / |Q_j|` for a 1-based index `j`.
    pub fn temperedness_ratio(&self, prefix: &[SiteSet], j: usize) -> Result<f64> {
        if j == 0 || j > prefix.len() {
            return usage(format!("index {j} outside 1..={}", prefix.len()));
        }
        let qj = &prefix[j - 1];
        if qj.is_empty() {
            return usage("temperedness ratio of an empty set");
        }
        let mut union = HashSet::new();
        for qk in &prefix[..j - 1] {
            for &q in qk.iter() {
                let qi = self.inverse(q);
                for &p in qj.iter() {
                    union.insert(self.mul(qi, p));
                }
            }
        }
        Ok(union.len() as f64 / qj.len() as f64)
    }
}

/// A finite region of the group that can be scanned without materialising
/// a hashed site set.
pub trait Region: Sync {
    fn size(&self) -> usize;
    fn includes(&self, v: GroupElement) -> bool;
    /// Sites in canonical (lexicographic) order.
    fn sites(&self) -> Box<dyn Iterator<Item = GroupElement> + '_>;
}

impl Region for SiteSet {
    fn size(&self) -> usize {
        self.len()
    }
    fn includes(&self, v: GroupElement) -> bool {
        self.contains(v)
    }
    fn sites(&self) -> Box<dyn Iterator<Item = GroupElement> + '_> {
        Box::new(self.iter().copied())
    }
}

/// The box `[0, L)^d` of `Z^d`, kept implicit.
#[derive(Clone, Debug)]
pub struct LatticeBox {
    kind: GroupKind,
    dim: usize,
    side: i64,
}

impl LatticeBox {
    pub fn new(group: &Group, side: u64) -> Result<Self> {
        match group.kind {
            GroupKind::Lattice(d) => Ok(LatticeBox {
                kind: group.kind,
                dim: d as usize,
                side: side as i64,
            }),
            GroupKind::Heisenberg => usage("lattice boxes need Z^d"),
        }
    }
}

impl Region for LatticeBox {
    fn size(&self) -> usize {
        (self.side as usize).pow(self.dim as u32)
    }
    fn includes(&self, v: GroupElement) -> bool {
        v.kind == self.kind
            && v.coords[..self.dim]
                .iter()
                .all(|&c| (0..self.side).contains(&c))
    }
    fn sites(&self) -> Box<dyn Iterator<Item = GroupElement> + '_> {
        let (kind, dim, side) = (self.kind, self.dim, self.side);
        let total = self.size();
        Box::new((0..total).map(move |mut i| {
            let mut coords = [0i64; 3];
            for j in (0..dim).rev() {
                coords[j] = (i % side as usize) as i64;
                i /= side as usize;
            }
            GroupElement { kind, coords }
        }))
    }
}

/// A finite set of group elements with deterministic (sorted) iteration
/// order and hashed membership.
#[derive(Clone, Default)]
pub struct SiteSet {
    sorted: Vec<GroupElement>,
    index: HashMap<GroupElement, usize>,
}

impl SiteSet {
    pub fn new(mut sites: Vec<GroupElement>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        let index = sites.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        SiteSet {
            sorted: sites,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    #[inline]
    pub fn contains(&self, v: GroupElement) -> bool {
        self.index.contains_key(&v)
    }

    /// Position of `v` in the iteration order.
    #[inline]
    pub fn position(&self, v: GroupElement) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GroupElement> {
        self.sorted.iter()
    }

    pub fn as_slice(&self) -> &[GroupElement] {
        &self.sorted
    }

    pub fn get(&self, i: usize) -> GroupElement {
        self.sorted[i]
    }

    /// Smallest element in the canonical (lexicographic) order.
    pub fn min(&self) -> Option<GroupElement> {
        self.sorted.first().copied()
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.len() <= other.len() && self.iter().all(|&v| other.contains(v))
    }

    pub fn is_disjoint(&self, other: &SiteSet) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().all(|&v| !large.contains(v))
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        SiteSet::from_iter(self.iter().chain(other.iter()).copied())
    }

    pub fn intersection(&self, other: &SiteSet) -> SiteSet {
        SiteSet::new(
            self.iter()
                .copied()
                .filter(|&v| other.contains(v))
                .collect(),
        )
    }

    pub fn difference(&self, other: &SiteSet) -> SiteSet {
        SiteSet::new(
            self.iter()
                .copied()
                .filter(|&v| !other.contains(v))
                .collect(),
        )
    }
}

impl FromIterator<GroupElement> for SiteSet {
    fn from_iter<I: IntoIterator<Item = GroupElement>>(iter: I) -> Self {
        SiteSet::new(iter.into_iter().collect())
    }
}

impl PartialEq for SiteSet {
    fn eq(&self, other: &Self) -> bool {
        self.sorted == other.sorted
    }
}

impl Eq for SiteSet {}

impl fmt::Debug for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.sorted.iter()).finish()
    }
}

impl<'a> IntoIterator for &'a SiteSet {
    type Item = &'a GroupElement;
    type IntoIter = std::slice::Iter<'a, GroupElement>;
    fn into_iter(self) -> Self::IntoIter {
        self.sorted.iter()
    }
}

/// Box `[0, L)^d` in `Z^d`.
pub fn cube(group: &Group, side: u64) -> Result<SiteSet> {
    let d = match group.kind {
        GroupKind::Lattice(d) => d as usize,
        GroupKind::Heisenberg => return usage("cubes are defined for Z^d only"),
    };
    if side == 0 {
        return Ok(SiteSet::default());
    }
    let side = side as i64;
    let mut sites = Vec::with_capacity((side as usize).pow(d as u32));
    let mut c = [0i64; 3];
    loop {
        sites.push(group.element_unchecked(c));
        let mut j = d;
        loop {
            if j == 0 {
                return Ok(SiteSet::new(sites));
            }
            j -= 1;
            c[j] += 1;
            if c[j] < side {
                break;
            }
            c[j] = 0;
        }
    }
}

/// Box `[0, L_1) × … × [0, L_d)` in `Z^d`.
pub fn lattice_box(group: &Group, dims: &[u64]) -> Result<SiteSet> {
    let d = match group.kind {
        GroupKind::Lattice(d) => d as usize,
        GroupKind::Heisenberg => return usage("lattice boxes are defined for Z^d only"),
    };
    if dims.len() != d {
        return usage(format!("expected {d} side lengths, got {}", dims.len()));
    }
    if dims.contains(&0) {
        return Ok(SiteSet::default());
    }
    let total: u64 = dims.iter().product();
    let mut sites = Vec::with_capacity(total as usize);
    for mut i in 0..total {
        let mut c = [0i64; 3];
        for j in (0..d).rev() {
            c[j] = (i % dims[j]) as i64;
            i /= dims[j];
        }
        sites.push(group.element_unchecked(c));
    }
    Ok(SiteSet::new(sites))
}

/// Side lengths of the `k`-th (1-based) set of the refined cube sequence in
/// `Z^d`: starting from the unit box, each step lengthens the next axis by
/// one, so `[0,L)^d` is the `(d(L−1)+1)`-th member.
pub fn refined_cube_dims(d: usize, k: u64) -> Vec<u64> {
    assert!(k >= 1, "refined cube index is 1-based");
    let steps = k - 1;
    (0..d as u64)
        .map(|j| 1 + steps / d as u64 + u64::from(j < steps % d as u64))
        .collect()
}

/// `|∂^r B|` for the box `B = [0, L_1) × … × [0, L_d)` of `Z^d`, in closed
/// form: inner sites within `r` of a face plus outer sites at ℓ¹ distance
/// at most `r`. Saturates at `u128::MAX`.
pub fn lattice_box_boundary_size(dims: &[u64], r: u64) -> u128 {
    if r == 0 || dims.contains(&0) {
        return 0;
    }
    let volume = dims.iter().fold(1u128, |v, &l| v.saturating_mul(l as u128));
    let core = dims.iter().fold(1u128, |v, &l| {
        v.saturating_mul(l.saturating_sub(2 * r) as u128)
    });
    // ways[t] = number of points whose per-axis distances sum to t
    let r = r as usize;
    let mut ways = vec![0u128; r + 1];
    ways[0] = 1;
    for &l in dims {
        let mut next = vec![0u128; r + 1];
        for (t, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            next[t] = next[t].saturating_add(w.saturating_mul(l as u128));
            for s in 1..=r - t {
                next[t + s] = next[t + s].saturating_add(w.saturating_mul(2));
            }
        }
        ways = next;
    }
    let reach = ways.iter().fold(0u128, |a, &w| a.saturating_add(w));
    (volume - core).saturating_add(reach.saturating_sub(volume))
}

/// Box `[0,a) × [0,b) × [0,c)` in Heisenberg canonical coordinates.
pub fn heisenberg_box(group: &Group, a: u64, b: u64, c: u64) -> Result<SiteSet> {
    if group.kind != GroupKind::Heisenberg {
        return usage("Heisenberg boxes need the Heisenberg group");
    }
    let mut sites = Vec::with_capacity((a * b * c) as usize);
    for x in 0..a as i64 {
        for y in 0..b as i64 {
            for z in 0..c as i64 {
                sites.push(group.element_unchecked([x, y, z]));
            }
        }
    }
    Ok(SiteSet::new(sites))
}

/// Dimensions of the `k`-th (1-based) set of the refined Heisenberg
/// sequence: for `a = 1, 2, ...` the boxes `(a, a, c)` with
/// `c = max(1, (a-1)²), ..., a²`. Every `[0,n)²×[0,n²)` box occurs, the
/// sequence is nested, and volumes increase strictly.
pub fn refined_heisenberg_dims(k: u64) -> (u64, u64, u64) {
    assert!(k >= 1, "refined Heisenberg index is 1-based");
    let mut remaining = k;
    let mut a = 1u64;
    loop {
        let lo = ((a - 1) * (a - 1)).max(1);
        let count = a * a - lo + 1;
        if remaining <= count {
            return (a, a, lo + remaining - 1);
        }
        remaining -= count;
        a += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FolnerFamily {
    /// `[0, L)^d` in `Z^d`.
    Cubes,
    /// Word-metric balls of radius `n` around the identity.
    Balls,
    /// `[0,n) × [0,n) × [0,n²)` in the Heisenberg group.
    HeisenbergBoxes,
    /// The refined nested sequence of [`refined_heisenberg_dims`].
    HeisenbergRefined,
    /// The refined nested boxes of [`refined_cube_dims`] in `Z^d`.
    CubesRefined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupName {
    Zd,
    Heisenberg,
}

/// A Følner family together with the indices to realise, as it appears in
/// experiment configuration files:
/// `{"group": "zd", "d": 2, "family": "cubes", "indices": [4, 8, 16, 32]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FolnerSpec {
    pub group: GroupName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    pub family: FolnerFamily,
    /// A list, or `{"from": a, "to": b}` for the inclusive range `a..=b`.
    #[serde(deserialize_with = "index_list")]
    pub indices: Vec<u64>,
    #[serde(default)]
    pub nested: bool,
}

fn index_list<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Vec<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Indices {
        List(Vec<u64>),
        Range { from: u64, to: u64 },
    }
    Ok(match Indices::deserialize(de)? {
        Indices::List(v) => v,
        Indices::Range { from, to } => (from..=to).collect(),
    })
}

impl FolnerSpec {
    pub fn cubes(d: usize, indices: Vec<u64>) -> Self {
        FolnerSpec {
            group: GroupName::Zd,
            d: Some(d),
            family: FolnerFamily::Cubes,
            indices,
            nested: true,
        }
    }

    pub fn heisenberg(family: FolnerFamily, indices: Vec<u64>) -> Self {
        FolnerSpec {
            group: GroupName::Heisenberg,
            d: None,
            family,
            indices,
            nested: true,
        }
    }

    pub fn build_group(&self) -> Result<Group> {
        match self.group {
            GroupName::Zd => Group::lattice(
                self.d
                    .ok_or_else(|| Error::Usage("group \"zd\" needs a dimension \"d\"".into()))?,
            ),
            GroupName::Heisenberg => Ok(Group::heisenberg()),
        }
    }

    /// The set with the given family index.
    pub fn set(&self, group: &Group, index: u64) -> Result<SiteSet> {
        match (self.family, group.kind) {
            (FolnerFamily::Cubes, GroupKind::Lattice(_)) => cube(group, index),
            (FolnerFamily::CubesRefined, GroupKind::Lattice(d)) => {
                if index == 0 {
                    return usage("refined cube indices start at 1");
                }
                lattice_box(group, &refined_cube_dims(d as usize, index))
            }
            (FolnerFamily::Balls, _) => {
                Ok(SiteSet::from_iter(group.ball(index as usize).into_keys()))
            }
            (FolnerFamily::HeisenbergBoxes, GroupKind::Heisenberg) => {
                heisenberg_box(group, index, index, index * index)
            }
            (FolnerFamily::HeisenbergRefined, GroupKind::Heisenberg) => {
                if index == 0 {
                    return usage("refined Heisenberg indices start at 1");
                }
                let (a, b, c) = refined_heisenberg_dims(index);
                heisenberg_box(group, a, b, c)
            }
            (family, kind) => usage(format!("family {family:?} is not defined on {kind:?}")),
        }
    }

    /// Diameter of a family member, with closed forms where available.
    pub fn diameter(&self, group: &Group, index: u64) -> Result<usize> {
        match (self.family, group.kind) {
            (FolnerFamily::Cubes, GroupKind::Lattice(d)) if index > 0 => {
                Ok(d as usize * (index as usize - 1))
            }
            (FolnerFamily::CubesRefined, GroupKind::Lattice(d)) if index > 0 => {
                Ok(refined_cube_dims(d as usize, index)
                    .iter()
                    .map(|&l| l as usize - 1)
                    .sum())
            }
            (FolnerFamily::Balls, GroupKind::Lattice(_)) => Ok(2 * index as usize),
            _ => group.diameter(&self.set(group, index)?),
        }
    }

    /// Realises every index. With `nested` set, each set is translated so
    /// that it contains the identity and only the strictly increasing,
    /// nested subsequence is kept.
    pub fn sets(&self) -> Result<(Group, Vec<SiteSet>)> {
        let group = self.build_group()?;
        let mut out: Vec<SiteSet> = Vec::with_capacity(self.indices.len());
        for &index in &self.indices {
            let mut set = self.set(&group, index)?;
            if self.nested {
                if !set.contains(group.identity()) {
                    if let Some(m) = set.min() {
                        set = group.translate(&set, group.inverse(m));
                    }
                }
                if let Some(prev) = out.last() {
                    if set.len() <= prev.len() || !prev.is_subset(&set) {
                        continue;
                    }
                }
            }
            out.push(set);
        }
        Ok((group, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(d: usize) -> Group {
        Group::lattice(d).unwrap()
    }

    #[test]
    fn box_boundary_closed_form_matches_enumeration() {
        for d in 1..=3usize {
            let g = z(d);
            for dims in [
                vec![1u64; d],
                vec![3; d],
                (0..d as u64).map(|j| 2 + j * 3).collect(),
            ] {
                let b = lattice_box(&g, &dims).unwrap();
                for r in 1..=3u64 {
                    let brute = g.r_boundary(&b, r as f64).unwrap().len() as u128;
                    assert_eq!(
                        lattice_box_boundary_size(&dims, r),
                        brute,
                        "d={d} {dims:?} r={r}"
                    );
                }
            }
        }
        assert_eq!(lattice_box_boundary_size(&[3, 3], 1), 20);
    }

    #[test]
    fn refined_cubes_are_nested_boxes() {
        assert_eq!(refined_cube_dims(2, 1), vec![1, 1]);
        assert_eq!(refined_cube_dims(2, 2), vec![2, 1]);
        assert_eq!(refined_cube_dims(2, 5), vec![3, 3]);
        assert_eq!(refined_cube_dims(3, 7), vec![3, 3, 3]);
        let spec = FolnerSpec {
            group: GroupName::Zd,
            d: Some(2),
            family: FolnerFamily::CubesRefined,
            indices: (1..=9).collect(),
            nested: true,
        };
        let (g, sets) = spec.sets().unwrap();
        assert_eq!(sets.len(), 9);
        assert_eq!(sets[8], cube(&g, 5).unwrap());
        assert_eq!(spec.diameter(&g, 4).unwrap(), g.diameter(&sets[3]).unwrap());
    }

    #[test]
    fn lattice_multiplication_is_addition() {
        let g = z(2);
        let a = g.element(&[1, 2]).unwrap();
        let b = g.element(&[3, -1]).unwrap();
        assert_eq!(g.multiply(a, b).unwrap(), g.element(&[4, 1]).unwrap());
    }

    #[test]
    fn heisenberg_commutator_shows_up_in_z() {
        let h = Group::heisenberg();
        let x = h.element(&[1, 0, 0]).unwrap();
        let y = h.element(&[0, 1, 0]).unwrap();
        assert_eq!(h.multiply(x, y).unwrap(), h.element(&[1, 1, 1]).unwrap());
        assert_eq!(h.multiply(y, x).unwrap(), h.element(&[1, 1, 0]).unwrap());
    }

    #[test]
    fn mixed_groups_are_rejected() {
        let g = z(3);
        let h = Group::heisenberg();
        let a = g.element(&[1, 0, 0]).unwrap();
        let b = h.element(&[1, 0, 0]).unwrap();
        assert!(matches!(g.multiply(a, b), Err(Error::Usage(_))));
    }

    #[test]
    fn generator_set_checks() {
        let kind = GroupKind::Lattice(1);
        let g = z(1);
        let one = g.element(&[1]).unwrap();
        assert!(Group::with_generators(kind, vec![one]).is_err());
        assert!(Group::with_generators(kind, vec![g.identity(), one, g.inverse(one)]).is_err());
        assert!(Group::with_generators(kind, vec![one, g.inverse(one)]).is_ok());
        assert!(Group::lattice(0).is_err());
        assert!(Group::lattice(4).is_err());
    }

    #[test]
    fn word_distance_examples() {
        let g = z(2);
        let o = g.identity();
        let p = g.element(&[2, 2]).unwrap();
        assert_eq!(g.word_distance(o, p, 10).unwrap(), Some(4));
        assert_eq!(g.word_distance(p, p, 0).unwrap(), Some(0));
        assert_eq!(g.word_distance(o, p, 3).unwrap(), None);

        let h = Group::heisenberg();
        let c = h.element(&[0, 0, 1]).unwrap();
        assert_eq!(h.word_distance(h.identity(), c, 10).unwrap(), Some(4));
    }

    #[test]
    fn cube_boundary_and_ratio() {
        let g = z(2);
        let c3 = cube(&g, 3).unwrap();
        assert_eq!(g.r_boundary(&c3, 1.0).unwrap().len(), 20);
        assert!((g.folner_ratio(&c3, 1.0).unwrap() - 20.0 / 9.0).abs() < 1e-15);
        assert!(g.r_boundary(&SiteSet::default(), 1.0).unwrap().is_empty());
        assert!(g.r_boundary(&c3, 0.0).is_err());
        assert!(g.folner_ratio(&SiteSet::default(), 1.0).is_err());

        let g1 = z(1);
        for l in 2..20u64 {
            let r = g1.folner_ratio(&cube(&g1, l).unwrap(), 1.0).unwrap();
            assert!((r - 4.0 / l as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn implicit_box_matches_cube() {
        let g = z(2);
        let b = LatticeBox::new(&g, 5).unwrap();
        let c = cube(&g, 5).unwrap();
        assert_eq!(b.size(), c.len());
        assert!(b.sites().eq(c.iter().copied()));
        assert!(b.includes(g.element(&[4, 0]).unwrap()));
        assert!(!b.includes(g.element(&[5, 0]).unwrap()));
    }

    #[test]
    fn diameters() {
        let g = z(2);
        assert_eq!(g.diameter(&cube(&g, 3).unwrap()).unwrap(), 4);
        assert_eq!(g.diameter(&SiteSet::from_iter([g.identity()])).unwrap(), 0);
        assert!(g.diameter(&SiteSet::default()).is_err());
        let g1 = z(1);
        assert_eq!(g1.diameter(&cube(&g1, 17).unwrap()).unwrap(), 16);
    }

    #[test]
    fn temperedness_examples() {
        let g = z(1);
        let prefix = vec![cube(&g, 1).unwrap(), cube(&g, 2).unwrap()];
        assert_eq!(g.temperedness_ratio(&prefix, 1).unwrap(), 0.0);
        assert_eq!(g.temperedness_ratio(&prefix, 2).unwrap(), 1.0);
        assert!(g.temperedness_ratio(&prefix, 0).is_err());
        assert!(g.temperedness_ratio(&prefix, 3).is_err());
    }

    #[test]
    fn refined_heisenberg_sequence_is_nested() {
        let h = Group::heisenberg();
        let spec = FolnerSpec::heisenberg(FolnerFamily::HeisenbergRefined, (1..=30).collect());
        let (_, sets) = spec.sets().unwrap();
        assert_eq!(sets.len(), 30);
        for w in sets.windows(2) {
            assert!(w[0].len() < w[1].len());
            assert!(w[0].is_subset(&w[1]));
        }
        assert!(sets[0].contains(h.identity()));
        assert_eq!(refined_heisenberg_dims(1), (1, 1, 1));
        assert_eq!(refined_heisenberg_dims(5), (2, 2, 4));
        assert_eq!(refined_heisenberg_dims(6), (3, 3, 4));
    }

    #[test]
    fn folner_spec_json_shape() {
        let spec: FolnerSpec =
            serde_json::from_str(r#"{"group":"zd","d":2,"family":"cubes","indices":[4,8,16,32]}"#)
                .unwrap();
        let (g, sets) = spec.sets().unwrap();
        assert_eq!(g.kind(), GroupKind::Lattice(2));
        assert_eq!(
            sets.iter().map(|s| s.len()).collect::<Vec<_>>(),
            vec![16, 64, 256, 1024]
        );
        assert!(!spec.nested);
    }
}
