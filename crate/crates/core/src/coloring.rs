//! Colorings `ω: G → A`, patterns, pattern counting and frequency tables.
//!
//! Random colorings are counter based: the color at a site is a pure
//! function of the master seed and the canonical coordinates of the site
//! (see [`crate::mix`]). Nothing is cached, so evaluation is replayable and
//! independent of query order.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{usage, Error, Result};
use crate::group::{Group, GroupElement, GroupKind, Region, SiteSet};
use crate::mix::{mix, mix_all, unit_interval};

const WEIGHT_TOLERANCE: f64 = 1e-12;

/// The color alphabet `A` with its single-site distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ColorSet {
    Finite {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
    /// Uniform distribution on `[lo, hi]`.
    Interval {
        lo: f64,
        hi: f64,
    },
}

impl ColorSet {
    pub fn finite(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let set = ColorSet::Finite { values, weights };
        set.validate()?;
        Ok(set)
    }

    /// Colors `{0, 1}` with `P(1) = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::finite(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let set = ColorSet::Interval { lo, hi };
        set.validate()?;
        Ok(set)
    }

    /// Edge-percolation colors: bit `j` of the integer color says whether
    /// the edge from `v` along the `j`-th forward generator (`v + e_j` on
    /// `Z^d`) is open; each bit is open with probability `p`.
    pub fn edge_bits(d: usize, p: f64) -> Result<Self> {
        let n = 1usize << d;
        let values = (0..n).map(|m| m as f64).collect();
        let weights = (0..n)
            .map(|m| {
                let open = (m as u32).count_ones() as i32;
                p.powi(open) * (1.0 - p).powi(d as i32 - open)
            })
            .collect();
        Self::finite(values, weights)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ColorSet::Finite { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return usage("finite color set needs one weight per value");
                }
                if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
                    return usage("color weights must lie in [0, 1]");
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                    return usage(format!("color weights sum to {total}, not 1"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return usage("color values must be finite");
                }
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return usage("color values must be distinct");
                }
                Ok(())
            }
            ColorSet::Interval { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return usage(format!("interval colors need lo < hi, got [{lo}, {hi}]"));
                }
                Ok(())
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ColorSet::Finite { .. })
    }

    /// Inverse distribution function evaluated at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            ColorSet::Finite { values, weights } => {
                let mut acc = 0.0;
                for (v, w) in values.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *v;
                    }
                }
                // u lands in the rounding gap below 1; take the last value
                // with positive weight.
                let last = weights
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .unwrap_or(values.len() - 1);
                values[last]
            }
            ColorSet::Interval { lo, hi } => lo + u * (hi - lo),
        }
    }

    pub fn weight(&self, value: f64) -> Option<f64> {
        match self {
            ColorSet::Finite { values, weights } => {
                values.iter().position(|&v| v == value).map(|i| weights[i])
            }
            ColorSet::Interval { .. } => None,
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            ColorSet::Finite { values, .. } => values.iter().copied().fold(f64::MIN, f64::max),
            ColorSet::Interval { hi, .. } => *hi,
        }
    }

    pub fn inf(&self) -> f64 {
        match self {
            ColorSet::Finite { values, .. } => values.iter().copied().fold(f64::MAX, f64::min),
            ColorSet::Interval { lo, .. } => *lo,
        }
    }
}

/// Anything that assigns a color to every site.
pub trait ColorSource: Sync {
    fn color(&self, v: GroupElement) -> f64;
}

impl<T: ColorSource + ?Sized> ColorSource for &T {
    fn color(&self, v: GroupElement) -> f64 {
        (**self).color(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coloring {
    Constant(f64),
    /// 1 on visible lattice points (gcd of coordinates 1, or the origin), else 0.
    Visible,
    /// Independent colors with the given single-site law.
    Iid {
        colors: ColorSet,
        seed: u64,
    },
    /// Colors that are independent on site families further apart than
    /// `range` (word metric of `Z^d`). Sites are grouped in cubic blocks of
    /// side `range / d + 1`; the color at `v` is the `colors`-quantile of
    /// `Φ((Z_block + Z_v) / √2)` with independent standard normals.
    Dependent {
        colors: ColorSet,
        seed: u64,
        range: usize,
    },
    /// Each site is open with probability `open`; open sites carry an
    /// independent `potential` color, closed sites carry `marker`.
    Diluted {
        potential: ColorSet,
        open: f64,
        marker: f64,
        seed: u64,
    },
    /// Explicit values on finitely many sites, `default` elsewhere.
    Explicit {
        values: HashMap<GroupElement, f64>,
        default: f64,
    },
}

const SITE_STREAM: u64 = 0x5173;
const BLOCK_STREAM: u64 = 0xB10C;
const OPEN_STREAM: u64 = 0x0BE7;

impl Coloring {
    pub fn iid(colors: ColorSet, seed: u64) -> Self {
        Coloring::Iid { colors, seed }
    }

    pub fn dependent(colors: ColorSet, seed: u64, range: usize) -> Result<Self> {
        if range == 0 {
            return usage("dependence range must be positive");
        }
        Ok(Coloring::Dependent {
            colors,
            seed,
            range,
        })
    }

    pub fn from_pattern(pattern: &Pattern, default: f64) -> Self {
        Coloring::Explicit {
            values: pattern.iter().collect(),
            default,
        }
    }

    /// Realisation with site `v` overwritten by `value`.
    pub fn with_site(&self, v: GroupElement, value: f64) -> Overwrite<'_, Self> {
        Overwrite {
            base: self,
            site: v,
            value,
        }
    }
}

/// The visible-points coloring `ω(x) = 1` iff `x = 0` or `gcd(|x_1|, …, |x_d|) = 1`.
pub fn visible_coloring(d: usize) -> Result<Coloring> {
    if d == 0 {
        return usage("visible points need d >= 1");
    }
    Ok(Coloring::Visible)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Maps random bits to an open-interval uniform suitable for quantiles.
fn open_unit(bits: u64) -> f64 {
    (unit_interval(bits) + 0.5 / (1u64 << 53) as f64).min(1.0 - f64::EPSILON)
}

impl ColorSource for Coloring {
    fn color(&self, v: GroupElement) -> f64 {
        match self {
            Coloring::Constant(c) => *c,
            Coloring::Visible => {
                let g = v
                    .coords()
                    .iter()
                    .fold(0u64, |g, &c| gcd(g, c.unsigned_abs()));
                if g <= 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Coloring::Iid { colors, seed } => {
                colors.quantile(unit_interval(mix_all(mix(*seed, SITE_STREAM), v.coords())))
            }
            Coloring::Dependent {
                colors,
                seed,
                range,
            } => {
                let d = v.coords().len() as i64;
                let side = *range as i64 / d + 1;
                let block: Vec<i64> = v.coords().iter().map(|c| c.div_euclid(side)).collect();
                let normal = standard_normal();
                let zb = normal.inverse_cdf(open_unit(mix_all(mix(*seed, BLOCK_STREAM), &block)));
                let zv =
                    normal.inverse_cdf(open_unit(mix_all(mix(*seed, SITE_STREAM), v.coords())));
                let u = normal.cdf((zb + zv) / std::f64::consts::SQRT_2);
                colors.quantile(u.clamp(0.0, 1.0 - f64::EPSILON))
            }
            Coloring::Diluted {
                potential,
                open,
                marker,
                seed,
            } => {
                if unit_interval(mix_all(mix(*seed, OPEN_STREAM), v.coords())) < *open {
                    potential.quantile(unit_interval(mix_all(mix(*seed, SITE_STREAM), v.coords())))
                } else {
                    *marker
                }
            }
            Coloring::Explicit { values, default } => values.get(&v).copied().unwrap_or(*default),
        }
    }
}

/// `(τ_g ω)_v = ω(v·g⁻¹)`.
pub struct Shifted<'a, C: ?Sized> {
    pub base: &'a C,
    pub group: &'a Group,
    pub by: GroupElement,
}

impl<C: ColorSource + ?Sized> ColorSource for Shifted<'_, C> {
    fn color(&self, v: GroupElement) -> f64 {
        self.base.color(self.group.act(self.by, v))
    }
}

/// A coloring with one site overwritten.
pub struct Overwrite<'a, C: ?Sized> {
    pub base: &'a C,
    pub site: GroupElement,
    pub value: f64,
}

impl<C: ColorSource + ?Sized> ColorSource for Overwrite<'_, C> {
    fn color(&self, v: GroupElement) -> f64 {
        if v == self.site {
            self.value
        } else {
            self.base.color(v)
        }
    }
}

/// A map from a finite domain to colors. Values are stored in domain order.
#[derive(Clone, Debug, PartialEq)]
pub struct Pattern {
    domain: SiteSet,
    values: Vec<f64>,
}

impl Pattern {
    pub fn new(domain: SiteSet, values: Vec<f64>) -> Result<Self> {
        if domain.len() != values.len() {
            return usage(format!(
                "{} values for a domain of {} sites",
                values.len(),
                domain.len()
            ));
        }
        Ok(Pattern { domain, values })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (GroupElement, f64)>) -> Result<Self> {
        let map: BTreeMap<GroupElement, f64> = pairs.into_iter().collect();
        let domain = SiteSet::new(map.keys().copied().collect());
        let values = map.into_values().collect();
        Pattern::new(domain, values)
    }

    pub fn domain(&self) -> &SiteSet {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, v: GroupElement) -> Option<f64> {
        self.domain.position(v).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (GroupElement, f64)> + '_ {
        self.domain.iter().copied().zip(self.values.iter().copied())
    }

    /// `τ_g P`, defined on `dom(P)·g` by `(τ_g P)(w) = P(w·g⁻¹)`.
    pub fn shift(&self, group: &Group, g: GroupElement) -> Pattern {
        Pattern::from_pairs(self.iter().map(|(v, c)| (group.mul(v, g), c)))
            .expect("translation is a bijection")
    }

    /// Representative of `[P]_G` whose minimal domain element is the
    /// identity. Right translation preserves the lexicographic order in both
    /// built-in groups, so this is a canonical choice.
    pub fn canonical(&self, group: &Group) -> Pattern {
        match self.domain.min() {
            Some(m) => self.shift(group, group.inverse(m)),
            None => self.clone(),
        }
    }

    /// Serialisation of the canonical representative, e.g. `0,0:1;0,1:0`.
    pub fn canonical_id(&self, group: &Group) -> String {
        let c = self.canonical(group);
        let mut out = String::new();
        for (i, (v, value)) in c.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            let coords: Vec<String> = v.coords().iter().map(|x| x.to_string()).collect();
            let _ = write!(out, "{}:{}", coords.join(","), value);
        }
        out
    }
}

/// Patterns are also colorings; sites outside the domain read as NaN so that
/// any use of them by a non-local evaluator poisons the result.
impl ColorSource for Pattern {
    fn color(&self, v: GroupElement) -> f64 {
        self.get(v).unwrap_or(f64::NAN)
    }
}

/// `ω|_Λ`.
pub fn restrict(omega: &(impl ColorSource + ?Sized), domain: &SiteSet) -> Pattern {
    let values = domain.iter().map(|&v| omega.color(v)).collect();
    Pattern {
        domain: domain.clone(),
        values,
    }
}

/// `♯_P P'`: the number of translates `h` with `dom(P)·h ⊆ dom(P')` on which
/// `P'` agrees with the translated `P`.
pub fn pattern_count(group: &Group, p: &Pattern, p_prime: &Pattern) -> usize {
    count_in_region(group, p, p_prime.domain(), p_prime)
}

/// Counts occurrences of `p` inside `omega` restricted to `region`.
pub fn count_in_region(
    group: &Group,
    p: &Pattern,
    region: &(impl Region + ?Sized),
    omega: &(impl ColorSource + ?Sized),
) -> usize {
    let Some(v0) = p.domain.min() else {
        return 1;
    };
    let v0_inv = group.inverse(v0);
    region
        .sites()
        .filter(|&q| {
            let h = group.mul(v0_inv, q);
            p.iter().all(|(v, c)| {
                let w = group.mul(v, h);
                region.includes(w) && omega.color(w) == c
            })
        })
        .count()
}

/// `♯_P(ω|_Q) / |Q|`.
pub fn empirical_frequency(
    group: &Group,
    p: &Pattern,
    omega: &(impl ColorSource + ?Sized),
    q: &(impl Region + ?Sized),
) -> Result<f64> {
    if q.size() == 0 {
        return usage("empirical frequency over an empty set");
    }
    Ok(count_in_region(group, p, q, omega) as f64 / q.size() as f64)
}

/// Limit frequency of `P` under the iid product law: `∏ weight(P(v))`.
pub fn exact_frequency(p: &Pattern, colors: &ColorSet) -> Result<f64> {
    if !colors.is_finite() {
        return Err(Error::Unsupported(
            "pointwise frequencies of interval colors vanish; use an empirical measure".into(),
        ));
    }
    Ok(p.values
        .iter()
        .map(|&c| colors.weight(c).unwrap_or(0.0))
        .product())
}

/// Colors of a pattern on a fixed window, as raw bits in window order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternKey(pub Vec<u64>);

impl PatternKey {
    pub fn from_values(values: &[f64]) -> Self {
        PatternKey(values.iter().map(|v| v.to_bits()).collect())
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from_bits(b)).collect()
    }

    pub fn to_pattern(&self, window: &SiteSet) -> Pattern {
        Pattern {
            domain: window.clone(),
            values: self.values(),
        }
    }
}

/// Frequencies of the patterns on a fixed window. Absent keys have
/// frequency zero. `counts` is present for tables obtained by counting.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTable {
    pub window: SiteSet,
    pub frequencies: BTreeMap<PatternKey, f64>,
    pub counts: Option<BTreeMap<PatternKey, u64>>,
}

impl FrequencyTable {
    pub fn get(&self, key: &PatternKey) -> f64 {
        self.frequencies.get(key).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.frequencies.values().sum()
    }

    /// CSV with columns `pattern_id,count,frequency`.
    pub fn to_csv(&self, group: &Group) -> String {
        let mut out = String::from("pattern_id,count,frequency\n");
        for (key, freq) in &self.frequencies {
            let id = key.to_pattern(&self.window).canonical_id(group);
            let count = self
                .counts
                .as_ref()
                .and_then(|c| c.get(key))
                .map(|c| c.to_string())
                .unwrap_or_default();
            let _ = writeln!(out, "\"{id}\",{count},{freq:.17e}");
        }
        out
    }
}

/// `♯_P(ω|_Q)/|Q|` for every pattern `P` on `window` that occurs in `Q`.
pub fn pattern_table(
    group: &Group,
    omega: &(impl ColorSource + ?Sized),
    q: &(impl Region + ?Sized),
    window: &SiteSet,
) -> Result<FrequencyTable> {
    if q.size() == 0 {
        return usage("pattern table over an empty set");
    }
    let Some(w0) = window.min() else {
        return usage("pattern window must be nonempty");
    };
    let w0_inv = group.inverse(w0);
    let mut counts: BTreeMap<PatternKey, u64> = BTreeMap::new();
    let mut values = Vec::with_capacity(window.len());
    for site in q.sites() {
        let h = group.mul(w0_inv, site);
        values.clear();
        let mut inside = true;
        for &v in window.iter() {
            let w = group.mul(v, h);
            if !q.includes(w) {
                inside = false;
                break;
            }
            values.push(omega.color(w));
        }
        if inside {
            *counts.entry(PatternKey::from_values(&values)).or_default() += 1;
        }
    }
    let n = q.size() as f64;
    let frequencies = counts
        .iter()
        .map(|(k, &c)| (k.clone(), c as f64 / n))
        .collect();
    Ok(FrequencyTable {
        window: window.clone(),
        frequencies,
        counts: Some(counts),
    })
}

/// The limit frequencies of all `|A|^{|window|}` patterns under the iid law,
/// skipping zero-weight colors. Fails if more than `max_patterns` patterns
/// would be listed.
pub fn exact_table(
    window: &SiteSet,
    colors: &ColorSet,
    max_patterns: usize,
) -> Result<FrequencyTable> {
    let ColorSet::Finite { values, weights } = colors else {
        return Err(Error::Unsupported(
            "exact pattern tables need a finite color set".into(),
        ));
    };
    let support: Vec<(f64, f64)> = values
        .iter()
        .copied()
        .zip(weights.iter().copied())
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let k = support.len();
    let n = window.len();
    let total = (k as f64).powi(n as i32);
    if total > max_patterns as f64 {
        return Err(Error::Resource(format!(
            "{total} patterns on a window of {n} sites exceed the limit {max_patterns}"
        )));
    }
    let mut frequencies = BTreeMap::new();
    let mut digits = vec![0usize; n];
    loop {
        let vals: Vec<f64> = digits.iter().map(|&i| support[i].0).collect();
        let w: f64 = digits.iter().map(|&i| support[i].1).product();
        frequencies.insert(PatternKey::from_values(&vals), w);
        let mut j = n;
        loop {
            if j == 0 {
                return Ok(FrequencyTable {
                    window: window.clone(),
                    frequencies,
                    counts: None,
                });
            }
            j -= 1;
            digits[j] += 1;
            if digits[j] < k {
                break;
            }
            digits[j] = 0;
        }
    }
}

/// Total variation distance and the unhalved ℓ¹ sum between two tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Distance {
    pub total_variation: f64,
    pub l1: f64,
}

pub fn total_variation(a: &FrequencyTable, b: &FrequencyTable) -> Distance {
    let mut l1 = 0.0;
    for (k, &x) in &a.frequencies {
        l1 += (x - b.get(k)).abs();
    }
    for (k, &y) in &b.frequencies {
        if !a.frequencies.contains_key(k) {
            l1 += y.abs();
        }
    }
    Distance {
        total_variation: 0.5 * l1,
        l1,
    }
}

/// Counts of window patterns `v ↦ ω(v·t)` over grid points `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    pub window: SiteSet,
    pub counts: BTreeMap<PatternKey, u64>,
    pub total: u64,
}

impl EmpiricalMeasure {
    pub fn mass(&self, key: &PatternKey) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(key).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn as_table(&self) -> FrequencyTable {
        let n = self.total as f64;
        FrequencyTable {
            window: self.window.clone(),
            frequencies: self
                .counts
                .iter()
                .map(|(k, &c)| (k.clone(), c as f64 / n))
                .collect(),
            counts: Some(self.counts.clone()),
        }
    }
}

/// Empirical measure of the window patterns seen at the grid points. The
/// translates `window·t` must lie in `q` and be pairwise disjoint.
pub fn grid_empirical_measure(
    group: &Group,
    omega: &(impl ColorSource + ?Sized),
    q: &(impl Region + ?Sized),
    window: &SiteSet,
    grid: &[GroupElement],
) -> Result<EmpiricalMeasure> {
    let mut covered = std::collections::HashSet::new();
    let mut counts = BTreeMap::new();
    for &t in grid {
        group.check(t)?;
        let mut values = Vec::with_capacity(window.len());
        for &v in window.iter() {
            let w = group.mul(v, t);
            if !q.includes(w) {
                return usage(format!("window translate at {t} leaves the region at {w}"));
            }
            if !covered.insert(w) {
                return usage(format!("window translates overlap at {w}"));
            }
            values.push(omega.color(w));
        }
        *counts.entry(PatternKey::from_values(&values)).or_default() += 1;
    }
    Ok(EmpiricalMeasure {
        window: window.clone(),
        counts,
        total: grid.len() as u64,
    })
}

/// Grid points `t ∈ (L·Z)^d` with `Λ_L + t ⊆ [0, j)^d`.
pub fn lattice_grid(group: &Group, j: u64, l: u64) -> Result<Vec<GroupElement>> {
    let GroupKind::Lattice(d) = group.kind() else {
        return usage("lattice grids need Z^d");
    };
    if l == 0 {
        return usage("grid spacing must be positive");
    }
    let per_axis = (j / l) as usize;
    let d = d as usize;
    let mut out = Vec::with_capacity(per_axis.pow(d as u32));
    for mut i in 0..per_axis.pow(d as u32) {
        let mut c = vec![0i64; d];
        for x in c.iter_mut().rev() {
            *x = (i % per_axis) as i64 * l as i64;
            i /= per_axis;
        }
        out.push(group.element(&c)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::cube;

    fn z(d: usize) -> Group {
        Group::lattice(d).unwrap()
    }

    #[test]
    fn color_set_validation() {
        assert!(ColorSet::finite(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(ColorSet::finite(vec![0.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(ColorSet::interval(1.0, 1.0).is_err());
        let e = ColorSet::edge_bits(2, 0.3).unwrap();
        assert_eq!(e.weight(3.0), Some(0.09));
    }

    #[test]
    fn restrict_examples() {
        let g = z(2);
        let c3 = cube(&g, 3).unwrap();
        let ones = restrict(&Coloring::Constant(1.0), &c3);
        assert!(ones.values().iter().all(|&v| v == 1.0));

        let p = g.element(&[2, 4]).unwrap();
        assert_eq!(
            restrict(&Coloring::Visible, &SiteSet::from_iter([p])).values(),
            &[0.0]
        );

        let omega = Coloring::iid(ColorSet::bernoulli(0.3).unwrap(), 9);
        assert_eq!(restrict(&omega, &c3), restrict(&omega, &c3));
    }

    #[test]
    fn visible_points() {
        let g = z(2);
        let v = Coloring::Visible;
        assert_eq!(v.color(g.element(&[3, 5]).unwrap()), 1.0);
        assert_eq!(v.color(g.element(&[2, 4]).unwrap()), 0.0);
        assert_eq!(v.color(g.identity()), 1.0);
        assert_eq!(v.color(g.element(&[0, 3]).unwrap()), 0.0);
        assert_eq!(v.color(g.element(&[0, -1]).unwrap()), 1.0);
        assert!(visible_coloring(0).is_err());
    }

    #[test]
    fn shift_examples() {
        let g = z(2);
        let p = Pattern::from_pairs([(g.identity(), 2.0)]).unwrap();
        let e1 = g.element(&[1, 0]).unwrap();
        let shifted = p.shift(&g, e1);
        assert_eq!(shifted.domain().as_slice(), &[e1]);
        assert_eq!(shifted.get(e1), Some(2.0));
        assert_eq!(p.shift(&g, g.identity()), p);
        assert_eq!(shifted.shift(&g, g.inverse(e1)), p);
    }

    #[test]
    fn counting_examples() {
        let g = z(2);
        let ones3 = restrict(&Coloring::Constant(1.0), &cube(&g, 3).unwrap());
        let one = Pattern::from_pairs([(g.identity(), 1.0)]).unwrap();
        assert_eq!(pattern_count(&g, &one, &ones3), 9);
        assert!(pattern_count(&g, &ones3, &ones3) >= 1);
        let zero = Pattern::from_pairs([(g.identity(), 0.0)]).unwrap();
        let q = cube(&g, 4).unwrap();
        assert_eq!(
            empirical_frequency(&g, &zero, &Coloring::Constant(1.0), &q).unwrap(),
            0.0
        );
        assert!(
            empirical_frequency(&g, &zero, &Coloring::Constant(1.0), &SiteSet::default()).is_err()
        );
    }

    #[test]
    fn exact_frequencies() {
        let g = z(2);
        let b = ColorSet::bernoulli(0.3).unwrap();
        let one = Pattern::from_pairs([(g.identity(), 1.0)]).unwrap();
        assert_eq!(exact_frequency(&one, &b).unwrap(), 0.3);

        let half = ColorSet::bernoulli(0.5).unwrap();
        let p = restrict(&Coloring::Constant(0.0), &cube(&g, 2).unwrap());
        assert_eq!(exact_frequency(&p, &half).unwrap(), 0.0625);

        let three = ColorSet::finite(vec![1.0, 2.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
        let q =
            Pattern::from_pairs([(g.identity(), 1.0), (g.element(&[1, 0]).unwrap(), 3.0)]).unwrap();
        assert!((exact_frequency(&q, &three).unwrap() - 0.1).abs() < 1e-15);

        let interval = ColorSet::interval(0.0, 1.0).unwrap();
        assert!(matches!(
            exact_frequency(&one, &interval),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn exact_table_sums_to_one() {
        let g = z(2);
        let t = exact_table(
            &cube(&g, 2).unwrap(),
            &ColorSet::bernoulli(0.3).unwrap(),
            1 << 10,
        )
        .unwrap();
        assert_eq!(t.len(), 16);
        assert!((t.total() - 1.0).abs() < 1e-14);
        assert!(exact_table(
            &cube(&g, 5).unwrap(),
            &ColorSet::bernoulli(0.3).unwrap(),
            1000
        )
        .is_err());
    }

    #[test]
    fn total_variation_examples() {
        let g = z(1);
        let w = SiteSet::from_iter([g.identity()]);
        let table = |pairs: &[(f64, f64)]| FrequencyTable {
            window: w.clone(),
            frequencies: pairs
                .iter()
                .map(|&(c, f)| (PatternKey::from_values(&[c]), f))
                .collect(),
            counts: None,
        };
        let a = table(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = table(&[(0.0, 0.25), (1.0, 0.75)]);
        assert_eq!(
            total_variation(&a, &a),
            Distance {
                total_variation: 0.0,
                l1: 0.0
            }
        );
        assert_eq!(
            total_variation(&a, &b),
            Distance {
                total_variation: 0.25,
                l1: 0.5
            }
        );
        let p = table(&[(0.0, 1.0)]);
        let q = table(&[(1.0, 1.0)]);
        assert_eq!(
            total_variation(&p, &q),
            Distance {
                total_variation: 1.0,
                l1: 2.0
            }
        );
    }

    #[test]
    fn grid_measure_basics() {
        let g = z(2);
        let q = cube(&g, 8).unwrap();
        let window = cube(&g, 2).unwrap();
        let grid = lattice_grid(&g, 8, 2).unwrap();
        assert_eq!(grid.len(), 16);
        let m = grid_empirical_measure(&g, &Coloring::Constant(1.0), &q, &window, &grid).unwrap();
        assert_eq!(m.counts.len(), 1);
        assert_eq!(m.mass(&PatternKey::from_values(&[1.0; 4])), 1.0);

        let omega = Coloring::iid(ColorSet::bernoulli(0.5).unwrap(), 3);
        let m = grid_empirical_measure(&g, &omega, &q, &window, &grid).unwrap();
        assert!((m.as_table().total() - 1.0).abs() < 1e-15);

        let overlapping = vec![g.identity(), g.element(&[1, 0]).unwrap()];
        assert!(grid_empirical_measure(&g, &omega, &q, &window, &overlapping).is_err());
        let escaping = vec![g.element(&[7, 7]).unwrap()];
        assert!(grid_empirical_measure(&g, &omega, &q, &window, &escaping).is_err());
    }

    #[test]
    fn dependent_coloring_is_pure_and_respects_marginals() {
        let g = z(2);
        let omega = Coloring::dependent(ColorSet::interval(0.0, 1.0).unwrap(), 5, 2).unwrap();
        let q = cube(&g, 60).unwrap();
        let values: Vec<f64> = q.iter().map(|&v| omega.color(v)).collect();
        assert_eq!(
            values,
            q.iter().map(|&v| omega.color(v)).collect::<Vec<_>>()
        );
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((mean - 0.5).abs() < 0.03, "{mean}");
        assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn canonical_id_ignores_translation() {
        let g = z(2);
        let omega = Coloring::iid(ColorSet::bernoulli(0.5).unwrap(), 1);
        let p = restrict(&omega, &cube(&g, 2).unwrap());
        let t = g.element(&[5, -3]).unwrap();
        assert_eq!(p.canonical_id(&g), p.shift(&g, t).canonical_id(&g));
        let h = Group::heisenberg();
        let hp = Pattern::from_pairs([
            (h.element(&[1, 2, 3]).unwrap(), 1.0),
            (h.element(&[2, 2, 3]).unwrap(), 0.0),
        ])
        .unwrap();
        let s = h.element(&[-4, 7, 2]).unwrap();
        assert_eq!(hp.canonical_id(&h), hp.shift(&h, s).canonical_id(&h));
        assert_eq!(hp.canonical(&h).domain().min(), Some(h.identity()));
    }
}
