//! Empirical-process statistics: Kolmogorov–Smirnov distances, orthant
//! discrepancies, randomized monotone staircases and concentration curves.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{usage, Error, Result};
use crate::mix::mix;

/// A distribution on the real line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Finitely many atoms.
    Discrete {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl Distribution {
    pub fn uniform01() -> Self {
        Distribution::Uniform { lo: 0.0, hi: 1.0 }
    }

    pub fn standard_normal() -> Self {
        Distribution::Normal { mean: 0.0, sd: 1.0 }
    }

    /// Uniform weights on the given atoms.
    pub fn atoms(values: Vec<f64>) -> Result<Self> {
        let w = 1.0 / values.len().max(1) as f64;
        let d = Distribution::Discrete {
            weights: vec![w; values.len()],
            values,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Distribution::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => {
                Ok(())
            }
            Distribution::Normal { mean, sd }
                if mean.is_finite() && sd.is_finite() && *sd > 0.0 =>
            {
                Ok(())
            }
            Distribution::Discrete { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return usage("discrete distribution needs one weight per atom");
                }
                if values.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
                    return usage("atoms must be finite with nonnegative weights");
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return usage(format!("weights sum to {total}, expected 1"));
                }
                Ok(())
            }
            other => usage(format!("invalid distribution {other:?}")),
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Distribution::Discrete { .. })
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Distribution::Normal { mean, sd } => normal(*mean, *sd).cdf(x),
            Distribution::Discrete { values, weights } => values
                .iter()
                .zip(weights)
                .filter(|(v, _)| **v <= x)
                .map(|(_, w)| w)
                .sum::<f64>()
                .min(1.0),
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Distribution::Discrete { values, weights } => values
                .iter()
                .zip(weights)
                .filter(|(v, _)| **v < x)
                .map(|(_, w)| w)
                .sum::<f64>()
                .min(1.0),
            _ => self.cdf(x),
        }
    }

    /// Least `x` with `cdf(x) ≥ u`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Distribution::Uniform { lo, hi } => lo + u.clamp(0.0, 1.0) * (hi - lo),
            Distribution::Normal { mean, sd } => normal(*mean, *sd).inverse_cdf(u),
            Distribution::Discrete { values, weights } => {
                let mut atoms: Vec<(f64, f64)> = values
                    .iter()
                    .copied()
                    .zip(weights.iter().copied())
                    .collect();
                atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut acc = 0.0;
                for &(v, w) in &atoms {
                    acc += w;
                    if acc >= u {
                        return v;
                    }
                }
                atoms.last().expect("nonempty").0
            }
        }
    }
}

fn normal(mean: f64, sd: f64) -> Normal {
    Normal::new(mean, sd).expect("validated normal parameters")
}

/// Uniform draw in the open interval `(0, 1)`.
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// How sample vectors are generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleSpec {
    /// Independent coordinates with the given marginals.
    Product { marginals: Vec<Distribution> },
    /// `(X, −X)` with `X` drawn from `marginal`.
    Antithetic { marginal: Distribution },
}

impl SampleSpec {
    pub fn dim(&self) -> usize {
        match self {
            SampleSpec::Product { marginals } => marginals.len(),
            SampleSpec::Antithetic { .. } => 2,
        }
    }

    /// The law of the generated vectors.
    pub fn law(&self) -> Reference {
        match self {
            SampleSpec::Product { marginals } => Reference::Product(marginals.clone()),
            SampleSpec::Antithetic { marginal } => Reference::Antithetic(marginal.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SampleSpec::Product { marginals } if marginals.is_empty() => {
                usage("need at least one coordinate")
            }
            SampleSpec::Product { marginals } => {
                marginals.iter().try_for_each(Distribution::validate)
            }
            SampleSpec::Antithetic { marginal } => marginal.validate(),
        }
    }
}

/// `n` vectors of a fixed dimension `k`, stored row by row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    k: usize,
    data: Vec<f64>,
    pub seed: Option<u64>,
    pub descriptor: String,
}

impl Sample {
    pub fn new(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || !data.len().is_multiple_of(k) {
            return usage(format!(
                "sample of {} values does not split into vectors of length {k}",
                data.len()
            ));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return usage("sample entries must be finite");
        }
        Ok(Sample {
            k,
            data,
            seed: None,
            descriptor: String::from("explicit"),
        })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Sample::new(1, values)
    }

    /// `n` vectors whose `i`-th draw uses the uniform `mix(seed, i·k + c)`
    /// for coordinate `c`.
    pub fn draw(spec: &SampleSpec, n: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        let k = spec.dim();
        let mut data = Vec::with_capacity(n * k);
        for i in 0..n {
            let u = |c: usize| open_unit(mix(seed, (i * k + c) as u64));
            match spec {
                SampleSpec::Product { marginals } => {
                    data.extend(marginals.iter().enumerate().map(|(c, m)| m.quantile(u(c))));
                }
                SampleSpec::Antithetic { marginal } => {
                    let x = marginal.quantile(u(0));
                    data.extend([x, -x]);
                }
            }
        }
        let mut s = Sample::new(k, data)?;
        s.seed = Some(seed);
        s.descriptor = format!("{spec:?}");
        Ok(s)
    }

    /// The `n` points at the quantiles `i/(n+1)`, `i = 1..n`.
    pub fn quantile_grid(dist: &Distribution, n: usize) -> Result<Self> {
        dist.validate()?;
        let values = (1..=n)
            .map(|i| dist.quantile(i as f64 / (n + 1) as f64))
            .collect();
        let mut s = Sample::from_values(values)?;
        s.descriptor = format!("quantile grid of {dist:?}");
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.k)
    }

    fn column(&self, c: usize) -> Vec<f64> {
        self.points().map(|p| p[c]).collect()
    }
}

/// The exact `sup_E |F̂_n(E) − F(E)|`, attained at a sample point or as the
/// left limit there.
pub fn ks_statistic(sample: &Sample, cdf: &Distribution) -> Result<f64> {
    if sample.dim() != 1 {
        return usage("the KS statistic needs a one-dimensional sample");
    }
    if sample.is_empty() {
        return usage("empty sample");
    }
    let mut xs = sample.column(0);
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let below = i as f64 / n;
        while i < xs.len() && xs[i] == x {
            i += 1;
        }
        let upto = i as f64 / n;
        best = best
            .max((upto - cdf.cdf(x)).abs())
            .max((below - cdf.cdf_left(x)).abs());
    }
    Ok(best)
}

/// `sup |⟨g, P̂ − P⟩|` over monotone `g: ℝ → [−M, M]`, which is `2M·KS`.
pub fn monotone_discrepancy_1d(sample: &Sample, cdf: &Distribution, m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return usage(format!("bound M must be positive, got {m}"));
    }
    Ok(2.0 * m * ks_statistic(sample, cdf)?)
}

/// A reference law on `ℝ^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "marginals", rename_all = "kebab-case")]
pub enum Reference {
    /// Independent coordinates.
    Product(Vec<Distribution>),
    /// The law of `(X, −X)`; `X` must be continuous.
    Antithetic(Distribution),
}

impl Reference {
    pub fn dim(&self) -> usize {
        match self {
            Reference::Product(m) => m.len(),
            Reference::Antithetic(_) => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Reference::Product(m) if m.is_empty() => {
                usage("reference needs at least one coordinate")
            }
            Reference::Product(m) => m.iter().try_for_each(Distribution::validate),
            Reference::Antithetic(x) => {
                x.validate()?;
                if !x.is_continuous() {
                    return Err(Error::Unsupported(
                        "antithetic references need a continuous marginal".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Mass of a staircase set.
    pub fn mass(&self, s: &Staircase) -> Result<f64> {
        match self {
            Reference::Product(marginals) => product_mass(marginals, s),
            Reference::Antithetic(x) => Ok(antithetic_mass(x, s)),
        }
    }
}

/// A union of orthants anchored at `corners`: lower orthants `{v ≤ c}`
/// (down-set) or upper orthants `{v ≥ c}` (up-set), with strict inequalities
/// when `strict` is set. Coordinates may be infinite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Staircase {
    pub corners: Vec<Vec<f64>>,
    pub upper: bool,
    pub strict: bool,
}

impl Staircase {
    pub fn contains(&self, v: &[f64]) -> bool {
        self.corners.iter().any(|c| {
            c.iter()
                .zip(v)
                .all(|(&c, &x)| match (self.upper, self.strict) {
                    (false, false) => x <= c,
                    (false, true) => x < c,
                    (true, false) => x >= c,
                    (true, true) => x > c,
                })
        })
    }

    /// `P̂` of the set.
    pub fn empirical_mass(&self, sample: &Sample) -> f64 {
        sample.points().filter(|p| self.contains(p)).count() as f64 / sample.len() as f64
    }

    /// Corners not implied by another corner.
    fn reduced(&self) -> Vec<Vec<f64>> {
        let covers = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .all(|(&x, &y)| if self.upper { x <= y } else { x >= y })
        };
        let mut out: Vec<Vec<f64>> = Vec::new();
        for (i, c) in self.corners.iter().enumerate() {
            let dominated = self
                .corners
                .iter()
                .enumerate()
                .any(|(j, d)| j != i && covers(d, c) && (d != c || j < i));
            if !dominated {
                out.push(c.clone());
            }
        }
        out
    }
}

/// Largest number of corners handled by inclusion–exclusion in three or
/// more dimensions.
pub const MAX_INCLUSION_EXCLUSION_CORNERS: usize = 12;

fn product_mass(marginals: &[Distribution], s: &Staircase) -> Result<f64> {
    let k = marginals.len();
    if s.corners.iter().any(|c| c.len() != k) {
        return usage("staircase corners and reference differ in dimension");
    }
    // probability that coordinate j lies on the orthant side of c
    let side = |j: usize, c: f64| -> f64 {
        let m = &marginals[j];
        match (s.upper, s.strict) {
            (false, false) => m.cdf(c),
            (false, true) => m.cdf_left(c),
            (true, false) => 1.0 - m.cdf_left(c),
            (true, true) => 1.0 - m.cdf(c),
        }
    };
    let orthant = |c: &[f64]| {
        c.iter()
            .enumerate()
            .map(|(j, &x)| side(j, x))
            .product::<f64>()
    };
    let mut corners = s.reduced();
    match corners.len() {
        0 => return Ok(0.0),
        1 => return Ok(orthant(&corners[0])),
        _ => {}
    }
    if k == 1 {
        return Ok(corners.iter().map(|c| orthant(c)).fold(0.0, f64::max));
    }
    if k == 2 {
        // sweep the first axis away from the orthant apex: along it the
        // reduced corners are monotone in the second coordinate
        let sign = if s.upper { -1.0 } else { 1.0 };
        corners.sort_by(|a, b| (sign * a[0]).total_cmp(&(sign * b[0])));
        let mut mass = 0.0;
        let mut prev = 0.0;
        for c in &corners {
            let here = side(0, c[0]);
            mass += (here - prev) * side(1, c[1]);
            prev = here;
        }
        return Ok(mass);
    }
    if corners.len() > MAX_INCLUSION_EXCLUSION_CORNERS {
        return Err(Error::Unsupported(format!(
            "staircases in {k} dimensions are limited to {MAX_INCLUSION_EXCLUSION_CORNERS} corners, got {}",
            corners.len()
        )));
    }
    let m = corners.len();
    let mut mass = 0.0;
    for mask in 1u32..(1 << m) {
        let mut meet = vec![
            if s.upper {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
            k
        ];
        for (i, c) in corners.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for j in 0..k {
                    meet[j] = if s.upper {
                        meet[j].max(c[j])
                    } else {
                        meet[j].min(c[j])
                    };
                }
            }
        }
        let sign = if mask.count_ones() % 2 == 1 {
            1.0
        } else {
            -1.0
        };
        mass += sign * orthant(&meet);
    }
    Ok(mass.clamp(0.0, 1.0))
}

/// Mass under the law of `(X, −X)`: each orthant meets the anti-diagonal in
/// an interval of `X`.
fn antithetic_mass(x: &Distribution, s: &Staircase) -> f64 {
    let mut intervals: Vec<(f64, f64)> = s
        .corners
        .iter()
        .map(|c| {
            if s.upper {
                (c[0], -c[1])
            } else {
                (-c[1], c[0])
            }
        })
        .filter(|(lo, hi)| lo <= hi)
        .collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut mass = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (lo, hi) in intervals {
        current = match current {
            Some((a, b)) if lo <= b => Some((a, b.max(hi))),
            Some((a, b)) => {
                mass += x.cdf(b) - x.cdf(a);
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((a, b)) = current {
        mass += x.cdf(b) - x.cdf(a);
    }
    mass
}

/// Orthant discrepancy with the orthant attaining it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrthantDiscrepancy {
    pub value: f64,
    /// `{v ≤ E}` or, when `strict`, the left limit `{v < E}`.
    pub corner: Vec<f64>,
    pub strict: bool,
}

/// Largest grid the orthant statistic will store beyond two dimensions.
pub const MAX_ORTHANT_CELLS: u128 = 50_000_000;

/// `sup_E |P̂(V ≤ E) − P(V ≤ E)|` over lower orthants, computed exactly over
/// the grid of sample coordinates (each cell contributes its lower corner
/// and its upper left limit).
pub fn orthant_discrepancy(sample: &Sample, reference: &Reference) -> Result<OrthantDiscrepancy> {
    reference.validate()?;
    let Reference::Product(marginals) = reference else {
        return Err(Error::Unsupported(
            "orthant statistics need a product reference".into(),
        ));
    };
    let k = sample.dim();
    if marginals.len() != k {
        return usage(format!(
            "sample has dimension {k}, reference {}",
            marginals.len()
        ));
    }
    if sample.is_empty() {
        return usage("empty sample");
    }
    let n = sample.len();
    // per axis: −∞, distinct sample coordinates, +∞
    let grids: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let mut g = sample.column(c);
            g.sort_by(f64::total_cmp);
            g.dedup();
            let mut out = Vec::with_capacity(g.len() + 2);
            out.push(f64::NEG_INFINITY);
            out.extend(g);
            out.push(f64::INFINITY);
            out
        })
        .collect();
    let cells: u128 = grids.iter().map(|g| (g.len() - 1) as u128).product();
    if k > 2 && cells > MAX_ORTHANT_CELLS {
        return Err(Error::Resource(format!(
            "orthant grid has {cells} cells, limit {MAX_ORTHANT_CELLS}"
        )));
    }
    // per axis and grid cell: P at the lower corner and the left limit at the upper one
    let lows: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            grids[c][..grids[c].len() - 1]
                .iter()
                .map(|&x| {
                    if x == f64::NEG_INFINITY {
                        0.0
                    } else {
                        marginals[c].cdf(x)
                    }
                })
                .collect()
        })
        .collect();
    let highs: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            grids[c][1..]
                .iter()
                .map(|&x| {
                    if x == f64::INFINITY {
                        1.0
                    } else {
                        marginals[c].cdf_left(x)
                    }
                })
                .collect()
        })
        .collect();
    let ranks: Vec<Vec<usize>> = (0..k)
        .map(|c| {
            sample
                .points()
                .map(|p| {
                    grids[c]
                        .binary_search_by(|g| g.total_cmp(&p[c]))
                        .expect("coordinate in grid")
                })
                .collect()
        })
        .collect();
    let dims: Vec<usize> = grids.iter().map(|g| g.len() - 1).collect();
    let mut best = OrthantDiscrepancy {
        value: 0.0,
        corner: vec![f64::NEG_INFINITY; k],
        strict: false,
    };
    let mut consider = |emp: f64, index: &[usize]| {
        let lo: f64 = (0..k).map(|c| lows[c][index[c]]).product();
        let hi: f64 = (0..k).map(|c| highs[c][index[c]]).product();
        if (emp - lo).abs() > best.value {
            best = OrthantDiscrepancy {
                value: (emp - lo).abs(),
                corner: (0..k).map(|c| grids[c][index[c]]).collect(),
                strict: false,
            };
        }
        if (emp - hi).abs() > best.value {
            best = OrthantDiscrepancy {
                value: (emp - hi).abs(),
                corner: (0..k).map(|c| grids[c][index[c] + 1]).collect(),
                strict: true,
            };
        }
    };
    if k == 2 {
        // sweep the first axis, keeping counts per rank of the second
        let mut by_x: Vec<Vec<usize>> = vec![Vec::new(); dims[0]];
        for p in 0..n {
            by_x[ranks[0][p]].push(ranks[1][p]);
        }
        // cum[b] = n·P̂(V_1 ≤ x_a, V_2 ≤ y_b), updated one column at a time
        let mut cum = vec![0.0f64; dims[1]];
        let nf = n as f64;
        let (l1, h1) = (&lows[1], &highs[1]);
        // (value, a, b, strict)
        let mut top = (0.0f64, 0usize, 0usize, false);
        for (a, ys) in by_x.iter().enumerate() {
            for &b in ys {
                for c in &mut cum[b..] {
                    *c += 1.0;
                }
            }
            let (lx, hx) = (lows[0][a], highs[0][a]);
            let column_max = cum
                .iter()
                .zip(l1.iter().zip(h1))
                .map(|(&c, (&l, &h))| (c / nf - lx * l).abs().max((c / nf - hx * h).abs()))
                .fold(0.0f64, f64::max);
            if column_max > top.0 {
                for b in 0..cum.len() {
                    let lo = (cum[b] / nf - lx * l1[b]).abs();
                    let hi = (cum[b] / nf - hx * h1[b]).abs();
                    if lo.max(hi) == column_max {
                        top = if lo >= hi {
                            (lo, a, b, false)
                        } else {
                            (hi, a, b, true)
                        };
                        break;
                    }
                }
            }
        }
        if top.0 > 0.0 {
            let (value, a, b, strict) = top;
            let shift = usize::from(strict);
            best = OrthantDiscrepancy {
                value,
                corner: vec![grids[0][a + shift], grids[1][b + shift]],
                strict,
            };
        }
        return Ok(best);
    }
    // counts[cell] = sample points at the lower corner of the cell
    let mut counts = vec![0u32; cells as usize];
    for p in 0..n {
        let mut idx = 0usize;
        for c in 0..k {
            idx = idx * dims[c] + ranks[c][p];
        }
        counts[idx] += 1;
    }
    // prefix sums along every axis turn counts into P̂(V ≤ lower corner)
    let mut stride = 1usize;
    for c in (0..k).rev() {
        let len = dims[c];
        for base in 0..counts.len() {
            if !(base / stride).is_multiple_of(len) {
                counts[base] += counts[base - stride];
            }
        }
        stride *= len;
    }
    let mut index = vec![0usize; k];
    for (cell, &count) in counts.iter().enumerate() {
        let mut rest = cell;
        for c in (0..k).rev() {
            index[c] = rest % dims[c];
            rest /= dims[c];
        }
        consider(count as f64 / n as f64, &index);
    }
    Ok(best)
}

/// Best value of `|⟨g, P̂ − P⟩|` found over randomized monotone staircase
/// functions `g = M(1_S − 1_{S^c})`; a lower bound for the supremum over all
/// monotone `g` with values in `[−M, M]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneLowerBound {
    pub value: f64,
    pub trials: usize,
    /// Set when no trial was run and the value is 0 by convention.
    pub no_trials: bool,
    pub best: Option<Staircase>,
}

/// Trial 0 uses the up-set and the down-set generated by every sample point
/// (at most 12 points beyond two dimensions); with a product reference the
/// orthant attaining the orthant statistic is tried as well. The remaining
/// trials use random corner subsets, with random direction.
pub fn monotone_lower_bound(
    sample: &Sample,
    reference: &Reference,
    m: f64,
    trials: usize,
    seed: u64,
) -> Result<MonotoneLowerBound> {
    if !(m > 0.0) {
        return usage(format!("bound M must be positive, got {m}"));
    }
    reference.validate()?;
    if reference.dim() != sample.dim() {
        return usage("sample and reference differ in dimension");
    }
    if trials == 0 {
        return Ok(MonotoneLowerBound {
            value: 0.0,
            trials: 0,
            no_trials: true,
            best: None,
        });
    }
    if sample.is_empty() {
        return usage("empty sample");
    }
    let k = sample.dim();
    let n = sample.len();
    let cap = if k <= 2 {
        n
    } else {
        n.min(MAX_INCLUSION_EXCLUSION_CORNERS)
    };
    let mut candidates: Vec<Staircase> = Vec::new();
    let all: Vec<Vec<f64>> = sample.points().take(cap).map(<[f64]>::to_vec).collect();
    for upper in [true, false] {
        candidates.push(Staircase {
            corners: all.clone(),
            upper,
            strict: false,
        });
    }
    if matches!(reference, Reference::Product(_)) && (k <= 2 || n <= 64) {
        let best = orthant_discrepancy(sample, reference)?;
        candidates.push(Staircase {
            corners: vec![best.corner],
            upper: false,
            strict: best.strict,
        });
    }
    for t in 1..trials {
        let h = mix(seed, t as u64);
        let size = 1 + (mix(h, 0) % cap as u64) as usize;
        let upper = mix(h, 1) & 1 == 1;
        let corners = (0..size)
            .map(|i| {
                sample
                    .point((mix(h, 2 + i as u64) % n as u64) as usize)
                    .to_vec()
            })
            .collect();
        candidates.push(Staircase {
            corners,
            upper,
            strict: false,
        });
    }
    let scored: Vec<Result<f64>> = candidates
        .par_iter()
        .map(|s| Ok(2.0 * m * (s.empirical_mass(sample) - reference.mass(s)?).abs()))
        .collect();
    let mut best = (0.0, None);
    for (s, v) in candidates.into_iter().zip(scored) {
        let v = v?;
        if v > best.0 {
            best = (v, Some(s));
        }
    }
    Ok(MonotoneLowerBound {
        value: best.0,
        trials,
        no_trials: false,
        best: best.1,
    })
}

/// Statistics available to concentration experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Ks,
    Orthant,
}

impl Statistic {
    pub fn evaluate(self, sample: &Sample, reference: &Reference) -> Result<f64> {
        match self {
            Statistic::Ks => match reference {
                Reference::Product(m) if m.len() == 1 => ks_statistic(sample, &m[0]),
                _ => usage("the KS statistic needs a one-dimensional product reference"),
            },
            Statistic::Orthant => Ok(orthant_discrepancy(sample, reference)?.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub n: usize,
    pub kappa: f64,
    pub exceedances: usize,
    pub trials: usize,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationCurve {
    pub rows: Vec<ConcentrationRow>,
    /// Least-squares slope of `ln(frequency + 1/(2·trials))` against `n`.
    pub slope: Option<f64>,
}

impl ConcentrationCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,kappa,exceedances,trials,frequency\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.n, r.kappa, r.exceedances, r.trials, r.frequency
            );
        }
        out
    }
}

/// Exceedance frequencies of `{statistic > κ}` for each sample size, with
/// sample `s` of size `n` drawn from `mix(mix(seed, n), s)`.
pub fn concentration_curve(
    statistic: Statistic,
    spec: &SampleSpec,
    reference: &Reference,
    n_grid: &[usize],
    kappa: f64,
    seeds: usize,
    seed: u64,
) -> Result<ConcentrationCurve> {
    spec.validate()?;
    reference.validate()?;
    if seeds == 0 {
        return usage("need at least one seed");
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let base = mix(seed, n as u64);
        let values: Vec<Result<f64>> = (0..seeds)
            .into_par_iter()
            .map(|s| statistic.evaluate(&Sample::draw(spec, n, mix(base, s as u64))?, reference))
            .collect();
        let mut exceedances = 0;
        for v in values {
            if v? > kappa {
                exceedances += 1;
            }
        }
        rows.push(ConcentrationRow {
            n,
            kappa,
            exceedances,
            trials: seeds,
            frequency: exceedances as f64 / seeds as f64,
        });
    }
    let slope = if rows.len() >= 2 {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.n as f64, (r.frequency + 0.5 / r.trials as f64).ln()))
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    Ok(ConcentrationCurve { rows, slope })
}
