//! Almost additive fields, boundary terms, pattern averages and the error
//! bounds of the finite-alphabet and monotone ergodic theorems.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coloring::{
    total_variation, ColorSource, FrequencyTable, Overwrite, PatternKey, Shifted,
};
use crate::error::{usage, Error, Result};
use crate::group::{Group, GroupElement, SiteSet};
use crate::hamiltonian::ModelSpec;
use crate::spectral::{counting_function, eigenvalues, StepFunction};

/// Absolute slack granted to floating-point comparisons of bound checks.
pub const BOUND_SLACK: f64 = 1e-12;

/// Relative energy shift absorbing eigenvalue rounding when two counting
/// functions are compared for monotonicity.
pub const MONOTONE_ENERGY_SLACK: f64 = 1e-10;

/// A translation-invariant, subadditive set function with `b(Λ) ≤ D_b |Λ|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryTerm {
    Zero,
    /// `factor · |∂^radius Λ|`, with declared bound `D_b`.
    Shell {
        factor: f64,
        radius: f64,
        bound: f64,
    },
}

impl BoundaryTerm {
    pub fn eval(&self, group: &Group, set: &SiteSet) -> Result<f64> {
        match *self {
            BoundaryTerm::Zero => Ok(0.0),
            BoundaryTerm::Shell { factor, radius, .. } => {
                Ok(factor * group.r_boundary(set, radius)?.len() as f64)
            }
        }
    }

    /// The declared `D_b`.
    pub fn bound(&self) -> f64 {
        match *self {
            BoundaryTerm::Zero => 0.0,
            BoundaryTerm::Shell { bound, .. } => bound,
        }
    }
}

/// `b(Λ) = 4|∂¹Λ|` with `D_b = 4(|S| + 1)`, which is `8d + 4` on `Z^d`.
pub fn default_eig_boundary_term(group: &Group) -> BoundaryTerm {
    BoundaryTerm::Shell {
        factor: 4.0,
        radius: 1.0,
        bound: 4.0 * (group.degree() as f64 + 1.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotonicity {
    /// Raising a color never increases the field pointwise.
    Nonincreasing,
    Nondecreasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FieldFlags {
    pub local: bool,
    pub equivariant: bool,
    pub monotone: Option<Monotonicity>,
}

/// A map `(Λ, ω) ↦ F(Λ, ω)` into right-continuous step functions.
pub trait Field: Sync {
    fn name(&self) -> String;
    fn evaluate(
        &self,
        group: &Group,
        lambda: &SiteSet,
        omega: &dyn ColorSource,
    ) -> Result<StepFunction>;
    /// Declared `C_F ≥ ‖F(Λ)‖ / |Λ|`.
    fn bound(&self) -> f64;
    fn boundary(&self, group: &Group) -> BoundaryTerm;
    fn flags(&self) -> FieldFlags;
}

/// Eigenvalue counting function of a model Hamiltonian on `Λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenvalueCounting {
    pub model: ModelSpec,
}

impl Field for EigenvalueCounting {
    fn name(&self) -> String {
        "eigenvalue-counting".into()
    }

    fn evaluate(
        &self,
        group: &Group,
        lambda: &SiteSet,
        omega: &dyn ColorSource,
    ) -> Result<StepFunction> {
        if lambda.is_empty() {
            return Ok(StepFunction::constant(0.0));
        }
        let m = self.model.matrix(group, &omega, lambda)?;
        Ok(counting_function(&eigenvalues(&m)?))
    }

    fn bound(&self) -> f64 {
        1.0
    }

    fn boundary(&self, group: &Group) -> BoundaryTerm {
        default_eig_boundary_term(group)
    }

    fn flags(&self) -> FieldFlags {
        FieldFlags {
            local: true,
            equivariant: true,
            monotone: Some(Monotonicity::Nonincreasing),
        }
    }
}

/// `f(Λ, ω)(E) = #{v ∈ Λ : ω_v ≤ E}`; exactly additive.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PotentialThreshold;

impl Field for PotentialThreshold {
    fn name(&self) -> String {
        "potential-threshold".into()
    }

    fn evaluate(
        &self,
        _group: &Group,
        lambda: &SiteSet,
        omega: &dyn ColorSource,
    ) -> Result<StepFunction> {
        let colors: Vec<f64> = lambda.iter().map(|&v| omega.color(v)).collect();
        if colors.iter().any(|c| !c.is_finite()) {
            return usage("colors outside the pattern domain were read");
        }
        Ok(counting_function(&colors))
    }

    fn bound(&self) -> f64 {
        1.0
    }

    fn boundary(&self, _group: &Group) -> BoundaryTerm {
        BoundaryTerm::Zero
    }

    fn flags(&self) -> FieldFlags {
        FieldFlags {
            local: true,
            equivariant: true,
            monotone: Some(Monotonicity::Nonincreasing),
        }
    }
}

/// Evaluates `F(Λ, ω)` and asserts the declared bound `‖F(Λ)‖ ≤ C_F |Λ|`.
pub fn evaluate_checked(
    field: &dyn Field,
    group: &Group,
    lambda: &SiteSet,
    omega: &dyn ColorSource,
) -> Result<StepFunction> {
    let f = field.evaluate(group, lambda, omega)?;
    let allowed = field.bound() * lambda.len() as f64;
    if f.sup() > allowed * (1.0 + BOUND_SLACK) + BOUND_SLACK {
        return Err(Error::Unsupported(format!(
            "{} exceeds its declared bound: ‖F‖ = {} > C_F·|Λ| = {allowed}",
            field.name(),
            f.sup()
        )));
    }
    Ok(f)
}

/// `F(Λ)/|Λ|`.
pub fn normalized(
    field: &dyn Field,
    group: &Group,
    lambda: &SiteSet,
    omega: &dyn ColorSource,
) -> Result<StepFunction> {
    if lambda.is_empty() {
        return usage("normalisation by an empty set");
    }
    Ok(evaluate_checked(field, group, lambda, omega)?.scale(1.0 / lambda.len() as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Additivity {
    /// `‖F(∪Λ_k) − Σ F(Λ_k)‖_∞`.
    pub defect: f64,
    /// `Σ b(Λ_k)`.
    pub budget: f64,
    pub holds: bool,
}

pub fn check_almost_additivity(
    field: &dyn Field,
    group: &Group,
    parts: &[SiteSet],
    omega: &dyn ColorSource,
) -> Result<Additivity> {
    let mut union: Vec<GroupElement> = Vec::new();
    for p in parts {
        union.extend(p.iter().copied());
    }
    let total: usize = parts.iter().map(SiteSet::len).sum();
    let union = SiteSet::new(union);
    if union.len() != total {
        return usage("parts must be pairwise disjoint");
    }
    let whole = evaluate_checked(field, group, &union, omega)?;
    let pieces: Vec<StepFunction> = parts
        .iter()
        .map(|p| evaluate_checked(field, group, p, omega))
        .collect::<Result<_>>()?;
    let mut terms: Vec<(f64, &StepFunction)> = vec![(1.0, &whole)];
    terms.extend(pieces.iter().map(|f| (-1.0, f)));
    let defect = StepFunction::weighted_sum(&terms).sup();
    let boundary = field.boundary(group);
    let budget = parts
        .iter()
        .map(|p| boundary.eval(group, p))
        .sum::<Result<f64>>()?;
    Ok(Additivity {
        defect,
        budget,
        holds: defect <= budget + BOUND_SLACK,
    })
}

/// Cache of `F̃(P) = F(dom P, P)` for patterns on a fixed window.
pub struct PatternFunction<'a> {
    field: &'a dyn Field,
    group: &'a Group,
    window: SiteSet,
    cache: BTreeMap<PatternKey, StepFunction>,
}

impl<'a> PatternFunction<'a> {
    pub fn new(field: &'a dyn Field, group: &'a Group, window: SiteSet) -> Result<Self> {
        if !field.flags().local {
            return usage(format!(
                "{} is not local; pattern functions are undefined",
                field.name()
            ));
        }
        if window.is_empty() {
            return usage("pattern window must be nonempty");
        }
        Ok(PatternFunction {
            field,
            group,
            window,
            cache: BTreeMap::new(),
        })
    }

    pub fn window(&self) -> &SiteSet {
        &self.window
    }

    pub fn get(&mut self, key: &PatternKey) -> Result<&StepFunction> {
        if !self.cache.contains_key(key) {
            // Sites outside the domain read as NaN, so a field that looks
            // beyond Λ fails instead of returning a plausible value.
            let pattern = key.to_pattern(&self.window);
            let value =
                evaluate_checked(self.field, self.group, &self.window, &pattern).map_err(|e| {
                    match e {
                        Error::Usage(msg) => {
                            Error::Usage(format!("field read outside its pattern: {msg}"))
                        }
                        other => other,
                    }
                })?;
            self.cache.insert(key.clone(), value);
        }
        Ok(&self.cache[key])
    }

    /// `Σ_P ν_P F̃(P) / |Λ_L|`.
    pub fn average(&mut self, table: &FrequencyTable) -> Result<StepFunction> {
        if table.window != self.window {
            return usage("frequency table is over a different window");
        }
        if table.frequencies.values().any(|&v| v < 0.0) {
            return usage("frequencies must be nonnegative");
        }
        for key in table.frequencies.keys() {
            self.get(key)?;
        }
        let n = self.window.len() as f64;
        let terms: Vec<(f64, &StepFunction)> = table
            .frequencies
            .iter()
            .map(|(k, &nu)| (nu / n, &self.cache[k]))
            .collect();
        Ok(StepFunction::weighted_sum(&terms))
    }
}

pub fn pattern_average(
    field: &dyn Field,
    group: &Group,
    table: &FrequencyTable,
    window: &SiteSet,
) -> Result<StepFunction> {
    PatternFunction::new(field, group, window.clone())?.average(table)
}

/// One evaluation of the finite-alphabet error bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub j: u64,
    pub l: u64,
    /// `‖F(Q_j)/|Q_j| − Σ_P ν_P F̃(P)/|Λ_L|‖`.
    pub lhs: f64,
    /// `b(Λ_L)/|Λ_L|`, `(C_F + D_b)|∂^r Q_j|/|Q_j|`, `C_F Σ_P |ν̂_P − ν_P|`.
    pub terms: [f64; 3],
    pub rhs: f64,
    pub holds: bool,
    /// Radius `r` of the shell term.
    pub shell_radius: f64,
    /// True when a zero diameter was replaced by radius 1.
    pub degenerate_shell: bool,
    /// `‖F̄ − Σ_P ν_P F̃(P)/|Λ_L|‖` against a supplied estimate of `F̄`.
    pub limit_gap: Option<f64>,
}

/// Everything the bound needs besides the shell radius.
pub struct BoundInputs<'a> {
    pub j: u64,
    pub l: u64,
    pub q: &'a SiteSet,
    /// `F(Q_j)/|Q_j|`.
    pub value: &'a StepFunction,
    pub empirical: &'a FrequencyTable,
    pub limit: &'a FrequencyTable,
    /// Estimate of the limit `F̄`, if available.
    pub reference: Option<&'a StepFunction>,
}

fn error_bound(
    patterns: &mut PatternFunction<'_>,
    inputs: &BoundInputs<'_>,
    radius: f64,
    degenerate_shell: bool,
) -> Result<BoundCheck> {
    let field = patterns.field;
    let group = patterns.group;
    let window = patterns.window.clone();
    if inputs.empirical.window != window || inputs.limit.window != window {
        return usage("frequency tables must share the pattern window");
    }
    let average = patterns.average(inputs.limit)?;
    let boundary = field.boundary(group);
    let c_f = field.bound();
    let term1 = boundary.eval(group, &window)? / window.len() as f64;
    let term2 = (c_f + boundary.bound()) * group.folner_ratio(inputs.q, radius)?;
    let term3 = c_f * total_variation(inputs.empirical, inputs.limit).l1;
    let lhs = StepFunction::sup_norm(inputs.value, &average);
    let rhs = term1 + term2 + term3;
    Ok(BoundCheck {
        j: inputs.j,
        l: inputs.l,
        lhs,
        terms: [term1, term2, term3],
        rhs,
        holds: lhs <= rhs + BOUND_SLACK,
        shell_radius: radius,
        degenerate_shell,
        limit_gap: inputs
            .reference
            .map(|r| StepFunction::sup_norm(r, &average)),
    })
}

/// The `Z^d` bound with shell radius `L`.
pub fn error_bound_lmv(
    patterns: &mut PatternFunction<'_>,
    inputs: &BoundInputs<'_>,
) -> Result<BoundCheck> {
    if inputs.l == 0 {
        return usage("pattern window side must be positive");
    }
    error_bound(patterns, inputs, inputs.l as f64, false)
}

/// The amenable-group bound with shell radius `diam(Λ_L)`; a diameter of 0
/// is replaced by radius 1.
pub fn error_bound_amenable(
    patterns: &mut PatternFunction<'_>,
    inputs: &BoundInputs<'_>,
) -> Result<BoundCheck> {
    let diam = patterns.group.diameter(&patterns.window.clone())?;
    error_bound(patterns, inputs, diam.max(1) as f64, diam == 0)
}

/// Rows of bound checks with their step-function values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxReport {
    pub field: String,
    pub rows: Vec<BoundCheck>,
}

impl ApproxReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    /// One row per `(j, L)`: `j,L,lhs,term1,term2,term3,rhs,pass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,L,lhs,term1,term2,term3,rhs,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.j, r.l, r.lhs, r.terms[0], r.terms[1], r.terms[2], r.rhs, r.holds
            );
        }
        out
    }
}

/// `F(Q_j)/|Q_j|` along a sequence, with consecutive sup-norm gaps.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermodynamicSequence {
    pub values: Vec<StepFunction>,
    pub gaps: Vec<f64>,
}

pub fn thermodynamic_sequence(
    field: &dyn Field,
    group: &Group,
    omega: &dyn ColorSource,
    sets: &[SiteSet],
) -> Result<ThermodynamicSequence> {
    let values: Vec<StepFunction> = sets
        .iter()
        .map(|q| normalized(field, group, q, omega))
        .collect::<Result<_>>()?;
    let gaps = values
        .windows(2)
        .map(|w| StepFunction::sup_norm(&w[0], &w[1]))
        .collect();
    Ok(ThermodynamicSequence { values, gaps })
}

/// Parameters of the monotone-field bound on `Z^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneParams {
    pub d: usize,
    pub c_f: f64,
    pub d_b: f64,
    pub l: f64,
    pub r: f64,
    pub j: f64,
    pub kappa: f64,
}

/// `2^{2d+1}(((2C_f + D_b)L^d + D_b r^d)/(j − 2L) + (2(C_f + D_b)r^d + 3D_b r^d)/(L − 2r))`.
pub fn monotone_bound(p: &MonotoneParams) -> Result<f64> {
    if p.d == 0 || !(p.r > 0.0) {
        return usage("monotone bound needs d ≥ 1 and r > 0");
    }
    if !(p.l > 2.0 * p.r) {
        return usage(format!(
            "monotone bound needs L > 2r, got L = {}, r = {}",
            p.l, p.r
        ));
    }
    if !(p.j > 2.0 * p.l) {
        return usage(format!(
            "monotone bound needs j > 2L, got j = {}, L = {}",
            p.j, p.l
        ));
    }
    let d = p.d as i32;
    let (ld, rd) = (p.l.powi(d), p.r.powi(d));
    let first = ((2.0 * p.c_f + p.d_b) * ld + p.d_b * rd) / (p.j - 2.0 * p.l);
    let second = (2.0 * (p.c_f + p.d_b) * rd + 3.0 * p.d_b * rd) / (p.l - 2.0 * p.r);
    Ok(2f64.powi(2 * d + 1) * (first + second))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub params: MonotoneParams,
    pub deterministic: f64,
    pub threshold: f64,
    /// Per realisation `‖f(Λ_j)/|Λ_j| − f(Λ_ref)/|Λ_ref|‖`.
    pub gaps: Vec<f64>,
    pub median: f64,
    pub max: f64,
    pub violations: usize,
}

/// Compares `f(Λ_j)/|Λ_j|` with the largest-volume value of the same
/// realisation, against the deterministic bound plus `κ`.
pub fn monotone_field_diagnostics(
    field: &dyn Field,
    group: &Group,
    omegas: &[&dyn ColorSource],
    small: &SiteSet,
    reference: &SiteSet,
    params: MonotoneParams,
) -> Result<MonotoneReport> {
    if field.flags().monotone.is_none() {
        return usage(format!("{} is not declared monotone", field.name()));
    }
    let deterministic = monotone_bound(&params)?;
    let threshold = deterministic + params.kappa;
    let mut gaps = Vec::with_capacity(omegas.len());
    for omega in omegas {
        let a = normalized(field, group, small, *omega)?;
        let b = normalized(field, group, reference, *omega)?;
        gaps.push(StepFunction::sup_norm(&a, &b));
    }
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted.get(sorted.len() / 2).copied().unwrap_or(0.0);
    let max = sorted.last().copied().unwrap_or(0.0);
    let violations = gaps.iter().filter(|&&g| g > threshold).count();
    Ok(MonotoneReport {
        params,
        deterministic,
        threshold,
        gaps,
        median,
        max,
        violations,
    })
}

/// Raises the color at `site` to `raised` and checks the declared direction
/// of monotonicity pointwise over all energies, up to an energy shift of
/// [`MONOTONE_ENERGY_SLACK`] times the spectral scale.
pub fn monotonicity_spot_check(
    field: &dyn Field,
    group: &Group,
    omega: &dyn ColorSource,
    lambda: &SiteSet,
    site: GroupElement,
    raised: f64,
) -> Result<bool> {
    let Some(direction) = field.flags().monotone else {
        return usage(format!("{} is not declared monotone", field.name()));
    };
    if raised < omega.color(site) {
        return usage("the new color must not be lower than the old one");
    }
    let before = field.evaluate(group, lambda, omega)?;
    let after = field.evaluate(
        group,
        lambda,
        &Overwrite {
            base: omega,
            site,
            value: raised,
        },
    )?;
    // compare with `before(E ± η)` so that breakpoints moved by rounding
    // alone do not count as violations
    let scale = before
        .breakpoints()
        .iter()
        .chain(after.breakpoints())
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let eta = match direction {
        Monotonicity::Nonincreasing => -MONOTONE_ENERGY_SLACK * scale,
        Monotonicity::Nondecreasing => MONOTONE_ENERGY_SLACK * scale,
    };
    let moved = StepFunction::new(
        before.breakpoints().iter().map(|x| x + eta).collect(),
        before.values().to_vec(),
    )?;
    let diff = StepFunction::linear_combine(1.0, &after, -1.0, &moved);
    Ok(match direction {
        Monotonicity::Nonincreasing => diff.values().iter().all(|&v| v <= 0.0),
        Monotonicity::Nondecreasing => diff.values().iter().all(|&v| v >= 0.0),
    })
}

/// `F(τ̃_g Λ, ω) = F(Λ, τ_g ω)`, compared exactly.
pub fn equivariance_check(
    field: &dyn Field,
    group: &Group,
    omega: &dyn ColorSource,
    lambda: &SiteSet,
    g: GroupElement,
) -> Result<bool> {
    let moved: SiteSet = lambda.iter().map(|&v| group.act(g, v)).collect();
    let shifted = Shifted {
        base: omega,
        group,
        by: g,
    };
    Ok(field.evaluate(group, &moved, omega)? == field.evaluate(group, lambda, &shifted)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::{exact_table, pattern_table, restrict, ColorSet, Coloring};
    use crate::group::cube;

    fn anderson(p: f64) -> EigenvalueCounting {
        EigenvalueCounting {
            model: ModelSpec::anderson(ColorSet::bernoulli(p).unwrap()),
        }
    }

    #[test]
    fn boundary_term_examples() {
        let z2 = Group::lattice(2).unwrap();
        let b = default_eig_boundary_term(&z2);
        assert_eq!(b.eval(&z2, &cube(&z2, 3).unwrap()).unwrap(), 80.0);
        assert_eq!(b.bound(), 20.0);
        let z1 = Group::lattice(1).unwrap();
        let single = SiteSet::from_iter([z1.identity()]);
        assert_eq!(
            default_eig_boundary_term(&z1).eval(&z1, &single).unwrap(),
            12.0
        );
    }

    #[test]
    fn threshold_field_is_additive() {
        let g = Group::lattice(2).unwrap();
        let omega = Coloring::iid(ColorSet::interval(0.0, 1.0).unwrap(), 2);
        let q = cube(&g, 6).unwrap();
        let (left, right): (Vec<_>, Vec<_>) = q.iter().partition(|v| v.coord(0) < 2);
        let parts = [SiteSet::new(left), SiteSet::new(right)];
        let a = check_almost_additivity(&PotentialThreshold, &g, &parts, &omega).unwrap();
        assert_eq!(a.defect, 0.0);
        let single =
            check_almost_additivity(&anderson(0.5), &g, std::slice::from_ref(&q), &omega).unwrap();
        assert_eq!(single.defect, 0.0);
        let overlapping = [q.clone(), cube(&g, 2).unwrap()];
        assert!(check_almost_additivity(&PotentialThreshold, &g, &overlapping, &omega).is_err());
    }

    #[test]
    fn counting_field_halves() {
        let g = Group::lattice(2).unwrap();
        let omega = Coloring::iid(ColorSet::bernoulli(0.5).unwrap(), 8);
        let q = cube(&g, 8).unwrap();
        let (left, right): (Vec<_>, Vec<_>) = q.iter().partition(|v| v.coord(1) < 4);
        let a = check_almost_additivity(
            &anderson(0.5),
            &g,
            &[SiteSet::new(left), SiteSet::new(right)],
            &omega,
        )
        .unwrap();
        assert!(a.holds && a.defect > 0.0, "{a:?}");
    }

    #[test]
    fn pattern_average_examples() {
        let g = Group::lattice(1).unwrap();
        let window = SiteSet::from_iter([g.identity()]);
        let field = anderson(0.5);
        let table = exact_table(&window, &ColorSet::bernoulli(0.5).unwrap(), 16).unwrap();
        let avg = pattern_average(&field, &g, &table, &window).unwrap();
        let expected = StepFunction::new(vec![2.0, 3.0], vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(avg, expected);

        let one = ColorSet::finite(vec![0.3], vec![1.0]).unwrap();
        let w3 = cube(&g, 3).unwrap();
        let t = exact_table(&w3, &one, 16).unwrap();
        let direct = normalized(&field, &g, &w3, &Coloring::Constant(0.3)).unwrap();
        assert_eq!(pattern_average(&field, &g, &t, &w3).unwrap(), direct);
    }

    struct Peeking;

    impl Field for Peeking {
        fn name(&self) -> String {
            "peeking".into()
        }
        fn evaluate(
            &self,
            group: &Group,
            lambda: &SiteSet,
            omega: &dyn ColorSource,
        ) -> Result<StepFunction> {
            let outside: Vec<_> = lambda
                .iter()
                .map(|&v| group.mul(v, group.generators()[0]))
                .collect();
            PotentialThreshold.evaluate(group, &SiteSet::new(outside), omega)
        }
        fn bound(&self) -> f64 {
            1.0
        }
        fn boundary(&self, _: &Group) -> BoundaryTerm {
            BoundaryTerm::Zero
        }
        fn flags(&self) -> FieldFlags {
            FieldFlags {
                local: true,
                equivariant: true,
                monotone: None,
            }
        }
    }

    #[test]
    fn reading_outside_the_pattern_is_caught() {
        let g = Group::lattice(1).unwrap();
        let window = cube(&g, 2).unwrap();
        let table = exact_table(&window, &ColorSet::bernoulli(0.5).unwrap(), 16).unwrap();
        assert!(matches!(
            pattern_average(&Peeking, &g, &table, &window),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn additive_field_with_exact_frequencies() {
        let g = Group::lattice(1).unwrap();
        let colors = ColorSet::bernoulli(0.5).unwrap();
        let omega = Coloring::iid(colors.clone(), 1);
        let q = cube(&g, 64).unwrap();
        let window = cube(&g, 2).unwrap();
        let limit = exact_table(&window, &colors, 16).unwrap();
        let value = normalized(&PotentialThreshold, &g, &q, &omega).unwrap();
        let mut pf = PatternFunction::new(&PotentialThreshold, &g, window.clone()).unwrap();
        let inputs = BoundInputs {
            j: 64,
            l: 2,
            q: &q,
            value: &value,
            empirical: &limit,
            limit: &limit,
            reference: None,
        };
        let check = error_bound_lmv(&mut pf, &inputs).unwrap();
        assert_eq!(check.terms[0], 0.0);
        assert_eq!(check.terms[2], 0.0);
        let _ = pattern_table(&g, &omega, &q, &window).unwrap();
        assert_eq!(check.holds, check.lhs <= check.terms[1] + BOUND_SLACK);
    }

    #[test]
    fn degenerate_windows() {
        let g = Group::lattice(1).unwrap();
        let colors = ColorSet::bernoulli(0.5).unwrap();
        let omega = Coloring::iid(colors.clone(), 3);
        let field = anderson(0.5);
        let q = cube(&g, 4).unwrap();
        let value = normalized(&field, &g, &q, &omega).unwrap();
        let window = SiteSet::from_iter([g.identity()]);
        let emp = pattern_table(&g, &omega, &q, &window).unwrap();
        let limit = exact_table(&window, &colors, 16).unwrap();
        let mut pf = PatternFunction::new(&field, &g, window).unwrap();
        let inputs = BoundInputs {
            j: 4,
            l: 1,
            q: &q,
            value: &value,
            empirical: &emp,
            limit: &limit,
            reference: None,
        };
        let amenable = error_bound_amenable(&mut pf, &inputs).unwrap();
        assert!(amenable.degenerate_shell);
        assert_eq!(amenable.shell_radius, 1.0);
        assert!(amenable.holds);

        let big = cube(&g, 6).unwrap();
        let emp = pattern_table(&g, &omega, &q, &big).unwrap();
        let limit = exact_table(&big, &colors, 1 << 8).unwrap();
        let mut pf = PatternFunction::new(&field, &g, big).unwrap();
        let inputs = BoundInputs {
            j: 4,
            l: 6,
            q: &q,
            value: &value,
            empirical: &emp,
            limit: &limit,
            reference: None,
        };
        let check = error_bound_lmv(&mut pf, &inputs).unwrap();
        assert!(check.holds && check.rhs.is_finite());
    }

    #[test]
    fn monotone_bound_arithmetic() {
        let p = MonotoneParams {
            d: 1,
            c_f: 1.0,
            d_b: 12.0,
            l: 16.0,
            r: 1.0,
            j: 128.0,
            kappa: 0.0,
        };
        let expected =
            8.0 * ((2.0 + 12.0) * 16.0 + 12.0) / 96.0 + 8.0 * (2.0 * 13.0 + 12.0 * 3.0) / 14.0;
        assert!((monotone_bound(&p).unwrap() - expected).abs() < 1e-12);
        assert!(monotone_bound(&MonotoneParams { l: 2.0, ..p }).is_err());
        assert!(monotone_bound(&MonotoneParams { j: 32.0, ..p }).is_err());
    }

    #[test]
    fn monotone_diagnostics_large_kappa_passes() {
        let g = Group::lattice(1).unwrap();
        let colors = ColorSet::interval(0.0, 1.0).unwrap();
        let omegas: Vec<Coloring> = (0..3).map(|s| Coloring::iid(colors.clone(), s)).collect();
        let refs: Vec<&dyn ColorSource> = omegas.iter().map(|o| o as &dyn ColorSource).collect();
        let params = MonotoneParams {
            d: 1,
            c_f: 1.0,
            d_b: 12.0,
            l: 4.0,
            r: 1.0,
            j: 16.0,
            kappa: 1e9,
        };
        let field = EigenvalueCounting {
            model: ModelSpec::anderson(colors),
        };
        let report = monotone_field_diagnostics(
            &field,
            &g,
            &refs,
            &cube(&g, 16).unwrap(),
            &cube(&g, 64).unwrap(),
            params,
        )
        .unwrap();
        assert_eq!(report.violations, 0);
        assert_eq!(report.gaps.len(), 3);
    }

    /// The counting function declared with the wrong direction.
    struct Inverted(EigenvalueCounting);

    impl Field for Inverted {
        fn name(&self) -> String {
            "inverted".into()
        }
        fn evaluate(
            &self,
            group: &Group,
            lambda: &SiteSet,
            omega: &dyn ColorSource,
        ) -> Result<StepFunction> {
            self.0.evaluate(group, lambda, omega)
        }
        fn bound(&self) -> f64 {
            1.0
        }
        fn boundary(&self, group: &Group) -> BoundaryTerm {
            self.0.boundary(group)
        }
        fn flags(&self) -> FieldFlags {
            FieldFlags {
                monotone: Some(Monotonicity::Nondecreasing),
                ..self.0.flags()
            }
        }
    }

    #[test]
    fn spot_check_ignores_rounding_of_distant_eigenvalues() {
        // on a long chain most eigenvalues move by a few ulps only
        let g = Group::lattice(1).unwrap();
        let potential = ColorSet::interval(0.0, 1.0).unwrap();
        let field = EigenvalueCounting {
            model: ModelSpec::anderson(potential.clone()),
        };
        let omega = Coloring::iid(potential, 5);
        let q = cube(&g, 512).unwrap();
        for k in [0usize, 100, 311, 511] {
            let site = q.get(k);
            let raised = omega.color(site) + 0.3;
            assert!(monotonicity_spot_check(&field, &g, &omega, &q, site, raised).unwrap());
            assert!(!monotonicity_spot_check(
                &Inverted(field.clone()),
                &g,
                &omega,
                &q,
                site,
                raised
            )
            .unwrap());
        }
    }

    #[test]
    fn monotonicity_and_equivariance() {
        let g = Group::lattice(2).unwrap();
        let omega = Coloring::iid(ColorSet::interval(0.0, 1.0).unwrap(), 5);
        let q = cube(&g, 5).unwrap();
        let field = EigenvalueCounting {
            model: ModelSpec::anderson(ColorSet::interval(0.0, 1.0).unwrap()),
        };
        let site = g.element(&[2, 2]).unwrap();
        assert!(monotonicity_spot_check(&field, &g, &omega, &q, site, 1.0).unwrap());
        let t = g.element(&[3, -7]).unwrap();
        assert!(equivariance_check(&field, &g, &omega, &q, t).unwrap());

        let h = Group::heisenberg();
        let box_ = crate::group::heisenberg_box(&h, 2, 2, 4).unwrap();
        let hom = Coloring::iid(ColorSet::bernoulli(0.5).unwrap(), 5);
        let hfield = anderson(0.5);
        let s = h.element(&[1, -2, 5]).unwrap();
        assert!(equivariance_check(&hfield, &h, &hom, &box_, s).unwrap());
        let p = restrict(&hom, &box_);
        assert_eq!(
            hfield.evaluate(&h, &box_, &p).unwrap(),
            hfield.evaluate(&h, &box_, &hom).unwrap()
        );
    }
}
