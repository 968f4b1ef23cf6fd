//! Error bounds for pattern-average approximations of `F(Q_j)/|Q_j|`. With
//! shell radii given, the monotone-field bound is evaluated instead.

use thermolim_core::coloring::{exact_table, pattern_table};
use thermolim_core::ergodic::{
    error_bound_amenable, error_bound_lmv, monotone_bound, normalized, BoundCheck, BoundInputs,
    MonotoneParams, PatternFunction,
};
use thermolim_core::spectral::StepFunction;
use thermolim_core::GroupKind;

use super::freq::MAX_LIMIT_PATTERNS;
use super::{field, folner, model, realization_labels, single_site_law, split, window};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::run::{make_tasks, num, run_tasks, Artifact, PipelineOutput, Table};

enum Rows {
    Pattern(Vec<(&'static str, BoundCheck)>),
    Monotone(Vec<MonotoneRow>),
}

struct MonotoneRow {
    j: u64,
    l: u64,
    r: f64,
    gap: f64,
    deterministic: f64,
    threshold: f64,
}

pub fn run(config: &ExperimentConfig) -> Result<PipelineOutput, CliError> {
    let (spec, group) = folner(config)?;
    let model = model(config)?;
    let field = field(config, model);
    let mut indices = spec.indices.clone();
    indices.sort_unstable();
    indices.dedup();
    let monotone = !config.params.r.is_empty();
    let law = single_site_law(model, &group);
    if !monotone && law.is_none() {
        return Err(CliError::Usage(
            "pattern bounds need a finite single-site law".into(),
        ));
    }
    let lattice = matches!(group.kind(), GroupKind::Lattice(_));

    let tasks = make_tasks(config.seed, realization_labels(config.realizations));
    let results = run_tasks(config.workers, &tasks, |task| {
        let omega = model.coloring(&group, task.seed)?;
        let sets = indices
            .iter()
            .map(|&j| spec.set(&group, j))
            .collect::<Result<Vec<_>, _>>()?;
        let values: Vec<StepFunction> = sets
            .iter()
            .map(|q| normalized(field.as_ref(), &group, q, &omega))
            .collect::<Result<_, _>>()?;
        if monotone {
            let reference = values.last().expect("indices are nonempty");
            let GroupKind::Lattice(d) = group.kind() else {
                return Err(CliError::Usage("the monotone bound runs on Z^d".into()));
            };
            let kappa = config.params.kappa.first().copied().unwrap_or(0.0);
            let mut rows = Vec::new();
            for (k, &j) in indices.iter().enumerate().take(indices.len() - 1) {
                let gap = StepFunction::sup_norm(&values[k], reference);
                for &l in &config.params.l {
                    for &r in &config.params.r {
                        let params = MonotoneParams {
                            d: d as usize,
                            c_f: field.bound(),
                            d_b: field.boundary(&group).bound(),
                            l: l as f64,
                            r,
                            j: j as f64,
                            kappa,
                        };
                        let deterministic = monotone_bound(&params)?;
                        rows.push(MonotoneRow {
                            j,
                            l,
                            r,
                            gap,
                            deterministic,
                            threshold: deterministic + kappa,
                        });
                    }
                }
            }
            return Ok(Rows::Monotone(rows));
        }
        let law = law.as_ref().expect("checked above");
        let mut rows = Vec::new();
        for &l in &config.params.l {
            let w = window(&group, l)?;
            let limit = exact_table(&w, law, MAX_LIMIT_PATTERNS)?;
            let mut pf = PatternFunction::new(field.as_ref(), &group, w.clone())?;
            for ((q, value), &j) in sets.iter().zip(&values).zip(&indices) {
                let empirical = pattern_table(&group, &omega, q, &w)?;
                let inputs = BoundInputs {
                    j,
                    l,
                    q,
                    value,
                    empirical: &empirical,
                    limit: &limit,
                    reference: None,
                };
                if lattice {
                    rows.push(("lattice", error_bound_lmv(&mut pf, &inputs)?));
                }
                rows.push(("amenable", error_bound_amenable(&mut pf, &inputs)?));
            }
        }
        Ok(Rows::Pattern(rows))
    })?;
    let (records, values) = split(results);

    let artifact: Artifact = if monotone {
        let mut t = Table::new(&[
            "j [1]",
            "L [1]",
            "r [1]",
            "realization [1]",
            "seed [1]",
            "gap [states/site]",
            "deterministic [states/site]",
            "threshold [states/site]",
            "violation [bool]",
        ]);
        for (task, rows) in &values {
            let Rows::Monotone(rows) = rows else {
                unreachable!()
            };
            for m in rows {
                t.row([
                    m.j.to_string(),
                    m.l.to_string(),
                    num(m.r),
                    task.index.to_string(),
                    task.seed.to_string(),
                    num(m.gap),
                    num(m.deterministic),
                    num(m.threshold),
                    (m.gap > m.threshold).to_string(),
                ]);
            }
        }
        t.into_artifact("monotone.csv")
    } else {
        let mut t = Table::new(&[
            "j [1]",
            "L [1]",
            "realization [1]",
            "seed [1]",
            "variant [1]",
            "shell_radius [1]",
            "lhs [states/site]",
            "term1 [states/site]",
            "term2 [states/site]",
            "term3 [states/site]",
            "rhs [states/site]",
            "pass [bool]",
        ]);
        for (task, rows) in &values {
            let Rows::Pattern(rows) = rows else {
                unreachable!()
            };
            for (variant, b) in rows {
                t.row([
                    b.j.to_string(),
                    b.l.to_string(),
                    task.index.to_string(),
                    task.seed.to_string(),
                    variant.to_string(),
                    num(b.shell_radius),
                    num(b.lhs),
                    num(b.terms[0]),
                    num(b.terms[1]),
                    num(b.terms[2]),
                    num(b.rhs),
                    b.holds.to_string(),
                ]);
            }
        }
        t.into_artifact("bounds.csv")
    };
    Ok(PipelineOutput {
        tasks: records,
        artifacts: vec![artifact],
    })
}
