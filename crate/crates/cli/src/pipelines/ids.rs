//! Normalized counting functions along a Følner sequence, their Cauchy gaps
//! and the sup error against a reference curve.

use thermolim_core::ergodic::normalized;
use thermolim_core::spectral::StepFunction;

use super::{field, folner, model, realization_labels, split};
use crate::config::{ExperimentConfig, IdsReference};
use crate::error::CliError;
use crate::run::{make_tasks, num, run_tasks, PipelineOutput, Table};

pub const CURVE_HEADER: [&str; 2] = ["energy [hopping]", "ids [states/site]"];

/// `N(E) = arccos(1 − E/2)/π` on `[0, 4]`, 0 below and 1 above.
pub fn free_laplacian_ids(e: f64) -> f64 {
    if e <= 0.0 {
        0.0
    } else if e >= 4.0 {
        1.0
    } else {
        (1.0 - e / 2.0).acos() / std::f64::consts::PI
    }
}

/// `sup_E |f(E) − N(E)|` for the free-Laplacian `N`. On each piece `f` is
/// constant and `N` continuous and nondecreasing, so the piece endpoints
/// carry the supremum.
pub fn free_laplacian_sup_error(f: &StepFunction) -> f64 {
    let b = f.breakpoints();
    let mut best = 0.0f64;
    for (k, &v) in f.values().iter().enumerate() {
        let lo = if k == 0 {
            0.0
        } else {
            free_laplacian_ids(b[k - 1])
        };
        let hi = if k == b.len() {
            1.0
        } else {
            free_laplacian_ids(b[k])
        };
        best = best.max((v - lo).abs()).max((v - hi).abs());
    }
    best
}

/// Curve rows: the value below the first breakpoint on a `-inf` row, then
/// one row per breakpoint.
pub fn curve_table(f: &StepFunction) -> Table {
    let mut t = Table::new(&CURVE_HEADER);
    t.row(["-inf".to_string(), num(f.values()[0])]);
    for (e, v) in f.breakpoints().iter().zip(&f.values()[1..]) {
        t.row([num(*e), num(*v)]);
    }
    t
}

pub fn run(config: &ExperimentConfig) -> Result<PipelineOutput, CliError> {
    let (spec, group) = folner(config)?;
    let model = model(config)?;
    let field = field(config, model);
    let reference = config.ids.as_ref().map(|o| o.reference).unwrap_or_default();
    let curves = config.ids.as_ref().map_or(1, |o| o.curves);
    let mut indices = spec.indices.clone();
    indices.sort_unstable();
    indices.dedup();

    let tasks = make_tasks(config.seed, realization_labels(config.realizations));
    let results = run_tasks(config.workers, &tasks, |task| {
        let omega = model.coloring(&group, task.seed)?;
        indices
            .iter()
            .map(|&j| {
                let q = spec.set(&group, j)?;
                Ok((j, q.len(), normalized(field.as_ref(), &group, &q, &omega)?))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let (records, values) = split(results);

    let mut errors = Table::new(&[
        "realization [1]",
        "seed [1]",
        "index [1]",
        "sites [1]",
        "sup_error [states/site]",
    ]);
    let mut gaps = Table::new(&[
        "realization [1]",
        "seed [1]",
        "index [1]",
        "next_index [1]",
        "gap [states/site]",
    ]);
    let mut artifacts = Vec::new();
    for (task, curves_of_task) in &values {
        let largest = &curves_of_task.last().expect("indices are nonempty").2;
        for (j, size, f) in curves_of_task {
            let err = match reference {
                IdsReference::FreeLaplacian => free_laplacian_sup_error(f),
                IdsReference::LargestVolume => StepFunction::sup_norm(f, largest),
            };
            errors.row([
                task.index.to_string(),
                task.seed.to_string(),
                j.to_string(),
                size.to_string(),
                num(err),
            ]);
            if task.index < curves {
                artifacts.push(
                    curve_table(f).into_artifact(format!("ids_curve_r{}_i{}.csv", task.index, j)),
                );
            }
        }
        for w in curves_of_task.windows(2) {
            let gap = StepFunction::sup_norm(&w[0].2, &w[1].2);
            gaps.row([
                task.index.to_string(),
                task.seed.to_string(),
                w[0].0.to_string(),
                w[1].0.to_string(),
                num(gap),
            ]);
        }
    }
    artifacts.insert(0, errors.into_artifact("ids_errors.csv"));
    artifacts.insert(1, gaps.into_artifact("ids_gaps.csv"));
    Ok(PipelineOutput {
        tasks: records,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_ids_endpoints() {
        assert_eq!(free_laplacian_ids(-1.0), 0.0);
        assert_eq!(free_laplacian_ids(0.0), 0.0);
        assert!((free_laplacian_ids(2.0) - 0.5).abs() < 1e-15);
        assert_eq!(free_laplacian_ids(4.0), 1.0);
    }

    #[test]
    fn sup_error_of_constants() {
        assert_eq!(free_laplacian_sup_error(&StepFunction::constant(0.0)), 1.0);
        assert_eq!(free_laplacian_sup_error(&StepFunction::constant(0.5)), 0.5);
        // a single jump at E = 2 to 1: worst at E → 2⁻ (0.5) and E → ∞ (0)
        let f = StepFunction::new(vec![2.0], vec![0.0, 1.0]).unwrap();
        assert!((free_laplacian_sup_error(&f) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn curve_rows_start_at_minus_infinity() {
        let f = StepFunction::new(vec![1.0, 3.0], vec![0.0, 0.5, 1.0]).unwrap();
        let bytes = curve_table(&f).into_artifact("c.csv").bytes;
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "energy [hopping],ids [states/site]\n-inf,0\n1,0.5\n3,1\n"
        );
    }
}
