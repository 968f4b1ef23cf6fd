//! One module per experiment kind. Each turns a checked configuration into
//! task records and in-memory artifacts.

pub mod bounds;
pub mod freq;
pub mod gc;
pub mod ids;
pub mod report;
pub mod tile;

use thermolim_core::ergodic::{EigenvalueCounting, Field, PotentialThreshold};
use thermolim_core::group::{cube, heisenberg_box, FolnerSpec};
use thermolim_core::hamiltonian::{ModelKind, ModelSpec};
use thermolim_core::{ColorSet, Group, GroupKind, SiteSet};

use crate::config::{ExperimentConfig, FieldName};
use crate::error::CliError;
use crate::run::{Task, TaskRecord};

pub(crate) fn folner(config: &ExperimentConfig) -> Result<(&FolnerSpec, Group), CliError> {
    let spec = config
        .folner
        .as_ref()
        .ok_or_else(|| CliError::Usage("missing Følner sequence".into()))?;
    Ok((spec, spec.build_group()?))
}

pub(crate) fn model(config: &ExperimentConfig) -> Result<&ModelSpec, CliError> {
    config
        .model
        .as_ref()
        .ok_or_else(|| CliError::Usage("missing model".into()))
}

pub(crate) fn field(config: &ExperimentConfig, model: &ModelSpec) -> Box<dyn Field> {
    match config.field {
        FieldName::EigenvalueCounting => Box::new(EigenvalueCounting {
            model: model.clone(),
        }),
        FieldName::PotentialThreshold => Box::new(PotentialThreshold),
    }
}

/// Pattern window of side `l`: `Λ_l` on `Z^d`, the `l × l × l` box on the
/// Heisenberg group.
pub fn window(group: &Group, l: u64) -> Result<SiteSet, CliError> {
    Ok(match group.kind() {
        GroupKind::Lattice(_) => cube(group, l)?,
        GroupKind::Heisenberg => heisenberg_box(group, l, l, l)?,
    })
}

/// The law of a single color when it has finitely many values.
pub fn single_site_law(model: &ModelSpec, group: &Group) -> Option<ColorSet> {
    let p = model.p.unwrap_or(0.0);
    match model.kind {
        ModelKind::Anderson => model.potential.clone().filter(ColorSet::is_finite),
        ModelKind::SitePercolation => ColorSet::bernoulli(p).ok(),
        ModelKind::EdgePercolation => ColorSet::edge_bits(group.forward_generators().len(), p).ok(),
        ModelKind::AndersonPercolation => {
            let Some(ColorSet::Finite { values, weights }) = &model.potential else {
                return None;
            };
            let mut v = values.clone();
            let mut w: Vec<f64> = weights.iter().map(|x| x * p).collect();
            v.push(model.alpha(group));
            w.push(1.0 - p);
            ColorSet::finite(v, w).ok()
        }
        ModelKind::VisiblePoints => None,
    }
}

/// Splits task results into records and values, dropping failed values.
pub(crate) fn split<T>(results: Vec<(TaskRecord, Option<T>)>) -> (Vec<TaskRecord>, Vec<(Task, T)>) {
    let mut records = Vec::with_capacity(results.len());
    let mut values = Vec::new();
    for (record, value) in results {
        if let Some(v) = value {
            values.push((
                Task {
                    index: record.index,
                    seed: record.seed,
                    label: record.label.clone(),
                },
                v,
            ));
        }
        records.push(record);
    }
    (records, values)
}

/// Labels `realization=0..n`.
pub(crate) fn realization_labels(n: usize) -> Vec<String> {
    (0..n).map(|r| format!("realization={r}")).collect()
}

/// File-name form of a number: `0.05` becomes `0p05`.
pub(crate) fn tag(x: f64) -> String {
    format!("{x}").replace('.', "p").replace('-', "m")
}
