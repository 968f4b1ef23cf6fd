//! Pattern frequency tables over Følner sets, with their distance to the
//! limiting product measure when it is known.

use std::collections::BTreeMap;

use thermolim_core::coloring::{
    exact_table, pattern_table, total_variation, FrequencyTable, PatternKey,
};
use thermolim_core::group::{FolnerFamily, FolnerSpec};
use thermolim_core::hamiltonian::{ModelKind, ModelSpec};
use thermolim_core::{Group, GroupKind, LatticeBox};

use super::{folner, model, realization_labels, single_site_law, split, window};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::run::{make_tasks, num, run_tasks, Artifact, PipelineOutput, Table};

/// Largest exact table built for comparison.
pub const MAX_LIMIT_PATTERNS: usize = 1 << 16;

/// `1/ζ(d)`, the density of visible points of `Z^d`.
pub fn visible_density(d: usize) -> Option<f64> {
    match d {
        2 => Some(6.0 / (std::f64::consts::PI * std::f64::consts::PI)),
        3 => Some(1.0 / 1.202_056_903_159_594_2),
        _ => None,
    }
}

/// The limiting table for windows of side `l`, when available.
pub fn limit_table(
    model: &ModelSpec,
    group: &Group,
    l: u64,
) -> Result<Option<FrequencyTable>, CliError> {
    let w = window(group, l)?;
    if model.kind == ModelKind::VisiblePoints {
        let (GroupKind::Lattice(d), 1) = (group.kind(), w.len()) else {
            return Ok(None);
        };
        return Ok(visible_density(d as usize).map(|rho| FrequencyTable {
            window: w,
            frequencies: BTreeMap::from([
                (PatternKey::from_values(&[0.0]), 1.0 - rho),
                (PatternKey::from_values(&[1.0]), rho),
            ]),
            counts: None,
        }));
    }
    let Some(law) = single_site_law(model, group) else {
        return Ok(None);
    };
    match exact_table(&w, &law, MAX_LIMIT_PATTERNS) {
        Ok(t) => Ok(Some(t)),
        Err(thermolim_core::Error::Resource(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn table_for(
    spec: &FolnerSpec,
    group: &Group,
    omega: &thermolim_core::Coloring,
    index: u64,
    l: u64,
) -> Result<(usize, FrequencyTable), CliError> {
    let w = window(group, l)?;
    // cubes stay implicit so very large boxes need no site set
    if spec.family == FolnerFamily::Cubes && matches!(group.kind(), GroupKind::Lattice(_)) {
        let q = LatticeBox::new(group, index)?;
        let size = thermolim_core::Region::size(&q);
        return Ok((size, pattern_table(group, omega, &q, &w)?));
    }
    let q = spec.set(group, index)?;
    Ok((q.len(), pattern_table(group, omega, &q, &w)?))
}

pub fn run(config: &ExperimentConfig) -> Result<PipelineOutput, CliError> {
    let (spec, group) = folner(config)?;
    let model = model(config)?;
    let limits: Vec<Option<FrequencyTable>> = config
        .params
        .l
        .iter()
        .map(|&l| limit_table(model, &group, l))
        .collect::<Result<_, _>>()?;

    let tasks = make_tasks(config.seed, realization_labels(config.realizations));
    let results = run_tasks(config.workers, &tasks, |task| {
        let omega = model.coloring(&group, task.seed)?;
        let mut out = Vec::new();
        for &j in &spec.indices {
            for &l in &config.params.l {
                let (size, table) = table_for(spec, &group, &omega, j, l)?;
                out.push((j, l, size, table));
            }
        }
        Ok(out)
    })?;
    let (records, values) = split(results);

    let mut summary = Table::new(&[
        "realization [1]",
        "seed [1]",
        "index [1]",
        "window_side [1]",
        "sites [1]",
        "patterns [1]",
        "l1_to_limit [1]",
        "tv_to_limit [1]",
    ]);
    let mut artifacts: Vec<Artifact> = Vec::new();
    for (task, tables) in &values {
        for (j, l, size, table) in tables {
            let li = config
                .params
                .l
                .iter()
                .position(|x| x == l)
                .expect("window from the grid");
            let limit = limits[li].as_ref();
            let distance = limit.map(|lim| total_variation(table, lim));
            summary.row([
                task.index.to_string(),
                task.seed.to_string(),
                j.to_string(),
                l.to_string(),
                size.to_string(),
                table.len().to_string(),
                distance.map(|d| num(d.l1)).unwrap_or_default(),
                distance.map(|d| num(d.total_variation)).unwrap_or_default(),
            ]);
            let mut t = Table::new(&[
                "pattern_id [1]",
                "count [sites]",
                "frequency [1]",
                "limit_frequency [1]",
            ]);
            for (key, freq) in &table.frequencies {
                let count = table
                    .counts
                    .as_ref()
                    .and_then(|c| c.get(key))
                    .copied()
                    .unwrap_or(0);
                t.row([
                    key.to_pattern(&table.window).canonical_id(&group),
                    count.to_string(),
                    num(*freq),
                    limit.map(|lim| num(lim.get(key))).unwrap_or_default(),
                ]);
            }
            artifacts.push(t.into_artifact(format!("freq_r{}_i{}_l{}.csv", task.index, j, l)));
        }
    }
    artifacts.insert(0, summary.into_artifact("freq_summary.csv"));
    Ok(PipelineOutput {
        tasks: records,
        artifacts,
    })
}
