//! Quasi-tilings of a target set, one task per ε, with certificates and
//! coverage densities.

use thermolim_core::group::{cube, heisenberg_box};
use thermolim_core::quasi_tiling::{
    construct_quasi_tiling_with, select_shapes, QuasiTilingRecord, ShapeRule, TilingOptions,
};
use thermolim_core::{Group, GroupKind, SiteSet};

use super::{folner, split, tag};
use crate::config::{ExperimentConfig, ShapeRuleName};
use crate::error::CliError;
use crate::run::{make_tasks, num, run_tasks, Artifact, PipelineOutput, Table};

/// JSON Schema of the `tiling_eps*.json` records.
pub const TILING_SCHEMA: &str = include_str!("../../schema/tiling.schema.json");

/// `Λ_q` on `Z^d`, the `q × q × q²` box on the Heisenberg group.
pub fn target_set(group: &Group, q: u64) -> Result<SiteSet, CliError> {
    Ok(match group.kind() {
        GroupKind::Lattice(_) => cube(group, q)?,
        GroupKind::Heisenberg => heisenberg_box(group, q, q, q * q)?,
    })
}

pub fn run(config: &ExperimentConfig) -> Result<PipelineOutput, CliError> {
    let (spec, group) = folner(config)?;
    let opts = config
        .tiling
        .as_ref()
        .ok_or_else(|| CliError::Usage("missing tiling options".into()))?;
    let q = target_set(&group, opts.q)?;
    let labels = config
        .params
        .epsilon
        .iter()
        .map(|e| format!("epsilon={e}"))
        .collect();
    let tasks = make_tasks(config.seed, labels);
    let results = run_tasks(config.workers, &tasks, |task| {
        let eps = config.params.epsilon[task.index];
        let rule = match opts.rule {
            ShapeRuleName::Shell => ShapeRule::Shell,
            ShapeRuleName::Spread => ShapeRule::Spread {
                max_size: opts.max_size.unwrap_or((eps * q.len() as f64) as usize),
            },
        };
        let (_, shapes) = select_shapes(spec, eps, rule)?;
        let qt = construct_quasi_tiling_with(
            &group,
            &q,
            &shapes,
            eps,
            &TilingOptions {
                policy: opts.policy,
                offset: 0,
            },
        )?;
        let record = QuasiTilingRecord::new(&group, &qt);
        if !record.certificate.holds {
            return Err(CliError::Usage(format!(
                "quasi-tiling at ε = {eps} fails its certificate"
            )));
        }
        Ok(record)
    })?;
    let (records, values) = split(results);

    let mut summary = Table::new(&[
        "epsilon [1]",
        "shapes [1]",
        "q_sites [sites]",
        "tiles [1]",
        "uncovered_fraction [1]",
        "max_core_deficit [1]",
        "cross_overlap_sites [sites]",
        "outside_sites [sites]",
        "shortfalls [1]",
        "holds [bool]",
    ]);
    let mut densities = Table::new(&[
        "epsilon [1]",
        "shape [1]",
        "shape_sites [sites]",
        "tiles [1]",
        "eta [1]",
        "ratio [1]",
        "deviation [1]",
        "threshold [1]",
        "flagged [bool]",
    ]);
    let mut artifacts: Vec<Artifact> = Vec::new();
    for (_, record) in &values {
        let c = &record.certificate;
        let tiles: usize = record.centers.iter().map(Vec::len).sum();
        summary.row([
            num(record.epsilon),
            record.shapes.len().to_string(),
            record.q_size.to_string(),
            tiles.to_string(),
            num(c.uncovered_fraction),
            num(c.core_deficits.iter().copied().fold(0.0, f64::max)),
            c.cross_overlap_sites.to_string(),
            c.outside_sites.to_string(),
            record.shortfalls.len().to_string(),
            c.holds.to_string(),
        ]);
        for d in &record.coverage.shapes {
            let i = d.shape - 1;
            densities.row([
                num(record.epsilon),
                d.shape.to_string(),
                record.shapes[i].len().to_string(),
                record.centers[i].len().to_string(),
                num(d.eta),
                num(d.ratio),
                num(d.deviation),
                num(record.coverage.threshold),
                d.flagged.to_string(),
            ]);
        }
        artifacts.push(Artifact::json(
            format!("tiling_eps{}.json", tag(record.epsilon)),
            record,
        ));
    }
    artifacts.insert(0, summary.into_artifact("tiling_summary.csv"));
    artifacts.insert(1, densities.into_artifact("tiling_densities.csv"));
    Ok(PipelineOutput {
        tasks: records,
        artifacts,
    })
}
