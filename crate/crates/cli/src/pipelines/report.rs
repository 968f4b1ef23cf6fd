//! Percolation statistics: the jump of the normalized counting function at
//! `E = 0`, the cluster-size series bounding it from below, and the
//! two-site cluster probability against its closed form.

use thermolim_core::hamiltonian::{
    cluster_decomposition, origin_cluster_size, two_cluster_probability, Estimate,
};
use thermolim_core::mix::mix;
use thermolim_core::spectral::inertia_count;
use thermolim_core::{Error, GroupKind};

use super::{folner, model, split};
use crate::config::{ExperimentConfig, ReportOptions};
use crate::error::CliError;
use crate::run::{make_tasks, num, run_tasks, PipelineOutput, Table};

/// Half-width of the window around 0 in which eigenvalues count as zero.
pub const ZERO_WINDOW: f64 = 1e-9;

/// Eigenvalues of `m` in `[−δ, δ]`, counted by inertia; the window grows
/// when a pivot breaks down.
pub fn zero_multiplicity(
    m: &thermolim_core::hamiltonian::SymmetricMatrix,
) -> Result<usize, CliError> {
    let mut delta = ZERO_WINDOW;
    for _ in 0..8 {
        match (inertia_count(m, delta), inertia_count(m, -delta)) {
            (Ok(above), Ok(below)) => return Ok(above - below),
            (Err(Error::InertiaBreakdown { .. }), _) | (_, Err(Error::InertiaBreakdown { .. })) => {
                delta *= 1.5
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        }
    }
    Err(CliError::Usage(
        "inertia counts near 0 kept breaking down".into(),
    ))
}

enum Outcome {
    Jumps(Vec<(u64, usize, usize, usize)>),
    Clusters { hits: Vec<usize>, trials: usize },
}

pub fn run(config: &ExperimentConfig) -> Result<PipelineOutput, CliError> {
    let (spec, group) = folner(config)?;
    let model = model(config)?;
    let opts = config.report.clone().unwrap_or_default();
    let ReportOptions {
        max_cluster,
        cluster_trials,
    } = opts;
    let GroupKind::Lattice(d) = group.kind() else {
        return Err(CliError::Usage("reports run on Z^d".into()));
    };
    let mut labels: Vec<String> = (0..config.realizations)
        .map(|r| format!("realization={r}"))
        .collect();
    labels.push("cluster-sizes".into());
    let tasks = make_tasks(config.seed, labels);
    let results = run_tasks(config.workers, &tasks, |task| {
        if task.index == config.realizations {
            let mut hits = vec![0usize; max_cluster + 1];
            for t in 0..cluster_trials {
                let omega = model.coloring(&group, mix(task.seed, t as u64))?;
                if let Some(s) = origin_cluster_size(&group, model, &omega, max_cluster)? {
                    hits[s] += 1;
                }
            }
            return Ok(Outcome::Clusters {
                hits,
                trials: cluster_trials,
            });
        }
        let omega = model.coloring(&group, task.seed)?;
        let mut rows = Vec::new();
        for &j in &spec.indices {
            let q = spec.set(&group, j)?;
            let m = model.matrix(&group, &omega, &q)?;
            let zeros = zero_multiplicity(&m)?;
            let graph = model.graph(&group, &omega, &q)?.expect("percolation model");
            rows.push((j, q.len(), zeros, cluster_decomposition(&graph).len()));
        }
        Ok(Outcome::Jumps(rows))
    })?;
    let (records, values) = split(results);

    let mut series = None;
    let mut clusters = Table::new(&[
        "size [sites]",
        "hits [1]",
        "trials [1]",
        "probability [1]",
        "ci_lower [1]",
        "ci_upper [1]",
        "closed_form [1]",
    ]);
    for (_, v) in &values {
        if let Outcome::Clusters { hits, trials } = v {
            let mut sum = 0.0;
            for (s, &h) in hits.iter().enumerate().skip(1) {
                let e = Estimate::from_hits(h, *trials);
                sum += e.estimate / s as f64;
                let closed = if s == 2 {
                    Some(two_cluster_probability(
                        model.kind,
                        d as usize,
                        model.p.unwrap_or(0.0),
                    )?)
                } else {
                    None
                };
                clusters.row([
                    s.to_string(),
                    h.to_string(),
                    trials.to_string(),
                    num(e.estimate),
                    num(e.lower),
                    num(e.upper),
                    closed.map(num).unwrap_or_default(),
                ]);
            }
            series = Some(sum);
        }
    }
    let mut jumps = Table::new(&[
        "realization [1]",
        "seed [1]",
        "j [1]",
        "sites [sites]",
        "zero_eigenvalues [1]",
        "clusters [1]",
        "jump_at_zero [states/site]",
        "series [states/site]",
        "margin [states/site]",
    ]);
    for (task, v) in &values {
        if let Outcome::Jumps(rows) = v {
            for &(j, sites, zeros, n_clusters) in rows {
                let jump = zeros as f64 / sites as f64;
                jumps.row([
                    task.index.to_string(),
                    task.seed.to_string(),
                    j.to_string(),
                    sites.to_string(),
                    zeros.to_string(),
                    n_clusters.to_string(),
                    num(jump),
                    series.map(num).unwrap_or_default(),
                    series.map(|s| num(jump - s)).unwrap_or_default(),
                ]);
            }
        }
    }
    Ok(PipelineOutput {
        tasks: records,
        artifacts: vec![
            jumps.into_artifact("report_jumps.csv"),
            clusters.into_artifact("report_clusters.csv"),
        ],
    })
}
