//! Distances between empirical and reference measures over growing sample
//! sizes, with exceedance frequencies of given thresholds.

use thermolim_core::empirical::{
    ks_statistic, monotone_lower_bound, orthant_discrepancy, Reference, Sample,
};
use thermolim_core::mix::mix;

use super::split;
use crate::config::{ExperimentConfig, GcStatistic, KappaScaling};
use crate::error::CliError;
use crate::run::{make_tasks, num, run_tasks, PipelineOutput, Table};

/// Least-squares slope of `ln(frequency + 1/(2·trials))` against `n`.
pub fn log_frequency_slope(rows: &[(usize, f64, usize)]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(n, f, t)| (n as f64, (f + 0.5 / t as f64).ln()))
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn run(config: &ExperimentConfig) -> Result<PipelineOutput, CliError> {
    let gc = config
        .gc
        .as_ref()
        .ok_or_else(|| CliError::Usage("missing gc options".into()))?;
    let reference: Reference = gc.reference.clone().unwrap_or_else(|| gc.sample.law());
    let grid: Vec<(usize, usize)> = config
        .params
        .n
        .iter()
        .flat_map(|&n| (0..config.realizations).map(move |r| (n, r)))
        .collect();
    let labels = grid
        .iter()
        .map(|(n, r)| format!("n={n} realization={r}"))
        .collect();
    let tasks = make_tasks(config.seed, labels);
    let results = run_tasks(config.workers, &tasks, |task| {
        let (n, _) = grid[task.index];
        let sample = Sample::draw(&gc.sample, n, task.seed)?;
        Ok(match gc.statistic {
            GcStatistic::Ks => {
                let Reference::Product(m) = &reference else {
                    return Err(CliError::Usage(
                        "the KS statistic needs a product reference".into(),
                    ));
                };
                ks_statistic(&sample, &m[0])?
            }
            GcStatistic::Orthant => orthant_discrepancy(&sample, &reference)?.value,
            GcStatistic::MonotoneLowerBound => {
                monotone_lower_bound(&sample, &reference, gc.m, gc.trials, mix(task.seed, 1))?.value
            }
        })
    })?;
    let (records, values) = split(results);

    let mut table = Table::new(&[
        "n [samples]",
        "realization [1]",
        "seed [1]",
        "statistic [1]",
    ]);
    for (task, v) in &values {
        let (n, r) = grid[task.index];
        table.row([n.to_string(), r.to_string(), task.seed.to_string(), num(*v)]);
    }
    let mut exceed = Table::new(&[
        "n [samples]",
        "kappa [1]",
        "threshold [1]",
        "exceedances [1]",
        "trials [1]",
        "frequency [1]",
    ]);
    let mut slopes = Table::new(&["kappa [1]", "slope [1/samples]"]);
    for &kappa in &config.params.kappa {
        let mut rows = Vec::new();
        for &n in &config.params.n {
            let threshold = match gc.kappa_scaling {
                KappaScaling::Absolute => kappa,
                KappaScaling::InverseSqrtN => kappa / (n as f64).sqrt(),
            };
            let at_n: Vec<f64> = values
                .iter()
                .filter(|(t, _)| grid[t.index].0 == n)
                .map(|(_, v)| *v)
                .collect();
            let hits = at_n.iter().filter(|&&v| v > threshold).count();
            let trials = at_n.len();
            let freq = if trials == 0 {
                0.0
            } else {
                hits as f64 / trials as f64
            };
            exceed.row([
                n.to_string(),
                num(kappa),
                num(threshold),
                hits.to_string(),
                trials.to_string(),
                num(freq),
            ]);
            if trials > 0 {
                rows.push((n, freq, trials));
            }
        }
        slopes.row([
            num(kappa),
            log_frequency_slope(&rows).map(num).unwrap_or_default(),
        ]);
    }
    Ok(PipelineOutput {
        tasks: records,
        artifacts: vec![
            table.into_artifact("gc_values.csv"),
            exceed.into_artifact("gc_exceedance.csv"),
            slopes.into_artifact("gc_slopes.csv"),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_falling_frequencies_is_negative() {
        let s = log_frequency_slope(&[(10, 0.5, 100), (20, 0.2, 100), (40, 0.01, 100)]).unwrap();
        assert!(s < 0.0);
        assert_eq!(log_frequency_slope(&[(10, 0.5, 100)]), None);
        assert_eq!(log_frequency_slope(&[(10, 0.5, 100), (10, 0.1, 100)]), None);
    }
}
