//! Task fan-out, artifact collection and the run manifest.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thermolim_core::mix::mix;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::pipelines;

/// JSON Schema of `manifest.json`.
pub const MANIFEST_SCHEMA: &str = include_str!("../schema/manifest.schema.json");

/// One unit of parallel work.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub index: usize,
    pub seed: u64,
    pub label: String,
}

/// Tasks `0..labels.len()` with seeds `mix(master, index)`.
pub fn make_tasks(master: u64, labels: Vec<String>) -> Vec<Task> {
    labels
        .into_iter()
        .enumerate()
        .map(|(index, label)| Task {
            index,
            seed: mix(master, index as u64),
            label,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskRecord {
    pub index: usize,
    pub seed: u64,
    pub label: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub seconds: f64,
}

/// Runs `work` on every task with `workers` threads; results come back in
/// task order whatever the scheduling.
pub fn run_tasks<T, F>(
    workers: usize,
    tasks: &[Task],
    work: F,
) -> Result<Vec<(TaskRecord, Option<T>)>, CliError>
where
    T: Send,
    F: Fn(&Task) -> Result<T, CliError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let start = Instant::now();
                let outcome = match catch_unwind(AssertUnwindSafe(|| work(task))) {
                    Ok(result) => result.map_err(|e| e.to_string()),
                    Err(panic) => Err(panic_message(panic.as_ref())),
                };
                let seconds = start.elapsed().as_secs_f64();
                let (ok, error, value) = match outcome {
                    Ok(v) => (true, None, Some(v)),
                    Err(e) => (false, Some(e), None),
                };
                (
                    TaskRecord {
                        index: task.index,
                        seed: task.seed,
                        label: task.label.clone(),
                        ok,
                        error,
                        seconds,
                    },
                    value,
                )
            })
            .collect()
    }))
}

fn panic_message(panic: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        format!("worker panicked: {s}")
    } else if let Some(s) = panic.downcast_ref::<String>() {
        format!("worker panicked: {s}")
    } else {
        "worker panicked".into()
    }
}

/// A file produced by a run, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub path: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(path: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Artifact {
            path: path.into(),
            bytes: bytes.into(),
        }
    }

    pub fn json(path: impl Into<String>, value: &impl Serialize) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
        bytes.push(b'\n');
        Artifact::new(path, bytes)
    }
}

/// CSV text built row by row; every header cell names its unit.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table { writer }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(cells).expect("in-memory write");
    }

    pub fn into_artifact(self, path: impl Into<String>) -> Artifact {
        Artifact::new(path, self.writer.into_inner().expect("in-memory flush"))
    }
}

/// Shortest round-trip decimal form, so reruns give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub task_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub kind: ExperimentKind,
    /// SHA-256 of the canonical configuration.
    pub config_hash: String,
    pub master_seed: u64,
    pub workers: usize,
    pub tasks: Vec<TaskRecord>,
    pub outputs: Vec<OutputRecord>,
    pub failures: usize,
    pub complete: bool,
    pub timings: Timings,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        if self.complete {
            0
        } else {
            3
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// What a pipeline hands back: task records and the files to write.
pub struct PipelineOutput {
    pub tasks: Vec<TaskRecord>,
    pub artifacts: Vec<Artifact>,
}

/// Runs the pipeline in memory without touching the file system.
pub fn execute(config: &ExperimentConfig) -> Result<(RunManifest, Vec<Artifact>), CliError> {
    let start = Instant::now();
    let output = match config.kind {
        ExperimentKind::Ids => pipelines::ids::run(config)?,
        ExperimentKind::Freq => pipelines::freq::run(config)?,
        ExperimentKind::Tile => pipelines::tile::run(config)?,
        ExperimentKind::Gc => pipelines::gc::run(config)?,
        ExperimentKind::Bounds => pipelines::bounds::run(config)?,
        ExperimentKind::Report => pipelines::report::run(config)?,
    };
    let failures = output.tasks.iter().filter(|t| !t.ok).count();
    let manifest = RunManifest {
        tool: "thermolim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: config.kind,
        config_hash: sha256_hex(config.canonical_json().as_bytes()),
        master_seed: config.seed,
        workers: config.workers,
        outputs: output
            .artifacts
            .iter()
            .map(|a| OutputRecord {
                path: a.path.clone(),
                bytes: a.bytes.len(),
                sha256: sha256_hex(&a.bytes),
            })
            .collect(),
        failures,
        complete: failures == 0,
        timings: Timings {
            total_seconds: start.elapsed().as_secs_f64(),
            task_seconds: output.tasks.iter().map(|t| t.seconds).sum(),
        },
        tasks: output.tasks,
    };
    Ok((manifest, output.artifacts))
}

/// Runs the experiment and writes every artifact plus `manifest.json` into
/// `out_dir` (or the configured directory, or `out`).
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<RunManifest, CliError> {
    let dir: PathBuf = out_dir
        .map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| "out".into());
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let (manifest, artifacts) = execute(config)?;
    for a in &artifacts {
        let path = dir.join(&a.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, &a.bytes).map_err(|e| CliError::io(&path, e))?;
    }
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}
