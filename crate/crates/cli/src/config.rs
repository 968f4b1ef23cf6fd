//! Experiment configuration: schema validation, typed parsing and the
//! parameter constraints checked before anything runs.

use std::path::PathBuf;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thermolim_core::empirical::{Reference, SampleSpec, Statistic};
use thermolim_core::group::{FolnerFamily, FolnerSpec, GroupName};
use thermolim_core::hamiltonian::{ModelKind, ModelSpec};
use thermolim_core::quasi_tiling::TargetPolicy;

use crate::error::CliError;

/// JSON Schema every configuration file must satisfy.
pub const CONFIG_SCHEMA: &str = include_str!("../schema/experiment.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Normalized eigenvalue counting functions along a Følner sequence.
    Ids,
    /// Pattern frequency tables.
    Freq,
    /// Quasi-tilings with their certificates.
    Tile,
    /// Uniform convergence statistics of empirical measures.
    Gc,
    /// Finite-alphabet error bounds of pattern averages.
    Bounds,
    /// Percolation jump and cluster statistics.
    Report,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldName {
    #[default]
    EigenvalueCounting,
    PotentialThreshold,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilon: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kappa: Vec<f64>,
    /// Pattern window sides.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub l: Vec<u64>,
    /// Shell radii of the monotone bound.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub r: Vec<f64>,
    /// Sample sizes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdsReference {
    /// The counting function of the largest set of the sequence.
    #[default]
    LargestVolume,
    /// `N(E) = arccos(1 − E/2)/π`, the free Laplacian on `Z`.
    FreeLaplacian,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdsOptions {
    #[serde(default)]
    pub reference: IdsReference,
    /// Realizations whose full step functions are written out.
    #[serde(default = "one")]
    pub curves: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeRuleName {
    Shell,
    #[default]
    Spread,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TilingOptionsConfig {
    /// Side of the target set: `Λ_q` on `Z^d`, the `q × q × q²` box on the
    /// Heisenberg group.
    pub q: u64,
    #[serde(default)]
    pub rule: ShapeRuleName,
    /// Largest shape size for the spread rule; defaults to `ε|Q|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_size: Option<usize>,
    #[serde(default)]
    pub policy: TargetPolicy,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GcStatistic {
    #[default]
    Ks,
    Orthant,
    MonotoneLowerBound,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaScaling {
    /// Thresholds are used as given.
    #[default]
    Absolute,
    /// Each threshold `c` becomes `c/√n`.
    InverseSqrtN,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcOptions {
    pub sample: SampleSpec,
    /// Law the sample is compared with; defaults to the sampling law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    #[serde(default)]
    pub statistic: GcStatistic,
    #[serde(default)]
    pub kappa_scaling: KappaScaling,
    /// Sup bound `M` of the monotone test functions.
    #[serde(default = "unit")]
    pub m: f64,
    /// Random staircases tried by the monotone lower bound.
    #[serde(default = "default_trials")]
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    /// Largest cluster size entering `Σ s⁻¹ P(size s)`.
    #[serde(default = "default_max_cluster")]
    pub max_cluster: usize,
    /// Monte Carlo trials for cluster-size probabilities.
    #[serde(default = "default_cluster_trials")]
    pub cluster_trials: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            max_cluster: default_max_cluster(),
            cluster_trials: default_cluster_trials(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Master seed; task `i` runs with `mix(seed, i)`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Independent realizations per parameter point.
    #[serde(default = "one")]
    pub realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folner: Option<FolnerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub field: FieldName,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<IdsOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiling: Option<TilingOptionsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gc: Option<GcOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportOptions>,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_trials() -> usize {
    256
}

fn default_max_cluster() -> usize {
    5
}

fn default_cluster_trials() -> usize {
    20_000
}

fn schema_validator() -> &'static jsonschema::Validator {
    static VALIDATOR: OnceLock<jsonschema::Validator> = OnceLock::new();
    VALIDATOR.get_or_init(|| {
        let schema: Value = serde_json::from_str(CONFIG_SCHEMA).expect("shipped schema is JSON");
        jsonschema::validator_for(&schema).expect("shipped schema is valid")
    })
}

fn config_error(pointer: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        pointer: pointer.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parses and validates a configuration document.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| config_error("", format!("not JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, CliError> {
        if let Some(err) = schema_validator().iter_errors(&value).next() {
            return Err(config_error(err.instance_path.to_string(), err.to_string()));
        }
        let config: ExperimentConfig = serde_json::from_value(value)
            .map_err(|e| config_error("", format!("does not match the schema types: {e}")))?;
        config.check()?;
        Ok(config)
    }

    /// Canonical JSON of the settings that determine the numbers: worker
    /// count and output directory are left out.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.workers = 1;
        copy.out = None;
        serde_json::to_string(&copy).expect("config serializes")
    }

    fn require_folner(&self) -> Result<&FolnerSpec, CliError> {
        self.folner.as_ref().ok_or_else(|| {
            config_error(
                "/folner",
                format!("{:?} experiments need a Følner sequence", self.kind),
            )
        })
    }

    fn require_model(&self) -> Result<&ModelSpec, CliError> {
        self.model.as_ref().ok_or_else(|| {
            config_error(
                "/model",
                format!("{:?} experiments need a model", self.kind),
            )
        })
    }

    /// Constraints the schema cannot express.
    fn check(&self) -> Result<(), CliError> {
        if self.workers == 0 {
            return Err(config_error("/workers", "need at least one worker"));
        }
        if self.realizations == 0 {
            return Err(config_error(
                "/realizations",
                "need at least one realization",
            ));
        }
        if let Some(f) = &self.folner {
            if f.indices.is_empty() {
                return Err(config_error("/folner/indices", "index list is empty"));
            }
            if f.group == GroupName::Zd && f.d.is_none() {
                return Err(config_error("/folner/d", "Z^d needs a dimension"));
            }
            f.build_group()
                .map_err(|e| config_error("/folner", e.to_string()))?;
        }
        if let (Some(m), Some(f)) = (&self.model, &self.folner) {
            let group = f
                .build_group()
                .map_err(|e| config_error("/folner", e.to_string()))?;
            m.validate(&group)
                .map_err(|e| config_error("/model", e.to_string()))?;
        }
        for (i, &eps) in self.params.epsilon.iter().enumerate() {
            if !(eps > 0.0 && eps < 0.1) {
                return Err(config_error(
                    format!("/params/epsilon/{i}"),
                    format!("ε = {eps} outside (0, 0.1)"),
                ));
            }
        }
        for (i, &kappa) in self.params.kappa.iter().enumerate() {
            if !(kappa > 0.0) {
                return Err(config_error(
                    format!("/params/kappa/{i}"),
                    format!("κ = {kappa} must be positive"),
                ));
            }
        }
        match self.kind {
            ExperimentKind::Ids => {
                self.require_folner()?;
                self.require_model()?;
                if self
                    .ids
                    .as_ref()
                    .is_some_and(|o| o.reference == IdsReference::FreeLaplacian)
                {
                    let f = self.require_folner()?;
                    let m = self.require_model()?;
                    let free = m.kind == ModelKind::Anderson
                        && matches!(&m.potential, Some(thermolim_core::ColorSet::Finite { values, .. }) if values.iter().all(|&v| v == 0.0));
                    if f.group != GroupName::Zd || f.d != Some(1) || !free {
                        return Err(config_error(
                            "/ids/reference",
                            "the free-Laplacian reference needs Z^1 and a potential identically 0",
                        ));
                    }
                }
            }
            ExperimentKind::Freq => {
                self.require_folner()?;
                self.require_model()?;
                self.check_windows(true)?;
            }
            ExperimentKind::Bounds => {
                let f = self.require_folner()?;
                self.require_model()?;
                self.check_windows(true)?;
                if f.family != FolnerFamily::Cubes && f.group == GroupName::Zd {
                    return Err(config_error(
                        "/folner/family",
                        "lattice bounds run on cubes",
                    ));
                }
                let group = f
                    .build_group()
                    .map_err(|e| config_error("/folner", e.to_string()))?;
                if self.params.r.is_empty()
                    && crate::pipelines::single_site_law(self.require_model()?, &group).is_none()
                {
                    return Err(config_error(
                        "/model",
                        "pattern bounds need finitely many colors; give shell radii for the monotone bound",
                    ));
                }
                if !self.params.r.is_empty() && f.group != GroupName::Zd {
                    return Err(config_error("/params/r", "the monotone bound runs on Z^d"));
                }
                // the monotone bound (radii given) needs j > 2L > 4r
                let j_min = f.indices.iter().copied().min().unwrap_or(0);
                for (i, &l) in self.params.l.iter().enumerate() {
                    if !self.params.r.is_empty() && j_min <= 2 * l {
                        return Err(config_error(
                            format!("/params/l/{i}"),
                            format!("need j > 2L, got j = {j_min}, L = {l}"),
                        ));
                    }
                }
                for (i, &r) in self.params.r.iter().enumerate() {
                    for &l in &self.params.l {
                        if !(l as f64 > 2.0 * r) {
                            return Err(config_error(
                                format!("/params/r/{i}"),
                                format!("need L > 2r, got L = {l}, r = {r}"),
                            ));
                        }
                    }
                }
            }
            ExperimentKind::Tile => {
                self.require_folner()?;
                if self.tiling.is_none() {
                    return Err(config_error(
                        "/tiling",
                        "tile experiments need tiling options",
                    ));
                }
                if self.params.epsilon.is_empty() {
                    return Err(config_error("/params/epsilon", "need at least one ε"));
                }
            }
            ExperimentKind::Gc => {
                let Some(gc) = &self.gc else {
                    return Err(config_error(
                        "/gc",
                        "gc experiments need a sample specification",
                    ));
                };
                gc.sample
                    .validate()
                    .map_err(|e| config_error("/gc/sample", e.to_string()))?;
                if let Some(r) = &gc.reference {
                    r.validate()
                        .map_err(|e| config_error("/gc/reference", e.to_string()))?;
                    if r.dim() != gc.sample.dim() {
                        return Err(config_error(
                            "/gc/reference",
                            "reference and sample differ in dimension",
                        ));
                    }
                }
                let reference = gc.reference.clone().unwrap_or_else(|| gc.sample.law());
                if gc.statistic == GcStatistic::Ks
                    && (gc.sample.dim() != 1 || !matches!(reference, Reference::Product(_)))
                {
                    return Err(config_error(
                        "/gc/statistic",
                        "the KS statistic needs one-dimensional product samples",
                    ));
                }
                if gc.statistic == GcStatistic::Orthant
                    && !matches!(reference, Reference::Product(_))
                {
                    return Err(config_error(
                        "/gc/reference",
                        "the orthant statistic needs a product reference",
                    ));
                }
                if !(gc.m > 0.0) {
                    return Err(config_error("/gc/m", "M must be positive"));
                }
                if self.params.n.is_empty() {
                    return Err(config_error("/params/n", "need at least one sample size"));
                }
                if let Some(i) = self.params.n.iter().position(|&n| n == 0) {
                    return Err(config_error(
                        format!("/params/n/{i}"),
                        "sample sizes must be positive",
                    ));
                }
            }
            ExperimentKind::Report => {
                let f = self.require_folner()?;
                let m = self.require_model()?;
                if !matches!(
                    m.kind,
                    ModelKind::SitePercolation | ModelKind::EdgePercolation
                ) {
                    return Err(config_error(
                        "/model/kind",
                        "reports cover site and edge percolation",
                    ));
                }
                if f.group != GroupName::Zd {
                    return Err(config_error("/folner/group", "reports run on Z^d"));
                }
            }
        }
        Ok(())
    }

    fn check_windows(&self, required: bool) -> Result<(), CliError> {
        if required && self.params.l.is_empty() {
            return Err(config_error("/params/l", "need at least one window side"));
        }
        if let Some(i) = self.params.l.iter().position(|&l| l == 0) {
            return Err(config_error(
                format!("/params/l/{i}"),
                "window sides must be positive",
            ));
        }
        Ok(())
    }

    /// The statistic evaluated by a gc experiment, when it is a plain one.
    pub fn plain_statistic(&self) -> Option<Statistic> {
        match self.gc.as_ref()?.statistic {
            GcStatistic::Ks => Some(Statistic::Ks),
            GcStatistic::Orthant => Some(Statistic::Orthant),
            GcStatistic::MonotoneLowerBound => None,
        }
    }
}
