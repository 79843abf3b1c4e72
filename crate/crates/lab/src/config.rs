//! Run configuration: one JSON document, optionally overridden by flags.

use std::path::{Path, PathBuf};

use qklab_core::dataio::SynthSpec;
use qklab_core::hpo::{BoSettings, Protocol};
use qklab_core::kernels::{Backend, KernelKind};
use qklab_core::statevector::DEFAULT_MAX_QUBITS;
use qklab_core::svm::DEFAULT_TOL;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};
use crate::persist::{hash_json, read_json};

/// Feature-count sweep used when the config does not list one.
pub const DEFAULT_FEATURE_SWEEP: [usize; 9] = [2, 5, 10, 25, 50, 75, 100, 150, 200];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
    },
    Synth(SynthSpec),
}

fn default_label_column() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SplitSpec {
    /// `count` independent class-balanced splits with the given set totals.
    Balanced {
        count: usize,
        train: usize,
        val: usize,
        test: usize,
    },
    /// Rotating folds with a fixed train:val:test ratio.
    Kfold {
        k: usize,
        #[serde(default = "default_ratio")]
        ratio: [usize; 3],
    },
    /// Externally supplied splits, one JSON file each with `train_idx`,
    /// `val_idx` and `test_idx` indexing rows after the class filter.
    Files { paths: Vec<PathBuf> },
}

/// Split indices as read from a split file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFile {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

fn default_ratio() -> [usize; 3] {
    [2, 1, 2]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HpoConfig {
    pub iterations: usize,
    pub init_points: usize,
    pub candidates: usize,
}

impl Default for HpoConfig {
    fn default() -> Self {
        let d = BoSettings::default();
        Self {
            iterations: d.iterations,
            init_points: d.init_points,
            candidates: d.candidates,
        }
    }
}

impl HpoConfig {
    pub fn settings(&self) -> BoSettings {
        BoSettings {
            iterations: self.iterations,
            init_points: self.init_points,
            candidates: self.candidates,
            ..BoSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    /// Classes to keep; all classes when absent.
    #[serde(default)]
    pub classes: Option<Vec<u32>>,
    pub splits: SplitSpec,
    /// Feature counts to sweep; the default sweep clipped to `d` when absent.
    #[serde(default)]
    pub feature_counts: Option<Vec<usize>>,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<Protocol>,
    #[serde(default = "default_models")]
    pub models: Vec<KernelKind>,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default = "default_sv_cap")]
    pub sv_max_qubits: usize,
    #[serde(default)]
    pub seed: u64,
    /// Not part of the config hash.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Not part of the config hash.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub hpo: HpoConfig,
    #[serde(default = "default_tol")]
    pub svm_tol: f64,
    #[serde(default = "default_bins")]
    pub expressibility_bins: usize,
}

fn default_protocols() -> Vec<Protocol> {
    vec![Protocol::Bandwidth, Protocol::NoBandwidth]
}

fn default_models() -> Vec<KernelKind> {
    vec![KernelKind::FidelityQuantum, KernelKind::Rbf]
}

fn default_backend() -> Backend {
    Backend::Tn
}

fn default_sv_cap() -> usize {
    DEFAULT_MAX_QUBITS
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_bins() -> usize {
    qklab_core::diagnostics::DEFAULT_EXPRESSIBILITY_BINS
}

impl RunConfig {
    pub fn load(path: &Path) -> LabResult<Self> {
        let mut cfg: RunConfig = read_json(path)?;
        // Relative data and split paths resolve against the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Csv { path: data, .. } = &mut cfg.data {
            resolve(data);
        }
        if let SplitSpec::Files { paths } = &mut cfg.splits {
            paths.iter_mut().for_each(resolve);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not need the dataset.
    pub fn validate(&self) -> LabResult<()> {
        if let Some(fc) = &self.feature_counts {
            if fc.is_empty() {
                return Err(LabError::config("feature_counts", "must not be empty"));
            }
            if fc.contains(&0) {
                return Err(LabError::config("feature_counts", "counts must be at least 1"));
            }
        }
        if self.protocols.is_empty() {
            return Err(LabError::config("protocols", "must not be empty"));
        }
        if self.models.is_empty() {
            return Err(LabError::config("models", "must not be empty"));
        }
        match &self.splits {
            SplitSpec::Balanced {
                count,
                train,
                val,
                test,
            } => {
                if *count == 0 {
                    return Err(LabError::config("splits.count", "must be at least 1"));
                }
                if *train == 0 || *val == 0 || *test == 0 {
                    return Err(LabError::config("splits", "train, val and test sizes must be positive"));
                }
            }
            SplitSpec::Kfold { k, ratio } => {
                if *k < 2 {
                    return Err(LabError::config("splits.k", "must be at least 2"));
                }
                if ratio.contains(&0) {
                    return Err(LabError::config("splits.ratio", "entries must be positive"));
                }
            }
            SplitSpec::Files { paths } => {
                if paths.is_empty() {
                    return Err(LabError::config("splits.paths", "must list at least one split file"));
                }
            }
        }
        let h = &self.hpo;
        if h.init_points == 0 || h.iterations < h.init_points || h.candidates == 0 {
            return Err(LabError::config(
                "hpo",
                "need iterations >= init_points >= 1 and candidates >= 1",
            ));
        }
        if self.svm_tol.is_nan() || self.svm_tol <= 0.0 {
            return Err(LabError::config("svm_tol", "must be positive"));
        }
        if self.expressibility_bins < 2 {
            return Err(LabError::config("expressibility_bins", "must be at least 2"));
        }
        if let DataSource::Synth(s) = &self.data {
            if s.n_samples < 2 || s.d == 0 {
                return Err(LabError::config(
                    "data",
                    "synthetic data needs n_samples >= 2 and d >= 1",
                ));
            }
        }
        Ok(())
    }

    /// Feature counts for a dataset with `d` features, ascending and unique.
    pub fn resolve_feature_counts(&self, d: usize) -> LabResult<Vec<usize>> {
        let mut counts = match &self.feature_counts {
            Some(fc) => {
                if let Some(&bad) = fc.iter().find(|&&n| n > d) {
                    return Err(LabError::config(
                        "feature_counts",
                        format!("{bad} exceeds the {d} available features"),
                    ));
                }
                fc.clone()
            }
            None => {
                let mut v: Vec<usize> = DEFAULT_FEATURE_SWEEP.iter().copied().filter(|&n| n <= d).collect();
                v.push(d);
                v
            }
        };
        counts.sort_unstable();
        counts.dedup();
        let max_n = *counts.last().expect("non-empty");
        let uses_sv = self.backend == Backend::Sv && self.models.contains(&KernelKind::FidelityQuantum);
        if uses_sv && max_n > self.sv_max_qubits {
            return Err(LabError::config(
                "backend",
                format!(
                    "statevector backend is capped at {} qubits but feature_counts reach {max_n}",
                    self.sv_max_qubits
                ),
            ));
        }
        Ok(counts)
    }

    /// Hash over everything that affects numerical results.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = None;
        canonical.output_dir = PathBuf::new();
        hash_json(&canonical)
    }
}
