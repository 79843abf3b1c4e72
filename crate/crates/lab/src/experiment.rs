//! Hyperparameter search and evaluation over the `(split, n, protocol,
//! model)` grid.

use std::fmt::Write as _;

use qklab_core::diagnostics::{classification_report, ClassificationReport};
use qklab_core::hpo::{
    accuracy, bayes_optimize, validation_objective, HpoTrace, ModelKernel, Protocol, SvmHyperparams,
};
use qklab_core::kernels::{Backend, Executor, KernelKind, KernelSpec};
use qklab_core::svm::Classifier;
use serde::{Deserialize, Serialize};

use crate::config::{HpoConfig, RunConfig};
use crate::error::{LabError, LabResult};
use crate::persist::{hash_json, read_json, write_atomic, write_json};
use crate::pipeline::{compute_kernels, read_prepared, read_stamp, write_kernels, Layout, PreparedCell};

pub fn protocol_name(p: Protocol) -> &'static str {
    match p {
        Protocol::Bandwidth => "bandwidth",
        Protocol::NoBandwidth => "no-bandwidth",
    }
}

pub fn model_name(k: KernelKind) -> &'static str {
    match k {
        KernelKind::FidelityQuantum => "quantum",
        KernelKind::Rbf => "classical",
    }
}

pub fn cell_name(p: Protocol, k: KernelKind) -> String {
    format!("{}__{}", protocol_name(p), model_name(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub split: usize,
    pub n: usize,
    pub protocol: Protocol,
    pub model: KernelKind,
    pub backend: Option<Backend>,
    pub status: CellStatus,
    pub error: Option<String>,
    pub params: Option<SvmHyperparams>,
    /// Optimized bandwidth `c* = a·n^(−α)`.
    pub c_star: Option<f64>,
    /// Kernel scale actually used: `c*` for the quantum kernel, `c*²` for the RBF.
    pub kernel_scale: Option<f64>,
    pub best_val_score: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub test_report: Option<ClassificationReport>,
    pub trace_ref: Option<String>,
    pub model_ref: Option<String>,
    pub kernel_ref: Option<String>,
    pub cell_hash: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Serialize)]
struct CellKey<'a> {
    prepared_hash: &'a str,
    protocol: Protocol,
    model: KernelKind,
    backend: Option<Backend>,
    sv_max_qubits: usize,
    hpo: &'a HpoConfig,
    svm_tol: f64,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub trace: HpoTrace,
    pub protocol: Protocol,
    pub model: KernelKind,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub classifier: Classifier,
    pub params: SvmHyperparams,
    pub kernel_scale: f64,
    pub kernel_ref: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config_hash: String,
    pub seed: u64,
    pub cells: Vec<CellResult>,
}

impl ExperimentResults {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }

    pub fn find(&self, split: usize, n: usize, protocol: Protocol, model: KernelKind) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.split == split && c.n == n && c.protocol == protocol && c.model == model)
    }
}

pub fn model_kernel(cfg: &RunConfig, kind: KernelKind) -> ModelKernel {
    ModelKernel {
        sv_max_qubits: cfg.sv_max_qubits,
        ..ModelKernel::new(kind, cfg.backend)
    }
}

pub fn kernel_spec(cfg: &RunConfig, kind: KernelKind, c: f64) -> KernelSpec {
    model_kernel(cfg, kind).spec(c)
}

/// Optimizes and evaluates one grid cell; errors are returned, not recorded.
#[allow(clippy::too_many_arguments)]
fn run_cell<E: Executor>(
    cfg: &RunConfig,
    layout: &Layout,
    cell: &PreparedCell,
    prepared_hash: &str,
    protocol: Protocol,
    model: KernelKind,
    base: CellResult,
    exec: &E,
) -> LabResult<CellResult> {
    let (train, val) = (cell.train.dataset()?, cell.val.dataset()?);
    let mk = model_kernel(cfg, model);
    let space = protocol.space();
    let objective = |point: &[f64]| validation_objective(&train, &val, mk, &protocol.params(point), cfg.svm_tol, exec);
    let mut trace = bayes_optimize(objective, &space, &cfg.hpo.settings(), cfg.seed)?;
    trace.n_features = cell.n;
    let params = protocol.params(&trace.best.params);
    let c_star = params.bandwidth(cell.n);
    let spec = kernel_spec(cfg, model, c_star);

    let kernels = compute_kernels(cell, &spec, prepared_hash, exec)?;
    let kdir = layout.kernel_dir(cell.split, cell.n, &spec);
    write_kernels(&kdir, &kernels, &base.config_hash, cfg.seed)?;

    let clf = Classifier::fit(&kernels.train, &cell.train.labels, params.penalty, cfg.svm_tol, exec)?;
    let pred_train = clf.predict(&kernels.train)?;
    let pred_val = clf.predict(&kernels.val)?;
    let pred_test = clf.predict(&kernels.test)?;
    let classes = {
        let mut c = cell.train.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    };
    let positive = (classes.len() == 2).then(|| classes[1]);
    let report = classification_report(&cell.test.labels, &pred_test, positive)?;

    let name = cell_name(protocol, model);
    let trace_path = layout.cell_stem("traces", cell.split, cell.n, &name);
    let model_path = layout.cell_stem("models", cell.split, cell.n, &name);
    let kernel_ref = layout.relative(&kdir);
    write_json(
        &trace_path,
        &TraceRecord {
            trace: trace.clone(),
            protocol,
            model,
            config_hash: base.config_hash.clone(),
        },
    )?;
    write_json(
        &model_path,
        &ModelRecord {
            classifier: clf,
            params,
            kernel_scale: spec.scale(),
            kernel_ref: kernel_ref.clone(),
            config_hash: base.config_hash.clone(),
            seed: cfg.seed,
        },
    )?;

    Ok(CellResult {
        status: CellStatus::Ok,
        params: Some(params),
        c_star: Some(c_star),
        kernel_scale: Some(spec.scale()),
        best_val_score: Some(trace.best.score),
        train_accuracy: Some(accuracy(&cell.train.labels, &pred_train)),
        val_accuracy: Some(accuracy(&cell.val.labels, &pred_val)),
        test_accuracy: Some(accuracy(&cell.test.labels, &pred_test)),
        test_report: Some(report),
        trace_ref: Some(layout.relative(&trace_path)),
        model_ref: Some(layout.relative(&model_path)),
        kernel_ref: Some(kernel_ref),
        ..base
    })
}

/// Runs every cell that is missing or stale, sequentially. Failed cells are
/// recorded and the grid continues; the error is returned at the end.
pub fn cmd_experiment<E: Executor>(
    cfg: &RunConfig,
    layout: &Layout,
    exec: &E,
    mut progress: impl FnMut(&CellResult, bool),
) -> LabResult<ExperimentResults> {
    let stamp = read_stamp(layout)?;
    let config_hash = cfg.config_hash();
    let mut cells = Vec::new();
    for split in 0..stamp.splits {
        for &n in &stamp.feature_counts {
            let (prepared, prepared_hash) = read_prepared(layout, split, n)?;
            for &protocol in &cfg.protocols {
                for &model in &cfg.models {
                    let backend = (model == KernelKind::FidelityQuantum).then_some(cfg.backend);
                    let cell_hash = hash_json(&CellKey {
                        prepared_hash: &prepared_hash,
                        protocol,
                        model,
                        backend,
                        sv_max_qubits: cfg.sv_max_qubits,
                        hpo: &cfg.hpo,
                        svm_tol: cfg.svm_tol,
                        seed: cfg.seed,
                    });
                    let path = layout.cell_stem("cells", split, n, &cell_name(protocol, model));
                    if let Ok(done) = read_json::<CellResult>(&path) {
                        if done.cell_hash == cell_hash && done.status == CellStatus::Ok {
                            progress(&done, true);
                            cells.push(done);
                            continue;
                        }
                    }
                    let base = CellResult {
                        split,
                        n,
                        protocol,
                        model,
                        backend,
                        status: CellStatus::Failed,
                        error: None,
                        params: None,
                        c_star: None,
                        kernel_scale: None,
                        best_val_score: None,
                        train_accuracy: None,
                        val_accuracy: None,
                        test_accuracy: None,
                        test_report: None,
                        trace_ref: None,
                        model_ref: None,
                        kernel_ref: None,
                        cell_hash,
                        config_hash: config_hash.clone(),
                        seed: cfg.seed,
                    };
                    let result = run_cell(
                        cfg,
                        layout,
                        &prepared,
                        &prepared_hash,
                        protocol,
                        model,
                        base.clone(),
                        exec,
                    )
                    .unwrap_or_else(|e| CellResult {
                        error: Some(e.to_string()),
                        ..base
                    });
                    write_json(&path, &result)?;
                    progress(&result, false);
                    cells.push(result);
                }
            }
        }
    }
    let results = ExperimentResults {
        config_hash,
        seed: cfg.seed,
        cells,
    };
    write_json(&layout.results(), &results)?;
    write_atomic(&layout.summary_csv(), summary_csv(&results).as_bytes())?;
    match results.failed() {
        0 => Ok(results),
        failed => Err(LabError::PartialGrid {
            failed,
            total: results.cells.len(),
        }),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

pub fn summary_csv(results: &ExperimentResults) -> String {
    let mut out = String::from(
        "split,n,protocol,model,status,penalty,a,alpha,c_star,train_accuracy,val_accuracy,test_accuracy\n",
    );
    for c in &results.cells {
        let status = match c.status {
            CellStatus::Ok => "ok",
            CellStatus::Failed => "failed",
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.split,
            c.n,
            protocol_name(c.protocol),
            model_name(c.model),
            status,
            opt(c.params.map(|p| p.penalty)),
            opt(c.params.map(|p| p.a)),
            opt(c.params.map(|p| p.alpha)),
            opt(c.c_star),
            opt(c.train_accuracy),
            opt(c.val_accuracy),
            opt(c.test_accuracy),
        )
        .expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::cmd_prepare;
    use qklab_core::kernels::Sequential;

    fn small_config(dir: &std::path::Path) -> RunConfig {
        let mut cfg: RunConfig = serde_json::from_str(
            r#"{"data": {"source": "synth", "task": "two-blob", "n_samples": 40, "d": 4, "seed": 5},
                "splits": {"mode": "balanced", "count": 1, "train": 8, "val": 8, "test": 16},
                "feature_counts": [3],
                "hpo": {"iterations": 6, "init_points": 3, "candidates": 64}}"#,
        )
        .unwrap();
        cfg.output_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn grid_runs_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let layout = Layout::new(dir.path());
        cmd_prepare(&cfg, &layout).unwrap();
        let mut fresh = 0;
        let res = cmd_experiment(&cfg, &layout, &Sequential, |_, skipped| fresh += usize::from(!skipped)).unwrap();
        assert_eq!((res.cells.len(), fresh), (4, 4));
        for c in &res.cells {
            assert_eq!(c.status, CellStatus::Ok);
            assert_eq!(c.val_accuracy, c.best_val_score);
            assert!(dir.path().join(c.trace_ref.as_ref().unwrap()).exists());
        }
        let nb = res
            .find(0, 3, Protocol::NoBandwidth, KernelKind::FidelityQuantum)
            .unwrap();
        assert_eq!(nb.c_star, Some(1.0));

        let mut resumed = 0;
        let again = cmd_experiment(&cfg, &layout, &Sequential, |_, skipped| resumed += usize::from(skipped)).unwrap();
        assert_eq!(resumed, 4);
        assert_eq!(again, res);
        assert!(summary_csv(&res).lines().count() == 5);
    }

    #[test]
    fn failed_cells_are_recorded_and_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        let layout = Layout::new(dir.path());
        cmd_prepare(&cfg, &layout).unwrap();
        cfg.backend = Backend::Sv;
        cfg.sv_max_qubits = 2;
        let err = cmd_experiment(&cfg, &layout, &Sequential, |_, _| {}).unwrap_err();
        assert!(matches!(err, LabError::PartialGrid { failed: 2, total: 4 }));
        assert_eq!(err.exit_code(), 2);
        let res: ExperimentResults = read_json(&layout.results()).unwrap();
        let failed: Vec<_> = res.cells.iter().filter(|c| c.status == CellStatus::Failed).collect();
        assert!(failed
            .iter()
            .all(|c| c.model == KernelKind::FidelityQuantum && c.error.is_some()));
    }
}
