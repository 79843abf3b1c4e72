//! Wall-clock benchmark of kernel-matrix fills per backend and qubit count.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use qklab_core::dataio::{synth_dataset, SynthTask};
use qklab_core::diagnostics::{fit_scaling, FitKind, ScalingFit};
use qklab_core::kernels::{kernel_matrix, Backend, Executor, KernelSpec};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};
use crate::persist::{write_atomic, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub backend: Backend,
    pub ns: Vec<usize>,
    /// Side length of the timed `size × size` cross matrix.
    pub size: usize,
    pub reps: usize,
    pub bandwidth: f64,
    pub seed: u64,
}

impl BenchSpec {
    pub fn default_for(backend: Backend) -> Self {
        let ns = match backend {
            Backend::Sv => (6..=16).collect(),
            Backend::Tn => vec![16, 32, 64, 128, 256],
        };
        Self {
            backend,
            ns,
            size: 10,
            reps: 3,
            bandwidth: 1.0,
            seed: 0,
        }
    }

    fn validate(&self) -> LabResult<()> {
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(LabError::config("ns", "need at least one positive qubit count"));
        }
        if self.size == 0 {
            return Err(LabError::config("size", "must be positive"));
        }
        if self.reps < 3 {
            return Err(LabError::config("reps", "medians need at least 3 repetitions"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub n: usize,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub workers: usize,
}

impl Machine {
    pub fn current(workers: usize) -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub spec: BenchSpec,
    pub machine: Machine,
    pub points: Vec<BenchPoint>,
    /// Exponential in `n` for the statevector, power law for the MPS.
    pub fit: Option<ScalingFit>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Times `reps` fills of a `size × size` cross matrix for each `n`.
pub fn run_bench<E: Executor>(spec: &BenchSpec, exec: &E, workers: usize) -> LabResult<BenchReport> {
    spec.validate()?;
    let max_n = *spec.ns.iter().max().expect("non-empty");
    let data = synth_dataset(2 * spec.size, max_n, SynthTask::Random, spec.seed)?;
    let kernel = match spec.backend {
        Backend::Sv => KernelSpec::FidelityQuantum {
            bandwidth: spec.bandwidth,
            backend: Backend::Sv,
            sv_max_qubits: max_n,
        },
        Backend::Tn => KernelSpec::quantum(spec.bandwidth, Backend::Tn),
    };
    let mut points = Vec::with_capacity(spec.ns.len());
    for &n in &spec.ns {
        let truncate = |r: &[f64]| r[..n].to_vec();
        let rows: Vec<Vec<f64>> = data.rows().take(spec.size).map(truncate).collect();
        let cols: Vec<Vec<f64>> = data.rows().skip(spec.size).map(truncate).collect();
        let mut times = Vec::with_capacity(spec.reps);
        for _ in 0..spec.reps {
            let start = Instant::now();
            let k = kernel_matrix(&rows, &cols, &kernel, exec)?;
            times.push(start.elapsed().as_secs_f64());
            std::hint::black_box(k);
        }
        points.push(BenchPoint {
            n,
            median_seconds: median(times.clone()),
            min_seconds: times.iter().copied().fold(f64::INFINITY, f64::min),
            max_seconds: times.iter().copied().fold(0.0, f64::max),
        });
    }
    let ns: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ts: Vec<f64> = points.iter().map(|p| p.median_seconds.max(1e-9)).collect();
    let kind = match spec.backend {
        Backend::Sv => FitKind::Exponential,
        Backend::Tn => FitKind::PowerLaw,
    };
    Ok(BenchReport {
        spec: spec.clone(),
        machine: Machine::current(workers),
        points,
        fit: fit_scaling(&ns, &ts, kind).ok(),
    })
}

pub fn bench_csv(report: &BenchReport) -> String {
    let backend = match report.spec.backend {
        Backend::Sv => "sv",
        Backend::Tn => "tn",
    };
    let mut out = String::from("backend,n,rows,cols,reps,median_seconds,min_seconds,max_seconds\n");
    for p in &report.points {
        writeln!(
            out,
            "{backend},{},{},{},{},{:?},{:?},{:?}",
            p.n, report.spec.size, report.spec.size, report.spec.reps, p.median_seconds, p.min_seconds, p.max_seconds
        )
        .expect("write to string");
    }
    out
}

/// Writes `bench_<backend>.csv` and `bench_<backend>.json` under `dir`.
pub fn write_bench(dir: &Path, report: &BenchReport) -> LabResult<()> {
    let stem = match report.spec.backend {
        Backend::Sv => "bench_sv",
        Backend::Tn => "bench_tn",
    };
    write_atomic(&dir.join(format!("{stem}.csv")), bench_csv(report).as_bytes())?;
    write_json(&dir.join(format!("{stem}.json")), report)
}
