//! Kernel diagnostics over a finished experiment grid.

use std::fmt::Write as _;

use qklab_core::diagnostics::{
    alignment, default_regularizer, expressibility, fit_scaling, geometric_difference, kernel_stats, offdiag_entries,
    spectrum, wilcoxon_signed_rank_exact, FitKind, KernelStats, ScalingFit, WilcoxonResult,
};
use qklab_core::hpo::Protocol;
use qklab_core::kernels::{KernelKind, KernelMatrix};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{LabError, LabResult};
use crate::experiment::{model_name, protocol_name, CellResult, CellStatus, ExperimentResults};
use crate::persist::{read_json, read_kernel, write_atomic, write_json};
use crate::pipeline::{read_stamp, Layout};

/// Diagnostics for one `(split, n, protocol)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiagnostics {
    pub split: usize,
    pub n: usize,
    pub protocol: Protocol,
    pub quantum_stats: Option<KernelStats>,
    pub classical_stats: Option<KernelStats>,
    /// KL divergence of the quantum Gram off-diagonal fidelities from Haar.
    pub expressibility: Option<f64>,
    pub geometric_difference: Option<f64>,
    pub regularizer: Option<f64>,
    /// `√N_train`, the reference line for `g`.
    pub sqrt_n_train: f64,
    pub alignment: Option<f64>,
    pub quantum_spectrum: Option<Vec<f64>>,
    pub classical_spectrum: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub split: usize,
    pub protocol: Protocol,
    pub model: KernelKind,
    /// `(n, c*)` pairs used for the fits.
    pub points: Vec<(usize, f64)>,
    pub power_law: Option<ScalingFit>,
    pub exponential: Option<ScalingFit>,
    pub note: Option<String>,
}

/// Paired test over splits of quantum minus classical test accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonRecord {
    pub n: usize,
    pub protocol: Protocol,
    pub diffs: Vec<f64>,
    pub result: Option<WilcoxonResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub config_hash: String,
    pub seed: u64,
    pub cells: Vec<CellDiagnostics>,
    pub fits: Vec<FitRecord>,
    pub wilcoxon: Vec<WilcoxonRecord>,
    pub missing: Vec<String>,
}

/// Diagnostics of one pair of training Gram matrices; either may be absent.
pub fn diagnose_pair(
    split: usize,
    n: usize,
    protocol: Protocol,
    k_q: Option<&KernelMatrix>,
    k_c: Option<&KernelMatrix>,
    bins: usize,
) -> LabResult<CellDiagnostics> {
    let expr = k_q
        .map(|k| expressibility(&offdiag_entries(k), n.min(u32::MAX as usize) as u32, bins))
        .transpose()?;
    let (geometric, regularizer, aligned) = match (k_q, k_c) {
        (Some(q), Some(c)) => {
            let lambda = default_regularizer(c);
            (
                Some(geometric_difference(c, q, lambda)?),
                Some(lambda),
                Some(alignment(c, q)?),
            )
        }
        _ => (None, None, None),
    };
    let n_train = k_q.or(k_c).map_or(0, KernelMatrix::rows);
    Ok(CellDiagnostics {
        split,
        n,
        protocol,
        quantum_stats: k_q.map(kernel_stats).transpose()?,
        classical_stats: k_c.map(kernel_stats).transpose()?,
        expressibility: expr,
        geometric_difference: geometric,
        regularizer,
        sqrt_n_train: (n_train as f64).sqrt(),
        alignment: aligned,
        quantum_spectrum: k_q.map(spectrum).transpose()?,
        classical_spectrum: k_c.map(spectrum).transpose()?,
    })
}

fn train_gram(layout: &Layout, cell: Option<&CellResult>) -> LabResult<Option<KernelMatrix>> {
    match cell.and_then(|c| c.kernel_ref.as_ref()) {
        Some(r) => Ok(Some(read_kernel(&layout.root.join(r).join("train"))?)),
        None => Ok(None),
    }
}

pub fn cmd_diagnose(cfg: &RunConfig, layout: &Layout) -> LabResult<Diagnostics> {
    let stamp = read_stamp(layout)?;
    if !layout.results().exists() {
        return Err(LabError::MissingArtifacts(vec![format!(
            "{} (run `experiment` first)",
            layout.results().display()
        )]));
    }
    let results: ExperimentResults = read_json(&layout.results())?;
    let ok = |s, n, p, m| results.find(s, n, p, m).filter(|c| c.status == CellStatus::Ok);

    let mut missing = Vec::new();
    for s in 0..stamp.splits {
        for &n in &stamp.feature_counts {
            for &p in &cfg.protocols {
                for &m in &cfg.models {
                    if ok(s, n, p, m).is_none() {
                        missing.push(format!("split {s}, n {n}, {} {}", protocol_name(p), model_name(m)));
                    }
                }
            }
        }
    }

    let mut cells = Vec::new();
    for s in 0..stamp.splits {
        for &n in &stamp.feature_counts {
            for &p in &cfg.protocols {
                let q = ok(s, n, p, KernelKind::FidelityQuantum);
                let c = ok(s, n, p, KernelKind::Rbf);
                if q.is_none() && c.is_none() {
                    continue;
                }
                let k_q = train_gram(layout, q)?;
                let k_c = train_gram(layout, c)?;
                cells.push(diagnose_pair(
                    s,
                    n,
                    p,
                    k_q.as_ref(),
                    k_c.as_ref(),
                    cfg.expressibility_bins,
                )?);
            }
        }
    }

    let mut fits = Vec::new();
    for s in 0..stamp.splits {
        for &p in &cfg.protocols {
            for &m in &cfg.models {
                let points: Vec<(usize, f64)> = stamp
                    .feature_counts
                    .iter()
                    .filter_map(|&n| ok(s, n, p, m).and_then(|c| c.c_star).map(|c| (n, c)))
                    .collect();
                let ns: Vec<f64> = points.iter().map(|&(n, _)| n as f64).collect();
                let cs: Vec<f64> = points.iter().map(|&(_, c)| c).collect();
                let power = fit_scaling(&ns, &cs, FitKind::PowerLaw);
                let expo = fit_scaling(&ns, &cs, FitKind::Exponential);
                let note = power.as_ref().err().map(ToString::to_string);
                fits.push(FitRecord {
                    split: s,
                    protocol: p,
                    model: m,
                    points,
                    power_law: power.ok(),
                    exponential: expo.ok(),
                    note,
                });
            }
        }
    }

    let mut wilcoxon = Vec::new();
    for &n in &stamp.feature_counts {
        for &p in &cfg.protocols {
            let diffs: Option<Vec<f64>> = (0..stamp.splits)
                .map(|s| {
                    let q = ok(s, n, p, KernelKind::FidelityQuantum)?.test_accuracy?;
                    let c = ok(s, n, p, KernelKind::Rbf)?.test_accuracy?;
                    Some(q - c)
                })
                .collect();
            let Some(diffs) = diffs else { continue };
            let (result, note) = match wilcoxon_signed_rank_exact(&diffs) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            wilcoxon.push(WilcoxonRecord {
                n,
                protocol: p,
                diffs,
                result,
                note,
            });
        }
    }

    let diag = Diagnostics {
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        cells,
        fits,
        wilcoxon,
        missing: missing.clone(),
    };
    write_json(&layout.diagnostics(), &diag)?;
    write_atomic(&layout.diagnostics_csv(), diagnostics_csv(&diag).as_bytes())?;
    if missing.is_empty() {
        Ok(diag)
    } else {
        Err(LabError::MissingArtifacts(missing))
    }
}

/// Tidy rows `split,n,protocol,metric,value`; spectra stay in the JSON.
pub fn diagnostics_csv(d: &Diagnostics) -> String {
    let mut out = String::from("split,n,protocol,metric,value\n");
    let mut row = |split: &str, n: &str, p: Protocol, metric: &str, v: Option<f64>| {
        if let Some(v) = v {
            writeln!(out, "{split},{n},{},{metric},{v:?}", protocol_name(p)).expect("write to string");
        }
    };
    for c in &d.cells {
        let (s, n) = (c.split.to_string(), c.n.to_string());
        for (prefix, stats) in [("quantum", &c.quantum_stats), ("classical", &c.classical_stats)] {
            if let Some(st) = stats {
                row(
                    &s,
                    &n,
                    c.protocol,
                    &format!("{prefix}_mean_offdiag"),
                    Some(st.mean_offdiag),
                );
                row(
                    &s,
                    &n,
                    c.protocol,
                    &format!("{prefix}_std_offdiag"),
                    Some(st.std_offdiag),
                );
            }
        }
        row(&s, &n, c.protocol, "expressibility", c.expressibility);
        row(&s, &n, c.protocol, "geometric_difference", c.geometric_difference);
        row(&s, &n, c.protocol, "sqrt_n_train", Some(c.sqrt_n_train));
        row(&s, &n, c.protocol, "alignment", c.alignment);
    }
    for f in &d.fits {
        let s = f.split.to_string();
        let m = model_name(f.model);
        for (label, fit) in [("power_law", &f.power_law), ("exponential", &f.exponential)] {
            if let Some(fit) = fit {
                row(&s, "all", f.protocol, &format!("{m}_{label}_slope"), Some(fit.slope));
                row(
                    &s,
                    "all",
                    f.protocol,
                    &format!("{m}_{label}_intercept"),
                    Some(fit.intercept),
                );
                row(
                    &s,
                    "all",
                    f.protocol,
                    &format!("{m}_{label}_r_squared"),
                    Some(fit.r_squared),
                );
            }
        }
    }
    for w in &d.wilcoxon {
        let n = w.n.to_string();
        row(
            "all",
            &n,
            w.protocol,
            "wilcoxon_p",
            w.result.as_ref().map(|r| r.p_value),
        );
        row(
            "all",
            &n,
            w.protocol,
            "wilcoxon_w_plus",
            w.result.as_ref().map(|r| r.w_plus),
        );
    }
    out
}
