//! Markdown summary of a finished run.

use std::fmt::Write as _;

use qklab_core::hpo::Protocol;
use qklab_core::kernels::KernelKind;

use crate::diagnose::Diagnostics;
use crate::error::{LabError, LabResult};
use crate::experiment::{model_name, protocol_name, CellStatus, ExperimentResults};
use crate::persist::{read_json, write_atomic};
use crate::pipeline::Layout;

/// Mean and population standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fmt_mean_std(xs: &[f64]) -> String {
    if xs.is_empty() {
        return "n/a".into();
    }
    let (m, s) = mean_std(xs);
    format!("{m:.3} ± {s:.3}")
}

pub fn render(results: &ExperimentResults, diagnostics: Option<&Diagnostics>) -> String {
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "# Run report\n").unwrap();
    writeln!(w, "config hash `{}`, seed {}\n", results.config_hash, results.seed).unwrap();
    let failed = results.failed();
    writeln!(w, "{} cells, {failed} failed\n", results.cells.len()).unwrap();

    let mut keys: Vec<(usize, Protocol, KernelKind)> =
        results.cells.iter().map(|c| (c.n, c.protocol, c.model)).collect();
    keys.sort_by_key(|&(n, p, m)| (n, protocol_name(p), model_name(m)));
    keys.dedup();

    writeln!(w, "## Accuracy across splits\n").unwrap();
    writeln!(w, "| n | protocol | model | splits | train | test | c* |").unwrap();
    writeln!(w, "|---|---|---|---|---|---|---|").unwrap();
    for (n, p, m) in keys {
        let ok: Vec<_> = results
            .cells
            .iter()
            .filter(|c| c.n == n && c.protocol == p && c.model == m && c.status == CellStatus::Ok)
            .collect();
        let train: Vec<f64> = ok.iter().filter_map(|c| c.train_accuracy).collect();
        let test: Vec<f64> = ok.iter().filter_map(|c| c.test_accuracy).collect();
        let cs: Vec<f64> = ok.iter().filter_map(|c| c.c_star).collect();
        writeln!(
            w,
            "| {n} | {} | {} | {} | {} | {} | {} |",
            protocol_name(p),
            model_name(m),
            ok.len(),
            fmt_mean_std(&train),
            fmt_mean_std(&test),
            fmt_mean_std(&cs)
        )
        .unwrap();
    }

    if failed > 0 {
        writeln!(w, "\n## Failed cells\n").unwrap();
        for c in results.cells.iter().filter(|c| c.status == CellStatus::Failed) {
            writeln!(
                w,
                "- split {}, n {}, {} {}: {}",
                c.split,
                c.n,
                protocol_name(c.protocol),
                model_name(c.model),
                c.error.as_deref().unwrap_or("unknown error")
            )
            .unwrap();
        }
    }

    if let Some(d) = diagnostics {
        writeln!(w, "\n## Scaling of c*\n").unwrap();
        writeln!(
            w,
            "| split | protocol | model | power-law slope | R² | exponential slope | R² |"
        )
        .unwrap();
        writeln!(w, "|---|---|---|---|---|---|---|").unwrap();
        for f in &d.fits {
            let cols = |fit: &Option<qklab_core::diagnostics::ScalingFit>| {
                fit.as_ref().map_or(("n/a".to_string(), "n/a".to_string()), |f| {
                    (format!("{:.4}", f.slope), format!("{:.4}", f.r_squared))
                })
            };
            let (ps, pr) = cols(&f.power_law);
            let (es, er) = cols(&f.exponential);
            writeln!(
                w,
                "| {} | {} | {} | {ps} | {pr} | {es} | {er} |",
                f.split,
                protocol_name(f.protocol),
                model_name(f.model)
            )
            .unwrap();
        }
        writeln!(w, "\n## Wilcoxon signed-rank, quantum minus classical test accuracy\n").unwrap();
        writeln!(w, "| n | protocol | W+ | p |").unwrap();
        writeln!(w, "|---|---|---|---|").unwrap();
        for t in &d.wilcoxon {
            let (wp, p) = t
                .result
                .as_ref()
                .map_or(("n/a".to_string(), t.note.clone().unwrap_or_default()), |r| {
                    (format!("{}", r.w_plus), format!("{:.4}", r.p_value))
                });
            writeln!(w, "| {} | {} | {wp} | {p} |", t.n, protocol_name(t.protocol)).unwrap();
        }
        if !d.missing.is_empty() {
            writeln!(w, "\nMissing cells: {}", d.missing.join("; ")).unwrap();
        }
    }
    out
}

/// Renders `report.md` from `results.json` and, if present, `diagnostics.json`.
pub fn cmd_report(layout: &Layout) -> LabResult<String> {
    if !layout.results().exists() {
        return Err(LabError::MissingArtifacts(vec![layout.results().display().to_string()]));
    }
    let results: ExperimentResults = read_json(&layout.results())?;
    let diagnostics: Option<Diagnostics> = if layout.diagnostics().exists() {
        Some(read_json(&layout.diagnostics())?)
    } else {
        None
    };
    let text = render(&results, diagnostics.as_ref());
    write_atomic(&layout.report(), text.as_bytes())?;
    Ok(text)
}
