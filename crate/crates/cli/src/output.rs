//! Deterministic CSV writers: fixed column order, fixed row order, floats
//! at 15 significant digits, so identical runs diff byte-identically.

use std::fs;
use std::io::Write;
use std::path::Path;

use qwalk_core::measures::{LimitMeasureResult, SpectralData};
use qwalk_core::table::MeasureTable;

use crate::CliError;

/// 15 significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.14e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt_float(v),
        None => String::new(),
    }
}

/// Per-vertex measure table comparing the available routes.
pub fn write_measure_csv(
    path: &Path,
    direct: &LimitMeasureResult,
    spectral: &LimitMeasureResult,
    lower_bound: Option<&[f64]>,
    closed_form: Option<&MeasureTable>,
) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    writeln!(
        f,
        "vertex,direct_value,spectral_value,hr_part,hs_part,lower_bound,closed_form"
    )?;
    let comps = spectral.components.as_ref();
    let len = direct.table.len().min(spectral.table.len());
    for u in 0..len {
        let hr = comps.map(|c| c.mass_point.get(u));
        let hs = comps.map(|c| c.h_s.get(u));
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            u,
            fmt_float(direct.table.get(u)),
            fmt_float(spectral.table.get(u)),
            fmt_opt(hr),
            fmt_opt(hs),
            fmt_opt(lower_bound.map(|b| b[u])),
            fmt_opt(closed_form.map(|c| c.get(u))),
        )?;
    }
    Ok(())
}

/// Spectral summary: one row per lifted eigenvector.
pub fn write_spectral_csv(path: &Path, data: &SpectralData) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    writeln!(f, "lambda,branch,norm2,is_mass_point,residual")?;
    for l in &data.lifts {
        let is_mass = data
            .mass_lambdas
            .iter()
            .any(|&m| (l.lambda - m).abs() < 1e-9);
        writeln!(
            f,
            "{},{},{},{},{}",
            fmt_float(l.lambda),
            l.branch.as_str(),
            fmt_float(l.norm_sq),
            is_mass,
            fmt_float(l.residual),
        )?;
    }
    if let Some(hs) = &data.hs {
        for eta in &hs.pairs {
            writeln!(
                f,
                "{},{},{},{},{}",
                fmt_float(-1.0),
                "hs_pair",
                fmt_float(eta.norm_sq),
                false,
                fmt_float(0.0),
            )?;
        }
        if let Some(term) = &hs.terminal {
            writeln!(
                f,
                "{},{},{},{},{}",
                fmt_float(-1.0),
                if term.square_summable {
                    "hs_terminal"
                } else {
                    "hs_terminal_divergent"
                },
                fmt_float(term.truncated_norm_sq),
                false,
                fmt_float(term.tail_estimate),
            )?;
        }
    }
    Ok(())
}

/// Convergence sweep rows: `(n, t, sup gap between direct and spectral)`.
pub fn write_sweep_csv(path: &Path, rows: &[(usize, usize, f64)]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    writeln!(f, "n,t,sup_gap")?;
    for &(n, t, gap) in rows {
        writeln!(f, "{},{},{}", n, t, fmt_float(gap))?;
    }
    Ok(())
}
