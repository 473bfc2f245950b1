//! Result tables and audit trails.
//!
//! Every experiment emits the same CSV layout so downstream tooling can
//! concatenate runs: `experiment,n,p,t,phi_hat,lower,upper,exact_or_mc,
//! stderr,seed`, plus a trailing `lz_overlay` column when the reference
//! curve is requested. Cells without a defined value stay empty. Floats go
//! through the shortest round-trip formatting, so a fixed config and seed
//! reproduce the file byte for byte.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::CliError;

pub const BASE_HEADER: [&str; 10] =
    ["experiment", "n", "p", "t", "phi_hat", "lower", "upper", "exact_or_mc", "stderr", "seed"];

/// One output record. `n` is the coordinate count of the functional (the
/// matrix side for net audits). Tail experiments put the certified
/// log-probability interval in `lower`/`upper`; free-energy experiments
/// put the certified interval for the exact free energy there.
#[derive(Clone, Debug)]
pub struct Row {
    pub experiment: String,
    pub n: usize,
    pub p: Option<f64>,
    pub t: Option<f64>,
    pub phi_hat: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub exact_or_mc: Option<f64>,
    pub stderr: Option<f64>,
    pub seed: u64,
    pub lz_overlay: Option<f64>,
}

impl Row {
    pub fn new(experiment: &str, n: usize, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            n,
            p: None,
            t: None,
            phi_hat: None,
            lower: None,
            upper: None,
            exact_or_mc: None,
            stderr: None,
            seed,
            lz_overlay: None,
        }
    }
}

fn cell(v: Option<f64>) -> String {
    match v {
        // Display on f64 is the shortest decimal that parses back exactly
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

pub fn render_csv(rows: &[Row], overlay: bool) -> String {
    let mut out = String::new();
    out.push_str(&BASE_HEADER.join(","));
    if overlay {
        out.push_str(",lz_overlay");
    }
    out.push('\n');
    for r in rows {
        let mut fields = vec![
            r.experiment.clone(),
            r.n.to_string(),
            cell(r.p),
            cell(r.t),
            cell(r.phi_hat),
            cell(r.lower),
            cell(r.upper),
            cell(r.exact_or_mc),
            cell(r.stderr),
            r.seed.to_string(),
        ];
        if overlay {
            fields.push(cell(r.lz_overlay));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Rows plus the itemized evidence behind them, accumulated as the run
/// progresses so a failure can still flush what exists.
pub struct RunState {
    pub rows: Vec<Row>,
    pub audit_entries: Vec<Value>,
    pub overlay: bool,
}

impl RunState {
    pub fn new(overlay: bool) -> Self {
        Self { rows: Vec::new(), audit_entries: Vec::new(), overlay }
    }
}

pub struct WrittenFiles {
    pub csv: PathBuf,
    pub audit: PathBuf,
    pub partial: bool,
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.flush()
}

/// Write `<experiment>.csv` and `<experiment>_audit.json` under `dir`.
/// Interrupted runs get a `.partial` suffix on both files instead, so a
/// complete artifact is never confused with a truncated one.
pub fn write_outputs(
    dir: &Path,
    experiment: &str,
    state: &RunState,
    config_echo: &Value,
    partial: bool,
) -> Result<WrittenFiles, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("creating output dir {}: {e}", dir.display())))?;
    let suffix = if partial { ".partial" } else { "" };
    let csv_path = dir.join(format!("{experiment}.csv{suffix}"));
    let audit_path = dir.join(format!("{experiment}_audit.json{suffix}"));

    let csv_text = render_csv(&state.rows, state.overlay);
    write_atomic(&csv_path, &csv_text)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", csv_path.display())))?;

    let audit = serde_json::json!({
        "experiment": experiment,
        "complete": !partial,
        "config": config_echo,
        "entries": state.audit_entries,
    });
    let audit_text = serde_json::to_string_pretty(&audit)
        .map_err(|e| CliError::Io(format!("encoding audit: {e}")))?;
    write_atomic(&audit_path, &audit_text)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", audit_path.display())))?;

    Ok(WrittenFiles { csv: csv_path, audit: audit_path, partial })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cells_stay_empty() {
        let mut r = Row::new("rate", 10, 7);
        r.p = Some(0.3);
        r.phi_hat = Some(1.25);
        let text = render_csv(&[r], false);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), BASE_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "rate,10,0.3,,1.25,,,,,7");
    }

    #[test]
    fn overlay_column_is_appended_only_on_request() {
        let mut r = Row::new("triangles", 120, 7);
        r.lz_overlay = Some(0.5);
        let with = render_csv(std::slice::from_ref(&r), true);
        assert!(with.starts_with(&format!("{},lz_overlay\n", BASE_HEADER.join(","))));
        assert!(with.trim_end().ends_with(",0.5"));
        let without = render_csv(&[r], false);
        assert!(!without.contains("lz_overlay"));
    }

    #[test]
    fn float_cells_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.0_f64.powi(-40), 1234.5678e-12, f64::NEG_INFINITY] {
            let text = cell(Some(v));
            if v.is_finite() {
                assert_eq!(text.parse::<f64>().unwrap(), v);
            } else {
                assert_eq!(text, "-inf");
            }
        }
    }
}
