//! The bench matrix: every model against every approach, one cell at a time.

use std::fmt::Write;
use std::path::Path;
use std::time::Duration;

use pgsynth_api::{model_hash, BenchCell, BenchReport, BenchRow, ErrorKind, RunRequest, APPROACHES};
use pgsynth_client::{Client, ClientError};

use crate::{model_name, Failure};

/// Extra time the client grants a cell beyond the service-side budget.
const GRACE: Duration = Duration::from_secs(30);

pub async fn run(
    client: &Client,
    dir: &Path,
    approaches: &[String],
    timeout: f64,
    max_nodes: Option<usize>,
) -> Result<BenchReport, Failure> {
    if !(timeout > 0.0 && timeout.is_finite()) {
        return Err(Failure::Input(format!("timeout must be positive, got {timeout}")));
    }
    if let Some(a) = approaches.iter().find(|a| !APPROACHES.contains(&a.as_str())) {
        return Err(Failure::Input(format!("unknown approach {a:?}; expected one of {}", APPROACHES.join(", "))));
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Input(format!("cannot read {}: {e}", dir.display())))?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pg"))
        .collect();
    files.sort();
    let mut report = BenchReport { timeout_s: timeout, approaches: approaches.to_vec(), rows: Vec::new() };
    let budget = Duration::from_secs_f64(timeout);
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| Failure::Input(format!("cannot read {}: {e}", f.display())))?;
        let mut row = BenchRow {
            model: model_name(&f),
            file: f.display().to_string(),
            model_hash: model_hash(&text),
            cells: Vec::new(),
        };
        for a in approaches {
            let req = RunRequest {
                name: Some(row.model.clone()),
                model: text.clone(),
                approach: a.clone(),
                max_nodes,
                timeout_ms: Some(budget.as_millis() as u64),
                ..Default::default()
            };
            let mut cell = BenchCell { approach: a.clone(), stats: None, timeout: false, error: None };
            match tokio::time::timeout(budget + GRACE, client.solve(&req)).await {
                Err(_) => cell.timeout = true,
                Ok(Ok(r)) => cell.stats = Some(r.stats),
                Ok(Err(ClientError::Api { body, .. })) if body.kind == ErrorKind::Budget => {
                    cell.timeout = true;
                    cell.stats = body.partial_stats.map(|s| *s);
                }
                Ok(Err(e)) => cell.error = Some(e.to_string()),
            }
            eprintln!("{} {a}: {}", row.model, cell_text(&cell));
            row.cells.push(cell);
        }
        report.rows.push(row);
    }
    Ok(report)
}

fn cell_text(c: &BenchCell) -> String {
    match (&c.stats, c.timeout, &c.error) {
        (_, true, _) => "TO".into(),
        (_, _, Some(_)) => "ERR".into(),
        (Some(s), _, _) => format!("{}/{} {:.2}s", s.num_nodes, s.num_edges, (s.build_ms + s.solve_ms) as f64 / 1000.0),
        _ => "-".into(),
    }
}

/// Row verdict: all finished cells must agree.
fn verdict(row: &BenchRow) -> &'static str {
    let vs: Vec<bool> = row.cells.iter().filter(|c| !c.timeout).filter_map(|c| c.stats.as_ref()?.realizable).collect();
    match vs.first() {
        None => "?",
        Some(&v) if vs.iter().any(|&w| w != v) => "MISMATCH",
        Some(true) => "yes",
        Some(false) => "no",
    }
}

/// Table with one row per model: |xi|, per approach |V|/|E| and time, and the verdict.
pub fn table(r: &BenchReport) -> String {
    let mut out = String::new();
    let w = 24;
    let _ = write!(out, "{:<16} {:>8}", "model", "|xi|");
    for a in &r.approaches {
        let _ = write!(out, "  {a:<w$}");
    }
    let _ = writeln!(out, "  realizable");
    for row in &r.rows {
        let xi = row.cells.iter().find_map(|c| c.stats.as_ref()).map(|s| s.num_symmetries.to_string()).unwrap_or("-".into());
        let _ = write!(out, "{:<16} {:>8}", row.model, xi);
        for c in &row.cells {
            let _ = write!(out, "  {:<w$}", cell_text(c));
        }
        let _ = writeln!(out, "  {}", verdict(row));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use pgsynth_api::Stats;

    fn cell(realizable: Option<bool>, timeout: bool) -> BenchCell {
        let stats = Stats { num_nodes: 5, num_edges: 4, realizable, num_symmetries: 2, ..Default::default() };
        BenchCell { approach: "canonical".into(), stats: Some(stats), timeout, error: None }
    }

    fn row(cells: Vec<BenchCell>) -> BenchRow {
        BenchRow { model: "m".into(), file: "m.pg".into(), model_hash: "h".into(), cells }
    }

    #[test]
    fn verdicts() {
        assert_eq!(verdict(&row(vec![cell(Some(true), false), cell(Some(true), false)])), "yes");
        assert_eq!(verdict(&row(vec![cell(Some(true), false), cell(Some(false), false)])), "MISMATCH");
        assert_eq!(verdict(&row(vec![cell(None, true), cell(Some(false), false)])), "no");
        assert_eq!(verdict(&row(vec![cell(None, true)])), "?");
    }

    #[test]
    fn table_marks_timeouts() {
        let r = BenchReport {
            timeout_s: 1.0,
            approaches: vec!["explicit".into(), "canonical".into()],
            rows: vec![row(vec![cell(None, true), cell(Some(true), false)])],
        };
        let t = table(&r);
        assert_eq!(t.lines().count(), 2);
        assert!(t.lines().nth(1).unwrap().contains("TO"));
        assert!(t.contains("5/4 0.00s"));
        assert!(t.trim_end().ends_with("yes"));
    }

    #[test]
    fn empty_report_has_only_a_header() {
        let r = BenchReport { timeout_s: 1.0, approaches: vec!["canonical".into()], rows: Vec::new() };
        assert_eq!(table(&r).lines().count(), 1);
    }
}
