//! The `plot` command: writes a standalone matplotlib script with the
//! frontier and agent summaries embedded as literals. Nothing is rendered
//! here; running the script produces `plot.png` next to it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::baseline::FRONTIER_HEADER;
use crate::config::AgentKind;
use crate::error::{CliError, Result};
use crate::output::OutputDir;
use crate::run::{SummaryRow, SUMMARY_HEADER};
use crate::table::{fmt_float, parse};

pub const PLOT_FILE: &str = "plot.py";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontierRow {
    pub beta: f64,
    pub mi_bits: f64,
    pub expected_utility: f64,
}

pub fn parse_frontier(text: &str, path: &Path) -> Result<Vec<FrontierRow>> {
    parse(text, path, &FRONTIER_HEADER, &["converged"])?
        .iter()
        .map(|row| {
            Ok(FrontierRow {
                beta: row.get(path, 0, "beta")?,
                mi_bits: row.get(path, 1, "mi_bits")?,
                expected_utility: row.get(path, 2, "expected_utility")?,
            })
        })
        .collect()
}

pub fn parse_summary(text: &str, path: &Path) -> Result<Vec<SummaryRow>> {
    parse(text, path, &SUMMARY_HEADER, &[])?
        .iter()
        .map(|row| {
            let kind: String = row.get(path, 0, "agent_kind")?;
            let kind: AgentKind = kind.parse().map_err(|message| CliError::Csv {
                path: path.into(),
                line: row.line,
                message,
            })?;
            Ok(SummaryRow {
                kind,
                total_steps: row.get(path, 1, "total_steps")?,
                action_steps: row.get(path, 2, "action_steps")?,
                replicate: row.get(path, 3, "replicate")?,
                mi_bits: row.get(path, 4, "mi_bits")?,
                expected_utility: row.get(path, 5, "expected_utility")?,
                mean_delta_u: row.get(path, 6, "mean_delta_u")?,
                stddev_delta_u: row.get(path, 7, "stddev_delta_u")?,
            })
        })
        .collect()
}

const SCRIPT_BODY: &str = r#"

def main():
    import os
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4.5))

    left.plot([r[1] for r in FRONTIER], [r[2] for r in FRONTIER],
              color="black", label="frontier")
    for kind, marker in (("single", "x"), ("multi", "o")):
        rows = [r for r in AGENTS if r[0] == kind]
        if rows:
            left.scatter([r[4] for r in rows], [r[5] for r in rows],
                         marker=marker, label=kind + "-prior")
    left.set_xlabel("I(W;A) [bits]")
    left.set_ylabel("E[U]")
    left.legend()

    groups = {}
    for r in AGENTS:
        groups.setdefault((r[0], r[1] - r[2]), {}).setdefault(r[1], []).append(r)
    for (kind, selection), by_total in sorted(groups.items()):
        totals = sorted(by_total)
        means = [sum(r[6] for r in by_total[t]) / len(by_total[t]) for t in totals]
        spreads = [sum(r[7] for r in by_total[t]) / len(by_total[t]) for t in totals]
        label = kind if kind == "single" else "%s, %d selection steps" % (kind, selection)
        right.errorbar(totals, means, yerr=spreads, marker="o", capsize=3, label=label)
    right.set_xlabel("steps per episode")
    right.set_ylabel("utility gain of the action chain")
    if groups:
        right.legend()

    fig.tight_layout()
    fig.savefig(os.path.join(os.path.dirname(os.path.abspath(__file__)), "plot.png"), dpi=150)


if __name__ == "__main__":
    main()
"#;

/// Script text. Agent rows appear once each, in input order.
pub fn plot_script(frontier: &[FrontierRow], agents: &[SummaryRow]) -> String {
    let mut s = String::from("#!/usr/bin/env python3\n");
    s.push_str("\"\"\"Frontier with agent points, and action-chain gain against budget.\"\"\"\n\n");
    s.push_str("# beta, mi_bits, expected_utility\nFRONTIER = [\n");
    for r in frontier {
        let _ = writeln!(
            s,
            "    ({}, {}, {}),",
            fmt_float(r.beta),
            fmt_float(r.mi_bits),
            fmt_float(r.expected_utility)
        );
    }
    s.push_str("]\n\n# ");
    s.push_str(&SUMMARY_HEADER.join(", "));
    s.push_str("\nAGENTS = [\n");
    for r in agents {
        let _ = writeln!(
            s,
            "    (\"{}\", {}, {}, {}, {}, {}, {}, {}),",
            r.kind,
            r.total_steps,
            r.action_steps,
            r.replicate,
            fmt_float(r.mi_bits),
            fmt_float(r.expected_utility),
            fmt_float(r.mean_delta_u),
            fmt_float(r.stddev_delta_u)
        );
    }
    s.push(']');
    s.push_str(SCRIPT_BODY);
    s
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn cmd_plot(frontier: &Path, summary: &Path, out: &OutputDir) -> Result<PathBuf> {
    out.claim(&[PLOT_FILE])?;
    let frontier_rows = parse_frontier(&read(frontier)?, frontier)?;
    let agent_rows = parse_summary(&read(summary)?, summary)?;
    out.write(PLOT_FILE, &plot_script(&frontier_rows, &agent_rows))
}
