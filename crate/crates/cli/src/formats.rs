//! Plain-text diagnostics: VAE weight snapshots and chain trace dumps.
//!
//! A snapshot lists every parameter array as a `name rows cols` line
//! followed by `rows` lines of `cols` space-separated values in row-major
//! order. Values use Rust's shortest round-trip formatting, so importing
//! a snapshot restores the weights bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use brdm_core::mcmc::Chain;
use brdm_core::vae::{VaePrior, ARRAY_NAMES};

use crate::error::{CliError, Result};
use crate::table::fmt_float;

pub fn write_snapshot(prior: &VaePrior) -> String {
    let mut out = String::new();
    for array in prior.params.arrays() {
        let [rows, cols] = array.shape;
        let _ = writeln!(out, "{} {rows} {cols}", array.name);
        for row in array.values.chunks(cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

/// Loads a snapshot into `prior`. Every array must appear exactly once
/// with the shape `prior` expects.
pub fn read_snapshot(text: &str, path: &Path, prior: &mut VaePrior) -> Result<()> {
    let err = |line: usize, message: String| CliError::Snapshot {
        path: path.into(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let mut seen = Vec::new();
    while let Some((i, header)) = lines.next() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [name, rows, cols] = parts[..] else {
            return Err(err(
                i + 1,
                format!("expected `name rows cols`, got `{header}`"),
            ));
        };
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(i + 1, format!("bad dimension `{s}`")))
        };
        let (rows, cols) = (parse_dim(rows)?, parse_dim(cols)?);
        if seen.contains(&name) {
            return Err(err(i + 1, format!("array `{name}` repeated")));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (j, line) = lines
                .next()
                .ok_or_else(|| err(i + 1, format!("`{name}` is missing rows")))?;
            let row = line
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| err(j + 1, format!("bad value `{v}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != cols {
                return Err(err(
                    j + 1,
                    format!("expected {cols} values, got {}", row.len()),
                ));
            }
            values.extend(row);
        }
        prior
            .set_array(name, [rows, cols], &values)
            .map_err(|e| err(i + 1, e.to_string()))?;
        seen.push(name);
    }
    if let Some(missing) = ARRAY_NAMES.iter().find(|n| !seen.contains(n)) {
        return Err(CliError::Snapshot {
            path: path.into(),
            message: format!("array `{missing}` missing"),
        });
    }
    Ok(())
}

/// One tab-separated line per step: step number (from 1), proposal
/// components, utility, precision and `1`/`0` for accepted.
pub fn write_trace(chain: &Chain<Vec<f64>>) -> String {
    let mut out = String::new();
    for (k, step) in chain.trace.iter().enumerate() {
        let mut fields = vec![(k + 1).to_string()];
        fields.extend(step.proposal.iter().map(|&a| fmt_float(a)));
        fields.push(fmt_float(step.utility));
        fields.push(fmt_float(step.gamma));
        fields.push(if step.accepted { "1" } else { "0" }.into());
        let _ = writeln!(out, "{}", fields.join("\t"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use brdm_core::mcmc::{run_action_chain, ChainConfig};
    use brdm_core::vae::VaeArch;
    use brdm_core::{make_gaussian_task, GaussianTaskSpec, RngState};

    fn seeded(seed: u64) -> VaePrior {
        VaePrior::new(VaeArch::default(), 1e-2, &mut RngState::new(seed)).unwrap()
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let original = seeded(1);
        let text = write_snapshot(&original);
        let mut restored = seeded(2);
        assert_ne!(restored.params, original.params);
        read_snapshot(&text, Path::new("p.txt"), &mut restored).unwrap();
        assert_eq!(restored.params, original.params);
        assert_eq!(write_snapshot(&restored), text);
    }

    #[test]
    fn snapshot_layout() {
        let text = write_snapshot(&seeded(3));
        assert_eq!(text.lines().next(), Some("encoder.hidden.weight 16 1"));
        let headers: Vec<&str> = text
            .lines()
            .filter_map(|l| l.split(' ').next())
            .filter(|first| first.starts_with(char::is_alphabetic))
            .collect();
        assert_eq!(headers, ARRAY_NAMES.to_vec());
        // A header per array plus one line per matrix row.
        assert_eq!(
            text.lines().count(),
            10 + 16 + 16 + 2 + 2 + 2 + 2 + 16 + 16 + 1 + 1
        );
    }

    #[test]
    fn snapshot_errors() {
        let text = write_snapshot(&seeded(4));
        let mut prior = seeded(5);
        let p = Path::new("p.txt");
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(read_snapshot(&truncated, p, &mut prior).is_err());
        let renamed = text.replacen("encoder.hidden.weight", "encoder.bogus", 1);
        assert!(read_snapshot(&renamed, p, &mut prior).is_err());
        let reshaped = text.replacen("encoder.hidden.weight 16 1", "encoder.hidden.weight 8 2", 1);
        assert!(read_snapshot(&reshaped, p, &mut prior).is_err());
    }

    #[test]
    fn trace_lines() {
        let world = make_gaussian_task(&GaussianTaskSpec::default()).unwrap();
        let chain = run_action_chain(
            &world,
            0,
            &[0.5],
            &ChainConfig::default().with_steps(7),
            &mut RngState::new(1),
        );
        let text = write_trace(&chain);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        for (k, line) in lines.iter().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            assert_eq!(f.len(), 5);
            assert_eq!(f[0], (k + 1).to_string());
            assert!(f[4] == "0" || f[4] == "1");
        }
        assert_eq!(lines[0].split('\t').nth(3), Some("1"));
    }
}
