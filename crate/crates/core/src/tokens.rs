//! Token streams (one `trans rot grip` triple per line) and decoded action lines.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::{ActionGrid, TokenTriple};

pub fn write_tokens<W: Write>(mut w: W, tokens: &[TokenTriple]) -> Result<()> {
    for t in tokens {
        writeln!(w, "{} {} {}", t.trans, t.rot, t.grip)?;
    }
    Ok(())
}

/// Reads a token stream, validating every triple against `grid`.
///
/// Blank lines are skipped; errors carry the 1-based line number.
pub fn read_tokens<R: BufRead>(r: R, grid: &ActionGrid) -> Result<Vec<TokenTriple>> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let ids = line
            .split_whitespace()
            .map(|s| s.parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                message: format!("token ids must be non-negative integers: {e}"),
            })?;
        let [trans, rot, grip] = ids[..] else {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 token ids, found {}", ids.len()),
            });
        };
        let v = grid.vocab_size() as u64;
        if let Some(bad) = [trans, rot, grip].into_iter().find(|&t| t >= v) {
            return Err(Error::Validation {
                line: lineno,
                message: format!("token {bad} out of range for vocabulary of {v}"),
            });
        }
        let t = TokenTriple {
            trans: trans as u32,
            rot: rot as u32,
            grip: grip as u32,
        };
        grid.check_tokens(t).map_err(|e| Error::Validation {
            line: lineno,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}

/// One raw-unit action per line: `x y z roll pitch yaw grip`, shortest
/// round-trip decimal representation.
pub fn write_actions<W: Write>(mut w: W, actions: &[[f64; 7]]) -> Result<()> {
    for a in actions {
        let line = a.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_actions<R: BufRead>(r: R) -> Result<Vec<[f64; 7]>> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        out.push(vals.try_into().map_err(|v: Vec<f64>| Error::Parse {
            line: idx + 1,
            message: format!("expected 7 values, found {}", v.len()),
        })?);
    }
    Ok(out)
}
