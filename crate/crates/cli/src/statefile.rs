//! JSON codec for density matrices.
//!
//! ```json
//! {
//!   "dim": 2,
//!   "label": "rho",
//!   "entries": [
//!     [[1.0, 0.0], [0.0, 0.0]],
//!     [[0.0, 0.0], [0.0, 0.0]]
//!   ]
//! }
//! ```
//!
//! `entries` holds the matrix row-major as `[re, im]` pairs. It may be given
//! as a flat list of `dim²` pairs or nested by row; the canonical writer nests.

use std::fmt::Write as _;
use std::path::Path;

use adlab_core::linalg::{CMat, HermitianOperator, State};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::Value;

/// Largest `|A_ij − conj(A_ji)|` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum StateFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed state file: {0}")]
    Syntax(String),
    #[error("dim must be at least 1")]
    ZeroDim,
    #[error("expected {expected} entries for dim {dim}, found {found}")]
    EntryCount { dim: usize, expected: usize, found: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NotFinite { row: usize, col: usize },
    #[error("matrix is not Hermitian: entries ({row}, {col}) and ({col}, {row}) differ by {deviation:e}")]
    NotHermitian { row: usize, col: usize, deviation: f64 },
    #[error("not a density matrix: {0}")]
    NotState(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    dim: usize,
    entries: Value,
    #[serde(default)]
    label: Option<String>,
}

/// A parsed state together with its optional label.
#[derive(Clone, Debug)]
pub struct StateFile {
    pub state: State,
    pub label: Option<String>,
}

fn pair(v: &Value) -> Option<[f64; 2]> {
    let a = v.as_array()?;
    if a.len() != 2 {
        return None;
    }
    Some([a[0].as_f64()?, a[1].as_f64()?])
}

fn flatten(entries: &Value) -> Result<Vec<[f64; 2]>, StateFileError> {
    let bad = || StateFileError::Syntax("entries must be a list of [re, im] pairs or of rows of them".into());
    let list = entries.as_array().ok_or_else(bad)?;
    let mut out = Vec::new();
    for item in list {
        if let Some(p) = pair(item) {
            out.push(p);
        } else {
            for p in item.as_array().ok_or_else(bad)? {
                out.push(pair(p).ok_or_else(bad)?);
            }
        }
    }
    Ok(out)
}

impl StateFile {
    pub fn parse(text: &str) -> Result<Self, StateFileError> {
        let raw: RawFile = serde_json::from_str(text).map_err(|e| StateFileError::Syntax(e.to_string()))?;
        let d = raw.dim;
        if d == 0 {
            return Err(StateFileError::ZeroDim);
        }
        let flat = flatten(&raw.entries)?;
        if flat.len() != d * d {
            return Err(StateFileError::EntryCount { dim: d, expected: d * d, found: flat.len() });
        }
        let m = CMat::from_fn(d, d, |i, j| Complex64::new(flat[i * d + j][0], flat[i * d + j][1]));
        for i in 0..d {
            for j in 0..d {
                if !(m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()) {
                    return Err(StateFileError::NotFinite { row: i, col: j });
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let deviation = (m[(i, j)] - m[(j, i)].conj()).norm();
                if deviation > HERMITIAN_TOL {
                    return Err(StateFileError::NotHermitian { row: i, col: j, deviation });
                }
            }
        }
        let op = HermitianOperator::new(m).map_err(|e| StateFileError::NotState(e.to_string()))?;
        let state = State::new(op).map_err(|e| StateFileError::NotState(e.to_string()))?;
        Ok(Self { state, label: raw.label })
    }

    pub fn read(path: &Path) -> Result<Self, StateFileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| StateFileError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Canonical text: fixed key order, one row per line, shortest
    /// round-trip numbers, `-0.0` written as `0.0`.
    pub fn to_canonical(&self) -> String {
        write_canonical(&self.state, self.label.as_deref())
    }
}

fn number(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    serde_json::to_string(&x).expect("finite entries")
}

pub fn write_canonical(state: &State, label: Option<&str>) -> String {
    let d = state.dim();
    let m = state.matrix();
    let mut s = String::new();
    writeln!(s, "{{\n  \"dim\": {d},").unwrap();
    if let Some(l) = label {
        writeln!(s, "  \"label\": {},", serde_json::to_string(l).unwrap()).unwrap();
    }
    s.push_str("  \"entries\": [\n");
    for i in 0..d {
        let row: Vec<String> =
            (0..d).map(|j| format!("[{}, {}]", number(m[(i, j)].re), number(m[(i, j)].im))).collect();
        writeln!(s, "    [{}]{}", row.join(", "), if i + 1 < d { "," } else { "" }).unwrap();
    }
    s.push_str("  ]\n}\n");
    s
}

/// Canonical JSON value for embedding a state in a report.
pub fn state_value(state: &State) -> Value {
    serde_json::from_str(&write_canonical(state, None)).expect("canonical text is JSON")
}

#[cfg(test)]
mod tests {
    use super::*;
    use adlab_core::testkit::{InstanceStream, Seed};

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let mut s = InstanceStream::new(Seed(3));
        for d in [1, 2, 3, 4] {
            let st = s.state(d, d.min(2));
            let text = write_canonical(&st, Some("x"));
            let back = StateFile::parse(&text).unwrap();
            assert_eq!(back.to_canonical(), text);
            assert_eq!(back.state.matrix(), st.matrix());
        }
    }

    #[test]
    fn flat_entries_accepted() {
        let f = StateFile::parse(r#"{"dim": 2, "entries": [[0.5,0],[0,0],[0,0],[0.5,0]]}"#).unwrap();
        assert!((f.state.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(f.label.is_none());
    }

    #[test]
    fn errors_name_the_invariant() {
        let cases = [
            (r#"{"dim": 2, "entries": [[1,0],[0,0],[0,0]]}"#, "expected 4 entries"),
            (r#"{"dim": 2, "entries": [[0.5,0],[0.1,0],[0.2,0],[0.5,0]]}"#, "not Hermitian"),
            (r#"{"dim": 2, "entries": [[1.5,0],[0,0],[0,0],[-0.5,0]]}"#, "negative"),
            (r#"{"dim": 2, "entries": [[0.6,0],[0,0],[0,0],[0.6,0]]}"#, "trace"),
            (r#"{"dim": 0, "entries": []}"#, "at least 1"),
            (r#"{"dim": 1, "entries": [[1,0]], "extra": 1}"#, "unknown field"),
            ("not json", "malformed"),
        ];
        for (text, needle) in cases {
            let e = StateFile::parse(text).unwrap_err().to_string();
            assert!(e.contains(needle), "{text}: {e}");
        }
    }
}
