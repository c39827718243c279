//! Cell manifest: which Touchstone files make up which unit cell.
//!
//! ```json
//! {
//!   "cells": [
//!     {
//!       "name": "pin_diode_t",
//!       "kind": "transmission",
//!       "effective": false,
//!       "f0_hz": 27.3e9,
//!       "states": [
//!         { "id": "000", "path": "pin_t_000.s2p" },
//!         { "id": "180", "path": "pin_t_180.s2p" }
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! `kind`, `effective` and `f0_hz` are optional. Paths are relative to the
//! manifest's directory. The port count of each file follows its extension.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{parse_touchstone, ContrastKind, PortCount, SParameterTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoiManifest {
    pub cells: Vec<CellEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellEntry {
    pub name: String,
    #[serde(default)]
    pub kind: Option<String>,
    /// Use the effective-S11 mapping (switched delay-line cells).
    #[serde(default)]
    pub effective: bool,
    /// Central frequency for the normalized comparison; defaults to the
    /// extracted BoI midpoint.
    #[serde(default)]
    pub f0_hz: Option<f64>,
    pub states: Vec<StateEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub id: String,
    pub path: PathBuf,
}

impl BoiManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let m: BoiManifest = serde_path_to_error::deserialize(de).map_err(|e| {
            Error::scene(e.path().to_string(), e.inner().to_string())
        })?;
        if m.cells.is_empty() {
            return Err(Error::scene("cells", "at least one cell is required"));
        }
        for (i, c) in m.cells.iter().enumerate() {
            if c.states.is_empty() {
                return Err(Error::scene(
                    format!("cells[{i}].states"),
                    "at least one state is required",
                ));
            }
            if let Some(kind) = &c.kind {
                kind.parse::<ContrastKind>()
                    .map_err(|e| Error::scene(format!("cells[{i}].kind"), e.to_string()))?;
            }
            if m.cells[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::scene(format!("cells[{i}].name"), "duplicate cell name"));
            }
        }
        Ok(m)
    }
}

impl CellEntry {
    pub fn kind_or(&self, default: ContrastKind) -> ContrastKind {
        self.kind
            .as_deref()
            .map(|k| k.parse().expect("validated at parse time"))
            .unwrap_or(default)
    }

    /// Reads and parses every state file of this cell.
    pub fn load(&self, base_dir: &Path) -> Result<SParameterTable> {
        let mut parsed = Vec::with_capacity(self.states.len());
        for st in &self.states {
            let path = base_dir.join(&st.path);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let ports = path
                .extension()
                .and_then(|e| e.to_str())
                .and_then(PortCount::from_extension);
            let state = parse_touchstone(&bytes, &st.id, ports).map_err(|e| match e {
                Error::Touchstone { line, message } => Error::Touchstone {
                    line,
                    message: format!("{}: {message}", path.display()),
                },
                other => other,
            })?;
            parsed.push(state);
        }
        SParameterTable::from_touchstone(parsed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys_with_path() {
        let err = BoiManifest::parse(r#"{"cells":[{"name":"a","states":[],"colour":1}]}"#)
            .unwrap_err();
        match err {
            Error::Scene { path, .. } => assert!(path.starts_with("cells[0]"), "{path}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn rejects_bad_kind_and_empty_states() {
        assert!(BoiManifest::parse(r#"{"cells":[{"name":"a","kind":"sideways","states":[{"id":"x","path":"x.s1p"}]}]}"#).is_err());
        assert!(BoiManifest::parse(r#"{"cells":[{"name":"a","states":[]}]}"#).is_err());
        assert!(BoiManifest::parse(r#"{"cells":[]}"#).is_err());
    }

    #[test]
    fn loads_files_relative_to_base() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.s1p"), "# GHZ S RI R 50\n1 1 0\n2 1 0\n").unwrap();
        std::fs::write(dir.path().join("b.s1p"), "# GHZ S RI R 50\n1 -1 0\n2 -1 0\n").unwrap();
        let m = BoiManifest::parse(
            r#"{"cells":[{"name":"anti","states":[{"id":"a","path":"a.s1p"},{"id":"b","path":"b.s1p"}]}]}"#,
        )
        .unwrap();
        let t = m.cells[0].load(dir.path()).unwrap();
        assert_eq!(t.states().len(), 2);
        assert_eq!(m.cells[0].kind_or(ContrastKind::Reflection), ContrastKind::Reflection);
    }
}
