//! Flat CSV and versioned JSON envelopes for fields and sweep reports.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so identical values give
//! byte-identical files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiscreteDomain, Field, Rank};
use crate::scalar::Real;
use crate::solver::ApproxRecord;

pub const FIELD_FORMAT: &str = "plaplab-field";
pub const FIELD_VERSION: u32 = 1;

/// Column order of the k-sweep CSV.
pub const KSWEEP_COLUMNS: [&str; 8] =
    ["k", "E_p_unweighted", "E_p_weighted", "E_r_unweighted", "E_r_weighted", "xpr_distance", "iterations", "residual"];

/// Self-describing JSON form of a [`Field`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEnvelope {
    pub format: String,
    pub version: u32,
    pub rank: Rank,
    pub width: usize,
    pub num_cells: usize,
    pub dim: usize,
    pub h: f64,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
    /// Row-major: `width` entries per cell, cells in domain order.
    pub values: Vec<f64>,
}

impl FieldEnvelope {
    pub fn new<S: Real>(field: &Field<S>, dom: &DiscreteDomain<S>) -> Self {
        FieldEnvelope {
            format: FIELD_FORMAT.into(),
            version: FIELD_VERSION,
            rank: field.rank,
            width: field.width,
            num_cells: field.num_cells(),
            dim: dom.dim(),
            h: dom.h().as_f64(),
            meta: serde_json::Map::new(),
            values: field.values.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: serde_json::Value) -> Self {
        self.meta.insert(key.into(), value);
        self
    }

    /// Checks the envelope against `dom` and returns the field.
    pub fn into_field<S: Real>(self, dom: &DiscreteDomain<S>) -> Result<Field<S>> {
        if self.format != FIELD_FORMAT || self.version != FIELD_VERSION {
            return Err(Error::Format(format!("unsupported envelope {} v{}", self.format, self.version)));
        }
        if self.num_cells != dom.num_cells() || self.values.len() != self.num_cells * self.width {
            return Err(Error::Mismatch(format!(
                "envelope has {} cells x {} values, domain has {} cells",
                self.num_cells,
                self.width,
                dom.num_cells()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("envelope contains non-finite values".into()));
        }
        let field = Field { rank: self.rank, width: self.width, values: self.values.into_iter().map(S::lit).collect() };
        dom.check_field(&field)?;
        Ok(field)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("field envelope: {e}")))
    }
}

/// `cell,x,y,v0,...` with one row per interior cell.
pub fn field_csv<S: Real>(field: &Field<S>, dom: &DiscreteDomain<S>) -> String {
    let mut out = String::from("cell,x,y");
    for j in 0..field.width {
        out.push_str(&format!(",v{j}"));
    }
    out.push('\n');
    for c in 0..field.num_cells() {
        let x = dom.center(c);
        out.push_str(&format!("{c},{:e},{:e}", x[0].as_f64(), x[1].as_f64()));
        for v in field.cell(c) {
            out.push_str(&format!(",{:e}", v.as_f64()));
        }
        out.push('\n');
    }
    out
}

/// One row per level in [`KSWEEP_COLUMNS`] order.
pub fn ksweep_csv(records: &[ApproxRecord]) -> String {
    let mut out = KSWEEP_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}\n",
            r.k,
            r.e_p_unweighted,
            r.e_p_weighted,
            r.e_r_unweighted,
            r.e_r_weighted,
            r.xpr_distance,
            r.iterations,
            r.residual
        ));
    }
    out
}

/// Generic CSV from a header and pre-formatted rows.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
