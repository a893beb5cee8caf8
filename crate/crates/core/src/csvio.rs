//! CSV schemas and reading/writing helpers.
//!
//! Every file starts with exactly one header line naming the columns below.
//! Numbers use the shortest representation that round-trips, booleans are
//! `0`/`1`, and a missing optional value is an empty cell.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    pub columns: &'static [&'static str],
}

/// Per-step SQG time series.
pub const SQG_SERIES: Schema = Schema {
    name: "sqg time series",
    columns: &["time", "max_grad_perp", "theta_sq_integral", "theta_integral", "dt", "courant", "cfl_exceeded", "tail_fraction"],
};

/// Per-step Euler time series.
pub const EULER_SERIES: Schema = Schema {
    name: "euler time series",
    columns: &["time", "max_vorticity", "kinetic_energy", "helicity", "dt", "courant", "cfl_exceeded", "tail_fraction"],
};

/// Per-frame segment diagnostics.
pub const DIAGNOSTICS: Schema = Schema {
    name: "segment diagnostics",
    columns: &[
        "time", "lineage", "seeded", "length", "q", "omega", "omega_l", "omega_start", "u_max", "v_max", "int_kappa",
        "int_tau", "c0", "endpoint_max", "resolved", "inviscid", "normal_undefined",
    ],
};

/// Identity terms at interior frames of each lineage.
pub const IDENTITY: Schema = Schema {
    name: "identity residuals",
    columns: &["time", "lineage", "dq_dt", "i1", "i2", "i3", "i4", "residual", "relative_residual"],
};

/// Measured maximum against the growth envelopes.
pub const ENVELOPE: Schema = Schema {
    name: "growth envelope",
    columns: &[
        "time", "omega", "single_exponential", "double_exponential", "bkm_integral", "flags_ok", "window_clean",
        "single_dominates", "double_dominates", "failed_flags",
    ],
};

/// Samples along a traced 2D curve.
pub const CURVE_2D: Schema = Schema {
    name: "curve samples (2D)",
    columns: &["s", "beta", "x", "y", "omega_mag", "kappa", "tau", "u_xi", "u_xi_perp", "alpha", "flags"],
};

/// Samples along a traced 3D curve.
pub const CURVE_3D: Schema = Schema {
    name: "curve samples (3D)",
    columns: &["s", "beta", "x", "y", "z", "omega_mag", "kappa", "tau", "u_xi", "u_xi_perp", "alpha", "flags"],
};

/// Velocity split terms per family member and probe (vector magnitudes).
pub const APPENDIX_TERMS: Schema = Schema {
    name: "velocity split terms",
    columns: &[
        "sharpness", "probe", "x", "y", "z", "near", "intermediate", "outer_cutoff", "inner_cutoff", "kernel", "far",
        "far_cutoff", "far_kernel", "total", "direct", "relative_error",
    ],
};

/// One row per family member.
pub const APPENDIX_FAMILY: Schema = Schema {
    name: "family summary",
    columns: &[
        "sharpness", "omega_max", "speed_max", "log_ratio", "delta", "near_ratio", "probe_near_ratio", "kernel_ratio",
        "kernel_ceiling", "max_relative_error", "representation_error",
    ],
};

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Renders a header plus rows.
pub fn render(schema: &Schema, rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(schema.columns).map_err(csv_err)?;
    for (i, r) in rows.iter().enumerate() {
        if r.len() != schema.columns.len() {
            return Err(Error::Shape(format!(
                "{} row {i} has {} cells, schema has {}",
                schema.name,
                r.len(),
                schema.columns.len()
            )));
        }
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// Reads CSV text with a header line; rows must match the header width.
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(Error::Format("csv: missing header".into()));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows })
    }

    /// Reads CSV text whose header must equal `schema` exactly.
    pub fn parse_with(text: &str, schema: &Schema) -> Result<Self> {
        let t = Self::parse(text)?;
        if t.header != schema.columns {
            return Err(Error::Format(format!(
                "{} header mismatch: expected `{}`, found `{}`",
                schema.name,
                schema.columns.join(","),
                t.header.join(",")
            )));
        }
        Ok(t)
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("csv: no column `{name}`")))
    }

    /// Numeric column; empty cells read as NaN.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let cell = row[i].trim();
                if cell.is_empty() {
                    Ok(f64::NAN)
                } else {
                    cell.parse::<f64>()
                        .map_err(|_| Error::Format(format!("csv: row {} column `{name}`: `{cell}` is not a number", r + 1)))
                }
            })
            .collect()
    }

    /// `0`/`1` column where an empty cell means not available.
    pub fn optional_flags(&self, name: &str) -> Result<Vec<Option<bool>>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| match row[i].trim() {
                "" => Ok(None),
                "0" => Ok(Some(false)),
                "1" => Ok(Some(true)),
                other => Err(Error::Format(format!("csv: row {} column `{name}`: `{other}` is not 0/1", r + 1))),
            })
            .collect()
    }

    /// `0`/`1` column.
    pub fn flags(&self, name: &str) -> Result<Vec<bool>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| match row[i].trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Format(format!("csv: row {} column `{name}`: `{other}` is not 0/1", r + 1))),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_and_parse_round_trip() {
        let rows = vec![vec![num(0.1), opt(None), flag(true)], vec![num(1e-300), opt(Some(2.5)), flag(false)]];
        let schema = Schema {
            name: "t",
            columns: &["a", "b", "c"],
        };
        let text = render(&schema, &rows).unwrap();
        assert_eq!(text, "a,b,c\n0.1,,1\n1e-300,2.5,0\n");
        let t = Table::parse_with(&text, &schema).unwrap();
        assert_eq!(t.column("a").unwrap(), vec![0.1, 1e-300]);
        assert!(t.column("b").unwrap()[0].is_nan());
        assert_eq!(t.flags("c").unwrap(), vec![true, false]);
        assert!(t.column("zz").is_err());
        assert!(Table::parse_with(&text, &SQG_SERIES).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Table::parse("a,b\n1,2\n3\n").is_err());
        assert!(render(&SQG_SERIES, &[vec!["1".into()]]).is_err());
    }
}
