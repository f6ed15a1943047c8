use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA: &str = "orbiquant error-table v1";
pub const CSV_HEADER: &str = "quantity,N,t,m,error,band";

/// One tabulated residual. Mode-free quantities use `N = 0`, `m = 0` or a
/// sample index in `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorRow {
    pub quantity: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub m: i64,
    pub error: f64,
    pub band: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorTable {
    pub schema: String,
    pub rows: Vec<ErrorRow>,
}

/// Interior-band maximum for one `(quantity, N, t)` group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub quantity: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub rows: usize,
    pub max_error: f64,
}

/// `err(2m)/err(m)` with `err(m) = max(err(m), err(−m))` over band rows;
/// `None` when `err(m) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicRatio {
    pub quantity: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub m: i64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub bands: Vec<BandSummary>,
    pub ratios: Vec<DyadicRatio>,
}

fn check_row(row: &ErrorRow) -> Result<()> {
    if row.error.is_nan() || row.error < 0.0 {
        return Err(Error::Config(format!(
            "{}: error {} is not a nonnegative number",
            row.quantity, row.error
        )));
    }
    if !row.t.is_finite() {
        return Err(Error::Config(format!(
            "{}: time {} is not finite",
            row.quantity, row.t
        )));
    }
    if row.quantity.is_empty() || row.quantity.contains([',', '\n', '\r', '"']) {
        return Err(Error::Config(format!(
            "invalid quantity name `{}`",
            row.quantity
        )));
    }
    Ok(())
}

impl ErrorTable {
    pub fn new() -> Self {
        ErrorTable {
            schema: SCHEMA.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        quantity: impl Into<String>,
        n: usize,
        t: f64,
        m: i64,
        error: f64,
        band: bool,
    ) -> Result<()> {
        let row = ErrorRow {
            quantity: quantity.into(),
            n,
            t,
            m,
            error,
            band,
        };
        check_row(&row)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: ErrorTable) {
        self.rows.extend(other.rows);
    }

    /// Band maximum of `quantity` over every `(N, t)`; `None` if it has no band rows.
    pub fn band_max(&self, quantity: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.band && r.quantity == quantity)
            .map(|r| r.error)
            .reduce(f64::max)
    }

    /// Band maximum over all quantities with the given prefix.
    pub fn band_max_prefixed(&self, prefix: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.band && r.quantity.starts_with(prefix))
            .map(|r| r.error)
            .reduce(f64::max)
    }

    pub fn summary(&self) -> TableSummary {
        let mut groups: BTreeMap<(String, usize, u64), Vec<&ErrorRow>> = BTreeMap::new();
        let mut order = Vec::new();
        for r in self.rows.iter().filter(|r| r.band) {
            let key = (r.quantity.clone(), r.n, r.t.to_bits());
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(r);
        }
        let mut out = TableSummary::default();
        for key in order {
            let rows = &groups[&key];
            let (quantity, n, t) = (key.0.clone(), key.1, f64::from_bits(key.2));
            out.bands.push(BandSummary {
                quantity: quantity.clone(),
                n,
                t,
                rows: rows.len(),
                max_error: rows.iter().map(|r| r.error).fold(0.0, f64::max),
            });
            let mut by_mode: BTreeMap<i64, f64> = BTreeMap::new();
            for r in rows {
                if r.m != 0 {
                    let e = by_mode.entry(r.m.abs()).or_insert(0.0);
                    *e = e.max(r.error);
                }
            }
            let mut m = 1i64;
            while let Some(m2) = m.checked_mul(2) {
                if let (Some(&e1), Some(&e2)) = (by_mode.get(&m), by_mode.get(&m2)) {
                    out.ratios.push(DyadicRatio {
                        quantity: quantity.clone(),
                        n,
                        t,
                        m,
                        ratio: (e1 > 0.0).then(|| e2 / e1),
                    });
                }
                if m2 > *by_mode.keys().next_back().unwrap_or(&0) {
                    break;
                }
                m = m2;
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# {SCHEMA}\n{CSV_HEADER}\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{:e},{}",
                r.quantity, r.n, r.t, r.m, r.error, r.band
            )
            .expect("write to string");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |msg: String| Error::Config(format!("error table: {msg}"));
        match lines.next() {
            Some(l) if l.trim_end() == format!("# {SCHEMA}") => {}
            other => return Err(bad(format!("expected `# {SCHEMA}`, found {other:?}"))),
        }
        match lines.next() {
            Some(l) if l.trim_end() == CSV_HEADER => {}
            other => {
                return Err(bad(format!(
                    "expected header `{CSV_HEADER}`, found {other:?}"
                )))
            }
        }
        let mut table = ErrorTable::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != 6 {
                return Err(bad(format!(
                    "line {}: expected 6 fields, found {}",
                    i + 3,
                    fields.len()
                )));
            }
            let parse_err = |what: &str| bad(format!("line {}: invalid {what}", i + 3));
            let row = ErrorRow {
                quantity: fields[0].to_string(),
                n: fields[1].parse().map_err(|_| parse_err("N"))?,
                t: fields[2].parse().map_err(|_| parse_err("t"))?,
                m: fields[3].parse().map_err(|_| parse_err("m"))?,
                error: fields[4].parse().map_err(|_| parse_err("error"))?,
                band: fields[5].parse().map_err(|_| parse_err("band"))?,
            };
            check_row(&row)?;
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: ErrorTable = serde_json::from_str(text)?;
        if table.schema != SCHEMA {
            return Err(Error::Config(format!(
                "error table: unknown schema `{}`",
                table.schema
            )));
        }
        for r in &table.rows {
            check_row(r)?;
        }
        Ok(table)
    }
}
