use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Context};

pub const CSV_HEADER: &str = "experiment,check,value,bound,pass,runtime_ms";

/// One check. Rows of a family member carry its index `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub k: Option<u32>,
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Row {
    pub fn upper(k: Option<u32>, name: &str, value: f64, bound: f64) -> Self {
        Row { k, name: name.into(), value, bound, pass: value <= bound }
    }

    pub fn lower(k: Option<u32>, name: &str, value: f64, bound: f64) -> Self {
        Row { k, name: name.into(), value, bound, pass: value >= bound }
    }

    /// A boolean property, reported as value 1/0 against bound 1.
    pub fn holds(k: Option<u32>, name: &str, ok: bool) -> Self {
        Row { k, name: name.into(), value: if ok { 1.0 } else { 0.0 }, bound: 1.0, pass: ok }
    }

    pub fn check(&self) -> String {
        match self.k {
            Some(k) => format!("k{k}.{}", self.name),
            None => self.name.clone(),
        }
    }
}

/// Sorts rows by `k` (global rows first), then by check name.
pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| a.k.cmp(&b.k).then_with(|| a.name.cmp(&b.name)));
}

pub fn to_csv(experiment: &str, rows: &[Row], runtime_ms: u128) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{experiment},{},{},{},{},{runtime_ms}", r.check(), r.value, r.bound, r.pass);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Parses a report into rows keyed by `(experiment, check)`, keeping file order.
pub fn parse_csv(text: &str) -> anyhow::Result<Vec<((String, String), CsvRow)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => bail!("unexpected header {h:?}"),
        None => bail!("empty report"),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 6 {
            bail!("line {}: expected 6 columns, found {}", n + 2, cols.len());
        }
        let num = |s: &str| s.parse::<f64>().with_context(|| format!("line {}: bad number {s:?}", n + 2));
        let pass = cols[4].parse::<bool>().with_context(|| format!("line {}: bad pass flag {:?}", n + 2, cols[4]))?;
        rows.push(((cols[0].to_string(), cols[1].to_string()), CsvRow { value: num(cols[2])?, bound: num(cols[3])?, pass }));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub experiment: String,
    pub check: String,
    pub before: CsvRow,
    pub after: CsvRow,
}

impl Delta {
    pub fn regressed(&self) -> bool {
        self.before.pass && !self.after.pass
    }
}

#[derive(Debug)]
pub enum DiffError {
    /// The two reports do not cover the same checks.
    KeyMismatch(String),
    Parse(anyhow::Error),
}

impl std::fmt::Display for DiffError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DiffError::KeyMismatch(m) => write!(f, "key mismatch: {m}"),
            DiffError::Parse(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for DiffError {}

/// Row-by-row comparison of two reports in the order of `a`.
pub fn diff(a: &str, b: &str) -> Result<Vec<Delta>, DiffError> {
    let a = parse_csv(a).map_err(DiffError::Parse)?;
    let b = parse_csv(b).map_err(DiffError::Parse)?;
    let mut rest: BTreeMap<(String, String), CsvRow> = BTreeMap::new();
    for (key, row) in b {
        if rest.insert(key.clone(), row).is_some() {
            return Err(DiffError::KeyMismatch(format!("duplicate row {}/{}", key.0, key.1)));
        }
    }
    let mut out = Vec::with_capacity(a.len());
    for ((experiment, check), before) in a {
        let after = rest
            .remove(&(experiment.clone(), check.clone()))
            .ok_or_else(|| DiffError::KeyMismatch(format!("{experiment}/{check} missing from second report")))?;
        out.push(Delta { experiment, check, before, after });
    }
    if let Some(((e, c), _)) = rest.into_iter().next() {
        return Err(DiffError::KeyMismatch(format!("{e}/{c} missing from first report")));
    }
    Ok(out)
}

pub fn diff_table(deltas: &[Delta]) -> String {
    let mut out = String::from("experiment,check,value_a,value_b,delta,pass_a,pass_b\n");
    for d in deltas {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            d.experiment,
            d.check,
            d.before.value,
            d.after.value,
            d.after.value - d.before.value,
            d.before.pass,
            d.after.pass
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Row> {
        vec![Row::upper(Some(2), "area", 1.0, 2.0), Row::upper(None, "total", 3.0, 2.0), Row::lower(Some(1), "floor", 0.5, 0.25)]
    }

    #[test]
    fn rows_sort_by_k_then_name() {
        let mut rows = sample();
        rows.push(Row::holds(Some(1), "alpha", true));
        sort_rows(&mut rows);
        let names: Vec<String> = rows.iter().map(Row::check).collect();
        assert_eq!(names, ["total", "k1.alpha", "k1.floor", "k2.area"]);
    }

    #[test]
    fn csv_round_trip() {
        let text = to_csv("neck", &sample(), 0);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[1].0, ("neck".to_string(), "total".to_string()));
        assert!(!parsed[1].1.pass);
    }

    #[test]
    fn diff_examples() {
        let a = to_csv("x", &sample(), 0);
        let same = diff(&a, &a).unwrap();
        assert!(same.iter().all(|d| d.after.value == d.before.value && !d.regressed()));

        let mut worse = sample();
        worse[0].value = 3.0;
        worse[0].pass = false;
        assert!(diff(&a, &to_csv("x", &worse, 0)).unwrap().iter().any(Delta::regressed));

        let mut drift = sample();
        drift[0].value = 1.5;
        assert!(!diff(&a, &to_csv("x", &drift, 0)).unwrap().iter().any(Delta::regressed));

        let fewer = to_csv("x", &sample()[..2], 0);
        assert!(matches!(diff(&a, &fewer), Err(DiffError::KeyMismatch(_))));
        assert!(matches!(diff(&fewer, &a), Err(DiffError::KeyMismatch(_))));
        assert!(matches!(diff("nonsense", &a), Err(DiffError::Parse(_))));
    }
}
