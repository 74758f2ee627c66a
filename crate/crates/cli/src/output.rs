//! Table model and deterministic CSV / JSON emission.

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Format, SweepConfig};

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_sig(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json_number(*x),
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(n) => Some(*n as f64),
            Cell::Text(_) => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of one column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }
}

/// A finished command result plus anything that does not fit the table.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub table: Table,
    pub extra: Map<String, Value>,
}

impl Report {
    pub fn from_table(table: Table) -> Self {
        Self { table, extra: Map::new() }
    }
}

/// `x` rounded to 12 significant digits, `%g` style.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Rounded to 12 significant digits; non-finite values become `null`.
pub fn json_number(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format_sig(x).parse().expect("formatted number parses");
    json!(rounded)
}

/// Recursively rounds every float in a JSON value.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => json_number(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn to_csv(t: &Table) -> String {
    let mut out = t.columns.join(",");
    out.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(Cell::csv).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json(cfg: &SweepConfig, r: &Report) -> String {
    let rows: Vec<Value> = r.table.rows.iter().map(|row| Value::Array(row.iter().map(Cell::json).collect())).collect();
    let mut doc = Map::new();
    doc.insert("command".into(), json!(cfg.command.name()));
    doc.insert("config".into(), round_json(to_value(cfg)));
    doc.insert("columns".into(), json!(r.table.columns));
    doc.insert("rows".into(), Value::Array(rows));
    for (k, v) in &r.extra {
        doc.insert(k.clone(), round_json(v.clone()));
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("serializable");
    s.push('\n');
    s
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

pub fn render(cfg: &SweepConfig, r: &Report) -> String {
    match cfg.format {
        Format::Csv => to_csv(&r.table),
        Format::Json => to_json(cfg, r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Command;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(-0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(std::f64::consts::E), "2.71828182846");
        assert_eq!(format_sig(4.342944819032518), "4.34294481903");
        assert_eq!(format_sig(-0.001234), "-0.001234");
        assert_eq!(format_sig(1.5e-9), "1.5e-9");
        assert_eq!(format_sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(format_sig(100.0), "100");
    }

    #[test]
    fn csv_has_header_and_lf_endings() {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.rows.push(vec![Cell::Num(0.5), Cell::Int(3)]);
        t.rows.push(vec![Cell::Text("x".into()), Cell::Num(1.0 / 3.0)]);
        let s = to_csv(&t);
        assert_eq!(s, "a,b\n0.5,3\nx,0.333333333333\n");
        assert!(!s.contains('\r'));
    }

    #[test]
    fn json_carries_config_and_rounded_values() {
        let cfg = SweepConfig::defaults(Command::CvGain);
        let mut t = Table::new(vec!["sigma".into()]);
        t.rows.push(vec![Cell::Num(std::f64::consts::PI)]);
        let s = to_json(&cfg, &Report::from_table(t));
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["command"], "cv-gain");
        assert_eq!(v["config"]["r"], 0.5);
        assert_eq!(v["rows"][0][0].to_string(), "3.14159265359");
    }
}
