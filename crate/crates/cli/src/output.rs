//! Serialization of sweep tables and optimization reports.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use toa_obfuscation::fracopt::OptimizationReport;
use toa_obfuscation::harness::{SweepRecord, ValueKind};
use toa_obfuscation::maf::{to_db, MetricKind};
use toa_obfuscation::model::seconds_to_meters;

use crate::config::OutputFormat;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub const RANGE_PROFILE_COLUMNS: &[&str] = &["delay_m", "power_db"];
pub const RMSE_COLUMNS: &[&str] = &[
    "metric", "epsilon", "snr_db", "rmse_m", "trials", "ci_lo_m", "ci_hi_m",
];
pub const CAPACITY_COLUMNS: &[&str] = &["metric", "epsilon", "snr_db", "capacity_nats_per_sc"];
pub const TRADEOFF_COLUMNS: &[&str] = &[
    "metric",
    "epsilon",
    "snr_db",
    "value_kind",
    "rmse_m",
    "trials",
    "ci_lo_m",
    "ci_hi_m",
    "capacity_nats_per_sc",
];

/// `%.9g`: nine significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e9)`.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    } else {
        trim_fraction(&format!("{:.*}", (8 - exp) as usize, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(&'static str),
    Empty,
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_sig9(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => (*s).to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(*s),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn range_profile(points: &[(f64, f64)]) -> Self {
        Self {
            columns: RANGE_PROFILE_COLUMNS,
            rows: points
                .iter()
                .map(|&(r, p)| vec![Cell::Num(r), Cell::Num(p)])
                .collect(),
        }
    }

    pub fn rmse(records: &[SweepRecord]) -> Self {
        Self {
            columns: RMSE_COLUMNS,
            rows: records
                .iter()
                .map(|r| {
                    let (lo, hi) = ci_cells(r);
                    vec![
                        metric_cell(r.metric),
                        Cell::Num(r.epsilon),
                        Cell::Num(r.snr_db),
                        Cell::Num(r.value),
                        Cell::Int(r.trials_used),
                        lo,
                        hi,
                    ]
                })
                .collect(),
        }
    }

    pub fn capacity(records: &[SweepRecord]) -> Self {
        Self {
            columns: CAPACITY_COLUMNS,
            rows: records
                .iter()
                .map(|r| {
                    vec![
                        metric_cell(r.metric),
                        Cell::Num(r.epsilon),
                        Cell::Num(r.snr_db),
                        Cell::Num(r.value),
                    ]
                })
                .collect(),
        }
    }

    pub fn tradeoff(records: &[SweepRecord]) -> Self {
        Self {
            columns: TRADEOFF_COLUMNS,
            rows: records
                .iter()
                .map(|r| {
                    let mut row = vec![
                        metric_cell(r.metric),
                        Cell::Num(r.epsilon),
                        Cell::Num(r.snr_db),
                        Cell::Text(r.value_kind.as_str()),
                    ];
                    match r.value_kind {
                        ValueKind::RmseM => {
                            let (lo, hi) = ci_cells(r);
                            row.extend([Cell::Num(r.value), Cell::Int(r.trials_used), lo, hi, Cell::Empty]);
                        }
                        _ => row.extend([
                            Cell::Empty,
                            Cell::Empty,
                            Cell::Empty,
                            Cell::Empty,
                            Cell::Num(r.value),
                        ]),
                    }
                    row
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv))
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn to_json(&self) -> Vec<u8> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| ((*c).to_string(), v.to_json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let doc = serde_json::json!({ "schema_version": SCHEMA_VERSION, "rows": rows });
        let mut out = serde_json::to_vec_pretty(&doc).expect("JSON values serialize");
        out.push(b'\n');
        out
    }

    pub fn render(&self, format: OutputFormat) -> Vec<u8> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

fn metric_cell(m: MetricKind) -> Cell {
    Cell::Text(m.as_str())
}

fn ci_cells(r: &SweepRecord) -> (Cell, Cell) {
    r.ci.map_or((Cell::Empty, Cell::Empty), |(lo, hi)| {
        (Cell::Num(lo), Cell::Num(hi))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    /// `‖z‖² − P_t`.
    pub power: f64,
    /// `‖z − 1‖² − ε P_t`.
    pub proximity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeReportFile {
    pub schema_version: u32,
    pub metric: MetricKind,
    pub epsilon: f64,
    pub real_z: bool,
    pub n_subcarriers: usize,
    pub z_re: Vec<f64>,
    pub z_im: Vec<f64>,
    pub beta_trajectory: Vec<f64>,
    pub initial_ratio: f64,
    pub final_ratio: f64,
    pub final_ratio_db: f64,
    pub residuals: Residuals,
    pub power_violation: bool,
    pub lambda: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub tau_star_s: Option<f64>,
    pub tau_star_m: Option<f64>,
}

impl OptimizeReportFile {
    pub fn new(
        metric: MetricKind,
        epsilon: f64,
        real_z: bool,
        power_budget: f64,
        r: &OptimizationReport,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            metric,
            epsilon,
            real_z,
            n_subcarriers: r.z_opt.len(),
            z_re: r.z_opt.re(),
            z_im: r.z_opt.im(),
            beta_trajectory: r.beta_trajectory.clone(),
            initial_ratio: r.beta_trajectory.first().copied().unwrap_or(r.final_ratio),
            final_ratio: r.final_ratio,
            final_ratio_db: to_db(r.final_ratio),
            residuals: Residuals {
                power: r.power_residual,
                proximity: r.proximity_residual,
            },
            power_violation: r.power_violated(power_budget),
            lambda: r.lambda_final,
            outer_iterations: r.outer_iters,
            inner_iterations: r.total_inner_iters,
            converged: r.converged,
            tau_star_s: r.tau_star_s,
            tau_star_m: r.tau_star_s.map(seconds_to_meters),
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }
}

/// Writes `bytes` to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("cannot write to standard output: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::approx_constant)]
    fn sig9_matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (-0.0, "0"),
            (0.693_147_180_559_945, "0.693147181"),
            (500.0, "500"),
            (-13.26, "-13.26"),
            (3.485_010_713_180_57, "3.48501071"),
            (1e-4, "0.0001"),
            (1.5e-7, "1.5e-07"),
            (123_456_789.0, "123456789"),
            (1_234_567_890.0, "1.23456789e+09"),
            (9.999_999_999_6, "10"),
            (-2.5e-12, "-2.5e-12"),
            (f64::NEG_INFINITY, "-inf"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_sig9(x), want, "{x:e}");
        }
    }

    proptest::proptest! {
        #[test]
        fn sig9_keeps_nine_significant_digits(mantissa in -1.0f64..1.0, exp in -12i32..12) {
            let x = mantissa * 10f64.powi(exp);
            let text = fmt_sig9(x);
            let back: f64 = text.parse().unwrap();
            proptest::prop_assert!((back - x).abs() <= 5e-9 * x.abs(), "{:e} -> {}", x, text);
            let digits = text.split('e').next().unwrap().chars().filter(char::is_ascii_digit).collect::<String>();
            proptest::prop_assert!(digits.trim_start_matches('0').len() <= 9, "{}", text);
        }
    }

    #[test]
    fn csv_has_header_and_lf_endings() {
        let t = Table::range_profile(&[(250.0, -20.5), (500.0, 0.0)]);
        let text = String::from_utf8(t.to_csv()).unwrap();
        assert_eq!(text, "delay_m,power_db\n250,-20.5\n500,0\n");
    }

    #[test]
    fn tradeoff_rows_fill_only_their_columns() {
        let recs = [
            SweepRecord {
                metric: MetricKind::Isl,
                epsilon: 0.1,
                snr_db: 0.0,
                value: 1.5,
                value_kind: ValueKind::CapacityNatsPerSc,
                trials_used: 0,
                ci: None,
            },
            SweepRecord {
                metric: MetricKind::Isl,
                epsilon: 0.1,
                snr_db: 0.0,
                value: 3.25,
                value_kind: ValueKind::RmseM,
                trials_used: 20,
                ci: Some((3.0, 3.5)),
            },
        ];
        let text = String::from_utf8(Table::tradeoff(&recs).to_csv()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRADEOFF_COLUMNS.join(","));
        assert_eq!(lines[1], "isl,0.1,0,capacity_nats_per_sc,,,,,1.5");
        assert_eq!(lines[2], "isl,0.1,0,rmse_m,3.25,20,3,3.5,");
    }

    #[test]
    fn json_table_has_schema_version() {
        let t = Table::range_profile(&[(250.0, f64::NEG_INFINITY)]);
        let v: Value = serde_json::from_slice(&t.to_json()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["rows"][0]["delay_m"], 250.0);
        assert!(v["rows"][0]["power_db"].is_null());
    }
}
