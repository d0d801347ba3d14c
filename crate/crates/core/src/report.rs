//! Byte-stable JSON and CSV output for reports.
//!
//! JSON has sorted keys and every float printed as `{:.16e}` (17
//! significant digits), which round-trips exactly. Non-finite floats in
//! fields marked with [`real`] are written as the strings `"inf"`,
//! `"-inf"` and `"nan"`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::coefficients::{ConditionReport, Verdict};
use crate::error::{Error, Result};
use crate::field::FieldDiagnostics;
use crate::lab::{
    BlockReport, CltReport, CovarianceReport, GapReport, LindebergReport, RectangleReport, WuReport,
};

/// Version of the CSV layouts written by [`Tabular`] implementations.
pub const CSV_SCHEMA_VERSION: u32 = 1;

struct CanonicalFormatter;

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", fmt_float(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// `{:.16e}` for finite values, `inf`/`-inf`/`nan` otherwise.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Canonical JSON text of `value`, newline-terminated.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // Going through `Value` sorts every object's keys.
    let tree = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter);
    tree.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Serde adapter for an `f64` that may be infinite or NaN.
pub mod real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::fmt_float(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// [`real`] for the values of a string-keyed map.
pub mod real_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Real(#[serde(with = "super::real")] f64);

    pub fn serialize<S: Serializer>(map: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(map.len()))?;
        for (k, v) in map {
            m.serialize_entry(k, &Real(*v))?;
        }
        m.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, Real>::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, v)| (k, v.0)).collect())
    }
}

/// One CSV table: a fixed header and rows of preformatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        CsvTable {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("cells are UTF-8"))
    }
}

/// Reports that flatten into CSV tables.
pub trait Tabular {
    fn tables(&self) -> Vec<CsvTable>;
}

trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        fmt_float(*self)
    }
}

impl Cell for usize {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for bool {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for str {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

impl Cell for Verdict {
    fn cell(&self) -> String {
        self.as_str().into()
    }
}

impl<T: Cell + ?Sized> Cell for &T {
    fn cell(&self) -> String {
        (**self).cell()
    }
}

impl<T: Cell> Cell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map(Cell::cell).unwrap_or_default()
    }
}

/// Multi-indices as `i1;i2;...`.
impl Cell for [usize] {
    fn cell(&self) -> String {
        self.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
    }
}

impl Cell for [i64] {
    fn cell(&self) -> String {
        self.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
    }
}

macro_rules! row {
    ($($e:expr),* $(,)?) => { vec![$(Cell::cell(&$e)),*] };
}

impl Tabular for ConditionReport {
    fn tables(&self) -> Vec<CsvTable> {
        let mut summary = CsvTable::new("condition_summary", &["check", "item", "kind", "value"]);
        summary.push(row![self.check, "verdict", "verdict", self.verdict]);
        for (k, v) in &self.sub_verdicts {
            summary.push(row![self.check, k, "sub_verdict", v]);
        }
        for (k, v) in &self.diagnostics {
            summary.push(row![self.check, k, "diagnostic", v]);
        }
        for (k, v) in &self.thresholds {
            summary.push(row![self.check, k, "threshold", v]);
        }
        if let Some(w) = &self.delta_interval {
            summary.push(row![self.check, "delta_lower", "delta_interval", w.lower]);
            summary.push(row![self.check, "delta_upper", "delta_interval", w.upper]);
            summary.push(row![self.check, "delta_midpoint", "delta_interval", w.midpoint]);
        }
        let mut out = vec![summary];
        if !self.grid.is_empty() {
            let mut grid = CsvTable::new(
                "condition_c_grid",
                &["n", "m_n", "b_n", "c1_sqrt_b_delta", "c2_b_m_over_b", "c3_m_d_b", "c4_m_d_log_d_over_n_d_b"],
            );
            for r in &self.grid {
                grid.push(row![r.n, r.m_n, r.b_n, r.c1_sqrt_b_delta, r.c2_b_m_over_b, r.c3_m_d_b, r.c4_m_d_log_d_over_n_d_b]);
            }
            out.push(grid);
        }
        out
    }
}

impl Tabular for Vec<ConditionReport> {
    fn tables(&self) -> Vec<CsvTable> {
        let mut merged: BTreeMap<&'static str, CsvTable> = BTreeMap::new();
        for rep in self {
            for t in rep.tables() {
                match merged.get_mut(t.name) {
                    Some(m) => m.rows.extend(t.rows),
                    None => {
                        merged.insert(t.name, t);
                    }
                }
            }
        }
        merged.into_values().collect()
    }
}

impl Tabular for CltReport {
    fn tables(&self) -> Vec<CsvTable> {
        let mut reps = CsvTable::new("clt_replicates", &["n", "x", "replicate", "t_n", "t_zeta", "t_remainder"]);
        for r in &self.replicates {
            reps.push(row![r.n, r.x, r.replicate, r.t_n, r.t_zeta, r.t_remainder]);
        }
        let mut sum = CsvTable::new(
            "clt_summary",
            &[
                "n", "x", "m_n", "b_n", "truncation_radius", "replicates", "centering", "sigma2",
                "single_site_variance", "mean", "variance", "variance_ratio", "skewness", "excess_kurtosis",
                "ks_distance", "ks_critical_05", "ks_critical_01", "zeta_variance", "remainder_variance",
                "decomposition_max_defect", "mean_verdict", "variance_verdict", "ks_verdict", "verdict",
            ],
        );
        for p in &self.points {
            sum.push(row![
                p.n, p.x, p.m_n, p.b_n, p.truncation_radius, p.replicates, p.centering, p.sigma2,
                p.single_site_variance, p.mean, p.variance, p.variance_ratio, p.skewness, p.excess_kurtosis,
                p.ks_distance, p.ks_critical_05, p.ks_critical_01, p.zeta_variance, p.remainder_variance,
                p.decomposition_max_defect, p.mean_verdict, p.variance_verdict, p.ks_verdict, p.verdict,
            ]);
        }
        vec![reps, sum]
    }
}

impl Tabular for BlockReport {
    fn tables(&self) -> Vec<CsvTable> {
        let mut t = CsvTable::new(
            "blocks",
            &[
                "n", "m", "l", "blocks_per_axis", "total_blocks", "b_n", "delta_mean", "delta_variance",
                "rate_proxy", "adjacent_correlation", "correlation_bound", "correlation_verdict",
            ],
        );
        for r in &self.rows {
            t.push(row![
                r.n, r.m, r.l, r.blocks_per_axis, r.total_blocks, r.b_n, r.delta_mean, r.delta_variance,
                r.rate_proxy, r.adjacent_correlation, r.correlation_bound, r.correlation_verdict,
            ]);
        }
        vec![t]
    }
}

impl Tabular for LindebergReport {
    fn tables(&self) -> Vec<CsvTable> {
        let mut t = CsvTable::new(
            "lindeberg",
            &["n", "m", "l", "samples", "lf1", "sigma2", "lf1_ratio", "almost_sure_bound", "eps", "threshold", "lf2", "forced_zero"],
        );
        for r in &self.rows {
            for p in &r.lf2 {
                t.push(row![
                    r.n, r.m, r.l, r.samples, r.lf1, r.sigma2, r.lf1_ratio, r.almost_sure_bound, p.eps, p.threshold,
                    p.value, p.forced_zero,
                ]);
            }
        }
        vec![t]
    }
}

impl Tabular for RectangleReport {
    fn tables(&self) -> Vec<CsvTable> {
        let mut rect = CsvTable::new("rectangles", &["n", "m", "rectangle", "l2_norm", "normalized", "site_l2"]);
        for r in &self.rows {
            rect.push(row![r.n, r.m, r.rectangle[..], r.l2_norm, r.normalized, r.site_l2]);
        }
        let mut rem = CsvTable::new(
            "remainder_bound",
            &["n", "m", "b_n", "sum_l2", "site_l2", "delta_n", "bound_shape", "ratio"],
        );
        for r in &self.remainder {
            rem.push(row![r.n, r.m, r.b_n, r.sum_l2, r.site_l2, r.delta_n, r.bound_shape, r.ratio]);
        }
        vec![rect, rem]
    }
}

impl Tabular for WuReport {
    fn tables(&self) -> Vec<CsvTable> {
        let mut t = CsvTable::new(
            "moment_inequality",
            &["p", "sample", "terms", "sum_squares", "c_hat", "std_error", "exact_constant", "z", "verdict"],
        );
        t.push(row![self.p, self.sample, self.terms, self.sum_squares, self.c_hat, self.std_error, self.exact_constant, self.z, self.verdict]);
        vec![t]
    }
}

impl Tabular for GapReport {
    fn tables(&self) -> Vec<CsvTable> {
        let mut t = CsvTable::new(
            "gap",
            &["n", "m", "b_n", "gap", "gap_std_error", "finite_b_oracle", "limit_oracle", "proxy", "gap_over_proxy"],
        );
        for r in &self.rows {
            t.push(row![r.n, r.m, r.b_n, r.gap, r.gap_std_error, r.finite_b_oracle, self.limit_oracle, r.proxy, r.gap_over_proxy]);
        }
        vec![t]
    }
}

impl Tabular for CovarianceReport {
    fn tables(&self) -> Vec<CsvTable> {
        let mut t = CsvTable::new(
            "zeta_covariance",
            &["n", "m", "b_n", "lag", "pairs", "covariance", "std_error", "cov_over_b", "joint_density_sup", "beyond_m"],
        );
        for r in &self.rows {
            t.push(row![r.n, r.m, r.b_n, r.lag[..], r.pairs, r.covariance, r.std_error, r.cov_over_b, r.joint_density_sup, r.beyond_m]);
        }
        vec![t]
    }
}

impl Tabular for FieldDiagnostics {
    fn tables(&self) -> Vec<CsvTable> {
        let mut m = CsvTable::new("field_moments", &["sites", "mean", "variance", "skewness", "kurtosis"]);
        m.push(row![self.sites, self.mean, self.variance, self.skewness, self.kurtosis]);
        let mut l = CsvTable::new("field_lags", &["lag", "pairs", "sample", "oracle", "oracle_error", "std_error", "z"]);
        for r in &self.lags {
            l.push(row![r.lag[..], r.pairs, r.sample, r.oracle, r.oracle_error, r.std_error, r.z]);
        }
        vec![m, l]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    #[default]
    Both,
}

impl ReportFormat {
    pub fn json(self) -> bool {
        matches!(self, ReportFormat::Json | ReportFormat::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, ReportFormat::Csv | ReportFormat::Both)
    }
}

/// Writes `<dir>/<stem>.json` and/or `<dir>/<stem>.<table>.csv`; returns
/// the paths written.
pub fn emit_report<T: Serialize + Tabular>(
    report: &T,
    format: ReportFormat,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.json() {
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, to_canonical_json(report)?)?;
        written.push(path);
    }
    if format.csv() {
        for table in report.tables() {
            let path = dir.join(format!("{stem}.{}.csv", table.name));
            fs::write(&path, table.to_csv_string()?)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::check_corollary1;

    #[test]
    fn floats_use_seventeen_digits() {
        assert_eq!(to_canonical_json(&0.1).unwrap(), "1.0000000000000001e-1\n");
        assert_eq!(to_canonical_json(&vec![1.0, -2.5]).unwrap(), "[1.0000000000000000e0,-2.5000000000000000e0]\n");
    }

    #[test]
    fn keys_are_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        assert_eq!(to_canonical_json(&S { zeta: 1, alpha: 2 }).unwrap(), "{\"alpha\":2,\"zeta\":1}\n");
    }

    #[test]
    fn infinite_diagnostics_round_trip() {
        let rep = check_corollary1(1, f64::INFINITY, 0.3).unwrap();
        let text = to_canonical_json(&rep).unwrap();
        assert!(text.contains("\"inf\""));
        let back: ConditionReport = from_json(&text).unwrap();
        assert_eq!(back, rep);
        assert_eq!(to_canonical_json(&back).unwrap(), text);
    }

    #[test]
    fn emit_writes_json_and_tables() {
        let dir = tempfile::tempdir().unwrap();
        let rep = check_corollary1(2, 3.0, 1.0).unwrap();
        let paths = emit_report(&rep, ReportFormat::Both, dir.path(), "cond").unwrap();
        assert_eq!(paths.len(), 2);
        let csv = fs::read_to_string(dir.path().join("cond.condition_summary.csv")).unwrap();
        assert!(csv.starts_with("check,item,kind,value\n"));
    }
}
