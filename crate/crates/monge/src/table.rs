//! CSV forms of convergence tables and Newton histories.
//!
//! Unavailable values are written as `NA`; rows of failed solves carry
//! `failed` in the `newton_iters` column.

use std::fmt::Write as _;
use std::path::Path;

use monge_core::harness::{ConvergenceTable, ErrorReport, Rates};
use monge_core::solver::NewtonReport;
use monge_core::Error as CoreError;

use crate::{write_file, Result};

pub const TABLE_HEADER: [&str; 9] = [
    "h",
    "ndof_u",
    "ndof_sigma",
    "err_u_L2",
    "err_u_H1",
    "err_sigma_L2",
    "err_u_sup_interior",
    "newton_iters",
    "min_lambda1",
];

pub const NEWTON_HEADER: [&str; 4] = ["iter", "residual", "min_lambda1", "damping_halvings"];

const NA: &str = "NA";
const FAILED: &str = "failed";

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), num)
}

fn to_csv<I, R>(header: &[&str], records: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for r in records {
        w.write_record(r.into_iter().collect::<Vec<_>>()).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}

pub fn table_to_csv(rows: &[ErrorReport]) -> String {
    to_csv(
        &TABLE_HEADER,
        rows.iter().map(|r| {
            let iters = match (&r.failure, r.newton_iters) {
                (Some(_), _) => FAILED.to_string(),
                (None, Some(n)) => n.to_string(),
                (None, None) => NA.to_string(),
            };
            vec![
                num(r.h),
                r.ndof_u.to_string(),
                r.ndof_sigma.to_string(),
                opt(r.err_u_l2),
                opt(r.err_u_h1),
                opt(r.err_sigma_l2),
                opt(r.err_u_sup_interior),
                iters,
                opt(r.min_lambda1),
            ]
        }),
    )
}

fn bad(row: usize, msg: impl std::fmt::Display) -> CoreError {
    CoreError::Parse(format!("csv row {row}: {msg}"))
}

fn field<T: std::str::FromStr>(row: usize, name: &str, s: &str) -> monge_core::Result<T> {
    s.parse().map_err(|_| bad(row, format!("bad {name} `{s}`")))
}

fn opt_field(row: usize, name: &str, s: &str) -> monge_core::Result<Option<f64>> {
    if s == NA {
        Ok(None)
    } else {
        field(row, name, s).map(Some)
    }
}

fn records(text: &str, header: &[&str]) -> monge_core::Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let got = r.headers().map_err(|e| CoreError::Parse(e.to_string()))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(CoreError::Parse(format!("expected header `{}`", header.join(","))));
    }
    r.records()
        .map(|rec| rec.map_err(|e| CoreError::Parse(e.to_string())))
        .collect()
}

/// Parses [`table_to_csv`] output. Failure messages are not stored in the
/// file, so failed rows come back with the message `failed`.
pub fn table_from_csv(text: &str) -> monge_core::Result<Vec<ErrorReport>> {
    records(text, &TABLE_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let row = i + 1;
            let (newton_iters, failure) = match &rec[7] {
                FAILED => (None, Some(FAILED.to_string())),
                NA => (None, None),
                s => (Some(field(row, "newton_iters", s)?), None),
            };
            Ok(ErrorReport {
                h: field(row, "h", &rec[0])?,
                ndof_u: field(row, "ndof_u", &rec[1])?,
                ndof_sigma: field(row, "ndof_sigma", &rec[2])?,
                err_u_l2: opt_field(row, "err_u_L2", &rec[3])?,
                err_u_h1: opt_field(row, "err_u_H1", &rec[4])?,
                err_sigma_l2: opt_field(row, "err_sigma_L2", &rec[5])?,
                err_u_sup_interior: opt_field(row, "err_u_sup_interior", &rec[6])?,
                newton_iters,
                min_lambda1: opt_field(row, "min_lambda1", &rec[8])?,
                failure,
            })
        })
        .collect()
}

pub fn newton_to_csv(report: &NewtonReport) -> String {
    to_csv(
        &NEWTON_HEADER,
        report.residuals.iter().enumerate().map(|(i, &r)| {
            vec![
                i.to_string(),
                num(r),
                report.min_lambda1.get(i).map_or_else(|| NA.to_string(), |v| num(*v)),
                report.halvings.get(i).map_or_else(|| NA.to_string(), |v| v.to_string()),
            ]
        }),
    )
}

/// One Newton history row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonRow {
    pub iter: usize,
    pub residual: f64,
    pub min_lambda1: Option<f64>,
    pub halvings: Option<usize>,
}

pub fn newton_from_csv(text: &str) -> monge_core::Result<Vec<NewtonRow>> {
    records(text, &NEWTON_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let row = i + 1;
            Ok(NewtonRow {
                iter: field(row, "iter", &rec[0])?,
                residual: field(row, "residual", &rec[1])?,
                min_lambda1: opt_field(row, "min_lambda1", &rec[2])?,
                halvings: match &rec[3] {
                    NA => None,
                    s => Some(field(row, "damping_halvings", s)?),
                },
            })
        })
        .collect()
}

/// Fitted and last-pair rates, one row per error column.
pub fn rates_to_csv(table: &ConvergenceTable) -> String {
    let col = |name: &str, get: fn(&Rates) -> Option<f64>| {
        vec![name.to_string(), opt(get(&table.rates)), opt(get(&table.last_pair))]
    };
    to_csv(
        &["column", "fitted_rate", "last_pair_rate"],
        [
            col("err_u_L2", |r| r.u_l2),
            col("err_u_H1", |r| r.u_h1),
            col("err_sigma_L2", |r| r.sigma_l2),
            col("err_u_sup_interior", |r| r.u_sup),
        ],
    )
}

/// Human-readable summary of a table's rates.
pub fn rates_summary(table: &ConvergenceTable) -> String {
    if table.exact {
        return "exact: every converged level reproduces u to round-off\n".into();
    }
    let mut s = String::new();
    let show = |v: Option<f64>| v.map_or_else(|| NA.to_string(), |v| format!("{v:.3}"));
    for (name, fit, last) in [
        ("err_u_L2", table.rates.u_l2, table.last_pair.u_l2),
        ("err_u_H1", table.rates.u_h1, table.last_pair.u_h1),
        ("err_sigma_L2", table.rates.sigma_l2, table.last_pair.sigma_l2),
        ("err_u_sup_interior", table.rates.u_sup, table.last_pair.u_sup),
    ] {
        writeln!(s, "{name:<20} rate {:>7} (last pair {})", show(fit), show(last)).unwrap();
    }
    s
}

pub fn write_table(path: &Path, rows: &[ErrorReport]) -> Result<()> {
    write_file(path, &table_to_csv(rows))
}

pub fn write_newton(path: &Path, report: &NewtonReport) -> Result<()> {
    write_file(path, &newton_to_csv(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(h: f64) -> ErrorReport {
        ErrorReport {
            h,
            ndof_u: 25,
            ndof_sigma: 75,
            err_u_l2: Some(1.25e-3),
            err_u_h1: Some(0.1 / 3.0),
            err_sigma_l2: Some(0.7),
            err_u_sup_interior: None,
            newton_iters: Some(4),
            min_lambda1: Some(-1e-17),
            failure: None,
        }
    }

    #[test]
    fn header_and_na() {
        let csv = table_to_csv(&[row(0.5)]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "h,ndof_u,ndof_sigma,err_u_L2,err_u_H1,err_sigma_L2,err_u_sup_interior,newton_iters,min_lambda1"
        );
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[6], "NA");
        assert_eq!(fields[7], "4");
    }

    #[test]
    fn failed_rows() {
        let mut r = row(0.25);
        r.failure = Some("newton iteration diverged".into());
        r.err_u_l2 = None;
        r.min_lambda1 = None;
        let back = table_from_csv(&table_to_csv(&[r])).unwrap();
        assert_eq!(back[0].failure.as_deref(), Some("failed"));
        assert_eq!(back[0].newton_iters, None);
        assert_eq!(back[0].err_u_l2, None);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(table_from_csv("h,ndof_u\n0.5,3\n").is_err());
        let mut csv = table_to_csv(&[row(0.5)]);
        csv.push_str("0.25,1,2,3\n");
        assert!(table_from_csv(&csv).is_err());
    }

    #[test]
    fn newton_history_round_trip() {
        let report = NewtonReport {
            iterations: 2,
            residuals: vec![1.0, 1e-3, 1e-9],
            min_lambda1: vec![0.5, 0.9, 1.0],
            halvings: vec![0, 1, 0],
            hessian_defects: vec![0.0; 3],
            tolerance: 1e-8,
            converged: true,
            u: monge_core::spaces::FieldVector::new(monge_core::spaces::SpaceKind::Scalar, 2, vec![]),
            sigma: monge_core::spaces::FieldVector::new(monge_core::spaces::SpaceKind::Matrix, 2, vec![]),
        };
        let csv = newton_to_csv(&report);
        assert!(csv.starts_with("iter,residual,min_lambda1,damping_halvings\n"));
        let rows = newton_from_csv(&csv).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].residual, 1e-3);
        assert_eq!(rows[1].halvings, Some(1));
    }

    fn maybe() -> impl Strategy<Value = Option<f64>> {
        prop_oneof![Just(None), (1e-300..1e3f64).prop_map(Some)]
    }

    proptest! {
        #[test]
        fn table_round_trip(
            cols in proptest::collection::vec((maybe(), maybe(), maybe(), maybe(), maybe(), 0usize..60, any::<bool>()), 1..6)
        ) {
            let rows: Vec<ErrorReport> = cols
                .iter()
                .enumerate()
                .map(|(i, &(a, b, c, d, l, it, failed))| ErrorReport {
                    h: 1.0 / (1 << i) as f64 / 3.0,
                    ndof_u: 10 + i,
                    ndof_sigma: 30 + 3 * i,
                    err_u_l2: a,
                    err_u_h1: b,
                    err_sigma_l2: c,
                    err_u_sup_interior: d,
                    newton_iters: if failed { None } else { Some(it) },
                    min_lambda1: l.map(|v| -v),
                    failure: failed.then(|| "failed".to_string()),
                })
                .collect();
            let csv = table_to_csv(&rows);
            let back = table_from_csv(&csv).unwrap();
            prop_assert_eq!(&back, &rows);
            prop_assert_eq!(table_to_csv(&back), csv);
        }
    }
}
