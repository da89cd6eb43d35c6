use std::io::Write;

use serde::Serialize;

use super::{ConvergenceTable, ResultRecord, Scheme, SweepTable};
use crate::error::Result;

/// One user of one record, as written to the per-trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordRow {
    pub scheme: &'static str,
    pub n: usize,
    pub m: usize,
    pub trial: usize,
    pub user: usize,
    pub gamma: f64,
    pub rate: f64,
    pub sum_rate: f64,
    pub tau: usize,
    pub leakage: f64,
    pub degenerate: bool,
}

/// Sum-rate statistics of one `(scheme, n, m)` point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub scheme: String,
    pub n: usize,
    pub m: usize,
    pub mean_sum_rate: f64,
    pub stderr: f64,
    pub trials_used: usize,
}

fn rows(records: &[ResultRecord]) -> impl Iterator<Item = RecordRow> + '_ {
    records.iter().flat_map(|r| {
        (0..r.gamma.len()).map(move |u| RecordRow {
            scheme: r.scheme.name(),
            n: r.n,
            m: r.m,
            trial: r.trial,
            user: u,
            gamma: r.gamma[u],
            rate: r.rate[u],
            sum_rate: r.sum_rate,
            tau: r.tau,
            leakage: r.leakage[u],
            degenerate: r.degenerate,
        })
    })
}

fn write_csv<T: Serialize>(out: impl Write, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for item in items {
        w.serialize(item)?;
    }
    w.flush()?;
    Ok(())
}

/// Header `scheme,n,m,trial,user,gamma,rate,sum_rate,tau,leakage,degenerate`.
pub fn write_records_csv(out: impl Write, table: &SweepTable) -> Result<()> {
    write_csv(out, rows(&table.records))
}

/// Header `scheme,n,m,mean_sum_rate,stderr,trials_used`.
pub fn write_aggregates_csv(out: impl Write, table: &SweepTable) -> Result<()> {
    write_csv(out, table.aggregates.iter())
}

pub fn write_records_json(out: impl Write, table: &SweepTable) -> Result<()> {
    let all: Vec<RecordRow> = rows(&table.records).collect();
    serde_json::to_writer_pretty(out, &all)?;
    Ok(())
}

pub fn write_aggregates_json(out: impl Write, table: &SweepTable) -> Result<()> {
    serde_json::to_writer_pretty(out, &table.aggregates)?;
    Ok(())
}

/// Wide table `n,m,<scheme>...,<scheme>_stderr...` of mean sum rates, one row
/// per sweep point.
pub fn write_plot_data_csv(out: impl Write, table: &SweepTable) -> Result<()> {
    let mut schemes: Vec<Scheme> = table.records.iter().map(|r| r.scheme).collect();
    schemes.sort();
    schemes.dedup();
    let mut points: Vec<(usize, usize)> = table.aggregates.iter().map(|a| (a.n, a.m)).collect();
    points.sort();
    points.dedup();

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n".to_owned(), "m".to_owned()];
    header.extend(schemes.iter().map(|s| s.name().to_owned()));
    header.extend(schemes.iter().map(|s| format!("{}_stderr", s.name())));
    w.write_record(&header)?;
    for (n, m) in points {
        let mut rec = vec![n.to_string(), m.to_string()];
        let found: Vec<_> = schemes.iter().map(|&s| table.aggregate(s, n, m)).collect();
        rec.extend(found.iter().map(|a| a.map_or(String::new(), |a| a.mean_sum_rate.to_string())));
        rec.extend(found.iter().map(|a| a.map_or(String::new(), |a| a.stderr.to_string())));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Header `regime,line,m,user,mc_mean,limit,rel_error`.
pub fn write_convergence_csv(out: impl Write, table: &ConvergenceTable) -> Result<()> {
    write_csv(out, table.rows.iter())
}
