//! CSV writers with fixed column order.
//!
//! Floats use Rust's shortest round-trip formatting, so rereading a file
//! recovers the exact bits.

use std::io::Write;

use crate::asymptotics::SweepReport;
use crate::bs_solver::SolveRecord;
use crate::error::Result;
use crate::surface_ops::{EigenPair, SurfaceMatrix};

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `i,j,re,im` for every entry.
pub fn write_matrix_csv<W: Write>(w: W, m: &SurfaceMatrix) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["i", "j", "re", "im"])?;
    for i in 0..m.dense.nrows() {
        for j in 0..m.dense.ncols() {
            out.write_record([i.to_string(), j.to_string(), num(m.dense[(i, j)]), num(0.0)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `i,eigenvalue` with 1-based `i`.
pub fn write_spectrum_csv<W: Write>(w: W, values: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["i", "eigenvalue"])?;
    for (k, v) in values.iter().enumerate() {
        out.write_record([(k + 1).to_string(), num(*v)])?;
    }
    out.flush()?;
    Ok(())
}

/// One column per eigenvector, rows indexed by surface node; entries are
/// function values `u(p_k)`.
pub fn write_eigenvectors_csv<W: Write>(w: W, pairs: &[EigenPair], weights: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["node".to_string()];
    header.extend((1..=pairs.len()).map(|k| format!("u{k}")));
    out.write_record(&header)?;
    for (n, w) in weights.iter().enumerate() {
        let mut row = vec![n.to_string()];
        row.extend(pairs.iter().map(|p| num(p.vector[n] / w.sqrt())));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// `lambda,index,e,f_of_e,residual,grid_id[,direct_e,delta]`.
pub fn write_solve_records<W: Write>(w: W, records: &[SolveRecord], grid_id: &str, direct: Option<&[f64]>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["lambda", "index", "e", "f_of_e", "residual", "grid_id"];
    if direct.is_some() {
        header.extend(["direct_e", "delta"]);
    }
    out.write_record(&header)?;
    for (k, r) in records.iter().enumerate() {
        let mut row = vec![num(r.lambda), r.index.to_string(), num(r.e), num(r.f_of_e), num(r.residual), grid_id.into()];
        if let Some(d) = direct {
            row.push(num(d[k]));
            row.push(num((d[k] - r.e).abs() / r.e));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "lambda",
    "index",
    "status",
    "e",
    "lambda_f",
    "target",
    "first_order_residual",
    "first_order_f_residual",
    "b",
    "second_order_residual",
    "eigenvector_distance",
    "solve_residual",
];

pub fn write_sweep_csv<W: Write>(w: W, report: &SweepReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_COLUMNS)?;
    for r in &report.rows {
        let status = match r.status {
            crate::asymptotics::RowStatus::Ok => "ok",
            crate::asymptotics::RowStatus::NoBoundState => "no-bound-state",
            crate::asymptotics::RowStatus::Resolution => "resolution",
        };
        out.write_record([
            num(r.lambda),
            r.index.to_string(),
            status.to_string(),
            num(r.e),
            num(r.lambda_f),
            num(r.target),
            num(r.first_order_residual),
            num(r.first_order_f_residual),
            opt(r.b),
            opt(r.second_order_residual),
            opt(r.eigenvector_distance),
            num(r.solve_residual),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `lambda,lambda_f,target` for plotting.
pub fn write_plot_csv<W: Write>(w: W, report: &SweepReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lambda", "lambda_f", "target"])?;
    for r in report.ok_rows() {
        out.write_record([num(r.lambda), num(r.lambda_f), num(r.target)])?;
    }
    out.flush()?;
    Ok(())
}
