//! JSON reports and the long-format CSV behind the region figures.

use std::io::Write;

use serde::Serialize;

use crate::envelope::envelope;
use crate::error::{Error, Result};
use crate::menu::Menu;
use crate::value_model::TypeLine;

/// One sample of the type line: posterior means, the option bought and the
/// buyer's payoff. `option_id` is 0 for the null option and `j + 1` for menu
/// entry `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRow {
    pub t: f64,
    pub theta: Vec<f64>,
    pub option_id: usize,
    pub payoff: f64,
}

/// Samples `points` equally spaced types on `[0, 1]`.
pub fn figure_rows(line: &TypeLine, menu: &Menu, points: usize) -> Result<Vec<FigureRow>> {
    if points < 2 {
        return Err(Error::Argument("figure needs at least two sample points".into()));
    }
    menu.check_dim(line.dim())?;
    let env = envelope(line, menu);
    Ok((0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            let seg = env
                .segments
                .iter()
                .find(|s| s.t_lo <= t && t <= s.t_hi)
                .or_else(|| env.segments.last())
                .expect("envelope covers [0, 1]");
            FigureRow {
                t,
                theta: line.theta(t),
                option_id: seg.option.map_or(0, |j| j + 1),
                payoff: (seg.slope * t + seg.intercept).max(0.0),
            }
        })
        .collect())
}

/// Writes `t, theta_1..theta_K, option_id, payoff` with a header row.
pub fn write_figure_csv<W: Write>(rows: &[FigureRow], out: W) -> Result<()> {
    let k = rows.first().map_or(0, |r| r.theta.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).map(|i| format!("theta_{i}")));
    header.push("option_id".into());
    header.push("payoff".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.t.to_string()];
        rec.extend(r.theta.iter().map(|x| x.to_string()));
        rec.push(r.option_id.to_string());
        rec.push(r.payoff.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Argument(format!("csv: {other:?}")),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
