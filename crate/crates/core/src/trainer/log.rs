use std::path::Path;

use crate::error::{Error, Result};
use crate::objective::LossBreakdown;

/// One optimizer step of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub step: usize,
    pub recon_x: f64,
    pub recon_y: Vec<f64>,
    pub kl: f64,
    pub tc: f64,
    pub total: f64,
}

impl LogRow {
    pub fn new(epoch: usize, step: usize, loss: &LossBreakdown) -> Self {
        Self {
            epoch,
            step,
            recon_x: loss.recon_x,
            recon_y: loss.recon_y.clone(),
            kl: loss.kl,
            tc: loss.tc,
            total: loss.total,
        }
    }
}

/// CSV columns: `epoch, step, recon_x, recon_y0.., kl, tc, total`.
pub fn write_log_csv(path: &Path, rows: &[LogRow]) -> Result<()> {
    let labels = rows.first().map_or(0, |r| r.recon_y.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["epoch".to_string(), "step".into(), "recon_x".into()];
    header.extend((0..labels).map(|j| format!("recon_y{j}")));
    header.extend(["kl".into(), "tc".into(), "total".into()]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.epoch.to_string(), r.step.to_string(), r.recon_x.to_string()];
        rec.extend(r.recon_y.iter().map(f64::to_string));
        rec.extend([r.kl.to_string(), r.tc.to_string(), r.total.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log_csv(path: &Path) -> Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let labels = r.headers()?.len().saturating_sub(6);
    let bad = |what: &str| Error::format(path, format!("bad {what}"));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad("number"))
        };
        rows.push(LogRow {
            epoch: rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("epoch"))?,
            step: rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("step"))?,
            recon_x: f(2)?,
            recon_y: (0..labels).map(|j| f(3 + j)).collect::<Result<_>>()?,
            kl: f(3 + labels)?,
            tc: f(4 + labels)?,
            total: f(5 + labels)?,
        });
    }
    Ok(rows)
}
