use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::create;
use crate::error::{Error, Result};
use crate::train::MetricsRecord;

pub const METRICS_HEADER: &str = "epoch,regime,d,gamma,accuracy,l1,ms_ssim,psnr,ce_loss,sr_loss";

/// One CSV row; `d` is written as `ds` when both factors agree, else `dsxdf`.
pub fn metrics_row(r: &MetricsRecord) -> String {
    let d = if r.ds == r.df {
        r.ds.to_string()
    } else {
        format!("{}x{}", r.ds, r.df)
    };
    format!(
        "{},{},{d},{},{},{},{},{},{},{}",
        r.epoch, r.regime, r.gamma, r.accuracy, r.l1, r.ms_ssim, r.psnr, r.ce_loss, r.sr_loss
    )
}

/// Metrics CSV writer that emits the header on creation.
pub struct MetricsCsv {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsCsv {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = create(path)?;
        writeln!(out, "{METRICS_HEADER}").map_err(|e| Error::io(path, e))?;
        Ok(MetricsCsv {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn write(&mut self, r: &MetricsRecord) -> Result<()> {
        writeln!(self.out, "{}", metrics_row(r)).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}
