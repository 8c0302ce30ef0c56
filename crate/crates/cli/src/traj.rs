//! Trajectory persistence: JSON-lines (one record per line) or a compact CSV
//! with the columns t,k,Q...,S...,A...,U...,Y..., thinned by a configurable
//! stride.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use switchsim_core::differential::ChainRecord;
use switchsim_core::switch::SlotRecord;

use crate::report::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TrajFormat {
    #[default]
    Jsonl,
    Csv,
}

pub struct SlotTrajWriter {
    out: BufWriter<File>,
    format: TrajFormat,
    thin: u64,
    wrote_header: bool,
}

impl SlotTrajWriter {
    pub fn create(path: &Path, format: TrajFormat, thin: u64) -> anyhow::Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
            format,
            thin: thin.max(1),
            wrote_header: false,
        })
    }

    pub fn push(&mut self, rec: &SlotRecord) -> anyhow::Result<()> {
        if !rec.t.is_multiple_of(self.thin) {
            return Ok(());
        }
        match self.format {
            TrajFormat::Jsonl => {
                serde_json::to_writer(&mut self.out, rec)?;
                self.out.write_all(b"\n")?;
            }
            TrajFormat::Csv => {
                if !self.wrote_header {
                    let n = rec.q_before.len();
                    let m = rec.y.len();
                    let mut cols = vec!["t".to_string(), "k".to_string()];
                    for (prefix, count) in
                        [("Q", n), ("S", n), ("A", n), ("U", n), ("Y", m)]
                    {
                        for i in 0..count {
                            cols.push(format!("{prefix}{}", i + 1));
                        }
                    }
                    writeln!(self.out, "{}", cols.join(","))?;
                    self.wrote_header = true;
                }
                let mut fields = vec![rec.t.to_string(), rec.decision.to_string()];
                for group in [&rec.q_before, &rec.service, &rec.arrival, &rec.wasted, &rec.y] {
                    fields.extend(group.iter().map(|&v| fmt_f64(v)));
                }
                writeln!(self.out, "{}", fields.join(","))?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub struct ChainTrajWriter {
    out: BufWriter<File>,
    format: TrajFormat,
    thin: u64,
    wrote_header: bool,
}

impl ChainTrajWriter {
    pub fn create(path: &Path, format: TrajFormat, thin: u64) -> anyhow::Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
            format,
            thin: thin.max(1),
            wrote_header: false,
        })
    }

    pub fn push(&mut self, rec: &ChainRecord) -> anyhow::Result<()> {
        if !rec.t.is_multiple_of(self.thin) {
            return Ok(());
        }
        match self.format {
            TrajFormat::Jsonl => {
                serde_json::to_writer(&mut self.out, rec)?;
                self.out.write_all(b"\n")?;
            }
            TrajFormat::Csv => {
                if !self.wrote_header {
                    let n = rec.service.len();
                    let m = rec.y.len();
                    let mut cols = vec!["t".to_string(), "k".to_string()];
                    for (prefix, count) in [("S", n), ("A", n), ("Y", m)] {
                        for i in 0..count {
                            cols.push(format!("{prefix}{}", i + 1));
                        }
                    }
                    writeln!(self.out, "{}", cols.join(","))?;
                    self.wrote_header = true;
                }
                let mut fields = vec![rec.t.to_string(), rec.decision.to_string()];
                for group in [&rec.service, &rec.arrival, &rec.y] {
                    fields.extend(group.iter().map(|&v| fmt_f64(v)));
                }
                writeln!(self.out, "{}", fields.join(","))?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
