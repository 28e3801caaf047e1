//! Monte Carlo probes of the stability criteria on simulated models:
//! Lyapunov bounds, eventual continuity, condition (C), uniform
//! irreducibility, dual-Lipschitz distances between laws and the
//! Lyapunov + irreducibility composition.
//!
//! Limits in time are replaced by the min/max over the recorded output
//! times in a tail window `[t_tail, t_end]`. All pass rules use three
//! standard errors plus explicit floors.

mod dictionary;
mod probes;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use dictionary::{metric_distance, LipschitzAudit, TestFunction, TestFunctionDictionary};
pub use probes::*;

use crate::error::{Error, Result};
use crate::sde::TimeGrid;

/// Ensemble budget shared by the probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub horizon: f64,
    pub dt: f64,
    /// Output every `stride` steps.
    pub stride: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Sampling {
    pub fn grid(&self) -> Result<TimeGrid> {
        if self.paths == 0 {
            return Err(Error::Config("an ensemble needs at least one path".into()));
        }
        TimeGrid::covering(self.horizon, self.dt)
    }
}

/// Point estimate with its standard error over a tail window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    pub estimate: f64,
    pub se: f64,
    pub paths: usize,
    pub window: [f64; 2],
}

/// One row of a probe's long-format curve table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub t: f64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Machine-readable outcome of one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub probe: String,
    /// The inequality the probe tests.
    pub paper_ref: String,
    pub config_digest: String,
    pub estimate: f64,
    pub ci: [f64; 2],
    pub pass: bool,
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve: Vec<CurvePoint>,
}

impl VerdictReport {
    pub fn new(probe: &str, paper_ref: &str, estimate: f64, ci: [f64; 2], pass: bool) -> Self {
        VerdictReport {
            probe: probe.into(),
            paper_ref: paper_ref.into(),
            config_digest: String::new(),
            estimate,
            ci,
            pass,
            flags: Vec::new(),
            curve: Vec::new(),
        }
    }

    pub fn with_curve(mut self, curve: Vec<CurvePoint>) -> Self {
        self.curve = curve;
        self
    }

    pub fn flag(mut self, cond: bool, text: &str) -> Self {
        if cond {
            self.flags.push(text.into());
        }
        self
    }

    /// Long format: `probe,x,t,value,lo,hi`.
    pub fn write_curve_csv(&self, w: &mut impl Write, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(w, "probe,x,t,value,lo,hi")?;
        }
        for c in &self.curve {
            writeln!(w, "{},{},{},{},{},{}", self.probe, c.x, c.t, c.value, c.lo, c.hi)?;
        }
        Ok(())
    }
}
