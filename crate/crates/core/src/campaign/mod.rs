//! Campaign runner: a versioned JSON config names a model, an ensemble
//! budget and an ordered list of probes; a run writes one JSON detail file
//! and one long-format CSV per probe, `verdicts.jsonl` and `manifest.json`.
//!
//! Every random draw derives from the config's explicit seed, so re-running
//! a config reproduces its verdicts bit for bit.

mod probes;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use probes::{list_probes, ProbeInfo, StateSpec};

use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelSpec};
use crate::verifiers::VerdictReport;

pub const CAMPAIGN_SCHEMA: &str = "ergoverify-campaign-v1";
pub const MANIFEST_SCHEMA: &str = "ergoverify-manifest-v1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignKind {
    Simulate,
    Couple,
    Verify,
    Chainlab,
}

/// Ensemble budget shared by the probes of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub horizon: f64,
    pub dt: f64,
    pub stride: usize,
    pub paths: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { horizon: 10.0, dt: 0.01, stride: 10, paths: 64 }
    }
}

/// Per-probe override of the shared budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetPatch {
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub stride: Option<usize>,
    pub paths: Option<usize>,
}

impl Budget {
    pub fn patched(&self, p: &BudgetPatch) -> Budget {
        Budget {
            horizon: p.horizon.unwrap_or(self.horizon),
            dt: p.dt.unwrap_or(self.dt),
            stride: p.stride.unwrap_or(self.stride),
            paths: p.paths.unwrap_or(self.paths),
        }
    }
}

/// One probe invocation. `params` is checked against the probe's own
/// parameter schema before anything runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeEntry {
    pub probe: String,
    /// Whether a failure fails the run; defaults per probe.
    #[serde(default)]
    pub assert: Option<bool>,
    /// Defaults to the campaign seed plus the probe's position.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    pub kind: CampaignKind,
    /// Inline model; exclusive with `model_file`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Model file (`ergoverify-model-v1`), relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub probes: Vec<ProbeEntry>,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: CampaignConfig = serde_json::from_str(text)?;
        if cfg.schema != CAMPAIGN_SCHEMA {
            return Err(Error::Config(format!("campaign schema {:?}, expected {CAMPAIGN_SCHEMA:?}", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// One verdict in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub asserted: bool,
    pub seed: u64,
    pub verdict: VerdictReport,
    /// Artifacts written by this probe, relative to the run directory.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    pub name: String,
    pub kind: CampaignKind,
    pub seed: u64,
    /// SHA-256 of the canonical config (and model file), output dir excluded.
    pub config_digest: String,
    /// SHA-256 of the serialized verdicts; equal across identical runs.
    pub verdict_digest: String,
    pub verdicts: Vec<ManifestEntry>,
    /// Every file of the run except the manifest itself.
    pub artifacts: Vec<String>,
    pub passed: bool,
    pub wall_clock_s: f64,
    pub probe_seconds: Vec<f64>,
}

impl RunManifest {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.display().to_string()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Overrides the config's `output_dir`.
    pub out: Option<PathBuf>,
    pub seed_override: Option<u64>,
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    format!("{:x}", h.finalize())
}

/// Digest of the config as run: canonical JSON without the output
/// directory, plus the model file contents when one is referenced.
pub fn config_digest(cfg: &CampaignConfig, model_text: Option<&str>) -> Result<String> {
    let mut c = cfg.clone();
    c.output_dir = None;
    let canonical = serde_json::to_vec(&c)?;
    Ok(sha256_hex(&[&canonical, model_text.unwrap_or("").as_bytes()]))
}

/// Loads the config at `path`, runs it and writes the run directory.
pub fn run_campaign(path: &Path, opts: &RunOptions) -> Result<RunManifest> {
    let cfg = CampaignConfig::from_file(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_config(&cfg, base, opts)
}

/// Runs a parsed config; relative paths resolve against `base`.
pub fn run_config(cfg: &CampaignConfig, base: &Path, opts: &RunOptions) -> Result<RunManifest> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed_override {
        cfg.seed = seed;
    }
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(|d| base.join(d)))
        .ok_or_else(|| Error::Config("no output directory (set `output_dir` or pass --out)".into()))?;

    let (spec, model_text) = match (&cfg.model, &cfg.model_file) {
        (Some(_), Some(_)) => return Err(Error::Config("`model` and `model_file` are exclusive".into())),
        (Some(m), None) => (Some(m.clone()), None),
        (None, Some(f)) => {
            let p = base.join(f);
            let text = fs::read_to_string(&p).map_err(|e| Error::Config(format!("missing model file {}: {e}", p.display())))?;
            (Some(ModelConfig::from_json(&text)?.model), Some(text))
        }
        (None, None) => (None, None),
    };
    let digest = config_digest(&cfg, model_text.as_deref())?;
    let plan = probes::plan(&cfg, spec.is_some())?;
    let model = match (&spec, plan.iter().any(|p| p.needs_model())) {
        (Some(s), true) => Some(s.build()?),
        _ => None,
    };

    fs::create_dir_all(&out)?;
    let mut ctx = probes::Context::new(model, cfg.budget, &digest);
    let mut verdicts = Vec::with_capacity(plan.len());
    let mut artifacts = Vec::new();
    let mut probe_seconds = Vec::with_capacity(plan.len());
    for (index, step) in plan.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = ctx.run(step)?;
        probe_seconds.push(t0.elapsed().as_secs_f64());
        let stem = format!("{index:02}_{}", step.info.name);
        let mut files = Vec::new();
        let json = format!("{stem}.json");
        fs::write(out.join(&json), serde_json::to_vec_pretty(&outcome.detail)?)?;
        files.push(json);
        if !outcome.verdict.curve.is_empty() {
            let csv = format!("{stem}.csv");
            let mut buf = Vec::new();
            outcome.verdict.write_curve_csv(&mut buf, true)?;
            fs::write(out.join(&csv), buf)?;
            files.push(csv);
        }
        for (suffix, bytes) in outcome.extra {
            let name = format!("{stem}_{suffix}");
            fs::write(out.join(&name), bytes)?;
            files.push(name);
        }
        artifacts.extend(files.iter().cloned());
        verdicts.push(ManifestEntry { index, asserted: step.asserted, seed: step.seed, verdict: outcome.verdict, artifacts: files });
    }

    let mut lines = Vec::new();
    for v in &verdicts {
        serde_json::to_writer(&mut lines, v)?;
        lines.push(b'\n');
    }
    if !lines.is_empty() {
        fs::write(out.join("verdicts.jsonl"), &lines)?;
        artifacts.push("verdicts.jsonl".into());
    }

    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        name: cfg.name.clone(),
        kind: cfg.kind,
        seed: cfg.seed,
        config_digest: digest,
        verdict_digest: sha256_hex(&[&lines]),
        passed: verdicts.iter().all(|v| !v.asserted || v.verdict.pass),
        verdicts,
        artifacts,
        wall_clock_s: start.elapsed().as_secs_f64(),
        probe_seconds,
    };
    fs::write(out.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub summary: String,
    pub summary_path: PathBuf,
    pub tables: Vec<PathBuf>,
}

/// Reads `manifest.json` in `dir`, checks that every declared artifact is
/// present and non-empty, then writes `summary.txt` and one long-format
/// table per probe (`probe,x,t,value,lo,hi`).
pub fn emit_report(dir: &Path) -> Result<ReportFiles> {
    let manifest = RunManifest::from_file(&dir.join(MANIFEST_FILE))?;
    for a in &manifest.artifacts {
        let ok = fs::metadata(dir.join(a)).map(|m| m.len() > 0).unwrap_or(false);
        if !ok {
            return Err(Error::MissingArtifact(a.clone()));
        }
    }
    let summary = summary_text(&manifest);
    let summary_path = dir.join(SUMMARY_FILE);
    fs::write(&summary_path, &summary)?;
    let mut tables = Vec::new();
    for e in &manifest.verdicts {
        let path = dir.join(format!("report_{:02}_{}.csv", e.index, e.verdict.probe));
        let mut buf = Vec::new();
        if e.verdict.curve.is_empty() {
            // single-point table: the estimate and its interval
            let mut v = e.verdict.clone();
            v.curve = vec![crate::verifiers::CurvePoint { x: 0.0, t: 0.0, value: v.estimate, lo: v.ci[0], hi: v.ci[1] }];
            v.write_curve_csv(&mut buf, true)?;
        } else {
            e.verdict.write_curve_csv(&mut buf, true)?;
        }
        fs::write(&path, buf)?;
        tables.push(path);
    }
    Ok(ReportFiles { summary, summary_path, tables })
}

/// Human-readable summary of a manifest.
pub fn summary_text(m: &RunManifest) -> String {
    let mut s = String::new();
    s.push_str(&format!("ergoverify {} report\n", m.tool_version));
    s.push_str(&format!("campaign: {} ({:?}), seed {}\n", if m.name.is_empty() { "unnamed" } else { &m.name }, m.kind, m.seed));
    s.push_str(&format!("config digest: {}\n", m.config_digest));
    s.push_str(&format!("verdict digest: {}\n", m.verdict_digest));
    if m.verdicts.is_empty() {
        s.push_str("no probes\n");
        return s;
    }
    for e in &m.verdicts {
        let v = &e.verdict;
        s.push_str(&format!(
            "{:>3} {:<24} {} {:<8} estimate {:.6e}  ci [{:.6e}, {:.6e}]  {}\n",
            e.index,
            v.probe,
            if v.pass { "PASS" } else { "FAIL" },
            if e.asserted { "asserted" } else { "report" },
            v.estimate,
            v.ci[0],
            v.ci[1],
            v.paper_ref
        ));
        for f in &v.flags {
            s.push_str(&format!("      flag: {f}\n"));
        }
    }
    let failed = m.verdicts.iter().filter(|e| e.asserted && !e.verdict.pass).count();
    let asserted = m.verdicts.iter().filter(|e| e.asserted).count();
    s.push_str(&format!("result: {} of {asserted} asserted probes failed\n", failed));
    s
}

#[cfg(test)]
mod tests;
