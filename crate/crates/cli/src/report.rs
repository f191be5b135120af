//! Study execution and report emission.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use heisenfrac_core::harness::{
    run_cor12, run_kernel_identities, run_multiplier_identities, run_negative_control, run_prop61,
    run_thm11, run_thm12, ContextPool, StabilityReport, StudyOutcome,
};
use heisenfrac_core::lattice::{Lattice, LatticeDescriptor};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, StudyKind};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Pass,
    Fail,
    Inconclusive,
}

impl RunStatus {
    pub fn code(self) -> u8 {
        match self {
            Self::Pass => 0,
            Self::Fail => 1,
            Self::Inconclusive => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Study(heisenfrac_core::Error),
    Io(io::Error),
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

#[derive(Debug, Serialize)]
struct StudySummary {
    name: String,
    params: BTreeMap<String, f64>,
    max_ratio: f64,
    stability: Option<StabilityReport>,
    pass: bool,
    inconclusive: bool,
    excluded_fraction: f64,
    checks: Vec<String>,
    csv: String,
}

#[derive(Debug, Serialize)]
struct Report {
    schema_version: u32,
    timestamp: String,
    config_hash: String,
    seed: u64,
    status: RunStatus,
    lattices: Vec<LatticeDescriptor>,
    studies: Vec<StudySummary>,
}

/// Writes `bytes` next to `path` and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)
}

/// Per-pair rows when the study has ratio reports, otherwise its parameters.
fn study_csv(outcome: &StudyOutcome) -> String {
    if !outcome.reports.is_empty() {
        return outcome.to_csv();
    }
    let mut s = String::from("key,value\n");
    for (k, v) in &outcome.params {
        s.push_str(&format!("{k},{v:.17e}\n"));
    }
    s
}

fn run_study(
    pool: &ContextPool,
    cfg: &RunConfig,
    kind: StudyKind,
) -> heisenfrac_core::Result<StudyOutcome> {
    let c = &cfg.common;
    match kind {
        StudyKind::Thm11 => run_thm11(pool, c, &cfg.thm11),
        StudyKind::Thm12 => run_thm12(pool, c, &cfg.thm12),
        StudyKind::Cor12 => run_cor12(pool, c, &cfg.cor12),
        StudyKind::Prop61 => run_prop61(pool, c, &cfg.prop61),
        StudyKind::NegativeControl => run_negative_control(pool, c, &cfg.negative_control),
        StudyKind::KernelIdentities => run_kernel_identities(
            pool,
            c,
            cfg.kernel_identity_m(),
            cfg.kernel_identities.count,
        ),
        StudyKind::MultiplierIdentities => run_multiplier_identities(),
    }
}

/// Any failure gives `Fail`; otherwise any RHS-floor exclusion overflow gives `Inconclusive`.
fn overall<'a>(outcomes: impl Iterator<Item = &'a StudyOutcome> + Clone) -> RunStatus {
    if outcomes.clone().any(|o| !o.pass) {
        RunStatus::Fail
    } else if outcomes.clone().any(|o| o.inconclusive) {
        RunStatus::Inconclusive
    } else {
        RunStatus::Pass
    }
}

/// Runs every configured study, then writes the CSV files and `report.json`.
pub fn run(cfg: &RunConfig, config_text: &str, out: &Path) -> Result<RunStatus, RunError> {
    let pool = ContextPool::new();
    let mut outcomes = Vec::with_capacity(cfg.studies.len());
    for &kind in &cfg.studies {
        let start = Instant::now();
        let outcome = run_study(&pool, cfg, kind).map_err(RunError::Study)?;
        let verdict = if !outcome.pass {
            "FAIL"
        } else if outcome.inconclusive {
            "INCONCLUSIVE"
        } else {
            "PASS"
        };
        println!(
            "{verdict} {}: max ratio {:.6}; {:.2}s",
            kind.name(),
            outcome.max_ratio,
            start.elapsed().as_secs_f64()
        );
        for check in &outcome.checks {
            println!("    {check}");
        }
        outcomes.push((kind, outcome));
    }
    let status = overall(outcomes.iter().map(|(_, o)| o));
    fs::create_dir_all(out)?;
    let mut studies = Vec::with_capacity(outcomes.len());
    for (i, (kind, o)) in outcomes.into_iter().enumerate() {
        let csv = format!("{:02}-{}.csv", i + 1, kind.name());
        write_atomic(&out.join(&csv), study_csv(&o).as_bytes())?;
        studies.push(StudySummary {
            name: o.name,
            params: o.params,
            max_ratio: o.max_ratio,
            stability: o.stability,
            pass: o.pass,
            inconclusive: o.inconclusive,
            excluded_fraction: o.excluded_fraction,
            checks: o.checks,
            csv,
        });
    }
    let lattices = cfg
        .lattice_sizes()
        .into_iter()
        .map(|m| Lattice::with_default_spacing(cfg.common.n, m).map(|l| l.descriptor()))
        .collect::<heisenfrac_core::Result<_>>()
        .map_err(RunError::Study)?;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        config_hash: format!("{:x}", Sha256::digest(config_text.as_bytes())),
        seed: cfg.common.seed,
        status,
        lattices,
        studies,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_atomic(&out.join(REPORT_FILE), json.as_bytes())?;
    Ok(status)
}
