//! Running scenarios, writing artifacts and checking reproducibility.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::catalog;
use crate::error::RunError;
use crate::experiments::{self, Context};
use crate::report::{ExperimentReport, ExperimentSummary, ScenarioReport};
use crate::scenario::Scenario;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the scenario's `output.dir`.
    pub out: Option<PathBuf>,
    /// Overrides the scenario's seed.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: ScenarioReport,
}

pub fn output_dir(s: &Scenario, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| s.output.dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&s.name))
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(&path, bytes).map_err(|source| RunError::Output { path, source })
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("report types serialize");
    b.push(b'\n');
    b
}

/// Runs every experiment of `s` and writes its artifacts.
///
/// Failing claims are recorded in the reports and do not make this an
/// error; only invalid input, unwritable output and numerical breakdown do.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    s.validate()?;
    let field = s.field.build()?;
    let seed = opts.seed.unwrap_or(s.seed);
    let dir = output_dir(s, opts);
    fs::create_dir_all(&dir).map_err(|source| RunError::Output {
        path: dir.clone(),
        source,
    })?;

    let mut summaries = Vec::new();
    for (i, e) in s.experiments.iter().enumerate() {
        let id = format!("{:02}-{}", i + 1, e.label().unwrap_or(e.kind()));
        let ctx = Context {
            scenario: s,
            field,
            seed: seed.wrapping_add(i as u64),
        };
        let out = experiments::run(&ctx, &id, e)?;
        let mut files = Vec::new();
        for (suffix, bytes) in &out.files {
            let name = format!("{id}-{suffix}");
            write(dir.join(&name), bytes)?;
            files.push(name);
        }
        let claim = e.paper_claim().unwrap_or(&s.paper_claim).to_string();
        let pass = out.checks.iter().all(|c| c.pass);
        let report = ExperimentReport {
            scenario: s.name.clone(),
            experiment: id.clone(),
            kind: e.kind().to_string(),
            paper_claim: claim.clone(),
            pass,
            checks: out.checks,
            files,
            result: out.result,
        };
        write(dir.join(format!("{id}.json")), &json_bytes(&report))?;
        summaries.push(ExperimentSummary {
            experiment: id,
            kind: report.kind,
            paper_claim: claim,
            pass,
            failed_checks: report
                .checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.name.clone())
                .collect(),
        });
    }

    let report = ScenarioReport {
        scenario: s.name.clone(),
        description: s.description.clone(),
        paper_claim: s.paper_claim.clone(),
        seed,
        pass: summaries.iter().all(|e| e.pass),
        experiments: summaries,
    };
    write(dir.join("report.json"), &json_bytes(&report))?;
    Ok(RunOutcome { dir, report })
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub scenario: String,
    pub claims_pass: bool,
    pub reproducible: bool,
    /// Files that differ between the two runs or exist in only one.
    pub mismatched: Vec<String>,
    pub error: Option<String>,
}

impl CheckRow {
    pub fn pass(&self) -> bool {
        self.error.is_none() && self.claims_pass && self.reproducible
    }
}

fn dir_files(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut v = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            v.push((
                entry.file_name().to_string_lossy().into_owned(),
                fs::read(entry.path())?,
            ));
        }
    }
    v.sort();
    Ok(v)
}

/// Names of files whose bytes differ between `a` and `b`.
pub fn diff_dirs(a: &Path, b: &Path) -> std::io::Result<Vec<String>> {
    let fa = dir_files(a)?;
    let fb = dir_files(b)?;
    let mut bad = Vec::new();
    for (name, bytes) in &fa {
        match fb.iter().find(|(n, _)| n == name) {
            Some((_, other)) if other == bytes => {}
            _ => bad.push(name.clone()),
        }
    }
    for (name, _) in &fb {
        if !fa.iter().any(|(n, _)| n == name) {
            bad.push(name.clone());
        }
    }
    Ok(bad)
}

/// Runs `s` twice under `root`, the second time on a single thread, and
/// compares the outputs byte for byte.
pub fn check_scenario(s: &Scenario, root: &Path) -> CheckRow {
    let mut row = CheckRow {
        scenario: s.name.clone(),
        claims_pass: false,
        reproducible: false,
        mismatched: Vec::new(),
        error: None,
    };
    let a = root.join("a").join(&s.name);
    let b = root.join("b").join(&s.name);
    let opts = |d: &Path| RunOptions {
        out: Some(d.to_path_buf()),
        seed: None,
    };
    let first = match run_scenario(s, &opts(&a)) {
        Ok(o) => o,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool");
    if let Err(e) = single.install(|| run_scenario(s, &opts(&b))) {
        row.error = Some(e.to_string());
        return row;
    }
    row.claims_pass = first.report.pass;
    match diff_dirs(&a, &b) {
        Ok(bad) => {
            row.reproducible = bad.is_empty();
            row.mismatched = bad;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// [`check_scenario`] over every bundled scenario.
pub fn check_bundled(root: &Path) -> Result<Vec<CheckRow>, RunError> {
    Ok(catalog::all()?
        .iter()
        .map(|s| check_scenario(s, root))
        .collect())
}

/// Plain-text table of check results.
pub fn format_check_table(rows: &[CheckRow]) -> String {
    let w = rows
        .iter()
        .map(|r| r.scenario.len())
        .max()
        .unwrap_or(8)
        .max(8);
    let mut out = format!(
        "{:<w$}  {:<6}  {:<6}  {:<12}  detail\n",
        "scenario", "result", "claims", "reproducible"
    );
    for r in rows {
        let yn = |b: bool| if b { "yes" } else { "no" };
        let detail = match (&r.error, r.mismatched.is_empty()) {
            (Some(e), _) => e.clone(),
            (None, false) => format!("differs: {}", r.mismatched.join(", ")),
            (None, true) => String::new(),
        };
        out.push_str(&format!(
            "{:<w$}  {:<6}  {:<6}  {:<12}  {}\n",
            r.scenario,
            if r.pass() { "PASS" } else { "FAIL" },
            yn(r.claims_pass),
            yn(r.reproducible),
            detail
        ));
    }
    out
}
