//! Batch drivers for the PCA retention sweep, white-box attack campaigns and the
//! PCA-as-denoiser evaluation, plus CSV/JSON report emission.
//!
//! Rows are independent work items run on a bounded rayon pool; reports are
//! always ordered by `(input_id, scenario, retention_p)`.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{
    embed_in_carrier, silence_attack, targeted_attack, AttackConfig, AttackResult,
};
use crate::audio_io::{distortion_db, read_wav, write_wav, AudioError, Waveform};
use crate::decode::DEFAULT_BEAM_WIDTH;
use crate::metrics::{edit_distance, normalized_edit_distance, similarity};
use crate::model::{AcousticModel, Utterance};
use crate::pca::{pca_attack, RetentionMode, RetentionPolicy};
use crate::spectral::FEATURE_RATE;

/// The retention fractions of the standard sweep.
pub const DEFAULT_RETENTIONS: [f64; 5] = [0.10, 0.35, 0.65, 0.80, 0.95];
pub const DEFAULT_DEFENSE_RETENTION: f64 = 0.95;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no inputs given")]
    EmptyInputs,
    #[error("inputs directory {0}: {1}")]
    Inputs(PathBuf, String),
    #[error("report has no rows")]
    EmptyReport,
    #[error(transparent)]
    IoFailure(#[from] std::io::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PcaAttack,
    Whitebox,
    Silence,
    Carrier,
    Defense,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::PcaAttack => "pca_attack",
            Scenario::Whitebox => "whitebox",
            Scenario::Silence => "silence",
            Scenario::Carrier => "carrier",
            Scenario::Defense => "defense",
        }
    }
}

/// One result line. `similarity` and the edit distances compare `decoded` with the
/// input's ground-truth transcript. For defense rows `success` means the ground
/// truth was recovered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub input_id: String,
    pub scenario: Scenario,
    pub retention_p: Option<f64>,
    pub target: Option<String>,
    pub decoded: String,
    pub similarity: f64,
    pub edit_distance: usize,
    pub normalized_edit_distance: f64,
    pub distortion_db: f64,
    pub success: bool,
    pub iterations: Option<usize>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

impl ReportRow {
    fn new(input_id: &str, scenario: Scenario) -> Self {
        Self {
            input_id: input_id.to_string(),
            scenario,
            retention_p: None,
            target: None,
            decoded: String::new(),
            similarity: f64::NAN,
            edit_distance: 0,
            normalized_edit_distance: f64::NAN,
            distortion_db: f64::NAN,
            success: false,
            iterations: None,
            wall_time_s: 0.0,
            error: None,
        }
    }

    fn score(&mut self, decoded: String, truth: &str) {
        self.similarity = similarity(&decoded, truth);
        self.edit_distance = edit_distance(&decoded, truth);
        self.normalized_edit_distance = normalized_edit_distance(&decoded, truth).unwrap_or(0.0);
        self.decoded = decoded;
    }

    fn fail(mut self, e: impl std::fmt::Display) -> Self {
        self.error = Some(e.to_string());
        self.success = false;
        self
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

fn row_order(a: &ReportRow, b: &ReportRow) -> Ordering {
    a.input_id
        .cmp(&b.input_id)
        .then(a.scenario.cmp(&b.scenario))
        .then_with(|| match (a.retention_p, b.retention_p) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (x, y) => x.is_some().cmp(&y.is_some()),
        })
}

pub fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(row_order);
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessOptions {
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
    pub beam_width: usize,
    /// Fill `wall_time_s`; off by default so reports stay byte-reproducible.
    pub record_timing: bool,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            beam_width: DEFAULT_BEAM_WIDTH,
            record_timing: false,
        }
    }
}

impl HarnessOptions {
    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?;
        Ok(pool.install(job))
    }

    fn elapsed(&self, start: Instant) -> f64 {
        if self.record_timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }
}

/// PCA component reduction at every retention fraction, transcribed and scored
/// against the ground truth.
pub fn run_pca_sweep(
    model: &AcousticModel,
    inputs: &[Utterance],
    retentions: &[f64],
    mode: RetentionMode,
    opts: &HarnessOptions,
) -> Result<Vec<ReportRow>, HarnessError> {
    if inputs.is_empty() || retentions.is_empty() {
        return Err(HarnessError::EmptyInputs);
    }
    let jobs: Vec<(&Utterance, f64)> = inputs
        .iter()
        .flat_map(|u| retentions.iter().map(move |&p| (u, p)))
        .collect();
    let mut rows = opts.run(|| {
        jobs.par_iter()
            .map(|&(u, p)| {
                let start = Instant::now();
                let mut row = ReportRow::new(&u.id, Scenario::PcaAttack);
                row.retention_p = Some(p);
                let out = RetentionPolicy::new(mode, p)
                    .map_err(|e| e.to_string())
                    .and_then(|policy| pca_attack(&u.waveform, policy).map_err(|e| e.to_string()))
                    .and_then(|out| {
                        let text = model
                            .transcribe_text(&out, opts.beam_width)
                            .map_err(|e| e.to_string())?;
                        Ok((out, text))
                    });
                let mut row = match out {
                    Ok((out, text)) => {
                        row.score(text, &u.transcript);
                        row.distortion_db = distortion_db(&u.waveform, &out).unwrap_or(f64::NAN);
                        row.success = row.decoded != u.transcript;
                        row
                    }
                    Err(e) => row.fail(e),
                };
                row.wall_time_s = opts.elapsed(start);
                row
            })
            .collect::<Vec<_>>()
    })?;
    sort_rows(&mut rows);
    Ok(rows)
}

/// A campaign row and, when the attack ran, the adversarial waveform it produced.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub row: ReportRow,
    pub adversarial: Option<Waveform>,
}

/// File name used for an input's adversarial output in `adv_dir`.
pub fn adversarial_file_name(input_id: &str, scenario: Scenario) -> String {
    format!("{input_id}.{}.wav", scenario.as_str())
}

/// Runs one attack per input. `Whitebox` and `Carrier` aim at `cfg.target`;
/// `Silence` aims at the empty transcript. With `adv_dir` every adversarial output
/// is written there and a success only stands if the written file decodes to the
/// target again.
pub fn run_attack_campaign(
    model: &AcousticModel,
    inputs: &[Utterance],
    scenario: Scenario,
    cfg: &AttackConfig,
    adv_dir: Option<&Path>,
    opts: &HarnessOptions,
) -> Result<Vec<AttackOutcome>, HarnessError> {
    if inputs.is_empty() {
        return Err(HarnessError::EmptyInputs);
    }
    if let Some(dir) = adv_dir {
        fs::create_dir_all(dir)?;
    }
    let mut out = opts.run(|| {
        inputs
            .par_iter()
            .map(|u| attack_one(model, u, scenario, cfg, adv_dir, opts))
            .collect::<Vec<_>>()
    })?;
    out.sort_by(|a, b| row_order(&a.row, &b.row));
    Ok(out)
}

/// Targeted attacks toward `cfg.target` on every input.
pub fn run_whitebox_campaign(
    model: &AcousticModel,
    inputs: &[Utterance],
    cfg: &AttackConfig,
    adv_dir: Option<&Path>,
    opts: &HarnessOptions,
) -> Result<Vec<AttackOutcome>, HarnessError> {
    run_attack_campaign(model, inputs, Scenario::Whitebox, cfg, adv_dir, opts)
}

fn attack_one(
    model: &AcousticModel,
    u: &Utterance,
    scenario: Scenario,
    cfg: &AttackConfig,
    adv_dir: Option<&Path>,
    opts: &HarnessOptions,
) -> AttackOutcome {
    let start = Instant::now();
    let mut row = ReportRow::new(&u.id, scenario);
    let result = match scenario {
        Scenario::Silence => silence_attack(model, &u.waveform, cfg),
        Scenario::Carrier => embed_in_carrier(model, &u.waveform, cfg),
        _ => targeted_attack(model, &u.waveform, cfg),
    };
    let target = match scenario {
        Scenario::Silence => String::new(),
        _ => model.alphabet().decode(&cfg.target),
    };
    row.target = Some(target.clone());
    let r: AttackResult = match result {
        Ok(r) => r,
        Err(e) => {
            let mut row = row.fail(e);
            row.wall_time_s = opts.elapsed(start);
            return AttackOutcome {
                row,
                adversarial: None,
            };
        }
    };
    row.score(model.alphabet().decode(&r.decoded), &u.transcript);
    row.distortion_db = r.distortion_db;
    row.success = r.success;
    row.iterations = Some(r.iterations_used);
    if let Some(dir) = adv_dir {
        let path = dir.join(adversarial_file_name(&u.id, scenario));
        let verified = write_wav(&r.adversarial, &path)
            .map_err(|e| e.to_string())
            .and_then(|_| read_wav(&path).map_err(|e| e.to_string()))
            .and_then(|w| {
                model
                    .transcribe_text(&w, opts.beam_width)
                    .map_err(|e| e.to_string())
            });
        match verified {
            Ok(text) if r.success && text != target => {
                row = row.fail(format!(
                    "{} decodes to {text:?} after writing",
                    path.display()
                ))
            }
            Ok(_) => {}
            Err(e) => row = row.fail(e),
        }
    }
    row.wall_time_s = opts.elapsed(start);
    AttackOutcome {
        row,
        adversarial: Some(r.adversarial),
    }
}

/// An adversarial waveform with the transcript of the input it was made from.
#[derive(Debug, Clone)]
pub struct DefenseInput {
    pub input_id: String,
    pub adversarial: Waveform,
    pub transcript: String,
}

/// Applies PCA reduction to adversarial waveforms as a would-be denoiser. A row
/// succeeds (the input is "recovered") iff the decode equals the original
/// transcript. `distortion_db` measures the change the denoiser made.
pub fn run_defense_eval(
    model: &AcousticModel,
    inputs: &[DefenseInput],
    retention_p: f64,
    mode: RetentionMode,
    opts: &HarnessOptions,
) -> Result<Vec<ReportRow>, HarnessError> {
    if inputs.is_empty() {
        return Err(HarnessError::EmptyInputs);
    }
    let mut rows = opts.run(|| {
        inputs
            .par_iter()
            .map(|d| {
                let start = Instant::now();
                let mut row = ReportRow::new(&d.input_id, Scenario::Defense);
                row.retention_p = Some(retention_p);
                row.target = Some(d.transcript.clone());
                let out = RetentionPolicy::new(mode, retention_p)
                    .map_err(|e| e.to_string())
                    .and_then(|policy| {
                        pca_attack(&d.adversarial, policy).map_err(|e| e.to_string())
                    })
                    .and_then(|out| {
                        let text = model
                            .transcribe_text(&out, opts.beam_width)
                            .map_err(|e| e.to_string())?;
                        Ok((out, text))
                    });
                let mut row = match out {
                    Ok((out, text)) => {
                        row.score(text, &d.transcript);
                        row.distortion_db = distortion_db(&d.adversarial, &out).unwrap_or(f64::NAN);
                        row.success = row.decoded == d.transcript;
                        row
                    }
                    Err(e) => row.fail(e),
                };
                row.wall_time_s = opts.elapsed(start);
                row
            })
            .collect::<Vec<_>>()
    })?;
    sort_rows(&mut rows);
    Ok(rows)
}

/// Fraction of non-error defense rows that recovered the original transcript.
pub fn recovery_rate(rows: &[ReportRow]) -> Option<f64> {
    let done: Vec<&ReportRow> = rows
        .iter()
        .filter(|r| r.scenario == Scenario::Defense && !r.is_error())
        .collect();
    (!done.is_empty()).then(|| done.iter().filter(|r| r.success).count() as f64 / done.len() as f64)
}

/// Means over the non-error rows of one (scenario, retention) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: Scenario,
    pub retention_p: Option<f64>,
    pub rows: usize,
    pub errors: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_similarity: f64,
    pub mean_edit_distance: f64,
    pub mean_normalized_edit_distance: f64,
    /// Over successful rows with finite distortion.
    pub mean_abs_distortion_db: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn aggregate(rows: &[ReportRow]) -> Vec<Aggregate> {
    let mut keys: Vec<(Scenario, Option<f64>)> =
        rows.iter().map(|r| (r.scenario, r.retention_p)).collect();
    keys.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| match (a.1, b.1) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (x, y) => x.is_some().cmp(&y.is_some()),
        })
    });
    keys.dedup_by(|a, b| a.0 == b.0 && a.1.map(f64::to_bits) == b.1.map(f64::to_bits));
    keys.into_iter()
        .map(|(scenario, p)| {
            let group: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| {
                    r.scenario == scenario && r.retention_p.map(f64::to_bits) == p.map(f64::to_bits)
                })
                .collect();
            let ok: Vec<&&ReportRow> = group.iter().filter(|r| !r.is_error()).collect();
            let successes = ok.iter().filter(|r| r.success).count();
            let distortions: Vec<f64> = ok
                .iter()
                .filter(|r| r.success && r.distortion_db.is_finite())
                .map(|r| r.distortion_db.abs())
                .collect();
            Aggregate {
                scenario,
                retention_p: p,
                rows: group.len(),
                errors: group.len() - ok.len(),
                successes,
                success_rate: if ok.is_empty() {
                    f64::NAN
                } else {
                    successes as f64 / ok.len() as f64
                },
                mean_similarity: mean(ok.iter().map(|r| r.similarity)),
                mean_edit_distance: mean(ok.iter().map(|r| r.edit_distance as f64)),
                mean_normalized_edit_distance: mean(ok.iter().map(|r| r.normalized_edit_distance)),
                mean_abs_distortion_db: (!distortions.is_empty())
                    .then(|| mean(distortions.into_iter())),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `.json` means JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

/// JSON cannot hold infinities: they become `null` plus a `distortion_db_sentinel`
/// of `"-inf"` or `"inf"`. NaN becomes a bare `null`.
#[derive(Serialize, Deserialize)]
struct JsonRow {
    input_id: String,
    scenario: Scenario,
    retention_p: Option<f64>,
    target: Option<String>,
    decoded: String,
    similarity: Option<f64>,
    edit_distance: usize,
    normalized_edit_distance: Option<f64>,
    distortion_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distortion_db_sentinel: Option<String>,
    success: bool,
    iterations: Option<usize>,
    wall_time_s: f64,
    error: Option<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl From<&ReportRow> for JsonRow {
    fn from(r: &ReportRow) -> Self {
        let sentinel = match r.distortion_db {
            v if v == f64::NEG_INFINITY => Some("-inf".to_string()),
            v if v == f64::INFINITY => Some("inf".to_string()),
            _ => None,
        };
        JsonRow {
            input_id: r.input_id.clone(),
            scenario: r.scenario,
            retention_p: r.retention_p,
            target: r.target.clone(),
            decoded: r.decoded.clone(),
            similarity: finite(r.similarity),
            edit_distance: r.edit_distance,
            normalized_edit_distance: finite(r.normalized_edit_distance),
            distortion_db: finite(r.distortion_db),
            distortion_db_sentinel: sentinel,
            success: r.success,
            iterations: r.iterations,
            wall_time_s: r.wall_time_s,
            error: r.error.clone(),
        }
    }
}

impl From<JsonRow> for ReportRow {
    fn from(j: JsonRow) -> Self {
        let distortion_db = match (j.distortion_db, j.distortion_db_sentinel.as_deref()) {
            (Some(v), _) => v,
            (None, Some("-inf")) => f64::NEG_INFINITY,
            (None, Some("inf")) => f64::INFINITY,
            (None, _) => f64::NAN,
        };
        ReportRow {
            input_id: j.input_id,
            scenario: j.scenario,
            retention_p: j.retention_p,
            target: j.target,
            decoded: j.decoded,
            similarity: j.similarity.unwrap_or(f64::NAN),
            edit_distance: j.edit_distance,
            normalized_edit_distance: j.normalized_edit_distance.unwrap_or(f64::NAN),
            distortion_db,
            success: j.success,
            iterations: j.iterations,
            wall_time_s: j.wall_time_s,
            error: j.error,
        }
    }
}

pub fn rows_to_csv(rows: &[ReportRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::IoFailure(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn rows_to_json(rows: &[ReportRow]) -> Result<String, HarnessError> {
    let json: Vec<JsonRow> = rows.iter().map(JsonRow::from).collect();
    Ok(serde_json::to_string_pretty(&json)? + "\n")
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn rows_from_json(text: &str) -> Result<Vec<ReportRow>, HarnessError> {
    let rows: Vec<JsonRow> = serde_json::from_str(text)?;
    Ok(rows.into_iter().map(ReportRow::from).collect())
}

pub fn aggregates_to_csv(aggs: &[Aggregate]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for a in aggs {
        w.serialize(a)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::IoFailure(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Paths of the files written next to a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub report: PathBuf,
    pub summary: PathBuf,
    /// Similarity and edit distance against retention, present for sweeps.
    pub similarity_curve: Option<PathBuf>,
    pub edit_distance_curve: Option<PathBuf>,
}

impl ReportFiles {
    /// `out.csv` gives `out.summary.csv`, `out.similarity_vs_retention.csv` and
    /// `out.edit_distance_vs_retention.csv`.
    pub fn for_report(path: &Path) -> Self {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("report");
        let sibling = |suffix: &str| path.with_file_name(format!("{stem}.{suffix}.csv"));
        ReportFiles {
            report: path.to_path_buf(),
            summary: sibling("summary"),
            similarity_curve: Some(sibling("similarity_vs_retention")),
            edit_distance_curve: Some(sibling("edit_distance_vs_retention")),
        }
    }
}

/// Writes the rows in `format`, the aggregate table, and for sweeps the two
/// retention curves.
pub fn emit_report(
    rows: &[ReportRow],
    format: ReportFormat,
    path: &Path,
) -> Result<ReportFiles, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    let mut files = ReportFiles::for_report(path);
    let body = match format {
        ReportFormat::Csv => rows_to_csv(rows)?,
        ReportFormat::Json => rows_to_json(rows)?,
    };
    fs::write(&files.report, body)?;
    let aggs = aggregate(rows);
    fs::write(&files.summary, aggregates_to_csv(&aggs)?)?;

    let sweep: Vec<&Aggregate> = aggs
        .iter()
        .filter(|a| a.scenario == Scenario::PcaAttack)
        .collect();
    if sweep.is_empty() {
        files.similarity_curve = None;
        files.edit_distance_curve = None;
    } else {
        let mut sim = String::from("retention_percent,mean_similarity_percent\n");
        let mut ed = String::from("retention_percent,mean_edit_distance\n");
        for a in sweep {
            let p = a.retention_p.unwrap_or(f64::NAN) * 100.0;
            sim.push_str(&format!("{p},{}\n", a.mean_similarity * 100.0));
            ed.push_str(&format!("{p},{}\n", a.mean_edit_distance));
        }
        fs::write(files.similarity_curve.as_ref().expect("set"), sim)?;
        fs::write(files.edit_distance_curve.as_ref().expect("set"), ed)?;
    }
    Ok(files)
}

pub fn load_report(path: &Path) -> Result<Vec<ReportRow>, HarnessError> {
    let text = fs::read_to_string(path)?;
    match ReportFormat::from_path(path) {
        ReportFormat::Csv => rows_from_csv(&text),
        ReportFormat::Json => rows_from_json(&text),
    }
}

/// `*.wav` files in `dir`, each with a `.txt` transcript beside it, sorted by name.
/// A missing transcript reads as empty. The id is the file stem.
pub fn load_inputs(dir: &Path) -> Result<Vec<Utterance>, HarnessError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| HarnessError::Inputs(dir.to_path_buf(), e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(HarnessError::Inputs(
            dir.to_path_buf(),
            "no .wav files".into(),
        ));
    }
    paths
        .into_iter()
        .map(|p| {
            let waveform = read_wav(&p)?;
            let transcript = match fs::read_to_string(p.with_extension("txt")) {
                Ok(t) => t.trim().to_string(),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
                Err(e) => return Err(e.into()),
            };
            let id = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            Ok(Utterance {
                id,
                waveform,
                transcript,
            })
        })
        .collect()
}

/// Writes `<id>.wav` and `<id>.txt` for every utterance.
pub fn write_inputs(dir: &Path, utterances: &[Utterance]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    for u in utterances {
        write_wav(&u.waveform, dir.join(format!("{}.wav", u.id)))?;
        fs::write(
            dir.join(format!("{}.txt", u.id)),
            format!("{}\n", u.transcript),
        )?;
    }
    Ok(())
}

/// Semitone offsets from the root for a major and a minor triad.
const MAJOR: [i32; 3] = [0, 4, 7];
const MINOR: [i32; 3] = [0, 3, 7];
/// I-V-vi-IV in semitones above the key.
const PROGRESSION: [(i32, [i32; 3]); 4] = [(0, MAJOR), (7, MAJOR), (9, MINOR), (5, MAJOR)];
const CHORD_SAMPLES: usize = 8000;
const CARRIER_PEAK: f64 = 9000.0;

/// A synthetic "music" carrier: I-V-vi-IV triads with three decaying harmonics
/// and a short attack envelope, in a seed-chosen key. `transcript` is empty.
pub fn chord_progression(chords: usize, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // key between A3 and G#4
    let key_hz = 220.0 * 2f64.powf(rng.random_range(0..12) as f64 / 12.0);
    let phases: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut out = Vec::with_capacity(chords * CHORD_SAMPLES);
    for c in 0..chords {
        let (root, triad) = PROGRESSION[c % PROGRESSION.len()];
        for n in 0..CHORD_SAMPLES {
            let t = n as f64 / FEATURE_RATE as f64;
            let envelope = (t / 0.02).min(1.0) * (-1.5 * t).exp();
            let mut v = 0.0;
            for (i, &step) in triad.iter().enumerate() {
                let f = key_hz * 2f64.powf((root + step) as f64 / 12.0);
                for h in 1..=3 {
                    v += (2.0 * PI * f * h as f64 * t + phases[i * 3 + h - 1]).sin() / h as f64;
                }
            }
            out.push(v * envelope);
        }
    }
    let peak = out.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
    let samples: Vec<f64> = out.iter().map(|v| v * CARRIER_PEAK / peak).collect();
    Waveform::from_f64(&samples, FEATURE_RATE).expect("positive rate")
}

/// `n` chord-progression carriers as utterances with empty transcripts.
pub fn synth_carriers(n: usize, chords: usize, seed: u64) -> Vec<Utterance> {
    (0..n)
        .map(|i| Utterance {
            id: format!("carrier-{seed}-{i:04}"),
            waveform: chord_progression(chords, seed.wrapping_add(i as u64)),
            transcript: String::new(),
        })
        .collect()
}
