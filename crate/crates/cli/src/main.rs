//! `advaudio`: train the toy acoustic model, craft adversarial audio, and run
//! PCA sweeps, attack campaigns and defense evaluations.
//!
//! Exit codes: 0 on success, 1 on operational or row-level errors, 2 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use advaudio::attack::{silence_attack, targeted_attack, AttackConfig, AttackResult};
use advaudio::audio_io::{read_wav, resample_linear, write_wav};
use advaudio::decode::DEFAULT_BEAM_WIDTH;
use advaudio::harness::{
    adversarial_file_name, aggregate, emit_report, load_inputs, load_report, recovery_rate,
    run_attack_campaign, run_defense_eval, run_pca_sweep, synth_carriers, write_inputs,
    DefenseInput, HarnessOptions, ReportFormat, ReportRow, Scenario, DEFAULT_DEFENSE_RETENTION,
    DEFAULT_RETENTIONS,
};
use advaudio::model::{
    load_checkpoint, save_checkpoint, synth_corpus, train_with_progress, AcousticModel,
    TrainConfig, DEFAULT_HIDDEN,
};
use advaudio::pca::{pca_attack, RetentionMode, RetentionPolicy};
use advaudio::spectral::power_spectrum;

/// Every default in one place; `--help` shows them.
mod defaults {
    pub const BEAM_WIDTH: usize = advaudio::decode::DEFAULT_BEAM_WIDTH;
    pub const MAX_ITER: usize = advaudio::attack::AttackConfig::DEFAULT_MAX_ITERATIONS;
    pub const ATTACK_LR: f64 = advaudio::attack::AttackConfig::DEFAULT_LEARNING_RATE;
    pub const CHECK_INTERVAL: usize = advaudio::attack::AttackConfig::DEFAULT_CHECK_INTERVAL;
    pub const SEED: u64 = 7;
    pub const CORPUS_SIZE: usize = 200;
    pub const EPOCHS: usize = 20;
    pub const TRAIN_LR: f64 = 0.005;
    pub const BATCH_SIZE: usize = 4;
    pub const WORKERS: usize = 1;
    pub const TARGET: &str = "evil";
    pub const CARRIER_CHORDS: usize = 4;
}

#[derive(Parser, Debug)]
#[command(
    name = "advaudio",
    version,
    about = "Adversarial examples against a CTC speech-to-text model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    /// Smallest k whose eigenvalues hold the fraction of total variance
    Variance,
    /// round(fraction * available components)
    Components,
}

impl From<ModeArg> for RetentionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Variance => RetentionMode::VarianceFraction,
            ModeArg::Components => RetentionMode::ComponentFraction,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioArg {
    Whitebox,
    Silence,
    Carrier,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Whitebox => Scenario::Whitebox,
            ScenarioArg::Silence => Scenario::Silence,
            ScenarioArg::Carrier => Scenario::Carrier,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    /// Dual-tone utterances with transcripts
    Speech,
    /// Chord-progression carriers with empty transcripts
    Music,
}

#[derive(clap::Args, Debug, Clone)]
struct AttackArgs {
    /// Gradient steps before giving up
    #[arg(long, default_value_t = defaults::MAX_ITER)]
    max_iter: usize,
    /// Per-sample step in int16 units, halved on long plateaus
    #[arg(long, default_value_t = defaults::ATTACK_LR)]
    lr: f64,
    /// Iterations between beam-search success checks
    #[arg(long, default_value_t = defaults::CHECK_INTERVAL)]
    check_interval: usize,
    #[arg(long, default_value_t = defaults::BEAM_WIDTH)]
    beam_width: usize,
    #[arg(long, default_value_t = defaults::SEED)]
    seed: u64,
}

#[derive(clap::Args, Debug, Clone)]
struct RunArgs {
    /// Worker threads for independent rows
    #[arg(long, default_value_t = defaults::WORKERS)]
    workers: usize,
    #[arg(long, default_value_t = defaults::BEAM_WIDTH)]
    beam_width: usize,
    /// Record wall_time_s (reports are then no longer byte-reproducible)
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn options(&self) -> HarnessOptions {
        HarnessOptions {
            workers: self.workers,
            beam_width: self.beam_width,
            record_timing: self.timing,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the acoustic model on a synthetic corpus and save a checkpoint
    Train {
        #[arg(long)]
        out: PathBuf,
        /// Number of synthetic training utterances
        #[arg(long, default_value_t = defaults::CORPUS_SIZE)]
        n: usize,
        #[arg(long, default_value_t = defaults::SEED)]
        seed: u64,
        #[arg(long, default_value_t = defaults::EPOCHS)]
        epochs: usize,
        /// Adam step size
        #[arg(long, default_value_t = defaults::TRAIN_LR)]
        lr: f64,
        #[arg(long, default_value_t = defaults::BATCH_SIZE)]
        batch_size: usize,
        #[arg(long, default_value_t = DEFAULT_HIDDEN)]
        hidden: usize,
    },
    /// Print the beam-search transcript of a WAV file
    Transcribe {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
        beam_width: usize,
    },
    /// Targeted white-box attack toward a phrase
    Attack {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the result as JSON here
        #[arg(long)]
        result_json: Option<PathBuf>,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// Attack toward the empty transcript
    Silence {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        result_json: Option<PathBuf>,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// PCA component reduction of a WAV file
    PcaAttack {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Retained fraction in (0, 1]
        #[arg(long)]
        retain: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Variance)]
        retain_mode: ModeArg,
    },
    /// PCA retention sweep over a directory of WAV files with .txt transcripts
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        inputs_dir: PathBuf,
        /// Report path; .json for JSON, anything else CSV
        #[arg(long)]
        out_report: PathBuf,
        /// Comma-separated retention fractions
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RETENTIONS.to_vec())]
        retain: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Variance)]
        retain_mode: ModeArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// One attack per input file
    Campaign {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        inputs_dir: PathBuf,
        /// Ignored for the silence scenario
        #[arg(long, default_value = defaults::TARGET)]
        target: String,
        #[arg(long)]
        out_report: PathBuf,
        /// Where adversarial WAVs are written
        #[arg(long)]
        adv_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = ScenarioArg::Whitebox)]
        scenario: ScenarioArg,
        #[command(flatten)]
        attack: AttackArgs,
        #[arg(long, default_value_t = defaults::WORKERS)]
        workers: usize,
        #[arg(long)]
        timing: bool,
    },
    /// Apply PCA reduction to a campaign's successful adversarial outputs
    Defend {
        #[arg(long)]
        model: PathBuf,
        /// Campaign report
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DEFENSE_RETENTION)]
        retain: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Variance)]
        retain_mode: ModeArg,
        /// Directory holding the campaign's adversarial WAVs
        #[arg(long)]
        adv_dir: PathBuf,
        /// Directory holding the original transcripts
        #[arg(long)]
        inputs_dir: PathBuf,
        #[arg(long)]
        out_report: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Resample a WAV file with linear interpolation
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rate: u32,
    },
    /// Write synthetic inputs (WAV plus .txt transcript) to a directory
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = defaults::SEED)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = SynthKind::Speech)]
        kind: SynthKind,
        /// Chords per music carrier (0.5 s each)
        #[arg(long, default_value_t = defaults::CARRIER_CHORDS)]
        chords: usize,
    },
    /// Write the power spectrum of a WAV file as CSV (bin_hz,power_db)
    Spectrum {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-scenario aggregates of a report
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

type Fallible<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn with_path(path: &Path) -> impl Fn(String) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

fn model_at(path: &Path) -> Fallible<AcousticModel> {
    load_checkpoint(path).map_err(err).map_err(with_path(path))
}

fn attack_config(model: &AcousticModel, target: &str, a: &AttackArgs) -> Fallible<AttackConfig> {
    let phrase = model.alphabet().encode(target).map_err(err)?;
    Ok(AttackConfig {
        target: phrase,
        max_iterations: a.max_iter,
        learning_rate: a.lr,
        success_check_interval: a.check_interval,
        beam_width: a.beam_width,
        seed: a.seed,
    })
}

fn result_json(model: &AcousticModel, r: &AttackResult, target: &str) -> serde_json::Value {
    let d = r.distortion_db;
    serde_json::json!({
        "target": target,
        "decoded": model.alphabet().decode(&r.decoded),
        "success": r.success,
        "iterations": r.iterations_used,
        "distortion_db": d.is_finite().then_some(d),
        "distortion_db_sentinel": (!d.is_finite()).then(|| if d < 0.0 { "-inf" } else { "inf" }),
        "final_loss": r.loss_trace.last(),
    })
}

fn finish_attack(
    model: &AcousticModel,
    r: AttackResult,
    target: &str,
    out: &Path,
    json: Option<&Path>,
) -> Fallible<ExitCode> {
    write_wav(&r.adversarial, out)
        .map_err(err)
        .map_err(with_path(out))?;
    if let Some(path) = json {
        let text =
            serde_json::to_string_pretty(&result_json(model, &r, target)).map_err(err)? + "\n";
        fs::write(path, text)
            .map_err(err)
            .map_err(with_path(path))?;
    }
    let decoded = model.alphabet().decode(&r.decoded);
    println!(
        "success={} iterations={} distortion_db={} decoded={decoded:?}",
        r.success, r.iterations_used, r.distortion_db
    );
    Ok(if r.success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn print_summary(rows: &[ReportRow]) {
    for a in aggregate(rows) {
        let p = a.retention_p.map(|p| format!(" p={p}")).unwrap_or_default();
        let distortion = a
            .mean_abs_distortion_db
            .map(|d| format!(" mean|distortion|={d:.4}dB"))
            .unwrap_or_default();
        println!(
            "{}{p}: rows={} errors={} successes={} mean_similarity={:.4} mean_edit_distance={:.4}{distortion}",
            a.scenario.as_str(),
            a.rows,
            a.errors,
            a.successes,
            a.mean_similarity,
            a.mean_edit_distance,
        );
    }
    if let Some(rate) = recovery_rate(rows) {
        println!("recovery_rate={rate:.4}");
    }
}

fn write_report(rows: &[ReportRow], path: &Path) -> Fallible<ExitCode> {
    let files = emit_report(rows, ReportFormat::from_path(path), path).map_err(err)?;
    print_summary(rows);
    println!("wrote {}", files.report.display());
    let errors: Vec<&ReportRow> = rows.iter().filter(|r| r.is_error()).collect();
    for r in &errors {
        eprintln!(
            "row {} ({}): {}",
            r.input_id,
            r.scenario.as_str(),
            r.error.as_deref().unwrap_or_default()
        );
    }
    Ok(if errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> Fallible<ExitCode> {
    match cli.command {
        Command::Train {
            out,
            n,
            seed,
            epochs,
            lr,
            batch_size,
            hidden,
        } => {
            if n == 0 {
                return Err("--n must be at least 1".into());
            }
            let corpus = synth_corpus(n, seed);
            let config = TrainConfig {
                epochs,
                learning_rate: lr,
                batch_size,
                hidden,
                seed,
                ..TrainConfig::default()
            };
            let (model, _) = train_with_progress(&corpus, &config, |e, l| {
                eprintln!("epoch {:>3}  loss {l:.4}", e + 1)
            })
            .map_err(err)?;
            save_checkpoint(&model, &out)
                .map_err(err)
                .map_err(with_path(&out))?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Transcribe {
            model,
            input,
            beam_width,
        } => {
            let m = model_at(&model)?;
            let w = read_wav(&input).map_err(err).map_err(with_path(&input))?;
            println!("{}", m.transcribe_text(&w, beam_width).map_err(err)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Attack {
            model,
            input,
            target,
            out,
            result_json,
            attack,
        } => {
            let m = model_at(&model)?;
            let w = read_wav(&input).map_err(err).map_err(with_path(&input))?;
            let cfg = attack_config(&m, &target, &attack)?;
            let r = targeted_attack(&m, &w, &cfg).map_err(err)?;
            finish_attack(&m, r, &target, &out, result_json.as_deref())
        }
        Command::Silence {
            model,
            input,
            out,
            result_json,
            attack,
        } => {
            let m = model_at(&model)?;
            let w = read_wav(&input).map_err(err).map_err(with_path(&input))?;
            let cfg = attack_config(&m, "", &attack)?;
            let r = silence_attack(&m, &w, &cfg).map_err(err)?;
            finish_attack(&m, r, "", &out, result_json.as_deref())
        }
        Command::PcaAttack {
            input,
            out,
            retain,
            retain_mode,
        } => {
            let policy = RetentionPolicy::new(retain_mode.into(), retain).map_err(err)?;
            let w = read_wav(&input).map_err(err).map_err(with_path(&input))?;
            let reduced = pca_attack(&w, policy).map_err(err)?;
            write_wav(&reduced, &out)
                .map_err(err)
                .map_err(with_path(&out))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            model,
            inputs_dir,
            out_report,
            retain,
            retain_mode,
            run,
        } => {
            let m = model_at(&model)?;
            let inputs = load_inputs(&inputs_dir).map_err(err)?;
            let rows = run_pca_sweep(&m, &inputs, &retain, retain_mode.into(), &run.options())
                .map_err(err)?;
            write_report(&rows, &out_report)
        }
        Command::Campaign {
            model,
            inputs_dir,
            target,
            out_report,
            adv_dir,
            scenario,
            attack,
            workers,
            timing,
        } => {
            let m = model_at(&model)?;
            let inputs = load_inputs(&inputs_dir).map_err(err)?;
            let cfg = attack_config(&m, &target, &attack)?;
            let opts = HarnessOptions {
                workers,
                beam_width: attack.beam_width,
                record_timing: timing,
            };
            let outcomes =
                run_attack_campaign(&m, &inputs, scenario.into(), &cfg, Some(&adv_dir), &opts)
                    .map_err(err)?;
            let rows: Vec<ReportRow> = outcomes.into_iter().map(|o| o.row).collect();
            write_report(&rows, &out_report)
        }
        Command::Defend {
            model,
            report,
            retain,
            retain_mode,
            adv_dir,
            inputs_dir,
            out_report,
            run,
        } => {
            let m = model_at(&model)?;
            let prior = load_report(&report)
                .map_err(err)
                .map_err(with_path(&report))?;
            let originals = load_inputs(&inputs_dir).map_err(err)?;
            let mut inputs = Vec::new();
            for row in prior.iter().filter(|r| r.success && !r.is_error()) {
                let path = adv_dir.join(adversarial_file_name(&row.input_id, row.scenario));
                let adversarial = read_wav(&path).map_err(err).map_err(with_path(&path))?;
                let transcript = originals
                    .iter()
                    .find(|u| u.id == row.input_id)
                    .map(|u| u.transcript.clone())
                    .ok_or_else(|| {
                        format!("no input {} in {}", row.input_id, inputs_dir.display())
                    })?;
                inputs.push(DefenseInput {
                    input_id: row.input_id.clone(),
                    adversarial,
                    transcript,
                });
            }
            if inputs.is_empty() {
                return Err(format!(
                    "{} has no successful attack rows",
                    report.display()
                ));
            }
            let rows = run_defense_eval(&m, &inputs, retain, retain_mode.into(), &run.options())
                .map_err(err)?;
            write_report(&rows, &out_report)
        }
        Command::Convert { input, out, rate } => {
            let w = read_wav(&input).map_err(err).map_err(with_path(&input))?;
            let r = resample_linear(&w, rate).map_err(err)?;
            write_wav(&r, &out).map_err(err).map_err(with_path(&out))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth {
            n,
            seed,
            out_dir,
            kind,
            chords,
        } => {
            if n == 0 {
                return Err("--n must be at least 1".into());
            }
            let utterances = match kind {
                SynthKind::Speech => synth_corpus(n, seed),
                SynthKind::Music => synth_carriers(n, chords.max(1), seed),
            };
            write_inputs(&out_dir, &utterances).map_err(err)?;
            println!("wrote {n} inputs to {}", out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum { input, out } => {
            let w = read_wav(&input).map_err(err).map_err(with_path(&input))?;
            let s = power_spectrum(&w);
            let mut text = String::from("bin_hz,power_db\n");
            for (hz, db) in s.bin_hz.iter().zip(&s.power_db) {
                text.push_str(&format!("{hz},{db}\n"));
            }
            fs::write(&out, text)
                .map_err(err)
                .map_err(with_path(&out))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { input } => {
            let rows = load_report(&input)
                .map_err(err)
                .map_err(with_path(&input))?;
            print_summary(&rows);
            Ok(if rows.iter().any(|r| r.is_error()) {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("advaudio: {e}");
            ExitCode::from(1)
        }
    }
}
