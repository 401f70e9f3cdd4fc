//! Acceptance criteria A1-A10. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fail.

use std::path::Path;
use std::time::{Duration, Instant};

use advaudio::attack::{embed_in_carrier, silence_attack, AttackConfig};
use advaudio::audio_io::{read_wav, Waveform};
use advaudio::ctc::{ctc_grad, ctc_loss, phrase_prob, Alphabet, LogitMatrix, Phrase};
use advaudio::decode::greedy_decode;
use advaudio::harness::{
    adversarial_file_name, emit_report, load_report, recovery_rate, rows_to_csv, run_defense_eval,
    run_pca_sweep, run_whitebox_campaign, synth_carriers, AttackOutcome, DefenseInput,
    HarnessOptions, ReportFormat, Scenario, DEFAULT_RETENTIONS,
};
use advaudio::linalg::Matrix;
use advaudio::metrics::{edit_distance, similarity, word_error_rate};
use advaudio::model::{synth_corpus, train, AcousticModel, TrainConfig, Utterance};
use advaudio::pca::{
    fit_pca, pca_attack, reconstruct, select_k, PcaBasis, RetentionMode, RetentionPolicy,
};
use advaudio::spectral::{
    extract_features, feature_gradient_from_samples, features_from_samples, fft, istft_samples,
    stft, FeatureMatrix, StftConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    check(start.elapsed() < limit, || {
        format!(
            "took {:.1}s, limit {}s",
            start.elapsed().as_secs_f64(),
            limit.as_secs()
        )
    })
}

fn random_probs(rng: &mut ChaCha8Rng, frames: usize, classes: usize) -> LogitMatrix {
    let scores: Vec<f64> = (0..frames * classes)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    LogitMatrix::from_scores(&scores, frames, classes).unwrap()
}

fn random_phrase(rng: &mut ChaCha8Rng, max_len: usize, labels: usize) -> Phrase {
    let n = rng.random_range(0..=max_len);
    Phrase((0..n).map(|_| rng.random_range(0..labels)).collect())
}

/// Sum over every length-`T` token sequence whose collapse equals `p`.
fn brute_force_prob(p: &Phrase, y: &LogitMatrix) -> f64 {
    let (t_max, c) = (y.frames(), y.classes());
    let blank = c - 1;
    let mut total = 0.0;
    let mut seq = vec![0usize; t_max];
    for code in 0..c.pow(t_max as u32) {
        let mut k = code;
        for s in seq.iter_mut() {
            *s = k % c;
            k /= c;
        }
        let mut collapsed = Vec::new();
        let mut prev = None;
        for &s in &seq {
            if Some(s) != prev && s != blank {
                collapsed.push(s);
            }
            prev = Some(s);
        }
        if collapsed == p.0 {
            total += seq
                .iter()
                .enumerate()
                .map(|(t, &s)| y.get(t, s))
                .product::<f64>();
        }
    }
    total
}

fn a1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let frames = rng.random_range(1..=6);
        let labels = rng.random_range(1..=3);
        let y = random_probs(&mut rng, frames, labels + 1);
        let p = random_phrase(&mut rng, frames, labels);
        let want = brute_force_prob(&p, &y);
        let got = phrase_prob(&p, &y).map_err(|e| e.to_string())?;
        let rel = if want == 0.0 {
            got.abs()
        } else {
            (got - want).abs() / want
        };
        worst = worst.max(rel);
    }
    check(worst <= 1e-12, || format!("worst relative error {worst:e}"))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!("500 instances, worst relative error {worst:.1e}"))
}

fn a2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..100 {
        let classes = rng.random_range(2..=5);
        let scores: Vec<f64> = (0..4 * classes)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let y = LogitMatrix::from_scores(&scores, 4, classes).unwrap();
        let p = random_phrase(&mut rng, 2, classes - 1);
        let g = ctc_grad(&y, &p).map_err(|e| e.to_string())?;
        // dL/dy checked through the softmax: dL/dz = y * (g - sum_c y g)
        for t in 0..4 {
            let row_dot: f64 = (0..classes).map(|c| y.get(t, c) * g[t * classes + c]).sum();
            check((row_dot + 1.0).abs() < 1e-10, || {
                format!("sum y*grad = {row_dot}")
            })?;
            for c in 0..classes {
                let i = t * classes + c;
                let analytic = y.get(t, c) * (g[i] - row_dot);
                if g[i].abs() <= 1e-8 || analytic.abs() <= 1e-8 {
                    continue;
                }
                let h = 1e-5;
                let mut up = scores.clone();
                up[i] += h;
                let mut down = scores.clone();
                down[i] -= h;
                let lp = ctc_loss(&LogitMatrix::from_scores(&up, 4, classes).unwrap(), &p).unwrap();
                let lm =
                    ctc_loss(&LogitMatrix::from_scores(&down, 4, classes).unwrap(), &p).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                worst = worst.max((fd - analytic).abs() / analytic.abs());
                checked += 1;
            }
        }
    }
    check(worst < 1e-5, || format!("worst relative error {worst:e}"))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "{checked} coordinates, worst relative error {worst:.1e}"
    ))
}

fn a3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut fft_worst = 0.0f64;
    for n in [1, 2, 4, 8, 16, 32, 64, 128, 256] {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = fft(&x, n).map_err(|e| e.to_string())?;
        let scale = x.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
        for (k, z) in got.iter().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            fft_worst = fft_worst.max(((z.re - re).powi(2) + (z.im - im).powi(2)).sqrt() / scale);
        }
    }
    check(fft_worst <= 1e-9, || format!("FFT error {fft_worst:e}"))?;

    let samples: Vec<f64> = (0..16000)
        .map(|_| rng.random_range(-8000.0..8000.0))
        .collect();
    let w = Waveform::from_f64(&samples, 16000).unwrap();
    let spec = stft(&w, StftConfig::PCA).map_err(|e| e.to_string())?;
    let back = istft_samples(&spec).map_err(|e| e.to_string())?;
    let (lo, hi) = (512, w.len() - 512);
    let orig = w.to_f64();
    let err: f64 = (lo..hi).map(|i| (back[i] - orig[i]).powi(2)).sum::<f64>();
    let energy: f64 = (lo..hi).map(|i| orig[i].powi(2)).sum::<f64>();
    let rms = (err / energy).sqrt();
    check(rms < 1e-3, || format!("ISTFT relative RMS {rms:e}"))?;

    let x: Vec<f64> = (0..1000)
        .map(|_| rng.random_range(-3000.0..3000.0))
        .collect();
    let f = features_from_samples(&x).map_err(|e| e.to_string())?;
    let (frames, dim) = f.shape();
    let up: Vec<f64> = (0..frames * dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let upstream = FeatureMatrix::new(up.clone(), frames, dim).unwrap();
    let g = feature_gradient_from_samples(&x, &upstream).map_err(|e| e.to_string())?;
    let objective = |x: &[f64]| -> f64 {
        let f = features_from_samples(x).unwrap();
        f.as_slice().iter().zip(&up).map(|(a, b)| a * b).sum()
    };
    let mut grad_worst = 0.0f64;
    for i in (0..x.len()).step_by(37) {
        let h = 1e-3;
        let mut p = x.clone();
        p[i] += h;
        let mut m = x.clone();
        m[i] -= h;
        let fd = (objective(&p) - objective(&m)) / (2.0 * h);
        if g[i].abs() > 1e-8 {
            grad_worst = grad_worst.max((fd - g[i]).abs() / g[i].abs());
        }
    }
    check(grad_worst < 1e-3, || {
        format!("feature gradient error {grad_worst:e}")
    })?;
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "FFT {fft_worst:.1e}, ISTFT RMS {rms:.1e}, feature gradient {grad_worst:.1e}"
    ))
}

fn a4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples: Vec<f64> = (0..8000)
        .map(|n| 6000.0 * (n as f64 * 0.07).sin() + rng.random_range(-2000.0..2000.0))
        .collect();
    let w = Waveform::from_f64(&samples, 16000).unwrap();
    let out = pca_attack(&w, RetentionPolicy::variance(1.0).unwrap()).map_err(|e| e.to_string())?;
    let max_diff = w
        .samples()
        .iter()
        .zip(out.samples())
        .map(|(&a, &b)| (a as i32 - b as i32).abs())
        .max()
        .unwrap_or(0);
    check(out.len() == w.len() && max_diff <= 2, || {
        format!("full retention moved a sample by {max_diff}")
    })?;

    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            (0..12)
                .map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64)
                .collect()
        })
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let basis = fit_pca(&x).map_err(|e| e.to_string())?;
    let mut identity_worst = 0.0f64;
    for k in 1..=12 {
        let r = reconstruct(&x, &basis, k).map_err(|e| e.to_string())?;
        let err: f64 = r
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let tail: f64 = 40.0 * basis.eigenvalues()[k..].iter().sum::<f64>();
        let rel = (err - tail).abs() / tail.max(err).max(1e-300);
        if tail > 1e-9 {
            identity_worst = identity_worst.max(rel);
        }
    }
    check(identity_worst < 1e-6, || {
        format!("eigenvalue-tail identity off by {identity_worst:e}")
    })?;

    let four = PcaBasis::from_parts(
        vec![0.0; 4],
        Matrix::identity(4),
        vec![4.0, 3.0, 2.0, 1.0],
        10,
    )
    .map_err(|e| e.to_string())?;
    let k4 = select_k(&four, RetentionPolicy::variance(0.7).unwrap());
    let flat = PcaBasis::from_parts(vec![0.0; 45], Matrix::identity(45), vec![1.0; 45], 100)
        .map_err(|e| e.to_string())?;
    let k45 = select_k(&flat, RetentionPolicy::components(0.78).unwrap());
    check(k4 == 2 && k45 == 35, || {
        format!("select_k gave {k4} and {k45}")
    })?;
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "full retention max diff {max_diff}, tail identity {identity_worst:.1e}, k = {k4} and {k45}"
    ))
}

struct Trained {
    model: AcousticModel,
    held_out: Vec<Utterance>,
    campaign: Vec<AttackOutcome>,
}

fn evil() -> Phrase {
    Alphabet::english().encode("evil").unwrap()
}

fn a5(adv_dir: &Path) -> (Outcome, Option<Trained>) {
    let start = Instant::now();
    let corpus = synth_corpus(200, 11);
    let held_out = synth_corpus(50, 12);
    let model = match train(&corpus, &TrainConfig::default()) {
        Ok((m, _)) => m,
        Err(e) => return (Err(e.to_string()), None),
    };
    let train_time = start.elapsed();
    let mut wer = 0.0;
    for u in &held_out {
        let y = model
            .forward(&extract_features(&u.waveform).unwrap())
            .unwrap();
        wer +=
            word_error_rate(&u.transcript, &model.alphabet().decode(&greedy_decode(&y))).unwrap();
    }
    wer /= held_out.len() as f64;

    let inputs = &held_out[..10];
    let cfg = AttackConfig::new(evil());
    let campaign = match run_whitebox_campaign(
        &model,
        inputs,
        &cfg,
        Some(adv_dir),
        &HarnessOptions::default(),
    ) {
        Ok(c) => c,
        Err(e) => return (Err(e.to_string()), None),
    };
    let outcome = (|| {
        check(wer <= 0.10, || format!("held-out WER {wer:.3}"))?;
        check(train_time < Duration::from_secs(600), || {
            format!("training took {train_time:?}")
        })?;
        let successes: Vec<&AttackOutcome> = campaign.iter().filter(|o| o.row.success).collect();
        check(successes.len() >= 9, || {
            format!("{} of 10 attacks succeeded", successes.len())
        })?;
        for o in &successes {
            let path = adv_dir.join(adversarial_file_name(&o.row.input_id, Scenario::Whitebox));
            let w = read_wav(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let text = model.transcribe_text(&w, 32).map_err(|e| e.to_string())?;
            check(text == "evil", || {
                format!("{} re-decodes as {text:?}", path.display())
            })?;
            let input = inputs.iter().find(|u| u.id == o.row.input_id).unwrap();
            if input.waveform.peak() as f64 >= 0.1 * 32768.0 {
                check(o.row.distortion_db < 0.0, || {
                    format!("{} distortion {} dB", o.row.input_id, o.row.distortion_db)
                })?;
            }
        }
        within(start, Duration::from_secs(1800))?;
        let d: Vec<f64> = successes.iter().map(|o| o.row.distortion_db).collect();
        Ok(format!(
            "WER {:.1}% (trained in {:.1}s), {}/10 attacks on \"evil\", distortion {:.1}..{:.1} dB",
            wer * 100.0,
            train_time.as_secs_f64(),
            successes.len(),
            d.iter().cloned().fold(f64::INFINITY, f64::min),
            d.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ))
    })();
    (
        outcome,
        Some(Trained {
            model,
            held_out,
            campaign,
        }),
    )
}

fn a6(t: &Trained, out_dir: &Path) -> Outcome {
    let start = Instant::now();
    let inputs = &t.held_out[10..22];
    let rows = run_pca_sweep(
        &t.model,
        inputs,
        &DEFAULT_RETENTIONS,
        RetentionMode::VarianceFraction,
        &HarnessOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let mean_at = |p: f64, f: &dyn Fn(&advaudio::harness::ReportRow) -> f64| {
        let sel: Vec<f64> = rows
            .iter()
            .filter(|r| r.retention_p == Some(p))
            .map(f)
            .collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    };
    let sim = |r: &advaudio::harness::ReportRow| r.similarity;
    let ed = |r: &advaudio::harness::ReportRow| r.edit_distance as f64;
    let (s10, s95) = (mean_at(0.10, &sim), mean_at(0.95, &sim));
    let (e10, e95) = (mean_at(0.10, &ed), mean_at(0.95, &ed));
    check(rows.iter().all(|r| !r.is_error()), || {
        "sweep rows failed".into()
    })?;
    check(s95 > s10, || {
        format!("similarity {s10:.3} at 10% vs {s95:.3} at 95%")
    })?;
    check(e10 > e95, || {
        format!("edit distance {e10:.2} at 10% vs {e95:.2} at 95%")
    })?;
    let files = emit_report(&rows, ReportFormat::Csv, &out_dir.join("sweep.csv"))
        .map_err(|e| e.to_string())?;
    for curve in [files.similarity_curve, files.edit_distance_curve] {
        let path = curve.ok_or("missing curve")?;
        let lines = std::fs::read_to_string(&path)
            .map_err(|e| e.to_string())?
            .lines()
            .count();
        check(lines == 6, || {
            format!("{} has {lines} lines", path.display())
        })?;
    }
    within(start, Duration::from_secs(600))?;
    let curve: Vec<String> = DEFAULT_RETENTIONS
        .iter()
        .map(|&p| format!("{:.0}%:{:.2}", p * 100.0, mean_at(p, &sim)))
        .collect();
    Ok(format!(
        "{} inputs, similarity {}, edit distance {e10:.2} -> {e95:.2}",
        inputs.len(),
        curve.join(" ")
    ))
}

fn a7(t: &Trained) -> Outcome {
    let start = Instant::now();
    let cfg = AttackConfig::new(evil());
    let mut silenced = 0;
    for u in &t.held_out[22..27] {
        let r = silence_attack(&t.model, &u.waveform, &cfg).map_err(|e| e.to_string())?;
        if r.success
            && t.model
                .transcribe(&r.adversarial, 32)
                .map_err(|e| e.to_string())?
                .is_empty()
        {
            silenced += 1;
        }
    }
    let mut embedded = 0;
    for c in synth_carriers(5, 4, 100) {
        let r = embed_in_carrier(&t.model, &c.waveform, &cfg).map_err(|e| e.to_string())?;
        check(r.adversarial.len() == c.waveform.len(), || {
            "carrier length changed".into()
        })?;
        if r.success
            && t.model
                .transcribe_text(&r.adversarial, 32)
                .map_err(|e| e.to_string())?
                == "evil"
        {
            embedded += 1;
        }
    }
    check(silenced >= 4, || format!("silenced {silenced}/5"))?;
    check(embedded >= 4, || format!("embedded {embedded}/5"))?;
    within(start, Duration::from_secs(1200))?;
    Ok(format!(
        "silenced {silenced}/5, embedded \"evil\" in {embedded}/5 chord carriers"
    ))
}

fn a8(t: &Trained) -> Outcome {
    let start = Instant::now();
    let inputs: Vec<DefenseInput> = t
        .campaign
        .iter()
        .filter(|o| o.row.success)
        .map(|o| DefenseInput {
            input_id: o.row.input_id.clone(),
            adversarial: o.adversarial.clone().unwrap(),
            transcript: t
                .held_out
                .iter()
                .find(|u| u.id == o.row.input_id)
                .unwrap()
                .transcript
                .clone(),
        })
        .collect();
    let rows = run_defense_eval(
        &t.model,
        &inputs,
        0.95,
        RetentionMode::VarianceFraction,
        &HarnessOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let rate = recovery_rate(&rows).ok_or("no defense rows")?;
    check(rate <= 0.20, || format!("recovery rate {rate:.2}"))?;
    within(start, Duration::from_secs(600))?;
    Ok(format!(
        "recovery_rate {rate:.2} over {} adversarial inputs",
        rows.len()
    ))
}

fn naive_edit(a: &[char], b: &[char]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = naive_edit(ra, rb) + usize::from(x != y);
            sub.min(naive_edit(ra, b) + 1).min(naive_edit(a, rb) + 1)
        }
    }
}

fn random_string(rng: &mut ChaCha8Rng, max: usize, alphabet: &[char]) -> String {
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect()
}

fn a9() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let small = ['a', 'b', 'c'];
    for _ in 0..2000 {
        let a = random_string(&mut rng, 5, &small);
        let b = random_string(&mut rng, 5, &small);
        let (ac, bc): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        let want = naive_edit(&ac, &bc);
        check(edit_distance(&a, &b) == want, || {
            format!("edit_distance({a:?}, {b:?})")
        })?;
    }
    check(similarity("evil", "evil") == 1.0, || {
        "identical strings".into()
    })?;
    check(similarity("abc", "xyz") == 0.0, || {
        "disjoint strings".into()
    })?;
    check(
        similarity("", "") == 1.0 && similarity("", "abc") == 0.0,
        || "empty strings".into(),
    )?;
    let letters: Vec<char> = "abcde ".chars().collect();
    for _ in 0..1000 {
        let a = random_string(&mut rng, 12, &letters);
        let b = random_string(&mut rng, 12, &letters);
        let c = random_string(&mut rng, 12, &letters);
        let (ab, ba) = (edit_distance(&a, &b), edit_distance(&b, &a));
        check(edit_distance(&a, &a) == 0, || "identity".into())?;
        check(ab == ba, || format!("symmetry on {a:?}, {b:?}"))?;
        check((ab == 0) == (a == b), || "zero iff equal".into())?;
        check(edit_distance(&a, &c) <= ab + edit_distance(&b, &c), || {
            "triangle inequality".into()
        })?;
        let s = similarity(&a, &b);
        check((0.0..=1.0).contains(&s) && s == similarity(&b, &a), || {
            format!("similarity({a:?}, {b:?}) = {s}")
        })?;
    }
    within(start, Duration::from_secs(30))?;
    Ok("2000 exhaustive edit-distance checks, 1000 axiom checks".into())
}

fn a10(t: &Trained, dir: &Path) -> Outcome {
    let start = Instant::now();
    let inputs = &t.held_out[27..30];
    let mut cfg = AttackConfig::new(evil());
    cfg.max_iterations = 300;
    cfg.seed = 5;
    let run = |workers: usize, tag: &str| -> Result<Vec<u8>, String> {
        let opts = HarnessOptions {
            workers,
            ..HarnessOptions::default()
        };
        let mut rows = run_pca_sweep(
            &t.model,
            inputs,
            &DEFAULT_RETENTIONS,
            RetentionMode::VarianceFraction,
            &opts,
        )
        .map_err(|e| e.to_string())?;
        let campaign = run_whitebox_campaign(&t.model, inputs, &cfg, Some(&dir.join(tag)), &opts)
            .map_err(|e| e.to_string())?;
        rows.extend(campaign.into_iter().map(|o| o.row));
        let path = dir.join(format!("{tag}.csv"));
        emit_report(&rows, ReportFormat::Csv, &path).map_err(|e| e.to_string())?;
        let back = load_report(&path).map_err(|e| e.to_string())?;
        check(
            rows_to_csv(&back).unwrap() == rows_to_csv(&rows).unwrap(),
            || "report does not parse back".into(),
        )?;
        std::fs::read(&path).map_err(|e| e.to_string())
    };
    let first = run(1, "run1")?;
    let second = run(1, "run2")?;
    let parallel = run(2, "run3")?;
    check(first == second, || "two identical runs differ".into())?;
    check(first == parallel, || {
        "worker count changed the report".into()
    })?;
    Ok(format!(
        "{} identical bytes across 3 runs ({:.1}s)",
        first.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn report(name: &str, outcome: &Outcome, failures: &mut usize) {
    match outcome {
        Ok(detail) => println!("{name} PASS  {detail}"),
        Err(reason) => {
            *failures += 1;
            println!("{name} FAIL  {reason}");
        }
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut failures = 0;
    report("A1", &a1(), &mut failures);
    report("A2", &a2(), &mut failures);
    report("A3", &a3(), &mut failures);
    report("A4", &a4(), &mut failures);
    let (outcome, trained) = a5(dir.path());
    report("A5", &outcome, &mut failures);
    match trained {
        Some(t) => {
            report("A6", &a6(&t, dir.path()), &mut failures);
            report("A7", &a7(&t), &mut failures);
            report("A8", &a8(&t), &mut failures);
            report("A9", &a9(), &mut failures);
            report("A10", &a10(&t, dir.path()), &mut failures);
        }
        None => {
            for name in ["A6", "A7", "A8", "A10"] {
                report(name, &Err("no trained model".into()), &mut failures);
            }
            report("A9", &a9(), &mut failures);
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
