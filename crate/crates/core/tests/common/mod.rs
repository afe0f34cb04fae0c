//! Reference implementations, planted-data generators and the acceptance
//! checks shared by the integration test targets.
//!
//! Nothing here calls the library routine it is meant to check.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use aligncheck_core::alignment::{validate_alignment, PhoneInstance, RecordingAlignment};
use aligncheck_core::analysis::{
    corpus_coincidence, count_pairs, file_scores, regression_harness, ChanceModel, FileScoreRow, RecordingRegions,
    ScoreFamily, Transform, PAIRING_WINDOW_S,
};
use aligncheck_core::detect::{
    calibrate_threshold, detect_all, detect_amplitude, detect_duration_mismatch, detect_improbable, detect_unexpected,
    detect_word_duration, score_track, DetectorConfig, Feature, SuspicionRegion,
};
use aligncheck_core::io::{parse_textgrid, write_report_json, write_textgrid, write_textgrid_regions, AudioTrack};
use aligncheck_core::model::{
    train_duration_predictor, train_logp_predictor, ClassStats, CorpusModel, ModelConfig, PhoneClassStats,
    ResolvedStats, DURATION_TERMS, LOGP_TERMS,
};
use aligncheck_core::stats::{median, ols_fit, percentile, poisson_upper_tail, q_sigmoid, Matrix};
use aligncheck_core::synth::{
    dip_logp, evaluate_detectors, generate_corpus, inject_errors, targets, ErrorKind, ErrorRates, ErrorSpan, SynthRecording,
    SynthSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub type Check = Result<String, String>;

// ---------------------------------------------------------------- oracles

/// Solves `A x = b` by Gauss-Jordan elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

pub fn gram(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = x[0].len();
    (0..k).map(|i| (0..k).map(|j| x.iter().map(|r| r[i] * r[j]).sum()).collect()).collect()
}

pub fn inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> =
        (0..n).map(|j| solve(a.to_vec(), (0..n).map(|i| f64::from(u8::from(i == j))).collect())).collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

/// Least squares through the normal equations, with standard errors.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = x[0].len();
    let xty: Vec<f64> = (0..k).map(|j| x.iter().zip(y).map(|(r, v)| r[j] * v).sum()).collect();
    let xtx = gram(x);
    let beta = solve(xtx.clone(), xty);
    let rss: f64 = x.iter().zip(y).map(|(r, v)| (v - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2)).sum();
    let sigma2 = rss / (x.len() - k) as f64;
    let inv = inverse(&xtx);
    let se = (0..k).map(|j| (sigma2 * inv[j][j]).sqrt()).collect();
    (beta, se)
}

/// The k-th smallest value (0-based), by counting rather than sorting.
pub fn order_statistic(values: &[f64], k: usize) -> f64 {
    *values
        .iter()
        .find(|&&v| {
            let below = values.iter().filter(|&&w| w < v).count();
            let at_or_below = values.iter().filter(|&&w| w <= v).count();
            below <= k && k < at_or_below
        })
        .unwrap()
}

pub fn brute_percentile(values: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (values.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let (a, b) = (order_statistic(values, lo), order_statistic(values, hi));
    if lo == hi {
        a
    } else {
        a + (pos - lo as f64) * (b - a)
    }
}

/// Mean of the two central order statistics (they coincide for odd lengths).
pub fn brute_median(values: &[f64]) -> f64 {
    let n = values.len();
    0.5 * (order_statistic(values, (n - 1) / 2) + order_statistic(values, n / 2))
}

/// `P(X >= k)` by summing Poisson terms upward from `k`.
pub fn poisson_tail_series(k: u64, mean: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    let mut term = (-mean + k as f64 * mean.ln() - ln_fact).exp();
    let mut total = 0.0;
    let mut i = k;
    while term > 1e-300 && (term > total * 1e-18 || (i as f64) < mean) {
        total += term;
        i += 1;
        term *= mean / i as f64;
    }
    total
}

/// `2 sqrt(min/max) - 2`, negated when `a > b`.
pub fn q_reference(a: f64, b: f64) -> f64 {
    if a <= b {
        2.0 * (a / b).sqrt() - 2.0
    } else {
        2.0 - 2.0 * (b / a).sqrt()
    }
}

pub fn brute_pairs(a: &[(f64, f64)], b: &[(f64, f64)], w: f64) -> u64 {
    let mut n = 0;
    for x in a {
        for y in b {
            if y.0 - x.1 <= w && x.0 - y.1 <= w {
                n += 1;
            }
        }
    }
    n
}

// ------------------------------------------------------ planted generators

/// Phone classes of the planted corpora: `(label, typical duration, rate)`.
const CLASSES: [(&str, f64, f64); 6] = [
    ("a", 0.06, -62.0),
    ("b", 0.07, -70.0),
    ("c", 0.08, -75.0),
    ("d", 0.09, -81.0),
    ("e", 0.10, -66.0),
    ("f", 0.11, -88.0),
];
const SIL: (&str, f64, f64) = ("sil", 0.3, -50.0);

pub fn planted_stats() -> PhoneClassStats {
    let mut classes = BTreeMap::new();
    for (label, d, rate) in CLASSES.iter().chain([&SIL]) {
        classes.insert(
            label.to_string(),
            ClassStats { lambda: Some(*rate), duration: Some(*d), log_duration: Some(d.ln()), log_duration_mad: Some(0.2) },
        );
    }
    PhoneClassStats::new(
        classes,
        ResolvedStats { lambda: -70.0, duration: 0.08, log_duration: 0.08f64.ln(), log_duration_mad: 0.2 },
    )
}

fn class_of(label: &str) -> (f64, f64) {
    CLASSES.iter().chain([&SIL]).find(|c| c.0 == label).map(|c| (c.1, c.2)).unwrap()
}

/// Random phone labels: words of 3-5 speech phones, sometimes followed by
/// a pause. `None` marks a pause.
fn planted_layout(n: usize, rng: &mut ChaCha8Rng) -> Vec<(&'static str, Option<usize>)> {
    let mut out = Vec::with_capacity(n + n / 3);
    let mut word = 0;
    while out.len() < n {
        for _ in 0..rng.random_range(3..=5) {
            out.push((CLASSES[rng.random_range(0..CLASSES.len())].0, Some(word)));
        }
        word += 1;
        if rng.random_bool(0.35) {
            out.push((SIL.0, None));
        }
    }
    out
}

fn build(rec_id: &str, layout: &[(&str, Option<usize>)], durations: &[f64], logps: &[f64]) -> RecordingAlignment {
    let mut t = 0.0;
    let phones = layout
        .iter()
        .zip(durations.iter().zip(logps))
        .map(|(&(label, word), (&d, &l))| {
            let p = match word {
                Some(w) => PhoneInstance::new(label, t, t + d, l, Some(w)),
                None => PhoneInstance::silence(t, t + d, l),
            };
            t += d;
            p
        })
        .collect();
    validate_alignment(rec_id, phones, None).unwrap()
}

/// Log-probability features computed from first principles.
fn logp_row(layout: &[(&str, Option<usize>)], durations: &[f64], i: usize) -> [f64; LOGP_TERMS] {
    let (d_me, l_me) = class_of(layout[i].0);
    let mut f = [0.0; LOGP_TERMS];
    f[0] = (durations[i] / d_me).ln();
    if i > 0 {
        let (d, l) = class_of(layout[i - 1].0);
        f[1] = (d_me / d).ln();
        f[2] = l_me - l;
    }
    if i + 1 < layout.len() {
        let (d, l) = class_of(layout[i + 1].0);
        f[3] = (d_me / d).ln();
        f[4] = l_me - l;
    }
    f
}

fn duration_row(layout: &[(&str, Option<usize>)], durations: &[f64], i: usize) -> [f64; DURATION_TERMS] {
    let (typ_i, _) = class_of(layout[i].0);
    let mut f = [0.0; DURATION_TERMS];
    f[0] = 1.0;
    let offsets = (-6isize..=-1).chain(1..=6);
    for (slot, k) in offsets.enumerate() {
        let j = i as isize + k;
        if j < 0 || j as usize >= layout.len() {
            continue;
        }
        let j = j as usize;
        let (typ_j, _) = class_of(layout[j].0);
        f[1 + slot] = q_reference(typ_i * durations[j], typ_j * durations[i]);
        f[13 + slot] = q_reference(typ_i, typ_j);
    }
    f
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub const PLANTED_LOGP: [f64; LOGP_TERMS] = [-4.0, 1.5, 0.3, -2.0, 0.25];

/// Recordings whose speech phones satisfy `L/δ = λ(p) + w·f + ε` exactly,
/// with durations drawn inside the training band.
pub fn planted_logp_corpus(w: &[f64; LOGP_TERMS], noise_sd: f64, n_phones: usize, seed: u64) -> Vec<RecordingAlignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd.max(1e-300)).unwrap();
    (0..4)
        .map(|r| {
            let layout = planted_layout(n_phones / 4, &mut rng);
            let durations: Vec<f64> = layout
                .iter()
                .map(|(_, w)| if w.is_some() { rng.random_range(0.045..0.175) } else { rng.random_range(0.1..0.8) })
                .collect();
            let logps: Vec<f64> = (0..layout.len())
                .map(|i| {
                    let (_, lambda) = class_of(layout[i].0);
                    let eps = if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    durations[i] * (lambda + dot(w, &logp_row(&layout, &durations, i)) + eps)
                })
                .collect();
            build(&format!("p{r}"), &layout, &durations, &logps)
        })
        .collect()
}

pub fn planted_duration_weights() -> [f64; DURATION_TERMS] {
    let mut w = [0.0; DURATION_TERMS];
    w[0] = 0.05;
    for k in 0..12 {
        w[1 + k] = 0.02 + 0.004 * k as f64;
        w[13 + k] = if k % 2 == 0 { 0.03 } else { -0.02 };
    }
    w
}

/// Recordings whose speech durations solve `ln δ = Δ(p) + w·f(δ) + ε`,
/// found by Gauss-Seidel iteration (the local weights are small enough for
/// it to contract).
pub fn planted_duration_corpus(
    w: &[f64; DURATION_TERMS],
    noise_sd: f64,
    n_phones: usize,
    seed: u64,
) -> Vec<RecordingAlignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd.max(1e-300)).unwrap();
    (0..4)
        .map(|r| {
            let layout = planted_layout(n_phones / 4, &mut rng);
            let eps: Vec<f64> =
                layout.iter().map(|_| if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 }).collect();
            let mut durations: Vec<f64> = layout
                .iter()
                .map(|&(label, w)| if w.is_some() { class_of(label).0 } else { rng.random_range(0.1..0.8) })
                .collect();
            for _ in 0..500 {
                let mut moved = 0.0f64;
                for i in 0..layout.len() {
                    if layout[i].1.is_none() {
                        continue;
                    }
                    let target = (class_of(layout[i].0).0.ln() + dot(w, &duration_row(&layout, &durations, i)) + eps[i]).exp();
                    moved = moved.max((target - durations[i]).abs());
                    durations[i] = target;
                }
                if moved < 1e-16 {
                    break;
                }
            }
            let logps: Vec<f64> = layout.iter().zip(&durations).map(|(&(l, _), d)| class_of(l).1 * d).collect();
            build(&format!("d{r}"), &layout, &durations, &logps)
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ------------------------------------------------------- criterion checks

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn check_constants() -> Check {
    let d = DetectorConfig::default();
    let m = ModelConfig::default();
    ensure(d.smoothing_window_s == 1.0, || format!("smoothing window {}", d.smoothing_window_s))?;
    ensure(m.training_band_s == [0.04, 0.18], || format!("training band {:?}", m.training_band_s))?;
    ensure(m.max_scorable_s == 1.0 && !m.is_scorable(0.0) && !m.is_scorable(1.0) && m.is_scorable(0.999), || {
        "exclusion band".into()
    })?;
    ensure(d.quiet_pct == 3.0 && d.loud_pct == 97.0, || "percentiles".into())?;
    ensure(d.min_extreme_run_s == 0.25, || "extreme run".into())?;
    ensure(d.word_mean_min_s == 1.0 / 32.0 && d.word_mean_max_s == 1.0 / 8.0, || "word band".into())?;
    ensure(d.min_word_phones == 4, || "min word phones".into())?;
    ensure(PAIRING_WINDOW_S == 5.0, || "pairing window".into())?;
    let rows = rated_rows(20, 3, |_, _| 0.0);
    let out = regression_harness(&rows).map_err(|e| e.to_string())?;
    ensure(out.fits.len() == 12, || format!("{} regressions", out.fits.len()))?;
    Ok("default constants and 12 regressions".into())
}

pub fn check_stats_oracles() -> Check {
    let (result, took) = timed(|| -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(2);

        for _ in 0..10_000 {
            let a = if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.0..10.0) };
            let b = if a == 0.0 { rng.random_range(0.001..10.0) } else { rng.random_range(0.0..10.0) };
            let (qab, qba) = (q_sigmoid(a, b).unwrap(), q_sigmoid(b, a).unwrap());
            ensure((qab + qba).abs() <= 1e-12, || format!("q antisymmetry at ({a}, {b})"))?;
            ensure((-2.0..=2.0).contains(&qab), || format!("q range at ({a}, {b})"))?;
            ensure((qab - q_reference(a, b)).abs() <= 1e-12, || format!("q value at ({a}, {b})"))?;
            ensure(q_sigmoid(a.max(1e-3), a.max(1e-3)).unwrap() == 0.0, || "q(x, x)".into())?;
            ensure(q_sigmoid(0.0, b.max(1e-3)).unwrap() == -2.0 && q_sigmoid(b.max(1e-3), 0.0).unwrap() == 2.0, || {
                "q endpoints".into()
            })?;
        }

        for trial in 0..100 {
            let k = rng.random_range(1..=5);
            let n = rng.random_range(k + 3..=30);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let fit = ols_fit(&Matrix::from_rows(&rows, k), &y, true, None).map_err(|e| e.to_string())?;
            let with_one: Vec<Vec<f64>> = rows.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
            let (beta, se) = normal_equations(&with_one, &y);
            let diff = max_abs_diff(&fit.coefficients, &beta);
            ensure(diff <= 1e-9, || format!("ols trial {trial}: coefficients differ by {diff:e}"))?;
            let diff = max_abs_diff(&fit.std_errors, &se);
            ensure(diff <= 1e-9, || format!("ols trial {trial}: standard errors differ by {diff:e}"))?;
        }

        for _ in 0..200 {
            let n = rng.random_range(1..60);
            // coarse grid so ties are common
            let v: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-20..20)) * 0.25).collect();
            let p = if rng.random_bool(0.2) { [0.0, 3.0, 50.0, 97.0, 100.0][rng.random_range(0..5)] } else { rng.random_range(0.0..=100.0) };
            let got = percentile(&v, p).unwrap();
            ensure(got == brute_percentile(&v, p), || format!("percentile {p} of {v:?}"))?;
            ensure(median(&v).unwrap() == brute_median(&v), || format!("median of {v:?}"))?;
        }

        for k in 0..80u64 {
            for &mean in &[0.01, 0.3, 1.0, 2.5, 7.0, 15.0, 40.0] {
                let (got, want) = (poisson_upper_tail(k, mean), poisson_tail_series(k, mean));
                ensure((got - want).abs() <= 1e-10, || format!("poisson tail k={k} mean={mean}: {got} vs {want}"))?;
            }
        }
        Ok(())
    });
    result?;
    ensure(took < Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!("q, ols, percentile, poisson oracles agree ({took:.2?})"))
}

pub fn check_predictor_recovery() -> Check {
    let (result, took) = timed(|| -> Check {
        let stats = planted_stats();
        let cfg = ModelConfig::default();

        let corpus = planted_logp_corpus(&PLANTED_LOGP, 0.0, 2000, 11);
        let w = train_logp_predictor(&corpus, &stats, None, &cfg).map_err(|e| e.to_string())?;
        let err5 = max_abs_diff(&w, &PLANTED_LOGP);
        ensure(err5 <= 1e-6, || format!("noise-free 5-weight error {err5:e}"))?;

        let model = CorpusModel {
            stats: stats.clone(),
            logp_weights: w,
            duration_weights: [0.0; DURATION_TERMS],
            config: cfg.clone(),
            excluded_rec: None,
        };
        for rec in &corpus {
            for (i, p) in rec.phones().iter().enumerate().filter(|(_, p)| !p.is_silence()) {
                let got = model.predict_logp_rate(rec, i).unwrap();
                ensure((got - p.log_prob / p.duration()).abs() <= 1e-6, || format!("prediction at {} {i}", rec.rec_id))?;
            }
        }

        let planted = planted_duration_weights();
        let corpus = planted_duration_corpus(&planted, 0.0, 3000, 12);
        let w = train_duration_predictor(&corpus, &stats, None, &cfg).map_err(|e| e.to_string())?;
        let err25 = max_abs_diff(&w, &planted);
        ensure(err25 <= 1e-6, || format!("noise-free 25-weight error {err25:e}"))?;
        let model = CorpusModel { duration_weights: w, ..model };
        for rec in &corpus {
            for (i, p) in rec.phones().iter().enumerate().filter(|(_, p)| !p.is_silence()) {
                let got = model.predict_log_duration(rec, i).unwrap();
                ensure((got - p.duration().ln()).abs() <= 1e-6, || format!("duration prediction at {} {i}", rec.rec_id))?;
            }
        }

        let mut good = 0;
        for trial in 0..100 {
            let corpus = planted_logp_corpus(&PLANTED_LOGP, 1.0, 1200, 1000 + trial);
            let w = train_logp_predictor(&corpus, &stats, None, &cfg).map_err(|e| e.to_string())?;
            let mut rows = Vec::new();
            let mut y = Vec::new();
            for rec in &corpus {
                let layout: Vec<(&str, Option<usize>)> =
                    rec.phones().iter().map(|p| (class_label(&p.label), p.word_index)).collect();
                let durations: Vec<f64> = rec.phones().iter().map(|p| p.duration()).collect();
                for (i, p) in rec.phones().iter().enumerate() {
                    if !p.is_silence() && (0.04..=0.18).contains(&p.duration()) {
                        rows.push(logp_row(&layout, &durations, i).to_vec());
                        y.push(p.log_prob / p.duration() - class_of(&p.label).1);
                    }
                }
            }
            let (beta, se) = normal_equations(&rows, &y);
            if max_abs_diff(&beta, &w) > 1e-8 {
                return Err(format!("trial {trial}: fit disagrees with the normal equations"));
            }
            if (0..LOGP_TERMS).all(|j| (w[j] - PLANTED_LOGP[j]).abs() <= 3.0 * se[j]) {
                good += 1;
            }
        }

        // Same trial for the 25 duration weights. The fit must agree with the
        // normal equations on every noisy corpus; coverage is then a property
        // of least squares on this model, not of the implementation.
        let mut good25 = 0;
        for trial in 0..100 {
            let corpus = planted_duration_corpus(&planted, 1.0, 3000, 2000 + trial);
            let w = train_duration_predictor(&corpus, &stats, None, &cfg).map_err(|e| e.to_string())?;
            let mut rows = Vec::new();
            let mut y = Vec::new();
            for rec in &corpus {
                let layout: Vec<(&str, Option<usize>)> =
                    rec.phones().iter().map(|p| (class_label(&p.label), p.word_index)).collect();
                let durations: Vec<f64> = rec.phones().iter().map(|p| p.duration()).collect();
                for (i, p) in rec.phones().iter().enumerate() {
                    if !p.is_silence() && (0.04..=0.18).contains(&p.duration()) {
                        rows.push(duration_row(&layout, &durations, i).to_vec());
                        y.push(p.duration().ln() - class_of(&p.label).0.ln());
                    }
                }
            }
            let (beta, se) = normal_equations(&rows, &y);
            if max_abs_diff(&beta, &w) > 1e-8 {
                return Err(format!("25-weight trial {trial}: fit disagrees with the normal equations"));
            }
            if (0..DURATION_TERMS).all(|j| (w[j] - planted[j]).abs() <= 3.0 * se[j]) {
                good25 += 1;
            }
        }
        let detail = format!(
            "noise-free errors {err5:.1e} / {err25:.1e}; noisy trials within 3 SE: {good}/100 (5 weights), {good25}/100 (25 weights)"
        );
        ensure(good >= 95 && good25 >= 95, || detail.clone())?;
        Ok(detail)
    });
    let detail = result?;
    ensure(took < Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("{detail} ({took:.2?})"))
}

fn class_label(label: &str) -> &'static str {
    CLASSES.iter().chain([&SIL]).find(|c| c.0 == label).unwrap().0
}

/// Largest weight error of the 25-term fit on a lightly noisy planted corpus.
pub fn duration_recovery_with_noise(noise_sd: f64, seed: u64) -> f64 {
    let planted = planted_duration_weights();
    let corpus = planted_duration_corpus(&planted, noise_sd, 3000, seed);
    let w = train_duration_predictor(&corpus, &planted_stats(), None, &ModelConfig::default()).unwrap();
    max_abs_diff(&w, &planted)
}

pub fn small_synth_spec(n: usize, seconds: f64) -> SynthSpec {
    SynthSpec { n_recordings: n, duration_s: seconds, ..Default::default() }
}

fn alignments(corpus: &[SynthRecording]) -> Vec<RecordingAlignment> {
    corpus.iter().map(|r| r.alignment.clone()).collect()
}

pub fn check_leave_one_out() -> Check {
    let spec = small_synth_spec(5, 240.0);
    let (dirty, _) = inject_errors(&generate_corpus(&spec), &spec);
    let corpus = alignments(&dirty);
    let cfg = ModelConfig::default();
    for rec in &corpus {
        let excluded = CorpusModel::train(&corpus, Some(&rec.rec_id), &cfg).map_err(|e| e.to_string())?;
        let rest: Vec<RecordingAlignment> = corpus.iter().filter(|r| r.rec_id != rec.rec_id).cloned().collect();
        let reduced = CorpusModel::train(&rest, None, &cfg).map_err(|e| e.to_string())?;
        ensure(excluded.stats == reduced.stats, || format!("{}: phone statistics differ", rec.rec_id))?;
        ensure(excluded.logp_weights == reduced.logp_weights, || format!("{}: logp weights differ", rec.rec_id))?;
        ensure(excluded.duration_weights == reduced.duration_weights, || format!("{}: duration weights differ", rec.rec_id))?;
        ensure(excluded.config == reduced.config, || "config differs".into())?;
        ensure(excluded.excluded_rec.as_deref() == Some(rec.rec_id.as_str()), || "exclusion not recorded".into())?;
    }
    Ok(format!("{} recordings, exact equality", corpus.len()))
}

/// Models trained without each recording in turn.
pub fn leave_one_out_models(corpus: &[RecordingAlignment]) -> Vec<CorpusModel> {
    corpus.iter().map(|r| CorpusModel::train(corpus, Some(&r.rec_id), &ModelConfig::default()).unwrap()).collect()
}

/// Calibrates the model-based thresholds to the rate of errors actually
/// planted in `problem`, as a user with annotated problem files would.
pub fn calibrated_config(truth: &[ErrorSpan], problem: &[RecordingAlignment], models: &[CorpusModel]) -> DetectorConfig {
    let hours: f64 = problem.iter().map(|r| r.total_duration_s()).sum::<f64>() / 3600.0;
    let mut cfg = DetectorConfig::default();
    for f in [Feature::Unexpected, Feature::Badlength] {
        let target = truth.iter().filter(|t| targets(t.kind).contains(&f)).count() as f64 / hours;
        let tracks: Vec<_> = problem.iter().zip(models).map(|(r, m)| score_track(f, r, Some(m), &cfg).unwrap()).collect();
        let cal = calibrate_threshold(&tracks, target);
        cfg.set_threshold(f, cal.threshold);
    }
    cfg
}

pub fn detect_corpus(corpus: &[SynthRecording], models: &[CorpusModel], cfg: &DetectorConfig) -> Vec<SuspicionRegion> {
    corpus
        .iter()
        .zip(models)
        .flat_map(|(r, m)| detect_all(&r.alignment, Some(m), r.audio.as_ref(), cfg).unwrap())
        .collect()
}

pub fn check_detector_recall() -> Check {
    let (result, took) = timed(|| -> Check {
        let spec = SynthSpec::default();
        let clean = generate_corpus(&spec);
        let (dirty, truth) = inject_errors(&clean, &spec);
        let problem = alignments(&dirty);
        let models = leave_one_out_models(&problem);
        let cfg = calibrated_config(&truth, &problem, &models);
        let regions = detect_corpus(&dirty, &models, &cfg);
        let eval = evaluate_detectors(&regions, &truth, 0.1);

        let mut detail = Vec::new();
        let mut failures = Vec::new();
        for (f, floor) in [
            (Feature::Short, 0.9),
            (Feature::Unexpected, 0.8),
            (Feature::Badlength, 0.8),
            (Feature::Quiet, 0.9),
            (Feature::Loud, 0.9),
        ] {
            let recall = eval[&f].recall.unwrap_or(0.0);
            detail.push(format!("{f} {recall:.2}"));
            if recall < floor {
                failures.push(format!("{f} recall {recall:.2} < {floor}"));
            }
        }
        for (f, e) in &eval {
            if let Some(p) = e.precision {
                if p < 0.5 {
                    failures.push(format!("{f} precision {p:.2}"));
                }
            }
        }

        let clean_models = leave_one_out_models(&alignments(&clean));
        let clean_regions = detect_corpus(&clean, &clean_models, &cfg);
        let hours = spec.n_recordings as f64 * spec.duration_s / 3600.0;
        let worst = Feature::ALL
            .iter()
            .map(|f| (*f, clean_regions.iter().filter(|r| r.feature == *f).count() as f64 / hours))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if worst.1 >= 5.0 {
            failures.push(format!("clean {} rate {:.1}/h", worst.0, worst.1));
        }
        detail.push(format!("worst clean rate {:.1}/h", worst.1));
        if failures.is_empty() {
            Ok(format!("recall {}", detail.join(", ")))
        } else {
            Err(failures.join("; "))
        }
    });
    let detail = result?;
    ensure(took < Duration::from_secs(120), || format!("took {took:?}"))?;
    Ok(format!("{detail} ({took:.2?})"))
}

pub fn random_regions(rng: &mut ChaCha8Rng, n: usize, t: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            // half-second grid makes exact window-edge gaps common
            let s = (rng.random_range(0.0..t) * 2.0).floor() / 2.0;
            let len = (rng.random_range(0.0f64..8.0) * 2.0).floor() / 2.0 + 0.25;
            (s, (s + len).min(t + 8.0))
        })
        .collect()
}

/// A corpus where every stretched word also carries a log-probability dip,
/// so `badlength` and `unexpected` should fire together.
pub fn co_planted_corpus() -> (Vec<SynthRecording>, Vec<RecordingAlignment>) {
    let spec = SynthSpec {
        n_recordings: 6,
        duration_s: 600.0,
        with_audio: false,
        errors: ErrorRates::only(ErrorKind::Stretch, 24.0),
        ..Default::default()
    };
    let (mut dirty, truth) = inject_errors(&generate_corpus(&spec), &spec);
    for rec in &mut dirty {
        let mut phones = rec.alignment.phones().to_vec();
        for t in truth.iter().filter(|t| t.rec_id == rec.alignment.rec_id) {
            dip_logp(&mut phones, t.start_s, t.end_s, spec.logp_dip_rate);
        }
        let total = rec.alignment.total_duration_s();
        rec.alignment = validate_alignment(rec.alignment.rec_id.clone(), phones, Some(total))
            .unwrap()
            .with_word_count(rec.alignment.word_count());
    }
    let corpus = alignments(&dirty);
    (dirty, corpus)
}

pub fn check_coincidence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..100 {
        let (na, nb) = (rng.random_range(0..60), rng.random_range(0..60));
        let a = random_regions(&mut rng, na, 600.0);
        let b = random_regions(&mut rng, nb, 600.0);
        let w = [0.0, 0.5, 5.0, 12.5][trial % 4];
        let (fast, slow) = (count_pairs(&a, &b, w), brute_pairs(&a, &b, w));
        ensure(fast == slow, || format!("trial {trial}: {fast} pairs vs brute force {slow}"))?;
    }

    let (dirty, corpus) = co_planted_corpus();
    let models = leave_one_out_models(&corpus);
    let cfg = DetectorConfig::default();
    let recs: Vec<RecordingRegions> = dirty
        .iter()
        .zip(&models)
        .map(|(r, m)| {
            RecordingRegions::new(r.alignment.total_duration_s(), &detect_all(&r.alignment, Some(m), None, &cfg).unwrap())
        })
        .collect();
    let table = corpus_coincidence(&recs, PAIRING_WINDOW_S, ChanceModel::Interval);
    let row = table.row(Feature::Unexpected, Feature::Badlength).unwrap();
    let ratio = row.ratio.unwrap_or(0.0);
    ensure(ratio > 3.0 && row.p_value < 1e-3, || {
        format!("unexpected/badlength ratio {ratio:.2}, p {:.2e}", row.p_value)
    })?;
    Ok(format!(
        "100 brute-force sets exact; co-planted ratio {ratio:.1} (observed {} vs {:.1} expected), p {:.1e}",
        row.observed_pairs, row.expected_chance, row.p_value
    ))
}

/// Rated rows with random scores; `rating(i, s_nd_short)` sets each rating.
pub fn rated_rows(n: usize, seed: u64, rating: impl Fn(usize, f64) -> f64) -> Vec<FileScoreRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut fam = || -> BTreeMap<Feature, f64> { Feature::ALL.iter().map(|&f| (f, rng.random_range(0.0..50.0))).collect() };
            let (s_nd, s_nw, s_dd) = (fam(), fam(), fam());
            let short = s_nd[&Feature::Short];
            FileScoreRow {
                rec_id: format!("r{i:02}"),
                rating: Some(rating(i, short)),
                duration_s: 600.0,
                word_count: 1000,
                s_nd,
                s_nw: Some(s_nw),
                s_dd: s_dd.into_iter().map(|(f, v)| (f, v / 50.0)).collect(),
            }
        })
        .collect()
}

pub fn check_regression() -> Check {
    let rows = rated_rows(24, 7, |_, short| 2.0 + 0.1 * short);
    let out = regression_harness(&rows).map_err(|e| e.to_string())?;
    let mut expected_labels = Vec::new();
    for fam in ScoreFamily::ALL {
        for t in Transform::ALL {
            expected_labels.push(aligncheck_core::analysis::fit_label(fam, t));
        }
    }
    let labels: Vec<String> = out.fits.iter().map(|f| f.label.clone()).collect();
    ensure(labels == expected_labels, || format!("labels {labels:?}"))?;
    let cell = &out.fits[0];
    ensure((cell.r_squared - 1.0).abs() <= 1e-9, || format!("matching cell R^2 {}", cell.r_squared))?;

    for f in Feature::ALL {
        for fam in ScoreFamily::ALL {
            let mut scaled = rows.clone();
            for r in &mut scaled {
                let m = match fam {
                    ScoreFamily::PerHour => &mut r.s_nd,
                    ScoreFamily::PerThousandWords => r.s_nw.as_mut().unwrap(),
                    ScoreFamily::Coverage => &mut r.s_dd,
                };
                *m.get_mut(&f).unwrap() *= 37.5;
            }
            let again = regression_harness(&scaled).map_err(|e| e.to_string())?;
            for (a, b) in out.fits.iter().zip(&again.fits) {
                ensure((a.r_squared - b.r_squared).abs() <= 1e-9, || {
                    format!("{}: R^2 moved by {:e} when {f} of {} was rescaled", a.label, a.r_squared - b.r_squared, fam.name())
                })?;
            }
        }
    }
    Ok(format!("R^2 = 1 in {}; 12 labeled cells; unit invariant", cell.label))
}

/// End-to-end report text for a small synthetic corpus.
pub fn report_for(spec: &SynthSpec) -> String {
    let (dirty, _) = inject_errors(&generate_corpus(spec), spec);
    let corpus = alignments(&dirty);
    let models = leave_one_out_models(&corpus);
    let cfg = DetectorConfig::default();
    let mut rows = Vec::new();
    let mut recs = Vec::new();
    for (i, (r, m)) in dirty.iter().zip(&models).enumerate() {
        let regions = detect_all(&r.alignment, Some(m), r.audio.as_ref(), &cfg).unwrap();
        rows.push(file_scores(&r.alignment, &regions, Some(1.0 + (i % 7) as f64)).unwrap());
        recs.push(RecordingRegions::new(r.alignment.total_duration_s(), &regions));
    }
    let fits = regression_harness(&rows).unwrap().fits;
    let table = corpus_coincidence(&recs, PAIRING_WINDOW_S, ChanceModel::Interval);
    write_report_json(&rows, &fits, &table.rows)
}

pub fn check_round_trips() -> Check {
    let spec = small_synth_spec(10, 120.0);
    let (dirty, _) = inject_errors(&generate_corpus(&spec), &spec);
    let corpus = alignments(&dirty);
    let model = CorpusModel::train(&corpus, None, &ModelConfig::default()).map_err(|e| e.to_string())?;
    let regions = detect_all(&dirty[0].alignment, Some(&model), dirty[0].audio.as_ref(), &DetectorConfig::default())
        .map_err(|e| e.to_string())?;

    let first = write_textgrid_regions(&corpus[0], &regions).map_err(|e| e.to_string())?;
    let second = write_textgrid(&parse_textgrid(&first).map_err(|e| e.to_string())?);
    ensure(first == second, || "TextGrid write-parse-write changed the text".into())?;

    let loaded = CorpusModel::from_json(&model.to_json()).map_err(|e| e.to_string())?;
    for rec in &corpus {
        for i in 0..rec.phones().len() {
            let (a, b) = (model.predict_logp_rate(rec, i), loaded.predict_logp_rate(rec, i));
            let (c, d) = (model.predict_log_duration(rec, i), loaded.predict_log_duration(rec, i));
            match (a, b, c, d) {
                (Ok(a), Ok(b), Ok(c), Ok(d)) => {
                    ensure((a - b).abs() <= 1e-12 && (c - d).abs() <= 1e-12, || format!("prediction drift at {} {i}", rec.rec_id))?
                }
                (Err(_), Err(_), Err(_), Err(_)) => {}
                _ => return Err("reloaded model scores different phones".into()),
            }
        }
    }

    let (r1, r2) = (report_for(&spec), report_for(&spec));
    ensure(r1 == r2, || "report JSON differs between runs".into())?;
    Ok(format!("TextGrid fixed point, model reload exact, report stable ({} bytes)", r1.len()))
}

pub fn check_performance() -> Check {
    let spec = SynthSpec { n_recordings: 1, duration_s: 3600.0, ..Default::default() };
    let (dirty, _) = inject_errors(&generate_corpus(&spec), &spec);
    let rec = &dirty[0].alignment;
    let model = CorpusModel::train(std::slice::from_ref(rec), None, &ModelConfig::default()).map_err(|e| e.to_string())?;
    let cfg = DetectorConfig::default();
    let (n_regions, labels) = timed(|| {
        detect_unexpected(rec, &model, &cfg).len()
            + detect_improbable(rec, &cfg).len()
            + detect_word_duration(rec, &cfg).len()
            + detect_duration_mismatch(rec, &model, &cfg).len()
    });
    let audio = dirty[0].audio.as_ref().unwrap();
    let samples = audio.samples().to_vec();
    let sr = audio.sample_rate_hz;
    let (amp, scan) = timed(|| {
        let track = AudioTrack::from_samples(rec.rec_id.clone(), sr, samples);
        detect_amplitude(rec, &track, &cfg)
    });
    amp.map_err(|e| e.to_string())?;
    let speed = 3600.0 / scan.as_secs_f64();
    ensure(labels < Duration::from_secs(10), || format!("label detectors took {labels:?}"))?;
    ensure(speed >= 50.0, || format!("amplitude scan at {speed:.0}x real time"))?;
    Ok(format!(
        "{} phones: label detectors {labels:.2?} ({n_regions} regions), amplitude scan {speed:.0}x real time",
        rec.phones().len()
    ))
}

/// Criteria that cannot be met as stated, with the reason. They still print
/// FAIL; the target fails only if one of them starts passing or another
/// criterion fails.
pub const KNOWN_FAILURES: [(usize, &str); 1] = [(
    3,
    "the duration features contain the phone's own duration, so noise on ln δ enters the regressors \
     and least squares is biased; the 3 SE coverage cannot hold for the 25 weights",
)];

pub const CRITERIA: [(&str, fn() -> Check); 9] = [
    ("constants", check_constants),
    ("stats oracles", check_stats_oracles),
    ("predictor recovery", check_predictor_recovery),
    ("leave-one-out identity", check_leave_one_out),
    ("detector recall", check_detector_recall),
    ("coincidence", check_coincidence),
    ("regression harness", check_regression),
    ("round trips", check_round_trips),
    ("performance", check_performance),
];
