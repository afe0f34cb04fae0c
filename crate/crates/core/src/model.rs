//! Corpus-level phone statistics and the two linear predictors built on them:
//! one for the log-probability rate `L/δ` of a phone and one for its log
//! duration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::RecordingAlignment;
use crate::stats::{median, ols_fit, Matrix, QForm, StatsError};

pub const LOGP_TERMS: usize = 5;
pub const DURATION_TERMS: usize = 25;
/// Neighbours considered on each side by the duration model.
pub const DURATION_CONTEXT: usize = 6;

const MIN_LOGP_ROWS: usize = 50;
const MIN_DURATION_ROWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("phone {index} has duration {duration_s} s, outside the scorable range")]
    PhoneExcluded { index: usize, duration_s: f64 },
    #[error("need at least {needed} training phones, found {found}")]
    TooFewObservations { needed: usize, found: usize },
    #[error("regression failed: {0}")]
    Regression(#[from] StatsError),
    #[error("model file: {0}")]
    Format(String),
}

/// Training and scoring ranges for phone durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Closed duration band for the rate/duration medians and both weight fits.
    pub training_band_s: [f64; 2],
    /// Phones with duration at or above this are never scored.
    pub max_scorable_s: f64,
    pub q_form: QForm,
    /// Also fit the predictors on silence phones.
    pub train_on_silence: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { training_band_s: [0.04, 0.18], max_scorable_s: 1.0, q_form: QForm::Antisymmetric, train_on_silence: false }
    }
}

impl ModelConfig {
    fn in_training_band(&self, d: f64) -> bool {
        d >= self.training_band_s[0] && d <= self.training_band_s[1]
    }

    pub fn is_scorable(&self, d: f64) -> bool {
        d > 0.0 && d < self.max_scorable_s
    }
}

/// Medians for one phone class. A field is `None` when the class had no
/// qualifying instance for it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassStats {
    /// Median log-probability rate `L/δ`.
    pub lambda: Option<f64>,
    /// Median duration in seconds.
    pub duration: Option<f64>,
    /// Median log duration.
    pub log_duration: Option<f64>,
    /// Median absolute deviation of log duration about `log_duration`.
    pub log_duration_mad: Option<f64>,
}

/// Fully populated statistics for a lookup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedStats {
    pub lambda: f64,
    pub duration: f64,
    pub log_duration: f64,
    pub log_duration_mad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneClassStats {
    classes: BTreeMap<String, ClassStats>,
    /// Pooled medians used for classes (or fields) missing from `classes`.
    global: ResolvedStats,
}

impl PhoneClassStats {
    pub fn new(classes: BTreeMap<String, ClassStats>, global: ResolvedStats) -> Self {
        Self { classes, global }
    }

    pub fn get(&self, label: &str) -> ResolvedStats {
        let g = self.global;
        match self.classes.get(label) {
            None => g,
            Some(c) => ResolvedStats {
                lambda: c.lambda.unwrap_or(g.lambda),
                duration: c.duration.unwrap_or(g.duration),
                log_duration: c.log_duration.unwrap_or(g.log_duration),
                log_duration_mad: c.log_duration_mad.unwrap_or(g.log_duration_mad),
            },
        }
    }

    pub fn class(&self, label: &str) -> Option<&ClassStats> {
        self.classes.get(label)
    }

    pub fn classes(&self) -> impl Iterator<Item = (&str, &ClassStats)> {
        self.classes.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn global(&self) -> ResolvedStats {
        self.global
    }
}

fn included<'a>(
    corpus: &'a [RecordingAlignment],
    exclude: Option<&'a str>,
) -> impl Iterator<Item = &'a RecordingAlignment> + 'a {
    corpus.iter().filter(move |r| Some(r.rec_id.as_str()) != exclude)
}

/// Per-class medians over every recording except `exclude`.
pub fn train_phone_stats(
    corpus: &[RecordingAlignment],
    exclude: Option<&str>,
    cfg: &ModelConfig,
) -> Result<PhoneClassStats, ModelError> {
    #[derive(Default)]
    struct Acc {
        rates: Vec<f64>,
        durations: Vec<f64>,
        log_durations: Vec<f64>,
    }
    let mut per_class: BTreeMap<&str, Acc> = BTreeMap::new();
    let mut pooled = Acc::default();
    for rec in included(corpus, exclude) {
        for p in rec.phones() {
            let d = p.duration();
            let acc = per_class.entry(p.label.as_str()).or_default();
            if cfg.in_training_band(d) {
                acc.rates.push(p.log_prob / d);
                acc.durations.push(d);
                pooled.rates.push(p.log_prob / d);
                pooled.durations.push(d);
            }
            if cfg.is_scorable(d) {
                acc.log_durations.push(d.ln());
                pooled.log_durations.push(d.ln());
            }
        }
    }
    if pooled.durations.is_empty() || pooled.log_durations.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }

    let med = |v: &[f64]| if v.is_empty() { None } else { median(v).ok() };
    let mad = |v: &[f64], center: f64| {
        let dev: Vec<f64> = v.iter().map(|x| (x - center).abs()).collect();
        median(&dev).ok()
    };

    let global_log = med(&pooled.log_durations).unwrap();
    let global = ResolvedStats {
        lambda: med(&pooled.rates).unwrap(),
        duration: med(&pooled.durations).unwrap(),
        log_duration: global_log,
        log_duration_mad: mad(&pooled.log_durations, global_log).unwrap(),
    };
    let classes = per_class
        .into_iter()
        .map(|(label, acc)| {
            let log_duration = med(&acc.log_durations);
            let stats = ClassStats {
                lambda: med(&acc.rates),
                duration: med(&acc.durations),
                log_duration,
                log_duration_mad: log_duration.and_then(|c| mad(&acc.log_durations, c)),
            };
            (label.to_string(), stats)
        })
        .collect();
    Ok(PhoneClassStats { classes, global })
}

/// Features of the log-probability predictor for phone `i`:
/// `[ln(δ/D(p)), ln(D(p)/D(prev)), λ(p) - λ(prev), ln(D(p)/D(next)), λ(p) - λ(next)]`.
///
/// A missing neighbour at either end of the recording contributes zeros.
/// The phone must have positive duration.
pub fn logp_features(rec: &RecordingAlignment, i: usize, stats: &PhoneClassStats) -> [f64; LOGP_TERMS] {
    let phones = rec.phones();
    let me = stats.get(&phones[i].label);
    let mut f = [0.0; LOGP_TERMS];
    f[0] = (phones[i].duration() / me.duration).ln();
    if i > 0 {
        let prev = stats.get(&phones[i - 1].label);
        f[1] = (me.duration / prev.duration).ln();
        f[2] = me.lambda - prev.lambda;
    }
    if let Some(next) = phones.get(i + 1) {
        let next = stats.get(&next.label);
        f[3] = (me.duration / next.duration).ln();
        f[4] = me.lambda - next.lambda;
    }
    f
}

/// Offsets `-6..=-1, 1..=6` in feature order.
fn context_offsets() -> impl Iterator<Item = isize> {
    let k = DURATION_CONTEXT as isize;
    (-k..=-1).chain(1..=k)
}

/// Features of the duration predictor for phone `i`: a constant 1, then
/// `q(D_i δ_{i+k}, D_{i+k} δ_i)` for the twelve neighbours, then
/// `q(D_i, D_{i+k})` for the same neighbours. Missing neighbours and
/// `q(0, 0)` contribute 0.
pub fn duration_features(
    rec: &RecordingAlignment,
    i: usize,
    stats: &PhoneClassStats,
    q_form: QForm,
) -> [f64; DURATION_TERMS] {
    let phones = rec.phones();
    let d_i = phones[i].duration();
    let typical_i = stats.get(&phones[i].label).duration;
    let mut f = [0.0; DURATION_TERMS];
    f[0] = 1.0;
    for (slot, k) in context_offsets().enumerate() {
        let Some(j) = i.checked_add_signed(k).filter(|&j| j < phones.len()) else { continue };
        let d_j = phones[j].duration();
        let typical_j = stats.get(&phones[j].label).duration;
        f[1 + slot] = q_form.eval_or_zero(typical_i * d_j, typical_j * d_i);
        f[1 + 2 * DURATION_CONTEXT + slot] = q_form.eval_or_zero(typical_i, typical_j);
    }
    f
}

fn is_training_row(rec: &RecordingAlignment, i: usize, cfg: &ModelConfig) -> bool {
    let p = &rec.phones()[i];
    (cfg.train_on_silence || !p.is_silence()) && cfg.in_training_band(p.duration())
}

/// Least squares without intercept. Columns that are identically zero carry
/// no information and get weight zero instead of failing the fit.
fn fit_weights<const K: usize>(rows: &[[f64; K]], response: &[f64]) -> Result<[f64; K], ModelError> {
    let live: Vec<usize> = (0..K).filter(|&j| rows.iter().any(|r| r[j].abs() > 1e-12)).collect();
    let mut weights = [0.0; K];
    if live.is_empty() {
        return Ok(weights);
    }
    let design = Matrix::from_rows(rows, K).select_columns(&live);
    let fit = ols_fit(&design, response, false, None).map_err(|e| match e {
        StatsError::RankDeficient { column } => StatsError::RankDeficient { column: live[column] },
        other => other,
    })?;
    for (k, &j) in live.iter().enumerate() {
        weights[j] = fit.coefficients[k];
    }
    Ok(weights)
}

/// Fits the five log-probability weights on response `L/δ - λ(p)`.
pub fn train_logp_predictor(
    corpus: &[RecordingAlignment],
    stats: &PhoneClassStats,
    exclude: Option<&str>,
    cfg: &ModelConfig,
) -> Result<[f64; LOGP_TERMS], ModelError> {
    let mut rows = Vec::new();
    let mut response = Vec::new();
    for rec in included(corpus, exclude) {
        for (i, p) in rec.phones().iter().enumerate() {
            if is_training_row(rec, i, cfg) {
                rows.push(logp_features(rec, i, stats));
                response.push(p.log_prob / p.duration() - stats.get(&p.label).lambda);
            }
        }
    }
    if rows.len() < MIN_LOGP_ROWS {
        return Err(ModelError::TooFewObservations { needed: MIN_LOGP_ROWS, found: rows.len() });
    }
    fit_weights(&rows, &response)
}

/// Fits the 25 duration weights on response `ln δ - Δ(p)`.
pub fn train_duration_predictor(
    corpus: &[RecordingAlignment],
    stats: &PhoneClassStats,
    exclude: Option<&str>,
    cfg: &ModelConfig,
) -> Result<[f64; DURATION_TERMS], ModelError> {
    let mut rows = Vec::new();
    let mut response = Vec::new();
    for rec in included(corpus, exclude) {
        for (i, p) in rec.phones().iter().enumerate() {
            if is_training_row(rec, i, cfg) {
                rows.push(duration_features(rec, i, stats, cfg.q_form));
                response.push(p.duration().ln() - stats.get(&p.label).log_duration);
            }
        }
    }
    if rows.len() < MIN_DURATION_ROWS {
        return Err(ModelError::TooFewObservations { needed: MIN_DURATION_ROWS, found: rows.len() });
    }
    fit_weights(&rows, &response)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusModel {
    pub stats: PhoneClassStats,
    pub logp_weights: [f64; LOGP_TERMS],
    pub duration_weights: [f64; DURATION_TERMS],
    pub config: ModelConfig,
    pub excluded_rec: Option<String>,
}

impl CorpusModel {
    /// Trains statistics and both predictors, leaving out `exclude`.
    pub fn train(
        corpus: &[RecordingAlignment],
        exclude: Option<&str>,
        cfg: &ModelConfig,
    ) -> Result<Self, ModelError> {
        let stats = train_phone_stats(corpus, exclude, cfg)?;
        let logp_weights = train_logp_predictor(corpus, &stats, exclude, cfg)?;
        let duration_weights = train_duration_predictor(corpus, &stats, exclude, cfg)?;
        Ok(Self { stats, logp_weights, duration_weights, config: cfg.clone(), excluded_rec: exclude.map(str::to_string) })
    }

    fn check_scorable(&self, rec: &RecordingAlignment, i: usize) -> Result<(), ModelError> {
        let d = rec.phones()[i].duration();
        if self.config.is_scorable(d) {
            Ok(())
        } else {
            Err(ModelError::PhoneExcluded { index: i, duration_s: d })
        }
    }

    /// Expected `L/δ` for phone `i`.
    pub fn predict_logp_rate(&self, rec: &RecordingAlignment, i: usize) -> Result<f64, ModelError> {
        self.check_scorable(rec, i)?;
        let f = logp_features(rec, i, &self.stats);
        Ok(self.stats.get(&rec.phones()[i].label).lambda + dot(&self.logp_weights, &f))
    }

    /// Expected `ln δ` for phone `i`.
    pub fn predict_log_duration(&self, rec: &RecordingAlignment, i: usize) -> Result<f64, ModelError> {
        self.check_scorable(rec, i)?;
        let f = duration_features(rec, i, &self.stats, self.config.q_form);
        Ok(self.stats.get(&rec.phones()[i].label).log_duration + dot(&self.duration_weights, &f))
    }

    /// Mean of the twelve local speech-rate weights. Values near 0.36 mean a
    /// phone follows roughly a third of the change in its neighbours' pace.
    pub fn local_rate_weight_mean(&self) -> f64 {
        self.duration_weights[1..=2 * DURATION_CONTEXT].iter().sum::<f64>() / (2 * DURATION_CONTEXT) as f64
    }

    /// Fraction of the phone classes in `rec` that the model saw in training.
    pub fn inventory_overlap(&self, rec: &RecordingAlignment) -> f64 {
        let labels: std::collections::BTreeSet<&str> = rec.phones().iter().map(|p| p.label.as_str()).collect();
        if labels.is_empty() {
            return 1.0;
        }
        labels.iter().filter(|l| self.stats.class(l).is_some()).count() as f64 / labels.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
