//! Per-file scores, the regression harness against human ratings, and the
//! cross-detector coincidence analysis.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::RecordingAlignment;
use crate::detect::{Feature, SuspicionRegion};
use crate::stats::{ols_fit, poisson_upper_tail, Matrix, RegressionFit, StatsError};

/// Two regions pair up when the gap between them is at most this long.
pub const PAIRING_WINDOW_S: f64 = 5.0;
/// Fewest rated recordings the regression harness accepts.
pub const MIN_RATED_RECORDINGS: usize = 10;
/// Exponent applied to feature scores in the transformed regressions.
pub const X_POWER: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("recording {0} has zero duration")]
    ZeroDuration(String),
    #[error("recording {0} has no rating")]
    MissingRating(String),
    #[error("need at least {needed} rated recordings, found {found}")]
    TooFewRatings { needed: usize, found: usize },
    #[error("regression {label}: {source}")]
    Regression { label: String, source: StatsError },
}

/// The three per-file scores of every feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileScoreRow {
    pub rec_id: String,
    pub rating: Option<f64>,
    pub duration_s: f64,
    pub word_count: usize,
    /// Regions per hour.
    pub s_nd: BTreeMap<Feature, f64>,
    /// Regions per 1000 words; absent when the recording has no words.
    pub s_nw: Option<BTreeMap<Feature, f64>>,
    /// Fraction of the recording covered by regions.
    pub s_dd: BTreeMap<Feature, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreFamily {
    #[serde(rename = "s_nd")]
    PerHour,
    #[serde(rename = "s_nw")]
    PerThousandWords,
    #[serde(rename = "s_dd")]
    Coverage,
}

impl ScoreFamily {
    pub const ALL: [ScoreFamily; 3] = [ScoreFamily::PerHour, ScoreFamily::PerThousandWords, ScoreFamily::Coverage];

    pub fn name(self) -> &'static str {
        match self {
            ScoreFamily::PerHour => "s_nd",
            ScoreFamily::PerThousandWords => "s_nw",
            ScoreFamily::Coverage => "s_dd",
        }
    }
}

impl FileScoreRow {
    pub fn family(&self, family: ScoreFamily) -> Option<&BTreeMap<Feature, f64>> {
        match family {
            ScoreFamily::PerHour => Some(&self.s_nd),
            ScoreFamily::PerThousandWords => self.s_nw.as_ref(),
            ScoreFamily::Coverage => Some(&self.s_dd),
        }
    }
}

/// Total length of the union of intervals.
fn union_length(mut spans: Vec<(f64, f64)>) -> f64 {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (s, e) in spans {
        match current.as_mut() {
            Some(c) if s <= c.1 => c.1 = c.1.max(e),
            _ => {
                if let Some(c) = current.take() {
                    total += c.1 - c.0;
                }
                current = Some((s, e));
            }
        }
    }
    total + current.map_or(0.0, |c| c.1 - c.0)
}

/// Scores one recording. `regions` must belong to `rec`; every feature gets a
/// score, zero when it has no regions.
pub fn file_scores(
    rec: &RecordingAlignment,
    regions: &[SuspicionRegion],
    rating: Option<f64>,
) -> Result<FileScoreRow, AnalysisError> {
    let duration = rec.total_duration_s();
    if duration <= 0.0 {
        return Err(AnalysisError::ZeroDuration(rec.rec_id.clone()));
    }
    let words = rec.word_count();
    let mut s_nd = BTreeMap::new();
    let mut s_nw = BTreeMap::new();
    let mut s_dd = BTreeMap::new();
    for f in Feature::ALL {
        let spans: Vec<(f64, f64)> =
            regions.iter().filter(|r| r.feature == f).map(|r| (r.start_s.max(0.0), r.end_s.min(duration))).collect();
        let n = spans.len() as f64;
        s_nd.insert(f, n / (duration / 3600.0));
        s_nw.insert(f, n / (words as f64 / 1000.0));
        s_dd.insert(f, (union_length(spans) / duration).clamp(0.0, 1.0));
    }
    Ok(FileScoreRow {
        rec_id: rec.rec_id.clone(),
        rating,
        duration_s: duration,
        word_count: words,
        s_nd,
        s_nw: (words > 0).then_some(s_nw),
        s_dd,
    })
}

/// One of the four transform combinations applied before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transform {
    /// Raise feature scores to [`X_POWER`].
    pub power_x: bool,
    /// Square the ratings.
    pub square_y: bool,
}

impl Transform {
    pub const ALL: [Transform; 4] = [
        Transform { power_x: false, square_y: false },
        Transform { power_x: true, square_y: false },
        Transform { power_x: false, square_y: true },
        Transform { power_x: true, square_y: true },
    ];

    fn x(self, v: f64) -> f64 {
        if self.power_x {
            v.powf(X_POWER)
        } else {
            v
        }
    }

    fn y(self, v: f64) -> f64 {
        if self.square_y {
            v * v
        } else {
            v
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = if self.power_x { "x^0.3" } else { "x" };
        let y = if self.square_y { "y^2" } else { "y" };
        write!(f, "{x},{y}")
    }
}

pub fn fit_label(family: ScoreFamily, transform: Transform) -> String {
    format!("{}[{}]", family.name(), transform)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessOutput {
    /// Always 12 fits, families outermost, in [`ScoreFamily::ALL`] and
    /// [`Transform::ALL`] order.
    pub fits: Vec<RegressionFit>,
    pub warnings: Vec<String>,
}

/// Regresses ratings on feature scores for every score family and transform
/// combination: 12 fits, each with an intercept.
///
/// Features whose transformed column is constant, or which make the design
/// rank deficient, are dropped from that fit with a warning. Rows without
/// per-word scores are left out of the `s_nw` fits.
pub fn regression_harness(rows: &[FileScoreRow]) -> Result<HarnessOutput, AnalysisError> {
    if let Some(r) = rows.iter().find(|r| r.rating.is_none()) {
        return Err(AnalysisError::MissingRating(r.rec_id.clone()));
    }
    if rows.len() < MIN_RATED_RECORDINGS {
        return Err(AnalysisError::TooFewRatings { needed: MIN_RATED_RECORDINGS, found: rows.len() });
    }
    let mut rows: Vec<&FileScoreRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.rec_id.cmp(&b.rec_id));

    let mut fits = Vec::with_capacity(12);
    let mut warnings = Vec::new();
    for family in ScoreFamily::ALL {
        let usable: Vec<&FileScoreRow> = rows.iter().copied().filter(|r| r.family(family).is_some()).collect();
        if usable.len() < rows.len() {
            warnings.push(format!(
                "{}: {} recording(s) without words left out",
                family.name(),
                rows.len() - usable.len()
            ));
        }
        for transform in Transform::ALL {
            let label = fit_label(family, transform);
            let (fit, mut w) = fit_one(&usable, family, transform, &label)?;
            warnings.append(&mut w);
            fits.push(fit);
        }
    }
    let tests: usize = fits.iter().map(|f| f.p_values.len().saturating_sub(1)).sum();
    if fits.len() >= 12 {
        warnings.push(format!(
            "{} fits with {} coefficient tests: about {:.1} would pass P < 0.05 by chance alone",
            fits.len(),
            tests,
            0.05 * tests as f64
        ));
    }
    Ok(HarnessOutput { fits, warnings })
}

fn fit_one(
    rows: &[&FileScoreRow],
    family: ScoreFamily,
    transform: Transform,
    label: &str,
) -> Result<(RegressionFit, Vec<String>), AnalysisError> {
    let y: Vec<f64> = rows.iter().map(|r| transform.y(r.rating.expect("checked"))).collect();
    let columns: Vec<(Feature, Vec<f64>)> = Feature::ALL
        .iter()
        .map(|&f| (f, rows.iter().map(|r| transform.x(r.family(family).expect("filtered")[&f])).collect()))
        .collect();

    let mut warnings = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for (j, (f, col)) in columns.iter().enumerate() {
        if col.iter().all(|&v| v == col[0]) {
            warnings.push(format!("{label}: dropped {f}, constant at {} (the detector never fired?)", col[0]));
        } else {
            kept.push(j);
        }
    }
    loop {
        let design_rows: Vec<Vec<f64>> =
            (0..rows.len()).map(|i| kept.iter().map(|&j| columns[j].1[i]).collect()).collect();
        let design = Matrix::from_rows(&design_rows, kept.len());
        let labels: Vec<String> = kept.iter().map(|&j| columns[j].0.name().to_string()).collect();
        match ols_fit(&design, &y, true, Some(&labels)) {
            Ok(mut fit) => {
                fit.label = label.to_string();
                return Ok((fit, warnings));
            }
            Err(StatsError::RankDeficient { column }) => {
                let j = kept.remove(column);
                warnings.push(format!("{label}: dropped {}, collinear with earlier features", columns[j].0));
            }
            Err(source) => return Err(AnalysisError::Regression { label: label.to_string(), source }),
        }
    }
}

/// How chance pairings are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChanceModel {
    /// Window widened by both mean region lengths.
    #[default]
    Interval,
    /// Regions treated as points: window `2W`.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRow {
    pub feature_a: Feature,
    pub feature_b: Feature,
    pub n_a: usize,
    pub n_b: usize,
    pub observed_pairs: u64,
    pub expected_chance: f64,
    /// Absent when nothing is expected by chance.
    pub ratio: Option<f64>,
    pub p_value: f64,
}

/// Pairing statistics for all 21 unordered feature pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceTable {
    pub window_s: f64,
    pub chance_model: ChanceModel,
    pub rows: Vec<CoincidenceRow>,
}

impl CoincidenceTable {
    pub fn row(&self, a: Feature, b: Feature) -> Option<&CoincidenceRow> {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.rows.iter().find(|r| r.feature_a == a && r.feature_b == b)
    }
}

/// The 21 unordered pairs of distinct features, in feature order.
pub fn feature_pairs() -> Vec<(Feature, Feature)> {
    let mut out = Vec::with_capacity(21);
    for (i, &a) in Feature::ALL.iter().enumerate() {
        for &b in &Feature::ALL[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

/// Number of `(a, b)` pairs whose gap is at most `window_s` (overlap counts
/// as a zero gap).
///
/// A pair qualifies when `b.start - a.end <= W` and `a.start - b.end <= W`.
/// For valid intervals the second failing implies the first holds, so the
/// count is `#{b.start - a.end <= W} - #{a.start - b.end > W}`, each a binary
/// search over sorted starts or ends.
pub fn count_pairs(a: &[(f64, f64)], b: &[(f64, f64)], window_s: f64) -> u64 {
    let mut starts: Vec<f64> = b.iter().map(|x| x.0).collect();
    let mut ends: Vec<f64> = b.iter().map(|x| x.1).collect();
    starts.sort_by(f64::total_cmp);
    ends.sort_by(f64::total_cmp);
    let mut total = 0u64;
    for &(a_start, a_end) in a {
        let near = starts.partition_point(|&bs| bs - a_end <= window_s);
        let before = ends.partition_point(|&be| a_start - be > window_s);
        total += (near - before) as u64;
    }
    total
}

/// Regions of one recording grouped by feature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordingRegions {
    pub duration_s: f64,
    pub by_feature: BTreeMap<Feature, Vec<(f64, f64)>>,
}

impl RecordingRegions {
    pub fn new(duration_s: f64, regions: &[SuspicionRegion]) -> Self {
        let mut by_feature: BTreeMap<Feature, Vec<(f64, f64)>> = BTreeMap::new();
        for r in regions {
            by_feature.entry(r.feature).or_default().push((r.start_s, r.end_s));
        }
        Self { duration_s, by_feature }
    }

    fn get(&self, f: Feature) -> &[(f64, f64)] {
        self.by_feature.get(&f).map_or(&[], Vec::as_slice)
    }
}

fn mean_len(spans: &[(f64, f64)]) -> f64 {
    if spans.is_empty() {
        0.0
    } else {
        spans.iter().map(|s| s.1 - s.0).sum::<f64>() / spans.len() as f64
    }
}

/// Expected chance pairs under uniform independent placement on `[0, T]`.
pub fn expected_pairs(a: &[(f64, f64)], b: &[(f64, f64)], duration_s: f64, window_s: f64, model: ChanceModel) -> f64 {
    if a.is_empty() || b.is_empty() || duration_s <= 0.0 {
        return 0.0;
    }
    let reach = match model {
        ChanceModel::Interval => 2.0 * window_s + mean_len(a) + mean_len(b),
        ChanceModel::Point => 2.0 * window_s,
    };
    a.len() as f64 * b.len() as f64 * reach / duration_s
}

fn finish_row(feature_a: Feature, feature_b: Feature, n_a: usize, n_b: usize, observed: u64, expected: f64) -> CoincidenceRow {
    CoincidenceRow {
        feature_a,
        feature_b,
        n_a,
        n_b,
        observed_pairs: observed,
        expected_chance: expected,
        ratio: (expected > 0.0).then(|| observed as f64 / expected),
        p_value: poisson_upper_tail(observed, expected),
    }
}

/// Coincidence table of one recording.
pub fn coincidence_analysis(rec: &RecordingRegions, window_s: f64, model: ChanceModel) -> CoincidenceTable {
    corpus_coincidence(std::slice::from_ref(rec), window_s, model)
}

/// Coincidence table of a corpus: observed and expected pairs are summed over
/// recordings before the ratio and p-value are taken.
pub fn corpus_coincidence(recs: &[RecordingRegions], window_s: f64, model: ChanceModel) -> CoincidenceTable {
    let rows = feature_pairs()
        .into_iter()
        .map(|(fa, fb)| {
            let (mut n_a, mut n_b, mut observed, mut expected) = (0, 0, 0, 0.0);
            for rec in recs {
                let (a, b) = (rec.get(fa), rec.get(fb));
                n_a += a.len();
                n_b += b.len();
                observed += count_pairs(a, b, window_s);
                expected += expected_pairs(a, b, rec.duration_s, window_s, model);
            }
            finish_row(fa, fb, n_a, n_b, observed, expected)
        })
        .collect();
    CoincidenceTable { window_s, chance_model: model, rows }
}

/// Result of re-placing regions uniformly at random.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationResult {
    pub mean_pairs: f64,
    /// `(1 + #{draws >= observed}) / (1 + draws)`.
    pub p_value: f64,
}

/// Permutation test for one feature pair: every region keeps its length and
/// gets a uniform start in `[0, T - len]`, independently per draw.
pub fn permutation_test(
    recs: &[RecordingRegions],
    fa: Feature,
    fb: Feature,
    window_s: f64,
    draws: usize,
    seed: u64,
) -> PermutationResult {
    let observed: u64 = recs.iter().map(|r| count_pairs(r.get(fa), r.get(fb), window_s)).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let place = |spans: &[(f64, f64)], t: f64, rng: &mut ChaCha8Rng| -> Vec<(f64, f64)> {
        spans
            .iter()
            .map(|&(s, e)| {
                let len = (e - s).min(t);
                let start = rng.random::<f64>() * (t - len);
                (start, start + len)
            })
            .collect()
    };
    let mut total = 0u64;
    let mut at_least = 0usize;
    for _ in 0..draws {
        let mut count = 0;
        for r in recs {
            let a = place(r.get(fa), r.duration_s, &mut rng);
            let b = place(r.get(fb), r.duration_s, &mut rng);
            count += count_pairs(&a, &b, window_s);
        }
        total += count;
        if count >= observed {
            at_least += 1;
        }
    }
    PermutationResult {
        mean_pairs: total as f64 / draws.max(1) as f64,
        p_value: (1 + at_least) as f64 / (1 + draws) as f64,
    }
}
