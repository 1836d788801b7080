use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::{Capability, EvalResult};
use super::QaError;

pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn contains_point(&self) -> bool {
        self.ci_low <= self.value && self.value <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionMetrics {
    pub n: usize,
    /// `None` when the dimension has no scored results.
    pub accuracy: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub accuracy: Estimate,
    pub no_evidence_rate: Estimate,
    pub per_dimension: BTreeMap<Capability, DimensionMetrics>,
    pub errored: usize,
    /// Errored results left out of every denominator.
    pub excluded: usize,
    pub resamples: usize,
    pub seed: u64,
}

/// Linear interpolation between closest ranks.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap of the mean of each column of `flags`. Returns one
/// estimate per column; intervals are widened to include the point value
/// when rounding pushes it just outside.
fn bootstrap(flags: &[[bool; 2]], resamples: usize, rng: &mut ChaCha8Rng) -> [Estimate; 2] {
    let n = flags.len();
    let point: [f64; 2] = std::array::from_fn(|k| flags.iter().filter(|f| f[k]).count() as f64 / n as f64);
    let mut means = [Vec::with_capacity(resamples), Vec::with_capacity(resamples)];
    for _ in 0..resamples {
        let mut hits = [0usize; 2];
        for _ in 0..n {
            let f = flags[rng.random_range(0..n)];
            hits[0] += f[0] as usize;
            hits[1] += f[1] as usize;
        }
        means[0].push(hits[0] as f64 / n as f64);
        means[1].push(hits[1] as f64 / n as f64);
    }
    std::array::from_fn(|k| {
        let m = &mut means[k];
        m.sort_by(f64::total_cmp);
        Estimate {
            value: point[k],
            ci_low: quantile(m, 0.025).min(point[k]),
            ci_high: quantile(m, 0.975).max(point[k]),
        }
    })
}

/// Accuracy, no-evidence rate and per-dimension accuracy with seeded
/// percentile-bootstrap intervals. With `strict`, errored results are
/// dropped; otherwise they count as unknown.
pub fn compute_metrics(
    results: &[EvalResult],
    seed: u64,
    resamples: usize,
    strict: bool,
) -> Result<MetricsReport, QaError> {
    if resamples == 0 {
        return Err(QaError::Input("bootstrap needs at least one resample".into()));
    }
    for r in results {
        if r.correct && r.predicted.is_unknown() {
            return Err(QaError::Input(format!("{}: unknown prediction marked correct", r.question_id)));
        }
    }
    let errored = results.iter().filter(|r| r.errored).count();
    let scored: Vec<&EvalResult> = results.iter().filter(|r| !(strict && r.errored)).collect();
    if scored.is_empty() {
        return Err(QaError::Input("no results to score".into()));
    }
    let flags = |rs: &[&EvalResult]| -> Vec<[bool; 2]> {
        rs.iter().map(|r| [r.correct, r.predicted.is_unknown()]).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [accuracy, no_evidence_rate] = bootstrap(&flags(&scored), resamples, &mut rng);

    let mut per_dimension = BTreeMap::new();
    for c in Capability::ALL {
        let rs: Vec<&EvalResult> = scored.iter().copied().filter(|r| r.capability == Some(c)).collect();
        let accuracy = (!rs.is_empty()).then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c.index() as u64 + 1);
            bootstrap(&flags(&rs), resamples, &mut rng)[0]
        });
        per_dimension.insert(c, DimensionMetrics { n: rs.len(), accuracy });
    }
    Ok(MetricsReport {
        n: scored.len(),
        accuracy,
        no_evidence_rate,
        per_dimension,
        errored,
        excluded: results.len() - scored.len(),
        resamples,
        seed,
    })
}

/// Plain-text table of the report, percentages with one decimal.
pub fn render_table(report: &MetricsReport) -> String {
    let pct = |x: f64| format!("{:.1}", x * 100.0);
    let row = |name: &str, n: usize, e: Option<&Estimate>| match e {
        Some(e) => format!(
            "{name:<24} {n:>6} {:>8} [{:>5}, {:>5}]\n",
            pct(e.value),
            pct(e.ci_low),
            pct(e.ci_high)
        ),
        None => format!("{name:<24} {n:>6} {:>8}\n", "-"),
    };
    let mut out = format!("{:<24} {:>6} {:>8} {:>14}\n", "dimension", "n", "acc %", "95% CI");
    for (c, d) in &report.per_dimension {
        out.push_str(&row(c.name(), d.n, d.accuracy.as_ref()));
    }
    out.push_str(&row("overall", report.n, Some(&report.accuracy)));
    out.push_str(&row("no-evidence rate", report.n, Some(&report.no_evidence_rate)));
    if report.errored > 0 {
        let _ = writeln!(out, "errored: {} (excluded: {})", report.errored, report.excluded);
    }
    out
}
