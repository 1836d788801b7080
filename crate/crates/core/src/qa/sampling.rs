//! Budget allocation across capability dimensions and stratified,
//! seeded sampling within each dimension.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::filter::{run_filters, FilterReport, UnknownRule};
use super::types::{Capability, QaQuestion, VoteRecord};
use super::QaError;

/// Target share of each difficulty, in percent, easy first.
pub const MIXTURE_PERCENT: [usize; 4] = [30, 35, 25, 10];

/// Questions per dimension for a total budget `n`. Dimensions that cannot
/// reach the common level get everything they have; the rest differ by at
/// most one, with the extra questions going to the dimensions with the most
/// available questions first (ties by name).
pub fn allocate_budget(
    available: &BTreeMap<Capability, [usize; 4]>,
    n: usize,
) -> Result<BTreeMap<Capability, usize>, QaError> {
    let avail: Vec<(Capability, usize)> = Capability::ALL
        .iter()
        .map(|&c| (c, available.get(&c).map_or(0, |d| d.iter().sum())))
        .collect();
    let total: usize = avail.iter().map(|(_, a)| a).sum();
    if n > total {
        return Err(QaError::Allocation(format!(
            "budget {n} exceeds the {total} questions available"
        )));
    }
    let filled = |level: usize| -> usize { avail.iter().map(|(_, a)| (*a).min(level)).sum() };
    // largest level whose water-fill stays within budget
    let (mut lo, mut hi) = (0usize, avail.iter().map(|(_, a)| *a).max().unwrap_or(0));
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if filled(mid) <= n {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let level = lo;
    let mut alloc: BTreeMap<Capability, usize> = avail.iter().map(|&(c, a)| (c, a.min(level))).collect();
    let mut remaining = n - filled(level);
    let mut open: Vec<(Capability, usize)> = avail.iter().copied().filter(|&(_, a)| a > level).collect();
    open.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.name().cmp(y.0.name())));
    for (c, _) in open {
        if remaining == 0 {
            break;
        }
        *alloc.get_mut(&c).expect("present") += 1;
        remaining -= 1;
    }
    debug_assert_eq!(remaining, 0);
    Ok(alloc)
}

/// Largest-remainder integerization of `quota` over [`MIXTURE_PERCENT`].
/// Equal remainders favour the easier difficulty.
pub fn difficulty_targets(quota: usize) -> [usize; 4] {
    let mut counts = [0usize; 4];
    let mut rems = [(0usize, 0usize); 4];
    for (i, p) in MIXTURE_PERCENT.iter().enumerate() {
        counts[i] = quota * p / 100;
        rems[i] = (quota * p % 100, i);
    }
    let short = quota - counts.iter().sum::<usize>();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rems.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Caps each target at what is available and moves the shortfall to the
/// nearest difficulty with spare questions, the easier one on ties.
pub fn backfill(targets: [usize; 4], available: [usize; 4]) -> Result<[usize; 4], QaError> {
    let quota: usize = targets.iter().sum();
    let total: usize = available.iter().sum();
    if quota > total {
        return Err(QaError::Sampling(format!("quota {quota} exceeds {total} candidates")));
    }
    let mut counts: [usize; 4] = std::array::from_fn(|i| targets[i].min(available[i]));
    let shortfall: [usize; 4] = std::array::from_fn(|i| targets[i] - counts[i]);
    for d in 0..4 {
        let mut short = shortfall[d];
        for dist in 1..4 {
            for j in [d.checked_sub(dist), Some(d + dist).filter(|&j| j < 4)].into_iter().flatten() {
                let take = short.min(available[j] - counts[j]);
                counts[j] += take;
                short -= take;
            }
            if short == 0 {
                break;
            }
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionSample {
    pub targets: [usize; 4],
    pub counts: [usize; 4],
    /// Selected ids, grouped by difficulty and sorted within each group.
    pub selected: Vec<String>,
}

/// Draws `quota` questions from the per-difficulty candidate ids. The
/// draw depends only on the candidate sets, `seed` and `stream`.
pub fn sample_within_dimension(
    candidates: &[Vec<String>; 4],
    quota: usize,
    seed: u64,
    stream: u64,
) -> Result<DimensionSample, QaError> {
    let available: [usize; 4] = std::array::from_fn(|i| candidates[i].len());
    let targets = difficulty_targets(quota);
    let counts = backfill(targets, available)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut selected = Vec::with_capacity(quota);
    for (pool, &k) in candidates.iter().zip(&counts) {
        let mut ids: Vec<&String> = pool.iter().collect();
        ids.sort();
        let mut picked: Vec<String> = index::sample(&mut rng, ids.len(), k)
            .into_iter()
            .map(|i| ids[i].clone())
            .collect();
        picked.sort();
        selected.extend(picked);
    }
    Ok(DimensionSample { targets, counts, selected })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub budget: usize,
    pub seed: u64,
    pub unknown_rule: UnknownRule,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            budget: 1000,
            seed: 0,
            unknown_rule: UnknownRule::Strict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    pub available: [usize; 4],
    pub allocated: usize,
    pub targets: [usize; 4],
    pub selected: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub budget: usize,
    pub seed: u64,
    pub dimensions: BTreeMap<Capability, DimensionSummary>,
    pub filter: FilterReport,
    pub questions: Vec<QaQuestion>,
}

/// Filters the pool with the recorded votes and samples the benchmark.
pub fn build_benchmark(
    mut pool: Vec<QaQuestion>,
    votes: &[VoteRecord],
    cfg: &BuildConfig,
) -> Result<Benchmark, QaError> {
    let mut seen = BTreeSet::new();
    if let Some(dup) = pool.iter().find(|q| !seen.insert(q.question_id.clone())) {
        return Err(QaError::Input(format!("duplicate question id {}", dup.question_id)));
    }
    let filter = run_filters(&mut pool, votes, cfg.unknown_rule)?;

    let mut by_dim: BTreeMap<Capability, [Vec<String>; 4]> = BTreeMap::new();
    for q in pool.iter().filter(|q| q.filter_state.is_retained()) {
        let (Some(c), Some(d)) = (q.capability, q.difficulty) else {
            continue;
        };
        by_dim.entry(c).or_default()[d.index()].push(q.question_id.clone());
    }
    let available: BTreeMap<Capability, [usize; 4]> = by_dim
        .iter()
        .map(|(&c, lists)| (c, std::array::from_fn(|i| lists[i].len())))
        .collect();
    let alloc = allocate_budget(&available, cfg.budget)?;

    let mut chosen = BTreeSet::new();
    let mut dimensions = BTreeMap::new();
    for c in Capability::ALL {
        let lists = by_dim.remove(&c).unwrap_or_default();
        let quota = alloc[&c];
        let sample = sample_within_dimension(&lists, quota, cfg.seed, c.index() as u64)?;
        chosen.extend(sample.selected);
        dimensions.insert(
            c,
            DimensionSummary {
                available: available.get(&c).copied().unwrap_or_default(),
                allocated: quota,
                targets: sample.targets,
                selected: sample.counts,
            },
        );
    }
    let mut questions: Vec<QaQuestion> = pool.into_iter().filter(|q| chosen.contains(&q.question_id)).collect();
    questions.sort_by(|a, b| {
        (a.capability, a.difficulty, &a.question_id).cmp(&(b.capability, b.difficulty, &b.question_id))
    });
    Ok(Benchmark {
        budget: cfg.budget,
        seed: cfg.seed,
        dimensions,
        filter,
        questions,
    })
}
