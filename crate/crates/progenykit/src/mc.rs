//! Deterministic, seedable Monte Carlo engine.
//!
//! Every sample index derives its own random stream from `(seed, index)`, so
//! batches can be split across threads in contiguous index ranges and merged
//! in order with bit-identical results for any thread count.
//!
//! Besides hitting times and branching trajectories, the walk simulator
//! extracts the per-level down-crossing/stay counts whose generations form
//! the embedded 2-type branching process, and checks the pathwise identity
//! `T = 1 + sum_i (2 U1_i + U2_i)` exactly in integer arithmetic.

use std::io::{self, Read, Write};

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::gwmodel::{GWModel, OffspringSpec};
use crate::walks::{HittingTimeDist, WalkError, WalkSpec};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 stream addressed by `(seed, index)`.
///
/// The state advances by an odd constant, so each stream has full 2^64
/// period; the double mix of `(seed, index)` places streams at effectively
/// random phases of the cycle.
#[derive(Clone, Debug)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    pub fn new(seed: u64, index: u64) -> Self {
        let state = mix64(seed ^ mix64(index.wrapping_mul(GOLDEN).wrapping_add(GOLDEN)));
        Self { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[inline]
fn sample_step(spec: &WalkSpec, u: f64) -> i64 {
    match spec {
        WalkSpec::Simple { p } => {
            if u < *p {
                1
            } else {
                -1
            }
        }
        WalkSpec::Stay { p, q, .. } => {
            if u < *p {
                1
            } else if u < p + q {
                -1
            } else {
                0
            }
        }
        WalkSpec::TwoOne { p, q1, .. } => {
            if u < *p {
                1
            } else if u < p + q1 {
                -1
            } else {
                -2
            }
        }
        WalkSpec::General { down, up } => {
            let mut acc = 0.0;
            for (i, pr) in up.iter().enumerate() {
                acc += pr;
                if u < acc {
                    return (i + 1) as i64;
                }
            }
            for (i, pr) in down.iter().enumerate() {
                acc += pr;
                if u < acc {
                    return -((i + 1) as i64);
                }
            }
            -(down.len() as i64)
        }
    }
}

/// One simulated first-passage path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    /// Jump increments, in order, up to and including the hitting step (or
    /// up to the horizon when the walk never reached level 1).
    pub steps: Vec<i64>,
    /// First-passage time of level >= 1, `None` on horizon overflow.
    pub t: Option<u64>,
    /// `(U1, U2)` per level: entry `d` counts at level `-d`. For the stay
    /// walk these are down-steps from and stays at the level; for the (2-1)
    /// walk they are the crossings of the gap below the level (landing
    /// exactly / jumping past). Empty for general walks.
    pub u_counts: Vec<(u64, u64)>,
}

impl PathSample {
    /// Generation sequence of the embedded branching process: the seeded
    /// root `(1,0)` followed by the per-level counts, trailing zero levels
    /// trimmed.
    pub fn generations(&self) -> Vec<(u64, u64)> {
        generations_from_counts(&self.u_counts)
    }
}

fn generations_from_counts(u_counts: &[(u64, u64)]) -> Vec<(u64, u64)> {
    let mut gens = Vec::with_capacity(u_counts.len() + 1);
    gens.push((1u64, 0u64));
    let last_nonzero = u_counts
        .iter()
        .rposition(|&(a, b)| a != 0 || b != 0)
        .map_or(0, |i| i + 1);
    gens.extend_from_slice(&u_counts[..last_nonzero]);
    gens
}

/// How the per-level counts are read off a path, by walk kind.
#[derive(Clone, Copy, PartialEq)]
enum CountKind {
    /// Stay/simple walks: U1 = down-steps from the level, U2 = stays at it.
    DownAndStay,
    /// (2-1) walks: U1 = jumps landing just below the gap at the level,
    /// U2 = jumps passing over it.
    GapCrossings,
    /// General walks: no extraction is built.
    None,
}

impl CountKind {
    fn of(spec: &WalkSpec) -> Self {
        match spec {
            WalkSpec::Simple { .. } | WalkSpec::Stay { .. } => CountKind::DownAndStay,
            WalkSpec::TwoOne { .. } => CountKind::GapCrossings,
            WalkSpec::General { .. } => CountKind::None,
        }
    }

    /// Books one transition taken from position `pos` (always <= 0 before the
    /// first passage for the structured kinds).
    #[inline]
    fn record(self, pos: i64, step: i64, counts: &mut Vec<(u64, u64)>) {
        let at = |d: i64, counts: &mut Vec<(u64, u64)>| -> usize {
            debug_assert!(d >= 0);
            let d = d as usize;
            if d >= counts.len() {
                counts.resize(d + 1, (0, 0));
            }
            d
        };
        match self {
            CountKind::DownAndStay => match step {
                -1 => {
                    let d = at(-pos, counts);
                    counts[d].0 += 1;
                }
                0 => {
                    let d = at(-pos, counts);
                    counts[d].1 += 1;
                }
                _ => {}
            },
            CountKind::GapCrossings => match step {
                -1 => {
                    // lands on pos-1: one crossing of the gap labelled pos
                    let d = at(-pos, counts);
                    counts[d].0 += 1;
                }
                -2 => {
                    // jumps past pos-1 (gap labelled pos) and lands on pos-2
                    // (gap labelled pos-1)
                    let d = at(-pos, counts);
                    counts[d].1 += 1;
                    let d = at(-pos + 1, counts);
                    counts[d].0 += 1;
                }
                _ => {}
            },
            CountKind::None => {}
        }
    }
}

/// Extracts the per-level branching counts from a step sequence.
pub fn u_counts_from_steps(spec: &WalkSpec, steps: &[i64]) -> Vec<(u64, u64)> {
    let kind = CountKind::of(spec);
    let mut counts: Vec<(u64, u64)> = Vec::new();
    let mut pos: i64 = 0;
    for &step in steps {
        kind.record(pos, step, &mut counts);
        pos += step;
    }
    counts
}

/// Single-pass walk that books level counts as it goes, without storing the
/// step sequence; the workhorse of the batch verifiers.
fn walk_with_counts(
    spec: &WalkSpec,
    horizon: u64,
    rng: &mut StreamRng,
) -> (Option<u64>, Vec<(u64, u64)>) {
    let kind = CountKind::of(spec);
    let mut counts = Vec::new();
    let mut pos: i64 = 0;
    for n in 1..=horizon {
        let step = sample_step(spec, rng.next_f64());
        kind.record(pos, step, &mut counts);
        pos += step;
        if pos >= 1 {
            return (Some(n), counts);
        }
    }
    (None, counts)
}

/// Simulates one path with the stream `(seed, 0)`.
pub fn simulate_walk(spec: &WalkSpec, horizon: u64, seed: u64) -> PathSample {
    simulate_walk_indexed(spec, horizon, seed, 0)
}

/// Simulates the path of sample `index` under `seed`.
pub fn simulate_walk_indexed(spec: &WalkSpec, horizon: u64, seed: u64, index: u64) -> PathSample {
    assert!(horizon >= 1);
    let mut rng = StreamRng::new(seed, index);
    let mut steps = Vec::new();
    let mut pos: i64 = 0;
    let mut t = None;
    for n in 1..=horizon {
        let step = sample_step(spec, rng.next_f64());
        steps.push(step);
        pos += step;
        if pos >= 1 {
            t = Some(n);
            break;
        }
    }
    let u_counts = u_counts_from_steps(spec, &steps);
    PathSample { steps, t, u_counts }
}

/// `T = 1 + sum_i (2 U1_i + U2_i)`, checked exactly. The sample must have
/// finite `T`.
pub fn verify_branching_identity(sample: &PathSample) -> bool {
    let t = sample
        .t
        .expect("identity applies to finite first-passage times");
    let total: u64 = sample.u_counts.iter().map(|&(a, b)| 2 * a + b).sum();
    t == 1 + total
}

/// Identity check over a batch of paths.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub samples: u64,
    pub finite: u64,
    pub violations: u64,
}

pub fn verify_identity_batch(
    spec: &WalkSpec,
    n_samples: u64,
    horizon: u64,
    seed: u64,
) -> IdentityReport {
    let mut finite = 0;
    let mut violations = 0;
    for index in 0..n_samples {
        let mut rng = StreamRng::new(seed, index);
        let (t, u_counts) = walk_with_counts(spec, horizon, &mut rng);
        if let Some(t) = t {
            finite += 1;
            let total: u64 = u_counts.iter().map(|&(a, b)| 2 * a + b).sum();
            if t != 1 + total {
                violations += 1;
            }
        }
    }
    IdentityReport {
        samples: n_samples,
        finite,
        violations,
    }
}

#[inline]
fn hitting_time(spec: &WalkSpec, horizon: u64, rng: &mut StreamRng) -> Option<u64> {
    let mut pos: i64 = 0;
    for n in 1..=horizon {
        pos += sample_step(spec, rng.next_f64());
        if pos >= 1 {
            return Some(n);
        }
    }
    None
}

/// Raw hitting-time histogram: `counts[n]` paths hit at time `n`, `overflow`
/// paths never hit within the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct HitHistogram {
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub samples: u64,
}

impl HitHistogram {
    /// Merges a histogram of the next contiguous index range into this one.
    pub fn merge(&mut self, other: &HitHistogram) {
        assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.samples += other.samples;
    }

    pub fn to_dist(&self) -> HittingTimeDist {
        let n = self.samples.max(1) as f64;
        HittingTimeDist {
            probs: self.counts.iter().map(|&c| c as f64 / n).collect(),
            defect: self.overflow as f64 / n,
        }
    }
}

/// Histogram over the sample index range `lo..hi`.
pub fn empirical_hitting_range(
    spec: &WalkSpec,
    lo: u64,
    hi: u64,
    horizon: u64,
    seed: u64,
) -> HitHistogram {
    let mut counts = vec![0u64; horizon as usize + 1];
    let mut overflow = 0;
    for index in lo..hi {
        let mut rng = StreamRng::new(seed, index);
        match hitting_time(spec, horizon, &mut rng) {
            Some(t) => counts[t as usize] += 1,
            None => overflow += 1,
        }
    }
    HitHistogram {
        counts,
        overflow,
        samples: hi - lo,
    }
}

/// Frequency histogram of `T` over `n_samples` paths; deterministic for a
/// fixed seed.
pub fn empirical_hitting(
    spec: &WalkSpec,
    n_samples: u64,
    horizon: u64,
    seed: u64,
) -> HittingTimeDist {
    empirical_hitting_range(spec, 0, n_samples, horizon, seed).to_dist()
}

/// Same histogram computed on up to `threads` worker threads. Chunks are
/// contiguous index ranges merged in order, so the result is bit-identical
/// for every thread count.
pub fn empirical_hitting_parallel(
    spec: &WalkSpec,
    n_samples: u64,
    horizon: u64,
    seed: u64,
    threads: usize,
) -> HitHistogram {
    let threads = threads.clamp(1, n_samples.clamp(1, 64) as usize);
    if threads == 1 {
        return empirical_hitting_range(spec, 0, n_samples, horizon, seed);
    }
    let chunk = n_samples.div_ceil(threads as u64);
    let partials: Vec<HitHistogram> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads as u64)
            .map(|t| {
                let lo = t * chunk;
                let hi = (lo + chunk).min(n_samples);
                scope.spawn(move || empirical_hitting_range(spec, lo, hi, horizon, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut merged = partials[0].clone();
    for part in &partials[1..] {
        merged.merge(part);
    }
    merged
}

/// One realization of a branching process.
#[derive(Clone, Debug, PartialEq)]
pub struct GWTrajectory {
    /// `Z_0, Z_1, ...` until extinction (final zero generation included) or
    /// overflow (last generation may be partially sampled).
    pub generations: Vec<Vec<u64>>,
    /// Componentwise total progeny; a lower bound when `overflowed`.
    pub total: Vec<u64>,
    pub overflowed: bool,
}

/// Draws one offspring brood and adds it to `out`.
pub fn sample_offspring(spec: &OffspringSpec, rng: &mut StreamRng, out: &mut [u64]) {
    match spec {
        OffspringSpec::Table { entries } => {
            let u = rng.next_f64();
            let mut acc = 0.0;
            let mut chosen = entries.len() - 1;
            for (i, (_, p)) in entries.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            for (o, n) in out.iter_mut().zip(&entries[chosen].0) {
                *o += *n as u64;
            }
        }
        OffspringSpec::Geometric { p, q, shift } => {
            // Each draw independently stops with probability p or emits one
            // child of type j with probability q_j; this reproduces the
            // negative-multinomial law (a+b)!/(a!b!) q1^a q2^b p exactly.
            loop {
                let u = rng.next_f64();
                if u < *p {
                    break;
                }
                let mut acc = *p;
                let mut typed = q.len() - 1;
                for (j, qj) in q.iter().enumerate() {
                    acc += qj;
                    if u < acc {
                        typed = j;
                        break;
                    }
                }
                out[typed] += 1;
            }
            if *shift == 1 {
                out[0] += 1;
            }
        }
    }
}

/// Simulates generations from a single ancestor of the given type until
/// extinction or until the running total exceeds `max_individuals`
/// (overflow is data, not an error).
pub fn simulate_gw(
    model: &GWModel,
    ancestor: usize,
    max_individuals: u64,
    seed: u64,
) -> GWTrajectory {
    simulate_gw_indexed(model, ancestor, max_individuals, seed, 0)
}

pub fn simulate_gw_indexed(
    model: &GWModel,
    ancestor: usize,
    max_individuals: u64,
    seed: u64,
    index: u64,
) -> GWTrajectory {
    assert!(ancestor < model.types());
    let types = model.types();
    let mut rng = StreamRng::new(seed, index);
    let mut root = vec![0u64; types];
    root[ancestor] = 1;
    let mut total = root.clone();
    let mut running: u64 = 1;
    let mut generations = vec![root];
    let mut overflowed = false;
    'outer: loop {
        let current = generations.last().unwrap().clone();
        if current.iter().all(|&z| z == 0) {
            break;
        }
        let mut next = vec![0u64; types];
        for (i, &count) in current.iter().enumerate() {
            for _ in 0..count {
                sample_offspring(&model.specs()[i], &mut rng, &mut next);
                let produced: u64 = next.iter().sum();
                if running + produced > max_individuals {
                    overflowed = true;
                    for (t, n) in total.iter_mut().zip(&next) {
                        *t += n;
                    }
                    generations.push(next);
                    break 'outer;
                }
            }
        }
        running += next.iter().sum::<u64>();
        for (t, n) in total.iter_mut().zip(&next) {
            *t += n;
        }
        generations.push(next);
    }
    GWTrajectory {
        generations,
        total,
        overflowed,
    }
}

/// Fraction of runs that die out before exceeding `max_individuals`.
pub fn extinction_frequency(
    model: &GWModel,
    ancestor: usize,
    runs: u64,
    max_individuals: u64,
    seed: u64,
) -> f64 {
    let mut extinct = 0u64;
    for index in 0..runs {
        if !simulate_gw_indexed(model, ancestor, max_individuals, seed, index).overflowed {
            extinct += 1;
        }
    }
    extinct as f64 / runs.max(1) as f64
}

const FIT_SUPPORT: usize = 8; // chi-square support: offspring pairs with a+b <= 8

/// Chi-square goodness-of-fit summary against a theoretical offspring law.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareFit {
    pub statistic: f64,
    pub dof: usize,
    /// 99.9% quantile of the chi-square with `dof` degrees of freedom.
    pub critical: f64,
    pub samples: u64,
    /// Cells whose expected count fell below 5 and were pooled.
    pub merged_cells: usize,
    pub pass: bool,
}

/// Fit of the type-2 offspring law, whose shape differs between walk kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum Type2Fit {
    /// Stay walk: a type-2 parent always produces the empty brood.
    Sterile { samples: u64, all_empty: bool },
    /// (2-1) walk: the type-1 count is shifted up by one deterministic child.
    Shifted {
        fit: ChiSquareFit,
        first_component_always_positive: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OffspringFitReport {
    pub type1: ChiSquareFit,
    pub type2: Type2Fit,
}

impl OffspringFitReport {
    pub fn pass(&self) -> bool {
        self.type1.pass
            && match &self.type2 {
                Type2Fit::Sterile { all_empty, .. } => *all_empty,
                Type2Fit::Shifted {
                    fit,
                    first_component_always_positive,
                } => fit.pass && *first_component_always_positive,
            }
    }
}

/// Collects the empirical offspring distribution of single-particle levels
/// from simulated paths and tests it against the embedded branching law.
pub fn offspring_law_report(
    spec: &WalkSpec,
    n_samples: u64,
    horizon: u64,
    seed: u64,
) -> Result<OffspringFitReport, WalkError> {
    let (qa, qb, p) = match spec {
        WalkSpec::Simple { p } => (1.0 - p, 0.0, *p),
        WalkSpec::Stay { p, q, r } => (*q, *r, *p),
        WalkSpec::TwoOne { p, q1, q2 } => (*q1, *q2, *p),
        WalkSpec::General { .. } => {
            return Err(WalkError::Descriptor(
                "no branching-structure extraction is built for general walks".into(),
            ))
        }
    };
    let law1 = |a: usize, b: usize| binomial(a + b, a) * qa.powi(a as i32) * qb.powi(b as i32) * p;

    let mut tally1 = Tally::new();
    let mut tally2 = Tally::new();
    let mut type2_first_positive = true;
    let mut type2_all_empty = true;
    for index in 0..n_samples {
        let mut rng = StreamRng::new(seed, index);
        let (t, u_counts) = walk_with_counts(spec, horizon, &mut rng);
        if t.is_none() {
            continue;
        }
        let gens = generations_from_counts(&u_counts);
        for w in 0..gens.len() {
            let parent = gens[w];
            let child = gens.get(w + 1).copied().unwrap_or((0, 0));
            if parent == (1, 0) {
                tally1.record(child);
            } else if parent == (0, 1) {
                tally2.record(child);
                if child.0 == 0 {
                    type2_first_positive = false;
                }
                if child != (0, 0) {
                    type2_all_empty = false;
                }
            }
        }
    }

    let type1 = tally1.chi_square(law1);
    let type2 = match spec {
        WalkSpec::TwoOne { .. } => {
            let law2 = |a: usize, b: usize| if a == 0 { 0.0 } else { law1(a - 1, b) };
            Type2Fit::Shifted {
                fit: tally2.chi_square(law2),
                first_component_always_positive: type2_first_positive,
            }
        }
        _ => Type2Fit::Sterile {
            samples: tally2.total,
            all_empty: type2_all_empty,
        },
    };
    Ok(OffspringFitReport { type1, type2 })
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut result = 1.0;
    for i in 0..k.min(n - k) {
        result = result * (n - i) as f64 / (i + 1) as f64;
    }
    result
}

struct Tally {
    cells: [[u64; FIT_SUPPORT + 1]; FIT_SUPPORT + 1],
    rest: u64,
    total: u64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            cells: [[0; FIT_SUPPORT + 1]; FIT_SUPPORT + 1],
            rest: 0,
            total: 0,
        }
    }

    fn record(&mut self, child: (u64, u64)) {
        let (a, b) = (child.0 as usize, child.1 as usize);
        if a + b <= FIT_SUPPORT {
            self.cells[a][b] += 1;
        } else {
            self.rest += 1;
        }
        self.total += 1;
    }

    fn chi_square(&self, law: impl Fn(usize, usize) -> f64) -> ChiSquareFit {
        let n = self.total as f64;
        let mut statistic = 0.0;
        let mut kept = 0usize;
        let mut merged = 0usize;
        let mut rest_observed = self.rest;
        let mut rest_expected = n;
        for a in 0..=FIT_SUPPORT {
            for b in 0..=(FIT_SUPPORT - a) {
                let expected = n * law(a, b);
                if expected >= 5.0 {
                    let observed = self.cells[a][b] as f64;
                    statistic += (observed - expected) * (observed - expected) / expected;
                    rest_expected -= expected;
                    kept += 1;
                } else {
                    rest_observed += self.cells[a][b];
                    merged += 1;
                }
            }
        }
        let mut cells = kept;
        if rest_expected > 0.5 || rest_observed > 0 {
            let rest_expected = rest_expected.max(f64::MIN_POSITIVE);
            let diff = rest_observed as f64 - rest_expected;
            statistic += diff * diff / rest_expected;
            cells += 1;
        }
        let dof = cells.saturating_sub(1).max(1);
        let critical = ChiSquared::new(dof as f64)
            .expect("valid dof")
            .inverse_cdf(0.999);
        ChiSquareFit {
            statistic,
            dof,
            critical,
            samples: self.total,
            merged_cells: merged,
            pass: statistic <= critical,
        }
    }
}

/// Writes a histogram as a length-prefixed array of little-endian u64 counts.
pub fn write_histogram_binary<W: Write>(mut w: W, counts: &[u64]) -> io::Result<()> {
    w.write_all(&(counts.len() as u64).to_le_bytes())?;
    for &c in counts {
        w.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a histogram written by [`write_histogram_binary`].
pub fn read_histogram_binary<R: Read>(mut r: R) -> io::Result<Vec<u64>> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let len = u64::from_le_bytes(buf) as usize;
    let mut counts = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        counts.push(u64::from_le_bytes(buf));
    }
    Ok(counts)
}
