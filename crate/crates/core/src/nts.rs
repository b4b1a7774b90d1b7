//! Natural type selection iterations.
//!
//! * [`nts_original_run`]: one d-match per iteration, the matching codeword's
//!   type becomes the next codebook distribution.
//! * [`nts_modified_run`]: `K` d-matches per iteration, the next distribution
//!   is the average of their M-th order types.
//! * [`nts_markov_run`]: `K` d-matches against a Markov codebook, the next
//!   transition matrix is the maximum-likelihood estimate from the matching
//!   codewords' transition counts.
//!
//! Match `k` of iteration `n` searches its own codebook realization seeded by
//! `sub_seed(master, n, k, Codebook)`, and the source word it encodes comes
//! from a [`SourceWords`] provider. The `K` searches of an iteration run on the
//! current rayon pool; results are reduced in match order so traces do not
//! depend on the worker count.

use rayon::prelude::*;

use crate::codebook::{d_match_search, CodebookSpec, MatchRecord};
use crate::distortion::DistortionMeasure;
use crate::error::{NtsError, Result};
use crate::markov::{state_index, MarkovModel, Word};
use crate::seed::{stream_rng, sub_seed, StreamRole};

/// Default additive smoothing of the ML update.
pub const DEFAULT_SMOOTHING: f64 = 1e-3;

/// Empirical distribution of non-overlapping `order`-letter blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MType {
    counts: Vec<u64>,
    denominator: u64,
}

impl MType {
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of blocks `L`; every probability is a multiple of `1 / L`.
    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let l = self.denominator as f64;
        self.counts.iter().map(|&c| c as f64 / l).collect()
    }

    pub fn has_zeros(&self) -> bool {
        self.counts.contains(&0)
    }
}

pub fn m_type(y: &Word, order: usize, alphabet_size: usize) -> Result<MType> {
    let order = order.max(1);
    if !y.len().is_multiple_of(order) {
        return Err(NtsError::Divisibility { len: y.len(), order });
    }
    y.check_alphabet(crate::markov::Alphabet::new(alphabet_size)?)?;
    let mut counts = vec![0u64; alphabet_size.pow(order as u32)];
    for block in y.letters().chunks(order) {
        counts[state_index(block, alphabet_size)] += 1;
    }
    Ok(MType {
        counts,
        denominator: (y.len() / order) as u64,
    })
}

/// Counts of consecutive state transitions, stored as `state x next letter`.
///
/// For an order-`M` chain the successor of state `i` on letter `a` is the
/// unique state `j` whose last letter is `a`, so `|S| x |Y|` holds exactly the
/// nonzero entries of the `|S| x |S|` transition count matrix; see
/// [`TransitionCounts::state_transition`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    alphabet_size: usize,
    order: usize,
    counts: Vec<u64>,
}

impl TransitionCounts {
    pub fn zeros(alphabet_size: usize, order: usize) -> Self {
        Self {
            alphabet_size,
            order,
            counts: vec![0; alphabet_size.pow(order as u32) * alphabet_size],
        }
    }

    pub fn num_states(&self) -> usize {
        self.counts.len() / self.alphabet_size
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `N(state -> letter)`.
    pub fn count(&self, state: usize, letter: usize) -> u64 {
        self.counts[state * self.alphabet_size + letter]
    }

    /// `N(i -> j)` between states; zero when `j` is not a successor of `i`.
    pub fn state_transition(&self, from: usize, to: usize) -> u64 {
        let n = self.alphabet_size;
        let states = self.num_states();
        let letter = to % n;
        if (from * n + letter) % states == to {
            self.count(from, letter)
        } else {
            0
        }
    }

    pub fn total_from(&self, state: usize) -> u64 {
        let n = self.alphabet_size;
        self.counts[state * n..(state + 1) * n].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, other: &TransitionCounts) {
        assert_eq!(self.counts.len(), other.counts.len(), "count shapes differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Builds counts from explicit `|S| x |Y|` entries.
    pub fn from_rows(order: usize, rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        let mut c = Self::zeros(n, order);
        if rows.len() != c.num_states() || rows.iter().any(|r| r.len() != n) {
            return Err(NtsError::Shape(format!(
                "order {order} counts need {} rows of {n}",
                c.num_states()
            )));
        }
        c.counts = rows.concat();
        Ok(c)
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.alphabet_size)
            .map(<[u64]>::to_vec)
            .collect()
    }
}

/// Transitions between overlapping `order`-letter windows of `y`.
pub fn transition_counts(y: &Word, order: usize, alphabet_size: usize) -> Result<TransitionCounts> {
    let min = order + 1;
    if y.len() < min {
        return Err(NtsError::Length { len: y.len(), min });
    }
    y.check_alphabet(crate::markov::Alphabet::new(alphabet_size)?)?;
    let mut counts = TransitionCounts::zeros(alphabet_size, order);
    accumulate_transitions(y.letters(), &mut counts);
    Ok(counts)
}

fn accumulate_transitions(letters: &[usize], counts: &mut TransitionCounts) {
    let n = counts.alphabet_size;
    let order = counts.order;
    let states = counts.num_states();
    let mut state = state_index(&letters[..order], n);
    for &letter in &letters[order..] {
        counts.counts[state * n + letter] += 1;
        state = (state * n + letter) % states;
    }
}

/// Maximum-likelihood transition rows from accumulated counts:
/// `Q(a | i) = (N(i -> a) + ε) / (Σ_a' N(i -> a') + ε |Y|)`.
pub fn ml_transition_update(counts: &TransitionCounts, smoothing: f64) -> Result<Vec<Vec<f64>>> {
    let n = counts.alphabet_size;
    let mut rows = Vec::with_capacity(counts.num_states());
    for state in 0..counts.num_states() {
        let total = counts.total_from(state) as f64 + smoothing * n as f64;
        if total <= 0.0 {
            return Err(NtsError::EmptyRow(state));
        }
        rows.push(
            (0..n)
                .map(|a| (counts.count(state, a) as f64 + smoothing) / total)
                .collect(),
        );
    }
    Ok(rows)
}

/// Provider of the source word encoded by match `matched` of iteration
/// `iteration` (both 1-based).
pub trait SourceWords: Sync {
    fn word(&self, iteration: usize, matched: usize) -> Result<Word>;

    /// Whether words are mutually independent, as the convergence results
    /// assume.
    fn independent(&self) -> bool {
        true
    }
}

/// Pre-sampled words consumed in order, `depth` per iteration.
#[derive(Debug, Clone)]
pub struct WordList {
    pub words: Vec<Word>,
    pub depth: usize,
}

impl WordList {
    pub fn new(words: Vec<Word>, depth: usize) -> Self {
        Self { words, depth }
    }
}

impl SourceWords for WordList {
    fn word(&self, iteration: usize, matched: usize) -> Result<Word> {
        let i = (iteration - 1) * self.depth + (matched - 1);
        self.words.get(i).cloned().ok_or(NtsError::Length {
            len: self.words.len(),
            min: i + 1,
        })
    }
}

/// Fresh independent words drawn from a seeded source.
#[derive(Debug, Clone)]
pub enum SampledSource {
    /// Words of `letters` letters from a Markov model.
    Markov { model: MarkovModel, letters: usize, seed: u64 },
    /// Words of `blocks` i.i.d. super-symbols drawn from `p` (over
    /// `|X|^order`).
    IidBlocks {
        p: Vec<f64>,
        order: usize,
        alphabet_size: usize,
        blocks: usize,
        seed: u64,
    },
}

impl SourceWords for SampledSource {
    fn word(&self, iteration: usize, matched: usize) -> Result<Word> {
        match self {
            SampledSource::Markov { model, letters, seed } => {
                let mut rng = stream_rng(sub_seed(*seed, iteration as u64, matched as u64, StreamRole::Source));
                model.sample_word(*letters, &mut rng)
            }
            SampledSource::IidBlocks {
                p,
                order,
                alphabet_size,
                blocks,
                seed,
            } => {
                // reuse the i.i.d. codebook generator with the source stream
                let s = sub_seed(*seed, iteration as u64, matched as u64, StreamRole::Source);
                let spec = CodebookSpec::iid(p, *order, *alphabet_size, *blocks, s)?;
                Ok(crate::codebook::codeword_at(&spec, 1))
            }
        }
    }
}

/// Consecutive blocks of one long realization. Blocks are dependent, so
/// runs driven by this source do not satisfy the independence assumption.
#[derive(Debug, Clone)]
pub struct StreamingSource {
    realization: Word,
    letters: usize,
    depth: usize,
}

impl StreamingSource {
    pub fn new(model: &MarkovModel, letters: usize, depth: usize, iterations: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(sub_seed(seed, 0, 0, StreamRole::Source));
        let realization = model.sample_word(letters * depth * iterations, &mut rng)?;
        Ok(Self {
            realization,
            letters,
            depth,
        })
    }
}

impl SourceWords for StreamingSource {
    fn word(&self, iteration: usize, matched: usize) -> Result<Word> {
        let i = (iteration - 1) * self.depth + (matched - 1);
        let start = i * self.letters;
        let end = start + self.letters;
        if end > self.realization.len() {
            return Err(NtsError::Length {
                len: self.realization.len(),
                min: end,
            });
        }
        Ok(Word(self.realization.letters()[start..end].to_vec()))
    }

    fn independent(&self) -> bool {
        false
    }
}

/// Codebook-generating distribution recorded in a trace.
#[derive(Debug, Clone, PartialEq)]
pub enum CodebookDistribution {
    /// Distribution over `|Y|^order` super-symbols.
    Iid { q: Vec<f64>, order: usize },
    /// Transition rows `Q(. | state)` of an order-`order` chain.
    Markov { rows: Vec<Vec<f64>>, order: usize },
}

impl CodebookDistribution {
    /// Entries in row-major order.
    pub fn flat(&self) -> Vec<f64> {
        match self {
            CodebookDistribution::Iid { q, .. } => q.clone(),
            CodebookDistribution::Markov { rows, .. } => rows.concat(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Number of updates applied; record 0 holds the initial distribution.
    pub iteration: usize,
    pub distribution: CodebookDistribution,
    /// Mean index of the matches that produced this distribution (NaN for
    /// record 0).
    pub mean_match_index: f64,
    pub mean_accept_distortion: f64,
    pub oracle_rate_bits: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct NtsTrace {
    pub records: Vec<IterationRecord>,
    /// Wall-clock milliseconds spent on each record; not part of equality.
    pub wall_ms: Vec<f64>,
    mark: Option<std::time::Instant>,
}

impl PartialEq for NtsTrace {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl NtsTrace {
    /// A trace of precomputed records with zero recorded wall time.
    pub fn from_records(records: Vec<IterationRecord>) -> Self {
        Self {
            wall_ms: vec![0.0; records.len()],
            records,
            mark: None,
        }
    }

    fn push(&mut self, record: IterationRecord) {
        let now = std::time::Instant::now();
        let ms = self.mark.map_or(0.0, |m| now.duration_since(m).as_secs_f64() * 1e3);
        self.mark = Some(now);
        self.wall_ms.push(ms);
        self.records.push(record);
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("trace has at least the initial record")
    }
}

/// Bitwise on the floating-point fields, so NaN placeholders compare equal.
impl PartialEq for IterationRecord {
    fn eq(&self, other: &Self) -> bool {
        let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
        self.iteration == other.iteration
            && self.distribution == other.distribution
            && same(self.mean_match_index, other.mean_match_index)
            && same(self.mean_accept_distortion, other.mean_accept_distortion)
            && match (self.oracle_rate_bits, other.oracle_rate_bits) {
                (Some(a), Some(b)) => same(a, b),
                (a, b) => a.is_none() && b.is_none(),
            }
    }
}

/// Optional per-iteration rate evaluation of a codebook distribution, in bits.
pub type Oracle<'a> = &'a (dyn Fn(&CodebookDistribution) -> Result<f64> + Sync);

/// Shared run parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams {
    /// Number of iterations `N`.
    pub iterations: usize,
    /// Statistical depth `K`.
    pub depth: usize,
    pub d: f64,
    pub cap: u64,
    /// Additive smoothing `ε`; zero reproduces the unsmoothed update.
    pub smoothing: f64,
    pub seed: u64,
}

impl RunParams {
    pub fn new(iterations: usize, depth: usize, d: f64) -> Self {
        Self {
            iterations,
            depth,
            d,
            cap: crate::codebook::DEFAULT_CAP,
            smoothing: DEFAULT_SMOOTHING,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_smoothing(mut self, smoothing: f64) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }
}

struct Matches {
    sources: Vec<Word>,
    records: Vec<MatchRecord>,
}

impl Matches {
    fn mean_index(&self) -> f64 {
        self.records.iter().map(|r| r.index as f64).sum::<f64>() / self.records.len() as f64
    }

    fn mean_distortion(&self) -> f64 {
        self.records.iter().map(|r| r.distortion).sum::<f64>() / self.records.len() as f64
    }
}

/// Runs the `K` searches of one iteration; `spec_for(k)` builds the codebook
/// for match `k`.
fn run_matches<F>(
    source: &dyn SourceWords,
    iteration: usize,
    params: &RunParams,
    measure: &DistortionMeasure,
    spec_for: F,
) -> Result<Matches>
where
    F: Fn(u64) -> CodebookSpec + Sync,
{
    let results: Vec<Result<(Word, MatchRecord)>> = (1..=params.depth)
        .into_par_iter()
        .map(|k| {
            let x = source.word(iteration, k)?;
            let spec = spec_for(sub_seed(params.seed, iteration as u64, k as u64, StreamRole::Codebook));
            let record = d_match_search(&x, &spec, measure, params.d, params.cap).map_err(|e| match e {
                NtsError::Exhausted { cap } => NtsError::ExhaustedAt {
                    iteration,
                    matched: k,
                    cap,
                },
                other => other,
            })?;
            Ok((x, record))
        })
        .collect();
    let (sources, records) = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(Matches { sources, records })
}

fn evaluate(oracle: Option<Oracle<'_>>, dist: &CodebookDistribution) -> Result<Option<f64>> {
    oracle.map(|f| f(dist)).transpose()
}

fn initial_record(dist: CodebookDistribution, oracle: Option<Oracle<'_>>) -> Result<IterationRecord> {
    Ok(IterationRecord {
        iteration: 0,
        oracle_rate_bits: evaluate(oracle, &dist)?,
        distribution: dist,
        mean_match_index: f64::NAN,
        mean_accept_distortion: f64::NAN,
    })
}

/// Original NTS on a memoryless codebook over `alphabet_size` letters with
/// codewords of `letters` letters. Each iteration d-matches one source word
/// and adopts the matching codeword's type.
pub fn nts_original_run(
    source: &dyn SourceWords,
    q0: &[f64],
    letters: usize,
    measure: &DistortionMeasure,
    params: RunParams,
    oracle: Option<Oracle<'_>>,
) -> Result<NtsTrace> {
    let alphabet_size = measure.reproduction_size();
    let params = RunParams { depth: 1, ..params };
    let mut q = crate::info::normalized(q0, 1e-9)?;
    let mut trace = NtsTrace::default();
    trace.push(initial_record(
        CodebookDistribution::Iid { q: q.clone(), order: 1 },
        oracle,
    )?);
    for n in 1..=params.iterations {
        let base = CodebookSpec::iid(&q, 1, alphabet_size, letters, 0)?;
        let matches = run_matches(source, n, &params, measure, |s| base.with_seed(s))?;
        let t = m_type(&matches.records[0].codeword, 1, alphabet_size)?;
        if t.has_zeros() && alphabet_size > 1 {
            return Err(NtsError::DegenerateType { iteration: n });
        }
        q = t.probabilities();
        let dist = CodebookDistribution::Iid { q: q.clone(), order: 1 };
        trace.push(IterationRecord {
            iteration: n,
            oracle_rate_bits: evaluate(oracle, &dist)?,
            distribution: dist,
            mean_match_index: matches.mean_index(),
            mean_accept_distortion: matches.mean_distortion(),
        });
    }
    Ok(trace)
}

/// Modified NTS with statistical depth `K` over super-symbols of `order`
/// letters; codewords hold `blocks` super-symbols. The averaged type is
/// floored by the smoothing term before it generates the next codebook.
pub fn nts_modified_run(
    source: &dyn SourceWords,
    q0: &[f64],
    order: usize,
    blocks: usize,
    measure: &DistortionMeasure,
    params: RunParams,
    oracle: Option<Oracle<'_>>,
) -> Result<NtsTrace> {
    if params.depth < 1 {
        return Err(NtsError::InvalidK(params.depth));
    }
    let alphabet_size = measure.reproduction_size();
    let order = order.max(1);
    let supers = alphabet_size.pow(order as u32);
    let mut q = crate::info::normalized(q0, 1e-9)?;
    if q.len() != supers {
        return Err(NtsError::Shape(format!(
            "initial distribution has {} entries, expected {supers}",
            q.len()
        )));
    }
    let mut trace = NtsTrace::default();
    trace.push(initial_record(
        CodebookDistribution::Iid { q: q.clone(), order },
        oracle,
    )?);
    for n in 1..=params.iterations {
        let base = CodebookSpec::iid(&q, order, alphabet_size, blocks, 0)?;
        let matches = run_matches(source, n, &params, measure, |s| base.with_seed(s))?;
        let mut counts = vec![0u64; supers];
        for r in &matches.records {
            let t = m_type(&r.codeword, order, alphabet_size)?;
            for (c, v) in counts.iter_mut().zip(t.counts()) {
                *c += v;
            }
        }
        let total = (params.depth * blocks) as f64 + params.smoothing * supers as f64;
        q = counts
            .iter()
            .map(|&c| (c as f64 + params.smoothing) / total)
            .collect();
        let dist = CodebookDistribution::Iid { q: q.clone(), order };
        trace.push(IterationRecord {
            iteration: n,
            oracle_rate_bits: evaluate(oracle, &dist)?,
            distribution: dist,
            mean_match_index: matches.mean_index(),
            mean_accept_distortion: matches.mean_distortion(),
        });
    }
    Ok(trace)
}

/// Markov NTS: codewords of `letters` letters from the chain `q0`, updated by
/// [`ml_transition_update`] on the transition counts of the `K` matching
/// codewords each iteration.
pub fn nts_markov_run(
    source: &dyn SourceWords,
    q0: &MarkovModel,
    letters: usize,
    measure: &DistortionMeasure,
    params: RunParams,
    oracle: Option<Oracle<'_>>,
) -> Result<NtsTrace> {
    nts_markov_run_observed(source, q0, letters, measure, params, oracle, &mut |_| {})
}

/// The matches of one iteration, in match order, together with the chain
/// that generated their codebooks.
#[derive(Debug)]
pub struct IterationMatches<'a> {
    pub iteration: usize,
    pub codebook: &'a MarkovModel,
    pub sources: &'a [Word],
    pub records: &'a [MatchRecord],
}

/// [`nts_markov_run`] reporting every iteration's matches to `observer`.
pub fn nts_markov_run_observed(
    source: &dyn SourceWords,
    q0: &MarkovModel,
    letters: usize,
    measure: &DistortionMeasure,
    params: RunParams,
    oracle: Option<Oracle<'_>>,
    observer: &mut dyn FnMut(&IterationMatches<'_>),
) -> Result<NtsTrace> {
    if params.depth < 1 {
        return Err(NtsError::InvalidK(params.depth));
    }
    let order = q0.order();
    let alphabet_size = q0.alphabet().size();
    let mut q = q0.clone();
    let mut trace = NtsTrace::default();
    trace.push(initial_record(
        CodebookDistribution::Markov { rows: q.rows(), order },
        oracle,
    )?);
    for n in 1..=params.iterations {
        let base = CodebookSpec::markov(q.clone(), letters, 0)?;
        let matches = run_matches(source, n, &params, measure, |s| base.with_seed(s))?;
        observer(&IterationMatches {
            iteration: n,
            codebook: &q,
            sources: &matches.sources,
            records: &matches.records,
        });
        let mut counts = TransitionCounts::zeros(alphabet_size, order);
        for r in &matches.records {
            accumulate_transitions(r.codeword.letters(), &mut counts);
        }
        let rows = ml_transition_update(&counts, params.smoothing)?;
        q = MarkovModel::new(order, &rows)?;
        let dist = CodebookDistribution::Markov { rows, order };
        trace.push(IterationRecord {
            iteration: n,
            oracle_rate_bits: evaluate(oracle, &dist)?,
            distribution: dist,
            mean_match_index: matches.mean_index(),
            mean_accept_distortion: matches.mean_distortion(),
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[usize]) -> Word {
        Word(v.to_vec())
    }

    #[test]
    fn m_types() {
        assert_eq!(m_type(&w(&[0, 1, 0, 1]), 2, 2).unwrap().probabilities(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(m_type(&w(&[0, 0, 1, 1]), 1, 2).unwrap().probabilities(), vec![0.5, 0.5]);
        let t = m_type(&w(&[0, 0, 1, 1]), 2, 2).unwrap();
        assert_eq!(t.probabilities(), vec![0.5, 0.0, 0.0, 0.5]);
        assert_eq!(t.denominator(), 2);
        assert!(matches!(
            m_type(&w(&[0, 0, 1]), 2, 2),
            Err(NtsError::Divisibility { len: 3, order: 2 })
        ));
    }

    #[test]
    fn first_order_transition_counts() {
        let c = transition_counts(&w(&[0, 0, 1, 0, 1, 1, 0]), 1, 2).unwrap();
        assert_eq!(c.rows(), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(c.total(), 6);
        let c = transition_counts(&w(&[0, 0, 0, 0]), 1, 2).unwrap();
        assert_eq!(c.rows(), vec![vec![3, 0], vec![0, 0]]);
    }

    #[test]
    fn second_order_transition_counts() {
        let c = transition_counts(&w(&[0, 1, 0, 1]), 2, 2).unwrap();
        // states 01 = 1, 10 = 2
        assert_eq!(c.state_transition(1, 2), 1);
        assert_eq!(c.state_transition(2, 1), 1);
        assert_eq!(c.total(), 2);
        assert_eq!(c.state_transition(1, 0), 0);
        assert!(transition_counts(&w(&[0, 1]), 2, 2).is_err());
    }

    #[test]
    fn ml_update_ratios() {
        let c = TransitionCounts::from_rows(1, &[vec![4, 3], vec![1, 1]]).unwrap();
        let q = ml_transition_update(&c, 0.0).unwrap();
        assert_eq!(q[0][0], 4.0 / 7.0);
        let c = transition_counts(&w(&[0, 0, 0, 0]), 1, 2).unwrap();
        assert!(matches!(ml_transition_update(&c, 0.0), Err(NtsError::EmptyRow(1))));
        let q = ml_transition_update(&c, 1e-3).unwrap();
        assert_eq!(q[1], vec![0.5, 0.5]);
        let c = TransitionCounts::from_rows(1, &[vec![5, 5], vec![5, 5]]).unwrap();
        for eps in [0.0, 0.1, 2.0] {
            assert_eq!(ml_transition_update(&c, eps).unwrap(), vec![vec![0.5, 0.5]; 2]);
        }
    }

    #[test]
    fn single_letter_alphabet_stays_put() {
        let h = DistortionMeasure::hamming(1);
        let source = SampledSource::IidBlocks {
            p: vec![1.0],
            order: 1,
            alphabet_size: 1,
            blocks: 8,
            seed: 1,
        };
        let t = nts_original_run(&source, &[1.0], 8, &h, RunParams::new(5, 1, 0.0), None).unwrap();
        assert!(t.records.iter().all(|r| r.distribution.flat() == vec![1.0]));
        let q0 = MarkovModel::new(1, &[vec![1.0]]).unwrap();
        let source = SampledSource::Markov { model: q0.clone(), letters: 8, seed: 2 };
        let t = nts_markov_run(&source, &q0, 8, &h, RunParams::new(3, 10, 0.0), None).unwrap();
        assert!(t.records.iter().all(|r| r.distribution.flat() == vec![1.0]));
    }

    #[test]
    fn loose_threshold_adopts_first_codeword() {
        let h = DistortionMeasure::hamming(2);
        let source = SampledSource::IidBlocks {
            p: vec![0.5, 0.5],
            order: 1,
            alphabet_size: 2,
            blocks: 40,
            seed: 3,
        };
        let params = RunParams::new(4, 1, 1.0).with_seed(17);
        let t = nts_original_run(&source, &[0.5, 0.5], 40, &h, params, None).unwrap();
        for n in 1..=4 {
            let prev = match &t.records[n - 1].distribution {
                CodebookDistribution::Iid { q, .. } => q.clone(),
                _ => unreachable!(),
            };
            let spec = CodebookSpec::iid(&prev, 1, 2, 40, sub_seed(17, n as u64, 1, StreamRole::Codebook)).unwrap();
            let first = crate::codebook::codeword_at(&spec, 1);
            let expect = m_type(&first, 1, 2).unwrap().probabilities();
            assert_eq!(t.records[n].distribution.flat(), expect);
            assert_eq!(t.records[n].mean_match_index, 1.0);
        }
    }

    #[test]
    fn invalid_depth() {
        let h = DistortionMeasure::hamming(2);
        let source = WordList::new(vec![], 0);
        let err = nts_modified_run(&source, &[0.5, 0.5], 1, 4, &h, RunParams::new(1, 0, 0.3), None).unwrap_err();
        assert_eq!(err, NtsError::InvalidK(0));
    }

    #[test]
    fn exhaustion_carries_context() {
        let h = DistortionMeasure::hamming(2);
        let source = WordList::new(vec![Word(vec![1; 10])], 1);
        let params = RunParams::new(1, 1, 0.0).with_cap(5);
        let err = nts_modified_run(&source, &[0.999, 0.001], 1, 10, &h, params, None).unwrap_err();
        assert_eq!(err, NtsError::ExhaustedAt { iteration: 1, matched: 1, cap: 5 });
    }

    #[test]
    fn streaming_source_is_flagged() {
        let m = MarkovModel::new(1, &[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap();
        let s = StreamingSource::new(&m, 10, 2, 3, 5).unwrap();
        assert!(!s.independent());
        assert_eq!(s.word(3, 2).unwrap().len(), 10);
        assert!(s.word(4, 1).is_err());
        let fresh = SampledSource::Markov { model: m, letters: 10, seed: 5 };
        assert!(fresh.independent());
        assert_eq!(fresh.word(2, 7).unwrap(), fresh.word(2, 7).unwrap());
    }
}
