//! Lazily generated random codebooks and the d-match search.
//!
//! A codebook is never materialized: codeword `j` is regenerated on demand
//! from the seed `mix(codebook_seed, j)`.

use rand::Rng;
use rayon::prelude::*;

use crate::distortion::DistortionMeasure;
use crate::error::{NtsError, Result};
use crate::markov::{state_letters, MarkovModel, Word};
use crate::seed::{mix, stream_rng};

/// Default number of codewords examined before a search gives up.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// How codewords are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum CodebookKind {
    /// `blocks` i.i.d. super-symbols of `order` letters drawn from `q`
    /// (a distribution over `|Y|^order` super-symbols).
    Iid {
        q: Vec<f64>,
        order: usize,
        alphabet_size: usize,
        blocks: usize,
    },
    /// `letters` letters of an order-`M` Markov chain started from its
    /// stationary state distribution.
    Markov { model: MarkovModel, letters: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSpec {
    kind: CodebookKind,
    seed: u64,
    // iid mode: cumulative of q and the letters of each super-symbol
    cumulative: Vec<f64>,
    symbols: Vec<Vec<usize>>,
}

impl CodebookSpec {
    pub fn iid(q: &[f64], order: usize, alphabet_size: usize, blocks: usize, seed: u64) -> Result<Self> {
        let order = order.max(1);
        let supers = alphabet_size.pow(order as u32);
        if q.len() != supers {
            return Err(NtsError::Shape(format!(
                "super-symbol distribution has {} entries, expected {supers}",
                q.len()
            )));
        }
        let q = crate::info::normalized(q, 1e-9)?;
        if blocks == 0 {
            return Err(NtsError::Length { len: 0, min: 1 });
        }
        let mut cumulative = q.clone();
        let mut acc = 0.0;
        for c in cumulative.iter_mut() {
            acc += *c;
            *c = acc;
        }
        let symbols = (0..supers)
            .map(|s| state_letters(s, alphabet_size, order))
            .collect();
        Ok(Self {
            kind: CodebookKind::Iid {
                q,
                order,
                alphabet_size,
                blocks,
            },
            seed,
            cumulative,
            symbols,
        })
    }

    pub fn markov(model: MarkovModel, letters: usize, seed: u64) -> Result<Self> {
        let min = if model.order() == 0 { 1 } else { model.order() + 1 };
        if letters < min {
            return Err(NtsError::Length { len: letters, min });
        }
        Ok(Self {
            kind: CodebookKind::Markov { model, letters },
            seed,
            cumulative: Vec::new(),
            symbols: Vec::new(),
        })
    }

    pub fn kind(&self) -> &CodebookKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same distribution, different realization.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn reproduction_size(&self) -> usize {
        match &self.kind {
            CodebookKind::Iid { alphabet_size, .. } => *alphabet_size,
            CodebookKind::Markov { model, .. } => model.alphabet().size(),
        }
    }

    /// Codeword length in letters.
    pub fn letter_length(&self) -> usize {
        match &self.kind {
            CodebookKind::Iid { order, blocks, .. } => order * blocks,
            CodebookKind::Markov { letters, .. } => *letters,
        }
    }

    /// Feeds the letters of codeword `j` to `sink` until it returns `false`.
    fn generate<F: FnMut(usize) -> bool>(&self, j: u64, mut sink: F) {
        let mut rng = stream_rng(mix(self.seed, j));
        match &self.kind {
            CodebookKind::Iid { blocks, .. } => {
                let last = self.cumulative[self.cumulative.len() - 1];
                for _ in 0..*blocks {
                    let u: f64 = rng.gen::<f64>() * last;
                    let s = self
                        .cumulative
                        .iter()
                        .position(|&c| u < c)
                        .unwrap_or(self.cumulative.len() - 1);
                    for &letter in &self.symbols[s] {
                        if !sink(letter) {
                            return;
                        }
                    }
                }
            }
            CodebookKind::Markov { model, letters } => {
                let order = model.order();
                let n = model.alphabet().size();
                let mut state = model.sample_state(&mut rng);
                let start = state;
                let mut emitted = 0;
                // stationary start state spelled out oldest letter first
                let mut place = n.pow(order.saturating_sub(1) as u32);
                for _ in 0..order {
                    let letter = (start / place) % n;
                    place /= n.max(1);
                    emitted += 1;
                    if !sink(letter) {
                        return;
                    }
                }
                while emitted < *letters {
                    let letter = model.sample_letter(state, &mut rng);
                    state = model.next_state(state, letter);
                    emitted += 1;
                    if !sink(letter) {
                        return;
                    }
                }
            }
        }
    }
}

/// The `j`-th codeword (`j >= 1`).
pub fn codeword_at(spec: &CodebookSpec, j: u64) -> Word {
    let mut letters = Vec::with_capacity(spec.letter_length());
    spec.generate(j, |l| {
        letters.push(l);
        true
    });
    Word(letters)
}

/// First d-matching codeword of a search.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    pub index: u64,
    pub codeword: Word,
    pub distortion: f64,
    /// Codewords examined, including the match.
    pub search_cost: u64,
}

/// Distortion of codeword `j` against `x`, or `None` once the running sum
/// proves it exceeds `d`. Letters are written to `buf`.
fn try_match(
    x: &[usize],
    spec: &CodebookSpec,
    measure: &DistortionMeasure,
    d: f64,
    j: u64,
    buf: &mut Vec<usize>,
) -> Option<f64> {
    let len = x.len() as f64;
    let mut sum = 0.0;
    let mut pos = 0;
    let mut rejected = false;
    buf.clear();
    spec.generate(j, |letter| {
        sum += measure.rho(x[pos], letter);
        pos += 1;
        buf.push(letter);
        // partial sums only grow, so exceeding d early is final
        if sum / len > d {
            rejected = true;
            return false;
        }
        true
    });
    if rejected {
        None
    } else {
        Some(sum / len)
    }
}

fn check_query(x: &Word, spec: &CodebookSpec, cap: u64) -> Result<()> {
    if x.len() != spec.letter_length() {
        return Err(NtsError::LengthMismatch {
            left: x.len(),
            right: spec.letter_length(),
        });
    }
    if cap == 0 {
        return Err(NtsError::Exhausted { cap });
    }
    Ok(())
}

/// Smallest `j <= cap` with `ρ(x, y(j)) <= d`.
pub fn d_match_search(
    x: &Word,
    spec: &CodebookSpec,
    measure: &DistortionMeasure,
    d: f64,
    cap: u64,
) -> Result<MatchRecord> {
    check_query(x, spec, cap)?;
    let mut buf = Vec::with_capacity(x.len());
    for j in 1..=cap {
        if let Some(distortion) = try_match(x.letters(), spec, measure, d, j, &mut buf) {
            return Ok(MatchRecord {
                index: j,
                codeword: Word(buf),
                distortion,
                search_cost: j,
            });
        }
    }
    Err(NtsError::Exhausted { cap })
}

/// Parallel variant of [`d_match_search`] that scans `chunk` indices at a
/// time across the current rayon pool and always reports the smallest
/// matching index, so results equal the sequential search.
pub fn d_match_search_parallel(
    x: &Word,
    spec: &CodebookSpec,
    measure: &DistortionMeasure,
    d: f64,
    cap: u64,
    chunk: u64,
) -> Result<MatchRecord> {
    check_query(x, spec, cap)?;
    let chunk = chunk.max(1);
    let mut start = 1;
    while start <= cap {
        let end = (start + chunk - 1).min(cap);
        let found = (start..=end).into_par_iter().find_map_first(|j| {
            let mut buf = Vec::with_capacity(x.len());
            try_match(x.letters(), spec, measure, d, j, &mut buf).map(|dist| (j, dist, buf))
        });
        if let Some((j, distortion, letters)) = found {
            return Ok(MatchRecord {
                index: j,
                codeword: Word(letters),
                distortion,
                search_cost: j,
            });
        }
        start = end + 1;
    }
    Err(NtsError::Exhausted { cap })
}
