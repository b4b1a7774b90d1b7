//! Sub-stream decomposition of d-matching source and code words.
//!
//! Position `t` of a word pair (0-based, `t ≥ M`) belongs to the pair keyed by
//! the preceding `M` source letters and the preceding `M` code letters; the
//! first `M` positions of every word are left unassigned.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::distortion::DistortionMeasure;
use crate::error::{NtsError, Result};
use crate::markov::{state_index, MarkovModel, Word};
use crate::rd::rpqd;

/// Default minimum sub-stream length for slope estimates.
pub const DEFAULT_PAIR_FLOOR: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SubstreamDecomposition {
    order: usize,
    source_states: usize,
    code_states: usize,
    /// `(source state, code state)` to the letter pairs of that sub-stream.
    pairs: BTreeMap<(usize, usize), Vec<(usize, usize)>>,
    distortion_sums: BTreeMap<(usize, usize), f64>,
    /// Unassigned positions, `M` per word.
    skipped: usize,
    /// Exact distortion total over assigned positions.
    assigned_sum: BigRational,
}

/// Per-pair summary used by diagnostics and CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSummary {
    pub source_state: usize,
    pub code_state: usize,
    pub length: usize,
    pub weight: f64,
    pub distortion: f64,
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite distortion entry")
}

/// Assigns every position past the first `order` letters of each word pair
/// to its sub-stream pair.
pub fn decompose(
    source_words: &[Word],
    code_words: &[Word],
    order: usize,
    measure: &DistortionMeasure,
) -> Result<SubstreamDecomposition> {
    if source_words.len() != code_words.len() {
        return Err(NtsError::LengthMismatch {
            left: source_words.len(),
            right: code_words.len(),
        });
    }
    let nx = measure.source_size();
    let ny = measure.reproduction_size();
    let mut out = SubstreamDecomposition {
        order,
        source_states: nx.pow(order as u32),
        code_states: ny.pow(order as u32),
        pairs: BTreeMap::new(),
        distortion_sums: BTreeMap::new(),
        skipped: 0,
        assigned_sum: BigRational::zero(),
    };
    let mut sums: BTreeMap<(usize, usize), BigRational> = BTreeMap::new();
    for (x, y) in source_words.iter().zip(code_words) {
        if x.len() != y.len() {
            return Err(NtsError::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if x.len() < order + 1 {
            return Err(NtsError::Length {
                len: x.len(),
                min: order + 1,
            });
        }
        x.check_alphabet(crate::markov::Alphabet::new(nx)?)?;
        y.check_alphabet(crate::markov::Alphabet::new(ny)?)?;
        let (xs, ys) = (x.letters(), y.letters());
        for t in order..xs.len() {
            let key = (state_index(&xs[t - order..t], nx), state_index(&ys[t - order..t], ny));
            out.pairs.entry(key).or_default().push((xs[t], ys[t]));
            *sums.entry(key).or_insert_with(BigRational::zero) += exact(measure.rho(xs[t], ys[t]));
        }
        out.skipped += order;
    }
    for (key, s) in sums {
        out.distortion_sums.insert(key, num_traits::ToPrimitive::to_f64(&s).unwrap_or(f64::NAN));
        out.assigned_sum += s;
    }
    Ok(out)
}

impl SubstreamDecomposition {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn assigned(&self) -> usize {
        self.pairs.values().map(Vec::len).sum()
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Letter pairs of sub-stream `(x, y)`; empty when unoccupied.
    pub fn letters(&self, source_state: usize, code_state: usize) -> &[(usize, usize)] {
        self.pairs.get(&(source_state, code_state)).map_or(&[], Vec::as_slice)
    }

    pub fn length(&self, source_state: usize, code_state: usize) -> usize {
        self.letters(source_state, code_state).len()
    }

    /// Occupied pairs in `(source state, code state)` order.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.keys().copied()
    }

    pub fn distortion(&self, source_state: usize, code_state: usize) -> Option<f64> {
        let len = self.length(source_state, code_state);
        self.distortion_sums
            .get(&(source_state, code_state))
            .map(|s| s / len as f64)
    }

    /// Every pair, occupied or not, with weight `L_{x,y} / Σ L`. Unoccupied
    /// pairs carry weight 0 and a NaN distortion.
    pub fn summary(&self) -> Vec<PairSummary> {
        let total = self.assigned() as f64;
        let mut rows = Vec::with_capacity(self.source_states * self.code_states);
        for x in 0..self.source_states {
            for y in 0..self.code_states {
                let length = self.length(x, y);
                rows.push(PairSummary {
                    source_state: x,
                    code_state: y,
                    length,
                    weight: if total > 0.0 { length as f64 / total } else { 0.0 },
                    distortion: self.distortion(x, y).unwrap_or(f64::NAN),
                });
            }
        }
        rows
    }

    /// `Σ (L_{x,y} / L) d_{x,y}` and the distortion over assigned positions,
    /// both as exact rationals.
    pub fn reconstruction_identity(&self, measure: &DistortionMeasure) -> (BigRational, BigRational) {
        let total = BigInt::from(self.assigned());
        let mut weighted = BigRational::zero();
        for letters in self.pairs.values() {
            let len = BigInt::from(letters.len());
            let sum = letters
                .iter()
                .fold(BigRational::zero(), |acc, &(a, b)| acc + exact(measure.rho(a, b)));
            let weight = BigRational::new(len.clone(), total.clone());
            weighted += weight * (sum / BigRational::from_integer(len));
        }
        let block = self.assigned_sum.clone() / BigRational::from_integer(total);
        (weighted, block)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("source_state,code_state,length,weight,distortion\n");
        for r in self.summary() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.source_state,
                r.code_state,
                r.length,
                crate::experiment::format_number(r.weight),
                crate::experiment::format_number(r.distortion)
            ));
        }
        s
    }
}

/// Empirical coupling `M(x, y)` with its conditionals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub joint: Vec<Vec<f64>>,
    /// `M(x | y)`, indexed `[x][y]`; columns with no mass are zero.
    pub x_given_y: Vec<Vec<f64>>,
    /// `M(y | x)`, indexed `[x][y]`; rows with no mass are zero.
    pub y_given_x: Vec<Vec<f64>>,
}

pub fn empirical_coupling(decomp: &SubstreamDecomposition) -> Result<Coupling> {
    let total = decomp.assigned();
    if total == 0 {
        return Err(NtsError::EmptyDecomposition);
    }
    let (sx, sy) = (decomp.source_states, decomp.code_states);
    let joint: Vec<Vec<f64>> = (0..sx)
        .map(|x| (0..sy).map(|y| decomp.length(x, y) as f64 / total as f64).collect())
        .collect();
    let row: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<f64> = (0..sy).map(|y| joint.iter().map(|r| r[y]).sum()).collect();
    let div = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    Ok(Coupling {
        x_given_y: (0..sx).map(|x| (0..sy).map(|y| div(joint[x][y], col[y])).collect()).collect(),
        y_given_x: (0..sx).map(|x| (0..sy).map(|y| div(joint[x][y], row[x])).collect()).collect(),
        joint,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairSlope {
    /// Multiplier `λ` of `R(P(X|x), Q(Y|y), d_{x,y})`; the slope is `-λ`.
    Slope(f64),
    InsufficientData { length: usize },
    /// `d_{x,y}` at or below the pair's `D_min`.
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeReport {
    pub pairs: Vec<(PairSummary, PairSlope)>,
    /// `max λ - min λ` over pairs with a slope; 0 with fewer than two.
    pub spread: f64,
}

/// Output-constrained slopes of each occupied pair at its empirical
/// distortion; pairs shorter than `floor` are reported, not evaluated.
pub fn slope_diagnostic(
    pairs: &[PairSummary],
    source: &MarkovModel,
    code_rows: &[Vec<f64>],
    measure: &DistortionMeasure,
    floor: usize,
) -> Result<SlopeReport> {
    let mut out = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in pairs.iter().filter(|p| p.length > 0) {
        let slope = if p.length < floor {
            PairSlope::InsufficientData { length: p.length }
        } else {
            match rpqd(source.row(p.source_state), &code_rows[p.code_state], measure, p.distortion) {
                Ok(r) => {
                    lo = lo.min(r.slope);
                    hi = hi.max(r.slope);
                    PairSlope::Slope(r.slope)
                }
                Err(NtsError::Range { .. }) => PairSlope::OutOfRange,
                Err(e) => return Err(e),
            }
        };
        out.push((p.clone(), slope));
    }
    Ok(SlopeReport {
        pairs: out,
        spread: if hi >= lo { hi - lo } else { 0.0 },
    })
}
