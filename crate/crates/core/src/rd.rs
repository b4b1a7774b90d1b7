//! Deterministic rate-distortion oracle.
//!
//! Everything here works in nats; [`RdPoint::rate_bits`] converts for
//! reporting. The output-constrained rate `R(P, Q, d)` is evaluated through the
//! tilted conditional `W_λ(y | x) ∝ Q(y) exp(-λ ρ(x, y))`, whose expected
//! distortion is non-increasing in `λ`; the multiplier meeting `d` is found by
//! bisection and the rate is `-λ d - Σ_x P(x) ln Z_x(λ)`.

use crate::distortion::{d_av, d_max_of, d_min, DistortionMeasure};
use crate::error::{NtsError, Result};
use crate::info::{log_sum_exp, nats_to_bits};
use crate::markov::MarkovModel;

/// Initial multiplier bracket; widened by doubling when `d` sits closer to
/// `D_min` than `λ = 1e4` reaches.
pub const LAMBDA_BRACKET: f64 = 1e4;
pub const MAX_BISECTION_STEPS: usize = 200;
pub const MAX_AB_ITERATIONS: usize = 100_000;

/// Joint distribution over `X^M x Y^M`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    v: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(NtsError::Shape("joint distribution must be a non-empty rectangle".into()));
        }
        let v = crate::info::normalized(&rows.concat(), 1e-9)?;
        Ok(Self {
            rows: rows.len(),
            cols,
            v,
        })
    }

    pub fn product(p: &[f64], q: &[f64]) -> Self {
        Self {
            rows: p.len(),
            cols: q.len(),
            v: p.iter().flat_map(|&a| q.iter().map(move |&b| a * b)).collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.v[x * self.cols + y]
    }

    pub fn entries(&self) -> &[f64] {
        &self.v
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.v.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn x_marginal(&self) -> Vec<f64> {
        self.v.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn y_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for r in self.v.chunks(self.cols) {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m
    }

    pub fn expected_distortion(&self, measure: &DistortionMeasure) -> f64 {
        let mut acc = 0.0;
        for x in 0..self.rows {
            for y in 0..self.cols {
                acc += self.get(x, y) * measure.rho(x, y);
            }
        }
        acc
    }

    /// `D(self ‖ other)` in nats.
    pub fn divergence(&self, other: &JointDistribution) -> f64 {
        crate::info::kl_divergence(&self.v, &other.v)
    }
}

/// A point on an output-constrained (or unconstrained) rate-distortion curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    /// Rate in nats.
    pub rate: f64,
    pub distortion: f64,
    /// Multiplier `λ ≥ 0`; the curve's slope at `distortion` is `-λ`.
    pub slope: f64,
    pub minimizer: JointDistribution,
    pub output_distribution: Vec<f64>,
}

impl RdPoint {
    pub fn rate_bits(&self) -> f64 {
        nats_to_bits(self.rate)
    }
}

/// Tilted conditional evaluated at one multiplier.
#[derive(Debug, Clone)]
struct Tilt {
    distortion: f64,
    rate: f64,
    output: Vec<f64>,
}

fn tilt(p: &[f64], q: &[f64], measure: &DistortionMeasure, lambda: f64, joint: Option<&mut Vec<f64>>) -> Tilt {
    let ny = q.len();
    let log_q: Vec<f64> = q.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
    let mut output = vec![0.0; ny];
    let mut distortion = 0.0;
    let mut log_z = 0.0;
    let mut a = vec![0.0; ny];
    let mut joint = joint;
    if let Some(j) = joint.as_deref_mut() {
        j.clear();
        j.resize(p.len() * ny, 0.0);
    }
    for (x, &px) in p.iter().enumerate() {
        if px <= 0.0 {
            continue;
        }
        let row = measure.row(x);
        for y in 0..ny {
            a[y] = log_q[y] - lambda * row[y];
        }
        let lse = log_sum_exp(&a);
        log_z += px * lse;
        let mut dx = 0.0;
        for y in 0..ny {
            let w = (a[y] - lse).exp();
            dx += w * row[y];
            output[y] += px * w;
            if let Some(j) = joint.as_deref_mut() {
                j[x * ny + y] = px * w;
            }
        }
        distortion += px * dx;
    }
    let rate = (-lambda * distortion - log_z).max(0.0);
    Tilt {
        distortion,
        rate,
        output,
    }
}

/// Smallest `λ` in the bracket whose distortion under `dist` does not exceed
/// `d`, assuming `dist` is non-increasing with `dist(0) > d > dist(∞)`.
fn solve_lambda(dist: impl Fn(f64) -> f64, d: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = LAMBDA_BRACKET;
    while dist(hi) > d {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e300 {
            return Err(NtsError::NonConvergence { iterations: MAX_BISECTION_STEPS });
        }
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dist(mid) > d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn check_inputs(p: &[f64], q: &[f64], measure: &DistortionMeasure) -> Result<()> {
    crate::info::normalized(p, 1e-9)?;
    crate::info::normalized(q, 1e-9)?;
    if p.len() != measure.source_size() || q.len() != measure.reproduction_size() {
        return Err(NtsError::Shape(format!(
            "distributions of lengths {} and {} do not fit a {}x{} measure",
            p.len(),
            q.len(),
            measure.source_size(),
            measure.reproduction_size()
        )));
    }
    Ok(())
}

fn point_at(p: &[f64], q: &[f64], measure: &DistortionMeasure, lambda: f64) -> RdPoint {
    let mut joint = Vec::new();
    let t = tilt(p, q, measure, lambda, Some(&mut joint));
    RdPoint {
        rate: t.rate,
        distortion: t.distortion,
        slope: lambda,
        minimizer: JointDistribution {
            rows: p.len(),
            cols: q.len(),
            v: joint,
        },
        output_distribution: t.output,
    }
}

/// Output-constrained rate `R(P, Q, d) = min { D(V ‖ P x Q) : [V]_x = P,
/// E_V ρ ≤ d }` and its minimizer.
///
/// Returns a [`NtsError::Range`] when `d ≤ D_min(P, Q)` and otherwise the
/// `λ = 0` point (rate 0) when `d ≥ D_av(P, Q)`.
pub fn rpqd(p: &[f64], q: &[f64], measure: &DistortionMeasure, d: f64) -> Result<RdPoint> {
    check_inputs(p, q, measure)?;
    let dmin = d_min(p, q, measure)?;
    if d <= dmin {
        return Err(NtsError::Range { d, d_min: dmin });
    }
    if d >= d_av(p, q, measure)? {
        return Ok(point_at(p, q, measure, 0.0));
    }
    let lambda = solve_lambda(|l| tilt(p, q, measure, l, None).distortion, d)?;
    Ok(point_at(p, q, measure, lambda))
}

/// One idealized NTS step: the output distribution of [`rpqd`].
pub fn nts_deterministic_step(p: &[f64], q: &[f64], measure: &DistortionMeasure, d: f64) -> Result<Vec<f64>> {
    rpqd(p, q, measure, d).map(|r| r.output_distribution)
}

/// `R(P, d)` by the fixed-distortion Arimoto-Blahut recursion from a uniform
/// output distribution, stopping when successive rates differ by less than
/// `tol` nats.
pub fn blahut_arimoto_rd(p: &[f64], measure: &DistortionMeasure, d: f64, tol: f64) -> Result<RdPoint> {
    blahut_arimoto_counted(p, measure, d, tol).map(|(point, _)| point)
}

/// [`blahut_arimoto_rd`] together with the number of recursion steps taken.
pub fn blahut_arimoto_counted(p: &[f64], measure: &DistortionMeasure, d: f64, tol: f64) -> Result<(RdPoint, usize)> {
    let ny = measure.reproduction_size();
    let (dmax, letter) = d_max_of(p, measure)?;
    if d >= dmax {
        let mut q = vec![0.0; ny];
        q[letter] = 1.0;
        check_inputs(p, &q, measure)?;
        return Ok((point_at(p, &q, measure, 0.0), 0));
    }
    let mut q = crate::info::uniform(ny);
    let mut prev = f64::INFINITY;
    for it in 1..=MAX_AB_ITERATIONS {
        let point = rpqd(p, &q, measure, d)?;
        let done = (prev - point.rate).abs() < tol;
        prev = point.rate;
        q = point.output_distribution.clone();
        if done {
            return Ok((point, it));
        }
    }
    Err(NtsError::NonConvergence {
        iterations: MAX_AB_ITERATIONS,
    })
}

/// One sub-stream pair: source conditional `P(X | x)`, code conditional
/// `Q(Y | y)` and the pair's weight `M(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstreamPair {
    pub source: Vec<f64>,
    pub code: Vec<f64>,
    pub weight: f64,
}

/// Equal-slope distortion allocation across sub-stream pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstreamWeights {
    pub weights: Vec<f64>,
    pub distortions: Vec<f64>,
    /// Common multiplier `λ`.
    pub slope: f64,
    /// Per-pair rate-distortion points at the allocated distortions.
    pub points: Vec<RdPoint>,
}

impl SubstreamWeights {
    /// Weighted average rate `Σ M(x, y) R_{x,y}` in nats.
    pub fn average_rate(&self) -> f64 {
        self.weights.iter().zip(&self.points).map(|(w, p)| w * p.rate).sum()
    }

    pub fn average_distortion(&self) -> f64 {
        self.weights.iter().zip(&self.distortions).map(|(w, d)| w * d).sum()
    }
}

/// Splits the distortion budget `d` across `pairs` so every pair operates at
/// a common slope `-λ` and `Σ M(x, y) d_{x,y} = d`.
pub fn equal_slope_allocation(pairs: &[SubstreamPair], measure: &DistortionMeasure, d: f64) -> Result<SubstreamWeights> {
    if pairs.is_empty() {
        return Err(NtsError::EmptyDecomposition);
    }
    let mut total = 0.0;
    let mut floor = 0.0;
    let mut ceiling = 0.0;
    for pair in pairs {
        check_inputs(&pair.source, &pair.code, measure)?;
        if pair.weight.is_nan() || pair.weight < 0.0 {
            return Err(NtsError::InvalidDistribution(format!("pair weight {}", pair.weight)));
        }
        total += pair.weight;
        floor += pair.weight * d_min(&pair.source, &pair.code, measure)?;
        ceiling += pair.weight * d_av(&pair.source, &pair.code, measure)?;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(NtsError::InvalidDistribution(format!("pair weights sum to {total}")));
    }
    let lambda = if d >= ceiling {
        0.0
    } else if d <= floor {
        return Err(NtsError::InfeasibleDistortion { d, d_min: floor });
    } else {
        let dist = |l: f64| -> f64 {
            pairs
                .iter()
                .filter(|p| p.weight > 0.0)
                .map(|p| p.weight * tilt(&p.source, &p.code, measure, l, None).distortion)
                .sum()
        };
        solve_lambda(dist, d)?
    };
    let points: Vec<RdPoint> = pairs
        .iter()
        .map(|p| point_at(&p.source, &p.code, measure, lambda))
        .collect();
    Ok(SubstreamWeights {
        weights: pairs.iter().map(|p| p.weight).collect(),
        distortions: points.iter().map(|p| p.distortion).collect(),
        slope: lambda,
        points,
    })
}

/// How sub-stream pair weights are chosen during alternating minimization.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightsMode {
    /// `M(x, y) = π_P(x) π_Q(y)`, recomputed from the current code chain.
    Product,
    /// Caller-supplied `|X^M| x |Y^M|` weights.
    Fixed(Vec<Vec<f64>>),
}

/// Result of [`alternating_min_markov`].
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovRd {
    /// Code conditionals `Q*(Y | y)`, one row per code state.
    pub rows: Vec<Vec<f64>>,
    /// `R̄(d)` in nats.
    pub rate: f64,
    /// `R̄` after each alternation, in nats.
    pub history: Vec<f64>,
    pub allocation: SubstreamWeights,
    pub iterations: usize,
}

impl MarkovRd {
    pub fn rate_bits(&self) -> f64 {
        nats_to_bits(self.rate)
    }
}

/// Pair weights for a code chain in the given mode.
fn pair_weights(source: &MarkovModel, rows: &[Vec<f64>], mode: &WeightsMode) -> Result<Vec<Vec<f64>>> {
    let sx = source.num_states();
    let sy = rows.len();
    match mode {
        WeightsMode::Product => {
            let order = source.order();
            let pi_q = MarkovModel::new(order, rows)?.stationary().to_vec();
            Ok(source
                .stationary()
                .iter()
                .map(|&a| pi_q.iter().map(|&b| a * b).collect())
                .collect())
        }
        WeightsMode::Fixed(w) => {
            if w.len() != sx || w.iter().any(|r| r.len() != sy) {
                return Err(NtsError::Shape(format!("fixed weights must be {sx}x{sy}")));
            }
            let flat = crate::info::normalized(&w.concat(), 1e-9)?;
            Ok(flat.chunks(sy).map(<[f64]>::to_vec).collect())
        }
    }
}

fn pairs_for(source: &MarkovModel, rows: &[Vec<f64>], weights: &[Vec<f64>]) -> Vec<SubstreamPair> {
    let mut pairs = Vec::with_capacity(weights.len() * rows.len());
    for (x, wx) in weights.iter().enumerate() {
        for (y, &w) in wx.iter().enumerate() {
            pairs.push(SubstreamPair {
                source: source.row(x).to_vec(),
                code: rows[y].clone(),
                weight: w,
            });
        }
    }
    pairs
}

/// `R̄` of a fixed code chain: the equal-slope allocation over all sub-stream
/// pairs, without updating the chain.
pub fn markov_rate(
    source: &MarkovModel,
    rows: &[Vec<f64>],
    measure: &DistortionMeasure,
    d: f64,
    mode: &WeightsMode,
) -> Result<SubstreamWeights> {
    let weights = pair_weights(source, rows, mode)?;
    equal_slope_allocation(&pairs_for(source, rows, &weights), measure, d)
}

/// Alternating minimization of `R̄(d)` over code conditionals `Q(Y | y)`,
/// starting from uniform rows. Each alternation (a) allocates distortion at a
/// common slope for the current rows and (b) replaces each row by the
/// y-marginal of `Σ_x M(x | y) V_{x,y}`. Stops once `R̄` drops by less than
/// `tol` and no row entry moves by more than `tol`.
pub fn alternating_min_markov(
    source: &MarkovModel,
    measure: &DistortionMeasure,
    d: f64,
    mode: &WeightsMode,
    tol: f64,
) -> Result<MarkovRd> {
    let ny = measure.reproduction_size();
    let sy = ny.pow(source.order() as u32);
    let mut rows = vec![crate::info::uniform(ny); sy];
    let mut history = Vec::new();
    for it in 1..=MAX_AB_ITERATIONS {
        let weights = pair_weights(source, &rows, mode)?;
        let allocation = equal_slope_allocation(&pairs_for(source, &rows, &weights), measure, d)?;
        let rate = allocation.average_rate();
        let mut next = vec![vec![0.0; ny]; sy];
        for y in 0..sy {
            let col: f64 = weights.iter().map(|wx| wx[y]).sum();
            if col <= 0.0 {
                next[y] = rows[y].clone();
                continue;
            }
            for (x, wx) in weights.iter().enumerate() {
                let out = &allocation.points[x * sy + y].output_distribution;
                for (a, b) in next[y].iter_mut().zip(out) {
                    *a += wx[y] / col * b;
                }
            }
        }
        let moved = rows
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max);
        let drop = history.last().map_or(f64::INFINITY, |&last: &f64| last - rate);
        history.push(rate);
        if drop.abs() < tol && moved < tol {
            return Ok(MarkovRd {
                rows,
                rate,
                history,
                allocation,
                iterations: it,
            });
        }
        rows = next;
    }
    Err(NtsError::NonConvergence {
        iterations: MAX_AB_ITERATIONS,
    })
}

/// Output-constrained rate of a memoryless codebook on super-symbols of a
/// Markov source: `R(P_M, Q_M, d)` with the block distortion measure.
pub fn block_rate(source: &MarkovModel, q: &[f64], order: usize, measure: &DistortionMeasure, d: f64) -> Result<RdPoint> {
    let p = source.block_distribution(order);
    rpqd(&p, q, &measure.block(order), d)
}
