//! Discrete-alphabet Markov sources and codebook-generating chains.
//!
//! An order-`M` chain over an alphabet of size `A` has `A^M` states. A state
//! is the tuple of the last `M` letters `(x_1, .., x_M)` (oldest first) and is
//! indexed as `Σ x_k A^(M-k)`, so the most recent letter is the least
//! significant digit and emitting letter `a` from state `s` moves to
//! `(s * A + a) mod A^M`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NtsError, Result};

/// Row-sum deviation beyond which a transition matrix is rejected.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Largest state count solved directly; larger chains use power iteration.
pub const DIRECT_SOLVE_MAX_STATES: usize = 4096;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(NtsError::Shape("alphabet must have at least one symbol".into()));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of `order`-tuples over this alphabet.
    pub fn states(&self, order: usize) -> usize {
        self.size.pow(order as u32)
    }
}

/// A finite sequence of symbol indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Self(letters)
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_alphabet(&self, alphabet: Alphabet) -> Result<()> {
        match self.0.iter().find(|&&l| l >= alphabet.size()) {
            Some(&letter) => Err(NtsError::LetterOutOfRange {
                letter,
                size: alphabet.size(),
            }),
            None => Ok(()),
        }
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Letters of state `state` (oldest first) for an order-`order` chain.
pub fn state_letters(state: usize, alphabet_size: usize, order: usize) -> Vec<usize> {
    let mut letters = vec![0; order];
    let mut s = state;
    for slot in letters.iter_mut().rev() {
        *slot = s % alphabet_size;
        s /= alphabet_size;
    }
    letters
}

/// State index of an `order`-tuple given oldest letter first.
pub fn state_index(letters: &[usize], alphabet_size: usize) -> usize {
    letters.iter().fold(0, |acc, &l| acc * alphabet_size + l)
}

/// A validated, ergodic order-`M` Markov chain with its stationary state
/// distribution cached.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    alphabet: Alphabet,
    order: usize,
    // states x alphabet, row-major
    transitions: Vec<f64>,
    stationary: Vec<f64>,
    cumulative: Vec<f64>,
    stationary_cumulative: Vec<f64>,
}

impl MarkovModel {
    /// Validates `rows` as the letter-conditional transition matrix of an
    /// order-`order` chain: `|alphabet|^order` rows, `|alphabet|` columns.
    pub fn new(order: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        let alphabet = Alphabet::new(cols)?;
        let states = alphabet.states(order);
        if rows.len() != states {
            return Err(NtsError::Shape(format!(
                "order {order} over {cols} symbols needs {states} rows, got {}",
                rows.len()
            )));
        }
        let transitions = validate_rows(rows, cols)?;
        let successor = |s: usize, a: usize| (s * cols + a) % states;
        check_ergodic(states, |s, visit: &mut dyn FnMut(usize)| {
            for a in 0..cols {
                if transitions[s * cols + a] > 0.0 {
                    visit(successor(s, a));
                }
            }
        })?;
        let stationary = if order == 0 {
            vec![1.0]
        } else if states <= DIRECT_SOLVE_MAX_STATES {
            let mut dense = vec![0.0; states * states];
            for s in 0..states {
                for a in 0..cols {
                    dense[s * states + successor(s, a)] += transitions[s * cols + a];
                }
            }
            solve_stationary(&dense, states)
        } else {
            power_iteration(states, |pi, next| {
                next.iter_mut().for_each(|v| *v = 0.0);
                for s in 0..states {
                    for a in 0..cols {
                        next[successor(s, a)] += pi[s] * transitions[s * cols + a];
                    }
                }
            })?
        };
        Ok(Self::assemble(alphabet, order, transitions, stationary))
    }

    /// Infers the order from the matrix shape (`rows = cols^order`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if cols == 0 {
            return Err(NtsError::Shape("empty transition matrix".into()));
        }
        let mut order = 0;
        let mut states = 1usize;
        while states < rows.len() && cols > 1 {
            states *= cols;
            order += 1;
        }
        if states != rows.len() {
            return Err(NtsError::Shape(format!(
                "{} rows is not a power of the alphabet size {cols}",
                rows.len()
            )));
        }
        Self::new(order, rows)
    }

    /// Memoryless model with letter distribution `p`.
    pub fn memoryless(p: &[f64]) -> Result<Self> {
        Self::new(0, &[p.to_vec()])
    }

    fn assemble(alphabet: Alphabet, order: usize, transitions: Vec<f64>, stationary: Vec<f64>) -> Self {
        let n = alphabet.size();
        let mut cumulative = transitions.clone();
        for row in cumulative.chunks_mut(n) {
            prefix_sum(row);
        }
        let mut stationary_cumulative = stationary.clone();
        prefix_sum(&mut stationary_cumulative);
        Self {
            alphabet,
            order,
            transitions,
            stationary,
            cumulative,
            stationary_cumulative,
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_states(&self) -> usize {
        self.stationary.len()
    }

    /// Conditional letter distribution `P(. | state)`.
    pub fn row(&self, state: usize) -> &[f64] {
        let n = self.alphabet.size();
        &self.transitions[state * n..(state + 1) * n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.transitions
            .chunks(self.alphabet.size())
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn prob(&self, state: usize, letter: usize) -> f64 {
        self.transitions[state * self.alphabet.size() + letter]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn next_state(&self, state: usize, letter: usize) -> usize {
        (state * self.alphabet.size() + letter) % self.num_states()
    }

    /// Square `|S| x |S|` state transition matrix.
    pub fn state_transition_matrix(&self) -> Vec<Vec<f64>> {
        let s = self.num_states();
        let mut m = vec![vec![0.0; s]; s];
        for (i, row) in m.iter_mut().enumerate() {
            for a in 0..self.alphabet.size() {
                row[self.next_state(i, a)] += self.prob(i, a);
            }
        }
        m
    }

    /// Stationary distribution of single letters.
    pub fn letter_marginal(&self) -> Vec<f64> {
        let n = self.alphabet.size();
        if self.order == 0 {
            return self.row(0).to_vec();
        }
        let mut p = vec![0.0; n];
        for (s, &pi) in self.stationary.iter().enumerate() {
            p[s % n] += pi;
        }
        p
    }

    /// Stationary joint distribution of `m` consecutive letters, indexed like
    /// states (oldest letter most significant).
    pub fn block_distribution(&self, m: usize) -> Vec<f64> {
        let n = self.alphabet.size();
        let states = self.num_states();
        let blocks = n.pow(m as u32);
        let mut out = vec![0.0; blocks];
        // walk all m-letter continuations of each stationary start state
        let mut stack: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (s, &pi) in self.stationary.iter().enumerate() {
            if pi > 0.0 {
                stack.push((s, 0, 0, pi));
            }
        }
        while let Some((state, depth, index, prob)) = stack.pop() {
            if depth == m {
                out[index] += prob;
                continue;
            }
            for a in 0..n {
                let p = self.prob(state, a);
                if p > 0.0 {
                    let next = if states == 1 { 0 } else { self.next_state(state, a) };
                    stack.push((next, depth + 1, index * n + a, prob * p));
                }
            }
        }
        out
    }

    pub(crate) fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_cumulative(&self.stationary_cumulative, rng.gen::<f64>())
    }

    pub(crate) fn sample_letter<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let n = self.alphabet.size();
        sample_cumulative(&self.cumulative[state * n..(state + 1) * n], rng.gen::<f64>())
    }

    /// Draws a word of `length` letters. The first `order` letters come from
    /// the stationary state distribution, the rest follow the transition rows.
    pub fn sample_word<R: Rng + ?Sized>(&self, length: usize, rng: &mut R) -> Result<Word> {
        let mut buf = Vec::with_capacity(length);
        self.sample_into(length, rng, &mut buf)?;
        Ok(Word(buf))
    }

    /// Same as [`sample_word`](Self::sample_word) but reuses `buf`.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        length: usize,
        rng: &mut R,
        buf: &mut Vec<usize>,
    ) -> Result<()> {
        let mut gen = self.generator(length, rng)?;
        buf.clear();
        while let Some(letter) = gen.next_letter() {
            buf.push(letter);
        }
        Ok(())
    }

    /// Letter-by-letter generator; lets callers stop a word early.
    pub fn generator<'a, R: Rng + ?Sized>(
        &'a self,
        length: usize,
        rng: &'a mut R,
    ) -> Result<LetterGenerator<'a, R>> {
        let min = if self.order == 0 { 1 } else { self.order + 1 };
        if length < min {
            return Err(NtsError::Length { len: length, min });
        }
        Ok(LetterGenerator {
            model: self,
            rng,
            remaining: length,
            prefix: VecDeque::new(),
            state: None,
        })
    }

    /// Structured-text form: `alphabet_size`, `order`, `transitions`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "alphabet_size = {}\norder = {}\n",
            self.alphabet.size(),
            self.order
        );
        out.push_str(&matrix_to_text("transitions", &self.rows()));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let file: ModelFile =
            toml::from_str(text).map_err(|e| NtsError::Shape(format!("model file: {e}")))?;
        file.build()
    }
}

/// Serialized model fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub alphabet_size: usize,
    pub order: usize,
    pub transitions: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn build(&self) -> Result<MarkovModel> {
        if self.transitions.iter().any(|r| r.len() != self.alphabet_size) {
            return Err(NtsError::Shape(format!(
                "every transition row needs {} entries",
                self.alphabet_size
            )));
        }
        MarkovModel::new(self.order, &self.transitions)
    }
}

impl From<&MarkovModel> for ModelFile {
    fn from(m: &MarkovModel) -> Self {
        Self {
            alphabet_size: m.alphabet().size(),
            order: m.order(),
            transitions: m.rows(),
        }
    }
}

/// Emits `letters` one at a time; see [`MarkovModel::generator`].
pub struct LetterGenerator<'a, R: Rng + ?Sized> {
    model: &'a MarkovModel,
    rng: &'a mut R,
    remaining: usize,
    prefix: VecDeque<usize>,
    state: Option<usize>,
}

impl<R: Rng + ?Sized> LetterGenerator<'_, R> {
    pub fn next_letter(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let model = self.model;
        let state = match self.state {
            Some(s) => s,
            None => {
                let s = model.sample_state(self.rng);
                self.prefix = state_letters(s, model.alphabet.size(), model.order).into();
                self.state = Some(s);
                s
            }
        };
        if let Some(letter) = self.prefix.pop_front() {
            return Some(letter);
        }
        let letter = model.sample_letter(state, self.rng);
        self.state = Some(model.next_state(state, letter));
        Some(letter)
    }
}

/// Formats a matrix as a TOML array of arrays with 17 significant digits.
pub(crate) fn matrix_to_text(key: &str, rows: &[Vec<f64>]) -> String {
    let mut out = format!("{key} = [\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format_full(*x)).collect();
        out.push_str(&format!("  [{}],\n", cells.join(", ")));
    }
    out.push_str("]\n");
    out
}

pub(crate) fn format_full(x: f64) -> String {
    format!("{x:.16e}")
}

fn prefix_sum(row: &mut [f64]) {
    let mut acc = 0.0;
    for v in row.iter_mut() {
        acc += *v;
        *v = acc;
    }
}

fn sample_cumulative(cumulative: &[f64], u: f64) -> usize {
    let total = cumulative[cumulative.len() - 1];
    let target = u * total;
    if let Some(i) = cumulative.iter().position(|&c| target < c) {
        return i;
    }
    // rounding pushed the target onto the total: take the last symbol with mass
    let mut last = 0;
    let mut prev = 0.0;
    for (i, &c) in cumulative.iter().enumerate() {
        if c > prev {
            last = i;
        }
        prev = c;
    }
    last
}

fn validate_rows(rows: &[Vec<f64>], cols: usize) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * cols);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(NtsError::Shape(format!(
                "row {r} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(NtsError::InvalidEntry { row: r, col: c, value: v });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(NtsError::RowSum { row: r, sum });
        }
        flat.extend(row.iter().map(|v| v / sum));
    }
    Ok(flat)
}

/// Requires exactly one closed communicating class and that it is aperiodic,
/// which is the condition for a unique stationary distribution that power
/// iteration also converges to. Transient states are allowed.
fn check_ergodic<F>(states: usize, successors: F) -> Result<()>
where
    F: Fn(usize, &mut dyn FnMut(usize)),
{
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); states];
    for (s, outs) in adj.iter_mut().enumerate() {
        successors(s, &mut |t| outs.push(t));
    }
    let component = strongly_connected_components(&adj);
    let count = component.iter().copied().max().map_or(0, |c| c + 1);
    let mut closed = vec![true; count];
    for (u, outs) in adj.iter().enumerate() {
        if outs.is_empty() {
            closed[component[u]] = false;
        }
        for &v in outs {
            if component[v] != component[u] {
                closed[component[u]] = false;
            }
        }
    }
    let closed_classes: Vec<usize> = (0..count).filter(|&c| closed[c]).collect();
    if closed_classes.len() != 1 {
        return Err(NtsError::NonErgodic(format!(
            "{} closed communicating classes",
            closed_classes.len()
        )));
    }
    let class = closed_classes[0];
    let members: Vec<usize> = (0..states).filter(|&s| component[s] == class).collect();
    let mut level = vec![usize::MAX; states];
    let mut queue = VecDeque::from([members[0]]);
    level[members[0]] = 0;
    let mut period = 0usize;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                period = gcd(period, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    if period != 1 {
        return Err(NtsError::NonErgodic(format!("chain has period {period}")));
    }
    Ok(())
}

/// Kosaraju's algorithm; returns a component id per state.
fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if let Some(&v) = adj[u].get(*next) {
                *next += 1;
                if !seen[v] {
                    seen[v] = true;
                    stack.push((v, 0));
                }
            } else {
                order.push(u);
                stack.pop();
            }
        }
    }
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, outs) in adj.iter().enumerate() {
        for &v in outs {
            radj[v].push(u);
        }
    }
    let mut component = vec![usize::MAX; n];
    let mut next_id = 0;
    for &root in order.iter().rev() {
        if component[root] != usize::MAX {
            continue;
        }
        component[root] = next_id;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for &v in &radj[u] {
                if component[v] == usize::MAX {
                    component[v] = next_id;
                    stack.push(v);
                }
            }
        }
        next_id += 1;
    }
    component
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Stationary distribution `Π = Π P` of a square row-stochastic matrix.
pub fn stationary_distribution(matrix: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = matrix.len();
    if n == 0 {
        return Err(NtsError::Shape("empty matrix".into()));
    }
    let flat = validate_rows(matrix, n)?;
    check_ergodic(n, |s, visit: &mut dyn FnMut(usize)| {
        for t in 0..n {
            if flat[s * n + t] > 0.0 {
                visit(t);
            }
        }
    })?;
    if n <= DIRECT_SOLVE_MAX_STATES {
        Ok(solve_stationary(&flat, n))
    } else {
        power_iteration(n, |pi, next| {
            next.iter_mut().for_each(|v| *v = 0.0);
            for s in 0..n {
                for t in 0..n {
                    next[t] += pi[s] * flat[s * n + t];
                }
            }
        })
    }
}

fn solve_stationary(flat: &[f64], n: usize) -> Vec<f64> {
    // (P^T - I) π = 0 with the last equation replaced by Σ π = 1
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = flat[i * n + j];
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .expect("ergodic chain has a nonsingular stationary system");
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    clipped.into_iter().map(|v| v / sum).collect()
}

fn power_iteration<F>(n: usize, step: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..POWER_MAX_ITERS {
        step(&pi, &mut next);
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= sum);
        let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if diff < POWER_TOL {
            return Ok(pi);
        }
    }
    Err(NtsError::NonConvergence {
        iterations: POWER_MAX_ITERS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn toy() -> MarkovModel {
        MarkovModel::new(1, &[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap()
    }

    #[test]
    fn toy_source_stationary() {
        let m = toy();
        assert!((m.stationary()[0] - 2.0 / 3.0).abs() < 1e-10);
        assert!((m.stationary()[1] - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn uniform_chain_has_uniform_stationary() {
        let m = MarkovModel::new(1, &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(m.stationary(), &[0.5, 0.5]);
        let d = stationary_distribution(&[
            vec![0.2, 0.3, 0.5],
            vec![0.5, 0.2, 0.3],
            vec![0.3, 0.5, 0.2],
        ])
        .unwrap();
        for p in d {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_chain_is_rejected() {
        let err = MarkovModel::new(1, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, NtsError::NonErgodic(_)));
    }

    #[test]
    fn periodic_chain_is_rejected() {
        let err = stationary_distribution(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, NtsError::NonErgodic(_)));
    }

    #[test]
    fn row_sum_error() {
        let err = MarkovModel::new(1, &[vec![0.8, 0.3], vec![0.4, 0.6]]).unwrap_err();
        assert!(matches!(err, NtsError::RowSum { row: 0, .. }));
    }

    #[test]
    fn shape_errors() {
        assert!(MarkovModel::new(2, &[vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
        assert!(MarkovModel::from_rows(&vec![vec![0.5, 0.5]; 3]).is_err());
        let m = MarkovModel::from_rows(&vec![vec![0.5, 0.5]; 4]).unwrap();
        assert_eq!(m.order(), 2);
    }

    #[test]
    fn second_order_stationary_matches_power_iteration() {
        let rows = vec![
            vec![0.9, 0.1],
            vec![0.3, 0.7],
            vec![0.6, 0.4],
            vec![0.2, 0.8],
        ];
        let m = MarkovModel::new(2, &rows).unwrap();
        let p = m.state_transition_matrix();
        // power iteration oracle
        let mut pi = vec![0.25; 4];
        for _ in 0..100_000 {
            let mut next = vec![0.0; 4];
            for i in 0..4 {
                for j in 0..4 {
                    next[j] += pi[i] * p[i][j];
                }
            }
            let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-15 {
                break;
            }
        }
        for (a, b) in m.stationary().iter().zip(&pi) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn stationary_is_invariant() {
        let m = MarkovModel::new(
            1,
            &[vec![0.1, 0.6, 0.3], vec![0.0, 0.5, 0.5], vec![0.7, 0.0, 0.3]],
        )
        .unwrap();
        let p = m.state_transition_matrix();
        let pi = m.stationary();
        let l1: f64 = (0..3)
            .map(|j| ((0..3).map(|i| pi[i] * p[i][j]).sum::<f64>() - pi[j]).abs())
            .sum();
        assert!(l1 < 1e-10);
    }

    #[test]
    fn deterministic_chain_word() {
        // state 1 is transient, state 0 absorbing: unique stationary [1, 0]
        let m = MarkovModel::new(1, &[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.stationary(), &[1.0, 0.0]);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        assert_eq!(m.sample_word(5, &mut rng).unwrap().0, vec![0; 5]);
    }

    #[test]
    fn three_state_cycle_is_periodic() {
        let err = stationary_distribution(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap_err();
        assert!(matches!(err, NtsError::NonErgodic(_)));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let m = toy();
        let a = m.sample_word(64, &mut Xoshiro256PlusPlus::seed_from_u64(9)).unwrap();
        let b = m.sample_word(64, &mut Xoshiro256PlusPlus::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_sample_matches_stationary_letters() {
        let m = toy();
        let w = m
            .sample_word(1_000_000, &mut Xoshiro256PlusPlus::seed_from_u64(1))
            .unwrap();
        let zeros = w.letters().iter().filter(|&&l| l == 0).count() as f64 / 1e6;
        assert!((zeros - 2.0 / 3.0).abs() < 0.005, "{zeros}");
    }

    #[test]
    fn too_short_word() {
        let m = toy();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0);
        assert!(matches!(
            m.sample_word(1, &mut rng),
            Err(NtsError::Length { len: 1, min: 2 })
        ));
    }

    #[test]
    fn block_distribution_of_toy_source() {
        let m = toy();
        let b = m.block_distribution(2);
        let pi0 = 2.0 / 3.0;
        let pi1 = 1.0 / 3.0;
        let expect = [pi0 * 0.8, pi0 * 0.2, pi1 * 0.4, pi1 * 0.6];
        for (a, e) in b.iter().zip(expect) {
            assert!((a - e).abs() < 1e-12);
        }
        assert_eq!(m.letter_marginal().len(), 2);
    }

    #[test]
    fn text_round_trip() {
        let m = toy();
        let back = MarkovModel::from_text(&m.to_text()).unwrap();
        assert_eq!(m.rows(), back.rows());
        assert!(m.to_text().contains("8.0000000000000004e-1"));
    }

    #[test]
    fn state_indexing_puts_recent_letter_last() {
        assert_eq!(state_index(&[1, 0], 2), 2);
        assert_eq!(state_letters(2, 2, 2), vec![1, 0]);
        let m = MarkovModel::from_rows(&vec![vec![0.5, 0.5]; 4]).unwrap();
        assert_eq!(m.next_state(2, 1), 1);
    }
}
