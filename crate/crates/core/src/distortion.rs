//! Letter-level distortion tables and the distortion range quantities
//! `D_min`, `D_av` and `d_max`.

use serde::{Deserialize, Serialize};

use crate::error::{NtsError, Result};
use crate::markov::{matrix_to_text, MarkovModel, Word};

/// Nonnegative per-letter distortion `ρ(x, y)`, stored row-major as
/// `|X| x |Y|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMeasure {
    name: String,
    source_size: usize,
    reproduction_size: usize,
    table: Vec<f64>,
}

impl DistortionMeasure {
    pub fn new(name: impl Into<String>, table: &[Vec<f64>]) -> Result<Self> {
        let rows = table.len();
        let cols = table.first().map(Vec::len).unwrap_or(0);
        if rows == 0 || cols == 0 {
            return Err(NtsError::InvalidDistortion("empty table".into()));
        }
        let mut flat = Vec::with_capacity(rows * cols);
        for (r, row) in table.iter().enumerate() {
            if row.len() != cols {
                return Err(NtsError::InvalidDistortion(format!(
                    "row {r} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() || v < 0.0 {
                    return Err(NtsError::InvalidDistortion(format!(
                        "entry {v} in row {r} is not a finite nonnegative number"
                    )));
                }
                flat.push(v);
            }
        }
        Ok(Self {
            name: name.into(),
            source_size: rows,
            reproduction_size: cols,
            table: flat,
        })
    }

    pub fn hamming(size: usize) -> Self {
        let table: Vec<Vec<f64>> = (0..size)
            .map(|x| (0..size).map(|y| if x == y { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::new("hamming", &table).expect("hamming table is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn reproduction_size(&self) -> usize {
        self.reproduction_size
    }

    #[inline]
    pub fn rho(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.reproduction_size + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.table[x * self.reproduction_size..(x + 1) * self.reproduction_size]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.table
            .chunks(self.reproduction_size)
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.table.iter().copied().fold(0.0, f64::max)
    }

    /// Distortion between super-symbols of `order` letters: the average of the
    /// letter distortions. Super-symbols are indexed with the first letter
    /// most significant.
    pub fn block(&self, order: usize) -> Self {
        let nx = self.source_size.pow(order as u32);
        let ny = self.reproduction_size.pow(order as u32);
        let mut table = vec![vec![0.0; ny]; nx];
        for (xs, row) in table.iter_mut().enumerate() {
            let xl = crate::markov::state_letters(xs, self.source_size, order);
            for (ys, cell) in row.iter_mut().enumerate() {
                let yl = crate::markov::state_letters(ys, self.reproduction_size, order);
                let sum: f64 = xl.iter().zip(&yl).map(|(&a, &b)| self.rho(a, b)).sum();
                *cell = sum / order.max(1) as f64;
            }
        }
        Self::new(format!("{}^{order}", self.name), &table).expect("block table is valid")
    }

    fn check_shapes(&self, p: &[f64], q: &[f64]) -> Result<()> {
        if p.len() != self.source_size || q.len() != self.reproduction_size {
            return Err(NtsError::Shape(format!(
                "distributions of length {} and {} do not fit a {}x{} table",
                p.len(),
                q.len(),
                self.source_size,
                self.reproduction_size
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("name = \"{}\"\n", self.name);
        out.push_str(&matrix_to_text("table", &self.rows()));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let file: MeasureFile = toml::from_str(text)
            .map_err(|e| NtsError::InvalidDistortion(format!("measure file: {e}")))?;
        file.build(None)
    }
}

/// Serialized measure: either a named standard measure or an explicit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<f64>>>,
}

impl MeasureFile {
    /// `alphabet_size` sizes a named measure when no table is given.
    pub fn build(&self, alphabet_size: Option<usize>) -> Result<DistortionMeasure> {
        match (&self.table, self.name.as_str()) {
            (Some(t), _) => DistortionMeasure::new(self.name.clone(), t),
            (None, "hamming") => alphabet_size
                .map(DistortionMeasure::hamming)
                .ok_or_else(|| NtsError::InvalidDistortion("hamming needs an alphabet size".into())),
            (None, other) => Err(NtsError::InvalidDistortion(format!(
                "unknown measure '{other}' and no table given"
            ))),
        }
    }
}

/// `(1/len) Σ ρ(x_u, y_u)`.
pub fn word_distortion(x: &Word, y: &Word, measure: &DistortionMeasure) -> Result<f64> {
    if x.len() != y.len() {
        return Err(NtsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = x
        .letters()
        .iter()
        .zip(y.letters())
        .map(|(&a, &b)| measure.rho(a, b))
        .sum();
    Ok(sum / x.len() as f64)
}

/// `E_{P x Q}[ρ]`.
pub fn d_av(p: &[f64], q: &[f64], measure: &DistortionMeasure) -> Result<f64> {
    measure.check_shapes(p, q)?;
    let mut acc = 0.0;
    for (x, &px) in p.iter().enumerate() {
        for (y, &qy) in q.iter().enumerate() {
            acc += px * qy * measure.rho(x, y);
        }
    }
    Ok(acc)
}

/// `Σ_x P(x) min { ρ(x, y) : Q(y) > 0 }`.
pub fn d_min(p: &[f64], q: &[f64], measure: &DistortionMeasure) -> Result<f64> {
    measure.check_shapes(p, q)?;
    let mut acc = 0.0;
    for (x, &px) in p.iter().enumerate() {
        let m = q
            .iter()
            .enumerate()
            .filter(|(_, &qy)| qy > 0.0)
            .map(|(y, _)| measure.rho(x, y))
            .fold(f64::INFINITY, f64::min);
        if px > 0.0 {
            acc += px * m;
        }
    }
    Ok(acc)
}

/// Zero-rate distortion of a letter distribution: the best constant
/// reproduction letter, `min_y Σ_x P(x) ρ(x, y)`. Returns the distortion and
/// the minimizing letter.
pub fn d_max_of(p: &[f64], measure: &DistortionMeasure) -> Result<(f64, usize)> {
    if p.len() != measure.source_size() {
        return Err(NtsError::Shape(format!(
            "distribution of length {} does not fit {} source letters",
            p.len(),
            measure.source_size()
        )));
    }
    let mut best = (f64::INFINITY, 0);
    for y in 0..measure.reproduction_size() {
        let v: f64 = p.iter().enumerate().map(|(x, &px)| px * measure.rho(x, y)).sum();
        if v < best.0 {
            best = (v, y);
        }
    }
    Ok(best)
}

/// `d_max` of a source model, computed on its stationary letter marginal.
pub fn d_max(model: &MarkovModel, measure: &DistortionMeasure) -> Result<f64> {
    d_max_of(&model.letter_marginal(), measure).map(|(d, _)| d)
}

/// `D_min < d < D_av`.
pub fn in_nontrivial_range(p: &[f64], q: &[f64], measure: &DistortionMeasure, d: f64) -> Result<bool> {
    Ok(d_min(p, q, measure)? < d && d < d_av(p, q, measure)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(v: &[usize]) -> Word {
        Word(v.to_vec())
    }

    #[test]
    fn hamming_word_distortion() {
        let h = DistortionMeasure::hamming(2);
        assert_eq!(word_distortion(&w(&[0, 1, 0, 1]), &w(&[0, 1, 1, 1]), &h).unwrap(), 0.25);
        assert_eq!(word_distortion(&w(&[0, 1, 1]), &w(&[0, 1, 1]), &h).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_table_distortion() {
        let m = DistortionMeasure::new("t", &[vec![0.0, 2.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(word_distortion(&w(&[0, 1]), &w(&[1, 0]), &m).unwrap(), 1.5);
    }

    #[test]
    fn length_mismatch() {
        let h = DistortionMeasure::hamming(2);
        assert!(matches!(
            word_distortion(&w(&[0, 1]), &w(&[0]), &h),
            Err(NtsError::LengthMismatch { left: 2, right: 1 })
        ));
    }

    #[test]
    fn rejects_negative_entries() {
        assert!(DistortionMeasure::new("bad", &[vec![0.0, -1.0]]).is_err());
        assert!(DistortionMeasure::new("bad", &[vec![0.0, f64::NAN]]).is_err());
    }

    #[test]
    fn average_distortion_cases() {
        let h = DistortionMeasure::hamming(2);
        assert_eq!(d_av(&[0.5, 0.5], &[0.5, 0.5], &h).unwrap(), 0.5);
        let v = d_av(&[2.0 / 3.0, 1.0 / 3.0], &[1.0, 0.0], &h).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(d_av(&[1.0, 0.0], &[1.0, 0.0], &h).unwrap(), 0.0);
    }

    #[test]
    fn minimum_distortion_cases() {
        let h = DistortionMeasure::hamming(2);
        assert_eq!(d_min(&[0.3, 0.7], &[0.5, 0.5], &h).unwrap(), 0.0);
        assert_eq!(d_min(&[0.5, 0.5], &[0.0, 1.0], &h).unwrap(), 0.5);
        let t = DistortionMeasure::new("t", &[vec![3.0, 5.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(d_min(&[0.5, 0.5], &[0.5, 0.5], &t).unwrap(), 2.5);
    }

    #[test]
    fn zero_rate_distortion() {
        let h = DistortionMeasure::hamming(2);
        let toy = MarkovModel::new(1, &[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap();
        assert!((d_max(&toy, &h).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(d_max_of(&[0.5, 0.5], &h).unwrap().0, 0.5);
        assert_eq!(d_max_of(&[0.3, 0.7], &h).unwrap(), (0.3, 1));
    }

    #[test]
    fn block_measure_averages_letters() {
        let h = DistortionMeasure::hamming(2).block(2);
        assert_eq!(h.source_size(), 4);
        // 01 vs 10 differ in both letters, 00 vs 01 in one
        assert_eq!(h.rho(1, 2), 1.0);
        assert_eq!(h.rho(0, 1), 0.5);
        assert_eq!(h.rho(3, 3), 0.0);
    }

    #[test]
    fn text_round_trip() {
        let t = DistortionMeasure::new("custom", &[vec![0.0, 0.3], vec![1.7, 0.0]]).unwrap();
        let back = DistortionMeasure::from_text(&t.to_text()).unwrap();
        assert_eq!(t, back);
    }

    proptest! {
        #[test]
        fn dmin_never_exceeds_dav(p in 0.0f64..1.0, q in 0.01f64..0.99,
                                  t in proptest::collection::vec(0.0f64..5.0, 6)) {
            let m = DistortionMeasure::new("r", &[t[0..3].to_vec(), t[3..6].to_vec()]).unwrap();
            let pv = [p, 1.0 - p];
            let qv = [q * 0.5, q * 0.5, 1.0 - q];
            prop_assert!(d_min(&pv, &qv, &m).unwrap() <= d_av(&pv, &qv, &m).unwrap() + 1e-12);
        }

        #[test]
        fn permutation_invariance(pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..40),
                                  seed in any::<u64>()) {
            let m = DistortionMeasure::new("r", &[vec![0.0, 1.0, 2.5], vec![0.5, 0.0, 1.0], vec![3.0, 0.25, 0.0]]).unwrap();
            let x = Word(pairs.iter().map(|p| p.0).collect());
            let y = Word(pairs.iter().map(|p| p.1).collect());
            let mut idx: Vec<usize> = (0..pairs.len()).collect();
            let mut s = seed;
            for i in (1..idx.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                idx.swap(i, (s >> 33) as usize % (i + 1));
            }
            let xp = Word(idx.iter().map(|&i| x.0[i]).collect());
            let yp = Word(idx.iter().map(|&i| y.0[i]).collect());
            let a = word_distortion(&x, &y, &m).unwrap();
            let b = word_distortion(&xp, &yp, &m).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn concatenation_is_length_weighted(pairs in proptest::collection::vec((0usize..2, 0usize..2), 2..60),
                                            cut in 1usize..59) {
            let cut = cut.min(pairs.len() - 1);
            let h = DistortionMeasure::hamming(2);
            let x = Word(pairs.iter().map(|p| p.0).collect());
            let y = Word(pairs.iter().map(|p| p.1).collect());
            let whole = word_distortion(&x, &y, &h).unwrap();
            let a = word_distortion(&Word(x.0[..cut].to_vec()), &Word(y.0[..cut].to_vec()), &h).unwrap();
            let b = word_distortion(&Word(x.0[cut..].to_vec()), &Word(y.0[cut..].to_vec()), &h).unwrap();
            let n = pairs.len() as f64;
            prop_assert!((whole - (a * cut as f64 + b * (n - cut as f64)) / n).abs() < 1e-12);
        }
    }
}
