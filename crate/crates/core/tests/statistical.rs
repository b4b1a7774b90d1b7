//! Seeded Monte Carlo checks of the stochastic components.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use nts_core::distortion::DistortionMeasure;
use nts_core::info::{l1_distance, total_variation};
use nts_core::markov::{state_index, MarkovModel, Word};
use nts_core::nts::{
    nts_markov_run, nts_markov_run_observed, nts_modified_run, nts_original_run, CodebookDistribution, RunParams,
    SampledSource,
};
use nts_core::rd::{markov_rate, rpqd, WeightsMode};
use nts_core::seed::stream_rng;
use nts_core::substream::{decompose, slope_diagnostic, PairSummary, DEFAULT_PAIR_FLOOR};

fn toy() -> MarkovModel {
    MarkovModel::new(1, &[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap()
}

fn iid_q(d: &CodebookDistribution) -> Vec<f64> {
    match d {
        CodebookDistribution::Iid { q, .. } => q.clone(),
        CodebookDistribution::Markov { .. } => unreachable!(),
    }
}

#[test]
fn state_occupancy_converges() {
    let m = MarkovModel::new(2, &[vec![0.7, 0.3], vec![0.4, 0.6], vec![0.5, 0.5], vec![0.35, 0.65]]).unwrap();
    let l = 100_000;
    let bound = 5.0 / (l as f64).sqrt();
    let mut within = 0;
    for seed in 0..100 {
        let w = m.sample_word(l, &mut stream_rng(seed)).unwrap();
        let mut counts = [0.0; 4];
        for t in 2..=l {
            counts[state_index(&w.letters()[t - 2..t], 2)] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        let occ: Vec<f64> = counts.iter().map(|c| c / total).collect();
        if l1_distance(&occ, m.stationary()) < bound {
            within += 1;
        }
    }
    assert!(within >= 99, "{within} of 100 seeds within {bound}");
}

#[test]
fn substream_letters_follow_source_conditionals() {
    let source = toy();
    let code = MarkovModel::new(1, &[vec![0.55, 0.45], vec![0.3, 0.7]]).unwrap();
    let h = DistortionMeasure::hamming(2);
    let x = source.sample_word(200_000, &mut stream_rng(21)).unwrap();
    let y = code.sample_word(200_000, &mut stream_rng(22)).unwrap();
    let dec = decompose(&[x], &[y], 1, &h).unwrap();
    let mut tested = 0;
    for (sx, sy) in dec.occupied().collect::<Vec<_>>() {
        let letters = dec.letters(sx, sy);
        if letters.len() < 10_000 {
            continue;
        }
        let mut obs = [0.0; 2];
        for &(a, _) in letters {
            obs[a] += 1.0;
        }
        let n = letters.len() as f64;
        let stat: f64 = (0..2)
            .map(|a| {
                let e = n * source.prob(sx, a);
                (obs[a] - e).powi(2) / e
            })
            .sum();
        let p = 1.0 - ChiSquared::new(1.0).unwrap().cdf(stat);
        assert!(p > 0.01, "pair ({sx},{sy}): chi-square p = {p}");
        tested += 1;
    }
    assert_eq!(tested, 4);
}

#[test]
fn modified_nts_reaches_symmetric_optimum() {
    let h = DistortionMeasure::hamming(2);
    let source = SampledSource::Markov {
        model: MarkovModel::memoryless(&[0.5, 0.5]).unwrap(),
        letters: 40,
        seed: 3,
    };
    let params = RunParams::new(40, 2000, 0.25).with_seed(3);
    let t = nts_modified_run(&source, &[0.6, 0.4], 1, 40, &h, params, None).unwrap();
    let q = iid_q(&t.last().distribution);
    assert!(total_variation(&q, &[0.5, 0.5]) < 0.05, "{q:?}");
}

#[test]
fn original_nts_rates_do_not_climb() {
    let h = DistortionMeasure::hamming(2);
    let p = [0.5, 0.5];
    let source = SampledSource::Markov {
        model: MarkovModel::memoryless(&p).unwrap(),
        letters: 50,
        seed: 8,
    };
    let oracle = |d: &CodebookDistribution| rpqd(&p, &iid_q(d), &h, 0.45).map(|r| r.rate_bits());
    let params = RunParams::new(30, 1, 0.45).with_seed(8);
    let t = nts_original_run(&source, &[0.7, 0.3], 50, &h, params, Some(&oracle)).unwrap();
    let rates: Vec<f64> = t.records.iter().map(|r| r.oracle_rate_bits.unwrap()).collect();
    let mut best = rates[0];
    for &r in &rates[1..] {
        assert!(r <= best + 0.05, "rate {r} exceeds running minimum {best} by more than noise");
        best = best.min(r);
    }
}

#[test]
fn loose_threshold_reestimates_own_chain() {
    let h = DistortionMeasure::hamming(2);
    let q0 = MarkovModel::new(1, &[vec![0.7, 0.3], vec![0.25, 0.75]]).unwrap();
    let source = SampledSource::Markov {
        model: toy(),
        letters: 50,
        seed: 4,
    };
    // K L = 1e5 transitions per update
    let params = RunParams::new(1, 2000, 1.0).with_seed(4).with_smoothing(0.0);
    let t = nts_markov_run(&source, &q0, 50, &h, params, None).unwrap();
    let next = t.last().distribution.flat();
    let tv = 0.5 * next.iter().zip(q0.rows().concat()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "row-averaged TV {tv}");
}

#[test]
fn oracle_allocation_has_equal_slopes() {
    let h = DistortionMeasure::hamming(2);
    let source = toy();
    let rows = vec![vec![0.7, 0.3], vec![0.45, 0.55]];
    let alloc = markov_rate(&source, &rows, &h, 0.2, &WeightsMode::Product).unwrap();
    let pairs: Vec<PairSummary> = (0..4)
        .map(|i| PairSummary {
            source_state: i / 2,
            code_state: i % 2,
            length: 10_000,
            weight: alloc.weights[i],
            distortion: alloc.distortions[i],
        })
        .collect();
    let report = slope_diagnostic(&pairs, &source, &rows, &h, DEFAULT_PAIR_FLOOR).unwrap();
    assert!(report.spread < 1e-3, "spread {}", report.spread);
    assert!((report.pairs.len()) == 4);
}

// At d = d_max the finite-L codebook drifts toward a near-degenerate chain and
// the per-pair slopes fan out (late spread about 0.6 against 0.15 early for
// every seed tried), so this check does not hold at desk scale.
#[test]
#[ignore = "late spread exceeds early spread at d = d_max, L = 30"]
fn late_slope_spread_shrinks() {
    let h = DistortionMeasure::hamming(2);
    let source_model = toy();
    let q0 = MarkovModel::new(1, &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    let n = 50;
    let mut shrunk = 0;
    for seed in 0..20u64 {
        let source = SampledSource::Markov {
            model: source_model.clone(),
            letters: 30,
            seed: 500 + seed,
        };
        let params = RunParams::new(n, 2000, 1.0 / 3.0).with_seed(500 + seed);
        let mut spreads = Vec::new();
        let mut observer = |m: &nts_core::nts::IterationMatches<'_>| {
            if m.iteration != 1 && m.iteration != n {
                return;
            }
            let codewords: Vec<Word> = m.records.iter().map(|r| r.codeword.clone()).collect();
            let dec = decompose(m.sources, &codewords, 1, &h).unwrap();
            let report =
                slope_diagnostic(&dec.summary(), &source_model, &m.codebook.rows(), &h, DEFAULT_PAIR_FLOOR).unwrap();
            spreads.push(report.spread);
        };
        nts_markov_run_observed(&source, &q0, 30, &h, params, None, &mut observer).unwrap();
        if spreads[1] <= spreads[0] {
            shrunk += 1;
        }
    }
    assert!(shrunk >= 16, "late spread <= early spread in {shrunk} of 20 runs");
}
