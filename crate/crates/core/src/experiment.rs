//! Config-driven experiment runner.
//!
//! A run directory holds `trace.csv` (one row per iteration, bit-reproducible),
//! `final_distribution.toml`, `manifest.toml` (the effective config plus an
//! input hash; feeding it back to `nts run --config` reproduces the trace) and
//! `timing.csv` with per-iteration wall-clock times. A config listing several
//! word lengths writes one such directory per length, named `L<length>`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distortion::{d_max, DistortionMeasure, MeasureFile};
use crate::error::NtsError;
use crate::markov::{state_letters, MarkovModel, ModelFile};
use crate::nts::{
    nts_markov_run_observed, nts_modified_run, nts_original_run, CodebookDistribution, IterationRecord,
    NtsTrace, RunParams, SampledSource, SourceWords, StreamingSource,
};
use crate::rd::{alternating_min_markov, blahut_arimoto_counted, block_rate, markov_rate, WeightsMode};
use crate::substream::{decompose, slope_diagnostic, PairSlope, DEFAULT_PAIR_FLOOR};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{0}")]
    Nts(#[from] NtsError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("no trace found in {0}")]
    MissingTrace(PathBuf),
}

impl ExperimentError {
    fn config(field: &str, message: impl std::fmt::Display) -> Self {
        Self::Config {
            field: field.into(),
            message: message.to_string(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    /// 2 config, 3 exhausted search, 4 numeric non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Nts(NtsError::Exhausted { .. } | NtsError::ExhaustedAt { .. }) => 3,
            Self::Nts(NtsError::NonConvergence { .. }) => 4,
            _ => 1,
        }
    }
}

pub type ExpResult<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Original,
    Modified,
    Markov,
    DeterministicAb,
    AlternatingMin,
}

impl Algorithm {
    pub fn is_stochastic(self) -> bool {
        matches!(self, Self::Original | Self::Modified | Self::Markov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleEval {
    #[default]
    EveryIteration,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceMode {
    /// Independent words per match.
    #[default]
    Fresh,
    /// Consecutive blocks of one realization (dependent words).
    Streaming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lengths {
    One(usize),
    Many(Vec<usize>),
}

impl Lengths {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Lengths::One(l) => vec![*l],
            Lengths::Many(v) => v.clone(),
        }
    }
}

/// Initial codebook distribution; uniform when absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Q0Spec {
    /// Distribution over super-symbols (`original`, `modified`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Vec<f64>>,
    /// Transition rows (`markov`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Vec<Vec<f64>>>,
}

fn default_smoothing() -> f64 {
    crate::nts::DEFAULT_SMOOTHING
}

fn default_cap() -> u64 {
    crate::codebook::DEFAULT_CAP
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub d: f64,
    /// Block order `M`; for `markov` it must equal the source order and
    /// defaults to it.
    #[serde(default, alias = "M", skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    /// Codeword length `L`: super-symbols for i.i.d. codebooks, letters for
    /// Markov codebooks.
    #[serde(default, alias = "L", skip_serializing_if = "Option::is_none")]
    pub length: Option<Lengths>,
    #[serde(default = "default_one", alias = "K")]
    pub depth: usize,
    #[serde(default, alias = "N")]
    pub iterations: usize,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    #[serde(default = "default_cap")]
    pub cap: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub oracle_eval: OracleEval,
    #[serde(default)]
    pub source_mode: SourceMode,
    /// Write the sub-stream slope diagnostic of the first and last
    /// iterations (`markov` only).
    #[serde(default)]
    pub substream: bool,
    /// Stopping tolerance of the deterministic algorithms, in nats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub source: ModelFile,
    pub measure: MeasureFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Q0Spec>,
    /// Written by the runner; ignored on input.
    #[serde(default, skip_serializing)]
    pub manifest: Option<toml::Value>,
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> ExpResult<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .unwrap_or("config")
                .to_string();
            ExperimentError::Config { field, message: msg }
        })
    }

    pub fn from_file(path: &Path) -> ExpResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> ExpResult<Validated> {
        let source = self.source.build().map_err(|e| ExperimentError::config("source", e))?;
        let measure = self
            .measure
            .build(Some(source.alphabet().size()))
            .map_err(|e| ExperimentError::config("measure", e))?;
        if measure.source_size() != source.alphabet().size() {
            return Err(ExperimentError::config(
                "measure",
                format!(
                    "table has {} rows but the source alphabet has {} letters",
                    measure.source_size(),
                    source.alphabet().size()
                ),
            ));
        }
        if self.d.is_nan() || self.d <= 0.0 || !self.d.is_finite() {
            return Err(ExperimentError::config("d", "must be a positive number"));
        }
        let order = match (self.algorithm, self.order) {
            (Algorithm::Markov | Algorithm::AlternatingMin, None) => source.order(),
            (Algorithm::Markov | Algorithm::AlternatingMin, Some(m)) if m != source.order() => {
                return Err(ExperimentError::config(
                    "order",
                    format!("must equal the source order {}", source.order()),
                ))
            }
            (Algorithm::Original, Some(m)) if m != 1 => {
                return Err(ExperimentError::config("order", "the original algorithm codes single letters"))
            }
            (_, Some(0)) => return Err(ExperimentError::config("order", "must be at least 1")),
            (_, m) => m.unwrap_or(1),
        };
        if self.algorithm.is_stochastic() {
            let dmax = d_max(&source, &measure)?;
            if self.d > dmax + 1e-12 {
                return Err(ExperimentError::config("d", format!("exceeds d_max = {dmax}")));
            }
            let lengths = self
                .length
                .as_ref()
                .ok_or_else(|| ExperimentError::config("length", "required for stochastic runs"))?
                .values();
            if lengths.is_empty() || lengths.contains(&0) {
                return Err(ExperimentError::config("length", "lengths must be positive"));
            }
            if self.algorithm == Algorithm::Markov && lengths.iter().any(|&l| l < order + 1) {
                return Err(ExperimentError::config("length", format!("must be at least {}", order + 1)));
            }
            if self.depth < 1 {
                return Err(ExperimentError::config("depth", "must be at least 1"));
            }
            if self.iterations < 1 {
                return Err(ExperimentError::config("iterations", "must be at least 1"));
            }
            if self.smoothing.is_nan() || self.smoothing < 0.0 {
                return Err(ExperimentError::config("smoothing", "must be nonnegative"));
            }
            if self.cap < 1 {
                return Err(ExperimentError::config("cap", "must be at least 1"));
            }
        }
        if self.substream && self.algorithm != Algorithm::Markov {
            return Err(ExperimentError::config("substream", "only available for markov runs"));
        }
        let ny = measure.reproduction_size();
        let q0 = self.q0.clone().unwrap_or_default();
        let initial = match self.algorithm {
            Algorithm::Original | Algorithm::Modified => {
                let n = ny.pow(order as u32);
                let q = q0.distribution.unwrap_or_else(|| crate::info::uniform(n));
                if q.len() != n || q.iter().any(|&v| v.is_nan() || v <= 0.0) {
                    return Err(ExperimentError::config(
                        "q0.distribution",
                        format!("needs {n} strictly positive entries"),
                    ));
                }
                crate::info::normalized(&q, 1e-9).map_err(|e| ExperimentError::config("q0.distribution", e))?;
                CodebookDistribution::Iid { q, order }
            }
            Algorithm::Markov => {
                let rows = q0
                    .transitions
                    .unwrap_or_else(|| vec![crate::info::uniform(ny); ny.pow(order as u32)]);
                if rows.iter().flatten().any(|&v| v.is_nan() || v <= 0.0) {
                    return Err(ExperimentError::config("q0.transitions", "entries must be strictly positive"));
                }
                MarkovModel::new(order, &rows).map_err(|e| ExperimentError::config("q0.transitions", e))?;
                CodebookDistribution::Markov { rows, order }
            }
            _ => CodebookDistribution::Iid {
                q: crate::info::uniform(ny.pow(order as u32)),
                order,
            },
        };
        Ok(Validated {
            source,
            measure,
            order,
            initial,
        })
    }
}

/// Objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Validated {
    pub source: MarkovModel,
    pub measure: DistortionMeasure,
    pub order: usize,
    pub initial: CodebookDistribution,
}

/// Formats with 12 significant digits: plain notation for exponents in
/// `[-5, 12)`, scientific otherwise. NaN becomes an empty field.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return String::new();
    }
    if v == 0.0 {
        return "0".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, mantissa.parse::<f64>().unwrap() * 10f64.powi(exp));
        trim_zeros(&s)
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn label(letters: &[usize]) -> String {
    letters.iter().map(|l| l.to_string()).collect()
}

/// Column names of a flattened codebook distribution.
pub fn distribution_columns(dist: &CodebookDistribution, alphabet_size: usize) -> Vec<String> {
    match dist {
        CodebookDistribution::Iid { q, order } => (0..q.len())
            .map(|s| format!("Q_{}", label(&state_letters(s, alphabet_size, *order))))
            .collect(),
        CodebookDistribution::Markov { rows, order } => {
            let mut cols = Vec::new();
            for (s, row) in rows.iter().enumerate() {
                for a in 0..row.len() {
                    if *order == 0 {
                        cols.push(format!("Q_{a}"));
                    } else {
                        cols.push(format!("Q_{a}given{}", label(&state_letters(s, alphabet_size, *order))));
                    }
                }
            }
            cols
        }
    }
}

pub fn trace_csv(trace: &NtsTrace, alphabet_size: usize) -> String {
    let mut out = String::from("iteration,");
    out.push_str(&distribution_columns(&trace.records[0].distribution, alphabet_size).join(","));
    out.push_str(",mean_match_index,mean_accept_distortion,oracle_rate_bits\n");
    for r in &trace.records {
        let _ = write!(out, "{}", r.iteration);
        for v in r.distribution.flat() {
            let _ = write!(out, ",{}", format_number(v));
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            format_number(r.mean_match_index),
            format_number(r.mean_accept_distortion),
            format_number(r.oracle_rate_bits.unwrap_or(f64::NAN))
        );
    }
    out
}

fn final_distribution_text(dist: &CodebookDistribution, alphabet_size: usize) -> String {
    match dist {
        CodebookDistribution::Iid { q, order } => {
            let cells: Vec<String> = q.iter().map(|v| format!("{v:.16e}")).collect();
            format!(
                "kind = \"iid\"\nalphabet_size = {alphabet_size}\norder = {order}\ndistribution = [{}]\n",
                cells.join(", ")
            )
        }
        CodebookDistribution::Markov { rows, order } => {
            let mut out = format!("kind = \"markov\"\nalphabet_size = {alphabet_size}\norder = {order}\n");
            out.push_str(&crate::markov::matrix_to_text("transitions", rows));
            out
        }
    }
}

/// Hash of the effective config, in the style of a git blob id.
pub fn content_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", text.len()).as_bytes());
    h.update(text.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Outcome of a single run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub length: Option<usize>,
    pub trace: NtsTrace,
    pub substream_csv: Option<String>,
}

fn sources_for(config: &ExperimentConfig, v: &Validated, letters: usize) -> ExpResult<Box<dyn SourceWords>> {
    Ok(match config.source_mode {
        SourceMode::Fresh => Box::new(SampledSource::Markov {
            model: v.source.clone(),
            letters,
            seed: config.master_seed,
        }),
        SourceMode::Streaming => Box::new(StreamingSource::new(
            &v.source,
            letters,
            config.depth.max(1),
            config.iterations,
            config.master_seed,
        )?),
    })
}

/// Runs one configuration with a single codeword length in memory.
pub fn run_single(config: &ExperimentConfig, length: Option<usize>) -> ExpResult<RunOutput> {
    let v = config.validate()?;
    let d = config.d;
    let params = RunParams {
        iterations: config.iterations,
        depth: config.depth,
        d,
        cap: config.cap,
        smoothing: config.smoothing,
        seed: config.master_seed,
    };
    let source = &v.source;
    let measure = &v.measure;
    let order = v.order;
    let want_oracle = config.oracle_eval == OracleEval::EveryIteration;
    let mut substream_csv = None;
    let trace = match config.algorithm {
        Algorithm::Original | Algorithm::Modified => {
            let blocks = length.expect("validated");
            let words = sources_for(config, &v, blocks * order)?;
            let oracle = |dist: &CodebookDistribution| match dist {
                CodebookDistribution::Iid { q, .. } => block_rate(source, q, order, measure, d).map(|r| r.rate_bits()),
                CodebookDistribution::Markov { .. } => unreachable!("i.i.d. run"),
            };
            let q0 = match &v.initial {
                CodebookDistribution::Iid { q, .. } => q.clone(),
                _ => unreachable!("validated"),
            };
            let oracle_ref: Option<crate::nts::Oracle<'_>> = if want_oracle { Some(&oracle) } else { None };
            if config.algorithm == Algorithm::Original {
                nts_original_run(words.as_ref(), &q0, blocks, measure, params, oracle_ref)?
            } else {
                nts_modified_run(words.as_ref(), &q0, order, blocks, measure, params, oracle_ref)?
            }
        }
        Algorithm::Markov => {
            let letters = length.expect("validated");
            let words = sources_for(config, &v, letters)?;
            let oracle = |dist: &CodebookDistribution| match dist {
                CodebookDistribution::Markov { rows, .. } => {
                    markov_rate(source, rows, measure, d, &WeightsMode::Product).map(|a| crate::info::nats_to_bits(a.average_rate()))
                }
                CodebookDistribution::Iid { .. } => unreachable!("markov run"),
            };
            let rows = match &v.initial {
                CodebookDistribution::Markov { rows, .. } => rows.clone(),
                _ => unreachable!("validated"),
            };
            let q0 = MarkovModel::new(order, &rows)?;
            let oracle_ref: Option<crate::nts::Oracle<'_>> = if want_oracle { Some(&oracle) } else { None };
            let mut csv = String::from("iteration,source_state,code_state,length,weight,distortion,slope\n");
            let mut failure = None;
            let last = config.iterations;
            let mut observer = |m: &crate::nts::IterationMatches<'_>| {
                if !config.substream || (m.iteration != 1 && m.iteration != last) || failure.is_some() {
                    return;
                }
                let codewords: Vec<_> = m.records.iter().map(|r| r.codeword.clone()).collect();
                let result = decompose(m.sources, &codewords, order, measure).and_then(|dec| {
                    slope_diagnostic(&dec.summary(), source, &m.codebook.rows(), measure, DEFAULT_PAIR_FLOOR)
                });
                match result {
                    Ok(report) => {
                        for (p, slope) in &report.pairs {
                            let s = match slope {
                                PairSlope::Slope(l) => format_number(*l),
                                _ => String::new(),
                            };
                            let _ = writeln!(
                                csv,
                                "{},{},{},{},{},{},{}",
                                m.iteration,
                                p.source_state,
                                p.code_state,
                                p.length,
                                format_number(p.weight),
                                format_number(p.distortion),
                                s
                            );
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            };
            let trace = nts_markov_run_observed(words.as_ref(), &q0, letters, measure, params, oracle_ref, &mut observer)?;
            if let Some(e) = failure {
                return Err(e.into());
            }
            if config.substream {
                substream_csv = Some(csv);
            }
            trace
        }
        Algorithm::DeterministicAb => {
            let p = source.block_distribution(order);
            let tol = config.tol.unwrap_or(1e-14);
            let (point, steps) = blahut_arimoto_counted(&p, &measure.block(order), d, tol)?;
            single_row(
                CodebookDistribution::Iid {
                    q: point.output_distribution.clone(),
                    order,
                },
                steps,
                point.distortion,
                point.rate_bits(),
            )
        }
        Algorithm::AlternatingMin => {
            let tol = config.tol.unwrap_or(1e-13);
            let r = alternating_min_markov(source, measure, d, &WeightsMode::Product, tol)?;
            single_row(
                CodebookDistribution::Markov {
                    rows: r.rows.clone(),
                    order,
                },
                r.iterations,
                r.allocation.average_distortion(),
                r.rate_bits(),
            )
        }
    };
    Ok(RunOutput {
        dir: PathBuf::new(),
        length,
        trace,
        substream_csv,
    })
}

fn single_row(distribution: CodebookDistribution, iteration: usize, distortion: f64, rate_bits: f64) -> NtsTrace {
    NtsTrace::from_records(vec![IterationRecord {
        iteration,
        distribution,
        mean_match_index: f64::NAN,
        mean_accept_distortion: distortion,
        oracle_rate_bits: Some(rate_bits),
    }])
}

fn write(path: &Path, text: &str) -> ExpResult<()> {
    fs::write(path, text).map_err(|e| ExperimentError::io(path, e))
}

/// Runs `config`, writing one run directory per configured length under
/// `out` (or `out` itself for a single length).
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> ExpResult<Vec<RunOutput>> {
    let v = config.validate()?;
    let lengths: Vec<Option<usize>> = match (&config.length, config.algorithm.is_stochastic()) {
        (Some(l), true) => l.values().into_iter().map(Some).collect(),
        _ => vec![None],
    };
    let sweep = lengths.len() > 1;
    let mut outputs = Vec::new();
    for length in lengths {
        let dir = match (sweep, length) {
            (true, Some(l)) => out.join(format!("L{l}")),
            _ => out.to_path_buf(),
        };
        fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
        let mut single = config.clone();
        single.length = length.map(Lengths::One);
        single.output_dir = None;
        single.manifest = None;
        let effective = single.to_text();
        let mut output = run_single(&single, length)?;
        let alphabet_size = v.measure.reproduction_size();
        write(&dir.join("trace.csv"), &trace_csv(&output.trace, alphabet_size))?;
        write(
            &dir.join("final_distribution.toml"),
            &final_distribution_text(&output.trace.last().distribution, alphabet_size),
        )?;
        let mut manifest = effective.clone();
        let _ = write!(
            manifest,
            "\n[manifest]\ninput_hash = \"{}\"\nmaster_seed = {}\nversion = \"{}\"\n",
            content_hash(&effective),
            single.master_seed,
            env!("CARGO_PKG_VERSION")
        );
        write(&dir.join("manifest.toml"), &manifest)?;
        let mut timing = String::from("iteration,wall_ms\n");
        for (r, ms) in output.trace.records.iter().zip(&output.trace.wall_ms) {
            let _ = writeln!(timing, "{},{:.3}", r.iteration, ms);
        }
        write(&dir.join("timing.csv"), &timing)?;
        if let Some(csv) = &output.substream_csv {
            write(&dir.join("substream.csv"), csv)?;
        }
        output.dir = dir;
        outputs.push(output);
    }
    Ok(outputs)
}

/// Parsed `trace.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn read(path: &Path) -> ExpResult<Self> {
        let text = fs::read_to_string(path).map_err(|_| ExperimentError::MissingTrace(path.to_path_buf()))?;
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| ExperimentError::io(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| ExperimentError::io(path, e))?;
            rows.push(
                rec.iter()
                    .map(|f| if f.is_empty() { f64::NAN } else { f.parse().unwrap_or(f64::NAN) })
                    .collect(),
            );
        }
        if columns.is_empty() || rows.is_empty() {
            return Err(ExperimentError::MissingTrace(path.to_path_buf()));
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn q_columns(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&i| self.columns[i].starts_with("Q_")).collect()
    }
}

/// Summary of one run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub final_q: Vec<(String, f64)>,
    pub final_rate_bits: Option<f64>,
    /// First iteration after which every Q entry stays within `band` of its
    /// final value.
    pub converged_at: f64,
}

pub const CONVERGENCE_BAND: f64 = 0.02;

pub fn summarize(name: &str, table: &TraceTable) -> RunSummary {
    let last = table.rows.last().expect("non-empty trace");
    let qcols = table.q_columns();
    let iteration = table.column("iteration").unwrap_or_default();
    let mut converged_at = iteration.last().copied().unwrap_or(0.0);
    for (i, row) in table.rows.iter().enumerate().rev() {
        if qcols.iter().any(|&c| (row[c] - last[c]).abs() > CONVERGENCE_BAND) {
            break;
        }
        converged_at = iteration[i];
    }
    let rate = table.column("oracle_rate_bits").and_then(|c| c.last().copied()).filter(|v| !v.is_nan());
    RunSummary {
        name: name.into(),
        final_q: qcols.iter().map(|&c| (table.columns[c].clone(), last[c])).collect(),
        final_rate_bits: rate,
        converged_at,
    }
}

/// Finds run directories under `dir`: `dir` itself if it holds a trace,
/// otherwise its immediate subdirectories that do.
pub fn find_runs(dir: &Path) -> Vec<PathBuf> {
    if dir.join("trace.csv").is_file() {
        return vec![dir.to_path_buf()];
    }
    let mut runs: Vec<PathBuf> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.join("trace.csv").is_file())
        .collect();
    runs.sort();
    runs
}

/// Writes `report_long.csv` (run, iteration, variable, value) and
/// `summary.txt` into `dir` and returns the summary text.
pub fn report(dir: &Path) -> ExpResult<String> {
    let runs = find_runs(dir);
    if runs.is_empty() {
        return Err(ExperimentError::MissingTrace(dir.join("trace.csv")));
    }
    let mut summary = String::new();
    let mut long = String::from("run,iteration,variable,value\n");
    for run in &runs {
        let name = run
            .strip_prefix(dir)
            .ok()
            .and_then(|p| p.to_str())
            .filter(|s| !s.is_empty())
            .unwrap_or(".")
            .to_string();
        let table = TraceTable::read(&run.join("trace.csv"))?;
        let it = table.columns.iter().position(|c| c == "iteration").unwrap_or(0);
        for row in &table.rows {
            for (i, col) in table.columns.iter().enumerate() {
                if i != it && !row[i].is_nan() {
                    let _ = writeln!(long, "{name},{},{col},{}", row[it], format_number(row[i]));
                }
            }
        }
        let s = summarize(&name, &table);
        let _ = writeln!(summary, "run {}", s.name);
        for (col, v) in &s.final_q {
            let _ = writeln!(summary, "  final {col} = {}", format_number(*v));
        }
        match s.final_rate_bits {
            Some(r) => {
                let _ = writeln!(summary, "  final oracle rate = {} bits", format_number(r));
            }
            None => summary.push_str("  final oracle rate = n/a\n"),
        }
        let _ = writeln!(
            summary,
            "  converged (band {}) from iteration {}",
            CONVERGENCE_BAND, s.converged_at
        );
    }
    write(&dir.join("report_long.csv"), &long)?;
    write(&dir.join("summary.txt"), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.8), "0.8");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(2.0 / 3.0), "0.666666666667");
        assert_eq!(format_number(12.0), "12");
        assert_eq!(format_number(1e-7), "1e-7");
        assert_eq!(format_number(1.5e-9), "1.5e-9");
        assert_eq!(format_number(123456789012345.0), "1.23456789012e14");
        assert_eq!(format_number(-0.25), "-0.25");
        assert_eq!(format_number(f64::NAN), "");
    }

    #[test]
    fn column_names() {
        let m = CodebookDistribution::Markov {
            rows: vec![vec![0.5, 0.5]; 4],
            order: 2,
        };
        let cols = distribution_columns(&m, 2);
        assert_eq!(cols[0], "Q_0given00");
        assert_eq!(cols[3], "Q_1given01");
        let i = CodebookDistribution::Iid {
            q: vec![0.25; 4],
            order: 2,
        };
        assert_eq!(distribution_columns(&i, 2), vec!["Q_00", "Q_01", "Q_10", "Q_11"]);
    }

    fn toy(algorithm: &str) -> String {
        format!(
            "algorithm = \"{algorithm}\"\nd = 0.1\n[source]\nalphabet_size = 2\norder = 0\ntransitions = [[0.3, 0.7]]\n[measure]\nname = \"hamming\"\n"
        )
    }

    #[test]
    fn config_errors_name_fields() {
        let err = ExperimentConfig::from_text(&toy("markov").replace("d = 0.1", "d = 0.1\nbogus = 3")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("bogus"), "{err}");
        let c = ExperimentConfig::from_text(&toy("modified").replace("d = 0.1", "d = 0.9\nlength = 4\nN = 1")).unwrap();
        match c.validate().unwrap_err() {
            ExperimentError::Config { field, .. } => assert_eq!(field, "d"),
            e => panic!("{e}"),
        }
        let c = ExperimentConfig::from_text(&toy("modified")).unwrap();
        match c.validate().unwrap_err() {
            ExperimentError::Config { field, .. } => assert_eq!(field, "length"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn config_round_trips() {
        let text = toy("modified").replace("d = 0.1", "d = 0.1\nL = [10, 20]\nK = 3\nN = 2");
        let c = ExperimentConfig::from_text(&text).unwrap();
        assert_eq!(c.depth, 3);
        assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn deterministic_ab_row() {
        let c = ExperimentConfig::from_text(&toy("deterministic-ab")).unwrap();
        let out = run_single(&c, None).unwrap();
        assert_eq!(out.trace.records.len(), 1);
        let r = out.trace.records[0].oracle_rate_bits.unwrap();
        let expect = crate::info::h2(0.3) - crate::info::h2(0.1);
        assert!((r - expect).abs() < 1e-9);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(ExperimentError::from(NtsError::Exhausted { cap: 1 }).exit_code(), 3);
        assert_eq!(ExperimentError::from(NtsError::NonConvergence { iterations: 1 }).exit_code(), 4);
        assert_eq!(ExperimentError::MissingTrace(PathBuf::new()).exit_code(), 1);
    }
}
