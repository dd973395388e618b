//! Monte Carlo harness: expands a design into cells, simulates repetitions in
//! parallel and reduces them to performance summaries.
//!
//! Reductions run in repetition order after collection, so results are
//! bit-identical for any thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{center, DesignView, ModelPartition, Roles};
use crate::error::{Error, Result};
use crate::estimators::{self, EstimatorSpec};
use crate::inference::{weak_instrument_stat, Scaling, TestConfig};
use crate::linalg;
use crate::pulse::{pulse_estimate, PulseConfig, PulseMessage};
use crate::rng::{mix_seed, repetition_seed, NormalStream};
use crate::sem::{self, Intervention, SemModel};

/// An estimator to run in every repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorChoice {
    Standard(EstimatorSpec),
    /// PULSE with the given p_min and default settings otherwise.
    Pulse(f64),
}

impl EstimatorChoice {
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for EstimatorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorChoice::Standard(s) => write!(f, "{s}"),
            EstimatorChoice::Pulse(p) if *p == 0.05 => write!(f, "pulse"),
            EstimatorChoice::Pulse(p) => write!(f, "pulse:{p}"),
        }
    }
}

impl FromStr for EstimatorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "pulse" {
            return Ok(EstimatorChoice::Pulse(0.05));
        }
        if let Some(p) = t.strip_prefix("pulse:") {
            let p: f64 = p
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad p_min in `{s}`")))?;
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParameter(format!("p_min must lie in (0, 1), got {p}")));
            }
            return Ok(EstimatorChoice::Pulse(p));
        }
        t.parse().map(EstimatorChoice::Standard)
    }
}

impl TryFrom<String> for EstimatorChoice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorChoice> for String {
    fn from(e: EstimatorChoice) -> String {
        e.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Design {
    /// One endogenous regressor, q instruments, confounding rho, first-stage R^2.
    Univariate { q: Vec<usize>, rho: Vec<f64>, r2: Vec<f64>, n: Vec<usize> },
    /// Random two-dimensional just-identified models with hidden confounders.
    MvRandom {
        models: usize,
        n: usize,
        coef_bound: f64,
        sigma2_low: f64,
        sigma2_high: f64,
        gamma: Vec<f64>,
    },
    /// Random first stages with a fixed noise correlation structure.
    MvFixed {
        models: usize,
        n: usize,
        coef_bound: f64,
        eta: f64,
        phi1: f64,
        phi2: f64,
        gamma: Vec<f64>,
    },
    /// k-class fits in the single-instrument model of `sem::e1_model`, with worst-case MSPE curves.
    RobustnessE1 { n: usize, kappas: Vec<f64>, x_max: f64, x_steps: usize },
    /// Under-identified model of `sem::e3_model` at several sample sizes.
    UnderidE3 { n: Vec<usize>, eta: f64, delta1: f64, delta2: f64, gamma: f64, beta: f64 },
}

pub const DESIGN_NAMES: &[&str] = &["robustness-e1", "univariate", "mv-random", "mv-fixed", "underid-e3"];

impl Design {
    pub fn preset(name: &str) -> Result<Design> {
        Ok(match name {
            "univariate" => Design::Univariate {
                q: vec![1, 2, 3, 4, 5, 10, 20, 30],
                rho: (1..=9).map(|i| i as f64 / 10.0).collect(),
                r2: vec![0.0001, 0.001, 0.01, 0.1, 0.3],
                n: vec![50, 100, 150],
            },
            "mv-random" => Design::MvRandom {
                models: 100,
                n: 50,
                coef_bound: 2.0,
                sigma2_low: 0.1,
                sigma2_high: 1.0,
                gamma: vec![0.0, 0.0],
            },
            "mv-fixed" => Design::MvFixed {
                models: 100,
                n: 50,
                coef_bound: 2.0,
                eta: 0.2,
                phi1: 0.15,
                phi2: 0.15,
                gamma: vec![0.0, 0.0],
            },
            "robustness-e1" => Design::RobustnessE1 { n: 2000, kappas: vec![0.0, 0.75, 1.0], x_max: 4.0, x_steps: 80 },
            "underid-e3" => Design::UnderidE3 {
                n: vec![100, 1000, 10000],
                eta: 1.0,
                delta1: 1.0,
                delta2: 1.0,
                gamma: 1.0,
                beta: 1.0,
            },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown design `{other}`; expected one of {}",
                    DESIGN_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Design::Univariate { .. } => "univariate",
            Design::MvRandom { .. } => "mv-random",
            Design::MvFixed { .. } => "mv-fixed",
            Design::RobustnessE1 { .. } => "robustness-e1",
            Design::UnderidE3 { .. } => "underid-e3",
        }
    }

    pub fn default_estimators(&self) -> Vec<EstimatorChoice> {
        use EstimatorChoice::*;
        use EstimatorSpec as S;
        match self {
            Design::Univariate { .. } => {
                vec![Standard(S::Ols), Standard(S::Tsls), Standard(S::Fuller(1.0)), Standard(S::Fuller(4.0)), Pulse(0.05)]
            }
            Design::MvRandom { .. } | Design::MvFixed { .. } => {
                vec![Standard(S::Ols), Standard(S::Fuller(1.0)), Standard(S::Fuller(4.0)), Pulse(0.05)]
            }
            Design::RobustnessE1 { kappas, .. } => kappas.iter().map(|&k| Standard(S::KClass(k))).collect(),
            Design::UnderidE3 { .. } => vec![Pulse(0.05), Standard(S::ModifiedTsls)],
        }
    }

    /// Names of the cell parameters, in CSV column order.
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            Design::Univariate { .. } => &["q", "rho", "r2", "n"],
            Design::MvRandom { .. } => &["model", "n", "rho_norm"],
            Design::MvFixed { .. } => &["model", "n", "eta", "phi1", "phi2", "rho_norm"],
            Design::RobustnessE1 { .. } => &["n"],
            Design::UnderidE3 { .. } => &["n"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub design: Design,
    pub reps: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub estimators: Option<Vec<EstimatorChoice>>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(design: Design, reps: usize, master_seed: u64) -> Self {
        Self { design, reps, master_seed, estimators: None, threads: None }
    }

    pub fn estimators(&self) -> Vec<EstimatorChoice> {
        self.estimators.clone().unwrap_or_else(|| self.design.default_estimators())
    }
}

/// One model and sample size to be simulated.
#[derive(Debug, Clone)]
pub struct Cell {
    pub params: Vec<f64>,
    pub model: SemModel,
    pub partition: ModelPartition,
    pub n: usize,
    pub target: DVector<f64>,
}

fn uniform_matrix(rng: &mut NormalStream, r: usize, c: usize, bound: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.uniform_in(-bound, bound))
}

pub fn expand_cells(design: &Design, master_seed: u64) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    match design {
        Design::Univariate { q, rho, r2, n } => {
            for &qq in q {
                for &rr in rho {
                    for &r2v in r2 {
                        for &nn in n {
                            cells.push(Cell {
                                params: vec![qq as f64, rr, r2v, nn as f64],
                                model: sem::univariate_design(qq, rr, r2v)?,
                                partition: ModelPartition::all_endogenous(1),
                                n: nn,
                                target: DVector::from_element(1, 1.0),
                            });
                        }
                    }
                }
            }
        }
        Design::MvRandom { models, n, coef_bound, sigma2_low, sigma2_high, gamma } => {
            let gamma = two_vector(gamma, "gamma")?;
            for k in 0..*models {
                let mut rng = NormalStream::new(mix_seed(master_seed ^ 0x6d76_7261), k as u64);
                let xi = uniform_matrix(&mut rng, 2, 2, *coef_bound);
                let delta = uniform_matrix(&mut rng, 2, 2, *coef_bound);
                let mu = uniform_matrix(&mut rng, 2, 1, *coef_bound).column(0).into_owned();
                let s2 = DVector::from_fn(2, |_, _| rng.uniform_in(*sigma2_low, *sigma2_high));
                let rho = sem::rho_norm_multivariate(&mu, &delta, &s2)?;
                cells.push(Cell {
                    params: vec![k as f64, *n as f64, rho],
                    model: sem::mv_random_model(&xi, &delta, &mu, &s2, &gamma)?,
                    partition: ModelPartition::all_endogenous(2),
                    n: *n,
                    target: gamma.clone(),
                });
            }
        }
        Design::MvFixed { models, n, coef_bound, eta, phi1, phi2, gamma } => {
            let gamma = two_vector(gamma, "gamma")?;
            let rho = sem::rho_norm_fixed_noise(*eta, *phi1, *phi2);
            for k in 0..*models {
                let mut rng = NormalStream::new(mix_seed(master_seed ^ 0x6d76_6678), k as u64);
                let xi = uniform_matrix(&mut rng, 2, 2, *coef_bound);
                cells.push(Cell {
                    params: vec![k as f64, *n as f64, *eta, *phi1, *phi2, rho],
                    model: sem::mv_fixed_noise_model(&xi, &gamma, *eta, *phi1, *phi2)?,
                    partition: ModelPartition::all_endogenous(2),
                    n: *n,
                    target: gamma.clone(),
                });
            }
        }
        Design::RobustnessE1 { n, .. } => {
            cells.push(Cell {
                params: vec![*n as f64],
                model: sem::e1_model(),
                partition: ModelPartition::all_endogenous(1),
                n: *n,
                target: DVector::from_element(1, 1.0),
            });
        }
        Design::UnderidE3 { n, eta, delta1, delta2, gamma, beta } => {
            for &nn in n {
                cells.push(Cell {
                    params: vec![nn as f64],
                    model: sem::e3_model(*eta, *delta1, *delta2, *gamma, *beta),
                    partition: ModelPartition::all_endogenous(2),
                    n: nn,
                    target: sem::e3_population_target(*delta2, *gamma, *beta),
                });
            }
        }
    }
    Ok(cells)
}

fn two_vector(v: &[f64], what: &str) -> Result<DVector<f64>> {
    if v.len() != 2 {
        return Err(Error::DimensionMismatch(format!("{what} must have two entries")));
    }
    Ok(DVector::from_column_slice(v))
}

/// Estimates and side information from one simulated data set.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub estimates: Vec<std::result::Result<DVector<f64>, String>>,
    pub pulse_messages: Vec<Option<PulseMessage>>,
    pub weak: Option<DMatrix<f64>>,
}

fn cause(e: &Error) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Unknown").to_string()
}

pub fn run_repetition(cell: &Cell, seed: u64, estimators: &[EstimatorChoice]) -> RepOutcome {
    let fail_all = |e: &Error| RepOutcome {
        estimates: estimators.iter().map(|_| Err(cause(e))).collect(),
        pulse_messages: vec![None; estimators.len()],
        weak: None,
    };
    let ds = match sem::sample(&cell.model, cell.n, seed, &Intervention::None) {
        Ok(ds) => center(&ds, Roles::ALL),
        Err(e) => return fail_all(&e),
    };
    let view = match DesignView::new(&ds, &cell.partition) {
        Ok(v) => v,
        Err(e) => return fail_all(&e),
    };
    let mut estimates = Vec::with_capacity(estimators.len());
    let mut pulse_messages = Vec::with_capacity(estimators.len());
    for est in estimators {
        match est {
            EstimatorChoice::Standard(spec) => {
                estimates.push(estimators::estimate(&view, spec).map(|r| r.alpha).map_err(|e| cause(&e)));
                pulse_messages.push(None);
            }
            EstimatorChoice::Pulse(p) => {
                let cfg = PulseConfig { test: TestConfig::new(*p, Scaling::AndersonRubin), ..PulseConfig::default() };
                match pulse_estimate(&view, &cfg) {
                    Ok(r) => {
                        pulse_messages.push(Some(r.message));
                        estimates.push(Ok(r.alpha));
                    }
                    Err(e) => {
                        pulse_messages.push(None);
                        estimates.push(Err(cause(&e)));
                    }
                }
            }
        }
    }
    let weak = weak_instrument_stat(&view).ok().map(|w| w.g_matrix);
    RepOutcome { estimates, pulse_messages, weak }
}

/// Sum in a fixed binary tree; deterministic and less error-prone than a left fold.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2..=8 => v.iter().sum(),
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn mean(v: &[f64]) -> f64 {
    pairwise_sum(v) / v.len() as f64
}

/// Type-7 sample quantile (linear interpolation between order statistics).
pub fn quantile(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// (competitor - pulse) / pulse; positive means the PULSE value is smaller.
pub fn relative_change(competitor: f64, pulse: f64) -> f64 {
    (competitor - pulse) / pulse
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MseOrder {
    Equal,
    /// The first matrix is below the second in the PSD order.
    ALessOrEqual,
    BLessOrEqual,
    Incomparable,
}

impl MseOrder {
    pub fn code(self) -> u8 {
        match self {
            MseOrder::Equal => 0,
            MseOrder::ALessOrEqual => 1,
            MseOrder::BLessOrEqual => 2,
            MseOrder::Incomparable => 3,
        }
    }
}

/// Compares two MSE matrices in the positive semi-definite order.
pub fn mse_partial_order(a: &DMatrix<f64>, b: &DMatrix<f64>) -> MseOrder {
    let diff = linalg::symmetrize(&(b - a));
    let tol = 1e-9 * a.trace().abs().max(b.trace().abs());
    let eig = nalgebra::SymmetricEigen::new(diff).eigenvalues;
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    match (lo >= -tol, hi <= tol) {
        (true, true) => MseOrder::Equal,
        (true, false) => MseOrder::ALessOrEqual,
        (false, true) => MseOrder::BLessOrEqual,
        (false, false) => MseOrder::Incomparable,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    pub estimator: String,
    pub reps_used: usize,
    pub failures: BTreeMap<String, usize>,
    pub mean: Vec<f64>,
    pub bias: Vec<f64>,
    pub median: Vec<f64>,
    pub iqr: Vec<f64>,
    #[serde(skip)]
    pub mse: DMatrix<f64>,
    #[serde(skip)]
    pub variance: DMatrix<f64>,
    pub mse_trace: f64,
    pub mse_det: f64,
    pub rmse: f64,
    pub bias_norm: f64,
    pub median_error_norm: f64,
}

pub fn performance(label: &str, estimates: &[&DVector<f64>], failures: BTreeMap<String, usize>, target: &DVector<f64>) -> PerformanceReport {
    let p = target.len();
    let n = estimates.len();
    let coord = |j: usize| -> Vec<f64> { estimates.iter().map(|e| e[j]).collect() };
    let means: Vec<f64> = (0..p).map(|j| if n == 0 { f64::NAN } else { mean(&coord(j)) }).collect();
    let mut mse = DMatrix::zeros(p, p);
    let mut variance = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let e: Vec<f64> = estimates.iter().map(|a| (a[i] - target[i]) * (a[j] - target[j])).collect();
            let v: Vec<f64> = estimates.iter().map(|a| (a[i] - means[i]) * (a[j] - means[j])).collect();
            mse[(i, j)] = if n == 0 { f64::NAN } else { mean(&e) };
            variance[(i, j)] = if n == 0 { f64::NAN } else { mean(&v) };
        }
    }
    let bias: Vec<f64> = (0..p).map(|j| means[j] - target[j]).collect();
    let errs: Vec<f64> = estimates.iter().map(|a| (*a - target).norm()).collect();
    let mse_trace = mse.trace();
    PerformanceReport {
        estimator: label.to_string(),
        reps_used: n,
        failures,
        median: (0..p).map(|j| median(&coord(j))).collect(),
        iqr: (0..p).map(|j| quantile(&coord(j), 0.75) - quantile(&coord(j), 0.25)).collect(),
        mse_det: mse.determinant(),
        rmse: mse_trace.sqrt(),
        bias_norm: bias.iter().map(|b| b * b).sum::<f64>().sqrt(),
        median_error_norm: median(&errs),
        mean: means,
        bias,
        mse,
        variance,
        mse_trace,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub other: String,
    pub rel_change_trace: f64,
    pub rel_change_det: f64,
    pub rel_change_bias: f64,
    pub rel_change_rmse: f64,
    /// PSD order of (PULSE MSE, other MSE).
    pub mse_order: MseOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakSummary {
    /// Average over repetitions of the smallest eigenvalue of G_n.
    pub mean_min_eigenvalue: f64,
    /// Smallest eigenvalue of the averaged G_n.
    pub min_eigenvalue_of_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub cell: usize,
    pub params: Vec<f64>,
    pub n: usize,
    pub target: Vec<f64>,
    pub performance: Vec<PerformanceReport>,
    pub comparisons: Vec<Comparison>,
    pub weak: Option<WeakSummary>,
    pub share_ols_accepted: Option<f64>,
    pub share_fallback: Option<f64>,
}

pub fn summarize(cell_index: usize, cell: &Cell, estimators: &[EstimatorChoice], reps: &[RepOutcome]) -> CellReport {
    let mut perfs = Vec::new();
    for (k, est) in estimators.iter().enumerate() {
        let mut failures = BTreeMap::new();
        let mut ok = Vec::new();
        for r in reps {
            match &r.estimates[k] {
                Ok(a) => ok.push(a),
                Err(c) => *failures.entry(c.clone()).or_insert(0) += 1,
            }
        }
        perfs.push(performance(&est.label(), &ok, failures, &cell.target));
    }
    let pulse_idx = estimators.iter().position(|e| matches!(e, EstimatorChoice::Pulse(_)));
    let mut comparisons = Vec::new();
    let (mut share_ols, mut share_fb) = (None, None);
    if let Some(pi) = pulse_idx {
        let pr = &perfs[pi];
        for (k, other) in perfs.iter().enumerate() {
            if k == pi {
                continue;
            }
            comparisons.push(Comparison {
                other: other.estimator.clone(),
                rel_change_trace: relative_change(other.mse_trace, pr.mse_trace),
                rel_change_det: relative_change(other.mse_det, pr.mse_det),
                rel_change_bias: relative_change(other.bias_norm, pr.bias_norm),
                rel_change_rmse: relative_change(other.rmse, pr.rmse),
                mse_order: mse_partial_order(&pr.mse, &other.mse),
            });
        }
        let msgs: Vec<PulseMessage> = reps.iter().filter_map(|r| r.pulse_messages[pi]).collect();
        if !msgs.is_empty() {
            let total = msgs.len() as f64;
            share_ols = Some(msgs.iter().filter(|m| **m == PulseMessage::OlsAccepted).count() as f64 / total);
            share_fb = Some(msgs.iter().filter(|m| **m == PulseMessage::TslsRejectedFallback).count() as f64 / total);
        }
    }
    let gs: Vec<&DMatrix<f64>> = reps.iter().filter_map(|r| r.weak.as_ref()).collect();
    let weak = (!gs.is_empty()).then(|| {
        let mins: Vec<f64> = gs.iter().map(|g| linalg::min_eigenvalue(g)).collect();
        let dim = gs[0].nrows();
        let avg = DMatrix::from_fn(dim, dim, |i, j| mean(&gs.iter().map(|g| g[(i, j)]).collect::<Vec<_>>()));
        WeakSummary { mean_min_eigenvalue: mean(&mins), min_eigenvalue_of_mean: linalg::min_eigenvalue(&avg) }
    });
    CellReport {
        cell: cell_index,
        params: cell.params.clone(),
        n: cell.n,
        target: cell.target.iter().cloned().collect(),
        performance: perfs,
        comparisons,
        weak,
        share_ols_accepted: share_ols,
        share_fallback: share_fb,
    }
}

/// Per-repetition k-class estimates and their worst-case MSPE curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    /// `population` or the repetition index.
    pub source: String,
    pub kappa: f64,
    pub estimate: f64,
    pub x: f64,
    pub wcmspe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessSummary {
    pub population: Vec<(f64, f64)>,
    /// Range of x on which the middle kappa has the smallest worst-case MSPE.
    pub superiority_interval: Option<(f64, f64)>,
    pub superiority_interval_rounded: Option<(f64, f64)>,
    #[serde(skip)]
    pub curves: Vec<CurveRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub design: String,
    pub parameter_names: Vec<String>,
    pub reps: usize,
    pub master_seed: u64,
    pub estimators: Vec<String>,
    pub cells: Vec<CellReport>,
    pub robustness: Option<RobustnessSummary>,
}

fn robustness(design: &Design) -> Result<Option<RobustnessSummary>> {
    let Design::RobustnessE1 { kappas, x_max, x_steps, .. } = design else {
        return Ok(None);
    };
    let model = sem::e1_model();
    let part = ModelPartition::all_endogenous(1);
    let xs: Vec<f64> = (0..=*x_steps).map(|i| x_max * i as f64 / *x_steps as f64).collect();
    let mut curves = Vec::new();
    let mut population = Vec::new();
    for &k in kappas {
        let g = sem::population_kclass(&model, &part, k)?[0];
        population.push((k, g));
        for &x in &xs {
            curves.push(CurveRow { source: "population".into(), kappa: k, estimate: g, x, wcmspe: sem::e1_worst_case_mspe(g, x) });
        }
    }
    let interval = match population.as_slice() {
        [(_, g_lo), (_, g_mid), (_, g_hi)] => sem::e1_superiority_interval(*g_mid, *g_lo, *g_hi),
        _ => None,
    };
    Ok(Some(RobustnessSummary {
        population,
        superiority_interval: interval,
        superiority_interval_rounded: interval.map(|(a, b)| sem::round_interval_inward(a, b, 2)),
        curves,
    }))
}

fn cell_seed(master_seed: u64, cell: usize) -> u64 {
    mix_seed(master_seed.wrapping_add(cell as u64))
}

/// Raw per-repetition outcomes of one cell, in repetition order.
pub fn simulate_cell(cell: &Cell, cell_index: usize, cfg: &ExperimentConfig) -> Vec<RepOutcome> {
    let ests = cfg.estimators();
    let base = cell_seed(cfg.master_seed, cell_index);
    (0..cfg.reps)
        .into_par_iter()
        .map(|rep| run_repetition(cell, repetition_seed(base, rep as u64), &ests))
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.reps == 0 {
        return Err(Error::InvalidParameter("reps must be positive".into()));
    }
    let cells = expand_cells(&cfg.design, cfg.master_seed)?;
    let ests = cfg.estimators();
    let work = || -> Vec<CellReport> {
        cells
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                let reps = simulate_cell(cell, i, cfg);
                summarize(i, cell, &ests, &reps)
            })
            .collect()
    };
    let reports = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut robust = robustness(&cfg.design)?;
    if let (Some(r), Design::RobustnessE1 { x_max, x_steps, .. }) = (robust.as_mut(), &cfg.design) {
        // per-repetition curves for the sample fits
        let cell = &cells[0];
        let raw = simulate_cell(cell, 0, cfg);
        for (rep, out) in raw.iter().enumerate() {
            for (k, est) in out.estimates.iter().enumerate() {
                let (Ok(a), EstimatorChoice::Standard(EstimatorSpec::KClass(kappa))) = (est, ests[k]) else { continue };
                for i in 0..=*x_steps {
                    let x = x_max * i as f64 / *x_steps as f64;
                    r.curves.push(CurveRow { source: rep.to_string(), kappa, estimate: a[0], x, wcmspe: sem::e1_worst_case_mspe(a[0], x) });
                }
            }
        }
    }
    Ok(ExperimentReport {
        design: cfg.design.name().to_string(),
        parameter_names: cfg.design.parameter_names().iter().map(|s| s.to_string()).collect(),
        reps: cfg.reps,
        master_seed: cfg.master_seed,
        estimators: ests.iter().map(|e| e.label()).collect(),
        cells: reports,
        robustness: robust,
    })
}

/// Columns of the long-format results table, after the design's parameter columns.
pub const RESULT_COLUMNS: &[&str] = &["estimator", "metric", "value", "repetitions_used"];

/// Writes `cell, <parameters>, estimator, metric, value, repetitions_used` rows.
pub fn write_results_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cell".to_string()];
    header.extend(report.parameter_names.iter().cloned());
    header.extend(RESULT_COLUMNS.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for cell in &report.cells {
        let mut emit = |est: &str, metric: String, value: f64, used: usize| -> Result<()> {
            let mut rec = vec![cell.cell.to_string()];
            rec.extend(cell.params.iter().map(|v| format_value(*v)));
            rec.push(est.to_string());
            rec.push(metric);
            rec.push(format_value(value));
            rec.push(used.to_string());
            w.write_record(&rec)?;
            Ok(())
        };
        for perf in &cell.performance {
            let u = perf.reps_used;
            let e = perf.estimator.as_str();
            for (j, v) in perf.mean.iter().enumerate() {
                emit(e, format!("mean_{}", j + 1), *v, u)?;
            }
            for (j, v) in perf.bias.iter().enumerate() {
                emit(e, format!("bias_{}", j + 1), *v, u)?;
            }
            for (j, v) in perf.median.iter().enumerate() {
                emit(e, format!("median_{}", j + 1), *v, u)?;
            }
            for (j, v) in perf.iqr.iter().enumerate() {
                emit(e, format!("iqr_{}", j + 1), *v, u)?;
            }
            for (j, v) in perf.variance.diagonal().iter().enumerate() {
                emit(e, format!("variance_{}", j + 1), *v, u)?;
            }
            emit(e, "mse_trace".into(), perf.mse_trace, u)?;
            emit(e, "mse_det".into(), perf.mse_det, u)?;
            emit(e, "rmse".into(), perf.rmse, u)?;
            emit(e, "bias_norm".into(), perf.bias_norm, u)?;
            emit(e, "median_error_norm".into(), perf.median_error_norm, u)?;
            for (c, k) in &perf.failures {
                emit(e, format!("failures_{c}"), *k as f64, u)?;
            }
        }
        let reps_total = cell.performance.first().map(|p| p.reps_used + p.failures.values().sum::<usize>()).unwrap_or(0);
        for cmp in &cell.comparisons {
            let e = format!("pulse_vs_{}", cmp.other);
            emit(&e, "rel_change_trace".into(), cmp.rel_change_trace, reps_total)?;
            emit(&e, "rel_change_det".into(), cmp.rel_change_det, reps_total)?;
            emit(&e, "rel_change_bias".into(), cmp.rel_change_bias, reps_total)?;
            emit(&e, "rel_change_rmse".into(), cmp.rel_change_rmse, reps_total)?;
            emit(&e, "mse_order".into(), cmp.mse_order.code() as f64, reps_total)?;
        }
        if let Some(wk) = &cell.weak {
            emit("instruments", "mean_gn_min_eigenvalue".into(), wk.mean_min_eigenvalue, reps_total)?;
            emit("instruments", "gn_mean_min_eigenvalue".into(), wk.min_eigenvalue_of_mean, reps_total)?;
        }
        if let Some(s) = cell.share_ols_accepted {
            emit("pulse", "share_ols_accepted".into(), s, reps_total)?;
        }
        if let Some(s) = cell.share_fallback {
            emit("pulse", "share_fallback".into(), s, reps_total)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `source, kappa, estimate, x, wcmspe` rows.
pub fn write_curves_csv<W: Write>(summary: &RobustnessSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "kappa", "estimate", "x", "wcmspe"])?;
    for r in &summary.curves {
        w.write_record([r.source.clone(), format_value(r.kappa), format_value(r.estimate), format_value(r.x), format_value(r.wcmspe)])?;
    }
    w.flush()?;
    Ok(())
}

/// Ten significant digits.
pub fn format_value(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.9e}");
    s.parse::<f64>().map(|x| x.to_string()).unwrap_or(s)
}
