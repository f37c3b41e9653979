//! Experiment configuration, test functions and convergence sweeps.

use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    bound_model, certified_error_l2, error_lp, fit_rate, hyperbolic_cross, ErrorMethod,
    ErrorReport, RateFit, DEFAULT_FIT_EXCLUDE,
};
use crate::error::{arg, Result};
use crate::fourier::{FourierCoefficients, DEFAULT_OVERSAMPLE};
use crate::korobov::{KorobovElement, KorobovParams};
use crate::smolyak::{apply_p_translates, build_grid, p_operator, MAX_OPERATOR_DIM};
use crate::translate::TranslateCombination;

pub const CSV_VERSION: &str = "korosmol-v1";
pub const CSV_COLUMNS: &str = "d,r,p,m,n_multiset,n_distinct,error_value,error_tail,bound_model";

fn default_p() -> f64 {
    2.0
}

fn default_method() -> ErrorMethod {
    ErrorMethod::ParsevalCertified
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// Standard normal amplitudes on the hyperbolic cross H(degree), made
    /// real valued and normalized.
    RandomG { degree: f64, seed: Option<u64> },
    /// Explicit entries [j_1, …, j_d, re, im].
    Modes { entries: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsConfig {
    /// Memory budget for dense arrays in mebibytes.
    pub dense_mb: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub r: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    pub levels: Vec<u32>,
    pub test_function: TestFunction,
    #[serde(default = "default_method")]
    pub error_method: ErrorMethod,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub caps: Option<CapsConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Replaces the random_g seed when `seed` is given.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let (Some(s), TestFunction::RandomG { seed, .. }) = (seed, &mut self.test_function) {
            *seed = Some(s);
        }
        self
    }

    /// Checks every field before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_OPERATOR_DIM {
            return arg(format!("d must lie in 1..={MAX_OPERATOR_DIM}, got {}", self.d));
        }
        if !(self.r.is_finite() && self.r > 0.5) {
            return arg(format!("r must exceed 1/2, got {}", self.r));
        }
        if self.error_method == ErrorMethod::GridQuadrature && self.r <= 1.0 {
            return arg("r must exceed 1 for error_method grid_quadrature");
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            return arg(format!("p must lie in (1, ∞), got {}", self.p));
        }
        if self.levels.is_empty() {
            return arg("levels must not be empty");
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return arg("levels not increasing");
        }
        match &self.test_function {
            TestFunction::RandomG { degree, seed } => {
                if seed.is_none() {
                    return arg("test_function.seed is required for random_g");
                }
                if !(degree.is_finite() && *degree >= 1.0) {
                    return arg("test_function.degree must be at least 1");
                }
            }
            TestFunction::Modes { entries } => {
                if entries.is_empty() {
                    return arg("test_function.entries must not be empty");
                }
                for e in entries {
                    if e.len() != self.d + 2 {
                        return arg(format!(
                            "test_function.entries rows need {} numbers",
                            self.d + 2
                        ));
                    }
                    if e[..self.d].iter().any(|v| v.fract() != 0.0 || v.abs() > 1e15) {
                        return arg("test_function.entries frequencies must be integers");
                    }
                    if e.iter().any(|v| !v.is_finite()) {
                        return arg("test_function.entries must be finite");
                    }
                }
            }
        }
        if let Some(c) = &self.caps {
            if c.dense_mb == 0 {
                return arg("caps.dense_mb must be positive");
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<KorobovParams> {
        KorobovParams::new(self.r, self.d)
    }
}

/// Real-valued random ĝ on H(degree) with ‖g‖_2 = 1.
pub fn random_g(d: usize, degree: f64, seed: u64) -> Result<FourierCoefficients> {
    let cross = hyperbolic_cross(d, degree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = FourierCoefficients::new(d)?;
    for k in &cross.indices {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        g.set(k, Complex64::new(re, im))?;
    }
    normalized(g.real_part())
}

fn normalized(g: FourierCoefficients) -> Result<FourierCoefficients> {
    let n = g.l2_norm();
    if n == 0.0 {
        return arg("test function is zero");
    }
    Ok(g.scaled(Complex64::new(1.0 / n, 0.0)))
}

/// The unit-norm test element described by the configuration.
pub fn build_test_element(cfg: &ExperimentConfig) -> Result<KorobovElement> {
    cfg.validate()?;
    let g = match &cfg.test_function {
        TestFunction::RandomG { degree, seed } => {
            random_g(cfg.d, *degree, seed.expect("validated"))?
        }
        TestFunction::Modes { entries } => {
            let pairs = entries.iter().map(|e| {
                let j: Vec<i64> = e[..cfg.d].iter().map(|&v| v as i64).collect();
                (j, Complex64::new(e[cfg.d], e[cfg.d + 1]))
            });
            normalized(FourierCoefficients::from_entries(cfg.d, pairs)?)?
        }
    };
    KorobovElement::new(cfg.params()?, g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub d: usize,
    pub r: f64,
    pub p: f64,
    pub m: u32,
    pub n_multiset: u64,
    pub n_distinct: u64,
    pub error_value: f64,
    pub error_tail: f64,
    pub bound_model: f64,
    pub wall_time_ms: f64,
}

impl ResultRecord {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.d,
            self.r,
            self.p,
            self.m,
            self.n_multiset,
            self.n_distinct,
            self.error_value,
            self.error_tail,
            self.bound_model
        )
    }
}

/// P_m applied to the test element at one level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelApproximation {
    pub m: u32,
    pub n_multiset: u64,
    pub n_distinct: u64,
    pub combination: TranslateCombination,
    pub error: ErrorReport,
}

fn level_error(cfg: &ExperimentConfig, elem: &KorobovElement, m: u32) -> Result<ErrorReport> {
    match cfg.error_method {
        ErrorMethod::ParsevalCertified => certified_error_l2(elem, &p_operator(cfg.d, m)?),
        ErrorMethod::GridQuadrature => {
            error_lp(elem, &apply_p_translates(elem, m)?, cfg.p, DEFAULT_OVERSAMPLE)
        }
    }
}

fn run_level(cfg: &ExperimentConfig, elem: &KorobovElement, m: u32) -> Result<ResultRecord> {
    let start = Instant::now();
    let grid = build_grid(cfg.d, m)?;
    let err = level_error(cfg, elem, m)?;
    Ok(ResultRecord {
        d: cfg.d,
        r: cfg.r,
        p: cfg.p,
        m,
        n_multiset: grid.multiset_count,
        n_distinct: grid.distinct_count,
        error_value: err.value,
        error_tail: err.tail_bound,
        bound_model: bound_model(m, cfg.d, cfg.r),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Translate form and error of P_m f at a single level.
pub fn run_approx(cfg: &ExperimentConfig, m: u32) -> Result<LevelApproximation> {
    let elem = build_test_element(cfg)?;
    let grid = build_grid(cfg.d, m)?;
    let combination = apply_p_translates(&elem, m)?;
    let error = level_error(cfg, &elem, m)?;
    Ok(LevelApproximation {
        m,
        n_multiset: grid.multiset_count,
        n_distinct: grid.distinct_count,
        combination,
        error,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub records: Vec<ResultRecord>,
    pub fit: Option<RateFit>,
}

/// Runs every level (concurrently) and fits the rate over distinct grid
/// sizes when at least four levels produced positive errors.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    let elem = build_test_element(cfg)?;
    let records = cfg
        .levels
        .par_iter()
        .map(|&m| run_level(cfg, &elem, m))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(u64, f64)> = records.iter().map(|r| (r.n_distinct, r.error_value)).collect();
    let fit = if pairs.len() >= 4 && pairs.iter().all(|&(_, e)| e > 0.0) {
        Some(fit_rate(&pairs, cfg.d, cfg.r, DEFAULT_FIT_EXCLUDE)?)
    } else {
        None
    };
    Ok(SweepOutcome { records, fit })
}

/// Versioned CSV; wall-clock times are left out so output is reproducible.
pub fn to_csv(records: &[ResultRecord]) -> String {
    let mut out = format!("# {CSV_VERSION}\n{CSV_COLUMNS}\n");
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Path of the JSON rate-fit file written next to a CSV output.
pub fn fit_path(out: &std::path::Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".fit.json");
    PathBuf::from(s)
}
