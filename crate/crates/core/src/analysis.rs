//! Certified error norms, worst-case estimates, hyperbolic crosses and rate
//! fitting.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps;
use crate::error::{arg, Result};
use crate::index::strides;
use crate::korobov::{kappa_univariate, univariate_tolerance, KorobovElement, KorobovParams};
use crate::smolyak::p_operator;
use crate::translate::{
    Approximation, Atom, Fraction, TensorOperator, TranslateCombination, UnivariateOp,
    DEFAULT_KAPPA_TOL,
};

/// Relative change of successive Rayleigh quotients that stops power
/// iteration.
const POWER_REL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMethod {
    ParsevalCertified,
    GridQuadrature,
}

/// Parameters that produced an [`ErrorReport`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_radius: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oversample: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub value: f64,
    pub tail_bound: f64,
    pub method: ErrorMethod,
    pub params: ReportParams,
}

/// ‖f̂ - approx‖ over the certificate box, with the discarded mass of both
/// f and the approximation as tail bound.
pub fn error_l2(elem: &KorobovElement, approx: &Approximation) -> Result<ErrorReport> {
    let Some(cert) = &approx.certificate else {
        return arg("approximation carries no tail certificate");
    };
    let bx = &cert.box_radius;
    if bx.len() != elem.dim() || approx.coeffs.dim() != elem.dim() {
        return arg("approximation and element dimensions differ");
    }
    let f = elem.fourier();
    let inside = |j: &[i64]| j.iter().zip(bx).all(|(c, &b)| c.unsigned_abs() <= b);
    let mut sq = 0.0;
    let mut f_tail = 0.0;
    for (j, v) in f.iter() {
        if inside(j) {
            sq += (v - approx.coeffs.get(j)).norm_sqr();
        } else {
            f_tail += v.norm_sqr();
        }
    }
    for (j, v) in approx.coeffs.iter() {
        if f.get(j) == Complex64::new(0.0, 0.0) && inside(j) {
            sq += v.norm_sqr();
        }
    }
    Ok(ErrorReport {
        value: sq.sqrt(),
        tail_bound: cert.tail_norm + f_tail.sqrt(),
        method: ErrorMethod::ParsevalCertified,
        params: ReportParams {
            box_radius: Some(bx.clone()),
            ..Default::default()
        },
    })
}

/// ‖f - Op f‖_2 for a tensor operator, summed densely on a box and exactly
/// over residue classes outside it.
///
/// `value` is the full error norm. `tail_bound` bounds the rounding error of
/// the residue-class summation, so the true error lies within
/// `value ± tail_bound`.
pub fn certified_error_l2(elem: &KorobovElement, op: &TensorOperator) -> Result<ErrorReport> {
    if op.dim() != elem.dim() {
        return arg("operator and element dimensions differ");
    }
    let degree = elem.g().degree();
    let bx: Vec<u64> = op
        .band()
        .iter()
        .zip(&degree)
        .map(|(&b, &g)| (2 * b).max(g).max(1))
        .collect();
    let residual = op.complement();
    let dense = residual.dense_fourier(elem, &bx)?;
    let inside: f64 = dense.iter().map(|v| v.norm_sqr()).sum();
    let outside = residual.mass_outside_box(elem, &bx)?;
    let total = inside + outside.value.max(0.0);
    let value = total.sqrt();
    let tail_bound = outside.error().sqrt() + 8.0 * f64::EPSILON * value;
    Ok(ErrorReport {
        value,
        tail_bound,
        method: ErrorMethod::ParsevalCertified,
        params: ReportParams {
            box_radius: Some(bx),
            ..Default::default()
        },
    })
}

/// Grid-quadrature L_p norm of f - Σ c_l κ_{r,d}(· - y_l).
///
/// The grid has oversample·(2D_l+1) nodes per coordinate, D_l being the
/// larger of the degree of ĝ and the largest node denominator. The tail
/// bound covers only the κ evaluation tolerance; quadrature error is not
/// certified.
pub fn error_lp(
    elem: &KorobovElement,
    combo: &TranslateCombination,
    p: f64,
    oversample: usize,
) -> Result<ErrorReport> {
    let params: &KorobovParams = elem.params();
    params.require_pointwise()?;
    if combo.params() != params {
        return arg("combination and element parameters differ");
    }
    if !(p > 1.0 && p.is_finite()) {
        return arg(format!("p must lie in (1, ∞), got {p}"));
    }
    if oversample < 2 {
        return arg("oversample must be at least 2");
    }
    let d = params.d;
    let mut band = elem.g().degree();
    for (node, _) in combo.terms() {
        for (b, f) in band.iter_mut().zip(node.coords()) {
            *b = (*b).max(f.denominator());
        }
    }
    let q: Vec<usize> = band.iter().map(|&b| oversample * (2 * b as usize + 1)).collect();
    let f_vals = elem.fourier().sample_grid(&q)?.into_values();

    let tol_uni = univariate_tolerance(params.r, d, DEFAULT_KAPPA_TOL);
    let mut tables: Vec<HashMap<Fraction, Vec<f64>>> = vec![HashMap::new(); d];
    let terms: Vec<(Vec<Fraction>, Complex64)> =
        combo.terms().map(|(n, c)| (n.coords().to_vec(), *c)).collect();
    for (coords, _) in &terms {
        for (l, f) in coords.iter().enumerate() {
            tables[l].entry(*f).or_insert_with(|| {
                (0..q[l])
                    .map(|i| {
                        let x = 2.0 * std::f64::consts::PI * i as f64 / q[l] as f64;
                        kappa_univariate(x - f.angle(), params.r, tol_uni)
                    })
                    .collect()
            });
        }
    }
    let rows: Vec<(Vec<&Vec<f64>>, Complex64)> = terms
        .iter()
        .map(|(coords, c)| (coords.iter().enumerate().map(|(l, f)| &tables[l][f]).collect(), *c))
        .collect();
    let st = strides(&q);
    let sum: f64 = f_vals
        .par_iter()
        .enumerate()
        .map(|(pos, fv)| {
            let idx: Vec<usize> = (0..d).map(|l| (pos / st[l]) % q[l]).collect();
            let approx: Complex64 = rows
                .iter()
                .map(|(tabs, c)| c * tabs.iter().zip(&idx).map(|(t, &i)| t[i]).product::<f64>())
                .sum();
            (fv - approx).norm().powf(p)
        })
        .sum();
    let value = (sum / f_vals.len() as f64).powf(1.0 / p);
    Ok(ErrorReport {
        value,
        tail_bound: DEFAULT_KAPPA_TOL * combo.abs_sum(),
        method: ErrorMethod::GridQuadrature,
        params: ReportParams {
            p: Some(p),
            oversample: Some(oversample),
            ..Default::default()
        },
    })
}

/// Operators whose worst-case L2 error can be estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorstCaseOperator {
    /// Q_m in every coordinate.
    Qm(u64),
    /// The Smolyak operator P_m.
    Pm(u32),
}

impl WorstCaseOperator {
    pub fn build(self, d: usize) -> Result<TensorOperator> {
        match self {
            WorstCaseOperator::Qm(m) => TensorOperator::tensor(&vec![UnivariateOp::Q(m); d]),
            WorstCaseOperator::Pm(m) => p_operator(d, m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseEstimate {
    /// Estimated largest singular value.
    pub estimate: f64,
    /// Square roots of the successive Rayleigh quotients.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Power iteration on A^*A for A: g ↦ (I - Op)(κ_{r,d} ∗ g), g supported in
/// |j_l| ≤ J.
///
/// A^*A is assembled from exact per-coordinate Gram blocks, so the output
/// frequencies are not truncated.
pub fn worst_case_l2(
    d: usize,
    r: f64,
    operator: WorstCaseOperator,
    big_j: u64,
    iters: usize,
    seed: u64,
) -> Result<WorstCaseEstimate> {
    KorobovParams::new(r, d)?;
    if iters < 1 {
        return arg("iters must be at least 1");
    }
    let op = operator.build(d)?;
    if op.band().iter().any(|&b| b > big_j) {
        return arg("box radius is below the operator band");
    }
    let residual = op.complement();
    let n1 = 2 * big_j as usize + 1;
    let total = caps::check((n1 as u128).pow(d as u32), "worst-case coefficient box")?;
    caps::check((n1 as u128) * (n1 as u128), "Gram block")?;

    let terms: Vec<(Vec<Atom>, i64)> = residual.terms().map(|(a, w)| (a.clone(), *w)).collect();
    let mut blocks: HashMap<(Atom, Atom), Vec<f64>> = HashMap::new();
    for (ta, _) in &terms {
        for (tb, _) in &terms {
            for l in 0..d {
                blocks
                    .entry((ta[l], tb[l]))
                    .or_insert_with(|| TensorOperator::gram_block(ta[l], tb[l], big_j, r));
            }
        }
    }

    let blocks = &blocks;
    let matvec: Box<dyn Fn(&[f64]) -> Vec<f64> + '_> = if d == 1 {
        let mut dense = vec![0.0; n1 * n1];
        for (ta, wa) in &terms {
            for (tb, wb) in &terms {
                let w = (wa * wb) as f64;
                for (x, b) in dense.iter_mut().zip(&blocks[&(ta[0], tb[0])]) {
                    *x += w * b;
                }
            }
        }
        Box::new(move |v: &[f64]| {
            (0..n1)
                .map(|i| dense[i * n1..(i + 1) * n1].iter().zip(v).map(|(a, b)| a * b).sum())
                .collect()
        })
    } else {
        let pairs: Vec<(f64, Vec<&Vec<f64>>)> = terms
            .iter()
            .flat_map(|(ta, wa)| {
                terms.iter().map(move |(tb, wb)| {
                    let bl: Vec<&Vec<f64>> = (0..d).map(|l| &blocks[&(ta[l], tb[l])]).collect();
                    ((wa * wb) as f64, bl)
                })
            })
            .collect();
        Box::new(move |v: &[f64]| {
            pairs
                .par_iter()
                .map(|(w, bl)| {
                    let mut cur = v.to_vec();
                    for (l, block) in bl.iter().enumerate() {
                        cur = apply_axis(&cur, n1, d, l, block);
                    }
                    cur.iter_mut().for_each(|x| *x *= w);
                    cur
                })
                .reduce(
                    || vec![0.0; total],
                    |mut a, b| {
                        a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                        a
                    },
                )
        })
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..total).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut v);
    let mut history = Vec::with_capacity(iters.min(1 << 16));
    let mut converged = false;
    let mut previous: Option<f64> = None;
    for _ in 0..iters {
        let w = matvec(&v);
        let rq: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        history.push(rq.max(0.0).sqrt());
        if let Some(prev) = previous {
            if (rq - prev).abs() <= POWER_REL_TOL * rq.abs() {
                converged = true;
                break;
            }
        }
        previous = Some(rq);
        v = w;
        if normalize(&mut v) == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(WorstCaseEstimate {
        estimate: *history.last().expect("at least one iteration"),
        history,
        converged,
    })
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Multiplies the n×n matrix `block` along axis `axis` of a d-dimensional
/// array with side n.
fn apply_axis(v: &[f64], n: usize, d: usize, axis: usize, block: &[f64]) -> Vec<f64> {
    let inner = n.pow((d - 1 - axis) as u32);
    let outer = v.len() / (n * inner);
    let mut out = vec![0.0; v.len()];
    for o in 0..outer {
        let base = o * n * inner;
        for i in 0..n {
            let row = &block[i * n..(i + 1) * n];
            for (k, &bik) in row.iter().enumerate() {
                if bik == 0.0 {
                    continue;
                }
                let src = base + k * inner;
                let dst = base + i * inner;
                for t in 0..inner {
                    out[dst + t] += bik * v[src + t];
                }
            }
        }
    }
    out
}

/// H(a) = {k ∈ Z^d : ∏ max(|k_j|, 1) ≤ a}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicCross {
    pub d: usize,
    pub a: f64,
    pub count: u64,
    pub indices: Vec<Vec<i64>>,
}

fn check_cross_args(d: usize, a: f64) -> Result<u64> {
    if d == 0 {
        return arg("dimension must be at least 1");
    }
    if !(a >= 1.0 && a.is_finite()) {
        return arg(format!("hyperbolic cross needs a >= 1, got {a}"));
    }
    if a >= 9.0e15 {
        return arg("hyperbolic cross parameter too large");
    }
    Ok(a.floor() as u64)
}

/// |H(a)| without enumerating.
pub fn hyperbolic_cross_count(d: usize, a: f64) -> Result<u128> {
    fn rec(d: usize, b: u64, memo: &mut HashMap<(usize, u64), u128>) -> u128 {
        if d == 0 {
            return 1;
        }
        if let Some(&v) = memo.get(&(d, b)) {
            return v;
        }
        // k = 0 and k = ±1 leave the budget unchanged
        let mut total = 3 * rec(d - 1, b, memo);
        for k in 2..=b {
            total += 2 * rec(d - 1, b / k, memo);
        }
        memo.insert((d, b), total);
        total
    }
    let b = check_cross_args(d, a)?;
    Ok(rec(d, b, &mut HashMap::new()))
}

/// Enumerates H(a) in lexicographic order.
pub fn hyperbolic_cross(d: usize, a: f64) -> Result<HyperbolicCross> {
    let b = check_cross_args(d, a)?;
    let count = caps::check(hyperbolic_cross_count(d, a)?, "hyperbolic cross")?;
    fn rec(d: usize, b: u64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        for k in -(b as i64)..=b as i64 {
            prefix.push(k);
            rec(d, b / k.unsigned_abs().max(1), prefix, out);
            prefix.pop();
        }
    }
    let mut indices = Vec::with_capacity(count);
    rec(d, b, &mut Vec::with_capacity(d), &mut indices);
    Ok(HyperbolicCross {
        d,
        a,
        count: indices.len() as u64,
        indices,
    })
}

/// 2^{-rm} m^{d-1}.
pub fn bound_model(m: u32, d: usize, r: f64) -> f64 {
    (-r * m as f64).exp2() * (m as f64).powi(d as i32 - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub n: u64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub d: usize,
    pub r: f64,
    pub records: Vec<RateRecord>,
    /// Number of smallest-n records left out of both fits.
    pub excluded: usize,
    /// Slope of log error against log(n^{-r} (log n)^{r(d-1)}); 1 means the
    /// errors follow the model rate.
    pub fitted_rate: f64,
    /// Slope of log error against log n.
    pub plain_slope: f64,
    pub model: String,
}

pub const DEFAULT_FIT_EXCLUDE: usize = 2;

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Least-squares rate fit of errors against grid sizes n.
pub fn fit_rate(records: &[(u64, f64)], d: usize, r: f64, exclude: usize) -> Result<RateFit> {
    if records.len() < 4 {
        return arg("rate fit needs at least 4 records");
    }
    if records.iter().any(|&(_, e)| !(e > 0.0 && e.is_finite())) {
        return arg("rate fit needs positive finite errors");
    }
    if records.iter().any(|&(n, _)| n < 2) {
        return arg("rate fit needs n >= 2");
    }
    let mut sorted = records.to_vec();
    sorted.sort_by_key(|&(n, _)| n);
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return arg("rate fit needs strictly increasing n");
    }
    if sorted.len() < exclude + 2 {
        return arg("too few records remain after exclusion");
    }
    let used = &sorted[exclude..];
    let ln_n: Vec<f64> = used.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ln_e: Vec<f64> = used.iter().map(|&(_, e)| e.ln()).collect();
    let model_x: Vec<f64> = ln_n
        .iter()
        .map(|&l| -r * l + r * (d as f64 - 1.0) * l.ln())
        .collect();
    Ok(RateFit {
        d,
        r,
        records: sorted.iter().map(|&(n, error)| RateRecord { n, error }).collect(),
        excluded: exclude,
        fitted_rate: ls_slope(&model_x, &ln_e),
        plain_slope: ls_slope(&ln_n, &ln_e),
        model: "n^-r (log n)^(r(d-1))".to_string(),
    })
}
