//! The weights λ_j, the Korobov function κ_{r,d} and elements f = κ_{r,d} ∗ g.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::fourier::FourierCoefficients;
use crate::special::{bernoulli_polynomial, periodic_zeta, riemann_zeta};

/// Truncation orders up to this size are summed directly.
const DIRECT_SUM_LIMIT: f64 = 4096.0;

/// Smoothness r and dimension d.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KorobovParams {
    pub r: f64,
    pub d: usize,
}

impl KorobovParams {
    /// Requires r > 1/2 so that κ_{r,d} ∈ L_2 and d ≥ 1.
    pub fn new(r: f64, d: usize) -> Result<Self> {
        if !(r.is_finite() && r > 0.5) {
            return arg(format!("smoothness r must exceed 1/2, got {r}"));
        }
        if d == 0 {
            return arg("dimension d must be at least 1");
        }
        Ok(KorobovParams { r, d })
    }

    /// Pointwise evaluation of κ_{r,d} needs absolute convergence, r > 1.
    pub fn require_pointwise(&self) -> Result<()> {
        if self.r <= 1.0 {
            return Err(Error::Unsupported(format!(
                "pointwise evaluation needs r > 1 (got r = {}); use the Fourier-domain path",
                self.r
            )));
        }
        Ok(())
    }
}

/// λ_j = ∏_l max(|j_l|, 1)^r.
pub fn lambda_weight(j: &[i64], r: f64) -> f64 {
    j.iter()
        .map(|&c| (c.unsigned_abs().max(1) as f64).powf(r))
        .product()
}

/// Univariate κ_r(0) = 1 + 2ζ(r).
fn kappa_at_zero(r: f64) -> f64 {
    1.0 + 2.0 * riemann_zeta(r)
}

/// Truncation order N with 2N^{1-r}/(r-1) ≤ tol_uni.
fn truncation_order(r: f64, tol_uni: f64) -> f64 {
    ((r - 1.0) * tol_uni / 2.0).powf(1.0 / (1.0 - r)).ceil()
}

/// Univariate tolerance for a d-fold product evaluated to overall `tol`.
pub(crate) fn univariate_tolerance(r: f64, d: usize, tol: f64) -> f64 {
    tol / (d as f64 * kappa_at_zero(r).powi(d as i32 - 1))
}

/// Univariate κ_r(x) = 1 + 2 Σ_{j ≥ 1} j^{-r} cos(jx) for r > 1.
///
/// Small truncation orders are summed directly. Otherwise the series is
/// written as 1 + 2 Re[e^{ix} Σ_{n ≥ 0} (n+1)^{-r} e^{inx}] and the periodic
/// zeta sum is evaluated to near machine precision.
pub(crate) fn kappa_univariate(x: f64, r: f64, tol_uni: f64) -> f64 {
    let n = truncation_order(r, tol_uni);
    if n <= DIRECT_SUM_LIMIT {
        let n = n as u64;
        return 1.0 + 2.0 * (1..=n).map(|j| (j as f64).powf(-r) * (j as f64 * x).cos()).sum::<f64>();
    }
    let t = reduce_angle(x);
    let z = periodic_zeta(r, 1.0, 1.0, t);
    1.0 + 2.0 * (Complex64::from_polar(1.0, t) * z).re
}

/// Representative of x mod 2π in (-π, π].
pub(crate) fn reduce_angle(x: f64) -> f64 {
    let t = x.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// κ_{r,d}(x) = ∏_l κ_r(x_l), accurate to `tol`.
pub fn korobov_eval(x: &[f64], params: &KorobovParams, tol: f64) -> Result<f64> {
    params.require_pointwise()?;
    if x.len() != params.d {
        return arg(format!(
            "point has {} coordinates, expected {}",
            x.len(),
            params.d
        ));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return arg("tolerance must be positive");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return arg("point must be finite");
    }
    let tol_uni = univariate_tolerance(params.r, params.d, tol);
    Ok(x.iter().map(|&xl| kappa_univariate(xl, params.r, tol_uni)).product())
}

/// Closed form of the univariate κ_r for even r ∈ {2, 4, 6, 8} through the
/// periodic Bernoulli polynomials:
/// κ_r(x) = 1 + (-1)^{r/2+1} (2π)^r B_r(x/2π) / r!.
pub fn korobov_eval_bernoulli(x: f64, r: u32) -> Result<f64> {
    if !x.is_finite() {
        return arg("point must be finite");
    }
    let t = (x / (2.0 * PI)).rem_euclid(1.0);
    let b = bernoulli_polynomial(r, t).ok_or_else(|| {
        Error::Unsupported(format!("Bernoulli closed form needs r in {{2,4,6,8}}, got {r}"))
    })?;
    let factorial: f64 = (1..=r).map(f64::from).product();
    let sign = if (r / 2) % 2 == 1 { 1.0 } else { -1.0 };
    Ok(1.0 + sign * (2.0 * PI).powi(r as i32) * b / factorial)
}

/// f = κ_{r,d} ∗ g with g a trigonometric polynomial; ‖f‖_{K^r_2} = ‖g‖_2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElementWire", into = "ElementWire")]
pub struct KorobovElement {
    params: KorobovParams,
    g: FourierCoefficients,
}

impl KorobovElement {
    pub fn new(params: KorobovParams, g: FourierCoefficients) -> Result<Self> {
        if g.dim() != params.d {
            return arg(format!(
                "g has dimension {}, parameters say {}",
                g.dim(),
                params.d
            ));
        }
        Ok(KorobovElement { params, g })
    }

    pub fn params(&self) -> &KorobovParams {
        &self.params
    }

    pub fn g(&self) -> &FourierCoefficients {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.params.d
    }

    pub fn norm(&self) -> f64 {
        self.g.l2_norm()
    }

    /// f̂ on the whole (finite) support of ĝ.
    pub fn fourier(&self) -> FourierCoefficients {
        let mut out = FourierCoefficients::new(self.params.d).expect("d >= 1");
        for (j, v) in self.g.iter() {
            out.set(j, v / lambda_weight(j, self.params.r))
                .expect("same dimension");
        }
        out
    }

    /// f̂ restricted to |j_l| ≤ box_l.
    pub fn element_fourier(&self, bx: &[u64]) -> Result<FourierCoefficients> {
        self.fourier().project(bx)
    }

    /// f(x) from the finite Fourier sum.
    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        self.fourier().eval(x)
    }
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementWire {
    r: f64,
    d: usize,
    g: FourierCoefficients,
}

impl From<KorobovElement> for ElementWire {
    fn from(e: KorobovElement) -> Self {
        ElementWire {
            r: e.params.r,
            d: e.params.d,
            g: e.g,
        }
    }
}

impl TryFrom<ElementWire> for KorobovElement {
    type Error = Error;
    fn try_from(w: ElementWire) -> Result<Self> {
        KorobovElement::new(KorobovParams::new(w.r, w.d)?, w.g)
    }
}

/// The K^r_2 inner product Σ_j ĝ1(j) conj(ĝ2(j)).
pub fn rkhs_inner(f1: &KorobovElement, f2: &KorobovElement) -> Result<Complex64> {
    if f1.params != f2.params {
        return arg("inner product of elements with different parameters");
    }
    Ok(f1
        .g
        .iter()
        .map(|(j, v)| v * f2.g.get(j).conj())
        .sum())
}

/// The reproducing kernel K(·, x) = κ_{2r,d}(· - x) of K^r_2.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    /// Parameters of the kernel itself, with smoothness 2r.
    pub params: KorobovParams,
    pub center: Vec<f64>,
}

impl KernelSpec {
    /// Kernel of the space K^r_2 described by `space`.
    pub fn for_space(space: &KorobovParams, center: Vec<f64>) -> Result<Self> {
        if center.len() != space.d {
            return arg("kernel center has wrong dimension");
        }
        Ok(KernelSpec {
            params: KorobovParams {
                r: 2.0 * space.r,
                d: space.d,
            },
            center,
        })
    }

    /// Kernel coefficient λ_j^{-1}(2r) e^{-i(j, center)}.
    pub fn coefficient(&self, j: &[i64]) -> Complex64 {
        let phase: f64 = -j.iter().zip(&self.center).map(|(&a, &b)| a as f64 * b).sum::<f64>();
        Complex64::from_polar(1.0 / lambda_weight(j, self.params.r), phase)
    }

    /// The kernel as an element of K^r_2, truncated to |j_l| ≤ box_l: its
    /// g-coefficients are λ_j^{-1}(r) e^{-i(j, center)}.
    pub fn as_element(&self, bx: &[u64]) -> Result<KorobovElement> {
        let space = KorobovParams {
            r: 0.5 * self.params.r,
            d: self.params.d,
        };
        if bx.len() != space.d {
            return arg("box has wrong dimension");
        }
        let count: u128 = bx.iter().map(|&b| 2 * b as u128 + 1).product();
        let count = crate::caps::check(count, "kernel truncation box")?;
        let mut g = FourierCoefficients::new(space.d)?;
        let mut j: Vec<i64> = bx.iter().map(|&b| -(b as i64)).collect();
        for _ in 0..count {
            let phase: f64 = -j.iter().zip(&self.center).map(|(&a, &b)| a as f64 * b).sum::<f64>();
            g.set(&j, Complex64::from_polar(1.0 / lambda_weight(&j, space.r), phase))?;
            for l in (0..j.len()).rev() {
                if j[l] < bx[l] as i64 {
                    j[l] += 1;
                    break;
                }
                j[l] = -(bx[l] as i64);
            }
        }
        KorobovElement::new(space, g)
    }
}

/// Outcome of comparing (f, K(·,x)) with f(x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReproducingCheck {
    pub inner: Complex64,
    pub pointwise: Complex64,
    /// Set when supp(ĝ) is not contained in the box, so the two values need
    /// not agree.
    pub truncated: bool,
}

/// Evaluates (f, K(·,x))_{K^r_2} against the kernel truncated to `bx`
/// together with f(x).
pub fn reproducing_check(f: &KorobovElement, x: &[f64], bx: &[u64]) -> Result<ReproducingCheck> {
    if x.len() != f.dim() || bx.len() != f.dim() {
        return arg("point or box has wrong dimension");
    }
    let kernel = KernelSpec::for_space(&f.params, x.to_vec())?;
    let r = f.params.r;
    let mut inner = Complex64::new(0.0, 0.0);
    let mut truncated = false;
    // Only frequencies in supp(ĝ) contribute to the inner product, so the
    // truncated kernel is never materialized.
    for (j, v) in f.g.iter() {
        if j.iter().zip(bx).all(|(c, &b)| c.unsigned_abs() <= b) {
            let phase: f64 = -j.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum::<f64>();
            let kg = Complex64::from_polar(1.0 / lambda_weight(j, r), phase);
            inner += v * kg.conj();
        } else {
            truncated = true;
        }
    }
    debug_assert!(kernel.params.r == 2.0 * r);
    Ok(ReproducingCheck {
        inner,
        pointwise: f.eval(x)?,
        truncated,
    })
}
