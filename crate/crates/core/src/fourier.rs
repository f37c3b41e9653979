//! Sparse multivariate Fourier series on the torus T^d = [0, 2π)^d.
//!
//! A function is stored by its nonzero Fourier coefficients, keyed by
//! frequency vector. Norms follow the normalized convention
//! ‖f‖_p = ((2π)^{-d} ∫ |f|^p)^{1/p}, so ‖χ_j‖_p = 1 for every exponential.

use std::collections::BTreeMap;
use std::ops::Deref;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::caps;
use crate::error::{arg, Error, Result};

/// Below this value of |sin(t/2)| the Dirichlet kernel is summed directly.
const DIRICHLET_SINGULAR_THRESHOLD: f64 = 1e-8;
const HERMITIAN_REL_TOL: f64 = 1e-12;
pub const DEFAULT_OVERSAMPLE: usize = 4;

/// A lattice vector j ∈ Z^d.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frequency(Vec<i64>);

impl Frequency {
    pub fn new(components: Vec<i64>) -> Self {
        Frequency(components)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn negated(&self) -> Self {
        Frequency(self.0.iter().map(|c| -c).collect())
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }
}

impl Deref for Frequency {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for Frequency {
    fn from(v: Vec<i64>) -> Self {
        Frequency(v)
    }
}

impl std::borrow::Borrow<[i64]> for Frequency {
    fn borrow(&self) -> &[i64] {
        &self.0
    }
}

/// Finitely supported Fourier coefficients f̂ : Z^d → C.
///
/// Exact zeros are never stored. The map is ordered lexicographically by
/// frequency, which is also the serialization order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoefficientsWire", into = "CoefficientsWire")]
pub struct FourierCoefficients {
    dim: usize,
    entries: BTreeMap<Frequency, Complex64>,
}

impl FourierCoefficients {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return arg("dimension must be at least 1");
        }
        Ok(FourierCoefficients {
            dim,
            entries: BTreeMap::new(),
        })
    }

    /// The single exponential amp·χ_j.
    pub fn monomial(j: Vec<i64>, amp: Complex64) -> Self {
        assert!(!j.is_empty(), "frequency must have at least one component");
        let mut out = FourierCoefficients {
            dim: j.len(),
            entries: BTreeMap::new(),
        };
        if amp != Complex64::new(0.0, 0.0) {
            out.entries.insert(Frequency(j), amp);
        }
        out
    }

    /// Builds coefficients from (frequency, amplitude) pairs; repeated
    /// frequencies are summed.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, Complex64)>,
    {
        let mut out = Self::new(dim)?;
        for (j, v) in entries {
            out.accumulate(&j, v)?;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, j: &[i64]) -> Complex64 {
        self.entries.get(j).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Frequency, &Complex64)> {
        self.entries.iter()
    }

    fn check_dim(&self, j: &[i64]) -> Result<()> {
        if j.len() != self.dim {
            return arg(format!(
                "frequency has {} components, expected {}",
                j.len(),
                self.dim
            ));
        }
        Ok(())
    }

    /// Overwrites the coefficient at `j`; a zero value removes the entry.
    pub fn set(&mut self, j: &[i64], v: Complex64) -> Result<()> {
        self.check_dim(j)?;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return arg("coefficients must be finite");
        }
        if v == Complex64::new(0.0, 0.0) {
            self.entries.remove(j);
        } else {
            self.entries.insert(Frequency(j.to_vec()), v);
        }
        Ok(())
    }

    /// Adds `v` to the coefficient at `j`.
    pub fn accumulate(&mut self, j: &[i64], v: Complex64) -> Result<()> {
        let cur = self.get(j);
        self.set(j, cur + v)
    }

    /// Per-coordinate degree max |j_l| over the support.
    pub fn degree(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.dim];
        for j in self.entries.keys() {
            for (d, c) in deg.iter_mut().zip(j.iter()) {
                *d = (*d).max(c.unsigned_abs());
            }
        }
        deg
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn abs_sum(&self) -> f64 {
        self.entries.values().map(|v| v.norm()).sum()
    }

    /// Whether f̂(-j) = conj f̂(j) holds up to a relative 1e-12, i.e. the
    /// function is real valued.
    pub fn is_real_valued(&self) -> bool {
        let tol = HERMITIAN_REL_TOL * self.max_abs();
        self.entries
            .iter()
            .all(|(j, v)| (self.get(&j.negated()) - v.conj()).norm() <= tol)
    }

    /// The coefficients of Re f.
    pub fn real_part(&self) -> Self {
        let mut out = FourierCoefficients {
            dim: self.dim,
            entries: BTreeMap::new(),
        };
        for (j, v) in &self.entries {
            let half = 0.5 * v;
            out.accumulate(j, half).expect("same dimension");
            out.accumulate(&j.negated(), half.conj())
                .expect("same dimension");
        }
        out
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.entries.retain(|_, v| {
            *v *= c;
            *v != Complex64::new(0.0, 0.0)
        });
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        if self.dim != other.dim {
            return arg("dimension mismatch");
        }
        let mut out = self.clone();
        for (j, v) in &other.entries {
            out.accumulate(j, sign * v)?;
        }
        Ok(out)
    }

    /// Point evaluation Σ_j f̂(j) e^{i(j,x)}.
    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != self.dim {
            return arg(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.dim
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return arg("point must be finite");
        }
        Ok(self
            .entries
            .iter()
            .map(|(j, v)| {
                let phase: f64 = j.iter().zip(x).map(|(&jl, &xl)| jl as f64 * xl).sum();
                v * Complex64::from_polar(1.0, phase)
            })
            .sum())
    }

    /// Normalized convolution (2π)^{-d} ∫ f1(y) f2(x - y) dy, which multiplies
    /// coefficients pointwise.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return arg("dimension mismatch in convolution");
        }
        let mut out = Self::new(self.dim)?;
        for (j, v) in &self.entries {
            if let Some(w) = other.entries.get(j) {
                out.set(j, v * w)?;
            }
        }
        Ok(out)
    }

    /// Tensor Fourier projection S_m: keeps |j_l| ≤ m_l in every coordinate.
    pub fn project(&self, m: &[u64]) -> Result<Self> {
        if m.len() != self.dim {
            return arg("projection band has wrong dimension");
        }
        let entries = self
            .entries
            .iter()
            .filter(|(j, _)| j.iter().zip(m).all(|(c, &ml)| c.unsigned_abs() <= ml))
            .map(|(j, v)| (j.clone(), *v))
            .collect();
        Ok(FourierCoefficients {
            dim: self.dim,
            entries,
        })
    }

    /// Values at the tensor grid (2π s_1/q_1, …, 2π s_d/q_d).
    ///
    /// Coefficients are folded onto a dense q-periodic array (aliasing) and
    /// an inverse DFT is applied, which is exact for finite support.
    pub fn sample_grid(&self, q: &[usize]) -> Result<GridSignal> {
        if q.len() != self.dim {
            return arg("grid shape has wrong dimension");
        }
        if q.contains(&0) {
            return arg("grid sizes must be positive");
        }
        let total = caps::check(q.iter().map(|&v| v as u128).product(), "sample grid")?;
        let mut values = vec![Complex64::new(0.0, 0.0); total];
        for (j, v) in &self.entries {
            let mut idx = 0usize;
            for (&jl, &ql) in j.iter().zip(q) {
                idx = idx * ql + jl.rem_euclid(ql as i64) as usize;
            }
            values[idx] += v;
        }
        fft_nd(&mut values, q, FftDirection::Inverse);
        Ok(GridSignal {
            shape: q.to_vec(),
            values,
        })
    }

    /// ‖f‖_2 = (Σ |f̂(j)|²)^{1/2}.
    pub fn l2_norm(&self) -> f64 {
        self.entries
            .values()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Discrete L_p norm on the tensor grid with oversample·(2D_l + 1) nodes
    /// per coordinate, D_l being the degree in coordinate l.
    ///
    /// This is a quadrature approximation of the continuous norm. It is
    /// exact for p = 2 and for even integer p with oversample·(2D+1) > pD.
    pub fn lp_norm_grid(&self, p: f64, oversample: usize) -> Result<f64> {
        if !(p > 1.0 && p.is_finite()) {
            return arg(format!("p must lie in (1, ∞), got {p}"));
        }
        if oversample < 2 {
            return arg("oversample must be at least 2");
        }
        let q: Vec<usize> = self
            .degree()
            .iter()
            .map(|&d| oversample * (2 * d as usize + 1))
            .collect();
        let grid = self.sample_grid(&q)?;
        Ok(grid.lp_mean(p))
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct CoefficientsWire {
    d: usize,
    entries: Vec<Vec<serde_json::Number>>,
}

impl From<FourierCoefficients> for CoefficientsWire {
    fn from(f: FourierCoefficients) -> Self {
        let entries = f
            .entries
            .iter()
            .map(|(j, v)| {
                let mut row: Vec<serde_json::Number> = j.iter().map(|&c| c.into()).collect();
                row.push(serde_json::Number::from_f64(v.re).expect("finite"));
                row.push(serde_json::Number::from_f64(v.im).expect("finite"));
                row
            })
            .collect();
        CoefficientsWire { d: f.dim, entries }
    }
}

impl TryFrom<CoefficientsWire> for FourierCoefficients {
    type Error = Error;

    fn try_from(w: CoefficientsWire) -> Result<Self> {
        let mut out = FourierCoefficients::new(w.d)?;
        for row in w.entries {
            if row.len() != w.d + 2 {
                return arg(format!(
                    "entry has {} fields, expected {}",
                    row.len(),
                    w.d + 2
                ));
            }
            let j = row[..w.d]
                .iter()
                .map(|n| {
                    n.as_i64()
                        .ok_or_else(|| Error::Argument(format!("frequency {n} is not an integer")))
                })
                .collect::<Result<Vec<i64>>>()?;
            let re = row[w.d].as_f64().unwrap_or(f64::NAN);
            let im = row[w.d + 1].as_f64().unwrap_or(f64::NAN);
            out.accumulate(&j, Complex64::new(re, im))?;
        }
        Ok(out)
    }
}

/// Complex samples on a tensor grid, stored row-major (last coordinate
/// fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct GridSignal {
    shape: Vec<usize>,
    values: Vec<Complex64>,
}

impl GridSignal {
    pub fn new(shape: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || n != values.len() {
            return arg("grid values do not match shape");
        }
        Ok(GridSignal { shape, values })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Value at multi-index s.
    pub fn at(&self, s: &[usize]) -> Complex64 {
        let mut idx = 0;
        for (&sl, &ql) in s.iter().zip(&self.shape) {
            idx = idx * ql + sl;
        }
        self.values[idx]
    }

    /// Forward normalized DFT: the q-periodic folded coefficient array, so
    /// that entry k equals Σ_{j ≡ k mod q} f̂(j) for a sampled series.
    pub fn folded_coefficients(&self) -> Vec<Complex64> {
        let mut v = self.values.clone();
        fft_nd(&mut v, &self.shape, FftDirection::Forward);
        let scale = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|c| *c *= scale);
        v
    }

    /// (N^{-1} Σ |v|^p)^{1/p}.
    pub fn lp_mean(&self, p: f64) -> f64 {
        let n = self.values.len() as f64;
        (self.values.iter().map(|v| v.norm().powf(p)).sum::<f64>() / n).powf(1.0 / p)
    }
}

/// In-place multidimensional DFT (unnormalized) along every axis.
pub(crate) fn fft_nd(values: &mut [Complex64], shape: &[usize], direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let total = values.len();
    let mut stride = total;
    for &len in shape {
        stride /= len;
        if len == 1 {
            continue;
        }
        let fft = planner.plan_fft(len, direction);
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let block = len * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = values[base + k * stride];
                }
                fft.process(&mut line);
                for (k, slot) in line.iter().enumerate() {
                    values[base + k * stride] = *slot;
                }
            }
        }
    }
}

/// Dirichlet kernel D_m(t) = Σ_{|l| ≤ m} e^{ilt} = sin((m+½)t) / sin(t/2).
pub fn dirichlet_eval(m: u64, t: f64) -> Result<f64> {
    if m < 1 {
        return arg("Dirichlet kernel order must be at least 1");
    }
    if !t.is_finite() {
        return arg("Dirichlet kernel argument must be finite");
    }
    let denom = (0.5 * t).sin();
    if denom.abs() < DIRICHLET_SINGULAR_THRESHOLD {
        return Ok(dirichlet_sum(m, t));
    }
    Ok(((m as f64 + 0.5) * t).sin() / denom)
}

/// 1 + 2 Σ_{l=1}^{m} cos(lt).
pub fn dirichlet_sum(m: u64, t: f64) -> f64 {
    1.0 + 2.0 * (1..=m).map(|l| (l as f64 * t).cos()).sum::<f64>()
}
