//! Translate combinations and the operators Q_m, T_k, R_k and their tensor
//! products.
//!
//! For f = κ_r ∗ g the operator
//!
//! ```text
//! Q_m f = (2m+1)^{-1} Σ_{l ∈ Z[2m+1]} S_m(g)(2πl/(2m+1)) κ_r(· - 2πl/(2m+1))
//! ```
//!
//! is a combination of 2m+1 translates of κ_r. Sampling on 2m+1 nodes folds
//! frequencies modulo 2m+1, which gives the exact Fourier form
//! (Q_m f)^(j) = ĝ(alias_rep(j, m)) λ_j^{-1}. Every operator here is a signed
//! integer combination of tensor products of the two atoms I and Q_m, so
//! both forms extend to the whole family.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::caps;
use crate::error::{arg, Error, Result};
use crate::fourier::FourierCoefficients;
use crate::index::{advance, gcd, strides};
use crate::korobov::{
    kappa_univariate, lambda_weight, reduce_angle, univariate_tolerance, KorobovElement,
    KorobovParams,
};
use crate::special::{lattice_zeta, periodic_zeta, riemann_zeta};

/// Default accuracy of pointwise κ evaluation.
pub const DEFAULT_KAPPA_TOL: f64 = 1e-12;
/// Imaginary parts of translate coefficients below this (relative to
/// max(1, ‖ĝ‖_1)) are rounding noise when g is real valued.
const REAL_ENFORCE_TOL: f64 = 1e-12;
/// Relative rounding allowance for residue-class mass sums.
const GRAM_REL_ERR: f64 = 1e-13;
/// Largest admissible dyadic level k (so that 2^k fits comfortably).
const MAX_LEVEL: i64 = 40;

/// The unique j' ≡ j (mod 2m+1) with |j'| ≤ m.
pub fn alias_rep(j: i64, m: u64) -> i64 {
    let modulus = 2 * m as i64 + 1;
    let r = j.rem_euclid(modulus);
    if r > m as i64 {
        r - modulus
    } else {
        r
    }
}

/// A reduced fraction s/q with 0 ≤ s < q, standing for the angle 2πs/q.
///
/// Field order makes the derived ordering compare q first, then s.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "(i64, u64)", into = "(u64, u64)")]
pub struct Fraction {
    q: u64,
    s: u64,
}

impl Fraction {
    pub fn new(s: i64, q: u64) -> Result<Self> {
        if q == 0 {
            return arg("node denominator must be positive");
        }
        let s = s.rem_euclid(q as i64) as u64;
        let g = gcd(s as u128, q as u128) as u64;
        Ok(Fraction { q: q / g, s: s / g })
    }

    pub fn numerator(&self) -> u64 {
        self.s
    }

    pub fn denominator(&self) -> u64 {
        self.q
    }

    pub fn angle(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.s as f64 / self.q as f64
    }
}

impl TryFrom<(i64, u64)> for Fraction {
    type Error = Error;
    fn try_from((s, q): (i64, u64)) -> Result<Self> {
        let f = Fraction::new(s, q)?;
        if f.s as i64 != s || f.q != q {
            return arg(format!("node coordinate {s}/{q} is not in reduced form"));
        }
        Ok(f)
    }
}

impl From<Fraction> for (u64, u64) {
    fn from(f: Fraction) -> Self {
        (f.s, f.q)
    }
}

/// A point of T^d with rational coordinates 2πs_i/q_i.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RationalNode(Vec<Fraction>);

impl RationalNode {
    pub fn new(coords: Vec<Fraction>) -> Self {
        RationalNode(coords)
    }

    /// Builds a node from unreduced pairs (s_i, q_i).
    pub fn from_pairs(pairs: &[(i64, u64)]) -> Result<Self> {
        pairs
            .iter()
            .map(|&(s, q)| Fraction::new(s, q))
            .collect::<Result<Vec<_>>>()
            .map(RationalNode)
    }

    pub fn coords(&self) -> &[Fraction] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn point(&self) -> Vec<f64> {
        self.0.iter().map(Fraction::angle).collect()
    }
}

/// Σ_l c_l κ_{r,d}(· - y_l) over distinct rational nodes y_l.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CombinationWire", into = "CombinationWire")]
pub struct TranslateCombination {
    params: KorobovParams,
    terms: BTreeMap<RationalNode, Complex64>,
}

impl TranslateCombination {
    pub fn new(params: KorobovParams) -> Self {
        TranslateCombination {
            params,
            terms: BTreeMap::new(),
        }
    }

    pub fn params(&self) -> &KorobovParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&RationalNode, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, node: &RationalNode) -> Complex64 {
        self.terms.get(node).copied().unwrap_or_default()
    }

    /// Adds c to the coefficient at `node`, merging equal nodes exactly.
    pub fn add_term(&mut self, node: RationalNode, c: Complex64) -> Result<()> {
        if node.dim() != self.params.d {
            return arg("node has wrong dimension");
        }
        if !(c.re.is_finite() && c.im.is_finite()) {
            return arg("translate coefficient must be finite");
        }
        let entry = self.terms.entry(node).or_default();
        *entry += c;
        Ok(())
    }

    /// Adds weight·other into self.
    pub fn merge(&mut self, other: &TranslateCombination, weight: f64) -> Result<()> {
        if other.params != self.params {
            return arg("cannot merge combinations with different parameters");
        }
        for (node, c) in &other.terms {
            self.add_term(node.clone(), c * weight)?;
        }
        Ok(())
    }

    /// Removes coefficients that are exactly zero.
    pub fn prune(&mut self) {
        self.terms.retain(|_, c| *c != Complex64::new(0.0, 0.0));
    }

    /// Drops imaginary parts up to `threshold`; larger ones are an internal
    /// consistency failure.
    pub fn enforce_real(&mut self, threshold: f64) -> Result<()> {
        for (node, c) in self.terms.iter_mut() {
            if c.im.abs() > threshold {
                return Err(Error::Internal(format!(
                    "coefficient at {:?} has imaginary part {:e} for real-valued input",
                    node, c.im
                )));
            }
            c.im = 0.0;
        }
        self.prune();
        Ok(())
    }

    pub fn abs_sum(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Σ_l c_l κ_{r,d}(x - y_l), each κ value accurate to `tol`.
    pub fn eval(&self, x: &[f64], tol: f64) -> Result<Complex64> {
        self.params.require_pointwise()?;
        if x.len() != self.params.d {
            return arg("point has wrong dimension");
        }
        if x.iter().any(|v| !v.is_finite()) || !(tol > 0.0) {
            return arg("point must be finite and tolerance positive");
        }
        let r = self.params.r;
        let tol_uni = univariate_tolerance(r, self.params.d, tol);
        let mut caches: Vec<HashMap<Fraction, f64>> = vec![HashMap::new(); self.params.d];
        let mut total = Complex64::new(0.0, 0.0);
        for (node, c) in &self.terms {
            let mut k = 1.0;
            for (l, f) in node.coords().iter().enumerate() {
                k *= *caches[l]
                    .entry(*f)
                    .or_insert_with(|| kappa_univariate(x[l] - f.angle(), r, tol_uni));
            }
            total += c * k;
        }
        Ok(total)
    }
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermWire {
    node: RationalNode,
    c: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    c_im: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CombinationWire {
    r: f64,
    d: usize,
    terms: Vec<TermWire>,
}

impl From<TranslateCombination> for CombinationWire {
    fn from(t: TranslateCombination) -> Self {
        CombinationWire {
            r: t.params.r,
            d: t.params.d,
            terms: t
                .terms
                .into_iter()
                .map(|(node, c)| TermWire {
                    node,
                    c: c.re,
                    c_im: c.im,
                })
                .collect(),
        }
    }
}

impl TryFrom<CombinationWire> for TranslateCombination {
    type Error = Error;
    fn try_from(w: CombinationWire) -> Result<Self> {
        let mut out = TranslateCombination::new(KorobovParams::new(w.r, w.d)?);
        for t in w.terms {
            if out.terms.contains_key(&t.node) {
                return arg("duplicate node in translate combination");
            }
            out.add_term(t.node, Complex64::new(t.c, t.c_im))?;
        }
        Ok(out)
    }
}

/// Building blocks of every operator: the identity and Q_m.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Atom {
    Identity,
    Q(u64),
}

impl Atom {
    /// The ĝ index feeding output frequency j.
    fn source(self, j: i64) -> i64 {
        match self {
            Atom::Identity => j,
            Atom::Q(m) => alias_rep(j, m),
        }
    }

    /// All output frequencies fed by ĝ(c).
    fn preimage(self, c: i64) -> Option<Class> {
        match self {
            Atom::Identity => Some(Class::Point(c as i128)),
            Atom::Q(m) => {
                if c.unsigned_abs() > m {
                    return None;
                }
                let modulus = 2 * m as i128 + 1;
                Some(Class::Progression {
                    residue: (c as i128).rem_euclid(modulus),
                    modulus,
                })
            }
        }
    }

    /// Σ over the preimage of c of λ_j^{-1} e^{ijx}, for r > 1.
    fn series(self, c: i64, x: f64, r: f64) -> Complex64 {
        match self {
            Atom::Identity => {
                Complex64::from_polar(1.0 / lambda_weight(&[c], r), c as f64 * x)
            }
            Atom::Q(m) => {
                if c.unsigned_abs() > m {
                    return Complex64::new(0.0, 0.0);
                }
                let modulus = 2 * m as i64 + 1;
                let theta = reduce_angle(modulus as f64 * x);
                let mut sum = Complex64::new(if c == 0 { 1.0 } else { 0.0 }, 0.0);
                let first_pos = if c > 0 { c } else { c + modulus };
                sum += Complex64::from_polar(1.0, first_pos as f64 * x)
                    * periodic_zeta(r, first_pos as f64, modulus as f64, theta);
                let first_neg = if c < 0 { -c } else { modulus - c };
                sum += Complex64::from_polar(1.0, -(first_neg as f64) * x)
                    * periodic_zeta(r, first_neg as f64, modulus as f64, -theta);
                sum
            }
        }
    }
}

/// A residue class of integers: a single point or a progression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Class {
    Point(i128),
    Progression { residue: i128, modulus: i128 },
}

fn mod_inverse(a: i128, m: i128) -> i128 {
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    s0.rem_euclid(m)
}

fn intersect(a: Class, b: Class) -> Option<Class> {
    use Class::*;
    match (a, b) {
        (Point(p), Point(q)) => (p == q).then_some(Point(p)),
        (Point(p), Progression { residue, modulus })
        | (Progression { residue, modulus }, Point(p)) => {
            (p.rem_euclid(modulus) == residue).then_some(Point(p))
        }
        (
            Progression {
                residue: r1,
                modulus: m1,
            },
            Progression {
                residue: r2,
                modulus: m2,
            },
        ) => {
            let g = gcd(m1 as u128, m2 as u128) as i128;
            if (r2 - r1).rem_euclid(g) != 0 {
                return None;
            }
            let (m1g, m2g) = (m1 / g, m2 / g);
            let t = if m2g == 1 {
                0
            } else {
                ((r2 - r1) / g).rem_euclid(m2g) * mod_inverse(m1g, m2g) % m2g
            };
            let lcm = m1g * m2;
            Some(Progression {
                residue: (r1 + m1 * t).rem_euclid(lcm),
                modulus: lcm,
            })
        }
    }
}

/// A set of frequencies in one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    All,
    /// |j| ≤ J.
    Inside(u64),
    /// |j| > J.
    Outside(u64),
}

impl Region {
    fn contains(self, j: i128) -> bool {
        match self {
            Region::All => true,
            Region::Inside(b) => j.unsigned_abs() <= b as u128,
            Region::Outside(b) => j.unsigned_abs() > b as u128,
        }
    }
}

/// Σ_{j ∈ class ∩ region} max(|j|,1)^{-s}.
fn class_mass(class: Class, region: Region, s: f64) -> f64 {
    let weight = |j: i128| (j.unsigned_abs().max(1) as f64).powf(-s);
    match class {
        Class::Point(p) => {
            if region.contains(p) {
                weight(p)
            } else {
                0.0
            }
        }
        Class::Progression { residue, modulus } => match region {
            Region::Inside(b) => {
                let b = b as i128;
                let mut j = -b + (residue + b).rem_euclid(modulus);
                let mut sum = 0.0;
                while j <= b {
                    sum += weight(j);
                    j += modulus;
                }
                sum
            }
            Region::All | Region::Outside(_) => {
                let lower: i128 = match region {
                    Region::Outside(b) => b as i128 + 1,
                    _ => 1,
                };
                let first_pos = lower + (residue - lower).rem_euclid(modulus);
                let first_neg = lower + (-residue - lower).rem_euclid(modulus);
                let mut sum = lattice_zeta(s, first_pos as f64, modulus as f64)
                    + lattice_zeta(s, first_neg as f64, modulus as f64);
                if region == Region::All && residue == 0 {
                    sum += 1.0;
                }
                sum
            }
        },
    }
}

/// Univariate operator descriptors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnivariateOp {
    I,
    /// Q_m with m ≥ 1.
    Q(u64),
    /// T_k = I - Q_{2^k}, T_{-1} = I.
    T(i64),
    /// R_0 = Q_1, R_k = Q_{2^k} - Q_{2^{k-1}}.
    R(i64),
}

impl UnivariateOp {
    fn expand(self) -> Result<Vec<(Atom, i64)>> {
        let level = |k: i64| -> Result<u64> {
            if k > MAX_LEVEL {
                return arg(format!("level {k} exceeds the supported maximum {MAX_LEVEL}"));
            }
            Ok(1u64 << k)
        };
        Ok(match self {
            UnivariateOp::I => vec![(Atom::Identity, 1)],
            UnivariateOp::Q(m) => {
                if m < 1 {
                    return arg("Q_m needs m >= 1");
                }
                vec![(Atom::Q(m), 1)]
            }
            UnivariateOp::T(k) => match k {
                -1 => vec![(Atom::Identity, 1)],
                k if k < -1 => return arg(format!("T_k needs k >= -1, got {k}")),
                k => vec![(Atom::Identity, 1), (Atom::Q(level(k)?), -1)],
            },
            UnivariateOp::R(k) => match k {
                0 => vec![(Atom::Q(1), 1)],
                k if k < 0 => return arg(format!("R_k needs k >= 0, got {k}")),
                k => vec![(Atom::Q(level(k)?), 1), (Atom::Q(level(k - 1)?), -1)],
            },
        })
    }
}

/// Accumulated residue-class sum together with the sum of absolute values
/// of its contributions, which bounds the rounding error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MassSum {
    pub value: f64,
    pub abs_sum: f64,
}

impl MassSum {
    fn add(&mut self, other: MassSum) {
        self.value += other.value;
        self.abs_sum += other.abs_sum;
    }

    /// Rounding allowance for `value`.
    pub fn error(&self) -> f64 {
        GRAM_REL_ERR * self.abs_sum
    }

    /// Upper bound on the square root of the exact mass.
    pub fn norm_upper(&self) -> f64 {
        (self.value.max(0.0) + self.error()).sqrt()
    }
}

/// Certified description of the Fourier mass outside a truncation box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCertificate {
    pub box_radius: Vec<u64>,
    /// Upper bound on the L2 norm of the discarded coefficients, from exact
    /// residue-class sums.
    pub tail_norm: f64,
    /// The a priori bound (Σ|w|)·max|ĝ|·(Σ_{j ∉ box} λ_j^{-2})^{1/2}.
    pub crude_bound: f64,
}

/// Fourier coefficients of an operator output on a box, with a tail
/// certificate for what lies outside.
#[derive(Clone, Debug, PartialEq)]
pub struct Approximation {
    pub coeffs: FourierCoefficients,
    pub certificate: Option<TailCertificate>,
}

/// Σ_t w_t ⊗_l atom_{t,l}: a signed integer combination of tensor atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorOperator {
    d: usize,
    terms: BTreeMap<Vec<Atom>, i64>,
}

impl TensorOperator {
    pub fn zero(d: usize) -> Self {
        TensorOperator {
            d,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut out = Self::zero(d);
        out.terms.insert(vec![Atom::Identity; d], 1);
        out
    }

    /// ⊗_l ops_l multiplied out into atoms.
    pub fn tensor(ops: &[UnivariateOp]) -> Result<Self> {
        if ops.is_empty() {
            return arg("tensor operator needs at least one coordinate");
        }
        let mut partial: Vec<(Vec<Atom>, i64)> = vec![(Vec::new(), 1)];
        for op in ops {
            let factors = op.expand()?;
            partial = partial
                .iter()
                .flat_map(|(atoms, w)| {
                    factors.iter().map(move |(a, v)| {
                        let mut next = atoms.clone();
                        next.push(*a);
                        (next, w * v)
                    })
                })
                .collect();
        }
        let mut out = Self::zero(ops.len());
        for (atoms, w) in partial {
            out.add_term(atoms, w);
        }
        Ok(out)
    }

    fn add_term(&mut self, atoms: Vec<Atom>, w: i64) {
        let entry = self.terms.entry(atoms.clone()).or_insert(0);
        *entry += w;
        if *entry == 0 {
            self.terms.remove(&atoms);
        }
    }

    /// self += weight·other.
    pub fn add_scaled(&mut self, other: &TensorOperator, weight: i64) -> Result<()> {
        if other.d != self.d {
            return arg("operator dimension mismatch");
        }
        for (atoms, w) in &other.terms {
            self.add_term(atoms.clone(), w * weight);
        }
        Ok(())
    }

    /// I - self.
    pub fn complement(&self) -> Self {
        let mut out = Self::identity(self.d);
        out.add_scaled(self, -1).expect("same dimension");
        out
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Atom>, &i64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Largest Q level per coordinate (0 when only identities occur).
    pub fn band(&self) -> Vec<u64> {
        let mut band = vec![0u64; self.d];
        for atoms in self.terms.keys() {
            for (b, a) in band.iter_mut().zip(atoms) {
                if let Atom::Q(m) = a {
                    *b = (*b).max(*m);
                }
            }
        }
        band
    }

    fn check_elem(&self, elem: &KorobovElement) -> Result<()> {
        if elem.dim() != self.d {
            return arg(format!(
                "operator acts in dimension {}, element has {}",
                self.d,
                elem.dim()
            ));
        }
        Ok(())
    }

    /// Dense Σ_t w_t ĝ(source_t(j)) on the box |j_l| ≤ bx_l (λ not applied).
    fn dense_sources(&self, g: &FourierCoefficients, bx: &[u64]) -> Result<Vec<Complex64>> {
        let sizes: Vec<usize> = bx.iter().map(|&b| 2 * b as usize + 1).collect();
        let total = caps::check(sizes.iter().map(|&s| s as u128).product(), "operator box")?;
        let st = strides(&sizes);
        let mut out = vec![Complex64::new(0.0, 0.0); total];
        for (atoms, &w) in &self.terms {
            for (c, gc) in g.iter() {
                let mut lists: Vec<Vec<usize>> = Vec::with_capacity(self.d);
                for l in 0..self.d {
                    let list = match atoms[l].preimage(c[l]) {
                        None => Vec::new(),
                        Some(cls) => class_members(cls, bx[l])
                            .into_iter()
                            .map(|j| (j + bx[l] as i64) as usize)
                            .collect(),
                    };
                    if list.is_empty() {
                        break;
                    }
                    lists.push(list);
                }
                if lists.len() < self.d {
                    continue;
                }
                let add = gc * w as f64;
                let lens: Vec<usize> = lists.iter().map(Vec::len).collect();
                let mut idx = vec![0usize; self.d];
                loop {
                    let pos: usize = (0..self.d).map(|l| lists[l][idx[l]] * st[l]).sum();
                    out[pos] += add;
                    if !advance(&mut idx, &lens) {
                        break;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Dense Fourier coefficients of (self f) on |j_l| ≤ bx_l, row-major in
    /// j_l + bx_l.
    pub(crate) fn dense_fourier(&self, elem: &KorobovElement, bx: &[u64]) -> Result<Vec<Complex64>> {
        let mut v = self.dense_sources(elem.g(), bx)?;
        let r = elem.params().r;
        let sizes: Vec<usize> = bx.iter().map(|&b| 2 * b as usize + 1).collect();
        let tables: Vec<Vec<f64>> = bx
            .iter()
            .map(|&b| {
                (-(b as i64)..=b as i64)
                    .map(|j| 1.0 / lambda_weight(&[j], r))
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; self.d];
        for value in v.iter_mut() {
            if *value != Complex64::new(0.0, 0.0) {
                let lam: f64 = (0..self.d).map(|l| tables[l][idx[l]]).product();
                *value *= lam;
            }
            advance(&mut idx, &sizes);
        }
        Ok(v)
    }

    /// Fourier coefficients of (self f) on the box, with a tail certificate.
    pub fn apply_fourier(&self, elem: &KorobovElement, bx: &[u64]) -> Result<Approximation> {
        self.check_elem(elem)?;
        if bx.len() != self.d {
            return arg("box has wrong dimension");
        }
        let dense = self.dense_fourier(elem, bx)?;
        let sizes: Vec<usize> = bx.iter().map(|&b| 2 * b as usize + 1).collect();
        let mut coeffs = FourierCoefficients::new(self.d)?;
        let mut idx = vec![0usize; self.d];
        let mut j = vec![0i64; self.d];
        for value in &dense {
            if *value != Complex64::new(0.0, 0.0) {
                for l in 0..self.d {
                    j[l] = idx[l] as i64 - bx[l] as i64;
                }
                coeffs.set(&j, *value)?;
            }
            advance(&mut idx, &sizes);
        }
        let tail = self.mass_outside_box(elem, bx)?;
        Ok(Approximation {
            coeffs,
            certificate: Some(TailCertificate {
                box_radius: bx.to_vec(),
                tail_norm: tail.norm_upper(),
                crude_bound: self.crude_tail_bound(elem, bx),
            }),
        })
    }

    fn crude_tail_bound(&self, elem: &KorobovElement, bx: &[u64]) -> f64 {
        let s = 2.0 * elem.params().r;
        let full = 1.0 + 2.0 * riemann_zeta(s);
        let tail = |b: u64| 2.0 * (b.max(1) as f64).powf(1.0 - s) / (s - 1.0);
        let outside: f64 = (0..self.d)
            .map(|l| tail(bx[l]) * full.powi(self.d as i32 - 1))
            .sum();
        let weights: f64 = self.terms.values().map(|w| w.unsigned_abs() as f64).sum();
        weights * elem.g().max_abs() * outside.sqrt()
    }

    /// Exact value (self f)(x) from residue-class Lerch sums; needs r > 1.
    pub fn eval_point(&self, elem: &KorobovElement, x: &[f64]) -> Result<Complex64> {
        self.check_elem(elem)?;
        elem.params().require_pointwise()?;
        if x.len() != self.d || x.iter().any(|v| !v.is_finite()) {
            return arg("point must be finite with matching dimension");
        }
        let r = elem.params().r;
        let mut cache: HashMap<(usize, Atom, i64), Complex64> = HashMap::new();
        let mut total = Complex64::new(0.0, 0.0);
        for (atoms, &w) in &self.terms {
            for (c, gc) in elem.g().iter() {
                let mut prod = *gc * w as f64;
                for l in 0..self.d {
                    let a = *cache
                        .entry((l, atoms[l], c[l]))
                        .or_insert_with(|| atoms[l].series(c[l], x[l], r));
                    prod *= a;
                    if prod == Complex64::new(0.0, 0.0) {
                        break;
                    }
                }
                total += prod;
            }
        }
        Ok(total)
    }

    /// Σ_{j ∈ ∏ regions} |(self f)^(j)|², summed exactly over residue
    /// classes. Requires r > 1/2.
    pub fn mass(&self, elem: &KorobovElement, regions: &[Region]) -> Result<MassSum> {
        self.check_elem(elem)?;
        if regions.len() != self.d {
            return arg("region has wrong dimension");
        }
        let s = 2.0 * elem.params().r;
        let support: Vec<(&[i64], Complex64)> =
            elem.g().iter().map(|(j, v)| (&j[..], *v)).collect();
        let terms: Vec<(&Vec<Atom>, i64)> = self.terms.iter().map(|(a, w)| (a, *w)).collect();
        let mut cache: HashMap<(Atom, i64, Atom, i64, Region), f64> = HashMap::new();
        let mut out = MassSum::default();
        for (ta, wa) in &terms {
            for (tb, wb) in &terms {
                let w = (*wa * *wb) as f64;
                for (ca, ga) in &support {
                    for (cb, gb) in &support {
                        let mut prod = 1.0;
                        for l in 0..self.d {
                            let key = (ta[l], ca[l], tb[l], cb[l], regions[l]);
                            let u = *cache.entry(key).or_insert_with(|| {
                                match (ta[l].preimage(ca[l]), tb[l].preimage(cb[l])) {
                                    (Some(pa), Some(pb)) => intersect(pa, pb)
                                        .map_or(0.0, |cls| class_mass(cls, regions[l], s)),
                                    _ => 0.0,
                                }
                            });
                            prod *= u;
                            if prod == 0.0 {
                                break;
                            }
                        }
                        if prod != 0.0 {
                            let cross = ga * gb.conj();
                            out.value += w * cross.re * prod;
                            out.abs_sum += w.abs() * cross.norm() * prod;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Exact mass of (self f) outside the box |j_l| ≤ bx_l, split into d
    /// disjoint product regions.
    pub fn mass_outside_box(&self, elem: &KorobovElement, bx: &[u64]) -> Result<MassSum> {
        let mut total = MassSum::default();
        for l in 0..self.d {
            let regions: Vec<Region> = (0..self.d)
                .map(|i| match i.cmp(&l) {
                    std::cmp::Ordering::Less => Region::Inside(bx[i]),
                    std::cmp::Ordering::Equal => Region::Outside(bx[i]),
                    std::cmp::Ordering::Greater => Region::All,
                })
                .collect();
            total.add(self.mass(elem, &regions)?);
        }
        Ok(total)
    }

    /// Per-coordinate Gram blocks M(a,b)_{c,c'} = Σ_{j: a(j)=c, b(j)=c'}
    /// max(|j|,1)^{-2r} over all of Z, for |c|, |c'| ≤ radius.
    pub(crate) fn gram_block(a: Atom, b: Atom, radius: u64, r: f64) -> Vec<f64> {
        let n = 2 * radius as usize + 1;
        let mut out = vec![0.0; n * n];
        let s = 2.0 * r;
        for (i, c) in (-(radius as i64)..=radius as i64).enumerate() {
            let Some(pa) = a.preimage(c) else { continue };
            for (k, c2) in (-(radius as i64)..=radius as i64).enumerate() {
                if let Some(pb) = b.preimage(c2) {
                    if let Some(cls) = intersect(pa, pb) {
                        out[i * n + k] = class_mass(cls, Region::All, s);
                    }
                }
            }
        }
        out
    }

    /// The translate form Σ_t w_t ⊗ Q_{m_t} f. Only defined when every atom
    /// is a Q.
    pub fn synthesize(&self, elem: &KorobovElement) -> Result<TranslateCombination> {
        self.check_elem(elem)?;
        let g = elem.g();
        let mut out = TranslateCombination::new(*elem.params());
        for (atoms, &w) in &self.terms {
            let ms: Vec<u64> = atoms
                .iter()
                .map(|a| match a {
                    Atom::Q(m) => Ok(*m),
                    Atom::Identity => arg("identity atoms have no translate form"),
                })
                .collect::<Result<_>>()?;
            let projected = g.project(&ms)?;
            if projected.is_empty() {
                continue;
            }
            let q: Vec<usize> = ms.iter().map(|&m| 2 * m as usize + 1).collect();
            let grid = projected.sample_grid(&q)?;
            let scale = w as f64 / q.iter().map(|&v| v as f64).product::<f64>();
            let mut idx = vec![0usize; self.d];
            for value in grid.values() {
                if *value != Complex64::new(0.0, 0.0) {
                    let pairs: Vec<(i64, u64)> =
                        idx.iter().zip(&q).map(|(&s, &ql)| (s as i64, ql as u64)).collect();
                    out.add_term(RationalNode::from_pairs(&pairs)?, value * scale)?;
                }
                advance(&mut idx, &q);
            }
        }
        if g.is_real_valued() {
            out.enforce_real(REAL_ENFORCE_TOL * g.abs_sum().max(1.0))?;
        } else {
            out.prune();
        }
        Ok(out)
    }
}

/// Members of a class within |j| ≤ radius, ascending.
fn class_members(cls: Class, radius: u64) -> Vec<i64> {
    let b = radius as i128;
    match cls {
        Class::Point(p) => {
            if p.abs() <= b {
                vec![p as i64]
            } else {
                Vec::new()
            }
        }
        Class::Progression { residue, modulus } => {
            let mut j = -b + (residue + b).rem_euclid(modulus);
            let mut out = Vec::new();
            while j <= b {
                out.push(j as i64);
                j += modulus;
            }
            out
        }
    }
}

fn univariate(elem: &KorobovElement) -> Result<()> {
    if elem.dim() != 1 {
        return arg("univariate operator applied to a multivariate element");
    }
    Ok(())
}

/// Q_m f as 2m+1 translates of κ_r.
pub fn qm_translates(elem: &KorobovElement, m: u64) -> Result<TranslateCombination> {
    univariate(elem)?;
    TensorOperator::tensor(&[UnivariateOp::Q(m)])?.synthesize(elem)
}

/// (Q_m f)^ on |j| ≤ J.
pub fn qm_fourier(elem: &KorobovElement, m: u64, big_j: u64) -> Result<Approximation> {
    univariate(elem)?;
    if big_j < m {
        return arg(format!("box radius {big_j} is below m = {m}"));
    }
    TensorOperator::tensor(&[UnivariateOp::Q(m)])?.apply_fourier(elem, &[big_j])
}

/// (T_k f)^ on |j| ≤ J.
pub fn apply_t(elem: &KorobovElement, k: i64, big_j: u64) -> Result<Approximation> {
    univariate(elem)?;
    let op = TensorOperator::tensor(&[UnivariateOp::T(k)])?;
    if big_j < op.band()[0] {
        return arg("box radius is below the operator band");
    }
    op.apply_fourier(elem, &[big_j])
}

/// (R_k f)^ on |j| ≤ J.
pub fn apply_r(elem: &KorobovElement, k: i64, big_j: u64) -> Result<Approximation> {
    univariate(elem)?;
    let op = TensorOperator::tensor(&[UnivariateOp::R(k)])?;
    if big_j < op.band()[0] {
        return arg("box radius is below the operator band");
    }
    op.apply_fourier(elem, &[big_j])
}

/// Applies ⊗_l ops_l to f on the box |j_l| ≤ J_l.
pub fn apply_tensor(
    elem: &KorobovElement,
    ops: &[UnivariateOp],
    big_j: &[u64],
) -> Result<Approximation> {
    if ops.len() != elem.dim() || big_j.len() != elem.dim() {
        return arg("operator descriptors do not match the element dimension");
    }
    TensorOperator::tensor(ops)?.apply_fourier(elem, big_j)
}

/// One period of the aliased sequence b_j = ĝ(alias_rep(j, m)), stored on
/// ∏[-m_l, m_l].
#[derive(Clone, Debug, PartialEq)]
pub struct AliasedExpansion {
    m: Vec<u64>,
    base: Vec<Complex64>,
}

impl AliasedExpansion {
    pub fn from_element(elem: &KorobovElement, m: &[u64]) -> Result<Self> {
        if m.len() != elem.dim() || m.contains(&0) {
            return arg("aliasing levels must be positive, one per coordinate");
        }
        let sizes: Vec<usize> = m.iter().map(|&v| 2 * v as usize + 1).collect();
        let total = caps::check(sizes.iter().map(|&s| s as u128).product(), "aliased period")?;
        let st = strides(&sizes);
        let mut base = vec![Complex64::new(0.0, 0.0); total];
        for (c, v) in elem.g().iter() {
            if c.iter().zip(m).all(|(cl, &ml)| cl.unsigned_abs() <= ml) {
                let pos: usize = (0..m.len()).map(|l| (c[l] + m[l] as i64) as usize * st[l]).sum();
                base[pos] = *v;
            }
        }
        Ok(AliasedExpansion { m: m.to_vec(), base })
    }

    /// Recovers one period from Fourier coefficients of Q_m f via
    /// b_j = (Q_m f)^(j) λ_j.
    pub fn from_fourier(coeffs: &FourierCoefficients, m: &[u64], r: f64) -> Result<Self> {
        if m.len() != coeffs.dim() || m.contains(&0) {
            return arg("aliasing levels must be positive, one per coordinate");
        }
        let sizes: Vec<usize> = m.iter().map(|&v| 2 * v as usize + 1).collect();
        let total = caps::check(sizes.iter().map(|&s| s as u128).product(), "aliased period")?;
        let mut base = Vec::with_capacity(total);
        let mut idx = vec![0usize; m.len()];
        for _ in 0..total {
            let j: Vec<i64> = idx.iter().zip(m).map(|(&i, &ml)| i as i64 - ml as i64).collect();
            base.push(coeffs.get(&j) * lambda_weight(&j, r));
            advance(&mut idx, &sizes);
        }
        Ok(AliasedExpansion { m: m.to_vec(), base })
    }

    pub fn levels(&self) -> &[u64] {
        &self.m
    }

    /// b_j for any j ∈ Z^d.
    pub fn b(&self, j: &[i64]) -> Complex64 {
        let sizes: Vec<usize> = self.m.iter().map(|&v| 2 * v as usize + 1).collect();
        let st = strides(&sizes);
        let pos: usize = (0..self.m.len())
            .map(|l| (alias_rep(j[l], self.m[l]) + self.m[l] as i64) as usize * st[l])
            .sum();
        self.base[pos]
    }
}

/// Source index of output frequency j under a tensor atom.
pub fn atom_source(atoms: &[Atom], j: &[i64]) -> Vec<i64> {
    atoms.iter().zip(j).map(|(a, &jl)| a.source(jl)).collect()
}
