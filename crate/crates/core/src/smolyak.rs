//! Smolyak grids G^d(m) and the combination operator
//! P_m = Σ_{|k| ≤ m} R_{k_1} ⊗ … ⊗ R_{k_d}.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::caps;
use crate::error::{arg, Error, Result};
use crate::index::advance;
use crate::korobov::KorobovElement;
use crate::translate::{Approximation, RationalNode, TensorOperator, TranslateCombination, UnivariateOp};

/// Largest dimension for which P_m is expanded into tensor atoms.
pub const MAX_OPERATOR_DIM: usize = 4;

/// All k ∈ Z^d_+ with |k| ≤ m, in lexicographic order.
pub fn smolyak_indices(d: usize, m: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, budget: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=budget {
            prefix.push(k);
            rec(d, budget - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, m, &mut Vec::with_capacity(d), &mut out);
    out
}

fn level_size(k: u32) -> u128 {
    (1u128 << (k + 1)) + 1
}

/// Σ_{|k| ≤ m} ∏_j (2^{k_j+1} + 1), saturating at u128::MAX.
pub fn multiset_cardinality(d: usize, m: u32) -> u128 {
    fn rec(d: usize, budget: u32) -> u128 {
        if d == 0 {
            return 1;
        }
        (0..=budget)
            .map(|k| level_size(k).saturating_mul(rec(d - 1, budget - k)))
            .fold(0u128, u128::saturating_add)
    }
    if m > 120 {
        return u128::MAX;
    }
    rec(d, m)
}

/// The node set of G^d(m) with exact rational deduplication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmolyakGrid {
    pub d: usize,
    pub m: u32,
    #[serde(rename = "multiset")]
    pub multiset_count: u64,
    #[serde(rename = "distinct")]
    pub distinct_count: u64,
    pub nodes: Vec<RationalNode>,
}

impl SmolyakGrid {
    /// Exact membership test.
    pub fn contains(&self, node: &RationalNode) -> bool {
        self.nodes.binary_search(node).is_ok()
    }
}

/// Builds G^d(m) = ∪_{|k| ≤ m} {(2πs_j/(2^{k_j+1}+1))_j}.
pub fn build_grid(d: usize, m: u32) -> Result<SmolyakGrid> {
    if d == 0 {
        return arg("dimension must be at least 1");
    }
    let multiset = multiset_cardinality(d, m);
    caps::check(multiset, "Smolyak grid")?;
    let mut nodes = BTreeSet::new();
    for k in smolyak_indices(d, m) {
        let q: Vec<u64> = k.iter().map(|&kj| level_size(kj) as u64).collect();
        let sizes: Vec<usize> = q.iter().map(|&v| v as usize).collect();
        let mut s = vec![0usize; d];
        loop {
            let pairs: Vec<(i64, u64)> = s.iter().zip(&q).map(|(&a, &b)| (a as i64, b)).collect();
            nodes.insert(RationalNode::from_pairs(&pairs)?);
            if !advance(&mut s, &sizes) {
                break;
            }
        }
    }
    let nodes: Vec<RationalNode> = nodes.into_iter().collect();
    Ok(SmolyakGrid {
        d,
        m,
        multiset_count: multiset as u64,
        distinct_count: nodes.len() as u64,
        nodes,
    })
}

/// P_m expanded into signed tensor products of Q atoms.
pub fn p_operator(d: usize, m: u32) -> Result<TensorOperator> {
    if d == 0 {
        return arg("dimension must be at least 1");
    }
    if d > MAX_OPERATOR_DIM {
        return Err(Error::Unsupported(format!(
            "P_m is expanded only for d <= {MAX_OPERATOR_DIM}, got d = {d}"
        )));
    }
    let mut op = TensorOperator::zero(d);
    for k in smolyak_indices(d, m) {
        let ops: Vec<UnivariateOp> = k.iter().map(|&kj| UnivariateOp::R(kj as i64)).collect();
        op.add_scaled(&TensorOperator::tensor(&ops)?, 1)?;
    }
    Ok(op)
}

/// P_m f as a combination of translates on G^d(m).
pub fn apply_p_translates(elem: &KorobovElement, m: u32) -> Result<TranslateCombination> {
    p_operator(elem.dim(), m)?.synthesize(elem)
}

/// (P_m f)^ on |j_l| ≤ J_l, with tail certificate.
pub fn apply_p_fourier(elem: &KorobovElement, m: u32, big_j: &[u64]) -> Result<Approximation> {
    if big_j.len() != elem.dim() {
        return arg("box has wrong dimension");
    }
    if big_j.iter().any(|&b| b < (1u64 << m)) {
        return arg(format!("box radius must be at least 2^m = {}", 1u64 << m));
    }
    p_operator(elem.dim(), m)?.apply_fourier(elem, big_j)
}
