//! Small helpers for walking tensor index sets.

/// Advances a row-major multi-index (last coordinate fastest). Returns
/// false after the last index.
pub(crate) fn advance(idx: &mut [usize], sizes: &[usize]) -> bool {
    for l in (0..idx.len()).rev() {
        idx[l] += 1;
        if idx[l] < sizes[l] {
            return true;
        }
        idx[l] = 0;
    }
    false
}

/// Row-major strides for `sizes`.
pub(crate) fn strides(sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![1usize; sizes.len()];
    for l in (0..sizes.len().saturating_sub(1)).rev() {
        out[l] = out[l + 1] * sizes[l + 1];
    }
    out
}

pub(crate) fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walks_every_index_once() {
        let sizes = [2, 3];
        let mut idx = vec![0, 0];
        let mut seen = vec![idx.clone()];
        while advance(&mut idx, &sizes) {
            seen.push(idx.clone());
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[1], vec![0, 1]);
        assert_eq!(strides(&sizes), vec![3, 1]);
        assert_eq!(gcd(12, 18), 6);
    }
}
