//! Combinadic (colexicographic) ranking of k-subsets of {0, .., l-1}.
//!
//! Ranks index the canonical state spaces densely into `C(l, k)` slots, which
//! lets exact tables and generators address configurations by a plain `usize`.

/// Binomial coefficient as u64, or `None` on overflow.
pub fn binomial_checked(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // The running product is divisible by i+1 after multiplying the
        // next numerator factor.
        acc = acc.checked_mul((n - i) as u64)? / (i + 1) as u64;
    }
    Some(acc)
}

/// Binomial coefficient as u64; panics on overflow (state spaces handled here
/// are capped well below that).
pub fn binomial(n: usize, k: usize) -> u64 {
    binomial_checked(n, k).expect("binomial overflow")
}

/// Colexicographic rank of a strictly increasing subset.
pub fn rank(subset: &[usize]) -> u64 {
    subset
        .iter()
        .enumerate()
        .map(|(i, &c)| binomial(c, i + 1))
        .sum()
}

/// Inverse of [`rank`]: the `r`-th k-subset in colex order.
pub fn unrank(k: usize, mut r: u64) -> Vec<usize> {
    let mut out = vec![0usize; k];
    for i in (1..=k).rev() {
        // Largest c with C(c, i) <= r.
        let mut c = i - 1;
        let mut next = binomial(c + 1, i);
        while next <= r {
            c += 1;
            next = binomial(c + 1, i);
        }
        r -= binomial(c, i);
        out[i - 1] = c;
    }
    out
}

/// All k-subsets of {0, .., l-1} in colex order (rank order).
pub fn enumerate(l: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let count = binomial(l, k);
    (0..count).map(move |r| unrank(k, r))
}
