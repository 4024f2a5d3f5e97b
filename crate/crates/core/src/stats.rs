//! Small statistics toolbox for the Monte Carlo verification reports:
//! total-variation distances, chi-square goodness of fit, Poisson weights.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Total-variation distance between two (sub-)probability vectors; shorter
/// slices are padded with zeros. Any mass missing from either vector (e.g. a
/// truncated tail) contributes half its absolute difference, same as an
/// explicit zero bin.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    let mut acc = 0.0;
    for i in 0..len {
        let a = p.get(i).copied().unwrap_or(0.0);
        let b = q.get(i).copied().unwrap_or(0.0);
        acc += (a - b).abs();
    }
    // Residual mass outside the common support.
    let extra = (1.0 - p.iter().sum::<f64>()).max(0.0) + (1.0 - q.iter().sum::<f64>()).max(0.0);
    0.5 * (acc + extra)
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against expected probabilities.
///
/// Cells with expected count below 5 are merged from the right into their
/// left neighbor; leftover probability mass (beyond `expected.len()`) is
/// treated as one extra tail cell.
pub fn chi_square_gof(observed: &[f64], expected_probs: &[f64], total: f64) -> ChiSquareTest {
    let tail_prob = (1.0 - expected_probs.iter().sum::<f64>()).max(0.0);
    let tail_obs = (total - observed.iter().sum::<f64>()).max(0.0);

    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    for i in 0..expected_probs.len().max(observed.len()) {
        let o = observed.get(i).copied().unwrap_or(0.0);
        let e = expected_probs.get(i).copied().unwrap_or(0.0) * total;
        cells.push((o, e));
    }
    cells.push((tail_obs, tail_prob * total));

    // Merge small-expectation cells rightward into a running bucket.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut bucket = (0.0, 0.0);
    for (o, e) in cells {
        bucket.0 += o;
        bucket.1 += e;
        if bucket.1 >= 5.0 {
            merged.push(bucket);
            bucket = (0.0, 0.0);
        }
    }
    if bucket.1 > 0.0 || bucket.0 > 0.0 {
        if let Some(last) = merged.last_mut() {
            last.0 += bucket.0;
            last.1 += bucket.1;
        } else {
            merged.push(bucket);
        }
    }

    let statistic: f64 = merged
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = merged.len().saturating_sub(1).max(1);
    let p_value = match ChiSquared::new(dof as f64) {
        Ok(dist) => 1.0 - dist.cdf(statistic),
        Err(_) => f64::NAN,
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}

/// Poisson probabilities `e^{-mean} mean^k / k!` for `k = 0..=k_max`,
/// computed by the stable multiplicative recursion.
pub fn poisson_pmf(mean: f64, k_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max + 1);
    let mut p = (-mean).exp();
    out.push(p);
    for k in 1..=k_max {
        p *= mean / k as f64;
        out.push(p);
    }
    out
}

/// Mean and standard error of a sample.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
