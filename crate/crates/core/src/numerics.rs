//! Shared numerical kernels: log-domain accumulation, power-series summation
//! with running tail bounds, and monotone bisection.

use crate::error::{Error, Result};

/// ln(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln Σ e^{x_i} over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - hi).exp()).sum();
    hi + sum.ln()
}

/// Decay information used to bound the tail of a power series.
///
/// `PowerLaw { b }` marks coefficients that decay like k^{-b}; at the edge of
/// the convergence disc the geometric ratio test is blind to this, so the
/// p-series integral bound `t_k * k / (b - 1)` is used instead.
#[derive(Debug, Clone, Copy)]
pub enum TailHint {
    Geometric,
    PowerLaw { b: f64 },
}

/// Partial sums of Σ z^k c_k and Σ k z^k c_k with log-domain coefficients.
#[derive(Debug, Clone, Copy)]
pub struct SeriesSums {
    pub sum: f64,
    pub first_moment: f64,
    pub terms: usize,
}

const RATIO_WINDOW: usize = 48;

/// Sums `Σ_{k≥0} z^k exp(log_coeff(k))` (and its first moment in `k`) until the
/// running tail bound drops below `tol` relative to the partial sum.
///
/// Divergence is reported with the fugacity at which the ratio test first
/// fails. `want_moment` additionally requires the moment series to meet the
/// tolerance; for a power-law hint with `b <= 2` the moment diverges even when
/// the plain sum does not, which is reported as divergence.
pub fn sum_power_series(
    log_coeff: &dyn Fn(usize) -> f64,
    z: f64,
    tol: f64,
    max_terms: usize,
    hint: TailHint,
    want_moment: bool,
) -> Result<SeriesSums> {
    if z < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "series argument must be nonnegative, got {z}"
        )));
    }
    let log_z = z.ln();
    let mut sum = 0.0f64;
    let mut moment = 0.0f64;
    let mut prev_term = f64::NAN;
    let mut ratio_high_count = 0usize;
    let mut last_bound = f64::INFINITY;

    for k in 0..max_terms {
        let log_term = if k == 0 {
            log_coeff(0)
        } else {
            log_coeff(k) + k as f64 * log_z
        };
        let term = log_term.exp();
        sum += term;
        moment += k as f64 * term;

        if term > 0.0 && prev_term.is_finite() && prev_term > 0.0 {
            let q = term / prev_term;
            if q >= 1.0 {
                ratio_high_count += 1;
            } else {
                ratio_high_count = 0;
            }
            if ratio_high_count >= RATIO_WINDOW {
                // Sustained non-decreasing terms: the argument sits at or
                // beyond the radius of convergence ~ z / q.
                return Err(Error::DivergentSeries(format!(
                    "terms stopped decreasing at k={k} (ratio {q:.6}); \
                     estimated radius of convergence {:.6}",
                    z / q
                )));
            }
            if k >= 8 {
                // Geometric tail bound from the current ratio.
                let mut bound = if q < 1.0 {
                    term * q / (1.0 - q)
                } else {
                    f64::INFINITY
                };
                let mut moment_bound = bound * (k as f64 + 1.0 / (1.0 - q).max(1e-300));
                if let TailHint::PowerLaw { b } = hint {
                    if b > 1.0 {
                        bound = bound.min(term * k as f64 / (b - 1.0));
                    }
                    if b > 2.0 {
                        moment_bound =
                            moment_bound.min(term * k as f64 * k as f64 / (b - 2.0));
                    } else if want_moment && q >= 1.0 - 2.0 / k as f64 {
                        return Err(Error::DivergentSeries(format!(
                            "first moment diverges for power-law decay with b={b} <= 2"
                        )));
                    }
                }
                last_bound = bound;
                let done = bound <= tol * sum.max(f64::MIN_POSITIVE);
                let moment_done = !want_moment
                    || moment_bound <= tol * moment.max(f64::MIN_POSITIVE)
                    || moment == 0.0 && bound <= tol;
                if done && moment_done {
                    return Ok(SeriesSums {
                        sum,
                        first_moment: moment,
                        terms: k + 1,
                    });
                }
            }
        }
        prev_term = term;

        if term == 0.0 && k > 8 && sum > 0.0 {
            // Underflow: everything past this point is numerically zero.
            return Ok(SeriesSums {
                sum,
                first_moment: moment,
                terms: k + 1,
            });
        }
    }
    Err(Error::SeriesNotConverged {
        terms: max_terms,
        tol,
        bound: last_bound,
    })
}

/// Finds `u` with `f(u) = target` for a continuous strictly increasing `f` on
/// `[lo, hi]`, to absolute tolerance `tol_u` in the argument.
pub fn bisect_increasing(
    f: &dyn Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    target: f64,
    tol_u: f64,
) -> Result<f64> {
    let f_lo = f(lo)?;
    if target <= f_lo {
        return Ok(lo);
    }
    let f_hi = f(hi)?;
    if target > f_hi {
        return Err(Error::RangeError(format!(
            "target {target:.6e} exceeds the function range [{f_lo:.6e}, {f_hi:.6e}] \
             on [{lo:.6e}, {hi:.6e}]"
        )));
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol_u {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct() {
        let v = log_add_exp(0.0, (2.0f64).ln());
        assert!((v - (3.0f64).ln()).abs() < 1e-14);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 1.5), 1.5);
    }

    #[test]
    fn geometric_series_sums_to_closed_form() {
        let s = sum_power_series(&|_| 0.0, 0.5, 1e-14, 10_000, TailHint::Geometric, true)
            .unwrap();
        assert!((s.sum - 2.0).abs() < 1e-12);
        // Σ k z^k = z/(1-z)^2 = 2
        assert!((s.first_moment - 2.0).abs() < 1e-11);
    }

    #[test]
    fn divergent_geometric_series_is_reported() {
        let err = sum_power_series(&|_| 0.0, 1.2, 1e-12, 10_000, TailHint::Geometric, false)
            .unwrap_err();
        assert!(matches!(err, Error::DivergentSeries(_)));
    }

    #[test]
    fn bisection_inverts_monotone_function() {
        let f = |u: f64| Ok(u * u);
        let u = bisect_increasing(&f, 0.0, 2.0, 2.0, 1e-13).unwrap();
        assert!((u - std::f64::consts::SQRT_2).abs() < 1e-12);
    }
}
