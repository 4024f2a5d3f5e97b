//! Stationary currents: exact finite-size values through the partition
//! function ratio, and the thermodynamic current-density relation with its
//! linear plateau below the critical density.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::zrp_log_partition_row;
use crate::numerics::{bisect_increasing, sum_power_series, TailHint};
use crate::potential::PotentialSpec;

/// Which branch of the current-density relation a sample sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Densities at or above the critical density: the fugacity-like
    /// parameter solves `r(u) = 1/rho - 1`.
    SupercriticalDensity,
    /// Below the critical density the current is exactly linear in `rho`.
    LinearPlateau,
}

/// One point of the current-density relation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveSample {
    pub rho: f64,
    pub current: f64,
    /// Fugacity-like parameter `u` realizing this density.
    pub u: f64,
    pub branch: Branch,
}

/// Sampled current-density relation with its critical metadata.
#[derive(Debug, Clone, Serialize)]
pub struct CurrentCurve {
    pub u_c: f64,
    pub rho_c: f64,
    pub samples: Vec<CurveSample>,
}

/// Exact stationary current of the totally asymmetric process with `n`
/// particles on `l` sites: `w (N/L) Z(N, L-N-1) / Z(N, L-N)` in terms of the
/// zero-range partition functions. The degenerate cases (empty, fully
/// packed, single site) carry zero current.
pub fn stationary_current_finite(l: usize, n: usize, spec: &PotentialSpec) -> Result<f64> {
    if n > l {
        return Err(Error::InvalidArgument(format!(
            "more particles than sites: L={l}, N={n}"
        )));
    }
    if l < 2 || n == 0 || n == l {
        return Ok(0.0);
    }
    let row = zrp_log_partition_row(n, l - n, spec)?;
    let log_ratio = row[l - n - 1] - row[l - n];
    Ok(spec.w() * n as f64 / l as f64 * log_ratio.exp())
}

/// Stationary current of the asymmetric process: `(r - l) j+`.
pub fn ahep_current(l: usize, n: usize, spec: &PotentialSpec) -> Result<f64> {
    let asym = spec.asymmetry();
    Ok((asym.right - asym.left) * stationary_current_finite(l, n, spec)?)
}

fn tail_hint(spec: &PotentialSpec) -> TailHint {
    match spec.power_law_exponent() {
        // Gap weights y_{k+1} = y_1 tau_k decay one power slower than the
        // rate products themselves only in the moment series; the base decay
        // exponent is b.
        Some(b) => TailHint::PowerLaw { b },
        None => TailHint::Geometric,
    }
}

/// Gap-weight generating function `F(u) = sum_{k>=0} u^k y_{k+1}` summed to
/// relative tail tolerance `tol`.
pub fn series_f(u: f64, spec: &PotentialSpec, tol: f64) -> Result<f64> {
    spec.require_finite(2)?;
    let sums = sum_power_series(
        &|k| spec.log_y(k + 1),
        u,
        tol,
        spec.depth() - 1,
        tail_hint(spec),
        false,
    )?;
    Ok(sums.sum)
}

/// Logarithmic derivative parameter `r(u) = u d/du ln F(u)`, evaluated as the
/// moment ratio `(sum k u^k y_{k+1}) / (sum u^k y_{k+1})`. Strictly
/// increasing on `(0, u_c)`.
pub fn density_parameter(u: f64, spec: &PotentialSpec, tol: f64) -> Result<f64> {
    if u == 0.0 {
        return Ok(0.0);
    }
    spec.require_finite(2)?;
    let sums = sum_power_series(
        &|k| spec.log_y(k + 1),
        u,
        tol,
        spec.depth() - 1,
        tail_hint(spec),
        true,
    )?;
    Ok(sums.first_moment / sums.sum)
}

/// [`density_parameter`] with an edge fallback: evaluations so close to
/// `u_c` that the moment tail cannot meet `tol` within the table depth are
/// redone at the relaxed edge tolerance.
fn density_parameter_robust(u: f64, spec: &PotentialSpec, tol: f64) -> Result<f64> {
    match density_parameter(u, spec, tol) {
        Err(Error::SeriesNotConverged { .. }) => {
            density_parameter(u, spec, tol.max(crate::measures::CRITICAL_EDGE_TOL))
        }
        other => other,
    }
}

/// Inverse of [`density_parameter`]: the `u` with `r(u) = target`, found by
/// monotone bisection inside `(0, u_c)`.
pub fn invert_density_parameter(target: f64, spec: &PotentialSpec, tol: f64) -> Result<f64> {
    if target < 0.0 {
        return Err(Error::RangeError(format!(
            "density parameter is nonnegative, target {target} unreachable"
        )));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let u_c = spec.radius_of_convergence();
    // Expanding bracket toward u_c, so the series is never evaluated closer
    // to the singular point than the target requires.
    let mut lo = 0.0f64;
    let mut hi = 0.5 * u_c;
    loop {
        match density_parameter_robust(hi, spec, tol) {
            Ok(r_hi) if r_hi >= target => break,
            Ok(_) => {
                lo = hi;
                let next = 0.5 * (hi + u_c);
                if next - hi < 1e-15 * u_c {
                    // Converging on u_c itself: the target equals the
                    // critical density parameter within tolerance.
                    return Ok(hi);
                }
                hi = next;
            }
            Err(e) => {
                return Err(Error::RangeError(format!(
                    "target {target} not reachable below u_c = {u_c}: {e}"
                )))
            }
        }
    }
    bisect_increasing(
        &|u| density_parameter_robust(u, spec, tol),
        lo,
        hi,
        target,
        1e-12 * u_c.max(1.0),
    )
}

/// Critical density `rho_c = 1 / (1 + r(u_c))`; zero when the density
/// parameter diverges at the edge of convergence. The series at the edge is
/// summed to the relaxed edge tolerance (its moment tail is a slow power
/// law), which is orders of magnitude below any threshold `rho_c` is
/// compared against.
pub fn critical_density(spec: &PotentialSpec, tol: f64) -> Result<f64> {
    let u_c = spec.radius_of_convergence();
    match density_parameter(u_c, spec, tol.max(crate::measures::CRITICAL_EDGE_TOL)) {
        Ok(r_c) => Ok(1.0 / (1.0 + r_c)),
        Err(Error::DivergentSeries(_)) | Err(Error::SeriesNotConverged { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// The full current-density relation on a density grid: for
/// `rho >= rho_c` the current is `w rho u` with `r(u) = 1/rho - 1`; below
/// `rho_c` it is the linear plateau `w rho u_c`.
pub fn current_density_relation(
    spec: &PotentialSpec,
    grid: &[f64],
    tol: f64,
) -> Result<CurrentCurve> {
    let summability = spec.summability_report(spec.depth() / 2)?;
    if summability.increasing_tail {
        return Err(Error::DivergentSeries(
            "rate ratios y_n/y_{n+1} are unbounded over the stored range; \
             the thermodynamic current relation needs a bounded sequence"
                .into(),
        ));
    }
    let u_c = spec.radius_of_convergence();
    let rho_c = critical_density(spec, tol)?;
    let mut samples = Vec::with_capacity(grid.len());
    for &rho in grid {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!(
                "density {rho} outside [0, 1]"
            )));
        }
        let sample = if rho == 0.0 {
            CurveSample {
                rho,
                current: 0.0,
                u: if rho_c > 0.0 { u_c } else { 0.0 },
                branch: if rho_c > 0.0 {
                    Branch::LinearPlateau
                } else {
                    Branch::SupercriticalDensity
                },
            }
        } else if rho < rho_c {
            // Plateau: phi(1/rho_c - 1) = u_c exactly, since r(u_c) is the
            // critical density parameter.
            CurveSample {
                rho,
                current: spec.w() * rho * u_c,
                u: u_c,
                branch: Branch::LinearPlateau,
            }
        } else {
            let target = 1.0 / rho - 1.0;
            let u = invert_density_parameter(target, spec, tol)?;
            CurveSample {
                rho,
                current: spec.w() * rho * u,
                u,
                branch: Branch::SupercriticalDensity,
            }
        };
        samples.push(sample);
    }
    Ok(CurrentCurve {
        u_c,
        rho_c,
        samples,
    })
}

/// Uniform density grid `start, start+step, .., end` (inclusive within
/// floating-point slack).
pub fn density_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || end < start {
        return Err(Error::InvalidArgument(format!(
            "bad grid {start}:{end}:{step}"
        )));
    }
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let rho = start + k as f64 * step;
        if rho > end + 1e-12 {
            break;
        }
        grid.push(rho);
        k += 1;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinadics;
    use crate::generator::{build_hep_generator, stationary_distribution, TorusStates};
    use crate::lattice::TorusConfiguration;
    use crate::potential::TailRule;
    use approx::assert_relative_eq;

    fn log_distance_potential() -> PotentialSpec {
        let j: Vec<f64> = (1..=512).map(|r| (r as f64).ln()).collect();
        PotentialSpec::from_table(j, TailRule::Constant).unwrap()
    }

    #[test]
    fn binomial_current_for_constant_rates() {
        let spec = PotentialSpec::constant();
        for (l, n) in [(4usize, 2usize), (10, 3), (50, 25), (120, 40)] {
            let expect = n as f64 * (l - n) as f64 / (l as f64 * (l as f64 - 1.0));
            assert_relative_eq!(
                stationary_current_finite(l, n, &spec).unwrap(),
                expect,
                max_relative = 1e-11
            );
        }
        assert_eq!(stationary_current_finite(7, 7, &spec).unwrap(), 0.0);
        assert_eq!(stationary_current_finite(7, 0, &spec).unwrap(), 0.0);
        assert_eq!(stationary_current_finite(1, 1, &spec).unwrap(), 0.0);
        assert!(stationary_current_finite(3, 4, &spec).is_err());
    }

    #[test]
    fn current_matches_headway_expectation_under_exact_measure() {
        // Independent route: j = sum_n w_n <h_{0,n}> under the exact
        // stationary distribution of the generator.
        let spec = log_distance_potential();
        let (l, n) = (6usize, 3usize);
        let q = build_hep_generator(l, n, &spec).unwrap();
        let mu = stationary_distribution(&q).unwrap();
        let states = TorusStates { l, n };
        let rates = spec.jump_rates(l).unwrap();
        let mut expectation = 0.0;
        for idx in 0..q.dim() {
            let mut occ = vec![false; l];
            for &p in &states.positions(idx) {
                occ[p] = true;
            }
            let cfg = TorusConfiguration::new(occ).unwrap();
            let flux: f64 = (1..l)
                .map(|m| rates[m] * f64::from(u8::from(cfg.headway_indicator(0, m))))
                .sum();
            expectation += mu.probability(idx) * flux;
        }
        assert_relative_eq!(
            stationary_current_finite(l, n, &spec).unwrap(),
            expectation,
            epsilon = 1e-10
        );
    }

    #[test]
    fn asymmetric_current_scales_with_bias() {
        let spec = log_distance_potential();
        let jp = stationary_current_finite(8, 3, &spec).unwrap();
        let symmetric = spec.clone().with_asymmetry(1.0, 1.0).unwrap();
        assert_eq!(ahep_current(8, 3, &symmetric).unwrap(), 0.0);
        let biased = spec.clone().with_asymmetry(2.0, 1.0).unwrap();
        assert_relative_eq!(ahep_current(8, 3, &biased).unwrap(), jp, max_relative = 1e-13);
        let reversed = spec.with_asymmetry(0.0, 1.0).unwrap();
        assert_relative_eq!(
            ahep_current(8, 3, &reversed).unwrap(),
            -jp,
            max_relative = 1e-13
        );
    }

    #[test]
    fn gap_series_for_constant_rates_is_geometric() {
        let spec = PotentialSpec::constant();
        for u in [0.1, 0.5, 0.9] {
            assert_relative_eq!(
                series_f(u, &spec, 1e-14).unwrap(),
                1.0 / (1.0 - u),
                max_relative = 1e-11
            );
        }
        assert!(series_f(1.1, &spec, 1e-12).is_err());
        // Leading term only as u -> 0.
        assert_relative_eq!(
            series_f(1e-12, &spec, 1e-14).unwrap(),
            1.0,
            max_relative = 1e-11
        );
    }

    #[test]
    fn gap_series_for_bfamily_at_the_edge() {
        // F(1) = y_1 * (critical normalization) = 4/3 for b = 4.
        let spec = PotentialSpec::bfamily(4.0).unwrap();
        assert_relative_eq!(
            series_f(1.0, &spec, 1e-13).unwrap(),
            4.0 / 3.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn density_parameter_matches_log_derivative() {
        // Independent oracle: centered finite difference of ln F.
        let spec = PotentialSpec::bfamily(4.0).unwrap();
        let h = 1e-6;
        for u in [0.2, 0.5, 0.8] {
            let fd = u * (series_f(u + h, &spec, 1e-14).unwrap().ln()
                - series_f(u - h, &spec, 1e-14).unwrap().ln())
                / (2.0 * h);
            assert_relative_eq!(
                density_parameter(u, &spec, 1e-14).unwrap(),
                fd,
                max_relative = 1e-7
            );
        }
    }

    #[test]
    fn density_parameter_equals_zrp_density() {
        let spec = log_distance_potential();
        for u in [0.3, 0.7, 0.95] {
            assert_relative_eq!(
                density_parameter(u, &spec, 1e-13).unwrap(),
                crate::measures::zrp_density(u, &spec, 1e-13).unwrap(),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn inversion_roundtrip() {
        let spec = PotentialSpec::bfamily(4.0).unwrap();
        for u in [0.05, 0.3, 0.6, 0.9] {
            let r = density_parameter(u, &spec, 1e-14).unwrap();
            let back = invert_density_parameter(r, &spec, 1e-14).unwrap();
            assert!((back - u).abs() <= 1e-10, "u={u}, back={back}");
        }
    }

    #[test]
    fn constant_potential_reduces_to_the_parabola() {
        let spec = PotentialSpec::constant();
        assert_eq!(critical_density(&spec, 1e-12).unwrap(), 0.0);
        let grid = density_grid(0.01, 0.99, 0.01).unwrap();
        let curve = current_density_relation(&spec, &grid, 1e-13).unwrap();
        assert_eq!(curve.u_c, 1.0);
        assert_eq!(curve.rho_c, 0.0);
        for s in &curve.samples {
            assert!(
                (s.current - s.rho * (1.0 - s.rho)).abs() <= 1e-8,
                "rho={}, j={}",
                s.rho,
                s.current
            );
            assert_eq!(s.branch, Branch::SupercriticalDensity);
        }
    }

    #[test]
    fn bfamily_curve_has_the_plateau() {
        let spec = PotentialSpec::bfamily(4.0).unwrap();
        let rho_c = critical_density(&spec, 1e-13).unwrap();
        assert_relative_eq!(rho_c, 2.0 / 3.0, max_relative = 1e-6);
        let grid = vec![0.1, 0.3, 0.5, 0.6, rho_c, 0.7, 0.9];
        let curve = current_density_relation(&spec, &grid, 1e-13).unwrap();
        for s in &curve.samples {
            if s.rho < rho_c {
                assert_eq!(s.branch, Branch::LinearPlateau);
                // Linear with slope w * u_c = 1.
                assert_relative_eq!(s.current, s.rho, max_relative = 1e-10);
            } else {
                assert_eq!(s.branch, Branch::SupercriticalDensity);
            }
        }
        // Continuity at the critical density: both branches give w rho_c u_c.
        let at_critical = curve
            .samples
            .iter()
            .find(|s| s.rho == rho_c)
            .expect("critical sample");
        assert_relative_eq!(at_critical.current, rho_c * 1.0, max_relative = 1e-6);
    }

    #[test]
    fn finite_size_currents_approach_the_limit_curve() {
        let spec = PotentialSpec::constant();
        let rho = 0.5;
        let limit = rho * (1.0 - rho);
        let mut last_err = f64::INFINITY;
        for l in [50usize, 100, 200, 400] {
            let n = (rho * l as f64).floor() as usize;
            let j = stationary_current_finite(l, n, &spec).unwrap();
            let err = (j - limit).abs();
            assert!(err < last_err, "L={l}: {err} !< {last_err}");
            last_err = err;
        }
    }

    #[test]
    fn monotone_density_parameter_on_a_grid() {
        let spec = PotentialSpec::bfamily(4.0).unwrap();
        let mut prev = -1.0;
        for i in 1..20 {
            let u = i as f64 / 20.0;
            let r = density_parameter(u, &spec, 1e-13).unwrap();
            assert!(r > prev);
            prev = r;
        }
    }

    #[test]
    fn grid_construction() {
        let g = density_grid(0.05, 0.95, 0.05).unwrap();
        assert_eq!(g.len(), 19);
        assert_relative_eq!(g[0], 0.05);
        assert_relative_eq!(*g.last().unwrap(), 0.95, max_relative = 1e-12);
        assert!(density_grid(0.5, 0.1, 0.1).is_err());
    }

    #[test]
    fn geometric_family_current_curve() {
        // g_k = 2: u_c = 2, F(u) = sum u^k 2^{-k} = 1/(1 - u/2).
        let spec = PotentialSpec::geometric(2.0).unwrap();
        assert_relative_eq!(
            series_f(1.0, &spec, 1e-13).unwrap(),
            2.0,
            max_relative = 1e-11
        );
        // r(u) diverges at u_c, so no plateau.
        assert_eq!(critical_density(&spec, 1e-12).unwrap(), 0.0);
        let curve =
            current_density_relation(&spec, &[0.25, 0.5, 0.75], 1e-13).unwrap();
        for s in &curve.samples {
            // Closed form: r(u) = (u/2)/(1-u/2) = 1/rho - 1 gives
            // u = 2(1-rho), j = w rho u = 2 rho (1-rho).
            assert_relative_eq!(
                s.current,
                2.0 * s.rho * (1.0 - s.rho),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn binomial_partition_row_is_the_oracle() {
        // The DP row for constant rates is a row of binomials; the ratio in
        // the finite-size current formula telescopes to N(L-N)/(L(L-1)).
        let spec = PotentialSpec::constant();
        let row = zrp_log_partition_row(3, 5, &spec).unwrap();
        for (k, &v) in row.iter().enumerate() {
            assert_relative_eq!(
                v.exp(),
                combinadics::binomial(3 + k - 1, k) as f64,
                max_relative = 1e-12
            );
        }
    }
}
