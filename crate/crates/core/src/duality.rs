//! Reverse duality of the totally asymmetric process on the line with a
//! single random walk: domain measures pinned at a leftmost particle with
//! i.i.d. gaps, the duality matrix, the exact intertwining residual, and a
//! Monte Carlo check of the measure-mixture evolution.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::generator::build_tahep_line_generator;
use crate::lattice::CoordinateConfiguration;
use crate::numerics::{sum_power_series, TailHint};
use crate::potential::PotentialSpec;
use crate::simulator::{Geometry, Observables, SimulationConfig};
use crate::stats::{chi_square_gof, poisson_pmf, total_variation};

/// `ln Z` of the single-gap partition function `Z = sum_n prod_{k<=n}
/// 1/g_k`, i.e. the tau-series at fugacity one. Divergence is an error that
/// names the failing threshold.
pub fn duality_log_partition(spec: &PotentialSpec, tol: f64) -> Result<f64> {
    spec.require_finite(2)?;
    if let Some(b) = spec.power_law_exponent() {
        if b <= 1.0 {
            return Err(Error::DivergentSeries(format!(
                "gap partition function diverges for rate exponent b = {b} <= 1"
            )));
        }
    }
    let hint = match spec.power_law_exponent() {
        Some(b) => TailHint::PowerLaw { b },
        None => TailHint::Geometric,
    };
    let sums = sum_power_series(
        &|k| spec.log_tau(k),
        1.0,
        tol,
        spec.depth() - 1,
        hint,
        false,
    )?;
    Ok(sums.sum.ln())
}

/// Measure on line configurations with the leftmost particle pinned at
/// `x_star` and the remaining gaps i.i.d. with probability
/// `p(n) = tau_n / Z`.
#[derive(Debug, Clone)]
pub struct DomainMeasure<'a> {
    spec: &'a PotentialSpec,
    x_star: i64,
    particles: usize,
    log_z: f64,
    gap_pmf: Vec<f64>,
    gap_cdf: Vec<f64>,
}

impl<'a> DomainMeasure<'a> {
    pub fn new(spec: &'a PotentialSpec, x_star: i64, particles: usize, tol: f64) -> Result<Self> {
        if particles == 0 {
            return Err(Error::InvalidArgument(
                "domain measure needs at least one particle".into(),
            ));
        }
        let log_z = duality_log_partition(spec, tol)?;
        // Tabulate the gap law until the remaining mass is negligible; the
        // sampler walks the exact tail by the family rule beyond the table.
        let mut gap_pmf = Vec::new();
        let mut gap_cdf = Vec::new();
        let mut cum = 0.0f64;
        for n in 0..spec.depth() - 1 {
            let p = (spec.log_tau(n) - log_z).exp();
            cum += p;
            gap_pmf.push(p);
            gap_cdf.push(cum);
            if 1.0 - cum <= 1e-14 && n >= 8 {
                break;
            }
        }
        Ok(Self {
            spec,
            x_star,
            particles,
            log_z,
            gap_pmf,
            gap_cdf,
        })
    }

    pub fn x_star(&self) -> i64 {
        self.x_star
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    /// `P(gap = n)`; exact also past the tabulated range.
    pub fn gap_probability(&self, n: usize) -> f64 {
        if n < self.gap_pmf.len() {
            return self.gap_pmf[n];
        }
        let mut p = *self.gap_pmf.last().expect("nonempty table");
        for k in self.gap_pmf.len()..=n {
            p /= self.spec.zrp_rate_by_rule(k);
        }
        p
    }

    /// Duality weight `R(x, cfg)`: zero unless the leftmost particle sits at
    /// `x`; otherwise the product of the i.i.d. gap probabilities. For a
    /// fixed `x` this is a probability measure over `N`-particle line
    /// configurations.
    pub fn weight(&self, x: i64, cfg: &CoordinateConfiguration) -> f64 {
        if cfg.particle_count() != self.particles || cfg.positions().first() != Some(&x) {
            return 0.0;
        }
        cfg.positions()
            .windows(2)
            .map(|w| self.gap_probability((w[1] - w[0] - 1) as usize))
            .product()
    }

    /// Draws a configuration: leftmost particle at `x_star`, gaps by exact
    /// inverse-CDF sampling (walking the analytic tail when the draw falls
    /// past the table).
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> CoordinateConfiguration {
        let mut positions = Vec::with_capacity(self.particles);
        let mut x = self.x_star;
        positions.push(x);
        for _ in 1..self.particles {
            let gap = self.sample_gap(rng);
            x += gap as i64 + 1;
            positions.push(x);
        }
        CoordinateConfiguration::line(positions).expect("positions are strictly increasing")
    }

    fn sample_gap(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let idx = self.gap_cdf.partition_point(|&c| c <= u);
        if idx < self.gap_cdf.len() {
            return idx;
        }
        // Residual mass beyond the table (< 1e-14): continue the exact
        // inverse CDF with rule-based rates.
        let mut n = self.gap_cdf.len() - 1;
        let mut cum = *self.gap_cdf.last().expect("nonempty table");
        let mut p = *self.gap_pmf.last().expect("nonempty table");
        loop {
            n += 1;
            p /= self.spec.zrp_rate_by_rule(n);
            cum += p;
            if cum > u || p == 0.0 {
                return n;
            }
        }
    }
}

/// Transition probability of the dual walk: starting at `start` and jumping
/// left at rate `w`, the chance of sitting at `end <= start` after time `t`
/// is the Poisson weight of `start - end` jumps.
pub fn rw_transition(t: f64, w: f64, start: i64, end: i64) -> f64 {
    if end > start || t < 0.0 {
        return 0.0;
    }
    let k = (start - end) as f64;
    let mean = w * t;
    if mean == 0.0 {
        return if k == 0.0 { 1.0 } else { 0.0 };
    }
    (k * mean.ln() - mean - ln_gamma(k + 1.0)).exp()
}

/// Result of the exact intertwining check `R Q = Q~^T R` on a window.
#[derive(Debug, Clone, Serialize)]
pub struct IntertwiningReport {
    /// Max absolute entry of `R Q - Q~^T R` over interior columns.
    pub residual: f64,
    pub states: usize,
    pub interior_columns: usize,
}

/// Builds the duality matrix `R` over a window of the line together with the
/// process generator `Q` and the dual-walk generator, and returns the
/// largest entry of `R Q - Q~^T R` over columns whose full transition
/// neighborhood stays inside the window (for those the truncation error is
/// exactly zero, so the duality identity makes the residual vanish).
pub fn intertwining_residual(
    n: usize,
    window: (i64, i64),
    spec: &PotentialSpec,
    tol: f64,
) -> Result<IntertwiningReport> {
    let log_z = duality_log_partition(spec, tol)?;
    let (a, b) = window;
    let (q, states) = build_tahep_line_generator(n, window, spec)?;
    let dim = q.dim();
    let width = states.width();
    let w = spec.w();

    // R row values: state s contributes only in row x = leftmost(s).
    let r_val: Vec<f64> = (0..dim)
        .map(|idx| {
            let pos = states.positions(idx);
            pos.windows(2)
                .map(|g| (spec.log_tau((g[1] - g[0] - 1) as usize) - log_z).exp())
                .product::<f64>()
        })
        .collect();
    let leftmost: Vec<i64> = (0..dim).map(|idx| states.positions(idx)[0]).collect();
    let rightmost: Vec<i64> = (0..dim)
        .map(|idx| *states.positions(idx).last().expect("nonempty"))
        .collect();

    // RQ, rows indexed by x - a.
    let mut rq = vec![0.0f64; width * dim];
    for z in 0..dim {
        let row = (leftmost[z] - a) as usize;
        rq[row * dim + z] += r_val[z] * q.diagonal(z);
        for &(target, rate) in q.row(z) {
            rq[row * dim + target] += r_val[z] * rate;
        }
    }

    let mut residual = 0.0f64;
    let mut interior_columns = 0usize;
    for s in 0..dim {
        let interior = leftmost[s] > a && rightmost[s] < b;
        if !interior {
            continue;
        }
        interior_columns += 1;
        for x in a..b {
            let row = (x - a) as usize;
            let r_here = if leftmost[s] == x { r_val[s] } else { 0.0 };
            let r_next = if leftmost[s] == x + 1 { r_val[s] } else { 0.0 };
            let dual_side = w * (r_next - r_here);
            let diff = (rq[row * dim + s] - dual_side).abs();
            residual = residual.max(diff);
        }
    }
    if interior_columns == 0 {
        return Err(Error::WindowTooSmall {
            a,
            b,
            reason: "no interior columns survive the truncation".into(),
        });
    }
    Ok(IntertwiningReport {
        residual,
        states: dim,
        interior_columns,
    })
}

/// Monte Carlo verification report of the measure-mixture evolution: start
/// from a domain measure, run to time `t`, and compare (i) the leftmost
/// particle displacement against the Poisson law of the dual walk, (ii) the
/// time-`t` gap histogram against the initial gap law, and (iii) the joint
/// (displacement, first gap) statistics against the product of marginals.
#[derive(Debug, Clone, Serialize)]
pub struct DomainWalkReport {
    pub replicas: usize,
    pub time: f64,
    pub leftmost_tv: f64,
    pub leftmost_chi2_p: f64,
    pub gap_tv: f64,
    pub gap_chi2_p: f64,
    pub mean_displacement: f64,
    pub expected_displacement: f64,
    /// Three standard deviations of the mean displacement estimator.
    pub three_sigma: f64,
    pub joint_factorization_tv: f64,
    /// Raw displacement counts, for histograms.
    #[serde(skip)]
    pub displacement_counts: Vec<u64>,
}

pub fn domain_walk_check(
    spec: &PotentialSpec,
    particles: usize,
    x_star: i64,
    t: f64,
    replicas: usize,
    seed: u64,
    tol: f64,
) -> Result<DomainWalkReport> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("need at least one replica".into()));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    let dm = DomainMeasure::new(spec, x_star, particles, tol)?;

    let (displacements, gap_pool, joint): (Vec<i64>, Vec<usize>, Vec<(i64, usize)>) = if t == 0.0 {
        // Degenerate check: fresh draws from the measure itself.
        let mut displacements = Vec::with_capacity(replicas);
        let mut gap_pool = Vec::new();
        let mut joint = Vec::new();
        for replica in 0..replicas {
            use rand::SeedableRng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ replica as u64);
            let cfg = dm.sample(&mut rng);
            displacements.push(0);
            let gaps: Vec<usize> = cfg
                .positions()
                .windows(2)
                .map(|w| (w[1] - w[0] - 1) as usize)
                .collect();
            if let Some(&first) = gaps.first() {
                joint.push((0, first));
            }
            gap_pool.extend(gaps);
        }
        (displacements, gap_pool, joint)
    } else {
        let cfg = SimulationConfig::new(Geometry::Line { n: particles, x_star }, t, seed)?
            .with_replicas(replicas)?
            .with_burn_in(0.0)?
            .with_observables(Observables {
                current: false,
                headway_hist: false,
                leftmost: true,
                snapshot_times: Vec::new(),
            });
        let stats = crate::simulator::simulate_with_sampler(spec, &cfg, |rng| Ok(dm.sample(rng)))?;
        let displacements: Vec<i64> = stats
            .leftmost_final
            .iter()
            .map(|&x| x - x_star)
            .collect();
        let mut gap_pool = Vec::new();
        let mut joint = Vec::with_capacity(replicas);
        for (d, gaps) in displacements.iter().zip(&stats.final_gaps) {
            if let Some(&first) = gaps.first() {
                joint.push((*d, first));
            }
            gap_pool.extend_from_slice(gaps);
        }
        (displacements, gap_pool, joint)
    };

    // Leftmost law against the Poisson kernel.
    let mean_jumps = spec.w() * t;
    let d_max = displacements
        .iter()
        .map(|&d| d.max(0) as usize)
        .max()
        .unwrap_or(0)
        .max((mean_jumps * 3.0) as usize + 10);
    let mut d_counts = vec![0.0f64; d_max + 1];
    for &d in &displacements {
        d_counts[d as usize] += 1.0;
    }
    let poisson = poisson_pmf(mean_jumps, d_max);
    let total = displacements.len() as f64;
    let d_hist: Vec<f64> = d_counts.iter().map(|&c| c / total).collect();
    let leftmost_tv = total_variation(&d_hist, &poisson);
    let leftmost_chi2 = chi_square_gof(&d_counts, &poisson, total);

    // Gap law against the initial (= invariant under the mixture) gap law.
    let (gap_tv, gap_chi2_p) = if gap_pool.is_empty() {
        (0.0, 1.0)
    } else {
        let g_max = gap_pool.iter().copied().max().unwrap_or(0).max(16);
        let mut g_counts = vec![0.0f64; g_max + 1];
        for &g in &gap_pool {
            g_counts[g] += 1.0;
        }
        let expected: Vec<f64> = (0..=g_max).map(|k| dm.gap_probability(k)).collect();
        let g_total = gap_pool.len() as f64;
        let g_hist: Vec<f64> = g_counts.iter().map(|&c| c / g_total).collect();
        (
            total_variation(&g_hist, &expected),
            chi_square_gof(&g_counts, &expected, g_total).p_value,
        )
    };

    // Factorization of the two-point statistics (displacement, first gap).
    let joint_factorization_tv = if joint.is_empty() {
        0.0
    } else {
        let dm_max = joint.iter().map(|&(d, _)| d as usize).max().unwrap_or(0);
        let gm_max = joint.iter().map(|&(_, g)| g).max().unwrap_or(0);
        let cols = gm_max + 1;
        let mut joint_counts = vec![0.0f64; (dm_max + 1) * cols];
        let mut d_marg = vec![0.0f64; dm_max + 1];
        let mut g_marg = vec![0.0f64; cols];
        let jn = joint.len() as f64;
        for &(d, g) in &joint {
            joint_counts[d as usize * cols + g] += 1.0;
            d_marg[d as usize] += 1.0;
            g_marg[g] += 1.0;
        }
        let mut tv = 0.0;
        for d in 0..=dm_max {
            for g in 0..cols {
                let p_joint = joint_counts[d * cols + g] / jn;
                let p_prod = (d_marg[d] / jn) * (g_marg[g] / jn);
                tv += (p_joint - p_prod).abs();
            }
        }
        0.5 * tv
    };

    let mean_displacement = displacements.iter().map(|&d| d as f64).sum::<f64>() / total;
    Ok(DomainWalkReport {
        replicas,
        time: t,
        leftmost_tv,
        leftmost_chi2_p: leftmost_chi2.p_value,
        gap_tv,
        gap_chi2_p,
        mean_displacement,
        expected_displacement: mean_jumps,
        three_sigma: 3.0 * (mean_jumps / total).sqrt(),
        joint_factorization_tv,
        displacement_counts: d_counts.iter().map(|&c| c as u64).collect(),
    })
}
