//! Headway measures on the torus, their partition functions through the
//! zero-range convolution identity, and the zero-range ensemble quantities
//! (normalization, single-site marginal, density/fugacity maps).
//!
//! Partition functions are handled in log-domain throughout. The canonical
//! partition function has two independent routes: direct enumeration over
//! configurations (kept in [`MeasureTable::canonical`]) and the site/particle
//! swapped convolution recursion (in [`zrp_log_partition_row`]); tests pin one
//! against the other.

use crate::combinadics;
use crate::error::{Error, Result};
use crate::lattice::{coords_from_occupation, headways, Headway, TorusConfiguration};
use crate::numerics::{log_sum_exp, sum_power_series, TailHint};
use crate::potential::PotentialSpec;

/// Default relative tail tolerance for infinite series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-14;

/// Tolerance used exactly at the edge of the convergence disc, where
/// power-law moment tails decay too slowly for the full tolerance within any
/// reasonable term budget. Critical densities are only ever compared at
/// thresholds far above this.
pub const CRITICAL_EDGE_TOL: f64 = 1e-8;

const MAX_SERIES_TERMS: usize = 1 << 22;

/// Log of the Boltzmann weight of a torus configuration: the sum of
/// `ln y_{n_i + 1}` over the particle headways. The empty configuration has
/// weight 1; an infinite potential at an occurring distance gives `-inf`.
pub fn log_boltzmann_weight(cfg: &TorusConfiguration, spec: &PotentialSpec) -> Result<f64> {
    spec.require_depth(cfg.size())?;
    if cfg.particle_count() == 0 {
        return Ok(0.0);
    }
    let coords = coords_from_occupation(cfg);
    let hs = headways(&coords)?;
    Ok(hs
        .values()
        .iter()
        .map(|h| match h {
            Headway::Finite(n) => spec.log_y(n + 1),
            Headway::Infinite => unreachable!("torus headways are finite"),
        })
        .sum())
}

fn tail_hint(spec: &PotentialSpec) -> TailHint {
    match spec.power_law_exponent() {
        Some(b) => TailHint::PowerLaw { b },
        None => TailHint::Geometric,
    }
}

/// Row `Z(sites, 0..=k_max)` of the zero-range canonical partition function,
/// by the convolution recursion `Z(1, k) = tau_k`,
/// `Z(n, k) = sum_m tau_m Z(n-1, k-m)`, evaluated in log-domain.
///
/// `sites = 0` yields the empty-lattice row `Z(0, k) = [k == 0]`.
pub fn zrp_log_partition_row(
    sites: usize,
    k_max: usize,
    spec: &PotentialSpec,
) -> Result<Vec<f64>> {
    if sites == 0 {
        let mut row = vec![f64::NEG_INFINITY; k_max + 1];
        row[0] = 0.0;
        return Ok(row);
    }
    spec.require_finite(k_max + 1)?;
    let log_tau: Vec<f64> = (0..=k_max).map(|k| spec.log_tau(k)).collect();
    let mut row = log_tau.clone();
    let mut next = vec![0.0f64; k_max + 1];
    let mut scratch = vec![0.0f64; k_max + 1];
    for _ in 2..=sites {
        for k in 0..=k_max {
            let mut hi = f64::NEG_INFINITY;
            for m in 0..=k {
                scratch[m] = log_tau[m] + row[k - m];
                if scratch[m] > hi {
                    hi = scratch[m];
                }
            }
            next[k] = if hi == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                let mut acc = 0.0;
                for &v in &scratch[..=k] {
                    let d = v - hi;
                    // Terms more than 40 nats below the peak cannot move the
                    // sum at 1e-15 relative precision.
                    if d > -40.0 {
                        acc += d.exp();
                    }
                }
                hi + acc.ln()
            };
        }
        std::mem::swap(&mut row, &mut next);
    }
    Ok(row)
}

/// `ln Z(sites, particles)` of the zero-range canonical partition function.
pub fn zrp_canonical_log_partition(
    sites: usize,
    particles: usize,
    spec: &PotentialSpec,
) -> Result<f64> {
    if sites == 0 {
        return Err(Error::InvalidArgument(
            "zero-range partition function needs at least one site".into(),
        ));
    }
    Ok(zrp_log_partition_row(sites, particles, spec)?[particles])
}

/// `ln Z` of the canonical headway measure with `n` particles on `l` sites,
/// via the identity `Z = (L/N) y_1^N Z_zrp(N, L-N)`; `Z = 1` for `n = 0`.
pub fn canonical_log_partition(l: usize, n: usize, spec: &PotentialSpec) -> Result<f64> {
    if l == 0 || n > l {
        return Err(Error::InvalidArgument(format!(
            "invalid canonical space: L={l}, N={n}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let zrp = zrp_canonical_log_partition(n, l - n, spec)?;
    Ok((l as f64 / n as f64).ln() + n as f64 * spec.log_y(1) + zrp)
}

/// Probability of `cfg` under the canonical headway measure on its particle
/// number sector.
pub fn canonical_probability(cfg: &TorusConfiguration, spec: &PotentialSpec) -> Result<f64> {
    let lw = log_boltzmann_weight(cfg, spec)?;
    let lz = canonical_log_partition(cfg.size(), cfg.particle_count(), spec)?;
    Ok((lw - lz).exp())
}

/// `ln Z` of the grand canonical headway measure at fugacity `z`:
/// `Z = sum_N z^N Z_can(L, N)`.
pub fn grand_canonical_log_partition(l: usize, z: f64, spec: &PotentialSpec) -> Result<f64> {
    if z < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "fugacity must be nonnegative, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let terms: Vec<f64> = (0..=l)
        .map(|n| Ok(n as f64 * z.ln() + canonical_log_partition(l, n, spec)?))
        .collect::<Result<_>>()?;
    Ok(log_sum_exp(&terms))
}

/// Zero-range ensemble quantities derived from one potential: normalization
/// `Psi`, single-site marginal `nu`, density and fugacity maps, critical
/// values. The critical fugacity is the radius of convergence of the
/// `tau`-series; the critical density is the density there (possibly
/// infinite, in which case there is no plateau).
#[derive(Debug, Clone)]
pub struct ZrpEnsemble<'a> {
    spec: &'a PotentialSpec,
    tol: f64,
    z_c: f64,
    rho_c: f64,
}

impl<'a> ZrpEnsemble<'a> {
    pub fn new(spec: &'a PotentialSpec, tol: f64) -> Result<Self> {
        spec.require_finite(2)?;
        let z_c = spec.radius_of_convergence();
        let rho_c = match density_at(z_c, spec, tol.max(CRITICAL_EDGE_TOL)) {
            Ok(rho) => rho,
            // Divergence (or failure to converge) of the mean at the critical
            // point: unbounded critical density, no condensation plateau.
            Err(Error::DivergentSeries(_)) | Err(Error::SeriesNotConverged { .. }) => {
                f64::INFINITY
            }
            Err(e) => return Err(e),
        };
        Ok(Self {
            spec,
            tol,
            z_c,
            rho_c,
        })
    }

    pub fn critical_fugacity(&self) -> f64 {
        self.z_c
    }

    pub fn critical_density(&self) -> f64 {
        self.rho_c
    }

    /// Normalization `Psi(z) = sum_m z^m tau_m`.
    pub fn psi(&self, z: f64) -> Result<f64> {
        let sums = sum_power_series(
            &|k| self.spec.log_tau(k),
            z,
            self.tol,
            MAX_SERIES_TERMS.min(self.spec.depth() - 1),
            tail_hint(self.spec),
            false,
        )?;
        Ok(sums.sum)
    }

    /// Single-site marginal `nu_z(k) = z^k tau_k / Psi(z)`.
    pub fn nu(&self, z: f64, k: usize) -> Result<f64> {
        let psi = self.psi(z)?;
        let log_num = if k == 0 {
            self.spec.log_tau(0)
        } else {
            k as f64 * z.ln() + self.spec.log_tau(k)
        };
        Ok(log_num.exp() / psi)
    }

    /// Marginal probabilities `nu_z(0..=k_max)` sharing one normalization.
    pub fn nu_vec(&self, z: f64, k_max: usize) -> Result<Vec<f64>> {
        self.spec.require_depth(k_max + 1)?;
        let psi = self.psi(z)?;
        Ok((0..=k_max)
            .map(|k| {
                let log_num = if k == 0 {
                    self.spec.log_tau(0)
                } else {
                    k as f64 * z.ln() + self.spec.log_tau(k)
                };
                log_num.exp() / psi
            })
            .collect())
    }

    /// Density `rho(z) = z d/dz ln Psi = (sum_k k z^k tau_k) / Psi`.
    pub fn density(&self, z: f64) -> Result<f64> {
        density_at(z, self.spec, self.tol)
    }

    /// Fugacity at a given density: the inverse of the strictly increasing
    /// density map on `[0, rho_c)`, saturating at the critical fugacity for
    /// `rho >= rho_c`.
    pub fn fugacity(&self, rho: f64) -> Result<f64> {
        if rho < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "density must be nonnegative, got {rho}"
            )));
        }
        if rho == 0.0 {
            return Ok(0.0);
        }
        if rho >= self.rho_c {
            return Ok(self.z_c);
        }
        // Expanding bracket: approach the critical fugacity geometrically so
        // the series is never evaluated closer to it than necessary.
        let mut lo = 0.0f64;
        let mut hi = 0.5 * self.z_c;
        loop {
            let f_hi = self.density(hi)?;
            if f_hi >= rho {
                break;
            }
            lo = hi;
            let next = 0.5 * (hi + self.z_c);
            if next - hi < 1e-15 * self.z_c {
                return Err(Error::RangeError(format!(
                    "density {rho} not reachable below the critical fugacity {}",
                    self.z_c
                )));
            }
            hi = next;
        }
        crate::numerics::bisect_increasing(
            &|z| self.density(z),
            lo,
            hi,
            rho,
            1e-13 * self.z_c.max(1.0),
        )
    }
}

fn density_at(z: f64, spec: &PotentialSpec, tol: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(0.0);
    }
    let sums = sum_power_series(
        &|k| spec.log_tau(k),
        z,
        tol,
        MAX_SERIES_TERMS.min(spec.depth() - 1),
        tail_hint(spec),
        true,
    )?;
    Ok(sums.first_moment / sums.sum)
}

/// Normalization `Psi(z)` of the zero-range single-site measure.
pub fn zrp_psi(z: f64, spec: &PotentialSpec, tol: f64) -> Result<f64> {
    ZrpEnsemble::new(spec, tol)?.psi(z)
}

/// Single-site zero-range marginal `nu_z(k)`.
pub fn zrp_nu(z: f64, k: usize, spec: &PotentialSpec, tol: f64) -> Result<f64> {
    ZrpEnsemble::new(spec, tol)?.nu(z, k)
}

/// Zero-range density as a function of fugacity.
pub fn zrp_density(z: f64, spec: &PotentialSpec, tol: f64) -> Result<f64> {
    density_at(z, spec, tol)
}

/// Fugacity as a function of density, with the plateau at the critical
/// fugacity above the critical density.
pub fn zrp_fugacity(rho: f64, spec: &PotentialSpec, tol: f64) -> Result<f64> {
    ZrpEnsemble::new(spec, tol)?.fugacity(rho)
}

/// Joint canonical marginal of `values.len()` sites in the zero-range
/// canonical ensemble with `sites` sites and `particles` particles:
/// `prod_i tau_{k_i} * Z(sites - m, particles - sum k_i) / Z(sites,
/// particles)`. Exchangeability makes the site choice irrelevant.
pub fn zrp_canonical_marginal(
    sites: usize,
    particles: usize,
    values: &[usize],
    spec: &PotentialSpec,
) -> Result<f64> {
    let m = values.len();
    if m > sites {
        return Err(Error::InvalidArgument(format!(
            "marginal of {m} sites requested from a {sites}-site ensemble"
        )));
    }
    let used: usize = values.iter().sum();
    if used > particles {
        return Ok(0.0);
    }
    let log_z_full = zrp_canonical_log_partition(sites, particles, spec)?;
    let log_z_rest = zrp_log_partition_row(sites - m, particles - used, spec)?[particles - used];
    let log_vals: f64 = values.iter().map(|&k| spec.log_tau(k)).sum();
    Ok((log_vals + log_z_rest - log_z_full).exp())
}

/// Single-particle headway marginal of the canonical headway measure on
/// `(l, n)`: the probability that a given particle has headway `k`. Equals
/// the one-site zero-range canonical marginal with `n` sites and `l - n`
/// particles.
pub fn headway_marginal(l: usize, n: usize, spec: &PotentialSpec) -> Result<Vec<f64>> {
    if n == 0 || n > l {
        return Err(Error::InvalidArgument(format!(
            "headway marginal needs 1 <= N <= L, got L={l}, N={n}"
        )));
    }
    let k_max = l - n;
    let log_z_full = zrp_canonical_log_partition(n, k_max, spec)?;
    let rest = zrp_log_partition_row(n - 1, k_max, spec)?;
    Ok((0..=k_max)
        .map(|k| (spec.log_tau(k) + rest[k_max - k] - log_z_full).exp())
        .collect())
}

/// State space tag of a [`MeasureTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space {
    /// All `C(L, N)` torus configurations with `N` particles, indexed
    /// combinadically by their occupied-site sets.
    CanonicalTorus { l: usize, n: usize },
    /// All `2^L` torus configurations, indexed by their occupation bitmask.
    GrandCanonicalTorus { l: usize, z: f64 },
    /// Zero-range configurations of `particles` particles on `sites` sites,
    /// indexed through the stars-and-bars bijection.
    ZrpCanonical { sites: usize, particles: usize },
    /// An externally supplied state space (e.g. generator states).
    Custom { states: usize },
}

/// A probability vector over an enumerated state space, stored as log-weights
/// plus the log-partition function.
#[derive(Debug, Clone)]
pub struct MeasureTable {
    space: Space,
    log_weights: Vec<f64>,
    log_partition: f64,
}

impl MeasureTable {
    /// Canonical headway measure, built by direct enumeration of all
    /// `C(L, N)` configurations (the partition function here is the
    /// enumeration route, independent of the convolution identity).
    pub fn canonical(l: usize, n: usize, spec: &PotentialSpec) -> Result<Self> {
        if l == 0 || n > l {
            return Err(Error::InvalidArgument(format!(
                "invalid canonical space: L={l}, N={n}"
            )));
        }
        spec.require_depth(l)?;
        let log_weights: Vec<f64> = combinadics::enumerate(l, n)
            .map(|positions| {
                let mut occ = vec![false; l];
                for &p in &positions {
                    occ[p] = true;
                }
                log_boltzmann_weight(&TorusConfiguration::new(occ)?, spec)
            })
            .collect::<Result<_>>()?;
        let log_partition = log_sum_exp(&log_weights);
        Ok(Self {
            space: Space::CanonicalTorus { l, n },
            log_weights,
            log_partition,
        })
    }

    /// Grand canonical headway measure at fugacity `z`, over all `2^L`
    /// configurations indexed by occupation bitmask.
    pub fn grand_canonical(l: usize, z: f64, spec: &PotentialSpec) -> Result<Self> {
        if l == 0 || l > 20 {
            return Err(Error::InvalidArgument(format!(
                "grand canonical enumeration supports 1 <= L <= 20, got {l}"
            )));
        }
        if z < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "fugacity must be nonnegative, got {z}"
            )));
        }
        spec.require_depth(l)?;
        let log_weights: Vec<f64> = (0usize..1 << l)
            .map(|mask| {
                let occ: Vec<bool> = (0..l).map(|x| mask >> x & 1 == 1).collect();
                let n = mask.count_ones() as f64;
                let fugacity_part = if z == 0.0 {
                    if n == 0.0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    n * z.ln()
                };
                Ok(fugacity_part + log_boltzmann_weight(&TorusConfiguration::new(occ)?, spec)?)
            })
            .collect::<Result<_>>()?;
        let log_partition = log_sum_exp(&log_weights);
        Ok(Self {
            space: Space::GrandCanonicalTorus { l, z },
            log_weights,
            log_partition,
        })
    }

    /// Canonical zero-range measure by enumeration (small spaces only:
    /// intended for oracle tests).
    pub fn zrp_canonical(sites: usize, particles: usize, spec: &PotentialSpec) -> Result<Self> {
        let dim = combinadics::binomial(sites + particles - 1, particles);
        if sites == 0 || dim > 1 << 22 {
            return Err(Error::InvalidArgument(format!(
                "zero-range enumeration of {dim} states refused"
            )));
        }
        spec.require_finite(particles + 1)?;
        let log_weights: Vec<f64> = (0..dim)
            .map(|idx| {
                let state = zrp_state_unrank(sites, particles, idx);
                state.iter().map(|&k| spec.log_tau(k)).sum()
            })
            .collect();
        let log_partition = log_sum_exp(&log_weights);
        Ok(Self {
            space: Space::ZrpCanonical { sites, particles },
            log_weights,
            log_partition,
        })
    }

    /// Wraps an externally computed probability vector.
    pub fn from_probabilities(space: Space, probs: &[f64]) -> Self {
        let log_weights = probs.iter().map(|&p| p.max(0.0).ln()).collect();
        Self {
            space,
            log_weights,
            log_partition: 0.0,
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn log_weight(&self, idx: usize) -> f64 {
        self.log_weights[idx]
    }

    pub fn probability(&self, idx: usize) -> f64 {
        (self.log_weights[idx] - self.log_partition).exp()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.probability(i)).collect()
    }

    /// |sum of probabilities - 1|.
    pub fn normalization_defect(&self) -> f64 {
        (self.probabilities().iter().sum::<f64>() - 1.0).abs()
    }

    pub fn total_variation(&self, other: &MeasureTable) -> f64 {
        crate::stats::total_variation(&self.probabilities(), &other.probabilities())
    }
}

/// CSV table of canonical log-partition functions, one row per `(L, N)`.
pub fn partition_table_csv(l_max: usize, spec: &PotentialSpec) -> Result<String> {
    let mut out = String::from("L,N,log_Z\n");
    for l in 1..=l_max {
        for n in 0..=l {
            let z = canonical_log_partition(l, n, spec)?;
            out.push_str(&format!("{l},{n},{z:.17e}\n"));
        }
    }
    Ok(out)
}

/// CSV table of the single-site zero-range marginal at fugacity `z`.
pub fn nu_table_csv(z: f64, k_max: usize, spec: &PotentialSpec, tol: f64) -> Result<String> {
    let ens = ZrpEnsemble::new(spec, tol)?;
    let nu = ens.nu_vec(z, k_max)?;
    let mut out = String::from("k,nu\n");
    for (k, v) in nu.iter().enumerate() {
        out.push_str(&format!("{k},{v:.17e}\n"));
    }
    Ok(out)
}

/// Combinadic index of a torus configuration inside its canonical space.
pub fn canonical_state_index(cfg: &TorusConfiguration) -> usize {
    let positions: Vec<usize> = coords_from_occupation(cfg)
        .positions()
        .iter()
        .map(|&x| x as usize)
        .collect();
    combinadics::rank(&positions) as usize
}

/// Index of a zero-range configuration through the stars-and-bars bijection
/// with `(sites - 1)`-subsets of `{0, .., sites + particles - 2}`.
pub fn zrp_state_index(state: &[usize]) -> usize {
    let sites = state.len();
    let mut bars = Vec::with_capacity(sites.saturating_sub(1));
    let mut acc = 0usize;
    for (i, &k) in state.iter().take(sites - 1).enumerate() {
        acc += k;
        bars.push(acc + i);
    }
    combinadics::rank(&bars) as usize
}

/// Inverse of [`zrp_state_index`].
pub fn zrp_state_unrank(sites: usize, particles: usize, idx: u64) -> Vec<usize> {
    if sites == 1 {
        return vec![particles];
    }
    let bars = combinadics::unrank(sites - 1, idx);
    let mut state = Vec::with_capacity(sites);
    let mut prev = 0usize;
    for (i, &b) in bars.iter().enumerate() {
        state.push(b - i - prev);
        prev = b - i;
    }
    state.push(particles - prev);
    state
}
