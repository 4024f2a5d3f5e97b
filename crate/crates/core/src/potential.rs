//! Interaction potentials and the rate pipeline built from them.
//!
//! A [`PotentialSpec`] packages four consistent views of one object: the
//! two-body potential `J(r)` between neighboring particles at distance `r`,
//! the Boltzmann factors `y_r = exp(-J(r))` (with `y_0 = 0` encoding
//! exclusion), the exclusion-process jump rates `w_n = w * y_n / y_{n+1}`,
//! and the zero-range departure rates `g_k = y_k / y_{k+1}`.
//!
//! Everything is stored in log-domain up to a configurable depth so that
//! steep potentials neither overflow nor lose relative precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default table depth: torus computations need `y` up to `L`; series at the
/// edge of convergence take the longest (a k^-4 tail needs ~1e5 terms to
/// certify a 1e-14 relative bound).
pub const DEFAULT_DEPTH: usize = 1 << 17;

/// Jump bias: rate multipliers for right and left moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymmetry {
    pub right: f64,
    pub left: f64,
}

impl Asymmetry {
    pub fn totally_asymmetric() -> Self {
        Self {
            right: 1.0,
            left: 0.0,
        }
    }
}

/// Continuation rule for table potentials beyond the stored values; torus
/// and series computations need the sequence at every distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailRule {
    /// Freeze the potential at its last value (no interaction energy change
    /// beyond the table, so the zero-range rates tend to 1).
    Constant,
    /// Continue with the condensation family rule `g_k = 1 + b/k`.
    BFamily(f64),
}

/// Named potential families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `J(r) = 0` for all `r >= 1`: constant rates (the classical TASEP).
    Constant,
    /// Condensation family with exact zero-range rates `g_k = 1 + b/k`.
    BFamily { b: f64 },
    /// Constant zero-range rates `g_k = g`, i.e. a linear potential.
    Geometric { g: f64 },
    /// Explicit table `J(1), J(2), ...` with a tail rule.
    Table { j: Vec<f64>, tail: TailRule },
}

/// An interaction potential together with its derived Boltzmann factors,
/// time scale and jump bias. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    family: Family,
    /// `log_y[r] = -J(r)`, with `log_y[0] = -inf`.
    log_y: Vec<f64>,
    w_scale: f64,
    asymmetry: Asymmetry,
}

impl PotentialSpec {
    pub fn constant() -> Self {
        Self::build(Family::Constant, DEFAULT_DEPTH).expect("constant potential is finite")
    }

    /// The condensation family: exact rates `g_k = 1 + b/k`, reconstructed as
    /// `y_1 = 1`, `y_{k+1} = y_k / g_k`. `b = 0` degenerates to the constant
    /// potential.
    pub fn bfamily(b: f64) -> Result<Self> {
        if !(b >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bfamily parameter must be nonnegative, got {b}"
            )));
        }
        Self::build(Family::BFamily { b }, DEFAULT_DEPTH)
    }

    /// Constant zero-range rates `g_k = g` for all `k >= 1`.
    pub fn geometric(g: f64) -> Result<Self> {
        if !(g > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "geometric rate must be positive, got {g}"
            )));
        }
        Self::build(Family::Geometric { g }, DEFAULT_DEPTH)
    }

    /// Explicit potential table `j[i] = J(i+1)`, continued by `tail`.
    /// Entries may be `+inf`; rate computations reject such potentials.
    pub fn from_table(j: Vec<f64>, tail: TailRule) -> Result<Self> {
        if j.is_empty() {
            return Err(Error::InvalidArgument("empty potential table".into()));
        }
        if j.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN in potential table".into()));
        }
        Self::build(Family::Table { j, tail }, DEFAULT_DEPTH)
    }

    /// Rebuilds the potential with a different table depth.
    pub fn with_depth(self, depth: usize) -> Result<Self> {
        let mut spec = Self::build(self.family, depth)?;
        spec.w_scale = self.w_scale;
        spec.asymmetry = self.asymmetry;
        Ok(spec)
    }

    /// Sets the time scale `w > 0`.
    pub fn with_w(mut self, w: f64) -> Result<Self> {
        if !(w > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time scale w must be positive, got {w}"
            )));
        }
        self.w_scale = w;
        Ok(self)
    }

    pub fn with_asymmetry(mut self, right: f64, left: f64) -> Result<Self> {
        if !(right >= 0.0) || !(left >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "asymmetry parameters must be nonnegative, got ({right}, {left})"
            )));
        }
        self.asymmetry = Asymmetry { right, left };
        Ok(self)
    }

    fn build(family: Family, depth: usize) -> Result<Self> {
        if depth < 2 {
            return Err(Error::InvalidArgument("depth must be at least 2".into()));
        }
        let mut log_y = vec![0.0f64; depth + 1];
        log_y[0] = f64::NEG_INFINITY;
        match &family {
            Family::Constant => {}
            Family::BFamily { b } => {
                // log y_{k+1} = log y_k - ln(1 + b/k), y_1 = 1
                for k in 1..depth {
                    log_y[k + 1] = log_y[k] - (b / k as f64).ln_1p();
                }
            }
            Family::Geometric { g } => {
                let lg = g.ln();
                for k in 1..depth {
                    log_y[k + 1] = log_y[k] - lg;
                }
            }
            Family::Table { j, tail } => {
                let m = j.len().min(depth);
                for r in 1..=m {
                    log_y[r] = -j[r - 1];
                }
                match tail {
                    TailRule::Constant => {
                        log_y[m + 1..=depth].fill(-j[m - 1]);
                    }
                    TailRule::BFamily(b) => {
                        for k in m..depth {
                            log_y[k + 1] = log_y[k] - (b / k as f64).ln_1p();
                        }
                    }
                }
            }
        }
        Ok(Self {
            family,
            log_y,
            w_scale: 1.0,
            asymmetry: Asymmetry::totally_asymmetric(),
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn w(&self) -> f64 {
        self.w_scale
    }

    pub fn asymmetry(&self) -> Asymmetry {
        self.asymmetry
    }

    /// Largest distance the tables cover.
    pub fn depth(&self) -> usize {
        self.log_y.len() - 1
    }

    pub fn require_depth(&self, needed: usize) -> Result<()> {
        if needed > self.depth() {
            return Err(Error::DepthExceeded {
                needed,
                depth: self.depth(),
            });
        }
        Ok(())
    }

    /// All Boltzmann factors finite and positive up to distance `upto`.
    pub fn require_finite(&self, upto: usize) -> Result<()> {
        self.require_depth(upto)?;
        for r in 1..=upto {
            if self.log_y[r] == f64::NEG_INFINITY {
                return Err(Error::InfinitePotential { r });
            }
        }
        Ok(())
    }

    /// `ln y_r`; `-inf` at `r = 0` and wherever the potential is infinite.
    pub fn log_y(&self, r: usize) -> f64 {
        self.log_y[r]
    }

    /// Boltzmann factor `y_r = exp(-J(r))`, `y_0 = 0`.
    pub fn y(&self, r: usize) -> f64 {
        self.log_y[r].exp()
    }

    /// `ln g_k` for `k >= 1`.
    pub fn log_g(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        self.log_y[k] - self.log_y[k + 1]
    }

    /// Zero-range departure rate `g_k = y_k / y_{k+1}`, `g_0 = 0`.
    pub fn zrp_rate(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.log_g(k).exp()
        }
    }

    /// Jump rate `w_n = w * y_n / y_{n+1}`, `w_0 = 0`.
    pub fn jump_rate(&self, n: usize) -> f64 {
        self.w_scale * self.zrp_rate(n)
    }

    /// `g_k` straight from the family rule, valid beyond the stored depth
    /// (used when a sampler has to walk past the tabulated tail).
    pub fn zrp_rate_by_rule(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match &self.family {
            Family::Constant => 1.0,
            Family::BFamily { b } => 1.0 + b / k as f64,
            Family::Geometric { g } => *g,
            Family::Table { j, tail } => {
                if k < j.len() {
                    (j[k] - j[k - 1]).exp()
                } else {
                    match tail {
                        TailRule::Constant => 1.0,
                        TailRule::BFamily(b) => 1.0 + b / k as f64,
                    }
                }
            }
        }
    }

    /// Jump rates `w_0, .., w_upto`; rejects infinite potentials.
    pub fn jump_rates(&self, upto: usize) -> Result<Vec<f64>> {
        self.require_finite(upto + 1)?;
        Ok((0..=upto).map(|n| self.jump_rate(n)).collect())
    }

    /// Zero-range rates `g_0, .., g_upto`; rejects infinite potentials.
    pub fn zrp_rates(&self, upto: usize) -> Result<Vec<f64>> {
        self.require_finite(upto + 1)?;
        Ok((0..=upto).map(|k| self.zrp_rate(k)).collect())
    }

    /// `ln tau_k` where `tau_0 = 1` and `tau_k = prod_{m<=k} 1/g_m
    /// = y_{k+1}/y_1`. Requires a finite potential up to `k+1`.
    pub fn log_tau(&self, k: usize) -> f64 {
        self.log_y[k + 1] - self.log_y[1]
    }

    /// Radius of convergence of the gap-weight series `sum u^k y_{k+1}`,
    /// exact per family: the tail rules drive `g_k` to a limit, and the
    /// radius equals that limit.
    pub fn radius_of_convergence(&self) -> f64 {
        match &self.family {
            Family::Constant | Family::BFamily { .. } => 1.0,
            Family::Geometric { g } => *g,
            Family::Table { tail, .. } => match tail {
                TailRule::Constant => 1.0,
                TailRule::BFamily(_) => 1.0,
            },
        }
    }

    /// Finite-depth ratio-test estimate of the radius of convergence, with
    /// one Richardson step to cancel a 1/k correction. Cross-checks
    /// [`Self::radius_of_convergence`].
    pub fn estimate_radius_by_ratio_test(&self) -> f64 {
        let m = self.depth() / 2;
        let g_m = self.zrp_rate(m.max(1));
        let g_2m = self.zrp_rate((2 * m - 1).max(1));
        2.0 * g_2m - g_m
    }

    /// For the condensation family `g_k = 1 + b/k + o(1/k)`: the exact or
    /// estimated `b`. Governs convergence thresholds of gap-weight sums.
    pub fn power_law_exponent(&self) -> Option<f64> {
        match &self.family {
            Family::BFamily { b } => Some(*b),
            Family::Table {
                tail: TailRule::BFamily(b),
                ..
            } => Some(*b),
            _ => None,
        }
    }

    /// Report on the boundedness of the rate ratios `y_n / y_{n+1} = g_n`,
    /// read as "the sequence is bounded" (see the CLI note), together with
    /// the zero-range well-definedness quantity `sup |g_{k+1} - g_k|`. The
    /// sups are over the stored range; a tail that is still growing at the
    /// end of the range is flagged so callers can warn rather than trust the
    /// bound.
    pub fn summability_report(&self, upto: usize) -> Result<SummabilityReport> {
        let upto = upto.min(self.depth() - 1).max(2);
        self.require_finite(upto + 1)?;
        let mut sup = f64::NEG_INFINITY;
        let mut attained_at = 1;
        let mut sup_step = 0.0f64;
        let mut prev = self.zrp_rate(1);
        for n in 1..=upto {
            let g = self.zrp_rate(n);
            if g > sup {
                sup = g;
                attained_at = n;
            }
            sup_step = sup_step.max((g - prev).abs());
            prev = g;
        }
        let increasing_tail = self.zrp_rate(upto) > self.zrp_rate(upto / 2) + 1e-12;
        Ok(SummabilityReport {
            sup_ratio: sup,
            attained_at,
            sup_rate_step: sup_step,
            increasing_tail,
        })
    }
}

/// Boundedness report for the rate-ratio sequence.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SummabilityReport {
    pub sup_ratio: f64,
    pub attained_at: usize,
    /// `sup_k |g_{k+1} - g_k|` over the stored range (finite increments make
    /// the zero-range dynamics well defined).
    pub sup_rate_step: f64,
    /// The ratios were still growing at the end of the stored range, so the
    /// finite-range sup does not certify boundedness.
    pub increasing_tail: bool,
}

/// Boltzmann factors from a potential table: `y_0 = 0`,
/// `y_r = exp(-j[r-1])`. Infinite potential entries map to `y = 0`.
pub fn boltzmann_from_potential(j: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(j.len() + 1);
    y.push(0.0);
    y.extend(j.iter().map(|&v| (-v).exp()));
    y
}

fn default_w() -> f64 {
    1.0
}
fn default_right() -> f64 {
    1.0
}
fn default_left() -> f64 {
    0.0
}
fn default_depth() -> usize {
    DEFAULT_DEPTH
}

/// On-disk JSON description of a potential, e.g.
/// `{"family":"bfamily","b":4.0,"w":1.0,"r":1.0,"l":0.0}` or
/// `{"family":"table","J":[0.7,1.1],"tail":"constant"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialFile {
    Constant {
        #[serde(default = "default_w")]
        w: f64,
        #[serde(default = "default_right")]
        r: f64,
        #[serde(default = "default_left")]
        l: f64,
        #[serde(default = "default_depth")]
        depth: usize,
    },
    BFamily {
        b: f64,
        #[serde(default = "default_w")]
        w: f64,
        #[serde(default = "default_right")]
        r: f64,
        #[serde(default = "default_left")]
        l: f64,
        #[serde(default = "default_depth")]
        depth: usize,
    },
    Geometric {
        g: f64,
        #[serde(default = "default_w")]
        w: f64,
        #[serde(default = "default_right")]
        r: f64,
        #[serde(default = "default_left")]
        l: f64,
        #[serde(default = "default_depth")]
        depth: usize,
    },
    Table {
        #[serde(rename = "J")]
        j: Vec<f64>,
        tail: TailRule,
        #[serde(default = "default_w")]
        w: f64,
        #[serde(default = "default_right")]
        r: f64,
        #[serde(default = "default_left")]
        l: f64,
        #[serde(default = "default_depth")]
        depth: usize,
    },
}

impl PotentialFile {
    pub fn build(&self) -> Result<PotentialSpec> {
        let (spec, w, r, l, depth) = match self {
            PotentialFile::Constant { w, r, l, depth } => {
                (PotentialSpec::constant(), *w, *r, *l, *depth)
            }
            PotentialFile::BFamily { b, w, r, l, depth } => {
                (PotentialSpec::bfamily(*b)?, *w, *r, *l, *depth)
            }
            PotentialFile::Geometric { g, w, r, l, depth } => {
                (PotentialSpec::geometric(*g)?, *w, *r, *l, *depth)
            }
            PotentialFile::Table {
                j,
                tail,
                w,
                r,
                l,
                depth,
            } => (
                PotentialSpec::from_table(j.clone(), *tail)?,
                *w,
                *r,
                *l,
                *depth,
            ),
        };
        spec.with_depth(depth)?.with_w(w)?.with_asymmetry(r, l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn boltzmann_factors_from_table() {
        let y = boltzmann_from_potential(&[0.0, 0.0, 0.0]);
        assert_eq!(y, vec![0.0, 1.0, 1.0, 1.0]);
        let y = boltzmann_from_potential(&[1.0f64.ln(), 2.0f64.ln(), 3.0f64.ln()]);
        assert_relative_eq!(y[2], 0.5, max_relative = 1e-15);
        assert_relative_eq!(y[3], 1.0 / 3.0, max_relative = 1e-15);
        let y = boltzmann_from_potential(&[f64::INFINITY]);
        assert_eq!(y[1], 0.0);
    }

    #[test]
    fn constant_potential_rates_are_flat() {
        let spec = PotentialSpec::constant();
        let w = spec.jump_rates(10).unwrap();
        assert_eq!(w[0], 0.0);
        for n in 1..=10 {
            assert_relative_eq!(w[n], 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn log_distance_potential_rates() {
        // J(r) = ln r gives w_n = (n+1)/n.
        let j: Vec<f64> = (1..=64).map(|r| (r as f64).ln()).collect();
        let spec = PotentialSpec::from_table(j, TailRule::Constant).unwrap();
        for n in 1..=50usize {
            assert_relative_eq!(
                spec.jump_rate(n),
                (n as f64 + 1.0) / n as f64,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn bfamily_rates_match_the_rule() {
        let spec = PotentialSpec::bfamily(4.0).unwrap();
        assert_eq!(spec.zrp_rate(0), 0.0);
        assert_relative_eq!(spec.zrp_rate(1), 5.0, max_relative = 1e-14);
        assert_relative_eq!(spec.zrp_rate(2), 3.0, max_relative = 1e-14);
        assert_relative_eq!(spec.zrp_rate(3), 7.0 / 3.0, max_relative = 1e-14);
        // y_2 = y_1 / g_1 = 1/5
        assert_relative_eq!(spec.y(2), 0.2, max_relative = 1e-14);
        // Reconstruction holds deep into the table.
        for k in 1..=1000usize {
            assert_relative_eq!(
                spec.zrp_rate(k),
                1.0 + 4.0 / k as f64,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn bfamily_zero_is_constant() {
        let spec = PotentialSpec::bfamily(0.0).unwrap();
        for k in 1..=32 {
            assert_relative_eq!(spec.zrp_rate(k), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn rates_and_zrp_rates_are_proportional() {
        let spec = PotentialSpec::bfamily(2.5).unwrap().with_w(3.0).unwrap();
        let w = spec.jump_rates(32).unwrap();
        let g = spec.zrp_rates(32).unwrap();
        for n in 0..=32 {
            assert_relative_eq!(w[n], 3.0 * g[n], max_relative = 1e-14);
        }
    }

    #[test]
    fn gauge_shift_leaves_rates_unchanged() {
        let j: Vec<f64> = (1..=32).map(|r| 0.3 * (r as f64).sqrt()).collect();
        let shifted: Vec<f64> = j.iter().map(|v| v + 1.7).collect();
        let a = PotentialSpec::from_table(j, TailRule::Constant).unwrap();
        let b = PotentialSpec::from_table(shifted, TailRule::Constant).unwrap();
        for n in 1..=30 {
            assert_relative_eq!(a.jump_rate(n), b.jump_rate(n), max_relative = 1e-12);
        }
    }

    #[test]
    fn infinite_potential_is_rejected_by_rate_ops() {
        let spec =
            PotentialSpec::from_table(vec![0.0, f64::INFINITY, 0.0], TailRule::Constant).unwrap();
        assert!(matches!(
            spec.jump_rates(4),
            Err(Error::InfinitePotential { r: 2 })
        ));
    }

    #[test]
    fn geometric_family_has_constant_rates() {
        let spec = PotentialSpec::geometric(2.0).unwrap();
        for k in 1..=64 {
            assert_relative_eq!(spec.zrp_rate(k), 2.0, max_relative = 1e-13);
        }
        assert_eq!(spec.radius_of_convergence(), 2.0);
    }

    #[test]
    fn radius_estimate_agrees_with_exact_value() {
        for spec in [
            PotentialSpec::constant(),
            PotentialSpec::bfamily(4.0).unwrap(),
            PotentialSpec::geometric(2.0).unwrap(),
        ] {
            assert_relative_eq!(
                spec.estimate_radius_by_ratio_test(),
                spec.radius_of_convergence(),
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn rule_based_rates_agree_with_the_tables() {
        let specs = [
            PotentialSpec::constant(),
            PotentialSpec::bfamily(3.0).unwrap(),
            PotentialSpec::geometric(2.0).unwrap(),
            PotentialSpec::from_table(vec![0.2, 0.9, 1.1], TailRule::BFamily(2.0)).unwrap(),
            PotentialSpec::from_table(vec![0.2, 0.9, 1.1], TailRule::Constant).unwrap(),
        ];
        for spec in &specs {
            for k in 1..=64usize {
                assert_relative_eq!(
                    spec.zrp_rate_by_rule(k),
                    spec.zrp_rate(k),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn summability_report_flags_nothing_for_bounded_families() {
        let spec = PotentialSpec::bfamily(4.0).unwrap();
        let report = spec.summability_report(10_000).unwrap();
        assert_relative_eq!(report.sup_ratio, 5.0, max_relative = 1e-12);
        assert_eq!(report.attained_at, 1);
        // Largest increment of g_k = 1 + 4/k is g_1 -> g_2.
        assert_relative_eq!(report.sup_rate_step, 2.0, max_relative = 1e-12);
        assert!(!report.increasing_tail);
    }

    #[test]
    fn potential_file_roundtrip() {
        let text = r#"{"family":"bfamily","b":4.0,"depth":4096,"w":1.0,"r":1.0,"l":0.0}"#;
        let file: PotentialFile = serde_json::from_str(text).unwrap();
        let spec = file.build().unwrap();
        assert_eq!(spec.depth(), 4096);
        assert_relative_eq!(spec.zrp_rate(2), 3.0, max_relative = 1e-14);

        let text = r#"{"family":"table","J":[0.0,0.7],"tail":"constant"}"#;
        let spec: PotentialSpec = serde_json::from_str::<PotentialFile>(text)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(spec.asymmetry().right, 1.0);
        assert_eq!(spec.asymmetry().left, 0.0);

        let text = r#"{"family":"table","J":[0.1],"tail":{"bfamily":3.0},"w":2.0}"#;
        let spec = serde_json::from_str::<PotentialFile>(text)
            .unwrap()
            .build()
            .unwrap();
        assert_relative_eq!(spec.zrp_rate(5), 1.0 + 3.0 / 5.0, max_relative = 1e-13);
        assert_eq!(spec.w(), 2.0);
    }

    #[test]
    fn depth_guard_reports_needed_depth() {
        let spec = PotentialSpec::constant().with_depth(16).unwrap();
        assert!(matches!(
            spec.require_depth(17),
            Err(Error::DepthExceeded {
                needed: 17,
                depth: 16
            })
        ));
    }
}
