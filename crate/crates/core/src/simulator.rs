//! Event-driven kinetic Monte Carlo for the headway exclusion process on the
//! torus and the totally asymmetric process on the line.
//!
//! The exact continuous-time chain is simulated: waiting times are
//! exponential in the total rate, events are drawn proportionally to the
//! per-particle rates through a binary indexed tree (only three particles
//! change their rates per jump), and time-averaged observables use exact
//! sojourn weighting. Replicas are independent: replica `i` runs on a
//! counter-based generator seeded with `seed ^ i`, which makes every run
//! bit-reproducible regardless of the thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{CoordinateConfiguration, Lattice, TorusConfiguration};
use crate::potential::PotentialSpec;

/// Which observables a run records.
#[derive(Debug, Clone, Default)]
pub struct Observables {
    pub current: bool,
    pub headway_hist: bool,
    pub leftmost: bool,
    /// Sorted times at which configurations are recorded.
    pub snapshot_times: Vec<f64>,
}

/// Geometry of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Torus { l: usize, n: usize },
    Line { n: usize, x_star: i64 },
}

/// Full configuration of a simulation run.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub geometry: Geometry,
    pub t_end: f64,
    /// Observables ignore `[0, t_burn)`; defaults to `0.1 * t_end`.
    pub t_burn: f64,
    pub seed: u64,
    pub replicas: usize,
    pub observables: Observables,
}

impl SimulationConfig {
    pub fn new(geometry: Geometry, t_end: f64, seed: u64) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "simulation time must be positive, got {t_end}"
            )));
        }
        Ok(Self {
            geometry,
            t_end,
            t_burn: 0.1 * t_end,
            seed,
            replicas: 1,
            observables: Observables {
                current: true,
                headway_hist: true,
                leftmost: true,
                snapshot_times: Vec::new(),
            },
        })
    }

    pub fn with_burn_in(mut self, t_burn: f64) -> Result<Self> {
        if !(0.0..self.t_end).contains(&t_burn) {
            return Err(Error::InvalidArgument(format!(
                "burn-in {t_burn} outside [0, {})",
                self.t_end
            )));
        }
        self.t_burn = t_burn;
        Ok(self)
    }

    pub fn with_replicas(mut self, replicas: usize) -> Result<Self> {
        if replicas == 0 {
            return Err(Error::InvalidArgument("need at least one replica".into()));
        }
        self.replicas = replicas;
        Ok(self)
    }

    pub fn with_observables(mut self, observables: Observables) -> Self {
        self.observables = observables;
        self
    }
}

/// One recorded configuration.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub replica: usize,
    pub time: f64,
    /// Sorted particle positions.
    pub positions: Vec<i64>,
}

impl Snapshot {
    /// Textual configuration literal: occupation bits "0110.." on the torus,
    /// coordinate list "x1,x2,.." on the line.
    pub fn literal(&self, geometry: Geometry) -> String {
        match geometry {
            Geometry::Torus { l, .. } => {
                let mut occ = vec![false; l];
                for &p in &self.positions {
                    occ[p as usize] = true;
                }
                TorusConfiguration::new(occ)
                    .expect("snapshot positions fit the torus")
                    .to_string()
            }
            Geometry::Line { .. } => CoordinateConfiguration::line(self.positions.clone())
                .expect("snapshot positions are increasing")
                .to_string(),
        }
    }
}

/// Aggregated sample statistics; merging over replicas is associative and
/// performed in replica order.
#[derive(Debug, Clone)]
pub struct SampleStats {
    pub geometry: Geometry,
    pub replicas: usize,
    /// Total observation time (past burn-in), summed over replicas.
    pub observed_time: f64,
    pub jumps_right: u64,
    pub jumps_left: u64,
    pub events_total: u64,
    /// `headway_time[n]`: particle-weighted time spent at headway `n`.
    pub headway_time: Vec<f64>,
    /// Per-replica current estimates (torus runs with the `current` flag).
    pub per_replica_current: Vec<f64>,
    /// Final position of the leftmost particle, per replica (line runs).
    pub leftmost_final: Vec<i64>,
    /// Final inter-particle gaps, per replica (line runs).
    pub final_gaps: Vec<Vec<usize>>,
    pub snapshots: Vec<Snapshot>,
    /// Some replica reached a state with zero total rate (e.g. the fully
    /// packed torus); it idled until `t_end`.
    pub zero_rate_halt: bool,
}

impl SampleStats {
    fn empty(geometry: Geometry, headway_bins: usize) -> Self {
        Self {
            geometry,
            replicas: 0,
            observed_time: 0.0,
            jumps_right: 0,
            jumps_left: 0,
            events_total: 0,
            headway_time: vec![0.0; headway_bins],
            per_replica_current: Vec::new(),
            leftmost_final: Vec::new(),
            final_gaps: Vec::new(),
            snapshots: Vec::new(),
            zero_rate_halt: false,
        }
    }

    fn absorb(&mut self, other: ReplicaOutcome) {
        self.replicas += 1;
        self.observed_time += other.observed_time;
        self.jumps_right += other.jumps_right;
        self.jumps_left += other.jumps_left;
        self.events_total += other.events;
        for (acc, v) in self.headway_time.iter_mut().zip(&other.headway_time) {
            *acc += v;
        }
        if let Some(current) = other.current {
            self.per_replica_current.push(current);
        }
        if let Some(leftmost) = other.leftmost_final {
            self.leftmost_final.push(leftmost);
        }
        if let Some(gaps) = other.final_gaps {
            self.final_gaps.push(gaps);
        }
        self.snapshots.extend(other.snapshots);
        self.zero_rate_halt |= other.zero_rate_halt;
    }

    /// Net rightward bond crossings per site and unit time:
    /// `(right - left) / (L * t_observed)`.
    pub fn empirical_current(&self) -> f64 {
        let Geometry::Torus { l, .. } = self.geometry else {
            return f64::NAN;
        };
        if self.observed_time <= 0.0 {
            return f64::NAN;
        }
        (self.jumps_right as f64 - self.jumps_left as f64) / (l as f64 * self.observed_time)
    }

    /// Time-averaged fraction of particles at each headway.
    pub fn headway_histogram(&self) -> Vec<f64> {
        let n = match self.geometry {
            Geometry::Torus { n, .. } => n,
            Geometry::Line { n, .. } => n,
        };
        let norm = self.observed_time * n as f64;
        if norm <= 0.0 {
            return vec![0.0; self.headway_time.len()];
        }
        self.headway_time.iter().map(|&t| t / norm).collect()
    }
}

/// Fenwick tree over per-particle rates: O(log N) updates and proportional
/// selection.
struct RateTree {
    tree: Vec<f64>,
    values: Vec<f64>,
    total: f64,
}

impl RateTree {
    fn new(values: Vec<f64>) -> Self {
        let n = values.len();
        let mut t = Self {
            tree: vec![0.0; n + 1],
            values: vec![0.0; n],
            total: 0.0,
        };
        for (i, &v) in values.iter().enumerate() {
            t.set(i, v);
        }
        t
    }

    fn set(&mut self, i: usize, v: f64) {
        let delta = v - self.values[i];
        if delta == 0.0 {
            return;
        }
        self.values[i] = v;
        self.total += delta;
        let mut idx = i + 1;
        while idx < self.tree.len() {
            self.tree[idx] += delta;
            idx += idx & idx.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        self.total
    }

    /// Index whose prefix interval contains `target` (in `[0, total)`).
    fn select(&self, target: f64) -> usize {
        let n = self.values.len();
        let mut idx = 0usize;
        let mut rem = target;
        let mut bit = n.next_power_of_two();
        while bit > 0 {
            let next = idx + bit;
            if next <= n && self.tree[next] <= rem {
                idx = next;
                rem -= self.tree[next];
            }
            bit >>= 1;
        }
        // Floating-point slack can push past the end or onto a zero-rate
        // slot; back off to the nearest active one.
        let mut idx = idx.min(n - 1);
        while idx > 0 && self.values[idx] == 0.0 {
            idx -= 1;
        }
        idx
    }
}

struct ReplicaOutcome {
    observed_time: f64,
    jumps_right: u64,
    jumps_left: u64,
    events: u64,
    headway_time: Vec<f64>,
    current: Option<f64>,
    leftmost_final: Option<i64>,
    final_gaps: Option<Vec<usize>>,
    snapshots: Vec<Snapshot>,
    zero_rate_halt: bool,
}

/// Shared per-run tables, computed once and borrowed by every replica.
struct RunTables {
    /// `rate[m] = w_m` (torus: up to `L-1`; line: up to the potential depth).
    rates: Vec<f64>,
    w_inf: f64,
    right_bias: f64,
    left_bias: f64,
}

fn torus_replica(
    l: usize,
    n: usize,
    tables: &RunTables,
    init: &[i64],
    cfg: &SimulationConfig,
    replica: usize,
    rng: &mut ChaCha8Rng,
) -> ReplicaOutcome {
    let mut pos: Vec<i64> = init.to_vec();
    let mut gaps: Vec<usize> = (0..n)
        .map(|i| ((pos[(i + 1) % n] - pos[i] - 1).rem_euclid(l as i64)) as usize)
        .collect();
    if n == 1 {
        gaps[0] = l - 1;
    }
    let mut counts = vec![0.0f64; l];
    for &g in &gaps {
        counts[g] += 1.0;
    }
    let rate_of = |gaps: &[usize], i: usize, right: bool| -> f64 {
        if right {
            tables.right_bias * tables.rates[gaps[i]]
        } else {
            tables.left_bias * tables.rates[gaps[(i + n - 1) % n]]
        }
    };
    let mut leaves = vec![0.0f64; 2 * n];
    for i in 0..n {
        leaves[i] = rate_of(&gaps, i, true);
        leaves[n + i] = rate_of(&gaps, i, false);
    }
    let mut tree = RateTree::new(leaves);

    let mut out = ReplicaOutcome {
        observed_time: cfg.t_end - cfg.t_burn,
        jumps_right: 0,
        jumps_left: 0,
        events: 0,
        headway_time: vec![0.0; l],
        current: None,
        leftmost_final: None,
        final_gaps: None,
        snapshots: Vec::new(),
        zero_rate_halt: false,
    };
    let mut snap_iter = cfg.observables.snapshot_times.iter().copied().peekable();
    let record_snapshots_until = |t_next: f64,
                                      pos: &[i64],
                                      snap_iter: &mut std::iter::Peekable<
        std::iter::Copied<std::slice::Iter<f64>>,
    >,
                                      out: &mut ReplicaOutcome| {
        while let Some(&ts) = snap_iter.peek() {
            if ts >= t_next {
                break;
            }
            let mut sorted = pos.to_vec();
            sorted.sort_unstable();
            out.snapshots.push(Snapshot {
                replica,
                time: ts,
                positions: sorted,
            });
            snap_iter.next();
        }
    };

    let mut t = 0.0f64;
    loop {
        let total = tree.total();
        if total <= 0.0 {
            out.zero_rate_halt = true;
            record_snapshots_until(cfg.t_end, &pos, &mut snap_iter, &mut out);
            accumulate_sojourn(&mut out.headway_time, &counts, t, cfg.t_end, cfg);
            break;
        }
        let dt = -(1.0 - rng.random::<f64>()).ln() / total;
        let t_next = t + dt;
        if t_next >= cfg.t_end {
            record_snapshots_until(cfg.t_end, &pos, &mut snap_iter, &mut out);
            accumulate_sojourn(&mut out.headway_time, &counts, t, cfg.t_end, cfg);
            break;
        }
        record_snapshots_until(t_next, &pos, &mut snap_iter, &mut out);
        accumulate_sojourn(&mut out.headway_time, &counts, t, t_next, cfg);

        let event = tree.select(rng.random::<f64>() * total);
        let (i, rightward) = if event < n {
            (event, true)
        } else {
            (event - n, false)
        };
        let (shrink, grow) = if rightward {
            (i, (i + n - 1) % n)
        } else {
            ((i + n - 1) % n, i)
        };
        // For N = 1 the particle is its own neighbor: the lone gap (and the
        // headway census) is unchanged by a jump.
        if shrink != grow {
            counts[gaps[shrink]] -= 1.0;
            counts[gaps[grow]] -= 1.0;
            gaps[shrink] -= 1;
            gaps[grow] += 1;
            counts[gaps[shrink]] += 1.0;
            counts[gaps[grow]] += 1.0;
        }
        pos[i] = (pos[i] + if rightward { 1 } else { -1 }).rem_euclid(l as i64);
        debug_assert_eq!(gaps.iter().sum::<usize>(), l - n);

        tree.set(i, rate_of(&gaps, i, true));
        tree.set((i + n - 1) % n, rate_of(&gaps, (i + n - 1) % n, true));
        tree.set(n + i, rate_of(&gaps, i, false));
        tree.set(n + (i + 1) % n, rate_of(&gaps, (i + 1) % n, false));

        out.events += 1;
        if t_next >= cfg.t_burn {
            if rightward {
                out.jumps_right += 1;
            } else {
                out.jumps_left += 1;
            }
        }
        t = t_next;
    }
    if cfg.observables.current {
        let span = cfg.t_end - cfg.t_burn;
        out.current = Some(
            (out.jumps_right as f64 - out.jumps_left as f64) / (l as f64 * span),
        );
    }
    out
}

fn accumulate_sojourn(
    headway_time: &mut [f64],
    counts: &[f64],
    t_from: f64,
    t_to: f64,
    cfg: &SimulationConfig,
) {
    let dur = t_to.min(cfg.t_end) - t_from.max(cfg.t_burn);
    if dur <= 0.0 {
        return;
    }
    for (acc, &c) in headway_time.iter_mut().zip(counts) {
        if c != 0.0 {
            *acc += c * dur;
        }
    }
}

fn line_replica(
    n: usize,
    tables: &RunTables,
    init: &[i64],
    cfg: &SimulationConfig,
    replica: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ReplicaOutcome> {
    let max_gap = tables.rates.len() - 1;
    let mut pos: Vec<i64> = init.to_vec();
    let mut gaps: Vec<usize> = pos.windows(2).map(|w| (w[1] - w[0] - 1) as usize).collect();
    for &g in &gaps {
        if g > max_gap {
            return Err(Error::DepthExceeded {
                needed: g,
                depth: max_gap,
            });
        }
    }
    let leaves: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 < n {
                tables.rates[gaps[i]]
            } else {
                tables.w_inf
            }
        })
        .collect();
    let mut tree = RateTree::new(leaves);

    let mut out = ReplicaOutcome {
        observed_time: cfg.t_end - cfg.t_burn,
        jumps_right: 0,
        jumps_left: 0,
        events: 0,
        headway_time: Vec::new(),
        current: None,
        leftmost_final: None,
        final_gaps: None,
        snapshots: Vec::new(),
        zero_rate_halt: false,
    };
    let mut snap_times = cfg.observables.snapshot_times.iter().copied().peekable();

    let mut t = 0.0f64;
    loop {
        let total = tree.total();
        if total <= 0.0 {
            out.zero_rate_halt = true;
            break;
        }
        let dt = -(1.0 - rng.random::<f64>()).ln() / total;
        let t_next = t + dt;
        while let Some(&ts) = snap_times.peek() {
            if ts >= t_next.min(cfg.t_end) {
                break;
            }
            out.snapshots.push(Snapshot {
                replica,
                time: ts,
                positions: pos.clone(),
            });
            snap_times.next();
        }
        if t_next >= cfg.t_end {
            break;
        }
        let i = tree.select(rng.random::<f64>() * total);
        pos[i] += 1;
        if i + 1 < n {
            gaps[i] -= 1;
            tree.set(i, tables.rates[gaps[i]]);
        }
        if i > 0 {
            gaps[i - 1] += 1;
            if gaps[i - 1] > max_gap {
                return Err(Error::DepthExceeded {
                    needed: gaps[i - 1],
                    depth: max_gap,
                });
            }
            tree.set(i - 1, tables.rates[gaps[i - 1]]);
        }
        debug_assert!(pos.windows(2).all(|w| w[0] < w[1]));
        out.events += 1;
        if t_next >= cfg.t_burn {
            out.jumps_right += 1;
        }
        t = t_next;
    }
    if cfg.observables.leftmost {
        out.leftmost_final = Some(pos[0]);
    }
    out.final_gaps = Some(gaps);
    Ok(out)
}

fn thread_count(replicas: usize) -> usize {
    let available = std::env::var("HEP_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1)
        });
    available.min(replicas).max(1)
}

/// Runs all replicas of a simulation, drawing the initial configuration of
/// each replica from `init`. Replica `i` uses the generator seeded with
/// `seed ^ i`; results do not depend on the thread count (capped by the
/// `HEP_THREADS` environment variable).
pub fn simulate_with_sampler<F>(
    spec: &PotentialSpec,
    cfg: &SimulationConfig,
    init: F,
) -> Result<SampleStats>
where
    F: Fn(&mut ChaCha8Rng) -> Result<CoordinateConfiguration> + Sync,
{
    if !(cfg.t_end > 0.0) || cfg.replicas == 0 || !(0.0..cfg.t_end).contains(&cfg.t_burn) {
        return Err(Error::InvalidArgument(
            "simulation needs t_end > 0, replicas >= 1, 0 <= t_burn < t_end".into(),
        ));
    }
    let mut snapshot_times = cfg.observables.snapshot_times.clone();
    snapshot_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cfg = SimulationConfig {
        observables: Observables {
            snapshot_times,
            ..cfg.observables.clone()
        },
        ..cfg.clone()
    };

    let (tables, headway_bins) = match cfg.geometry {
        Geometry::Torus { l, n } => {
            if n > l || l == 0 {
                return Err(Error::InvalidArgument(format!(
                    "torus geometry with L={l}, N={n} is invalid"
                )));
            }
            let asym = spec.asymmetry();
            (
                RunTables {
                    rates: spec.jump_rates(l.saturating_sub(1))?,
                    w_inf: 0.0,
                    right_bias: asym.right,
                    left_bias: asym.left,
                },
                l,
            )
        }
        Geometry::Line { n, .. } => {
            if n == 0 {
                return Err(Error::InvalidArgument(
                    "line geometry needs at least one particle".into(),
                ));
            }
            (
                RunTables {
                    rates: spec.jump_rates(spec.depth() - 1)?,
                    w_inf: spec.w(),
                    right_bias: 1.0,
                    left_bias: 0.0,
                },
                0,
            )
        }
    };

    let run_one = |replica: usize| -> Result<ReplicaOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ replica as u64);
        let start = init(&mut rng)?;
        match cfg.geometry {
            Geometry::Torus { l, n } => {
                if start.lattice() != Lattice::Torus(l) || start.particle_count() != n {
                    return Err(Error::InvalidArgument(
                        "initial configuration does not match the torus geometry".into(),
                    ));
                }
                if n == 0 {
                    // Nothing moves on the empty lattice.
                    return Ok(ReplicaOutcome {
                        observed_time: cfg.t_end - cfg.t_burn,
                        jumps_right: 0,
                        jumps_left: 0,
                        events: 0,
                        headway_time: vec![0.0; l],
                        current: cfg.observables.current.then_some(0.0),
                        leftmost_final: None,
                        final_gaps: None,
                        snapshots: Vec::new(),
                        zero_rate_halt: true,
                    });
                }
                Ok(torus_replica(
                    l,
                    n,
                    &tables,
                    start.positions(),
                    &cfg,
                    replica,
                    &mut rng,
                ))
            }
            Geometry::Line { n, .. } => {
                if start.lattice() != Lattice::Line || start.particle_count() != n {
                    return Err(Error::InvalidArgument(
                        "initial configuration does not match the line geometry".into(),
                    ));
                }
                line_replica(n, &tables, start.positions(), &cfg, replica, &mut rng)
            }
        }
    };

    let threads = thread_count(cfg.replicas);
    let mut outcomes: Vec<Option<Result<ReplicaOutcome>>> = Vec::new();
    outcomes.resize_with(cfg.replicas, || None);
    if threads == 1 {
        for (replica, slot) in outcomes.iter_mut().enumerate() {
            *slot = Some(run_one(replica));
        }
    } else {
        let chunks = std::sync::Mutex::new(outcomes.iter_mut().enumerate().collect::<Vec<_>>());
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let Some((replica, slot)) = chunks.lock().unwrap().pop() else {
                        break;
                    };
                    *slot = Some(run_one(replica));
                });
            }
        });
    }

    let mut stats = SampleStats::empty(cfg.geometry, headway_bins);
    for outcome in outcomes {
        stats.absorb(outcome.expect("every replica ran")?);
    }
    Ok(stats)
}

/// Runs all replicas from one fixed initial configuration.
pub fn simulate(
    spec: &PotentialSpec,
    cfg: &SimulationConfig,
    init: &CoordinateConfiguration,
) -> Result<SampleStats> {
    simulate_with_sampler(spec, cfg, |_| Ok(init.clone()))
}
