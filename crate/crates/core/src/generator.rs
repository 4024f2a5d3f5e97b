//! Exact finite-state machinery: intensity matrices of the headway exclusion
//! process on the torus and of the totally asymmetric process on a window of
//! the line, stationary-distribution solving, balance residuals and the
//! reflection condition on the rates.

use nalgebra::{DMatrix, DVector};

use crate::combinadics;
use crate::error::{Error, Result};
use crate::measures::{MeasureTable, Space};
use crate::potential::PotentialSpec;

/// Sparse intensity matrix (Q-matrix) of a finite continuous-time Markov
/// chain. Off-diagonal rates are stored per row; the diagonal carries the
/// negated total exit rate, including transitions that leave a truncated
/// state space (such rows are flagged as boundary rows).
#[derive(Debug, Clone)]
pub struct IntensityMatrix {
    dim: usize,
    offdiag: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    boundary: Vec<bool>,
}

impl IntensityMatrix {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            offdiag: vec![Vec::new(); dim],
            diag: vec![0.0; dim],
            boundary: vec![false; dim],
        }
    }

    /// Adds a transition `from -> to` with the given rate; the diagonal
    /// absorbs the exit rate.
    fn add_transition(&mut self, from: usize, to: usize, rate: f64) {
        debug_assert!(from != to && rate >= 0.0);
        if rate == 0.0 {
            return;
        }
        match self.offdiag[from].iter_mut().find(|(c, _)| *c == to) {
            Some((_, r)) => *r += rate,
            None => self.offdiag[from].push((to, rate)),
        }
        self.diag[from] -= rate;
    }

    /// Accounts for a transition that leaves the state space: the exit rate
    /// is kept on the diagonal and the row is flagged.
    fn add_escaping_rate(&mut self, from: usize, rate: f64) {
        if rate > 0.0 {
            self.diag[from] -= rate;
            self.boundary[from] = true;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self, row: usize) -> f64 {
        self.diag[row]
    }

    /// Off-diagonal entries of a row.
    pub fn row(&self, row: usize) -> &[(usize, f64)] {
        &self.offdiag[row]
    }

    /// Rate `from -> to` (zero when absent).
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return self.diag[from];
        }
        self.offdiag[from]
            .iter()
            .find(|(c, _)| *c == to)
            .map_or(0.0, |(_, r)| *r)
    }

    /// Whether the row has transitions leaving the (truncated) state space.
    pub fn is_boundary_row(&self, row: usize) -> bool {
        self.boundary[row]
    }

    /// Row sum; zero for interior rows of a conservative generator.
    pub fn row_sum(&self, row: usize) -> f64 {
        self.diag[row] + self.offdiag[row].iter().map(|(_, r)| r).sum::<f64>()
    }

    /// Left action `mu Q`.
    pub fn mul_left(&self, mu: &[f64]) -> Vec<f64> {
        assert_eq!(mu.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for (row, &m) in mu.iter().enumerate() {
            out[row] += m * self.diag[row];
            for &(col, rate) in &self.offdiag[row] {
                out[col] += m * rate;
            }
        }
        out
    }

    /// Dense copy (column-major), for direct linear algebra.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for row in 0..self.dim {
            m[(row, row)] = self.diag[row];
            for &(col, rate) in &self.offdiag[row] {
                m[(row, col)] += rate;
            }
        }
        m
    }

    /// All entries as (row, col, rate) triplets, diagonal included, for
    /// external verification.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for row in 0..self.dim {
            out.push((row, row, self.diag[row]));
            let mut entries = self.offdiag[row].clone();
            entries.sort_by_key(|(c, _)| *c);
            for (col, rate) in entries {
                out.push((row, col, rate));
            }
        }
        out
    }

    /// Coordinate triplet text: one "row col rate" line per entry.
    pub fn triplets_text(&self) -> String {
        let mut out = String::new();
        for (row, col, rate) in self.triplets() {
            out.push_str(&format!("{row} {col} {rate:.17e}\n"));
        }
        out
    }

    /// Strong connectivity of the transition graph (forward and backward
    /// reachability from state 0).
    fn is_irreducible(&self) -> bool {
        if self.dim == 0 {
            return false;
        }
        if self.dim == 1 {
            return true;
        }
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); self.dim];
        for row in 0..self.dim {
            for &(col, _) in &self.offdiag[row] {
                reverse[col].push(row);
            }
        }
        let forward_ok = {
            let mut seen = vec![false; self.dim];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(s) = stack.pop() {
                for &(c, _) in &self.offdiag[s] {
                    if !seen[c] {
                        seen[c] = true;
                        stack.push(c);
                    }
                }
            }
            seen.iter().all(|&s| s)
        };
        let backward_ok = {
            let mut seen = vec![false; self.dim];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(s) = stack.pop() {
                for &c in &reverse[s] {
                    if !seen[c] {
                        seen[c] = true;
                        stack.push(c);
                    }
                }
            }
            seen.iter().all(|&s| s)
        };
        forward_ok && backward_ok
    }
}

const MAX_ENUMERATED_STATES: u64 = 1 << 20;

/// Number of `n`-subsets of `l` sites, refusing spaces too large to build
/// explicitly.
fn enumerable_dimension(l: usize, n: usize) -> Result<usize> {
    combinadics::binomial_checked(l, n)
        .filter(|&d| d <= MAX_ENUMERATED_STATES)
        .map(|d| d as usize)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "state space C({l}, {n}) exceeds the {MAX_ENUMERATED_STATES}-state \
                 enumeration limit"
            ))
        })
}

/// Canonical torus states: `C(L, N)` configurations indexed combinadically
/// by their occupied-site sets.
#[derive(Debug, Clone, Copy)]
pub struct TorusStates {
    pub l: usize,
    pub n: usize,
}

impl TorusStates {
    pub fn count(&self) -> u64 {
        combinadics::binomial(self.l, self.n)
    }

    pub fn positions(&self, index: usize) -> Vec<usize> {
        combinadics::unrank(self.n, index as u64)
    }

    pub fn index(&self, positions: &[usize]) -> usize {
        combinadics::rank(positions) as usize
    }
}

/// Builds the generator of the headway exclusion process with `n` particles
/// on the torus of `l` sites, with jump rates and bias taken from `spec`:
/// a particle with right headway `m >= 1` jumps right at rate `r w_m`, one
/// with left headway `m >= 1` jumps left at rate `l w_m`.
pub fn build_hep_generator(l: usize, n: usize, spec: &PotentialSpec) -> Result<IntensityMatrix> {
    let rates = spec.jump_rates(l.saturating_sub(1))?;
    let asym = spec.asymmetry();
    build_hep_generator_from_rates(l, n, &rates, asym.right, asym.left)
}

/// Same as [`build_hep_generator`] with explicit rate table `rates[m] = w_m`
/// (used to probe rate families that do not come from a potential).
pub fn build_hep_generator_from_rates(
    l: usize,
    n: usize,
    rates: &[f64],
    right: f64,
    left: f64,
) -> Result<IntensityMatrix> {
    if n == 0 || n >= l {
        return Err(Error::DegenerateSpace {
            l,
            n,
            reason: "dynamics needs 1 <= N <= L-1".into(),
        });
    }
    if rates.len() < l {
        return Err(Error::InvalidArgument(format!(
            "rate table of length {} cannot serve a torus of {l} sites",
            rates.len()
        )));
    }
    let dim = enumerable_dimension(l, n)?;
    let states = TorusStates { l, n };
    let mut q = IntensityMatrix::new(dim);
    let mut target = vec![0usize; n];
    for idx in 0..dim {
        let pos = states.positions(idx);
        for i in 0..n {
            let gap_right = (pos[(i + 1) % n] + l - pos[i] - 1) % l;
            let gap_right = if n == 1 { l - 1 } else { gap_right };
            if gap_right >= 1 && right > 0.0 {
                target.copy_from_slice(&pos);
                target[i] = (pos[i] + 1) % l;
                target.sort_unstable();
                q.add_transition(idx, states.index(&target), right * rates[gap_right]);
            }
            let gap_left = (pos[i] + l - pos[(i + n - 1) % n] - 1) % l;
            let gap_left = if n == 1 { l - 1 } else { gap_left };
            if gap_left >= 1 && left > 0.0 {
                target.copy_from_slice(&pos);
                target[i] = (pos[i] + l - 1) % l;
                target.sort_unstable();
                q.add_transition(idx, states.index(&target), left * rates[gap_left]);
            }
        }
    }
    Ok(q)
}

/// States of `n` particles on the integer window `[a, b]`: strictly
/// increasing positions, indexed combinadically by their offsets.
#[derive(Debug, Clone, Copy)]
pub struct LineStates {
    pub a: i64,
    pub b: i64,
    pub n: usize,
}

impl LineStates {
    pub fn width(&self) -> usize {
        (self.b - self.a + 1) as usize
    }

    pub fn count(&self) -> u64 {
        combinadics::binomial(self.width(), self.n)
    }

    pub fn positions(&self, index: usize) -> Vec<i64> {
        combinadics::unrank(self.n, index as u64)
            .into_iter()
            .map(|o| self.a + o as i64)
            .collect()
    }

    pub fn index(&self, positions: &[i64]) -> usize {
        let offsets: Vec<usize> = positions.iter().map(|&x| (x - self.a) as usize).collect();
        combinadics::rank(&offsets) as usize
    }

    pub fn contains(&self, positions: &[i64]) -> bool {
        positions.iter().all(|&x| x >= self.a && x <= self.b)
    }
}

/// Builds the generator of the totally asymmetric process with `n` particles
/// restricted to the window `[a, b]` of the line. Particle `i < n` jumps
/// right at rate `w g_{gap}`; the rightmost particle jumps at rate `w`
/// (infinite headway). Jumps leaving the window are kept on the diagonal and
/// flag the row as a boundary row rather than being silently dropped.
pub fn build_tahep_line_generator(
    n: usize,
    window: (i64, i64),
    spec: &PotentialSpec,
) -> Result<(IntensityMatrix, LineStates)> {
    let (a, b) = window;
    if b < a || ((b - a + 1) as usize) < n {
        return Err(Error::WindowTooSmall {
            a,
            b,
            reason: format!("cannot hold {n} particles"),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "line generator needs at least one particle".into(),
        ));
    }
    let states = LineStates { a, b, n };
    let width = states.width();
    let w = spec.w();
    let g = spec.zrp_rates(width)?;
    let dim = enumerable_dimension(width, n)?;
    let mut q = IntensityMatrix::new(dim);
    for idx in 0..dim {
        let pos = states.positions(idx);
        for i in 0..n {
            let rate = if i + 1 < n {
                let gap = (pos[i + 1] - pos[i] - 1) as usize;
                w * g[gap]
            } else {
                w
            };
            if rate == 0.0 {
                continue;
            }
            let target_site = pos[i] + 1;
            if target_site > b {
                q.add_escaping_rate(idx, rate);
                continue;
            }
            let mut target = pos.clone();
            target[i] = target_site;
            q.add_transition(idx, states.index(&target), rate);
        }
    }
    Ok((q, states))
}

const DENSE_SOLVE_LIMIT: usize = 5000;

/// Unique stationary distribution of an irreducible intensity matrix, via a
/// dense LU solve of the balance equations with the normalization row
/// appended (power iteration beyond the dense size limit). The result is
/// checked to satisfy the balance equations to 1e-12.
pub fn stationary_distribution(q: &IntensityMatrix) -> Result<MeasureTable> {
    let dim = q.dim();
    if dim == 0 {
        return Err(Error::NonUniqueStationary("empty state space".into()));
    }
    if !q.is_irreducible() {
        return Err(Error::NonUniqueStationary(
            "transition graph is not strongly connected".into(),
        ));
    }
    let mut mu = if dim <= DENSE_SOLVE_LIMIT {
        solve_dense(q)?
    } else {
        solve_power(q)?
    };

    for p in &mut mu {
        *p = p.max(0.0);
    }
    let total: f64 = mu.iter().sum();
    for p in &mut mu {
        *p /= total;
    }
    let residual = balance_residual_slice(&mu, q);
    if residual > 1e-12 {
        return Err(Error::NonUniqueStationary(format!(
            "balance residual {residual:.3e} exceeds 1e-12"
        )));
    }
    Ok(MeasureTable::from_probabilities(
        Space::Custom { states: dim },
        &mu,
    ))
}

fn solve_dense(q: &IntensityMatrix) -> Result<Vec<f64>> {
    let dim = q.dim();
    // A = Q^T with the last row replaced by the normalization sum(mu) = 1.
    let mut a = q.to_dense().transpose();
    for col in 0..dim {
        a[(dim - 1, col)] = 1.0;
    }
    let mut rhs = DVector::zeros(dim);
    rhs[dim - 1] = 1.0;
    let lu = a.clone().lu();
    let mut mu = lu
        .solve(&rhs)
        .ok_or_else(|| Error::NonUniqueStationary("singular balance system".into()))?;
    // One step of iterative refinement tightens the residual to solver
    // precision.
    let defect = &rhs - &a * &mu;
    if let Some(correction) = lu.solve(&defect) {
        mu += correction;
    }
    if mu.iter().any(|&p| p < -1e-8) {
        return Err(Error::NonUniqueStationary(
            "solution has negative components".into(),
        ));
    }
    Ok(mu.iter().copied().collect())
}

fn solve_power(q: &IntensityMatrix) -> Result<Vec<f64>> {
    let dim = q.dim();
    let theta = q
        .diag
        .iter()
        .fold(0.0f64, |acc, &d| acc.max(d.abs()))
        .max(1e-300)
        * 1.05;
    let mut mu = vec![1.0 / dim as f64; dim];
    for iter in 0..2_000_000usize {
        let flow = q.mul_left(&mu);
        if iter % 64 == 0 {
            let res = flow.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            if res <= 0.5e-12 {
                return Ok(mu);
            }
        }
        for (m, f) in mu.iter_mut().zip(&flow) {
            *m += f / theta;
        }
        let total: f64 = mu.iter().sum();
        for m in &mut mu {
            *m /= total;
        }
    }
    Err(Error::NonUniqueStationary(
        "power iteration did not converge".into(),
    ))
}

fn balance_residual_slice(mu: &[f64], q: &IntensityMatrix) -> f64 {
    q.mul_left(mu).iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}

/// General balance residual `max_y |sum_x mu(x) c(x->y) - mu(y) sum_z
/// c(y->z)|` of a measure against a generator.
pub fn balance_residual(mu: &MeasureTable, q: &IntensityMatrix) -> f64 {
    balance_residual_slice(&mu.probabilities(), q)
}

/// Maximum relative violation of the reflection condition
/// `w_r y_{r+1} / y_r = w_{L-1-r} y_{L-r} / y_{L-r-1}` over `1 <= r <= L-2`,
/// for an explicit rate table.
pub fn reflection_violation_with_rates(l: usize, rates: &[f64], spec: &PotentialSpec) -> Result<f64> {
    if l < 3 {
        return Err(Error::InvalidArgument(format!(
            "reflection condition needs L >= 3, got {l}"
        )));
    }
    if rates.len() < l - 1 {
        return Err(Error::InvalidArgument(format!(
            "need rates up to w_{}, got {}",
            l - 2,
            rates.len()
        )));
    }
    spec.require_finite(l)?;
    let mut worst = 0.0f64;
    for r in 1..=l - 2 {
        let lhs = rates[r] * (spec.log_y(r + 1) - spec.log_y(r)).exp();
        let rhs = rates[l - 1 - r] * (spec.log_y(l - r) - spec.log_y(l - r - 1)).exp();
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(worst)
}

/// Reflection-condition violation for the rates derived from the potential
/// itself; zero for every `L` by construction of the rate formula.
pub fn reflection_condition_check(l: usize, spec: &PotentialSpec) -> Result<f64> {
    let rates = spec.jump_rates(l)?;
    reflection_violation_with_rates(l, &rates, spec)
}

/// Coefficient matrix of the two-particle invariance conditions on a torus of
/// `l` sites: row `r` (for `r = 1..L-1`) expresses the balance equation of
/// the configuration with inter-particle distances `(r, L-r)` in the
/// unknowns `w_1, .., w_{L-1}` (column `k` holds the coefficient of
/// `w_{k+1}`).
pub fn two_particle_invariance_system(l: usize, spec: &PotentialSpec) -> Result<DMatrix<f64>> {
    if l < 3 {
        return Err(Error::InvalidArgument(format!(
            "two-particle system needs L >= 3, got {l}"
        )));
    }
    spec.require_finite(l)?;
    let y = |r: usize| -> f64 {
        if r > l {
            0.0
        } else {
            spec.log_y(r).exp()
        }
    };
    let cols = l - 1;
    let mut m = DMatrix::zeros(l - 1, cols);
    let mut add = |row: usize, w_index: usize, coeff: f64| {
        if w_index >= 1 && w_index <= cols {
            m[(row, w_index - 1)] += coeff;
        }
    };
    for r in 1..=l - 1 {
        let row = r - 1;
        add(row, r, y(r + 1) * y(l - r - 1));
        add(row, r - 1, -y(r) * y(l - r));
        add(row, l - r, y(r - 1) * y(l - r + 1));
        add(row, l - r - 1, -y(r) * y(l - r));
    }
    Ok(m)
}

/// Orthonormal basis of the (right) null space of a matrix, by SVD with a
/// relative singular-value cutoff.
pub fn nullspace_basis(m: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let cols = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let s_max = svd
        .singular_values
        .iter()
        .fold(0.0f64, |a, &s| a.max(s))
        .max(1e-300);
    let mut basis = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= rel_tol * s_max {
            basis.push(v_t.row(i).transpose());
        }
    }
    // Singular vectors missing from a thin SVD (rows of V^T beyond the rank)
    // correspond to exactly-zero singular values.
    for i in svd.singular_values.len()..cols.min(v_t.nrows()) {
        basis.push(v_t.row(i).transpose());
    }
    basis
}
