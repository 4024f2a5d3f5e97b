//! Exclusion-particle configurations on the discrete torus and on the integer
//! line, in occupation and coordinate presentation, with headway computation.
//!
//! All types are immutable values; operations return fresh configurations.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Lattice a coordinate configuration lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lattice {
    /// Discrete torus with `L` sites, `0..L`.
    Torus(usize),
    /// Integer line; positions may be any integers.
    Line,
}

/// Headway of a particle: the number of empty sites to its right neighbor.
///
/// The rightmost particle on the line has no right neighbor; its headway is
/// the dedicated `Infinite` value, never a large integer, so arithmetic on it
/// cannot happen silently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Headway {
    Finite(usize),
    Infinite,
}

impl Headway {
    pub fn finite(self) -> Option<usize> {
        match self {
            Headway::Finite(n) => Some(n),
            Headway::Infinite => None,
        }
    }
}

impl fmt::Display for Headway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Headway::Finite(n) => write!(f, "{n}"),
            Headway::Infinite => write!(f, "inf"),
        }
    }
}

/// Headways of all particles of a configuration, in label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadwaySequence {
    values: Vec<Headway>,
}

impl HeadwaySequence {
    pub fn values(&self) -> &[Headway] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sum of the finite headways.
    pub fn finite_sum(&self) -> usize {
        self.values.iter().filter_map(|h| h.finite()).sum()
    }
}

/// Configuration on the torus in occupation presentation: one bit per site.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TorusConfiguration {
    occupation: Vec<bool>,
}

impl TorusConfiguration {
    /// Wraps an occupation vector; its length is the torus size `L >= 1`.
    pub fn new(occupation: Vec<bool>) -> Result<Self> {
        if occupation.is_empty() {
            return Err(Error::InvalidConfiguration(
                "torus size must be at least 1".into(),
            ));
        }
        Ok(Self { occupation })
    }

    /// The empty lattice with `l` sites.
    pub fn empty(l: usize) -> Result<Self> {
        Self::new(vec![false; l])
    }

    /// Number of lattice sites `L`.
    pub fn size(&self) -> usize {
        self.occupation.len()
    }

    pub fn occupation(&self) -> &[bool] {
        &self.occupation
    }

    /// Occupation number at `x`, indexed modulo `L`.
    pub fn occupied(&self, x: usize) -> bool {
        self.occupation[x % self.size()]
    }

    /// Particle number: the sum of occupation numbers.
    pub fn particle_count(&self) -> usize {
        self.occupation.iter().filter(|&&o| o).count()
    }

    /// Headway of the particle at site `x`: empty sites until the next
    /// particle to the right (itself, after a full turn, when it is alone).
    /// `None` when `x` is vacant.
    pub fn headway_at(&self, x: usize) -> Option<usize> {
        let l = self.size();
        let x = x % l;
        if !self.occupation[x] {
            return None;
        }
        for n in 0..l - 1 {
            if self.occupation[(x + 1 + n) % l] {
                return Some(n);
            }
        }
        Some(l - 1)
    }

    /// Headway indicator: 1 iff site `x` holds a particle whose headway is
    /// `n`. Always 0 on the empty lattice.
    pub fn headway_indicator(&self, x: usize, n: usize) -> bool {
        self.headway_at(x) == Some(n)
    }

    /// The configuration with occupation numbers of `x` and `y` permuted.
    /// `x` and `y` must be nearest neighbors modulo `L`.
    pub fn swap(&self, x: usize, y: usize) -> Result<Self> {
        let l = self.size();
        let (x, y) = (x % l, y % l);
        let neighbors = (x + 1) % l == y || (y + 1) % l == x;
        if !neighbors || x == y {
            return Err(Error::InvalidMove { l, x, y });
        }
        let mut occ = self.occupation.clone();
        occ.swap(x, y);
        Ok(Self { occupation: occ })
    }

    /// Space reflection x -> L-1-x.
    pub fn reflected(&self) -> Self {
        let mut occ = self.occupation.clone();
        occ.reverse();
        Self { occupation: occ }
    }

    /// Cyclic shift by `k` sites: the particle at `x` moves to `x + k`.
    pub fn shifted(&self, k: usize) -> Self {
        let l = self.size();
        let occ = (0..l)
            .map(|x| self.occupation[(x + l - k % l) % l])
            .collect();
        Self { occupation: occ }
    }
}

impl fmt::Display for TorusConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &o in &self.occupation {
            write!(f, "{}", if o { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl FromStr for TorusConfiguration {
    type Err = Error;

    /// Parses the textual literal "0110...".
    fn from_str(s: &str) -> Result<Self> {
        let occ = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidConfiguration(format!(
                    "unexpected character {other:?} in occupation literal"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(occ)
    }
}

/// Configuration in coordinate presentation: strictly increasing particle
/// positions, labelled from the leftmost.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoordinateConfiguration {
    lattice: Lattice,
    positions: Vec<i64>,
}

impl CoordinateConfiguration {
    pub fn torus(l: usize, positions: Vec<i64>) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidConfiguration(
                "torus size must be at least 1".into(),
            ));
        }
        for &x in &positions {
            if x < 0 || x >= l as i64 {
                return Err(Error::InvalidConfiguration(format!(
                    "position {x} outside the torus 0..{l}"
                )));
            }
        }
        Self::check_increasing(&positions)?;
        Ok(Self {
            lattice: Lattice::Torus(l),
            positions,
        })
    }

    pub fn line(positions: Vec<i64>) -> Result<Self> {
        Self::check_increasing(&positions)?;
        Ok(Self {
            lattice: Lattice::Line,
            positions,
        })
    }

    fn check_increasing(positions: &[i64]) -> Result<()> {
        for w in positions.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidConfiguration(format!(
                    "positions must be strictly increasing, got {} before {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn particle_count(&self) -> usize {
        self.positions.len()
    }

    /// Parses the textual literal "x1,x2,..." for a torus of size `l`.
    pub fn parse_torus(l: usize, s: &str) -> Result<Self> {
        Self::torus(l, Self::parse_positions(s)?)
    }

    /// Parses the textual literal "x1,x2,..." on the line.
    pub fn parse_line(s: &str) -> Result<Self> {
        Self::line(Self::parse_positions(s)?)
    }

    fn parse_positions(s: &str) -> Result<Vec<i64>> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|part| {
                part.trim().parse::<i64>().map_err(|e| {
                    Error::InvalidConfiguration(format!("bad coordinate {part:?}: {e}"))
                })
            })
            .collect()
    }
}

impl fmt::Display for CoordinateConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.positions.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Coordinate presentation of a torus configuration: the occupied sites in
/// increasing order, label 1 on the smallest occupied site.
pub fn coords_from_occupation(cfg: &TorusConfiguration) -> CoordinateConfiguration {
    let positions = cfg
        .occupation()
        .iter()
        .enumerate()
        .filter_map(|(x, &o)| o.then_some(x as i64))
        .collect();
    CoordinateConfiguration {
        lattice: Lattice::Torus(cfg.size()),
        positions,
    }
}

/// Occupation presentation of a torus coordinate configuration.
pub fn occupation_from_coords(cfg: &CoordinateConfiguration) -> Result<TorusConfiguration> {
    let Lattice::Torus(l) = cfg.lattice() else {
        return Err(Error::InvalidConfiguration(
            "occupation presentation requires a torus".into(),
        ));
    };
    let mut occ = vec![false; l];
    for &x in cfg.positions() {
        // Constructor bounds guarantee 0 <= x < l; duplicates cannot occur
        // in a strictly increasing list.
        occ[x as usize] = true;
    }
    TorusConfiguration::new(occ)
}

/// Headways of all particles. On the torus the i-th headway is
/// `(x_{i+1} - x_i - 1) mod L` cyclically; on the line the last particle's
/// headway is `Infinite`. Undefined (an error) on the empty lattice.
pub fn headways(cfg: &CoordinateConfiguration) -> Result<HeadwaySequence> {
    let n = cfg.particle_count();
    if n == 0 {
        return Err(Error::HeadwaysUndefined);
    }
    let pos = cfg.positions();
    let values = match cfg.lattice() {
        Lattice::Torus(l) => (0..n)
            .map(|i| {
                let diff = pos[(i + 1) % n] - pos[i] - 1;
                Headway::Finite(diff.rem_euclid(l as i64) as usize)
            })
            .collect(),
        Lattice::Line => {
            let mut v: Vec<Headway> = pos
                .windows(2)
                .map(|w| Headway::Finite((w[1] - w[0] - 1) as usize))
                .collect();
            v.push(Headway::Infinite);
            v
        }
    };
    Ok(HeadwaySequence { values })
}
