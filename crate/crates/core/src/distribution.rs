//! Discrete first-contact and delivery distributions.
//!
//! Time is a grid of `H` bins. A [`FirstContactDistribution`] holds the
//! probability mass of the first contact (or delivery) in each delay bin; any
//! mass missing from 1 is the probability of never meeting within the
//! horizon. A [`DeliveryDistribution`] holds one such row per send bin.
//!
//! Distributions are partially ordered by pointwise dominance of their
//! cumulative functions. The order forms a lattice whose least element is
//! "never delivered" and whose greatest element is "delivered immediately".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for arithmetic identities.
pub const EPS_NUM: f64 = 1e-12;
/// Tolerance used when comparing cumulative functions.
pub const EPS_ORD: f64 = 1e-9;
/// Tolerance on the total mass of a row.
pub const EPS_MASS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: usize,
    step_duration: Option<f64>,
}

impl TimeGrid {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidGrid("horizon must be at least one bin".into()));
        }
        Ok(Self {
            horizon,
            step_duration: None,
        })
    }

    /// A grid whose bins last `seconds` each. The duration is metadata and
    /// never enters the arithmetic.
    pub fn with_step(horizon: usize, seconds: f64) -> Result<Self> {
        let mut grid = Self::new(horizon)?;
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "step duration must be positive, got {seconds}"
            )));
        }
        grid.step_duration = Some(seconds);
        Ok(grid)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn step_duration(&self) -> Option<f64> {
        self.step_duration
    }

    pub(crate) fn ensure_same(&self, other: &TimeGrid) -> Result<()> {
        if self.horizon != other.horizon {
            return Err(Error::GridMismatch {
                left: self.horizon,
                right: other.horizon,
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_bin(&self, bin: usize) -> Result<()> {
        if bin >= self.horizon {
            return Err(Error::BinOutOfRange {
                bin,
                horizon: self.horizon,
            });
        }
        Ok(())
    }
}

/// Outcome of comparing two distributions under the dominance order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dominance {
    Greater,
    Less,
    Equal,
    Incomparable,
}

impl Dominance {
    /// `true` for `Greater` and `Equal`.
    pub fn is_at_least(self) -> bool {
        matches!(self, Dominance::Greater | Dominance::Equal)
    }

    /// `true` for `Less` and `Equal`.
    pub fn is_at_most(self) -> bool {
        matches!(self, Dominance::Less | Dominance::Equal)
    }

    fn from_flags(ge: bool, le: bool) -> Self {
        match (ge, le) {
            (true, true) => Dominance::Equal,
            (true, false) => Dominance::Greater,
            (false, true) => Dominance::Less,
            (false, false) => Dominance::Incomparable,
        }
    }
}

/// Row-level kernels shared by both distribution types.
pub(crate) mod row {
    use super::{Dominance, EPS_ORD};

    pub fn total(mass: &[f64]) -> f64 {
        mass.iter().sum()
    }

    pub fn cumulative(mass: &[f64]) -> Vec<f64> {
        mass.iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect()
    }

    pub fn first_difference(cum: &[f64]) -> Vec<f64> {
        let mut prev = 0.0;
        cum.iter()
            .map(|&c| {
                let m = c - prev;
                prev = c;
                m
            })
            .collect()
    }

    pub fn flags(a: &[f64], b: &[f64]) -> (bool, bool) {
        let (mut ca, mut cb) = (0.0, 0.0);
        let (mut ge, mut le) = (true, true);
        for (x, y) in a.iter().zip(b) {
            ca += x;
            cb += y;
            if ca < cb - EPS_ORD {
                ge = false;
            }
            if cb < ca - EPS_ORD {
                le = false;
            }
            if !ge && !le {
                break;
            }
        }
        (ge, le)
    }

    pub fn compare(a: &[f64], b: &[f64]) -> Dominance {
        let (ge, le) = flags(a, b);
        Dominance::from_flags(ge, le)
    }

    pub fn is_zero(mass: &[f64]) -> bool {
        mass.iter().all(|&m| m == 0.0)
    }

    /// Largest absolute difference between the cumulative functions.
    pub fn cumulative_distance(a: &[f64], b: &[f64]) -> f64 {
        let (mut ca, mut cb, mut worst) = (0.0f64, 0.0f64, 0.0f64);
        for (x, y) in a.iter().zip(b) {
            ca += x;
            cb += y;
            worst = worst.max((ca - cb).abs());
        }
        worst
    }
}

fn validate_mass(mass: &[f64], what: &str) -> Result<()> {
    for (t, &m) in mass.iter().enumerate() {
        if !m.is_finite() || m < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "{what}: mass[{t}] = {m} is not a non-negative number"
            )));
        }
    }
    let total = row::total(mass);
    if total > 1.0 + EPS_MASS {
        return Err(Error::InvalidDistribution(format!(
            "{what}: total mass {total} exceeds 1"
        )));
    }
    Ok(())
}

/// Probability mass of a first contact in each delay bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstContactDistribution {
    grid: TimeGrid,
    mass: Vec<f64>,
}

impl FirstContactDistribution {
    pub fn new(grid: TimeGrid, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.horizon() {
            return Err(Error::InvalidDistribution(format!(
                "expected {} bins, got {}",
                grid.horizon(),
                mass.len()
            )));
        }
        validate_mass(&mass, "first contact distribution")?;
        Ok(Self { grid, mass })
    }

    pub(crate) fn from_parts(grid: TimeGrid, mass: Vec<f64>) -> Self {
        debug_assert_eq!(mass.len(), grid.horizon());
        Self { grid, mass }
    }

    /// Builds a distribution from a non-decreasing cumulative function.
    pub fn from_cumulative(grid: TimeGrid, cumulative: &[f64]) -> Result<Self> {
        if cumulative.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidDistribution(
                "cumulative function must be non-decreasing".into(),
            ));
        }
        Self::new(grid, row::first_difference(cumulative))
    }

    /// Never delivered.
    pub fn bottom(grid: TimeGrid) -> Self {
        Self::from_parts(grid, vec![0.0; grid.horizon()])
    }

    /// Delivered with certainty at delay zero.
    pub fn top(grid: TimeGrid) -> Self {
        Self::dirac(grid, 0).expect("bin 0 is always on the grid")
    }

    /// Delivered with certainty at delay `bin`.
    pub fn dirac(grid: TimeGrid, bin: usize) -> Result<Self> {
        grid.ensure_bin(bin)?;
        let mut mass = vec![0.0; grid.horizon()];
        mass[bin] = 1.0;
        Ok(Self::from_parts(grid, mass))
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_mass(self) -> Vec<f64> {
        self.mass
    }

    /// Probability of delivery within the horizon.
    pub fn total(&self) -> f64 {
        row::total(&self.mass)
    }

    /// `result[t]` is the probability of a first contact at delay `<= t`.
    pub fn cumulative(&self) -> Vec<f64> {
        row::cumulative(&self.mass)
    }

    pub fn compare(&self, other: &Self) -> Result<Dominance> {
        self.grid.ensure_same(&other.grid)?;
        Ok(row::compare(&self.mass, &other.mass))
    }

    /// `self ⪰ other`.
    pub fn dominates(&self, other: &Self) -> Result<bool> {
        Ok(self.compare(other)?.is_at_least())
    }

    /// Least upper bound: the pointwise maximum of the cumulative functions.
    pub fn supremum(&self, other: &Self) -> Result<Self> {
        self.combine(other, f64::max)
    }

    /// Greatest lower bound: the pointwise minimum of the cumulative functions.
    pub fn infimum(&self, other: &Self) -> Result<Self> {
        self.combine(other, f64::min)
    }

    fn combine(&self, other: &Self, pick: fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let cum: Vec<f64> = self
            .cumulative()
            .into_iter()
            .zip(other.cumulative())
            .map(|(a, b)| pick(a, b))
            .collect();
        Ok(Self::from_parts(self.grid, row::first_difference(&cum)))
    }
}

/// One first-contact distribution per send bin, stored densely row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryDistribution {
    grid: TimeGrid,
    data: Vec<f64>,
}

impl DeliveryDistribution {
    pub fn new(grid: TimeGrid, rows: Vec<Vec<f64>>) -> Result<Self> {
        let h = grid.horizon();
        if rows.len() != h {
            return Err(Error::InvalidDistribution(format!(
                "expected {h} rows, got {}",
                rows.len()
            )));
        }
        let mut data = Vec::with_capacity(h * h);
        for (send, r) in rows.into_iter().enumerate() {
            if r.len() != h {
                return Err(Error::InvalidDistribution(format!(
                    "row {send}: expected {h} bins, got {}",
                    r.len()
                )));
            }
            validate_mass(&r, &format!("row {send}"))?;
            data.extend(r);
        }
        Ok(Self { grid, data })
    }

    /// Builds from `f(send_bin, delay)`.
    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let h = grid.horizon();
        let rows = (0..h).map(|s| (0..h).map(|t| f(s, t)).collect()).collect();
        Self::new(grid, rows)
    }

    pub(crate) fn from_raw(grid: TimeGrid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.horizon() * grid.horizon());
        Self { grid, data }
    }

    pub fn bottom(grid: TimeGrid) -> Self {
        let h = grid.horizon();
        Self::from_raw(grid, vec![0.0; h * h])
    }

    pub fn top(grid: TimeGrid) -> Self {
        let h = grid.horizon();
        let mut data = vec![0.0; h * h];
        for send in 0..h {
            data[send * h] = 1.0;
        }
        Self::from_raw(grid, data)
    }

    /// Every row equal to `first`.
    pub fn uniform_rows(first: &FirstContactDistribution) -> Self {
        let h = first.grid.horizon();
        let data = (0..h).flat_map(|_| first.mass.iter().copied()).collect();
        Self::from_raw(first.grid, data)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn horizon(&self) -> usize {
        self.grid.horizon()
    }

    /// Delay mass for a bundle sent at `send`. Panics if `send` is off the grid.
    pub fn row(&self, send: usize) -> &[f64] {
        let h = self.grid.horizon();
        &self.data[send * h..(send + 1) * h]
    }

    pub(crate) fn row_mut(&mut self, send: usize) -> &mut [f64] {
        let h = self.grid.horizon();
        &mut self.data[send * h..(send + 1) * h]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.grid.horizon())
    }

    pub fn row_distribution(&self, send: usize) -> Result<FirstContactDistribution> {
        self.grid.ensure_bin(send)?;
        Ok(FirstContactDistribution::from_parts(
            self.grid,
            self.row(send).to_vec(),
        ))
    }

    pub fn get(&self, send: usize, delay: usize) -> f64 {
        self.row(send)[delay]
    }

    pub fn compare(&self, other: &Self) -> Result<Dominance> {
        self.grid.ensure_same(&other.grid)?;
        let (mut ge, mut le) = (true, true);
        for (a, b) in self.rows().zip(other.rows()) {
            let (g, l) = row::flags(a, b);
            ge &= g;
            le &= l;
            if !ge && !le {
                break;
            }
        }
        Ok(Dominance::from_flags(ge, le))
    }

    pub fn dominates(&self, other: &Self) -> Result<bool> {
        Ok(self.compare(other)?.is_at_least())
    }

    /// `true` when no row delivers anything.
    pub fn is_bottom(&self) -> bool {
        row::is_zero(&self.data)
    }

    /// Largest absolute difference between corresponding cells.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
