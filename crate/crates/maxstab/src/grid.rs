//! Observation cubes on regular lattices and free-form point sets.
//!
//! An [`ObsCube`] holds one value per cell of `{1..M}^d x {1..T}`; indices
//! are zero-based internally and one-based in the CSV exchange format.
//! Storage is location-major: the full time series of a location is
//! contiguous.

use crate::dependence::SpaceTimeLag;
use crate::error::MaxstabError;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Scale the cube values live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Margin {
    /// Untransformed observations.
    Raw,
    /// Standard Gumbel margins.
    Gumbel,
    /// Standard Frechet margins.
    Frechet,
}

impl Margin {
    pub fn as_str(&self) -> &'static str {
        match self {
            Margin::Raw => "raw",
            Margin::Gumbel => "gumbel",
            Margin::Frechet => "frechet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Margin::Raw),
            "gumbel" => Ok(Margin::Gumbel),
            "frechet" => Ok(Margin::Frechet),
            other => Err(MaxstabError::Data {
                reason: format!("unknown margin tag {other:?} (expected raw|gumbel|frechet)"),
            }),
        }
    }
}

/// Gridded space-time observations, `M^d` locations by `T` time points.
#[derive(Clone, Debug, PartialEq)]
pub struct ObsCube {
    d: usize,
    m: usize,
    t_len: usize,
    margin: Margin,
    values: Vec<f64>,
}

impl ObsCube {
    /// `values` in location-major order: index `loc * T + t` with
    /// `loc = s_1 M^{d-1} + ... + s_d` (zero-based coordinates).
    pub fn new(d: usize, m: usize, t_len: usize, margin: Margin, values: Vec<f64>) -> Result<Self> {
        if d == 0 || m == 0 || t_len == 0 {
            return Err(MaxstabError::InvalidInput {
                reason: format!("cube dimensions must be positive, got d={d}, M={m}, T={t_len}"),
            });
        }
        let n = m.pow(d as u32) * t_len;
        if values.len() != n {
            return Err(MaxstabError::InvalidInput {
                reason: format!(
                    "cube needs {n} values for d={d}, M={m}, T={t_len}, got {}",
                    values.len()
                ),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(MaxstabError::Data {
                reason: format!("non-finite value at flat index {bad}"),
            });
        }
        if margin == Margin::Frechet {
            if let Some(bad) = values.iter().position(|v| *v <= 0.0) {
                return Err(MaxstabError::Data {
                    reason: format!(
                        "frechet cube must be strictly positive, value {} at flat index {bad}",
                        values[bad]
                    ),
                });
            }
        }
        Ok(Self {
            d,
            m,
            t_len,
            margin,
            values,
        })
    }

    pub fn spatial_dim(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn margin(&self) -> Margin {
        self.margin
    }

    pub fn n_locations(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Flat location index of zero-based spatial coordinates.
    pub fn loc_index(&self, s: &[usize]) -> usize {
        debug_assert_eq!(s.len(), self.d);
        let mut idx = 0;
        for &c in s {
            debug_assert!(c < self.m);
            idx = idx * self.m + c;
        }
        idx
    }

    /// Zero-based spatial coordinates of a flat location index.
    pub fn loc_coords(&self, mut loc: usize) -> Vec<usize> {
        let mut s = vec![0; self.d];
        for j in (0..self.d).rev() {
            s[j] = loc % self.m;
            loc /= self.m;
        }
        s
    }

    #[inline]
    pub fn value_at(&self, loc: usize, t: usize) -> f64 {
        self.values[loc * self.t_len + t]
    }

    pub fn value(&self, s: &[usize], t: usize) -> f64 {
        self.value_at(self.loc_index(s), t)
    }

    /// Time series of one location.
    pub fn series(&self, loc: usize) -> &[f64] {
        &self.values[loc * self.t_len..(loc + 1) * self.t_len]
    }

    /// Replace the margin tag; used by marginal transforms.
    pub fn with_values(&self, margin: Margin, values: Vec<f64>) -> Result<Self> {
        Self::new(self.d, self.m, self.t_len, margin, values)
    }

    /// Leading subcube `{1..m} x {1..t}`, values copied.
    pub fn subcube(&self, m: usize, t_len: usize) -> Result<Self> {
        let mut starts = vec![0usize; self.d];
        self.block(&mut starts, 0, m, t_len)
    }

    /// Block of side `b_m` (each spatial axis) by `b_t` starting at
    /// zero-based `start_s`, `start_t`. The result is a standalone cube.
    pub fn block(
        &self,
        start_s: &[usize],
        start_t: usize,
        b_m: usize,
        b_t: usize,
    ) -> Result<Self> {
        if start_s.len() != self.d {
            return Err(MaxstabError::InvalidInput {
                reason: "block origin dimension mismatch".into(),
            });
        }
        if start_s.iter().any(|&s| s + b_m > self.m) || start_t + b_t > self.t_len {
            return Err(MaxstabError::Infeasible {
                reason: format!(
                    "block {b_m}^{}x{b_t} at {start_s:?},{start_t} exceeds cube {}^{}x{}",
                    self.d, self.m, self.d, self.t_len
                ),
            });
        }
        let n_loc = b_m.pow(self.d as u32);
        let mut values = Vec::with_capacity(n_loc * b_t);
        let mut coords = vec![0usize; self.d];
        for loc in 0..n_loc {
            let mut rem = loc;
            for j in (0..self.d).rev() {
                coords[j] = start_s[j] + rem % b_m;
                rem /= b_m;
            }
            let src = self.loc_index(&coords) * self.t_len + start_t;
            values.extend_from_slice(&self.values[src..src + b_t]);
        }
        Self::new(self.d, b_m, b_t, self.margin, values)
    }
}

/// Free-form collection of space-time points, coordinates in grid units.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    d: usize,
    space: Vec<Vec<f64>>,
    time: Vec<f64>,
}

impl PointSet {
    pub fn new(d: usize, space: Vec<Vec<f64>>, time: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(MaxstabError::InvalidInput {
                reason: "spatial dimension must be positive".into(),
            });
        }
        if space.len() != time.len() || space.is_empty() {
            return Err(MaxstabError::InvalidInput {
                reason: "point set needs equally many (and at least one) space and time entries"
                    .into(),
            });
        }
        for (i, s) in space.iter().enumerate() {
            if s.len() != d {
                return Err(MaxstabError::InvalidInput {
                    reason: format!("point {i} has {} spatial coordinates, expected {d}", s.len()),
                });
            }
            if s.iter().any(|x| !x.is_finite()) || !time[i].is_finite() {
                return Err(MaxstabError::InvalidInput {
                    reason: format!("point {i} has non-finite coordinates"),
                });
            }
        }
        Ok(Self { d, space, time })
    }

    /// All points of the regular grid `{0..m-1}^d x {0..t_len-1}` in the
    /// location-major order of [`ObsCube`].
    pub fn grid(d: usize, m: usize, t_len: usize) -> Result<Self> {
        if m == 0 || t_len == 0 {
            return Err(MaxstabError::InvalidInput {
                reason: "grid dimensions must be positive".into(),
            });
        }
        let n_loc = m.pow(d as u32);
        let mut space = Vec::with_capacity(n_loc * t_len);
        let mut time = Vec::with_capacity(n_loc * t_len);
        for loc in 0..n_loc {
            let mut coords = vec![0.0; d];
            let mut rem = loc;
            for j in (0..d).rev() {
                coords[j] = (rem % m) as f64;
                rem /= m;
            }
            for t in 0..t_len {
                space.push(coords.clone());
                time.push(t as f64);
            }
        }
        Self::new(d, space, time)
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn spatial_dim(&self) -> usize {
        self.d
    }

    pub fn space(&self, i: usize) -> &[f64] {
        &self.space[i]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.time[i]
    }

    /// Lag from point `j` to point `i` (`x_i - x_j`).
    pub fn lag_between(&self, i: usize, j: usize) -> SpaceTimeLag {
        let h = self.space[i]
            .iter()
            .zip(self.space[j].iter())
            .map(|(a, b)| a - b)
            .collect();
        SpaceTimeLag {
            h,
            u: self.time[i] - self.time[j],
        }
    }

    /// Lag of point `i` from the coordinate origin.
    pub fn lag_from_origin(&self, i: usize) -> SpaceTimeLag {
        SpaceTimeLag {
            h: self.space[i].clone(),
            u: self.time[i],
        }
    }
}
