use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance defining membership of E¹.
pub const E1_TOLERANCE: f64 = 1e-9;

/// Per-class distribution of buffer contents over levels `0..=n_max`.
///
/// Row `c` holds the fraction of class-`c` nodes with `n` buffered packets.
/// The top level pools everything at or above `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Rows", into = "Rows")]
pub struct PopulationState {
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Rows {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<Rows> for PopulationState {
    type Error = Error;
    fn try_from(r: Rows) -> Result<Self> {
        PopulationState::from_rows(r.rows)
    }
}

impl From<PopulationState> for Rows {
    fn from(p: PopulationState) -> Self {
        Rows { rows: p.rows }
    }
}

impl PopulationState {
    /// Wraps rows without checking row sums; rows must share one length ≥ 1.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidState("no classes".into()));
        };
        let width = first.len();
        if width == 0 {
            return Err(Error::InvalidState("rows need at least one level".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                what: "population row",
                expected: width,
                got: r.len(),
            });
        }
        Ok(Self { rows })
    }

    /// Every node empty: rows are (1, 0, …, 0).
    pub fn empty(num_classes: usize, n_max: usize) -> Self {
        let mut row = vec![0.0; n_max + 1];
        row[0] = 1.0;
        Self {
            rows: vec![row; num_classes],
        }
    }

    /// Geometric rows `(1 − ξ_c) ξ_c^n`, truncated at `n_max` and renormalized.
    pub fn geometric(xi: &[f64], n_max: usize) -> Self {
        let rows = xi
            .iter()
            .map(|&x| {
                let mut row: Vec<f64> = (0..=n_max).map(|n| (1.0 - x) * x.powi(n as i32)).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                row
            })
            .collect();
        Self { rows }
    }

    pub fn num_classes(&self) -> usize {
        self.rows.len()
    }

    pub fn n_max(&self) -> usize {
        self.rows[0].len() - 1
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.rows[c]
    }

    pub fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.rows
    }

    pub fn get(&self, c: usize, n: usize) -> f64 {
        self.rows[c][n]
    }

    /// Fraction of empty nodes per class, x_{c,0}.
    pub fn empty_fractions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    /// Checks that every row sums to one within `tol` and every entry lies in
    /// `[-tol, 1 + tol]`.
    pub fn check_e1(&self, tol: f64) -> Result<()> {
        for (c, row) in self.rows.iter().enumerate() {
            if let Some((n, v)) = row
                .iter()
                .enumerate()
                .find(|(_, v)| !v.is_finite() || **v < -tol || **v > 1.0 + tol)
            {
                return Err(Error::InvalidState(format!("entry ({c}, {n}) = {v}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::InvalidState(format!("row {c} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn renormalize(&mut self) {
        for row in &mut self.rows {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }

    /// Euclidean distance between rows `c` of two states.
    pub fn class_distance(&self, other: &Self, c: usize) -> f64 {
        self.rows[c]
            .iter()
            .zip(&other.rows[c])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean distance over all entries.
    pub fn distance(&self, other: &Self) -> f64 {
        (0..self.num_classes())
            .map(|c| self.class_distance(other, c).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.num_classes() == other.num_classes() && self.n_max() == other.n_max()
    }
}
