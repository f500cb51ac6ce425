use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `states x actions` table for a single layer, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl LayerTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, v: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![v; n_states * n_actions],
        }
    }

    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_states * n_actions);
        for x in 0..n_states {
            for a in 0..n_actions {
                values.push(f(x, a));
            }
        }
        Self {
            n_states,
            n_actions,
            values,
        }
    }

    /// Builds a table from nested rows; every row must have `n_actions` entries.
    pub fn from_rows(rows: &[Vec<f64>], n_actions: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * n_actions);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::structure(format!(
                    "row {x} has {} entries, expected {n_actions}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            n_states: rows.len(),
            n_actions,
            values,
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks(self.n_actions.max(1))
            .take(self.n_states)
            .map(|r| r.to_vec())
            .collect()
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.values[x * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, x: usize, a: usize, v: f64) {
        self.values[x * self.n_actions + a] = v;
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.n_actions..(x + 1) * self.n_actions]
    }

    #[inline]
    pub fn row_mut(&mut self, x: usize) -> &mut [f64] {
        &mut self.values[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row_max(&self, x: usize) -> f64 {
        self.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Least index attaining the row maximum.
    pub fn row_argmax(&self, x: usize) -> usize {
        argmax(self.row(x))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `sum_{x,a} self(x,a) * other(x,a)`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// L-infinity distance; `+inf` when shapes differ.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        if self.n_states != other.n_states || self.n_actions != other.n_actions {
            return f64::INFINITY;
        }
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Least index of the maximum entry. Panics on an empty slice.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_least_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![vec![0.1, 0.2], vec![0.3, 0.4], vec![0.5, 0.6]];
        let t = LayerTable::from_rows(&rows, 2).unwrap();
        assert_eq!(t.get(2, 1), 0.6);
        assert_eq!(t.to_rows(), rows);
        assert!(LayerTable::from_rows(&[vec![1.0]], 2).is_err());
    }

    #[test]
    fn distances() {
        let a = LayerTable::zeros(2, 2);
        let mut b = a.clone();
        b.set(1, 0, -0.25);
        assert_eq!(a.sup_distance(&b), 0.25);
        assert_eq!(a.sup_distance(&LayerTable::zeros(1, 2)), f64::INFINITY);
    }
}
