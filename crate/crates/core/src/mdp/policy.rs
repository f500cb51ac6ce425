use serde::Serialize;

use crate::error::{Error, Result};
use crate::table::LayerTable;

use super::LayeredMdp;

/// Markov policy as per-layer action distributions `pi_h(a|x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Policy {
    probs: Vec<LayerTable>,
    deterministic: bool,
}

impl Policy {
    pub fn from_tables(probs: Vec<LayerTable>) -> Result<Self> {
        let mut deterministic = true;
        for (h, t) in probs.iter().enumerate() {
            for x in 0..t.n_states() {
                let row = t.row(x);
                let s: f64 = row.iter().sum();
                if row.iter().any(|&p| p < 0.0) || (s - 1.0).abs() > 1e-12 {
                    return Err(Error::structure(format!(
                        "policy row ({h},{x}) is not a distribution (sum {s})"
                    )));
                }
                if row.iter().filter(|&&p| p != 0.0).count() != 1 || !row.contains(&1.0) {
                    deterministic = false;
                }
            }
        }
        Ok(Self {
            probs,
            deterministic,
        })
    }

    /// One-hot policy from `actions[h][x]`.
    pub fn deterministic(actions: &[Vec<usize>], n_actions: usize) -> Self {
        let probs = actions
            .iter()
            .map(|layer| LayerTable::from_fn(layer.len(), n_actions, |x, a| (layer[x] == a) as u8 as f64))
            .collect();
        Self {
            probs,
            deterministic: true,
        }
    }

    pub fn uniform(mdp: &LayeredMdp) -> Self {
        let na = mdp.n_actions();
        let probs = (0..mdp.horizon())
            .map(|h| LayerTable::filled(mdp.n_states(h), na, 1.0 / na as f64))
            .collect();
        Self {
            probs,
            deterministic: na == 1,
        }
    }

    #[inline]
    pub fn prob(&self, h: usize, x: usize, a: usize) -> f64 {
        self.probs[h].get(x, a)
    }

    #[inline]
    pub fn dist(&self, h: usize, x: usize) -> &[f64] {
        self.probs[h].row(x)
    }

    pub fn tables(&self) -> &[LayerTable] {
        &self.probs
    }

    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    /// The chosen action of a deterministic policy.
    pub fn action(&self, h: usize, x: usize) -> Option<usize> {
        if !self.deterministic {
            return None;
        }
        self.dist(h, x).iter().position(|&p| p == 1.0)
    }

    /// Action table of a deterministic policy.
    pub fn action_table(&self) -> Option<Vec<Vec<usize>>> {
        if !self.deterministic {
            return None;
        }
        Some(
            self.probs
                .iter()
                .enumerate()
                .map(|(h, t)| (0..t.n_states()).map(|x| self.action(h, x).unwrap()).collect())
                .collect(),
        )
    }

    /// Shape check against an MDP.
    pub fn check_shape(&self, mdp: &LayeredMdp) -> Result<()> {
        if self.probs.len() != mdp.horizon() {
            return Err(Error::structure(format!(
                "policy has {} layers, mdp has {}",
                self.probs.len(),
                mdp.horizon()
            )));
        }
        for (h, t) in self.probs.iter().enumerate() {
            if t.n_states() != mdp.n_states(h) || t.n_actions() != mdp.n_actions() {
                return Err(Error::structure(format!("policy layer {h} shape mismatch")));
            }
        }
        Ok(())
    }
}

/// Exact per-layer state-action visitation `d_h(x,a)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupancyMeasure {
    layers: Vec<LayerTable>,
}

impl OccupancyMeasure {
    pub(crate) fn new(layers: Vec<LayerTable>) -> Self {
        Self { layers }
    }

    #[inline]
    pub fn layer(&self, h: usize) -> &LayerTable {
        &self.layers[h]
    }

    pub fn layers(&self) -> &[LayerTable] {
        &self.layers
    }

    #[inline]
    pub fn get(&self, h: usize, x: usize, a: usize) -> f64 {
        self.layers[h].get(x, a)
    }

    /// `d_h(x) = sum_a d_h(x,a)`.
    pub fn state_marginal(&self, h: usize) -> Vec<f64> {
        let t = &self.layers[h];
        (0..t.n_states()).map(|x| t.row(x).iter().sum()).collect()
    }

    /// `E_{d_h}[g]`.
    pub fn expect(&self, h: usize, g: &LayerTable) -> f64 {
        self.layers[h].dot(g)
    }
}
