//! Finite layered episodic MDPs: representation, validation, exact dynamic
//! programming and trajectory sampling.
//!
//! Layers are 0-based in code. Layer `H-1` has no outgoing transition table;
//! every action there moves to an implicit zero-reward terminal sink.

mod dp;
mod json;
mod policy;
mod sample;

pub use dp::{
    max_reach, max_reach_layer, occupancy, optimal_values, optimal_values_with, policy_value,
    policy_value_with, OptimalValues, PolicyValue, Reach,
};
pub use json::MdpJson;
pub use policy::{OccupancyMeasure, Policy};
pub use sample::categorical;
pub use sample::{sample_trajectory, sample_with, Step, Trajectory};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::table::LayerTable;

/// Sparse next-state distribution: `(next_state_index, probability)`.
pub type Row = Vec<(usize, f64)>;

pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LayeredMdp {
    actions: Vec<String>,
    layers: Vec<Vec<String>>,
    /// `transitions[h][x][a]` for `h < H-1`.
    transitions: Vec<Vec<Vec<Row>>>,
    rewards: Vec<LayerTable>,
    initial_state: usize,
}

impl LayeredMdp {
    /// Checks shapes and index ranges only. Numerical invariants (row sums,
    /// reward range) are reported by [`validate_mdp`].
    pub fn new(
        actions: Vec<String>,
        layers: Vec<Vec<String>>,
        transitions: Vec<Vec<Vec<Row>>>,
        rewards: Vec<LayerTable>,
        initial_state: usize,
    ) -> Result<Self> {
        let horizon = layers.len();
        if horizon == 0 {
            return Err(Error::structure("horizon must be at least 1"));
        }
        if actions.is_empty() {
            return Err(Error::structure("action set is empty"));
        }
        let n_actions = actions.len();
        for (h, l) in layers.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::structure(format!("layer {h} has no states")));
            }
        }
        if initial_state >= layers[0].len() {
            return Err(Error::structure(format!(
                "initial_state {initial_state} out of range for layer 0 ({} states)",
                layers[0].len()
            )));
        }
        if transitions.len() != horizon - 1 {
            return Err(Error::structure(format!(
                "expected {} transition layers, got {}",
                horizon - 1,
                transitions.len()
            )));
        }
        for (h, layer) in transitions.iter().enumerate() {
            if layer.len() != layers[h].len() {
                return Err(Error::structure(format!(
                    "transitions[{h}] has {} states, layer has {}",
                    layer.len(),
                    layers[h].len()
                )));
            }
            for (x, per_action) in layer.iter().enumerate() {
                if per_action.len() != n_actions {
                    return Err(Error::structure(format!(
                        "transitions[{h}][{x}] has {} actions, expected {n_actions}",
                        per_action.len()
                    )));
                }
                for (a, row) in per_action.iter().enumerate() {
                    for &(y, _) in row {
                        if y >= layers[h + 1].len() {
                            return Err(Error::structure(format!(
                                "transitions[{h}][{x}][{a}] points to state {y}, layer {} has {}",
                                h + 1,
                                layers[h + 1].len()
                            )));
                        }
                    }
                }
            }
        }
        if rewards.len() != horizon {
            return Err(Error::structure(format!(
                "expected {horizon} reward layers, got {}",
                rewards.len()
            )));
        }
        for (h, r) in rewards.iter().enumerate() {
            if r.n_states() != layers[h].len() || r.n_actions() != n_actions {
                return Err(Error::structure(format!(
                    "rewards[{h}] is {}x{}, expected {}x{n_actions}",
                    r.n_states(),
                    r.n_actions(),
                    layers[h].len()
                )));
            }
        }
        Ok(Self {
            actions,
            layers,
            transitions,
            rewards,
            initial_state,
        })
    }

    /// Convenience constructor with generated labels `s{h}_{x}` and `a{i}`.
    pub fn from_parts(
        states_per_layer: &[usize],
        n_actions: usize,
        transitions: Vec<Vec<Vec<Row>>>,
        rewards: Vec<LayerTable>,
        initial_state: usize,
    ) -> Result<Self> {
        let layers = states_per_layer
            .iter()
            .enumerate()
            .map(|(h, &n)| (0..n).map(|x| format!("s{h}_{x}")).collect())
            .collect();
        let actions = (0..n_actions).map(|a| format!("a{a}")).collect();
        Self::new(actions, layers, transitions, rewards, initial_state)
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.layers.len()
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    #[inline]
    pub fn n_states(&self, h: usize) -> usize {
        self.layers[h].len()
    }

    pub fn states_per_layer(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.len()).collect()
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn state_labels(&self, h: usize) -> &[String] {
        &self.layers[h]
    }

    #[inline]
    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    #[inline]
    pub fn reward(&self, h: usize, x: usize, a: usize) -> f64 {
        self.rewards[h].get(x, a)
    }

    pub fn rewards(&self) -> &[LayerTable] {
        &self.rewards
    }

    /// Next-state distribution; empty for the last layer (terminal sink).
    #[inline]
    pub fn next(&self, h: usize, x: usize, a: usize) -> &[(usize, f64)] {
        if h + 1 >= self.horizon() {
            &[]
        } else {
            &self.transitions[h][x][a]
        }
    }

    pub fn transitions(&self) -> &[Vec<Vec<Row>>] {
        &self.transitions
    }

    pub fn zero_table(&self, h: usize) -> LayerTable {
        LayerTable::zeros(self.n_states(h), self.n_actions())
    }

    pub fn zero_tables(&self) -> Vec<LayerTable> {
        (0..self.horizon()).map(|h| self.zero_table(h)).collect()
    }

    /// Same dynamics, rewards replaced.
    pub fn with_rewards(&self, rewards: Vec<LayerTable>) -> Result<Self> {
        Self::new(
            self.actions.clone(),
            self.layers.clone(),
            self.transitions.clone(),
            rewards,
            self.initial_state,
        )
    }

    /// Expectation of `v` (a layer-`h+1` state function) under `P_h(.|x,a)`.
    #[inline]
    pub fn expect_next(&self, h: usize, x: usize, a: usize, v: &[f64]) -> f64 {
        self.next(h, x, a).iter().map(|&(y, p)| p * v[y]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    RowSum { h: usize, x: usize, a: usize, sum: f64 },
    NegativeProbability { h: usize, x: usize, a: usize, next: usize, prob: f64 },
    RewardRange { h: usize, x: usize, a: usize, value: f64 },
    CumulativeReward { max: f64, min: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Largest total reward over trajectories with positive probability.
    pub max_cumulative_reward: f64,
    pub min_cumulative_reward: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_mdp(mdp: &LayeredMdp) -> ValidationReport {
    let mut violations = Vec::new();
    let hz = mdp.horizon();
    let na = mdp.n_actions();
    for h in 0..hz.saturating_sub(1) {
        for x in 0..mdp.n_states(h) {
            for a in 0..na {
                let row = mdp.next(h, x, a);
                let mut sum = 0.0;
                for &(y, p) in row {
                    if p < 0.0 {
                        violations.push(Violation::NegativeProbability { h, x, a, next: y, prob: p });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    violations.push(Violation::RowSum { h, x, a, sum });
                }
            }
        }
    }
    for h in 0..hz {
        for x in 0..mdp.n_states(h) {
            for a in 0..na {
                let r = mdp.reward(h, x, a);
                if !(0.0..=1.0).contains(&r) {
                    violations.push(Violation::RewardRange { h, x, a, value: r });
                }
            }
        }
    }
    // Path extremes over the support of the dynamics.
    let mut vmax = vec![0.0; 0];
    let mut vmin = vec![0.0; 0];
    for h in (0..hz).rev() {
        let n = mdp.n_states(h);
        let mut nmax = vec![f64::NEG_INFINITY; n];
        let mut nmin = vec![f64::INFINITY; n];
        for x in 0..n {
            for a in 0..na {
                let (mut hi, mut lo) = (0.0f64, 0.0f64);
                let row = mdp.next(h, x, a);
                if !row.is_empty() {
                    hi = f64::NEG_INFINITY;
                    lo = f64::INFINITY;
                    for &(y, p) in row {
                        if p > 0.0 {
                            hi = hi.max(vmax[y]);
                            lo = lo.min(vmin[y]);
                        }
                    }
                    if !hi.is_finite() {
                        hi = 0.0;
                        lo = 0.0;
                    }
                }
                let r = mdp.reward(h, x, a);
                nmax[x] = nmax[x].max(r + hi);
                nmin[x] = nmin[x].min(r + lo);
            }
        }
        vmax = nmax;
        vmin = nmin;
    }
    let s0 = mdp.initial_state();
    let (max, min) = (vmax[s0], vmin[s0]);
    if max > 1.0 + ROW_SUM_TOL || min < -ROW_SUM_TOL {
        violations.push(Violation::CumulativeReward { max, min });
    }
    ValidationReport {
        violations,
        max_cumulative_reward: max,
        min_cumulative_reward: min,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn one_cell(r: f64) -> LayeredMdp {
        LayeredMdp::from_parts(&[1], 1, vec![], vec![LayerTable::filled(1, 1, r)], 0).unwrap()
    }

    #[test]
    fn single_cell_is_valid() {
        let rep = validate_mdp(&one_cell(0.5));
        assert!(rep.is_valid());
        assert_eq!(rep.max_cumulative_reward, 0.5);
    }

    #[test]
    fn short_row_is_reported_with_coordinates() {
        let mdp = LayeredMdp::from_parts(
            &[1, 2],
            2,
            vec![vec![vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 0.9)]]]],
            vec![LayerTable::zeros(1, 2), LayerTable::zeros(2, 2)],
            0,
        )
        .unwrap();
        let rep = validate_mdp(&mdp);
        assert_eq!(rep.violations.len(), 1);
        match rep.violations[0] {
            Violation::RowSum { h, x, a, sum } => {
                assert_eq!((h, x, a), (0, 0, 1));
                assert!((sum - 0.9).abs() < 1e-15);
            }
            ref v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn cumulative_reward_above_one_is_flagged() {
        let mdp = LayeredMdp::from_parts(
            &[1, 1],
            1,
            vec![vec![vec![vec![(0, 1.0)]]]],
            vec![LayerTable::filled(1, 1, 0.6), LayerTable::filled(1, 1, 0.6)],
            0,
        )
        .unwrap();
        let rep = validate_mdp(&mdp);
        assert!(matches!(rep.violations[..], [Violation::CumulativeReward { .. }]));
        assert!((rep.max_cumulative_reward - 1.2).abs() < 1e-15);
    }

    #[test]
    fn structural_errors_name_coordinates() {
        let err = LayeredMdp::from_parts(
            &[1, 2],
            1,
            vec![vec![vec![vec![(5, 1.0)]]]],
            vec![LayerTable::zeros(1, 1), LayerTable::zeros(2, 1)],
            0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("transitions[0][0][0]"));
        let err = LayeredMdp::from_parts(&[1], 1, vec![], vec![LayerTable::zeros(2, 1)], 0).unwrap_err();
        assert!(err.to_string().contains("rewards[0]"));
    }
}
