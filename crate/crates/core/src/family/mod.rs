//! Finite value-function families, Bellman backups, greedy policies and the
//! representation-condition checkers.

mod checks;
mod json;

pub use checks::{
    check_completeness, check_realizability, check_rf_completeness, CompletenessReport,
    CompletenessViolation, RealizabilityReport, RfCompletenessReport,
};
pub use json::FamilyJson;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mdp::{LayeredMdp, Policy};
use crate::table::LayerTable;

/// L-infinity tolerance for membership tests.
pub const MEMBER_TOL: f64 = 1e-9;

/// Which reward the Bellman operator adds.
#[derive(Clone, Copy, Debug)]
pub enum RewardMode<'a> {
    Mdp,
    /// The zero-reward operator `P_h`.
    Zero,
    Custom(&'a [LayerTable]),
}

/// `(T_h f_{h+1})(x,a) = R_h(x,a) + E_{x'}[max_a' f_{h+1}(x',a')]`, with
/// `next = None` standing for `f_{H+1} = 0`.
pub fn bellman_backup(mdp: &LayeredMdp, next: Option<&LayerTable>, h: usize, reward: RewardMode) -> LayerTable {
    let maxes: Vec<f64> = match next {
        Some(t) if h + 1 < mdp.horizon() => (0..t.n_states()).map(|y| t.row_max(y)).collect(),
        _ => Vec::new(),
    };
    LayerTable::from_fn(mdp.n_states(h), mdp.n_actions(), |x, a| {
        let r = match reward {
            RewardMode::Mdp => mdp.reward(h, x, a),
            RewardMode::Zero => 0.0,
            RewardMode::Custom(rs) => rs[h].get(x, a),
        };
        r + mdp.expect_next(h, x, a, &maxes)
    })
}

/// Per-layer residuals `f_h - T_h f_{h+1}`.
pub fn residuals(mdp: &LayeredMdp, f: &[&LayerTable], reward: RewardMode) -> Vec<LayerTable> {
    let hz = mdp.horizon();
    (0..hz)
        .map(|h| {
            let b = bellman_backup(mdp, f.get(h + 1).copied(), h, reward);
            f[h].zip_with(&b, |u, v| u - v)
        })
        .collect()
}

/// `pi_{f,h}(x) = argmax_a f_h(x,a)`, least index on ties.
pub fn greedy_policy(f: &[&LayerTable]) -> Policy {
    let n_actions = f.first().map_or(0, |t| t.n_actions());
    let acts: Vec<Vec<usize>> = f
        .iter()
        .map(|t| (0..t.n_states()).map(|x| t.row_argmax(x)).collect())
        .collect();
    Policy::deterministic(&acts, n_actions)
}

/// A finite family `F`, stored as per-layer component sets `F_h` and member
/// tuples of component indices.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunctionFamily {
    components: Vec<Vec<LayerTable>>,
    members: Vec<Vec<usize>>,
}

fn key(t: &LayerTable) -> Vec<u64> {
    t.values().iter().map(|v| v.to_bits()).collect()
}

impl ValueFunctionFamily {
    /// Components default to the distinct layer tables among the members.
    pub fn from_members(members: Vec<Vec<LayerTable>>) -> Result<Self> {
        Self::with_components(members, Vec::new())
    }

    /// Members plus extra per-layer components; member tables are merged in.
    pub fn with_components(members: Vec<Vec<LayerTable>>, extra: Vec<Vec<LayerTable>>) -> Result<Self> {
        let hz = members
            .first()
            .map(|m| m.len())
            .or_else(|| (!extra.is_empty()).then_some(extra.len()))
            .ok_or_else(|| Error::structure("family has no members"))?;
        if members.is_empty() {
            return Err(Error::structure("family has no members"));
        }
        if !extra.is_empty() && extra.len() != hz {
            return Err(Error::structure(format!(
                "components cover {} layers, members {hz}",
                extra.len()
            )));
        }
        let mut components: Vec<Vec<LayerTable>> = vec![Vec::new(); hz];
        let mut index: Vec<HashMap<Vec<u64>, usize>> = vec![HashMap::new(); hz];
        let mut intern = |h: usize, t: LayerTable, components: &mut Vec<Vec<LayerTable>>| -> usize {
            *index[h].entry(key(&t)).or_insert_with(|| {
                components[h].push(t);
                components[h].len() - 1
            })
        };
        for (h, layer) in extra.into_iter().enumerate() {
            for t in layer {
                intern(h, t, &mut components);
            }
        }
        let mut tuples = Vec::with_capacity(members.len());
        for (m, f) in members.into_iter().enumerate() {
            if f.len() != hz {
                return Err(Error::structure(format!("member {m} has {} layers, expected {hz}", f.len())));
            }
            tuples.push(
                f.into_iter()
                    .enumerate()
                    .map(|(h, t)| intern(h, t, &mut components))
                    .collect(),
            );
        }
        Self::from_indices(components, tuples)
    }

    pub fn from_indices(components: Vec<Vec<LayerTable>>, members: Vec<Vec<usize>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::structure("family has no members"));
        }
        let hz = components.len();
        for (h, layer) in components.iter().enumerate() {
            if layer.is_empty() {
                return Err(Error::structure(format!("component set F_{h} is empty")));
            }
            let (s, a) = (layer[0].n_states(), layer[0].n_actions());
            if layer.iter().any(|t| t.n_states() != s || t.n_actions() != a) {
                return Err(Error::structure(format!("components of layer {h} differ in shape")));
            }
        }
        for (m, tup) in members.iter().enumerate() {
            if tup.len() != hz {
                return Err(Error::structure(format!("member {m} has {} layers, expected {hz}", tup.len())));
            }
            for (h, &c) in tup.iter().enumerate() {
                if c >= components[h].len() {
                    return Err(Error::structure(format!("member {m} layer {h} refers to component {c}")));
                }
            }
        }
        Ok(Self { components, members })
    }

    /// The full product `F_1 x ... x F_H`, members in lexicographic order
    /// with the last layer varying fastest.
    pub fn product(components: Vec<Vec<LayerTable>>, max_members: usize) -> Result<Self> {
        let total = components
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
            .filter(|&n| n <= max_members)
            .ok_or_else(|| Error::Budget(format!("product family exceeds {max_members} members")))?;
        let mut members = Vec::with_capacity(total);
        for mut i in 0..total {
            let mut tup = vec![0; components.len()];
            for h in (0..components.len()).rev() {
                tup[h] = i % components[h].len();
                i /= components[h].len();
            }
            members.push(tup);
        }
        Self::from_indices(components, members)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn components(&self, h: usize) -> &[LayerTable] {
        &self.components[h]
    }

    pub fn all_components(&self) -> &[Vec<LayerTable>] {
        &self.components
    }

    #[inline]
    pub fn component_index(&self, m: usize, h: usize) -> usize {
        self.members[m][h]
    }

    pub fn member_indices(&self) -> &[Vec<usize>] {
        &self.members
    }

    #[inline]
    pub fn table(&self, m: usize, h: usize) -> &LayerTable {
        &self.components[h][self.members[m][h]]
    }

    pub fn member(&self, m: usize) -> Vec<&LayerTable> {
        (0..self.horizon()).map(|h| self.table(m, h)).collect()
    }

    pub fn member_owned(&self, m: usize) -> Vec<LayerTable> {
        (0..self.horizon()).map(|h| self.table(m, h).clone()).collect()
    }

    pub fn greedy(&self, m: usize) -> Policy {
        greedy_policy(&self.member(m))
    }

    pub fn residuals(&self, mdp: &LayeredMdp, m: usize, reward: RewardMode) -> Vec<LayerTable> {
        residuals(mdp, &self.member(m), reward)
    }

    /// `f_1(x_1, pi_{f,1}(x_1))`.
    pub fn optimistic_value(&self, m: usize, x1: usize) -> f64 {
        self.table(m, 0).row_max(x1)
    }

    /// Shape check against an MDP.
    pub fn check_shape(&self, mdp: &LayeredMdp) -> Result<()> {
        if self.horizon() != mdp.horizon() {
            return Err(Error::structure(format!(
                "family has {} layers, mdp has {}",
                self.horizon(),
                mdp.horizon()
            )));
        }
        for h in 0..self.horizon() {
            let t = &self.components[h][0];
            if t.n_states() != mdp.n_states(h) || t.n_actions() != mdp.n_actions() {
                return Err(Error::structure(format!(
                    "family layer {h} is {}x{}, mdp layer is {}x{}",
                    t.n_states(),
                    t.n_actions(),
                    mdp.n_states(h),
                    mdp.n_actions()
                )));
            }
        }
        Ok(())
    }

    /// Largest component value outside `[lo, hi]`, if any, as `(h, c, value)`.
    pub fn range_violation(&self, lo: f64, hi: f64) -> Option<(usize, usize, f64)> {
        for (h, layer) in self.components.iter().enumerate() {
            for (c, t) in layer.iter().enumerate() {
                if let Some(&v) = t.values().iter().find(|v| !(lo..=hi).contains(*v)) {
                    return Some((h, c, v));
                }
            }
        }
        None
    }

    /// Index of the first component within `tol` of `t`.
    pub fn find_component(&self, h: usize, t: &LayerTable, tol: f64) -> Option<usize> {
        self.components[h].iter().position(|c| c.sup_distance(t) <= tol)
    }
}
