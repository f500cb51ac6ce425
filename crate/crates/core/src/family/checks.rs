use serde::Serialize;

use crate::mdp::{optimal_values, LayeredMdp};
use crate::table::LayerTable;

use super::{bellman_backup, RewardMode, ValueFunctionFamily, MEMBER_TOL};

#[derive(Clone, Debug, Serialize)]
pub struct RealizabilityReport {
    pub realizable: bool,
    pub nearest_member: usize,
    /// `max_h ||f_h - Q*_h||_inf` for the nearest member.
    pub distance: f64,
}

pub fn check_realizability(mdp: &LayeredMdp, family: &ValueFunctionFamily, tol: f64) -> RealizabilityReport {
    let q = optimal_values(mdp).q;
    let mut best = (0, f64::INFINITY);
    for m in 0..family.len() {
        let d = (0..mdp.horizon())
            .map(|h| family.table(m, h).sup_distance(&q[h]))
            .fold(0.0, f64::max);
        if d < best.1 {
            best = (m, d);
        }
    }
    RealizabilityReport {
        realizable: best.1 <= tol,
        nearest_member: best.0,
        distance: best.1,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompletenessViolation {
    /// Layer whose backup left the component set.
    pub h: usize,
    /// Component of layer `h+1` being backed up (`None` for `f_{H+1} = 0`).
    pub next_component: Option<usize>,
    /// Distance from the backup to the nearest component of layer `h`.
    pub distance: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CompletenessReport {
    pub violations: Vec<CompletenessViolation>,
}

impl CompletenessReport {
    pub fn is_complete(&self) -> bool {
        self.violations.is_empty()
    }
}

fn nearest(set: &[LayerTable], t: &LayerTable) -> f64 {
    set.iter().map(|c| c.sup_distance(t)).fold(f64::INFINITY, f64::min)
}

fn closure_violations(mdp: &LayeredMdp, fam: &ValueFunctionFamily, reward: RewardMode) -> Vec<CompletenessViolation> {
    let hz = mdp.horizon();
    let mut out = Vec::new();
    for h in 0..hz {
        let nexts: Vec<Option<usize>> = if h + 1 < hz {
            (0..fam.components(h + 1).len()).map(Some).collect()
        } else {
            vec![None]
        };
        for c in nexts {
            let b = bellman_backup(mdp, c.map(|c| &fam.components(h + 1)[c]), h, reward);
            let d = nearest(fam.components(h), &b);
            if d > MEMBER_TOL {
                out.push(CompletenessViolation {
                    h,
                    next_component: c,
                    distance: d,
                });
            }
        }
    }
    out
}

/// Tests `T_h f_{h+1} in F_h` for every component `f_{h+1}` of `F_{h+1}`
/// (and `f_{H+1} = 0`).
pub fn check_completeness(mdp: &LayeredMdp, family: &ValueFunctionFamily) -> CompletenessReport {
    CompletenessReport {
        violations: closure_violations(mdp, family, RewardMode::Mdp),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualMismatch {
    pub h: usize,
    /// Component pair `(f_h, f_{h+1})` of F (`None` for `f_{H+1} = 0`).
    pub f_pair: (usize, Option<usize>),
    pub distance: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RfCompletenessReport {
    /// `P_h G_{h+1} in G_h` failures.
    pub part_a: Vec<CompletenessViolation>,
    /// `F_h - T_h F_{h+1} subset G_h - P_h G_{h+1}` failures.
    pub part_b: Vec<ResidualMismatch>,
}

impl RfCompletenessReport {
    pub fn holds(&self) -> bool {
        self.part_a.is_empty() && self.part_b.is_empty()
    }
}

fn residual_set(mdp: &LayeredMdp, fam: &ValueFunctionFamily, h: usize, reward: RewardMode) -> Vec<((usize, Option<usize>), LayerTable)> {
    let nexts: Vec<Option<usize>> = if h + 1 < mdp.horizon() {
        (0..fam.components(h + 1).len()).map(Some).collect()
    } else {
        vec![None]
    };
    let mut out = Vec::new();
    for c1 in nexts {
        let b = bellman_backup(mdp, c1.map(|c| &fam.components(h + 1)[c]), h, reward);
        for (c0, f) in fam.components(h).iter().enumerate() {
            out.push(((c0, c1), f.zip_with(&b, |u, v| u - v)));
        }
    }
    out
}

pub fn check_rf_completeness(mdp: &LayeredMdp, f: &ValueFunctionFamily, g: &ValueFunctionFamily) -> RfCompletenessReport {
    let part_a = closure_violations(mdp, g, RewardMode::Zero);
    let mut part_b = Vec::new();
    for h in 0..mdp.horizon() {
        let gres: Vec<LayerTable> = residual_set(mdp, g, h, RewardMode::Zero).into_iter().map(|(_, t)| t).collect();
        for (pair, r) in residual_set(mdp, f, h, RewardMode::Mdp) {
            let d = nearest(&gres, &r);
            if d > MEMBER_TOL {
                part_b.push(ResidualMismatch {
                    h,
                    f_pair: pair,
                    distance: d,
                });
            }
        }
    }
    RfCompletenessReport { part_a, part_b }
}
