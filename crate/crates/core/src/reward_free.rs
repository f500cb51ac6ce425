//! Reward-free exploration (GOLF with the reward removed), offline
//! exploitation against a target reward, and the two supporting checks.

use serde::Serialize;

use crate::constructions::{build_two_layer, Construction};
use crate::error::{Error, Result};
use crate::family::{bellman_backup, RewardMode, ValueFunctionFamily, MEMBER_TOL};
use crate::golf::{confidence_set, golf_run, select_optimistic, Datasets, GolfConfig, RunLog};
use crate::mdp::{occupancy, policy_value_with, LayeredMdp, Policy};
use crate::table::LayerTable;

#[derive(Clone, Debug, Serialize)]
pub struct ExplorationOutput {
    /// `D^(t*-1)`: transitions of the first `t* - 1` episodes, rewards zero.
    pub datasets: Datasets,
    /// 1-based round minimizing `g^(t)_1(x_1, pi^(t)_1)`, least index on ties.
    pub t_star: usize,
    pub beta_rf: f64,
    pub log: RunLog,
    /// Largest deviation of the telescoping identity over all rounds.
    pub telescoping_gap: f64,
}

fn prefix(data: &Datasets, n: usize) -> Datasets {
    data.iter().map(|d| d[..n.min(d.len())].to_vec()).collect()
}

/// `sum_h E_{d^pi_g}[g_h - P_h g_{h+1}]` minus `g_1(x_1, pi_{g,1}(x_1))`.
pub fn telescoping_gap(mdp: &LayeredMdp, g: &ValueFunctionFamily, m: usize) -> f64 {
    let occ = occupancy(mdp, &g.greedy(m));
    let lhs: f64 = g
        .residuals(mdp, m, RewardMode::Zero)
        .iter()
        .enumerate()
        .map(|(h, d)| occ.expect(h, d))
        .sum();
    lhs - g.optimistic_value(m, mdp.initial_state())
}

/// Runs GOLF on the reward-zeroed MDP with family `G`. The reward tables of
/// `mdp` are discarded before anything else happens.
pub fn rf_explore(mdp: &LayeredMdp, g: &ValueFunctionFamily, rounds: usize, beta_rf: f64, seed: u64) -> Result<ExplorationOutput> {
    let blind = mdp.with_rewards(mdp.zero_tables())?;
    let mut config = GolfConfig::new(rounds, beta_rf, seed);
    config.diagnostics = false;
    let log = golf_run(&blind, g, &config)?;
    let mut t_star = 1;
    let mut best = f64::INFINITY;
    let mut gap: f64 = 0.0;
    let mut seen = std::collections::HashMap::new();
    for r in &log.rounds {
        if r.optimistic_value < best {
            best = r.optimistic_value;
            t_star = r.t;
        }
        let d = *seen.entry(r.member).or_insert_with(|| telescoping_gap(&blind, g, r.member));
        gap = gap.max(d.abs());
    }
    Ok(ExplorationOutput {
        datasets: prefix(&log.datasets, t_star - 1),
        t_star,
        beta_rf,
        log,
        telescoping_gap: gap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExploitOutput {
    pub member: usize,
    pub policy: Policy,
    /// `F^(off)`.
    pub offline_set: Vec<usize>,
}

fn with_target(data: &Datasets, reward: &[LayerTable]) -> Datasets {
    data.iter()
        .enumerate()
        .map(|(h, d)| d.iter().map(|t| crate::golf::Transition { r: reward[h].get(t.x, t.a), ..*t }).collect())
        .collect()
}

/// Offline confidence set on the exploration data with the target reward
/// filled in, then the most optimistic survivor.
pub fn rf_exploit(out: &ExplorationOutput, f: &ValueFunctionFamily, reward: &[LayerTable], x1: usize, beta_off: f64) -> Result<ExploitOutput> {
    if reward.len() != f.horizon() {
        return Err(Error::structure("target reward must have one table per layer"));
    }
    let data = with_target(&out.datasets, reward);
    let offline_set = confidence_set(f, &data, beta_off);
    let Some((member, _)) = select_optimistic(f, &offline_set, x1) else {
        return Err(Error::EmptyConfidenceSet { round: out.t_star });
    };
    Ok(ExploitOutput {
        member,
        policy: f.greedy(member),
        offline_set,
    })
}

/// `g_h = f_h - T_h f_{h+1} + P_h g_{h+1}`, `g_{H+1} = 0`.
pub fn residual_lift(mdp: &LayeredMdp, f: &[&LayerTable]) -> Vec<LayerTable> {
    let hz = mdp.horizon();
    let mut g: Vec<LayerTable> = Vec::with_capacity(hz);
    for h in (0..hz).rev() {
        let tf = bellman_backup(mdp, f.get(h + 1).copied(), h, RewardMode::Mdp);
        let pg = bellman_backup(mdp, g.last(), h, RewardMode::Zero);
        g.push(LayerTable::from_fn(mdp.n_states(h), mdp.n_actions(), |x, a| {
            f[h].get(x, a) - tf.get(x, a) + pg.get(x, a)
        }));
    }
    g.reverse();
    g
}

/// Smallest slack of `g_h >= f_h - Q^{pi_f}_h` over all cells (negative
/// means violated).
pub fn lift_slack(mdp: &LayeredMdp, f: &[&LayerTable]) -> f64 {
    let g = residual_lift(mdp, f);
    let pi = crate::family::greedy_policy(f);
    let q = policy_value_with(mdp, &pi, mdp.rewards()).q;
    let mut slack = f64::INFINITY;
    for h in 0..mdp.horizon() {
        for (i, v) in g[h].values().iter().enumerate() {
            slack = slack.min(v - (f[h].values()[i] - q[h].values()[i]));
        }
    }
    slack
}

#[derive(Clone, Debug, Serialize)]
pub struct InclusionReport {
    pub offline_set: Vec<usize>,
    pub exploration_set: Vec<usize>,
    /// Offline survivors with no residual-matching member in `G^(t*-1)`.
    pub violations: Vec<usize>,
    pub beta_off: f64,
    pub beta_rf: f64,
    pub threshold_met: bool,
}

/// `6 beta_off + 18 log(H max(|F|,|G|) / delta)`.
pub fn rf_beta_threshold(beta_off: f64, horizon: usize, f_len: usize, g_len: usize, delta: f64) -> f64 {
    6.0 * beta_off + 18.0 * ((horizon * f_len.max(g_len)) as f64 / delta).ln()
}

pub fn check_rf_vspace_inclusion(
    mdp: &LayeredMdp,
    f: &ValueFunctionFamily,
    g: &ValueFunctionFamily,
    out: &ExplorationOutput,
    beta_off: f64,
    delta: f64,
) -> InclusionReport {
    let offline_set = confidence_set(f, &with_target(&out.datasets, mdp.rewards()), beta_off);
    let exploration_set = confidence_set(g, &out.datasets, out.beta_rf);
    let gres: Vec<Vec<LayerTable>> = exploration_set
        .iter()
        .map(|&m| g.residuals(mdp, m, RewardMode::Zero))
        .collect();
    let violations = offline_set
        .iter()
        .copied()
        .filter(|&m| {
            let fr = f.residuals(mdp, m, RewardMode::Mdp);
            !gres
                .iter()
                .any(|gr| gr.iter().zip(&fr).all(|(a, b)| a.sup_distance(b) <= MEMBER_TOL))
        })
        .collect();
    InclusionReport {
        offline_set,
        exploration_set,
        violations,
        beta_off,
        beta_rf: out.beta_rf,
        threshold_met: out.beta_rf >= rf_beta_threshold(beta_off, mdp.horizon(), f.len(), g.len(), delta),
    }
}

/// Two-layer instance with a reward-free family `G` that satisfies the
/// compatibility assumption for `F`: `G_2` holds every signed difference
/// `1{a=j} - 1{a=k}` at `y`, and `G_1 = {0, eps2}`.
pub fn build_rf_pair(eps2: f64, instance: usize) -> Result<(Construction, ValueFunctionFamily)> {
    let c = build_two_layer(eps2, instance)?;
    let k = c.mdp.n_actions();
    let mut g2 = vec![LayerTable::zeros(2, k)];
    for j in 0..k {
        for l in 0..k {
            if j != l {
                let mut t = LayerTable::zeros(2, k);
                t.set(0, j, 1.0);
                t.set(0, l, -1.0);
                g2.push(t);
            }
        }
    }
    let g1 = vec![LayerTable::zeros(1, k), LayerTable::filled(1, k, eps2)];
    let g = ValueFunctionFamily::product(vec![g1, g2], usize::MAX)?;
    Ok((c, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::check_rf_completeness;

    #[test]
    fn zero_family_selects_first_round() {
        let c = build_two_layer(0.5, 1).unwrap();
        let g = ValueFunctionFamily::from_members(vec![c.mdp.zero_tables()]).unwrap();
        let out = rf_explore(&c.mdp, &g, 20, 1.0, 3).unwrap();
        assert_eq!(out.t_star, 1);
        assert!(out.datasets.iter().all(|d| d.is_empty()));
        assert!(out.log.rounds.iter().all(|r| r.optimistic_value == 0.0));
    }

    #[test]
    fn rf_pair_is_compatible() {
        let (c, g) = build_rf_pair(0.25, 3).unwrap();
        assert!(check_rf_completeness(&c.mdp, &c.family, &g).holds());
        assert_eq!(g.len(), 2 * 13);
    }

    #[test]
    fn last_layer_lift_is_tight() {
        let c = build_two_layer(0.25, 1).unwrap();
        let f = c.family.member(2);
        let g = residual_lift(&c.mdp, &f);
        let q = policy_value_with(&c.mdp, &c.family.greedy(2), c.mdp.rewards()).q;
        assert_eq!(g[1], f[1].zip_with(&q[1], |u, v| u - v));
        assert!(lift_slack(&c.mdp, &f) >= -1e-12);
    }

    #[test]
    fn huge_offline_width_keeps_everything() {
        let (c, g) = build_rf_pair(0.25, 3).unwrap();
        let out = rf_explore(&c.mdp, &g, 200, 5.0, 1).unwrap();
        assert!(out.telescoping_gap <= 1e-9);
        let ex = rf_exploit(&out, &c.family, c.mdp.rewards(), 0, 1e18).unwrap();
        assert_eq!(ex.offline_set.len(), c.family.len());
        assert_eq!(ex.member, 0);
    }
}
