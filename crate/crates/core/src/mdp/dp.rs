use serde::Serialize;

use crate::table::{argmax, LayerTable};

use super::{LayeredMdp, OccupancyMeasure, Policy};

/// Forward recursion `d_{h+1}(x') = sum_{x,a} d_h(x,a) P_h(x'|x,a)`.
pub fn occupancy(mdp: &LayeredMdp, policy: &Policy) -> OccupancyMeasure {
    let hz = mdp.horizon();
    let na = mdp.n_actions();
    let mut layers = Vec::with_capacity(hz);
    let mut marg = vec![0.0; mdp.n_states(0)];
    marg[mdp.initial_state()] = 1.0;
    for h in 0..hz {
        let d = LayerTable::from_fn(mdp.n_states(h), na, |x, a| marg[x] * policy.prob(h, x, a));
        if h + 1 < hz {
            let mut next = vec![0.0; mdp.n_states(h + 1)];
            for x in 0..mdp.n_states(h) {
                for a in 0..na {
                    let w = d.get(x, a);
                    if w == 0.0 {
                        continue;
                    }
                    for &(y, p) in mdp.next(h, x, a) {
                        next[y] += w * p;
                    }
                }
            }
            marg = next;
        }
        layers.push(d);
    }
    OccupancyMeasure::new(layers)
}

#[derive(Clone, Debug, Serialize)]
pub struct PolicyValue {
    /// `J(pi) = V_1(x_1)`.
    pub value: f64,
    pub v: Vec<Vec<f64>>,
    pub q: Vec<LayerTable>,
}

pub fn policy_value(mdp: &LayeredMdp, policy: &Policy) -> PolicyValue {
    policy_value_with(mdp, policy, mdp.rewards())
}

/// Policy evaluation under arbitrary per-layer reward tables.
pub fn policy_value_with(mdp: &LayeredMdp, policy: &Policy, rewards: &[LayerTable]) -> PolicyValue {
    let hz = mdp.horizon();
    let na = mdp.n_actions();
    let mut q = vec![LayerTable::zeros(0, 0); hz];
    let mut v = vec![Vec::new(); hz];
    for h in (0..hz).rev() {
        let ns = mdp.n_states(h);
        let vn: &[f64] = if h + 1 < hz { &v[h + 1] } else { &[] };
        let qh = LayerTable::from_fn(ns, na, |x, a| rewards[h].get(x, a) + mdp.expect_next(h, x, a, vn));
        v[h] = (0..ns)
            .map(|x| qh.row(x).iter().zip(policy.dist(h, x)).map(|(q, p)| q * p).sum())
            .collect();
        q[h] = qh;
    }
    PolicyValue {
        value: v[0][mdp.initial_state()],
        v,
        q,
    }
}

#[derive(Clone, Debug)]
pub struct OptimalValues {
    pub value: f64,
    pub q: Vec<LayerTable>,
    pub v: Vec<Vec<f64>>,
    /// Greedy with least-index ties.
    pub policy: Policy,
}

pub fn optimal_values(mdp: &LayeredMdp) -> OptimalValues {
    optimal_values_with(mdp, mdp.rewards())
}

pub fn optimal_values_with(mdp: &LayeredMdp, rewards: &[LayerTable]) -> OptimalValues {
    let hz = mdp.horizon();
    let na = mdp.n_actions();
    let mut q = vec![LayerTable::zeros(0, 0); hz];
    let mut v = vec![Vec::new(); hz];
    let mut acts = vec![Vec::new(); hz];
    for h in (0..hz).rev() {
        let ns = mdp.n_states(h);
        let vn: &[f64] = if h + 1 < hz { &v[h + 1] } else { &[] };
        let qh = LayerTable::from_fn(ns, na, |x, a| rewards[h].get(x, a) + mdp.expect_next(h, x, a, vn));
        acts[h] = (0..ns).map(|x| argmax(qh.row(x))).collect::<Vec<_>>();
        v[h] = (0..ns).map(|x| qh.get(x, acts[h][x])).collect();
        q[h] = qh;
    }
    OptimalValues {
        value: v[0][mdp.initial_state()],
        q,
        v,
        policy: Policy::deterministic(&acts, na),
    }
}

#[derive(Clone, Debug)]
pub struct Reach {
    pub prob: f64,
    /// Deterministic Markov policy attaining `prob`.
    pub policy: Policy,
}

/// `sup_pi P^pi(x_h = x)`, or `sup_pi d_h^pi(x,a)` when `action` is given
/// (the maximizing policy then plays `a` at `x`; the value is the same).
pub fn max_reach(mdp: &LayeredMdp, h: usize, x: usize, action: Option<usize>) -> Reach {
    let hz = mdp.horizon();
    let na = mdp.n_actions();
    let mut acts: Vec<Vec<usize>> = (0..hz).map(|k| vec![0; mdp.n_states(k)]).collect();
    if let Some(a) = action {
        acts[h][x] = a;
    }
    let mut w = vec![0.0; mdp.n_states(h)];
    w[x] = 1.0;
    for k in (0..h).rev() {
        let mut nw = vec![0.0; mdp.n_states(k)];
        for y in 0..mdp.n_states(k) {
            let mut best = 0;
            let mut bv = f64::NEG_INFINITY;
            for a in 0..na {
                let val = mdp.expect_next(k, y, a, &w);
                if val > bv {
                    bv = val;
                    best = a;
                }
            }
            nw[y] = bv;
            acts[k][y] = best;
        }
        w = nw;
    }
    Reach {
        prob: w[mdp.initial_state()],
        policy: Policy::deterministic(&acts, na),
    }
}

/// Maximum reachability of every layer-`h` state.
pub fn max_reach_layer(mdp: &LayeredMdp, h: usize) -> Vec<f64> {
    (0..mdp.n_states(h)).map(|x| max_reach(mdp, h, x, None).prob).collect()
}
