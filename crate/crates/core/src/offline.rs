//! Offline baselines on data drawn from a logging distribution `mu`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::DistributionFamily;
use crate::error::{Error, Result};
use crate::family::{greedy_policy, ValueFunctionFamily};
use crate::golf::{squared_bellman_loss, Datasets, LossTracker, Transition};
use crate::mdp::{categorical, LayeredMdp, Policy};
use crate::table::LayerTable;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OfflineDataset {
    pub layers: Datasets,
    pub mu: Vec<LayerTable>,
    pub seed: u64,
}

impl OfflineDataset {
    /// Empirical `(x, a)` frequencies of layer `h`.
    pub fn frequencies(&self, h: usize) -> LayerTable {
        let m = &self.mu[h];
        let mut t = LayerTable::zeros(m.n_states(), m.n_actions());
        let n = self.layers[h].len().max(1) as f64;
        for tr in &self.layers[h] {
            t.set(tr.x, tr.a, t.get(tr.x, tr.a) + 1.0 / n);
        }
        t
    }
}

/// `n` i.i.d. tuples per layer; layer `h` draws from its own ChaCha stream.
pub fn generate_offline(mdp: &LayeredMdp, mu: &DistributionFamily, n: usize, seed: u64) -> Result<OfflineDataset> {
    if mu.0.len() != mdp.horizon() {
        return Err(Error::structure("mu must have one table per layer"));
    }
    let mut layers = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let m = mu.layer(h);
        let na = mdp.n_actions();
        let cells = WeightedIndex::new(m.values()).map_err(|e| Error::param(format!("mu layer {h}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(h as u64);
        let data = (0..n)
            .map(|_| {
                let c = cells.sample(&mut rng);
                let (x, a) = (c / na, c % na);
                let next = (h + 1 < mdp.horizon()).then(|| categorical(&mut rng, mdp.next(h, x, a).iter().copied()));
                Transition {
                    x,
                    a,
                    r: mdp.reward(h, x, a),
                    next,
                }
            })
            .collect();
        layers.push(data);
    }
    Ok(OfflineDataset {
        layers,
        mu: mu.0.clone(),
        seed,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MsboFit {
    pub member: usize,
    pub policy: Policy,
    /// Objective of every member; `objectives[member]` is the minimum.
    pub objectives: Vec<f64>,
}

/// `argmin_f sum_h (L_h(f_h, f_{h+1}) - min_{f'_h} L_h(f'_h, f_{h+1}))`,
/// least index on ties.
pub fn msbo(data: &OfflineDataset, family: &ValueFunctionFamily) -> MsboFit {
    let mut tracker = LossTracker::new(family);
    tracker.recompute(family, &data.layers);
    let objectives: Vec<f64> = (0..family.len()).map(|m| tracker.excess(family, m).iter().sum()).collect();
    let mut member = 0;
    for (m, &v) in objectives.iter().enumerate() {
        if v < objectives[member] {
            member = m;
        }
    }
    MsboFit {
        member,
        policy: family.greedy(member),
        objectives,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FqiFit {
    /// Chosen component of `F_h` per layer.
    pub components: Vec<usize>,
    pub tables: Vec<LayerTable>,
    pub policy: Policy,
    /// Layers whose dataset was empty (component 0 was taken).
    pub empty_layers: Vec<usize>,
}

/// Backward least-squares regression onto `r + max_a' f_{h+1}(x', a')`.
pub fn fqi(data: &OfflineDataset, family: &ValueFunctionFamily) -> FqiFit {
    let hz = family.horizon();
    let mut components = vec![0; hz];
    let mut empty_layers = Vec::new();
    for h in (0..hz).rev() {
        let d = &data.layers[h];
        if d.is_empty() {
            empty_layers.push(h);
            continue;
        }
        let next = (h + 1 < hz).then(|| &family.components(h + 1)[components[h + 1]]);
        let mut best = (f64::INFINITY, 0);
        for (c, f) in family.components(h).iter().enumerate() {
            let l = squared_bellman_loss(d, f, next);
            if l < best.0 {
                best = (l, c);
            }
        }
        components[h] = best.1;
    }
    empty_layers.reverse();
    let tables: Vec<LayerTable> = (0..hz).map(|h| family.components(h)[components[h]].clone()).collect();
    let policy = greedy_policy(&tables.iter().collect::<Vec<_>>());
    FqiFit {
        components,
        tables,
        policy,
        empty_layers,
    }
}

/// Logging distribution that puts no mass on any cell from which the
/// deterministic policy `pi` can be followed to completion: at each layer
/// the cells `(x, pi(x))` of states reachable under `pi` are dropped and
/// the rest of the layer is uniform over cells outside the forward closure
/// of the dropped ones.
pub fn avoid_policy_mu(mdp: &LayeredMdp, pi: &Policy) -> Result<DistributionFamily> {
    let hz = mdp.horizon();
    let na = mdp.n_actions();
    let occ = crate::mdp::occupancy(mdp, pi);
    let mut banned: Vec<Vec<bool>> = (0..hz).map(|h| vec![false; mdp.n_states(h)]).collect();
    let mut layers = Vec::with_capacity(hz);
    for h in 0..hz {
        let mut t = LayerTable::zeros(mdp.n_states(h), na);
        for x in 0..mdp.n_states(h) {
            for a in 0..na {
                let on_path = occ.get(h, x, a) > 0.0;
                if banned[h][x] || on_path {
                    for &(y, p) in mdp.next(h, x, a) {
                        if p > 0.0 {
                            banned[h + 1][y] = true;
                        }
                    }
                } else {
                    t.set(x, a, 1.0);
                }
            }
        }
        let s = t.sum();
        if s <= 0.0 {
            return Err(Error::param(format!("layer {h} has no cell off the policy's subtree")));
        }
        layers.push(t.map(|v| v / s));
    }
    DistributionFamily::new(layers, mdp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_tree, build_two_layer};
    use crate::mdp::{optimal_values, policy_value};

    #[test]
    fn point_mass_mu() {
        let c = build_two_layer(0.25, 1).unwrap();
        let mut l0 = LayerTable::zeros(1, 4);
        l0.set(0, 2, 1.0);
        let mut l1 = LayerTable::zeros(2, 4);
        l1.set(1, 3, 1.0);
        let mu = DistributionFamily::new(vec![l0, l1], &c.mdp).unwrap();
        let d = generate_offline(&c.mdp, &mu, 50, 4).unwrap();
        assert!(d.layers[0].iter().all(|t| (t.x, t.a) == (0, 2)));
        assert!(d.layers[1].iter().all(|t| (t.x, t.a) == (1, 3) && t.next.is_none()));
        let again = generate_offline(&c.mdp, &mu, 50, 4).unwrap();
        assert_eq!(d.layers, again.layers);
    }

    #[test]
    fn singleton_family() {
        let c = build_two_layer(0.5, 1).unwrap();
        let qstar = optimal_values(&c.mdp).q;
        let fam = ValueFunctionFamily::from_members(vec![qstar.clone()]).unwrap();
        let d = generate_offline(&c.mdp, &DistributionFamily::uniform(&c.mdp), 30, 0).unwrap();
        assert_eq!(msbo(&d, &fam).member, 0);
        assert_eq!(fqi(&d, &fam).tables, qstar);
    }

    #[test]
    fn empty_layer_is_flagged() {
        let c = build_two_layer(0.5, 1).unwrap();
        let mut d = generate_offline(&c.mdp, &DistributionFamily::uniform(&c.mdp), 10, 0).unwrap();
        d.layers[1].clear();
        let fit = fqi(&d, &c.family);
        assert_eq!(fit.empty_layers, vec![1]);
        assert_eq!(fit.components[1], 0);
    }

    #[test]
    fn avoiding_the_optimal_path_fails() {
        let c = build_tree(3, 8, usize::MAX, 7).unwrap();
        let opt = optimal_values(&c.mdp);
        let mu = avoid_policy_mu(&c.mdp, &opt.policy).unwrap();
        let d = generate_offline(&c.mdp, &mu, 2000, 1).unwrap();
        let fit = msbo(&d, &c.family);
        assert!(opt.value - policy_value(&c.mdp, &fit.policy).value >= 0.5);
    }
}
