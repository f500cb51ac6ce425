//! Random instance generators used by tests, claim suites and experiments.

use rand::seq::index::sample;
use rand::Rng;

use crate::family::ValueFunctionFamily;
use crate::mdp::{optimal_values, LayeredMdp, Policy, Row};
use crate::table::LayerTable;

#[derive(Clone, Copy, Debug)]
pub struct RandomMdpSpec {
    pub horizon: usize,
    pub min_states: usize,
    pub max_states: usize,
    pub n_actions: usize,
    /// Largest support of a next-state distribution.
    pub max_support: usize,
}

impl RandomMdpSpec {
    pub fn small(horizon: usize, max_states: usize, n_actions: usize) -> Self {
        Self {
            horizon,
            min_states: 1,
            max_states,
            n_actions,
            max_support: max_states,
        }
    }
}

pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, support: &[usize]) -> Row {
    let w: Vec<f64> = support.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut row: Row = support.iter().zip(&w).map(|(&y, &p)| (y, p / s)).collect();
    // Put the rounding error on the largest entry.
    let total: f64 = row.iter().map(|e| e.1).sum();
    let big = (0..row.len()).max_by(|&i, &j| row[i].1.total_cmp(&row[j].1)).unwrap();
    row[big].1 += 1.0 - total;
    row
}

/// Layer 0 has a single state; rewards are uniform in `[0, 1/H]` so every
/// return lies in `[0, 1]`.
pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, spec: RandomMdpSpec) -> LayeredMdp {
    let hz = spec.horizon;
    let mut sizes = vec![1usize];
    for _ in 1..hz {
        sizes.push(rng.gen_range(spec.min_states.max(1)..=spec.max_states.max(1)));
    }
    let na = spec.n_actions;
    let mut transitions = Vec::with_capacity(hz.saturating_sub(1));
    for h in 0..hz.saturating_sub(1) {
        let n_next = sizes[h + 1];
        let layer = (0..sizes[h])
            .map(|_| {
                (0..na)
                    .map(|_| {
                        let k = rng.gen_range(1..=spec.max_support.clamp(1, n_next));
                        let mut supp = sample(rng, n_next, k).into_vec();
                        supp.sort_unstable();
                        random_distribution(rng, &supp)
                    })
                    .collect()
            })
            .collect();
        transitions.push(layer);
    }
    let rmax = 1.0 / hz as f64;
    let rewards = sizes
        .iter()
        .map(|&n| LayerTable::from_fn(n, na, |_, _| rng.gen_range(0.0..rmax)))
        .collect();
    LayeredMdp::from_parts(&sizes, na, transitions, rewards, 0).expect("generated shapes are consistent")
}

pub fn random_table<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, lo: f64, hi: f64) -> LayerTable {
    LayerTable::from_fn(n_states, n_actions, |_, _| rng.gen_range(lo..hi))
}

pub fn random_member<R: Rng + ?Sized>(rng: &mut R, mdp: &LayeredMdp) -> Vec<LayerTable> {
    (0..mdp.horizon())
        .map(|h| random_table(rng, mdp.n_states(h), mdp.n_actions(), 0.0, 1.0))
        .collect()
}

/// `n` members with entries uniform in `[0,1]`; optionally `Q*` placed at a
/// random index.
pub fn random_family<R: Rng + ?Sized>(rng: &mut R, mdp: &LayeredMdp, n: usize, with_qstar: bool) -> ValueFunctionFamily {
    let mut members: Vec<Vec<LayerTable>> = (0..n).map(|_| random_member(rng, mdp)).collect();
    if with_qstar {
        let q = optimal_values(mdp).q;
        let at = rng.gen_range(0..=members.len().saturating_sub(1));
        if members.is_empty() {
            members.push(q);
        } else {
            members[at] = q;
        }
    }
    ValueFunctionFamily::from_members(members).expect("members share the mdp shape")
}

pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, mdp: &LayeredMdp, deterministic: bool) -> Policy {
    let na = mdp.n_actions();
    if deterministic {
        let acts: Vec<Vec<usize>> = (0..mdp.horizon())
            .map(|h| (0..mdp.n_states(h)).map(|_| rng.gen_range(0..na)).collect())
            .collect();
        return Policy::deterministic(&acts, na);
    }
    let all: Vec<usize> = (0..na).collect();
    let tables = (0..mdp.horizon())
        .map(|h| {
            let mut t = LayerTable::zeros(mdp.n_states(h), na);
            for x in 0..mdp.n_states(h) {
                for (a, p) in random_distribution(rng, &all) {
                    t.set(x, a, p);
                }
            }
            t
        })
        .collect();
    Policy::from_tables(tables).expect("rows are distributions")
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mdp::validate_mdp;

    #[test]
    fn generated_mdps_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = random_mdp(&mut rng, RandomMdpSpec::small(4, 5, 3));
            let rep = validate_mdp(&m);
            assert!(rep.is_valid(), "{:?}", rep.violations);
            random_policy(&mut rng, &m, false);
        }
    }
}
