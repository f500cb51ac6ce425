//! Generators for the structured instances: binary-tree MDPs with indicator
//! families, one-step bandit families, the two-layer family, rich-observation
//! and exogenous-noise augmentations, and exogenous block MDPs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complexity::{self, be_dim, TestType, Variant};
use crate::coverage::{coverability, generalized_concentrability, DistributionFamily, PolicySet};
use crate::error::{Error, Result};
use crate::family::{check_completeness, check_realizability, MEMBER_TOL};
use crate::family::ValueFunctionFamily;
use crate::mdp::{occupancy, optimal_values, LayeredMdp, Row};
use crate::random::{random_distribution, random_mdp, RandomMdpSpec};
use crate::table::LayerTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "property", rename_all = "snake_case")]
pub enum ExpectedProperty {
    Complete,
    Realizable,
    /// `C_cov <= bound` for the induced policy set or all policies.
    CoverabilityAtMost { bound: f64, policies: PolicyScope },
    /// `C_gen(d^{pi*}, F) <= bound` with induced policies.
    GenConcentrabilityAtOptimumAtMost { bound: f64 },
    /// `dim_sq_BE(eps, layer) >= bound` for every `eps < eps_below`.
    SqBeDimAtLeast { bound: usize, layer: usize, eps_below: f64 },
    OptimalValue { value: f64 },
    LogFamilySizeAtMost { bound: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyScope {
    Induced,
    All,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstructionManifest {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub properties: Vec<ExpectedProperty>,
}

#[derive(Clone, Debug)]
pub struct Construction {
    pub mdp: LayeredMdp,
    pub family: ValueFunctionFamily,
    pub manifest: ConstructionManifest,
}

fn params(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
    items.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn floor_log2(x: usize) -> usize {
    (usize::BITS - 1 - x.leading_zeros()) as usize
}

/// Effective depth `min{H, floor(log2 X), C}` of the tree construction.
pub fn tree_depth(horizon: usize, states: usize, c: usize) -> usize {
    horizon.min(floor_log2(states.max(1))).min(c)
}

/// Deterministic binary tree with `H' = min{H, floor(log2 X), C}` layers
/// (`2^H' - 1` states), actions `left`/`right`, reward 1 at the single
/// (leaf, action) pair `leaf_index`. The family is the product of per-layer
/// indicator sets.
pub fn build_tree(horizon: usize, states: usize, c: usize, leaf_index: usize) -> Result<Construction> {
    let depth = tree_depth(horizon, states, c);
    if depth == 0 {
        return Err(Error::param(format!(
            "tree needs H >= 1, X >= 2 and C >= 1 (got H={horizon}, X={states}, C={c})"
        )));
    }
    let leaves = 1usize << depth;
    if leaf_index >= leaves {
        return Err(Error::param(format!("leaf_index {leaf_index} out of range (< {leaves})")));
    }
    let sizes: Vec<usize> = (0..depth).map(|h| 1 << h).collect();
    let transitions: Vec<Vec<Vec<Row>>> = (0..depth - 1)
        .map(|h| (0..sizes[h]).map(|x| vec![vec![(2 * x, 1.0)], vec![(2 * x + 1, 1.0)]]).collect())
        .collect();
    let mut rewards: Vec<LayerTable> = sizes.iter().map(|&n| LayerTable::zeros(n, 2)).collect();
    rewards[depth - 1].set(leaf_index / 2, leaf_index % 2, 1.0);
    let layers = sizes
        .iter()
        .enumerate()
        .map(|(h, &n)| (0..n).map(|x| format!("n{h}_{x:0w$b}", w = h.max(1))).collect())
        .collect();
    let mdp = LayeredMdp::new(vec!["left".into(), "right".into()], layers, transitions, rewards, 0)?;
    let components: Vec<Vec<LayerTable>> = sizes
        .iter()
        .map(|&n| {
            (0..n * 2)
                .map(|i| {
                    let mut t = LayerTable::zeros(n, 2);
                    t.set(i / 2, i % 2, 1.0);
                    t
                })
                .collect()
        })
        .collect();
    let family = ValueFunctionFamily::product(components, 1 << 24)?;
    let manifest = ConstructionManifest {
        name: "tree".into(),
        params: params(&[
            ("H", horizon as f64),
            ("X", states as f64),
            ("C", c as f64),
            ("depth", depth as f64),
            ("leaf_index", leaf_index as f64),
        ]),
        properties: vec![
            ExpectedProperty::Complete,
            ExpectedProperty::Realizable,
            ExpectedProperty::LogFamilySizeAtMost {
                bound: depth as f64 * (2.0 * states as f64).ln(),
            },
            ExpectedProperty::GenConcentrabilityAtOptimumAtMost { bound: depth as f64 },
            ExpectedProperty::OptimalValue { value: 1.0 },
        ],
    };
    Ok(Construction { mdp, family, manifest })
}

fn integer_inverse(eps: f64, what: &str) -> Result<usize> {
    let inv = 1.0 / eps;
    let k = inv.round();
    if !(eps > 0.0 && eps <= 0.5) || (inv - k).abs() > 1e-9 {
        return Err(Error::param(format!("{what} must be 1/k for an integer k >= 2 (got {eps})")));
    }
    Ok(k as usize)
}

/// Two-step encoding of a Bernoulli bandit: layer 0 picks an arm, layer 1 is
/// `win` (reward 1) or `lose` (reward 0) for every action.
fn bernoulli_bandit(means: &[f64]) -> Result<LayeredMdp> {
    let k = means.len();
    let actions = (0..k).map(|a| format!("arm{a}")).collect();
    let layers = vec![vec!["x1".to_string()], vec!["win".to_string(), "lose".to_string()]];
    let transitions = vec![vec![means.iter().map(|&p| vec![(0, p), (1, 1.0 - p)]).collect()]];
    let mut r2 = LayerTable::zeros(2, k);
    r2.row_mut(0).iter_mut().for_each(|v| *v = 1.0);
    LayeredMdp::new(actions, layers, transitions, vec![LayerTable::zeros(1, k), r2], 0)
}

fn bandit_second_layer(k: usize) -> LayerTable {
    let mut t = LayerTable::zeros(2, k);
    t.row_mut(0).iter_mut().for_each(|v| *v = 1.0);
    t
}

/// The `A = 1/eps1` bandit instances with means `1/2 + eps1 1{a = i}`.
/// Every instance shares the family `f^(j)_1(x_1, a) = 1/2 + eps1 1{a = j}`
/// (second layer equal to the true win/lose reward).
pub fn build_bandit_family(eps1: f64) -> Result<Vec<Construction>> {
    let k = integer_inverse(eps1, "eps1")?;
    let members: Vec<Vec<LayerTable>> = (0..k)
        .map(|j| {
            vec![
                LayerTable::from_fn(1, k, |_, a| 0.5 + if a == j { eps1 } else { 0.0 }),
                bandit_second_layer(k),
            ]
        })
        .collect();
    let family = ValueFunctionFamily::from_members(members)?;
    (0..k)
        .map(|i| {
            let means: Vec<f64> = (0..k).map(|a| 0.5 + if a == i { eps1 } else { 0.0 }).collect();
            Ok(Construction {
                mdp: bernoulli_bandit(&means)?,
                family: family.clone(),
                manifest: ConstructionManifest {
                    name: "bandit".into(),
                    params: params(&[("eps1", eps1), ("A", k as f64), ("instance", i as f64)]),
                    properties: vec![
                        ExpectedProperty::Complete,
                        ExpectedProperty::Realizable,
                        ExpectedProperty::SqBeDimAtLeast {
                            bound: k - 1,
                            layer: 0,
                            eps_below: eps1,
                        },
                        ExpectedProperty::OptimalValue { value: 0.5 + eps1 },
                    ],
                },
            })
        })
        .collect()
}

/// Two-layer instance: from `x1` every action moves to `y` w.p. `eps2` and
/// to `z` otherwise; at `y` action `instance` pays 1.
pub fn build_two_layer(eps2: f64, instance: usize) -> Result<Construction> {
    let k = integer_inverse(eps2, "eps2")?;
    if instance >= k {
        return Err(Error::param(format!("instance {instance} out of range (< {k})")));
    }
    let actions = (0..k).map(|a| format!("a{a}")).collect();
    let layers = vec![vec!["x1".to_string()], vec!["y".to_string(), "z".to_string()]];
    let transitions = vec![vec![(0..k).map(|_| vec![(0, eps2), (1, 1.0 - eps2)]).collect()]];
    let mut r2 = LayerTable::zeros(2, k);
    r2.set(0, instance, 1.0);
    let mdp = LayeredMdp::new(actions, layers, transitions, vec![LayerTable::zeros(1, k), r2], 0)?;
    let members = (0..k)
        .map(|j| {
            let mut f2 = LayerTable::zeros(2, k);
            f2.set(0, j, 1.0);
            vec![LayerTable::filled(1, k, eps2), f2]
        })
        .collect();
    let family = ValueFunctionFamily::from_members(members)?;
    Ok(Construction {
        mdp,
        family,
        manifest: ConstructionManifest {
            name: "two-layer".into(),
            params: params(&[("eps2", eps2), ("A", k as f64), ("instance", instance as f64)]),
            properties: vec![
                ExpectedProperty::Complete,
                ExpectedProperty::Realizable,
                ExpectedProperty::CoverabilityAtMost {
                    bound: 2.0,
                    policies: PolicyScope::Induced,
                },
                ExpectedProperty::SqBeDimAtLeast {
                    bound: k - 1,
                    layer: 1,
                    eps_below: eps2,
                },
                ExpectedProperty::OptimalValue { value: eps2 },
            ],
        },
    })
}

/// Arm means `0.9 - 0.8 |a/(K-1) - theta|^q` (a tent for `q = 1`).
pub fn peak_means(arms: usize, theta: f64, q: f64) -> Vec<f64> {
    (0..arms)
        .map(|a| 0.9 - 0.8 * (a as f64 / (arms - 1) as f64 - theta).abs().powf(q))
        .collect()
}

/// Bandit with `arms` arms whose means peak at `theta_grid[instance]`; the
/// family holds one member per grid point.
pub fn build_peak_bandit(arms: usize, grid: usize, instance: usize, q: f64) -> Result<Construction> {
    if arms < 2 || grid < 2 || instance >= grid || !(q > 0.0) {
        return Err(Error::param("peak bandit needs arms >= 2, grid >= 2, instance < grid, q > 0"));
    }
    let theta = |j: usize| j as f64 / (grid - 1) as f64;
    let means = peak_means(arms, theta(instance), q);
    let best = means.iter().copied().fold(0.0, f64::max);
    let mdp = bernoulli_bandit(&means)?;
    let f1: Vec<LayerTable> = (0..grid)
        .map(|j| {
            let m = peak_means(arms, theta(j), q);
            LayerTable::from_fn(1, arms, |_, a| m[a])
        })
        .collect();
    let family = ValueFunctionFamily::product(vec![f1, vec![bandit_second_layer(arms)]], grid)?;
    Ok(Construction {
        mdp,
        family,
        manifest: ConstructionManifest {
            name: "peak-bandit".into(),
            params: params(&[
                ("arms", arms as f64),
                ("grid", grid as f64),
                ("instance", instance as f64),
                ("q", q),
            ]),
            properties: vec![
                ExpectedProperty::Complete,
                ExpectedProperty::Realizable,
                ExpectedProperty::OptimalValue { value: best },
            ],
        },
    })
}

/// Emission `q_h(. | s)` as sparse `(observation, prob)` rows.
pub type Emission = Vec<Vec<Vec<(usize, f64)>>>;

#[derive(Clone, Debug)]
pub struct BlockMdp {
    pub mdp: LayeredMdp,
    /// `decoder[h][o]` is the latent state emitting observation `o`.
    pub decoder: Vec<Vec<usize>>,
}

/// Pushes a latent MDP through an emission with disjoint supports.
/// `n_obs[h]` is the observation count of layer `h`; layer 0 must emit a
/// point mass so the initial observation stays deterministic.
pub fn augment_rich_obs(mdp: &LayeredMdp, emission: &Emission, n_obs: &[usize]) -> Result<BlockMdp> {
    let hz = mdp.horizon();
    if emission.len() != hz || n_obs.len() != hz {
        return Err(Error::structure("emission must cover every layer"));
    }
    let mut decoder = Vec::with_capacity(hz);
    for h in 0..hz {
        if emission[h].len() != mdp.n_states(h) {
            return Err(Error::structure(format!("emission layer {h} has {} rows", emission[h].len())));
        }
        let mut dec = vec![usize::MAX; n_obs[h]];
        for (s, row) in emission[h].iter().enumerate() {
            let total: f64 = row.iter().map(|e| e.1).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::structure(format!("emission ({h},{s}) sums to {total}")));
            }
            for &(o, p) in row {
                if o >= n_obs[h] {
                    return Err(Error::structure(format!("emission ({h},{s}) emits unknown observation {o}")));
                }
                if p <= 0.0 {
                    continue;
                }
                if dec[o] != usize::MAX && dec[o] != s {
                    return Err(Error::param(format!(
                        "observation {o} of layer {h} is emitted by states {} and {s}",
                        dec[o]
                    )));
                }
                dec[o] = s;
            }
        }
        if let Some(o) = dec.iter().position(|&s| s == usize::MAX) {
            return Err(Error::param(format!("observation {o} of layer {h} is never emitted")));
        }
        decoder.push(dec);
    }
    let s0 = mdp.initial_state();
    let pos: Vec<&(usize, f64)> = emission[0][s0].iter().filter(|e| e.1 > 0.0).collect();
    if pos.len() != 1 {
        return Err(Error::param("layer-0 emission of the initial state must be a point mass"));
    }
    let initial = pos[0].0;
    let na = mdp.n_actions();
    let transitions = (0..hz - 1)
        .map(|h| {
            (0..n_obs[h])
                .map(|o| {
                    let s = decoder[h][o];
                    (0..na)
                        .map(|a| {
                            let mut row = Vec::new();
                            for &(s2, p) in mdp.next(h, s, a) {
                                for &(o2, q) in &emission[h + 1][s2] {
                                    if q > 0.0 {
                                        row.push((o2, p * q));
                                    }
                                }
                            }
                            row
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let rewards = (0..hz)
        .map(|h| LayerTable::from_fn(n_obs[h], na, |o, a| mdp.reward(h, decoder[h][o], a)))
        .collect();
    let layers = (0..hz)
        .map(|h| (0..n_obs[h]).map(|o| format!("{}#{o}", mdp.state_labels(h)[decoder[h][o]])).collect())
        .collect();
    let out = LayeredMdp::new(mdp.actions().to_vec(), layers, transitions, rewards, initial)?;
    Ok(BlockMdp { mdp: out, decoder })
}

/// Observation multiplicity `m` per latent state with random emission
/// weights (layer 0 keeps a single observation per state).
pub fn random_emission<R: Rng + ?Sized>(rng: &mut R, mdp: &LayeredMdp, m: usize) -> (Emission, Vec<usize>) {
    let mut em = Vec::with_capacity(mdp.horizon());
    let mut n_obs = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let k = if h == 0 { 1 } else { m.max(1) };
        em.push(
            (0..mdp.n_states(h))
                .map(|s| {
                    let block: Vec<usize> = (s * k..(s + 1) * k).collect();
                    random_distribution(rng, &block)
                })
                .collect(),
        );
        n_obs.push(mdp.n_states(h) * k);
    }
    (em, n_obs)
}

#[derive(Clone, Debug)]
pub struct ExogenousMdp {
    pub mdp: LayeredMdp,
    /// `(endogenous state, exogenous state)` of each product state.
    pub factors: Vec<Vec<(usize, usize)>>,
}

/// Product of an MDP with an action-independent chain. `exo_chain[h][xi]` is
/// the next-layer distribution of `xi`; `exo_sizes[h]` the chain's layer
/// sizes. Only exogenous states with positive marginal are kept.
pub fn augment_exogenous(
    mdp: &LayeredMdp,
    exo_chain: &[Vec<Vec<(usize, f64)>>],
    exo_sizes: &[usize],
    exo_init: usize,
) -> Result<ExogenousMdp> {
    let hz = mdp.horizon();
    if exo_sizes.len() != hz || exo_chain.len() != hz - 1 || exo_init >= exo_sizes[0] {
        return Err(Error::structure("exogenous chain shape does not match the horizon"));
    }
    for (h, layer) in exo_chain.iter().enumerate() {
        if layer.len() != exo_sizes[h] {
            return Err(Error::structure(format!("exogenous layer {h} has {} rows", layer.len())));
        }
        for (xi, row) in layer.iter().enumerate() {
            let total: f64 = row.iter().map(|e| e.1).sum();
            if (total - 1.0).abs() > 1e-12 || row.iter().any(|e| e.0 >= exo_sizes[h + 1] || e.1 < 0.0) {
                return Err(Error::structure(format!("exogenous row ({h},{xi}) is not a distribution")));
            }
        }
    }
    // Exogenous marginals.
    let mut marg = vec![vec![0.0; 0]; hz];
    marg[0] = vec![0.0; exo_sizes[0]];
    marg[0][exo_init] = 1.0;
    for h in 0..hz - 1 {
        let mut next = vec![0.0; exo_sizes[h + 1]];
        for (xi, row) in exo_chain[h].iter().enumerate() {
            for &(x2, p) in row {
                next[x2] += marg[h][xi] * p;
            }
        }
        marg[h + 1] = next;
    }
    let live: Vec<Vec<usize>> = marg.iter().map(|m| (0..m.len()).filter(|&i| m[i] > 0.0).collect()).collect();
    let index: Vec<Vec<Option<usize>>> = (0..hz)
        .map(|h| {
            let mut v = vec![None; exo_sizes[h]];
            for (i, &xi) in live[h].iter().enumerate() {
                v[xi] = Some(i);
            }
            v
        })
        .collect();
    let factors: Vec<Vec<(usize, usize)>> = (0..hz)
        .map(|h| {
            (0..mdp.n_states(h))
                .flat_map(|s| live[h].iter().map(move |&xi| (s, xi)))
                .collect()
        })
        .collect();
    let id = |h: usize, s: usize, xi: usize| s * live[h].len() + index[h][xi].unwrap();
    let na = mdp.n_actions();
    let transitions = (0..hz - 1)
        .map(|h| {
            factors[h]
                .iter()
                .map(|&(s, xi)| {
                    (0..na)
                        .map(|a| {
                            let mut row = Vec::new();
                            for &(s2, p) in mdp.next(h, s, a) {
                                for &(x2, q) in &exo_chain[h][xi] {
                                    if p * q > 0.0 {
                                        row.push((id(h + 1, s2, x2), p * q));
                                    }
                                }
                            }
                            row
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let rewards = (0..hz)
        .map(|h| LayerTable::from_fn(factors[h].len(), na, |i, a| mdp.reward(h, factors[h][i].0, a)))
        .collect();
    let layers = (0..hz)
        .map(|h| {
            factors[h]
                .iter()
                .map(|&(s, xi)| format!("{}|xi{xi}", mdp.state_labels(h)[s]))
                .collect()
        })
        .collect();
    let initial = id(0, mdp.initial_state(), exo_init);
    let out = LayeredMdp::new(mdp.actions().to_vec(), layers, transitions, rewards, initial)?;
    Ok(ExogenousMdp { mdp: out, factors })
}

/// Random exogenous chain with `size` states per layer after the first.
pub fn random_exo_chain<R: Rng + ?Sized>(rng: &mut R, horizon: usize, size: usize) -> (Vec<Vec<Row>>, Vec<usize>) {
    let sizes: Vec<usize> = (0..horizon).map(|h| if h == 0 { 1 } else { size }).collect();
    let chain = (0..horizon.saturating_sub(1))
        .map(|h| {
            (0..sizes[h])
                .map(|_| {
                    let supp: Vec<usize> = (0..sizes[h + 1]).collect();
                    random_distribution(rng, &supp)
                })
                .collect()
        })
        .collect();
    (chain, sizes)
}

#[derive(Clone, Debug)]
pub struct ExBmdp {
    pub mdp: LayeredMdp,
    pub latent: LayeredMdp,
    /// Observation -> (endogenous, exogenous) latent factors, per layer.
    pub decoder: Vec<Vec<(usize, usize)>>,
    pub manifest: ConstructionManifest,
}

/// Random endogenous MDP (`|S|` states after the first layer), random
/// exogenous chain (`|Xi|` states) and a random decodable emission with
/// `obs_per_latent` observations per latent state. The endogenous part
/// depends only on `seed`, so sweeps over `|Xi|` share it.
pub fn build_exbmdp(s: usize, xi: usize, a: usize, horizon: usize, obs_per_latent: usize, seed: u64) -> Result<ExBmdp> {
    if s == 0 || xi == 0 || a == 0 || horizon == 0 {
        return Err(Error::param("Ex-BMDP sizes must be positive"));
    }
    let mut endo_rng = ChaCha8Rng::seed_from_u64(seed);
    let endo = random_mdp(
        &mut endo_rng,
        RandomMdpSpec {
            horizon,
            min_states: s,
            max_states: s,
            n_actions: a,
            max_support: s,
        },
    );
    let mut exo_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0e70);
    let (chain, sizes) = random_exo_chain(&mut exo_rng, horizon, xi);
    let product = augment_exogenous(&endo, &chain, &sizes, 0)?;
    let (em, n_obs) = random_emission(&mut exo_rng, &product.mdp, obs_per_latent);
    let block = augment_rich_obs(&product.mdp, &em, &n_obs)?;
    let decoder = block
        .decoder
        .iter()
        .enumerate()
        .map(|(h, dec)| dec.iter().map(|&i| product.factors[h][i]).collect())
        .collect();
    Ok(ExBmdp {
        mdp: block.mdp,
        latent: endo,
        decoder,
        manifest: ConstructionManifest {
            name: "exbmdp".into(),
            params: params(&[
                ("S", s as f64),
                ("Xi", xi as f64),
                ("A", a as f64),
                ("H", horizon as f64),
                ("obs_per_latent", obs_per_latent as f64),
                ("seed", seed as f64),
            ]),
            properties: vec![ExpectedProperty::CoverabilityAtMost {
                bound: (s * a) as f64,
                policies: PolicyScope::All,
            }],
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyCheck {
    pub property: ExpectedProperty,
    pub computed: f64,
    pub pass: bool,
}

/// Re-derives every manifest property on the instance with the family,
/// coverage and complexity modules.
pub fn verify_manifest(
    mdp: &LayeredMdp,
    family: &ValueFunctionFamily,
    manifest: &ConstructionManifest,
) -> Result<Vec<PropertyCheck>> {
    let mut out = Vec::with_capacity(manifest.properties.len());
    let opt = optimal_values(mdp);
    for prop in &manifest.properties {
        let (computed, pass) = match *prop {
            ExpectedProperty::Complete => {
                let rep = check_completeness(mdp, family);
                let worst = rep.violations.iter().map(|v| v.distance).fold(0.0, f64::max);
                (worst, rep.is_complete())
            }
            ExpectedProperty::Realizable => {
                let rep = check_realizability(mdp, family, MEMBER_TOL);
                (rep.distance, rep.realizable)
            }
            ExpectedProperty::CoverabilityAtMost { bound, policies } => {
                let set = match policies {
                    PolicyScope::Induced => PolicySet::induced(family),
                    PolicyScope::All => PolicySet::All,
                };
                let v = coverability(mdp, &set).value;
                (v, v <= bound + 1e-9)
            }
            ExpectedProperty::GenConcentrabilityAtOptimumAtMost { bound } => {
                let mu = DistributionFamily::from_occupancy(&occupancy(mdp, &opt.policy));
                let v = generalized_concentrability(mdp, family, &PolicySet::induced(family), &mu).value;
                (v, v <= bound + 1e-9)
            }
            ExpectedProperty::SqBeDimAtLeast { bound, layer, eps_below } => {
                let set = PolicySet::induced(family);
                let rep = be_dim(mdp, family, &set, 0.99 * eps_below, Variant::Sq, TestType::Q, Some(layer), bound)?;
                let ok = complexity::replay_be_witness(
                    &complexity::q_type_alphabet(mdp, family, &set, layer)?,
                    0.99 * eps_below,
                    Variant::Sq,
                    &rep.witness,
                );
                (rep.value, ok && rep.value >= bound as f64)
            }
            ExpectedProperty::OptimalValue { value } => (opt.value, (opt.value - value).abs() <= 1e-12),
            ExpectedProperty::LogFamilySizeAtMost { bound } => {
                let v = (family.len() as f64).ln();
                (v, v <= bound + 1e-12)
            }
        };
        out.push(PropertyCheck {
            property: prop.clone(),
            computed,
            pass,
        });
    }
    Ok(out)
}
