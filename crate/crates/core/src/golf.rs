//! Optimistic exploration with squared-Bellman-loss confidence sets.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{ValueFunctionFamily, MEMBER_TOL};
use crate::mdp::{optimal_values, policy_value, sample_with, LayeredMdp, OptimalValues, Policy, Trajectory};
use crate::table::LayerTable;

/// Full loss recomputation period.
pub const RECOMPUTE_EVERY: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GolfConfig {
    pub rounds: usize,
    pub beta: f64,
    pub seed: u64,
    /// Record `Q* in F^(t)` per round (needs `Q*` among the members).
    #[serde(default = "yes")]
    pub diagnostics: bool,
}

fn yes() -> bool {
    true
}

impl GolfConfig {
    pub fn new(rounds: usize, beta: f64, seed: u64) -> Self {
        Self {
            rounds,
            beta,
            seed,
            diagnostics: true,
        }
    }
}

/// `c * log(T H |F| / delta)`; the default width uses `c = 2`.
pub fn beta_for(c: f64, rounds: usize, horizon: usize, family_size: usize, delta: f64) -> f64 {
    c * ((rounds as f64) * (horizon as f64) * (family_size as f64) / delta).ln()
}

pub fn default_beta(rounds: usize, horizon: usize, family_size: usize, delta: f64) -> f64 {
    beta_for(2.0, rounds, horizon, family_size, delta)
}

/// One `(x, a, r, x')` tuple; `next = None` at the last layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub x: usize,
    pub a: usize,
    pub r: f64,
    pub next: Option<usize>,
}

/// Per-layer datasets `D_h`.
pub type Datasets = Vec<Vec<Transition>>;

pub fn push_trajectory(data: &mut Datasets, traj: &Trajectory) {
    for (h, s) in traj.steps.iter().enumerate() {
        data[h].push(Transition {
            x: s.state,
            a: s.action,
            r: s.reward,
            next: s.next_state,
        });
    }
}

/// `sum (f(x,a) - r - max_a' f'(x',a'))^2`; `f_next = None` means zero.
pub fn squared_bellman_loss(data: &[Transition], f_h: &LayerTable, f_next: Option<&LayerTable>) -> f64 {
    data.iter()
        .map(|t| {
            let m = match (t.next, f_next) {
                (Some(y), Some(g)) => g.row_max(y),
                _ => 0.0,
            };
            let e = f_h.get(t.x, t.a) - t.r - m;
            e * e
        })
        .sum()
}

/// Running sums `L_h(c, c')` over component pairs of consecutive layers.
#[derive(Clone, Debug)]
pub struct LossTracker {
    /// `loss[h][c * n_next + c']`.
    loss: Vec<Vec<f64>>,
    n_next: Vec<usize>,
    /// `next_max[h][c'][x'] = max_a f^{c'}_{h+1}(x', a)`.
    next_max: Vec<Vec<Vec<f64>>>,
}

impl LossTracker {
    pub fn new(family: &ValueFunctionFamily) -> Self {
        let hz = family.horizon();
        let mut loss = Vec::with_capacity(hz);
        let mut n_next = Vec::with_capacity(hz);
        let mut next_max = Vec::with_capacity(hz);
        for h in 0..hz {
            let nn = if h + 1 < hz { family.components(h + 1).len() } else { 1 };
            loss.push(vec![0.0; family.components(h).len() * nn]);
            n_next.push(nn);
            next_max.push(if h + 1 < hz {
                family
                    .components(h + 1)
                    .iter()
                    .map(|t| (0..t.n_states()).map(|y| t.row_max(y)).collect())
                    .collect()
            } else {
                vec![Vec::new()]
            });
        }
        Self { loss, n_next, next_max }
    }

    pub fn add(&mut self, family: &ValueFunctionFamily, h: usize, t: &Transition) {
        let nn = self.n_next[h];
        let targets: Vec<f64> = (0..nn)
            .map(|c1| t.r + t.next.map_or(0.0, |y| self.next_max[h][c1].get(y).copied().unwrap_or(0.0)))
            .collect();
        for (c0, f) in family.components(h).iter().enumerate() {
            let v = f.get(t.x, t.a);
            let row = &mut self.loss[h][c0 * nn..(c0 + 1) * nn];
            for (l, tg) in row.iter_mut().zip(&targets) {
                let e = v - tg;
                *l += e * e;
            }
        }
    }

    /// Exact recomputation from the datasets.
    pub fn recompute(&mut self, family: &ValueFunctionFamily, data: &Datasets) {
        for h in 0..self.loss.len() {
            self.loss[h].iter_mut().for_each(|v| *v = 0.0);
            for t in &data[h] {
                self.add(family, h, t);
            }
        }
    }

    #[inline]
    pub fn get(&self, h: usize, c0: usize, c1: usize) -> f64 {
        self.loss[h][c0 * self.n_next[h] + c1]
    }

    /// Indices of members with `L_h(f_h, f_{h+1}) - min_{f'_h} L_h(f'_h, f_{h+1}) <= beta` for all `h`.
    pub fn confidence_set(&self, family: &ValueFunctionFamily, beta: f64) -> Vec<usize> {
        let hz = family.horizon();
        let mins: Vec<Vec<f64>> = (0..hz)
            .map(|h| {
                let nn = self.n_next[h];
                (0..nn)
                    .map(|c1| {
                        (0..family.components(h).len())
                            .map(|c0| self.get(h, c0, c1))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect()
            })
            .collect();
        (0..family.len())
            .filter(|&m| {
                (0..hz).all(|h| {
                    let c0 = family.component_index(m, h);
                    let c1 = if h + 1 < hz { family.component_index(m, h + 1) } else { 0 };
                    self.get(h, c0, c1) - mins[h][c1] <= beta
                })
            })
            .collect()
    }

    /// Per-layer excess loss of member `m`.
    pub fn excess(&self, family: &ValueFunctionFamily, m: usize) -> Vec<f64> {
        let hz = family.horizon();
        (0..hz)
            .map(|h| {
                let c0 = family.component_index(m, h);
                let c1 = if h + 1 < hz { family.component_index(m, h + 1) } else { 0 };
                let min = (0..family.components(h).len())
                    .map(|c| self.get(h, c, c1))
                    .fold(f64::INFINITY, f64::min);
                self.get(h, c0, c1) - min
            })
            .collect()
    }
}

/// Non-incremental confidence set from datasets.
pub fn confidence_set(family: &ValueFunctionFamily, data: &Datasets, beta: f64) -> Vec<usize> {
    let mut tr = LossTracker::new(family);
    tr.recompute(family, data);
    tr.confidence_set(family, beta)
}

/// Least-index member maximizing `f_1(x_1, pi_{f,1}(x_1))`.
pub fn select_optimistic(family: &ValueFunctionFamily, set: &[usize], x1: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &m in set {
        let v = family.optimistic_value(m, x1);
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((m, v));
        }
    }
    best
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub member: usize,
    /// `|F^(t-1)|`, the set `f^(t)` was chosen from.
    pub set_size: usize,
    pub set_size_after: usize,
    /// `Q* in F^(t-1)`; `None` without diagnostics or when no member equals `Q*`.
    pub fstar_in_set: Option<bool>,
    pub fstar_in_set_after: Option<bool>,
    pub optimistic_value: f64,
    pub j_pi: f64,
    pub cum_regret: f64,
    pub trajectory: Trajectory,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunLog {
    pub config: GolfConfig,
    pub j_star: f64,
    pub initial_state: usize,
    /// Members equal to `Q*` within the membership tolerance.
    pub fstar_members: Vec<usize>,
    pub rounds: Vec<RoundRecord>,
    pub datasets: Datasets,
    /// `F^(T)` (or the set at abort).
    pub final_set: Vec<usize>,
}

impl RunLog {
    pub fn regret(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cum_regret)
    }

    /// `Q* in F^(t)` for every `t = 0..T`; `None` without diagnostics.
    pub fn fstar_always_in_set(&self) -> Option<bool> {
        let mut all = true;
        for r in &self.rounds {
            all &= r.fstar_in_set? && r.fstar_in_set_after?;
        }
        Some(all)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,fstar_in_set,set_size,optimistic_value,J_pi_t,cum_regret")?;
        for r in &self.rounds {
            let f = match r.fstar_in_set {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.t, f, r.set_size, r.optimistic_value, r.j_pi, r.cum_regret
            )?;
        }
        Ok(())
    }
}

/// Run stopped because the confidence set became empty.
#[derive(Debug)]
pub struct GolfAbort {
    pub round: usize,
    pub partial: Box<RunLog>,
}

impl fmt::Display for GolfAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "empty confidence set at round {}; beta too small", self.round)
    }
}

impl std::error::Error for GolfAbort {}

impl From<GolfAbort> for Error {
    fn from(a: GolfAbort) -> Self {
        Error::EmptyConfidenceSet { round: a.round }
    }
}

fn fstar_members(mdp: &LayeredMdp, family: &ValueFunctionFamily, opt: &OptimalValues) -> Vec<usize> {
    (0..family.len())
        .filter(|&m| (0..mdp.horizon()).all(|h| family.table(m, h).sup_distance(&opt.q[h]) <= MEMBER_TOL))
        .collect()
}

/// Greedy policy and exact value, cached per member.
#[derive(Default)]
pub(crate) struct PolicyCache {
    map: HashMap<usize, (Policy, f64)>,
}

impl PolicyCache {
    pub(crate) fn get(&mut self, mdp: &LayeredMdp, family: &ValueFunctionFamily, m: usize) -> &(Policy, f64) {
        self.map.entry(m).or_insert_with(|| {
            let p = family.greedy(m);
            let j = policy_value(mdp, &p).value;
            (p, j)
        })
    }
}

pub fn golf_run(mdp: &LayeredMdp, family: &ValueFunctionFamily, config: &GolfConfig) -> std::result::Result<RunLog, GolfAbort> {
    let opt = optimal_values(mdp);
    let x1 = mdp.initial_state();
    let fstar = if config.diagnostics { fstar_members(mdp, family, &opt) } else { Vec::new() };
    let track = config.diagnostics && !fstar.is_empty();
    let contains = |set: &[usize]| track.then(|| fstar.iter().any(|m| set.binary_search(m).is_ok()));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tracker = LossTracker::new(family);
    let mut cache = PolicyCache::default();
    let mut log = RunLog {
        config: config.clone(),
        j_star: opt.value,
        initial_state: x1,
        fstar_members: fstar.clone(),
        rounds: Vec::with_capacity(config.rounds),
        datasets: vec![Vec::new(); mdp.horizon()],
        final_set: (0..family.len()).collect(),
    };
    let mut set: Vec<usize> = (0..family.len()).collect();
    let mut cum = 0.0;
    for t in 1..=config.rounds {
        let Some((member, optimistic_value)) = select_optimistic(family, &set, x1) else {
            log.final_set = set;
            return Err(GolfAbort {
                round: t,
                partial: Box::new(log),
            });
        };
        let (policy, j_pi) = cache.get(mdp, family, member);
        let j_pi = *j_pi;
        let trajectory = sample_with(mdp, policy, &mut rng);
        for (h, s) in trajectory.steps.iter().enumerate() {
            let tr = Transition {
                x: s.state,
                a: s.action,
                r: s.reward,
                next: s.next_state,
            };
            tracker.add(family, h, &tr);
            log.datasets[h].push(tr);
        }
        if t % RECOMPUTE_EVERY == 0 {
            tracker.recompute(family, &log.datasets);
        }
        let next = tracker.confidence_set(family, config.beta);
        cum += opt.value - j_pi;
        log.rounds.push(RoundRecord {
            t,
            member,
            set_size: set.len(),
            set_size_after: next.len(),
            fstar_in_set: contains(&set),
            fstar_in_set_after: contains(&next),
            optimistic_value,
            j_pi,
            cum_regret: cum,
            trajectory,
        });
        set = next;
    }
    log.final_set = set.clone();
    if set.is_empty() {
        return Err(GolfAbort {
            round: config.rounds + 1,
            partial: Box::new(log),
        });
    }
    Ok(log)
}

/// Uniform mixture over the played policies.
#[derive(Clone, Debug, Serialize)]
pub struct MixturePolicy {
    /// Member played in each round.
    pub members: Vec<usize>,
    /// `J(pi_bar) = (1/T) sum_t J(pi^(t))`.
    pub value: f64,
    pub suboptimality: f64,
}

pub fn online_to_batch(log: &RunLog) -> MixturePolicy {
    let n = log.rounds.len().max(1) as f64;
    let value = log.rounds.iter().map(|r| r.j_pi).sum::<f64>() / n;
    MixturePolicy {
        members: log.rounds.iter().map(|r| r.member).collect(),
        value,
        suboptimality: log.j_star - value,
    }
}

/// Both sides of `Reg(T) = sum_t sum_h E_{d^(t)}[delta^(t)] + sum_t (J* - f^(t)_1(x_1, .))`.
pub fn regret_decomposition(mdp: &LayeredMdp, family: &ValueFunctionFamily, log: &RunLog) -> (f64, f64) {
    let mut cache: HashMap<usize, f64> = HashMap::new();
    let mut rhs = 0.0;
    for r in &log.rounds {
        let be = *cache.entry(r.member).or_insert_with(|| {
            let p = family.greedy(r.member);
            let occ = crate::mdp::occupancy(mdp, &p);
            family
                .residuals(mdp, r.member, crate::family::RewardMode::Mdp)
                .iter()
                .enumerate()
                .map(|(h, d)| occ.expect(h, d))
                .sum()
        });
        rhs += be + (log.j_star - r.optimistic_value);
    }
    (log.regret(), rhs)
}

/// Rounds where `Q* in F^(t-1)` but the optimistic value fell below `J*`.
pub fn optimism_violations(log: &RunLog) -> Vec<usize> {
    log.rounds
        .iter()
        .filter(|r| r.fstar_in_set == Some(true) && r.optimistic_value < log.j_star)
        .map(|r| r.t)
        .collect()
}

/// Replays the datasets and checks that each recorded `F^(t)` is exactly
/// the set of members passing the confidence test. Returns mismatching rounds.
pub fn replay_confidence_sets(family: &ValueFunctionFamily, log: &RunLog) -> Vec<usize> {
    let hz = family.horizon();
    let mut data: Datasets = vec![Vec::new(); hz];
    let mut bad = Vec::new();
    for (i, r) in log.rounds.iter().enumerate() {
        for h in 0..hz {
            data[h].push(log.datasets[h][i]);
        }
        let set = confidence_set(family, &data, log.config.beta);
        if set.len() != r.set_size_after {
            bad.push(r.t);
        }
    }
    bad
}

/// Checks a run for internal consistency: regret accumulator and
/// non-negative per-round regret.
pub fn check_log(log: &RunLog) -> Result<()> {
    let mut cum = 0.0;
    for r in &log.rounds {
        cum += log.j_star - r.j_pi;
        if (cum - r.cum_regret).abs() > 1e-9 {
            return Err(Error::param(format!("cumulative regret drift at round {}", r.t)));
        }
        if r.j_pi > log.j_star + 1e-12 {
            return Err(Error::param(format!("round {} beats the optimal value", r.t)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::random::{random_family, random_mdp, RandomMdpSpec};

    #[test]
    fn empty_data_keeps_everyone() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = random_mdp(&mut rng, RandomMdpSpec::small(3, 3, 2));
        let fam = random_family(&mut rng, &m, 5, true);
        let data: Datasets = vec![Vec::new(); 3];
        assert_eq!(confidence_set(&fam, &data, 0.0).len(), fam.len());
    }

    #[test]
    fn incremental_losses_match_naive_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_mdp(&mut rng, RandomMdpSpec::small(3, 4, 2));
        let fam = random_family(&mut rng, &m, 6, true);
        let log = golf_run(&m, &fam, &GolfConfig::new(300, 1e18, 2)).unwrap();
        let mut tr = LossTracker::new(&fam);
        for h in 0..3 {
            for t in &log.datasets[h] {
                tr.add(&fam, h, t);
            }
        }
        for h in 0..3 {
            for (c0, f) in fam.components(h).iter().enumerate() {
                let nexts: Vec<Option<&LayerTable>> = if h < 2 { fam.components(h + 1).iter().map(Some).collect() } else { vec![None] };
                for (c1, g) in nexts.into_iter().enumerate() {
                    let naive = squared_bellman_loss(&log.datasets[h], f, g);
                    assert!((naive - tr.get(h, c0, c1)).abs() <= 1e-9 * naive.max(1.0));
                }
            }
        }
    }

    #[test]
    fn singleton_family_always_chosen() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_mdp(&mut rng, RandomMdpSpec::small(2, 3, 2));
        let fam = random_family(&mut rng, &m, 1, false);
        let log = golf_run(&m, &fam, &GolfConfig::new(20, 0.0, 1)).unwrap();
        assert!(log.rounds.iter().all(|r| r.member == 0));
        check_log(&log).unwrap();
    }
}
