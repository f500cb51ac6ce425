//! Concentrability, single-policy concentrability, coverability and their
//! generalized (Bellman-residual) counterparts.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{RewardMode, ValueFunctionFamily};
use crate::lp::{Feasibility, FeasibilityProblem, Sense};
use crate::mdp::{
    max_reach, max_reach_layer, occupancy, optimal_values, optimal_values_with, LayeredMdp, OccupancyMeasure,
    Policy,
};
use crate::table::LayerTable;

/// Policies a coefficient takes its supremum over.
#[derive(Clone, Debug)]
pub enum PolicySet {
    Explicit(Vec<Policy>),
    /// All deterministic Markov policies (suprema are attained there).
    All,
}

impl PolicySet {
    /// Distinct greedy policies of the family's members.
    pub fn induced(family: &ValueFunctionFamily) -> Self {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for m in 0..family.len() {
            let p = family.greedy(m);
            if seen.insert(p.action_table().expect("greedy policies are deterministic")) {
                out.push(p);
            }
        }
        PolicySet::Explicit(out)
    }

    /// Number of explicit policies; `None` for "all".
    pub fn len(&self) -> Option<usize> {
        match self {
            PolicySet::Explicit(p) => Some(p.len()),
            PolicySet::All => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, PolicySet::Explicit(p) if p.is_empty())
    }
}

/// Per-layer logging distributions over state-action cells.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionFamily(pub Vec<LayerTable>);

impl DistributionFamily {
    pub fn new(layers: Vec<LayerTable>, mdp: &LayeredMdp) -> Result<Self> {
        if layers.len() != mdp.horizon() {
            return Err(Error::structure(format!("mu has {} layers, mdp has {}", layers.len(), mdp.horizon())));
        }
        for (h, t) in layers.iter().enumerate() {
            if t.n_states() != mdp.n_states(h) || t.n_actions() != mdp.n_actions() {
                return Err(Error::structure(format!("mu layer {h} shape mismatch")));
            }
            let s = t.sum();
            if t.values().iter().any(|&v| v < 0.0) || (s - 1.0).abs() > 1e-12 {
                return Err(Error::structure(format!("mu layer {h} is not a distribution (sum {s})")));
            }
        }
        Ok(Self(layers))
    }

    pub fn uniform(mdp: &LayeredMdp) -> Self {
        Self(
            (0..mdp.horizon())
                .map(|h| {
                    let n = mdp.n_states(h) * mdp.n_actions();
                    LayerTable::filled(mdp.n_states(h), mdp.n_actions(), 1.0 / n as f64)
                })
                .collect(),
        )
    }

    /// `mu_h = d_h^pi`.
    pub fn from_occupancy(occ: &OccupancyMeasure) -> Self {
        Self(occ.layers().to_vec())
    }

    pub fn layer(&self, h: usize) -> &LayerTable {
        &self.0[h]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    BisectionLp,
    Enumeration,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Maximizing cell; `policy` indexes the explicit set (absent for "all").
    Cell {
        policy: Option<usize>,
        h: usize,
        x: usize,
        a: usize,
    },
    Distribution { mu: Vec<LayerTable> },
    Pair { member: usize, policy: Option<usize> },
    DistributionPair { mu: Vec<LayerTable>, member: usize },
    None,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageReport {
    pub value: f64,
    pub witness: Witness,
    pub method: Method,
    /// Relative bracket width reached by bisection; 0 for closed forms.
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

/// `0/0 -> 0`, `p/0 -> +inf`.
#[inline]
pub fn ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn occupancies(mdp: &LayeredMdp, set: &PolicySet) -> Vec<OccupancyMeasure> {
    match set {
        PolicySet::Explicit(ps) => ps.iter().map(|p| occupancy(mdp, p)).collect(),
        PolicySet::All => Vec::new(),
    }
}

/// `max_pi d_h^pi(x,a)` for every layer.
pub fn reach_tables(mdp: &LayeredMdp, set: &PolicySet) -> Vec<LayerTable> {
    match set {
        PolicySet::Explicit(ps) => {
            let occ: Vec<_> = ps.iter().map(|p| occupancy(mdp, p)).collect();
            (0..mdp.horizon())
                .map(|h| {
                    let mut t = mdp.zero_table(h);
                    for o in &occ {
                        t = t.zip_with(o.layer(h), f64::max);
                    }
                    t
                })
                .collect()
        }
        PolicySet::All => (0..mdp.horizon())
            .map(|h| {
                let r = max_reach_layer(mdp, h);
                LayerTable::from_fn(mdp.n_states(h), mdp.n_actions(), |x, _| r[x])
            })
            .collect(),
    }
}

pub fn concentrability(mdp: &LayeredMdp, set: &PolicySet, mu: &DistributionFamily) -> CoverageReport {
    let mut best = (0.0, Witness::None);
    let consider = |v: f64, w: Witness, best: &mut (f64, Witness)| {
        if v > best.0 || matches!(best.1, Witness::None) {
            *best = (v, w);
        }
    };
    match set {
        PolicySet::Explicit(_) => {
            for (i, occ) in occupancies(mdp, set).iter().enumerate() {
                for h in 0..mdp.horizon() {
                    for x in 0..mdp.n_states(h) {
                        for a in 0..mdp.n_actions() {
                            let v = ratio(occ.get(h, x, a), mu.layer(h).get(x, a));
                            consider(v, Witness::Cell { policy: Some(i), h, x, a }, &mut best);
                        }
                    }
                }
            }
        }
        PolicySet::All => {
            for h in 0..mdp.horizon() {
                let r = max_reach_layer(mdp, h);
                for x in 0..mdp.n_states(h) {
                    for a in 0..mdp.n_actions() {
                        let v = ratio(r[x], mu.layer(h).get(x, a));
                        consider(v, Witness::Cell { policy: None, h, x, a }, &mut best);
                    }
                }
            }
        }
    }
    CoverageReport {
        value: best.0,
        witness: best.1,
        method: Method::Enumeration,
        tolerance: 0.0,
        flag: None,
    }
}

pub fn single_policy_concentrability(mdp: &LayeredMdp, mu: &DistributionFamily) -> CoverageReport {
    let pi = optimal_values(mdp).policy;
    concentrability(mdp, &PolicySet::Explicit(vec![pi]), mu)
}

/// Worst-layer cumulative reachability, with witness `mu*_h ∝ max_pi d_h^pi`.
pub fn coverability(mdp: &LayeredMdp, set: &PolicySet) -> CoverageReport {
    let reach = reach_tables(mdp, set);
    let sums: Vec<f64> = reach.iter().map(|t| t.sum()).collect();
    let value = sums.iter().copied().fold(0.0, f64::max);
    let mu = reach
        .iter()
        .zip(&sums)
        .map(|(t, &s)| t.map(|v| if s > 0.0 { v / s } else { 0.0 }))
        .collect();
    CoverageReport {
        value,
        witness: Witness::Distribution { mu },
        method: Method::ClosedForm,
        tolerance: 0.0,
        flag: None,
    }
}

/// `max_h sum_x max_pi d_h^pi(x)`.
pub fn v_type_coverability(mdp: &LayeredMdp, set: &PolicySet) -> f64 {
    let reach = reach_tables(mdp, set);
    match set {
        PolicySet::All => reach.iter().map(|t| (0..t.n_states()).map(|x| t.get(x, 0)).sum::<f64>()).fold(0.0, f64::max),
        PolicySet::Explicit(ps) => {
            let occ: Vec<_> = ps.iter().map(|p| occupancy(mdp, p)).collect();
            (0..mdp.horizon())
                .map(|h| {
                    (0..mdp.n_states(h))
                        .map(|x| occ.iter().map(|o| o.state_marginal(h)[x]).fold(0.0, f64::max))
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub value: f64,
    /// Final `[lo, hi]` bracket per layer.
    pub brackets: Vec<(f64, f64)>,
    /// Feasible distribution at the upper bracket of each layer.
    pub mu: Vec<LayerTable>,
}

pub const BISECTION_REL_TOL: f64 = 1e-9;

/// Direct inf-sup evaluation: per layer, bisection on `C` with the linear
/// feasibility test `{mu in simplex : d^pi(c) <= C mu(c) for all pi, c}`.
pub fn coverability_infimum_oracle(mdp: &LayeredMdp, set: &PolicySet) -> Result<OracleReport> {
    let policies: Vec<Policy> = match set {
        PolicySet::Explicit(ps) => ps.clone(),
        // Reach-maximizing policies already attain every per-cell supremum.
        PolicySet::All => (0..mdp.horizon())
            .flat_map(|h| (0..mdp.n_states(h)).map(move |x| (h, x)))
            .map(|(h, x)| max_reach(mdp, h, x, None).policy)
            .collect(),
    };
    if policies.is_empty() {
        return Err(Error::param("empty policy set"));
    }
    let occ: Vec<_> = policies.iter().map(|p| occupancy(mdp, p)).collect();
    let mut brackets = Vec::new();
    let mut mus = Vec::new();
    for h in 0..mdp.horizon() {
        let cells = mdp.n_states(h) * mdp.n_actions();
        let rows: Vec<&[f64]> = occ.iter().map(|o| o.layer(h).values()).collect();
        let feasible = |c: f64| -> Option<Vec<f64>> {
            let mut p = FeasibilityProblem::new(cells);
            p.push(vec![1.0; cells], Sense::Eq, 1.0);
            for d in &rows {
                for (i, &v) in d.iter().enumerate() {
                    if v > 0.0 {
                        let mut coeffs = vec![0.0; cells];
                        coeffs[i] = c;
                        p.push(coeffs, Sense::Ge, v);
                    }
                }
            }
            match p.solve() {
                Feasibility::Feasible(x) => Some(x),
                Feasibility::Infeasible { .. } => None,
            }
        };
        let (mut lo, mut hi) = (1.0, cells as f64);
        let mut best = feasible(hi).ok_or_else(|| Error::Bracket {
            lo,
            hi,
            reason: format!("layer {h} infeasible at the upper bracket"),
        })?;
        if let Some(x) = feasible(lo) {
            hi = lo;
            best = x;
        }
        while hi - lo > BISECTION_REL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            match feasible(mid) {
                Some(x) => {
                    hi = mid;
                    best = x;
                }
                None => lo = mid,
            }
        }
        brackets.push((lo, hi));
        mus.push(LayerTable::from_fn(mdp.n_states(h), mdp.n_actions(), |x, a| best[x * mdp.n_actions() + a]));
    }
    Ok(OracleReport {
        value: brackets.iter().map(|b| b.1).fold(0.0, f64::max),
        brackets,
        mu: mus,
    })
}

/// Squared residual tables `(f_h - T_h f_{h+1})^2` of every member.
fn squared_residuals(mdp: &LayeredMdp, family: &ValueFunctionFamily) -> Vec<Vec<LayerTable>> {
    (0..family.len())
        .map(|m| {
            family
                .residuals(mdp, m, RewardMode::Mdp)
                .into_iter()
                .map(|t| t.map(|v| v * v))
                .collect()
        })
        .collect()
}

/// On-policy residual mass `a_{f,pi} = sum_h E_{d_h^pi}[delta_h^2]`, per
/// member and policy (a single maximizing column for "all").
fn residual_mass(mdp: &LayeredMdp, sq: &[Vec<LayerTable>], set: &PolicySet) -> Vec<Vec<f64>> {
    match set {
        PolicySet::Explicit(ps) => {
            let occ: Vec<_> = ps.iter().map(|p| occupancy(mdp, p)).collect();
            sq.iter()
                .map(|d2| {
                    occ.iter()
                        .map(|o| (0..mdp.horizon()).map(|h| o.expect(h, &d2[h])).sum())
                        .collect()
                })
                .collect()
        }
        PolicySet::All => sq.iter().map(|d2| vec![optimal_values_with(mdp, d2).value]).collect(),
    }
}

fn mu_mass(mu: &[LayerTable], d2: &[LayerTable]) -> f64 {
    mu.iter().zip(d2).map(|(m, d)| m.dot(d)).sum()
}

const DEGENERATE: &str = "all on-policy residuals zero";

pub fn generalized_concentrability(
    mdp: &LayeredMdp,
    family: &ValueFunctionFamily,
    set: &PolicySet,
    mu: &DistributionFamily,
) -> CoverageReport {
    let sq = squared_residuals(mdp, family);
    let mass = residual_mass(mdp, &sq, set);
    let explicit = matches!(set, PolicySet::Explicit(_));
    let mut best = (0.0, 0, None);
    let mut any = false;
    for (m, row) in mass.iter().enumerate() {
        let b = mu_mass(&mu.0, &sq[m]);
        for (i, &a) in row.iter().enumerate() {
            any |= a > 0.0;
            let v = ratio(a, b);
            if v > best.0 {
                best = (v, m, explicit.then_some(i));
            }
        }
    }
    CoverageReport {
        value: if any { best.0 } else { 1.0 },
        witness: Witness::Pair {
            member: best.1,
            policy: best.2,
        },
        method: Method::Enumeration,
        tolerance: 0.0,
        flag: (!any).then(|| DEGENERATE.to_string()),
    }
}

/// `inf_mu C_gen(mu, F)` by bisection; each step solves
/// `{mu : sum_h <b_{f,h}, mu_h> >= a_f / C for all f}` over product simplices.
pub fn generalized_coverability(mdp: &LayeredMdp, family: &ValueFunctionFamily, set: &PolicySet) -> CoverageReport {
    let sq = squared_residuals(mdp, family);
    let a: Vec<f64> = residual_mass(mdp, &sq, set)
        .iter()
        .map(|r| r.iter().copied().fold(0.0, f64::max))
        .collect();
    let uniform = DistributionFamily::uniform(mdp);
    if a.iter().all(|&v| v <= 0.0) {
        return CoverageReport {
            value: 1.0,
            witness: Witness::DistributionPair { mu: uniform.0, member: 0 },
            method: Method::BisectionLp,
            tolerance: 0.0,
            flag: Some(DEGENERATE.to_string()),
        };
    }
    let offsets: Vec<usize> = (0..mdp.horizon())
        .scan(0, |acc, h| {
            let o = *acc;
            *acc += mdp.n_states(h) * mdp.n_actions();
            Some(o)
        })
        .collect();
    let n = offsets.last().unwrap() + mdp.n_states(mdp.horizon() - 1) * mdp.n_actions();
    let flat = |tables: &[LayerTable]| -> Vec<f64> { tables.iter().flat_map(|t| t.values().iter().copied()).collect() };
    let active: Vec<usize> = (0..a.len()).filter(|&m| a[m] > 0.0).collect();
    let bvecs: Vec<Vec<f64>> = active.iter().map(|&m| flat(&sq[m])).collect();
    let feasible = |c: f64| -> Option<Vec<f64>> {
        let mut p = FeasibilityProblem::new(n);
        for h in 0..mdp.horizon() {
            let mut coeffs = vec![0.0; n];
            let len = mdp.n_states(h) * mdp.n_actions();
            coeffs[offsets[h]..offsets[h] + len].iter_mut().for_each(|v| *v = 1.0);
            p.push(coeffs, Sense::Eq, 1.0);
        }
        for (k, &m) in active.iter().enumerate() {
            p.push(bvecs[k].clone(), Sense::Ge, a[m] / c);
        }
        match p.solve() {
            Feasibility::Feasible(x) => Some(x),
            Feasibility::Infeasible { .. } => None,
        }
    };
    let unflat = |x: &[f64]| -> Vec<LayerTable> {
        (0..mdp.horizon())
            .map(|h| LayerTable::from_fn(mdp.n_states(h), mdp.n_actions(), |s, u| x[offsets[h] + s * mdp.n_actions() + u]))
            .collect()
    };
    let eval = |mu: &[LayerTable]| -> (f64, usize) {
        let mut best = (0.0, active[0]);
        for &m in &active {
            let v = ratio(a[m], mu_mass(mu, &sq[m]));
            if v > best.0 {
                best = (v, m);
            }
        }
        best
    };
    let mut hi = eval(&uniform.0).0;
    let mut best_mu = uniform.0.clone();
    let mut lo = active
        .iter()
        .map(|&m| a[m] / sq[m].iter().map(|t| t.values().iter().copied().fold(0.0, f64::max)).sum::<f64>())
        .fold(0.0, f64::max);
    lo = lo.min(hi);
    while hi - lo > BISECTION_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        match feasible(mid) {
            Some(x) => {
                hi = mid;
                best_mu = unflat(&x);
            }
            None => lo = mid,
        }
    }
    let (value, member) = eval(&best_mu);
    CoverageReport {
        value,
        witness: Witness::DistributionPair { mu: best_mu, member },
        method: Method::BisectionLp,
        tolerance: (hi - lo) / hi,
        flag: None,
    }
}
