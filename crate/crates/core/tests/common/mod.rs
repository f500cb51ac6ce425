//! Independent reference computations for integration and acceptance tests.
//! Everything works on plain nested vectors copied out of the library types,
//! so no library algorithm is reused.
#![allow(dead_code)]

use coverlab::{LayerTable, LayeredMdp, ValueFunctionFamily};
use rand::Rng;

/// `[x][a]`
pub type Table = Vec<Vec<f64>>;

pub struct Plain {
    pub sizes: Vec<usize>,
    pub na: usize,
    /// `p[h][x][a] = [(x', prob)]`, empty at the last layer.
    pub p: Vec<Vec<Vec<Vec<(usize, f64)>>>>,
    pub r: Vec<Table>,
    pub x0: usize,
}

impl Plain {
    pub fn horizon(&self) -> usize {
        self.sizes.len()
    }
}

pub fn plain(mdp: &LayeredMdp) -> Plain {
    let hz = mdp.horizon();
    let na = mdp.n_actions();
    let sizes = mdp.states_per_layer();
    let p = (0..hz)
        .map(|h| {
            (0..sizes[h])
                .map(|x| {
                    (0..na)
                        .map(|a| if h + 1 < hz { mdp.next(h, x, a).to_vec() } else { Vec::new() })
                        .collect()
                })
                .collect()
        })
        .collect();
    let r = (0..hz)
        .map(|h| (0..sizes[h]).map(|x| (0..na).map(|a| mdp.reward(h, x, a)).collect()).collect())
        .collect();
    Plain {
        sizes,
        na,
        p,
        r,
        x0: mdp.initial_state(),
    }
}

pub fn rows(t: &LayerTable) -> Table {
    t.to_rows()
}

pub fn member(f: &ValueFunctionFamily, m: usize) -> Vec<Table> {
    f.member(m).into_iter().map(rows).collect()
}

fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Deterministic policy `[h][x] -> a`.
pub type Det = Vec<Vec<usize>>;

pub fn greedy(f: &[Table]) -> Det {
    f.iter().map(|t| t.iter().map(|row| argmax_first(row)).collect()).collect()
}

pub fn to_policy(pi: &Det, na: usize) -> coverlab::Policy {
    coverlab::Policy::deterministic(pi, na)
}

fn next_value(m: &Plain, h: usize, x: usize, a: usize, v: Option<&[f64]>) -> f64 {
    match v {
        Some(v) => m.p[h][x][a].iter().map(|&(y, p)| p * v[y]).sum(),
        None => 0.0,
    }
}

/// `(J, Q)` of a stochastic policy given as `pi(h, x) -> probs`.
pub fn evaluate(m: &Plain, pi: &dyn Fn(usize, usize) -> Vec<f64>) -> (f64, Vec<Table>) {
    let hz = m.horizon();
    let mut q: Vec<Table> = vec![Vec::new(); hz];
    let mut v: Vec<Vec<f64>> = vec![Vec::new(); hz];
    for h in (0..hz).rev() {
        let vn = if h + 1 < hz { Some(v[h + 1].clone()) } else { None };
        q[h] = (0..m.sizes[h])
            .map(|x| (0..m.na).map(|a| m.r[h][x][a] + next_value(m, h, x, a, vn.as_deref())).collect())
            .collect();
        v[h] = (0..m.sizes[h])
            .map(|x| pi(h, x).iter().zip(&q[h][x]).map(|(p, q)| p * q).sum())
            .collect();
    }
    (v[0][m.x0], q)
}

pub fn one_hot(a: usize, na: usize) -> Vec<f64> {
    (0..na).map(|b| if a == b { 1.0 } else { 0.0 }).collect()
}

pub fn evaluate_det(m: &Plain, pi: &Det) -> (f64, Vec<Table>) {
    evaluate(m, &|h, x| one_hot(pi[h][x], m.na))
}

/// `(J*, Q*, pi*)` with least-index ties.
pub fn optimal(m: &Plain) -> (f64, Vec<Table>, Det) {
    let hz = m.horizon();
    let mut q: Vec<Table> = vec![Vec::new(); hz];
    let mut v: Vec<Vec<f64>> = vec![Vec::new(); hz];
    let mut pi: Det = vec![Vec::new(); hz];
    for h in (0..hz).rev() {
        let vn = if h + 1 < hz { Some(v[h + 1].clone()) } else { None };
        q[h] = (0..m.sizes[h])
            .map(|x| (0..m.na).map(|a| m.r[h][x][a] + next_value(m, h, x, a, vn.as_deref())).collect())
            .collect();
        pi[h] = q[h].iter().map(|row| argmax_first(row)).collect();
        v[h] = (0..m.sizes[h]).map(|x| q[h][x][pi[h][x]]).collect();
    }
    (v[0][m.x0], q, pi)
}

/// State-action occupancy `[h][x][a]`.
pub fn occupancy(m: &Plain, pi: &dyn Fn(usize, usize) -> Vec<f64>) -> Vec<Table> {
    let mut marg = vec![0.0; m.sizes[0]];
    marg[m.x0] = 1.0;
    let mut out = Vec::new();
    for h in 0..m.horizon() {
        let d: Table = (0..m.sizes[h])
            .map(|x| pi(h, x).iter().map(|p| p * marg[x]).collect())
            .collect();
        if h + 1 < m.horizon() {
            let mut nx = vec![0.0; m.sizes[h + 1]];
            for x in 0..m.sizes[h] {
                for a in 0..m.na {
                    for &(y, p) in &m.p[h][x][a] {
                        nx[y] += d[x][a] * p;
                    }
                }
            }
            marg = nx;
        }
        out.push(d);
    }
    out
}

pub fn occupancy_det(m: &Plain, pi: &Det) -> Vec<Table> {
    occupancy(m, &|h, x| one_hot(pi[h][x], m.na))
}

/// `max_pi P(x_h = x)`, by a backward maximization toward the target.
pub fn max_reach(m: &Plain, h: usize, x: usize) -> f64 {
    let mut w: Vec<f64> = (0..m.sizes[h]).map(|y| if y == x { 1.0 } else { 0.0 }).collect();
    for l in (0..h).rev() {
        w = (0..m.sizes[l])
            .map(|y| {
                (0..m.na)
                    .map(|a| m.p[l][y][a].iter().map(|&(z, p)| p * w[z]).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .collect();
    }
    w[m.x0]
}

/// Coverability over all policies: the action at a reached state is free.
pub fn coverability_all(m: &Plain) -> f64 {
    (0..m.horizon())
        .map(|h| (0..m.sizes[h]).map(|x| m.na as f64 * max_reach(m, h, x)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Coverability over an explicit policy list.
pub fn coverability_of(m: &Plain, policies: &[Det]) -> f64 {
    let occ: Vec<Vec<Table>> = policies.iter().map(|p| occupancy_det(m, p)).collect();
    (0..m.horizon())
        .map(|h| {
            let mut s = 0.0;
            for x in 0..m.sizes[h] {
                for a in 0..m.na {
                    s += occ.iter().map(|o| o[h][x][a]).fold(0.0, f64::max);
                }
            }
            s
        })
        .fold(0.0, f64::max)
}

/// `R_h + E[max_a' f_{h+1}]`; `next = None` is zero.
pub fn backup(m: &Plain, h: usize, next: Option<&Table>) -> Table {
    let maxes: Option<Vec<f64>> = next.map(|t| t.iter().map(|r| r.iter().copied().fold(f64::MIN, f64::max)).collect());
    (0..m.sizes[h])
        .map(|x| {
            (0..m.na)
                .map(|a| m.r[h][x][a] + if h + 1 < m.horizon() { next_value(m, h, x, a, maxes.as_deref()) } else { 0.0 })
                .collect()
        })
        .collect()
}

pub fn residuals(m: &Plain, f: &[Table]) -> Vec<Table> {
    (0..m.horizon())
        .map(|h| {
            let b = backup(m, h, f.get(h + 1));
            f[h].iter()
                .zip(&b)
                .map(|(fr, br)| fr.iter().zip(br).map(|(u, v)| u - v).collect())
                .collect()
        })
        .collect()
}

pub fn flat(t: &Table) -> Vec<f64> {
    t.iter().flatten().copied().collect()
}

pub fn sup_dist(a: &Table, b: &Table) -> f64 {
    flat(a).iter().zip(flat(b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact SEC over `(dists, tests)` by enumerating every length-`t` sequence
/// of distributions, with the best test picked at each step.
pub fn sec_brute(dists: &[Vec<f64>], tests: &[Vec<f64>], t: usize) -> f64 {
    let sq: Vec<Vec<f64>> = tests.iter().map(|p| p.iter().map(|v| v * v).collect()).collect();
    let n = dists.len();
    if n == 0 || tests.is_empty() {
        return 0.0;
    }
    let mut best = f64::MIN;
    for code in 0..n.pow(t as u32) {
        let mut c = code;
        let seq: Vec<usize> = (0..t)
            .map(|_| {
                let d = c % n;
                c /= n;
                d
            })
            .collect();
        let mut total = 0.0;
        for (i, &d) in seq.iter().enumerate() {
            let step = tests
                .iter()
                .enumerate()
                .map(|(k, psi)| {
                    let e = dot(&dists[d], psi);
                    let den: f64 = seq[..i].iter().map(|&j| dot(&dists[j], &sq[k])).sum();
                    e * e / den.max(1.0)
                })
                .fold(f64::MIN, f64::max);
            total += step;
        }
        best = best.max(total);
    }
    best
}

/// Longest squared-BE independent sequence, searched up to length `cap`.
pub fn sq_be_dim_brute(dists: &[Vec<f64>], tests: &[Vec<f64>], eps: f64, cap: usize) -> usize {
    fn go(dists: &[Vec<f64>], tests: &[Vec<f64>], sq: &[Vec<f64>], eps: f64, cap: usize, seq: &mut Vec<usize>) -> usize {
        if seq.len() == cap {
            return seq.len();
        }
        let mut best = seq.len();
        for d in 0..dists.len() {
            let ok = tests.iter().enumerate().any(|(k, psi)| {
                let acc: f64 = seq.iter().map(|&j| dot(&dists[j], &sq[k])).sum();
                dot(&dists[d], psi).abs() > eps.max(acc.sqrt())
            });
            if ok {
                seq.push(d);
                best = best.max(go(dists, tests, sq, eps, cap, seq));
                seq.pop();
            }
        }
        best
    }
    let sq: Vec<Vec<f64>> = tests.iter().map(|p| p.iter().map(|v| v * v).collect()).collect();
    go(dists, tests, &sq, eps, cap, &mut Vec::new())
}

/// Replays a squared-BE witness given as `(dist, test)` index pairs.
pub fn sq_be_witness_ok(dists: &[Vec<f64>], tests: &[Vec<f64>], eps: f64, steps: &[(usize, usize)]) -> bool {
    let mut acc = vec![0.0f64; tests.len()];
    for &(d, k) in steps {
        if dot(&dists[d], &tests[k]).abs() <= eps.max(acc[k].sqrt()) {
            return false;
        }
        for (j, psi) in tests.iter().enumerate() {
            acc[j] += dists[d].iter().zip(psi).map(|(w, v)| w * v * v).sum::<f64>();
        }
    }
    true
}

/// Incremental replay of confidence sets over every data prefix.
pub struct LossReplay {
    comps: Vec<Vec<Table>>,
    /// `loss[h][c0][c1]`
    loss: Vec<Vec<Vec<f64>>>,
    maxes: Vec<Vec<Vec<f64>>>,
}

impl LossReplay {
    pub fn new(f: &ValueFunctionFamily) -> Self {
        let hz = f.horizon();
        let comps: Vec<Vec<Table>> = (0..hz).map(|h| f.components(h).iter().map(rows).collect()).collect();
        let loss = (0..hz)
            .map(|h| {
                let n1 = if h + 1 < hz { comps[h + 1].len() } else { 1 };
                vec![vec![0.0; n1]; comps[h].len()]
            })
            .collect();
        let maxes = comps
            .iter()
            .map(|cs| {
                cs.iter()
                    .map(|t| t.iter().map(|r| r.iter().copied().fold(f64::MIN, f64::max)).collect())
                    .collect()
            })
            .collect();
        Self { comps, loss, maxes }
    }

    pub fn add(&mut self, h: usize, x: usize, a: usize, r: f64, next: Option<usize>) {
        let hz = self.comps.len();
        for c0 in 0..self.comps[h].len() {
            let fx = self.comps[h][c0][x][a];
            for c1 in 0..self.loss[h][c0].len() {
                let tail = match next {
                    Some(y) if h + 1 < hz => self.maxes[h + 1][c1][y],
                    _ => 0.0,
                };
                let e = fx - r - tail;
                self.loss[h][c0][c1] += e * e;
            }
        }
    }

    /// Is member `idx` (component index per layer) inside the set at width `beta`?
    pub fn contains(&self, idx: &[usize], beta: f64) -> bool {
        let hz = self.comps.len();
        (0..hz).all(|h| {
            let c1 = if h + 1 < hz { idx[h + 1] } else { 0 };
            let min = (0..self.comps[h].len()).map(|c| self.loss[h][c][c1]).fold(f64::INFINITY, f64::min);
            self.loss[h][idx[h]][c1] - min <= beta
        })
    }
}

/// Inverse-CDF draw.
pub fn draw<R: Rng>(rng: &mut R, probs: &[(usize, f64)]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(y, p) in probs {
        acc += p;
        if u < acc {
            return y;
        }
    }
    probs.last().unwrap().0
}

pub fn draw_index<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let pairs: Vec<(usize, f64)> = probs.iter().copied().enumerate().collect();
    draw(rng, &pairs)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ln y` on `ln x`, flooring `y`.
pub fn loglog_slope(x: &[f64], y: &[f64], floor: f64) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(floor).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
