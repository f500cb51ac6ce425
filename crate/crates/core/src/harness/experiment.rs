//! Seeded sweeps: one run per (sweep value, seed), executed on a worker
//! pool and merged in sweep order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::claims::{verify_claims, ClaimRow};
use super::config::{Assertion, ExperimentConfig, ExperimentKind, MuSpec, OfflineMethod};
use super::instance::{resolve, Instance};
use super::stats::{loglog_slope, median, quantile};
use super::svg::{line_chart, Series};
use crate::coverage::{coverability, DistributionFamily, PolicySet, Witness};
use crate::error::{Error, Result};
use crate::golf::{beta_for, golf_run, GolfConfig};
use crate::mdp::{occupancy, optimal_values, optimal_values_with, policy_value, policy_value_with};
use crate::offline::{avoid_policy_mu, fqi, generate_offline, msbo};
use crate::reward_free::{rf_exploit, rf_explore};
use crate::table::LayerTable;

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub axis: usize,
    pub seed: u64,
    /// Golf: `Reg(T)`; reward-free and offline: `J(pi*) - J(pi_hat)`.
    pub metric: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fstar_always: Option<bool>,
    pub monotone: bool,
    #[serde(skip)]
    pub csv: String,
    #[serde(skip)]
    pub curve: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxisSummary {
    pub axis: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub metrics: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssertionResult {
    pub assertion: Assertion,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    pub metric: &'static str,
    pub axis_name: &'static str,
    pub points: Vec<AxisSummary>,
    pub exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claims: Option<Vec<ClaimRow>>,
    pub assertions: Vec<AssertionResult>,
    pub passed: bool,
    #[serde(skip)]
    pub runs: Vec<RunResult>,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

fn metric_name(kind: ExperimentKind) -> (&'static str, &'static str) {
    match kind {
        ExperimentKind::Golf => ("regret", "T"),
        ExperimentKind::RewardFree => ("suboptimality", "T"),
        ExperimentKind::Offline => ("suboptimality", "n"),
        ExperimentKind::Claims => ("failures", "suite"),
    }
}

fn golf_once(cfg: &ExperimentConfig, inst: &Instance, t: usize, seed: u64) -> Result<RunResult> {
    let a = &cfg.algorithm;
    let beta = a
        .beta
        .unwrap_or_else(|| beta_for(a.beta_c, t, inst.mdp.horizon(), inst.family.len(), a.delta));
    let log = golf_run(&inst.mdp, &inst.family, &GolfConfig::new(t, beta, seed))?;
    let mut csv = Vec::new();
    log.write_csv(&mut csv).map_err(|e| Error::io("<csv>", e))?;
    let curve: Vec<f64> = log.rounds.iter().map(|r| r.cum_regret).collect();
    Ok(RunResult {
        axis: t,
        seed,
        metric: log.regret(),
        fstar_always: log.fstar_always_in_set(),
        monotone: curve.windows(2).all(|w| w[1] >= w[0] - 1e-12),
        csv: String::from_utf8(csv).expect("csv is utf-8"),
        curve,
    })
}

fn rf_once(cfg: &ExperimentConfig, inst: &Instance, t: usize, seed: u64) -> Result<RunResult> {
    let a = &cfg.algorithm;
    let g = inst
        .gfamily
        .as_ref()
        .ok_or_else(|| Error::Config("reward-free runs need `instance.gfamily` (or the two-layer construction)".into()))?;
    let hz = inst.mdp.horizon();
    let beta_rf = a.beta_rf.unwrap_or_else(|| beta_for(a.beta_rf_c, t, hz, g.len(), a.delta));
    let beta_off = a
        .beta_off
        .unwrap_or_else(|| beta_for(a.beta_off_c, t, hz, inst.family.len(), a.delta));
    let out = rf_explore(&inst.mdp, g, t, beta_rf, seed)?;
    let ex = rf_exploit(&out, &inst.family, &inst.target_reward, inst.mdp.initial_state(), beta_off)?;
    let j_star = optimal_values_with(&inst.mdp, &inst.target_reward).value;
    let j_hat = policy_value_with(&inst.mdp, &ex.policy, &inst.target_reward).value;
    let mut csv = String::from("t,g_value,set_size,selected\n");
    for r in &out.log.rounds {
        let _ = writeln!(csv, "{},{},{},{}", r.t, r.optimistic_value, r.set_size, u8::from(r.t == out.t_star));
    }
    Ok(RunResult {
        axis: t,
        seed,
        metric: j_star - j_hat,
        fstar_always: None,
        monotone: true,
        csv,
        curve: Vec::new(),
    })
}

fn resolve_mu(spec: &MuSpec, inst: &Instance) -> Result<DistributionFamily> {
    let mdp = &inst.mdp;
    match spec {
        MuSpec::Witness => match coverability(mdp, &PolicySet::All).witness {
            Witness::Distribution { mu } => DistributionFamily::new(mu, mdp),
            _ => Err(Error::param("coverability returned no distribution witness")),
        },
        MuSpec::Uniform => Ok(DistributionFamily::uniform(mdp)),
        MuSpec::Optimal => Ok(DistributionFamily::from_occupancy(&occupancy(mdp, &optimal_values(mdp).policy))),
        MuSpec::AvoidOptimal => avoid_policy_mu(mdp, &optimal_values(mdp).policy),
        MuSpec::File(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let layers: Vec<LayerTable> = serde_json::from_str(&text)?;
            DistributionFamily::new(layers, mdp)
        }
    }
}

fn offline_once(cfg: &ExperimentConfig, inst: &Instance, mu: &DistributionFamily, j_star: f64, n: usize, seed: u64) -> Result<RunResult> {
    let data = generate_offline(&inst.mdp, mu, n, seed)?;
    let (member, policy) = match cfg.algorithm.method.unwrap_or(OfflineMethod::Msbo) {
        OfflineMethod::Msbo => {
            let fit = msbo(&data, &inst.family);
            (Some(fit.member), fit.policy)
        }
        OfflineMethod::Fqi => (None, fqi(&data, &inst.family).policy),
    };
    let sub = j_star - policy_value(&inst.mdp, &policy).value;
    let m = member.map_or(String::new(), |m| m.to_string());
    Ok(RunResult {
        axis: n,
        seed,
        metric: sub,
        fstar_always: None,
        monotone: true,
        csv: format!("n,seed,member,suboptimality\n{n},{seed},{m},{sub}\n"),
        curve: Vec::new(),
    })
}

fn summarize(axis: &[usize], runs: &[RunResult]) -> Vec<AxisSummary> {
    axis.iter()
        .map(|&v| {
            let metrics: Vec<f64> = runs.iter().filter(|r| r.axis == v).map(|r| r.metric).collect();
            AxisSummary {
                axis: v,
                median: median(&metrics),
                q25: quantile(&metrics, 0.25),
                q75: quantile(&metrics, 0.75),
                metrics,
            }
        })
        .collect()
}

fn point<'a>(points: &'a [AxisSummary], v: usize) -> Result<&'a AxisSummary> {
    points
        .iter()
        .find(|p| p.axis == v)
        .ok_or_else(|| Error::Config(format!("assertion refers to sweep value {v}, which is not in the sweep")))
}

fn evaluate(a: &Assertion, out: &ExperimentOutcome) -> Result<AssertionResult> {
    let (pass, detail) = match a {
        Assertion::Ratio {
            small,
            large,
            max_ratio,
            normalize,
        } => {
            let scale = |v: usize| if *normalize { v as f64 } else { 1.0 };
            let s = point(&out.points, *small)?.median / scale(*small);
            let l = point(&out.points, *large)?.median / scale(*large);
            (l < max_ratio * s, format!("median at {large}: {l:.6}; at {small}: {s:.6}"))
        }
        Assertion::Exponent { min, max } => {
            let e = out.exponent.unwrap_or(f64::NAN);
            let ok = min.map_or(true, |m| e >= m) && max.map_or(true, |m| e <= m);
            (ok, format!("fitted exponent {e:.4}"))
        }
        Assertion::MedianAtLeast { at, min } => {
            let m = point(&out.points, *at)?.median;
            (m >= *min, format!("median at {at}: {m:.6}"))
        }
        Assertion::FstarFraction { min } => {
            let tracked: Vec<bool> = out.runs.iter().filter_map(|r| r.fstar_always).collect();
            if tracked.is_empty() {
                (false, "no run tracked Q* membership (Q* not in the family?)".to_string())
            } else {
                let frac = tracked.iter().filter(|&&b| b).count() as f64 / tracked.len() as f64;
                (frac >= *min, format!("fraction {frac:.3} over {} runs", tracked.len()))
            }
        }
        Assertion::MonotoneRegret => {
            let bad = out.runs.iter().filter(|r| !r.monotone).count();
            (bad == 0, format!("{bad} non-monotone runs"))
        }
        Assertion::ClaimsPass => {
            let rows = out.claims.as_deref().unwrap_or(&[]);
            let bad = rows.iter().filter(|r| !r.pass).count();
            (bad == 0 && !rows.is_empty(), format!("{bad} of {} claims failed", rows.len()))
        }
    };
    Ok(AssertionResult {
        assertion: a.clone(),
        pass,
        detail,
    })
}

fn write(path: PathBuf, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn prefix(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Golf => "golf",
        ExperimentKind::RewardFree => "reward_free",
        ExperimentKind::Offline => "offline",
        ExperimentKind::Claims => "claims",
    }
}

/// Runs the configured experiment and writes its artifacts into
/// `output.dir`: per-run CSVs, `aggregate.json`, optional SVG.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pool = super::thread_pool(cfg.threads)?;
    let (metric, axis_name) = metric_name(cfg.kind);
    let mut files = Vec::new();
    let mut out = if cfg.kind == ExperimentKind::Claims {
        let suite = cfg.algorithm.suite.as_deref().unwrap_or("all");
        let rows = pool.install(|| verify_claims(suite))?;
        ExperimentOutcome {
            kind: cfg.kind,
            metric,
            axis_name,
            points: Vec::new(),
            exponent: None,
            claims: Some(rows),
            assertions: Vec::new(),
            passed: true,
            runs: Vec::new(),
            files: Vec::new(),
        }
    } else {
        let inst = resolve(&cfg.instance)?;
        let jobs: Vec<(usize, u64)> = cfg
            .axis()
            .iter()
            .flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s)))
            .collect();
        let offline_ctx = if cfg.kind == ExperimentKind::Offline {
            let mu = resolve_mu(cfg.algorithm.mu.as_ref().unwrap_or(&MuSpec::Witness), &inst)?;
            Some((mu, optimal_values(&inst.mdp).value))
        } else {
            None
        };
        let runs: Vec<RunResult> = pool.install(|| {
            jobs.par_iter()
                .map(|&(v, s)| match cfg.kind {
                    ExperimentKind::Golf => golf_once(cfg, &inst, v, s),
                    ExperimentKind::RewardFree => rf_once(cfg, &inst, v, s),
                    _ => {
                        let (mu, j) = offline_ctx.as_ref().expect("offline context");
                        offline_once(cfg, &inst, mu, *j, v, s)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let points = summarize(cfg.axis(), &runs);
        let exponent = (points.len() >= 2).then(|| {
            let x: Vec<f64> = points.iter().map(|p| p.axis as f64).collect();
            let y: Vec<f64> = points.iter().map(|p| p.median).collect();
            loglog_slope(&x, &y, 1e-12)
        });
        ExperimentOutcome {
            kind: cfg.kind,
            metric,
            axis_name,
            points,
            exponent,
            claims: None,
            assertions: Vec::new(),
            passed: true,
            runs,
            files: Vec::new(),
        }
    };
    for a in &cfg.assertions {
        let r = evaluate(a, &out)?;
        out.passed &= r.pass;
        out.assertions.push(r);
    }
    if let Some(rows) = &out.claims {
        out.passed &= rows.iter().all(|r| r.pass);
        let mut csv = Vec::new();
        super::claims::write_ledger(rows, &mut csv)?;
        write(dir.join("claims.csv"), &csv, &mut files)?;
    }
    if cfg.output.per_run {
        let p = prefix(cfg.kind);
        for r in &out.runs {
            write(dir.join(format!("{p}_{axis_name}{}_seed{}.csv", r.axis, r.seed)), r.csv.as_bytes(), &mut files)?;
        }
    }
    let json = serde_json::to_string_pretty(&out)?;
    write(dir.join("aggregate.json"), json.as_bytes(), &mut files)?;
    if cfg.output.svg && !out.runs.is_empty() {
        write(dir.join(format!("{}.svg", prefix(cfg.kind))), svg_for(&out).as_bytes(), &mut files)?;
    }
    out.files = files;
    Ok(out)
}

fn svg_for(out: &ExperimentOutcome) -> String {
    if out.kind == ExperimentKind::Golf {
        let series: Vec<Series> = out
            .points
            .iter()
            .map(|p| {
                let curves: Vec<&Vec<f64>> = out.runs.iter().filter(|r| r.axis == p.axis).map(|r| &r.curve).collect();
                let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
                let step = (len / 200).max(1);
                let points = (0..len)
                    .step_by(step)
                    .map(|t| {
                        let v: Vec<f64> = curves.iter().map(|c| c[t]).collect();
                        ((t + 1) as f64, median(&v))
                    })
                    .collect();
                Series {
                    label: format!("T={}", p.axis),
                    points,
                }
            })
            .collect();
        line_chart("median cumulative regret", "round t", "Reg(t)", &series, false, false)
    } else {
        let s = Series {
            label: "median".into(),
            points: out.points.iter().map(|p| (p.axis as f64, p.median)).collect(),
        };
        line_chart(&format!("median {}", out.metric), out.axis_name, out.metric, &[s], true, true)
    }
}

/// Shorthand used by the CLI: load, run, report.
pub fn run_config_file(path: &Path) -> Result<ExperimentOutcome> {
    run_experiment(&ExperimentConfig::load(path)?)
}
