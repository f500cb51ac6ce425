use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coverlab::complexity::{be_dim, sec_exhaustive, sec_greedy, TestType, Variant};
use coverlab::coverage::{
    concentrability, coverability, generalized_concentrability, generalized_coverability, single_policy_concentrability,
    DistributionFamily, PolicySet,
};
use coverlab::family::{check_completeness, check_realizability, MEMBER_TOL};
use coverlab::golf::{default_beta, golf_run, GolfConfig};
use coverlab::harness::{self, instance, ExperimentConfig};
use coverlab::mdp::{optimal_values_with, policy_value_with, validate_mdp};
use coverlab::offline::{fqi, generate_offline, msbo, OfflineDataset};
use coverlab::reward_free::{rf_exploit, rf_explore};
use coverlab::{LayerTable, LayeredMdp, ValueFunctionFamily};

#[derive(Parser)]
#[command(name = "coverlab", version, about = "Coverage, complexity measures and optimistic exploration on layered MDPs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Structural and range checks on an MDP (and optionally a family).
    Validate {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        family: Option<PathBuf>,
    },
    /// Build a named construction and write its MDP, family and manifest.
    Construct {
        #[arg(value_parser = instance::CONSTRUCTIONS)]
        name: String,
        /// Comma-separated `key=value` pairs, e.g. `H=4,X=16`.
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long)]
        out_mdp: Option<PathBuf>,
        #[arg(long)]
        out_family: Option<PathBuf>,
        #[arg(long)]
        out_manifest: Option<PathBuf>,
    },
    /// Coverage and complexity measures.
    Measure(MeasureArgs),
    #[command(subcommand)]
    Run(RunCmd),
    /// Run a claim-verification suite; exits 1 if any claim fails.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Ledger CSV path (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Conc,
    Spc,
    Cov,
    GenConc,
    GenCov,
    BeDim,
    BeDimSq,
    Sec,
    SecGreedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policies {
    Induced,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Q,
    V,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(value_enum)]
    measure: Measure,
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long)]
    family: Option<PathBuf>,
    /// Logging distribution: JSON list of layer tables.
    #[arg(long)]
    mu: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "induced")]
    policies: Policies,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long = "T", default_value_t = 4)]
    rounds: usize,
    #[arg(long = "type", value_enum, default_value = "q")]
    ty: TestKind,
    /// Restrict dimension searches to one (0-based) layer.
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long, default_value_t = 64)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OfflineAlg {
    Msbo,
    Fqi,
}

#[derive(Subcommand)]
enum RunCmd {
    Golf {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        family: PathBuf,
        #[arg(long = "T")]
        rounds: usize,
        /// A number or `auto` for `2 log(T H |F| / delta)`.
        #[arg(long, default_value = "auto")]
        beta: String,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    RewardFree {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        gfamily: PathBuf,
        #[arg(long)]
        ffamily: PathBuf,
        /// Target reward (JSON list of layer tables); defaults to the MDP's.
        #[arg(long)]
        reward: Option<PathBuf>,
        #[arg(long = "T")]
        rounds: usize,
        #[arg(long)]
        beta_rf: f64,
        #[arg(long)]
        beta_off: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Offline {
        #[arg(value_enum)]
        method: OfflineAlg,
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        family: PathBuf,
        /// JSON list of layer tables, or `witness` / `uniform`.
        #[arg(long, default_value = "witness")]
        mu: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded sweep from a TOML experiment config; exits 1 if a declared
    /// assertion fails.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(value: &T, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn load_mdp(p: &Path) -> anyhow::Result<LayeredMdp> {
    Ok(LayeredMdp::load(p)?)
}

fn load_family(p: &Path, mdp: &LayeredMdp) -> anyhow::Result<ValueFunctionFamily> {
    let f = ValueFunctionFamily::load(p)?;
    f.check_shape(mdp)?;
    Ok(f)
}

fn load_tables(p: &Path) -> anyhow::Result<Vec<LayerTable>> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
}

fn parse_params(s: &str) -> anyhow::Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for kv in s.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("parameter `{kv}` is not of the form key=value");
        };
        let v: f64 = v.trim().parse().with_context(|| format!("parameter `{k}`"))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

#[derive(Serialize)]
struct ValidateOut {
    mdp: coverlab::mdp::ValidationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    realizability: Option<coverlab::family::RealizabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    completeness: Option<coverlab::family::CompletenessReport>,
}

fn validate(mdp: &Path, family: &Option<PathBuf>) -> anyhow::Result<bool> {
    let m = load_mdp(mdp)?;
    let report = validate_mdp(&m);
    let mut ok = report.is_valid();
    let (mut realizability, mut completeness) = (None, None);
    if let Some(fp) = family {
        let f = load_family(fp, &m)?;
        let c = check_completeness(&m, &f);
        ok &= c.is_complete();
        realizability = Some(check_realizability(&m, &f, MEMBER_TOL));
        completeness = Some(c);
    }
    emit_json(
        &ValidateOut {
            mdp: report,
            realizability,
            completeness,
        },
        &None,
    )?;
    Ok(ok)
}

fn measure(a: &MeasureArgs) -> anyhow::Result<()> {
    let mdp = load_mdp(&a.mdp)?;
    let family = a.family.as_ref().map(|p| load_family(p, &mdp)).transpose()?;
    let need_family = || family.as_ref().context("this measure needs --family");
    let set = || -> anyhow::Result<PolicySet> {
        Ok(match a.policies {
            Policies::All => PolicySet::All,
            Policies::Induced => PolicySet::induced(need_family()?),
        })
    };
    let mu = || -> anyhow::Result<DistributionFamily> {
        let p = a.mu.as_ref().context("this measure needs --mu")?;
        Ok(DistributionFamily::new(load_tables(p)?, &mdp)?)
    };
    let ty = match a.ty {
        TestKind::Q => TestType::Q,
        TestKind::V => TestType::V,
    };
    match a.measure {
        Measure::Conc => emit_json(&concentrability(&mdp, &set()?, &mu()?), &a.out),
        Measure::Spc => emit_json(&single_policy_concentrability(&mdp, &mu()?), &a.out),
        Measure::Cov => emit_json(&coverability(&mdp, &set()?), &a.out),
        Measure::GenConc => emit_json(&generalized_concentrability(&mdp, need_family()?, &set()?, &mu()?), &a.out),
        Measure::GenCov => emit_json(&generalized_coverability(&mdp, need_family()?, &set()?), &a.out),
        Measure::BeDim | Measure::BeDimSq => {
            let v = if matches!(a.measure, Measure::BeDim) { Variant::Avg } else { Variant::Sq };
            emit_json(&be_dim(&mdp, need_family()?, &set()?, a.eps, v, ty, a.layer, a.cap)?, &a.out)
        }
        Measure::Sec => emit_json(&sec_exhaustive(&mdp, need_family()?, &set()?, a.rounds, ty)?, &a.out),
        Measure::SecGreedy => emit_json(&sec_greedy(&mdp, need_family()?, &set()?, a.rounds, ty)?, &a.out),
    }
}

fn run(cmd: &RunCmd) -> anyhow::Result<bool> {
    match cmd {
        RunCmd::Golf {
            mdp,
            family,
            rounds,
            beta,
            delta,
            seed,
            out,
        } => {
            let m = load_mdp(mdp)?;
            let f = load_family(family, &m)?;
            let beta = match beta.as_str() {
                "auto" => default_beta(*rounds, m.horizon(), f.len(), *delta),
                b => b.parse().with_context(|| format!("--beta `{b}`"))?,
            };
            let log = golf_run(&m, &f, &GolfConfig::new(*rounds, beta, *seed)).map_err(|abort| {
                let partial = &abort.partial;
                anyhow::anyhow!(
                    "{abort}; {} rounds completed, cumulative regret {}",
                    partial.rounds.len(),
                    partial.regret()
                )
            })?;
            log.write_csv(sink(out)?)?;
            Ok(true)
        }
        RunCmd::RewardFree {
            mdp,
            gfamily,
            ffamily,
            reward,
            rounds,
            beta_rf,
            beta_off,
            seed,
            out,
        } => {
            let m = load_mdp(mdp)?;
            let g = load_family(gfamily, &m)?;
            let f = load_family(ffamily, &m)?;
            let target = match reward {
                Some(p) => load_tables(p)?,
                None => m.rewards().to_vec(),
            };
            let ex = rf_explore(&m, &g, *rounds, *beta_rf, *seed)?;
            let fit = rf_exploit(&ex, &f, &target, m.initial_state(), *beta_off)?;
            let j_star = optimal_values_with(&m, &target).value;
            let j_hat = policy_value_with(&m, &fit.policy, &target).value;
            let mut w = sink(out)?;
            writeln!(w, "t,g_value,set_size,selected")?;
            for r in &ex.log.rounds {
                writeln!(w, "{},{},{},{}", r.t, r.optimistic_value, r.set_size, u8::from(r.t == ex.t_star))?;
            }
            eprintln!(
                "t* = {}, member {}, |F_off| = {}, J* = {j_star}, J(pi_hat) = {j_hat}",
                ex.t_star,
                fit.member,
                fit.offline_set.len()
            );
            Ok(true)
        }
        RunCmd::Offline {
            method,
            mdp,
            family,
            mu,
            n,
            seed,
            out,
        } => {
            let m = load_mdp(mdp)?;
            let f = load_family(family, &m)?;
            let mu = match mu.as_str() {
                "uniform" => DistributionFamily::uniform(&m),
                "witness" => match coverability(&m, &PolicySet::All).witness {
                    coverlab::coverage::Witness::Distribution { mu } => DistributionFamily::new(mu, &m)?,
                    _ => bail!("no coverability witness"),
                },
                path => DistributionFamily::new(load_tables(Path::new(path))?, &m)?,
            };
            let data: OfflineDataset = generate_offline(&m, &mu, *n, *seed)?;
            let policy = match method {
                OfflineAlg::Msbo => msbo(&data, &f).policy,
                OfflineAlg::Fqi => fqi(&data, &f).policy,
            };
            let j_star = coverlab::mdp::optimal_values(&m).value;
            let j = coverlab::mdp::policy_value(&m, &policy).value;
            let mut w = sink(out)?;
            writeln!(w, "n,seed,J_star,J_pi_hat,suboptimality")?;
            writeln!(w, "{n},{seed},{j_star},{j},{}", j_star - j)?;
            Ok(true)
        }
        RunCmd::Sweep { config } => {
            let cfg = ExperimentConfig::load(config)?;
            let outcome = harness::run_experiment(&cfg)?;
            for a in &outcome.assertions {
                eprintln!("[{}] {:?}: {}", if a.pass { "PASS" } else { "FAIL" }, a.assertion, a.detail);
            }
            eprintln!("wrote {} files to {}", outcome.files.len(), cfg.output.dir.display());
            Ok(outcome.passed)
        }
    }
}

fn verify(suite: &str, out: &Option<PathBuf>) -> anyhow::Result<bool> {
    let pool = harness::thread_pool(None)?;
    let rows = pool.install(|| harness::verify_claims(suite))?;
    harness::claims::write_ledger(&rows, sink(out)?)?;
    let bad = rows.iter().filter(|r| !r.pass).count();
    eprintln!("{} claims checked, {bad} failed", rows.len());
    Ok(bad == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Validate { mdp, family } => validate(mdp, family),
        Cmd::Construct {
            name,
            params,
            out_mdp,
            out_family,
            out_manifest,
        } => (|| {
            let c = instance::construct(name, &parse_params(params)?)?;
            match out_mdp {
                Some(p) => c.mdp.save(p)?,
                None => println!("{}", c.mdp.to_json()),
            }
            if let Some(p) = out_family {
                c.family.save(p)?;
            }
            if let Some(p) = out_manifest {
                emit_json(&c.manifest, &Some(p.clone()))?;
            }
            Ok(true)
        })(),
        Cmd::Measure(a) => measure(a).map(|_| true),
        Cmd::Run(r) => run(r),
        Cmd::Verify { suite, out } => verify(suite, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
