//! Resolves an [`InstanceSpec`] into an MDP and families.

use std::collections::BTreeMap;

use super::config::InstanceSpec;
use crate::constructions::{build_bandit_family, build_peak_bandit, build_tree, build_two_layer, Construction};
use crate::error::{Error, Result};
use crate::family::ValueFunctionFamily;
use crate::mdp::LayeredMdp;
use crate::reward_free::build_rf_pair;
use crate::table::LayerTable;

pub const CONSTRUCTIONS: [&str; 5] = ["tree", "two-layer", "bandit", "peak-bandit", "exbmdp"];

fn get(params: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<f64> {
    params
        .get(key)
        .copied()
        .or(default)
        .ok_or_else(|| Error::Config(format!("construction parameter `{key}` is required")))
}

fn get_usize(params: &BTreeMap<String, f64>, key: &str, default: Option<usize>) -> Result<usize> {
    let v = get(params, key, default.map(|d| d as f64))?;
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::Config(format!("construction parameter `{key}` must be a non-negative integer")));
    }
    Ok(v as usize)
}

fn check_keys(params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Config(format!("unknown construction parameter `{k}` (expected one of {allowed:?})"))),
        None => Ok(()),
    }
}

/// Builds a named construction. `exbmdp` comes with a single-member zero
/// family; the bandit construction picks one instance.
pub fn construct(name: &str, params: &BTreeMap<String, f64>) -> Result<Construction> {
    match name {
        "tree" => {
            check_keys(params, &["H", "X", "C", "leaf"])?;
            let h = get_usize(params, "H", None)?;
            let x = get_usize(params, "X", None)?;
            let c = get_usize(params, "C", Some(usize::MAX))?;
            let depth = crate::constructions::tree_depth(h, x, c);
            let leaf = get_usize(params, "leaf", Some((1usize << depth.min(62)).saturating_sub(1)))?;
            build_tree(h, x, c, leaf)
        }
        "two-layer" => {
            check_keys(params, &["eps2", "instance"])?;
            let eps = get(params, "eps2", None)?;
            let a = (1.0 / eps).round() as usize;
            build_two_layer(eps, get_usize(params, "instance", Some(a.saturating_sub(1)))?)
        }
        "bandit" => {
            check_keys(params, &["eps1", "instance"])?;
            let eps = get(params, "eps1", None)?;
            let i = get_usize(params, "instance", Some(0))?;
            build_bandit_family(eps)?
                .into_iter()
                .nth(i)
                .ok_or_else(|| Error::param(format!("bandit instance {i} out of range")))
        }
        "peak-bandit" => {
            check_keys(params, &["arms", "grid", "instance", "q"])?;
            build_peak_bandit(
                get_usize(params, "arms", None)?,
                get_usize(params, "grid", None)?,
                get_usize(params, "instance", None)?,
                get(params, "q", Some(1.0))?,
            )
        }
        "exbmdp" => {
            check_keys(params, &["S", "Xi", "A", "H", "obs", "seed"])?;
            let e = crate::constructions::build_exbmdp(
                get_usize(params, "S", None)?,
                get_usize(params, "Xi", None)?,
                get_usize(params, "A", None)?,
                get_usize(params, "H", None)?,
                get_usize(params, "obs", Some(2))?,
                get_usize(params, "seed", Some(0))? as u64,
            )?;
            let family = ValueFunctionFamily::from_members(vec![e.mdp.zero_tables()])?;
            Ok(Construction {
                mdp: e.mdp,
                family,
                manifest: e.manifest,
            })
        }
        other => Err(Error::Config(format!("unknown construction `{other}` (expected one of {CONSTRUCTIONS:?})"))),
    }
}

pub struct Instance {
    pub mdp: LayeredMdp,
    pub family: ValueFunctionFamily,
    pub gfamily: Option<ValueFunctionFamily>,
    pub target_reward: Vec<LayerTable>,
}

pub fn load_reward(path: &std::path::Path) -> Result<Vec<LayerTable>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn resolve(spec: &InstanceSpec) -> Result<Instance> {
    let (mdp, family, mut gfamily) = match (&spec.construction, &spec.mdp) {
        (Some(_), Some(_)) => return Err(Error::Config("`instance` takes `construction` or `mdp`, not both".into())),
        (Some(name), None) if name == "two-layer" => {
            let c = construct(name, &spec.params)?;
            let instance = (0..c.mdp.n_actions()).find(|&a| c.mdp.reward(1, 0, a) > 0.0).unwrap_or(0);
            let (_, g) = build_rf_pair(get(&spec.params, "eps2", None)?, instance)?;
            (c.mdp, c.family, Some(g))
        }
        (Some(name), None) => {
            let c = construct(name, &spec.params)?;
            (c.mdp, c.family, None)
        }
        (None, Some(path)) => {
            let mdp = LayeredMdp::load(path)?;
            let fpath = spec
                .family
                .as_ref()
                .ok_or_else(|| Error::Config("`instance.family` is required with `instance.mdp`".into()))?;
            let family = ValueFunctionFamily::load(fpath)?;
            family.check_shape(&mdp)?;
            (mdp, family, None)
        }
        (None, None) => return Err(Error::Config("`instance` needs `construction` or `mdp`".into())),
    };
    if let Some(p) = &spec.gfamily {
        let g = ValueFunctionFamily::load(p)?;
        g.check_shape(&mdp)?;
        gfamily = Some(g);
    }
    let target_reward = match &spec.reward {
        Some(p) => load_reward(p)?,
        None => mdp.rewards().to_vec(),
    };
    Ok(Instance {
        mdp,
        family,
        gfamily,
        target_reward,
    })
}
