use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::LayerTable;

use super::LayeredMdp;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpJson {
    #[serde(rename = "H")]
    pub horizon: usize,
    pub actions: Vec<String>,
    pub layers: Vec<LayerJson>,
    /// `P[h][x][a]`; `H-1` layers, or `H` with a sink-only last layer.
    pub transitions: Vec<Vec<Vec<Vec<Entry>>>>,
    pub rewards: Vec<Vec<Vec<f64>>>,
    pub initial_state: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerJson {
    pub states: Vec<String>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub state: usize,
    pub prob: f64,
}

impl From<&LayeredMdp> for MdpJson {
    fn from(m: &LayeredMdp) -> Self {
        MdpJson {
            horizon: m.horizon(),
            actions: m.actions().to_vec(),
            layers: (0..m.horizon())
                .map(|h| LayerJson {
                    states: m.state_labels(h).to_vec(),
                })
                .collect(),
            transitions: m
                .transitions()
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|per_a| {
                            per_a
                                .iter()
                                .map(|row| row.iter().map(|&(state, prob)| Entry { state, prob }).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            rewards: m.rewards().iter().map(|t| t.to_rows()).collect(),
            initial_state: m.initial_state(),
        }
    }
}

impl TryFrom<MdpJson> for LayeredMdp {
    type Error = Error;

    fn try_from(j: MdpJson) -> Result<Self> {
        if j.layers.len() != j.horizon {
            return Err(Error::structure(format!(
                "H = {} but {} layers given",
                j.horizon,
                j.layers.len()
            )));
        }
        let mut transitions = j.transitions;
        if j.horizon > 0 && transitions.len() == j.horizon {
            let last = transitions.pop().unwrap();
            let sink_only = last.iter().flatten().all(|row| {
                row.is_empty() || (row.len() == 1 && row[0].state == 0 && row[0].prob == 1.0)
            });
            if !sink_only {
                return Err(Error::structure(format!(
                    "transitions[{}] must be empty or point to the terminal sink",
                    j.horizon - 1
                )));
            }
        }
        let na = j.actions.len();
        let transitions = transitions
            .into_iter()
            .map(|layer| {
                layer
                    .into_iter()
                    .map(|per_a| {
                        per_a
                            .into_iter()
                            .map(|row| row.into_iter().map(|e| (e.state, e.prob)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let rewards = j
            .rewards
            .iter()
            .enumerate()
            .map(|(h, rows)| {
                LayerTable::from_rows(rows, na).map_err(|e| Error::structure(format!("rewards[{h}]: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let layers = j.layers.into_iter().map(|l| l.states).collect();
        LayeredMdp::new(j.actions, layers, transitions, rewards, j.initial_state)
    }
}

impl LayeredMdp {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MdpJson::from(self)).expect("mdp serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: MdpJson = serde_json::from_str(s)?;
        j.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let s = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Self::from_json(&s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let p = path.as_ref();
        std::fs::write(p, self.to_json()).map_err(|e| Error::io(p, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = LayeredMdp::from_parts(
            &[1, 2],
            2,
            vec![vec![vec![vec![(0, 0.1), (1, 0.9)], vec![(1, 1.0 / 3.0), (0, 2.0 / 3.0)]]]],
            vec![
                LayerTable::from_rows(&[vec![0.0, 0.123456789012345678]], 2).unwrap(),
                LayerTable::from_rows(&[vec![0.7, 0.1], vec![1e-17, 0.3]], 2).unwrap(),
            ],
            0,
        )
        .unwrap();
        let back = LayeredMdp::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn accepts_sink_layer() {
        let s = r#"{"H":1,"actions":["go"],"layers":[{"states":["x"]}],
            "transitions":[[[[{"state":0,"prob":1.0}]]]],"rewards":[[[0.5]]],"initial_state":0}"#;
        let m = LayeredMdp::from_json(s).unwrap();
        assert_eq!(m.horizon(), 1);
        assert_eq!(m.reward(0, 0, 0), 0.5);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let s = r#"{"H":1,"horizon":1,"actions":["go"],"layers":[{"states":["x"]}],
            "transitions":[],"rewards":[[[0.5]]],"initial_state":0}"#;
        let err = LayeredMdp::from_json(s).unwrap_err().to_string();
        assert!(err.contains("horizon"), "{err}");
    }
}
