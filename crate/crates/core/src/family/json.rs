use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::LayerTable;

use super::ValueFunctionFamily;

type Tables = Vec<Vec<Vec<f64>>>;

/// Either full member tables `members[m][h][x][a]`, or component sets plus
/// `member_indices[m][h]`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyJson {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<Tables>,
    /// `components[h][c][x][a]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<Tables>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub member_indices: Vec<Vec<usize>>,
}

fn tables(ts: &[Vec<Vec<f64>>], what: &str) -> Result<Vec<LayerTable>> {
    ts.iter()
        .enumerate()
        .map(|(i, rows)| {
            let na = rows.first().map_or(0, |r| r.len());
            LayerTable::from_rows(rows, na).map_err(|e| Error::structure(format!("{what}[{i}]: {e}")))
        })
        .collect()
}

impl TryFrom<FamilyJson> for ValueFunctionFamily {
    type Error = Error;

    fn try_from(j: FamilyJson) -> Result<Self> {
        let components = j
            .components
            .iter()
            .enumerate()
            .map(|(h, c)| tables(c, &format!("components[{h}]")))
            .collect::<Result<Vec<_>>>()?;
        match (j.members.is_empty(), j.member_indices.is_empty()) {
            (false, true) => {
                let members = j
                    .members
                    .iter()
                    .enumerate()
                    .map(|(m, f)| tables(f, &format!("members[{m}]")))
                    .collect::<Result<Vec<_>>>()?;
                ValueFunctionFamily::with_components(members, components)
            }
            (true, false) => ValueFunctionFamily::from_indices(components, j.member_indices),
            (false, false) => Err(Error::structure("give either members or member_indices, not both")),
            (true, true) => Err(Error::structure("family has no members")),
        }
    }
}

impl FamilyJson {
    /// Compact form when members share components, explicit tables otherwise.
    pub fn from_family(fam: &ValueFunctionFamily) -> Self {
        let comps: Vec<Tables> = fam
            .all_components()
            .iter()
            .map(|layer| layer.iter().map(|t| t.to_rows()).collect())
            .collect();
        FamilyJson {
            members: Vec::new(),
            components: comps,
            member_indices: fam.member_indices().to_vec(),
        }
    }
}

impl ValueFunctionFamily {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&FamilyJson::from_family(self)).expect("family serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: FamilyJson = serde_json::from_str(s)?;
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
    fn member_tables_parse() {
        let s = r#"{"members":[[[[0.0,1.0]],[[0.5],[0.25]]],[[[0.0,1.0]],[[1.0],[0.0]]]]}"#;
        let fam = ValueFunctionFamily::from_json(s).unwrap();
        assert_eq!(fam.len(), 2);
        assert_eq!(fam.components(0).len(), 1);
        assert_eq!(fam.table(1, 1).get(0, 0), 1.0);
        let back = ValueFunctionFamily::from_json(&fam.to_json()).unwrap();
        assert_eq!(back, fam);
    }

    #[test]
    fn rejects_both_forms() {
        let s = r#"{"members":[[[[0.0]]]],"components":[[[[0.0]]]],"member_indices":[[0]]}"#;
        assert!(ValueFunctionFamily::from_json(s).is_err());
    }
}
