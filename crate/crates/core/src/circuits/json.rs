use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateJson {
    pub t: usize,
    pub kind: String,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
}

/// On-disk circuit: `{n, r, x: "bits", gates: [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircuitJson {
    pub n: usize,
    pub r: usize,
    pub x: String,
    pub gates: Vec<GateJson>,
}

fn one_target(g: &GateJson) -> Result<usize> {
    match g.targets.as_slice() {
        [q] => Ok(*q),
        _ => Err(Error::invalid(format!(
            "gate at time {} of kind `{}` needs exactly one target",
            g.t, g.kind
        ))),
    }
}

impl TryFrom<&GateJson> for Gate {
    type Error = Error;

    fn try_from(g: &GateJson) -> Result<Gate> {
        match g.kind.as_str() {
            "id" => Ok(Gate::identity(g.t, one_target(g)?)),
            "cz" => match g.targets.as_slice() {
                [f, s] => Gate::cz(g.t, *f, *s),
                _ => Err(Error::invalid(format!("CZ at time {} needs two targets", g.t))),
            },
            "single" => {
                let q = one_target(g)?;
                match (&g.name, &g.matrix) {
                    (Some(name), None) => Gate::named(g.t, q, name),
                    (None, Some(m)) if m.len() == 4 => {
                        Gate::single(g.t, q, m.iter().map(|[re, im]| C64::new(*re, *im)).collect())
                    }
                    _ => Err(Error::invalid(format!(
                        "single gate at time {} needs either a name or a 4-entry matrix",
                        g.t
                    ))),
                }
            }
            other => Err(Error::invalid(format!("unknown gate kind `{other}`"))),
        }
    }
}

impl From<&Gate> for GateJson {
    fn from(g: &Gate) -> Self {
        let (kind, name, matrix) = match &g.kind {
            GateKind::Identity { .. } => ("id", None, None),
            GateKind::Cz { .. } => ("cz", None, None),
            GateKind::Single { name: Some(n), .. } => ("single", Some(n.clone()), None),
            GateKind::Single { matrix, .. } => (
                "single",
                None,
                Some(matrix.iter().map(|z| [z.re, z.im]).collect()),
            ),
        };
        GateJson {
            t: g.time,
            kind: kind.to_string(),
            targets: g.targets(),
            name,
            matrix,
        }
    }
}

impl TryFrom<&CircuitJson> for Circuit {
    type Error = Error;

    fn try_from(c: &CircuitJson) -> Result<Circuit> {
        let x = c
            .x
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(Error::invalid(format!("input bitstring has character `{ch}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let gates = c.gates.iter().map(Gate::try_from).collect::<Result<Vec<_>>>()?;
        Circuit::new(c.n, c.r, x, gates)
    }
}

impl From<&Circuit> for CircuitJson {
    fn from(c: &Circuit) -> Self {
        CircuitJson {
            n: c.n,
            r: c.r,
            x: c.x.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect(),
            gates: c.gates.iter().map(GateJson::from).collect(),
        }
    }
}

impl Circuit {
    pub fn from_json(s: &str) -> Result<Self> {
        let j: CircuitJson = serde_json::from_str(s)?;
        Circuit::try_from(&j)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CircuitJson::from(self))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_named_and_explicit_gates() {
        let s = r#"{"n":1,"r":1,"x":"1","gates":[
            {"t":1,"kind":"single","targets":[0],"name":"H"},
            {"t":2,"kind":"cz","targets":[0,1]},
            {"t":3,"kind":"id","targets":[1]},
            {"t":4,"kind":"single","targets":[1],"matrix":[[0,0],[1,0],[1,0],[0,0]]}
        ]}"#;
        let c = Circuit::from_json(s).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.cz_count(), 1);
        let back = Circuit::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_kind() {
        let s = r#"{"n":1,"r":0,"x":"0","gates":[{"t":1,"kind":"swap","targets":[0]}]}"#;
        assert!(Circuit::from_json(s).is_err());
    }
}
