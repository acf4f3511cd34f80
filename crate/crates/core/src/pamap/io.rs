//! JSON map-definition files. Every number is a string: rationals as `"p/q"`
//! and splitting entries optionally as `"p/q+r/s*sqrt(D)"`.

use super::{box_bounds, AffineBranch, HyperbolicSplitting, PiecewiseAffineMap};
use crate::error::{Error, Result};
use crate::exactgeom::{format_rational, parse_rational, Halfspace, Polytope, RatMatrix, Rational, Surd};
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "box")]
    pub fundamental_box: BoxSpec,
    pub d_u: usize,
    pub d_s: usize,
    pub splitting: SplittingSpec,
    pub branches: Vec<BranchSpec>,
    #[serde(default)]
    pub torus: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<HalfspaceSpec>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<String>,
    pub hi: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SplittingSpec {
    #[serde(rename = "Eu")]
    pub eu: Vec<Vec<String>>,
    #[serde(rename = "Es")]
    pub es: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    pub normal: Vec<String>,
    pub offset: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<String>>,
    pub b: Vec<String>,
    pub domain: Vec<HalfspaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
}

fn rationals(xs: &[String]) -> Result<Vec<Rational>> {
    xs.iter().map(|x| parse_rational(x)).collect()
}

fn strings(xs: &[Rational]) -> Vec<String> {
    xs.iter().map(format_rational).collect()
}

fn halfspace(h: &HalfspaceSpec) -> Result<Halfspace> {
    Ok(Halfspace::new(rationals(&h.normal)?, parse_rational(&h.offset)?))
}

fn halfspace_spec(h: &Halfspace) -> HalfspaceSpec {
    HalfspaceSpec {
        normal: strings(h.normal()),
        offset: format_rational(h.offset()),
    }
}

fn polytope(bx: &Polytope, hs: &[HalfspaceSpec]) -> Result<Polytope> {
    let hs: Vec<Halfspace> = hs.iter().map(halfspace).collect::<Result<_>>()?;
    for h in &hs {
        if h.dim() != bx.dim() {
            return Err(Error::DimensionMismatch {
                expected: bx.dim(),
                got: h.dim(),
            });
        }
    }
    bx.clip_all(&hs)
}

impl MapFile {
    pub fn build(&self) -> Result<PiecewiseAffineMap> {
        if self.version != FORMAT_VERSION {
            return Err(Error::InvalidMap(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        let lo = rationals(&self.fundamental_box.lo)?;
        let hi = rationals(&self.fundamental_box.hi)?;
        let bx = Polytope::from_box(&lo, &hi)?;
        if !bx.has_interior() {
            return Err(Error::InvalidMap("box has empty interior".into()));
        }
        let d = bx.dim();
        if self.d_u + self.d_s != d || self.splitting.eu.len() != self.d_u || self.splitting.es.len() != self.d_s {
            return Err(Error::InvalidMap(format!(
                "splitting dimensions d_u={} d_s={} do not fit dimension {d}",
                self.d_u, self.d_s
            )));
        }
        let surds = |vs: &[Vec<String>]| -> Result<Vec<Vec<Surd>>> {
            vs.iter()
                .map(|v| v.iter().map(|x| Surd::parse(x)).collect())
                .collect()
        };
        let splitting = HyperbolicSplitting::new(surds(&self.splitting.eu)?, surds(&self.splitting.es)?)?;
        let mut branches = Vec::with_capacity(self.branches.len());
        for (i, b) in self.branches.iter().enumerate() {
            let rows: Vec<Vec<Rational>> = b.a.iter().map(|r| rationals(r)).collect::<Result<_>>()?;
            if rows.len() != d {
                return Err(Error::InvalidMap(format!("branch {i}: matrix must be {d}x{d}")));
            }
            let a = RatMatrix::from_rows(rows)?;
            let g = match &b.g {
                Some(g) => parse_rational(g)?,
                None => Rational::one(),
            };
            let dom = polytope(&bx, &b.domain)?;
            branches.push(
                AffineBranch::new(a, rationals(&b.b)?, dom, g)
                    .map_err(|e| Error::InvalidMap(format!("branch {i}: {e}")))?,
            );
        }
        let partition = match &self.partition {
            Some(ps) => Some(ps.iter().map(|p| polytope(&bx, p)).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        let name = self.name.clone().unwrap_or_else(|| "file".to_string());
        let mut map = PiecewiseAffineMap::new(name, bx, branches, splitting, self.torus, partition)?;
        for (k, v) in &self.metadata {
            map = map.with_metadata(k, v);
        }
        Ok(map)
    }

    pub fn from_map(map: &PiecewiseAffineMap) -> Self {
        let (lo, hi) = box_bounds(map.fundamental_box()).expect("non-empty box");
        let surds = |vs: &[Vec<Surd>]| -> Vec<Vec<String>> {
            vs.iter().map(|v| v.iter().map(Surd::to_string).collect()).collect()
        };
        let branches = map
            .branches()
            .iter()
            .map(|b| BranchSpec {
                a: b.matrix().rows().iter().map(|r| strings(r)).collect(),
                b: strings(b.translation()),
                domain: b.domain().halfspaces().iter().map(halfspace_spec).collect(),
                g: Some(format_rational(b.weight())),
            })
            .collect();
        let partition = map
            .partition()
            .iter()
            .map(|p| p.halfspaces().iter().map(halfspace_spec).collect())
            .collect();
        MapFile {
            version: FORMAT_VERSION,
            name: Some(map.name().to_string()),
            fundamental_box: BoxSpec {
                lo: strings(&lo),
                hi: strings(&hi),
            },
            d_u: map.splitting().d_u(),
            d_s: map.splitting().d_s(),
            splitting: SplittingSpec {
                eu: surds(map.splitting().eu()),
                es: surds(map.splitting().es()),
            },
            branches,
            torus: map.is_torus(),
            partition: Some(partition),
            metadata: map.metadata().clone(),
        }
    }
}

pub fn from_json(text: &str) -> Result<PiecewiseAffineMap> {
    let file: MapFile = serde_json::from_str(text)?;
    file.build()
}

pub fn to_json(map: &PiecewiseAffineMap) -> String {
    serde_json::to_string_pretty(&MapFile::from_map(map)).expect("map files serialize")
}

pub fn load(path: &Path) -> Result<PiecewiseAffineMap> {
    from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pamap::{builtin, builtin_names, Params};

    #[test]
    fn roundtrip_all_builtins() {
        for name in builtin_names() {
            let map = builtin(name, &Params::new()).unwrap();
            let text = to_json(&map);
            let back = from_json(&text).unwrap();
            assert_eq!(to_json(&back), text, "{name}");
            let (r1, r2) = (map.validate(), back.validate());
            assert_eq!(
                serde_json::to_string(&r1).unwrap(),
                serde_json::to_string(&r2).unwrap()
            );
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let map = builtin("baker", &Params::new()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&to_json(&map)).unwrap();
        v["colour"] = "red".into();
        assert!(from_json(&v.to_string()).is_err());
    }

    #[test]
    fn singular_branch_loads_and_fails_validation() {
        let text = r#"{
          "version": 1,
          "box": {"lo": ["0/1", "0/1"], "hi": ["1/1", "1/1"]},
          "d_u": 1, "d_s": 1,
          "splitting": {"Eu": [["1/1", "0/1"]], "Es": [["0/1", "1/1"]]},
          "branches": [{"A": [["1/1", "0/1"], ["0/1", "0/1"]], "b": ["0", "0"], "domain": []}]
        }"#;
        let map = from_json(text).unwrap();
        let r = map.validate();
        assert!(!r.passed);
        assert!(!r.branches[0].invertible);
        assert!(r.failures()[0].detail.contains("branch 0"));
    }
}
