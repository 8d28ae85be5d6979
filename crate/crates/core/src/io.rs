//! JSON spec and joint-fragment formats.
//!
//! A spec document holds `nx`, `ny`, the support pairs and both dense kernels
//! (`kernel_y_given_x` is `nx × ny`, `kernel_x_given_y` is `ny × nx`). The writer
//! adds the derived `es` and `burn_in`; when present on input they are
//! recomputed and compared. Numbers may be JSON numbers or decimal strings.

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::dynamics::AlternatingChainSpec;
use crate::error::{Error, Result};
use crate::instances::PottsSpec;
use crate::measures::{ConditionalKernel, Direction, JointMeasure, SupportSet};
use crate::scalar::Real;

/// Tolerance when comparing a stored `es` with the recomputed one.
pub const STORED_ES_TOL: f64 = 1e-9;

/// A real read from either a JSON number or a decimal string.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Number(pub f64);

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Float(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Float(v) => Ok(Number(v)),
            Raw::Text(s) => s
                .trim()
                .parse::<f64>()
                .map(Number)
                .map_err(|_| de::Error::custom(format!("not a decimal number: {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
    /// `edge_subsets[y]` is the edge bitmask labelling `Y` state `y`.
    pub edge_subsets: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub nx: usize,
    pub ny: usize,
    pub support: Vec<(usize, usize)>,
    pub kernel_y_given_x: Vec<Vec<Number>>,
    pub kernel_x_given_y: Vec<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub es: Option<Vec<(usize, usize, Number)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

fn to_numbers<T: Real>(rows: Vec<Vec<T>>) -> Vec<Vec<Number>> {
    rows.into_iter()
        .map(|r| r.into_iter().map(|v| Number(v.as_f64())).collect())
        .collect()
}

fn from_numbers<T: Real>(rows: &[Vec<Number>]) -> Vec<Vec<T>> {
    rows.iter()
        .map(|r| r.iter().map(|v| T::lit(v.0)).collect())
        .collect()
}

impl SpecDocument {
    pub fn from_spec<T: Real>(spec: &AlternatingChainSpec<T>) -> Self {
        Self {
            nx: spec.nx(),
            ny: spec.ny(),
            support: spec.support().pairs().collect(),
            kernel_y_given_x: to_numbers(spec.kernel_y_given_x().rows()),
            kernel_x_given_y: to_numbers(spec.kernel_x_given_y().rows()),
            es: Some(
                spec.es()
                    .iter()
                    .map(|(x, y, w)| (x, y, Number(w.as_f64())))
                    .collect(),
            ),
            burn_in: Some(spec.burn_in()),
            graph: None,
            q: None,
            beta: None,
        }
    }

    pub fn from_potts<T: Real>(potts: &PottsSpec<T>) -> Self {
        let inst = &potts.instance;
        Self {
            graph: Some(GraphDocument {
                vertices: inst.vertices,
                edges: inst.edges.clone(),
                edge_subsets: potts.edge_subsets.clone(),
            }),
            q: Some(inst.q),
            beta: Some(inst.beta),
            ..Self::from_spec(&potts.spec)
        }
    }

    /// Rebuilds and validates the spec, then checks any stored derived fields.
    pub fn to_spec<T: Real>(&self) -> Result<AlternatingChainSpec<T>> {
        let support = SupportSet::from_pairs(self.nx, self.ny, &self.support)?;
        let k1 = ConditionalKernel::new(
            Direction::YGivenX,
            support.clone(),
            from_numbers(&self.kernel_y_given_x),
        )?;
        let k2 = ConditionalKernel::new(
            Direction::XGivenY,
            support.clone(),
            from_numbers(&self.kernel_x_given_y),
        )?;
        let spec = AlternatingChainSpec::new(k1, k2)?;
        if let Some(stored) = &self.es {
            let mut dense = vec![T::zero(); self.nx * self.ny];
            for &(x, y, w) in stored {
                if x >= self.nx || y >= self.ny {
                    return Err(Error::Parse(format!("es entry ({x}, {y}) out of range")));
                }
                dense[x * self.ny + y] = T::lit(w.0);
            }
            let gap = spec
                .es()
                .weights()
                .iter()
                .zip(&dense)
                .fold(0.0f64, |m, (&a, &b): (&T, &T)| {
                    m.max((a - b).abs().as_f64())
                });
            if !(gap <= STORED_ES_TOL) {
                return Err(Error::InvalidMeasure(format!(
                    "stored es differs from the recomputed one by {gap:e}"
                )));
            }
        }
        if let Some(stored) = self.burn_in {
            if stored != spec.burn_in() {
                return Err(Error::InvalidMeasure(format!(
                    "stored burn_in {stored} differs from the recomputed {}",
                    spec.burn_in()
                )));
            }
        }
        Ok(spec)
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_spec_json<T: Real>(spec: &AlternatingChainSpec<T>) -> String {
    to_pretty(&SpecDocument::from_spec(spec))
}

pub fn write_potts_json<T: Real>(potts: &PottsSpec<T>) -> String {
    to_pretty(&SpecDocument::from_potts(potts))
}

fn to_pretty<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document serializes");
    s.push('\n');
    s
}

pub fn parse_spec_document(text: &str) -> Result<SpecDocument> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_spec_json<T: Real>(text: &str) -> Result<AlternatingChainSpec<T>> {
    parse_spec_document(text)?.to_spec()
}

/// A joint measure given by its support and weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDocument {
    pub nx: usize,
    pub ny: usize,
    /// Declared support; the pairs of `joint` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<(usize, usize)>>,
    pub joint: Vec<(usize, usize, Number)>,
}

pub fn read_joint_json<T: Real>(text: &str) -> Result<JointMeasure<T>> {
    let doc: JointDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let pairs: Vec<(usize, usize)> = match &doc.support {
        Some(declared) => declared.clone(),
        None => doc.joint.iter().map(|&(x, y, _)| (x, y)).collect(),
    };
    let support = SupportSet::from_pairs(doc.nx, doc.ny, &pairs)?;
    let mut weights = vec![T::zero(); doc.nx * doc.ny];
    for &(x, y, w) in &doc.joint {
        if x >= doc.nx || y >= doc.ny {
            return Err(Error::Parse(format!("joint entry ({x}, {y}) out of range")));
        }
        weights[x * doc.ny + y] = T::lit(w.0);
    }
    JointMeasure::probability(support, weights)
}

pub fn write_joint_json<T: Real>(pi: &JointMeasure<T>) -> String {
    to_pretty(&JointDocument {
        nx: pi.nx(),
        ny: pi.ny(),
        support: Some(pi.support().pairs().collect()),
        joint: pi
            .iter()
            .map(|(x, y, w)| (x, y, Number(w.as_f64())))
            .collect(),
    })
}
