//! JSON documents read and written by the CLI.
//!
//! Complex entries are `[re, im]` pairs and site labels are exact rationals
//! written `"p/q"` (or `"p"` for integers).

use std::str::FromStr;

use pfpp_core::covariance::{validate_covariance, CovarianceOperator, GroundSet};
use pfpp_core::skewalg::PfaffianKernel;
use pfpp_core::{CMatrix, CVector, Label, C64};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

/// Operator document. Either the four `S` blocks or the four `K` blocks
/// must be present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OperatorDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<String>>,
    #[serde(rename = "S11", default, skip_serializing_if = "Option::is_none")]
    pub s11: Option<JsonMatrix>,
    #[serde(rename = "S12", default, skip_serializing_if = "Option::is_none")]
    pub s12: Option<JsonMatrix>,
    #[serde(rename = "S21", default, skip_serializing_if = "Option::is_none")]
    pub s21: Option<JsonMatrix>,
    #[serde(rename = "S22", default, skip_serializing_if = "Option::is_none")]
    pub s22: Option<JsonMatrix>,
    #[serde(rename = "K11", default, skip_serializing_if = "Option::is_none")]
    pub k11: Option<JsonMatrix>,
    #[serde(rename = "K12", default, skip_serializing_if = "Option::is_none")]
    pub k12: Option<JsonMatrix>,
    #[serde(rename = "K21", default, skip_serializing_if = "Option::is_none")]
    pub k21: Option<JsonMatrix>,
    #[serde(rename = "K22", default, skip_serializing_if = "Option::is_none")]
    pub k22: Option<JsonMatrix>,
}

/// A parsed operator input.
pub enum Operator {
    Covariance(CovarianceOperator),
    Kernel(PfaffianKernel),
}

pub struct Loaded {
    pub ground: GroundSet,
    pub operator: Operator,
}

impl Loaded {
    pub fn kernel(&self) -> PfaffianKernel {
        match &self.operator {
            Operator::Covariance(s) => pfpp_core::covariance::kernel_from_covariance(s),
            Operator::Kernel(k) => k.clone(),
        }
    }

    pub fn covariance(&self) -> Result<&CovarianceOperator, CliError> {
        match &self.operator {
            Operator::Covariance(s) => Ok(s),
            Operator::Kernel(_) => Err(CliError::Usage(
                "this command needs a covariance document (S11..S22), not a kernel".into(),
            )),
        }
    }

    /// Site indices for a list of labels.
    pub fn indices(&self, labels: &[String]) -> Result<Vec<usize>, CliError> {
        labels
            .iter()
            .map(|s| {
                let l = parse_label(s)?;
                self.ground
                    .index_of(l)
                    .ok_or_else(|| CliError::Usage(format!("site {s} is not in the ground set")))
            })
            .collect()
    }
}

pub fn parse_label(s: &str) -> Result<Label, CliError> {
    Label::from_str(s.trim()).map_err(|_| CliError::Usage(format!("bad site label {s:?}")))
}

pub fn format_label(l: &Label) -> String {
    if *l.denom() == 1 {
        l.numer().to_string()
    } else {
        format!("{}/{}", l.numer(), l.denom())
    }
}

pub fn labels(ground: &GroundSet) -> Vec<String> {
    ground.labels().iter().map(format_label).collect()
}

fn block(m: &JsonMatrix, n: usize, name: &str) -> Result<CMatrix, CliError> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(CliError::Json(format!("{name} must be {n}x{n}")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        C64::new(m[i][j][0], m[i][j][1])
    }))
}

fn to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

pub fn parse_vector(v: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|z| C64::new(z[0], z[1])))
}

fn ground_for(sites: &Option<Vec<String>>, n: usize) -> Result<GroundSet, CliError> {
    match sites {
        None => Ok(GroundSet::integers(n)),
        Some(s) => {
            if s.len() != n {
                return Err(CliError::Json(format!(
                    "sites has {} labels, blocks are {n}x{n}",
                    s.len()
                )));
            }
            let labels = s
                .iter()
                .map(|x| parse_label(x))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(GroundSet::new(labels)?)
        }
    }
}

pub fn parse_json(text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Json(e.to_string()))
}

pub fn from_value<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Json(e.to_string()))
}

impl OperatorDoc {
    pub fn is_operator(v: &Value) -> bool {
        ["S11", "K11"].iter().any(|k| v.get(k).is_some())
    }

    pub fn load(self) -> Result<Loaded, CliError> {
        let s = [&self.s11, &self.s12, &self.s21, &self.s22];
        let k = [&self.k11, &self.k12, &self.k21, &self.k22];
        let has_s = s.iter().any(|b| b.is_some());
        let has_k = k.iter().any(|b| b.is_some());
        let (blocks, prefix) = match (has_s, has_k) {
            (true, false) => (s, "S"),
            (false, true) => (k, "K"),
            (true, true) => return Err(CliError::Json("document has both S and K blocks".into())),
            (false, false) => {
                return Err(CliError::Json("document has neither S nor K blocks".into()))
            }
        };
        let names = ["11", "12", "21", "22"];
        let mut mats = Vec::new();
        let n = blocks[0].as_ref().map(|b| b.len()).unwrap_or(0);
        for (b, name) in blocks.iter().zip(names) {
            let b = b
                .as_ref()
                .ok_or_else(|| CliError::Json(format!("missing block {prefix}{name}")))?;
            mats.push(block(b, n, &format!("{prefix}{name}"))?);
        }
        let ground = ground_for(&self.sites, n)?;
        let operator = if prefix == "S" {
            let mut m = CMatrix::zeros(2 * n, 2 * n);
            m.view_mut((0, 0), (n, n)).copy_from(&mats[0]);
            m.view_mut((0, n), (n, n)).copy_from(&mats[1]);
            m.view_mut((n, 0), (n, n)).copy_from(&mats[2]);
            m.view_mut((n, n), (n, n)).copy_from(&mats[3]);
            Operator::Covariance(validate_covariance(&m)?)
        } else {
            let mats = &mats;
            let k = PfaffianKernel::from_blocks(n, |x, y| {
                [
                    [mats[0][(x, y)], mats[1][(x, y)]],
                    [mats[2][(x, y)], mats[3][(x, y)]],
                ]
            })?;
            Operator::Kernel(k)
        };
        Ok(Loaded { ground, operator })
    }

    pub fn from_covariance(ground: &GroundSet, s: &CovarianceOperator) -> Self {
        Self {
            sites: Some(labels(ground)),
            s11: Some(to_json(&s.s11())),
            s12: Some(to_json(&s.s12())),
            s21: Some(to_json(&s.s21())),
            s22: Some(to_json(&s.s22())),
            ..Self::default()
        }
    }

    pub fn from_kernel(ground: &GroundSet, k: &PfaffianKernel) -> Self {
        let n = k.sites();
        let get = |f: &dyn Fn(usize, usize) -> C64| to_json(&CMatrix::from_fn(n, n, f));
        Self {
            sites: Some(labels(ground)),
            k11: Some(get(&|x, y| k.k11(x, y))),
            k12: Some(get(&|x, y| k.k12(x, y))),
            k21: Some(get(&|x, y| k.k21(x, y))),
            k22: Some(get(&|x, y| k.k22(x, y))),
            ..Self::default()
        }
    }
}

/// `beta` may be a number or one of `"inf"`, `"+inf"`, `"-inf"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Beta {
    Finite(f64),
    Named(String),
}

impl Beta {
    pub fn value(&self) -> Result<f64, CliError> {
        match self {
            Beta::Finite(b) => Ok(*b),
            Beta::Named(s) => match s.as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                _ => Err(CliError::Json(format!(
                    "beta must be a number or \"inf\"/\"-inf\", got {s:?}"
                ))),
            },
        }
    }
}

/// KMS family: one `upsilon` and one `delta` per site of a mirror-symmetric
/// half-integer window.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmsDoc {
    #[serde(default)]
    pub sites: Option<Vec<String>>,
    #[serde(default)]
    pub window: Option<usize>,
    pub upsilon: Vec<f64>,
    pub delta: Vec<[f64; 2]>,
    pub beta: Beta,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VandermondeDoc {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub n: usize,
}

/// Orthogonal-polynomial ensemble: explicit vectors over the sites, or a
/// discrete weight from which `p_k(x) = x^k` vectors are built.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpeDoc {
    #[serde(default)]
    pub sites: Option<Vec<String>>,
    #[serde(default)]
    pub vectors: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub vandermonde: Option<VandermondeDoc>,
}

impl OpeDoc {
    pub fn is_ope(v: &Value) -> bool {
        v.get("vectors").is_some() || v.get("vandermonde").is_some()
    }

    pub fn vectors(&self) -> Result<(GroundSet, Vec<CVector>), CliError> {
        let vecs = match (&self.vectors, &self.vandermonde) {
            (Some(v), None) => v.iter().map(|x| parse_vector(x)).collect::<Vec<_>>(),
            (None, Some(d)) => pfpp_core::models::vandermonde_vectors(&d.points, &d.weights, d.n)?,
            _ => {
                return Err(CliError::Json(
                    "give exactly one of \"vectors\" or \"vandermonde\"".into(),
                ))
            }
        };
        let n = vecs.first().map(|v| v.len()).unwrap_or(0);
        if vecs.iter().any(|v| v.len() != n) {
            return Err(CliError::Json("vectors have different lengths".into()));
        }
        Ok((ground_for(&self.sites, n)?, vecs))
    }
}

/// Schur specialization `(alpha, beta)`; shifted Schur reads `alpha` only.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchurDoc {
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
}

impl SchurDoc {
    pub fn is_schur(v: &Value) -> bool {
        v.get("alpha").is_some() || v.get("beta").is_some()
    }
}
