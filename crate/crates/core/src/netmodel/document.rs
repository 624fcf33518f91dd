use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::NetworkModel;
use crate::error::{Error, Result};

/// On-disk model document (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub agents: Vec<String>,
    pub choices: Vec<String>,
    #[serde(default)]
    pub adoption: Vec<AdoptionEntry>,
    #[serde(default)]
    pub direct: Vec<DirectEntry>,
    /// Missing agents default to an endowment of 1.0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endowment: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pricing: Option<PricingBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdoptionEntry {
    pub from: String,
    pub to: String,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectEntry {
    pub agent: String,
    pub choice: String,
    pub q: f64,
}

/// Parametric extension: firms competing through per-unit discounts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingBlock {
    pub firms: Vec<FirmEntry>,
    #[serde(default)]
    pub sensitivities: Vec<SensitivityEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmEntry {
    /// The choice this firm sells.
    pub choice: String,
    pub margin: f64,
    /// Discount interval `[L, U]`.
    pub bounds: [f64; 2],
}

/// Derivative of one entry of `[P | Q]` with respect to a firm's discount.
/// Exactly one of `choice` (a `q` entry) or `adopt` (a `p` entry) is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityEntry {
    pub firm: String,
    pub agent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adopt: Option<String>,
    pub slope: f64,
}

pub fn parse_document(source: &str) -> Result<ModelDocument> {
    serde_json::from_str(source).map_err(|e| Error::Schema(e.to_string()))
}

/// Parses and validates a model document. A `pricing` block, if present, is
/// ignored here; see [`crate::pricing::ParametricModel::from_document`].
pub fn parse_model(source: &str) -> Result<NetworkModel> {
    NetworkModel::from_document(&parse_document(source)?)
}

/// Canonical JSON form of a model.
pub fn serialize_model(model: &NetworkModel) -> String {
    serde_json::to_string_pretty(&model.to_document()).expect("model documents always serialize")
}

fn lookup(ids: &[String], id: &str) -> Option<usize> {
    ids.iter().position(|a| a == id)
}

impl NetworkModel {
    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let n = doc.agents.len();
        let c = doc.choices.len();
        let agent =
            |id: &str| lookup(&doc.agents, id).ok_or_else(|| Error::UnknownAgent(id.into()));
        let choice =
            |id: &str| lookup(&doc.choices, id).ok_or_else(|| Error::UnknownChoice(id.into()));

        let mut triplets = Vec::with_capacity(doc.adoption.len());
        for e in &doc.adoption {
            triplets.push((agent(&e.from)?, agent(&e.to)?, e.p));
        }

        let mut direct = DMatrix::zeros(n, c);
        let mut seen = vec![false; n * c];
        for e in &doc.direct {
            let (i, j) = (agent(&e.agent)?, choice(&e.choice)?);
            if std::mem::replace(&mut seen[i * c + j], true) {
                return Err(Error::Duplicate(format!(
                    "direct {} -> {}",
                    e.agent, e.choice
                )));
            }
            direct[(i, j)] = e.q;
        }

        let mut endowment = DVector::from_element(n, 1.0);
        if let Some(map) = &doc.endowment {
            for (id, w) in map {
                endowment[agent(id)?] = *w;
            }
        }

        NetworkModel::new(
            doc.agents.clone(),
            doc.choices.clone(),
            triplets,
            direct,
            endowment,
        )
    }

    /// Canonical document: adoption and direct entries in row-major order,
    /// zeros omitted, endowment listed for every agent.
    pub fn to_document(&self) -> ModelDocument {
        let adoption = self
            .adoption_triplets()
            .map(|(i, k, p)| AdoptionEntry {
                from: self.agents[i].clone(),
                to: self.agents[k].clone(),
                p,
            })
            .collect();
        let mut direct = Vec::new();
        for i in 0..self.n_agents() {
            for j in 0..self.n_choices() {
                let q = self.direct[(i, j)];
                if q != 0.0 {
                    direct.push(DirectEntry {
                        agent: self.agents[i].clone(),
                        choice: self.choices[j].clone(),
                        q,
                    });
                }
            }
        }
        let endowment = self
            .agents
            .iter()
            .cloned()
            .zip(self.endowment.iter().copied())
            .collect();
        ModelDocument {
            agents: self.agents.clone(),
            choices: self.choices.clone(),
            adoption,
            direct,
            endowment: Some(endowment),
            pricing: None,
        }
    }
}
