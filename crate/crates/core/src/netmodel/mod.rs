//! The recommendation-network model: agents, choices, adoption probabilities
//! `p_ik`, direct-selection probabilities `q_ij` and endowments `w_i`.
//!
//! Every agent splits its unit of probability between adopting another
//! agent's choice and selecting a choice directly, so each row of `[P | Q]`
//! sums to one. Matrices are indexed by position in the declared agent and
//! choice order; that order is preserved by every downstream output.

mod document;
mod validate;

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use document::{
    parse_document, parse_model, serialize_model, AdoptionEntry, DirectEntry, FirmEntry,
    ModelDocument, PricingBlock, SensitivityEntry,
};
pub(crate) use validate::require_decisive;
pub use validate::{spectral_radius, validate, ValidationReport};

/// Row-sum tolerance for `Σ_k p_ik + Σ_j q_ij = 1`.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

// Deviations below this are floating-point noise and are left untouched so
// that re-parsing a serialized model is the identity.
const RENORMALIZE_FLOOR: f64 = 8.0 * f64::EPSILON;

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    agents: Vec<String>,
    choices: Vec<String>,
    /// Sparse rows of P: `(column, p_ik)` with `p_ik > 0`, sorted by column.
    adoption: Vec<Vec<(usize, f64)>>,
    direct: DMatrix<f64>,
    endowment: DVector<f64>,
}

impl NetworkModel {
    /// Builds a model from adoption triplets `(i, k, p_ik)` and a dense
    /// direct-selection matrix. Rows within [`ROW_SUM_TOLERANCE`] of one are
    /// renormalized by scaling the direct-selection part.
    pub fn new(
        agents: Vec<String>,
        choices: Vec<String>,
        adoption: Vec<(usize, usize, f64)>,
        direct: DMatrix<f64>,
        endowment: DVector<f64>,
    ) -> Result<Self> {
        let n = agents.len();
        let c = choices.len();
        if n == 0 {
            return Err(Error::Schema("at least one agent is required".into()));
        }
        if c == 0 {
            return Err(Error::Schema("at least one choice is required".into()));
        }
        check_unique(&agents, "agent")?;
        check_unique(&choices, "choice")?;
        if direct.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: direct.nrows(),
            });
        }
        if direct.ncols() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                got: direct.ncols(),
            });
        }
        if endowment.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: endowment.len(),
            });
        }

        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, k, p) in adoption {
            if i >= n || k >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: i.max(k) + 1,
                });
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::NegativeEntry {
                    what: format!("adoption {} -> {}", agents[i], agents[k]),
                    value: p,
                });
            }
            if i == k {
                if p != 0.0 {
                    return Err(Error::SelfAdoption(agents[i].clone()));
                }
                continue;
            }
            if rows[i].insert(k, p).is_some() {
                return Err(Error::Duplicate(format!(
                    "adoption {} -> {}",
                    agents[i], agents[k]
                )));
            }
        }
        for i in 0..n {
            for j in 0..c {
                let q = direct[(i, j)];
                if !q.is_finite() || q < 0.0 {
                    return Err(Error::NegativeEntry {
                        what: format!("direct {} -> {}", agents[i], choices[j]),
                        value: q,
                    });
                }
            }
        }
        for (i, w) in endowment.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::NegativeEntry {
                    what: format!("endowment of {}", agents[i]),
                    value: *w,
                });
            }
        }

        let mut direct = direct;
        for i in 0..n {
            let p_sum: f64 = rows[i].values().sum();
            let q_sum: f64 = direct.row(i).sum();
            let total = p_sum + q_sum;
            let dev = (total - 1.0).abs();
            if dev > ROW_SUM_TOLERANCE {
                return Err(Error::RowSum {
                    agent: agents[i].clone(),
                    sum: total,
                });
            }
            if dev > RENORMALIZE_FLOOR && q_sum > 0.0 {
                let scale = (1.0 - p_sum).max(0.0) / q_sum;
                for j in 0..c {
                    direct[(i, j)] *= scale;
                }
            }
        }

        let adoption = rows
            .into_iter()
            .map(|r| r.into_iter().filter(|&(_, p)| p > 0.0).collect())
            .collect();
        Ok(Self {
            agents,
            choices,
            adoption,
            direct,
            endowment,
        })
    }

    /// Builds a model from a dense adoption matrix; zero entries are dropped.
    pub fn from_dense(
        agents: Vec<String>,
        choices: Vec<String>,
        adoption: &DMatrix<f64>,
        direct: DMatrix<f64>,
        endowment: DVector<f64>,
    ) -> Result<Self> {
        let n = agents.len();
        if adoption.nrows() != n || adoption.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: adoption.nrows().max(adoption.ncols()),
            });
        }
        let mut triplets = Vec::new();
        for i in 0..n {
            for k in 0..n {
                let p = adoption[(i, k)];
                if p != 0.0 {
                    triplets.push((i, k, p));
                }
            }
        }
        Self::new(agents, choices, triplets, direct, endowment)
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn choices(&self) -> &[String] {
        &self.choices
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_choices(&self) -> usize {
        self.choices.len()
    }

    pub fn agent_index(&self, id: &str) -> Result<usize> {
        self.agents
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::UnknownAgent(id.to_string()))
    }

    pub fn choice_index(&self, id: &str) -> Result<usize> {
        self.choices
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| Error::UnknownChoice(id.to_string()))
    }

    /// Non-zero entries of row `i` of P, sorted by column.
    pub fn adoption_row(&self, i: usize) -> &[(usize, f64)] {
        &self.adoption[i]
    }

    /// All non-zero `(i, k, p_ik)` in row-major order.
    pub fn adoption_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adoption
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(k, p)| (i, k, p)))
    }

    pub fn adoption_dense(&self) -> DMatrix<f64> {
        let n = self.n_agents();
        let mut p = DMatrix::zeros(n, n);
        for (i, k, v) in self.adoption_triplets() {
            p[(i, k)] = v;
        }
        p
    }

    /// `I - P`.
    pub fn system_matrix(&self) -> DMatrix<f64> {
        let n = self.n_agents();
        let mut m = DMatrix::identity(n, n);
        for (i, k, v) in self.adoption_triplets() {
            m[(i, k)] -= v;
        }
        m
    }

    pub fn direct(&self) -> &DMatrix<f64> {
        &self.direct
    }

    pub fn endowment(&self) -> &DVector<f64> {
        &self.endowment
    }

    /// Decisiveness `q̄_i = Σ_j q_ij`.
    pub fn decisiveness(&self) -> DVector<f64> {
        DVector::from_fn(self.n_agents(), |i, _| self.direct.row(i).sum())
    }

    /// Total adoption mass `α_i = Σ_k p_ik`.
    pub fn adoption_mass(&self) -> DVector<f64> {
        DVector::from_fn(self.n_agents(), |i, _| {
            self.adoption[i].iter().map(|&(_, p)| p).sum()
        })
    }

    pub fn with_endowment(&self, endowment: DVector<f64>) -> Result<Self> {
        check_endowment(self.n_agents(), &endowment)?;
        Ok(Self {
            endowment,
            ..self.clone()
        })
    }

    /// Replaces whole rows of `[P | Q]`. Rows are given as sparse adoption
    /// entries plus a dense direct-selection row.
    pub(crate) fn with_rows(
        &self,
        rows: impl IntoIterator<Item = (usize, Vec<(usize, f64)>, Vec<f64>)>,
    ) -> Self {
        let mut out = self.clone();
        for (i, adoption, direct) in rows {
            out.adoption[i] = adoption;
            for (j, q) in direct.into_iter().enumerate() {
                out.direct[(i, j)] = q;
            }
        }
        out
    }
}

pub(crate) fn check_endowment(n: usize, w: &DVector<f64>) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.len(),
        });
    }
    if let Some(v) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::NegativeEntry {
            what: "endowment".into(),
            value: *v,
        });
    }
    Ok(())
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashMap::with_capacity(ids.len());
    for id in ids {
        if seen.insert(id.as_str(), ()).is_some() {
            return Err(Error::Duplicate(format!("{what} id {id:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn row_sum_off_by_a_tenth_is_rejected() {
        let q = DMatrix::from_row_slice(1, 2, &[0.5, 0.4]);
        let err = NetworkModel::new(
            ids("a", 1),
            ids("c", 2),
            vec![],
            q,
            DVector::from_element(1, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::RowSum { .. }));
    }

    #[test]
    fn rows_within_tolerance_are_renormalized() {
        let q = DMatrix::from_row_slice(1, 2, &[0.5, 0.5 + 5e-10]);
        let m = NetworkModel::new(
            ids("a", 1),
            ids("c", 2),
            vec![],
            q,
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!((m.direct().row(0).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn self_adoption_and_duplicates() {
        let q = DMatrix::from_row_slice(2, 1, &[0.5, 1.0]);
        let w = DVector::from_element(2, 1.0);
        let err = NetworkModel::new(
            ids("a", 2),
            ids("c", 1),
            vec![(0, 0, 0.5)],
            q.clone(),
            w.clone(),
        )
        .unwrap_err();
        assert_eq!(err, Error::SelfAdoption("a1".into()));
        let err = NetworkModel::new(
            ids("a", 2),
            ids("c", 1),
            vec![(0, 1, 0.25), (0, 1, 0.25)],
            q.clone(),
            w.clone(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Duplicate(_)));
        let ok = NetworkModel::new(ids("a", 2), ids("c", 1), vec![(0, 1, 0.5)], q, w).unwrap();
        assert_eq!(ok.adoption_row(0), &[(1, 0.5)]);
    }

    #[test]
    fn negative_entries_are_rejected() {
        let q = DMatrix::from_row_slice(1, 2, &[1.5, -0.5]);
        let err = NetworkModel::new(
            ids("a", 1),
            ids("c", 2),
            vec![],
            q,
            DVector::from_element(1, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { .. }));
    }
}
