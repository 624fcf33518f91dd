use std::collections::VecDeque;

use nalgebra::DVector;
use serde::Serialize;

use super::NetworkModel;
use crate::error::{Error, Result};

const POWER_MAX_ITER: usize = 200;
const POWER_REL_TOL: f64 = 1e-12;

/// Outcome of checking collective decisiveness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub satisfies_assumption1: bool,
    /// Agents with positive direct-selection mass.
    pub decisive_agents: Vec<String>,
    /// Agents with no chain of positive adoption probabilities to a decisive agent.
    pub unreachable_agents: Vec<String>,
    pub spectral_radius_estimate: f64,
    /// `Σ_k p_ik + Σ_j q_ij - 1` per agent.
    pub row_sum_residuals: Vec<f64>,
}

/// Checks that every agent reaches a decisive agent through arcs `i -> k`
/// with `p_ik > 0`, and estimates the spectral radius of P.
pub fn validate(model: &NetworkModel) -> ValidationReport {
    let n = model.n_agents();
    let (decisive, reached) = reachability(model);
    let unreachable_agents: Vec<String> = (0..n)
        .filter(|&i| !reached[i])
        .map(|i| model.agents()[i].clone())
        .collect();
    let alpha = model.adoption_mass();
    let qbar = model.decisiveness();
    let row_sum_residuals = (0..n).map(|i| alpha[i] + qbar[i] - 1.0).collect();

    ValidationReport {
        satisfies_assumption1: !decisive.is_empty() && unreachable_agents.is_empty(),
        decisive_agents: decisive
            .iter()
            .map(|&i| model.agents()[i].clone())
            .collect(),
        unreachable_agents,
        spectral_radius_estimate: spectral_radius(model),
        row_sum_residuals,
    }
}

/// Decisive agents and, per agent, whether it reaches one.
pub(crate) fn reachability(model: &NetworkModel) -> (Vec<usize>, Vec<bool>) {
    let n = model.n_agents();
    let qbar = model.decisiveness();
    let decisive: Vec<usize> = (0..n).filter(|&i| qbar[i] > 0.0).collect();

    // Reverse search: i reaches Q if some k with p_ik > 0 does.
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, k, _) in model.adoption_triplets() {
        incoming[k].push(i);
    }
    let mut reached = vec![false; n];
    let mut queue: VecDeque<usize> = decisive.iter().copied().collect();
    for &i in &decisive {
        reached[i] = true;
    }
    while let Some(k) = queue.pop_front() {
        for &i in &incoming[k] {
            if !reached[i] {
                reached[i] = true;
                queue.push_back(i);
            }
        }
    }
    (decisive, reached)
}

/// Fails with [`Error::AssumptionViolated`] unless collective decisiveness holds.
pub(crate) fn require_decisive(model: &NetworkModel) -> Result<()> {
    let (decisive, reached) = reachability(model);
    if decisive.is_empty() || reached.iter().any(|r| !r) {
        let unreachable = (0..model.n_agents())
            .filter(|&i| !reached[i])
            .map(|i| model.agents()[i].clone())
            .collect();
        return Err(Error::AssumptionViolated { unreachable });
    }
    Ok(())
}

/// Perron root of the non-negative matrix P by power iteration.
///
/// Iterates on `(I + P) / 2`, whose dominant eigenvalue `(1 + ρ) / 2` is
/// strictly dominant even when P is periodic, starting from the all-ones
/// vector. The early-exit test is only armed after `|A| + 1` iterations:
/// before that, chains of fully indecisive agents keep the sup-norm ratio
/// pinned at one.
pub fn spectral_radius(model: &NetworkModel) -> f64 {
    let n = model.n_agents();
    if model.adoption_triplets().next().is_none() {
        return 0.0;
    }
    let min_iter = (n + 1).min(POWER_MAX_ITER);
    let mut x = DVector::from_element(n, 1.0);
    let mut estimate = f64::NAN;
    for it in 0..POWER_MAX_ITER {
        let mut y = x.scale(0.5);
        for (i, k, p) in model.adoption_triplets() {
            y[i] += 0.5 * p * x[k];
        }
        let norm_x = x.amax();
        let norm_y = y.amax();
        let lambda = norm_y / norm_x;
        let rho = (2.0 * lambda - 1.0).clamp(0.0, 1.0);
        let change = (rho - estimate).abs();
        estimate = rho;
        x = y / norm_y;
        if it >= min_iter && change <= POWER_REL_TOL * rho.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    estimate
}
