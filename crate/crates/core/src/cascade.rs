//! Monte Carlo samplers for the model's probabilistic semantics.
//!
//! The random-walk sampler follows one agent's chain of adoptions until it
//! is absorbed by a direct selection; its frequencies are unbiased for
//! `π_ij`. The joint sampler draws one action for every agent at once and
//! resolves adoption pointers, rejecting realizations with pointer cycles.
//!
//! Randomness comes from one seed split into ChaCha substreams, one per agent
//! (walks) or per realization (joint outcomes), so results do not depend on
//! the number of worker threads.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::choice::{solve_choice_matrix, Solver};
use crate::error::{Error, Result};
use crate::netmodel::{require_decisive, NetworkModel};

/// Walks longer than this signal a model at the edge of collective decisiveness.
pub const MAX_WALK_STEPS: u64 = 10_000_000;

/// One agent's draw from its `|A| + |C| - 1` categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Action {
    Select(usize),
    Adopt(usize),
}

/// Cumulative action tables, one per agent.
#[derive(Clone, Debug)]
pub struct ActionTables {
    rows: Vec<Vec<(f64, Action)>>,
}

impl ActionTables {
    pub fn new(model: &NetworkModel) -> Self {
        let rows = (0..model.n_agents())
            .map(|i| {
                let mut acc = 0.0;
                let mut row = Vec::new();
                for j in 0..model.n_choices() {
                    let q = model.direct()[(i, j)];
                    if q > 0.0 {
                        acc += q;
                        row.push((acc, Action::Select(j)));
                    }
                }
                for &(k, p) in model.adoption_row(i) {
                    acc += p;
                    row.push((acc, Action::Adopt(k)));
                }
                row
            })
            .collect();
        Self { rows }
    }

    /// Draws agent `i`'s action. Rows are scaled by their actual total so
    /// rounding in `Σ = 1` cannot bias the last category.
    pub fn draw<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Action {
        let row = &self.rows[i];
        let total = row.last().map_or(0.0, |e| e.0);
        let u = rng.random::<f64>() * total;
        let pos = row.partition_point(|e| e.0 <= u).min(row.len() - 1);
        row[pos].1
    }
}

/// Seeded substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Follows agent `i`'s adoption chain until a direct selection.
pub fn sample_walk_choice<R: Rng + ?Sized>(
    tables: &ActionTables,
    i: usize,
    rng: &mut R,
) -> Result<usize> {
    let mut at = i;
    for _ in 0..MAX_WALK_STEPS {
        match tables.draw(at, rng) {
            Action::Select(j) => return Ok(j),
            Action::Adopt(k) => at = k,
        }
    }
    Err(Error::WalkTooLong(MAX_WALK_STEPS))
}

/// Random-walk estimate of `π` with per-cell standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkEstimate {
    pub pi: DMatrix<f64>,
    /// `sqrt(p̂ (1 - p̂) / n)`.
    pub standard_error: DMatrix<f64>,
    pub samples: usize,
}

/// `samples` independent walks from every agent; agent `i` uses substream `i`.
pub fn estimate_choice_probs_mc(
    model: &NetworkModel,
    samples: usize,
    seed: u64,
) -> Result<WalkEstimate> {
    if samples == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    require_decisive(model)?;
    let tables = ActionTables::new(model);
    let c = model.n_choices();
    let counts: Vec<Vec<u64>> = (0..model.n_agents())
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let mut row = vec![0u64; c];
            for _ in 0..samples {
                row[sample_walk_choice(&tables, i, &mut rng)?] += 1;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let n = samples as f64;
    let pi = DMatrix::from_fn(model.n_agents(), c, |i, j| counts[i][j] as f64 / n);
    let standard_error = pi.map(|p| (p * (1.0 - p) / n).sqrt());
    Ok(WalkEstimate {
        pi,
        standard_error,
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    /// Some adoption pointers form a cycle that never reaches a selection.
    UnresolvedCycle,
    /// Under the non-activation rule: no agent picked `u` directly, yet
    /// some agent was never activated.
    URule,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointOutcome {
    /// Resolved choice per agent; `None` only in rejected outcomes.
    pub choices: Vec<Option<usize>>,
    pub rejected: bool,
    pub rejection_reason: Option<RejectionReason>,
}

#[derive(Clone, Copy, PartialEq)]
enum Mark {
    Open,
    Visiting,
    Done(Resolution),
}

#[derive(Clone, Copy, PartialEq)]
enum Resolution {
    Chosen(usize),
    /// Ends at an agent who picked `u`, or in a cycle.
    Unactivated,
}

/// Resolves one joint action profile.
///
/// Without `u`, any pointer cycle rejects the outcome. With `u`, choice `u`
/// stands for non-activation: agents who pick it directly do not pass it on,
/// and agents whose chain ends at such an agent or in a cycle stay
/// unactivated. The outcome is kept, with unactivated agents assigned `u`,
/// only if some agent picked `u` directly.
pub fn resolve_actions(actions: &[Action], u: Option<usize>) -> JointOutcome {
    let n = actions.len();
    let mut mark = vec![Mark::Open; n];
    let mut path = Vec::new();
    for start in 0..n {
        let mut at = start;
        let end = loop {
            match mark[at] {
                Mark::Done(r) => break r,
                Mark::Visiting => break Resolution::Unactivated,
                Mark::Open => {}
            }
            match actions[at] {
                Action::Select(j) if Some(j) == u => {
                    path.push(at);
                    break Resolution::Unactivated;
                }
                Action::Select(j) => {
                    path.push(at);
                    break Resolution::Chosen(j);
                }
                Action::Adopt(k) => {
                    mark[at] = Mark::Visiting;
                    path.push(at);
                    at = k;
                }
            }
        };
        for a in path.drain(..) {
            mark[a] = Mark::Done(end);
        }
    }

    let resolved: Vec<Resolution> = mark
        .into_iter()
        .map(|m| match m {
            Mark::Done(r) => r,
            _ => unreachable!("every agent is resolved"),
        })
        .collect();
    let any_unactivated = resolved.contains(&Resolution::Unactivated);
    let picked_u = u.is_some_and(|u| actions.contains(&Action::Select(u)));

    let reason = match (any_unactivated, u.is_some(), picked_u) {
        (false, _, _) | (true, true, true) => None,
        (true, false, _) => Some(RejectionReason::UnresolvedCycle),
        (true, true, false) => Some(RejectionReason::URule),
    };
    let choices = match reason {
        Some(_) => resolved
            .iter()
            .map(|r| match r {
                Resolution::Chosen(j) => Some(*j),
                Resolution::Unactivated => None,
            })
            .collect(),
        None => resolved
            .iter()
            .map(|r| match r {
                Resolution::Chosen(j) => Some(*j),
                Resolution::Unactivated => u,
            })
            .collect(),
    };
    JointOutcome {
        choices,
        rejected: reason.is_some(),
        rejection_reason: reason,
    }
}

/// Draws every agent's action independently and resolves the profile.
pub fn sample_joint_outcome<R: Rng + ?Sized>(
    tables: &ActionTables,
    rng: &mut R,
    u: Option<usize>,
) -> JointOutcome {
    let actions: Vec<Action> = (0..tables.rows.len())
        .map(|i| tables.draw(i, rng))
        .collect();
    resolve_actions(&actions, u)
}

/// Probability that agent `i`, having not selected directly, adopts
/// `attempter` given that the agents in `failed` already failed to activate
/// it: `p_{i,attempter} / Σ_{k ∉ failed} p_ik`.
pub fn activation_probability(
    model: &NetworkModel,
    i: usize,
    attempter: usize,
    failed: &[usize],
) -> Result<f64> {
    let n = model.n_agents();
    if i >= n || attempter >= n {
        return Err(Error::UnknownAgent(format!("#{}", i.max(attempter))));
    }
    if failed.contains(&attempter) {
        return Err(Error::Domain("attempter has already failed".into()));
    }
    let row = model.adoption_row(i);
    let remaining: f64 = row
        .iter()
        .filter(|(k, _)| !failed.contains(k))
        .map(|&(_, p)| p)
        .sum();
    let p = row
        .iter()
        .find(|(k, _)| *k == attempter)
        .map_or(0.0, |&(_, p)| p);
    if remaining == 0.0 {
        return Ok(0.0);
    }
    Ok(p / remaining)
}

/// Statistics of the joint sampler; accepted-outcome marginals are
/// compared with the closed form for reporting only.
#[derive(Clone, Debug, PartialEq)]
pub struct JointReport {
    pub samples: usize,
    pub accepted: usize,
    pub rejected_cycle: usize,
    pub rejected_u_rule: usize,
    /// Frequency of each choice per agent among accepted outcomes.
    pub marginals: DMatrix<f64>,
    pub closed_form: DMatrix<f64>,
    /// `max |marginal - π|`; NaN when nothing was accepted.
    pub max_discrepancy: f64,
}

impl JointReport {
    pub fn rejection_rate(&self) -> f64 {
        1.0 - self.accepted as f64 / self.samples as f64
    }
}

fn joint_outcomes(
    model: &NetworkModel,
    samples: usize,
    seed: u64,
    u: Option<usize>,
) -> Result<Vec<JointOutcome>> {
    if samples == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    if let Some(u) = u {
        if u >= model.n_choices() {
            return Err(Error::UnknownChoice(format!("#{u}")));
        }
    }
    require_decisive(model)?;
    let tables = ActionTables::new(model);
    Ok((0..samples as u64)
        .into_par_iter()
        .map(|r| sample_joint_outcome(&tables, &mut substream(seed, r), u))
        .collect())
}

/// Runs the joint sampler `samples` times; realization `r` uses substream `r`.
pub fn joint_report(
    model: &NetworkModel,
    samples: usize,
    seed: u64,
    u: Option<usize>,
) -> Result<JointReport> {
    let outcomes = joint_outcomes(model, samples, seed, u)?;
    let (n, c) = (model.n_agents(), model.n_choices());
    let mut counts = DMatrix::<f64>::zeros(n, c);
    let (mut accepted, mut cycle, mut urule) = (0, 0, 0);
    for o in &outcomes {
        match o.rejection_reason {
            Some(RejectionReason::UnresolvedCycle) => cycle += 1,
            Some(RejectionReason::URule) => urule += 1,
            None => {
                accepted += 1;
                for (i, ch) in o.choices.iter().enumerate() {
                    counts[(i, ch.expect("accepted outcomes are complete"))] += 1.0;
                }
            }
        }
    }
    let marginals = counts / accepted.max(1) as f64;
    let closed_form = solve_choice_matrix(model, Solver::Dense)?.pi;
    let max_discrepancy = if accepted == 0 {
        f64::NAN
    } else {
        (&marginals - &closed_form).amax()
    };
    Ok(JointReport {
        samples,
        accepted,
        rejected_cycle: cycle,
        rejected_u_rule: urule,
        marginals,
        closed_form,
        max_discrepancy,
    })
}

/// Empirical `E[X X^T]` over accepted joint outcomes of a two-choice model,
/// with the first choice encoded as `+1` and the second as `-1`.
pub fn joint_second_moment(
    model: &NetworkModel,
    samples: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if model.n_choices() != 2 {
        return Err(Error::Domain(format!(
            "second moment needs exactly two choices, got {}",
            model.n_choices()
        )));
    }
    let outcomes = joint_outcomes(model, samples, seed, None)?;
    let n = model.n_agents();
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut accepted = 0usize;
    for o in outcomes.iter().filter(|o| !o.rejected) {
        let x: Vec<f64> = o
            .choices
            .iter()
            .map(|c| if *c == Some(0) { 1.0 } else { -1.0 })
            .collect();
        for i in 0..n {
            for k in 0..n {
                sum[(i, k)] += x[i] * x[k];
            }
        }
        accepted += 1;
    }
    if accepted == 0 {
        return Err(Error::NotConverged {
            iterations: samples,
            residual: f64::NAN,
        });
    }
    Ok(sum / accepted as f64)
}
