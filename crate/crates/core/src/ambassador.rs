//! Brand ambassadors: agents who stop recommending and always select the
//! target choice. Selecting a budget of them to maximize the target's choice
//! share is monotone and submodular, so greedy selection is within `1 - 1/e`
//! of optimal.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseLu;
use crate::netmodel::{check_endowment, require_decisive, NetworkModel};

/// Largest number of subsets [`brute_force_select`] will evaluate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Tolerance used to group near-equal objective values as co-optimal.
pub const OPTIMUM_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AmbassadorPlan {
    pub target_choice: String,
    /// Selected agents in the order they were accepted.
    pub selected: Vec<String>,
    pub marginal_gains: Vec<f64>,
    /// Choice share of the target with no ambassadors.
    pub baseline_share: f64,
    pub final_share: f64,
    pub budget: usize,
}

/// Exhaustive optimum over all subsets of size at most `K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalSelection {
    pub value: f64,
    /// Every subset within [`OPTIMUM_TOLERANCE`] of `value`, as agent
    /// indices in increasing order, listed in enumeration order.
    pub optimal_sets: Vec<Vec<usize>>,
    /// Best value among subsets of size exactly `K`.
    pub best_full_size: f64,
}

impl OptimalSelection {
    pub fn best(&self) -> &[usize] {
        &self.optimal_sets[0]
    }
}

/// Looks up agent ids, in the given order.
pub fn resolve_agents(model: &NetworkModel, ids: &[impl AsRef<str>]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| model.agent_index(id.as_ref()))
        .collect()
}

/// `P(B)` and `q(B)`: rows of ambassadors lose all adoption mass and select
/// choice `j` with probability one.
pub fn apply_ambassadors(
    model: &NetworkModel,
    ambassadors: &[usize],
    j: usize,
) -> Result<NetworkModel> {
    let n = model.n_agents();
    let c = model.n_choices();
    if j >= c {
        return Err(Error::UnknownChoice(format!("#{j}")));
    }
    if let Some(&a) = ambassadors.iter().find(|&&a| a >= n) {
        return Err(Error::UnknownAgent(format!("#{a}")));
    }
    let mut unit = vec![0.0; c];
    unit[j] = 1.0;
    Ok(model.with_rows(ambassadors.iter().map(|&a| (a, Vec::new(), unit.clone()))))
}

/// `π_j^w(B)` computed from scratch.
pub fn ambassador_share(
    model: &NetworkModel,
    ambassadors: &[usize],
    j: usize,
    w: &DVector<f64>,
) -> Result<f64> {
    let m = apply_ambassadors(model, ambassadors, j)?;
    let lu = DenseLu::new(m.system_matrix())?;
    let pi = lu.solve(&m.direct().column(j).into_owned());
    Ok(w.dot(&pi))
}

/// `M_B = (I - P(B))^{-1}` together with `π_{·j}(B)` and `w^T M_B` for a
/// fixed target and endowment. Accepting an ambassador updates all three
/// with a rank-one correction.
#[derive(Clone, Debug)]
pub struct GainCache {
    target: usize,
    weights: DVector<f64>,
    selected: Vec<bool>,
    inverse: DMatrix<f64>,
    pi: DVector<f64>,
    weighted: DVector<f64>,
}

impl GainCache {
    /// Factorizes `I - P` with no ambassadors.
    pub fn new(model: &NetworkModel, j: usize, w: &DVector<f64>) -> Result<Self> {
        Self::for_set(model, &[], j, w)
    }

    /// Factorizes `I - P(B)` directly.
    pub fn for_set(
        model: &NetworkModel,
        ambassadors: &[usize],
        j: usize,
        w: &DVector<f64>,
    ) -> Result<Self> {
        check_endowment(model.n_agents(), w)?;
        let m = apply_ambassadors(model, ambassadors, j)?;
        let inverse = DenseLu::new(m.system_matrix())?.inverse();
        let pi = &inverse * m.direct().column(j);
        let weighted = inverse.tr_mul(w);
        let mut selected = vec![false; model.n_agents()];
        for &a in ambassadors {
            selected[a] = true;
        }
        Ok(Self {
            target: j,
            weights: w.clone(),
            selected,
            inverse,
            pi,
            weighted,
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// Current `π_j^w(B)`.
    pub fn share(&self) -> f64 {
        self.weights.dot(&self.pi)
    }

    /// Current `π_{·j}(B)`.
    pub fn choice_probabilities(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn is_selected(&self, a: usize) -> bool {
        self.selected[a]
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..self.selected.len())
            .filter(|&i| self.selected[i])
            .collect()
    }

    fn check(
        &self,
        model: &NetworkModel,
        ambassadors: &[usize],
        j: usize,
        w: &DVector<f64>,
    ) -> Result<()> {
        if self.selected.len() != model.n_agents() {
            return Err(Error::StaleCache(
                "cache built for a different model".into(),
            ));
        }
        if j != self.target {
            return Err(Error::StaleCache(format!(
                "cache targets choice #{}",
                self.target
            )));
        }
        if *w != self.weights {
            return Err(Error::StaleCache(
                "cache built for a different endowment".into(),
            ));
        }
        let mut given = vec![false; model.n_agents()];
        for &a in ambassadors {
            if a >= given.len() {
                return Err(Error::UnknownAgent(format!("#{a}")));
            }
            given[a] = true;
        }
        if given != self.selected {
            return Err(Error::StaleCache(
                "cache built for a different ambassador set".into(),
            ));
        }
        Ok(())
    }

    /// `π_j^w(B ∪ {a}) - π_j^w(B)` without refactorizing.
    fn gain_unchecked(&self, model: &NetworkModel, a: usize) -> f64 {
        let row = model.adoption_row(a);
        let denom = 1.0
            + row
                .iter()
                .map(|&(k, p)| p * self.inverse[(k, a)])
                .sum::<f64>();
        let off_target: f64 = (0..model.n_choices())
            .filter(|&l| l != self.target)
            .map(|l| model.direct()[(a, l)])
            .sum();
        let via_others: f64 = row.iter().map(|&(k, p)| p * (1.0 - self.pi[k])).sum();
        (self.weighted[a] * (off_target + via_others) / denom).max(0.0)
    }

    /// Adds `a` to the ambassador set with a rank-one update of `M_B`.
    pub fn accept(&mut self, model: &NetworkModel, a: usize) -> Result<()> {
        if a >= self.selected.len() {
            return Err(Error::UnknownAgent(format!("#{a}")));
        }
        if self.selected[a] {
            return Err(Error::Domain(format!(
                "agent {} is already an ambassador",
                model.agents()[a]
            )));
        }
        let n = model.n_agents();
        let row = model.adoption_row(a);
        // u^T = p_a^T M_B
        let mut u = DVector::zeros(n);
        for &(k, p) in row {
            u.axpy(p, &self.inverse.row(k).transpose(), 1.0);
        }
        let denom = 1.0 + u[a];
        let col = self.inverse.column(a).into_owned();
        self.inverse -= (&col * u.transpose()) / denom;
        self.weighted -= &u * (self.weighted[a] / denom);
        self.selected[a] = true;

        // Recompute π from the updated inverse and q_j(B ∪ {a}).
        let q: DVector<f64> = DVector::from_fn(n, |i, _| {
            if self.selected[i] {
                1.0
            } else {
                model.direct()[(i, self.target)]
            }
        });
        self.pi = &self.inverse * q;
        Ok(())
    }
}

/// Marginal gain of making `a` an ambassador given the current set `B`.
///
/// Fails if `cache` was not built for `(model, B, j, w)` or if `a ∈ B`.
pub fn marginal_gain(
    model: &NetworkModel,
    ambassadors: &[usize],
    a: usize,
    j: usize,
    w: &DVector<f64>,
    cache: &GainCache,
) -> Result<f64> {
    cache.check(model, ambassadors, j, w)?;
    if a >= model.n_agents() {
        return Err(Error::UnknownAgent(format!("#{a}")));
    }
    if cache.selected[a] {
        return Err(Error::Domain(format!(
            "agent {} is already an ambassador",
            model.agents()[a]
        )));
    }
    Ok(cache.gain_unchecked(model, a))
}

/// Greedy selection of `budget` ambassadors for choice `j`.
///
/// Each step adds the agent with the largest marginal gain; ties go to the
/// agent declared first. With `lazy`, stale gains are kept in a priority
/// queue as upper bounds and only re-evaluated when they reach the top.
pub fn greedy_select(
    model: &NetworkModel,
    j: usize,
    w: &DVector<f64>,
    budget: usize,
    lazy: bool,
) -> Result<AmbassadorPlan> {
    let n = model.n_agents();
    if budget == 0 || budget > n {
        return Err(Error::Domain(format!(
            "budget must be in 1..={n}, got {budget}"
        )));
    }
    require_decisive(model)?;
    let mut cache = GainCache::new(model, j, w)?;
    let baseline_share = cache.share();

    let picks = if lazy {
        lazy_greedy(model, &mut cache, budget)?
    } else {
        plain_greedy(model, &mut cache, budget)?
    };

    let order: Vec<usize> = picks.iter().map(|&(a, _)| a).collect();
    let final_share = ambassador_share(model, &order, j, w)?;
    Ok(AmbassadorPlan {
        target_choice: model.choices()[j].clone(),
        selected: order.iter().map(|&a| model.agents()[a].clone()).collect(),
        marginal_gains: picks.iter().map(|&(_, g)| g).collect(),
        baseline_share,
        final_share,
        budget,
    })
}

fn plain_greedy(
    model: &NetworkModel,
    cache: &mut GainCache,
    budget: usize,
) -> Result<Vec<(usize, f64)>> {
    let mut picks = Vec::with_capacity(budget);
    for _ in 0..budget {
        let gains: Vec<(usize, f64)> = (0..model.n_agents())
            .into_par_iter()
            .filter(|&a| !cache.is_selected(a))
            .map(|a| (a, cache.gain_unchecked(model, a)))
            .collect();
        let mut best = gains[0];
        for &(a, g) in &gains[1..] {
            if g > best.1 {
                best = (a, g);
            }
        }
        cache.accept(model, best.0)?;
        picks.push(best);
    }
    Ok(picks)
}

#[derive(PartialEq)]
struct Candidate {
    gain: f64,
    agent: usize,
    round: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.agent.cmp(&self.agent))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn lazy_greedy(
    model: &NetworkModel,
    cache: &mut GainCache,
    budget: usize,
) -> Result<Vec<(usize, f64)>> {
    let mut heap: BinaryHeap<Candidate> = (0..model.n_agents())
        .map(|a| Candidate {
            gain: cache.gain_unchecked(model, a),
            agent: a,
            round: 0,
        })
        .collect();
    let mut picks = Vec::with_capacity(budget);
    while picks.len() < budget {
        let top = heap
            .pop()
            .expect("budget never exceeds the number of agents");
        let round = picks.len();
        if top.round == round {
            cache.accept(model, top.agent)?;
            picks.push((top.agent, top.gain));
        } else {
            heap.push(Candidate {
                gain: cache.gain_unchecked(model, top.agent),
                agent: top.agent,
                round,
            });
        }
    }
    Ok(picks)
}

/// `Σ_{k=0}^{K} C(n, k)`, saturating.
pub fn subset_count(n: usize, budget: usize) -> u128 {
    let mut total: u128 = 0;
    let mut term: u128 = 1;
    for k in 0..=budget.min(n) {
        total = total.saturating_add(term);
        term = term.saturating_mul((n - k) as u128) / (k as u128 + 1);
    }
    total
}

/// Exhaustive search over every subset of size at most `budget`.
pub fn brute_force_select(
    model: &NetworkModel,
    j: usize,
    w: &DVector<f64>,
    budget: usize,
) -> Result<OptimalSelection> {
    let n = model.n_agents();
    if j >= model.n_choices() {
        return Err(Error::UnknownChoice(format!("#{j}")));
    }
    check_endowment(n, w)?;
    let budget = budget.min(n);
    let count = subset_count(n, budget);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(count));
    }
    require_decisive(model)?;

    let subsets: Vec<Vec<usize>> = (0..=budget).flat_map(|k| (0..n).combinations(k)).collect();
    let values: Vec<f64> = subsets
        .par_iter()
        .map(|s| ambassador_share(model, s, j, w))
        .collect::<Result<_>>()?;

    let value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_full_size = subsets
        .iter()
        .zip(&values)
        .filter(|(s, _)| s.len() == budget)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let optimal_sets = subsets
        .into_iter()
        .zip(values)
        .filter(|(_, v)| *v >= value - OPTIMUM_TOLERANCE)
        .map(|(s, _)| s)
        .collect();
    Ok(OptimalSelection {
        value,
        optimal_sets,
        best_full_size,
    })
}

/// Target choice in models built by [`vertex_cover_instance`].
pub const COVER_TARGET: usize = 0;

/// Ambassador instance whose optimal size-`K` sets are exactly the vertex
/// covers of size `K` of an undirected graph on vertices `0..n`.
///
/// Choices are `alpha` (the target) and `beta`; every vertex selects `beta`
/// with probability 1/2 and adopts each neighbour with probability
/// `1 / (2 deg)`. Vertices without neighbours cannot satisfy the row
/// constraint and are rejected.
pub fn vertex_cover_instance(n: usize, edges: &[(usize, usize)]) -> Result<NetworkModel> {
    let mut adjacent = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::Schema(format!("edge ({u}, {v}) outside 0..{n}")));
        }
        if u == v {
            return Err(Error::Schema(format!("self-loop at vertex {u}")));
        }
        if adjacent[u].contains(&v) {
            return Err(Error::Duplicate(format!("edge ({u}, {v})")));
        }
        adjacent[u].push(v);
        adjacent[v].push(u);
    }
    if let Some(i) = adjacent.iter().position(Vec::is_empty) {
        return Err(Error::Schema(format!("vertex {i} is isolated")));
    }
    let mut triplets = Vec::with_capacity(2 * edges.len());
    for (i, nb) in adjacent.iter().enumerate() {
        let p = 1.0 / (2.0 * nb.len() as f64);
        triplets.extend(nb.iter().map(|&k| (i, k, p)));
    }
    let direct = DMatrix::from_fn(n, 2, |_, l| if l == 1 { 0.5 } else { 0.0 });
    NetworkModel::new(
        (1..=n).map(|i| i.to_string()).collect(),
        vec!["alpha".into(), "beta".into()],
        triplets,
        direct,
        DVector::from_element(n, 1.0),
    )
}

/// Whether `set` touches every edge.
pub fn is_vertex_cover(set: &[usize], edges: &[(usize, usize)]) -> bool {
    edges
        .iter()
        .all(|(u, v)| set.contains(u) || set.contains(v))
}
