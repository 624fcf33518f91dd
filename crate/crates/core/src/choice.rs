//! Closed-form choice probabilities `π = (I - P)^{-1} Q`, choice shares,
//! centrality, decision shares and the mixture form for general choice sets.
//!
//! `π_ij` is the probability that agent `i` ends up with choice `j` once
//! chains of adoption are followed to an agent that selects directly. With
//! an endowment `w`, the choice share of `j` is `w^T (I - P)^{-1} q^(j)` and
//! the centrality vector is `c^w = w^T (I - P)^{-1}`; an agent's decision
//! share `δ_i = c_i q̄_i` is the endowment whose final selection it makes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::DenseLu;
use crate::netmodel::{check_endowment, require_decisive, NetworkModel};

/// Relative residual at which Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 1_000_000;

/// Solutions with `max_i (1 - q̄_i)` above this are flagged.
pub const ILL_CONDITIONED_THRESHOLD: f64 = 0.999;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Solver {
    /// One LU factorization of `I - P`, reused for every right-hand side.
    #[default]
    Dense,
    /// Jacobi sweeps `x <- b + P x` (the diagonal of `I - P` is one).
    Jacobi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceSolution {
    /// `|A| x |C|` matrix of `π_ij`.
    pub pi: DMatrix<f64>,
    /// `c^w = w^T (I - P)^{-1}` as a column vector.
    pub centrality: DVector<f64>,
    /// `q̄_i = Σ_j q_ij`.
    pub decisiveness: DVector<f64>,
    pub decision_shares: DVector<f64>,
    pub choice_shares: DVector<f64>,
    /// Some agent adopts others with probability above 0.999; results are
    /// sensitive to perturbations of the inputs.
    pub ill_conditioned: bool,
}

/// Solves the model at its own endowment.
pub fn solve_choice_matrix(model: &NetworkModel, solver: Solver) -> Result<ChoiceSolution> {
    require_decisive(model)?;
    let w = model.endowment();
    let (pi, centrality) = match solver {
        Solver::Dense => {
            let lu = DenseLu::new(model.system_matrix())?;
            (lu.solve_matrix(model.direct()), lu.solve_transpose(w))
        }
        Solver::Jacobi => (
            jacobi(model, model.direct(), false)?,
            jacobi(
                model,
                &DMatrix::from_column_slice(w.len(), 1, w.as_slice()),
                true,
            )?
            .column(0)
            .into_owned(),
        ),
    };
    let decisiveness = model.decisiveness();
    let decision_shares = centrality.component_mul(&decisiveness);
    let choice_shares = pi.tr_mul(w);
    let ill_conditioned = decisiveness
        .iter()
        .any(|q| 1.0 - q > ILL_CONDITIONED_THRESHOLD);
    Ok(ChoiceSolution {
        pi,
        centrality,
        decisiveness,
        decision_shares,
        choice_shares,
        ill_conditioned,
    })
}

/// `X <- B + P X` (or `P^T X` when `transpose`) until the relative residual
/// `|(I - P) X - B|_∞ / |B|_∞` drops below [`JACOBI_TOLERANCE`].
fn jacobi(model: &NetworkModel, b: &DMatrix<f64>, transpose: bool) -> Result<DMatrix<f64>> {
    let scale = b.amax();
    if scale == 0.0 {
        return Ok(DMatrix::zeros(b.nrows(), b.ncols()));
    }
    let apply = |x: &DMatrix<f64>| {
        let mut px = DMatrix::zeros(x.nrows(), x.ncols());
        for (i, k, p) in model.adoption_triplets() {
            let (dst, src) = if transpose { (k, i) } else { (i, k) };
            for c in 0..x.ncols() {
                px[(dst, c)] += p * x[(src, c)];
            }
        }
        px
    };
    let mut x = b.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let px = apply(&x);
        // (I - P) x - b = x - (b + P x)
        let next = b + px;
        residual = (&x - &next).amax() / scale;
        if residual < JACOBI_TOLERANCE {
            return Ok(x);
        }
        x = next;
    }
    Err(Error::NotConverged {
        iterations: JACOBI_MAX_SWEEPS,
        residual,
    })
}

/// `π_j^w = w^T (I - P)^{-1} q^(j)` for every choice.
pub fn choice_shares(model: &NetworkModel, w: &DVector<f64>) -> Result<DVector<f64>> {
    check_endowment(model.n_agents(), w)?;
    require_decisive(model)?;
    let lu = DenseLu::new(model.system_matrix())?;
    let c = lu.solve_transpose(w);
    Ok(model.direct().tr_mul(&c))
}

/// `c^w = w^T (I - P)^{-1}`.
pub fn centrality(model: &NetworkModel, w: &DVector<f64>) -> Result<DVector<f64>> {
    check_endowment(model.n_agents(), w)?;
    require_decisive(model)?;
    Ok(DenseLu::new(model.system_matrix())?.solve_transpose(w))
}

/// `δ_i^w = c_i^w q̄_i`.
pub fn decision_shares(model: &NetworkModel, w: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(centrality(model, w)?.component_mul(&model.decisiveness()))
}

/// Limit of the hub's decision share over total endowment in a growing
/// fully connected network where every agent also adopts the hub with
/// extra probability `rho_h`: `(1/ρ_H - ρ_F/(1 - ρ_F))^{-1}`.
pub fn hub_asymptotic_ratio(rho_f: f64, rho_h: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho_f) || !(rho_h > 0.0 && rho_h <= 1.0) || rho_f + rho_h > 1.0 {
        return Err(Error::Domain(format!(
            "need 0 <= rho_F < 1, 0 < rho_H <= 1, rho_F + rho_H <= 1; got ({rho_f}, {rho_h})"
        )));
    }
    Ok(1.0 / (1.0 / rho_h - rho_f / (1.0 - rho_f)))
}

/// Probability that an agent's own preferences put on a subset of a
/// (possibly infinite) choice set.
pub trait SubsetMeasure<S: ?Sized> {
    fn measure(&self, subset: &S) -> f64;
}

impl<S: ?Sized, F: Fn(&S) -> f64> SubsetMeasure<S> for F {
    fn measure(&self, subset: &S) -> f64 {
        self(subset)
    }
}

/// Choice share of a subset `S`: `Σ_i δ_i^w μ_i(S)`.
pub fn mixture_choice_share<S: ?Sized, M: SubsetMeasure<S>>(
    model: &NetworkModel,
    w: &DVector<f64>,
    measures: &[M],
    subset: &S,
) -> Result<f64> {
    if measures.len() != model.n_agents() {
        return Err(Error::DimensionMismatch {
            expected: model.n_agents(),
            got: measures.len(),
        });
    }
    let delta = decision_shares(model, w)?;
    let mut total = 0.0;
    for (i, m) in measures.iter().enumerate() {
        let mu = m.measure(subset);
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::Domain(format!(
                "measure of agent {} returned {mu}",
                model.agents()[i]
            )));
        }
        total += delta[i] * mu;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearningLimit {
    pub beliefs: DVector<f64>,
    pub iterations: usize,
    /// Agents with `α_i = 1`, whose private signal `q_ij / (1 - α_i)` is
    /// undefined and was set to zero.
    pub zero_filled: Vec<String>,
}

/// Runs the linear-learning recursion `x ← D V x + (I - D) x⁰` with `V` the
/// row-normalized adoption matrix, `D = diag(α)` and private signals
/// `x⁰_i = q_ij / (1 - α_i)`. Its fixed point is column `j` of `π`.
pub fn linear_learning_limit(
    model: &NetworkModel,
    choice: &str,
    tol: f64,
    max_iter: usize,
) -> Result<LearningLimit> {
    require_decisive(model)?;
    let j = model.choice_index(choice)?;
    let n = model.n_agents();
    let alpha = model.adoption_mass();
    let mut zero_filled = Vec::new();
    let x0 = DVector::from_fn(n, |i, _| {
        if alpha[i] < 1.0 {
            model.direct()[(i, j)] / (1.0 - alpha[i])
        } else {
            zero_filled.push(model.agents()[i].clone());
            0.0
        }
    });
    let anchor = DVector::from_fn(n, |i, _| (1.0 - alpha[i]) * x0[i]);

    let mut x = x0.clone();
    for it in 1..=max_iter {
        let mut next = anchor.clone();
        for i in 0..n {
            if alpha[i] == 0.0 {
                continue;
            }
            let avg: f64 = model
                .adoption_row(i)
                .iter()
                .map(|&(k, p)| (p / alpha[i]) * x[k])
                .sum();
            next[i] += alpha[i] * avg;
        }
        let change = (&next - &x).amax();
        x = next;
        if change < tol {
            return Ok(LearningLimit {
                beliefs: x,
                iterations: it,
                zero_filled,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: f64::NAN,
    })
}
