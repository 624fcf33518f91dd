//! Ready-made models used by the tests, the guide and the CLI demos.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

use crate::netmodel::NetworkModel;
use crate::pricing::{Entry, Firm, ParametricModel, Sensitivity};

/// `["{prefix}1", "{prefix}2", ...]`.
pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Three agents and choices `A`, `B`: agent 1 is influential and leans to
/// `A`, agents 2 and 3 only ever select `B` on their own.
pub fn influential_agent() -> NetworkModel {
    let p = DMatrix::from_row_slice(3, 3, &[0.0, 0.125, 0.125, 0.5, 0.0, 0.25, 0.5, 0.25, 0.0]);
    let q = DMatrix::from_row_slice(3, 2, &[0.5, 0.25, 0.0, 0.25, 0.0, 0.25]);
    NetworkModel::from_dense(
        ids("", 3),
        vec!["A".into(), "B".into()],
        &p,
        q,
        DVector::from_element(3, 1.0),
    )
    .expect("valid fixture")
}

/// Every agent adopts every other agent with probability `rho / (n - 1)`.
/// Direct selection `(1 - rho)` is split between two choices with agent
/// `i` putting weight `(i + 1) / (n + 1)` on the first.
pub fn isotropic(n: usize, rho: f64) -> NetworkModel {
    let p = DMatrix::from_fn(n, n, |i, k| if i == k { 0.0 } else { rho / (n - 1) as f64 });
    let q = DMatrix::from_fn(n, 2, |i, j| {
        let x = (i + 1) as f64 / (n + 1) as f64;
        (1.0 - rho) * if j == 0 { x } else { 1.0 - x }
    });
    NetworkModel::from_dense(
        ids("a", n),
        ids("c", 2),
        &p,
        q,
        DVector::from_element(n, 1.0),
    )
    .expect("valid fixture")
}

/// Agent 1 is the hub; every other agent adopts it with probability `rho`
/// and selects `c1` directly otherwise. The hub splits evenly.
pub fn hub_and_spoke(n: usize, rho: f64) -> NetworkModel {
    let p = DMatrix::from_fn(n, n, |i, k| if i != 0 && k == 0 { rho } else { 0.0 });
    let q = DMatrix::from_fn(n, 2, |i, j| match (i, j) {
        (0, _) => 0.5,
        (_, 0) => 1.0 - rho,
        _ => 0.0,
    });
    NetworkModel::from_dense(
        ids("a", n),
        ids("c", 2),
        &p,
        q,
        DVector::from_element(n, 1.0),
    )
    .expect("valid fixture")
}

/// Fully connected network of `n` agents with a hub (agent 1): everybody
/// adopts everybody with probability `rho_f / (n - 1)` and non-hub agents
/// additionally adopt the hub with probability `rho_h`.
pub fn hub_in_clique(n: usize, rho_f: f64, rho_h: f64) -> NetworkModel {
    let base = rho_f / (n - 1) as f64;
    let mut triplets = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let extra = if k == 0 { rho_h } else { 0.0 };
                triplets.push((i, k, base + extra));
            }
        }
    }
    let q = DMatrix::from_fn(n, 1, |i, _| {
        if i == 0 {
            1.0 - rho_f
        } else {
            1.0 - rho_f - rho_h
        }
    });
    NetworkModel::new(
        ids("a", n),
        ids("c", 1),
        triplets,
        q,
        DVector::from_element(n, 1.0),
    )
    .expect("valid fixture")
}

/// Random model satisfying collective decisiveness: every agent selects
/// directly with probability at least `min_decisive` and spreads the rest
/// over up to `max_degree` random other agents. Endowments are uniform on
/// `[0, 2)`.
pub fn random_model<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    c: usize,
    min_decisive: f64,
    max_degree: usize,
) -> NetworkModel {
    let mut triplets = Vec::new();
    let mut q = DMatrix::zeros(n, c);
    for i in 0..n {
        let qbar = if n == 1 {
            1.0
        } else {
            rng.random_range(min_decisive..=1.0)
        };
        let deg = if n == 1 {
            0
        } else {
            rng.random_range(1..=max_degree.min(n - 1))
        };
        if deg > 0 && qbar < 1.0 {
            let targets: Vec<usize> = sample(rng, n - 1, deg)
                .into_iter()
                .map(|k| if k >= i { k + 1 } else { k })
                .collect();
            let raw: Vec<f64> = (0..deg).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            for (k, r) in targets.into_iter().zip(raw) {
                triplets.push((i, k, (1.0 - qbar) * r / total));
            }
        }
        let raw: Vec<f64> = (0..c)
            .map(|_| rng.random_range(0.0..1.0f64).powi(2))
            .collect();
        let total: f64 = raw.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let qbar = if deg > 0 && n > 1 { qbar } else { 1.0 };
        for (j, r) in raw.into_iter().enumerate() {
            q[(i, j)] = if total > 0.0 {
                qbar * r / total
            } else {
                qbar / c as f64
            };
        }
        if q.row(i).sum() == 0.0 {
            q[(i, 0)] = qbar;
        }
    }
    let w = DVector::from_fn(n, |_, _| rng.random_range(0.0..2.0));
    NetworkModel::new(ids("a", n), ids("c", c), triplets, q, w).expect("random fixture is valid")
}

/// [`influential_agent`] with one firm selling `A` at margin 2 whose
/// discount moves a single agent's row by `slopes`.
pub fn single_firm(
    agent: usize,
    slopes: &[(Entry, f64)],
    lower: f64,
    upper: f64,
) -> ParametricModel {
    let firm = Firm {
        choice: 0,
        margin: 2.0,
        lower,
        upper,
    };
    let sens = slopes
        .iter()
        .map(|&(entry, slope)| Sensitivity {
            firm: 0,
            agent,
            entry,
            slope,
        })
        .collect();
    ParametricModel::new(influential_agent(), vec![firm], sens).expect("valid fixture")
}

/// Two firms selling `A` and `B` plus an outside option `O`, margin 1,
/// discounts in `[0, 0.5]`. Agents 1 and 2 lean to `A`, agents 3 and 4
/// mirror them, so swapping agents and firms leaves the game unchanged.
pub fn symmetric_duopoly() -> ParametricModel {
    let n = 4;
    let p = DMatrix::from_fn(n, n, |i, k| if i == k { 0.0 } else { 0.1 });
    let q = DMatrix::from_fn(n, 3, |i, j| match (i < 2, j) {
        (_, 2) => 0.25,
        (true, 0) | (false, 1) => 0.3,
        _ => 0.15,
    });
    let base = NetworkModel::from_dense(
        ids("a", n),
        vec!["A".into(), "B".into(), "O".into()],
        &p,
        q,
        DVector::from_element(n, 1.0),
    )
    .expect("valid fixture");
    let firms = (0..2)
        .map(|choice| Firm {
            choice,
            margin: 1.0,
            lower: 0.0,
            upper: 0.5,
        })
        .collect();
    let mut sens = Vec::new();
    for firm in 0..2 {
        for agent in 0..n {
            let mut push = |entry, slope| {
                sens.push(Sensitivity {
                    firm,
                    agent,
                    entry,
                    slope,
                })
            };
            push(Entry::Direct(firm), 0.4);
            push(Entry::Direct(1 - firm), -0.1);
            push(Entry::Direct(2), -0.15);
            for k in (0..n).filter(|&k| k != agent) {
                push(Entry::Adopt(k), -0.05);
            }
        }
    }
    ParametricModel::new(base, firms, sens).expect("valid fixture")
}
