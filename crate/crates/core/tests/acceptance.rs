//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always
//! printed: `cargo test -p netchoice --test acceptance`.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netchoice::ambassador::{
    ambassador_share, brute_force_select, greedy_select, is_vertex_cover, resolve_agents,
    vertex_cover_instance, COVER_TARGET,
};
use netchoice::cascade::estimate_choice_probs_mc;
use netchoice::choice::{solve_choice_matrix, Solver};
use netchoice::estimate::simplex::{simplex_solve, Constraint, LinearProgram, LpStatus, Sense};
use netchoice::estimate::{build_polyhedron, estimate, phase1_min_slack, Knowledge};
use netchoice::fixtures::{
    hub_and_spoke, hub_in_clique, influential_agent, isotropic, random_model, single_firm,
    symmetric_duopoly,
};
use netchoice::herding::{herd_moments, moments_by, simulate_urn, Recurrence};
use netchoice::pricing::{
    affine_single_agent_share, best_response, find_equilibrium, profit, share_sensitivities, Entry,
    ParametricModel,
};
use netchoice::NetworkModel;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// 1 ---------------------------------------------------------------------

fn influential_agent_shares() -> Outcome {
    let model = influential_agent();
    let w = ones(3) / 3.0;
    let start = Instant::now();
    let sol =
        solve_choice_matrix(&model.with_endowment(w.clone()).unwrap(), Solver::Dense).unwrap();
    let elapsed = start.elapsed();

    let expected_pi = [0.6, 0.4, 0.4];
    let expected_shares = [7.0 / 15.0, 8.0 / 15.0];
    let expected_delta = [0.7, 0.15, 0.15];
    let mut err: f64 = 0.0;
    for i in 0..3 {
        err = err.max((sol.pi[(i, 0)] - expected_pi[i]).abs());
        err = err.max((sol.decision_shares[i] - expected_delta[i]).abs());
    }
    for j in 0..2 {
        err = err.max((sol.choice_shares[j] - expected_shares[j]).abs());
    }
    let fast = elapsed < Duration::from_millis(1);
    outcome(
        err <= 1e-10 && fast,
        format!(
            "max abs error {err:.1e}, solve {:.1}us",
            elapsed.as_secs_f64() * 1e6
        ),
    )
}

// 2 ---------------------------------------------------------------------

fn self_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut row_err, mut delta_err, mut residual): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let c = rng.random_range(1..=10);
        let deg = rng.random_range(1..=8);
        let model = random_model(&mut rng, n, c, 0.05, deg);
        let sol = solve_choice_matrix(&model, Solver::Dense).unwrap();
        for i in 0..n {
            row_err = row_err.max((sol.pi.row(i).sum() - 1.0).abs());
        }
        delta_err = delta_err.max((sol.decision_shares.sum() - model.endowment().sum()).abs());
        let r = model.system_matrix() * &sol.pi - model.direct();
        residual = residual.max(r.amax());
    }
    outcome(
        row_err <= 1e-9 && delta_err <= 1e-9 && residual < 1e-10,
        format!(
            "row sums {row_err:.1e}, sum delta - sum w {delta_err:.1e}, residual {residual:.1e}"
        ),
    )
}

// 3 ---------------------------------------------------------------------

fn walk_fixtures() -> Vec<NetworkModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut out = vec![
        influential_agent(),
        isotropic(4, 0.5),
        isotropic(5, 0.7),
        hub_and_spoke(4, 0.6),
        hub_and_spoke(5, 0.3),
        hub_in_clique(4, 0.3, 0.3),
    ];
    while out.len() < 20 {
        let n = rng.random_range(2..=5);
        let c = rng.random_range(2..=3);
        out.push(random_model(&mut rng, n, c, 0.3, 3));
    }
    out
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    for (f, model) in walk_fixtures().iter().enumerate() {
        let exact = solve_choice_matrix(model, Solver::Dense).unwrap().pi;
        let est = estimate_choice_probs_mc(model, 1_000_000, 30 + f as u64).unwrap();
        for (i, j) in (0..model.n_agents()).cartesian_product(0..model.n_choices()) {
            let se = est.standard_error[(i, j)];
            let err = (est.pi[(i, j)] - exact[(i, j)]).abs();
            cells += 1;
            if se > 0.0 {
                worst = worst.max(err / se);
            } else if err > 1e-12 {
                // Every walk agreed; the closed form must then agree up to rounding.
                worst = f64::INFINITY;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 4.0 && elapsed < Duration::from_secs(60),
        format!(
            "{cells} cells, worst |error|/SE {worst:.2}, {}",
            secs(elapsed)
        ),
    )
}

// 4 ---------------------------------------------------------------------

fn greedy_ratio() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..200 {
        let n = rng.random_range(2..=10);
        let c = rng.random_range(2..=3);
        let deg = rng.random_range(1..n);
        let model = random_model(&mut rng, n, c, 0.05, deg);
        let budget = rng.random_range(1..=3usize.min(n));
        let j = rng.random_range(0..c);
        let w = model.endowment().clone();
        let plan = greedy_select(&model, j, &w, budget, rng.random_bool(0.5)).unwrap();
        let picked = resolve_agents(&model, &plan.selected).unwrap();
        let greedy = ambassador_share(&model, &picked, j, &w).unwrap();
        let opt = brute_force_select(&model, j, &w, budget).unwrap().value;
        min_ratio = min_ratio.min(greedy / opt);
    }
    let elapsed = start.elapsed();
    let bound = 1.0 - (-1.0f64).exp();
    outcome(
        min_ratio >= bound && elapsed < Duration::from_secs(120),
        format!(
            "minimum greedy/optimal ratio {min_ratio:.6} (bound {bound:.4}), {}",
            secs(elapsed)
        ),
    )
}

// 5 ---------------------------------------------------------------------

fn submodularity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut mono, mut sub) = (0, 0);
    let (mut worst_mono, mut worst_sub): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let n = rng.random_range(3..=12);
        let c = rng.random_range(1..=3);
        let model = random_model(&mut rng, n, c, 0.05, n - 1);
        let j = rng.random_range(0..c);
        let w = model.endowment().clone();
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let a = order[0];
        let y_len = rng.random_range(0..n);
        let x_len = rng.random_range(0..=y_len);
        let y: Vec<usize> = order[1..=y_len].to_vec();
        let x: Vec<usize> = y[..x_len].to_vec();
        let f = |s: &[usize]| ambassador_share(&model, s, j, &w).unwrap();
        let with = |s: &[usize]| {
            let mut t = s.to_vec();
            t.push(a);
            t
        };
        let gain_x = f(&with(&x)) - f(&x);
        let gain_y = f(&with(&y)) - f(&y);
        worst_mono = worst_mono.max(-gain_x).max(-gain_y).max(f(&x) - f(&y));
        worst_sub = worst_sub.max(gain_y - gain_x);
        if gain_x < -1e-10 || gain_y < -1e-10 || f(&x) > f(&y) + 1e-10 {
            mono += 1;
        }
        if gain_y > gain_x + 1e-10 {
            sub += 1;
        }
    }
    outcome(
        mono == 0 && sub == 0,
        format!(
            "1000 triples: {mono} monotonicity and {sub} submodularity violations (worst {worst_mono:.1e}, {worst_sub:.1e})"
        ),
    )
}

// 6 ---------------------------------------------------------------------

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    loop {
        let edges: Vec<(usize, usize)> = (0..n)
            .tuple_combinations()
            .filter(|_| rng.random_bool(0.4))
            .collect();
        let covered = (0..n).all(|v| edges.iter().any(|&(a, b)| a == v || b == v));
        if covered {
            return edges;
        }
    }
}

fn vertex_cover() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut worst_value: f64 = 0.0;
    for g in 0..20 {
        let n = rng.random_range(3..=8);
        let edges = random_graph(&mut rng, n);
        let min_cover = (0..=n)
            .find(|&k| (0..n).combinations(k).any(|s| is_vertex_cover(&s, &edges)))
            .unwrap();
        // Alternate between the minimum size and one more.
        let k = (min_cover + g % 2).min(n);
        let covers: BTreeSet<Vec<usize>> = (0..n)
            .combinations(k)
            .filter(|s| is_vertex_cover(s, &edges))
            .collect();
        let model = vertex_cover_instance(n, &edges).unwrap();
        let best = brute_force_select(&model, COVER_TARGET, &ones(n), k).unwrap();
        let optimal: BTreeSet<Vec<usize>> = best.optimal_sets.into_iter().collect();
        if optimal != covers {
            mismatches += 1;
        }
        worst_value = worst_value.max((best.value - (n + k) as f64 / 2.0).abs());
    }
    outcome(
        mismatches == 0 && worst_value < 1e-10,
        format!("20 graphs: {mismatches} optimal-set mismatches, value error {worst_value:.1e}"),
    )
}

// 7 ---------------------------------------------------------------------

fn derivative_fixtures() -> Vec<ParametricModel> {
    vec![
        single_firm(
            1,
            &[(Entry::Direct(0), 0.5), (Entry::Direct(1), -0.5)],
            0.0,
            0.5,
        ),
        single_firm(
            1,
            &[
                (Entry::Direct(0), 0.5),
                (Entry::Adopt(0), -0.25),
                (Entry::Adopt(2), -0.25),
            ],
            0.0,
            0.5,
        ),
        single_firm(
            0,
            &[
                (Entry::Direct(0), 0.4),
                (Entry::Adopt(1), -0.2),
                (Entry::Adopt(2), -0.2),
            ],
            -0.2,
            0.6,
        ),
        symmetric_duopoly(),
    ]
}

fn relative(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / a.abs().max(b.abs())
    }
}

fn sensitivity_calculus() -> Outcome {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_first, mut worst_second): (f64, f64) = (0.0, 0.0);
    let mut points = 0;
    for pm in derivative_fixtures() {
        let w = ones(pm.base().n_agents());
        for _ in 0..100 {
            let z: Vec<f64> = pm
                .firms()
                .iter()
                .map(|f| rng.random_range(f.lower + 2.0 * h..f.upper - 2.0 * h))
                .collect();
            for firm in 0..pm.firms().len() {
                let at = |dz: f64| {
                    let mut zz = z.clone();
                    zz[firm] += dz;
                    share_sensitivities(&pm, &zz, firm, &w).unwrap()
                };
                let (mid, up, down) = (at(0.0), at(h), at(-h));
                for l in 0..mid.shares.len() {
                    let fd1 = (up.shares[l] - down.shares[l]) / (2.0 * h);
                    let fd2 = (up.first[l] - down.first[l]) / (2.0 * h);
                    worst_first = worst_first.max(relative(mid.first[l], fd1));
                    worst_second = worst_second.max(relative(mid.second[l], fd2));
                }
            }
            points += 1;
        }
    }

    // Closed form for a single agent's affine variation against the generic path.
    let mut worst_closed: f64 = 0.0;
    for pm in derivative_fixtures().into_iter().take(3) {
        let w = ones(3);
        let f = &pm.firms()[0];
        for k in 0..=50 {
            let u = f.lower + (f.upper - f.lower) * k as f64 / 50.0;
            let closed = affine_single_agent_share(&pm, 0, u, &w).unwrap();
            let generic = solve_choice_matrix(&pm.evaluate_model(&[u]).unwrap(), Solver::Dense)
                .unwrap()
                .choice_shares[0];
            worst_closed = worst_closed.max((closed - generic).abs());
        }
    }
    outcome(
        worst_first <= 1e-6 && worst_second <= 1e-6 && worst_closed <= 1e-10,
        format!(
            "{points} points: first {worst_first:.1e}, second {worst_second:.1e} relative; closed form {worst_closed:.1e}"
        ),
    )
}

// 8 ---------------------------------------------------------------------

fn pricing_shape() -> Outcome {
    let mut worst_concavity = f64::NEG_INFINITY;
    let mut worst_br: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for pm in derivative_fixtures() {
        let w = ones(pm.base().n_agents());
        for firm in 0..pm.firms().len() {
            let f = pm.firms()[firm].clone();
            for _ in 0..5 {
                let mut z: Vec<f64> = pm
                    .firms()
                    .iter()
                    .map(|g| rng.random_range(g.lower..=g.upper))
                    .collect();
                let pr = |x: f64, z: &mut Vec<f64>| {
                    z[firm] = x;
                    profit(&pm, firm, z, &w).value()
                };
                let h = (f.upper - f.lower) / 200.0;
                for k in 1..200 {
                    let x = f.lower + k as f64 * h;
                    let d2 = pr(x + h, &mut z) - 2.0 * pr(x, &mut z) + pr(x - h, &mut z);
                    worst_concavity = worst_concavity.max(d2);
                }
                let br = best_response(&pm, firm, &z, &w, 1e-9).unwrap();
                let grid_best = (0..10_000)
                    .map(|k| pr(f.lower + (f.upper - f.lower) * k as f64 / 9999.0, &mut z))
                    .fold(f64::NEG_INFINITY, f64::max);
                worst_br = worst_br.max(grid_best - pr(br, &mut z));
            }
        }
    }
    let duo = symmetric_duopoly();
    let eq = find_equilibrium(&duo, &ones(4), 1.0, 1e-9, 200).unwrap();
    let asym = (eq.z[0] - eq.z[1]).abs();
    outcome(
        worst_concavity <= 1e-8 && worst_br <= 1e-12 && eq.converged && eq.residual < 1e-6 && asym < 1e-6,
        format!(
            "max second difference {worst_concavity:.1e}, grid beats best response by {worst_br:.1e}, equilibrium z = ({:.6}, {:.6}) residual {:.1e}",
            eq.z[0], eq.z[1], eq.residual
        ),
    )
}

// 9 ---------------------------------------------------------------------

fn herding() -> Outcome {
    let start = Instant::now();
    let table = herd_moments(50, 2).unwrap();
    let mut worst: f64 = 0.0;
    for d in 1..=50 {
        let h: f64 = (1..=d).map(|k| 1.0 / k as f64).sum();
        worst = worst.max((table.get(d, 1) - h / d as f64).abs());
    }
    let two_term = moments_by(Recurrence::TwoTerm, 2, 2)[1][2];
    let summation = moments_by(Recurrence::Summation, 2, 2)[1][2];
    let second = (two_term - 7.0 / 12.0)
        .abs()
        .max((summation - 7.0 / 12.0).abs());
    let urn = simulate_urn(2, 1000, 10_000, 9).unwrap();
    let z = (urn.mean - 0.75).abs() / urn.standard_error;
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && second <= 1e-12 && z <= 3.0 && elapsed < Duration::from_secs(30),
        format!(
            "M1 error {worst:.1e}, M2_2 error {second:.1e}, urn mean {:.4} ({z:.2} SE), {}",
            urn.mean,
            secs(elapsed)
        ),
    )
}

// 10 --------------------------------------------------------------------

/// Best objective over all basic feasible solutions of `lp`, or `None`
/// if no vertex is feasible.
fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars;
    // Every row and bound as `a^T x (sense) b`.
    let mut planes: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for r in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coeffs {
            a[j] += v;
        }
        planes.push((a, r.sense, r.rhs));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        planes.push((a.clone(), Sense::Ge, 0.0));
        planes.push((a, Sense::Le, lp.upper[j].unwrap()));
    }
    let feasible = |x: &DVector<f64>| {
        planes.iter().all(|(a, s, b)| {
            let lhs: f64 = a.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
            match s {
                Sense::Le => lhs <= b + 1e-9,
                Sense::Ge => lhs >= b - 1e-9,
                Sense::Eq => (lhs - b).abs() <= 1e-9,
            }
        })
    };
    let mut best: Option<f64> = None;
    for active in (0..planes.len()).combinations(n) {
        let a = DMatrix::from_fn(n, n, |r, c| planes[active[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| planes[active[r]].2);
        let Some(x) = a.lu().solve(&b) else { continue };
        if !x.iter().all(|v| v.is_finite()) || !feasible(&x) {
            continue;
        }
        let value: f64 = lp.objective.iter().map(|&(j, c)| c * x[j]).sum();
        best = Some(match best {
            None => value,
            Some(v) if lp.maximize => v.max(value),
            Some(v) => v.min(value),
        });
    }
    best
}

fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(1..=8);
    let m = rng.random_range(1..=4);
    let rows = (0..m)
        .map(|_| {
            let mut coeffs = Vec::new();
            for j in 0..n {
                if rng.random_bool(0.7) {
                    coeffs.push((j, rng.random_range(-4..=4) as f64 / 2.0));
                }
            }
            let sense = match rng.random_range(0..10) {
                0 => Sense::Eq,
                1..=5 => Sense::Le,
                _ => Sense::Ge,
            };
            Constraint {
                coeffs,
                sense,
                rhs: rng.random_range(-4..=8) as f64 / 4.0,
            }
        })
        .collect();
    LinearProgram {
        n_vars: n,
        upper: (0..n)
            .map(|_| Some(rng.random_range(1..=4) as f64 / 2.0))
            .collect(),
        rows,
        objective: (0..n)
            .map(|j| (j, rng.random_range(-5..=5) as f64))
            .collect(),
        maximize: rng.random_bool(0.5),
    }
}

fn estimation() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // No knowledge: zero slack, trivial point feasible, estimate re-solves to the observations.
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut models = vec![influential_agent(), isotropic(4, 0.6)];
    for _ in 0..4 {
        let n = rng.random_range(2..=5);
        models.push(random_model(&mut rng, n, 2, 0.2, 2));
    }
    let (mut worst_obj, mut worst_trivial, mut worst_refit): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for m in &models {
        let pi = solve_choice_matrix(m, Solver::Dense).unwrap().pi;
        let poly =
            build_polyhedron(m.agents().to_vec(), m.choices().to_vec(), pi.clone(), &[]).unwrap();
        worst_trivial = worst_trivial.max(poly.max_violation(&poly.trivial_point()));
        let (slack, est) = estimate(&poly).unwrap();
        worst_obj = worst_obj.max(slack.objective.abs());
        let refit = solve_choice_matrix(&est.to_model(&poly).unwrap(), Solver::Dense)
            .unwrap()
            .pi;
        worst_refit = worst_refit.max((refit - &pi).amax());
    }
    pass &= worst_obj <= 1e-12 && worst_trivial <= 1e-12 && worst_refit <= 1e-9;
    notes.push(format!(
        "consistent: objective {worst_obj:.1e}, trivial point {worst_trivial:.1e}, refit {worst_refit:.1e}"
    ));

    // Inconsistent: agent 2 must decide alone and split evenly, but is observed at (0.4, 0.6).
    let m = influential_agent();
    let pi = solve_choice_matrix(&m, Solver::Dense).unwrap().pi;
    let know = vec![
        Knowledge::Sparsity {
            agent: "2".into(),
            source: "1".into(),
        },
        Knowledge::Sparsity {
            agent: "2".into(),
            source: "3".into(),
        },
        Knowledge::PreferenceRatio {
            agent: "2".into(),
            preferred: "A".into(),
            other: "B".into(),
            k: 1.0,
            delta: 0.0,
        },
    ];
    let poly =
        build_polyhedron(m.agents().to_vec(), m.choices().to_vec(), pi.clone(), &know).unwrap();
    let slack = phase1_min_slack(&poly).unwrap();
    let (_, est) = estimate(&poly).unwrap();
    let model = est.to_model(&poly).unwrap();
    let refit = solve_choice_matrix(&model, Solver::Dense).unwrap().pi;
    // π̂ - Π = (I - P̂)^{-1} (ε⁺ - ε⁻), so the refit error is bounded by ‖(I - P̂)^{-1}‖∞ ‖ε‖∞.
    let eps = &slack.eps_plus - &slack.eps_minus;
    let inv = model.system_matrix().try_inverse().unwrap();
    let norm_inv = (0..3).map(|i| inv.row(i).abs().sum()).fold(0.0, f64::max);
    let bound = norm_inv * eps.amax();
    let refit_err = (refit - &pi).amax();
    pass &= slack.objective > 0.0
        && refit_err <= bound + 1e-9
        && poly.max_violation(&est.point) <= 1e-9;
    notes.push(format!(
        "inconsistent: objective {:.4}, refit {refit_err:.3} within slack bound {bound:.3}",
        slack.objective
    ));

    // Simplex against vertex enumeration.
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut disagreements = 0;
    let mut infeasible = 0;
    for _ in 0..100 {
        let lp = random_lp(&mut rng);
        let sol = simplex_solve(&lp);
        match (vertex_enumeration(&lp), &sol.status) {
            (None, LpStatus::Infeasible) => infeasible += 1,
            (Some(v), LpStatus::Optimal) if (v - sol.value).abs() <= 1e-8 * (1.0 + v.abs()) => {}
            _ => disagreements += 1,
        }
    }
    pass &= disagreements == 0;
    notes.push(format!(
        "100 LPs ({infeasible} infeasible): {disagreements} disagreements"
    ));
    outcome(pass, notes.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("influential-agent shares", influential_agent_shares),
        ("closed-form self-consistency", self_consistency),
        ("Monte Carlo agreement", monte_carlo),
        ("greedy guarantee", greedy_ratio),
        ("submodularity and monotonicity", submodularity),
        ("vertex-cover reduction", vertex_cover),
        ("sensitivity calculus", sensitivity_calculus),
        ("pricing shape", pricing_shape),
        ("herding moments", herding),
        ("estimation round trip", estimation),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{tag}] {name}: {}", k + 1, result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
