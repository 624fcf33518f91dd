use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netchoice::ambassador::{ambassador_share, greedy_select, marginal_gain, GainCache};
use netchoice::choice::{centrality, solve_choice_matrix, Solver};
use netchoice::estimate::simplex::{simplex_solve, LpStatus, Sense};
use netchoice::estimate::{build_polyhedron, estimate, phase1_min_slack, Knowledge, Relation};
use netchoice::fixtures::{ids, random_model};
use netchoice::herding::{herd_moments, moments_by, Recurrence};
use netchoice::netmodel::{parse_model, serialize_model, validate};
use netchoice::NetworkModel;

fn model_from(seed: u64, n: usize, c: usize) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deg = rng.random_range(1..=n.max(2) - 1);
    random_model(&mut rng, n, c, 0.05, deg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_then_parse_is_identity(seed in any::<u64>(), n in 1usize..12, c in 1usize..5) {
        let model = model_from(seed, n, c);
        let text = serialize_model(&model);
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(serialize_model(&back), text);
    }

    #[test]
    fn decisive_models_have_radius_below_one(seed in any::<u64>(), n in 2usize..20) {
        let report = validate(&model_from(seed, n, 2));
        prop_assert!(report.satisfies_assumption1);
        prop_assert!(report.spectral_radius_estimate < 1.0);
    }

    #[test]
    fn closed_indecisive_groups_have_radius_one(seed in any::<u64>(), n in 3usize..12, trap in 2usize..4) {
        // The last `trap` agents only adopt each other and never decide.
        let trap = trap.min(n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_model(&mut rng, n, 2, 0.1, n - 1);
        let mut p = base.adoption_dense();
        let mut q = base.direct().clone();
        for i in n - trap..n {
            p.row_mut(i).fill(0.0);
            q.row_mut(i).fill(0.0);
            let others: Vec<usize> = (n - trap..n).filter(|&k| k != i).collect();
            for &k in &others {
                p[(i, k)] = 1.0 / others.len() as f64;
            }
        }
        let model = NetworkModel::from_dense(ids("a", n), ids("c", 2), &p, q, base.endowment().clone()).unwrap();
        let report = validate(&model);
        prop_assert!(!report.satisfies_assumption1);
        prop_assert_eq!(report.unreachable_agents.len(), trap);
        prop_assert!((report.spectral_radius_estimate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dense_and_jacobi_agree(seed in any::<u64>(), n in 1usize..30, c in 1usize..6) {
        let model = model_from(seed, n, c);
        let dense = solve_choice_matrix(&model, Solver::Dense).unwrap();
        let jacobi = solve_choice_matrix(&model, Solver::Jacobi).unwrap();
        prop_assert!((&dense.pi - &jacobi.pi).amax() < 1e-9);
        let residual = model.system_matrix() * &dense.pi - model.direct();
        prop_assert!(residual.amax() < 1e-10);
        prop_assert!((dense.decision_shares.sum() - model.endowment().sum()).abs() < 1e-9);
    }

    #[test]
    fn centrality_is_non_negative(seed in any::<u64>(), n in 1usize..25) {
        let model = model_from(seed, n, 2);
        let c = centrality(&model, model.endowment()).unwrap();
        prop_assert!(c.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn shares_grow_with_the_ambassador_set(seed in any::<u64>(), n in 2usize..10, mask in any::<u16>(), extra in any::<u16>()) {
        let model = model_from(seed, n, 2);
        let w = model.endowment().clone();
        let small: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let large: Vec<usize> = (0..n).filter(|i| (mask | extra) >> i & 1 == 1).collect();
        let a = ambassador_share(&model, &small, 0, &w).unwrap();
        let b = ambassador_share(&model, &large, 0, &w).unwrap();
        prop_assert!(a <= b + 1e-10);
    }

    #[test]
    fn cached_gain_matches_recomputation(seed in any::<u64>(), n in 2usize..10, mask in any::<u16>(), pick in any::<usize>()) {
        let model = model_from(seed, n, 3);
        let w = model.endowment().clone();
        let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let a = pick % n;
        prop_assume!(!set.contains(&a));
        let cache = GainCache::for_set(&model, &set, 1, &w).unwrap();
        let gain = marginal_gain(&model, &set, a, 1, &w, &cache).unwrap();
        let mut with = set.clone();
        with.push(a);
        let direct = ambassador_share(&model, &with, 1, &w).unwrap() - ambassador_share(&model, &set, 1, &w).unwrap();
        prop_assert!((gain - direct).abs() < 1e-10);
    }

    #[test]
    fn lazy_and_plain_greedy_agree(seed in any::<u64>(), n in 2usize..15, budget in 1usize..5) {
        let model = model_from(seed, n, 2);
        let w = model.endowment().clone();
        let budget = budget.min(n);
        let lazy = greedy_select(&model, 0, &w, budget, true).unwrap();
        let plain = greedy_select(&model, 0, &w, budget, false).unwrap();
        prop_assert_eq!(lazy.selected, plain.selected);
    }

    #[test]
    fn trivially_consistent_knowledge_needs_no_slack(seed in any::<u64>(), n in 2usize..5) {
        // Knowledge rows that hold at q = Π, p = 0.
        let model = model_from(seed, n, 2);
        let pi = solve_choice_matrix(&model, Solver::Dense).unwrap().pi;
        let mut know = vec![Knowledge::Sparsity { agent: "a1".into(), source: "a2".into() }];
        know.push(Knowledge::Decisiveness { agent: "a2".into(), k: 0.5, relation: Relation::AtMost });
        if pi[(0, 1)] > 1e-6 {
            know.push(Knowledge::PreferenceRatio {
                agent: "a1".into(),
                preferred: "c1".into(),
                other: "c2".into(),
                k: pi[(0, 0)] / pi[(0, 1)],
                delta: 0.5,
            });
        }
        let poly = build_polyhedron(model.agents().to_vec(), model.choices().to_vec(), pi, &know).unwrap();
        prop_assert!(poly.max_violation(&poly.trivial_point()) < 1e-12);
        prop_assert!(phase1_min_slack(&poly).unwrap().objective.abs() < 1e-9);
    }

    #[test]
    fn estimates_are_valid_models(seed in any::<u64>(), n in 2usize..5, c in 2usize..4) {
        let model = model_from(seed, n, c);
        let pi = solve_choice_matrix(&model, Solver::Dense).unwrap().pi;
        let poly = build_polyhedron(model.agents().to_vec(), model.choices().to_vec(), pi, &[]).unwrap();
        let (_, est) = estimate(&poly).unwrap();
        prop_assert!(est.margin >= 0.0);
        prop_assert!(poly.max_violation(&est.point) < 1e-9);
        let fitted = est.to_model(&poly).unwrap();
        for i in 0..n {
            prop_assert_eq!(fitted.adoption_dense()[(i, i)], 0.0);
            let sum = fitted.adoption_mass()[i] + fitted.decisiveness()[i];
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn simplex_points_are_feasible(seed in any::<u64>()) {
        use netchoice::estimate::simplex::{Constraint, LinearProgram};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=10);
        let rows: Vec<Constraint> = (0..rng.random_range(1..=8))
            .map(|_| Constraint {
                coeffs: (0..n).map(|j| (j, rng.random_range(-2.0..2.0))).collect(),
                sense: if rng.random_bool(0.5) { Sense::Le } else { Sense::Ge },
                rhs: rng.random_range(-1.0..2.0),
            })
            .collect();
        let lp = LinearProgram {
            n_vars: n,
            upper: vec![Some(1.0); n],
            rows: rows.clone(),
            objective: (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect(),
            maximize: true,
        };
        let sol = simplex_solve(&lp);
        if sol.status == LpStatus::Optimal {
            for r in &rows {
                let lhs: f64 = r.coeffs.iter().map(|&(j, a)| a * sol.x[j]).sum();
                match r.sense {
                    Sense::Le => prop_assert!(lhs <= r.rhs + 1e-8),
                    _ => prop_assert!(lhs >= r.rhs - 1e-8),
                }
            }
            prop_assert!(sol.x.iter().all(|&x| (-1e-12..=1.0 + 1e-9).contains(&x)));
        } else {
            prop_assert_eq!(sol.status, LpStatus::Infeasible);
        }
    }
}

#[test]
fn moment_recurrences_agree_on_the_full_grid() {
    let table = herd_moments(50, 10).unwrap();
    assert!(table.max_disagreement < 1e-12, "{}", table.max_disagreement);
    let nested = moments_by(Recurrence::Nested, 50, 10);
    for d in 1..=50 {
        for m in 0..=10 {
            assert!((table.get(d, m) - nested[d - 1][m]).abs() < 1e-12);
        }
    }
}

#[test]
fn moments_are_fractions_decreasing_in_order_and_herds() {
    let t = herd_moments(50, 10).unwrap();
    for d in 1..=50 {
        for m in 0..=10 {
            let v = t.get(d, m);
            assert!(v > 0.0 && v <= 1.0);
            if m > 0 {
                assert!(v <= t.get(d, m - 1) + 1e-15);
            }
        }
        if d > 1 {
            assert!(t.get(d, 1) < t.get(d - 1, 1));
        }
    }
}

#[test]
fn uniform_endowment_shares_sum_to_endowment() {
    let model = model_from(11, 20, 4);
    let w = DVector::from_element(20, 0.5);
    let sol = solve_choice_matrix(&model.with_endowment(w).unwrap(), Solver::Dense).unwrap();
    assert!((sol.choice_shares.sum() - 10.0).abs() < 1e-9);
}
