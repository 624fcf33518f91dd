//! One function per subcommand. Each returns a [`Report`] or a [`Failure`]
//! carrying the exit code.

use std::fs;
use std::path::Path;

use nalgebra::DVector;

use netchoice::ambassador::{apply_ambassadors, brute_force_select, greedy_select};
use netchoice::cascade::{estimate_choice_probs_mc, joint_report};
use netchoice::choice::{solve_choice_matrix, Solver};
use netchoice::estimate::{
    estimate, export_lp, phase1_min_slack, polyhedron_from_document, EstimationDocument,
    LpObjective,
};
use netchoice::herding::{expected_max_herd_fraction, herd_moments, simulate_urn};
use netchoice::netmodel::{parse_document, serialize_model, validate, ModelDocument};
use netchoice::pricing::{
    best_response, find_equilibrium, profit, share_sensitivities, ParametricModel,
};
use netchoice::{Error, NetworkModel};

use crate::output::{Cell, Report, Table};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_COMPUTATION: u8 = 3;

/// A diagnostic plus the exit code it maps to. `report`, if set, is still
/// emitted before exiting.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub report: Option<Report>,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
            report: None,
        }
    }
}

/// Errors raised while reading input documents.
fn load_error(path: &Path, e: Error) -> Failure {
    Failure::new(EXIT_INVALID, format!("{}: {e}", path.display()))
}

/// Errors raised by a computation on already-valid input.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnknownAgent(_)
            | Error::UnknownChoice(_)
            | Error::Domain(_)
            | Error::TooLarge(_) => EXIT_USAGE,
            Error::Schema(_)
            | Error::NegativeEntry { .. }
            | Error::RowSum { .. }
            | Error::SelfAdoption(_)
            | Error::Duplicate(_)
            | Error::DimensionMismatch { .. }
            | Error::AssumptionViolated { .. }
            | Error::Knowledge(_)
            | Error::Shape(_) => EXIT_INVALID,
            Error::NotConverged { .. }
            | Error::StaleCache(_)
            | Error::WalkTooLong(_)
            | Error::Solver(_) => EXIT_COMPUTATION,
        };
        Failure::new(code, e.to_string())
    }
}

pub type Outcome = std::result::Result<Report, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

pub fn load_document(path: &Path) -> Result<ModelDocument, Failure> {
    parse_document(&read(path)?).map_err(|e| load_error(path, e))
}

pub fn load_model(path: &Path) -> Result<NetworkModel, Failure> {
    NetworkModel::from_document(&load_document(path)?).map_err(|e| load_error(path, e))
}

fn load_observed(path: &Path) -> Result<EstimationDocument, Failure> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn vector_table(name: &str, header: &str, ids: &[String], column: &str, v: &DVector<f64>) -> Table {
    let mut t = Table::new(name, header, &[column]);
    for (id, x) in ids.iter().zip(v.iter()) {
        t.row(id.clone(), vec![Cell::Num(*x)]);
    }
    t
}

/// `p/q` with `q <= max_den` if it matches `x` to within `1e-9`.
pub fn as_fraction(x: f64, max_den: u64) -> Option<String> {
    if !x.is_finite() {
        return None;
    }
    for q in 1..=max_den {
        let p = (x * q as f64).round();
        if (p / q as f64 - x).abs() < 1e-9 {
            return Some(if q == 1 {
                format!("{p}")
            } else {
                format!("{p}/{q}")
            });
        }
    }
    None
}

pub fn validate_cmd(model_path: &Path) -> Outcome {
    let model = load_model(model_path)?;
    let report = validate(&model);
    let mut out = Report::default();
    out.push(Table::summary(
        "validation",
        vec![
            ("collectively_decisive", report.satisfies_assumption1.into()),
            ("spectral_radius", report.spectral_radius_estimate.into()),
            ("decisive_agents", report.decisive_agents.join(" ").into()),
            (
                "unreachable_agents",
                report.unreachable_agents.join(" ").into(),
            ),
        ],
    ));
    out.push(vector_table(
        "row_sum_residuals",
        "agent",
        model.agents(),
        "residual",
        &DVector::from_vec(report.row_sum_residuals.clone()),
    ));
    if report.satisfies_assumption1 {
        Ok(out)
    } else {
        Err(Failure {
            code: EXIT_INVALID,
            message: format!(
                "no path to a decisive agent from: {}",
                report.unreachable_agents.join(", ")
            ),
            report: Some(out),
        })
    }
}

pub fn shares_cmd(model_path: &Path, solver: Solver) -> Outcome {
    let model = load_model(model_path)?;
    let sol = solve_choice_matrix(&model, solver)?;
    let total_w = model.endowment().sum();
    let mut out = Report::default();
    out.push(Table::matrix(
        "pi",
        "agent",
        model.agents(),
        model.choices(),
        &sol.pi,
    ));
    let mut shares = Table::new("choice_shares", "choice", &["share", "fraction"]);
    for (id, s) in model.choices().iter().zip(sol.choice_shares.iter()) {
        let frac = if total_w > 0.0 {
            as_fraction(s / total_w, 1000)
        } else {
            None
        };
        shares.row(
            id.clone(),
            vec![Cell::Num(*s), frac.unwrap_or_else(|| "-".into()).into()],
        );
    }
    out.push(shares);
    out.push(vector_table(
        "decision_shares",
        "agent",
        model.agents(),
        "share",
        &sol.decision_shares,
    ));
    out.push(vector_table(
        "centrality",
        "agent",
        model.agents(),
        "centrality",
        &sol.centrality,
    ));
    out.push(vector_table(
        "decisiveness",
        "agent",
        model.agents(),
        "decisiveness",
        &sol.decisiveness,
    ));
    if sol.ill_conditioned {
        out.push(Table::summary(
            "warnings",
            vec![("ill_conditioned", true.into())],
        ));
    }
    Ok(out)
}

pub struct AmbassadorArgs<'a> {
    pub choice: &'a str,
    pub budget: usize,
    pub lazy: bool,
    pub oracle: bool,
    pub emit_model: Option<&'a Path>,
}

pub fn ambassadors_cmd(model_path: &Path, args: AmbassadorArgs) -> Outcome {
    let model = load_model(model_path)?;
    let j = model.choice_index(args.choice)?;
    let w = model.endowment().clone();
    let plan = greedy_select(&model, j, &w, args.budget, args.lazy)?;
    let mut out = Report::default();
    out.push(Table::summary(
        "plan",
        vec![
            ("target_choice", plan.target_choice.clone().into()),
            ("budget", plan.budget.into()),
            ("lazy", args.lazy.into()),
            ("baseline_share", plan.baseline_share.into()),
            ("final_share", plan.final_share.into()),
        ],
    ));
    let mut picks = Table::new("selected", "rank", &["agent", "marginal_gain"]);
    for (r, (a, g)) in plan.selected.iter().zip(&plan.marginal_gains).enumerate() {
        picks.row((r + 1).to_string(), vec![a.clone().into(), Cell::Num(*g)]);
    }
    out.push(picks);

    if args.oracle {
        let best = brute_force_select(&model, j, &w, args.budget)?;
        let mut greedy_idx: Vec<usize> = plan
            .selected
            .iter()
            .map(|a| model.agent_index(a))
            .collect::<netchoice::Result<_>>()?;
        greedy_idx.sort_unstable();
        let names = |set: &[usize]| {
            set.iter()
                .map(|&i| model.agents()[i].as_str())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let gain = best.value - plan.baseline_share;
        let ratio = if gain > 0.0 {
            (plan.final_share - plan.baseline_share) / gain
        } else {
            1.0
        };
        out.push(Table::summary(
            "oracle",
            vec![
                ("optimal_share", best.value.into()),
                ("optimal_set", names(best.best()).into()),
                ("co_optimal_sets", best.optimal_sets.len().into()),
                ("best_full_size_share", best.best_full_size.into()),
                (
                    "greedy_is_optimal",
                    best.optimal_sets.contains(&greedy_idx).into(),
                ),
                ("gain_ratio", ratio.into()),
            ],
        ));
    }

    if let Some(path) = args.emit_model {
        let idx: Vec<usize> = plan
            .selected
            .iter()
            .map(|a| model.agent_index(a))
            .collect::<netchoice::Result<_>>()?;
        write(path, &serialize_model(&apply_ambassadors(&model, &idx, j)?))?;
    }
    Ok(out)
}

pub fn simulate_cmd(
    model_path: &Path,
    samples: usize,
    seed: u64,
    joint: bool,
    u_choice: Option<&str>,
) -> Outcome {
    let model = load_model(model_path)?;
    let mut out = Report::default();
    if !joint {
        if u_choice.is_some() {
            return Err(Failure::new(EXIT_USAGE, "--u-choice requires --joint"));
        }
        let est = estimate_choice_probs_mc(&model, samples, seed)?;
        let exact = solve_choice_matrix(&model, Solver::Dense)?.pi;
        out.push(Table::summary(
            "walks",
            vec![
                ("samples_per_agent", samples.into()),
                ("seed", Cell::Int(seed)),
            ],
        ));
        out.push(Table::matrix(
            "pi_estimate",
            "agent",
            model.agents(),
            model.choices(),
            &est.pi,
        ));
        out.push(Table::matrix(
            "standard_error",
            "agent",
            model.agents(),
            model.choices(),
            &est.standard_error,
        ));
        out.push(Table::matrix(
            "pi_exact",
            "agent",
            model.agents(),
            model.choices(),
            &exact,
        ));
        return Ok(out);
    }
    let u = u_choice.map(|id| model.choice_index(id)).transpose()?;
    let rep = joint_report(&model, samples, seed, u)?;
    out.push(Table::summary(
        "joint",
        vec![
            ("samples", rep.samples.into()),
            ("seed", Cell::Int(seed)),
            ("accepted", rep.accepted.into()),
            ("rejected_cycle", rep.rejected_cycle.into()),
            ("rejected_u_rule", rep.rejected_u_rule.into()),
            ("rejection_rate", rep.rejection_rate().into()),
            ("max_discrepancy", rep.max_discrepancy.into()),
        ],
    ));
    out.push(Table::matrix(
        "marginals",
        "agent",
        model.agents(),
        model.choices(),
        &rep.marginals,
    ));
    out.push(Table::matrix(
        "closed_form",
        "agent",
        model.agents(),
        model.choices(),
        &rep.closed_form,
    ));
    Ok(out)
}

pub fn herding_moments_cmd(d_max: usize, m_max: usize) -> Outcome {
    let table = herd_moments(d_max, m_max)?;
    let cols: Vec<String> = (0..=m_max).map(|m| format!("m{m}")).collect();
    let mut t = Table::new("herd_moments", "d", &cols);
    for d in 1..=d_max {
        t.row(
            d.to_string(),
            (0..=m_max).map(|m| Cell::Num(table.get(d, m))).collect(),
        );
    }
    let mut out = Report::default();
    out.push(t);
    out.push(Table::summary(
        "recurrences",
        vec![("max_disagreement", table.max_disagreement.into())],
    ));
    Ok(out)
}

pub fn herding_simulate_cmd(bins: usize, total: usize, trials: usize, seed: u64) -> Outcome {
    let s = simulate_urn(bins, total, trials, seed)?;
    let limit = expected_max_herd_fraction(bins)?;
    let mut out = Report::default();
    out.push(Table::summary(
        "urn",
        vec![
            ("bins", s.bins.into()),
            ("total", s.total.into()),
            ("trials", s.trials.into()),
            ("seed", Cell::Int(seed)),
            ("mean_max_fraction", s.mean.into()),
            ("standard_error", s.standard_error.into()),
            ("limit", limit.into()),
        ],
    ));
    let mut q = Table::new("quantiles", "level", &["max_fraction"]);
    for (level, v) in &s.quantiles {
        q.row(format!("{level}"), vec![Cell::Num(*v)]);
    }
    out.push(q);
    Ok(out)
}

pub struct PriceArgs<'a> {
    pub firm: Option<&'a str>,
    pub equilibrium: bool,
    pub tol: f64,
    pub damping: f64,
    pub max_rounds: usize,
    pub at: Option<&'a [f64]>,
}

fn discount_table(pm: &ParametricModel, z: &[f64]) -> Table {
    let choices = pm.base().choices();
    let mut t = Table::new("discounts", "firm", &["z", "lower", "upper", "margin"]);
    for (f, firm) in pm.firms().iter().enumerate() {
        t.row(
            choices[firm.choice].clone(),
            vec![
                z[f].into(),
                firm.lower.into(),
                firm.upper.into(),
                firm.margin.into(),
            ],
        );
    }
    t
}

pub fn price_cmd(model_path: &Path, args: PriceArgs) -> Outcome {
    let doc = load_document(model_path)?;
    let pm = ParametricModel::from_document(&doc).map_err(|e| load_error(model_path, e))?;
    let w = pm.base().endowment().clone();
    let choices = pm.base().choices().to_vec();
    let z0 = match args.at {
        Some(z) if z.len() != pm.firms().len() => {
            return Err(Failure::new(
                EXIT_USAGE,
                format!("--at needs {} values, got {}", pm.firms().len(), z.len()),
            ))
        }
        Some(z) if !pm.in_box(z) => {
            return Err(Failure::new(
                EXIT_USAGE,
                "--at lies outside the discount box",
            ))
        }
        Some(z) => z.to_vec(),
        None => pm.midpoint(),
    };
    let mut out = Report::default();

    if args.equilibrium {
        if args.at.is_some() {
            return Err(Failure::new(
                EXIT_USAGE,
                "--at cannot be combined with --equilibrium",
            ));
        }
        let eq = find_equilibrium(&pm, &w, args.damping, args.tol, args.max_rounds)?;
        out.push(Table::summary(
            "equilibrium",
            vec![
                ("converged", eq.converged.into()),
                ("rounds", eq.rounds.into()),
                ("residual", eq.residual.into()),
                ("damping", args.damping.into()),
            ],
        ));
        out.push(discount_table(&pm, &eq.z));
        let mut profits = Table::new("profits", "firm", &["profit", "share"]);
        let shares = netchoice::choice::choice_shares(&pm.evaluate_model(&eq.z)?, &w)?;
        for (f, firm) in pm.firms().iter().enumerate() {
            profits.row(
                choices[firm.choice].clone(),
                vec![
                    profit(&pm, f, &eq.z, &w).value().into(),
                    shares[firm.choice].into(),
                ],
            );
        }
        out.push(profits);
        let cols: Vec<String> = pm
            .firms()
            .iter()
            .map(|f| choices[f.choice].clone())
            .collect();
        let mut trace = Table::new("trace", "round", &cols);
        for (r, z) in eq.trace.iter().enumerate() {
            trace.row(r.to_string(), z.iter().map(|&v| Cell::Num(v)).collect());
        }
        out.push(trace);
        if !eq.converged {
            return Err(Failure {
                code: EXIT_COMPUTATION,
                message: format!(
                    "equilibrium search stopped after {} rounds, residual {:e}",
                    eq.rounds, eq.residual
                ),
                report: Some(out),
            });
        }
        return Ok(out);
    }

    let Some(id) = args.firm else {
        return Err(Failure::new(
            EXIT_USAGE,
            "price needs --firm ID or --equilibrium",
        ));
    };
    let f = pm
        .firm_index(id)
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let br = best_response(&pm, f, &z0, &w, args.tol)?;
    let mut z_br = z0.clone();
    z_br[f] = br;
    let d = share_sensitivities(&pm, &z0, f, &w)?;
    out.push(Table::summary(
        "best_response",
        vec![
            ("firm", id.into()),
            ("z", br.into()),
            ("profit_at_start", profit(&pm, f, &z0, &w).value().into()),
            (
                "profit_at_best_response",
                profit(&pm, f, &z_br, &w).value().into(),
            ),
        ],
    ));
    out.push(discount_table(&pm, &z0));
    let mut sens = Table::new("sensitivities", "choice", &["share", "first", "second"]);
    for (l, c) in choices.iter().enumerate() {
        sens.row(
            c.clone(),
            vec![d.shares[l].into(), d.first[l].into(), d.second[l].into()],
        );
    }
    out.push(sens);
    Ok(out)
}

pub fn estimate_cmd(observed: &Path, emit_model: Option<&Path>) -> Outcome {
    let doc = load_observed(observed)?;
    let poly = polyhedron_from_document(&doc).map_err(|e| load_error(observed, e))?;
    let (slack, est) = estimate(&poly)?;
    let mut out = Report::default();
    out.push(Table::summary(
        "estimate",
        vec![
            ("min_slack_ratio", slack.objective.into()),
            ("margin", est.margin.into()),
            ("lp_rounds", est.rounds.into()),
            ("converted_rows", est.converted.into()),
            ("rows", poly.rows.len().into()),
        ],
    ));
    let agents = &doc.agents;
    out.push(Table::matrix("p", "agent", agents, agents, &est.p));
    out.push(Table::matrix("q", "agent", agents, &doc.choices, &est.q));
    out.push(Table::matrix(
        "eps_plus",
        "agent",
        agents,
        &doc.choices,
        &slack.eps_plus,
    ));
    out.push(Table::matrix(
        "eps_minus",
        "agent",
        agents,
        &doc.choices,
        &slack.eps_minus,
    ));
    if let Some(path) = emit_model {
        write(path, &serialize_model(&est.to_model(&poly)?))?;
    }
    Ok(out)
}

/// LP text goes straight to the output; there are no tables.
pub fn export_lp_cmd(observed: &Path, max_margin: bool) -> Result<String, Failure> {
    let doc = load_observed(observed)?;
    let poly = polyhedron_from_document(&doc).map_err(|e| load_error(observed, e))?;
    let objective = if max_margin {
        let slack = phase1_min_slack(&poly)?;
        LpObjective::MaxMargin {
            fixed_slack: Some(slack.point),
        }
    } else {
        LpObjective::MinSlack
    };
    Ok(export_lp(&poly, &objective))
}
