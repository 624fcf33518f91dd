//! Estimating `P` and `Q` from observed individual choice probabilities.
//!
//! The parameters are treated as a point of a polyhedron: the fit equations
//! `π_ij + ε⁺_ij - ε⁻_ij = q_ij + Σ_k p_ik π_kj`, row sums, and whatever the
//! analyst knows about relative reliance, preferences, decisiveness and
//! sparsity. A first LP finds the smallest slacks that make the polyhedron
//! non-empty; a second picks a point as far as possible from its
//! inequality constraints.

mod lp_format;
pub mod simplex;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::NetworkModel;
pub use lp_format::{export_lp, parse_lp, write_lp, LpObjective, ParsedLp, ParsedRow};
use simplex::{simplex_solve, Constraint, LinearProgram, LpStatus, Sense};

/// Ratio denominator used for cells observed with probability zero.
pub const PI_FLOOR: f64 = 1e-9;

/// Observed rows must sum to one within this tolerance.
pub const OBSERVED_TOLERANCE: f64 = 1e-9;

/// A phase-two margin above this counts as strictly positive.
pub const MARGIN_TOLERANCE: f64 = 1e-9;

/// Where a constraint row comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Fit,
    RowSum,
    GroupImportance,
    PreferenceRatio,
    Decisiveness,
    Sparsity,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Fit => "fit",
            Provenance::RowSum => "rowsum",
            Provenance::GroupImportance => "group_importance",
            Provenance::PreferenceRatio => "preference_ratio",
            Provenance::Decisiveness => "decisiveness",
            Provenance::Sparsity => "sparsity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtLeast,
    AtMost,
}

/// Analyst knowledge about one agent, by agent and choice id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Knowledge {
    /// `Σ_{k∈S1} p_ik ≥ K Σ_{k∈S2} p_ik`.
    GroupImportance {
        agent: String,
        s1: Vec<String>,
        s2: Vec<String>,
        k: f64,
    },
    /// `(K - Δ) q_{i,j2} ≤ q_{i,j1} ≤ (K + Δ) q_{i,j2}`; an equality when `Δ = 0`.
    PreferenceRatio {
        agent: String,
        preferred: String,
        other: String,
        k: f64,
        #[serde(default)]
        delta: f64,
    },
    /// `Σ_k p_ik ≥ K Σ_j q_ij` (`at_least`) or `≤` (`at_most`).
    Decisiveness {
        agent: String,
        k: f64,
        relation: Relation,
    },
    /// `p_ik = 0`: agent never adopts `source`.
    Sparsity { agent: String, source: String },
}

/// Observed probabilities plus knowledge, as read from disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationDocument {
    pub agents: Vec<String>,
    pub choices: Vec<String>,
    /// One row per agent, one column per choice.
    pub observed: Vec<Vec<f64>>,
    #[serde(default)]
    pub knowledge: Vec<Knowledge>,
}

/// A variable of the estimation polyhedron.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    P(usize, usize),
    Q(usize, usize),
    EpsPlus(usize, usize),
    EpsMinus(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub provenance: Provenance,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Linear system over `p_ik (i ≠ k)`, `q_ij`, `ε⁺_ij`, `ε⁻_ij`, every
/// variable in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationPolyhedron {
    pub agents: Vec<String>,
    pub choices: Vec<String>,
    pub observed: DMatrix<f64>,
    pub rows: Vec<Row>,
}

impl EstimationPolyhedron {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_choices(&self) -> usize {
        self.choices.len()
    }

    pub fn n_vars(&self) -> usize {
        let (n, c) = (self.n_agents(), self.n_choices());
        n * (n - 1) + 3 * n * c
    }

    /// Column of a variable. Layout: p row-major skipping the diagonal,
    /// then q, ε⁺, ε⁻, each row-major.
    pub fn index(&self, v: Var) -> usize {
        let (n, c) = (self.n_agents(), self.n_choices());
        let np = n * (n - 1);
        match v {
            Var::P(i, k) => {
                debug_assert!(i != k);
                i * (n - 1) + if k > i { k - 1 } else { k }
            }
            Var::Q(i, j) => np + i * c + j,
            Var::EpsPlus(i, j) => np + n * c + i * c + j,
            Var::EpsMinus(i, j) => np + 2 * n * c + i * c + j,
        }
    }

    pub fn var(&self, idx: usize) -> Var {
        let (n, c) = (self.n_agents(), self.n_choices());
        let np = n * (n - 1);
        if idx < np {
            let (i, r) = (idx / (n - 1), idx % (n - 1));
            return Var::P(i, if r >= i { r + 1 } else { r });
        }
        let rest = idx - np;
        let (block, cell) = (rest / (n * c), rest % (n * c));
        let (i, j) = (cell / c, cell % c);
        match block {
            0 => Var::Q(i, j),
            1 => Var::EpsPlus(i, j),
            _ => Var::EpsMinus(i, j),
        }
    }

    /// `p_i_k`, `q_i_j`, `epsp_i_j`, `epsm_i_j` with 0-based indices.
    pub fn var_name(&self, idx: usize) -> String {
        match self.var(idx) {
            Var::P(i, k) => format!("p_{i}_{k}"),
            Var::Q(i, j) => format!("q_{i}_{j}"),
            Var::EpsPlus(i, j) => format!("epsp_{i}_{j}"),
            Var::EpsMinus(i, j) => format!("epsm_{i}_{j}"),
        }
    }

    /// Variables pinned to zero by sparsity rows.
    pub fn pinned(&self) -> Vec<bool> {
        let mut pinned = vec![false; self.n_vars()];
        for r in &self.rows {
            if r.provenance == Provenance::Sparsity {
                pinned[r.coeffs[0].0] = true;
            }
        }
        pinned
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = x.iter().map(|&v| (-v).max(v - 1.0)).fold(0.0, f64::max);
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match r.sense {
                Sense::Le => lhs - r.rhs,
                Sense::Ge => r.rhs - lhs,
                Sense::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// `{provenance}_{k}`, numbered within each provenance.
    pub fn row_names(&self) -> Vec<String> {
        let mut seen: std::collections::HashMap<Provenance, usize> = Default::default();
        self.rows
            .iter()
            .map(|r| {
                let k = seen.entry(r.provenance).or_default();
                *k += 1;
                format!("{}_{}", r.provenance.tag(), *k - 1)
            })
            .collect()
    }

    /// The point `q = Π`, `p = 0`, `ε = 0`.
    pub fn trivial_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_vars()];
        for i in 0..self.n_agents() {
            for j in 0..self.n_choices() {
                x[self.index(Var::Q(i, j))] = self.observed[(i, j)];
            }
        }
        x
    }
}

fn lookup(ids: &[String], id: &str, agent: bool) -> Result<usize> {
    ids.iter().position(|a| a == id).ok_or_else(|| {
        if agent {
            Error::UnknownAgent(id.into())
        } else {
            Error::UnknownChoice(id.into())
        }
    })
}

/// Builds the polyhedron from the observed matrix and knowledge items.
pub fn build_polyhedron(
    agents: Vec<String>,
    choices: Vec<String>,
    observed: DMatrix<f64>,
    knowledge: &[Knowledge],
) -> Result<EstimationPolyhedron> {
    let (n, c) = (agents.len(), choices.len());
    if n == 0 || c == 0 {
        return Err(Error::Schema(
            "need at least one agent and one choice".into(),
        ));
    }
    if observed.nrows() != n || observed.ncols() != c {
        return Err(Error::DimensionMismatch {
            expected: n * c,
            got: observed.nrows() * observed.ncols(),
        });
    }
    for i in 0..n {
        if let Some(&v) = observed
            .row(i)
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::NegativeEntry {
                what: format!("observed probability of {}", agents[i]),
                value: v,
            });
        }
        let s = observed.row(i).sum();
        if (s - 1.0).abs() > OBSERVED_TOLERANCE {
            return Err(Error::RowSum {
                agent: agents[i].clone(),
                sum: s,
            });
        }
    }

    let mut poly = EstimationPolyhedron {
        agents,
        choices,
        observed,
        rows: Vec::new(),
    };
    let mut rows = Vec::new();

    // π_ij + ε⁺ - ε⁻ = q_ij + Σ_k p_ik π_kj
    for i in 0..n {
        for j in 0..c {
            let mut coeffs = vec![(poly.index(Var::Q(i, j)), 1.0)];
            for k in (0..n).filter(|&k| k != i) {
                let pk = poly.observed[(k, j)];
                if pk != 0.0 {
                    coeffs.push((poly.index(Var::P(i, k)), pk));
                }
            }
            coeffs.push((poly.index(Var::EpsPlus(i, j)), -1.0));
            coeffs.push((poly.index(Var::EpsMinus(i, j)), 1.0));
            coeffs.sort_by_key(|e| e.0);
            rows.push(Row {
                provenance: Provenance::Fit,
                coeffs,
                sense: Sense::Eq,
                rhs: poly.observed[(i, j)],
            });
        }
    }
    for i in 0..n {
        let mut coeffs: Vec<(usize, f64)> = (0..n)
            .filter(|&k| k != i)
            .map(|k| (poly.index(Var::P(i, k)), 1.0))
            .chain((0..c).map(|j| (poly.index(Var::Q(i, j)), 1.0)))
            .collect();
        coeffs.sort_by_key(|e| e.0);
        rows.push(Row {
            provenance: Provenance::RowSum,
            coeffs,
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }

    for item in knowledge {
        rows.extend(knowledge_rows(&poly, item)?);
    }
    poly.rows = rows;
    Ok(poly)
}

/// Builds the polyhedron from a parsed document.
pub fn polyhedron_from_document(doc: &EstimationDocument) -> Result<EstimationPolyhedron> {
    let n = doc.agents.len();
    let c = doc.choices.len();
    if doc.observed.len() != n || doc.observed.iter().any(|r| r.len() != c) {
        return Err(Error::Schema(format!(
            "observed must be a {n} x {c} matrix"
        )));
    }
    let observed = DMatrix::from_fn(n, c, |i, j| doc.observed[i][j]);
    build_polyhedron(
        doc.agents.clone(),
        doc.choices.clone(),
        observed,
        &doc.knowledge,
    )
}

fn knowledge_rows(poly: &EstimationPolyhedron, item: &Knowledge) -> Result<Vec<Row>> {
    let agent = |id: &str| lookup(&poly.agents, id, true);
    let choice = |id: &str| lookup(&poly.choices, id, false);
    let bad = |msg: String| Err(Error::Knowledge(msg));
    let finite = |k: f64, what: &str| -> Result<()> {
        if k.is_finite() {
            Ok(())
        } else {
            Err(Error::Knowledge(format!("{what} must be finite")))
        }
    };
    Ok(match item {
        Knowledge::GroupImportance {
            agent: a,
            s1,
            s2,
            k,
        } => {
            finite(*k, "K")?;
            let i = agent(a)?;
            let s1: Vec<usize> = s1.iter().map(|x| agent(x)).collect::<Result<_>>()?;
            let s2: Vec<usize> = s2.iter().map(|x| agent(x)).collect::<Result<_>>()?;
            if s1.iter().any(|x| s2.contains(x)) {
                return bad("S1 and S2 must be disjoint".into());
            }
            if s1.contains(&i) || s2.contains(&i) {
                return bad(format!("agent {a} cannot appear in its own groups"));
            }
            if s1.is_empty() && s2.is_empty() {
                return bad("both groups are empty".into());
            }
            let mut coeffs: Vec<(usize, f64)> = s1
                .iter()
                .map(|&k| (poly.index(Var::P(i, k)), 1.0))
                .chain(s2.iter().map(|&k2| (poly.index(Var::P(i, k2)), -k)))
                .collect();
            coeffs.sort_by_key(|e| e.0);
            coeffs.dedup_by(|x, y| {
                let same = x.0 == y.0;
                if same {
                    y.1 += x.1;
                }
                same
            });
            vec![Row {
                provenance: Provenance::GroupImportance,
                coeffs,
                sense: Sense::Ge,
                rhs: 0.0,
            }]
        }
        Knowledge::PreferenceRatio {
            agent: a,
            preferred,
            other,
            k,
            delta,
        } => {
            finite(*k, "K")?;
            finite(*delta, "delta")?;
            if *delta < 0.0 {
                return bad("delta must be non-negative".into());
            }
            let i = agent(a)?;
            let (j1, j2) = (choice(preferred)?, choice(other)?);
            if j1 == j2 {
                return bad("preference ratio needs two different choices".into());
            }
            let (q1, q2) = (poly.index(Var::Q(i, j1)), poly.index(Var::Q(i, j2)));
            let row = |factor: f64, sense| {
                let mut coeffs = vec![(q1, 1.0), (q2, -factor)];
                coeffs.sort_by_key(|e| e.0);
                Row {
                    provenance: Provenance::PreferenceRatio,
                    coeffs,
                    sense,
                    rhs: 0.0,
                }
            };
            if *delta == 0.0 {
                vec![row(*k, Sense::Eq)]
            } else {
                vec![row(k - delta, Sense::Ge), row(k + delta, Sense::Le)]
            }
        }
        Knowledge::Decisiveness {
            agent: a,
            k,
            relation,
        } => {
            finite(*k, "K")?;
            let i = agent(a)?;
            let n = poly.n_agents();
            let mut coeffs: Vec<(usize, f64)> = (0..n)
                .filter(|&x| x != i)
                .map(|x| (poly.index(Var::P(i, x)), 1.0))
                .chain((0..poly.n_choices()).map(|j| (poly.index(Var::Q(i, j)), -k)))
                .collect();
            coeffs.sort_by_key(|e| e.0);
            vec![Row {
                provenance: Provenance::Decisiveness,
                coeffs,
                sense: match relation {
                    Relation::AtLeast => Sense::Ge,
                    Relation::AtMost => Sense::Le,
                },
                rhs: 0.0,
            }]
        }
        Knowledge::Sparsity { agent: a, source } => {
            let (i, k) = (agent(a)?, agent(source)?);
            if i == k {
                return bad(format!("p_ii is always zero (agent {a})"));
            }
            vec![Row {
                provenance: Provenance::Sparsity,
                coeffs: vec![(poly.index(Var::P(i, k)), 1.0)],
                sense: Sense::Eq,
                rhs: 0.0,
            }]
        }
    })
}

fn to_constraints(rows: &[Row]) -> Vec<Constraint> {
    rows.iter()
        .map(|r| Constraint {
            coeffs: r.coeffs.clone(),
            sense: r.sense,
            rhs: r.rhs,
        })
        .collect()
}

fn solver_error(status: &LpStatus, phase: &str) -> Error {
    Error::Solver(format!("{phase}: {status:?}"))
}

/// The minimum-slack LP: every polyhedron variable plus `t` (last column),
/// minimizing `t` subject to `ε⁺_ij + ε⁻_ij ≤ t · max(π_ij, π_floor)`.
pub fn phase1_program(poly: &EstimationPolyhedron) -> LinearProgram {
    let nv = poly.n_vars();
    let t = nv;
    let mut rows = to_constraints(&poly.rows);
    for i in 0..poly.n_agents() {
        for j in 0..poly.n_choices() {
            let denom = poly.observed[(i, j)].max(PI_FLOOR);
            rows.push(Constraint {
                coeffs: vec![
                    (poly.index(Var::EpsPlus(i, j)), 1.0),
                    (poly.index(Var::EpsMinus(i, j)), 1.0),
                    (t, -denom),
                ],
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
    }
    // t needs no upper bound: it is minimized and bounded below by zero.
    let mut upper = vec![Some(1.0); nv];
    upper.push(None);
    LinearProgram {
        n_vars: nv + 1,
        upper,
        rows,
        objective: vec![(t, 1.0)],
        maximize: false,
    }
}

/// Row names matching [`phase1_program`].
pub fn phase1_row_names(poly: &EstimationPolyhedron) -> Vec<String> {
    let mut names = poly.row_names();
    for i in 0..poly.n_agents() {
        for j in 0..poly.n_choices() {
            names.push(format!("ratio_{i}_{j}"));
        }
    }
    names
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlackSolution {
    /// Optimal largest ratio `(ε⁺ + ε⁻) / π`.
    pub objective: f64,
    pub eps_plus: DMatrix<f64>,
    pub eps_minus: DMatrix<f64>,
    /// Full phase-one point over the polyhedron variables.
    pub point: Vec<f64>,
}

/// Smallest slacks (in the largest-ratio sense) that make the polyhedron non-empty.
pub fn phase1_min_slack(poly: &EstimationPolyhedron) -> Result<SlackSolution> {
    let sol = simplex_solve(&phase1_program(poly));
    if sol.status != LpStatus::Optimal {
        return Err(solver_error(&sol.status, "minimum-slack problem"));
    }
    let (n, c) = (poly.n_agents(), poly.n_choices());
    let point = sol.x[..poly.n_vars()].to_vec();
    Ok(SlackSolution {
        objective: sol.value,
        eps_plus: DMatrix::from_fn(n, c, |i, j| point[poly.index(Var::EpsPlus(i, j))]),
        eps_minus: DMatrix::from_fn(n, c, |i, j| point[poly.index(Var::EpsMinus(i, j))]),
        point,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// Smallest distance to any remaining inequality at the returned point.
    pub margin: f64,
    /// Number of LPs solved.
    pub rounds: usize,
    /// Inequalities turned into equalities along the way.
    pub converted: usize,
    /// Full point over the polyhedron variables (slacks fixed).
    pub point: Vec<f64>,
}

impl Estimate {
    /// The estimate as a model with unit endowments.
    pub fn to_model(&self, poly: &EstimationPolyhedron) -> Result<NetworkModel> {
        let n = poly.n_agents();
        NetworkModel::from_dense(
            poly.agents.clone(),
            poly.choices.clone(),
            &self.p,
            self.q.clone(),
            DVector::from_element(n, 1.0),
        )
    }
}

type NamedRows = Vec<(String, Constraint)>;

/// Splits the rows for the max-margin problem: equalities (including fixed
/// slacks when given) and inequalities (knowledge rows plus non-negativity
/// of every `p` and `q` not pinned by sparsity).
fn margin_rows(poly: &EstimationPolyhedron, fixed_slack: Option<&[f64]>) -> (NamedRows, NamedRows) {
    let names = poly.row_names();
    let mut equalities = Vec::new();
    let mut inequalities = Vec::new();
    for (r, name) in poly.rows.iter().zip(names) {
        let con = Constraint {
            coeffs: r.coeffs.clone(),
            sense: r.sense,
            rhs: r.rhs,
        };
        if r.sense == Sense::Eq {
            equalities.push((name, con));
        } else {
            inequalities.push((name, con));
        }
    }
    let pinned = poly.pinned();
    for (idx, pin) in pinned.iter().enumerate() {
        match poly.var(idx) {
            Var::P(..) | Var::Q(..) if !pin => inequalities.push((
                format!("nonneg_{}", poly.var_name(idx)),
                Constraint {
                    coeffs: vec![(idx, 1.0)],
                    sense: Sense::Ge,
                    rhs: 0.0,
                },
            )),
            Var::EpsPlus(..) | Var::EpsMinus(..) => {
                if let Some(x) = fixed_slack {
                    equalities.push((
                        format!("fixed_{}", poly.var_name(idx)),
                        Constraint {
                            coeffs: vec![(idx, 1.0)],
                            sense: Sense::Eq,
                            rhs: x[idx],
                        },
                    ));
                }
            }
            _ => {}
        }
    }
    (equalities, inequalities)
}

fn margin_lp(
    nv: usize,
    equalities: &NamedRows,
    inequalities: &NamedRows,
) -> (LinearProgram, Vec<String>) {
    let s = nv;
    let mut rows: Vec<Constraint> = equalities.iter().map(|(_, c)| c.clone()).collect();
    let mut names: Vec<String> = equalities.iter().map(|(n, _)| n.clone()).collect();
    for (name, con) in inequalities {
        let norm = con.coeffs.iter().map(|(_, a)| a * a).sum::<f64>().sqrt();
        let mut coeffs = con.coeffs.clone();
        // a^T x - s |a| ≥ b, or a^T x + s |a| ≤ b.
        coeffs.push((s, if con.sense == Sense::Ge { -norm } else { norm }));
        rows.push(Constraint {
            coeffs,
            sense: con.sense,
            rhs: con.rhs,
        });
        names.push(name.clone());
    }
    let lp = LinearProgram {
        n_vars: nv + 1,
        upper: vec![Some(1.0); nv + 1],
        rows,
        objective: vec![(s, 1.0)],
        maximize: true,
    };
    (lp, names)
}

/// The first max-margin LP (polyhedron variables plus `s`, last column) and
/// its row names. Slacks are pinned when `fixed_slack` is given.
pub fn margin_program(
    poly: &EstimationPolyhedron,
    fixed_slack: Option<&[f64]>,
) -> (LinearProgram, Vec<String>) {
    let (eq, ineq) = margin_rows(poly, fixed_slack);
    margin_lp(poly.n_vars(), &eq, &ineq)
}

/// Relative-interior point of the polyhedron with slacks fixed.
///
/// Maximizes the smallest normalized distance `s` to every inequality
/// (knowledge rows plus non-negativity of unpinned `p` and `q`). If the
/// optimum is `s = 0`, the inequalities tight there are made equalities and
/// the problem is solved again, until `s > 0` or none remain.
pub fn interior_point_estimate(
    poly: &EstimationPolyhedron,
    slack: &SlackSolution,
) -> Result<Estimate> {
    let nv = poly.n_vars();
    let (mut equalities, mut inequalities) = margin_rows(poly, Some(&slack.point));
    let mut span = RowSpan::new(nv);
    for (_, con) in &equalities {
        span.insert(&con.coeffs);
    }
    let max_rounds = inequalities.len() + 1;
    let mut rounds = 0;
    let mut converted = 0;
    loop {
        // Rows constant on the affine hull of the equalities have no plane to keep away from.
        inequalities.retain(|(_, con)| !span.contains(&con.coeffs));
        rounds += 1;
        if rounds > max_rounds {
            return Err(Error::Solver(
                "equality conversion did not terminate".into(),
            ));
        }
        let (lp, _) = if inequalities.is_empty() {
            let (mut lp, names) = margin_lp(nv, &equalities, &inequalities);
            lp.objective.clear();
            (lp, names)
        } else {
            margin_lp(nv, &equalities, &inequalities)
        };
        let sol = simplex_solve(&lp);
        if sol.status != LpStatus::Optimal {
            return Err(solver_error(&sol.status, "interior-point problem"));
        }
        let x = &sol.x[..nv];
        if inequalities.is_empty() {
            return Ok(finish(poly, x, 0.0, rounds, converted));
        }
        let margin = sol.value;
        if margin > MARGIN_TOLERANCE {
            return Ok(finish(poly, x, margin, rounds, converted));
        }
        let (tight, loose): (NamedRows, NamedRows) =
            inequalities.into_iter().partition(|(_, con)| {
                let lhs: f64 = con.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
                (lhs - con.rhs).abs() <= MARGIN_TOLERANCE
            });
        if tight.is_empty() {
            return Ok(finish(poly, x, 0.0, rounds, converted));
        }
        converted += tight.len();
        for (name, mut con) in tight {
            span.insert(&con.coeffs);
            con.sense = Sense::Eq;
            equalities.push((name, con));
        }
        inequalities = loose;
    }
}

/// Row space of a growing set of sparse rows, kept in echelon form.
struct RowSpan {
    dim: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

impl RowSpan {
    const TOLERANCE: f64 = 1e-9;

    fn new(dim: usize) -> Self {
        RowSpan {
            dim,
            rows: Vec::new(),
        }
    }

    fn reduce(&self, coeffs: &[(usize, f64)]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(j, a) in coeffs {
            v[j] += a;
        }
        for (pivot, row) in &self.rows {
            let f = v[*pivot];
            if f != 0.0 {
                for (x, r) in v.iter_mut().zip(row) {
                    *x -= f * r;
                }
            }
        }
        v
    }

    fn contains(&self, coeffs: &[(usize, f64)]) -> bool {
        let scale = coeffs.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
        let v = self.reduce(coeffs);
        v.iter()
            .all(|x| x.abs() <= Self::TOLERANCE * scale.max(1.0))
    }

    fn insert(&mut self, coeffs: &[(usize, f64)]) {
        let mut v = self.reduce(coeffs);
        let (pivot, big) =
            v.iter().enumerate().fold(
                (0, 0.0),
                |acc, (j, x)| if x.abs() > acc.1 { (j, x.abs()) } else { acc },
            );
        if big <= Self::TOLERANCE {
            return;
        }
        let p = v[pivot];
        v.iter_mut().for_each(|x| *x /= p);
        for (_, row) in self.rows.iter_mut() {
            let f = row[pivot];
            if f != 0.0 {
                for (x, r) in row.iter_mut().zip(&v) {
                    *x -= f * r;
                }
            }
        }
        self.rows.push((pivot, v));
    }
}

fn finish(
    poly: &EstimationPolyhedron,
    x: &[f64],
    margin: f64,
    rounds: usize,
    converted: usize,
) -> Estimate {
    let (n, c) = (poly.n_agents(), poly.n_choices());
    let p = DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            0.0
        } else {
            x[poly.index(Var::P(i, k))]
        }
    });
    let q = DMatrix::from_fn(n, c, |i, j| x[poly.index(Var::Q(i, j))]);
    Estimate {
        p,
        q,
        margin,
        rounds,
        converted,
        point: x.to_vec(),
    }
}

/// Phase one followed by the interior-point estimate.
pub fn estimate(poly: &EstimationPolyhedron) -> Result<(SlackSolution, Estimate)> {
    let slack = phase1_min_slack(poly)?;
    let est = interior_point_estimate(poly, &slack)?;
    Ok((slack, est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{solve_choice_matrix, Solver};
    use crate::fixtures::influential_agent as example2;

    fn example2_observed() -> EstimationPolyhedron {
        let m = example2();
        let pi = solve_choice_matrix(&m, Solver::Dense).unwrap().pi;
        build_polyhedron(m.agents().to_vec(), m.choices().to_vec(), pi, &[]).unwrap()
    }

    #[test]
    fn variable_layout_round_trips() {
        let poly = example2_observed();
        assert_eq!(poly.n_vars(), 6 + 3 * 6);
        for idx in 0..poly.n_vars() {
            assert_eq!(poly.index(poly.var(idx)), idx);
        }
        assert_eq!(poly.var_name(0), "p_0_1");
        assert_eq!(poly.var_name(2), "p_1_0");
        assert_eq!(poly.var_name(6), "q_0_0");
    }

    #[test]
    fn trivial_point_is_feasible() {
        let poly = example2_observed();
        assert!(poly.max_violation(&poly.trivial_point()) < 1e-12);
        let slack = phase1_min_slack(&poly).unwrap();
        assert!(slack.objective.abs() < 1e-12);
    }

    #[test]
    fn knowledge_rows() {
        let m = example2();
        let pi = solve_choice_matrix(&m, Solver::Dense).unwrap().pi;
        let poly = build_polyhedron(
            m.agents().to_vec(),
            m.choices().to_vec(),
            pi,
            &[
                Knowledge::Sparsity {
                    agent: "1".into(),
                    source: "2".into(),
                },
                Knowledge::PreferenceRatio {
                    agent: "1".into(),
                    preferred: "A".into(),
                    other: "B".into(),
                    k: 2.0,
                    delta: 0.0,
                },
                Knowledge::PreferenceRatio {
                    agent: "2".into(),
                    preferred: "B".into(),
                    other: "A".into(),
                    k: 2.0,
                    delta: 0.5,
                },
            ],
        )
        .unwrap();
        let count = |p| poly.rows.iter().filter(|r| r.provenance == p).count();
        assert_eq!(count(Provenance::Fit), 6);
        assert_eq!(count(Provenance::RowSum), 3);
        assert_eq!(count(Provenance::Sparsity), 1);
        assert_eq!(count(Provenance::PreferenceRatio), 3);
        let eq = poly
            .rows
            .iter()
            .find(|r| r.provenance == Provenance::PreferenceRatio)
            .unwrap();
        assert_eq!(eq.sense, Sense::Eq);
        assert_eq!(
            eq.coeffs,
            vec![
                (poly.index(Var::Q(0, 0)), 1.0),
                (poly.index(Var::Q(0, 1)), -2.0)
            ]
        );
    }

    #[test]
    fn malformed_input() {
        let pi = DMatrix::from_row_slice(1, 2, &[0.5, 0.4]);
        assert!(matches!(
            build_polyhedron(vec!["a".into()], vec!["x".into(), "y".into()], pi, &[]),
            Err(Error::RowSum { .. })
        ));
        let pi = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let err = build_polyhedron(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            pi,
            &[Knowledge::Sparsity {
                agent: "a".into(),
                source: "a".into(),
            }],
        );
        assert!(matches!(err, Err(Error::Knowledge(_))));
    }

    #[test]
    fn inconsistent_knowledge_needs_slack() {
        // Agent 2 relies on nobody and splits evenly, but is observed at (0.4, 0.6).
        let m = example2();
        let pi = solve_choice_matrix(&m, Solver::Dense).unwrap().pi;
        let know = [
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
        let poly = build_polyhedron(m.agents().to_vec(), m.choices().to_vec(), pi, &know).unwrap();
        let slack = phase1_min_slack(&poly).unwrap();
        assert!((slack.objective - 0.25).abs() < 1e-9, "{}", slack.objective);
        let est = interior_point_estimate(&poly, &slack).unwrap();
        assert!((est.q[(1, 0)] - 0.5).abs() < 1e-9);
        assert!(poly.max_violation(&est.point) < 1e-9);
    }

    #[test]
    fn single_point_polyhedron() {
        let poly = build_polyhedron(
            vec!["a".into()],
            vec!["x".into()],
            DMatrix::from_element(1, 1, 1.0),
            &[],
        )
        .unwrap();
        let (slack, est) = estimate(&poly).unwrap();
        assert_eq!(slack.objective, 0.0);
        assert_eq!(est.q[(0, 0)], 1.0);
        assert_eq!(est.margin, 0.0);
    }
}
