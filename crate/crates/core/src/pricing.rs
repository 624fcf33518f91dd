//! Parametric models and price competition.
//!
//! Each firm sells one choice and sets a discount `z_j`. Entries of `[P | Q]`
//! move affinely with the discounts: a firm's own direct-selection
//! probabilities rise, everything else in the row falls by the same total.
//! Shares then vary smoothly with `z`, and each firm's profit
//! `(m_j - z_j) π_j^w(z)` is concave in its own discount.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseLu;
use crate::netmodel::{check_endowment, require_decisive, ModelDocument, NetworkModel};

/// Slack allowed when checking that instantiated entries stay in `[0, 1]`
/// and that sensitivity rows sum to zero.
pub const SHAPE_TOLERANCE: f64 = 1e-12;

/// More firms than this would make the corner check of the feasible box
/// too expensive.
pub const MAX_FIRMS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Firm {
    /// Index of the choice this firm sells.
    pub choice: usize,
    pub margin: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Which entry of row `agent` a sensitivity moves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Entry {
    Direct(usize),
    Adopt(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sensitivity {
    pub firm: usize,
    pub agent: usize,
    pub entry: Entry,
    pub slope: f64,
}

/// Base model plus per-firm affine sensitivities `dQ_f`, `dP_f`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricModel {
    base: NetworkModel,
    firms: Vec<Firm>,
    dq: Vec<DMatrix<f64>>,
    dp: Vec<DMatrix<f64>>,
}

impl ParametricModel {
    /// Builds and checks a parametric model.
    ///
    /// Each firm's own direct-selection slopes must be non-negative, all
    /// other slopes non-positive, each sensitivity row must sum to zero,
    /// and at every corner of the discount box (and its midpoint) the
    /// instantiated model must be valid and collectively decisive.
    pub fn new(
        base: NetworkModel,
        firms: Vec<Firm>,
        sensitivities: Vec<Sensitivity>,
    ) -> Result<Self> {
        let (n, c) = (base.n_agents(), base.n_choices());
        if firms.is_empty() {
            return Err(Error::Schema("at least one firm is required".into()));
        }
        if firms.len() > MAX_FIRMS {
            return Err(Error::Domain(format!(
                "at most {MAX_FIRMS} firms are supported"
            )));
        }
        for (f, firm) in firms.iter().enumerate() {
            if firm.choice >= c {
                return Err(Error::UnknownChoice(format!("#{}", firm.choice)));
            }
            if firms[..f].iter().any(|g| g.choice == firm.choice) {
                return Err(Error::Duplicate(format!(
                    "firm {}",
                    base.choices()[firm.choice]
                )));
            }
            if !(firm.margin > 0.0 && firm.margin.is_finite()) {
                return Err(Error::Domain(format!(
                    "margin must be positive, got {}",
                    firm.margin
                )));
            }
            if !(firm.lower.is_finite() && firm.lower <= firm.upper && firm.upper <= firm.margin) {
                return Err(Error::Domain(format!(
                    "need finite L <= U <= margin, got [{}, {}] with margin {}",
                    firm.lower, firm.upper, firm.margin
                )));
            }
        }

        let mut dq = vec![DMatrix::zeros(n, c); firms.len()];
        let mut dp = vec![DMatrix::zeros(n, n); firms.len()];
        let mut seen = std::collections::HashSet::new();
        for s in &sensitivities {
            if s.firm >= firms.len() {
                return Err(Error::Schema(format!("unknown firm #{}", s.firm)));
            }
            if s.agent >= n {
                return Err(Error::UnknownAgent(format!("#{}", s.agent)));
            }
            if !s.slope.is_finite() {
                return Err(Error::Shape("slopes must be finite".into()));
            }
            let key = (
                s.firm,
                s.agent,
                matches!(s.entry, Entry::Adopt(_)),
                match s.entry {
                    Entry::Direct(l) | Entry::Adopt(l) => l,
                },
            );
            if !seen.insert(key) {
                return Err(Error::Duplicate("sensitivity entry".into()));
            }
            let own = firms[s.firm].choice;
            match s.entry {
                Entry::Direct(l) => {
                    if l >= c {
                        return Err(Error::UnknownChoice(format!("#{l}")));
                    }
                    if (l == own && s.slope < 0.0) || (l != own && s.slope > 0.0) {
                        return Err(Error::Shape(format!(
                            "direct slope for agent {} on {} has the wrong sign",
                            base.agents()[s.agent],
                            base.choices()[l]
                        )));
                    }
                    dq[s.firm][(s.agent, l)] = s.slope;
                }
                Entry::Adopt(k) => {
                    if k >= n {
                        return Err(Error::UnknownAgent(format!("#{k}")));
                    }
                    if k == s.agent {
                        if s.slope != 0.0 {
                            return Err(Error::SelfAdoption(base.agents()[k].clone()));
                        }
                        continue;
                    }
                    if s.slope > 0.0 {
                        return Err(Error::Shape(format!(
                            "adoption slope {} -> {} must be non-positive",
                            base.agents()[s.agent],
                            base.agents()[k]
                        )));
                    }
                    dp[s.firm][(s.agent, k)] = s.slope;
                }
            }
        }
        for f in 0..firms.len() {
            for i in 0..n {
                let sum = dq[f].row(i).sum() + dp[f].row(i).sum();
                let scale = dq[f].row(i).abs().sum() + dp[f].row(i).abs().sum();
                if sum.abs() > SHAPE_TOLERANCE * scale.max(1.0) {
                    return Err(Error::Shape(format!(
                        "sensitivities of agent {} for firm {} sum to {sum}, not zero",
                        base.agents()[i],
                        base.choices()[firms[f].choice]
                    )));
                }
            }
        }

        let pm = Self {
            base,
            firms,
            dq,
            dp,
        };
        let corners = 1usize << pm.firms.len();
        for mask in 0..corners {
            let z: Vec<f64> = pm
                .firms
                .iter()
                .enumerate()
                .map(|(f, firm)| {
                    if mask >> f & 1 == 1 {
                        firm.upper
                    } else {
                        firm.lower
                    }
                })
                .collect();
            pm.evaluate_model(&z)?;
        }
        pm.evaluate_model(&pm.midpoint())?;
        Ok(pm)
    }

    /// Reads the `pricing` block of a model document.
    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let base = NetworkModel::from_document(doc)?;
        let block = doc
            .pricing
            .as_ref()
            .ok_or_else(|| Error::Schema("document has no pricing block".into()))?;
        let firms: Vec<Firm> = block
            .firms
            .iter()
            .map(|f| {
                Ok(Firm {
                    choice: base.choice_index(&f.choice)?,
                    margin: f.margin,
                    lower: f.bounds[0],
                    upper: f.bounds[1],
                })
            })
            .collect::<Result<_>>()?;
        let sens = block
            .sensitivities
            .iter()
            .map(|s| {
                let choice = base.choice_index(&s.firm)?;
                let firm = firms
                    .iter()
                    .position(|f| f.choice == choice)
                    .ok_or_else(|| Error::Schema(format!("{} is not a firm", s.firm)))?;
                let entry = match (&s.choice, &s.adopt) {
                    (Some(l), None) => Entry::Direct(base.choice_index(l)?),
                    (None, Some(k)) => Entry::Adopt(base.agent_index(k)?),
                    _ => {
                        return Err(Error::Schema(
                            "a sensitivity sets exactly one of `choice` or `adopt`".into(),
                        ))
                    }
                };
                Ok(Sensitivity {
                    firm,
                    agent: base.agent_index(&s.agent)?,
                    entry,
                    slope: s.slope,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(base, firms, sens)
    }

    pub fn base(&self) -> &NetworkModel {
        &self.base
    }

    pub fn firms(&self) -> &[Firm] {
        &self.firms
    }

    /// Firm index selling choice `id`.
    pub fn firm_index(&self, id: &str) -> Result<usize> {
        let c = self.base.choice_index(id)?;
        self.firms
            .iter()
            .position(|f| f.choice == c)
            .ok_or_else(|| Error::UnknownChoice(format!("{id} is not a firm")))
    }

    pub fn direct_slopes(&self, firm: usize) -> &DMatrix<f64> {
        &self.dq[firm]
    }

    pub fn adoption_slopes(&self, firm: usize) -> &DMatrix<f64> {
        &self.dp[firm]
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.firms
            .iter()
            .map(|f| 0.5 * (f.lower + f.upper))
            .collect()
    }

    pub fn in_box(&self, z: &[f64]) -> bool {
        z.len() == self.firms.len()
            && self
                .firms
                .iter()
                .zip(z)
                .all(|(f, &v)| v >= f.lower - SHAPE_TOLERANCE && v <= f.upper + SHAPE_TOLERANCE)
    }

    /// `P(z)` and `Q(z)`, without validation.
    fn matrices(&self, z: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut p = self.base.adoption_dense();
        let mut q = self.base.direct().clone();
        for (f, &zf) in z.iter().enumerate() {
            if zf != 0.0 {
                p += &self.dp[f] * zf;
                q += &self.dq[f] * zf;
            }
        }
        (p, q)
    }

    /// Instantiates the model at discounts `z`.
    pub fn evaluate_model(&self, z: &[f64]) -> Result<NetworkModel> {
        if z.len() != self.firms.len() {
            return Err(Error::DimensionMismatch {
                expected: self.firms.len(),
                got: z.len(),
            });
        }
        if !self.in_box(z) {
            return Err(Error::Domain(format!(
                "discounts {z:?} lie outside the feasible box"
            )));
        }
        let (mut p, mut q) = self.matrices(z);
        for v in p.iter_mut().chain(q.iter_mut()) {
            if *v < 0.0 && *v > -SHAPE_TOLERANCE {
                *v = 0.0;
            }
        }
        let m = NetworkModel::from_dense(
            self.base.agents().to_vec(),
            self.base.choices().to_vec(),
            &p,
            q,
            self.base.endowment().clone(),
        )?;
        require_decisive(&m)?;
        Ok(m)
    }
}

/// Free function form of [`ParametricModel::evaluate_model`].
pub fn evaluate_model(pm: &ParametricModel, z: &[f64]) -> Result<NetworkModel> {
    pm.evaluate_model(z)
}

/// Choice shares and their first two derivatives in one firm's discount.
#[derive(Clone, Debug, PartialEq)]
pub struct ShareDerivatives {
    /// `π_l^w(z)` for every choice `l`.
    pub shares: DVector<f64>,
    pub first: DVector<f64>,
    pub second: DVector<f64>,
}

/// `θ(z) = (I - P(z))^{-1}` and `dθ/dz_f = θ dP_f θ`.
pub fn inverse_sensitivity(
    pm: &ParametricModel,
    z: &[f64],
    firm: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = pm.evaluate_model(z)?;
    let theta = DenseLu::new(m.system_matrix())?.inverse();
    let dtheta = &theta * pm.adoption_slopes(firm) * &theta;
    Ok((theta, dtheta))
}

/// Analytic first and second derivatives of every choice share with
/// respect to firm `firm`'s discount, from one factorization.
///
/// With `θ = (I - P)^{-1}`, `G_l = dq_l + dP π_l` and `H_l = dP dπ_l`:
/// `dπ_l = θ G_l` and `d²π_l = dθ G_l + θ H_l`, then weighted by `w`.
pub fn share_sensitivities(
    pm: &ParametricModel,
    z: &[f64],
    firm: usize,
    w: &DVector<f64>,
) -> Result<ShareDerivatives> {
    if firm >= pm.firms.len() {
        return Err(Error::Schema(format!("unknown firm #{firm}")));
    }
    check_endowment(pm.base.n_agents(), w)?;
    let f = &pm.firms[firm];
    if z.len() == pm.firms.len() && !(z[firm] > f.lower && z[firm] < f.upper) {
        return Err(Error::Domain(format!(
            "z = {} is on the boundary of [{}, {}]",
            z[firm], f.lower, f.upper
        )));
    }
    let (theta, dtheta) = inverse_sensitivity(pm, z, firm)?;
    let (_, q) = pm.matrices(z);
    let dp = pm.adoption_slopes(firm);
    let dq = pm.direct_slopes(firm);

    let pi = &theta * &q;
    let g = dq + dp * &pi;
    let dpi = &theta * &g;
    let h = dp * &dpi;
    let d2pi = &dtheta * &g + &theta * &h;
    Ok(ShareDerivatives {
        shares: pi.tr_mul(w),
        first: dpi.tr_mul(w),
        second: d2pi.tr_mul(w),
    })
}

/// Rank-one variation of a single agent `r`'s preferences towards choice
/// `j`: `P(u) = P - u e_r v^T`, `q_j(u) = q_j + u e_r` and
/// `q_l(u) = q_l - u β_l e_r`, with `Σ v + Σ_{l≠j} β_l = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneVariation {
    pub base: NetworkModel,
    pub agent: usize,
    pub choice: usize,
    pub v: DVector<f64>,
    /// Indexed by choice; `beta[choice]` is ignored.
    pub beta: DVector<f64>,
}

impl RankOneVariation {
    pub fn new(
        base: NetworkModel,
        agent: usize,
        choice: usize,
        v: DVector<f64>,
        beta: DVector<f64>,
    ) -> Result<Self> {
        let (n, c) = (base.n_agents(), base.n_choices());
        if agent >= n {
            return Err(Error::UnknownAgent(format!("#{agent}")));
        }
        if choice >= c {
            return Err(Error::UnknownChoice(format!("#{choice}")));
        }
        if v.len() != n || beta.len() != c {
            return Err(Error::Shape(
                "v needs one entry per agent, beta one per choice".into(),
            ));
        }
        if v.iter().chain(beta.iter()).any(|x| *x < 0.0) || v[agent] != 0.0 {
            return Err(Error::Shape(
                "v and beta must be non-negative with v_r = 0".into(),
            ));
        }
        let total = v.sum() + beta.sum() - beta[choice];
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Shape(format!("Σv + Σβ must be 1, got {total}")));
        }
        Ok(Self {
            base,
            agent,
            choice,
            v,
            beta,
        })
    }

    /// Recognizes the rank-one structure in a single firm's sensitivities:
    /// only one agent's row moves, and the firm's own slope normalizes the rest.
    pub fn from_parametric(pm: &ParametricModel, firm: usize) -> Result<(Self, f64)> {
        let dq = pm.direct_slopes(firm);
        let dp = pm.adoption_slopes(firm);
        let rows: Vec<usize> = (0..pm.base.n_agents())
            .filter(|&i| dq.row(i).amax() > 0.0 || dp.row(i).amax() > 0.0)
            .collect();
        let [r] = rows[..] else {
            return Err(Error::Shape(
                "sensitivities must move exactly one agent's row".into(),
            ));
        };
        let j = pm.firms[firm].choice;
        let scale = dq[(r, j)];
        if scale <= 0.0 {
            return Err(Error::Shape("own direct slope must be positive".into()));
        }
        let v = DVector::from_fn(pm.base.n_agents(), |k, _| -dp[(r, k)] / scale);
        let mut beta = DVector::from_fn(pm.base.n_choices(), |l, _| -dq[(r, l)] / scale);
        beta[j] = 0.0;
        Ok((Self::new(pm.base.clone(), r, j, v, beta)?, scale))
    }

    /// The varied model built entry by entry.
    pub fn model_at(&self, u: f64) -> Result<NetworkModel> {
        let mut p = self.base.adoption_dense();
        let mut q = self.base.direct().clone();
        let r = self.agent;
        for k in 0..self.base.n_agents() {
            p[(r, k)] -= u * self.v[k];
        }
        for l in 0..self.base.n_choices() {
            q[(r, l)] += if l == self.choice {
                u
            } else {
                -u * self.beta[l]
            };
        }
        NetworkModel::from_dense(
            self.base.agents().to_vec(),
            self.base.choices().to_vec(),
            &p,
            q,
            self.base.endowment().clone(),
        )
    }

    /// `π_j^w(u) = π_j^w(0) + u c_r (1 - v^T π_j) / (1 + u v^T θ e_r)`.
    pub fn share(&self, u: f64, w: &DVector<f64>) -> Result<f64> {
        check_endowment(self.base.n_agents(), w)?;
        require_decisive(&self.base)?;
        let lu = DenseLu::new(self.base.system_matrix())?;
        let pi = lu.solve(&self.base.direct().column(self.choice).into_owned());
        let c = lu.solve_transpose(w);
        let mut e_r = DVector::zeros(self.base.n_agents());
        e_r[self.agent] = 1.0;
        let col = lu.solve(&e_r);
        let denom = 1.0 + u * self.v.dot(&col);
        if denom <= 0.0 {
            return Err(Error::Domain(format!(
                "u = {u} is outside the validity interval"
            )));
        }
        Ok(w.dot(&pi) + u * c[self.agent] * (1.0 - self.v.dot(&pi)) / denom)
    }
}

/// Closed-form share for a parametric model with a single-agent rank-one
/// sensitivity structure, at discount `u` of firm `firm`.
pub fn affine_single_agent_share(
    pm: &ParametricModel,
    firm: usize,
    u: f64,
    w: &DVector<f64>,
) -> Result<f64> {
    let (variation, scale) = RankOneVariation::from_parametric(pm, firm)?;
    variation.share(scale * u, w)
}

/// Profit, with the `-∞` sentinel wherever shares are undefined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Profit {
    Finite(f64),
    NegInfinity,
}

impl Profit {
    pub fn value(self) -> f64 {
        match self {
            Profit::Finite(v) => v,
            Profit::NegInfinity => f64::NEG_INFINITY,
        }
    }
}

/// `Π_j(z) = (m_j - z_j) π_j^w(z)`.
pub fn profit(pm: &ParametricModel, firm: usize, z: &[f64], w: &DVector<f64>) -> Profit {
    let Some(f) = pm.firms.get(firm) else {
        return Profit::NegInfinity;
    };
    let Ok(model) = pm.evaluate_model(z) else {
        return Profit::NegInfinity;
    };
    let Ok(lu) = DenseLu::new(model.system_matrix()) else {
        return Profit::NegInfinity;
    };
    if w.len() != model.n_agents() {
        return Profit::NegInfinity;
    }
    let pi = lu.solve(&model.direct().column(f.choice).into_owned());
    Profit::Finite((f.margin - z[firm]) * w.dot(&pi))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Firm `firm`'s profit-maximizing discount on `[L, U]` with the other
/// discounts in `z` held fixed: golden-section search to width `tol`,
/// compared against both endpoints.
pub fn best_response(
    pm: &ParametricModel,
    firm: usize,
    z: &[f64],
    w: &DVector<f64>,
    tol: f64,
) -> Result<f64> {
    let f = pm
        .firms
        .get(firm)
        .ok_or_else(|| Error::Schema(format!("unknown firm #{firm}")))?;
    if z.len() != pm.firms.len() {
        return Err(Error::DimensionMismatch {
            expected: pm.firms.len(),
            got: z.len(),
        });
    }
    let mut zz = z.to_vec();
    let mut eval = |x: f64| {
        zz[firm] = x;
        profit(pm, firm, &zz, w).value()
    };
    let (mut a, mut b) = (f.lower, f.upper);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2);
        }
    }
    let mid = 0.5 * (a + b);
    let candidates = [
        (f.lower, eval(f.lower)),
        (mid, eval(mid)),
        (f.upper, eval(f.upper)),
    ];
    let best = candidates
        .iter()
        .fold(candidates[0], |acc, &c| if c.1 > acc.1 { c } else { acc });
    if best.1 == f64::NEG_INFINITY {
        return Err(Error::Domain(
            "profit is undefined for every discount".into(),
        ));
    }
    Ok(best.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Equilibrium {
    pub z: Vec<f64>,
    pub converged: bool,
    /// `max_j |z_j - BR_j(z_{-j})|` at the returned point.
    pub residual: f64,
    pub rounds: usize,
    /// Discounts after every round, starting with the initial point.
    pub trace: Vec<Vec<f64>>,
}

/// Damped Gauss–Seidel best-response iteration from `z = 0` (or the box
/// midpoint if 0 is infeasible). Non-convergence is reported, not raised.
pub fn find_equilibrium(
    pm: &ParametricModel,
    w: &DVector<f64>,
    damping: f64,
    tol: f64,
    max_rounds: usize,
) -> Result<Equilibrium> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::Domain(format!(
            "damping must lie in (0, 1], got {damping}"
        )));
    }
    check_endowment(pm.base.n_agents(), w)?;
    let br_tol = (tol * 1e-3).max(1e-12);
    let zero = vec![0.0; pm.firms.len()];
    let mut z = if pm.in_box(&zero) {
        zero
    } else {
        pm.midpoint()
    };
    let mut trace = vec![z.clone()];

    let residual_at = |z: &[f64]| -> Result<f64> {
        let mut r: f64 = 0.0;
        for f in 0..pm.firms.len() {
            r = r.max((z[f] - best_response(pm, f, z, w, br_tol)?).abs());
        }
        Ok(r)
    };

    let mut residual = residual_at(&z)?;
    let mut rounds = 0;
    while residual >= tol && rounds < max_rounds {
        for f in 0..pm.firms.len() {
            let br = best_response(pm, f, &z, w, br_tol)?;
            z[f] = (1.0 - damping) * z[f] + damping * br;
        }
        rounds += 1;
        trace.push(z.clone());
        residual = residual_at(&z)?;
    }
    Ok(Equilibrium {
        converged: residual < tol,
        z,
        residual,
        rounds,
        trace,
    })
}
