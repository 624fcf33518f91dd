//! Dense two-phase primal simplex with Bland's rule.
//!
//! Meant for desk-scale problems (a few thousand variables at most). All
//! variables are non-negative; finite upper bounds become explicit rows.

use serde::Serialize;

/// Column entries at or below this magnitude are never used as pivots.
pub const PIVOT_TOLERANCE: f64 = 1e-11;

const COST_TOLERANCE: f64 = 1e-10;
const FEASIBILITY_TOLERANCE: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `max`/`min c^T x` subject to rows and `0 ≤ x ≤ upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub n_vars: usize,
    /// `None` means unbounded above.
    pub upper: Vec<Option<f64>>,
    pub rows: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
    pub maximize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// No usable pivot above [`PIVOT_TOLERANCE`], or the pivot budget ran out.
    Breakdown {
        detail: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

struct Tableau {
    /// `m` constraint rows followed by the objective row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Breakdown(String),
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes the objective row over columns `0..allowed`.
    fn run(&mut self, allowed: usize) -> Step {
        let m = self.m();
        let rhs = self.cols;
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Step::Breakdown(format!("pivot budget of {MAX_PIVOTS} exhausted"));
            }
            // Bland: lowest-index column with negative reduced cost.
            let Some(c) = (0..allowed).find(|&j| self.t[m][j] < -COST_TOLERANCE) else {
                return Step::Optimal;
            };
            let mut best: Option<(usize, f64)> = None;
            let mut tiny = false;
            for r in 0..m {
                let a = self.t[r][c];
                if a > PIVOT_TOLERANCE {
                    let ratio = self.t[r][rhs] / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-12
                                || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                } else if a > 0.0 {
                    tiny = true;
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None if tiny => {
                    return Step::Breakdown(format!(
                        "only pivots below {PIVOT_TOLERANCE} in column {c}"
                    ))
                }
                None => return Step::Unbounded,
            }
        }
    }
}

/// Solves `lp` by the two-phase method.
pub fn simplex_solve(lp: &LinearProgram) -> LpSolution {
    let n = lp.n_vars;
    let mut rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = lp
        .rows
        .iter()
        .map(|r| (r.coeffs.clone(), r.sense, r.rhs))
        .collect();
    for (j, u) in lp.upper.iter().enumerate() {
        if let Some(u) = u {
            rows.push((vec![(j, 1.0)], Sense::Le, *u));
        }
    }
    // Non-negative right-hand sides.
    for r in rows.iter_mut() {
        if r.2 < 0.0 {
            r.0.iter_mut().for_each(|(_, a)| *a = -*a);
            r.2 = -r.2;
            r.1 = match r.1 {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = n + n_slack + n_art;
    let mut t = vec![vec![0.0; cols + 1]; m + 1];
    let mut basis = vec![0; m];
    let (mut s, mut a) = (n, n + n_slack);
    for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
        for &(j, v) in coeffs {
            t[i][j] += v;
        }
        t[i][cols] = *rhs;
        match sense {
            Sense::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
            Sense::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }
    let first_art = n + n_slack;

    // Phase 1: minimize the sum of artificials.
    for i in 0..m {
        if basis[i] >= first_art {
            for j in 0..=cols {
                if j < first_art || j == cols {
                    t[m][j] -= t[i][j];
                }
            }
        }
    }
    let mut tab = Tableau {
        t,
        basis,
        cols,
        pivots: 0,
    };
    let fail = |status: LpStatus, pivots: usize| LpSolution {
        status,
        x: vec![0.0; n],
        value: f64::NAN,
        pivots,
    };
    match tab.run(cols) {
        Step::Optimal => {}
        Step::Unbounded => {
            return fail(
                LpStatus::Breakdown {
                    detail: "phase-one objective unbounded".into(),
                },
                tab.pivots,
            )
        }
        Step::Breakdown(detail) => return fail(LpStatus::Breakdown { detail }, tab.pivots),
    }
    let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
    if -tab.t[m][cols] > FEASIBILITY_TOLERANCE * scale {
        return fail(LpStatus::Infeasible, tab.pivots);
    }

    // Drive artificials out of the basis; rows where that is impossible are redundant.
    let mut r = 0;
    while r < tab.m() {
        if tab.basis[r] >= first_art {
            if let Some(c) = (0..first_art).find(|&j| tab.t[r][j].abs() > PIVOT_TOLERANCE) {
                tab.pivot(r, c);
            } else {
                tab.t.remove(r);
                tab.basis.remove(r);
                continue;
            }
        }
        r += 1;
    }

    // Phase 2 objective row (minimization form).
    let m = tab.m();
    let sign = if lp.maximize { -1.0 } else { 1.0 };
    let mut obj = vec![0.0; cols + 1];
    for &(j, c) in &lp.objective {
        obj[j] += sign * c;
    }
    for i in 0..m {
        let b = tab.basis[i];
        let cb = obj[b];
        if cb != 0.0 {
            for j in 0..=cols {
                obj[j] -= cb * tab.t[i][j];
            }
        }
    }
    tab.t[m] = obj;
    for j in first_art..cols {
        tab.t[m][j] = 0.0;
    }
    match tab.run(first_art) {
        Step::Optimal => {}
        Step::Unbounded => return fail(LpStatus::Unbounded, tab.pivots),
        Step::Breakdown(detail) => return fail(LpStatus::Breakdown { detail }, tab.pivots),
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.t[i][cols].max(0.0);
        }
    }
    let value = lp.objective.iter().map(|&(j, c)| c * x[j]).sum();
    LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
        pivots: tab.pivots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(
        n: usize,
        rows: Vec<Constraint>,
        objective: Vec<(usize, f64)>,
        maximize: bool,
    ) -> LinearProgram {
        LinearProgram {
            n_vars: n,
            upper: vec![Some(1.0); n],
            rows,
            objective,
            maximize,
        }
    }

    #[test]
    fn single_bound() {
        let p = lp(
            1,
            vec![Constraint {
                coeffs: vec![(0, 1.0)],
                sense: Sense::Le,
                rhs: 0.5,
            }],
            vec![(0, 1.0)],
            true,
        );
        let s = simplex_solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_pair() {
        let p = lp(
            1,
            vec![
                Constraint {
                    coeffs: vec![(0, 1.0)],
                    sense: Sense::Ge,
                    rhs: 0.6,
                },
                Constraint {
                    coeffs: vec![(0, 1.0)],
                    sense: Sense::Le,
                    rhs: 0.4,
                },
            ],
            vec![(0, 1.0)],
            true,
        );
        assert_eq!(simplex_solve(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn equalities_and_redundancy() {
        // x + y = 1 twice, max x - y with y >= 0.25.
        let row = Constraint {
            coeffs: vec![(0, 1.0), (1, 1.0)],
            sense: Sense::Eq,
            rhs: 1.0,
        };
        let p = lp(
            2,
            vec![
                row.clone(),
                row,
                Constraint {
                    coeffs: vec![(1, 1.0)],
                    sense: Sense::Ge,
                    rhs: 0.25,
                },
            ],
            vec![(0, 1.0), (1, -1.0)],
            true,
        );
        let s = simplex_solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 0.5).abs() < 1e-12);
        assert!((s.x[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn unbounded_without_upper_bounds() {
        let p = LinearProgram {
            n_vars: 1,
            upper: vec![None],
            rows: vec![],
            objective: vec![(0, 1.0)],
            maximize: true,
        };
        assert_eq!(simplex_solve(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // -x <= -0.3  <=>  x >= 0.3; minimize x.
        let p = lp(
            1,
            vec![Constraint {
                coeffs: vec![(0, -1.0)],
                sense: Sense::Le,
                rhs: -0.3,
            }],
            vec![(0, 1.0)],
            false,
        );
        let s = simplex_solve(&p);
        assert!((s.value - 0.3).abs() < 1e-12);
    }
}
