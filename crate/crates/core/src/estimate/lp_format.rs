//! CPLEX-style LP text: `Minimize`/`Maximize`, `Subject To`, `Bounds`, `End`.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::simplex::{Constraint, LinearProgram, Sense};
use super::{margin_program, phase1_program, phase1_row_names, EstimationPolyhedron};
use crate::error::{Error, Result};

/// Which of the two estimation LPs to write.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpObjective {
    /// Minimize `t`, the largest slack-to-observation ratio.
    MinSlack,
    /// Maximize the margin `s`, optionally with slacks pinned.
    MaxMargin { fixed_slack: Option<Vec<f64>> },
}

/// Writes the chosen estimation LP. Output depends only on the inputs.
pub fn export_lp(poly: &EstimationPolyhedron, objective: &LpObjective) -> String {
    let mut vars: Vec<String> = (0..poly.n_vars()).map(|j| poly.var_name(j)).collect();
    let (lp, rows) = match objective {
        LpObjective::MinSlack => {
            vars.push("t".into());
            (phase1_program(poly), phase1_row_names(poly))
        }
        LpObjective::MaxMargin { fixed_slack } => {
            vars.push("s".into());
            margin_program(poly, fixed_slack.as_deref())
        }
    };
    write_lp(&lp, &vars, &rows)
}

fn write_terms(out: &mut String, coeffs: &[(usize, f64)], vars: &[String]) {
    for &(j, a) in coeffs {
        if a < 0.0 {
            let _ = write!(out, " - {} {}", -a, vars[j]);
        } else {
            let _ = write!(out, " + {} {}", a, vars[j]);
        }
    }
}

/// Writes any program with the given variable and row names.
pub fn write_lp(lp: &LinearProgram, vars: &[String], rows: &[String]) -> String {
    let mut out = String::new();
    out.push_str(if lp.maximize {
        "Maximize\n"
    } else {
        "Minimize\n"
    });
    out.push_str(" obj:");
    if lp.objective.is_empty() {
        let _ = write!(out, " + 0 {}", vars[0]);
    } else {
        write_terms(&mut out, &lp.objective, vars);
    }
    out.push_str("\nSubject To\n");
    for (row, name) in lp.rows.iter().zip(rows) {
        let _ = write!(out, " {name}:");
        write_terms(&mut out, &row.coeffs, vars);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for (j, name) in vars.iter().enumerate().take(lp.n_vars) {
        match lp.upper[j] {
            Some(u) => {
                let _ = writeln!(out, " 0 <= {name} <= {u}");
            }
            None => {
                let _ = writeln!(out, " {name} >= 0");
            }
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedRow {
    pub name: String,
    pub coeffs: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedLp {
    pub maximize: bool,
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<ParsedRow>,
    /// `(variable, lower, upper)`.
    pub bounds: Vec<(String, f64, Option<f64>)>,
}

impl ParsedLp {
    /// Variables in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut order = Vec::new();
        let names = self
            .objective
            .iter()
            .map(|t| &t.0)
            .chain(self.rows.iter().flat_map(|r| r.coeffs.iter().map(|t| &t.0)))
            .chain(self.bounds.iter().map(|b| &b.0));
        for n in names {
            if seen.insert(n.clone(), ()).is_none() {
                order.push(n.clone());
            }
        }
        order
    }

    /// Back to a solver program. Only zero lower bounds are supported.
    pub fn to_program(&self) -> Result<(LinearProgram, Vec<String>)> {
        let vars = self.variables();
        let index: HashMap<&str, usize> = vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        let map =
            |terms: &[(String, f64)]| terms.iter().map(|(v, a)| (index[v.as_str()], *a)).collect();
        let mut upper = vec![None; vars.len()];
        for (v, lo, hi) in &self.bounds {
            if *lo != 0.0 {
                return Err(Error::Schema(format!("nonzero lower bound on {v}")));
            }
            upper[index[v.as_str()]] = *hi;
        }
        let lp = LinearProgram {
            n_vars: vars.len(),
            upper,
            rows: self
                .rows
                .iter()
                .map(|r| Constraint {
                    coeffs: map(&r.coeffs),
                    sense: r.sense,
                    rhs: r.rhs,
                })
                .collect(),
            objective: map(&self.objective),
            maximize: self.maximize,
        };
        Ok((lp, vars))
    }
}

#[derive(PartialEq)]
enum Section {
    Start,
    Objective,
    Rows,
    Bounds,
    Done,
}

fn number(tok: &str, line: usize) -> Result<f64> {
    let v = match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => f64::INFINITY,
        "-inf" | "-infinity" => f64::NEG_INFINITY,
        _ => tok
            .parse()
            .map_err(|_| Error::Schema(format!("line {line}: expected a number, found {tok:?}")))?,
    };
    Ok(v)
}

/// `[+|-] [coef] var ...` up to the end of `toks`.
fn parse_terms(toks: &[&str], line: usize) -> Result<Vec<(String, f64)>> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &tok in toks {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    coef = Some(v);
                } else {
                    terms.push((tok.to_string(), sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    if coef.is_some() {
        return Err(Error::Schema(format!("line {line}: dangling coefficient")));
    }
    Ok(terms)
}

fn parse_sense(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

/// Reads the subset of the LP format produced by [`write_lp`]. Each row and
/// bound must sit on one line.
pub fn parse_lp(text: &str) -> Result<ParsedLp> {
    let mut section = Section::Start;
    let mut lp = ParsedLp {
        maximize: false,
        objective: Vec::new(),
        rows: Vec::new(),
        bounds: Vec::new(),
    };
    for (no, raw) in text.lines().enumerate() {
        let no = no + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        match lower.as_str() {
            "maximize" | "maximise" | "max" => {
                lp.maximize = true;
                section = Section::Objective;
                continue;
            }
            "minimize" | "minimise" | "min" => {
                section = Section::Objective;
                continue;
            }
            "subject to" | "st" | "s.t." | "such that" => {
                section = Section::Rows;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "end" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        let (label, body) = match line.split_once(':') {
            Some((l, b)) => (Some(l.trim().to_string()), b),
            None => (None, line),
        };
        let toks: Vec<&str> = body.split_whitespace().collect();
        match section {
            Section::Objective => lp.objective.extend(parse_terms(&toks, no)?),
            Section::Rows => {
                let pos = toks
                    .iter()
                    .position(|t| parse_sense(t).is_some())
                    .ok_or_else(|| Error::Schema(format!("line {no}: row without a relation")))?;
                if pos + 2 != toks.len() {
                    return Err(Error::Schema(format!(
                        "line {no}: expected a single right-hand side"
                    )));
                }
                lp.rows.push(ParsedRow {
                    name: label.unwrap_or_else(|| format!("r_{}", lp.rows.len())),
                    coeffs: parse_terms(&toks[..pos], no)?,
                    sense: parse_sense(toks[pos]).unwrap(),
                    rhs: number(toks[pos + 1], no)?,
                });
            }
            Section::Bounds => lp.bounds.push(parse_bound(&toks, no)?),
            Section::Start | Section::Done => {
                return Err(Error::Schema(format!(
                    "line {no}: content outside any section"
                )));
            }
        }
    }
    if section != Section::Done {
        return Err(Error::Schema("missing End".into()));
    }
    Ok(lp)
}

fn parse_bound(toks: &[&str], no: usize) -> Result<(String, f64, Option<f64>)> {
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    match toks {
        [lo, "<=", var, "<=", hi] => {
            Ok((var.to_string(), number(lo, no)?, finite(number(hi, no)?)))
        }
        [var, ">=", lo] => Ok((var.to_string(), number(lo, no)?, None)),
        [var, "<=", hi] => Ok((var.to_string(), 0.0, finite(number(hi, no)?))),
        [var, "=", v] => {
            let v = number(v, no)?;
            Ok((var.to_string(), v, Some(v)))
        }
        [var, free] if free.eq_ignore_ascii_case("free") => {
            Ok((var.to_string(), f64::NEG_INFINITY, None))
        }
        _ => Err(Error::Schema(format!("line {no}: unrecognized bound"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::build_polyhedron;
    use nalgebra::DMatrix;

    const TRIVIAL: &str = "\
Minimize
 obj: + 1 t
Subject To
 fit_0: + 1 q_0_0 - 1 epsp_0_0 + 1 epsm_0_0 = 1
 rowsum_0: + 1 q_0_0 = 1
 ratio_0_0: + 1 epsp_0_0 + 1 epsm_0_0 - 1 t <= 0
Bounds
 0 <= q_0_0 <= 1
 0 <= epsp_0_0 <= 1
 0 <= epsm_0_0 <= 1
 t >= 0
End
";

    fn trivial() -> EstimationPolyhedron {
        build_polyhedron(
            vec!["a".into()],
            vec!["x".into()],
            DMatrix::from_element(1, 1, 1.0),
            &[],
        )
        .unwrap()
    }

    #[test]
    fn golden_trivial_document() {
        assert_eq!(export_lp(&trivial(), &LpObjective::MinSlack), TRIVIAL);
    }

    #[test]
    fn parse_back() {
        let parsed = parse_lp(TRIVIAL).unwrap();
        assert!(!parsed.maximize);
        assert_eq!(parsed.rows.len(), 3);
        assert_eq!(parsed.rows[2].coeffs[2], ("t".to_string(), -1.0));
        assert_eq!(parsed.bounds[3], ("t".to_string(), 0.0, None));
        assert_eq!(parsed.variables(), ["t", "q_0_0", "epsp_0_0", "epsm_0_0"]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_lp("Minimize\n obj: x\n").is_err());
        assert!(parse_lp("Subject To\n c: x y\nEnd\n").is_err());
        assert!(parse_lp("x >= 1\nEnd\n").is_err());
    }

    #[test]
    fn margin_export_names_the_margin() {
        let text = export_lp(&trivial(), &LpObjective::MaxMargin { fixed_slack: None });
        assert!(text.starts_with("Maximize\n obj: + 1 s\n"));
        assert!(text.contains(" nonneg_q_0_0: + 1 q_0_0 - 1 s >= 0\n"));
    }
}
