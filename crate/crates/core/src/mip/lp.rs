//! CPLEX LP text format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::model::{MipModel, Sense, VarKind};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

fn num(x: f64) -> String {
    // `-0` would otherwise print as "-0"
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x}")
}

fn write_expr(out: &mut String, terms: &[(usize, f64)], model: &MipModel) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (j, &(v, c)) in terms.iter().enumerate() {
        if j > 0 && j % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let mag = c.abs();
        let name = &model.variables[v].name;
        if j == 0 && sign == '+' {
            if mag == 1.0 {
                let _ = write!(out, " {name}");
            } else {
                let _ = write!(out, " {} {name}", num(mag));
            }
        } else if mag == 1.0 {
            let _ = write!(out, " {sign} {name}");
        } else {
            let _ = write!(out, " {sign} {} {name}", num(mag));
        }
    }
}

/// Renders the model. Output depends only on the model.
pub fn write_lp(model: &MipModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ formulation: {}", model.kind);
    let _ = writeln!(out, "\\ big_m: {}  epsilon: {}", num(model.big_m), num(model.epsilon));
    out.push_str("Minimize\n obj:");
    write_expr(&mut out, &model.objective, model);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        write_expr(&mut out, &c.terms, model);
        let _ = writeln!(out, " {} {}", c.sense.as_str(), num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.kind == VarKind::Binary {
            continue;
        }
        let _ = writeln!(out, " {} >= {}", v.name, num(v.lower));
    }
    out.push_str("Binaries\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(model: &MipModel, path: &Path) -> Result<()> {
    let text = write_lp(model);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpConstraint {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// The subset of LP syntax produced by [`write_lp`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<(String, f64)>,
    pub constraints: Vec<LpConstraint>,
    pub bounds: Vec<(String, f64)>,
    pub binaries: Vec<String>,
}

impl LpProblem {
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut set: BTreeSet<&str> = self.bounds.iter().map(|(n, _)| n.as_str()).collect();
        set.extend(self.binaries.iter().map(String::as_str));
        set.extend(self.objective.iter().map(|(n, _)| n.as_str()));
        for c in &self.constraints {
            set.extend(c.terms.iter().map(|(n, _)| n.as_str()));
        }
        set
    }

    pub fn var_count(&self) -> usize {
        self.variables().len()
    }

    /// Largest violation of any row, bound or binary at `values`.
    pub fn max_violation(&self, values: &BTreeMap<String, f64>) -> Result<f64> {
        let get = |n: &str| values.get(n).copied().ok_or_else(|| Error::MissingVariable(n.to_string()));
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let mut lhs = 0.0;
            for (n, a) in &c.terms {
                lhs += a * get(n)?;
            }
            let v = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (n, lo) in &self.bounds {
            worst = worst.max(lo - get(n)?);
        }
        for n in &self.binaries {
            let z = get(n)?;
            worst = worst.max(z.min(1.0 - z).max(-z).max(z - 1.0));
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Head,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Done,
}

fn parse_terms(tokens: &[&str], line: usize) -> Result<Vec<(String, f64)>> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &tok in tokens {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    if coef.is_some() {
                        return Err(Error::LpParse { line, msg: format!("two coefficients in a row at `{tok}`") });
                    }
                    coef = Some(v);
                } else {
                    terms.push((tok.to_string(), sign * coef.take().unwrap_or(1.0)));
                    sign = 1.0;
                }
            }
        }
    }
    // a lone constant (empty expression) parses to no terms
    Ok(terms)
}

fn parse_row(text: &str, line: usize) -> Result<LpConstraint> {
    let (name, body) = text.split_once(':').ok_or_else(|| Error::LpParse { line, msg: "constraint without a name".into() })?;
    let tokens: Vec<&str> = body.split_whitespace().collect();
    let pos = tokens
        .iter()
        .position(|t| matches!(*t, "<=" | ">=" | "="))
        .ok_or_else(|| Error::LpParse { line, msg: format!("no comparison in `{}`", name.trim()) })?;
    let sense = match tokens[pos] {
        "<=" => Sense::Le,
        ">=" => Sense::Ge,
        _ => Sense::Eq,
    };
    let rhs_tok = tokens.get(pos + 1).ok_or_else(|| Error::LpParse { line, msg: "missing right-hand side".into() })?;
    let rhs = rhs_tok.parse::<f64>().map_err(|_| Error::LpParse { line, msg: format!("bad right-hand side `{rhs_tok}`") })?;
    Ok(LpConstraint { name: name.trim().to_string(), terms: parse_terms(&tokens[..pos], line)?, sense, rhs })
}

pub fn parse_lp(text: &str) -> Result<LpProblem> {
    let mut lp = LpProblem::default();
    let mut section = Section::Head;
    let mut pending: Option<(String, usize)> = None;
    let mut objective: Option<(String, usize)> = None;

    let flush = |pending: &mut Option<(String, usize)>, lp: &mut LpProblem| -> Result<()> {
        if let Some((row, line)) = pending.take() {
            lp.constraints.push(parse_row(&row, line)?);
        }
        Ok(())
    };

    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let header = match line.to_ascii_lowercase().as_str() {
            "minimize" | "minimise" | "min" => Some(Section::Objective),
            "subject to" | "st" | "s.t." => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "binaries" | "binary" => Some(Section::Binaries),
            "end" => Some(Section::Done),
            _ => None,
        };
        if let Some(next) = header {
            flush(&mut pending, &mut lp)?;
            section = next;
            continue;
        }
        match section {
            Section::Head | Section::Done => return Err(Error::LpParse { line: line_no, msg: format!("unexpected `{line}`") }),
            Section::Objective => match &mut objective {
                Some((acc, _)) => {
                    acc.push(' ');
                    acc.push_str(line);
                }
                None => objective = Some((line.to_string(), line_no)),
            },
            Section::Constraints => {
                let starts_row = line.split_whitespace().next().is_some_and(|t| t.ends_with(':'));
                if starts_row {
                    flush(&mut pending, &mut lp)?;
                    pending = Some((line.to_string(), line_no));
                } else if let Some((acc, _)) = &mut pending {
                    acc.push(' ');
                    acc.push_str(line);
                } else {
                    return Err(Error::LpParse { line: line_no, msg: "continuation outside a constraint".into() });
                }
            }
            Section::Bounds => {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                match tokens.as_slice() {
                    [name, ">=", v] => {
                        let v = v.parse::<f64>().map_err(|_| Error::LpParse { line: line_no, msg: format!("bad bound `{v}`") })?;
                        lp.bounds.push((name.to_string(), v));
                    }
                    _ => return Err(Error::LpParse { line: line_no, msg: format!("unsupported bound `{line}`") }),
                }
            }
            Section::Binaries => lp.binaries.extend(line.split_whitespace().map(str::to_string)),
        }
    }
    flush(&mut pending, &mut lp)?;
    if section != Section::Done {
        return Err(Error::LpParse { line: text.lines().count(), msg: "missing `End`".into() });
    }
    if let Some((obj, line)) = objective {
        let body = obj.split_once(':').map(|(_, b)| b).unwrap_or(&obj);
        let tokens: Vec<&str> = body.split_whitespace().collect();
        lp.objective = parse_terms(&tokens, line)?;
    }
    Ok(lp)
}
