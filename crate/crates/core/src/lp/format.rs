//! LP text format writer and parser.
//!
//! The writer emits the usual sections (Maximize/Minimize, Subject To,
//! Bounds, End). Coefficients whose reduced denominator is 2^a*5^b are
//! printed as exact finite decimals; anything else is printed as a rounded
//! decimal and its exact value is appended after `End` in a comment trailer
//!
//! ```text
//! \ exact <obj|row-name|rhs-name> <var> <p/q>
//! ```
//!
//! which the parser reads back, so a round-trip through this module
//! reproduces every rational bit-exactly while external tools still see a
//! plain LP file.

use super::{LinearProgram, LpRow, Sense};
use crate::error::{Error, Result};
use crate::ratio::{rat_from_str, rat_to_decimal, rat_to_string, Rat};
use num::traits::{Signed, Zero};
use std::collections::BTreeMap;
use std::fmt::Write as _;

fn sanitize(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for (i, ch) in name.chars().enumerate() {
        let ok = ch.is_ascii_alphanumeric() || ch == '_' || ch == '.';
        if i == 0 && ch.is_ascii_digit() {
            out.push('v');
        }
        out.push(if ok { ch } else { '_' });
    }
    if out.is_empty() {
        out.push('_');
    }
    out
}

/// Renders one coefficient; returns the token and, when inexact, the exact
/// rational for the trailer.
fn coeff_token(r: &Rat) -> (String, Option<String>) {
    match rat_to_decimal(r) {
        Some(d) => (d, None),
        None => {
            let approx = crate::ratio::rat_to_f64(r);
            (format!("{approx:.17}"), Some(rat_to_string(r)))
        }
    }
}

fn push_terms(
    line: &mut String,
    terms: &[(String, Rat)],
    scope: &str,
    trailers: &mut Vec<String>,
) {
    for (name, c) in terms {
        if c.is_zero() {
            continue;
        }
        let (tok, exact) = coeff_token(&c.abs());
        let sign = if c.is_negative() { '-' } else { '+' };
        let _ = write!(line, " {sign} {tok} {name}");
        if let Some(e) = exact {
            let signed = if c.is_negative() {
                format!("-{e}")
            } else {
                e
            };
            trailers.push(format!("\\ exact {scope} {name} {signed}"));
        }
    }
}

/// Serializes the program to LP text. Fails on name collisions after
/// sanitization.
pub fn export_lp(lp: &LinearProgram) -> Result<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let names: Vec<String> = lp.var_names.iter().map(|n| sanitize(n)).collect();
    for (i, n) in names.iter().enumerate() {
        if let Some(&prev) = seen.get(n) {
            return Err(Error::contract(format!(
                "variable name collision after sanitization: {:?} and {:?} both map to {n:?}",
                lp.var_names[prev], lp.var_names[i]
            )));
        }
        seen.insert(n.clone(), i);
    }
    let mut trailers: Vec<String> = Vec::new();
    let mut out = String::new();
    out.push_str("\\ gapforge LP export v1\n");
    out.push_str(if lp.maximize { "Maximize\n" } else { "Minimize\n" });
    let mut line = String::from(" obj:");
    let obj_terms: Vec<(String, Rat)> = lp
        .objective
        .iter()
        .enumerate()
        .map(|(v, c)| (names[v].clone(), c.clone()))
        .collect();
    push_terms(&mut line, &obj_terms, "obj", &mut trailers);
    if !obj_terms.iter().any(|(_, c)| !c.is_zero()) {
        line.push_str(" 0 ");
        line.push_str(&names[0]);
    }
    out.push_str(&line);
    out.push('\n');
    out.push_str("Subject To\n");
    for row in &lp.rows {
        let rname = sanitize(&row.name);
        let mut line = format!(" {rname}:");
        let terms: Vec<(String, Rat)> = row
            .coeffs
            .iter()
            .map(|(v, c)| (names[*v].clone(), c.clone()))
            .collect();
        push_terms(&mut line, &terms, &rname, &mut trailers);
        if terms.iter().all(|(_, c)| c.is_zero()) {
            let _ = write!(line, " 0 {}", names[0]);
        }
        let (tok, exact) = coeff_token(&row.rhs);
        let _ = write!(line, " {} {}", row.sense.symbol(), tok);
        if let Some(e) = exact {
            trailers.push(format!("\\ exact rhs {rname} {e}"));
        }
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("Bounds\n");
    for (v, (lo, up)) in lp.bounds.iter().enumerate() {
        let (lo_tok, lo_exact) = coeff_token(lo);
        match up {
            None => {
                let _ = writeln!(out, " {} <= {}", lo_tok, names[v]);
            }
            Some(u) => {
                let (up_tok, up_exact) = coeff_token(u);
                let _ = writeln!(out, " {} <= {} <= {}", lo_tok, names[v], up_tok);
                if let Some(e) = up_exact {
                    trailers.push(format!("\\ exact upper {} {e}", names[v]));
                }
            }
        }
        if let Some(e) = lo_exact {
            trailers.push(format!("\\ exact lower {} {e}", names[v]));
        }
    }
    out.push_str("End\n");
    for t in &trailers {
        out.push_str(t);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Rows,
    Bounds,
    Done,
}

/// Parses LP text produced by `export_lp` (plus hand-written models in the
/// same dialect) back into a `LinearProgram`, applying exact-value trailers.
pub fn parse_lp(text: &str) -> Result<LinearProgram> {
    let mut lp = LinearProgram::new(true);
    let mut var_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut section = Section::Preamble;
    let mut trailers: Vec<(String, String, Rat)> = Vec::new();
    let mut bounds_set: Vec<String> = Vec::new();

    fn var_of(
        lp: &mut LinearProgram,
        idx: &mut BTreeMap<String, usize>,
        name: &str,
    ) -> usize {
        *idx.entry(name.to_string()).or_insert_with(|| {
            lp.add_var(name)
        })
    }

    // term parser over whitespace tokens: [sign] [number] name ...
    fn parse_terms(
        tokens: &[&str],
        lp: &mut LinearProgram,
        idx: &mut BTreeMap<String, usize>,
    ) -> Result<Vec<(usize, Rat)>> {
        let mut terms: Vec<(usize, Rat)> = Vec::new();
        let mut sign = Rat::from_integer(1.into());
        let mut coeff: Option<Rat> = None;
        let is_number = |t: &str| {
            let t = t.strip_prefix(['-', '+']).unwrap_or(t);
            t.starts_with(|c: char| c.is_ascii_digit() || c == '.')
        };
        for &tok in tokens {
            match tok {
                "+" => {}
                "-" => sign = -sign,
                t if is_number(t) => {
                    let r = rat_from_str(t)?;
                    coeff = Some(coeff.unwrap_or_else(|| Rat::from_integer(1.into())) * r);
                }
                name => {
                    let c = sign.clone() * coeff.take().unwrap_or_else(|| Rat::from_integer(1.into()));
                    let v = var_of(lp, idx, name);
                    terms.push((v, c));
                    sign = Rat::from_integer(1.into());
                }
            }
        }
        if coeff.is_some() {
            return Err(Error::Parse("dangling coefficient in LP row".into()));
        }
        Ok(terms)
    }

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('\\') {
            let rest = rest.trim();
            if let Some(spec) = rest.strip_prefix("exact ") {
                let parts: Vec<&str> = spec.split_whitespace().collect();
                if parts.len() == 3 {
                    trailers.push((
                        parts[0].to_string(),
                        parts[1].to_string(),
                        rat_from_str(parts[2])?,
                    ));
                }
            }
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower == "maximize" || lower == "maximise" || lower == "max" {
            lp.maximize = true;
            section = Section::Objective;
            continue;
        }
        if lower == "minimize" || lower == "minimise" || lower == "min" {
            lp.maximize = false;
            section = Section::Objective;
            continue;
        }
        if lower == "subject to" || lower == "st" || lower == "s.t." {
            section = Section::Rows;
            continue;
        }
        if lower == "bounds" {
            section = Section::Bounds;
            continue;
        }
        if lower == "end" {
            section = Section::Done;
            continue;
        }
        match section {
            Section::Preamble | Section::Done => {
                return Err(Error::Parse(format!("unexpected LP line: {line:?}")))
            }
            Section::Objective => {
                let body = match line.split_once(':') {
                    Some((_, b)) => b,
                    None => line,
                };
                let tokens: Vec<&str> = body.split_whitespace().collect();
                for (v, c) in parse_terms(&tokens, &mut lp, &mut var_index)? {
                    lp.objective[v] += c;
                }
            }
            Section::Rows => {
                let (name, body) = match line.split_once(':') {
                    Some((n, b)) => (n.trim().to_string(), b),
                    None => (format!("r{}", lp.rows.len()), line),
                };
                let tokens: Vec<&str> = body.split_whitespace().collect();
                let sense_pos = tokens
                    .iter()
                    .position(|&t| t == "<=" || t == ">=" || t == "=" || t == "<" || t == ">")
                    .ok_or_else(|| Error::Parse(format!("row without sense: {line:?}")))?;
                let sense = match tokens[sense_pos] {
                    "<=" | "<" => Sense::Le,
                    ">=" | ">" => Sense::Ge,
                    _ => Sense::Eq,
                };
                let rhs_tok = tokens
                    .get(sense_pos + 1)
                    .ok_or_else(|| Error::Parse(format!("row without rhs: {line:?}")))?;
                let rhs = rat_from_str(rhs_tok)?;
                let terms = parse_terms(&tokens[..sense_pos], &mut lp, &mut var_index)?;
                lp.add_row(name, terms, sense, rhs);
            }
            Section::Bounds => {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                match tokens.as_slice() {
                    [lo, "<=", name, "<=", up] => {
                        let v = var_of(&mut lp, &mut var_index, name);
                        lp.bounds[v] = (rat_from_str(lo)?, Some(rat_from_str(up)?));
                        bounds_set.push((*name).to_string());
                    }
                    [first, "<=", second] => {
                        let first_is_number = rat_from_str(first).is_ok();
                        if first_is_number {
                            let v = var_of(&mut lp, &mut var_index, second);
                            lp.bounds[v] = (rat_from_str(first)?, None);
                            bounds_set.push((*second).to_string());
                        } else {
                            let v = var_of(&mut lp, &mut var_index, first);
                            lp.bounds[v] = (Rat::zero(), Some(rat_from_str(second)?));
                            bounds_set.push((*first).to_string());
                        }
                    }
                    [name, "free"] => {
                        let v = var_of(&mut lp, &mut var_index, name);
                        lp.bounds[v] = (Rat::zero(), None);
                        bounds_set.push((*name).to_string());
                    }
                    _ => return Err(Error::Parse(format!("bad bounds line: {line:?}"))),
                }
            }
        }
    }

    // apply exact trailers
    for (scope, name, value) in trailers {
        match scope.as_str() {
            "obj" => {
                let v = *var_index
                    .get(&name)
                    .ok_or_else(|| Error::Parse(format!("trailer names unknown variable {name}")))?;
                lp.objective[v] = value;
            }
            "rhs" => {
                let row = lp
                    .rows
                    .iter_mut()
                    .find(|r| r.name == name)
                    .ok_or_else(|| Error::Parse(format!("trailer names unknown row {name}")))?;
                row.rhs = value;
            }
            "lower" => {
                let v = *var_index
                    .get(&name)
                    .ok_or_else(|| Error::Parse(format!("trailer names unknown variable {name}")))?;
                lp.bounds[v].0 = value;
            }
            "upper" => {
                let v = *var_index
                    .get(&name)
                    .ok_or_else(|| Error::Parse(format!("trailer names unknown variable {name}")))?;
                lp.bounds[v].1 = Some(value);
            }
            row_name => {
                let row: &mut LpRow = lp
                    .rows
                    .iter_mut()
                    .find(|r| r.name == row_name)
                    .ok_or_else(|| {
                        Error::Parse(format!("trailer names unknown scope {row_name}"))
                    })?;
                let v = *var_index
                    .get(&name)
                    .ok_or_else(|| Error::Parse(format!("trailer names unknown variable {name}")))?;
                for (var, c) in row.coeffs.iter_mut() {
                    if *var == v {
                        *c = value.clone();
                    }
                }
            }
        }
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::Instance;
    use crate::lp::build_basic_lp;
    use crate::ratio::{rat, rat_int};

    /// Name-keyed equality: the parser assigns variable indices by first
    /// appearance, so positions may differ while every value is bit-exact.
    fn assert_same(a: &LinearProgram, b: &LinearProgram) {
        use std::collections::BTreeMap;
        assert_eq!(a.maximize, b.maximize);
        let profile = |lp: &LinearProgram| -> BTreeMap<String, (Rat, Rat, Option<Rat>)> {
            lp.var_names
                .iter()
                .enumerate()
                .map(|(v, n)| {
                    (
                        super::sanitize(n),
                        (
                            lp.objective[v].clone(),
                            lp.bounds[v].0.clone(),
                            lp.bounds[v].1.clone(),
                        ),
                    )
                })
                .collect()
        };
        assert_eq!(profile(a), profile(b));
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(super::sanitize(&ra.name), rb.name);
            assert_eq!(ra.sense, rb.sense);
            assert_eq!(ra.rhs, rb.rhs);
            let by_name = |lp: &LinearProgram, row: &super::LpRow| -> BTreeMap<String, Rat> {
                row.coeffs
                    .iter()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(v, c)| (super::sanitize(&lp.var_names[*v]), c.clone()))
                    .collect()
            };
            assert_eq!(by_name(a, ra), by_name(b, rb));
        }
    }

    #[test]
    fn golden_single_variable_model() {
        let mut lp = LinearProgram::new(true);
        let x = lp.add_var("x");
        lp.set_objective(x, rat_int(1));
        lp.add_row("cap", vec![(x, rat_int(1))], Sense::Le, rat(1, 3));
        let text = export_lp(&lp).unwrap();
        let expected = "\\ gapforge LP export v1\n\
                        Maximize\n \
                        obj: + 1 x\n\
                        Subject To\n \
                        cap: + 1 x <= 0.33333333333333331\n\
                        Bounds\n \
                        0 <= x\n\
                        End\n\
                        \\ exact rhs cap 1/3\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut lp = LinearProgram::new(false);
        let x = lp.add_var("x");
        let y = lp.add_var("y");
        lp.set_objective(x, rat(1, 3));
        lp.set_objective(y, rat(-2, 7));
        lp.add_row(
            "r1",
            vec![(x, rat(5, 4)), (y, rat(-1, 3))],
            Sense::Ge,
            rat(2, 3),
        );
        lp.add_row("r2", vec![(x, rat_int(1))], Sense::Eq, rat(1, 4));
        lp.bounds[1] = (rat(1, 6), Some(rat(5, 6)));
        let text = export_lp(&lp).unwrap();
        let back = parse_lp(&text).unwrap();
        assert_same(&lp, &back);
        // idempotent
        assert_eq!(export_lp(&back).unwrap(), text);
    }

    #[test]
    fn c5_basic_lp_round_trips() {
        let lp = build_basic_lp(&Instance::c5_maxcut()).unwrap();
        let text = export_lp(&lp).unwrap();
        let back = parse_lp(&text).unwrap();
        assert_same(&lp, &back);
    }

    #[test]
    fn name_collision_detected() {
        let mut lp = LinearProgram::new(true);
        lp.add_var("x+y");
        lp.add_var("x-y");
        assert!(matches!(export_lp(&lp), Err(Error::Contract(_))));
    }
}
