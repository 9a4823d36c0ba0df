//! Line-oriented reaction format.
//!
//! ```text
//! # comment
//! A + 2 B -> C ; k=1.5
//! 0 -> X ; k=1
//! ```
//!
//! Tokens are whitespace separated and a lone `+` separates terms, so species
//! names may themselves contain `+` (`W1+_1,2`). The empty complex is `0` or `∅`.

use std::fmt::Write as _;

use super::{Crn, CrnBuilder, CrnError, Reaction};
use crate::scalar::Scalar;

fn parse_err(line: usize, message: impl Into<String>) -> CrnError {
    CrnError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_complex(src: &str, line: usize) -> Result<Vec<(String, u32)>, CrnError> {
    let tokens: Vec<&str> = src.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(parse_err(
            line,
            "empty side; write `0` for the empty complex",
        ));
    }
    if tokens.len() == 1 && (tokens[0] == "0" || tokens[0] == "∅") {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for term in tokens.split(|t| *t == "+") {
        let (coef, name) = match term {
            [name] => (1, *name),
            [c, name] => {
                let c: u32 = c
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad coefficient `{c}`")))?;
                (c, *name)
            }
            [] => return Err(parse_err(line, "dangling `+`")),
            _ => {
                return Err(parse_err(
                    line,
                    format!("cannot read term `{}`", term.join(" ")),
                ))
            }
        };
        if name.parse::<f64>().is_ok() {
            return Err(parse_err(
                line,
                format!("species name `{name}` looks numeric"),
            ));
        }
        out.push((name.to_string(), coef));
    }
    Ok(out)
}

fn parse_rate(src: &str, line: usize) -> Result<f64, CrnError> {
    let src = src.trim();
    let value = src
        .strip_prefix("k=")
        .or_else(|| src.strip_prefix("k ="))
        .ok_or_else(|| parse_err(line, format!("expected `k=<rate>`, got `{src}`")))?;
    value
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad rate `{}`", value.trim())))
}

/// Parses the text format. Species ids follow first appearance.
pub fn parse_crn<S: Scalar>(text: &str) -> Result<Crn<S>, CrnError> {
    let mut b = CrnBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (reaction, rate) = body
            .split_once(';')
            .ok_or_else(|| parse_err(line, "missing `; k=<rate>`"))?;
        let (lhs, rhs) = reaction
            .split_once("->")
            .ok_or_else(|| parse_err(line, "missing `->`"))?;
        let lhs = parse_complex(lhs, line)?;
        let rhs = parse_complex(rhs, line)?;
        let k = parse_rate(rate, line)?;
        if !(k > 0.0) || !k.is_finite() {
            return Err(parse_err(line, format!("rate must be positive, got {k}")));
        }
        let l: Vec<(&str, u32)> = lhs.iter().map(|(n, c)| (n.as_str(), *c)).collect();
        let r: Vec<(&str, u32)> = rhs.iter().map(|(n, c)| (n.as_str(), *c)).collect();
        if l.is_empty() && r.is_empty() {
            return Err(parse_err(line, "reaction has no species"));
        }
        b.reaction(&l, &r, S::lit(k));
    }
    b.build()
}

fn write_complex<S: Scalar>(crn: &Crn<S>, c: &[(usize, u32)], out: &mut String) {
    if c.is_empty() {
        out.push('0');
        return;
    }
    for (i, &(id, coef)) in c.iter().enumerate() {
        if i > 0 {
            out.push_str(" + ");
        }
        if coef != 1 {
            let _ = write!(out, "{coef} ");
        }
        out.push_str(crn.name(id));
    }
}

/// One reaction as a single line without trailing newline.
pub fn format_reaction<S: Scalar>(crn: &Crn<S>, r: &Reaction<S>) -> String {
    let mut out = String::new();
    write_complex(crn, r.reactants(), &mut out);
    out.push_str(" -> ");
    write_complex(crn, r.products(), &mut out);
    let _ = write!(out, " ; k={}", r.rate_constant().as_f64());
    out
}

/// Serializes every reaction, one per line.
pub fn write_crn<S: Scalar>(crn: &Crn<S>) -> String {
    let mut out = String::new();
    for r in crn.reactions() {
        out.push_str(&format_reaction(crn, r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_coefficients_and_plus_names() {
        let c: Crn<f64> = parse_crn("W1+_1,1 + 2 S1_1 -> W1+_1,1 + N+_1,1 ; k=1.5").unwrap();
        assert_eq!(c.n_species(), 3);
        assert_eq!(c.id("N+_1,1"), Some(2));
        assert_eq!(c.reactions()[0].reactants(), &vec![(0, 1), (1, 2)]);
        assert_eq!(c.reactions()[0].rate_constant(), 1.5);
    }

    #[test]
    fn empty_complex_and_comments() {
        let c: Crn<f64> = parse_crn("# phase 1: x\n\nA -> ∅ ; k=1\n0 -> A ; k=2 # source").unwrap();
        assert_eq!(c.n_reactions(), 2);
        assert!(c.reactions()[0].products().is_empty());
        assert!(c.reactions()[1].reactants().is_empty());
    }

    #[test]
    fn round_trip() {
        let src = "A + 2 B -> C ; k=1.5\nC -> 0 ; k=0.1\n0 -> N+_1 ; k=3\n";
        let c: Crn<f64> = parse_crn(src).unwrap();
        assert_eq!(write_crn(&c), src);
        let again: Crn<f64> = parse_crn(&write_crn(&c)).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_crn::<f64>("A -> B ; k=1\nA B -> C ; k=1").unwrap_err();
        assert!(matches!(err, CrnError::Parse { line: 2, .. }));
        let err = parse_crn::<f64>("A -> B").unwrap_err();
        assert!(matches!(err, CrnError::Parse { line: 1, .. }));
        let err = parse_crn::<f64>("A -> B ; k=-1").unwrap_err();
        assert!(matches!(err, CrnError::Parse { line: 1, .. }));
        let err = parse_crn::<f64>("A + -> B ; k=1").unwrap_err();
        assert!(matches!(err, CrnError::Parse { line: 1, .. }));
    }
}
