//! Plain-text GP format.
//!
//! ```text
//! # comment
//! var x y z
//! max x^0.5 * y
//! ub z 3.0
//! budget: 1.0 * x + 2.0 * y^-1 <= 4.0 * z
//! coupled: (1.0 + 1.0 * x) * (1.0 * y + 0.5) <= 2.0
//! ```

use std::fmt;
use std::sync::Arc;

use super::expr::{Constraint, GpProblem, Monomial, Posynomial};
use crate::error::{Error, Result};

fn fmt_mono(m: &Monomial, names: &[String]) -> String {
    let mut s = format!("{:?}", m.coeff);
    for &(v, e) in &m.exps {
        s.push_str(" * ");
        s.push_str(&names[v.0]);
        if e != 1.0 {
            s.push_str(&format!("^{e:?}"));
        }
    }
    s
}

fn fmt_posy(p: &Posynomial, names: &[String]) -> String {
    p.terms.iter().map(|t| fmt_mono(t, names)).collect::<Vec<_>>().join(" + ")
}

impl fmt::Display for GpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.names.is_empty() {
            writeln!(f, "var {}", self.names.join(" "))?;
        }
        let obj: Vec<String> = self
            .objective
            .iter()
            .map(|&(v, e)| format!("{}^{e:?}", self.names[v.0]))
            .collect();
        if obj.is_empty() {
            writeln!(f, "max 1.0")?;
        } else {
            writeln!(f, "max {}", obj.join(" * "))?;
        }
        for (j, ub) in self.upper_bounds.iter().enumerate() {
            if let Some(u) = ub {
                writeln!(f, "ub {} {u:?}", self.names[j])?;
            }
        }
        for c in &self.constraints {
            let label = c.label.replace([':', '\n', '#'], "_");
            if !label.is_empty() {
                write!(f, "{label}: ")?;
            }
            let lhs = if c.lhs.len() == 1 {
                fmt_posy(&c.lhs[0], &self.names)
            } else {
                c.lhs
                    .iter()
                    .map(|p| format!("({})", fmt_posy(p, &self.names)))
                    .collect::<Vec<_>>()
                    .join(" * ")
            };
            writeln!(f, "{lhs} <= {}", fmt_mono(&c.rhs, &self.names))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Caret,
    Star,
    Plus,
    Open,
    Close,
    Le,
}

fn lex(s: &str, line: usize) -> Result<Vec<Tok>> {
    let err = |reason: String| Error::GpParse { line, reason };
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '^' => {
                out.push(Tok::Caret);
                i += 1
            }
            '*' => {
                out.push(Tok::Star);
                i += 1
            }
            '+' => {
                out.push(Tok::Plus);
                i += 1
            }
            '(' => {
                out.push(Tok::Open);
                i += 1
            }
            ')' => {
                out.push(Tok::Close);
                i += 1
            }
            '<' if b.get(i + 1) == Some(&b'=') => {
                out.push(Tok::Le);
                i += 2
            }
            '0'..='9' | '.' | '-' => {
                let start = i;
                i += 1;
                while i < b.len() {
                    let d = b[i] as char;
                    let exp_sign = (d == '-' || d == '+') && matches!(b[i - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text = &s[start..i];
                let v: f64 = text.parse().map_err(|_| err(format!("bad number `{text}`")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                out.push(Tok::Ident(s[start..i].to_string()));
            }
            other => return Err(err(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
    gp: &'a GpProblem,
}

enum Item {
    Atom(Monomial),
    Group(Posynomial),
}

impl Parser<'_> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::GpParse { line: self.line, reason: reason.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn atom(&mut self) -> Result<Monomial> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(self.err(format!("coefficient {v} must be positive")));
                }
                Ok(Monomial::constant(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let v = self
                    .gp
                    .var_by_name(&name)
                    .ok_or_else(|| self.err(format!("undeclared variable `{name}`")))?;
                let e = if self.eat(&Tok::Caret) {
                    match self.toks.get(self.pos).cloned() {
                        Some(Tok::Num(e)) => {
                            self.pos += 1;
                            e
                        }
                        _ => return Err(self.err("expected exponent after `^`")),
                    }
                } else {
                    1.0
                };
                Ok(Monomial::new(1.0, [(v, e)]))
            }
            other => Err(self.err(format!("expected number or variable, found {other:?}"))),
        }
    }

    fn mono(&mut self) -> Result<Monomial> {
        let mut m = self.atom()?;
        while self.eat(&Tok::Star) {
            m = m.mul(&self.atom()?);
        }
        Ok(m)
    }

    fn posy(&mut self) -> Result<Posynomial> {
        let mut terms = vec![self.mono()?];
        while self.eat(&Tok::Plus) {
            terms.push(self.mono()?);
        }
        Ok(Posynomial::new(terms))
    }

    fn lhs(&mut self) -> Result<Vec<Arc<Posynomial>>> {
        let mut items = Vec::new();
        loop {
            if self.eat(&Tok::Open) {
                let p = self.posy()?;
                if !self.eat(&Tok::Close) {
                    return Err(self.err("missing `)`"));
                }
                items.push(Item::Group(p));
            } else {
                items.push(Item::Atom(self.atom()?));
            }
            if !self.eat(&Tok::Star) {
                break;
            }
        }
        let mut atoms: Option<Monomial> = None;
        let mut groups = Vec::new();
        for it in items {
            match it {
                Item::Atom(m) => atoms = Some(atoms.map_or(m.clone(), |a| a.mul(&m))),
                Item::Group(p) => groups.push(Arc::new(p)),
            }
        }
        if self.peek() == Some(&Tok::Plus) {
            if !groups.is_empty() {
                return Err(self.err("cannot add to a product of parenthesized factors"));
            }
            let mut terms = vec![atoms.expect("at least one atom")];
            while self.eat(&Tok::Plus) {
                terms.push(self.mono()?);
            }
            return Ok(vec![Arc::new(Posynomial::new(terms))]);
        }
        let mut out = Vec::new();
        if let Some(m) = atoms {
            out.push(Arc::new(Posynomial::from(m)));
        }
        out.extend(groups);
        Ok(out)
    }

    fn done(&self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("unexpected trailing {t:?}"))),
        }
    }
}

pub fn parse_problem(text: &str) -> Result<GpProblem> {
    let mut gp = GpProblem::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |reason: String| Error::GpParse { line, reason };
        let (head, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
        match head {
            "var" => {
                for name in rest.split_whitespace() {
                    let ok = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                    if !ok {
                        return Err(err(format!("bad variable name `{name}`")));
                    }
                    if gp.var_by_name(name).is_some() {
                        return Err(err(format!("variable `{name}` declared twice")));
                    }
                    gp.add_var(name);
                }
            }
            "max" => {
                let toks = lex(rest, line)?;
                let mut p = Parser { toks, pos: 0, line, gp: &gp };
                let m = p.mono()?;
                p.done()?;
                gp.maximize(m.exps);
            }
            "ub" => {
                let mut parts = rest.split_whitespace();
                let (Some(name), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(err("expected `ub <var> <value>`".into()));
                };
                let v = gp.var_by_name(name).ok_or_else(|| err(format!("undeclared variable `{name}`")))?;
                let u: f64 = val.parse().map_err(|_| err(format!("bad number `{val}`")))?;
                gp.set_upper_bound(v, u).map_err(|e| err(e.to_string()))?;
            }
            _ => {
                let (label, expr) = match body.split_once(':') {
                    Some((l, e)) => (l.trim().to_string(), e),
                    None => (String::new(), body),
                };
                let toks = lex(expr, line)?;
                let mut p = Parser { toks, pos: 0, line, gp: &gp };
                let lhs = p.lhs()?;
                if !p.eat(&Tok::Le) {
                    return Err(p.err("expected `<=`"));
                }
                let rhs = p.mono()?;
                p.done()?;
                gp.push(Constraint::factored(label, lhs, rhs));
            }
        }
    }
    Ok(gp)
}


#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# sample
var x y z
max x^0.5 * y
ub z 3.0
budget: 1.0 * x + 2.0 * y^-1 <= 4.0 * z
coupled: (1.0 + 1.0 * x) * (1.0 * y + 0.5) <= 2.0
";

    #[test]
    fn parses_and_dumps_back() {
        let gp = parse_problem(SAMPLE).unwrap();
        assert_eq!(gp.num_vars(), 3);
        assert_eq!(gp.constraints.len(), 2);
        assert_eq!(gp.constraints[1].lhs.len(), 2);
        assert_eq!(gp.upper_bounds[2], Some(3.0));
        let dumped = gp.to_string();
        let again = parse_problem(&dumped).unwrap();
        assert_eq!(dumped, again.to_string());
        let x = [1.5, 0.7, 2.0];
        for (a, b) in gp.constraints.iter().zip(&again.constraints) {
            assert!((a.ratio(&x) - b.ratio(&x)).abs() < 1e-15);
        }
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_problem("var x\nmax x\n1.0 * q <= 1.0\n").unwrap_err();
        assert!(matches!(err, Error::GpParse { line: 3, .. }), "{err}");
        let err = parse_problem("var x\n-1.0 * x <= 1.0\n").unwrap_err();
        assert!(matches!(err, Error::GpParse { line: 2, .. }));
        let err = parse_problem("var x\nx <= 1.0 extra\n").unwrap_err();
        assert!(matches!(err, Error::GpParse { line: 2, .. }));
    }
}
