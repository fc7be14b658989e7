//! Text format for cycle chains.
//!
//! ```text
//! # comments start with '#'
//! base hypersurface((P1)^3(x, y, z); x*y*z - (x-1)*(y-1))
//! exclude x = 0, z = inf
//! component +1 symbol(x, y, z)
//! component -1 map(t, u) -> (inf, t, 1 - 1/t; 1/u, 1 - 1/(t*u), 1 - u)
//! ```
//!
//! Bases: `point`, `P1(t)`, `(P1)^k(a, b, ...)`, and
//! `hypersurface((P1)^k(names); equation[; solve v])`. `symbol(...)` takes
//! functions of the ambient coordinates; `map(params) -> (X; cube)` gives a
//! component explicitly. Constants: rationals and `zeta(N)` (= e^{2πi/N}).

use crate::cycles::{BaseVariety, CycleChain, CycleError, PValue, ParamCycle};
use crate::cyclo::CycloNum;
use crate::linalg::{parse_rational, Rational};
use crate::poly::{Poly, RatFn, Restricted};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub struct DslError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for DslError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Sym(char),
    Arrow,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    col: usize,
}

fn lex(line: &str, lineno: usize) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let col = i + 1;
        if ch == '#' {
            break;
        }
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        if ch.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Token { tok: Tok::Num(chars[start..i].iter().collect()), col });
            continue;
        }
        if ch.is_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), col });
            continue;
        }
        if ch == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Token { tok: Tok::Arrow, col });
            i += 2;
            continue;
        }
        if "+-*/^(),;=".contains(ch) {
            out.push(Token { tok: Tok::Sym(ch), col });
            i += 1;
            continue;
        }
        return Err(DslError { line: lineno, col, msg: format!("unexpected character '{ch}'") });
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        let col = self.toks.get(self.pos).map(|t| t.col).unwrap_or(self.end_col);
        Err(DslError { line: self.line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), DslError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a name"),
        }
    }

    fn integer(&mut self) -> Result<u32, DslError> {
        match self.peek() {
            Some(Tok::Num(s)) => {
                let v = s.parse::<u32>();
                match v {
                    Ok(v) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    Err(_) => self.err("integer too large"),
                }
            }
            _ => self.err("expected an integer"),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn name_list(&mut self) -> Result<Vec<String>, DslError> {
        self.expect_sym('(')?;
        let mut names = Vec::new();
        if self.eat_sym(')') {
            return Ok(names);
        }
        loop {
            let n = self.ident()?;
            if names.contains(&n) {
                return self.err(format!("duplicate name '{n}'"));
            }
            names.push(n);
            if self.eat_sym(')') {
                return Ok(names);
            }
            self.expect_sym(',')?;
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self, vars: &[String]) -> Result<RatFn, DslError> {
        let mut v = self.term(vars)?;
        loop {
            if self.eat_sym('+') {
                v = v.add(&self.term(vars)?);
            } else if self.eat_sym('-') {
                v = v.sub(&self.term(vars)?);
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self, vars: &[String]) -> Result<RatFn, DslError> {
        let mut v = self.unary(vars)?;
        loop {
            if self.eat_sym('*') {
                v = v.mul(&self.unary(vars)?);
            } else if self.peek() == Some(&Tok::Sym('/')) {
                self.pos += 1;
                let d = self.unary(vars)?;
                if d.is_zero() {
                    self.pos -= 1;
                    return self.err("division by zero");
                }
                v = v.div(&d).unwrap();
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self, vars: &[String]) -> Result<RatFn, DslError> {
        if self.eat_sym('-') {
            return Ok(self.unary(vars)?.neg());
        }
        if self.eat_sym('+') {
            return self.unary(vars);
        }
        let base = self.atom(vars)?;
        if self.eat_sym('^') {
            let neg = self.eat_sym('-');
            let e = self.integer()? as i32;
            let e = if neg { -e } else { e };
            if base.is_zero() && e < 0 {
                return self.err("negative power of zero");
            }
            return Ok(base.pow(e).unwrap());
        }
        Ok(base)
    }

    fn atom(&mut self, vars: &[String]) -> Result<RatFn, DslError> {
        let nv = vars.len();
        match self.peek().cloned() {
            Some(Tok::Num(s)) => {
                self.pos += 1;
                let q: Rational = parse_rational(&s).expect("digits parse");
                Ok(RatFn::constant(nv, CycloNum::from_rational(q)))
            }
            Some(Tok::Ident(s)) if s == "zeta" => {
                self.pos += 1;
                self.expect_sym('(')?;
                let n = self.integer()?;
                if n == 0 {
                    return self.err("zeta(0) is undefined");
                }
                self.expect_sym(')')?;
                Ok(RatFn::constant(nv, CycloNum::zeta_pow(n, 1)))
            }
            Some(Tok::Ident(s)) => match vars.iter().position(|v| *v == s) {
                Some(i) => {
                    self.pos += 1;
                    Ok(RatFn::var(nv, i))
                }
                None => self.err(format!("unknown name '{s}'")),
            },
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let v = self.expr(vars)?;
                self.expect_sym(')')?;
                Ok(v)
            }
            _ => self.err("expected an expression"),
        }
    }

    /// A coordinate that may be the literal `inf`.
    fn coord(&mut self, vars: &[String]) -> Result<Restricted, DslError> {
        if let Some(Tok::Ident(s)) = self.peek() {
            if s == "inf" {
                self.pos += 1;
                return Ok(Restricted::Infinity);
            }
        }
        Ok(Restricted::Fn(self.expr(vars)?))
    }
}

/// A parsed cycle file.
#[derive(Clone, Debug)]
pub struct CycleFile {
    pub base: Arc<BaseVariety>,
    pub chain: CycleChain,
}

fn cyc_err(line: usize, e: CycleError) -> DslError {
    DslError { line, col: 1, msg: e.to_string() }
}

fn parse_base(p: &mut Parser) -> Result<BaseVariety, DslError> {
    if p.peek() == Some(&Tok::Sym('(')) {
        let names = parse_product(p)?;
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        return Ok(BaseVariety::product(&refs));
    }
    let kind = p.ident()?;
    match kind.as_str() {
        "point" => Ok(BaseVariety::point()),
        "P1" => {
            let names = p.name_list()?;
            if names.len() != 1 {
                return p.err("P1 takes one coordinate name");
            }
            Ok(BaseVariety::line(&names[0]))
        }
        "hypersurface" => {
            p.expect_sym('(')?;
            let names = parse_product(p)?;
            p.expect_sym(';')?;
            let eq = p.expr(&names)?;
            let mut solve = None;
            if p.eat_sym(';') {
                let kw = p.ident()?;
                if kw != "solve" {
                    return p.err("expected 'solve'");
                }
                let v = p.ident()?;
                solve = Some(names.iter().position(|n| *n == v).ok_or(()).or_else(|_| p.err(format!("unknown coordinate '{v}'")))?);
            }
            p.expect_sym(')')?;
            let (num, _) = eq.num_den();
            BaseVariety::hypersurface(names, num, solve).map_err(|e| DslError { line: p.line, col: 1, msg: e.to_string() })
        }
        _ => p.err(format!("unknown base '{kind}'")),
    }
}

/// `(P1)^k` optionally followed by coordinate names (default x, y, z, w, …).
fn parse_product(p: &mut Parser) -> Result<Vec<String>, DslError> {
    p.expect_sym('(')?;
    if p.ident()? != "P1" {
        return p.err("expected 'P1'");
    }
    p.expect_sym(')')?;
    p.expect_sym('^')?;
    let k = p.integer()? as usize;
    if p.peek() == Some(&Tok::Sym('(')) {
        let names = p.name_list()?;
        if names.len() != k {
            return p.err(format!("expected {k} coordinate names"));
        }
        Ok(names)
    } else {
        let default = ["x", "y", "z", "w", "u", "v"];
        if k > default.len() {
            return p.err("name the coordinates explicitly");
        }
        Ok(default[..k].iter().map(|s| s.to_string()).collect())
    }
}

fn parse_coef(p: &mut Parser) -> Result<Rational, DslError> {
    let neg = if p.eat_sym('-') {
        true
    } else {
        p.eat_sym('+');
        false
    };
    let num = match p.next() {
        Some(Tok::Num(s)) => s,
        _ => {
            p.pos -= 1;
            return p.err("expected a coefficient");
        }
    };
    let mut q = parse_rational(&num).unwrap();
    if p.eat_sym('/') {
        let d = p.integer()?;
        if d == 0 {
            return p.err("zero denominator");
        }
        q /= Rational::from_integer(d.into());
    }
    Ok(if neg { -q } else { q })
}

/// Parses a cycle file.
pub fn parse_cycle_file(src: &str) -> Result<CycleFile, DslError> {
    let mut base: Option<BaseVariety> = None;
    let mut frozen: Option<Arc<BaseVariety>> = None;
    let mut chain = CycleChain::new();
    for (ln, raw) in src.lines().enumerate() {
        let line = ln + 1;
        let toks = lex(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = Parser { toks: &toks, pos: 0, line, end_col: raw.chars().count() + 1 };
        let kw = p.ident()?;
        match kw.as_str() {
            "base" => {
                if base.is_some() {
                    return Err(DslError { line, col: 1, msg: "base declared twice".into() });
                }
                base = Some(parse_base(&mut p)?);
            }
            "exclude" => {
                let Some(b) = base.as_mut() else { return p.err("'exclude' before 'base'") };
                if frozen.is_some() {
                    return p.err("'exclude' after the first component");
                }
                let mut locus = Vec::new();
                loop {
                    let name = p.ident()?;
                    let Some(i) = b.coord_index(&name) else { return p.err(format!("unknown coordinate '{name}'")) };
                    p.expect_sym('=')?;
                    let v = match p.coord(&[])? {
                        Restricted::Infinity => PValue::Infinity,
                        Restricted::Fn(g) => PValue::Finite(g.as_constant().unwrap()),
                    };
                    locus.push((i, v));
                    if !p.eat_sym(',') {
                        break;
                    }
                }
                b.excluded.push(locus);
            }
            "component" => {
                let Some(b) = base.as_ref() else { return p.err("'component' before 'base'") };
                let arc = frozen.get_or_insert_with(|| Arc::new(b.clone())).clone();
                let coef = parse_coef(&mut p)?;
                let form = p.ident()?;
                let z = match form.as_str() {
                    "symbol" => {
                        p.expect_sym('(')?;
                        let mut fns = Vec::new();
                        loop {
                            fns.push(p.expr(&arc.coords)?);
                            if p.eat_sym(')') {
                                break;
                            }
                            p.expect_sym(',')?;
                        }
                        ParamCycle::symbol_of_coords(arc.clone(), &fns).map_err(|e| cyc_err(line, e))?
                    }
                    "map" => {
                        let params = p.name_list()?;
                        if p.next() != Some(Tok::Arrow) {
                            p.pos -= 1;
                            return p.err("expected '->'");
                        }
                        p.expect_sym('(')?;
                        let mut x = Vec::new();
                        if !p.eat_sym(';') {
                            loop {
                                x.push(p.coord(&params)?);
                                if p.eat_sym(';') {
                                    break;
                                }
                                p.expect_sym(',')?;
                            }
                        }
                        let mut cube = Vec::new();
                        loop {
                            cube.push(p.expr(&params)?);
                            if p.eat_sym(')') {
                                break;
                            }
                            p.expect_sym(',')?;
                        }
                        ParamCycle::new(arc.clone(), params, x, cube).map_err(|e| cyc_err(line, e))?
                    }
                    _ => {
                        p.pos -= 1;
                        return p.err("expected 'symbol' or 'map'");
                    }
                };
                if let Some(n) = chain.n() {
                    if z.n() != n {
                        return Err(DslError { line, col: 1, msg: format!("component has {} cube coordinates, expected {n}", z.n()) });
                    }
                }
                chain.push(z, coef);
            }
            _ => {
                p.pos -= 1;
                return p.err(format!("unknown keyword '{kw}'"));
            }
        }
        if !p.at_end() {
            return p.err("unexpected trailing input");
        }
    }
    let base = match frozen {
        Some(b) => b,
        None => Arc::new(base.ok_or(DslError { line: 1, col: 1, msg: "missing 'base' declaration".into() })?),
    };
    Ok(CycleFile { base, chain })
}

/// Parses a single rational-function expression in the given variables.
pub fn parse_function(src: &str, vars: &[String]) -> Result<RatFn, DslError> {
    let toks = lex(src, 1)?;
    let mut p = Parser { toks: &toks, pos: 0, line: 1, end_col: src.chars().count() + 1 };
    let f = p.expr(vars)?;
    if !p.at_end() {
        return p.err("unexpected trailing input");
    }
    Ok(f)
}

/// Parses a polynomial expression (the numerator if a quotient is given).
pub fn parse_poly(src: &str, vars: &[String]) -> Result<Poly, DslError> {
    Ok(parse_function(src, vars)?.num_den().0)
}
