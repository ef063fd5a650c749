//! Operator expressions over the generators and multiplication by `q₊, q₋, q₀`.
//!
//! Grammar (whitespace ignored):
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := atom ('^' uint)?
//! atom   := 'I'|'D+'|'D-'|'D0'|'A1'|'A2'|'A3'|'Lap'|'q+'|'q-'|'q0'|number|'(' expr ')'
//! ```
//! Numbers may carry a trailing `i` (`0.5i`). `*` is composition; a leading `-`
//! in an expression is accepted as `(-1)*term`.

use std::fmt;
use std::sync::Arc;

use crate::fourier::{CoefficientStack, QuadratureGrid};
use crate::symbol::{self, Direction, Generator, Symbol};
use crate::wigner::{self, HalfInteger, SpinHalfEntry};
use crate::{CMat, Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorExpr {
    Gen(Generator),
    /// Multiplication by `q_which`.
    Mult(Direction),
    Scalar(C64),
    Sum(Vec<OperatorExpr>),
    /// Composition, leftmost applied last.
    Product(Vec<OperatorExpr>),
    Power(Box<OperatorExpr>, u32),
}

const KNOWN: &str = "I, D+, D-, D0, A1, A2, A3, Lap, q+, q-, q0";

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(C64),
    Op(char),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| Error::Parse { pos: start, msg: format!("bad number '{s}'") })?;
            if i < chars.len() && chars[i] == 'i' {
                i += 1;
                out.push((start, Tok::Num(C64::new(0.0, v))));
            } else {
                out.push((start, Tok::Num(C64::new(v, 0.0))));
            }
            continue;
        }
        if "+-*^()".contains(c) {
            out.push((start, Tok::Op(c)));
            i += 1;
            continue;
        }
        if c.is_alphabetic() {
            // 'D' and 'q' take one of + - 0 as part of the name
            if (c == 'D' || c == 'q') && i + 1 < chars.len() && "+-0".contains(chars[i + 1]) {
                out.push((start, Tok::Ident(chars[i..i + 2].iter().collect())));
                i += 2;
                continue;
            }
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
            continue;
        }
        return Err(Error::Parse { pos: start, msg: format!("unexpected character '{c}'") });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.here(), msg: msg.into() })
    }

    fn expr(&mut self) -> Result<OperatorExpr> {
        let mut terms = Vec::new();
        if self.peek() == Some(&Tok::Op('-')) {
            self.pos += 1;
            terms.push(negate(self.term()?));
        } else {
            terms.push(self.term()?);
        }
        loop {
            match self.peek() {
                Some(Tok::Op('+')) => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(Tok::Op('-')) => {
                    self.pos += 1;
                    terms.push(negate(self.term()?));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { OperatorExpr::Sum(terms) })
    }

    fn term(&mut self) -> Result<OperatorExpr> {
        let mut factors = vec![self.factor()?];
        while self.peek() == Some(&Tok::Op('*')) {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { OperatorExpr::Product(factors) })
    }

    fn factor(&mut self) -> Result<OperatorExpr> {
        let a = self.atom()?;
        if self.peek() == Some(&Tok::Op('^')) {
            self.pos += 1;
            match self.peek() {
                Some(Tok::Num(v)) if v.im == 0.0 && v.re >= 0.0 && v.re.fract() == 0.0 => {
                    let k = v.re as u32;
                    self.pos += 1;
                    return Ok(OperatorExpr::Power(Box::new(a), k));
                }
                _ => return self.err("expected a non-negative integer exponent"),
            }
        }
        Ok(a)
    }

    fn atom(&mut self) -> Result<OperatorExpr> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(OperatorExpr::Scalar(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(&Tok::Op(')')) {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Tok::Ident(name) => {
                let e = match name.as_str() {
                    "q+" => OperatorExpr::Mult(Direction::Plus),
                    "q-" => OperatorExpr::Mult(Direction::Minus),
                    "q0" => OperatorExpr::Mult(Direction::Zero),
                    "Laplacian" => return self.err(format!("unknown identifier '{name}' (known: {KNOWN})")),
                    other => match Generator::parse(other) {
                        Ok(g) => OperatorExpr::Gen(g),
                        Err(_) => return self.err(format!("unknown identifier '{name}' (known: {KNOWN})")),
                    },
                };
                self.pos += 1;
                Ok(e)
            }
            Tok::Op(c) => self.err(format!("unexpected '{c}'")),
        }
    }
}

fn negate(e: OperatorExpr) -> OperatorExpr {
    OperatorExpr::Product(vec![OperatorExpr::Scalar(C64::new(-1.0, 0.0)), e])
}

/// Parses an operator expression.
pub fn parse_operator(text: &str) -> Result<OperatorExpr> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.chars().count() };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

fn fmt_scalar(c: C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else {
        format!("({} + {}i)", c.re, c.im)
    }
}

impl fmt::Display for OperatorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorExpr::Gen(g) => write!(f, "{}", g.name()),
            OperatorExpr::Mult(d) => write!(f, "q{}", d.label()),
            OperatorExpr::Scalar(c) => write!(f, "{}", fmt_scalar(*c)),
            OperatorExpr::Sum(ts) => {
                write!(f, "(")?;
                for (k, t) in ts.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            OperatorExpr::Product(ts) => {
                for (k, t) in ts.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
            OperatorExpr::Power(e, k) => write!(f, "({e})^{k}"),
        }
    }
}

impl OperatorExpr {
    /// Differential order (upper bound).
    pub fn order(&self) -> u32 {
        match self {
            OperatorExpr::Gen(g) => g.order(),
            OperatorExpr::Mult(_) | OperatorExpr::Scalar(_) => 0,
            OperatorExpr::Sum(ts) => ts.iter().map(|t| t.order()).max().unwrap_or(0),
            OperatorExpr::Product(ts) => ts.iter().map(|t| t.order()).sum(),
            OperatorExpr::Power(e, k) => e.order() * k,
        }
    }

    /// Number of multiplication factors along the longest product; the band grows by half this.
    pub fn multiplier_degree(&self) -> u32 {
        match self {
            OperatorExpr::Mult(_) => 1,
            OperatorExpr::Gen(_) | OperatorExpr::Scalar(_) => 0,
            OperatorExpr::Sum(ts) => ts.iter().map(|t| t.multiplier_degree()).max().unwrap_or(0),
            OperatorExpr::Product(ts) => ts.iter().map(|t| t.multiplier_degree()).sum(),
            OperatorExpr::Power(e, k) => e.multiplier_degree() * k,
        }
    }

    pub fn is_invariant(&self) -> bool {
        self.multiplier_degree() == 0
    }

    /// Exact action on Fourier coefficients; the band grows by `multiplier_degree/2`.
    pub fn apply(&self, f: &CoefficientStack) -> CoefficientStack {
        match self {
            OperatorExpr::Gen(g) => f.map_blocks(|l, b| g.block(l) * b),
            OperatorExpr::Mult(d) => match d {
                Direction::Plus => wigner::product_with_spin_half(f, SpinHalfEntry::PlusMinus),
                Direction::Minus => wigner::product_with_spin_half(f, SpinHalfEntry::MinusPlus),
                Direction::Zero => wigner::product_with_spin_half(f, SpinHalfEntry::MinusMinus)
                    .add_scaled(&wigner::product_with_spin_half(f, SpinHalfEntry::PlusPlus), C64::new(-1.0, 0.0)),
            },
            OperatorExpr::Scalar(c) => f.scale(*c),
            OperatorExpr::Sum(ts) => {
                let mut acc = CoefficientStack::zeros(f.band());
                for t in ts {
                    acc = acc.add_scaled(&t.apply(f), C64::new(1.0, 0.0));
                }
                acc
            }
            OperatorExpr::Product(ts) => ts.iter().rev().fold(f.clone(), |acc, t| t.apply(&acc)),
            OperatorExpr::Power(e, k) => (0..*k).fold(f.clone(), |acc, _| e.apply(&acc)),
        }
    }

    /// Symbol block of an invariant expression at level `l`.
    fn invariant_block(&self, l: HalfInteger) -> CMat {
        let d = l.dim();
        match self {
            OperatorExpr::Gen(g) => g.block(l),
            OperatorExpr::Mult(_) => unreachable!("multipliers are not invariant"),
            OperatorExpr::Scalar(c) => CMat::identity(d, d) * *c,
            OperatorExpr::Sum(ts) => ts.iter().fold(CMat::zeros(d, d), |a, t| a + t.invariant_block(l)),
            OperatorExpr::Product(ts) => ts.iter().fold(CMat::identity(d, d), |a, t| a * t.invariant_block(l)),
            OperatorExpr::Power(e, k) => {
                let b = e.invariant_block(l);
                (0..*k).fold(CMat::identity(d, d), |a, _| a * &b)
            }
        }
    }

    /// Symbol up to `band`. Invariant expressions give closed-form blocks; others are
    /// extracted exactly from the spectral action and sampled on `grid`.
    pub fn symbol(&self, band: HalfInteger, grid: Option<&Arc<QuadratureGrid>>) -> Result<Symbol> {
        if self.is_invariant() {
            return Symbol::invariant(band.levels().map(|l| self.invariant_block(l)).collect());
        }
        let grid = grid.ok_or_else(|| Error::Layout(format!("'{self}' is x-dependent and needs an x-grid")))?;
        symbol::extract_symbol_spectral(&|f| Ok(self.apply(f)), grid, band)
    }
}

/// Default x-grid for varying symbols: mirror band `x_band`, exact products up to `3·x_band`.
pub fn default_x_grid(x_band: HalfInteger) -> Result<Arc<QuadratureGrid>> {
    QuadratureGrid::for_capacity(x_band, HalfInteger::from_twice(3 * x_band.twice))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{self, GridFunction};
    use crate::symbol::q_function;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn h(t: u32) -> HalfInteger {
        HalfInteger::from_twice(t)
    }

    #[test]
    fn parse_shapes() {
        use OperatorExpr::*;
        assert_eq!(parse_operator("I").unwrap(), Gen(Generator::I));
        assert_eq!(
            parse_operator("D+*D- + D0^2 + D0").unwrap(),
            Sum(vec![
                Product(vec![Gen(Generator::DPlus), Gen(Generator::DMinus)]),
                Power(Box::new(Gen(Generator::D0)), 2),
                Gen(Generator::D0)
            ])
        );
        assert_eq!(
            parse_operator("2*(I - Lap)").unwrap(),
            Product(vec![
                Scalar(C64::new(2.0, 0.0)),
                Sum(vec![Gen(Generator::I), Product(vec![Scalar(C64::new(-1.0, 0.0)), Gen(Generator::Laplacian)])])
            ])
        );
        assert_eq!(parse_operator(" q0 * 0.5i ").unwrap(), Product(vec![Mult(Direction::Zero), Scalar(C64::new(0.0, 0.5))]));
    }

    #[test]
    fn parse_errors() {
        match parse_operator("D0 + X").unwrap_err() {
            Error::Parse { pos, msg } => {
                assert_eq!(pos, 5);
                assert!(msg.contains("'X'") && msg.contains("Lap"));
            }
            e => panic!("{e:?}"),
        }
        assert!(matches!(parse_operator("(D0"), Err(Error::Parse { pos: 3, .. })));
        assert!(parse_operator("D0 D0").is_err());
        assert!(parse_operator("D0^x").is_err());
        assert!(parse_operator("").is_err());
    }

    #[test]
    fn orders() {
        assert_eq!(parse_operator("D+*D- + D0").unwrap().order(), 2);
        assert_eq!(parse_operator("(2 - 0.5i*q0)*(I - Lap)").unwrap().order(), 2);
        assert_eq!(parse_operator("q0*q+*D0").unwrap().multiplier_degree(), 2);
    }

    #[test]
    fn ladder_relation_numerically() {
        // ∂₊∂₋ + ∂₀² − ∂₀ = Δ·(−1) in this normalisation
        let lhs = parse_operator("D+*D- + D0^2 - D0").unwrap().symbol(h(8), None).unwrap();
        let lap = parse_operator("Lap").unwrap().symbol(h(8), None).unwrap();
        let s = lhs.add(&lap).unwrap();
        assert!(s.max_abs_upto(h(8)) < 1e-12);
    }

    #[test]
    fn spectral_apply_matches_pointwise() {
        let grid = fourier::QuadratureGrid::new(h(6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = CoefficientStack::random(&mut rng, h(3));
        let e = parse_operator("(2 - 0.5i*q0)*q+").unwrap();
        let out = fourier::synthesize_grid(&e.apply(&f), &grid).unwrap();
        let fv = fourier::synthesize_grid(&f, &grid).unwrap();
        let want = GridFunction::from_fn(&grid, |x| (2.0 + x.a().im) * x.entry(2, 1));
        assert!(out.max_abs_diff(&fv.zip_with(&want, |a, b| a * b)) < 1e-11);
    }

    #[test]
    fn symbols_of_expressions() {
        let grid = default_x_grid(h(2)).unwrap();
        let s = parse_operator("q0*D0").unwrap().symbol(h(4), Some(&grid)).unwrap();
        let m = Symbol::multiplier(&q_function(Direction::Zero), &grid, h(4)).unwrap();
        let d0 = Symbol::builtin(Generator::D0, h(4));
        assert!(s.max_abs_diff(&m.mul(&d0).unwrap()).unwrap() < 1e-12);
        assert!(parse_operator("q0").unwrap().symbol(h(2), None).is_err());
        let inv = parse_operator("2*(I - Lap)").unwrap().symbol(h(3), None).unwrap();
        assert!((inv.block(0, h(2))[(1, 1)].re - 6.0).abs() < 1e-14);
    }
}
