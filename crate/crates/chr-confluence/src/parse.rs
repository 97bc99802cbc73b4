//! Parsers for CHR programs in generalized simpagation form, query strings,
//! and the analysis DSL (`type` / `invariant` / `equiv` statements).

use crate::analysis::{
    base_type, check_cond_vars, AnalysisSpec, Cond, ConstrPat, EquivPattern, EquivSpec,
    InvPattern, InvariantSpec, Pattern, TypeExpr,
};
use crate::builtins::BuiltinTable;
use crate::program::{Program, Rule};
use crate::term::{Term, F64};
use num_bigint::BigInt;

#[derive(Debug, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Var(String),
    Int(BigInt),
    Float(f64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCTS: &[&str] = &[
    "<=>", "==>", "=<", ">=", "==", "++", "//", "(", ")", "[", "]", "{", "}", ",", "|", "@", ".",
    "\\", "~", "=", "<", ">", "+", "-", "*", "/",
];

fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let bump = |c: char, line: &mut usize, col: &mut usize| {
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump(c, &mut line, &mut col);
            i += 1;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tline, tcol) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let is_float = i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit();
            if is_float {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| ParseError {
                    line: tline,
                    col: tcol,
                    msg: format!("bad float {text}"),
                })?)
            } else {
                Tok::Int(text.parse().unwrap())
            };
            out.push(Lexed { tok, line: tline, col: tcol });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if c.is_uppercase() || c == '_' {
                Tok::Var(text)
            } else {
                Tok::Atom(text)
            };
            out.push(Lexed { tok, line: tline, col: tcol });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let mut matched = None;
        for p in PUNCTS {
            if rest.starts_with(p) {
                matched = Some(*p);
                break;
            }
        }
        match matched {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push(Lexed {
                    tok: Tok::Punct(p),
                    line: tline,
                    col: tcol,
                });
            }
            None => {
                return Err(ParseError {
                    line: tline,
                    col: tcol,
                    msg: format!("unexpected character {c:?}"),
                })
            }
        }
    }
    out.push(Lexed {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if *self.peek() == Tok::Punct(PUNCTS.iter().find(|x| **x == p).copied().unwrap_or("")) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {:?}", self.peek()))
        }
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Atom(a) if a == kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    // --- terms ------------------------------------------------------------

    /// A constraint: an expression, optionally completed into an infix
    /// built-in (`=`, `is`, comparisons, `==`).
    fn constraint(&mut self) -> Result<Term, ParseError> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Punct(p @ ("=" | "<" | "=<" | ">" | ">=" | "==")) => Some(p.to_string()),
            Tok::Atom(a) if a == "is" => Some("is".to_string()),
            _ => None,
        };
        match op {
            Some(op) => {
                self.advance();
                let rhs = self.expr()?;
                Ok(Term::Comp(op, vec![lhs, rhs]))
            }
            None => Ok(lhs),
        }
    }

    fn expr(&mut self) -> Result<Term, ParseError> {
        let mut acc = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("+") => "+",
                Tok::Punct("-") => "-",
                _ => break,
            };
            self.advance();
            let rhs = self.mul_expr()?;
            acc = Term::Comp(op.into(), vec![acc, rhs]);
        }
        Ok(acc)
    }

    fn mul_expr(&mut self) -> Result<Term, ParseError> {
        let mut acc = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("*") => "*",
                Tok::Punct("/") => "/",
                Tok::Punct("//") => "//",
                Tok::Atom(a) if a == "mod" => "mod",
                _ => break,
            };
            self.advance();
            let rhs = self.unary_expr()?;
            acc = Term::Comp(op.into(), vec![acc, rhs]);
        }
        Ok(acc)
    }

    fn unary_expr(&mut self) -> Result<Term, ParseError> {
        if self.at_punct("-") {
            self.advance();
            let inner = self.primary()?;
            return Ok(match inner {
                Term::Int(i) => Term::Int(-i),
                Term::Float(f) => Term::Float(F64(-f.0)),
                other => Term::Comp("-".into(), vec![other]),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Term::Int(i))
            }
            Tok::Float(f) => {
                self.advance();
                Ok(Term::Float(F64(f)))
            }
            Tok::Var(v) => {
                self.advance();
                Ok(Term::Var(v))
            }
            Tok::Atom(a) => {
                self.advance();
                if self.at_punct("(") {
                    self.advance();
                    let mut args = vec![self.constraint()?];
                    while self.eat_punct(",") {
                        args.push(self.constraint()?);
                    }
                    self.expect_punct(")")?;
                    Ok(Term::Comp(a, args))
                } else {
                    Ok(Term::Const(a))
                }
            }
            Tok::Punct("[") => {
                self.advance();
                if self.eat_punct("]") {
                    return Ok(Term::nil());
                }
                let mut items = vec![self.expr()?];
                while self.eat_punct(",") {
                    items.push(self.expr()?);
                }
                let tail = if self.eat_punct("|") {
                    self.expr()?
                } else {
                    Term::nil()
                };
                self.expect_punct("]")?;
                Ok(Term::list(items, tail))
            }
            Tok::Punct("(") => {
                self.advance();
                let t = self.constraint()?;
                self.expect_punct(")")?;
                Ok(t)
            }
            other => self.err(format!("expected a term, found {other:?}")),
        }
    }

    fn constraint_list_until(&mut self, stops: &[&str]) -> Result<Vec<Term>, ParseError> {
        let mut out = vec![self.constraint()?];
        while self.eat_punct(",") {
            out.push(self.constraint()?);
        }
        let _ = stops;
        Ok(out)
    }

    // --- rules ------------------------------------------------------------

    fn rule(&mut self, table: &BuiltinTable) -> Result<Rule, ParseError> {
        // optional `name @`
        let name = match (self.peek().clone(), self.peek2().clone()) {
            (Tok::Atom(a), Tok::Punct("@")) => {
                self.advance();
                self.advance();
                Some(a)
            }
            _ => None,
        };
        let first = self.constraint_list_until(&["\\", "<=>", "==>"])?;
        let (kept, removed, arrow_prop) = if self.eat_punct("\\") {
            let second = self.constraint_list_until(&["<=>"])?;
            self.expect_punct("<=>")?;
            (first, second, false)
        } else if self.eat_punct("<=>") {
            (Vec::new(), first, false)
        } else if self.eat_punct("==>") {
            (first, Vec::new(), true)
        } else {
            return self.err("expected `\\`, `<=>` or `==>` after rule head");
        };
        let _ = arrow_prop;
        let part1 = self.constraint_list_until(&["|", "."])?;
        let (guard, body) = if self.eat_punct("|") {
            let body = self.constraint_list_until(&["."])?;
            (part1, body)
        } else {
            (Vec::new(), part1)
        };
        self.expect_punct(".")?;
        let strip_true = |ts: Vec<Term>| -> Vec<Term> {
            ts.into_iter().filter(|t| !matches!(t, Term::Const(c) if c == "true")).collect()
        };
        let rule = Rule {
            name,
            kept: strip_true(kept),
            removed: strip_true(removed),
            guard: strip_true(guard),
            body: strip_true(body),
        };
        if rule.kept.is_empty() && rule.removed.is_empty() {
            return self.err("rule head must not be empty");
        }
        for h in rule.kept.iter().chain(rule.removed.iter()) {
            match h.functor() {
                Some((f, n)) => {
                    if table.get(f, n).is_some() {
                        return self.err(format!("built-in {f}/{n} cannot appear in a rule head"));
                    }
                }
                None => return self.err(format!("head constraint {h} is not a predicate")),
            }
        }
        for g in &rule.guard {
            match g.functor() {
                Some((f, n)) if table.get(f, n).is_some() => {}
                _ => {
                    return self.err(format!(
                        "guard atom {g} is not a registered built-in"
                    ))
                }
            }
        }
        Ok(rule)
    }
}

/// Parses a CHR program. Guards are checked against the built-in table;
/// head and user body constraints are auto-declared as user signatures.
pub fn parse_program(src: &str, table: &BuiltinTable) -> Result<Program, ParseError> {
    let mut p = Parser::new(src)?;
    let mut rules = Vec::new();
    while *p.peek() != Tok::Eof {
        rules.push(p.rule(table)?);
    }
    let mut program = Program {
        rules,
        signatures: Default::default(),
    };
    let mut sigs = std::collections::BTreeSet::new();
    for r in &program.rules {
        for t in r.kept.iter().chain(r.removed.iter()) {
            if let Some((f, n)) = t.functor() {
                sigs.insert((f.to_string(), n));
            }
        }
        for t in &r.body {
            if let Some((f, n)) = t.functor() {
                if table.get(f, n).is_none() {
                    sigs.insert((f.to_string(), n));
                }
            }
        }
    }
    program.signatures = sigs;
    Ok(program)
}

/// Parses a comma-separated constraint multiset; the empty string is the
/// empty store.
pub fn parse_query(src: &str) -> Result<Vec<Term>, ParseError> {
    let mut p = Parser::new(src)?;
    if *p.peek() == Tok::Eof {
        return Ok(Vec::new());
    }
    let list = p.constraint_list_until(&[])?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input after query");
    }
    Ok(list)
}

// --- analysis DSL ----------------------------------------------------------

impl Parser {
    fn type_expr(&mut self) -> Result<TypeExpr, ParseError> {
        // `list(T)` and `multiset(c(T,...))` are structural; a bare known name
        // is a base or defined type; anything else is a union of ground terms.
        if let Tok::Atom(a) = self.peek().clone() {
            if a == "list" && *self.peek2() == Tok::Punct("(") {
                self.advance();
                self.advance();
                let inner = self.type_expr()?;
                self.expect_punct(")")?;
                return Ok(TypeExpr::ListOf(Box::new(inner)));
            }
            if a == "multiset" && *self.peek2() == Tok::Punct("(") {
                self.advance();
                self.advance();
                let pat = self.constr_pat()?;
                self.expect_punct(")")?;
                return Ok(TypeExpr::MultisetOf(pat));
            }
            if *self.peek2() != Tok::Punct("(") && *self.peek2() != Tok::Punct("|") {
                self.advance();
                return Ok(base_type(&a).unwrap_or(TypeExpr::Named(a)));
            }
        }
        let mut alts = vec![self.ground_term()?];
        while self.eat_punct("|") {
            alts.push(self.ground_term()?);
        }
        Ok(TypeExpr::UnionGround(alts))
    }

    fn ground_term(&mut self) -> Result<Term, ParseError> {
        let t = self.expr()?;
        if !t.is_ground() {
            return self.err(format!("union alternative {t} must be ground"));
        }
        Ok(t)
    }

    fn constr_pat(&mut self) -> Result<ConstrPat, ParseError> {
        let name = match self.advance() {
            Tok::Atom(a) => a,
            other => return self.err(format!("expected constraint name, found {other:?}")),
        };
        let mut args = Vec::new();
        if self.eat_punct("(") {
            args.push(self.type_expr()?);
            while self.eat_punct(",") {
                args.push(self.type_expr()?);
            }
            self.expect_punct(")")?;
        }
        Ok(ConstrPat {
            functor: name,
            args,
        })
    }

    fn pattern(&mut self) -> Result<Pattern, ParseError> {
        self.expect_punct("{")?;
        let mut items = Vec::new();
        if !self.at_punct("}") {
            items.push(self.constraint()?);
            while self.eat_punct(",") {
                items.push(self.constraint()?);
            }
        }
        self.expect_punct("}")?;
        let residual = if self.eat_punct("++") {
            match self.advance() {
                Tok::Var(v) => Some(v),
                other => return self.err(format!("expected residual variable, found {other:?}")),
            }
        } else {
            None
        };
        Ok(Pattern { items, residual })
    }

    fn cond_list(&mut self) -> Result<Vec<Cond>, ParseError> {
        let mut out = Vec::new();
        loop {
            match self.advance() {
                Tok::Atom(a) if a == "type" => {
                    self.expect_punct("(")?;
                    let ty = match self.advance() {
                        Tok::Atom(n) => n,
                        other => return self.err(format!("expected type name, found {other:?}")),
                    };
                    self.expect_punct(",")?;
                    let slot = self.expr()?;
                    self.expect_punct(")")?;
                    out.push(Cond::TypeIs(ty, slot));
                }
                Tok::Atom(a) if a == "perm" => {
                    self.expect_punct("(")?;
                    let l1 = self.expr()?;
                    self.expect_punct(",")?;
                    let l2 = self.expr()?;
                    self.expect_punct(")")?;
                    out.push(Cond::Perm(l1, l2));
                }
                other => return self.err(format!("expected `type` or `perm`, found {other:?}")),
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(out)
    }
}

/// Parses the analysis DSL. An empty string gives the trivial invariant
/// (all states) and the identity equivalence.
pub fn parse_analysis_spec(src: &str) -> Result<AnalysisSpec, ParseError> {
    let mut p = Parser::new(src)?;
    let mut spec = AnalysisSpec::default();
    while *p.peek() != Tok::Eof {
        if p.eat_kw("type") {
            let name = match p.advance() {
                Tok::Atom(a) => a,
                other => return p.err(format!("expected type name, found {other:?}")),
            };
            p.expect_punct("=")?;
            let expr = p.type_expr()?;
            p.expect_punct(".")?;
            spec.types
                .define(name, expr)
                .map_err(|e| ParseError {
                    line: 0,
                    col: 0,
                    msg: e.to_string(),
                })?;
        } else if p.eat_kw("invariant") {
            let pattern = p.pattern()?;
            let cond = if p.eat_kw("where") { p.cond_list()? } else { Vec::new() };
            p.expect_punct(".")?;
            check_cond_vars(&cond, &[&pattern]).map_err(|e| ParseError {
                line: 0,
                col: 0,
                msg: e.to_string(),
            })?;
            spec.invariant.patterns.push(InvPattern { pattern, cond });
        } else if p.eat_kw("equiv") {
            let left = p.pattern()?;
            p.expect_punct("~")?;
            let right = p.pattern()?;
            let cond = if p.eat_kw("where") { p.cond_list()? } else { Vec::new() };
            p.expect_punct(".")?;
            check_cond_vars(&cond, &[&left, &right]).map_err(|e| ParseError {
                line: 0,
                col: 0,
                msg: e.to_string(),
            })?;
            spec.equiv.pairs.push(EquivPattern { left, right, cond });
        } else {
            return p.err(format!(
                "expected `type`, `invariant` or `equiv`, found {:?}",
                p.peek()
            ));
        }
    }
    validate_spec(&spec)?;
    Ok(spec)
}

fn validate_spec(spec: &AnalysisSpec) -> Result<(), ParseError> {
    let check_ty = |name: &str| -> Result<(), ParseError> {
        if spec.types.resolve(name).is_none() {
            return Err(ParseError {
                line: 0,
                col: 0,
                msg: format!("unknown type name {name}"),
            });
        }
        Ok(())
    };
    let conds = spec
        .invariant
        .patterns
        .iter()
        .map(|p| &p.cond)
        .chain(spec.equiv.pairs.iter().map(|p| &p.cond));
    for cond in conds {
        for c in cond {
            if let Cond::TypeIs(name, _) = c {
                check_ty(name)?;
            }
        }
    }
    Ok(())
}

pub type InvariantSpecAlias = InvariantSpec;
pub type EquivSpecAlias = EquivSpec;

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> BuiltinTable {
        BuiltinTable::core()
    }

    #[test]
    fn parse_set_rule() {
        let p = parse_program("set(L), item(X) <=> set([X|L]).", &table()).unwrap();
        assert_eq!(p.rules.len(), 1);
        let r = &p.rules[0];
        assert!(r.kept.is_empty());
        assert_eq!(r.removed.len(), 2);
        assert!(r.guard.is_empty());
        assert_eq!(r.body.len(), 1);
        assert_eq!(r.body[0].to_string(), "set([X|L])");
        assert!(p.signatures.contains(&("set".to_string(), 1)));
        assert!(p.signatures.contains(&("item".to_string(), 1)));
    }

    #[test]
    fn parse_gcd_rule() {
        let src = "r2 @ gcd(N) \\ gcd(M) <=> N<M, L is M-N | gcd(L).";
        let p = parse_program(src, &table()).unwrap();
        let r = &p.rules[0];
        assert_eq!(r.name.as_deref(), Some("r2"));
        assert_eq!(r.kept.len(), 1);
        assert_eq!(r.removed.len(), 1);
        assert_eq!(r.guard.len(), 2);
        assert_eq!(r.guard[0].to_string(), "N<M");
        assert_eq!(r.guard[1].to_string(), "L is M-N");
        assert_eq!(r.body[0].to_string(), "gcd(L)");
    }

    #[test]
    fn parse_empty_program() {
        let p = parse_program("% nothing here\n", &table()).unwrap();
        assert!(p.rules.is_empty());
    }

    #[test]
    fn parse_propagation_and_true_guard() {
        let p = parse_program("p(X) ==> q(X).\nr1 @ gcd(N) \\ gcd(N) <=> true.", &table()).unwrap();
        assert_eq!(p.rules[0].kept.len(), 1);
        assert!(p.rules[0].removed.is_empty());
        assert!(p.rules[1].body.is_empty());
    }

    #[test]
    fn reject_empty_head_and_builtin_head() {
        assert!(parse_program("true <=> true.", &table()).is_err());
        assert!(parse_program("X = Y <=> p(X).", &table()).is_err());
        assert!(parse_program("p(X) <=> frob(X) | q(X).", &table()).is_err());
    }

    #[test]
    fn parse_query_basics() {
        let q = parse_query("set([]), item(a), item(b)").unwrap();
        assert_eq!(q.len(), 3);
        assert_eq!(q[0].to_string(), "set([])");
        assert!(parse_query("").unwrap().is_empty());
        let q2 = parse_query("gcd(49), gcd(63)").unwrap();
        assert_eq!(q2[1].to_string(), "gcd(63)");
    }

    #[test]
    fn parse_spec_set_program() {
        let src = "\
type constList = list(const).
type constItems = multiset(item(const)).
invariant { set(L) } ++ S where type(constList, L), type(constItems, S).
equiv { set(L1) } ++ S ~ { set(L2) } ++ S where type(constList, L1), type(constList, L2), perm(L1, L2), type(constItems, S).
";
        let spec = parse_analysis_spec(src).unwrap();
        assert_eq!(spec.invariant.patterns.len(), 1);
        assert_eq!(spec.equiv.pairs.len(), 1);
        let inv = &spec.invariant.patterns[0];
        assert_eq!(inv.pattern.items.len(), 1);
        assert_eq!(inv.pattern.residual.as_deref(), Some("S"));
        assert_eq!(inv.cond.len(), 2);
    }

    #[test]
    fn parse_spec_empty_and_errors() {
        let spec = parse_analysis_spec("").unwrap();
        assert!(spec.invariant.is_trivial());
        assert!(spec.equiv.is_identity());
        assert!(parse_analysis_spec("invariant { p(N) } where type(mystery, N).").is_err());
        assert!(parse_analysis_spec("invariant { p(N) } where type(num, M).").is_err());
    }

    #[test]
    fn pretty_print_round_trip() {
        let src = "r2 @ gcd(N) \\ gcd(M) <=> N<M, L is M-N | gcd(L).\nset(L), item(X) <=> set([X|L]).";
        let p1 = parse_program(src, &table()).unwrap();
        let printed = p1.to_string();
        let p2 = parse_program(&printed, &table()).unwrap();
        use crate::term::canonical_rename_all;
        for (a, b) in p1.rules.iter().zip(p2.rules.iter()) {
            let flat = |r: &crate::program::Rule| {
                canonical_rename_all(
                    &[r.kept.clone(), r.removed.clone(), r.guard.clone(), r.body.clone()].concat(),
                )
            };
            assert_eq!(flat(a), flat(b));
            assert_eq!(a.name, b.name);
        }
    }
}
