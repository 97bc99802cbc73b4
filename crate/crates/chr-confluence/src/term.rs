//! First-order terms, substitutions with absorbing failure/error values,
//! unification with occurs check, and canonical variable renaming.

use num_bigint::BigInt;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A float with a total order (IEEE `total_cmp`), so terms can be ordered
/// and used as map keys.
#[derive(Debug, Clone, Copy)]
pub struct F64(pub f64);

impl PartialEq for F64 {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for F64 {}
impl PartialOrd for F64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for F64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl std::hash::Hash for F64 {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

/// Object-level first-order terms. Lists are right-nested cells ending in
/// the empty-list constant `[]` or a variable. Arity-0 symbols are `Const`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
    Int(BigInt),
    Float(F64),
    Comp(String, Vec<Term>),
    Cell(Box<Term>, Box<Term>),
}

impl Term {
    pub fn nil() -> Term {
        Term::Const("[]".into())
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Term::Const(c) if c == "[]")
    }

    pub fn int(i: i64) -> Term {
        Term::Int(BigInt::from(i))
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.into())
    }

    pub fn atom(name: &str) -> Term {
        Term::Const(name.into())
    }

    pub fn comp(f: &str, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::Const(f.into())
        } else {
            Term::Comp(f.into(), args)
        }
    }

    /// Builds a list term from elements and a tail (`Term::nil()` for proper lists).
    pub fn list(items: Vec<Term>, tail: Term) -> Term {
        items
            .into_iter()
            .rev()
            .fold(tail, |acc, x| Term::Cell(Box::new(x), Box::new(acc)))
    }

    /// Functor name and arity of a constraint-shaped term.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Const(c) => Some((c.as_str(), 0)),
            Term::Comp(f, args) => Some((f.as_str(), args.len())),
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) | Term::Int(_) | Term::Float(_) => true,
            Term::Comp(_, args) => args.iter().all(Term::is_ground),
            Term::Cell(h, t) => h.is_ground() && t.is_ground(),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Comp(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            Term::Cell(h, t) => {
                h.collect_vars(out);
                t.collect_vars(out);
            }
            _ => {}
        }
    }

    fn occurs(&self, v: &str, bind: &Bindings) -> bool {
        match self {
            Term::Var(x) => {
                if x == v {
                    true
                } else if let Some(t) = bind.map.get(x) {
                    t.occurs(v, bind)
                } else {
                    false
                }
            }
            Term::Comp(_, args) => args.iter().any(|a| a.occurs(v, bind)),
            Term::Cell(h, t) => h.occurs(v, bind) || t.occurs(v, bind),
            _ => false,
        }
    }

    /// Splits a list term into its element prefix and tail.
    pub fn uncons(&self) -> (Vec<&Term>, &Term) {
        let mut items = Vec::new();
        let mut cur = self;
        while let Term::Cell(h, t) = cur {
            items.push(h.as_ref());
            cur = t.as_ref();
        }
        (items, cur)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
            Term::Int(i) => write!(f, "{i}"),
            Term::Float(x) => write!(f, "{:?}", x.0),
            Term::Comp(op, args) if args.len() == 2 && is_infix(op) => {
                write!(f, "{}{}{}", args[0], op, args[1])
            }
            Term::Comp(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Term::Cell(_, _) => {
                let (items, tail) = self.uncons();
                write!(f, "[")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                if !tail.is_nil() {
                    write!(f, "|{tail}")?;
                }
                write!(f, "]")
            }
        }
    }
}

pub fn is_infix(op: &str) -> bool {
    matches!(
        op,
        "=" | "is" | "<" | "=<" | ">" | ">=" | "==" | "+" | "-" | "*" | "/" | "//" | "mod"
    )
}

/// A finite, idempotent map from variables to terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings {
    map: BTreeMap<String, Term>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, v: &str) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn domain(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.map.iter()
    }

    /// Binds `v` to `t`, keeping the map idempotent: `t` is resolved against
    /// the current bindings and existing ranges are rewritten.
    pub fn bind(&mut self, v: String, t: Term) {
        let t = self.apply(&t);
        let mut single = BTreeMap::new();
        single.insert(v.clone(), t.clone());
        for range in self.map.values_mut() {
            *range = apply_map(&single, range);
        }
        self.map.insert(v, t);
    }

    pub fn apply(&self, t: &Term) -> Term {
        apply_map(&self.map, t)
    }

    pub fn apply_all(&self, ts: &[Term]) -> Vec<Term> {
        ts.iter().map(|t| self.apply(t)).collect()
    }
}

fn apply_map(map: &BTreeMap<String, Term>, t: &Term) -> Term {
    match t {
        Term::Var(v) => match map.get(v) {
            Some(u) => u.clone(),
            None => t.clone(),
        },
        Term::Comp(f, args) => Term::Comp(f.clone(), args.iter().map(|a| apply_map(map, a)).collect()),
        Term::Cell(h, tl) => Term::Cell(
            Box::new(apply_map(map, h)),
            Box::new(apply_map(map, tl)),
        ),
        _ => t.clone(),
    }
}

/// A substitution: either a proper binding map or one of the absorbing
/// special values produced by built-in evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subst {
    Proper(Bindings),
    Failure,
    Error,
}

impl Subst {
    pub fn empty() -> Subst {
        Subst::Proper(Bindings::new())
    }

    pub fn is_proper(&self) -> bool {
        matches!(self, Subst::Proper(_))
    }

    pub fn bindings(&self) -> Option<&Bindings> {
        match self {
            Subst::Proper(b) => Some(b),
            _ => None,
        }
    }
}

/// Composition `s1 ∘ s2` (apply `s1` first). The first special substitution
/// encountered absorbs the rest.
pub fn compose(s1: &Subst, s2: &Subst) -> Subst {
    let b1 = match s1 {
        Subst::Proper(b) => b,
        special => return special.clone(),
    };
    let b2 = match s2 {
        Subst::Proper(b) => b,
        special => return special.clone(),
    };
    let mut out = Bindings::new();
    for (v, t) in b1.iter() {
        out.map.insert(v.clone(), b2.apply(t));
    }
    for (v, t) in b2.iter() {
        out.map.entry(v.clone()).or_insert_with(|| t.clone());
    }
    // drop trivial x/x entries introduced by composition
    out.map.retain(|v, t| !matches!(t, Term::Var(x) if x == v));
    Subst::Proper(out)
}

/// Most general unifier with occurs check. Non-unifiability is `Failure`,
/// never `Error`.
pub fn unify(t1: &Term, t2: &Term) -> Subst {
    let mut bind = Bindings::new();
    if unify_into(t1, t2, &mut bind) {
        Subst::Proper(bind)
    } else {
        Subst::Failure
    }
}

fn walk<'a>(t: &'a Term, bind: &'a Bindings) -> &'a Term {
    let mut cur = t;
    while let Term::Var(v) = cur {
        match bind.map.get(v) {
            Some(next) => cur = next,
            None => break,
        }
    }
    cur
}

fn unify_into(t1: &Term, t2: &Term, bind: &mut Bindings) -> bool {
    let a = walk(t1, bind).clone();
    let b = walk(t2, bind).clone();
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x == y => true,
        (Term::Var(x), other) => {
            if other.occurs(x, bind) {
                false
            } else {
                bind.bind(x.clone(), other.clone());
                true
            }
        }
        (other, Term::Var(y)) => {
            if other.occurs(y, bind) {
                false
            } else {
                bind.bind(y.clone(), other.clone());
                true
            }
        }
        (Term::Const(c1), Term::Const(c2)) => c1 == c2,
        (Term::Int(i1), Term::Int(i2)) => i1 == i2,
        (Term::Float(f1), Term::Float(f2)) => f1 == f2,
        (Term::Comp(f1, a1), Term::Comp(f2, a2)) => {
            f1 == f2
                && a1.len() == a2.len()
                && a1.iter().zip(a2.iter()).all(|(x, y)| unify_into(x, y, bind))
        }
        (Term::Cell(h1, r1), Term::Cell(h2, r2)) => {
            unify_into(h1, h2, bind) && unify_into(r1, r2, bind)
        }
        _ => false,
    }
}

/// One-way matching: variables of `pattern` bind to subterms of `term`;
/// variables of `term` only match themselves. Used for head matching into a
/// store that may itself contain variables.
pub fn match_onto(pattern: &Term, term: &Term, bind: &mut Bindings) -> bool {
    match pattern {
        Term::Var(v) => match bind.map.get(v) {
            Some(bound) => bound == term,
            None => {
                bind.map.insert(v.clone(), term.clone());
                true
            }
        },
        Term::Const(c1) => matches!(term, Term::Const(c2) if c1 == c2),
        Term::Int(i1) => matches!(term, Term::Int(i2) if i1 == i2),
        Term::Float(f1) => matches!(term, Term::Float(f2) if f1 == f2),
        Term::Comp(f1, a1) => match term {
            Term::Comp(f2, a2) if f1 == f2 && a1.len() == a2.len() => a1
                .iter()
                .zip(a2.iter())
                .all(|(p, t)| match_onto(p, t, bind)),
            _ => false,
        },
        Term::Cell(h1, t1) => match term {
            Term::Cell(h2, t2) => match_onto(h1, h2, bind) && match_onto(t1, t2, bind),
            _ => false,
        },
    }
}

/// Renames variables to `v0, v1, ...` by first occurrence in a left-to-right
/// depth-first traversal. Two terms are variants iff their canonical forms
/// are identical.
pub fn canonical_rename(t: &Term) -> Term {
    let mut map = BTreeMap::new();
    rename_with(t, &mut map)
}

/// Canonically renames a sequence of terms with one shared numbering.
pub fn canonical_rename_all(ts: &[Term]) -> Vec<Term> {
    let mut map = BTreeMap::new();
    ts.iter().map(|t| rename_with(t, &mut map)).collect()
}

fn rename_with(t: &Term, map: &mut BTreeMap<String, String>) -> Term {
    match t {
        Term::Var(v) => {
            let next = format!("v{}", map.len());
            let name = map.entry(v.clone()).or_insert(next);
            Term::Var(name.clone())
        }
        Term::Comp(f, args) => {
            Term::Comp(f.clone(), args.iter().map(|a| rename_with(a, map)).collect())
        }
        Term::Cell(h, tl) => Term::Cell(
            Box::new(rename_with(h, map)),
            Box::new(rename_with(tl, map)),
        ),
        _ => t.clone(),
    }
}

/// Replaces every variable by a fresh one (consistently), using `counter`
/// for global freshness.
pub fn fresh_rename(ts: &[Term], counter: &mut u64) -> Vec<Term> {
    let mut vars = BTreeSet::new();
    for t in ts {
        t.collect_vars(&mut vars);
    }
    let mut map = BTreeMap::new();
    for v in vars {
        *counter += 1;
        map.insert(v, Term::Var(format!("_V{}", *counter)));
    }
    ts.iter().map(|t| apply_map_terms(&map, t)).collect()
}

fn apply_map_terms(map: &BTreeMap<String, Term>, t: &Term) -> Term {
    match t {
        Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Comp(f, args) => Term::Comp(
            f.clone(),
            args.iter().map(|a| apply_map_terms(map, a)).collect(),
        ),
        Term::Cell(h, tl) => Term::Cell(
            Box::new(apply_map_terms(map, h)),
            Box::new(apply_map_terms(map, tl)),
        ),
        _ => t.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(args: Vec<Term>) -> Term {
        Term::comp("p", args)
    }

    #[test]
    fn unify_direct_binding() {
        let s = unify(&Term::var("X"), &Term::atom("a"));
        let b = s.bindings().unwrap();
        assert_eq!(b.get("X"), Some(&Term::atom("a")));
    }

    #[test]
    fn unify_constant_clash() {
        assert_eq!(unify(&Term::atom("a"), &Term::atom("b")), Subst::Failure);
    }

    #[test]
    fn unify_structural_mgu() {
        // f(X,b) vs f(a,Y) -> {X/a, Y/b}
        let t1 = Term::comp("f", vec![Term::var("X"), Term::atom("b")]);
        let t2 = Term::comp("f", vec![Term::atom("a"), Term::var("Y")]);
        let s = unify(&t1, &t2);
        let b = s.bindings().unwrap();
        assert_eq!(b.get("X"), Some(&Term::atom("a")));
        assert_eq!(b.get("Y"), Some(&Term::atom("b")));
    }

    #[test]
    fn unify_occurs_check() {
        let t2 = Term::comp("f", vec![Term::var("X")]);
        assert_eq!(unify(&Term::var("X"), &t2), Subst::Failure);
    }

    #[test]
    fn apply_simple() {
        let mut b = Bindings::new();
        b.bind("X".into(), Term::atom("a"));
        let t = p(vec![Term::var("X"), Term::var("Y")]);
        assert_eq!(b.apply(&t), p(vec![Term::atom("a"), Term::var("Y")]));
    }

    #[test]
    fn apply_identity() {
        let b = Bindings::new();
        let t = p(vec![Term::var("X")]);
        assert_eq!(b.apply(&t), t);
    }

    #[test]
    fn compose_threads_bindings() {
        // {X/Y} ∘ {Y/a} = {X/a, Y/a}
        let mut b1 = Bindings::new();
        b1.bind("X".into(), Term::var("Y"));
        let mut b2 = Bindings::new();
        b2.bind("Y".into(), Term::atom("a"));
        let s = compose(&Subst::Proper(b1), &Subst::Proper(b2));
        let b = s.bindings().unwrap();
        assert_eq!(b.get("X"), Some(&Term::atom("a")));
        assert_eq!(b.get("Y"), Some(&Term::atom("a")));
    }

    #[test]
    fn compose_absorbs_specials() {
        let mut b2 = Bindings::new();
        b2.bind("Y".into(), Term::atom("a"));
        assert_eq!(compose(&Subst::Failure, &Subst::Proper(b2)), Subst::Failure);
        assert_eq!(
            compose(&Subst::empty(), &Subst::empty()),
            Subst::empty()
        );
    }

    #[test]
    fn canonical_rename_first_occurrence() {
        // p(B,A,B) -> p(v0,v1,v0), and p(X,Y,X) is the same variant
        let t1 = p(vec![Term::var("B"), Term::var("A"), Term::var("B")]);
        let t2 = p(vec![Term::var("X"), Term::var("Y"), Term::var("X")]);
        let c1 = canonical_rename(&t1);
        assert_eq!(
            c1,
            p(vec![Term::var("v0"), Term::var("v1"), Term::var("v0")])
        );
        assert_eq!(c1, canonical_rename(&t2));
    }

    #[test]
    fn canonical_rename_idempotent() {
        let t = Term::comp(
            "f",
            vec![Term::var("Q"), Term::comp("g", vec![Term::var("Z"), Term::var("Q")])],
        );
        let once = canonical_rename(&t);
        assert_eq!(canonical_rename(&once), once);
    }

    #[test]
    fn match_is_one_way() {
        // head var may bind to a store term, store vars never bind
        let mut b = Bindings::new();
        assert!(match_onto(
            &p(vec![Term::var("H")]),
            &p(vec![Term::var("S")]),
            &mut b
        ));
        assert_eq!(b.get("H"), Some(&Term::var("S")));
        let mut b2 = Bindings::new();
        assert!(!match_onto(
            &p(vec![Term::atom("a")]),
            &p(vec![Term::var("S")]),
            &mut b2
        ));
    }

    #[test]
    fn list_display_round() {
        let l = Term::list(vec![Term::atom("a"), Term::atom("b")], Term::nil());
        assert_eq!(l.to_string(), "[a,b]");
        let l2 = Term::list(vec![Term::var("X")], Term::var("T"));
        assert_eq!(l2.to_string(), "[X|T]");
    }
}
