//! Types, invariant patterns and equivalence patterns supplied alongside a
//! program, plus their ground-level semantics (membership of concrete states).

use crate::term::{canonical_rename_all, match_onto, Bindings, Term};
use num_traits::Signed;
use std::collections::BTreeMap;

/// Regular tree types: base sorts, lists, constraint multisets, or finite
/// unions of ground terms. Recursion only through `list`/`multiset` keeps
/// membership decidable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeExpr {
    Var,
    Const,
    Num,
    Int,
    Natural,
    PosInt,
    Any,
    Named(String),
    ListOf(Box<TypeExpr>),
    MultisetOf(ConstrPat),
    UnionGround(Vec<Term>),
}

/// A constraint shape with typed argument slots, e.g. `item(const)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrPat {
    pub functor: String,
    pub args: Vec<TypeExpr>,
}

#[derive(Debug, Clone, Default)]
pub struct TypeDefs {
    map: BTreeMap<String, TypeExpr>,
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("unknown type name {0}")]
    UnknownType(String),
    #[error("duplicate type name {0}")]
    DuplicateType(String),
    #[error("condition uses metavariable {0} that does not occur in the pattern")]
    UnboundMetaVar(String),
}

impl TypeDefs {
    pub fn define(&mut self, name: String, expr: TypeExpr) -> Result<(), SpecError> {
        if base_type(&name).is_some() || self.map.contains_key(&name) {
            return Err(SpecError::DuplicateType(name));
        }
        self.map.insert(name, expr);
        Ok(())
    }

    pub fn resolve(&self, name: &str) -> Option<TypeExpr> {
        base_type(name).or_else(|| self.map.get(name).cloned())
    }

    /// Decides membership of a ground term (or, for multiset types, a ground
    /// multiset of constraints given as a slice).
    pub fn check_ground(&self, t: &Term, ty: &TypeExpr) -> bool {
        match ty {
            TypeExpr::Any => true,
            TypeExpr::Var => t.is_var(),
            TypeExpr::Const => matches!(t, Term::Const(_)),
            TypeExpr::Num => matches!(t, Term::Int(_) | Term::Float(_)),
            TypeExpr::Int => matches!(t, Term::Int(_)),
            TypeExpr::Natural => matches!(t, Term::Int(i) if !i.is_negative()),
            TypeExpr::PosInt => matches!(t, Term::Int(i) if i.is_positive()),
            TypeExpr::Named(n) => match self.resolve(n) {
                Some(inner) => self.check_ground(t, &inner),
                None => false,
            },
            TypeExpr::ListOf(elem) => {
                let (items, tail) = t.uncons();
                tail.is_nil() && items.iter().all(|x| self.check_ground(x, elem))
            }
            TypeExpr::MultisetOf(_) => false,
            TypeExpr::UnionGround(alts) => alts.contains(t),
        }
    }

    /// Does a constraint match the element shape of a multiset type?
    pub fn check_constraint(&self, c: &Term, pat: &ConstrPat) -> bool {
        match c.functor() {
            Some((f, n)) if f == pat.functor && n == pat.args.len() => match c {
                Term::Comp(_, args) => args
                    .iter()
                    .zip(pat.args.iter())
                    .all(|(a, ty)| self.check_ground(a, ty)),
                Term::Const(_) => true,
                _ => false,
            },
            _ => false,
        }
    }

    /// Checks a ground constraint multiset against a multiset type.
    pub fn check_ground_multiset(&self, items: &[Term], ty: &TypeExpr) -> bool {
        match ty {
            TypeExpr::Any => true,
            TypeExpr::Named(n) => match self.resolve(n) {
                Some(inner) => self.check_ground_multiset(items, &inner),
                None => false,
            },
            TypeExpr::MultisetOf(pat) => items.iter().all(|c| self.check_constraint(c, pat)),
            _ => false,
        }
    }
}

pub fn base_type(name: &str) -> Option<TypeExpr> {
    Some(match name {
        "var" => TypeExpr::Var,
        "const" => TypeExpr::Const,
        "num" => TypeExpr::Num,
        "int" => TypeExpr::Int,
        "natural" => TypeExpr::Natural,
        "posint" => TypeExpr::PosInt,
        "any" => TypeExpr::Any,
        _ => return None,
    })
}

/// A state pattern: explicit constraint templates (metavariable slots are
/// `Term::Var`s) plus an optional residual-multiset slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub items: Vec<Term>,
    pub residual: Option<String>,
}

/// A meta-constraint usable in `where` clauses of the analysis DSL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    /// `type(T, X)`: the term bound to the slot belongs to type `T`. When the
    /// slot is a residual-multiset variable, `T` must be a multiset type.
    TypeIs(String, Term),
    /// `perm(L1, L2)`: the two bound lists are permutations of each other.
    Perm(Term, Term),
}

#[derive(Debug, Clone)]
pub struct InvPattern {
    pub pattern: Pattern,
    pub cond: Vec<Cond>,
}

/// A state belongs to the invariant iff it matches at least one pattern with
/// the condition satisfied. No patterns means every state is allowed.
#[derive(Debug, Clone, Default)]
pub struct InvariantSpec {
    pub patterns: Vec<InvPattern>,
}

impl InvariantSpec {
    pub fn is_trivial(&self) -> bool {
        self.patterns.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct EquivPattern {
    pub left: Pattern,
    pub right: Pattern,
    pub cond: Vec<Cond>,
}

/// User equivalence as pattern pairs; the relation used is their reflexive
/// and symmetric closure over invariant states. Empty means syntactic
/// identity (modulo renaming).
#[derive(Debug, Clone, Default)]
pub struct EquivSpec {
    pub pairs: Vec<EquivPattern>,
}

impl EquivSpec {
    pub fn is_identity(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Everything a `.cspec` file provides.
#[derive(Debug, Clone, Default)]
pub struct AnalysisSpec {
    pub types: TypeDefs,
    pub invariant: InvariantSpec,
    pub equiv: EquivSpec,
}

/// The result of matching a pattern onto a concrete store: slot bindings plus
/// the leftover constraints absorbed by the residual.
#[derive(Debug, Clone)]
pub struct PatternMatch {
    pub bindings: Bindings,
    pub leftover: Vec<Term>,
}

/// All injective matchings of the pattern's explicit items onto the store.
/// When the pattern has no residual, only matchings with empty leftover
/// qualify.
pub fn match_pattern(pat: &Pattern, store: &[Term]) -> Vec<PatternMatch> {
    let mut out = Vec::new();
    let mut used = vec![false; store.len()];
    fn go(
        items: &[Term],
        store: &[Term],
        used: &mut Vec<bool>,
        bind: &Bindings,
        out: &mut Vec<(Bindings, Vec<usize>)>,
        picked: &mut Vec<usize>,
    ) {
        match items.split_first() {
            None => out.push((bind.clone(), picked.clone())),
            Some((first, rest)) => {
                for (i, c) in store.iter().enumerate() {
                    if used[i] {
                        continue;
                    }
                    let mut b2 = bind.clone();
                    if match_onto(first, c, &mut b2) {
                        used[i] = true;
                        picked.push(i);
                        go(rest, store, used, &b2, out, picked);
                        picked.pop();
                        used[i] = false;
                    }
                }
            }
        }
    }
    let mut raw = Vec::new();
    go(
        &pat.items,
        store,
        &mut used,
        &Bindings::new(),
        &mut raw,
        &mut Vec::new(),
    );
    for (bindings, picked) in raw {
        let leftover: Vec<Term> = store
            .iter()
            .enumerate()
            .filter(|(i, _)| !picked.contains(i))
            .map(|(_, t)| t.clone())
            .collect();
        if pat.residual.is_none() && !leftover.is_empty() {
            continue;
        }
        out.push(PatternMatch { bindings, leftover });
    }
    out
}

/// Evaluates a condition on ground bindings. The residual variable, if it
/// appears in a `type` condition, is checked against the leftover multiset.
pub fn cond_holds_ground(
    cond: &[Cond],
    defs: &TypeDefs,
    bind: &Bindings,
    residual: Option<(&str, &[Term])>,
) -> bool {
    cond.iter().all(|c| match c {
        Cond::TypeIs(tyname, slot) => {
            let ty = match defs.resolve(tyname) {
                Some(t) => t,
                None => return false,
            };
            if let (Term::Var(v), Some((rname, leftover))) = (slot, residual) {
                if v == rname {
                    return defs.check_ground_multiset(leftover, &ty);
                }
            }
            let t = bind.apply(slot);
            t.is_ground() && defs.check_ground(&t, &ty)
        }
        Cond::Perm(l1, l2) => {
            let t1 = bind.apply(l1);
            let t2 = bind.apply(l2);
            ground_perm(&t1, &t2)
        }
    })
}

/// Are two ground proper lists permutations of each other?
pub fn ground_perm(t1: &Term, t2: &Term) -> bool {
    let (mut i1, tail1) = {
        let (i, t) = t1.uncons();
        (i.into_iter().cloned().collect::<Vec<_>>(), t.clone())
    };
    let (mut i2, tail2) = {
        let (i, t) = t2.uncons();
        (i.into_iter().cloned().collect::<Vec<_>>(), t.clone())
    };
    if !tail1.is_nil() || !tail2.is_nil() {
        return false;
    }
    i1.sort();
    i2.sort();
    i1 == i2
}

/// Does a concrete store satisfy the invariant?
pub fn store_in_invariant(spec: &AnalysisSpec, store: &[Term]) -> bool {
    if spec.invariant.is_trivial() {
        return true;
    }
    spec.invariant.patterns.iter().any(|p| {
        match_pattern(&p.pattern, store).into_iter().any(|m| {
            let residual = p
                .pattern
                .residual
                .as_deref()
                .map(|r| (r, m.leftover.as_slice()));
            cond_holds_ground(&p.cond, &spec.types, &m.bindings, residual)
        })
    })
}

/// Does the user equivalence relate two concrete stores? Covers reflexivity
/// (variance) and the symmetric closure of the pattern pairs.
pub fn stores_equivalent(spec: &AnalysisSpec, s1: &[Term], s2: &[Term]) -> bool {
    if canonical_rename_all(s1) == canonical_rename_all(s2) {
        return true;
    }
    spec.equiv.pairs.iter().any(|pair| {
        pair_matches(spec, pair, s1, s2) || pair_matches(spec, pair, s2, s1)
    })
}

fn pair_matches(spec: &AnalysisSpec, pair: &EquivPattern, s1: &[Term], s2: &[Term]) -> bool {
    for m1 in match_pattern(&pair.left, s1) {
        for m2 in match_pattern(&pair.right, s2) {
            // shared metavariables must agree
            let mut joint = m1.bindings.clone();
            let consistent = m2.bindings.iter().all(|(v, t)| match joint.get(v) {
                Some(existing) => existing == t,
                None => {
                    joint.bind(v.clone(), t.clone());
                    true
                }
            });
            if !consistent {
                continue;
            }
            // a shared residual slot means the leftovers must coincide
            let shared_residual = pair.left.residual.is_some()
                && pair.left.residual == pair.right.residual;
            if shared_residual {
                let mut l1 = m1.leftover.clone();
                let mut l2 = m2.leftover.clone();
                l1.sort();
                l2.sort();
                if l1 != l2 {
                    continue;
                }
            }
            let residual = pair
                .left
                .residual
                .as_deref()
                .map(|r| (r, m1.leftover.as_slice()));
            if cond_holds_ground(&pair.cond, &spec.types, &joint, residual) {
                return true;
            }
        }
    }
    false
}

/// Validates that every metavariable used in a condition occurs in the
/// governing pattern(s).
pub fn check_cond_vars(cond: &[Cond], patterns: &[&Pattern]) -> Result<(), SpecError> {
    let mut known: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for p in patterns {
        for t in &p.items {
            t.collect_vars(&mut known);
        }
        if let Some(r) = &p.residual {
            known.insert(r.clone());
        }
    }
    for c in cond {
        let mut used = std::collections::BTreeSet::new();
        match c {
            Cond::TypeIs(_, t) => t.collect_vars(&mut used),
            Cond::Perm(a, b) => {
                a.collect_vars(&mut used);
                b.collect_vars(&mut used);
            }
        }
        for v in used {
            if !known.contains(&v) {
                return Err(SpecError::UnboundMetaVar(v));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_spec() -> AnalysisSpec {
        let mut types = TypeDefs::default();
        types
            .define("constList".into(), TypeExpr::ListOf(Box::new(TypeExpr::Const)))
            .unwrap();
        types
            .define(
                "constItems".into(),
                TypeExpr::MultisetOf(ConstrPat {
                    functor: "item".into(),
                    args: vec![TypeExpr::Const],
                }),
            )
            .unwrap();
        let inv = InvariantSpec {
            patterns: vec![InvPattern {
                pattern: Pattern {
                    items: vec![Term::comp("set", vec![Term::var("L")])],
                    residual: Some("S".into()),
                },
                cond: vec![
                    Cond::TypeIs("constList".into(), Term::var("L")),
                    Cond::TypeIs("constItems".into(), Term::var("S")),
                ],
            }],
        };
        let eq = EquivSpec {
            pairs: vec![EquivPattern {
                left: Pattern {
                    items: vec![Term::comp("set", vec![Term::var("L1")])],
                    residual: Some("S".into()),
                },
                right: Pattern {
                    items: vec![Term::comp("set", vec![Term::var("L2")])],
                    residual: Some("S".into()),
                },
                cond: vec![
                    Cond::TypeIs("constList".into(), Term::var("L1")),
                    Cond::TypeIs("constList".into(), Term::var("L2")),
                    Cond::Perm(Term::var("L1"), Term::var("L2")),
                    Cond::TypeIs("constItems".into(), Term::var("S")),
                ],
            }],
        };
        AnalysisSpec {
            types,
            invariant: inv,
            equiv: eq,
        }
    }

    fn set_of(items: Vec<Term>) -> Term {
        Term::comp("set", vec![Term::list(items, Term::nil())])
    }

    #[test]
    fn invariant_membership() {
        let spec = set_spec();
        let good = vec![set_of(vec![Term::atom("a")]), Term::comp("item", vec![Term::atom("b")])];
        assert!(store_in_invariant(&spec, &good));
        let two_sets = vec![set_of(vec![]), set_of(vec![])];
        assert!(!store_in_invariant(&spec, &two_sets));
        let bad_item = vec![set_of(vec![]), Term::comp("item", vec![Term::int(3)])];
        assert!(!store_in_invariant(&spec, &bad_item));
    }

    #[test]
    fn equivalence_by_permutation() {
        let spec = set_spec();
        let s1 = vec![set_of(vec![Term::atom("a"), Term::atom("b")])];
        let s2 = vec![set_of(vec![Term::atom("b"), Term::atom("a")])];
        assert!(stores_equivalent(&spec, &s1, &s2));
        let s3 = vec![set_of(vec![Term::atom("a")])];
        let s4 = vec![set_of(vec![Term::atom("a"), Term::atom("a")])];
        assert!(!stores_equivalent(&spec, &s3, &s4));
        // reflexivity
        assert!(stores_equivalent(&spec, &s1, &s1));
    }

    #[test]
    fn ground_types() {
        let spec = set_spec();
        let l = Term::list(vec![Term::atom("a"), Term::atom("b")], Term::nil());
        assert!(spec
            .types
            .check_ground(&l, &spec.types.resolve("constList").unwrap()));
        assert!(!spec
            .types
            .check_ground(&Term::comp("f", vec![Term::atom("a")]), &TypeExpr::Num));
        let open = Term::list(vec![Term::atom("a")], Term::var("X"));
        assert!(!spec
            .types
            .check_ground(&open, &spec.types.resolve("constList").unwrap()));
    }
}
