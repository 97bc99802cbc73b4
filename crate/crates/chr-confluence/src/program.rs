//! Rules in generalized simpagation form and whole programs.

use crate::term::{fresh_rename, Term};
use std::collections::BTreeSet;
use std::fmt;

/// `H1 \ H2 <=> G | C`: `kept` is H1, `removed` is H2, both user constraints,
/// not both empty. The guard holds built-in calls only; the body may mix both
/// sorts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: Option<String>,
    pub kept: Vec<Term>,
    pub removed: Vec<Term>,
    pub guard: Vec<Term>,
    pub body: Vec<Term>,
}

impl Rule {
    /// Variables occurring in the head (kept or removed).
    pub fn head_vars(&self) -> BTreeSet<String> {
        let mut vs = BTreeSet::new();
        for t in self.kept.iter().chain(self.removed.iter()) {
            t.collect_vars(&mut vs);
        }
        vs
    }

    /// Variables of the guard and body that are not head variables.
    pub fn local_vars(&self) -> BTreeSet<String> {
        let mut vs = BTreeSet::new();
        for t in self.guard.iter().chain(self.body.iter()) {
            t.collect_vars(&mut vs);
        }
        let heads = self.head_vars();
        vs.difference(&heads).cloned().collect()
    }

    /// A variant of this rule with globally fresh variables.
    pub fn fresh_variant(&self, counter: &mut u64) -> Rule {
        let mut all = Vec::new();
        all.extend(self.kept.iter().cloned());
        all.extend(self.removed.iter().cloned());
        all.extend(self.guard.iter().cloned());
        all.extend(self.body.iter().cloned());
        let renamed = fresh_rename(&all, counter);
        let (k, r, g) = (self.kept.len(), self.removed.len(), self.guard.len());
        Rule {
            name: self.name.clone(),
            kept: renamed[..k].to_vec(),
            removed: renamed[k..k + r].to_vec(),
            guard: renamed[k + r..k + r + g].to_vec(),
            body: renamed[k + r + g..].to_vec(),
        }
    }

    pub fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("rule#{}", index + 1))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(ts: &[Term]) -> String {
            if ts.is_empty() {
                "true".to_string()
            } else {
                ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
            }
        }
        if let Some(n) = &self.name {
            write!(f, "{n} @ ")?;
        }
        if self.kept.is_empty() {
            write!(f, "{} <=> ", join(&self.removed))?;
        } else if self.removed.is_empty() {
            write!(f, "{} ==> ", join(&self.kept))?;
        } else {
            write!(f, "{} \\ {} <=> ", join(&self.kept), join(&self.removed))?;
        }
        if !self.guard.is_empty() {
            write!(f, "{} | ", join(&self.guard))?;
        }
        write!(f, "{}.", join(&self.body))
    }
}

/// An ordered set of rules plus the declared user-constraint signatures
/// (auto-declared on first use during parsing).
#[derive(Debug, Clone, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub signatures: BTreeSet<(String, usize)>,
}

impl Program {
    pub fn is_user_constraint(&self, t: &Term) -> bool {
        t.functor()
            .map(|(f, n)| self.signatures.contains(&(f.to_string(), n)))
            .unwrap_or(false)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Term;

    fn gcd_r2() -> Rule {
        Rule {
            name: Some("r2".into()),
            kept: vec![Term::comp("gcd", vec![Term::var("N")])],
            removed: vec![Term::comp("gcd", vec![Term::var("M")])],
            guard: vec![
                Term::comp("<", vec![Term::var("N"), Term::var("M")]),
                Term::comp(
                    "is",
                    vec![Term::var("L"), Term::comp("-", vec![Term::var("M"), Term::var("N")])],
                ),
            ],
            body: vec![Term::comp("gcd", vec![Term::var("L")])],
        }
    }

    #[test]
    fn head_and_local_vars() {
        let r = gcd_r2();
        let heads: Vec<_> = r.head_vars().into_iter().collect();
        assert_eq!(heads, vec!["M".to_string(), "N".to_string()]);
        let locals: Vec<_> = r.local_vars().into_iter().collect();
        assert_eq!(locals, vec!["L".to_string()]);
    }

    #[test]
    fn fresh_variants_are_disjoint() {
        let r = gcd_r2();
        let mut c = 0;
        let v1 = r.fresh_variant(&mut c);
        let v2 = r.fresh_variant(&mut c);
        let vars1 = v1.head_vars();
        let vars2 = v2.head_vars();
        assert!(vars1.is_disjoint(&vars2));
        // shape preserved up to renaming
        use crate::term::canonical_rename_all;
        let shape =
            |r: &Rule| canonical_rename_all(&[r.kept.clone(), r.removed.clone(), r.guard.clone(), r.body.clone()].concat());
        assert_eq!(shape(&v1), shape(&v2));
        assert_eq!(shape(&v1), shape(&r));
    }

    #[test]
    fn ground_rule_variant_identical() {
        let r = Rule {
            name: None,
            kept: vec![],
            removed: vec![Term::atom("tick")],
            guard: vec![],
            body: vec![Term::atom("tock")],
        };
        let mut c = 0;
        assert_eq!(r.fresh_variant(&mut c), r);
    }
}
