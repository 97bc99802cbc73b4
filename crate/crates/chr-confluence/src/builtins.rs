//! The built-in constraint table: concrete `Exe` evaluation for each
//! registered predicate, arithmetic evaluation for `is`/comparisons, and the
//! modal rows consumed by the meta-level solver.

use crate::term::{compose, unify, Bindings, Subst, Term, F64};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Numeric value of a ground arithmetic expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Num {
    Int(BigInt),
    Float(f64),
}

impl Num {
    pub fn to_term(&self) -> Term {
        match self {
            Num::Int(i) => Term::Int(i.clone()),
            Num::Float(f) => Term::Float(F64(*f)),
        }
    }

    fn as_rational(&self) -> Option<BigRational> {
        match self {
            Num::Int(i) => Some(BigRational::from_integer(i.clone())),
            Num::Float(f) => BigRational::from_f64(*f),
        }
    }
}

/// Evaluation failure for arithmetic expressions: unbound variable,
/// non-numeric leaf, unknown functor, or division by zero. Feeds the
/// `Error` substitution of the enclosing built-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArithError;

/// Evaluates a ground arithmetic expression over `+ - * / // mod` and unary
/// minus. Integer `/` yields an integer when the division is exact, a float
/// otherwise. `//` and `mod` require integers; `mod` takes the divisor's sign.
pub fn eval_arith(t: &Term) -> Result<Num, ArithError> {
    match t {
        Term::Int(i) => Ok(Num::Int(i.clone())),
        Term::Float(f) => Ok(Num::Float(f.0)),
        Term::Var(_) | Term::Const(_) | Term::Cell(_, _) => Err(ArithError),
        Term::Comp(op, args) => match (op.as_str(), args.as_slice()) {
            ("-", [x]) => match eval_arith(x)? {
                Num::Int(i) => Ok(Num::Int(-i)),
                Num::Float(f) => Ok(Num::Float(-f)),
            },
            ("+", [a, b]) => num_binop(a, b, |x, y| Ok(x + y), |x, y| Ok(x + y)),
            ("-", [a, b]) => num_binop(a, b, |x, y| Ok(x - y), |x, y| Ok(x - y)),
            ("*", [a, b]) => num_binop(a, b, |x, y| Ok(x * y), |x, y| Ok(x * y)),
            ("/", [a, b]) => {
                let x = eval_arith(a)?;
                let y = eval_arith(b)?;
                match (&x, &y) {
                    (Num::Int(i), Num::Int(j)) => {
                        if j.is_zero() {
                            Err(ArithError)
                        } else if (i % j).is_zero() {
                            Ok(Num::Int(i / j))
                        } else {
                            float_div(&x, &y)
                        }
                    }
                    _ => float_div(&x, &y),
                }
            }
            ("//", [a, b]) => match (eval_arith(a)?, eval_arith(b)?) {
                (Num::Int(i), Num::Int(j)) => {
                    if j.is_zero() {
                        Err(ArithError)
                    } else {
                        // truncating division, matching ISO (//)/2
                        Ok(Num::Int(i / j))
                    }
                }
                _ => Err(ArithError),
            },
            ("mod", [a, b]) => match (eval_arith(a)?, eval_arith(b)?) {
                (Num::Int(i), Num::Int(j)) => {
                    if j.is_zero() {
                        Err(ArithError)
                    } else {
                        let mut m = &i % &j;
                        if !m.is_zero() && (m.is_negative() != j.is_negative()) {
                            m += &j;
                        }
                        Ok(Num::Int(m))
                    }
                }
                _ => Err(ArithError),
            },
            _ => Err(ArithError),
        },
    }
}

fn num_binop(
    a: &Term,
    b: &Term,
    fi: impl Fn(BigInt, BigInt) -> Result<BigInt, ArithError>,
    ff: impl Fn(f64, f64) -> Result<f64, ArithError>,
) -> Result<Num, ArithError> {
    match (eval_arith(a)?, eval_arith(b)?) {
        (Num::Int(i), Num::Int(j)) => Ok(Num::Int(fi(i, j)?)),
        (x, y) => {
            let xf = to_f64(&x)?;
            let yf = to_f64(&y)?;
            Ok(Num::Float(ff(xf, yf)?))
        }
    }
}

fn to_f64(n: &Num) -> Result<f64, ArithError> {
    match n {
        Num::Int(i) => i.to_f64().ok_or(ArithError),
        Num::Float(f) => Ok(*f),
    }
}

fn float_div(x: &Num, y: &Num) -> Result<Num, ArithError> {
    let yf = to_f64(y)?;
    if yf == 0.0 {
        return Err(ArithError);
    }
    Ok(Num::Float(to_f64(x)? / yf))
}

/// Exact comparison of two numbers (mixed int/float compares via rationals).
pub fn num_cmp(x: &Num, y: &Num) -> Option<std::cmp::Ordering> {
    match (x, y) {
        (Num::Int(i), Num::Int(j)) => Some(i.cmp(j)),
        _ => {
            let rx = x.as_rational()?;
            let ry = y.as_rational()?;
            Some(rx.cmp(&ry))
        }
    }
}

/// Argument classes for modal rows, keyed on what the meta-level solver can
/// know about an argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgClass {
    /// Name of an object variable.
    Var,
    /// A number (or a ground arithmetic expression evaluating to one).
    Arith,
    /// A non-variable, non-numeric ground term.
    Other,
    Any,
}

/// What executing a built-in can do, given argument classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ModalStatus {
    Succeeds,
    Fails,
    Errors,
    SucceedsOrFails,
    SucceedsOrErrors,
    Unknown,
}

/// Sort attached to an output position on success.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindSort {
    Num,
    Int,
}

/// One row of the modal table: argument classes to verdict, with binding
/// effects (output argument index, result sort).
#[derive(Debug, Clone)]
pub struct ModalRow {
    pub args: Vec<ArgClass>,
    pub status: ModalStatus,
    pub binds: Vec<(usize, BindSort)>,
}

type ExecFn = fn(&[Term]) -> Subst;

/// A registered built-in: concrete evaluator plus modal metadata.
pub struct Builtin {
    pub name: String,
    pub arity: usize,
    exec: ExecFn,
    pub rows: Vec<ModalRow>,
}

/// The table of built-in constraint predicates. Always contains `=`/2 with
/// mgu semantics; the shipped default covers the core Prolog set.
pub struct BuiltinTable {
    entries: BTreeMap<(String, usize), Builtin>,
}

#[derive(Debug, thiserror::Error)]
pub enum BuiltinError {
    #[error("unregistered built-in predicate {0}/{1}")]
    Unregistered(String, usize),
    #[error("bad modal table config at line {0}: {1}")]
    Config(usize, String),
}

impl BuiltinTable {
    /// The default core set: `=`, `is`, `<`, `=<`, `>`, `>=`, `==`, `var`,
    /// `nonvar`, `ground`.
    pub fn core() -> Self {
        let mut t = BuiltinTable {
            entries: BTreeMap::new(),
        };
        t.insert(Builtin {
            name: "=".into(),
            arity: 2,
            exec: exec_unify,
            rows: vec![row(&[ArgClass::Any, ArgClass::Any], ModalStatus::SucceedsOrFails, &[])],
        });
        t.insert(Builtin {
            name: "is".into(),
            arity: 2,
            exec: exec_is,
            rows: vec![
                row(
                    &[ArgClass::Var, ArgClass::Arith],
                    ModalStatus::Succeeds,
                    &[(0, BindSort::Num)],
                ),
                row(&[ArgClass::Arith, ArgClass::Arith], ModalStatus::SucceedsOrFails, &[]),
                row(&[ArgClass::Any, ArgClass::Var], ModalStatus::Errors, &[]),
                row(&[ArgClass::Any, ArgClass::Other], ModalStatus::Errors, &[]),
                row(&[ArgClass::Other, ArgClass::Arith], ModalStatus::Fails, &[]),
            ],
        });
        for op in ["<", "=<", ">", ">="] {
            t.insert(Builtin {
                name: op.into(),
                arity: 2,
                exec: exec_cmp,
                rows: vec![
                    row(&[ArgClass::Arith, ArgClass::Arith], ModalStatus::SucceedsOrFails, &[]),
                    row(&[ArgClass::Var, ArgClass::Any], ModalStatus::Errors, &[]),
                    row(&[ArgClass::Any, ArgClass::Var], ModalStatus::Errors, &[]),
                    row(&[ArgClass::Other, ArgClass::Any], ModalStatus::Errors, &[]),
                    row(&[ArgClass::Any, ArgClass::Other], ModalStatus::Errors, &[]),
                ],
            });
        }
        t.insert(Builtin {
            name: "==".into(),
            arity: 2,
            exec: exec_struct_eq,
            rows: vec![row(&[ArgClass::Any, ArgClass::Any], ModalStatus::SucceedsOrFails, &[])],
        });
        t.insert(Builtin {
            name: "var".into(),
            arity: 1,
            exec: exec_var,
            rows: vec![
                row(&[ArgClass::Var], ModalStatus::Succeeds, &[]),
                row(&[ArgClass::Arith], ModalStatus::Fails, &[]),
                row(&[ArgClass::Other], ModalStatus::Fails, &[]),
                row(&[ArgClass::Any], ModalStatus::SucceedsOrFails, &[]),
            ],
        });
        t.insert(Builtin {
            name: "nonvar".into(),
            arity: 1,
            exec: exec_nonvar,
            rows: vec![
                row(&[ArgClass::Var], ModalStatus::Fails, &[]),
                row(&[ArgClass::Arith], ModalStatus::Succeeds, &[]),
                row(&[ArgClass::Other], ModalStatus::Succeeds, &[]),
                row(&[ArgClass::Any], ModalStatus::SucceedsOrFails, &[]),
            ],
        });
        t.insert(Builtin {
            name: "ground".into(),
            arity: 1,
            exec: exec_ground,
            rows: vec![
                row(&[ArgClass::Var], ModalStatus::Fails, &[]),
                row(&[ArgClass::Arith], ModalStatus::Succeeds, &[]),
                row(&[ArgClass::Any], ModalStatus::SucceedsOrFails, &[]),
            ],
        });
        t
    }

    /// A table restricted to the named predicates (still always keeping `=`/2).
    pub fn restricted(names: &[String]) -> Result<Self, BuiltinError> {
        let core = Self::core();
        let mut t = BuiltinTable {
            entries: BTreeMap::new(),
        };
        for name in names {
            let found: Vec<_> = core
                .entries
                .values()
                .filter(|b| b.name == *name)
                .collect();
            if found.is_empty() {
                return Err(BuiltinError::Unregistered(name.clone(), 0));
            }
            for b in found {
                t.insert(Builtin {
                    name: b.name.clone(),
                    arity: b.arity,
                    exec: b.exec,
                    rows: b.rows.clone(),
                });
            }
        }
        if !t.entries.contains_key(&("=".to_string(), 2)) {
            let eq = &core.entries[&("=".to_string(), 2)];
            t.insert(Builtin {
                name: "=".into(),
                arity: 2,
                exec: eq.exec,
                rows: eq.rows.clone(),
            });
        }
        Ok(t)
    }

    fn insert(&mut self, b: Builtin) {
        self.entries.insert((b.name.clone(), b.arity), b);
    }

    pub fn get(&self, name: &str, arity: usize) -> Option<&Builtin> {
        self.entries.get(&(name.to_string(), arity))
    }

    pub fn is_builtin(&self, t: &Term) -> bool {
        t.functor()
            .map(|(f, n)| self.get(f, n).is_some())
            .unwrap_or(false)
    }

    pub fn predicates(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.values().map(|b| (b.name.as_str(), b.arity))
    }

    /// Overrides modal rows from a declarative config. One row per line:
    /// `pred/arity: class,... -> verdict [bind N sort]...`
    /// with classes `var|arith|other|any`, verdicts `succeeds|fails|errors|
    /// succeeds_or_fails|succeeds_or_errors|unknown`, sorts `num|int`.
    pub fn load_modal_config(&mut self, text: &str) -> Result<(), BuiltinError> {
        let mut fresh: BTreeMap<(String, usize), Vec<ModalRow>> = BTreeMap::new();
        for (lno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| BuiltinError::Config(lno + 1, msg.to_string());
            let (head, rest) = line.split_once(':').ok_or_else(|| err("missing ':'"))?;
            let (pred, arity) = head.trim().split_once('/').ok_or_else(|| err("missing '/'"))?;
            let arity: usize = arity.trim().parse().map_err(|_| err("bad arity"))?;
            let (classes, rest) = rest.split_once("->").ok_or_else(|| err("missing '->'"))?;
            let args = classes
                .split(',')
                .map(|c| match c.trim() {
                    "var" => Ok(ArgClass::Var),
                    "arith" => Ok(ArgClass::Arith),
                    "other" => Ok(ArgClass::Other),
                    "any" => Ok(ArgClass::Any),
                    other => Err(err(&format!("unknown class {other}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if args.len() != arity {
                return Err(err("class count does not match arity"));
            }
            let mut parts = rest.split_whitespace();
            let status = match parts.next().ok_or_else(|| err("missing verdict"))? {
                "succeeds" => ModalStatus::Succeeds,
                "fails" => ModalStatus::Fails,
                "errors" => ModalStatus::Errors,
                "succeeds_or_fails" => ModalStatus::SucceedsOrFails,
                "succeeds_or_errors" => ModalStatus::SucceedsOrErrors,
                "unknown" => ModalStatus::Unknown,
                other => return Err(err(&format!("unknown verdict {other}"))),
            };
            let mut binds = Vec::new();
            while let Some(tok) = parts.next() {
                if tok != "bind" {
                    return Err(err(&format!("unexpected token {tok}")));
                }
                let idx: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("bad bind index"))?;
                let sort = match parts.next() {
                    Some("num") => BindSort::Num,
                    Some("int") => BindSort::Int,
                    _ => return Err(err("bad bind sort")),
                };
                binds.push((idx, sort));
            }
            let key = (pred.trim().to_string(), arity);
            if !self.entries.contains_key(&key) {
                return Err(BuiltinError::Unregistered(key.0, key.1));
            }
            fresh.entry(key).or_default().push(ModalRow { args, status, binds });
        }
        for (key, rows) in fresh {
            self.entries.get_mut(&key).unwrap().rows = rows;
        }
        Ok(())
    }
}

impl fmt::Debug for BuiltinTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BuiltinTable{:?}", self.entries.keys().collect::<Vec<_>>())
    }
}

fn row(args: &[ArgClass], status: ModalStatus, binds: &[(usize, BindSort)]) -> ModalRow {
    ModalRow {
        args: args.to_vec(),
        status,
        binds: binds.to_vec(),
    }
}

fn exec_unify(args: &[Term]) -> Subst {
    unify(&args[0], &args[1])
}

fn exec_is(args: &[Term]) -> Subst {
    match eval_arith(&args[1]) {
        Err(ArithError) => Subst::Error,
        Ok(v) => unify(&args[0], &v.to_term()),
    }
}

fn exec_cmp(args: &[Term]) -> Subst {
    // the comparison operator is recovered from the call term by exe()
    unreachable!("comparison dispatch handled in exe: {:?}", args)
}

fn exec_struct_eq(args: &[Term]) -> Subst {
    if args[0] == args[1] {
        Subst::empty()
    } else {
        Subst::Failure
    }
}

fn exec_var(args: &[Term]) -> Subst {
    if args[0].is_var() {
        Subst::empty()
    } else {
        Subst::Failure
    }
}

fn exec_nonvar(args: &[Term]) -> Subst {
    if args[0].is_var() {
        Subst::Failure
    } else {
        Subst::empty()
    }
}

fn exec_ground(args: &[Term]) -> Subst {
    if args[0].is_ground() {
        Subst::empty()
    } else {
        Subst::Failure
    }
}

fn cmp_holds(op: &str, ord: std::cmp::Ordering) -> bool {
    use std::cmp::Ordering::*;
    match op {
        "<" => ord == Less,
        "=<" => ord != Greater,
        ">" => ord == Greater,
        ">=" => ord != Less,
        _ => unreachable!(),
    }
}

/// Evaluates one built-in constraint. `Failure` is logical failure; `Error`
/// means the built-in cannot evaluate (insufficient instantiation, division
/// by zero, non-numeric arguments to arithmetic).
pub fn exe(table: &BuiltinTable, call: &Term) -> Result<Subst, BuiltinError> {
    let (name, arity) = call
        .functor()
        .ok_or_else(|| BuiltinError::Unregistered(call.to_string(), 0))?;
    let b = table
        .get(name, arity)
        .ok_or_else(|| BuiltinError::Unregistered(name.to_string(), arity))?;
    let args: &[Term] = match call {
        Term::Comp(_, a) => a,
        _ => &[],
    };
    if matches!(name, "<" | "=<" | ">" | ">=") {
        let x = eval_arith(&args[0]);
        let y = eval_arith(&args[1]);
        return Ok(match (x, y) {
            (Ok(vx), Ok(vy)) => match num_cmp(&vx, &vy) {
                Some(ord) if cmp_holds(name, ord) => Subst::empty(),
                Some(_) => Subst::Failure,
                None => Subst::Error,
            },
            _ => Subst::Error,
        });
    }
    Ok((b.exec)(args))
}

/// Left-to-right evaluation of a built-in sequence, threading bindings and
/// absorbing on the first failure/error. The empty sequence yields the empty
/// proper substitution.
pub fn exe_seq(table: &BuiltinTable, calls: &[Term]) -> Result<Subst, BuiltinError> {
    let mut acc = Subst::empty();
    for call in calls {
        let bound = match &acc {
            Subst::Proper(b) => b.apply(call),
            special => return Ok(special.clone()),
        };
        let step = exe(table, &bound)?;
        acc = compose(&acc, &step);
        if !acc.is_proper() {
            return Ok(acc);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Term;

    fn call(op: &str, args: Vec<Term>) -> Term {
        Term::comp(op, args)
    }

    #[test]
    fn eval_arith_basics() {
        assert_eq!(
            eval_arith(&call("-", vec![Term::int(63), Term::int(49)])),
            Ok(Num::Int(BigInt::from(14)))
        );
        assert_eq!(
            eval_arith(&call("/", vec![Term::int(1), Term::int(0)])),
            Err(ArithError)
        );
        assert_eq!(
            eval_arith(&call("+", vec![Term::var("X"), Term::int(1)])),
            Err(ArithError)
        );
        assert_eq!(
            eval_arith(&call("mod", vec![Term::int(-7), Term::int(3)])),
            Ok(Num::Int(BigInt::from(2)))
        );
        assert_eq!(
            eval_arith(&call("/", vec![Term::int(6), Term::int(2)])),
            Ok(Num::Int(BigInt::from(3)))
        );
        assert_eq!(
            eval_arith(&call("/", vec![Term::int(7), Term::int(2)])),
            Ok(Num::Float(3.5))
        );
    }

    #[test]
    fn exe_nonvar_cases() {
        let t = BuiltinTable::core();
        assert_eq!(
            exe(&t, &call("nonvar", vec![Term::atom("a")])).unwrap(),
            Subst::empty()
        );
        assert_eq!(
            exe(&t, &call("nonvar", vec![Term::var("X")])).unwrap(),
            Subst::Failure
        );
    }

    #[test]
    fn exe_is_error_and_success() {
        let t = BuiltinTable::core();
        let div = call("is", vec![Term::var("X"), call("/", vec![Term::int(1), Term::int(0)])]);
        assert_eq!(exe(&t, &div).unwrap(), Subst::Error);
        let ok = call("is", vec![Term::var("X"), call("+", vec![Term::int(2), Term::int(1)])]);
        let s = exe(&t, &ok).unwrap();
        assert_eq!(s.bindings().unwrap().get("X"), Some(&Term::int(3)));
    }

    #[test]
    fn exe_seq_order_sensitivity() {
        // (X is Y+1, Y=2) errors; (Y=2, X is Y+1) binds Y/2, X/3
        let t = BuiltinTable::core();
        let is_call = call("is", vec![Term::var("X"), call("+", vec![Term::var("Y"), Term::int(1)])]);
        let eq_call = call("=", vec![Term::var("Y"), Term::int(2)]);
        assert_eq!(
            exe_seq(&t, &[is_call.clone(), eq_call.clone()]).unwrap(),
            Subst::Error
        );
        let s = exe_seq(&t, &[eq_call, is_call]).unwrap();
        let b = s.bindings().unwrap();
        assert_eq!(b.get("Y"), Some(&Term::int(2)));
        assert_eq!(b.get("X"), Some(&Term::int(3)));
    }

    #[test]
    fn exe_seq_empty() {
        let t = BuiltinTable::core();
        assert_eq!(exe_seq(&t, &[]).unwrap(), Subst::empty());
    }

    #[test]
    fn modal_config_roundtrip() {
        let mut t = BuiltinTable::core();
        t.load_modal_config("var/1: any -> succeeds_or_fails\n# comment\n")
            .unwrap();
        assert_eq!(t.get("var", 1).unwrap().rows.len(), 1);
        assert!(t.load_modal_config("frob/3: any,any,any -> fails").is_err());
    }
}
