//! Syntactic behavior analysis: which capabilities a process may exercise,
//! where, and with which names, computed without running it.
//!
//! All six analyses are homomorphic over parallel composition and invariant
//! under replication. Policies evaluate them on captured continuations and
//! on processes about to be shipped elsewhere, which is what lets a verdict
//! depend on what a process would do later.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ast::{
    Action, Branch, Capability, Location, Process, SetElem, SetExpr, Substitution,
};
use crate::model::apply_substitution;

/// An element of an analysis result: a location constant, a location
/// variable, or a capability.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SetItem {
    Constant(String),
    Variable(String),
    Cap(Capability),
}

impl fmt::Display for SetItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetItem::Constant(n) | SetItem::Variable(n) => f.write_str(n),
            SetItem::Cap(c) => f.write_str(c.keyword()),
        }
    }
}

/// The value of a set expression. `UniversePlus(extra)` is the set of all
/// variables united with `extra`; it stays symbolic until an intersection
/// with a finite set collapses it. Extras never hold variables (those are
/// already in the universe half).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetValue {
    Finite(BTreeSet<SetItem>),
    UniversePlus(BTreeSet<SetItem>),
}

/// Failure while evaluating a condition or set expression.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unbound process variable `{0}`")]
    UnboundProcessVariable(String),
    #[error("unknown set `{0}`")]
    UnknownSet(String),
    #[error("the variable universe cannot be {0}")]
    UnsupportedUniverse(&'static str),
    #[error("a set literal may only hold locations and capabilities")]
    BadSetElement,
}

impl SetValue {
    pub fn finite(items: impl IntoIterator<Item = SetItem>) -> Self {
        SetValue::Finite(items.into_iter().collect())
    }

    fn normalized_extras(items: BTreeSet<SetItem>) -> BTreeSet<SetItem> {
        items.into_iter().filter(|i| !matches!(i, SetItem::Variable(_))).collect()
    }

    pub fn union(self, other: SetValue) -> SetValue {
        match (self, other) {
            (SetValue::Finite(a), SetValue::Finite(b)) => {
                SetValue::Finite(a.into_iter().chain(b).collect())
            }
            (SetValue::UniversePlus(a), SetValue::Finite(b))
            | (SetValue::Finite(b), SetValue::UniversePlus(a)) => {
                SetValue::UniversePlus(Self::normalized_extras(a.into_iter().chain(b).collect()))
            }
            (SetValue::UniversePlus(a), SetValue::UniversePlus(b)) => {
                SetValue::UniversePlus(a.into_iter().chain(b).collect())
            }
        }
    }

    pub fn intersect(self, other: SetValue) -> SetValue {
        match (self, other) {
            (SetValue::Finite(a), SetValue::Finite(b)) => {
                SetValue::Finite(a.intersection(&b).cloned().collect())
            }
            (SetValue::UniversePlus(a), SetValue::Finite(b))
            | (SetValue::Finite(b), SetValue::UniversePlus(a)) => SetValue::Finite(
                b.iter()
                    .filter(|i| matches!(i, SetItem::Variable(_)) || a.contains(*i))
                    .cloned()
                    .collect(),
            ),
            (SetValue::UniversePlus(a), SetValue::UniversePlus(b)) => {
                SetValue::UniversePlus(a.intersection(&b).cloned().collect())
            }
        }
    }

    pub fn contains(&self, item: &SetItem) -> Result<bool, EvalError> {
        match self {
            SetValue::Finite(items) => Ok(items.contains(item)),
            SetValue::UniversePlus(extra) => match item {
                SetItem::Variable(_) => Ok(true),
                SetItem::Constant(_) => Ok(extra.contains(item)),
                SetItem::Cap(_) => {
                    Err(EvalError::UnsupportedUniverse("asked for capability membership"))
                }
            },
        }
    }

    pub fn is_empty(&self) -> Result<bool, EvalError> {
        match self {
            SetValue::Finite(items) => Ok(items.is_empty()),
            SetValue::UniversePlus(_) => {
                Err(EvalError::UnsupportedUniverse("tested for emptiness"))
            }
        }
    }

    /// Items in display order, for quantifier iteration and printing.
    pub fn enumerate(&self) -> Result<Vec<SetItem>, EvalError> {
        match self {
            SetValue::Finite(items) => {
                let mut v: Vec<_> = items.iter().cloned().collect();
                v.sort_by(|a, b| a.to_string().cmp(&b.to_string()).then_with(|| a.cmp(b)));
                Ok(v)
            }
            SetValue::UniversePlus(_) => Err(EvalError::UnsupportedUniverse("enumerated")),
        }
    }

    /// Renders a finite value as `{a, b, c}`.
    pub fn render(&self) -> Result<String, EvalError> {
        let items = self.enumerate()?;
        let parts: Vec<_> = items.iter().map(|i| i.to_string()).collect();
        Ok(format!("{{{}}}", parts.join(", ")))
    }
}

/// The pieces of a single action that the analyses consume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionParts {
    pub cap: Capability,
    /// Free variables, including those of a shipped process.
    pub fv: BTreeSet<String>,
    /// Names this action binds for its continuation.
    pub bv: BTreeSet<String>,
    /// Location constants, including those of a shipped process.
    pub lc: BTreeSet<String>,
    /// The target, when the action has one and it is a constant or variable.
    pub target: Option<SetItem>,
}

/// Decomposes one action. For `eval` the free variables and constants of the
/// shipped process count as part of the action, since they travel with it;
/// its binders do not scope outside it.
pub fn extract_action_parts(action: &Action) -> ActionParts {
    let mut fv = BTreeSet::new();
    let mut lc = BTreeSet::new();
    let mut bv = BTreeSet::new();
    fn collect(l: &Location, fv: &mut BTreeSet<String>, lc: &mut BTreeSet<String>) {
        match l {
            Location::Constant(n) => {
                lc.insert(n.clone());
            }
            Location::Variable(n) => {
                fv.insert(n.clone());
            }
            Location::Binder(_) | Location::DontCare => {}
        }
    }
    match action {
        Action::Out { args, target } => {
            args.iter().for_each(|l| collect(l, &mut fv, &mut lc));
            collect(target, &mut fv, &mut lc);
        }
        Action::In { template, target } | Action::Read { template, target } => {
            template.iter().for_each(|l| collect(l, &mut fv, &mut lc));
            collect(target, &mut fv, &mut lc);
            bv.extend(action.binders().iter().map(|s| s.to_string()));
        }
        Action::Eval { proc, target } => {
            fv.extend(fv_set(proc));
            lc.extend(lc_set(proc));
            collect(target, &mut fv, &mut lc);
        }
        Action::Newloc { binder } => {
            bv.insert(binder.clone());
        }
    }
    let target = action.target().and_then(|t| match t {
        Location::Constant(n) => Some(SetItem::Constant(n.clone())),
        Location::Variable(n) => Some(SetItem::Variable(n.clone())),
        _ => None,
    });
    ActionParts { cap: action.capability(), fv, bv, lc, target }
}

fn fold<T: Ord + Clone>(
    proc: &Process,
    per_branch: &impl Fn(&Branch) -> BTreeSet<T>,
) -> BTreeSet<T> {
    match proc {
        Process::Sum(branches) => {
            let mut out = BTreeSet::new();
            for b in branches {
                out.extend(per_branch(b));
            }
            out
        }
        Process::Parallel(a, b) => {
            let mut out = fold(a, per_branch);
            out.extend(fold(b, per_branch));
            out
        }
        Process::Replicate(p) => fold(p, per_branch),
    }
}

/// Capabilities the process itself may exercise. A shipped process runs at
/// its destination under its own trap, so `eval` contributes only `eval`.
pub fn act_set(proc: &Process) -> BTreeSet<Capability> {
    fold(proc, &|b| {
        let mut s = act_set(&b.continuation);
        s.insert(b.action.capability());
        s
    })
}

/// Targets of the process's own `cap` actions; variables stay symbolic.
pub fn loc_set(cap: Capability, proc: &Process) -> BTreeSet<SetItem> {
    fold(proc, &|b| {
        let parts = extract_action_parts(&b.action);
        let mut s = loc_set(cap, &b.continuation);
        if parts.cap == cap {
            s.extend(parts.target);
        }
        s
    })
}

/// Every location constant mentioned anywhere in the process.
pub fn lc_set(proc: &Process) -> BTreeSet<String> {
    fold(proc, &|b| {
        let mut s = lc_set(&b.continuation);
        s.extend(extract_action_parts(&b.action).lc);
        s
    })
}

/// Location constants mentioned by `cap` actions anywhere in the process.
pub fn lc_set_cap(cap: Capability, proc: &Process) -> BTreeSet<String> {
    fold(proc, &|b| {
        let parts = extract_action_parts(&b.action);
        let mut s = lc_set_cap(cap, &b.continuation);
        if parts.cap == cap {
            s.extend(parts.lc);
        }
        s
    })
}

/// Free variables of the process, respecting binder scope.
pub fn fv_set(proc: &Process) -> BTreeSet<String> {
    fold(proc, &|b| {
        let parts = extract_action_parts(&b.action);
        let mut s = fv_set(&b.continuation);
        for bound in &parts.bv {
            s.remove(bound);
        }
        s.extend(parts.fv);
        s
    })
}

/// Free variables contributed by `cap` actions, with the same scoping as
/// [`fv_set`].
pub fn fv_set_cap(cap: Capability, proc: &Process) -> BTreeSet<String> {
    fold(proc, &|b| {
        let parts = extract_action_parts(&b.action);
        let mut s = fv_set_cap(cap, &b.continuation);
        for bound in &parts.bv {
            s.remove(bound);
        }
        if parts.cap == cap {
            s.extend(parts.fv);
        }
        s
    })
}

/// Variable lookups available while a condition is evaluated: the match
/// substitution of the trapped action, extended by quantifier bindings.
#[derive(Debug)]
pub struct EvalEnv<'a> {
    subst: &'a Substitution,
    scope: Vec<(String, Location)>,
}

impl<'a> EvalEnv<'a> {
    pub fn new(subst: &'a Substitution) -> Self {
        EvalEnv { subst, scope: Vec::new() }
    }

    pub fn push(&mut self, name: &str, item: &SetItem) {
        let loc = match item {
            SetItem::Constant(n) => Location::Constant(n.clone()),
            SetItem::Variable(n) => Location::Variable(n.clone()),
            // Capabilities double as plain data in store tuples.
            SetItem::Cap(c) => Location::Constant(c.keyword().to_string()),
        };
        self.scope.push((name.to_string(), loc));
    }

    pub fn pop(&mut self) {
        self.scope.pop();
    }

    pub fn lookup(&self, name: &str) -> Option<&Location> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, l)| l)
            .or_else(|| self.subst.loc(name))
    }

    /// Resolves a location through the environment. Constants pass through;
    /// a variable must be bound.
    pub fn resolve(&self, loc: &Location) -> Result<Location, EvalError> {
        match loc {
            Location::Variable(n) => self
                .lookup(n)
                .cloned()
                .ok_or_else(|| EvalError::UnboundVariable(n.clone())),
            other => Ok(other.clone()),
        }
    }

    pub fn proc(&self, name: &str) -> Result<&Process, EvalError> {
        self.subst
            .proc(name)
            .ok_or_else(|| EvalError::UnboundProcessVariable(name.to_string()))
    }
}

/// Evaluates a set expression. The analysis forms run on the process bound
/// to their argument by the cut; named sets have been inlined at load time,
/// so meeting one here means the expression was never resolved.
pub fn eval_set_expr(expr: &SetExpr, env: &EvalEnv<'_>) -> Result<SetValue, EvalError> {
    match expr {
        SetExpr::Literal(elems) => {
            let mut items = BTreeSet::new();
            for e in elems {
                items.insert(match e {
                    SetElem::Cap(c) => SetItem::Cap(*c),
                    SetElem::Loc(l) => match env.resolve(l)? {
                        Location::Constant(n) => SetItem::Constant(n),
                        Location::Variable(n) => SetItem::Variable(n),
                        _ => return Err(EvalError::BadSetElement),
                    },
                });
            }
            Ok(SetValue::Finite(items))
        }
        SetExpr::Named(name) => Err(EvalError::UnknownSet(name.clone())),
        SetExpr::Union(a, b) => Ok(eval_set_expr(a, env)?.union(eval_set_expr(b, env)?)),
        SetExpr::Intersect(a, b) => Ok(eval_set_expr(a, env)?.intersect(eval_set_expr(b, env)?)),
        SetExpr::Act(x) => Ok(SetValue::finite(
            act_set(env.proc(x)?).into_iter().map(SetItem::Cap),
        )),
        SetExpr::Loc(cap, x) => Ok(SetValue::Finite(loc_set(*cap, env.proc(x)?))),
        SetExpr::Lc(x) => Ok(SetValue::finite(
            lc_set(env.proc(x)?).into_iter().map(SetItem::Constant),
        )),
        SetExpr::LcCap(cap, x) => Ok(SetValue::finite(
            lc_set_cap(*cap, env.proc(x)?).into_iter().map(SetItem::Constant),
        )),
        SetExpr::Fv(x) => Ok(SetValue::finite(
            fv_set(env.proc(x)?).into_iter().map(SetItem::Variable),
        )),
        SetExpr::FvCap(cap, x) => Ok(SetValue::finite(
            fv_set_cap(*cap, env.proc(x)?).into_iter().map(SetItem::Variable),
        )),
        SetExpr::VarUniverse => Ok(SetValue::UniversePlus(BTreeSet::new())),
    }
}

/// Convenience wrapper: run one named analysis over a process.
pub fn run_analysis(proc: &Process, expr: &SetExpr) -> Result<SetValue, EvalError> {
    let mut subst = Substitution::new();
    subst.bind_proc("*analysis*", proc.clone());
    let rewritten = match expr {
        SetExpr::Act(_) => SetExpr::Act("*analysis*".into()),
        SetExpr::Loc(c, _) => SetExpr::Loc(*c, "*analysis*".into()),
        SetExpr::Lc(_) => SetExpr::Lc("*analysis*".into()),
        SetExpr::LcCap(c, _) => SetExpr::LcCap(*c, "*analysis*".into()),
        SetExpr::Fv(_) => SetExpr::Fv("*analysis*".into()),
        SetExpr::FvCap(c, _) => SetExpr::FvCap(*c, "*analysis*".into()),
        other => other.clone(),
    };
    let env = EvalEnv::new(&subst);
    eval_set_expr(&rewritten, &env)
}

/// `lc_set` after applying a substitution; spells out that analyses see the
/// process as currently instantiated.
pub fn lc_set_after(proc: &Process, subst: &Substitution) -> BTreeSet<String> {
    lc_set(&apply_substitution(proc, subst))
}
