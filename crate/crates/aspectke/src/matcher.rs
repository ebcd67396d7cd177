//! Matching: templates against stored tuples, and cuts against join points.
//!
//! Both engines produce a [`Substitution`] on success. Cut matching binds
//! before the trapped action commits, so for `in`/`read` a `!v` cut position
//! captures the binder's name, never a tuple value. That is what keeps a
//! verdict independent of the data an action would receive.

use crate::ast::{Action, Branch, Cut, CutAction, Location, Process, Substitution, Tuple};

/// Outcome of a matching attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchResult {
    Matched(Substitution),
    NoMatch,
}

impl MatchResult {
    pub fn into_option(self) -> Option<Substitution> {
        match self {
            MatchResult::Matched(s) => Some(s),
            MatchResult::NoMatch => None,
        }
    }
}

/// One action about to fire: where, what, and what would run afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinPoint {
    pub node: String,
    pub action: Action,
    pub continuation: Process,
}

/// Builds the join point for a branch scheduled at `node`.
pub fn join_point_of(node: &str, branch: &Branch) -> JoinPoint {
    JoinPoint {
        node: node.to_string(),
        action: branch.action.clone(),
        continuation: branch.continuation.clone(),
    }
}

/// Matches an `in`/`read` template against a tuple. Binders bind the field
/// at their position; constants must agree. Templates reaching the scheduler
/// are ground up to binders, so a variable or wildcard never matches.
pub fn match_template(template: &[Location], tuple: &Tuple) -> MatchResult {
    if template.len() != tuple.fields.len() {
        return MatchResult::NoMatch;
    }
    let mut subst = Substitution::new();
    for (pat, field) in template.iter().zip(&tuple.fields) {
        let ok = match pat {
            Location::Constant(c) => c == field,
            Location::Binder(u) => subst.bind_loc(u, Location::Constant(field.clone())),
            Location::Variable(_) | Location::DontCare => false,
        };
        if !ok {
            return MatchResult::NoMatch;
        }
    }
    MatchResult::Matched(subst)
}

/// Field-wise tuple check for `test` conditions: constants must agree, `_`
/// accepts anything, and a field that resolved to a variable matches nothing
/// (there is no tuple it could name yet).
pub fn test_matches(fields: &[Location], tuple: &Tuple) -> bool {
    fields.len() == tuple.fields.len()
        && fields.iter().zip(&tuple.fields).all(|(pat, field)| match pat {
            Location::Constant(c) => c == field,
            Location::DontCare => true,
            Location::Variable(_) | Location::Binder(_) => false,
        })
}

fn match_position(pat: &Location, actual: &Location, subst: &mut Substitution) -> bool {
    match (pat, actual) {
        (Location::DontCare, _) => true,
        (Location::Constant(a), Location::Constant(b)) => a == b,
        (Location::Variable(u), Location::Constant(l)) => {
            subst.bind_loc(u, Location::Constant(l.clone()))
        }
        // A banged cut position captures the *name* a binder introduces.
        (Location::Binder(u), Location::Binder(v)) => {
            subst.bind_loc(u, Location::Variable(v.clone()))
        }
        _ => false,
    }
}

/// Matches a cut against a join point: capability, source node, every
/// parameter position, and the target must all agree. On success the
/// substitution carries the cut's variable bindings, plus the continuation
/// (and for `eval` the shipped process) under the cut's process variables.
pub fn match_cut(cut: &Cut, jp: &JoinPoint) -> MatchResult {
    if cut.action.capability() != jp.action.capability() {
        return MatchResult::NoMatch;
    }
    let mut subst = Substitution::new();
    if !match_position(&cut.source, &Location::Constant(jp.node.clone()), &mut subst) {
        return MatchResult::NoMatch;
    }

    let positions_ok = match (&cut.action, &jp.action) {
        (CutAction::Out { args: pa, target: pt }, Action::Out { args, target }) => {
            pa.len() == args.len()
                && pa.iter().zip(args).all(|(p, a)| match_position(p, a, &mut subst))
                && match_position(pt, target, &mut subst)
        }
        (CutAction::In { template: pa, target: pt }, Action::In { template, target })
        | (CutAction::Read { template: pa, target: pt }, Action::Read { template, target }) => {
            pa.len() == template.len()
                && pa.iter().zip(template).all(|(p, a)| match_position(p, a, &mut subst))
                && match_position(pt, target, &mut subst)
        }
        (CutAction::Eval { proc_var, target: pt }, Action::Eval { proc, target }) => {
            subst.bind_proc(proc_var, proc.clone()) && match_position(pt, target, &mut subst)
        }
        (CutAction::Newloc { binder }, Action::Newloc { binder: jp_binder }) => match binder {
            None => true,
            Some(u) => subst.bind_loc(u, Location::Variable(jp_binder.clone())),
        },
        _ => false,
    };
    if !positions_ok {
        return MatchResult::NoMatch;
    }

    if let Some(x) = &cut.continuation {
        if !subst.bind_proc(x, jp.continuation.clone()) {
            return MatchResult::NoMatch;
        }
    }
    MatchResult::Matched(subst)
}
