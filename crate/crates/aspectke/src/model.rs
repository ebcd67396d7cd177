//! Structural operations on nets and processes: well-formedness checks,
//! substitution application, and flattening of located parallel compositions.

use std::collections::BTreeSet;
use std::fmt;

use crate::analysis;
use crate::ast::{Action, Branch, Location, Net, NetItem, Process, Substitution};

/// One well-formedness defect, identified by rule name and the offending
/// piece of syntax.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub subject: String,
}

impl Violation {
    fn new(rule: &'static str, subject: impl Into<String>) -> Self {
        Violation { rule, subject: subject.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.subject)
    }
}

/// Checks every located item of `net`. Returns all defects found; an empty
/// list means the net is ready to run.
///
/// Rules: tuples are non-empty; template binders of one action are pairwise
/// distinct and never reused as free variables of the same action; `out`
/// arguments carry no binders; `_` never appears in program actions; targets
/// are constants or variables; every located process is closed.
pub fn validate_net(net: &Net) -> Vec<Violation> {
    let mut out = Vec::new();
    for item in &net.items {
        match item {
            NetItem::Tuple { node, tuple } => {
                if tuple.fields.is_empty() {
                    out.push(Violation::new("empty-tuple", format!("{node} :: <>")));
                }
            }
            NetItem::Proc { node, proc } => {
                check_process(node, proc, &mut out);
                let free = analysis::fv_set(proc);
                if !free.is_empty() {
                    let names: Vec<_> = free.iter().cloned().collect();
                    out.push(Violation::new(
                        "free-variable",
                        format!("{node}: {}", names.join(", ")),
                    ));
                }
            }
        }
    }
    out
}

fn check_process(node: &str, proc: &Process, out: &mut Vec<Violation>) {
    match proc {
        Process::Sum(branches) => {
            for Branch { action, continuation } in branches {
                check_action(node, action, out);
                check_process(node, continuation, out);
            }
        }
        Process::Parallel(a, b) => {
            check_process(node, a, out);
            check_process(node, b, out);
        }
        Process::Replicate(p) => check_process(node, p, out),
    }
}

fn check_action(node: &str, action: &Action, out: &mut Vec<Violation>) {
    let subject = || format!("{node}: {}", crate::print::render_action(action));
    match action {
        Action::Out { args, target } => {
            for a in args {
                match a {
                    Location::Binder(_) => out.push(Violation::new("binder-in-out", subject())),
                    Location::DontCare => {
                        out.push(Violation::new("wildcard-in-program", subject()))
                    }
                    _ => {}
                }
            }
            check_target(node, action, target, out);
        }
        Action::In { template, target } | Action::Read { template, target } => {
            let mut binders = BTreeSet::new();
            let mut uses = BTreeSet::new();
            for l in template {
                match l {
                    Location::Binder(n) => {
                        if !binders.insert(n.clone()) {
                            out.push(Violation::new("duplicate-binder", subject()));
                        }
                    }
                    Location::Variable(n) => {
                        uses.insert(n.clone());
                    }
                    Location::DontCare => {
                        out.push(Violation::new("wildcard-in-program", subject()))
                    }
                    Location::Constant(_) => {}
                }
            }
            if binders.intersection(&uses).next().is_some() {
                out.push(Violation::new("binder-also-used", subject()));
            }
            check_target(node, action, target, out);
        }
        Action::Eval { proc, target } => {
            check_process(node, proc, out);
            check_target(node, action, target, out);
        }
        Action::Newloc { .. } => {}
    }
}

fn check_target(node: &str, action: &Action, target: &Location, out: &mut Vec<Violation>) {
    if matches!(target, Location::Binder(_) | Location::DontCare) {
        out.push(Violation::new(
            "invalid-target",
            format!("{node}: {}", crate::print::render_action(action)),
        ));
    }
}

/// Replaces free variable occurrences in `proc` by their images under
/// `subst`. Binders shadow: a branch whose action binds `u` keeps inner
/// occurrences of `u` untouched. Runtime substitutions map variables to
/// constants, so shadowing by name is all the capture handling needed.
pub fn apply_substitution(proc: &Process, subst: &Substitution) -> Process {
    match proc {
        Process::Sum(branches) => Process::Sum(
            branches
                .iter()
                .map(|b| {
                    let action = substitute_action(&b.action, subst);
                    let inner = subst.without_locs(action.binders());
                    Branch::new(action, apply_substitution(&b.continuation, &inner))
                })
                .collect(),
        ),
        Process::Parallel(a, b) => Process::Parallel(
            Box::new(apply_substitution(a, subst)),
            Box::new(apply_substitution(b, subst)),
        ),
        Process::Replicate(p) => Process::Replicate(Box::new(apply_substitution(p, subst))),
    }
}

fn substitute_action(action: &Action, subst: &Substitution) -> Action {
    let loc = |l: &Location| match l {
        Location::Variable(n) => subst.loc(n).cloned().unwrap_or_else(|| l.clone()),
        _ => l.clone(),
    };
    match action {
        Action::Out { args, target } => Action::Out {
            args: args.iter().map(loc).collect(),
            target: loc(target),
        },
        Action::In { template, target } => Action::In {
            template: template.iter().map(loc).collect(),
            target: loc(target),
        },
        Action::Read { template, target } => Action::Read {
            template: template.iter().map(loc).collect(),
            target: loc(target),
        },
        Action::Eval { proc, target } => Action::Eval {
            proc: apply_substitution(proc, subst),
            target: loc(target),
        },
        Action::Newloc { binder } => Action::Newloc { binder: binder.clone() },
    }
}

/// Splits every located parallel composition into separate net items, so the
/// scheduler only ever sees sums, replications and tuples. Item order is
/// preserved left to right; the operation is idempotent.
pub fn flatten_net(net: &Net) -> Net {
    let mut items = Vec::with_capacity(net.items.len());
    for item in &net.items {
        match item {
            NetItem::Proc { node, proc } => push_flat(node, proc, &mut items),
            NetItem::Tuple { .. } => items.push(item.clone()),
        }
    }
    Net::new(items)
}

fn push_flat(node: &str, proc: &Process, items: &mut Vec<NetItem>) {
    match proc {
        Process::Parallel(a, b) => {
            push_flat(node, a, items);
            push_flat(node, b, items);
        }
        _ => items.push(NetItem::Proc { node: node.to_string(), proc: proc.clone() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Tuple;

    fn c(n: &str) -> Location {
        Location::constant(n)
    }

    fn v(n: &str) -> Location {
        Location::variable(n)
    }

    fn b(n: &str) -> Location {
        Location::binder(n)
    }

    #[test]
    fn duplicate_binder_is_rejected() {
        let net = Net::new(vec![NetItem::Proc {
            node: "DrSmith".into(),
            proc: Process::act(Action::In {
                template: vec![b("u"), b("u")],
                target: c("l"),
            }),
        }]);
        let vs = validate_net(&net);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].rule, "duplicate-binder");
    }

    #[test]
    fn binder_reused_as_free_variable_is_rejected() {
        let net = Net::new(vec![NetItem::Proc {
            node: "DrSmith".into(),
            proc: Process::act(Action::In {
                template: vec![b("u"), v("u")],
                target: c("l"),
            }),
        }]);
        let rules: Vec<_> = validate_net(&net).into_iter().map(|x| x.rule).collect();
        assert!(rules.contains(&"binder-also-used"));
    }

    #[test]
    fn unbound_variable_is_a_closedness_violation() {
        let net = Net::new(vec![NetItem::Proc {
            node: "DrSmith".into(),
            proc: Process::act(Action::Out {
                args: vec![v("content")],
                target: c("EHDB"),
            }),
        }]);
        let vs = validate_net(&net);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].rule, "free-variable");
        assert!(vs[0].subject.contains("content"));
    }

    #[test]
    fn bound_variable_use_is_closed() {
        let read = Action::Read { template: vec![b("content")], target: c("EHDB") };
        let out = Action::Out { args: vec![v("content")], target: c("DrSmith") };
        let net = Net::new(vec![NetItem::Proc {
            node: "DrSmith".into(),
            proc: Process::single(read, Process::act(out)),
        }]);
        assert!(validate_net(&net).is_empty());
    }

    #[test]
    fn substitution_fills_free_positions_only() {
        let action = Action::In { template: vec![b("u"), v("v")], target: v("x") };
        let mut s = Substitution::new();
        s.bind_loc("v", c("l"));
        s.bind_loc("x", c("m"));
        let got = substitute_action(&action, &s);
        assert_eq!(got, Action::In { template: vec![b("u"), c("l")], target: c("m") });
    }

    #[test]
    fn binder_shadows_substitution_in_continuation() {
        let inner = Process::act(Action::Out { args: vec![v("u")], target: c("m") });
        let proc = Process::single(Action::In { template: vec![b("u")], target: c("l") }, inner);
        let mut s = Substitution::new();
        s.bind_loc("u", c("Alice"));
        assert_eq!(apply_substitution(&proc, &s), proc);
    }

    #[test]
    fn substitution_reaches_eval_bodies() {
        let body = Process::act(Action::Out { args: vec![v("patient")], target: c("Pub") });
        let proc = Process::act(Action::Eval { proc: body, target: c("EHDB") });
        let mut s = Substitution::new();
        s.bind_loc("patient", c("Alice"));
        let expected = Process::act(Action::Eval {
            proc: Process::act(Action::Out { args: vec![c("Alice")], target: c("Pub") }),
            target: c("EHDB"),
        });
        assert_eq!(apply_substitution(&proc, &s), expected);
    }

    #[test]
    fn flatten_splits_nested_parallel() {
        let p1 = Process::act(Action::Newloc { binder: "a".into() });
        let p2 = Process::act(Action::Newloc { binder: "b".into() });
        let p3 = Process::act(Action::Newloc { binder: "c".into() });
        let net = Net::new(vec![
            NetItem::Proc {
                node: "n".into(),
                proc: Process::Parallel(
                    Box::new(Process::Parallel(Box::new(p1.clone()), Box::new(p2.clone()))),
                    Box::new(p3.clone()),
                ),
            },
            NetItem::Tuple { node: "n".into(), tuple: Tuple::new(vec!["a".into()]) },
        ]);
        let flat = flatten_net(&net);
        assert_eq!(flat.items.len(), 4);
        assert_eq!(flatten_net(&flat), flat);
        let procs: Vec<_> = flat
            .items
            .iter()
            .filter_map(|i| match i {
                NetItem::Proc { proc, .. } => Some(proc.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(procs, vec![p1, p2, p3]);
    }
}
