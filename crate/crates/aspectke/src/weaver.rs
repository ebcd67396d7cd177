//! The reference monitor: matches every aspect against a join point,
//! evaluates advice cases against the current net, and combines the
//! suggestions into one verdict. One `break` outweighs any number of
//! `proceed`s, so aspect order never changes a decision.

use std::collections::BTreeSet;
use std::fmt;

use crate::analysis::{eval_set_expr, EvalEnv, EvalError, SetItem};
use crate::ast::{
    Aspect, Condition, Cut, CutAction, Location, Net, NetItem, SetElem, SetExpr, Substitution,
    Suggestion,
};
use crate::matcher::{match_cut, test_matches, JoinPoint, MatchResult};
use crate::model::Violation;

/// Final ruling for a join point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Allow,
    Deny,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Allow => "ALLOW",
            Decision::Deny => "DENY",
        })
    }
}

/// Which advice case produced a suggestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseRef {
    Case(usize),
    Default,
}

/// One aspect's view of a join point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Advice {
    NotApplicable,
    Matched { suggestion: Suggestion, case: CaseRef },
}

/// Per-aspect outcome, in pipeline order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AspectReport {
    pub name: String,
    pub advice: Advice,
}

/// The combined ruling plus every aspect's contribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub decision: Decision,
    pub reports: Vec<AspectReport>,
}

impl Verdict {
    /// Reports of aspects whose cut matched, with their suggestions.
    pub fn matched(&self) -> impl Iterator<Item = (&str, Suggestion)> {
        self.reports.iter().filter_map(|r| match r.advice {
            Advice::Matched { suggestion, .. } => Some((r.name.as_str(), suggestion)),
            Advice::NotApplicable => None,
        })
    }
}

/// Runs one aspect against a join point: cut match first, then the advice
/// cases in order, falling through to the default suggestion.
pub fn advise(aspect: &Aspect, jp: &JoinPoint, net: &Net) -> Result<Advice, EvalError> {
    let subst = match match_cut(&aspect.cut, jp) {
        MatchResult::NoMatch => return Ok(Advice::NotApplicable),
        MatchResult::Matched(s) => s,
    };
    for (idx, (cond, suggestion)) in aspect.body.cases.iter().enumerate() {
        if evaluate_condition(cond, &subst, net)? {
            return Ok(Advice::Matched { suggestion: *suggestion, case: CaseRef::Case(idx) });
        }
    }
    Ok(Advice::Matched { suggestion: aspect.body.default, case: CaseRef::Default })
}

/// Combines all aspects over a join point. Denies iff some applicable aspect
/// suggests `break`; with no applicable aspect the action is allowed.
pub fn decide(aspects: &[Aspect], jp: &JoinPoint, net: &Net) -> Result<Verdict, EvalError> {
    let mut reports = Vec::with_capacity(aspects.len());
    let mut deny = false;
    for aspect in aspects {
        let advice = advise(aspect, jp, net)?;
        if matches!(advice, Advice::Matched { suggestion: Suggestion::Break, .. }) {
            deny = true;
        }
        reports.push(AspectReport { name: aspect.name.clone(), advice });
    }
    Ok(Verdict { decision: if deny { Decision::Deny } else { Decision::Allow }, reports })
}

/// Evaluates a condition under the bindings of a cut match, reading (never
/// writing) the current net.
pub fn evaluate_condition(
    cond: &Condition,
    subst: &Substitution,
    net: &Net,
) -> Result<bool, EvalError> {
    let mut env = EvalEnv::new(subst);
    eval_cond(cond, &mut env, net)
}

fn eval_cond(cond: &Condition, env: &mut EvalEnv<'_>, net: &Net) -> Result<bool, EvalError> {
    match cond {
        Condition::Equal(a, b) => Ok(env.resolve(a)? == env.resolve(b)?),
        Condition::And(a, b) => Ok(eval_cond(a, env, net)? && eval_cond(b, env, net)?),
        Condition::Or(a, b) => Ok(eval_cond(a, env, net)? || eval_cond(b, env, net)?),
        Condition::Not(a) => Ok(!eval_cond(a, env, net)?),
        Condition::Test { fields, target } => {
            let node = match env.resolve(target)? {
                Location::Constant(n) => n,
                // A symbolic node names no tuple space yet.
                _ => return Ok(false),
            };
            let mut resolved = Vec::with_capacity(fields.len());
            for f in fields {
                resolved.push(match f {
                    Location::DontCare => Location::DontCare,
                    other => env.resolve(other)?,
                });
            }
            Ok(net.items.iter().any(|item| match item {
                NetItem::Tuple { node: n, tuple } => *n == node && test_matches(&resolved, tuple),
                NetItem::Proc { .. } => false,
            }))
        }
        Condition::Exists { var, set, body } => {
            for item in eval_set_expr(set, env)?.enumerate()? {
                env.push(var, &item);
                let hit = eval_cond(body, env, net);
                env.pop();
                if hit? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Condition::Forall { var, set, body } => {
            for item in eval_set_expr(set, env)?.enumerate()? {
                env.push(var, &item);
                let hit = eval_cond(body, env, net);
                env.pop();
                if !hit? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Condition::CapMember(cap, set) => eval_set_expr(set, env)?.contains(&SetItem::Cap(*cap)),
        Condition::LocMember(loc, set) => {
            let item = match env.resolve(loc)? {
                Location::Constant(n) => SetItem::Constant(n),
                Location::Variable(n) => SetItem::Variable(n),
                _ => return Ok(false),
            };
            eval_set_expr(set, env)?.contains(&item)
        }
        Condition::IsEmpty(set) => eval_set_expr(set, env)?.is_empty(),
    }
}

struct CutVars {
    /// Bind actual locations; usable anywhere in the body.
    plain: BTreeSet<String>,
    /// Bind binder names; usable only inside set expressions.
    banged: BTreeSet<String>,
    procs: BTreeSet<String>,
}

fn collect_cut_vars(cut: &Cut, all: &mut Vec<String>) -> CutVars {
    let mut vars = CutVars {
        plain: BTreeSet::new(),
        banged: BTreeSet::new(),
        procs: BTreeSet::new(),
    };
    // A plain variable may recur: every occurrence must match the same
    // value, so repetition is an equality constraint, not a clash. Binders
    // and process variables bind fresh and must be pairwise distinct.
    fn loc(l: &Location, vars: &mut CutVars, all: &mut Vec<String>) {
        match l {
            Location::Variable(n) => {
                if vars.plain.insert(n.clone()) {
                    all.push(n.clone());
                }
            }
            Location::Binder(n) => {
                vars.banged.insert(n.clone());
                all.push(n.clone());
            }
            _ => {}
        }
    }
    loc(&cut.source, &mut vars, all);
    match &cut.action {
        CutAction::Out { args, target } => {
            args.iter().for_each(|l| loc(l, &mut vars, all));
            loc(target, &mut vars, all);
        }
        CutAction::In { template, target } | CutAction::Read { template, target } => {
            template.iter().for_each(|l| loc(l, &mut vars, all));
            loc(target, &mut vars, all);
        }
        CutAction::Eval { proc_var, target } => {
            vars.procs.insert(proc_var.clone());
            all.push(proc_var.clone());
            loc(target, &mut vars, all);
        }
        CutAction::Newloc { binder } => {
            if let Some(n) = binder {
                vars.banged.insert(n.clone());
                all.push(n.clone());
            }
        }
    }
    if let Some(x) = &cut.continuation {
        vars.procs.insert(x.clone());
        all.push(x.clone());
    }
    vars
}

/// Static checks for one aspect: cut variables pairwise distinct, the cut
/// shaped like a real action, the body closed under the cut's variables, and
/// name-capturing (`!`) variables confined to set expressions.
pub fn validate_aspect(aspect: &Aspect) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = Vec::new();
    let vars = collect_cut_vars(&aspect.cut, &mut seen);

    let mut dups: BTreeSet<&str> = BTreeSet::new();
    for (i, name) in seen.iter().enumerate() {
        if seen[..i].contains(name) && dups.insert(name) {
            out.push(violation(&aspect.name, "duplicate-cut-variable", name));
        }
    }

    if matches!(aspect.cut.source, Location::Binder(_) | Location::DontCare) {
        out.push(violation(&aspect.name, "invalid-cut-source", "source must name or bind a node"));
    }
    match &aspect.cut.action {
        CutAction::Out { args, target } => {
            if args.iter().any(|l| matches!(l, Location::Binder(_))) {
                out.push(violation(&aspect.name, "binder-in-out-cut", "out carries no binders"));
            }
            check_cut_target(&aspect.name, target, &mut out);
        }
        CutAction::In { target, .. }
        | CutAction::Read { target, .. }
        | CutAction::Eval { target, .. } => check_cut_target(&aspect.name, target, &mut out),
        CutAction::Newloc { .. } => {}
    }

    let mut scope = Vec::new();
    for (cond, _) in &aspect.body.cases {
        check_condition(&aspect.name, cond, &vars, &mut scope, &mut out);
    }
    out
}

fn check_cut_target(aspect: &str, target: &Location, out: &mut Vec<Violation>) {
    if matches!(target, Location::Binder(_) | Location::DontCare) {
        out.push(violation(aspect, "invalid-cut-target", "target must name or bind a node"));
    }
}

fn violation(aspect: &str, rule: &'static str, detail: &str) -> Violation {
    Violation { rule, subject: format!("{aspect}: {detail}") }
}

fn check_condition(
    aspect: &str,
    cond: &Condition,
    vars: &CutVars,
    scope: &mut Vec<String>,
    out: &mut Vec<Violation>,
) {
    match cond {
        Condition::Equal(a, b) => {
            check_loc(aspect, a, vars, scope, false, out);
            check_loc(aspect, b, vars, scope, false, out);
        }
        Condition::And(a, b) | Condition::Or(a, b) => {
            check_condition(aspect, a, vars, scope, out);
            check_condition(aspect, b, vars, scope, out);
        }
        Condition::Not(a) => check_condition(aspect, a, vars, scope, out),
        Condition::Test { fields, target } => {
            for f in fields {
                check_loc(aspect, f, vars, scope, false, out);
            }
            check_loc(aspect, target, vars, scope, false, out);
        }
        Condition::Exists { var, set, body } | Condition::Forall { var, set, body } => {
            check_set(aspect, set, vars, scope, out);
            if vars.plain.contains(var) || vars.banged.contains(var) {
                out.push(violation(aspect, "quantifier-shadows-cut-variable", var));
            }
            scope.push(var.clone());
            check_condition(aspect, body, vars, scope, out);
            scope.pop();
        }
        Condition::CapMember(_, set) => check_set(aspect, set, vars, scope, out),
        Condition::LocMember(loc, set) => {
            // Membership is a set context, so name-capturing variables may
            // appear on its left side.
            check_loc(aspect, loc, vars, scope, true, out);
            check_set(aspect, set, vars, scope, out);
        }
        Condition::IsEmpty(set) => check_set(aspect, set, vars, scope, out),
    }
}

fn check_loc(
    aspect: &str,
    loc: &Location,
    vars: &CutVars,
    scope: &[String],
    in_set: bool,
    out: &mut Vec<Violation>,
) {
    if let Location::Variable(n) = loc {
        if scope.iter().any(|s| s == n) {
            return;
        }
        if vars.banged.contains(n) {
            if !in_set {
                out.push(violation(aspect, "name-capture-outside-set", n));
            }
        } else if !vars.plain.contains(n) {
            out.push(violation(aspect, "unbound-variable-in-body", n));
        }
    }
}

fn check_set(
    aspect: &str,
    set: &SetExpr,
    vars: &CutVars,
    scope: &[String],
    out: &mut Vec<Violation>,
) {
    match set {
        SetExpr::Literal(elems) => {
            for e in elems {
                if let SetElem::Loc(l) = e {
                    check_loc(aspect, l, vars, scope, true, out);
                }
            }
        }
        SetExpr::Named(n) => out.push(violation(aspect, "unresolved-named-set", n)),
        SetExpr::Union(a, b) | SetExpr::Intersect(a, b) => {
            check_set(aspect, a, vars, scope, out);
            check_set(aspect, b, vars, scope, out);
        }
        SetExpr::Act(x)
        | SetExpr::Loc(_, x)
        | SetExpr::Lc(x)
        | SetExpr::LcCap(_, x)
        | SetExpr::Fv(x)
        | SetExpr::FvCap(_, x) => {
            if !vars.procs.contains(x) {
                out.push(violation(aspect, "unbound-process-variable", x));
            }
        }
        SetExpr::VarUniverse => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Action, AdviceBody, Branch, Capability, Process, Tuple};
    use crate::matcher::join_point_of;

    fn c(n: &str) -> Location {
        Location::constant(n)
    }

    fn v(n: &str) -> Location {
        Location::variable(n)
    }

    fn b(n: &str) -> Location {
        Location::binder(n)
    }

    fn tuple_item(node: &str, fields: &[&str]) -> NetItem {
        NetItem::Tuple {
            node: node.into(),
            tuple: Tuple::new(fields.iter().map(|s| s.to_string()).collect()),
        }
    }

    fn data_leak_guard() -> Aspect {
        Aspect {
            name: "A1_out".into(),
            cut: Cut {
                source: v("user"),
                action: CutAction::Out {
                    args: vec![Location::DontCare, v("data")],
                    target: c("DrSmith"),
                },
                continuation: None,
            },
            body: AdviceBody {
                cases: vec![(
                    Condition::Equal(v("data"), c("alicetext")),
                    Suggestion::Break,
                )],
                default: Suggestion::Proceed,
            },
        }
    }

    fn out_jp(data: &str) -> JoinPoint {
        join_point_of(
            "DrSmith",
            &Branch::new(
                Action::Out { args: vec![c("Alice"), c(data)], target: c("DrSmith") },
                Process::nil(),
            ),
        )
    }

    #[test]
    fn advice_cases_run_in_order_with_default_fallthrough() {
        let net = Net::default();
        let aspect = data_leak_guard();
        assert_eq!(
            advise(&aspect, &out_jp("alicetext"), &net).unwrap(),
            Advice::Matched { suggestion: Suggestion::Break, case: CaseRef::Case(0) }
        );
        assert_eq!(
            advise(&aspect, &out_jp("bobtext"), &net).unwrap(),
            Advice::Matched { suggestion: Suggestion::Proceed, case: CaseRef::Default }
        );
    }

    #[test]
    fn one_break_denies_regardless_of_order() {
        let net = Net::default();
        let permissive = Aspect {
            name: "open_door".into(),
            cut: Cut {
                source: v("user"),
                action: CutAction::Out {
                    args: vec![Location::DontCare, Location::DontCare],
                    target: c("DrSmith"),
                },
                continuation: None,
            },
            body: AdviceBody { cases: vec![], default: Suggestion::Proceed },
        };
        let jp = out_jp("alicetext");
        let forward = decide(&[permissive.clone(), data_leak_guard()], &jp, &net).unwrap();
        let backward = decide(&[data_leak_guard(), permissive], &jp, &net).unwrap();
        assert_eq!(forward.decision, Decision::Deny);
        assert_eq!(backward.decision, Decision::Deny);
        assert_eq!(forward.matched().count(), 2);
    }

    #[test]
    fn unmatched_aspects_leave_the_action_allowed() {
        let net = Net::default();
        let verdict = decide(&[data_leak_guard()], &out_jp_other_node(), &net).unwrap();
        assert_eq!(verdict.decision, Decision::Allow);
        assert_eq!(verdict.reports[0].advice, Advice::NotApplicable);
    }

    fn out_jp_other_node() -> JoinPoint {
        join_point_of(
            "EHDB",
            &Branch::new(
                Action::Out { args: vec![c("Alice"), c("x")], target: c("EHDB") },
                Process::nil(),
            ),
        )
    }

    #[test]
    fn test_condition_probes_the_net() {
        let net = Net::new(vec![
            tuple_item("DAC", &["NsOlsen", "MedicalRecord", "read"]),
            tuple_item("RDB", &["DrSmith", "Doctor"]),
        ]);
        let mut subst = Substitution::new();
        subst.bind_loc("user", c("NsOlsen"));
        subst.bind_loc("recordtype", c("MedicalRecord"));

        let can_read = Condition::Test {
            fields: vec![v("user"), v("recordtype"), c("read")],
            target: c("DAC"),
        };
        assert_eq!(evaluate_condition(&can_read, &subst, &net), Ok(true));

        let can_out = Condition::Test {
            fields: vec![v("user"), v("recordtype"), c("out")],
            target: c("DAC"),
        };
        assert_eq!(evaluate_condition(&can_out, &subst, &net), Ok(false));

        let anyone = Condition::Test {
            fields: vec![v("user"), Location::DontCare, Location::DontCare],
            target: c("DAC"),
        };
        assert_eq!(evaluate_condition(&anyone, &subst, &net), Ok(true));
    }

    #[test]
    fn quantifiers_range_over_finite_sets() {
        let net = Net::new(vec![tuple_item("RDB", &["DrSmith", "Doctor"])]);
        let mut subst = Substitution::new();
        subst.bind_loc("user", c("DrSmith"));
        let some_role = Condition::Exists {
            var: "role".into(),
            set: SetExpr::Literal(vec![
                SetElem::Loc(c("Doctor")),
                SetElem::Loc(c("Nurse")),
            ]),
            body: Box::new(Condition::Test {
                fields: vec![v("user"), v("role")],
                target: c("RDB"),
            }),
        };
        assert_eq!(evaluate_condition(&some_role, &subst, &net), Ok(true));

        subst = Substitution::new();
        subst.bind_loc("user", c("RsMiller"));
        assert_eq!(evaluate_condition(&some_role, &subst, &net), Ok(false));
    }

    #[test]
    fn captured_names_stay_opaque_to_data() {
        // A cut that captures a binder name can ask about the name, never
        // about what the tuple will contain: tests on it match nothing.
        let mut subst = Substitution::new();
        subst.bind_loc("rt", v("recordtype"));
        let net = Net::new(vec![tuple_item("EHDB", &["PrivateNote"])]);
        let probing = Condition::Test { fields: vec![v("rt")], target: c("EHDB") };
        assert_eq!(evaluate_condition(&probing, &subst, &net), Ok(false));

        let named = Condition::LocMember(
            v("rt"),
            SetExpr::Literal(vec![SetElem::Loc(c("PrivateNote"))]),
        );
        assert_eq!(evaluate_condition(&named, &subst, &net), Ok(false));
    }

    #[test]
    fn condition_evaluation_never_mutates_the_net() {
        let net = Net::new(vec![tuple_item("RDB", &["DrSmith", "Doctor"])]);
        let before = net.clone();
        let subst = Substitution::new();
        let cond = Condition::Test {
            fields: vec![Location::DontCare, Location::DontCare],
            target: c("RDB"),
        };
        evaluate_condition(&cond, &subst, &net).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn validation_flags_duplicate_and_misused_cut_variables() {
        let aspect = Aspect {
            name: "bad".into(),
            cut: Cut {
                source: v("user"),
                action: CutAction::In {
                    template: vec![v("user"), b("rt"), b("rt")],
                    target: c("EHDB"),
                },
                continuation: None,
            },
            body: AdviceBody {
                cases: vec![(Condition::Equal(v("rt"), c("PrivateNote")), Suggestion::Break)],
                default: Suggestion::Proceed,
            },
        };
        let rules: Vec<_> = validate_aspect(&aspect).into_iter().map(|x| x.rule).collect();
        assert!(rules.contains(&"duplicate-cut-variable"));
        assert!(rules.contains(&"name-capture-outside-set"));
    }

    #[test]
    fn repeated_plain_cut_variable_is_an_equality_constraint() {
        // Own-note pattern: the reader must equal the author field.
        let aspect = Aspect {
            name: "own".into(),
            cut: Cut {
                source: v("user"),
                action: CutAction::Read {
                    template: vec![
                        Location::DontCare,
                        c("PrivateNote"),
                        v("user"),
                        Location::DontCare,
                        Location::DontCare,
                    ],
                    target: c("EHDB"),
                },
                continuation: None,
            },
            body: AdviceBody { cases: vec![], default: Suggestion::Proceed },
        };
        assert_eq!(validate_aspect(&aspect), Vec::new());

        let jp = |author: &str| JoinPoint {
            node: "DrSmith".to_string(),
            action: Action::Read {
                template: vec![
                    c("Alice"),
                    c("PrivateNote"),
                    c(author),
                    c("Past"),
                    Location::binder("content"),
                ],
                target: c("EHDB"),
            },
            continuation: Process::nil(),
        };
        assert!(matches!(match_cut(&aspect.cut, &jp("DrSmith")), MatchResult::Matched(_)));
        assert!(matches!(match_cut(&aspect.cut, &jp("DrHansen")), MatchResult::NoMatch));
    }

    #[test]
    fn validation_requires_bound_body_variables() {
        let aspect = Aspect {
            name: "loose".into(),
            cut: Cut {
                source: v("user"),
                action: CutAction::Newloc { binder: None },
                continuation: None,
            },
            body: AdviceBody {
                cases: vec![
                    (Condition::Equal(v("ghost"), c("x")), Suggestion::Proceed),
                    (
                        Condition::CapMember(Capability::In, SetExpr::Act("X".into())),
                        Suggestion::Proceed,
                    ),
                ],
                default: Suggestion::Break,
            },
        };
        let rules: Vec<_> = validate_aspect(&aspect).into_iter().map(|x| x.rule).collect();
        assert!(rules.contains(&"unbound-variable-in-body"));
        assert!(rules.contains(&"unbound-process-variable"));
    }

    #[test]
    fn validation_accepts_capture_inside_set_expressions() {
        let aspect = Aspect {
            name: "scoped".into(),
            cut: Cut {
                source: v("user"),
                action: CutAction::Read {
                    template: vec![b("patient"), v("recordtype")],
                    target: c("EHDB"),
                },
                continuation: Some("X".into()),
            },
            body: AdviceBody {
                cases: vec![(
                    Condition::Not(Box::new(Condition::LocMember(
                        v("patient"),
                        SetExpr::Fv("X".into()),
                    ))),
                    Suggestion::Proceed,
                )],
                default: Suggestion::Break,
            },
        };
        assert!(validate_aspect(&aspect).is_empty());
    }

    #[test]
    fn quantifier_must_not_shadow_cut_variables() {
        let aspect = Aspect {
            name: "shadow".into(),
            cut: Cut {
                source: v("user"),
                action: CutAction::Newloc { binder: None },
                continuation: None,
            },
            body: AdviceBody {
                cases: vec![(
                    Condition::Exists {
                        var: "user".into(),
                        set: SetExpr::Literal(vec![SetElem::Loc(c("a"))]),
                        body: Box::new(Condition::Equal(v("user"), c("a"))),
                    },
                    Suggestion::Proceed,
                )],
                default: Suggestion::Break,
            },
        };
        let rules: Vec<_> = validate_aspect(&aspect).into_iter().map(|x| x.rule).collect();
        assert!(rules.contains(&"quantifier-shadows-cut-variable"));
    }
}
