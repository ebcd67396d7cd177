//! Renders every syntax class back to concrete text. The output re-parses
//! to the same tree, which the round-trip property tests pin down; traces
//! and state dumps reuse these renderers so their lines stay stable.

use crate::ast::{
    Action, Aspect, Branch, Condition, Cut, CutAction, NetItem, Process, SetElem, SetExpr,
    SystemState, Tuple,
};

pub fn render_tuple(tuple: &Tuple) -> String {
    format!("<{}>", tuple.fields.join(","))
}

pub fn render_action(action: &Action) -> String {
    match action {
        Action::Out { args, target } => format!("out({})@{target}", join_locs(args)),
        Action::In { template, target } => format!("in({})@{target}", join_locs(template)),
        Action::Read { template, target } => format!("read({})@{target}", join_locs(template)),
        Action::Eval { proc, target } => format!("eval({})@{target}", render_process(proc)),
        Action::Newloc { binder } => format!("newloc(!{binder})"),
    }
}

fn join_locs(locs: &[crate::ast::Location]) -> String {
    locs.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
}

pub fn render_process(proc: &Process) -> String {
    match proc {
        Process::Parallel(l, r) => {
            let left = match &**l {
                Process::Parallel(..) => render_process(l),
                _ => par_term(l),
            };
            format!("{left} | {}", par_term(r))
        }
        _ => par_term(proc),
    }
}

/// An operand of `|`: anything except a bare parallel composition.
fn par_term(proc: &Process) -> String {
    match proc {
        Process::Sum(branches) if branches.is_empty() => "0".into(),
        Process::Sum(branches) => {
            branches.iter().map(render_branch).collect::<Vec<_>>().join(" + ")
        }
        Process::Parallel(..) => format!("({})", render_process(proc)),
        Process::Replicate(inner) => match &**inner {
            Process::Parallel(..) => format!("*({})", render_process(inner)),
            Process::Sum(bs) if bs.len() > 1 => format!("*({})", render_process(inner)),
            _ => format!("*{}", par_term(inner)),
        },
    }
}

fn render_branch(branch: &Branch) -> String {
    let head = render_action(&branch.action);
    if branch.continuation.is_nil() {
        head
    } else {
        format!("{head}.{}", continuation(&branch.continuation))
    }
}

/// After `.` the grammar admits a replication, `0`, a single branch, or a
/// parenthesized process; everything else gets wrapped.
fn continuation(proc: &Process) -> String {
    match proc {
        Process::Sum(branches) if branches.is_empty() => "0".into(),
        Process::Sum(branches) if branches.len() == 1 => render_branch(&branches[0]),
        Process::Replicate(inner) => match &**inner {
            Process::Parallel(..) => format!("*({})", render_process(inner)),
            Process::Sum(bs) if bs.len() > 1 => format!("*({})", render_process(inner)),
            _ => format!("*{}", continuation(inner)),
        },
        _ => format!("({})", render_process(proc)),
    }
}

pub fn render_net_item(item: &NetItem) -> String {
    match item {
        NetItem::Proc { node, proc } => format!("{node} :: {}", render_process(proc)),
        NetItem::Tuple { node, tuple } => format!("{node} :: {}", render_tuple(tuple)),
    }
}

pub fn render_cut(cut: &Cut) -> String {
    let action = match &cut.action {
        CutAction::Out { args, target } => format!("out({})@{target}", join_locs(args)),
        CutAction::In { template, target } => format!("in({})@{target}", join_locs(template)),
        CutAction::Read { template, target } => {
            format!("read({})@{target}", join_locs(template))
        }
        CutAction::Eval { proc_var, target } => format!("eval({proc_var})@{target}"),
        CutAction::Newloc { binder: Some(b) } => format!("newloc(!{b})"),
        CutAction::Newloc { binder: None } => "newloc(_)".into(),
    };
    let tail = match &cut.continuation {
        Some(x) => format!(".{x}"),
        None => String::new(),
    };
    format!("{}::{action}{tail}", cut.source)
}

pub fn render_condition(cond: &Condition) -> String {
    or_level(cond)
}

/// A quantifier body extends as far right as it can, so any operand whose
/// rightmost leaf is a quantifier would swallow the connective after it;
/// such operands get parenthesized, tail operands never need it.
fn greedy_tail(cond: &Condition) -> bool {
    match cond {
        Condition::Exists { .. } | Condition::Forall { .. } => true,
        Condition::Not(inner) => greedy_tail(inner),
        Condition::And(_, r) | Condition::Or(_, r) => greedy_tail(r),
        _ => false,
    }
}

fn guarded(operand: &Condition, rendered: String) -> String {
    if greedy_tail(operand) {
        format!("({rendered})")
    } else {
        rendered
    }
}

fn or_level(cond: &Condition) -> String {
    match cond {
        Condition::Or(l, r) => {
            let left = guarded(l, or_level(l));
            format!("{left} \\/ {}", and_level(r))
        }
        _ => and_level(cond),
    }
}

fn and_level(cond: &Condition) -> String {
    match cond {
        Condition::Or(..) => format!("({})", or_level(cond)),
        Condition::And(l, r) => {
            let left = guarded(l, and_level(l));
            format!("{left} /\\ {}", unary_level(r))
        }
        _ => unary_level(cond),
    }
}

fn unary_level(cond: &Condition) -> String {
    match cond {
        Condition::Or(..) | Condition::And(..) => format!("({})", or_level(cond)),
        Condition::Not(inner) => format!("~{}", unary_level(inner)),
        Condition::Exists { var, set, body } => quantifier("exists", var, set, body),
        Condition::Forall { var, set, body } => quantifier("forall", var, set, body),
        Condition::Equal(l, r) => format!("{l} = {r}"),
        Condition::Test { fields, target } => format!("test({})@{target}", join_locs(fields)),
        Condition::CapMember(cap, set) => {
            format!("{} in {}", cap.keyword(), render_set_expr(set))
        }
        Condition::LocMember(loc, set) => format!("{loc} in {}", render_set_expr(set)),
        Condition::IsEmpty(set) => format!("{} = empty", render_set_expr(set)),
    }
}

fn quantifier(word: &str, var: &str, set: &SetExpr, body: &Condition) -> String {
    format!("{word} {var} in {} : {}", render_set_expr(set), or_level(body))
}

pub fn render_set_expr(set: &SetExpr) -> String {
    set_union(set)
}

fn set_union(set: &SetExpr) -> String {
    match set {
        SetExpr::Union(l, r) => format!("{} U {}", set_union(l), set_intersect(r)),
        _ => set_intersect(set),
    }
}

fn set_intersect(set: &SetExpr) -> String {
    match set {
        SetExpr::Union(..) => format!("({})", set_union(set)),
        SetExpr::Intersect(l, r) => format!("{} & {}", set_intersect(l), set_atom(r)),
        _ => set_atom(set),
    }
}

fn set_atom(set: &SetExpr) -> String {
    match set {
        SetExpr::Union(..) | SetExpr::Intersect(..) => format!("({})", set_union(set)),
        SetExpr::Literal(elems) => {
            let body = elems
                .iter()
                .map(|e| match e {
                    SetElem::Loc(l) => l.to_string(),
                    SetElem::Cap(c) => c.keyword().to_string(),
                })
                .collect::<Vec<_>>()
                .join(", ");
            format!("{{{body}}}")
        }
        SetExpr::Named(name) => name.clone(),
        SetExpr::VarUniverse => "LVar*".into(),
        SetExpr::Act(p) => format!("Act({p})"),
        SetExpr::Loc(cap, p) => format!("Loc_{}({p})", cap.keyword()),
        SetExpr::Lc(p) => format!("LC({p})"),
        SetExpr::LcCap(cap, p) => format!("LCc_{}({p})", cap.keyword()),
        SetExpr::Fv(p) => format!("FV({p})"),
        SetExpr::FvCap(cap, p) => format!("FVc_{}({p})", cap.keyword()),
    }
}

pub fn render_aspect(aspect: &Aspect) -> String {
    let mut out = format!("{}[{}] =\n", aspect.name, render_cut(&aspect.cut));
    for (cond, suggestion) in &aspect.body.cases {
        out.push_str(&format!("  case ({}) {suggestion};\n", render_condition(cond)));
    }
    out.push_str(&format!("  {}", aspect.body.default));
    out
}

/// Full system in source form: aspects between `let` and `in`, then the net
/// one located item per line.
pub fn pretty_print(state: &SystemState) -> String {
    let mut out = String::from("let\n");
    for aspect in &state.aspects {
        out.push_str(&render_aspect(aspect));
        out.push('\n');
    }
    out.push_str("in\n");
    let items: Vec<_> = state.net.items.iter().map(render_net_item).collect();
    out.push_str(&items.join("\n|| "));
    out.push('\n');
    out
}
