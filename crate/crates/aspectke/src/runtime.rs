//! Small-step executor. Each step enumerates every enabled candidate in a
//! fixed order (net item, then branch, then tuple position), lets a seeded
//! RNG pick one, asks the monitor for a verdict, and applies the action or
//! the denial. Blocked input actions are not candidates: a missing tuple
//! postpones a process, only a `break` verdict stops it.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::EvalError;
use crate::ast::{
    Action, Aspect, Condition, Cut, CutAction, Location, Net, NetItem, Process, SetElem, SetExpr,
    Substitution, Suggestion, SystemState,
};
use crate::matcher::{join_point_of, match_template, MatchResult};
use crate::model::{apply_substitution, flatten_net};
use crate::print::render_action;
use crate::weaver::{decide, Decision};

/// One scheduling moment: a branch of a located sum, plus the chosen tuple
/// for input actions, or the unfolding of a replicated process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepCandidate {
    pub item: usize,
    pub kind: CandidateKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    Unfold,
    Branch { branch: usize, tuple: Option<usize> },
}

/// One line of the execution record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub step: u64,
    pub node: String,
    pub action: String,
    pub decision: Decision,
    pub reports: Vec<(String, Suggestion)>,
    pub bindings: Vec<(String, String)>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let reports = self
            .reports
            .iter()
            .map(|(name, s)| format!("{name}:{s}"))
            .collect::<Vec<_>>()
            .join(",");
        let bindings = self
            .bindings
            .iter()
            .map(|(name, v)| format!("{name}={v}"))
            .collect::<Vec<_>>()
            .join(",");
        write!(
            f,
            "#{} {} :: {} => {} [{reports}] {{{bindings}}}",
            self.step, self.node, self.action, self.decision
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// No action is enabled: every process is finished or waiting.
    Quiescent,
    /// The step budget ran out with work still enabled.
    StepBudget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub steps: u64,
    pub trace: Vec<TraceEvent>,
}

/// All enabled candidates, in the fixed enumeration order. The net must be
/// flattened: located parallels have been split into separate items.
pub fn enabled_candidates(net: &Net) -> Vec<StepCandidate> {
    let mut out = Vec::new();
    for (i, item) in net.items.iter().enumerate() {
        let NetItem::Proc { proc, .. } = item else { continue };
        match proc {
            Process::Replicate(_) => out.push(StepCandidate { item: i, kind: CandidateKind::Unfold }),
            Process::Parallel(..) => unreachable!("net not flattened"),
            Process::Sum(branches) => {
                for (j, branch) in branches.iter().enumerate() {
                    match &branch.action {
                        Action::Out { target, .. } | Action::Eval { target, .. } => {
                            if matches!(target, Location::Constant(_)) {
                                out.push(StepCandidate {
                                    item: i,
                                    kind: CandidateKind::Branch { branch: j, tuple: None },
                                });
                            }
                        }
                        Action::Newloc { .. } => out.push(StepCandidate {
                            item: i,
                            kind: CandidateKind::Branch { branch: j, tuple: None },
                        }),
                        Action::In { template, target } | Action::Read { template, target } => {
                            let Location::Constant(target) = target else { continue };
                            for (k, other) in net.items.iter().enumerate() {
                                let NetItem::Tuple { node, tuple } = other else { continue };
                                if node != target {
                                    continue;
                                }
                                if let MatchResult::Matched(_) = match_template(template, tuple) {
                                    out.push(StepCandidate {
                                        item: i,
                                        kind: CandidateKind::Branch { branch: j, tuple: Some(k) },
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Runs until quiescence or the budget, choosing among candidates with a
/// ChaCha8 stream seeded from `seed`. Equal seeds replay equal runs.
pub fn run(state: &mut SystemState, seed: u64, max_steps: u64) -> Result<RunResult, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    state.net = flatten_net(&state.net);
    let mut trace = Vec::new();
    let mut steps = 0;
    loop {
        let candidates = enabled_candidates(&state.net);
        if candidates.is_empty() {
            return Ok(RunResult { outcome: Outcome::Quiescent, steps, trace });
        }
        if steps == max_steps {
            return Ok(RunResult { outcome: Outcome::StepBudget, steps, trace });
        }
        let pick = candidates[rng.gen_range(0..candidates.len())];
        steps += 1;
        execute(state, pick, steps, &mut trace)?;
    }
}

fn execute(
    state: &mut SystemState,
    pick: StepCandidate,
    step: u64,
    trace: &mut Vec<TraceEvent>,
) -> Result<(), EvalError> {
    let i = pick.item;
    let NetItem::Proc { node, proc } = state.net.items[i].clone() else {
        unreachable!("candidate points at a process")
    };

    let CandidateKind::Branch { branch, tuple } = pick.kind else {
        // Unfolding is bookkeeping, not an action: no aspect sees it.
        let Process::Replicate(body) = proc else { unreachable!() };
        state.net.items.push(NetItem::Proc { node: node.clone(), proc: (*body).clone() });
        state.net = flatten_net(&state.net);
        trace.push(TraceEvent {
            step,
            node,
            action: "unfold".into(),
            decision: Decision::Allow,
            reports: Vec::new(),
            bindings: Vec::new(),
        });
        return Ok(());
    };

    let Process::Sum(branches) = &proc else { unreachable!("candidate points at a sum") };
    let picked = &branches[branch];
    let jp = join_point_of(&node, picked);
    let verdict = decide(&state.aspects, &jp, &state.net)?;
    let mut event = TraceEvent {
        step,
        node: node.clone(),
        action: render_action(&picked.action),
        decision: verdict.decision,
        reports: verdict.matched().map(|(n, s)| (n.to_string(), s)).collect(),
        bindings: Vec::new(),
    };

    if verdict.decision == Decision::Deny {
        // Denial discards the whole located process, alternatives included;
        // the store is left untouched.
        state.net.items[i] = NetItem::Proc { node, proc: Process::nil() };
        trace.push(event);
        return Ok(());
    }

    match &picked.action {
        Action::Out { args, target } => {
            let fields = args
                .iter()
                .map(|l| match l {
                    Location::Constant(c) => c.clone(),
                    _ => unreachable!("closed net: out argument is a constant"),
                })
                .collect();
            let target = constant(target);
            state.net.items[i] =
                NetItem::Proc { node, proc: picked.continuation.clone() };
            state.net.items.push(NetItem::Tuple {
                node: target,
                tuple: crate::ast::Tuple::new(fields),
            });
        }
        Action::In { template, target } | Action::Read { template, target } => {
            let k = tuple.expect("input candidates carry a tuple");
            let NetItem::Tuple { tuple: chosen, .. } = &state.net.items[k] else {
                unreachable!("candidate points at a tuple")
            };
            let MatchResult::Matched(theta) = match_template(template, chosen) else {
                unreachable!("candidate was matched during enumeration")
            };
            let _ = constant(target);
            event.bindings = theta
                .locs()
                .map(|(name, val)| (name.to_string(), constant(val)))
                .collect();
            state.net.items[i] = NetItem::Proc {
                node,
                proc: apply_substitution(&picked.continuation, &theta),
            };
            if matches!(picked.action, Action::In { .. }) {
                state.net.items.remove(k);
            }
        }
        Action::Eval { proc: shipped, target } => {
            let target = constant(target);
            state.net.items[i] =
                NetItem::Proc { node, proc: picked.continuation.clone() };
            state.net.items.push(NetItem::Proc { node: target, proc: shipped.clone() });
        }
        Action::Newloc { binder } => {
            let fresh = fresh_location(state);
            let mut theta = Substitution::new();
            theta.bind_loc(binder, Location::Constant(fresh.clone()));
            event.bindings = vec![(binder.clone(), fresh.clone())];
            state.net.items[i] = NetItem::Proc {
                node,
                proc: apply_substitution(&picked.continuation, &theta),
            };
            state.net.items.push(NetItem::Proc { node: fresh, proc: Process::nil() });
        }
    }
    state.net = flatten_net(&state.net);
    trace.push(event);
    Ok(())
}

fn constant(loc: &Location) -> String {
    match loc {
        Location::Constant(c) => c.clone(),
        _ => unreachable!("closed net: location is a constant"),
    }
}

/// Mints `loc$N`, skipping any name the system already mentions.
fn fresh_location(state: &mut SystemState) -> String {
    loop {
        let name = format!("loc${}", state.fresh_counter);
        state.fresh_counter += 1;
        if !mentions(state, &name) {
            return name;
        }
    }
}

fn mentions(state: &SystemState, name: &str) -> bool {
    state.net.items.iter().any(|item| match item {
        NetItem::Proc { node, proc } => node == name || proc_mentions(proc, name),
        NetItem::Tuple { node, tuple } => {
            node == name || tuple.fields.iter().any(|f| f == name)
        }
    }) || state.aspects.iter().any(|a| aspect_mentions(a, name))
}

fn proc_mentions(proc: &Process, name: &str) -> bool {
    match proc {
        Process::Sum(branches) => branches.iter().any(|b| {
            let in_action = match &b.action {
                Action::Out { args: locs, target } | Action::In { template: locs, target } | Action::Read { template: locs, target } => {
                    locs.iter().any(|l| loc_mentions(l, name)) || loc_mentions(target, name)
                }
                Action::Eval { proc, target } => {
                    proc_mentions(proc, name) || loc_mentions(target, name)
                }
                Action::Newloc { binder } => binder == name,
            };
            in_action || proc_mentions(&b.continuation, name)
        }),
        Process::Parallel(l, r) => proc_mentions(l, name) || proc_mentions(r, name),
        Process::Replicate(inner) => proc_mentions(inner, name),
    }
}

fn loc_mentions(loc: &Location, name: &str) -> bool {
    match loc {
        Location::Constant(n) | Location::Variable(n) | Location::Binder(n) => n == name,
        Location::DontCare => false,
    }
}

fn aspect_mentions(aspect: &Aspect, name: &str) -> bool {
    cut_mentions(&aspect.cut, name)
        || aspect.body.cases.iter().any(|(cond, _)| cond_mentions(cond, name))
}

fn cut_mentions(cut: &Cut, name: &str) -> bool {
    let in_action = match &cut.action {
        CutAction::Out { args: locs, target }
        | CutAction::In { template: locs, target }
        | CutAction::Read { template: locs, target } => {
            locs.iter().any(|l| loc_mentions(l, name)) || loc_mentions(target, name)
        }
        CutAction::Eval { proc_var, target } => proc_var == name || loc_mentions(target, name),
        CutAction::Newloc { binder } => binder.as_deref() == Some(name),
    };
    loc_mentions(&cut.source, name) || in_action
}

fn cond_mentions(cond: &Condition, name: &str) -> bool {
    match cond {
        Condition::Equal(l, r) => loc_mentions(l, name) || loc_mentions(r, name),
        Condition::And(l, r) | Condition::Or(l, r) => {
            cond_mentions(l, name) || cond_mentions(r, name)
        }
        Condition::Not(inner) => cond_mentions(inner, name),
        Condition::Test { fields, target } => {
            fields.iter().any(|l| loc_mentions(l, name)) || loc_mentions(target, name)
        }
        Condition::Exists { var, set, body } | Condition::Forall { var, set, body } => {
            var == name || set_mentions(set, name) || cond_mentions(body, name)
        }
        Condition::CapMember(_, set) | Condition::IsEmpty(set) => set_mentions(set, name),
        Condition::LocMember(loc, set) => loc_mentions(loc, name) || set_mentions(set, name),
    }
}

fn set_mentions(set: &SetExpr, name: &str) -> bool {
    match set {
        SetExpr::Literal(elems) => elems.iter().any(|e| match e {
            SetElem::Loc(l) => loc_mentions(l, name),
            SetElem::Cap(_) => false,
        }),
        SetExpr::Named(n) => n == name,
        SetExpr::Union(l, r) | SetExpr::Intersect(l, r) => {
            set_mentions(l, name) || set_mentions(r, name)
        }
        SetExpr::VarUniverse => false,
        SetExpr::Act(p)
        | SetExpr::Lc(p)
        | SetExpr::Fv(p)
        | SetExpr::Loc(_, p)
        | SetExpr::LcCap(_, p)
        | SetExpr::FvCap(_, p) => p == name,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_system;
    use crate::print::render_net_item;

    fn run_src(src: &str, seed: u64, max_steps: u64) -> (SystemState, RunResult) {
        let mut state = parse_system(src).unwrap();
        let result = run(&mut state, seed, max_steps).unwrap();
        (state, result)
    }

    fn dump(state: &SystemState) -> Vec<String> {
        let mut lines: Vec<_> = state.net.items.iter().map(render_net_item).collect();
        lines.sort();
        lines
    }

    #[test]
    fn out_in_lifecycle() {
        let (state, result) = run_src(
            "let in n :: out(a,b)@m . in(a,!x)@m . out(x,done)@n",
            0,
            100,
        );
        assert_eq!(result.outcome, Outcome::Quiescent);
        assert_eq!(result.steps, 3);
        assert_eq!(dump(&state), vec!["n :: 0", "n :: <b,done>"]);
        assert_eq!(
            result.trace[1].to_string(),
            "#2 n :: in(a,!x)@m => ALLOW [] {x=b}"
        );
    }

    #[test]
    fn read_leaves_the_tuple_in_place() {
        let (state, result) = run_src(
            "let in m :: <a,b> || n :: read(a,!x)@m . out(x)@n",
            0,
            100,
        );
        assert_eq!(result.outcome, Outcome::Quiescent);
        assert_eq!(
            dump(&state),
            vec!["m :: <a,b>", "n :: 0", "n :: <b>"]
        );
    }

    #[test]
    fn blocked_input_is_not_scheduled() {
        let (state, result) = run_src("let in n :: in(missing)@m", 7, 100);
        assert_eq!(result.outcome, Outcome::Quiescent);
        assert_eq!(result.steps, 0);
        assert!(result.trace.is_empty());
        assert_eq!(dump(&state), vec!["n :: in(missing)@m"]);
    }

    #[test]
    fn denial_discards_the_whole_located_sum() {
        let (state, result) = run_src(
            "let
               Guard[user :: out(secret)@Sink] = break
             in
             n :: out(secret)@Sink + read(!x)@Store . out(x)@Sink
             || Store :: <harmless>",
            3,
            100,
        );
        // Whichever branch the scheduler tries first, the aspect only traps
        // the literal secret; a denied first pick must erase both branches.
        let denied = result.trace.iter().find(|e| e.decision == Decision::Deny);
        if let Some(event) = denied {
            assert_eq!(event.reports, vec![("Guard".to_string(), Suggestion::Break)]);
            assert_eq!(dump(&state), vec!["Store :: <harmless>", "n :: 0"]);
        } else {
            // The read fired first; the sum committed to the safe branch and
            // the follow-up out(harmless)@Sink is not trapped.
            assert_eq!(
                dump(&state),
                vec!["Sink :: <harmless>", "Store :: <harmless>", "n :: 0"]
            );
        }
    }

    #[test]
    fn denial_keeps_the_store_intact_for_inputs() {
        let (state, result) = run_src(
            "let
               NoTake[user :: in(_,_)@Store] = break
             in
             Store :: <a,b> || n :: in(!x,!y)@Store . out(x)@n",
            0,
            100,
        );
        assert_eq!(result.outcome, Outcome::Quiescent);
        assert_eq!(result.steps, 1);
        assert_eq!(result.trace[0].decision, Decision::Deny);
        assert!(result.trace[0].bindings.is_empty(), "verdicts never expose data");
        assert_eq!(dump(&state), vec!["Store :: <a,b>", "n :: 0"]);
    }

    #[test]
    fn eval_ships_the_process_to_its_target() {
        let (state, result) = run_src(
            "let in n :: eval(out(a)@m)@k . out(local)@n",
            1,
            100,
        );
        assert_eq!(result.outcome, Outcome::Quiescent);
        assert_eq!(
            dump(&state),
            vec!["k :: 0", "m :: <a>", "n :: 0", "n :: <local>"]
        );
        assert!(result.trace[0].to_string().starts_with("#1 n :: eval(out(a)@m)@k => ALLOW"));
    }

    #[test]
    fn newloc_mints_fresh_disjoint_names() {
        let (state, result) = run_src(
            "let in n :: newloc(!u) . out(u)@Registry || m :: <loc$0>",
            0,
            100,
        );
        assert_eq!(result.outcome, Outcome::Quiescent);
        // loc$0 is taken by the store, so the mint skips to loc$1.
        assert_eq!(result.trace[0].bindings, vec![("u".to_string(), "loc$1".to_string())]);
        assert_eq!(
            dump(&state),
            vec!["Registry :: <loc$1>", "loc$1 :: 0", "m :: <loc$0>", "n :: 0"]
        );
    }

    #[test]
    fn replication_unfolds_one_copy_per_step() {
        let (state, result) = run_src("let in n :: *out(a)@m", 0, 5);
        assert_eq!(result.outcome, Outcome::StepBudget);
        assert_eq!(result.steps, 5);
        let unfolds = result.trace.iter().filter(|e| e.action == "unfold").count();
        let outs = result.trace.iter().filter(|e| e.action != "unfold").count();
        assert_eq!(unfolds + outs, 5);
        assert!(unfolds >= 1);
        // The replicated item survives every unfolding.
        assert!(state
            .net
            .items
            .iter()
            .any(|i| matches!(i, NetItem::Proc { proc: Process::Replicate(_), .. })));
        assert_eq!(
            state.net.items.iter().filter(|i| matches!(i, NetItem::Tuple { .. })).count(),
            outs
        );
    }

    #[test]
    fn same_seed_replays_the_same_trace() {
        let src = "let in n :: out(a)@m | out(b)@m | out(c)@m";
        let (_, first) = run_src(src, 42, 100);
        let (_, second) = run_src(src, 42, 100);
        assert_eq!(first, second);
        let orders: std::collections::BTreeSet<Vec<String>> = (0..16)
            .map(|seed| {
                let (_, r) = run_src(src, seed, 100);
                r.trace.iter().map(|e| e.action.clone()).collect()
            })
            .collect();
        assert!(orders.len() > 1, "different seeds explore different interleavings");
    }

    #[test]
    fn parallel_continuations_split_into_items() {
        let (state, result) = run_src(
            "let in n :: out(go)@n . (out(a)@m | out(b)@m)",
            0,
            100,
        );
        assert_eq!(result.outcome, Outcome::Quiescent);
        assert_eq!(
            dump(&state),
            vec!["m :: <a>", "m :: <b>", "n :: 0", "n :: 0", "n :: <go>"]
        );
    }

    #[test]
    fn trace_lines_have_the_pinned_shape() {
        let event = TraceEvent {
            step: 12,
            node: "DrSmith".into(),
            action: "read(Alice,!x)@EHDB".into(),
            decision: Decision::Deny,
            reports: vec![
                ("A_p1_C1".into(), Suggestion::Proceed),
                ("A_p3_1".into(), Suggestion::Break),
            ],
            bindings: vec![("x".into(), "v".into())],
        };
        assert_eq!(
            event.to_string(),
            "#12 DrSmith :: read(Alice,!x)@EHDB => DENY [A_p1_C1:proceed,A_p3_1:break] {x=v}"
        );
    }
}
