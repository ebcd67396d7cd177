//! Core syntax: locations, tuples, processes, nets, aspects and conditions.
//!
//! Everything the interpreter manipulates is built from these types. Nets are
//! kept as flat item lists; structural rearrangement lives in [`crate::model`].

use std::collections::BTreeMap;
use std::fmt;

/// A location expression. Constants name nodes and data; variables stand for
/// a location that a binder or a cut will supply; binders (`!u`) introduce a
/// variable; `_` matches anything and binds nothing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    Constant(String),
    Variable(String),
    Binder(String),
    DontCare,
}

impl Location {
    pub fn constant(name: impl Into<String>) -> Self {
        Location::Constant(name.into())
    }

    pub fn variable(name: impl Into<String>) -> Self {
        Location::Variable(name.into())
    }

    pub fn binder(name: impl Into<String>) -> Self {
        Location::Binder(name.into())
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Constant(n) | Location::Variable(n) => f.write_str(n),
            Location::Binder(n) => write!(f, "!{n}"),
            Location::DontCare => f.write_str("_"),
        }
    }
}

/// Data stored in a tuple space: a non-empty sequence of location constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tuple {
    pub fields: Vec<String>,
}

impl Tuple {
    pub fn new(fields: Vec<String>) -> Self {
        Tuple { fields }
    }

    pub fn arity(&self) -> usize {
        self.fields.len()
    }
}

/// The five action kinds, ordered by the capability lattice used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Capability {
    Out,
    In,
    Read,
    Eval,
    Newloc,
}

impl Capability {
    pub const ALL: [Capability; 5] = [
        Capability::Out,
        Capability::In,
        Capability::Read,
        Capability::Eval,
        Capability::Newloc,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Capability::Out => "out",
            Capability::In => "in",
            Capability::Read => "read",
            Capability::Eval => "eval",
            Capability::Newloc => "newloc",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Capability::ALL.into_iter().find(|c| c.keyword() == word)
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A process action. `Out` emits data, `In` consumes a matching tuple, `Read`
/// copies one, `Eval` ships a process to another node, `Newloc` mints a node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    Out { args: Vec<Location>, target: Location },
    In { template: Vec<Location>, target: Location },
    Read { template: Vec<Location>, target: Location },
    Eval { proc: Process, target: Location },
    Newloc { binder: String },
}

impl Action {
    pub fn capability(&self) -> Capability {
        match self {
            Action::Out { .. } => Capability::Out,
            Action::In { .. } => Capability::In,
            Action::Read { .. } => Capability::Read,
            Action::Eval { .. } => Capability::Eval,
            Action::Newloc { .. } => Capability::Newloc,
        }
    }

    pub fn target(&self) -> Option<&Location> {
        match self {
            Action::Out { target, .. }
            | Action::In { target, .. }
            | Action::Read { target, .. }
            | Action::Eval { target, .. } => Some(target),
            Action::Newloc { .. } => None,
        }
    }

    /// Names bound by this action for the rest of its branch.
    pub fn binders(&self) -> Vec<&str> {
        match self {
            Action::In { template, .. } | Action::Read { template, .. } => template
                .iter()
                .filter_map(|l| match l {
                    Location::Binder(n) => Some(n.as_str()),
                    _ => None,
                })
                .collect(),
            Action::Newloc { binder } => vec![binder.as_str()],
            _ => Vec::new(),
        }
    }
}

/// One guarded alternative of a sum: an action prefix and its continuation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Branch {
    pub action: Action,
    pub continuation: Process,
}

impl Branch {
    pub fn new(action: Action, continuation: Process) -> Self {
        Branch { action, continuation }
    }
}

/// Process terms. A sum offers its branches; the empty sum is the inert
/// process. Replication unfolds lazily, one copy per scheduling.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Process {
    Sum(Vec<Branch>),
    Parallel(Box<Process>, Box<Process>),
    Replicate(Box<Process>),
}

impl Process {
    pub fn nil() -> Self {
        Process::Sum(Vec::new())
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Process::Sum(bs) if bs.is_empty())
    }

    pub fn single(action: Action, continuation: Process) -> Self {
        Process::Sum(vec![Branch::new(action, continuation)])
    }

    pub fn act(action: Action) -> Self {
        Process::single(action, Process::nil())
    }
}

/// One resource of a net: a process or a data tuple, pinned to a node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NetItem {
    Proc { node: String, proc: Process },
    Tuple { node: String, tuple: Tuple },
}

impl NetItem {
    pub fn node(&self) -> &str {
        match self {
            NetItem::Proc { node, .. } | NetItem::Tuple { node, .. } => node,
        }
    }
}

/// A net is a multiset of located items; order only fixes scheduling
/// enumeration, it has no semantic weight.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Net {
    pub items: Vec<NetItem>,
}

impl Net {
    pub fn new(items: Vec<NetItem>) -> Self {
        Net { items }
    }
}

/// A finite map from variables to locations and from process variables to
/// processes, produced by matching and consumed by instantiation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    locs: BTreeMap<String, Location>,
    procs: BTreeMap<String, Process>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    /// Binds a variable; returns false when the name is already bound to a
    /// different value (matching treats that as failure).
    pub fn bind_loc(&mut self, name: impl Into<String>, value: Location) -> bool {
        let name = name.into();
        match self.locs.get(&name) {
            Some(old) => *old == value,
            None => {
                self.locs.insert(name, value);
                true
            }
        }
    }

    pub fn bind_proc(&mut self, name: impl Into<String>, value: Process) -> bool {
        let name = name.into();
        match self.procs.get(&name) {
            Some(old) => *old == value,
            None => {
                self.procs.insert(name, value);
                true
            }
        }
    }

    pub fn loc(&self, name: &str) -> Option<&Location> {
        self.locs.get(name)
    }

    pub fn proc(&self, name: &str) -> Option<&Process> {
        self.procs.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty() && self.procs.is_empty()
    }

    /// Location bindings in name order.
    pub fn locs(&self) -> impl Iterator<Item = (&str, &Location)> {
        self.locs.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Removes the given names from the location domain. Used when a binder
    /// shadows an outer binding of the same name.
    pub fn without_locs<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Substitution {
        let mut out = self.clone();
        for n in names {
            out.locs.remove(n);
        }
        out
    }
}

/// Cut shape for one action kind. Fields may pin constants, bind with plain
/// variables, capture binder names with `!v`, or ignore a position with `_`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CutAction {
    Out { args: Vec<Location>, target: Location },
    In { template: Vec<Location>, target: Location },
    Read { template: Vec<Location>, target: Location },
    Eval { proc_var: String, target: Location },
    Newloc { binder: Option<String> },
}

impl CutAction {
    pub fn capability(&self) -> Capability {
        match self {
            CutAction::Out { .. } => Capability::Out,
            CutAction::In { .. } => Capability::In,
            CutAction::Read { .. } => Capability::Read,
            CutAction::Eval { .. } => Capability::Eval,
            CutAction::Newloc { .. } => Capability::Newloc,
        }
    }
}

/// Where an aspect applies: source node, action shape, and optionally a
/// process variable capturing the continuation of the trapped branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cut {
    pub source: Location,
    pub action: CutAction,
    pub continuation: Option<String>,
}

/// What an advice case recommends for the trapped action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suggestion {
    Proceed,
    Break,
}

impl fmt::Display for Suggestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suggestion::Proceed => "proceed",
            Suggestion::Break => "break",
        })
    }
}

/// Advice: guarded cases tried in order, then an unconditional default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdviceBody {
    pub cases: Vec<(Condition, Suggestion)>,
    pub default: Suggestion,
}

/// A named policy unit: trap whatever the cut describes, run the body to a
/// suggestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aspect {
    pub name: String,
    pub cut: Cut,
    pub body: AdviceBody,
}

/// Boolean conditions of advice cases. `Test` probes the current net for a
/// matching tuple; the quantifiers range over finite set values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Equal(Location, Location),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    Not(Box<Condition>),
    Test { fields: Vec<Location>, target: Location },
    Exists { var: String, set: SetExpr, body: Box<Condition> },
    Forall { var: String, set: SetExpr, body: Box<Condition> },
    CapMember(Capability, SetExpr),
    LocMember(Location, SetExpr),
    IsEmpty(SetExpr),
}

/// An element of a literal set: a location (constant or variable, resolved
/// when the condition is evaluated) or a capability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetElem {
    Loc(Location),
    Cap(Capability),
}

/// Set expressions evaluated over a captured continuation or spawned process.
/// `VarUniverse` denotes the set of all variables, kept symbolic until an
/// intersection collapses it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetExpr {
    Literal(Vec<SetElem>),
    Named(String),
    Union(Box<SetExpr>, Box<SetExpr>),
    Intersect(Box<SetExpr>, Box<SetExpr>),
    Act(String),
    Loc(Capability, String),
    Lc(String),
    LcCap(Capability, String),
    Fv(String),
    FvCap(Capability, String),
    VarUniverse,
}

/// A complete program: the policy pipeline plus the net it governs.
/// `fresh_counter` feeds [`crate::runtime::fresh_location`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemState {
    pub aspects: Vec<Aspect>,
    pub net: Net,
    pub fresh_counter: u64,
}

impl SystemState {
    pub fn new(aspects: Vec<Aspect>, net: Net) -> Self {
        SystemState { aspects, net, fresh_counter: 0 }
    }
}
