//! Recursive-descent parser for the three source forms: systems (`let`
//! aspects `in` net), aspect files, and bare process terms.
//!
//! Identifiers carry no lexical marker for constants versus variables; the
//! parser decides by position. In programs, a name is a variable exactly
//! when an enclosing binder introduced it. In advice bodies, exactly when
//! the cut or a quantifier binds it. In cut positions neither rule can
//! apply, so there a capitalized name pins a constant and a lowercase name
//! binds a variable. Named sets declared with `set N = {...}` are inlined
//! into the aspects that mention them, so nothing downstream resolves names.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ast::{
    Action, AdviceBody, Aspect, Branch, Capability, Condition, Cut, CutAction, Location, Net,
    NetItem, Process, SetElem, SetExpr, Substitution, Suggestion, SystemState, Tuple,
};
use crate::lex::{lex, Kw, ParseError, Tok, Token};
use crate::model::{validate_net, Violation};
use crate::weaver::validate_aspect;

/// Why a source file was rejected: it does not parse, or it parses into
/// ill-formed syntax.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error(transparent)]
    Syntax(#[from] ParseError),
    #[error("{}", render_violations(.0))]
    Invalid(Vec<Violation>),
}

fn render_violations(violations: &[Violation]) -> String {
    let mut out = String::from("ill-formed input:");
    for v in violations {
        out.push_str("\n  ");
        out.push_str(&v.to_string());
    }
    out
}

/// Parses and validates a complete system.
pub fn parse_system(src: &str) -> Result<SystemState, LoadError> {
    let mut p = Parser::new(src)?;
    p.expect(Tok::Kw(Kw::Let))?;
    let aspects = p.declarations(true)?;
    p.expect(Tok::Kw(Kw::In))?;
    let net = p.net()?;
    p.expect_eof()?;

    let mut violations = validate_net(&net);
    violations.extend(aspects.iter().flat_map(validate_aspect));
    if !violations.is_empty() {
        return Err(LoadError::Invalid(violations));
    }
    Ok(SystemState::new(aspects, net))
}

/// Parses and validates an aspect file: set declarations and aspects only.
pub fn parse_aspect_file(src: &str) -> Result<Vec<Aspect>, LoadError> {
    let mut p = Parser::new(src)?;
    let aspects = p.declarations(false)?;
    p.expect_eof()?;
    let violations: Vec<_> = aspects.iter().flat_map(validate_aspect).collect();
    if !violations.is_empty() {
        return Err(LoadError::Invalid(violations));
    }
    Ok(aspects)
}

/// Parses a bare process term, for analysis queries. An optional header
/// `free a, b.` lists names to read as variables even though nothing in the
/// term binds them; everything else unbound is a constant.
pub fn parse_process_file(src: &str) -> Result<Process, LoadError> {
    let mut p = Parser::new(src)?;
    let mut scope = Vec::new();
    if p.eat(&Tok::Kw(Kw::Free)) {
        loop {
            scope.push(p.ident("a free variable name")?);
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
        p.expect(Tok::Dot)?;
    }
    let proc = p.process(&mut scope)?;
    p.expect_eof()?;
    Ok(proc)
}

struct CutScope {
    locs: Vec<String>,
    procs: Vec<String>,
}

impl CutScope {
    fn empty() -> Self {
        CutScope { locs: Vec::new(), procs: Vec::new() }
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    sets: BTreeMap<String, Vec<SetElem>>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        Ok(Parser { src, toks: lex(src)?, pos: 0, sets: BTreeMap::new() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, ahead: usize) -> Option<&Tok> {
        self.toks.get(self.pos + ahead).map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.start).unwrap_or(self.src.len())
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::at(self.src, self.here(), message)
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        match self.peek() {
            Some(tok) => self.err(format!("expected {wanted}, found {tok}")),
            None => self.err(format!("expected {wanted}, found end of input")),
        }
    }

    fn advance(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(_)) => {
                let Some(Tok::Ident(name)) = self.advance() else { unreachable!() };
                Ok(name)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    /// Aspect and set declarations; in a system file they run until `in`.
    fn declarations(&mut self, stop_at_in: bool) -> Result<Vec<Aspect>, ParseError> {
        let mut aspects = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Kw(Kw::In)) if stop_at_in => break,
                Some(Tok::Kw(Kw::Set)) => self.set_decl()?,
                Some(Tok::Ident(_)) => aspects.push(self.aspect()?),
                None if !stop_at_in => break,
                _ => {
                    let wanted = if stop_at_in {
                        "an aspect, a `set` declaration, or `in`"
                    } else {
                        "an aspect or a `set` declaration"
                    };
                    return Err(self.unexpected(wanted));
                }
            }
        }
        Ok(aspects)
    }

    fn set_decl(&mut self) -> Result<(), ParseError> {
        self.expect(Tok::Kw(Kw::Set))?;
        let name = self.ident("a set name")?;
        if name == "U" {
            return Err(self.err("`U` is the union operator and cannot name a set"));
        }
        if self.sets.contains_key(&name) {
            return Err(self.err(format!("set `{name}` is declared twice")));
        }
        self.expect(Tok::Eq)?;
        self.expect(Tok::LBrace)?;
        let mut elems = Vec::new();
        if self.peek() != Some(&Tok::RBrace) {
            loop {
                elems.push(self.set_decl_elem()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RBrace)?;
        self.sets.insert(name, elems);
        Ok(())
    }

    fn set_decl_elem(&mut self) -> Result<SetElem, ParseError> {
        match self.peek() {
            Some(Tok::Ident(_)) => {
                let name = self.ident("a set element")?;
                Ok(SetElem::Loc(Location::Constant(name)))
            }
            Some(Tok::Kw(k)) => match Capability::from_keyword(k.text()) {
                Some(cap) => {
                    self.advance();
                    Ok(SetElem::Cap(cap))
                }
                None => Err(self.unexpected("a set element")),
            },
            _ => Err(self.unexpected("a set element")),
        }
    }

    // ----- aspects -----

    fn aspect(&mut self) -> Result<Aspect, ParseError> {
        let name = self.ident("an aspect name")?;
        self.expect(Tok::LBracket)?;
        let (cut, scope) = self.cut()?;
        self.expect(Tok::RBracket)?;
        for v in &scope.locs {
            if self.sets.contains_key(v) {
                return Err(self.err(format!(
                    "cut variable `{v}` collides with a declared set"
                )));
            }
        }
        self.expect(Tok::Eq)?;
        let body = self.advice_body(&scope)?;
        Ok(Aspect { name, cut, body })
    }

    /// In cut positions no binder can tell constants from variables, so the
    /// spelling does: capitalized names pin constants, lowercase ones bind.
    fn cut_name(name: String) -> Location {
        if name.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
            Location::Constant(name)
        } else {
            Location::Variable(name)
        }
    }

    fn cut(&mut self) -> Result<(Cut, CutScope), ParseError> {
        let mut scope = CutScope::empty();
        let named = |loc: Location, scope: &mut CutScope| {
            if let Location::Variable(n) | Location::Binder(n) = &loc {
                scope.locs.push(n.clone());
            }
            loc
        };
        let source = named(Self::cut_name(self.ident("a source node")?), &mut scope);
        self.expect(Tok::ColonColon)?;
        let action = match self.peek() {
            Some(Tok::Kw(k @ (Kw::Out | Kw::In | Kw::Read))) => {
                let k = *k;
                self.advance();
                self.expect(Tok::LParen)?;
                let mut fields = Vec::new();
                loop {
                    fields.push(named(self.cut_field()?, &mut scope));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RParen)?;
                self.expect(Tok::At)?;
                let target = named(Self::cut_name(self.ident("a target node")?), &mut scope);
                match k {
                    Kw::Out => CutAction::Out { args: fields, target },
                    Kw::In => CutAction::In { template: fields, target },
                    _ => CutAction::Read { template: fields, target },
                }
            }
            Some(Tok::Kw(Kw::Eval)) => {
                self.advance();
                self.expect(Tok::LParen)?;
                let proc_var = self.ident("a process variable")?;
                scope.procs.push(proc_var.clone());
                self.expect(Tok::RParen)?;
                self.expect(Tok::At)?;
                let target = named(Self::cut_name(self.ident("a target node")?), &mut scope);
                CutAction::Eval { proc_var, target }
            }
            Some(Tok::Kw(Kw::Newloc)) => {
                self.advance();
                self.expect(Tok::LParen)?;
                let binder = if self.eat(&Tok::Underscore) {
                    None
                } else {
                    self.expect(Tok::Bang)?;
                    let name = self.ident("a binder name")?;
                    scope.locs.push(name.clone());
                    Some(name)
                };
                self.expect(Tok::RParen)?;
                CutAction::Newloc { binder }
            }
            _ => return Err(self.unexpected("an action keyword")),
        };
        let continuation = if self.eat(&Tok::Dot) {
            let x = self.ident("a continuation variable")?;
            scope.procs.push(x.clone());
            Some(x)
        } else {
            None
        };
        Ok((Cut { source, action, continuation }, scope))
    }

    fn cut_field(&mut self) -> Result<Location, ParseError> {
        match self.peek() {
            Some(Tok::Underscore) => {
                self.advance();
                Ok(Location::DontCare)
            }
            Some(Tok::Bang) => {
                self.advance();
                Ok(Location::Binder(self.ident("a binder name")?))
            }
            Some(Tok::Ident(_)) => Ok(Self::cut_name(self.ident("a field")?)),
            Some(Tok::Kw(k)) if Capability::from_keyword(k.text()).is_some() => {
                let name = k.text().to_string();
                self.advance();
                Ok(Location::Constant(name))
            }
            _ => Err(self.unexpected("a cut field")),
        }
    }

    fn advice_body(&mut self, scope: &CutScope) -> Result<AdviceBody, ParseError> {
        let mut cases = Vec::new();
        let mut quants = Vec::new();
        loop {
            if self.eat(&Tok::Kw(Kw::Case)) {
                self.expect(Tok::LParen)?;
                let cond = self.condition(scope, &mut quants)?;
                self.expect(Tok::RParen)?;
                let suggestion = self.suggestion()?;
                self.expect(Tok::Semi)?;
                cases.push((cond, suggestion));
            } else {
                let default = self.suggestion()?;
                return Ok(AdviceBody { cases, default });
            }
        }
    }

    fn suggestion(&mut self) -> Result<Suggestion, ParseError> {
        match self.peek() {
            Some(Tok::Kw(Kw::Break)) => {
                self.advance();
                Ok(Suggestion::Break)
            }
            Some(Tok::Kw(Kw::Proceed)) => {
                self.advance();
                Ok(Suggestion::Proceed)
            }
            _ => Err(self.unexpected("`break` or `proceed`")),
        }
    }

    // ----- conditions -----

    fn condition(
        &mut self,
        scope: &CutScope,
        quants: &mut Vec<String>,
    ) -> Result<Condition, ParseError> {
        let mut lhs = self.and_expr(scope, quants)?;
        while self.eat(&Tok::OrOp) {
            let rhs = self.and_expr(scope, quants)?;
            lhs = Condition::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(
        &mut self,
        scope: &CutScope,
        quants: &mut Vec<String>,
    ) -> Result<Condition, ParseError> {
        let mut lhs = self.unary(scope, quants)?;
        while self.eat(&Tok::AndOp) {
            let rhs = self.unary(scope, quants)?;
            lhs = Condition::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(
        &mut self,
        scope: &CutScope,
        quants: &mut Vec<String>,
    ) -> Result<Condition, ParseError> {
        match self.peek() {
            Some(Tok::Tilde) => {
                self.advance();
                Ok(Condition::Not(Box::new(self.unary(scope, quants)?)))
            }
            Some(Tok::Kw(k @ (Kw::Exists | Kw::Forall))) => {
                let forall = *k == Kw::Forall;
                self.advance();
                let var = self.ident("a quantified variable")?;
                if self.sets.contains_key(&var) {
                    return Err(self.err(format!(
                        "quantified variable `{var}` collides with a declared set"
                    )));
                }
                self.expect(Tok::Kw(Kw::In))?;
                let set = self.set_expr(scope, quants)?;
                self.expect(Tok::Colon)?;
                quants.push(var.clone());
                // The body extends as far to the right as it can.
                let body = self.condition(scope, quants);
                quants.pop();
                let body = Box::new(body?);
                Ok(if forall {
                    Condition::Forall { var, set, body }
                } else {
                    Condition::Exists { var, set, body }
                })
            }
            _ => self.atom(scope, quants),
        }
    }

    fn atom(
        &mut self,
        scope: &CutScope,
        quants: &mut Vec<String>,
    ) -> Result<Condition, ParseError> {
        match self.peek() {
            Some(Tok::Kw(Kw::Test)) => {
                self.advance();
                self.expect(Tok::LParen)?;
                let mut fields = Vec::new();
                loop {
                    fields.push(self.body_loc(scope, quants, true)?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RParen)?;
                self.expect(Tok::At)?;
                let target = self.body_loc(scope, quants, false)?;
                Ok(Condition::Test { fields, target })
            }
            Some(Tok::Kw(k)) if Capability::from_keyword(k.text()).is_some() => {
                let cap = Capability::from_keyword(k.text()).unwrap();
                self.advance();
                self.expect(Tok::Kw(Kw::In))?;
                let set = self.set_expr(scope, quants)?;
                Ok(Condition::CapMember(cap, set))
            }
            Some(Tok::LBrace) | Some(Tok::LVarStar) => self.emptiness(scope, quants),
            Some(Tok::LParen) => {
                // A parenthesis may open a grouped condition or a grouped
                // set expression; try the set reading first and back off.
                if let Some(cond) = self.try_emptiness(scope, quants) {
                    return Ok(cond);
                }
                self.advance();
                let inner = self.condition(scope, quants)?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                let starts_set = self.sets.contains_key(name)
                    || (self.analysis_form(name) && self.peek_at(1) == Some(&Tok::LParen));
                if starts_set {
                    return self.emptiness(scope, quants);
                }
                let loc = self.body_loc(scope, quants, false)?;
                if self.eat(&Tok::Eq) {
                    let rhs = self.body_loc(scope, quants, false)?;
                    Ok(Condition::Equal(loc, rhs))
                } else if self.eat(&Tok::Kw(Kw::In)) {
                    let set = self.set_expr(scope, quants)?;
                    Ok(Condition::LocMember(loc, set))
                } else {
                    Err(self.unexpected("`=` or `in`"))
                }
            }
            _ => Err(self.unexpected("a condition")),
        }
    }

    /// set-expr `=` `empty`
    fn emptiness(
        &mut self,
        scope: &CutScope,
        quants: &mut Vec<String>,
    ) -> Result<Condition, ParseError> {
        let set = self.set_expr(scope, quants)?;
        self.expect(Tok::Eq)?;
        self.expect(Tok::Kw(Kw::Empty))?;
        Ok(Condition::IsEmpty(set))
    }

    fn try_emptiness(
        &mut self,
        scope: &CutScope,
        quants: &mut Vec<String>,
    ) -> Option<Condition> {
        let save = self.pos;
        match self.emptiness(scope, quants) {
            Ok(cond) => Some(cond),
            Err(_) => {
                self.pos = save;
                None
            }
        }
    }

    fn analysis_form(&self, name: &str) -> bool {
        matches!(name, "Act" | "FV" | "LC")
            || name
                .split_once('_')
                .is_some_and(|(head, cap)| {
                    matches!(head, "Loc" | "FVc" | "LCc")
                        && Capability::from_keyword(cap).is_some()
                })
    }

    /// A location in an advice body: bound names are variables, anything
    /// else is a constant. Capability keywords double as data constants.
    fn body_loc(
        &mut self,
        scope: &CutScope,
        quants: &[String],
        allow_wildcard: bool,
    ) -> Result<Location, ParseError> {
        match self.peek() {
            Some(Tok::Underscore) if allow_wildcard => {
                self.advance();
                Ok(Location::DontCare)
            }
            Some(Tok::Ident(_)) => {
                let name = self.ident("a location")?;
                if scope.procs.contains(&name) {
                    return Err(self.err(format!(
                        "process variable `{name}` cannot stand for a location"
                    )));
                }
                if quants.contains(&name) || scope.locs.contains(&name) {
                    Ok(Location::Variable(name))
                } else {
                    Ok(Location::Constant(name))
                }
            }
            Some(Tok::Kw(k)) if Capability::from_keyword(k.text()).is_some() => {
                let name = k.text().to_string();
                self.advance();
                Ok(Location::Constant(name))
            }
            _ => Err(self.unexpected("a location")),
        }
    }

    // ----- set expressions -----

    fn set_expr(
        &mut self,
        scope: &CutScope,
        quants: &[String],
    ) -> Result<SetExpr, ParseError> {
        let mut lhs = self.set_term(scope, quants)?;
        while self.peek() == Some(&Tok::Ident("U".into())) {
            self.advance();
            let rhs = self.set_term(scope, quants)?;
            lhs = SetExpr::Union(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn set_term(
        &mut self,
        scope: &CutScope,
        quants: &[String],
    ) -> Result<SetExpr, ParseError> {
        let mut lhs = self.set_atom(scope, quants)?;
        while self.eat(&Tok::Amp) {
            let rhs = self.set_atom(scope, quants)?;
            lhs = SetExpr::Intersect(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn set_atom(
        &mut self,
        scope: &CutScope,
        quants: &[String],
    ) -> Result<SetExpr, ParseError> {
        match self.peek() {
            Some(Tok::LVarStar) => {
                self.advance();
                Ok(SetExpr::VarUniverse)
            }
            Some(Tok::LBrace) => {
                self.advance();
                let mut elems = Vec::new();
                if self.peek() != Some(&Tok::RBrace) {
                    loop {
                        elems.push(self.set_elem(scope, quants)?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBrace)?;
                Ok(SetExpr::Literal(elems))
            }
            Some(Tok::LParen) => {
                self.advance();
                let inner = self.set_expr(scope, quants)?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                if self.analysis_form(&name) && self.peek_at(1) == Some(&Tok::LParen) {
                    self.advance();
                    self.expect(Tok::LParen)?;
                    let pv = self.ident("a process variable")?;
                    self.expect(Tok::RParen)?;
                    return Ok(match name.as_str() {
                        "Act" => SetExpr::Act(pv),
                        "FV" => SetExpr::Fv(pv),
                        "LC" => SetExpr::Lc(pv),
                        _ => {
                            let (head, cap) = name.split_once('_').unwrap();
                            let cap = Capability::from_keyword(cap).unwrap();
                            match head {
                                "Loc" => SetExpr::Loc(cap, pv),
                                "FVc" => SetExpr::FvCap(cap, pv),
                                _ => SetExpr::LcCap(cap, pv),
                            }
                        }
                    });
                }
                if let Some(elems) = self.sets.get(&name) {
                    let elems = elems.clone();
                    self.advance();
                    return Ok(SetExpr::Literal(elems));
                }
                Err(self.err(format!("unknown set or analysis form `{name}`")))
            }
            _ => Err(self.unexpected("a set expression")),
        }
    }

    fn set_elem(
        &mut self,
        scope: &CutScope,
        quants: &[String],
    ) -> Result<SetElem, ParseError> {
        match self.peek() {
            Some(Tok::Kw(k)) if Capability::from_keyword(k.text()).is_some() => {
                let cap = Capability::from_keyword(k.text()).unwrap();
                self.advance();
                Ok(SetElem::Cap(cap))
            }
            _ => Ok(SetElem::Loc(self.body_loc(scope, quants, false)?)),
        }
    }

    // ----- nets and processes -----

    fn net(&mut self) -> Result<Net, ParseError> {
        let mut items = vec![self.located()?];
        while self.eat(&Tok::DPipe) {
            items.push(self.located()?);
        }
        Ok(Net::new(items))
    }

    fn located(&mut self) -> Result<NetItem, ParseError> {
        let node = self.ident("a node name")?;
        self.expect(Tok::ColonColon)?;
        if self.peek() == Some(&Tok::LAngle) {
            Ok(NetItem::Tuple { node, tuple: self.tuple()? })
        } else {
            let mut scope = Vec::new();
            Ok(NetItem::Proc { node, proc: self.process(&mut scope)? })
        }
    }

    fn tuple(&mut self) -> Result<Tuple, ParseError> {
        self.expect(Tok::LAngle)?;
        let mut fields = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Ident(_)) => fields.push(self.ident("a field")?),
                Some(Tok::Kw(k)) if Capability::from_keyword(k.text()).is_some() => {
                    fields.push(k.text().to_string());
                    self.advance();
                }
                _ => return Err(self.unexpected("a tuple field")),
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RAngle)?;
        Ok(Tuple::new(fields))
    }

    fn process(&mut self, scope: &mut Vec<String>) -> Result<Process, ParseError> {
        let mut lhs = self.par_term(scope)?;
        while self.eat(&Tok::Pipe) {
            let rhs = self.par_term(scope)?;
            lhs = Process::Parallel(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn par_term(&mut self, scope: &mut Vec<String>) -> Result<Process, ParseError> {
        if self.eat(&Tok::Star) {
            Ok(Process::Replicate(Box::new(self.par_term(scope)?)))
        } else if self.eat(&Tok::Zero) {
            Ok(Process::nil())
        } else if self.eat(&Tok::LParen) {
            let inner = self.process(scope)?;
            self.expect(Tok::RParen)?;
            Ok(inner)
        } else {
            let mut branches = vec![self.branch(scope)?];
            while self.eat(&Tok::Plus) {
                branches.push(self.branch(scope)?);
            }
            Ok(Process::Sum(branches))
        }
    }

    fn branch(&mut self, scope: &mut Vec<String>) -> Result<Branch, ParseError> {
        let action = self.action(scope)?;
        let depth = scope.len();
        scope.extend(action.binders().iter().map(|s| s.to_string()));
        let continuation = if self.eat(&Tok::Dot) {
            self.continuation(scope)
        } else {
            Ok(Process::nil())
        };
        scope.truncate(depth);
        Ok(Branch::new(action, continuation?))
    }

    /// After a `.` only a single prefixed term, `0`, a replication, or a
    /// parenthesized process may follow; sums must be parenthesized.
    fn continuation(&mut self, scope: &mut Vec<String>) -> Result<Process, ParseError> {
        if self.eat(&Tok::Star) {
            Ok(Process::Replicate(Box::new(self.continuation(scope)?)))
        } else if self.eat(&Tok::Zero) {
            Ok(Process::nil())
        } else if self.eat(&Tok::LParen) {
            let inner = self.process(scope)?;
            self.expect(Tok::RParen)?;
            Ok(inner)
        } else {
            Ok(Process::Sum(vec![self.branch(scope)?]))
        }
    }

    fn action(&mut self, scope: &mut Vec<String>) -> Result<Action, ParseError> {
        match self.peek() {
            Some(Tok::Kw(k @ (Kw::Out | Kw::In | Kw::Read))) => {
                let k = *k;
                self.advance();
                self.expect(Tok::LParen)?;
                let mut fields = Vec::new();
                loop {
                    fields.push(self.program_field(scope)?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RParen)?;
                self.expect(Tok::At)?;
                let target = self.program_loc(scope)?;
                Ok(match k {
                    Kw::Out => Action::Out { args: fields, target },
                    Kw::In => Action::In { template: fields, target },
                    _ => Action::Read { template: fields, target },
                })
            }
            Some(Tok::Kw(Kw::Eval)) => {
                self.advance();
                self.expect(Tok::LParen)?;
                let proc = self.process(scope)?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::At)?;
                let target = self.program_loc(scope)?;
                Ok(Action::Eval { proc, target })
            }
            Some(Tok::Kw(Kw::Newloc)) => {
                self.advance();
                self.expect(Tok::LParen)?;
                self.expect(Tok::Bang)?;
                let binder = self.ident("a binder name")?;
                self.expect(Tok::RParen)?;
                Ok(Action::Newloc { binder })
            }
            _ => Err(self.unexpected("an action keyword")),
        }
    }

    fn program_field(&mut self, scope: &[String]) -> Result<Location, ParseError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.advance();
                Ok(Location::Binder(self.ident("a binder name")?))
            }
            Some(Tok::Underscore) => {
                self.advance();
                Ok(Location::DontCare)
            }
            Some(Tok::Kw(k)) if Capability::from_keyword(k.text()).is_some() => {
                let name = k.text().to_string();
                self.advance();
                Ok(Location::Constant(name))
            }
            Some(Tok::Ident(_)) => {
                let name = self.ident("a field")?;
                Ok(if scope.contains(&name) {
                    Location::Variable(name)
                } else {
                    Location::Constant(name)
                })
            }
            _ => Err(self.unexpected("a field")),
        }
    }

    fn program_loc(&mut self, scope: &[String]) -> Result<Location, ParseError> {
        let name = self.ident("a target node")?;
        Ok(if scope.contains(&name) {
            Location::Variable(name)
        } else {
            Location::Constant(name)
        })
    }
}

/// Builds the substitution a `free` header would produce; handy for tests
/// that need an environment mirroring a process file's open names.
pub fn closing_substitution(pairs: &[(&str, &str)]) -> Substitution {
    let mut s = Substitution::new();
    for (name, value) in pairs {
        s.bind_loc(*name, Location::Constant((*value).to_string()));
    }
    s
}
