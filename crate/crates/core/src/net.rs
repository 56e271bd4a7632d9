//! Simplified timed colored Petri nets: structure, markings, bindings and the
//! token game.
//!
//! Tokens carry an optional case identifier, a map of attribute values and the
//! time at which they become available. A token is *time-enabled* at `now`
//! when `available_at <= now`; only time-enabled tokens take part in bindings.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::constraint::Constraint;
use crate::error::{Error, Result};
use crate::value::{AttrType, Time, Value};

pub const MODEL_FORMAT: &str = "dsync-net/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceKind {
    Case,
    Resource,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: AttrType,
}

impl Attribute {
    pub fn new(name: impl Into<String>, ty: AttrType) -> Self {
        Attribute {
            name: name.into(),
            ty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub id: String,
    pub kind: PlaceKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<Attribute>,
}

impl Place {
    pub fn new(id: impl Into<String>, kind: PlaceKind) -> Self {
        Place {
            id: id.into(),
            kind,
            attributes: Vec::new(),
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, ty: AttrType) -> Self {
        self.attributes.push(Attribute::new(name, ty));
        self
    }

    pub fn attr_type(&self, name: &str) -> Option<AttrType> {
        self.attributes.iter().find(|a| a.name == name).map(|a| a.ty)
    }
}

/// Duration distribution of a transition (or of an arrival process).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelaySpec {
    Constant(f64),
    Uniform(f64, f64),
    Exponential(f64),
}

impl Default for DelaySpec {
    fn default() -> Self {
        DelaySpec::Constant(0.0)
    }
}

impl DelaySpec {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DelaySpec::Constant(c) => c,
            DelaySpec::Uniform(lo, hi) if hi > lo => rng.random_range(lo..hi),
            DelaySpec::Uniform(lo, _) => lo,
            DelaySpec::Exponential(mean) => match Exp::new(1.0 / mean) {
                Ok(exp) => exp.sample(rng),
                Err(_) => 0.0,
            },
        }
    }

    pub fn is_stochastic(&self) -> bool {
        !matches!(self, DelaySpec::Constant(_))
    }

    fn check(&self) -> std::result::Result<(), String> {
        match *self {
            DelaySpec::Constant(c) if c.is_finite() && c >= 0.0 => Ok(()),
            DelaySpec::Uniform(lo, hi) if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi => Ok(()),
            DelaySpec::Exponential(mean) if mean.is_finite() && mean > 0.0 => Ok(()),
            ref other => Err(format!("delay {other:?} can produce negative or undefined durations")),
        }
    }
}

/// Generator for one attribute of tokens created by a source transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrGen {
    Constant(Value),
    Uniform(f64, f64),
    UniformInt(i64, i64),
    Choice(Vec<Value>),
}

impl AttrGen {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match self {
            AttrGen::Constant(v) => v.clone(),
            AttrGen::Uniform(lo, hi) if hi > lo => Value::Number(rng.random_range(*lo..*hi)),
            AttrGen::Uniform(lo, _) => Value::Number(*lo),
            AttrGen::UniformInt(lo, hi) => Value::Number(rng.random_range(*lo..=(*hi).max(*lo)) as f64),
            AttrGen::Choice(values) if values.is_empty() => Value::Number(0.0),
            AttrGen::Choice(values) => values[rng.random_range(0..values.len())].clone(),
        }
    }

    fn value_type(&self) -> Option<AttrType> {
        match self {
            AttrGen::Constant(v) => Some(v.attr_type()),
            AttrGen::Uniform(..) | AttrGen::UniformInt(..) => Some(AttrType::Number),
            AttrGen::Choice(values) => {
                let first = values.first()?.attr_type();
                values.iter().all(|v| v.attr_type() == first).then_some(first)
            }
        }
    }
}

/// Case generator attached to a transition with an empty preset.
///
/// The source announces each case one inter-arrival time ahead: a case token
/// is produced at the moment the previous case becomes available and is itself
/// available one sampled inter-arrival later. `first` overrides the lead time
/// of the very first case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSpec {
    pub interarrival: DelaySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first: Option<DelaySpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, AttrGen>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub id: String,
    /// Activity label used in event logs; defaults to the id.
    pub label: Option<String>,
    pub task: bool,
    pub delay: DelaySpec,
    pub guard: Option<Constraint>,
    pub arrival: Option<ArrivalSpec>,
    /// Input place whose token defines the case of a firing.
    pub case_input: Option<String>,
}

impl Transition {
    pub fn new(id: impl Into<String>) -> Self {
        Transition {
            id: id.into(),
            label: None,
            task: true,
            delay: DelaySpec::default(),
            guard: None,
            arrival: None,
            case_input: None,
        }
    }

    pub fn with_delay(mut self, delay: DelaySpec) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_guard(mut self, guard: Constraint) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_arrival(mut self, arrival: ArrivalSpec) -> Self {
        self.arrival = Some(arrival);
        self
    }

    pub fn control(mut self) -> Self {
        self.task = false;
        self
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.id)
    }

    pub fn is_source(&self) -> bool {
        self.arrival.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Token {
    #[serde(rename = "id", default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, Value>,
    #[serde(rename = "time", default)]
    pub available_at: Time,
}

impl Token {
    pub fn new(case_id: impl Into<String>, available_at: Time) -> Self {
        Token {
            case_id: Some(case_id.into()),
            attrs: BTreeMap::new(),
            available_at,
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: Value) -> Self {
        self.attrs.insert(name.into(), value);
        self
    }

    pub fn is_enabled(&self, now: Time) -> bool {
        self.available_at <= now
    }

    /// Canonical token order: availability, then case id.
    pub fn order(&self, other: &Token) -> Ordering {
        self.available_at
            .total_cmp(&other.available_at)
            .then_with(|| self.case_id.cmp(&other.case_id))
    }

    fn same_identity(&self, other: &Token) -> bool {
        self.order(other) == Ordering::Equal && self.attrs == other.attrs
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.case_id.as_deref().unwrap_or("•"))?;
        for (k, v) in &self.attrs {
            write!(f, ",{k}={v}")?;
        }
        write!(f, ")@{}", self.available_at)
    }
}

/// Per-place multisets of timed tokens, each kept in canonical order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Marking {
    places: BTreeMap<String, Vec<Token>>,
}

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tokens(&self, place: &str) -> &[Token] {
        self.places.get(place).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn enabled<'a>(&'a self, place: &str, now: Time) -> impl Iterator<Item = &'a Token> + 'a {
        self.tokens(place).iter().filter(move |t| t.is_enabled(now))
    }

    pub fn add(&mut self, place: impl Into<String>, token: Token) {
        let tokens = self.places.entry(place.into()).or_default();
        let pos = tokens.partition_point(|t| t.order(&token) != Ordering::Greater);
        tokens.insert(pos, token);
    }

    /// Removes one token equal to `token`; returns false if none is present.
    pub fn remove(&mut self, place: &str, token: &Token) -> bool {
        let Some(tokens) = self.places.get_mut(place) else {
            return false;
        };
        match tokens.iter().position(|t| t.same_identity(token)) {
            Some(i) => {
                tokens.remove(i);
                if tokens.is_empty() {
                    self.places.remove(place);
                }
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, place: &str, token: &Token) -> bool {
        self.tokens(place).iter().any(|t| t.same_identity(token))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Token])> {
        self.places.iter().map(|(p, ts)| (p.as_str(), ts.as_slice()))
    }

    pub fn total_tokens(&self) -> usize {
        self.places.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    /// Earliest availability time strictly after `now`, over all places.
    pub fn next_availability(&self, now: Time) -> Option<Time> {
        self.places
            .values()
            .flatten()
            .map(|t| t.available_at)
            .filter(|&a| a > now)
            .min_by(f64::total_cmp)
    }

    pub fn apply(&mut self, delta: &Delta) -> Result<()> {
        for (place, token) in &delta.consumed {
            if !self.remove(place, token) {
                return Err(Error::TokenAbsent {
                    place: place.clone(),
                    token: token.to_string(),
                });
            }
        }
        for (place, token) in &delta.produced {
            self.add(place.clone(), token.clone());
        }
        Ok(())
    }

    /// Reverts a previously applied delta.
    pub fn revert(&mut self, delta: &Delta) -> Result<()> {
        for (place, token) in &delta.produced {
            if !self.remove(place, token) {
                return Err(Error::TokenAbsent {
                    place: place.clone(),
                    token: token.to_string(),
                });
            }
        }
        for (place, token) in &delta.consumed {
            self.add(place.clone(), token.clone());
        }
        Ok(())
    }

    fn normalize(&mut self) {
        self.places.retain(|_, ts| !ts.is_empty());
        for tokens in self.places.values_mut() {
            tokens.sort_by(Token::order);
        }
    }

    pub fn summary(&self) -> String {
        let parts: Vec<String> = self
            .places
            .iter()
            .map(|(p, ts)| {
                let toks: Vec<String> = ts.iter().map(Token::to_string).collect();
                format!("{p}: [{}]", toks.join(" "))
            })
            .collect();
        if parts.is_empty() {
            "<empty>".into()
        } else {
            parts.join(", ")
        }
    }
}

/// Choice of one token per input place of a transition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Binding {
    pub tokens: BTreeMap<String, Token>,
}

impl Binding {
    pub fn get(&self, place: &str) -> Option<&Token> {
        self.tokens.get(place)
    }

    /// Availability of the most recently available bound token.
    pub fn newest(&self) -> Time {
        self.tokens
            .values()
            .map(|t| t.available_at)
            .max_by(f64::total_cmp)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Tokens consumed and produced by one firing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Delta {
    pub consumed: Vec<(String, Token)>,
    pub produced: Vec<(String, Token)>,
}

#[derive(Debug, Clone)]
pub struct Net {
    pub name: String,
    places: Vec<Place>,
    transitions: Vec<Transition>,
    flows: Vec<(String, String)>,
    initial_marking: Marking,
    place_idx: BTreeMap<String, usize>,
    trans_idx: BTreeMap<String, usize>,
    incoming: BTreeMap<String, BTreeSet<String>>,
    outgoing: BTreeMap<String, BTreeSet<String>>,
}

impl Net {
    /// Builds a net without validating it; see [`Net::validate`].
    pub fn new(
        name: impl Into<String>,
        places: Vec<Place>,
        transitions: Vec<Transition>,
        flows: Vec<(String, String)>,
        mut initial_marking: Marking,
    ) -> Net {
        let mut place_idx = BTreeMap::new();
        for (i, p) in places.iter().enumerate() {
            place_idx.entry(p.id.clone()).or_insert(i);
        }
        let mut trans_idx = BTreeMap::new();
        for (i, t) in transitions.iter().enumerate() {
            trans_idx.entry(t.id.clone()).or_insert(i);
        }
        let mut incoming: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut outgoing: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (src, dst) in &flows {
            incoming.entry(dst.clone()).or_default().insert(src.clone());
            outgoing.entry(src.clone()).or_default().insert(dst.clone());
        }
        initial_marking.normalize();
        Net {
            name: name.into(),
            places,
            transitions,
            flows,
            initial_marking,
            place_idx,
            trans_idx,
            incoming,
            outgoing,
        }
    }

    /// Parses a model file and rejects nets that violate structural invariants.
    pub fn from_json(text: &str) -> Result<Net> {
        let file: NetFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let net = file.into_net()?;
        let violations = net.validate();
        if violations.is_empty() {
            Ok(net)
        } else {
            Err(Error::InvalidNet(violations))
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Net> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Net::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let file = NetFile::from_net(self);
        serde_json::to_string_pretty(&file).expect("net serializes")
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn flows(&self) -> &[(String, String)] {
        &self.flows
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial_marking
    }

    pub fn place(&self, id: &str) -> Option<&Place> {
        self.place_idx.get(id).map(|&i| &self.places[i])
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.trans_idx.get(id).map(|&i| &self.transitions[i])
    }

    pub fn transition_by_label(&self, label: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.task && t.label() == label)
    }

    fn require_node(&self, id: &str) -> Result<()> {
        if self.place_idx.contains_key(id) || self.trans_idx.contains_key(id) {
            Ok(())
        } else {
            Err(Error::UnknownNode(id.to_string()))
        }
    }

    fn require_transition(&self, id: &str) -> Result<&Transition> {
        self.transition(id).ok_or_else(|| Error::UnknownTransition(id.to_string()))
    }

    /// Nodes with a flow into `node`.
    pub fn preset(&self, node: &str) -> Result<BTreeSet<String>> {
        self.require_node(node)?;
        Ok(self.incoming.get(node).cloned().unwrap_or_default())
    }

    /// Nodes with a flow out of `node`.
    pub fn postset(&self, node: &str) -> Result<BTreeSet<String>> {
        self.require_node(node)?;
        Ok(self.outgoing.get(node).cloned().unwrap_or_default())
    }

    pub(crate) fn inputs(&self, node: &str) -> impl Iterator<Item = &str> {
        self.incoming.get(node).into_iter().flatten().map(String::as_str)
    }

    pub(crate) fn outputs(&self, node: &str) -> impl Iterator<Item = &str> {
        self.outgoing.get(node).into_iter().flatten().map(String::as_str)
    }

    pub fn has_flow(&self, src: &str, dst: &str) -> bool {
        self.outgoing.get(src).is_some_and(|s| s.contains(dst))
    }

    pub fn place_kind(&self, id: &str) -> Option<PlaceKind> {
        self.place(id).map(|p| p.kind)
    }

    /// Input place whose token identifies the case of a firing of `t`.
    pub fn case_place<'a>(&'a self, t: &'a Transition) -> Option<&'a str> {
        if let Some(p) = &t.case_input {
            return Some(p.as_str());
        }
        self.inputs(&t.id).find(|p| self.place_kind(p) == Some(PlaceKind::Case))
    }

    pub fn resource_place<'a>(&'a self, t: &'a Transition) -> Option<&'a str> {
        self.inputs(&t.id).find(|p| self.place_kind(p) == Some(PlaceKind::Resource))
    }

    /// All bindings of time-enabled tokens, in canonical order (places by id,
    /// then token availability, then case id). With `check_guard`, a guard
    /// that evaluates false on `m` at `now` yields no bindings.
    pub fn enabled_bindings(&self, m: &Marking, t_id: &str, now: Time, check_guard: bool) -> Result<Vec<Binding>> {
        let t = self.require_transition(t_id)?;
        if check_guard {
            if let Some(g) = &t.guard {
                if !g.eval(m, now) {
                    return Ok(Vec::new());
                }
            }
        }
        Ok(self.bindings_where(m, t_id, now, |_, _| true))
    }

    /// Binding enumeration restricted to tokens accepted by `accept`.
    pub(crate) fn bindings_where(
        &self,
        m: &Marking,
        t_id: &str,
        now: Time,
        accept: impl Fn(&str, &Token) -> bool,
    ) -> Vec<Binding> {
        let mut choices: Vec<(&str, Vec<&Token>)> = Vec::new();
        for place in self.inputs(t_id) {
            let mut options: Vec<&Token> = Vec::new();
            for tok in m.enabled(place, now).filter(|tok| accept(place, tok)) {
                if options.last().is_none_or(|last| !last.same_identity(tok)) {
                    options.push(tok);
                }
            }
            if options.is_empty() {
                return Vec::new();
            }
            choices.push((place, options));
        }
        let mut out = vec![Binding::default()];
        for (place, options) in choices {
            let mut next = Vec::with_capacity(out.len() * options.len());
            for partial in &out {
                for tok in &options {
                    let mut b = partial.clone();
                    b.tokens.insert(place.to_string(), (*tok).clone());
                    next.push(b);
                }
            }
            out = next;
        }
        out
    }

    /// The first-in-first-out binding: the oldest time-enabled token of every
    /// input place. This is also the first binding in canonical order.
    pub fn oldest_binding(&self, m: &Marking, t_id: &str, now: Time) -> Option<Binding> {
        let mut b = Binding::default();
        for place in self.inputs(t_id) {
            let tok = m.enabled(place, now).next()?;
            b.tokens.insert(place.to_string(), tok.clone());
        }
        Some(b)
    }

    /// Computes the effect of firing `t_id` under `y` at `now`, with every
    /// produced token available at `now + delay`. `fresh` supplies the case
    /// token of transitions without a case input (sources).
    pub fn firing_delta(
        &self,
        t_id: &str,
        y: &Binding,
        now: Time,
        delay: Time,
        fresh: Option<&Token>,
    ) -> Result<Delta> {
        for place in self.inputs(t_id) {
            if y.get(place).is_none() {
                return Err(Error::TokenAbsent {
                    place: place.to_string(),
                    token: "<unbound>".into(),
                });
            }
        }
        self.delta_of(t_id, y, now, delay, fresh)
    }

    /// Like [`Net::firing_delta`] but input places missing from `y` are
    /// simply not consumed from.
    pub(crate) fn firing_delta_partial(&self, t_id: &str, y: &Binding, now: Time, delay: Time) -> Result<Delta> {
        self.delta_of(t_id, y, now, delay, None)
    }

    fn delta_of(&self, t_id: &str, y: &Binding, now: Time, delay: Time, fresh: Option<&Token>) -> Result<Delta> {
        let t = self.require_transition(t_id)?;
        let mut delta = Delta::default();
        for place in self.inputs(t_id) {
            if let Some(tok) = y.get(place) {
                delta.consumed.push((place.to_string(), tok.clone()));
            }
        }
        let at = now + delay.max(0.0);
        let primary = fresh.or_else(|| self.case_place(t).and_then(|p| y.get(p))).or_else(|| {
            y.tokens
                .iter()
                .find(|(p, tok)| self.place_kind(p) == Some(PlaceKind::Plain) && tok.case_id.is_some())
                .map(|(_, tok)| tok)
        });
        for out in self.outputs(t_id) {
            let Some(place) = self.place(out) else {
                return Err(Error::UnknownNode(out.to_string()));
            };
            let token = match place.kind {
                PlaceKind::Resource => {
                    let src = y.get(out).filter(|_| self.has_flow(out, t_id)).or_else(|| {
                        y.tokens
                            .iter()
                            .find(|(p, _)| self.place_kind(p) == Some(PlaceKind::Resource))
                            .map(|(_, tok)| tok)
                    });
                    Token {
                        case_id: src.and_then(|s| s.case_id.clone()),
                        attrs: BTreeMap::new(),
                        available_at: at,
                    }
                }
                PlaceKind::Case | PlaceKind::Plain => match primary {
                    Some(src) => Token {
                        case_id: src.case_id.clone(),
                        attrs: src
                            .attrs
                            .iter()
                            .filter(|(k, _)| place.attr_type(k).is_some())
                            .map(|(k, v)| (k.clone(), v.clone()))
                            .collect(),
                        available_at: at,
                    },
                    None => Token {
                        available_at: at,
                        ..Token::default()
                    },
                },
            };
            delta.produced.push((out.to_string(), token));
        }
        Ok(delta)
    }

    /// Fires `t_id` under `y`, returning the successor marking. Guards are not
    /// consulted; callers obtain `y` from [`Net::enabled_bindings`].
    pub fn fire(&self, m: &Marking, t_id: &str, y: &Binding, now: Time, delay: Time) -> Result<Marking> {
        let delta = self.firing_delta(t_id, y, now, delay, None)?;
        let mut next = m.clone();
        next.apply(&delta)?;
        Ok(next)
    }

    /// Copy of the net with every guard removed.
    pub fn strip_guards(&self) -> Net {
        let mut net = self.clone();
        for t in &mut net.transitions {
            t.guard = None;
        }
        net
    }

    /// Copy of the net with the guards of the given transitions replaced.
    pub fn with_guards(&self, guards: &BTreeMap<String, Constraint>) -> Result<Net> {
        for id in guards.keys() {
            self.require_transition(id)?;
        }
        let mut net = self.clone();
        for t in &mut net.transitions {
            if let Some(g) = guards.get(&t.id) {
                t.guard = Some(g.clone());
            }
        }
        Ok(net)
    }

    /// Checks all structural and typing invariants; empty iff the net is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut seen = BTreeSet::new();
        for id in self.places.iter().map(|p| &p.id).chain(self.transitions.iter().map(|t| &t.id)) {
            if !seen.insert(id.as_str()) {
                v.push(format!("duplicate node id `{id}`"));
            }
        }
        let mut flow_set = BTreeSet::new();
        for (src, dst) in &self.flows {
            if !flow_set.insert((src, dst)) {
                v.push(format!("duplicate flow {src} -> {dst}"));
            }
            let (sp, st) = (self.place_idx.contains_key(src), self.trans_idx.contains_key(src));
            let (dp, dt) = (self.place_idx.contains_key(dst), self.trans_idx.contains_key(dst));
            if !sp && !st {
                v.push(format!("flow source `{src}` does not exist"));
            }
            if !dp && !dt {
                v.push(format!("flow target `{dst}` does not exist"));
            }
            if sp && dp {
                v.push(format!("flow {src} -> {dst} connects two places"));
            }
            if st && dt {
                v.push(format!("flow {src} -> {dst} connects two transitions"));
            }
        }
        for p in &self.places {
            if p.kind == PlaceKind::Resource && !p.attributes.is_empty() {
                v.push(format!("resource place `{}` declares attributes", p.id));
            }
            let mut names = BTreeSet::new();
            for a in &p.attributes {
                if !names.insert(&a.name) {
                    v.push(format!("place `{}` declares attribute `{}` twice", p.id, a.name));
                }
            }
        }
        let mut labels = BTreeSet::new();
        for t in &self.transitions {
            if let Err(e) = t.delay.check() {
                v.push(format!("transition `{}`: {e}", t.id));
            }
            if t.task && !labels.insert(t.label()) {
                v.push(format!("activity label `{}` is used by two task transitions", t.label()));
            }
            let has_inputs = self.inputs(&t.id).next().is_some();
            if let Some(arrival) = &t.arrival {
                if has_inputs {
                    v.push(format!("source transition `{}` has a nonempty preset", t.id));
                }
                for d in std::iter::once(&arrival.interarrival).chain(arrival.first.as_ref()) {
                    if let Err(e) = d.check() {
                        v.push(format!("arrival of `{}`: {e}", t.id));
                    }
                }
                let case_out: Vec<&str> = self
                    .outputs(&t.id)
                    .filter(|p| self.place_kind(p) == Some(PlaceKind::Case))
                    .collect();
                if case_out.is_empty() {
                    v.push(format!("source transition `{}` has no case output place", t.id));
                }
                for (name, generator) in &arrival.attributes {
                    for p in &case_out {
                        let place = self.place(p).expect("checked");
                        match (place.attr_type(name), generator.value_type()) {
                            (Some(want), Some(got)) if want != got => v.push(format!(
                                "arrival of `{}` generates {got} values for {want} attribute `{name}`",
                                t.id
                            )),
                            (_, None) => v.push(format!("arrival of `{}`: generator for `{name}` mixes types", t.id)),
                            _ => {}
                        }
                    }
                }
            } else if t.task && self.case_place(t).is_none() {
                v.push(format!("task transition `{}` has no case input place", t.id));
            }
            if let Some(ci) = &t.case_input {
                if self.place_kind(ci) != Some(PlaceKind::Case) || !self.has_flow(ci, &t.id) {
                    v.push(format!("case_input `{ci}` of `{}` is not a case place in its preset", t.id));
                }
            }
            if let Some(g) = &t.guard {
                if let Err(e) = g.resolve(self) {
                    v.push(format!("guard of `{}`: {e}", t.id));
                }
            }
        }
        for (place, tokens) in self.initial_marking.iter() {
            let Some(p) = self.place(place) else {
                v.push(format!("initial marking references unknown place `{place}`"));
                continue;
            };
            for tok in tokens {
                v.extend(token_violations(p, tok));
            }
        }
        v
    }
}

fn token_violations(p: &Place, tok: &Token) -> Vec<String> {
    let mut v = Vec::new();
    match p.kind {
        PlaceKind::Resource => {
            if tok.case_id.is_none() {
                v.push(format!("resource token in `{}` has no identifier", p.id));
            }
            if !tok.attrs.is_empty() {
                v.push(format!("resource token in `{}` carries attributes", p.id));
            }
        }
        PlaceKind::Case if tok.case_id.is_none() => {
            v.push(format!("case token in `{}` has no case id", p.id));
        }
        _ => {}
    }
    for (k, val) in &tok.attrs {
        match p.attr_type(k) {
            None => v.push(format!("token attribute `{k}` is not declared by place `{}`", p.id)),
            Some(ty) if !ty.admits(val) => v.push(format!("token attribute `{k}` in `{}` is not a {ty}", p.id)),
            _ => {}
        }
    }
    if !tok.available_at.is_finite() {
        v.push(format!("token in `{}` has a non-finite timestamp", p.id));
    }
    v
}

#[derive(Debug, Serialize, Deserialize)]
struct TransitionFile {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default = "default_true")]
    task: bool,
    #[serde(default)]
    delay: DelaySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    guard: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrival: Option<ArrivalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    case_input: Option<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetFile {
    format: String,
    #[serde(default)]
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    places: Vec<Place>,
    transitions: Vec<TransitionFile>,
    flows: Vec<(String, String)>,
    #[serde(default)]
    initial_marking: Marking,
}

impl NetFile {
    fn into_net(self) -> Result<Net> {
        if self.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unsupported format `{}`, expected `{MODEL_FORMAT}`",
                self.format
            )));
        }
        let mut transitions = Vec::with_capacity(self.transitions.len());
        for tf in self.transitions {
            let guard = match tf.guard.as_deref().map(str::trim) {
                None | Some("") => None,
                Some(text) => Some(
                    text.parse::<Constraint>()
                        .map_err(|e| Error::ModelFormat(format!("guard of `{}`: {e}", tf.id)))?,
                ),
            };
            transitions.push(Transition {
                id: tf.id,
                label: tf.label,
                task: tf.task,
                delay: tf.delay,
                guard,
                arrival: tf.arrival,
                case_input: tf.case_input,
            });
        }
        Ok(Net::new(self.name, self.places, transitions, self.flows, self.initial_marking))
    }

    fn from_net(net: &Net) -> NetFile {
        NetFile {
            format: MODEL_FORMAT.into(),
            name: net.name.clone(),
            description: None,
            places: net.places.clone(),
            transitions: net
                .transitions
                .iter()
                .map(|t| TransitionFile {
                    id: t.id.clone(),
                    label: t.label.clone(),
                    task: t.task,
                    delay: t.delay.clone(),
                    guard: t.guard.as_ref().map(ToString::to_string),
                    arrival: t.arrival.clone(),
                    case_input: t.case_input.clone(),
                })
                .collect(),
            flows: net.flows.clone(),
            initial_marking: net.initial_marking.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Priority net with a small mid-run marking.
    fn priority_net() -> Net {
        let places = vec![
            Place::new("arrival", PlaceKind::Case).with_attr("value", AttrType::Number),
            Place::new("q1", PlaceKind::Case).with_attr("value", AttrType::Number),
            Place::new("r1", PlaceKind::Resource),
        ];
        let transitions = vec![
            Transition::new("pre-processing").with_delay(DelaySpec::Constant(5.0)),
            Transition::new("job handling")
                .with_label("handling")
                .with_delay(DelaySpec::Constant(7.0)),
        ];
        let flows = [
            ("arrival", "pre-processing"),
            ("pre-processing", "q1"),
            ("q1", "job handling"),
            ("r1", "job handling"),
            ("job handling", "r1"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        Net::new("priority", places, transitions, flows, Marking::new())
    }

    fn example_marking() -> Marking {
        let mut m = Marking::new();
        m.add("arrival", Token::new("3", 10.0).with_attr("value", Value::Number(855.0)));
        m.add("q1", Token::new("1", 5.0).with_attr("value", Value::Number(100.0)));
        m.add("q1", Token::new("2", 10.0).with_attr("value", Value::Number(118.0)));
        m.add("r1", Token::new("w1", 0.0));
        m
    }

    #[test]
    fn preset_of_job_handling() {
        let net = priority_net();
        let pre = net.preset("job handling").unwrap();
        assert_eq!(pre, BTreeSet::from(["q1".to_string(), "r1".to_string()]));
        assert!(net.preset("arrival").unwrap().is_empty());
        assert!(matches!(net.preset("nope"), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn bindings_pair_resource_with_each_enabled_job() {
        let net = priority_net();
        let m = example_marking();
        let bs = net.enabled_bindings(&m, "job handling", 10.0, true).unwrap();
        assert_eq!(bs.len(), 2);
        assert_eq!(bs[0].get("q1").unwrap().case_id.as_deref(), Some("1"));
        assert_eq!(bs[1].get("q1").unwrap().case_id.as_deref(), Some("2"));
        assert!(bs.iter().all(|b| b.get("r1").unwrap().case_id.as_deref() == Some("w1")));
        // job 2 is pending before time 10
        assert_eq!(net.enabled_bindings(&m, "job handling", 7.0, true).unwrap().len(), 1);
    }

    #[test]
    fn empty_marking_has_no_bindings() {
        let net = priority_net();
        assert!(net.enabled_bindings(&Marking::new(), "job handling", 0.0, true).unwrap().is_empty());
    }

    #[test]
    fn singleton_product() {
        let net = priority_net();
        let mut m = Marking::new();
        m.add("q1", Token::new("1", 0.0));
        m.add("r1", Token::new("w1", 0.0));
        assert_eq!(net.enabled_bindings(&m, "job handling", 0.0, false).unwrap().len(), 1);
    }

    #[test]
    fn guard_filters_bindings() {
        let mut net = priority_net();
        net.transitions[1].guard = Some("nrtokens(q1) > 5".parse().unwrap());
        let m = example_marking();
        assert!(net.enabled_bindings(&m, "job handling", 10.0, true).unwrap().is_empty());
        assert_eq!(net.enabled_bindings(&m, "job handling", 10.0, false).unwrap().len(), 2);
    }

    #[test]
    fn firing_returns_resource_after_delay() {
        let net = priority_net();
        let m = example_marking();
        let y = net.oldest_binding(&m, "job handling", 10.0).unwrap();
        let next = net.fire(&m, "job handling", &y, 10.0, 7.0).unwrap();
        assert_eq!(next.tokens("q1").len(), 1);
        assert_eq!(next.tokens("q1")[0].case_id.as_deref(), Some("2"));
        let w = &next.tokens("r1")[0];
        assert_eq!(w.case_id.as_deref(), Some("w1"));
        assert_eq!(w.available_at, 17.0);
        // input untouched
        assert_eq!(m.tokens("q1").len(), 2);
    }

    #[test]
    fn zero_delay_token_available_now() {
        let net = priority_net();
        let mut m = Marking::new();
        m.add("arrival", Token::new("1", 0.0).with_attr("value", Value::Number(3.0)));
        let y = net.oldest_binding(&m, "pre-processing", 4.0).unwrap();
        let next = net.fire(&m, "pre-processing", &y, 4.0, 0.0).unwrap();
        let tok = &next.tokens("q1")[0];
        assert_eq!(tok.available_at, 4.0);
        assert_eq!(tok.attrs["value"], Value::Number(3.0));
    }

    #[test]
    fn firing_absent_token_fails() {
        let net = priority_net();
        let m = example_marking();
        let mut y = net.oldest_binding(&m, "job handling", 10.0).unwrap();
        y.tokens.insert("q1".into(), Token::new("99", 0.0));
        assert!(matches!(net.fire(&m, "job handling", &y, 10.0, 7.0), Err(Error::TokenAbsent { .. })));
    }

    #[test]
    fn firing_preserves_count_for_balanced_transition() {
        let net = priority_net();
        let m = example_marking();
        let y = net.oldest_binding(&m, "pre-processing", 10.0).unwrap();
        let next = net.fire(&m, "pre-processing", &y, 10.0, 5.0).unwrap();
        assert_eq!(next.total_tokens(), m.total_tokens());
    }

    #[test]
    fn validate_flags_place_to_place_flow() {
        let mut net = priority_net();
        net.flows.push(("q1".into(), "arrival".into()));
        let net = Net::new(net.name.clone(), net.places.clone(), net.transitions.clone(), net.flows.clone(), Marking::new());
        let v = net.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("connects two places"));
    }

    #[test]
    fn validate_flags_source_with_preset() {
        let mut net = priority_net();
        net.transitions[0].arrival = Some(ArrivalSpec {
            interarrival: DelaySpec::Constant(1.0),
            first: None,
            attributes: BTreeMap::new(),
            max_count: None,
        });
        let v = net.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("nonempty preset"));
    }

    #[test]
    fn valid_net_has_no_violations() {
        assert!(priority_net().validate().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let mut net = priority_net();
        net.transitions[1].guard = Some("nrtokens(q1) < 5".parse().unwrap());
        let text = net.to_json();
        let back = Net::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert_eq!(back.transition("job handling").unwrap().guard, net.transitions[1].guard);
    }

    #[test]
    fn rejects_unknown_format() {
        let text = r#"{"format":"other/2","places":[],"transitions":[],"flows":[]}"#;
        assert!(matches!(Net::from_json(text), Err(Error::ModelFormat(_))));
    }
}
