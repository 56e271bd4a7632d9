//! Log replay over a net by log moves.
//!
//! Every event fires its transition at its start time with the binding most
//! similar to the event; produced tokens become available at the event's
//! completion. One [`StateSample`] is recorded per distinct start time.
//!
//! A sample stores the marking after all moves of its instant together with
//! each transition's own moves, so that the state seen by a transition can
//! be recovered as "everything that happened at this instant except my own
//! firings" (see [`StateSample::marking_for`]).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::event_log::{Event, Log};
use crate::net::{Binding, Delta, Marking, Net, PlaceKind, Token, Transition};
use crate::value::Time;

#[derive(Debug, Clone)]
pub struct StateSample {
    pub time: Time,
    /// Marking after every log move starting at `time`.
    pub marking: Marking,
    /// Transitions started at `time` according to the log.
    pub fired: BTreeSet<String>,
    /// Moves of each transition at `time`, in execution order.
    pub moves: BTreeMap<String, Vec<Delta>>,
    /// Set when an event at this instant had to be repaired.
    pub flagged: bool,
}

impl StateSample {
    /// Marking observed by `t_id`: the sample marking with `t_id`'s own moves
    /// at this instant undone.
    pub fn marking_for(&self, t_id: &str) -> Marking {
        let mut m = self.marking.clone();
        if let Some(deltas) = self.moves.get(t_id) {
            for d in deltas.iter().rev() {
                m.revert(d).expect("moves were applied to this marking");
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Unmatched {
    pub case_id: String,
    pub activity: String,
    pub start: Time,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchReport {
    pub matched: usize,
    pub unmatched: Vec<Unmatched>,
    /// Moves whose bound resource differs from the event's resource.
    pub resource_mismatches: usize,
    /// Mean gap between a case token's availability and the event start.
    pub mean_wait: f64,
}

impl MatchReport {
    pub fn total(&self) -> usize {
        self.matched + self.unmatched.len()
    }

    pub fn matched_fraction(&self) -> f64 {
        if self.total() == 0 {
            1.0
        } else {
            self.matched as f64 / self.total() as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub samples: Vec<StateSample>,
    pub report: MatchReport,
}

/// Similarity of a binding to an event; larger is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub case_match: bool,
    pub resource_match: bool,
    pub not_after_event: bool,
    pub time_gap: f64,
    pub attr_distance: f64,
}

impl Score {
    pub fn compare(&self, other: &Score) -> Ordering {
        self.case_match
            .cmp(&other.case_match)
            .then(self.resource_match.cmp(&other.resource_match))
            .then(self.not_after_event.cmp(&other.not_after_event))
            .then(other.time_gap.total_cmp(&self.time_gap))
            .then(other.attr_distance.total_cmp(&self.attr_distance))
    }
}

/// Scores `y` against `e`: case identity first, then resource, then how
/// close the case token's availability is to the event start (not later
/// preferred), then the distance between numeric attributes.
pub fn sim_score(net: &Net, y: &Binding, e: &Event) -> Score {
    let case_tok = y
        .tokens
        .iter()
        .find(|(p, t)| net.place_kind(p) == Some(PlaceKind::Case) && t.case_id.as_deref() == Some(&e.case_id))
        .map(|(_, t)| t);
    let resource_match = match &e.resource {
        Some(r) => y
            .tokens
            .iter()
            .any(|(p, t)| net.place_kind(p) == Some(PlaceKind::Resource) && t.case_id.as_deref() == Some(r)),
        None => false,
    };
    let Some(tok) = case_tok else {
        return Score {
            case_match: false,
            resource_match,
            not_after_event: false,
            time_gap: f64::INFINITY,
            attr_distance: f64::INFINITY,
        };
    };
    let attr_distance = e
        .attrs
        .iter()
        .filter_map(|(k, v)| Some((v.as_number()? - tok.attrs.get(k)?.as_number()?).abs()))
        .sum();
    Score {
        case_match: true,
        resource_match,
        not_after_event: tok.available_at <= e.start,
        time_gap: (tok.available_at - e.start).abs(),
        attr_distance,
    }
}

/// Replays with guard checks off.
pub fn replay(log: &Log, net: &Net) -> Result<Replay> {
    run(log, net, false)
}

/// Replays and additionally requires every move's guard to hold on the
/// marking observed by its transition.
pub fn replay_checked(log: &Log, net: &Net) -> Result<Replay> {
    run(log, net, true)
}

/// Feeds cases into the output place of a source transition that has no
/// events of its own: the next case appears when the previous one leaves.
struct Injector {
    place: String,
    queue: VecDeque<Token>,
}

fn injectors(log: &Log, net: &Net) -> Vec<Injector> {
    let logged: BTreeSet<&str> = log.events().iter().map(|e| e.label.as_str()).collect();
    let mut first: BTreeMap<&str, &Event> = BTreeMap::new();
    for e in log.events() {
        let slot = first.entry(&e.case_id).or_insert(e);
        if e.start < slot.start {
            *slot = e;
        }
    }
    let mut out = Vec::new();
    for src in net.transitions().iter().filter(|t| t.is_source()) {
        if src.task && logged.contains(src.label()) {
            continue;
        }
        let Some(place) = net.outputs(&src.id).find(|p| net.place_kind(p) == Some(PlaceKind::Case)) else {
            continue;
        };
        let schema = net.place(place).expect("validated");
        let mut cases: Vec<&Event> = first
            .values()
            .copied()
            .filter(|e| net.transition_by_label(&e.label).is_some_and(|t| net.has_flow(place, &t.id)))
            .collect();
        cases.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.case_id.cmp(&b.case_id)));
        let queue = cases
            .into_iter()
            .map(|e| Token {
                case_id: Some(e.case_id.clone()),
                attrs: e
                    .attrs
                    .iter()
                    .filter(|(k, _)| schema.attr_type(k).is_some())
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
                available_at: e.start,
            })
            .collect();
        out.push(Injector {
            place: place.to_string(),
            queue,
        });
    }
    out
}

/// Candidate bindings for `e`: the case place restricted to the event's case.
/// Places other than case and resource places do not influence the score, so
/// only their first (oldest) enabled token is considered.
fn candidate_bindings(net: &Net, m: &Marking, t: &Transition, e: &Event) -> Vec<Binding> {
    let mut case_places: Vec<&str> = Vec::new();
    if let Some(ci) = &t.case_input {
        case_places.push(ci);
    }
    case_places.extend(
        net.inputs(&t.id)
            .filter(|p| net.place_kind(p) == Some(PlaceKind::Case) && Some(*p) != t.case_input.as_deref()),
    );
    for cp in case_places {
        let bindings = net.bindings_where(m, &t.id, e.start, |place, tok| {
            if place == cp {
                return tok.case_id.as_deref() == Some(&e.case_id);
            }
            match net.place_kind(place) {
                Some(PlaceKind::Resource) => true,
                _ => m.enabled(place, e.start).next().is_some_and(|first| first == tok),
            }
        });
        if !bindings.is_empty() {
            return bindings;
        }
    }
    Vec::new()
}

fn best_binding(net: &Net, m: &Marking, t: &Transition, e: &Event) -> Option<(Binding, Score)> {
    let mut best: Option<(Binding, Score)> = None;
    for y in candidate_bindings(net, m, t, e) {
        let s = sim_score(net, &y, e);
        if !s.case_match {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| s.compare(b) == Ordering::Greater) {
            best = Some((y, s));
        }
    }
    best
}

fn run(log: &Log, net: &Net, check_guards: bool) -> Result<Replay> {
    let mut resolved: Vec<&Transition> = Vec::with_capacity(log.len());
    for e in log.events() {
        let t = net
            .transition_by_label(&e.label)
            .ok_or_else(|| Error::UnknownActivity(e.label.clone()))?;
        resolved.push(t);
    }
    let mut order: Vec<usize> = (0..log.len()).collect();
    order.sort_by(|&a, &b| log.events()[a].start.total_cmp(&log.events()[b].start).then(a.cmp(&b)));

    let mut injectors = injectors(log, net);
    let mut m = net.initial_marking().clone();
    for inj in &mut injectors {
        if let Some(tok) = inj.queue.pop_front() {
            m.add(inj.place.clone(), tok);
        }
    }

    let mut report = MatchReport::default();
    let mut samples = Vec::new();
    let mut wait_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let now = log.events()[order[i]].start;
        let mut j = i;
        while j < order.len() && log.events()[order[j]].start == now {
            j += 1;
        }
        let mut sample = StateSample {
            time: now,
            marking: Marking::new(),
            fired: BTreeSet::new(),
            moves: BTreeMap::new(),
            flagged: false,
        };
        let mut matched_here: Vec<usize> = Vec::new();
        for &k in &order[i..j] {
            let e = &log.events()[k];
            let t = resolved[k];
            let duration = e.complete - e.start;
            let mut bound = true;
            let mut delta = if t.is_source() {
                let fresh = source_token(net, t, e);
                net.firing_delta(&t.id, &Binding::default(), now, duration, Some(&fresh))?
            } else {
                match best_binding(net, &m, t, e) {
                    Some((y, s)) => {
                        if e.resource.is_some() && !s.resource_match {
                            report.resource_mismatches += 1;
                        }
                        wait_sum += s.time_gap;
                        net.firing_delta(&t.id, &y, now, duration, None)?
                    }
                    None => {
                        report.unmatched.push(Unmatched {
                            case_id: e.case_id.clone(),
                            activity: e.label.clone(),
                            start: e.start,
                            reason: "no binding".into(),
                        });
                        sample.flagged = true;
                        bound = false;
                        repair(net, &m, t, e)?
                    }
                }
            };
            for inj in &mut injectors {
                if delta.consumed.iter().any(|(p, _)| *p == inj.place) {
                    if let Some(tok) = inj.queue.pop_front() {
                        delta.produced.push((inj.place.clone(), tok));
                    }
                }
            }
            m.apply(&delta)?;
            sample.fired.insert(t.id.clone());
            sample.moves.entry(t.id.clone()).or_default().push(delta);
            if bound {
                matched_here.push(k);
            }
        }
        sample.marking = m.clone();
        for k in matched_here {
            let e = &log.events()[k];
            let t = resolved[k];
            if check_guards {
                if let Some(g) = &t.guard {
                    if !g.eval(&sample.marking_for(&t.id), now) {
                        report.unmatched.push(Unmatched {
                            case_id: e.case_id.clone(),
                            activity: e.label.clone(),
                            start: e.start,
                            reason: format!("guard `{g}` is false"),
                        });
                        continue;
                    }
                }
            }
            report.matched += 1;
        }
        samples.push(sample);
        i = j;
    }
    let bound = report.matched + report.unmatched.iter().filter(|u| u.reason != "no binding").count();
    report.mean_wait = if bound == 0 { 0.0 } else { wait_sum / bound as f64 };
    Ok(Replay { samples, report })
}

fn source_token(net: &Net, t: &Transition, e: &Event) -> Token {
    let declared = |k: &str| {
        net.outputs(&t.id)
            .filter_map(|p| net.place(p))
            .any(|p| p.attr_type(k).is_some())
    };
    Token {
        case_id: Some(e.case_id.clone()),
        attrs: e
            .attrs
            .iter()
            .filter(|(k, _)| declared(k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
        available_at: e.start,
    }
}

/// Move for an event without a binding: a case token is conjured for the
/// case place and whatever else is enabled is consumed, so that the rest of
/// the case can still be replayed.
fn repair(net: &Net, m: &Marking, t: &Transition, e: &Event) -> Result<Delta> {
    let case_place = net.case_place(t).map(str::to_string);
    let mut y = Binding::default();
    let mut conjured = None;
    for place in net.inputs(&t.id) {
        if Some(place) == case_place.as_deref() {
            let schema = net.place(place).expect("validated");
            let tok = Token {
                case_id: Some(e.case_id.clone()),
                attrs: e
                    .attrs
                    .iter()
                    .filter(|(k, _)| schema.attr_type(k).is_some())
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
                available_at: e.start,
            };
            conjured = Some((place.to_string(), tok.clone()));
            y.tokens.insert(place.to_string(), tok);
        } else if let Some(tok) = m.enabled(place, e.start).next() {
            y.tokens.insert(place.to_string(), tok.clone());
        } else if net.place_kind(place) == Some(PlaceKind::Resource) {
            let id = e.resource.clone().unwrap_or_else(|| "?".into());
            y.tokens.insert(place.to_string(), Token::new(id, e.start));
        }
    }
    let mut delta = net.firing_delta_partial(&t.id, &y, e.start, e.complete - e.start)?;
    // conjured tokens were never in the marking
    delta.consumed.retain(|(p, tok)| m.contains(p, tok) && conjured.as_ref() != Some(&(p.clone(), tok.clone())));
    Ok(delta)
}
