//! Discrete-event execution of a guarded timed net.
//!
//! At every instant the scheduler first fires unguarded transitions eagerly
//! (oldest tokens first), then lets each guarded transition decide once on
//! the resulting marking: if its guard holds it fires every binding it can.
//! The clock then jumps to the next moment at which something can change: a
//! token becoming available, a source announcing a case, or a
//! `timeuntilnext` threshold being crossed.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constraint::{Constraint, Feature};
use crate::error::{Error, Result};
use crate::event_log::{Event, Log};
use crate::net::{Binding, Marking, Net, PlaceKind, Token, Transition};
use crate::value::Time;

/// Nudge past a threshold crossing so that strict comparisons flip.
const CROSSING_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Oldest available tokens first.
    #[default]
    Fifo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Number of cases created over all sources; 0 means unbounded.
    pub max_cases: usize,
    /// Last instant at which transitions may start.
    pub horizon: Option<Time>,
    pub policy: Policy,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            max_cases: 500,
            horizon: None,
            policy: Policy::Fifo,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        match self.horizon {
            Some(h) if !(h.is_finite() && h > 0.0) => Err(Error::Config(format!("horizon must be positive, got {h}"))),
            None if self.max_cases == 0 => Err(Error::Config("max_cases must be at least 1 when no horizon is set".into())),
            _ => Ok(()),
        }
    }
}

/// Random stream of one transition, derived from the run seed and its id.
pub fn stream(seed: u64, transition_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(transition_id.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Guards of the net, in transition order.
pub fn ground_truth(net: &Net) -> Vec<(String, Constraint)> {
    net.transitions()
        .iter()
        .filter_map(|t| t.guard.as_ref().filter(|g| !g.atoms.is_empty()).map(|g| (t.id.clone(), g.clone())))
        .collect()
}

struct Source {
    index: usize,
    next_fire: Option<Time>,
    created: usize,
}

struct Run<'a> {
    net: &'a Net,
    cfg: &'a SimConfig,
    m: Marking,
    now: Time,
    rngs: Vec<ChaCha8Rng>,
    sources: Vec<Source>,
    cases: usize,
    events: Vec<Event>,
}

pub fn simulate(net: &Net, cfg: &SimConfig) -> Result<Log> {
    cfg.validate()?;
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidNet(violations));
    }
    let mut run = Run {
        net,
        cfg,
        m: net.initial_marking().clone(),
        now: 0.0,
        rngs: net.transitions().iter().map(|t| stream(cfg.seed, &t.id)).collect(),
        sources: net
            .transitions()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_source())
            .map(|(index, _)| Source {
                index,
                next_fire: Some(0.0),
                created: 0,
            })
            .collect(),
        cases: 0,
        events: Vec::new(),
    };
    loop {
        run.settle()?;
        match run.next_time() {
            Some(t) if cfg.horizon.is_none_or(|h| t <= h) => run.now = t,
            _ => break,
        }
    }
    if run.events.is_empty() {
        return Err(Error::Deadlock(run.m.summary()));
    }
    log::debug!("simulated {} events over {} cases until t={}", run.events.len(), run.cases, run.now);
    Ok(Log::from_events(run.events))
}

impl Run<'_> {
    fn may_create(&self, src: &Source) -> bool {
        let t = &self.net.transitions()[src.index];
        let cap = t.arrival.as_ref().and_then(|a| a.max_count);
        (self.cfg.max_cases == 0 || self.cases < self.cfg.max_cases) && cap.is_none_or(|c| src.created < c)
    }

    /// Fires everything that fires at the current instant.
    fn settle(&mut self) -> Result<()> {
        let mut decided: BTreeSet<usize> = BTreeSet::new();
        loop {
            let mut changed = self.fire_sources()?;
            changed |= self.fire_unguarded()?;
            if changed {
                continue;
            }
            if !self.fire_one_guarded(&mut decided)? {
                return Ok(());
            }
        }
    }

    fn fire_sources(&mut self) -> Result<bool> {
        let mut fired = false;
        for s in 0..self.sources.len() {
            while self.sources[s].next_fire.is_some_and(|at| at <= self.now) {
                if !self.may_create(&self.sources[s]) {
                    self.sources[s].next_fire = None;
                    break;
                }
                let idx = self.sources[s].index;
                let t = &self.net.transitions()[idx];
                let arrival = t.arrival.as_ref().expect("source has arrival");
                let rng = &mut self.rngs[idx];
                let lead = match (&arrival.first, self.sources[s].created) {
                    (Some(first), 0) => first.sample(rng),
                    _ => arrival.interarrival.sample(rng),
                };
                self.cases += 1;
                let mut tok = Token::new(self.cases.to_string(), self.now + lead);
                for (name, generator) in &arrival.attributes {
                    tok.attrs.insert(name.clone(), generator.sample(rng));
                }
                let delta = self.net.firing_delta(&t.id, &Binding::default(), self.now, lead, Some(&tok))?;
                self.m.apply(&delta)?;
                if t.task {
                    let mut e = Event::new(self.cases.to_string(), t.label(), self.now, self.now + lead);
                    e.attrs = tok.attrs.clone();
                    self.events.push(e);
                }
                let src = &mut self.sources[s];
                src.created += 1;
                src.next_fire = Some(self.now + lead);
                fired = true;
            }
        }
        Ok(fired)
    }

    fn fire_unguarded(&mut self) -> Result<bool> {
        let mut fired = false;
        for idx in 0..self.net.transitions().len() {
            let t = &self.net.transitions()[idx];
            if t.is_source() || t.guard.is_some() {
                continue;
            }
            while let Some(y) = self.net.oldest_binding(&self.m, &t.id, self.now) {
                self.fire(idx, &y)?;
                fired = true;
            }
        }
        Ok(fired)
    }

    /// Lets the first undecided guarded transition that is enabled (ignoring
    /// its guard) decide; returns whether any transition decided.
    fn fire_one_guarded(&mut self, decided: &mut BTreeSet<usize>) -> Result<bool> {
        for idx in 0..self.net.transitions().len() {
            let t = &self.net.transitions()[idx];
            let Some(guard) = &t.guard else { continue };
            if t.is_source() || decided.contains(&idx) {
                continue;
            }
            if self.net.oldest_binding(&self.m, &t.id, self.now).is_none() || !guard.eval(&self.m, self.now) {
                continue;
            }
            decided.insert(idx);
            while let Some(y) = self.net.oldest_binding(&self.m, &t.id, self.now) {
                self.fire(idx, &y)?;
            }
            return Ok(true);
        }
        Ok(false)
    }

    fn fire(&mut self, idx: usize, y: &Binding) -> Result<()> {
        let t: &Transition = &self.net.transitions()[idx];
        let delay = t.delay.sample(&mut self.rngs[idx]);
        let delta = self.net.firing_delta(&t.id, y, self.now, delay, None)?;
        self.m.apply(&delta)?;
        if t.task {
            let case_tok = self
                .net
                .case_place(t)
                .and_then(|p| y.get(p))
                .or_else(|| y.tokens.values().find(|tok| tok.case_id.is_some()));
            let mut e = Event::new(
                case_tok.and_then(|c| c.case_id.clone()).unwrap_or_default(),
                t.label(),
                self.now,
                self.now + delay,
            );
            if let Some(c) = case_tok {
                e.attrs = c.attrs.clone();
            }
            e.resource = y
                .tokens
                .iter()
                .find(|(p, _)| self.net.place_kind(p) == Some(PlaceKind::Resource))
                .and_then(|(_, tok)| tok.case_id.clone());
            self.events.push(e);
        }
        Ok(())
    }

    fn next_time(&self) -> Option<Time> {
        let now = self.now;
        let mut best = self.m.next_availability(now);
        let mut consider = |t: Time| {
            if t > now && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        };
        for s in &self.sources {
            if let Some(at) = s.next_fire.filter(|_| self.may_create(s)) {
                consider(at);
            }
        }
        for t in self.net.transitions() {
            for atom in t.guard.iter().flat_map(|g| &g.atoms) {
                if let Feature::TimeUntilNext(p) = &atom.feature {
                    let c = atom.value.as_f64();
                    for tok in self.m.tokens(p).iter().filter(|tok| tok.available_at > now) {
                        let cross = tok.available_at - c;
                        consider(if cross > now { cross + CROSSING_EPS } else { cross });
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{ArrivalSpec, DelaySpec, Place};
    use std::collections::BTreeMap;

    fn single_source(ia: f64) -> Net {
        Net::new(
            "src",
            vec![Place::new("arrival", PlaceKind::Case)],
            vec![Transition::new("arrive").with_arrival(ArrivalSpec {
                interarrival: DelaySpec::Constant(ia),
                first: Some(DelaySpec::Constant(0.0)),
                attributes: BTreeMap::new(),
                max_count: None,
            })],
            vec![("arrive".into(), "arrival".into())],
            Marking::new(),
        )
    }

    #[test]
    fn constant_rate_source() {
        let log = simulate(&single_source(1.0), &SimConfig { max_cases: 3, ..SimConfig::default() }).unwrap();
        let arrivals: Vec<f64> = log.events().iter().map(|e| e.complete).collect();
        assert_eq!(arrivals, [0.0, 1.0, 2.0]);
    }

    #[test]
    fn zero_cases_without_horizon_is_rejected() {
        let cfg = SimConfig { max_cases: 0, ..SimConfig::default() };
        assert!(matches!(simulate(&single_source(1.0), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn horizon_bounds_unlimited_run() {
        let cfg = SimConfig { max_cases: 0, horizon: Some(4.5), ..SimConfig::default() };
        let log = simulate(&single_source(1.0), &cfg).unwrap();
        assert_eq!(log.len(), 6);
    }

    #[test]
    fn streams_depend_on_seed_and_id() {
        use rand::Rng;
        let a: u64 = stream(1, "a").random();
        assert_eq!(a, stream(1, "a").random::<u64>());
        assert_ne!(a, stream(2, "a").random::<u64>());
        assert_ne!(a, stream(1, "b").random::<u64>());
    }
}
