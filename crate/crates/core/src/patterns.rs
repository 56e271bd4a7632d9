//! The four decision synchronization patterns: where they can occur in a net,
//! which features describe them, and the labeled tables they are learned from.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constraint::{Agg, AttrRef, Feature, Scalar};
use crate::error::{Error, Result};
use crate::net::{Net, PlaceKind};
use crate::replay::StateSample;
use crate::value::{AttrType, Time};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternKind {
    Priority,
    Blocking,
    HoldBatch,
    Choice,
}

impl PatternKind {
    pub const ALL: [PatternKind; 4] = [PatternKind::Priority, PatternKind::Blocking, PatternKind::HoldBatch, PatternKind::Choice];
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternKind::Priority => "Priority",
            PatternKind::Blocking => "Blocking",
            PatternKind::HoldBatch => "HoldBatch",
            PatternKind::Choice => "Choice",
        })
    }
}

/// One occurrence of a pattern construct: the guarded transition and the
/// places filling the pattern's roles.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Candidate {
    pub t_g: String,
    pub kind: PatternKind,
    pub roles: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attr: Option<String>,
}

impl Candidate {
    fn new(kind: PatternKind, t_g: &str, roles: &[(&str, &str)], attr: Option<&str>) -> Self {
        Candidate {
            t_g: t_g.to_string(),
            kind,
            roles: roles.iter().map(|(r, p)| (r.to_string(), p.to_string())).collect(),
            attr: attr.map(str::to_string),
        }
    }

    pub fn role(&self, name: &str) -> &str {
        self.roles.get(name).map(String::as_str).unwrap_or_default()
    }

    /// Short human-readable identifier, also used for file names.
    pub fn key(&self) -> String {
        let roles: Vec<&str> = self.roles.values().map(String::as_str).collect();
        let mut key = format!("{}[{}]@{}", self.kind, roles.join(","), self.t_g);
        if let Some(a) = &self.attr {
            key.push('.');
            key.push_str(a);
        }
        key
    }

    /// Feature schema of the candidate's pattern-transition log.
    pub fn features(&self) -> Vec<Feature> {
        match self.kind {
            PatternKind::Priority => {
                let attr = self.attr.as_deref().unwrap_or_default();
                let (q, up) = (self.role("queue"), self.role("upstream"));
                let r = |p: &str, agg| AttrRef::new(p, attr, agg);
                let mut fs = vec![
                    Feature::AttrVal(r(up, Agg::Max)),
                    Feature::AttrVal(r(up, Agg::Min)),
                    Feature::AttrVal(r(q, Agg::Max)),
                    Feature::AttrVal(r(q, Agg::Min)),
                ];
                for kx in [Agg::Max, Agg::Min] {
                    for ky in [Agg::Max, Agg::Min] {
                        fs.push(Feature::Ratio(r(up, kx), r(q, ky)));
                    }
                }
                fs.push(Feature::AttrEnabled(r(q, Agg::Max)));
                fs.push(Feature::AttrEnabled(r(q, Agg::Min)));
                fs
            }
            PatternKind::Blocking => vec![Feature::NrTokens(self.role("downstream").into())],
            PatternKind::HoldBatch => {
                let p = self.role("input");
                vec![Feature::NrTokensEnabled(p.into()), Feature::TimeUntilNext(p.into())]
            }
            PatternKind::Choice => vec![Feature::TimeUntilNext(self.role("other_input").into())],
        }
    }
}

/// Enumerates every pattern construct of the net, sorted.
pub fn detect_constructs(net: &Net) -> Vec<Candidate> {
    let kind_of = |p: &str| net.place_kind(p);
    let is_case = |p: &str| kind_of(p) == Some(PlaceKind::Case);
    let mut out = Vec::new();
    for tg in net.transitions().iter().filter(|t| !t.is_source()) {
        let tg_id = tg.id.as_str();
        let inputs: Vec<&str> = net.inputs(tg_id).collect();
        for &pi in inputs.iter().filter(|p| is_case(p)) {
            out.push(Candidate::new(PatternKind::HoldBatch, tg_id, &[("input", pi)], None));
            // upstream transitions t' feeding p_i
            for tp in net.inputs(pi).filter(|t| *t != tg_id) {
                for pj in net.inputs(tp).filter(|p| *p != pi && is_case(p)) {
                    let (Some(a), Some(b)) = (net.place(pi), net.place(pj)) else { continue };
                    for attr in a.attributes.iter().filter(|x| x.ty == AttrType::Number) {
                        if b.attr_type(&attr.name) == Some(AttrType::Number) {
                            out.push(Candidate::new(
                                PatternKind::Priority,
                                tg_id,
                                &[("queue", pi), ("upstream", pj)],
                                Some(&attr.name),
                            ));
                        }
                    }
                }
            }
        }
        for pi in net.outputs(tg_id).filter(|p| is_case(p)) {
            out.push(Candidate::new(PatternKind::Blocking, tg_id, &[("downstream", pi)], None));
        }
        for &pj in inputs.iter().filter(|p| kind_of(p).is_some_and(|k| k != PlaceKind::Resource)) {
            for tp in net.outputs(pj).filter(|t| *t != tg_id) {
                for pi in net.inputs(tp) {
                    if pi == pj || kind_of(pi) == Some(PlaceKind::Resource) || net.has_flow(pi, tg_id) {
                        continue;
                    }
                    out.push(Candidate::new(PatternKind::Choice, tg_id, &[("shared", pj), ("other_input", pi)], None));
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PtRow {
    pub time: Time,
    pub values: Vec<Scalar>,
    pub label: bool,
}

/// Training table of one candidate: one row per sampled state in which the
/// guarded transition was enabled, labeled with whether it fired.
#[derive(Debug, Clone)]
pub struct PtLog {
    pub candidate: Candidate,
    pub features: Vec<Feature>,
    pub rows: Vec<PtRow>,
}

impl PtLog {
    pub fn label_counts(&self) -> (usize, usize) {
        let n_true = self.rows.iter().filter(|r| r.label).count();
        (self.rows.len() - n_true, n_true)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header = vec!["time".to_string()];
        header.extend(self.features.iter().map(ToString::to_string));
        header.push("label".into());
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.time.to_string()];
            rec.extend(r.values.iter().map(ToString::to_string));
            rec.push(r.label.to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

pub fn build_pt_log(net: &Net, c: &Candidate, samples: &[StateSample]) -> Result<PtLog> {
    if net.transition(&c.t_g).is_none() {
        return Err(Error::UnknownTransition(c.t_g.clone()));
    }
    let features = c.features();
    for f in &features {
        f.resolve(net)?;
    }
    let mut rows = Vec::new();
    for s in samples.iter().filter(|s| !s.flagged) {
        let m = s.marking_for(&c.t_g);
        if net.oldest_binding(&m, &c.t_g, s.time).is_none() {
            continue;
        }
        rows.push(PtRow {
            time: s.time,
            values: features.iter().map(|f| f.eval(&m, s.time)).collect(),
            label: s.fired.contains(&c.t_g),
        });
    }
    Ok(PtLog {
        candidate: c.clone(),
        features,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Marking, Place, Transition};

    #[test]
    fn no_places_no_candidates() {
        let net = Net::new("t", vec![], vec![Transition::new("a")], vec![], Marking::new());
        assert!(detect_constructs(&net).is_empty());
    }

    #[test]
    fn feature_counts_per_kind() {
        let c = |kind, roles: &[(&str, &str)], attr| Candidate::new(kind, "t", roles, attr);
        assert_eq!(c(PatternKind::Blocking, &[("downstream", "q")], None).features().len(), 1);
        assert_eq!(c(PatternKind::HoldBatch, &[("input", "q")], None).features().len(), 2);
        assert_eq!(c(PatternKind::Choice, &[("shared", "a"), ("other_input", "b")], None).features().len(), 1);
        let p = c(PatternKind::Priority, &[("queue", "q1"), ("upstream", "arrival")], Some("value"));
        let fs = p.features();
        assert_eq!(fs.len(), 10);
        assert!(fs.contains(&"ratio(attrval(arrival,value,max), attrval(q1,value,max))".parse().unwrap()));
        assert!(fs.contains(&"attrenabled(q1,value,max)".parse().unwrap()));
    }

    #[test]
    fn adding_disconnected_nodes_keeps_candidates() {
        let net = Net::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/priority.json")).unwrap();
        let before = detect_constructs(&net);
        let mut places = net.places().to_vec();
        places.push(Place::new("island", PlaceKind::Case));
        let mut transitions = net.transitions().to_vec();
        transitions.push(Transition::new("idle").control());
        let bigger = Net::new("x", places, transitions, net.flows().to_vec(), net.initial_marking().clone());
        let after = detect_constructs(&bigger);
        assert!(before.iter().all(|c| after.contains(c)));
    }
}
