//! Discovery reports: a JSON document for machines, a short text summary for
//! the terminal, and a markdown table of modeled versus discovered guards.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value as Json;

use crate::config::RunConfig;
use crate::constraint::{RATIO_EPSILON, TIME_SENTINEL};
use crate::error::Result;
use crate::event_log::Log;
use crate::extract::{annotate_net, CandidateResult, Discovery, SplitAtom};
use crate::net::Net;
use crate::patterns::{Candidate, PatternKind};
use crate::replay::{replay_checked, MatchReport, Unmatched};
use crate::sim::ground_truth;
use crate::tree::Tree;

#[derive(Debug, Clone, Serialize)]
pub struct LogSummary {
    pub events: usize,
    pub cases: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeEntry {
    pub candidate: String,
    pub tree: Tree,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintEntry {
    pub transition: String,
    pub kind: PatternKind,
    pub constraint: String,
    pub support: usize,
    pub candidate: Candidate,
    pub provenance: Vec<SplitAtom>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Replayability {
    pub matched: usize,
    pub unmatched: usize,
    pub matched_fraction: f64,
    /// First few failures, for diagnosis.
    pub examples: Vec<Unmatched>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeledGuard {
    pub transition: String,
    pub constraint: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub time_until_next_sentinel: f64,
    pub ratio_denominator_floor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub model: String,
    pub config: RunConfig,
    pub log: LogSummary,
    pub conventions: Conventions,
    pub replay: MatchReport,
    pub candidates: Vec<CandidateResult>,
    pub trees: Vec<TreeEntry>,
    pub constraints: Vec<ConstraintEntry>,
    pub replayability: Replayability,
    pub modeled: Vec<ModeledGuard>,
}

const EXAMPLES: usize = 10;

impl Report {
    /// Assembles the report and checks replayability of the training log over
    /// the net annotated with the discovered constraints.
    pub fn build(net: &Net, log: &Log, d: &Discovery, config: &RunConfig) -> Result<Report> {
        let annotated = annotate_net(&net.strip_guards(), &d.constraints)?;
        let checked = replay_checked(log, &annotated)?.report;
        Ok(Report {
            model: net.name.clone(),
            config: config.clone(),
            log: LogSummary {
                events: log.len(),
                cases: log.traces().len(),
            },
            conventions: Conventions {
                time_until_next_sentinel: TIME_SENTINEL,
                ratio_denominator_floor: RATIO_EPSILON,
            },
            replay: MatchReport {
                unmatched: d.replay.unmatched.iter().take(EXAMPLES).cloned().collect(),
                ..d.replay.clone()
            },
            candidates: d.candidates.clone(),
            trees: d
                .candidates
                .iter()
                .filter_map(|c| {
                    c.tree.as_ref().map(|t| TreeEntry {
                        candidate: c.candidate.key(),
                        tree: t.clone(),
                    })
                })
                .collect(),
            constraints: d
                .constraints
                .iter()
                .map(|pc| ConstraintEntry {
                    transition: pc.candidate.t_g.clone(),
                    kind: pc.candidate.kind,
                    constraint: pc.expr.to_string(),
                    support: pc.support,
                    candidate: pc.candidate.clone(),
                    provenance: pc.provenance.clone(),
                })
                .collect(),
            replayability: Replayability {
                matched: checked.matched,
                unmatched: checked.unmatched.len(),
                matched_fraction: checked.matched_fraction(),
                examples: checked.unmatched.iter().take(EXAMPLES).cloned().collect(),
            },
            modeled: ground_truth(net)
                .into_iter()
                .map(|(transition, g)| ModeledGuard {
                    transition,
                    constraint: g.to_string(),
                })
                .collect(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "model {}: {} events, {} cases, {} candidates\n",
            self.model,
            self.log.events,
            self.log.cases,
            self.candidates.len()
        );
        if self.constraints.is_empty() {
            out.push_str("no constraints discovered\n");
        }
        for c in &self.constraints {
            out.push_str(&format!("{} @ {}: {} (support {})\n", c.kind, c.transition, c.constraint, c.support));
        }
        out.push_str(&format!(
            "replayability: {}/{} log moves matched\n",
            self.replayability.matched,
            self.replayability.matched + self.replayability.unmatched
        ));
        out
    }
}

fn str_of<'a>(v: &'a Json, key: &str) -> &'a str {
    v.get(key).and_then(Json::as_str).unwrap_or("")
}

/// Markdown table of modeled against discovered constraints, one row per
/// transition, rendered from a JSON report.
pub fn render_markdown(report: &Json) -> String {
    let mut rows: BTreeMap<String, (Vec<String>, Vec<String>)> = BTreeMap::new();
    for m in report.get("modeled").and_then(Json::as_array).into_iter().flatten() {
        rows.entry(str_of(m, "transition").to_string())
            .or_default()
            .0
            .push(format!("`{}`", str_of(m, "constraint")));
    }
    for c in report.get("constraints").and_then(Json::as_array).into_iter().flatten() {
        rows.entry(str_of(c, "transition").to_string()).or_default().1.push(format!(
            "{}: `{}`",
            str_of(c, "kind"),
            str_of(c, "constraint")
        ));
    }
    let mut out = format!("## {}\n\n", str_of(report, "model"));
    out.push_str("| Transition | Modeled | Discovered |\n|---|---|---|\n");
    for (t, (modeled, found)) in &rows {
        let cell = |v: &Vec<String>| if v.is_empty() { "none".to_string() } else { v.join("<br>") };
        out.push_str(&format!("| {t} | {} | {} |\n", cell(modeled), cell(found)));
    }
    if let Some(r) = report.get("replayability") {
        let matched = r.get("matched").and_then(Json::as_u64).unwrap_or(0);
        let unmatched = r.get("unmatched").and_then(Json::as_u64).unwrap_or(0);
        out.push_str(&format!(
            "\nReplay with discovered guards: {matched} of {} log moves matched.\n",
            matched + unmatched
        ));
    }
    out
}
