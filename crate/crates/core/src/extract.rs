//! Reading pattern constraints off trained trees, and the end-to-end
//! discovery pipeline.
//!
//! A `False` leaf that is large and pure describes states in which the
//! transition could fire but did not. The splits on its path that match the
//! pattern's violation template and reduce impurity are negated into a
//! permission constraint.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint::{Atom, Constraint, Feature, Op, Scalar};
use crate::error::{Error, Result};
use crate::event_log::Log;
use crate::net::Net;
use crate::patterns::{build_pt_log, detect_constructs, Candidate, PatternKind, PtLog};
use crate::replay::{replay, MatchReport};
use crate::tree::{Dataset, Node, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionParams {
    pub tau_s: usize,
    pub tau_g: f64,
    /// Largest fraction of firing rows on which a violation condition may
    /// hold; conditions seen more often while the transition fired are
    /// dropped.
    pub max_conflict: f64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            tau_s: 10,
            tau_g: 0.1,
            max_conflict: 0.01,
        }
    }
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<()> {
        if self.tau_s < 1 {
            return Err(Error::Config("tau_s must be at least 1".into()));
        }
        if !(0.0..=0.5).contains(&self.tau_g) {
            return Err(Error::Config(format!("tau_g must lie in [0, 0.5], got {}", self.tau_g)));
        }
        if !(0.0..=1.0).contains(&self.max_conflict) {
            return Err(Error::Config(format!("max_conflict must lie in [0, 1], got {}", self.max_conflict)));
        }
        Ok(())
    }
}

/// One split condition on a root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitAtom {
    pub feature: Feature,
    pub op: Op,
    pub value: Scalar,
    /// Gini of the child on the path minus Gini of the splitting node.
    pub delta_gini: f64,
    pub node: usize,
    pub right: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternConstraint {
    pub candidate: Candidate,
    pub expr: Constraint,
    /// Negative rows of the training table that the constraint forbids.
    pub support: usize,
    pub provenance: Vec<SplitAtom>,
}

pub fn select_false_leaves<'a>(tree: &'a Tree, p: &ExtractionParams) -> Vec<&'a Node> {
    tree.nodes()
        .into_iter()
        .filter(|n| n.is_leaf() && !n.prediction() && n.samples >= p.tau_s && n.gini <= p.tau_g)
        .collect()
}

/// All split conditions from the root to `leaf_id`.
pub fn path_atoms(tree: &Tree, features: &[Feature], leaf_id: usize) -> Vec<SplitAtom> {
    let Some(path) = tree.path_to(leaf_id) else {
        return Vec::new();
    };
    path.into_iter()
        .map(|(node, right)| {
            let s = node.split.expect("path nodes are internal");
            let child = if right { &node.right } else { &node.left };
            let child = child.as_deref().expect("children");
            let (op, value) = if tree.boolean[s.feature] {
                (Op::Eq, Scalar::Bool(right))
            } else if right {
                (Op::Gt, Scalar::Num(s.threshold))
            } else {
                (Op::Le, Scalar::Num(s.threshold))
            };
            SplitAtom {
                feature: features[s.feature].clone(),
                op,
                value,
                delta_gini: child.gini - node.gini,
                node: node.id,
                right,
            }
        })
        .collect()
}

/// Whether a path condition has the shape of a violation of `kind`.
pub fn matches_template(kind: PatternKind, atom: &SplitAtom) -> bool {
    match (kind, &atom.feature) {
        (PatternKind::Priority, Feature::Ratio(..)) => atom.op == Op::Gt,
        (PatternKind::Priority, Feature::AttrEnabled(_)) => atom.value == Scalar::Bool(false),
        (PatternKind::Blocking, Feature::NrTokens(_)) => atom.op == Op::Gt,
        (PatternKind::HoldBatch, Feature::NrTokensEnabled(_) | Feature::TimeUntilNext(_)) => atom.op == Op::Le,
        (PatternKind::Choice, Feature::TimeUntilNext(_)) => atom.op == Op::Le,
        _ => false,
    }
}

/// Template-matching, impurity-reducing conditions on the paths to `leaves`,
/// keeping per feature the condition with the largest impurity reduction.
pub fn trace_and_filter(tree: &Tree, features: &[Feature], leaves: &[&Node], kind: PatternKind) -> Vec<SplitAtom> {
    let mut seen: BTreeMap<(usize, bool), SplitAtom> = BTreeMap::new();
    for leaf in leaves {
        for a in path_atoms(tree, features, leaf.id) {
            if matches_template(kind, &a) && a.delta_gini < 0.0 {
                seen.entry((a.node, a.right)).or_insert(a);
            }
        }
    }
    let mut best: BTreeMap<Feature, SplitAtom> = BTreeMap::new();
    for a in seen.into_values() {
        match best.get(&a.feature) {
            Some(b) if b.delta_gini.abs() >= a.delta_gini.abs() => {}
            _ => {
                best.insert(a.feature.clone(), a);
            }
        }
    }
    let mut out: Vec<SplitAtom> = best.into_values().collect();
    out.sort_by_key(|a| (a.node, a.right));
    out
}

impl SplitAtom {
    pub fn as_condition(&self) -> Atom {
        Atom::new(self.feature.clone(), self.op, self.value)
    }
}

/// Number of positive rows of `ptlog` on which the condition of `a` holds.
pub fn conflicts(a: &SplitAtom, ptlog: &PtLog) -> usize {
    let Some(col) = ptlog.features.iter().position(|f| *f == a.feature) else {
        return 0;
    };
    let cond = a.as_condition();
    ptlog.rows.iter().filter(|r| r.label && cond.holds_for(r.values[col])).count()
}

/// Keeps the conditions that hold on at most `max_conflict` of the positive
/// rows.
pub fn drop_conflicting(atoms: Vec<SplitAtom>, ptlog: &PtLog, max_conflict: f64) -> Vec<SplitAtom> {
    let (_, n_true) = ptlog.label_counts();
    let allowed = (max_conflict * n_true as f64).floor() as usize;
    atoms
        .into_iter()
        .filter(|a| {
            let n = conflicts(a, ptlog);
            if n > allowed {
                log::debug!("{}: dropping `{}`, holds on {n} firing rows", ptlog.candidate.key(), a.as_condition());
            }
            n <= allowed
        })
        .collect()
}

fn strongest(atoms: &[SplitAtom], pick: impl Fn(&Feature) -> bool) -> Option<&SplitAtom> {
    atoms
        .iter()
        .filter(|a| pick(&a.feature))
        .fold(None, |acc: Option<&SplitAtom>, a| match acc {
            Some(b) if b.delta_gini.abs() >= a.delta_gini.abs() => Some(b),
            _ => Some(a),
        })
}

/// Turns violation conditions into the pattern's permission constraint, or
/// `None` when a required part is missing.
pub fn assemble_constraint(atoms: &[SplitAtom], c: &Candidate) -> Option<PatternConstraint> {
    let permit = |a: &SplitAtom, op: Op| Atom::new(a.feature.clone(), op, a.value);
    let (expr, used): (Vec<Atom>, Vec<&SplitAtom>) = match c.kind {
        PatternKind::Priority => {
            let ratio = strongest(atoms, |f| matches!(f, Feature::Ratio(..)))?;
            let enabled = strongest(atoms, |f| matches!(f, Feature::AttrEnabled(_)))?;
            (
                vec![
                    permit(ratio, Op::Le),
                    Atom::new(enabled.feature.clone(), Op::Eq, Scalar::Bool(true)),
                ],
                vec![ratio, enabled],
            )
        }
        PatternKind::Blocking => {
            let a = strongest(atoms, |f| matches!(f, Feature::NrTokens(_)))?;
            (vec![permit(a, Op::Le)], vec![a])
        }
        PatternKind::HoldBatch => {
            let n = strongest(atoms, |f| matches!(f, Feature::NrTokensEnabled(_)))?;
            let t = strongest(atoms, |f| matches!(f, Feature::TimeUntilNext(_)))?;
            (vec![permit(n, Op::Gt), permit(t, Op::Gt)], vec![n, t])
        }
        PatternKind::Choice => {
            let t = strongest(atoms, |f| matches!(f, Feature::TimeUntilNext(_)))?;
            (vec![permit(t, Op::Gt)], vec![t])
        }
    };
    Some(PatternConstraint {
        candidate: c.clone(),
        expr: Constraint::new(expr),
        support: 0,
        provenance: used.into_iter().cloned().collect(),
    })
}

/// Negative rows of `ptlog` on which `expr` is false.
pub fn support(expr: &Constraint, ptlog: &PtLog) -> usize {
    let cols: Vec<Option<usize>> = expr
        .atoms
        .iter()
        .map(|a| ptlog.features.iter().position(|f| *f == a.feature))
        .collect();
    ptlog
        .rows
        .iter()
        .filter(|r| !r.label)
        .filter(|r| {
            !expr.atoms.iter().zip(&cols).all(|(a, col)| match col {
                Some(i) => a.holds_for(r.values[*i]),
                None => true,
            })
        })
        .count()
}

fn dataset(ptlog: &PtLog) -> Dataset {
    Dataset {
        names: ptlog.features.iter().map(ToString::to_string).collect(),
        boolean: ptlog.features.iter().map(Feature::is_boolean).collect(),
        rows: ptlog.rows.iter().map(|r| r.values.iter().map(|v| v.as_f64()).collect()).collect(),
        labels: ptlog.rows.iter().map(|r| r.label).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Skipped { reason: String },
    NoPattern { atoms: Vec<SplitAtom> },
    Mined { constraint: String, support: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateResult {
    pub candidate: Candidate,
    pub rows: usize,
    pub n_false: usize,
    pub n_true: usize,
    pub outcome: Outcome,
    #[serde(skip)]
    pub tree: Option<Tree>,
    #[serde(skip)]
    pub ptlog: PtLog,
}

#[derive(Debug, Clone)]
pub struct Discovery {
    pub replay: MatchReport,
    pub candidates: Vec<CandidateResult>,
    pub constraints: Vec<PatternConstraint>,
}

fn mine(net: &Net, c: &Candidate, samples: &[crate::replay::StateSample], tp: &TreeParams, ep: &ExtractionParams) -> Result<(CandidateResult, Option<PatternConstraint>)> {
    let ptlog = build_pt_log(net, c, samples)?;
    let (n_false, n_true) = ptlog.label_counts();
    let mut res = CandidateResult {
        candidate: c.clone(),
        rows: ptlog.rows.len(),
        n_false,
        n_true,
        outcome: Outcome::Skipped { reason: String::new() },
        tree: None,
        ptlog,
    };
    if res.rows < ep.tau_s {
        res.outcome = Outcome::Skipped {
            reason: format!("{} rows, fewer than tau_s = {}", res.rows, ep.tau_s),
        };
        return Ok((res, None));
    }
    if n_false == 0 || n_true == 0 {
        res.outcome = Outcome::Skipped {
            reason: format!("single-class table ({n_false} false, {n_true} true)"),
        };
        return Ok((res, None));
    }
    let tree = Tree::fit(&dataset(&res.ptlog), tp)?;
    let leaves = select_false_leaves(&tree, ep);
    let atoms = trace_and_filter(&tree, &res.ptlog.features, &leaves, c.kind);
    let atoms = drop_conflicting(atoms, &res.ptlog, ep.max_conflict);
    let found = assemble_constraint(&atoms, c).map(|mut pc| {
        pc.support = support(&pc.expr, &res.ptlog);
        pc
    });
    res.outcome = match &found {
        Some(pc) => Outcome::Mined {
            constraint: pc.expr.to_string(),
            support: pc.support,
        },
        None => Outcome::NoPattern { atoms },
    };
    res.tree = Some(tree);
    Ok((res, found))
}

/// Replays `log` over `net` (guards ignored), mines every pattern candidate
/// and returns the discovered constraints sorted by transition and kind.
pub fn discover(log: &Log, net: &Net, tp: &TreeParams, ep: &ExtractionParams) -> Result<Discovery> {
    tp.validate()?;
    ep.validate()?;
    let base = net.strip_guards();
    let r = replay(log, &base)?;
    let candidates = detect_constructs(&base);
    let results: Vec<Result<(CandidateResult, Option<PatternConstraint>)>> = candidates
        .par_iter()
        .map(|c| {
            if !r.samples.iter().any(|s| s.fired.contains(&c.t_g)) {
                return Ok((
                    CandidateResult {
                        candidate: c.clone(),
                        rows: 0,
                        n_false: 0,
                        n_true: 0,
                        outcome: Outcome::Skipped {
                            reason: "transition never fires in the log".into(),
                        },
                        tree: None,
                        ptlog: PtLog {
                            candidate: c.clone(),
                            features: c.features(),
                            rows: Vec::new(),
                        },
                    },
                    None,
                ));
            }
            mine(&base, c, &r.samples, tp, ep)
        })
        .collect();
    let mut outcomes = Vec::with_capacity(results.len());
    let mut best: BTreeMap<(String, PatternKind), PatternConstraint> = BTreeMap::new();
    for res in results {
        let (cr, found) = res?;
        if let Outcome::Skipped { reason } = &cr.outcome {
            log::info!("skipping {}: {reason}", cr.candidate.key());
        }
        if let Some(pc) = found {
            let key = (pc.candidate.t_g.clone(), pc.candidate.kind);
            match best.get(&key) {
                Some(prev) if prev.support >= pc.support => {}
                _ => {
                    best.insert(key, pc);
                }
            }
        }
        outcomes.push(cr);
    }
    Ok(Discovery {
        replay: r.report,
        candidates: outcomes,
        constraints: best.into_values().collect(),
    })
}

/// Copy of `net` whose guards are the conjunction of the constraints
/// discovered for each transition.
pub fn annotate_net(net: &Net, constraints: &[PatternConstraint]) -> Result<Net> {
    let mut guards: BTreeMap<String, Constraint> = BTreeMap::new();
    for pc in constraints {
        let slot = guards.entry(pc.candidate.t_g.clone()).or_default();
        *slot = std::mem::take(slot).and(&pc.expr);
    }
    let annotated = net.with_guards(&guards)?;
    let violations = annotated.validate();
    if violations.is_empty() {
        Ok(annotated)
    } else {
        Err(Error::InvalidNet(violations))
    }
}
