//! Binary classification trees grown greedily on Gini impurity.
//!
//! Numeric splits send `x > threshold` to the right child; boolean features
//! (encoded 0/1) split at 0.5, i.e. `x == true` goes right.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_impurity_decrease: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 5,
            min_samples_leaf: 5,
            min_impurity_decrease: 0.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if !self.min_impurity_decrease.is_finite() || self.min_impurity_decrease < 0.0 {
            return Err(Error::Config("min_impurity_decrease must be non-negative".into()));
        }
        Ok(())
    }
}

/// Gini impurity of a two-class node.
pub fn gini(n_false: usize, n_true: usize) -> Result<f64> {
    let n = n_false + n_true;
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    // 1 - pf^2 - pt^2 == 2 pf pt for two classes
    Ok(2.0 * (n_false as f64) * (n_true as f64) / ((n as f64) * (n as f64)))
}

/// Training table: numeric feature matrix plus boolean labels.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub names: Vec<String>,
    pub boolean: Vec<bool>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub gini: f64,
    pub samples: usize,
    /// (n_false, n_true)
    pub class_counts: (usize, usize),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left: Option<Box<Node>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right: Option<Box<Node>>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// Majority class; ties go to `true`.
    pub fn prediction(&self) -> bool {
        self.class_counts.1 >= self.class_counts.0
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, out: &mut Vec<&'a Node>) {
        out.push(self);
        if let Some(l) = &self.left {
            l.walk(out);
        }
        if let Some(r) = &self.right {
            r.walk(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tree {
    pub features: Vec<String>,
    pub boolean: Vec<bool>,
    pub root: Node,
}

/// Sum over the children of n_false * n_true / n, proportional to the
/// size-weighted child impurity, kept as an exact fraction.
#[derive(Debug, Clone, Copy)]
struct Cost {
    num: u128,
    den: u128,
}

impl Cost {
    fn of(a: (usize, usize), b: (usize, usize)) -> Cost {
        let term = |(f, t): (usize, usize)| ((f * t) as u128, (f + t) as u128);
        let (n1, d1) = term(a);
        let (n2, d2) = term(b);
        Cost {
            num: n1 * d2 + n2 * d1,
            den: d1 * d2,
        }
    }

    fn lt(self, other: Cost) -> bool {
        self.num * other.den < other.num * self.den
    }

    fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Tree {
    pub fn fit(data: &Dataset, params: &TreeParams) -> Result<Tree> {
        params.validate()?;
        if data.rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let width = data.names.len();
        for row in &data.rows {
            if row.len() != width {
                return Err(Error::SchemaMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
        }
        if data.labels.len() != data.rows.len() || data.boolean.len() != width {
            return Err(Error::Config("dataset columns and labels disagree in length".into()));
        }
        let idx: Vec<usize> = (0..data.rows.len()).collect();
        let mut next_id = 0;
        let root = grow(data, params, idx, 0, &mut next_id)?;
        Ok(Tree {
            features: data.names.clone(),
            boolean: data.boolean.clone(),
            root,
        })
    }

    pub fn predict(&self, row: &[f64]) -> Result<bool> {
        if row.len() != self.features.len() {
            return Err(Error::SchemaMismatch {
                expected: self.features.len(),
                got: row.len(),
            });
        }
        let mut node = &self.root;
        while let Some(s) = node.split {
            let next = if row[s.feature] > s.threshold { &node.right } else { &node.left };
            node = next.as_deref().expect("internal node has children");
        }
        Ok(node.prediction())
    }

    pub fn nodes(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.root.walk(&mut out);
        out
    }

    pub fn node(&self, id: usize) -> Option<&Node> {
        self.nodes().into_iter().find(|n| n.id == id)
    }

    /// Nodes from the root down to `id`, with the branch taken at each
    /// internal node (`true` = right).
    pub fn path_to(&self, id: usize) -> Option<Vec<(&Node, bool)>> {
        fn go<'a>(n: &'a Node, id: usize, acc: &mut Vec<(&'a Node, bool)>) -> bool {
            if n.id == id {
                return true;
            }
            for (child, dir) in [(&n.left, false), (&n.right, true)] {
                if let Some(c) = child {
                    acc.push((n, dir));
                    if go(c, id, acc) {
                        return true;
                    }
                    acc.pop();
                }
            }
            false
        }
        let mut acc = Vec::new();
        go(&self.root, id, &mut acc).then_some(acc)
    }

    pub fn describe_split(&self, s: &Split, right: bool) -> String {
        let name = &self.features[s.feature];
        if self.boolean[s.feature] {
            format!("{name} == {}", right)
        } else if right {
            format!("{name} > {}", s.threshold)
        } else {
            format!("{name} <= {}", s.threshold)
        }
    }

    /// Indented text rendering.
    pub fn dump(&self) -> String {
        fn go(t: &Tree, n: &Node, depth: usize, out: &mut String) {
            let pad = "  ".repeat(depth);
            let (f, tr) = n.class_counts;
            match n.split {
                None => out.push_str(&format!(
                    "{pad}leaf #{}: class={} samples={} counts=[{f}, {tr}] gini={:.4}\n",
                    n.id,
                    if n.prediction() { "True" } else { "False" },
                    n.samples,
                    n.gini
                )),
                Some(s) => {
                    out.push_str(&format!(
                        "{pad}#{} samples={} counts=[{f}, {tr}] gini={:.4}\n",
                        n.id, n.samples, n.gini
                    ));
                    for (child, right) in [(&n.left, false), (&n.right, true)] {
                        out.push_str(&format!("{pad}  if {}:\n", t.describe_split(&s, right)));
                        go(t, child.as_deref().expect("children"), depth + 2, out);
                    }
                }
            }
        }
        let mut out = String::new();
        go(self, &self.root, 0, &mut out);
        out
    }
}

fn counts(data: &Dataset, idx: &[usize]) -> (usize, usize) {
    let t = idx.iter().filter(|&&i| data.labels[i]).count();
    (idx.len() - t, t)
}

fn grow(data: &Dataset, params: &TreeParams, idx: Vec<usize>, depth: usize, next_id: &mut usize) -> Result<Node> {
    let id = *next_id;
    *next_id += 1;
    let cc = counts(data, &idx);
    let g = gini(cc.0, cc.1)?;
    let mut node = Node {
        id,
        split: None,
        gini: g,
        samples: idx.len(),
        class_counts: cc,
        left: None,
        right: None,
    };
    if depth >= params.max_depth || cc.0 == 0 || cc.1 == 0 || idx.len() < 2 * params.min_samples_leaf {
        return Ok(node);
    }
    let Some((split, cost)) = best_split(data, params, &idx, cc) else {
        return Ok(node);
    };
    let n = idx.len() as f64;
    let decrease = g - 2.0 * cost.value() / n;
    if decrease < params.min_impurity_decrease {
        return Ok(node);
    }
    let (right, left): (Vec<usize>, Vec<usize>) =
        idx.into_iter().partition(|&i| data.rows[i][split.feature] > split.threshold);
    node.split = Some(split);
    node.left = Some(Box::new(grow(data, params, left, depth + 1, next_id)?));
    node.right = Some(Box::new(grow(data, params, right, depth + 1, next_id)?));
    Ok(node)
}

/// Split with the lowest weighted child impurity that strictly improves on
/// the parent; ties keep the lowest feature index, then the lowest threshold.
fn best_split(data: &Dataset, params: &TreeParams, idx: &[usize], parent: (usize, usize)) -> Option<(Split, Cost)> {
    let parent_cost = Cost {
        num: (parent.0 * parent.1) as u128,
        den: (parent.0 + parent.1) as u128,
    };
    let mut best: Option<(Split, Cost)> = None;
    let mut order: Vec<usize> = idx.to_vec();
    for f in 0..data.names.len() {
        order.sort_by(|&a, &b| data.rows[a][f].total_cmp(&data.rows[b][f]));
        let (mut lf, mut lt) = (0usize, 0usize);
        for k in 0..order.len() - 1 {
            if data.labels[order[k]] {
                lt += 1;
            } else {
                lf += 1;
            }
            let (x, next) = (data.rows[order[k]][f], data.rows[order[k + 1]][f]);
            if x == next {
                continue;
            }
            let n_left = k + 1;
            if n_left < params.min_samples_leaf || order.len() - n_left < params.min_samples_leaf {
                continue;
            }
            let cost = Cost::of((lf, lt), (parent.0 - lf, parent.1 - lt));
            if !cost.lt(parent_cost) {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b)| cost.lt(*b)) {
                let threshold = if data.boolean[f] { 0.5 } else { x + (next - x) / 2.0 };
                best = Some((Split { feature: f, threshold }, cost));
            }
        }
    }
    best
}
