//! Oracles shared by the test targets.
#![allow(dead_code)]

use num_rational::Ratio;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use dsync::tree::{Dataset, Tree, TreeParams};

pub type Q = Ratio<u128>;

pub fn gini_closed_form(nf: u64, nt: u64) -> Q {
    let n = (nf + nt) as u128;
    let pf = Q::new(nf as u128, n);
    let pt = Q::new(nt as u128, n);
    Q::from_integer(1) - pf * pf - pt * pt
}

pub fn to_f64(q: Q) -> f64 {
    // both parts stay below 2^53 here, so this division rounds once
    *q.numer() as f64 / *q.denom() as f64
}

fn counts(d: &Dataset, idx: &[usize]) -> (u64, u64) {
    let t = idx.iter().filter(|&&i| d.labels[i]).count() as u64;
    (idx.len() as u64 - t, t)
}

fn weighted(d: &Dataset, l: &[usize], r: &[usize]) -> Q {
    let n = (l.len() + r.len()) as u128;
    let part = |idx: &[usize]| {
        let (f, t) = counts(d, idx);
        Q::new(idx.len() as u128, n) * gini_closed_form(f, t)
    };
    part(l) + part(r)
}

/// Every (feature, threshold) with both sides nonempty, thresholds taken at
/// midpoints of distinct consecutive values, in feature then threshold order.
fn all_splits(d: &Dataset, idx: &[usize]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for f in 0..d.names.len() {
        let mut vals: Vec<f64> = idx.iter().map(|&i| d.rows[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            out.push((f, w[0] + (w[1] - w[0]) / 2.0));
        }
    }
    out
}

fn partition(d: &Dataset, idx: &[usize], (f, thr): (usize, f64)) -> (Vec<usize>, Vec<usize>) {
    idx.iter().partition(|&&i| d.rows[i][f] <= thr)
}

fn majority(d: &Dataset, idx: &[usize]) -> bool {
    let (f, t) = counts(d, idx);
    t >= f
}

fn correct(d: &Dataset, idx: &[usize], pred: bool) -> usize {
    idx.iter().filter(|&&i| d.labels[i] == pred).count()
}

/// Greedy CART by brute force: at each node try every split, keep the first
/// one with the smallest weighted impurity if it beats the node's own.
pub fn greedy_correct(d: &Dataset, idx: &[usize], depth: usize) -> usize {
    let (f, t) = counts(d, idx);
    if depth == 0 || f == 0 || t == 0 || idx.len() < 2 {
        return correct(d, idx, majority(d, idx));
    }
    let own = gini_closed_form(f, t);
    let mut best: Option<(Q, (usize, f64))> = None;
    for s in all_splits(d, idx) {
        let (l, r) = partition(d, idx, s);
        let w = weighted(d, &l, &r);
        if w < own && best.as_ref().is_none_or(|(b, _)| w < *b) {
            best = Some((w, s));
        }
    }
    match best {
        None => correct(d, idx, majority(d, idx)),
        Some((_, s)) => {
            let (l, r) = partition(d, idx, s);
            greedy_correct(d, &l, depth - 1) + greedy_correct(d, &r, depth - 1)
        }
    }
}

/// Best achievable training accuracy over all trees of depth <= `depth`.
pub fn optimal_correct(d: &Dataset, idx: &[usize], depth: usize) -> usize {
    let leaf = correct(d, idx, true).max(correct(d, idx, false));
    if depth == 0 {
        return leaf;
    }
    all_splits(d, idx)
        .into_iter()
        .map(|s| {
            let (l, r) = partition(d, idx, s);
            optimal_correct(d, &l, depth - 1) + optimal_correct(d, &r, depth - 1)
        })
        .fold(leaf, usize::max)
}

pub fn random_dataset(rng: &mut ChaCha8Rng) -> Dataset {
    let n = rng.random_range(1..=12);
    let k = rng.random_range(1..=3);
    let boolean: Vec<bool> = (0..k).map(|_| rng.random_bool(0.3)).collect();
    let rows = (0..n)
        .map(|_| {
            boolean
                .iter()
                .map(|&b| if b { rng.random_range(0..2) as f64 } else { rng.random_range(0..5) as f64 * 0.5 })
                .collect()
        })
        .collect();
    Dataset {
        names: (0..k).map(|i| format!("x{i}")).collect(),
        boolean,
        rows,
        labels: (0..n).map(|_| rng.random_bool(0.5)).collect(),
    }
}

pub fn depth2_params() -> TreeParams {
    TreeParams {
        max_depth: 2,
        min_samples_leaf: 1,
        min_impurity_decrease: 0.0,
    }
}

/// Training accuracy of `fit` and of the greedy and optimal oracles.
pub fn depth2_accuracies(d: &Dataset) -> (usize, usize, usize) {
    let tree = Tree::fit(d, &depth2_params()).unwrap();
    let got = (0..d.rows.len())
        .filter(|&i| tree.predict(&d.rows[i]).unwrap() == d.labels[i])
        .count();
    let idx: Vec<usize> = (0..d.rows.len()).collect();
    (got, greedy_correct(d, &idx, 2), optimal_correct(d, &idx, 2))
}
