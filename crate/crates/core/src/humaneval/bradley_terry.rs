//! Bradley-Terry strengths by minorization-maximization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::judgments::PairwiseJudgments;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BtOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Add 0.5 pseudo-wins in both directions for every compared pair.
    pub laplace: bool,
}

impl Default for BtOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-9,
            laplace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtResult {
    pub strengths: BTreeMap<String, f64>,
    /// Descending strength, ties alphabetical.
    pub ranking: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood of the start point followed by one value per iteration.
    pub log_likelihood: Vec<f64>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Connected components of the undirected comparison graph.
fn components(n: usize, adjacent: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![start];
        comp[start] = id;
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(i);
            for j in 0..n {
                if comp[j] == usize::MAX && adjacent(i, j) {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

fn reachable(n: usize, from: usize, edge: &impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

pub fn log_likelihood(wins: &[Vec<f64>], s: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (i, row) in wins.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w > 0.0 {
                ll += w * (s[i].ln() - (s[i] + s[j]).ln());
            }
        }
    }
    ll
}

pub fn bt_fit(judgments: &PairwiseJudgments, options: BtOptions) -> Result<BtResult> {
    let n = judgments.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least two items, got {n}")));
    }
    if judgments.wins.len() != n || judgments.wins.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("win matrix must be square over the items".into()));
    }
    if (0..n).any(|i| judgments.wins[i][i] != 0) {
        return Err(Error::InvalidArgument("win matrix diagonal must be zero".into()));
    }
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::InvalidArgument("tol must be positive and max_iter nonzero".into()));
    }
    let raw = &judgments.wins;
    let names = |idx: &[usize]| idx.iter().map(|&i| judgments.items[i].clone()).collect::<Vec<_>>();

    let comps = components(n, |i, j| raw[i][j] + raw[j][i] > 0);
    if comps.len() > 1 {
        return Err(Error::Disconnected(comps.iter().map(|c| names(c)).collect()));
    }

    // Dividing by the gcd leaves the maximizer unchanged and makes integer
    // rescalings of the counts produce bit-identical fits.
    let g = raw.iter().flatten().fold(0, |acc, &w| gcd(acc, w)).max(1);
    let mut wins: Vec<Vec<f64>> = raw.iter().map(|r| r.iter().map(|&w| (w / g) as f64).collect()).collect();
    if options.laplace {
        for i in 0..n {
            for j in 0..n {
                if i != j && raw[i][j] + raw[j][i] > 0 {
                    wins[i][j] += 0.5;
                }
            }
        }
    }

    // The MLE exists iff every item can reach every other through "beat" edges.
    let beat = |i: usize, j: usize| wins[i][j] > 0.0;
    let from0 = reachable(n, 0, &beat);
    let to0 = reachable(n, 0, &|i, j| beat(j, i));
    if from0.iter().chain(&to0).any(|r| !r) {
        let stuck: Vec<usize> = (0..n).filter(|&i| !(from0[i] && to0[i])).collect();
        return Err(Error::DegenerateMle(format!(
            "items {:?} cannot be placed relative to {:?}; some group wins or loses all its comparisons",
            names(&stuck),
            judgments.items[0]
        )));
    }

    let total_wins: Vec<f64> = wins.iter().map(|r| r.iter().sum()).collect();
    let games: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| wins[i][j] + wins[j][i]).collect()).collect();

    let mut s = vec![1.0 / n as f64; n];
    let mut history = vec![log_likelihood(&wins, &s)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n).filter(|&j| j != i && games[i][j] > 0.0).map(|j| games[i][j] / (s[i] + s[j])).sum();
                total_wins[i] / denom
            })
            .collect();
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= sum);
        let delta = next.iter().zip(&s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        s = next;
        let ll = log_likelihood(&wins, &s);
        let prev = *history.last().expect("history starts non-empty");
        debug_assert!(ll >= prev - 1e-9 * prev.abs().max(1.0), "log-likelihood decreased: {prev} -> {ll}");
        history.push(ll);
        if delta < options.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("Bradley-Terry fit stopped after {iterations} iterations without reaching tol {}", options.tol);
    }

    let strengths: BTreeMap<String, f64> = judgments.items.iter().cloned().zip(s.iter().copied()).collect();
    Ok(BtResult {
        ranking: rank_by_strength(&strengths),
        strengths,
        iterations,
        converged,
        log_likelihood: history,
    })
}

/// Orders items by descending strength; strengths within 1e-12 of each other
/// count as tied and fall back to alphabetical order.
pub fn rank_by_strength(strengths: &BTreeMap<String, f64>) -> Vec<String> {
    let mut items: Vec<(&String, i64)> = strengths.iter().map(|(k, v)| (k, (v * 1e12).round() as i64)).collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    items.into_iter().map(|(k, _)| k.clone()).collect()
}
