//! Extrapolated rank-biased overlap and calibration of its persistence
//! parameter against random permutations.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("RBO persistence p must lie in (0, 1), got {p}")))
    }
}

fn check_unique<T: AsRef<str>>(list: &[T]) -> Result<()> {
    let mut seen = HashSet::new();
    for item in list {
        if !seen.insert(item.as_ref()) {
            return Err(Error::InvalidArgument(format!("duplicate item {:?} in ranked list", item.as_ref())));
        }
    }
    Ok(())
}

/// Extrapolated RBO for finite, possibly uneven, duplicate-free lists.
/// Two empty lists agree fully; one empty list against a non-empty one
/// has no overlap.
pub fn rbo<T: AsRef<str>>(a: &[T], b: &[T], p: f64) -> Result<f64> {
    check_p(p)?;
    check_unique(a)?;
    check_unique(b)?;
    Ok(rbo_unchecked(a, b, p))
}

fn rbo_unchecked<T: AsRef<str>>(a: &[T], b: &[T], p: f64) -> f64 {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let (s, l) = (short.len(), long.len());
    match (s, l) {
        (0, 0) => return 1.0,
        (0, _) => return 0.0,
        _ => {}
    }
    let mut seen_short: HashSet<&str> = HashSet::with_capacity(s);
    let mut seen_long: HashSet<&str> = HashSet::with_capacity(l);
    let mut overlap = 0usize;
    let mut x_s = 0usize;
    let mut sum = 0.0;
    let mut pd = 1.0;
    for d in 1..=l {
        pd *= p;
        let y = long[d - 1].as_ref();
        if d <= s {
            let x = short[d - 1].as_ref();
            if x == y {
                overlap += 1;
            } else {
                overlap += usize::from(seen_long.contains(x)) + usize::from(seen_short.contains(y));
            }
            seen_short.insert(x);
            seen_long.insert(y);
            if d == s {
                x_s = overlap;
            }
        } else {
            overlap += usize::from(seen_short.contains(y));
        }
        sum += overlap as f64 / d as f64 * pd;
        if d > s {
            sum += x_s as f64 * (d - s) as f64 / (s * d) as f64 * pd;
        }
    }
    let x_l = overlap as f64;
    let tail = ((x_l - x_s as f64) / l as f64 + x_s as f64 / s as f64) * pd;
    ((1.0 - p) / p * sum + tail).clamp(0.0, 1.0)
}

/// Seeded Monte Carlo estimate of the mean RBO between independent uniform
/// permutations of `length` items, as a function of `p`.
pub struct RandomPermutationRbo {
    pairs: Vec<(Vec<String>, Vec<String>)>,
}

impl RandomPermutationRbo {
    pub fn new(length: usize, trials: usize, seed: u64) -> Result<Self> {
        if length < 2 || trials == 0 {
            return Err(Error::InvalidArgument(format!(
                "need length >= 2 and trials > 0, got length {length}, trials {trials}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<String> = (0..length).map(|i| i.to_string()).collect();
        let pairs = (0..trials)
            .map(|_| {
                let mut a = base.clone();
                let mut b = base.clone();
                a.shuffle(&mut rng);
                b.shuffle(&mut rng);
                (a, b)
            })
            .collect();
        Ok(Self { pairs })
    }

    pub fn mean(&self, p: f64) -> f64 {
        self.pairs.iter().map(|(a, b)| rbo_unchecked(a, b, p)).sum::<f64>() / self.pairs.len() as f64
    }
}

pub const DEFAULT_CALIBRATION_LENGTH: usize = 5;
pub const DEFAULT_CALIBRATION_TARGET: f64 = 0.6;
pub const DEFAULT_CALIBRATION_TRIALS: usize = 20_000;

/// Finds `p` by bisection so that the mean RBO of random permutation pairs
/// equals `target`. The same simulated pairs are reused at every `p`.
pub fn calibrate_rbo_p(length: usize, target: f64, trials: usize, seed: u64) -> Result<f64> {
    let sim = RandomPermutationRbo::new(length, trials, seed)?;
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
    let (f_lo, f_hi) = (sim.mean(lo), sim.mean(hi));
    if !(target > f_lo && target < f_hi) {
        return Err(Error::Unachievable {
            target,
            low: f_lo,
            high: f_hi,
        });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if sim.mean(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
