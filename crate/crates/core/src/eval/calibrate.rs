//! Choosing the token-F1 threshold against human match judgments.

use super::{harmonic, token_overlap, EvalError};
use serde::{Deserialize, Serialize};

/// The sweep visits k / 20 for k = 1..=19.
pub const THRESHOLD_GRID_STEPS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub pred: String,
    pub gold: String,
    /// Human judgment: do the two answers match?
    #[serde(rename = "match")]
    pub is_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub threshold: f64,
    pub meta_f1: f64,
    /// (threshold, binary F1) at every grid point.
    pub grid: Vec<(f64, f64)>,
}

/// Sweep the threshold grid and keep the point whose match decisions agree
/// best (binary F1) with the human labels; ties keep the smaller threshold.
pub fn calibrate_threshold(pairs: &[LabeledPair]) -> Result<Calibration, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    // token F1 >= k/20  <=>  2c/(p+g) >= k/20  <=>  40c >= k(p+g), kept exact
    let overlaps: Vec<(usize, usize)> = pairs
        .iter()
        .map(|pair| match token_overlap(&pair.pred, &pair.gold) {
            (_, 0, 0) => (1, 1),
            (c, p, g) => (2 * c, p + g),
        })
        .collect();
    let steps = THRESHOLD_GRID_STEPS as usize;
    let mut grid = Vec::with_capacity(steps - 1);
    let mut best = (0.0, -1.0);
    for k in 1..steps {
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        for (pair, (num, den)) in pairs.iter().zip(&overlaps) {
            let decided = num * steps >= k * den;
            match (decided, pair.is_match) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fneg == 0 {
            0.0
        } else {
            tp as f64 / (tp + fneg) as f64
        };
        let f1 = harmonic(precision, recall);
        let threshold = k as f64 / steps as f64;
        grid.push((threshold, f1));
        if f1 > best.1 {
            best = (threshold, f1);
        }
    }
    Ok(Calibration {
        threshold: best.0,
        meta_f1: best.1,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(pred: &str, gold: &str, m: bool) -> LabeledPair {
        LabeledPair {
            pred: pred.into(),
            gold: gold.into(),
            is_match: m,
        }
    }

    #[test]
    fn all_matches_pick_the_smallest_threshold() {
        let c = calibrate_threshold(&[pair("a b", "a", true), pair("x", "y", true)]).unwrap();
        assert_eq!(c.threshold, 0.05);
        assert_eq!(c.grid.len(), 19);
    }

    #[test]
    fn planted_boundary() {
        // overlap F1 0.5 labelled match, 0.4 labelled no match
        let pairs = vec![
            pair("a b c", "a", true),    // 2/4 = 0.5
            pair("a b c d", "a", false), // 2/5 = 0.4
            pair("a", "a", true),        // 1
            pair("q", "r", false),       // 0
        ];
        let c = calibrate_threshold(&pairs).unwrap();
        assert_eq!(c.meta_f1, 1.0);
        assert_eq!(c.threshold, 0.45);
        assert!(calibrate_threshold(&[]).is_err());
    }
}
