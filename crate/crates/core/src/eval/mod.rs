//! Corpus-level evaluation and surprisal analytics.

mod bleu;
mod sweep;

pub use bleu::{corpus_bleu, BleuReport, MAX_ORDER};
pub use sweep::{sweep_aggregate, SweepBucket, SweepRow};

use crate::error::{contract, Result};

/// Pearson correlation coefficient.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return contract(format!("correlation of {} and {} values", xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return contract("correlation needs at least two points");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return contract("correlation is undefined for a constant series");
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlations() {
        let xs = [1.0, 2.5, 3.0, -4.0];
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((correlation(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        assert!((correlation(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn five_point_hand_computation() {
        // x̄ = 3, ȳ = 4; Σdxdy = 9, Σdx² = 10, Σdy² = 10 → r = 0.9
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [2.0, 4.0, 3.0, 5.0, 6.0];
        assert!((correlation(&xs, &ys).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(correlation(&[1.0], &[1.0]).is_err());
        assert!(correlation(&[1.0, 2.0], &[1.0]).is_err());
    }
}
