//! Distance threshold calibration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of (distance, accuracy) pairs for a calibration.
pub const MIN_PAIRS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Largest distance whose fitted accuracy reaches the target.
    pub threshold: f64,
    /// True when no distance reached the target and the threshold is 0.
    pub warning: bool,
    /// `(distance, observed, fitted)`, sorted by distance.
    pub curve: Vec<(f64, f64, f64)>,
}

/// Non-increasing least-squares fit to `y` (pool adjacent violators).
pub fn isotonic_decreasing(y: &[f64], w: &[f64]) -> Vec<f64> {
    // Blocks of (weighted mean, weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&v, &wt) in y.iter().zip(w) {
        blocks.push((v, wt, 1));
        while blocks.len() > 1 {
            let (m2, w2, n2) = blocks[blocks.len() - 1];
            let (m1, w1, n1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            let merged = ((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, n1 + n2);
            *blocks.last_mut().expect("non-empty") = merged;
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// Fits accuracy as a non-increasing function of distance and returns the
/// largest observed distance whose fitted accuracy is at least `target`.
pub fn calibrate_threshold(pairs: &[(f64, f64)], target: f64) -> Result<Calibration> {
    if pairs.len() < MIN_PAIRS {
        return Err(Error::Calibration(format!(
            "{} (distance, accuracy) pairs given, at least {MIN_PAIRS} required",
            pairs.len()
        )));
    }
    if pairs
        .iter()
        .any(|(d, a)| !d.is_finite() || *d < 0.0 || !(0.0..=1.0).contains(a))
    {
        return Err(Error::Calibration(
            "distances must be finite and non-negative, accuracies in [0, 1]".into(),
        ));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));

    // Pool equal distances first so that ties share one fitted value.
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    for &(d, a) in &sorted {
        match xs.last() {
            Some(&x) if x == d => {
                let i = ys.len() - 1;
                ys[i] = (ys[i] * ws[i] + a) / (ws[i] + 1.0);
                ws[i] += 1.0;
            }
            _ => {
                xs.push(d);
                ys.push(a);
                ws.push(1.0);
            }
        }
    }
    let fitted = isotonic_decreasing(&ys, &ws);
    let threshold = xs
        .iter()
        .zip(&fitted)
        .rev()
        .find(|(_, &f)| f >= target)
        .map(|(&x, _)| x);
    let curve = sorted
        .iter()
        .map(|&(d, a)| {
            let i = xs.iter().position(|&x| x == d).expect("pooled distance");
            (d, a, fitted[i])
        })
        .collect();
    Ok(Calibration {
        threshold: threshold.unwrap_or(0.0),
        warning: threshold.is_none(),
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_successful_and_all_failing() {
        let ok: Vec<(f64, f64)> = (0..25).map(|i| (i as f64 * 0.1, 1.0)).collect();
        let c = calibrate_threshold(&ok, 0.9).unwrap();
        assert_eq!(c.threshold, 24.0 * 0.1);
        assert!(!c.warning);
        let bad: Vec<(f64, f64)> = (0..25).map(|i| (i as f64 * 0.1, 0.2)).collect();
        let c = calibrate_threshold(&bad, 0.9).unwrap();
        assert_eq!(c.threshold, 0.0);
        assert!(c.warning);
    }

    #[test]
    fn too_few_pairs() {
        assert!(matches!(
            calibrate_threshold(&[(0.1, 1.0); 19], 0.5),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn fit_is_monotone() {
        let y = [0.9, 1.0, 0.7, 0.8, 0.75, 0.2, 0.3];
        let f = isotonic_decreasing(&y, &[1.0; 7]);
        assert!(f.windows(2).all(|w| w[0] >= w[1]));
        assert!((f.iter().sum::<f64>() - y.iter().sum::<f64>()).abs() < 1e-12);
    }
}
