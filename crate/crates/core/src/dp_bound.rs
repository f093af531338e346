//! Lower bounds on the differential-privacy parameter ε implied by an
//! attack's operating point: `ε >= ln max{α / (1 - β), β / (1 - α)}`.

use serde::{Deserialize, Serialize};

use crate::attacks::AttackScores;
use crate::{Error, Result};

/// Rates of a decision rule, both strictly inside `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    alpha: f64,
    beta: f64,
}

impl OperatingPoint {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} = {v} must lie strictly inside (0, 1)")));
            }
        }
        Ok(OperatingPoint { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Natural-log bound; may be negative, in which case only the trivial
/// `ε >= 0` is informative.
pub fn epsilon_lower_bound(op: &OperatingPoint) -> f64 {
    let (a, b) = (op.alpha, op.beta);
    (a / (1.0 - b)).max(b / (1.0 - a)).ln()
}

/// How β is read off the attack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaReading {
    /// β = false-negative rate among members (α + β = 1 before clipping).
    FalseNegativeRate,
    /// β = false-positive rate among nonmembers.
    FalsePositiveRate,
}

/// Operating point plus a flag recording whether clipping moved a rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClippedOperatingPoint {
    pub point: OperatingPoint,
    pub raw_alpha: f64,
    pub raw_beta: f64,
    pub clipped: bool,
}

fn clip(rate: f64, class_size: usize) -> (f64, bool) {
    let delta = 1.0 / (2.0 * class_size as f64);
    let c = rate.clamp(delta, 1.0 - delta);
    (c, c != rate)
}

/// Rates of the rule `score > threshold`. Each rate is clipped into
/// `[δ, 1 - δ]` with `δ = 1 / (2 n)` for the class it is measured on.
pub fn operating_point_with(
    scores: &AttackScores,
    threshold: f64,
    reading: BetaReading,
) -> Result<ClippedOperatingPoint> {
    if scores.labels.len() != scores.scores.len() {
        return Err(Error::invalid("scores carry no aligned membership labels"));
    }
    let (mut tp, mut fp, mut n_members, mut n_nonmembers) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &member) in scores.scores.iter().zip(&scores.labels) {
        let flagged = s > threshold;
        if member {
            n_members += 1;
            tp += flagged as usize;
        } else {
            n_nonmembers += 1;
            fp += flagged as usize;
        }
    }
    if n_members == 0 || n_nonmembers == 0 {
        return Err(Error::invalid(
            "operating point needs at least one member and one nonmember",
        ));
    }
    let raw_alpha = tp as f64 / n_members as f64;
    let (raw_beta, beta_class) = match reading {
        BetaReading::FalseNegativeRate => ((n_members - tp) as f64 / n_members as f64, n_members),
        BetaReading::FalsePositiveRate => (fp as f64 / n_nonmembers as f64, n_nonmembers),
    };
    let (alpha, ca) = clip(raw_alpha, n_members);
    let (beta, cb) = clip(raw_beta, beta_class);
    Ok(ClippedOperatingPoint {
        point: OperatingPoint::new(alpha, beta)?,
        raw_alpha,
        raw_beta,
        clipped: ca || cb,
    })
}

/// Literal reading: α = true-positive rate, β = false-negative rate, both
/// among members.
pub fn operating_point_from_attack(scores: &AttackScores, threshold: f64) -> Result<ClippedOperatingPoint> {
    operating_point_with(scores, threshold, BetaReading::FalseNegativeRate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(a: f64, b: f64) -> OperatingPoint {
        OperatingPoint::new(a, b).unwrap()
    }

    #[test]
    fn bound_examples() {
        assert_eq!(epsilon_lower_bound(&op(0.5, 0.5)), 0.0);
        assert!((epsilon_lower_bound(&op(0.9, 0.9)) - 9f64.ln()).abs() < 1e-12);
        let v = epsilon_lower_bound(&op(0.8, 0.1));
        assert!((v - (8.0f64 / 9.0).ln()).abs() < 1e-12);
        assert!(v < 0.0);
    }

    #[test]
    fn boundary_rates_rejected() {
        for (a, b) in [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0), (f64::NAN, 0.5)] {
            assert!(OperatingPoint::new(a, b).is_err());
        }
    }

    #[test]
    fn perfect_attack_is_clipped() {
        let s = AttackScores::new("t", vec![3.0, 4.0, 1.0, 2.0], vec![true, true, false, false]).unwrap();
        let p = operating_point_from_attack(&s, 2.5).unwrap();
        assert!(p.clipped);
        assert_eq!(p.point.alpha(), 0.75);
        assert_eq!(p.point.beta(), 0.25);
        assert_eq!((p.raw_alpha, p.raw_beta), (1.0, 0.0));
    }

    #[test]
    fn everything_member() {
        let s = AttackScores::new("t", vec![3.0, 4.0, 1.0, 2.0], vec![true, true, false, false]).unwrap();
        let p = operating_point_from_attack(&s, f64::NEG_INFINITY).unwrap();
        assert_eq!((p.raw_alpha, p.raw_beta), (1.0, 0.0));
        assert!(p.clipped);
        let fpr = operating_point_with(&s, f64::NEG_INFINITY, BetaReading::FalsePositiveRate).unwrap();
        assert_eq!(fpr.raw_beta, 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let s = AttackScores::new("t", vec![1.0], vec![true]).unwrap();
        assert!(operating_point_from_attack(&s, 0.0).is_err());
    }
}
