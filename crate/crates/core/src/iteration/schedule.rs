//! Control sequences `alpha_n` for the Krasnoselskij-Mann iteration.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant {
        alpha: f64,
    },
    /// `alpha_n = k + (1 - k) (1 - c (n + 2)^(-p))`, kept strictly inside `(k, 1)`.
    PowerDecay {
        k: f64,
        c: f64,
        p: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

fn next_up(x: f64) -> f64 {
    if x >= 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Constant { alpha } => {
                if !alpha.is_finite() {
                    return Err(invalid("alpha", "must be finite"));
                }
            }
            Schedule::PowerDecay { k, c, p } => {
                if !(0.0..1.0).contains(k) {
                    return Err(invalid("k", format!("{k} must lie in [0, 1)")));
                }
                if !(*c > 0.0 && *c < 1.0) {
                    return Err(invalid("c", format!("{c} must lie in (0, 1)")));
                }
                if !(p.is_finite() && *p > 0.0) {
                    return Err(invalid("p", format!("{p} must be positive")));
                }
            }
            Schedule::Explicit { values } => {
                if values.is_empty() {
                    return Err(invalid("values", "explicit schedule is empty"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("values", "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// `alpha_n`.
    pub fn alpha(&self, n: usize) -> Result<f64> {
        match self {
            Schedule::Constant { alpha } => Ok(*alpha),
            Schedule::PowerDecay { k, c, p } => {
                let cn = 1.0 - c * ((n + 2) as f64).powf(-p);
                let alpha = k + (1.0 - k) * cn;
                Ok(alpha.clamp(next_up(*k), next_down(1.0)))
            }
            Schedule::Explicit { values } => values.get(n).copied().ok_or(Error::ScheduleExhausted {
                index: n,
                len: values.len(),
            }),
        }
    }

    /// Number of available terms, `None` when unbounded.
    pub fn term_count(&self) -> Option<usize> {
        match self {
            Schedule::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }
}

pub fn schedule_alpha(schedule: &Schedule, n: usize) -> Result<f64> {
    schedule.alpha(n)
}

/// Partial sums of `(alpha_n - k)(1 - alpha_n)` and a divergence guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub horizon: usize,
    /// `(N, S_N)` for `N` in `{horizon/100, horizon/10, horizon}`.
    pub partial_sums: Vec<(usize, f64)>,
    /// Heuristic: the sum over the last decade of indices is at least half of
    /// the sum over the decade before it. Not a proof of divergence.
    pub flagged_divergent: bool,
}

const DIVERGENCE_TOL: f64 = 1e-12;

/// Checks `k < alpha_n < 1` for `n < horizon` and estimates whether
/// `sum (alpha_n - k)(1 - alpha_n)` diverges.
///
/// A divergent series of this kind grows by a roughly constant amount per
/// decade of indices (harmonic tail) or faster; a summable one with terms
/// `~ n^(-p)`, `p > 1`, grows by a factor `10^(1-p)` less each decade.
pub fn validate_schedule(schedule: &Schedule, k: f64, horizon: usize) -> Result<ScheduleReport> {
    if horizon == 0 {
        return Err(invalid("horizon", "must be at least 1"));
    }
    schedule.validate()?;
    let marks = [horizon / 100, horizon / 10, horizon];
    let mut at = [0.0; 3];
    let mut s = 0.0;
    for n in 0..horizon {
        for (slot, &m) in at.iter_mut().zip(&marks) {
            if m == n {
                *slot = s;
            }
        }
        let alpha = schedule.alpha(n)?;
        if !(alpha > k && alpha < 1.0) {
            return Err(Error::AlphaOutOfRange { index: n, alpha, k });
        }
        s += (alpha - k) * (1.0 - alpha);
    }
    at[2] = s;
    let (s100, s10, s1) = (at[0], at[1], at[2]);
    let flagged_divergent = s1 > 0.0 && (s1 - s10) >= 0.5 * (s10 - s100) - DIVERGENCE_TOL;
    Ok(ScheduleReport {
        horizon,
        partial_sums: marks.into_iter().zip(at).collect(),
        flagged_divergent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_examples() {
        let c = Schedule::Constant { alpha: 0.75 };
        assert_eq!(schedule_alpha(&c, 0).unwrap(), 0.75);
        assert_eq!(schedule_alpha(&c, 12345).unwrap(), 0.75);
        let pd = Schedule::PowerDecay { k: 0.5, c: 0.5, p: 1.0 };
        assert_eq!(schedule_alpha(&pd, 0).unwrap(), 0.875);
        let ex = Schedule::Explicit { values: vec![0.6, 0.7] };
        assert_eq!(schedule_alpha(&ex, 1).unwrap(), 0.7);
        assert!(matches!(
            schedule_alpha(&ex, 2),
            Err(Error::ScheduleExhausted { index: 2, len: 2 })
        ));
    }

    #[test]
    fn power_decay_stays_strictly_inside() {
        let pd = Schedule::PowerDecay { k: 0.5, c: 0.5, p: 8.0 };
        for n in [0usize, 10, 1_000, 1_000_000] {
            let a = pd.alpha(n).unwrap();
            assert!(a > 0.5 && a < 1.0, "n={n}: {a}");
        }
    }

    #[test]
    fn constant_flagged_divergent() {
        let r = validate_schedule(&Schedule::Constant { alpha: 0.75 }, 0.5, 1000).unwrap();
        assert!(r.flagged_divergent);
        assert_eq!(r.partial_sums.last().unwrap().0, 1000);
        assert!((r.partial_sums[2].1 - 1000.0 * 0.25 * 0.25).abs() < 1e-9);
    }

    #[test]
    fn harmonic_tail_flagged_divergent() {
        let r = validate_schedule(&Schedule::PowerDecay { k: 0.5, c: 0.5, p: 1.0 }, 0.5, 100_000).unwrap();
        assert!(r.flagged_divergent, "{r:?}");
    }

    #[test]
    fn square_summable_flagged_convergent() {
        let r = validate_schedule(&Schedule::PowerDecay { k: 0.5, c: 0.5, p: 2.0 }, 0.5, 100_000).unwrap();
        assert!(!r.flagged_divergent, "{r:?}");
    }

    #[test]
    fn out_of_range_reports_index() {
        let ex = Schedule::Explicit {
            values: vec![0.7, 0.8, 0.4],
        };
        assert!(matches!(
            validate_schedule(&ex, 0.5, 3),
            Err(Error::AlphaOutOfRange { index: 2, .. })
        ));
        assert!(validate_schedule(&ex, 0.5, 4).is_err());
        assert!(validate_schedule(&Schedule::Constant { alpha: 1.0 }, 0.0, 10).is_err());
        assert!(validate_schedule(&Schedule::Constant { alpha: 0.3 }, 0.3, 10).is_err());
        assert!(validate_schedule(&Schedule::Constant { alpha: 0.5 }, 0.0, 0).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(Schedule::PowerDecay { k: 0.5, c: 1.0, p: 1.0 }.validate().is_err());
        assert!(Schedule::PowerDecay { k: 0.5, c: 0.5, p: 0.0 }.validate().is_err());
        assert!(Schedule::PowerDecay { k: 1.0, c: 0.5, p: 1.0 }.validate().is_err());
        assert!(Schedule::Explicit { values: vec![] }.validate().is_err());
    }
}
