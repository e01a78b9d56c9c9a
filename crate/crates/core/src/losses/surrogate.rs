use std::fmt;
use std::str::FromStr;

use crate::error::{Result, XriskError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    SquaredHinge,
    Logistic,
    Hinge,
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurrogateKind::SquaredHinge => "squared_hinge",
            SurrogateKind::Logistic => "logistic",
            SurrogateKind::Hinge => "hinge",
        })
    }
}

impl FromStr for SurrogateKind {
    type Err = XriskError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "squared_hinge" | "sqh" => Ok(SurrogateKind::SquaredHinge),
            "logistic" => Ok(SurrogateKind::Logistic),
            "hinge" => Ok(SurrogateKind::Hinge),
            other => Err(XriskError::config_key(
                "surrogate",
                format!("unknown surrogate `{other}`"),
            )),
        }
    }
}

/// Pairwise surrogate of the indicator `1(h_j >= h_i)`, evaluated on the gap
/// `d = h_j - h_i` (other item minus anchor).
///
/// * squared hinge: `max(0, m + d)^2`
/// * hinge: `max(0, m + d)`, subgradient 1 on the active side, 0 at the kink
/// * logistic: `ln(1 + e^d)`; the margin is not used
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surrogate {
    pub kind: SurrogateKind,
    pub margin: f64,
}

impl Surrogate {
    pub fn new(kind: SurrogateKind, margin: f64) -> Result<Self> {
        if !(margin.is_finite() && margin > 0.0) {
            return Err(XriskError::config_key(
                "margin",
                format!("margin must be finite and > 0, got {margin}"),
            ));
        }
        Ok(Self { kind, margin })
    }

    pub fn squared_hinge(margin: f64) -> Self {
        Self {
            kind: SurrogateKind::SquaredHinge,
            margin,
        }
    }

    /// Value and derivative at `gap`.
    pub fn eval(&self, gap: f64) -> (f64, f64) {
        match self.kind {
            SurrogateKind::SquaredHinge => {
                let t = (self.margin + gap).max(0.0);
                (t * t, 2.0 * t)
            }
            SurrogateKind::Hinge => {
                let t = self.margin + gap;
                if t > 0.0 {
                    (t, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            SurrogateKind::Logistic => {
                // softplus and sigmoid, stable on both tails
                let v = if gap > 0.0 {
                    gap + (-gap).exp().ln_1p()
                } else {
                    gap.exp().ln_1p()
                };
                let s = if gap >= 0.0 {
                    1.0 / (1.0 + (-gap).exp())
                } else {
                    let e = gap.exp();
                    e / (1.0 + e)
                };
                (v, s)
            }
        }
    }

    pub fn value(&self, gap: f64) -> f64 {
        self.eval(gap).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let s = Surrogate::squared_hinge(1.0);
        assert_eq!(s.eval(-1.0), (0.0, 0.0));
        assert_eq!(s.eval(0.0), (1.0, 2.0));
        assert_eq!(s.eval(-3.0), (0.0, 0.0));
        let l = Surrogate::new(SurrogateKind::Logistic, 1.0).unwrap();
        let (v, d) = l.eval(0.0);
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert_eq!(d, 0.5);
        let h = Surrogate::new(SurrogateKind::Hinge, 0.5).unwrap();
        assert_eq!(h.eval(0.25), (0.75, 1.0));
        assert_eq!(h.eval(-0.5), (0.0, 0.0));
    }

    #[test]
    fn derivatives_match_differences() {
        for kind in [SurrogateKind::SquaredHinge, SurrogateKind::Logistic, SurrogateKind::Hinge] {
            let s = Surrogate::new(kind, 0.7).unwrap();
            for &d in &[-2.3, -0.2, 0.4, 3.1, 40.0, -40.0] {
                let h = 1e-6;
                let fd = (s.value(d + h) - s.value(d - h)) / (2.0 * h);
                assert!((fd - s.eval(d).1).abs() < 1e-6, "{kind} at {d}");
            }
        }
    }

    #[test]
    fn margin_is_checked() {
        assert!(Surrogate::new(SurrogateKind::Hinge, 0.0).is_err());
        assert!("bogus".parse::<SurrogateKind>().is_err());
        assert_eq!("squared_hinge".parse::<SurrogateKind>().unwrap(), SurrogateKind::SquaredHinge);
    }
}
