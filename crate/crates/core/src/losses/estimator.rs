use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, XriskError};
use crate::model::format_f64;

/// Which estimate the detached coefficients are computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorOrder {
    /// Update `u` with this batch first, then read it (the practical order).
    #[default]
    Updated,
    /// Read `u` as it was before this batch's update.
    Previous,
}

impl fmt::Display for EstimatorOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorOrder::Updated => "updated",
            EstimatorOrder::Previous => "previous",
        })
    }
}

impl FromStr for EstimatorOrder {
    type Err = XriskError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "updated" => Ok(EstimatorOrder::Updated),
            "previous" => Ok(EstimatorOrder::Previous),
            other => Err(XriskError::config_key(
                "estimator_order",
                format!("expected `updated` or `previous`, got `{other}`"),
            )),
        }
    }
}

/// Per-anchor moving averages of an inner function, keyed by dataset index.
///
/// A bank holds one tracker `u` per anchor, or two (`u`, `u_aux`) for losses
/// with a paired inner function. Untouched entries take the first fresh value
/// as is; afterwards `u <- (1 - gamma) u + gamma * fresh`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerEstimatorBank {
    gamma: f64,
    u: Vec<f64>,
    u_aux: Option<Vec<f64>>,
    touched: Vec<bool>,
    require_positive: bool,
}

impl InnerEstimatorBank {
    /// Single-tracker bank; `require_positive` rejects fresh values `<= 0`
    /// (inner functions that are means of exponentials).
    pub fn new(n: usize, gamma: f64, require_positive: bool) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self {
            gamma,
            u: vec![0.0; n],
            u_aux: None,
            touched: vec![false; n],
            require_positive,
        })
    }

    pub fn paired(n: usize, gamma: f64, require_positive: bool) -> Result<Self> {
        let mut b = Self::new(n, gamma, require_positive)?;
        b.u_aux = Some(vec![0.0; n]);
        Ok(b)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn is_paired(&self) -> bool {
        self.u_aux.is_some()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn u_aux(&self) -> Option<&[f64]> {
        self.u_aux.as_deref()
    }

    pub fn touched(&self) -> &[bool] {
        &self.touched
    }

    pub fn touched_count(&self) -> usize {
        self.touched.iter().filter(|&&t| t).count()
    }

    /// Forget every estimate.
    pub fn reset(&mut self) {
        self.u.iter_mut().for_each(|v| *v = 0.0);
        if let Some(a) = &mut self.u_aux {
            a.iter_mut().for_each(|v| *v = 0.0);
        }
        self.touched.iter_mut().for_each(|t| *t = false);
    }

    fn check_fresh(&self, fresh: &[f64], what: &str) -> Result<()> {
        for &f in fresh {
            if !f.is_finite() {
                return Err(XriskError::NumericDomain(format!("non-finite fresh {what} estimate {f}")));
            }
            if self.require_positive && f <= 0.0 {
                return Err(XriskError::NumericDomain(format!(
                    "fresh {what} estimate {f} must be > 0"
                )));
            }
        }
        Ok(())
    }

    fn check_anchors(&self, anchors: &[usize], fresh_len: usize) -> Result<()> {
        if anchors.len() != fresh_len {
            return Err(XriskError::Shape(format!(
                "{} anchors but {fresh_len} fresh values",
                anchors.len()
            )));
        }
        if let Some(&bad) = anchors.iter().find(|&&i| i >= self.u.len()) {
            return Err(XriskError::IndexOutOfRange {
                index: bad,
                len: self.u.len(),
            });
        }
        Ok(())
    }

    /// Moving-average update of `u` at `anchors`. Repeated anchors within one
    /// call are updated once, from their first occurrence.
    pub fn update(&mut self, anchors: &[usize], fresh: &[f64]) -> Result<()> {
        self.check_anchors(anchors, fresh.len())?;
        self.check_fresh(fresh, "inner")?;
        let g = self.gamma;
        let mut seen = HashSet::with_capacity(anchors.len());
        for (&i, &f) in anchors.iter().zip(fresh) {
            if !seen.insert(i) {
                continue;
            }
            self.u[i] = if self.touched[i] {
                (1.0 - g) * self.u[i] + g * f
            } else {
                f
            };
            self.touched[i] = true;
        }
        Ok(())
    }

    /// Paired update of both trackers.
    pub fn update_paired(&mut self, anchors: &[usize], fresh: &[f64], fresh_aux: &[f64]) -> Result<()> {
        if self.u_aux.is_none() {
            return Err(XriskError::Shape("bank has no paired tracker".into()));
        }
        self.check_anchors(anchors, fresh.len())?;
        self.check_anchors(anchors, fresh_aux.len())?;
        self.check_fresh(fresh, "inner")?;
        self.check_fresh(fresh_aux, "paired inner")?;
        let g = self.gamma;
        let aux = self.u_aux.as_mut().expect("checked above");
        let mut seen = HashSet::with_capacity(anchors.len());
        for (k, &i) in anchors.iter().enumerate() {
            if !seen.insert(i) {
                continue;
            }
            if self.touched[i] {
                self.u[i] = (1.0 - g) * self.u[i] + g * fresh[k];
                aux[i] = (1.0 - g) * aux[i] + g * fresh_aux[k];
            } else {
                self.u[i] = fresh[k];
                aux[i] = fresh_aux[k];
            }
            self.touched[i] = true;
        }
        Ok(())
    }

    /// Updates and returns, per anchor, the estimates the coefficients should
    /// use under `order`. An untouched anchor reads its fresh value either way.
    pub fn advance(
        &mut self,
        anchors: &[usize],
        fresh: &[f64],
        fresh_aux: Option<&[f64]>,
        order: EstimatorOrder,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let before = match order {
            EstimatorOrder::Previous => Some(self.read(anchors, fresh, fresh_aux)),
            EstimatorOrder::Updated => None,
        };
        match fresh_aux {
            Some(fa) => self.update_paired(anchors, fresh, fa)?,
            None => self.update(anchors, fresh)?,
        }
        Ok(match before {
            Some(b) => b,
            None => {
                let u = anchors.iter().map(|&i| self.u[i]).collect();
                let aux = fresh_aux.map(|_| {
                    let a = self.u_aux.as_ref().expect("paired update succeeded");
                    anchors.iter().map(|&i| a[i]).collect()
                });
                (u, aux)
            }
        })
    }

    fn read(&self, anchors: &[usize], fresh: &[f64], fresh_aux: Option<&[f64]>) -> (Vec<f64>, Option<Vec<f64>>) {
        let pick = |i: usize, k: usize, store: &[f64], f: &[f64]| {
            if i < self.touched.len() && self.touched[i] {
                store[i]
            } else {
                f[k]
            }
        };
        let u = anchors
            .iter()
            .enumerate()
            .map(|(k, &i)| pick(i, k, &self.u, fresh))
            .collect();
        let aux = match (fresh_aux, &self.u_aux) {
            (Some(fa), Some(store)) => Some(
                anchors
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| pick(i, k, store, fa))
                    .collect(),
            ),
            _ => None,
        };
        (u, aux)
    }

    /// CSV with header `index,u,touched` or `index,u1,u2,touched`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# gamma={}\n", format_f64(self.gamma)));
        match &self.u_aux {
            None => {
                out.push_str("index,u,touched\n");
                for i in 0..self.u.len() {
                    out.push_str(&format!("{i},{},{}\n", format_f64(self.u[i]), self.touched[i] as u8));
                }
            }
            Some(a) => {
                out.push_str("index,u1,u2,touched\n");
                for i in 0..self.u.len() {
                    out.push_str(&format!(
                        "{i},{},{},{}\n",
                        format_f64(self.u[i]),
                        format_f64(a[i]),
                        self.touched[i] as u8
                    ));
                }
            }
        }
        out
    }

    /// Restores estimates from [`to_csv`](Self::to_csv) output. The bank's
    /// size and pairing must match the file.
    pub fn load_csv(&mut self, text: &str) -> Result<()> {
        let perr = |row: usize, msg: String| XriskError::Parse { row, msg };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
        let (hrow, header) = lines.next().ok_or_else(|| perr(1, "empty bank file".into()))?;
        let paired = match header.trim() {
            "index,u,touched" => false,
            "index,u1,u2,touched" => true,
            other => return Err(perr(hrow + 1, format!("unexpected bank header `{other}`"))),
        };
        if paired != self.is_paired() {
            return Err(perr(hrow + 1, "bank pairing does not match".into()));
        }
        let mut u = vec![0.0; self.u.len()];
        let mut aux = vec![0.0; self.u.len()];
        let mut touched = vec![false; self.u.len()];
        let mut count = 0;
        for (row, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            let want = if paired { 4 } else { 3 };
            if f.len() != want {
                return Err(perr(row + 1, format!("expected {want} fields")));
            }
            let idx: usize = f[0].parse().map_err(|_| perr(row + 1, format!("bad index `{}`", f[0])))?;
            if idx >= u.len() {
                return Err(XriskError::IndexOutOfRange { index: idx, len: u.len() });
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| perr(row + 1, format!("bad value `{s}`")));
            u[idx] = num(f[1])?;
            if paired {
                aux[idx] = num(f[2])?;
            }
            touched[idx] = match f[want - 1] {
                "0" => false,
                "1" => true,
                s => return Err(perr(row + 1, format!("bad touched flag `{s}`"))),
            };
            count += 1;
        }
        if count != u.len() {
            return Err(perr(0, format!("bank file has {count} rows, expected {}", u.len())));
        }
        self.u = u;
        if paired {
            self.u_aux = Some(aux);
        }
        self.touched = touched;
        Ok(())
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(XriskError::config_key(
            "gamma",
            format!("gamma must lie in (0, 1], got {gamma}"),
        ))
    }
}
