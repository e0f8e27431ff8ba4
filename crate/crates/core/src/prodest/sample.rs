//! Row filtering and log transforms shared by the estimators.

use crate::error::{Error, Result};
use crate::panel::FirmPanel;
use crate::scalar::Scalar;

/// Which proxy (if any) must be positive for a row to enter the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Requirement {
    /// Output, labor, capital and intermediates enter as regressors.
    AllInputs,
    /// Investment proxy plus age (imputed from the period when absent).
    Investment,
    /// Intermediates proxy.
    Intermediates,
}

/// Log-level production data for the rows that passed the filters.
#[derive(Debug, Clone)]
pub(crate) struct Sample<T> {
    pub rows: Vec<usize>,
    pub firm: Vec<String>,
    pub period: Vec<i64>,
    pub y: Vec<T>,
    pub l: Vec<T>,
    pub k: Vec<T>,
    /// Log intermediates (NaN when not required).
    pub m: Vec<T>,
    /// Log investment (NaN when not required).
    pub i: Vec<T>,
    pub age: Vec<T>,
    pub dropped: usize,
}

impl<T: Scalar> Sample<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// `(previous, current)` index pairs of consecutive periods within a firm.
    pub fn lag_pairs(&self) -> Vec<(usize, usize)> {
        (1..self.len())
            .filter(|&j| self.firm[j] == self.firm[j - 1] && self.period[j] == self.period[j - 1] + 1)
            .map(|j| (j - 1, j))
            .collect()
    }

    pub fn keys(&self) -> Vec<(String, i64)> {
        self.firm.iter().cloned().zip(self.period.iter().copied()).collect()
    }
}

fn positive_log<T: Scalar>(v: T, field: &str, firm: &str, period: i64) -> Result<T> {
    if v > T::zero() {
        Ok(v.ln())
    } else {
        Err(Error::NonPositiveValue { field: field.into(), firm: firm.into(), period })
    }
}

pub(crate) fn extract<T: Scalar>(panel: &FirmPanel<T>, req: Requirement) -> Result<Sample<T>> {
    let age_from_period = req == Requirement::Investment && panel.observations.iter().all(|o| o.age.is_none());
    let mut s = Sample {
        rows: Vec::new(),
        firm: Vec::new(),
        period: Vec::new(),
        y: Vec::new(),
        l: Vec::new(),
        k: Vec::new(),
        m: Vec::new(),
        i: Vec::new(),
        age: Vec::new(),
        dropped: 0,
    };
    for (idx, o) in panel.observations.iter().enumerate() {
        let (Some(y), Some(l), Some(k)) = (o.output, o.labor, o.capital) else {
            s.dropped += 1;
            continue;
        };
        let (fid, per) = (o.firm_id.as_str(), o.period);
        let ly = positive_log(y, "output", fid, per)?;
        let ll = positive_log(l, "labor", fid, per)?;
        let lk = positive_log(k, "capital", fid, per)?;
        let (lm, li, age) = match req {
            Requirement::AllInputs => match o.intermediates {
                Some(m) => (positive_log(m, "intermediates", fid, per)?, T::nan(), T::nan()),
                None => {
                    s.dropped += 1;
                    continue;
                }
            },
            Requirement::Intermediates => match o.intermediates {
                Some(m) if m > T::zero() => (m.ln(), T::nan(), T::nan()),
                _ => {
                    s.dropped += 1;
                    continue;
                }
            },
            Requirement::Investment => {
                let age = if age_from_period { Some(T::from_i64(per).unwrap_or_else(T::nan)) } else { o.age };
                match (o.investment, age) {
                    (Some(i), Some(a)) if i > T::zero() => (T::nan(), i.ln(), a),
                    _ => {
                        s.dropped += 1;
                        continue;
                    }
                }
            }
        };
        s.rows.push(idx);
        s.firm.push(o.firm_id.clone());
        s.period.push(per);
        s.y.push(ly);
        s.l.push(ll);
        s.k.push(lk);
        s.m.push(lm);
        s.i.push(li);
        s.age.push(age);
    }
    if s.rows.is_empty() {
        return Err(Error::EmptyPanel);
    }
    Ok(s)
}
