//! Threshold families `t_k(lambda)` ("templates") and their generalized inverses.
//!
//! A template is a spectrum of curves `k -> t_k(lambda)`, `1 <= k <= K`, indexed by
//! `lambda in [0, 1]`. Each curve must satisfy `t_k(0) = 0`, be nondecreasing and
//! left-continuous in `lambda`, and stay below 1. The generalized inverse is
//! `t_k^{-1}(y) = max { x in [0, 1] : t_k(x) <= y }`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{beta_cdf_unchecked, beta_quantile_unchecked};

/// A family of threshold curves. `k` is the 1-based curve number.
///
/// Implementations may assume `1 <= k <= self.size()`; the checked entry points
/// [`threshold`] and [`inverse`] validate it.
pub trait TemplateFamily: Send + Sync + fmt::Debug {
    /// Number of curves `K`.
    fn size(&self) -> usize;
    /// Number of hypotheses the curves are scaled to.
    fn m(&self) -> usize;
    fn threshold(&self, k: usize, lambda: f64) -> f64;
    fn inverse(&self, k: usize, y: f64) -> f64;
    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// `t_k(lambda) = lambda k / m`.
    Linear,
    /// `t_k(lambda)` is the `lambda`-quantile of `Beta(k, m - k + 1)`.
    Beta,
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateKind::Linear => "linear",
            TemplateKind::Beta => "beta",
        })
    }
}

impl FromStr for TemplateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(TemplateKind::Linear),
            "beta" => Ok(TemplateKind::Beta),
            other => invalid(format!("unknown template '{other}', expected linear or beta")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub kind: TemplateKind,
    /// Number of curves `K`, `1 <= K <= m`.
    pub size: usize,
    pub m: usize,
}

impl Template {
    pub fn new(kind: TemplateKind, m: usize, size: usize) -> Result<Self> {
        if m == 0 {
            return invalid("template needs m >= 1");
        }
        if size == 0 || size > m {
            return invalid(format!("template size K={size} must lie in [1, {m}]"));
        }
        Ok(Self { kind, size, m })
    }

    /// Full-size template, `K = m`.
    pub fn full(kind: TemplateKind, m: usize) -> Result<Self> {
        Self::new(kind, m, m)
    }

    pub fn linear(m: usize) -> Self {
        Self::full(TemplateKind::Linear, m.max(1)).expect("m >= 1")
    }

    pub fn beta(m: usize) -> Self {
        Self::full(TemplateKind::Beta, m.max(1)).expect("m >= 1")
    }
}

impl TemplateFamily for Template {
    fn size(&self) -> usize {
        self.size
    }

    fn m(&self) -> usize {
        self.m
    }

    fn threshold(&self, k: usize, lambda: f64) -> f64 {
        match self.kind {
            TemplateKind::Linear => lambda * k as f64 / self.m as f64,
            TemplateKind::Beta => beta_quantile_unchecked(lambda, k as f64, (self.m - k + 1) as f64),
        }
    }

    fn inverse(&self, k: usize, y: f64) -> f64 {
        match self.kind {
            TemplateKind::Linear => (y * self.m as f64 / k as f64).min(1.0),
            TemplateKind::Beta => beta_cdf_unchecked(y, k as f64, (self.m - k + 1) as f64),
        }
    }

    fn name(&self) -> String {
        if self.size == self.m {
            self.kind.to_string()
        } else {
            format!("{}(K={})", self.kind, self.size)
        }
    }
}

fn check_curve<T: TemplateFamily + ?Sized>(tpl: &T, k: usize) -> Result<()> {
    if k == 0 || k > tpl.size() {
        return invalid(format!("curve index {k} outside [1, {}]", tpl.size()));
    }
    Ok(())
}

/// `t_k(lambda)`, validating `k` and `lambda`.
pub fn threshold<T: TemplateFamily + ?Sized>(tpl: &T, k: usize, lambda: f64) -> Result<f64> {
    check_curve(tpl, k)?;
    if !(0.0..=1.0).contains(&lambda) {
        return invalid(format!("lambda {lambda} outside [0, 1]"));
    }
    Ok(tpl.threshold(k, lambda))
}

/// Generalized inverse `t_k^{-1}(y)`, validating `k` and `y`.
pub fn inverse<T: TemplateFamily + ?Sized>(tpl: &T, k: usize, y: f64) -> Result<f64> {
    check_curve(tpl, k)?;
    if !(0.0..=1.0).contains(&y) {
        return invalid(format!("y {y} outside [0, 1]"));
    }
    Ok(tpl.inverse(k, y))
}
