//! The generating function of complete N-ary subtrees.
//!
//! For an offspring pgf `f` and arity `N >= 1`,
//!
//! ```text
//! g_N(s) = sum_{j=0}^{N-1} (1-s)^j f^{(j)}(s) / j!
//! ```
//!
//! is the probability that a vertex has fewer than `N` children that carry
//! some property, when each child carries it independently with
//! probability `1 - s`. Iterating `g_N` from zero yields the probability
//! that no complete N-ary subtree of height `t` hangs from the root.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::offspring::OffspringSpec;

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// An offspring law paired with a subtree arity `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtreeGF {
    spec: OffspringSpec,
    arity: usize,
}

impl SubtreeGF {
    /// Fails unless `arity >= 1`, the spec is valid and the law puts mass on
    /// some `k > arity`.
    pub fn new(spec: OffspringSpec, arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidSpec(
                "subtree arity N must be at least 1".into(),
            ));
        }
        spec.validate()?;
        if !spec.has_mass_above(arity) {
            return Err(Error::NoMassAboveN(arity));
        }
        Ok(Self { spec, arity })
    }

    /// Like [`SubtreeGF::new`] but accepts laws without mass above `arity`.
    /// For those, `gamma_N` is 0 when `p_N = 1` and 1 otherwise; the solver
    /// still finds it, but no asymptotic law applies.
    pub fn new_unchecked(spec: OffspringSpec, arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidSpec(
                "subtree arity N must be at least 1".into(),
            ));
        }
        spec.validate()?;
        Ok(Self { spec, arity })
    }

    pub fn spec(&self) -> &OffspringSpec {
        &self.spec
    }

    /// The arity `N`.
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn g(&self, s: f64) -> Result<f64> {
        check_unit("s", s)?;
        Ok(self.g_at(s))
    }

    /// `g_N'(s) = (1-s)^{N-1} f^{(N)}(s) / (N-1)!`.
    pub fn g_prime(&self, s: f64) -> Result<f64> {
        check_unit("s", s)?;
        Ok(self.g_prime_at(s))
    }

    /// `g_N''(s)`, the derivative of the closed form for `g_N'`. For `N = 1`
    /// this is `f''(s)`.
    pub fn g_double_prime(&self, s: f64) -> Result<f64> {
        check_unit("s", s)?;
        Ok(self.g_double_prime_at(s))
    }

    pub(crate) fn g_at(&self, s: f64) -> f64 {
        if self.arity == 1 {
            return self.spec.taylor_coeff_at(s, 0);
        }
        let q = 1.0 - s;
        let mut acc = CompensatedSum::default();
        let mut qpow = 1.0;
        for j in 0..self.arity as u32 {
            acc.add(qpow * self.spec.taylor_coeff_at(s, j));
            qpow *= q;
        }
        acc.value()
    }

    pub(crate) fn g_prime_at(&self, s: f64) -> f64 {
        let n = self.arity as u32;
        let q = 1.0 - s;
        // f^{(N)}/(N-1)! = N * f^{(N)}/N!
        q.powi(n as i32 - 1) * f64::from(n) * self.spec.taylor_coeff_at(s, n)
    }

    pub(crate) fn g_double_prime_at(&self, s: f64) -> f64 {
        let n = self.arity as u32;
        if n == 1 {
            return 2.0 * self.spec.taylor_coeff_at(s, 2);
        }
        let q = 1.0 - s;
        let nf = f64::from(n);
        let upper = q.powi(n as i32 - 1) * (nf + 1.0) * nf * self.spec.taylor_coeff_at(s, n + 1);
        let lower = q.powi(n as i32 - 2) * nf * (nf - 1.0) * self.spec.taylor_coeff_at(s, n);
        upper - lower
    }
}
