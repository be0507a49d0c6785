//! Offspring distributions and their probability generating functions.
//!
//! An [`OffspringSpec`] describes the law of the number of children of a
//! vertex in a Galton-Watson tree. Every family exposes its pgf
//! `f(s) = sum_k p_k s^k` together with exact derivatives of any order on
//! `[0, 1]`; at `s = 1` the left derivative is returned.
//!
//! Specs have a compact text form used on the command line:
//!
//! ```text
//! geometric:p=0.8
//! poisson:m=3.3509
//! one-or-many:p=0.8889,r=3
//! binomial:n=9,p=0.9
//! finite:0.2,0.3,0.5
//! ```

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// Tolerance on the total mass of a [`OffspringSpec::Finite`] weight vector.
pub const FINITE_MASS_TOL: f64 = 1e-12;

/// A parametric or finite-support offspring distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum OffspringSpec {
    /// `p_k = (1-p) p^k`, pgf `(1-p)/(1-ps)`.
    Geometric { p: f64 },
    /// `p_k = e^{-m} m^k / k!`, pgf `e^{m(s-1)}`.
    Poisson { m: f64 },
    /// `p_1 = 1-p`, `p_r = p`, pgf `(1-p)s + p s^r`.
    OneOrMany { p: f64, r: u32 },
    /// Binomial(n, p), pgf `(1-p+ps)^n`.
    Binomial { n: u32, p: f64 },
    /// `p_k = weights[k]`.
    Finite { weights: Vec<f64> },
}

fn open_unit(name: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: p,
            expected: "(0, 1)",
        })
    }
}

/// `C(n, k)` as a float, exact for the small arguments used here.
pub(crate) fn binomial_coeff(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * f64::from(n - i) / f64::from(i + 1);
    }
    c.round()
}

fn falling_factorial(k: u32, j: u32) -> f64 {
    (0..j).map(|i| f64::from(k - i)).product()
}

fn factorial(j: u32) -> f64 {
    (1..=j).map(f64::from).product()
}

/// `sum_k w_k C(k, j) s^{k-j}`, the j-th Taylor coefficient of a polynomial
/// pgf at `s`, evaluated by Horner's rule.
fn poly_taylor(terms: &[(u32, f64)], s: f64, j: u32) -> f64 {
    // terms are sorted by ascending power
    let mut acc = 0.0;
    let mut prev_power = None;
    for &(k, w) in terms.iter().rev() {
        if k < j {
            break;
        }
        if let Some(pp) = prev_power {
            acc *= s.powi((pp - k) as i32);
        }
        acc += w * binomial_coeff(k, j);
        prev_power = Some(k);
    }
    match prev_power {
        Some(pp) => acc * s.powi((pp - j) as i32),
        None => 0.0,
    }
}

/// `sum_k w_k k(k-1)...(k-j+1) s^{k-j}`.
fn poly_deriv(terms: &[(u32, f64)], s: f64, j: u32) -> f64 {
    terms
        .iter()
        .filter(|&&(k, _)| k >= j)
        .map(|&(k, w)| w * falling_factorial(k, j) * s.powi((k - j) as i32))
        .sum()
}

impl OffspringSpec {
    pub fn geometric(p: f64) -> Result<Self> {
        let spec = Self::Geometric { p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn poisson(m: f64) -> Result<Self> {
        let spec = Self::Poisson { m };
        spec.validate()?;
        Ok(spec)
    }

    pub fn one_or_many(p: f64, r: u32) -> Result<Self> {
        let spec = Self::OneOrMany { p, r };
        spec.validate()?;
        Ok(spec)
    }

    pub fn binomial(n: u32, p: f64) -> Result<Self> {
        let spec = Self::Binomial { n, p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn finite(weights: Vec<f64>) -> Result<Self> {
        let spec = Self::Finite { weights };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the parameter constraints of the family.
    ///
    /// Parametric probabilities must lie strictly inside `(0, 1)`. Finite
    /// weights must be nonnegative and sum to one within
    /// [`FINITE_MASS_TOL`]; point masses are accepted there because they
    /// describe the deterministic trees used as boundary cases.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Geometric { p } => open_unit("p", p),
            Self::Poisson { m } => {
                if m > 0.0 && m.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain {
                        name: "m",
                        value: m,
                        expected: "(0, inf)",
                    })
                }
            }
            Self::OneOrMany { p, r } => {
                open_unit("p", p)?;
                if r < 2 {
                    return Err(Error::InvalidSpec(format!(
                        "one-or-many needs r > 1, got r={r}"
                    )));
                }
                Ok(())
            }
            Self::Binomial { n, p } => {
                open_unit("p", p)?;
                if n == 0 {
                    return Err(Error::InvalidSpec("binomial needs n >= 1".into()));
                }
                Ok(())
            }
            Self::Finite { ref weights } => {
                if weights.is_empty() {
                    return Err(Error::InvalidSpec("finite weight vector is empty".into()));
                }
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                    return Err(Error::InvalidSpec(format!(
                        "negative or non-finite weight {w}"
                    )));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > FINITE_MASS_TOL {
                    return Err(Error::InvalidSpec(format!(
                        "finite weights sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Short family name as used in the text form.
    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Geometric { .. } => "geometric",
            Self::Poisson { .. } => "poisson",
            Self::OneOrMany { .. } => "one-or-many",
            Self::Binomial { .. } => "binomial",
            Self::Finite { .. } => "finite",
        }
    }

    fn poly_terms(&self) -> Option<Vec<(u32, f64)>> {
        match *self {
            Self::OneOrMany { p, r } => Some(vec![(1, 1.0 - p), (r, p)]),
            Self::Finite { ref weights } => Some(
                weights
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(k, w)| (k as u32, *w))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Probability of exactly `k` children.
    pub fn pmf(&self, k: u32) -> f64 {
        match *self {
            Self::Geometric { p } => (1.0 - p) * p.powi(k as i32),
            Self::Poisson { m } => {
                let log =
                    f64::from(k) * m.ln() - m - (1..=k).map(|i| f64::from(i).ln()).sum::<f64>();
                log.exp()
            }
            Self::OneOrMany { p, r } => {
                if k == 1 {
                    1.0 - p
                } else if k == r {
                    p
                } else {
                    0.0
                }
            }
            Self::Binomial { n, p } => {
                if k > n {
                    0.0
                } else {
                    binomial_coeff(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
                }
            }
            Self::Finite { ref weights } => weights.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// Whether `p_k > 0` for some `k > n`.
    pub fn has_mass_above(&self, n: usize) -> bool {
        match *self {
            Self::Geometric { .. } | Self::Poisson { .. } => true,
            Self::OneOrMany { r, .. } => r as usize > n,
            Self::Binomial { n: trials, .. } => trials as usize > n,
            Self::Finite { ref weights } => weights.iter().skip(n + 1).any(|w| *w > 0.0),
        }
    }

    /// The pgf `f(s)`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        check_unit("s", s)?;
        Ok(self.taylor_coeff_at(s, 0))
    }

    /// The j-th derivative `f^{(j)}(s)`; `j = 0` gives the pgf itself.
    pub fn pgf_deriv(&self, s: f64, j: u32) -> Result<f64> {
        check_unit("s", s)?;
        Ok(self.deriv_at(s, j))
    }

    /// The j-th Taylor coefficient `f^{(j)}(s) / j!` at `s`.
    ///
    /// This is the quantity the subtree generating function is assembled
    /// from; it avoids forming `j!` and `f^{(j)}` separately.
    pub fn taylor_coeff(&self, s: f64, j: u32) -> Result<f64> {
        check_unit("s", s)?;
        Ok(self.taylor_coeff_at(s, j))
    }

    /// Mean offspring number `f'(1)`.
    pub fn mean(&self) -> f64 {
        self.deriv_at(1.0, 1)
    }

    pub(crate) fn deriv_at(&self, s: f64, j: u32) -> f64 {
        match *self {
            Self::Geometric { p } => {
                (1.0 - p) * factorial(j) * p.powi(j as i32) / (1.0 - p * s).powi(j as i32 + 1)
            }
            Self::Poisson { m } => m.powi(j as i32) * (m * (s - 1.0)).exp(),
            Self::Binomial { n, p } => {
                if j > n {
                    0.0
                } else {
                    falling_factorial(n, j)
                        * p.powi(j as i32)
                        * (1.0 - p + p * s).powi((n - j) as i32)
                }
            }
            Self::OneOrMany { .. } | Self::Finite { .. } => {
                poly_deriv(&self.poly_terms().unwrap_or_default(), s, j)
            }
        }
    }

    pub(crate) fn taylor_coeff_at(&self, s: f64, j: u32) -> f64 {
        match *self {
            Self::Geometric { p } => {
                (1.0 - p) * p.powi(j as i32) / (1.0 - p * s).powi(j as i32 + 1)
            }
            Self::Poisson { m } => {
                let ratio: f64 = (1..=j).map(|i| m / f64::from(i)).product();
                ratio * (m * (s - 1.0)).exp()
            }
            Self::Binomial { n, p } => {
                if j > n {
                    0.0
                } else {
                    binomial_coeff(n, j) * p.powi(j as i32) * (1.0 - p + p * s).powi((n - j) as i32)
                }
            }
            Self::OneOrMany { p, r } => poly_taylor(&[(1, 1.0 - p), (r, p)], s, j),
            Self::Finite { .. } => poly_taylor(&self.poly_terms().unwrap_or_default(), s, j),
        }
    }

    /// Builds a reusable sampler for this law.
    pub fn sampler(&self) -> Result<OffspringSampler> {
        self.validate()?;
        let inner = match *self {
            Self::Geometric { p } => SamplerKind::Geometric(
                rand_distr::Geometric::new(1.0 - p)
                    .map_err(|e| Error::InvalidSpec(e.to_string()))?,
            ),
            Self::Poisson { m } => SamplerKind::Poisson(
                rand_distr::Poisson::new(m).map_err(|e| Error::InvalidSpec(e.to_string()))?,
            ),
            Self::OneOrMany { p, r } => SamplerKind::OneOrMany {
                many: Bernoulli::new(p).map_err(|e| Error::InvalidSpec(e.to_string()))?,
                r: r as usize,
            },
            Self::Binomial { n, p } => SamplerKind::Binomial(
                rand_distr::Binomial::new(u64::from(n), p)
                    .map_err(|e| Error::InvalidSpec(e.to_string()))?,
            ),
            Self::Finite { ref weights } => SamplerKind::Finite(
                WeightedIndex::new(weights).map_err(|e| Error::InvalidSpec(e.to_string()))?,
            ),
        };
        Ok(OffspringSampler { inner })
    }

    /// Draws one offspring count. Builds a sampler on every call; use
    /// [`OffspringSpec::sampler`] in loops.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        Ok(self.sampler()?.sample(rng))
    }
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Geometric(rand_distr::Geometric),
    Poisson(rand_distr::Poisson<f64>),
    OneOrMany { many: Bernoulli, r: usize },
    Binomial(rand_distr::Binomial),
    Finite(WeightedIndex<f64>),
}

/// Draws offspring counts from a validated [`OffspringSpec`].
#[derive(Debug, Clone)]
pub struct OffspringSampler {
    inner: SamplerKind,
}

impl OffspringSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.inner {
            SamplerKind::Geometric(d) => d.sample(rng) as usize,
            SamplerKind::Poisson(d) => d.sample(rng) as usize,
            SamplerKind::OneOrMany { many, r } => {
                if many.sample(rng) {
                    *r
                } else {
                    1
                }
            }
            SamplerKind::Binomial(d) => d.sample(rng) as usize,
            SamplerKind::Finite(d) => d.sample(rng),
        }
    }
}

impl fmt::Display for OffspringSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Geometric { p } => write!(f, "geometric:p={p}"),
            Self::Poisson { m } => write!(f, "poisson:m={m}"),
            Self::OneOrMany { p, r } => write!(f, "one-or-many:p={p},r={r}"),
            Self::Binomial { n, p } => write!(f, "binomial:n={n},p={p}"),
            Self::Finite { weights } => {
                f.write_str("finite:")?;
                for (i, w) in weights.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{w}")?;
                }
                Ok(())
            }
        }
    }
}

struct Params<'a> {
    input: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn parse(input: &'a str, body: &'a str) -> Result<Self> {
        let mut pairs = Vec::new();
        for item in body.split(',') {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| parse_err(input, format!("expected key=value, got {item:?}")))?;
            let k = k.trim();
            if pairs.iter().any(|(seen, _)| *seen == k) {
                return Err(parse_err(input, format!("duplicate key {k:?}")));
            }
            pairs.push((k, v.trim()));
        }
        Ok(Self { input, pairs })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let pos = self
            .pairs
            .iter()
            .position(|(k, _)| *k == key)
            .ok_or_else(|| parse_err(self.input, format!("missing key {key:?}")))?;
        let (_, v) = self.pairs.remove(pos);
        v.parse()
            .map_err(|_| parse_err(self.input, format!("bad value {v:?} for {key:?}")))
    }

    fn finish(self) -> Result<()> {
        match self.pairs.first() {
            Some((k, _)) => Err(parse_err(self.input, format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}

fn parse_err(input: &str, reason: String) -> Error {
    Error::Parse {
        input: input.to_string(),
        reason,
    }
}

impl FromStr for OffspringSpec {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let (family, body) = input
            .split_once(':')
            .ok_or_else(|| parse_err(input, "expected <family>:<parameters>".into()))?;
        let spec = match family.trim() {
            "finite" => {
                let weights = body
                    .split(',')
                    .map(|w| {
                        w.trim()
                            .parse::<f64>()
                            .map_err(|_| parse_err(input, format!("bad weight {w:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::Finite { weights }
            }
            name => {
                let mut params = Params::parse(input, body)?;
                let spec = match name {
                    "geometric" => Self::Geometric {
                        p: params.take("p")?,
                    },
                    "poisson" => Self::Poisson {
                        m: params.take("m")?,
                    },
                    "one-or-many" => Self::OneOrMany {
                        p: params.take("p")?,
                        r: params.take("r")?,
                    },
                    "binomial" => Self::Binomial {
                        n: params.take("n")?,
                        p: params.take("p")?,
                    },
                    other => return Err(parse_err(input, format!("unknown family {other:?}"))),
                };
                params.finish()?;
                spec
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}
