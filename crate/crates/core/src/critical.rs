//! Critical parameters of one-parameter offspring families.
//!
//! For the families below there is a threshold on the parameter (and hence
//! on the mean `f'(1)`) below which `gamma_N = 1` and above which
//! `gamma_N < 1`. At the threshold `y = g_N(s)` touches the diagonal, so the
//! threshold solves `{ g_N(s) = s, g_N'(s) = 1 }` jointly in `(s, param)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::OffspringSpec;
use crate::solve::{smallest_root, Criticality, ROOT_TOL};
use crate::subtree::SubtreeGF;

const MAX_BISECTIONS: usize = 40;
const MAX_NEWTON: usize = 100;
const NEWTON_RESIDUAL: f64 = 1e-12;
const DAMPING: f64 = 0.5;

/// A one-parameter offspring family; the free parameter is named by
/// [`Family::param_name`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Free parameter `p`.
    Geometric,
    /// Free parameter `m`.
    Poisson,
    /// Free parameter `p`, fixed `r`.
    OneOrMany { r: u32 },
    /// Free parameter `p`, fixed `n`.
    Binomial { n: u32 },
}

impl Family {
    pub fn param_name(&self) -> &'static str {
        match self {
            Self::Poisson => "m",
            _ => "p",
        }
    }

    pub fn spec(&self, param: f64) -> Result<OffspringSpec> {
        match *self {
            Self::Geometric => OffspringSpec::geometric(param),
            Self::Poisson => OffspringSpec::poisson(param),
            Self::OneOrMany { r } => OffspringSpec::one_or_many(param, r),
            Self::Binomial { n } => OffspringSpec::binomial(n, param),
        }
    }

    /// Offspring mean as an exact function of the parameter.
    pub fn mean(&self, param: f64) -> f64 {
        match *self {
            Self::Geometric => param / (1.0 - param),
            Self::Poisson => param,
            Self::OneOrMany { r } => (1.0 - param) + f64::from(r) * param,
            Self::Binomial { n } => f64::from(n) * param,
        }
    }

    /// A parameter range wide enough to contain the threshold for small `N`.
    pub fn default_range(&self) -> [f64; 2] {
        match self {
            Self::Poisson => [0.1, 100.0],
            _ => [0.01, 0.999],
        }
    }

    fn in_domain(&self, param: f64) -> bool {
        match self {
            Self::Poisson => param > 0.0 && param.is_finite(),
            _ => param > 0.0 && param < 1.0,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Geometric => f.write_str("geometric"),
            Self::Poisson => f.write_str("poisson"),
            Self::OneOrMany { r } => write!(f, "one-or-many(r={r})"),
            Self::Binomial { n } => write!(f, "binomial(n={n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub param_name: String,
    pub param_critical: f64,
    /// `m_N^c`.
    pub mean_critical: f64,
    /// `gamma_N^c`.
    pub gamma_critical: f64,
    pub a_at_critical: f64,
    pub b_at_critical: f64,
    pub tol: f64,
    /// Whether the Newton polish on the tangency system converged.
    pub polished: bool,
}

fn non_degenerate(family: Family, arity: usize, param: f64) -> Result<(bool, f64)> {
    let gf = SubtreeGF::new(family.spec(param)?, arity)?;
    let root = smallest_root(&gf, ROOT_TOL)?;
    Ok((root.class != Criticality::Degenerate, root.gamma))
}

/// Locates the parameter at which `gamma_N` drops below one.
///
/// The predicate "`gamma_N < 1`" is bisected over `range` and the bracket
/// end on the non-degenerate side seeds a damped Newton solve of the
/// tangency system. The predicate is assumed monotone over `range`; only the
/// endpoints are checked.
pub fn find_critical(
    family: Family,
    arity: usize,
    range: [f64; 2],
    tol: f64,
) -> Result<CriticalReport> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidTolerance(tol));
    }
    let [lo, hi] = range;
    for end in [lo, hi] {
        if !family.in_domain(end) {
            return Err(Error::Domain {
                name: "param",
                value: end,
                expected: "the family's parameter domain",
            });
        }
    }
    if lo >= hi {
        return Err(Error::InvalidConfig(format!(
            "empty parameter range [{lo}, {hi}]"
        )));
    }

    let (at_lo, _) = non_degenerate(family, arity, lo)?;
    let (at_hi, gamma_hi) = non_degenerate(family, arity, hi)?;
    if at_lo == at_hi {
        return Err(Error::NoSignChange(at_lo));
    }
    // `live` is the non-degenerate end, `dead` the degenerate one.
    let (mut dead, mut live, mut live_gamma) = if at_hi {
        (lo, hi, gamma_hi)
    } else {
        (hi, lo, 0.0)
    };
    if !at_hi {
        live_gamma = non_degenerate(family, arity, live)?.1;
    }
    for _ in 0..MAX_BISECTIONS {
        if (live - dead).abs() <= tol {
            break;
        }
        let mid = 0.5 * (live + dead);
        let (ok, gamma) = non_degenerate(family, arity, mid)?;
        if ok {
            live = mid;
            live_gamma = gamma;
        } else {
            dead = mid;
        }
    }

    let (param, gamma, polished) = match polish(family, arity, live_gamma, live) {
        Some((s, theta)) if theta >= lo.min(hi) - tol && theta <= lo.max(hi) + tol => {
            (theta, s, true)
        }
        _ => (live, live_gamma, false),
    };

    let gf = SubtreeGF::new(family.spec(param)?, arity)?;
    let a = gf.g_prime_at(gamma);
    let b = gf.g_double_prime_at(gamma);
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Inconsistent(format!(
            "critical gamma {gamma} is not inside (0, 1)"
        )));
    }
    if (a - 1.0).abs() > 1e-4 {
        return Err(Error::Inconsistent(format!(
            "no tangency at the threshold: a_N = {a}"
        )));
    }
    Ok(CriticalReport {
        param_name: family.param_name().to_string(),
        param_critical: param,
        mean_critical: family.mean(param),
        gamma_critical: gamma,
        a_at_critical: a,
        b_at_critical: b,
        tol,
        polished,
    })
}

fn tangency_residual(family: Family, arity: usize, s: f64, theta: f64) -> Option<[f64; 2]> {
    if !(0.0..=1.0).contains(&s) || !family.in_domain(theta) {
        return None;
    }
    let gf = SubtreeGF::new(family.spec(theta).ok()?, arity).ok()?;
    Some([gf.g_at(s) - s, gf.g_prime_at(s) - 1.0])
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Damped Newton on `F(s, theta) = (g(s) - s, g'(s) - 1)`. The `s` column of
/// the Jacobian is analytic; the parameter column is a central difference.
fn polish(family: Family, arity: usize, s0: f64, theta0: f64) -> Option<(f64, f64)> {
    let (mut s, mut theta) = (s0, theta0);
    let mut res = tangency_residual(family, arity, s, theta)?;
    for _ in 0..MAX_NEWTON {
        if norm(res) <= NEWTON_RESIDUAL {
            return Some((s, theta));
        }
        let gf = SubtreeGF::new(family.spec(theta).ok()?, arity).ok()?;
        let ds = [gf.g_prime_at(s) - 1.0, gf.g_double_prime_at(s)];
        let h = 1e-6 * theta.abs().max(1e-3);
        let plus = tangency_residual(family, arity, s, theta + h)?;
        let minus = tangency_residual(family, arity, s, theta - h)?;
        let dtheta = [
            (plus[0] - minus[0]) / (2.0 * h),
            (plus[1] - minus[1]) / (2.0 * h),
        ];

        let det = ds[0] * dtheta[1] - dtheta[0] * ds[1];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let step_s = (res[0] * dtheta[1] - dtheta[0] * res[1]) / det;
        let step_theta = (ds[0] * res[1] - res[0] * ds[1]) / det;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let (ns, nt) = (s - scale * step_s, theta - scale * step_theta);
            if let Some(r) = tangency_residual(family, arity, ns, nt) {
                if norm(r) < norm(res) || norm(r) <= NEWTON_RESIDUAL {
                    accepted = Some((ns, nt, r));
                    break;
                }
            }
            scale *= DAMPING;
        }
        let (ns, nt, r) = accepted?;
        s = ns;
        theta = nt;
        res = r;
    }
    (norm(res) <= NEWTON_RESIDUAL).then_some((s, theta))
}

/// Threshold `(p_N^c, gamma_N^c)` of the one-or-many family with `r = N + 1`.
pub fn one_or_many_closed_form(arity: usize) -> Result<(f64, f64)> {
    if arity < 2 {
        return Err(Error::Domain {
            name: "N",
            value: arity as f64,
            expected: "N >= 2",
        });
    }
    let n = arity as f64;
    let p = (1.0 - 1.0 / n) * (1.0 - 1.0 / (n * n)).powi(-(arity as i32));
    Ok((p, 1.0 / (n * n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let (p, g) = one_or_many_closed_form(2).unwrap();
        assert!((p - 8.0 / 9.0).abs() < 1e-15);
        assert!((g - 0.25).abs() < 1e-15);
        let (p3, g3) = one_or_many_closed_form(3).unwrap();
        assert!((p3 - 243.0 / 256.0).abs() < 1e-15);
        assert!((g3 - 1.0 / 9.0).abs() < 1e-15);
        assert!(one_or_many_closed_form(1).is_err());
    }

    #[test]
    fn geometric_threshold() {
        let rep = find_critical(Family::Geometric, 2, [0.5, 0.95], 1e-12).unwrap();
        assert!(rep.polished);
        assert!((rep.param_critical - 0.8).abs() < 1e-9, "{rep:?}");
        assert!((rep.mean_critical - 4.0).abs() < 1e-8);
        assert!((rep.gamma_critical - 0.75).abs() < 1e-9);
        assert!((rep.a_at_critical - 1.0).abs() < 1e-10);
        assert!((rep.b_at_critical - 2.0).abs() < 1e-8);
    }

    #[test]
    fn one_or_many_matches_closed_form() {
        for n in 2..=4usize {
            let (p, g) = one_or_many_closed_form(n).unwrap();
            let rep = find_critical(Family::OneOrMany { r: n as u32 + 1 }, n, [0.5, 0.99], 1e-12)
                .unwrap();
            assert!((rep.param_critical - p).abs() < 1e-6, "N={n}: {rep:?}");
            assert!((rep.gamma_critical - g).abs() < 1e-6, "N={n}: {rep:?}");
        }
    }

    #[test]
    fn threshold_separates_classes() {
        let rep = find_critical(Family::Poisson, 2, [2.0, 5.0], 1e-12).unwrap();
        let eps = 1e-3;
        let (above, _) = non_degenerate(Family::Poisson, 2, rep.param_critical + eps).unwrap();
        let (below, _) = non_degenerate(Family::Poisson, 2, rep.param_critical - eps).unwrap();
        assert!(above);
        assert!(!below);
    }

    #[test]
    fn same_predicate_at_both_ends() {
        assert_eq!(
            find_critical(Family::Geometric, 2, [0.85, 0.95], 1e-12),
            Err(Error::NoSignChange(true))
        );
        assert_eq!(
            find_critical(Family::Geometric, 2, [0.2, 0.5], 1e-12),
            Err(Error::NoSignChange(false))
        );
    }

    #[test]
    fn family_means() {
        assert!((Family::Geometric.mean(0.8) - 4.0).abs() < 1e-14);
        assert_eq!(Family::Poisson.mean(3.5), 3.5);
        assert!((Family::OneOrMany { r: 3 }.mean(8.0 / 9.0) - 25.0 / 9.0).abs() < 1e-14);
        assert!((Family::Binomial { n: 9 }.mean(0.5) - 4.5).abs() < 1e-14);
    }
}
