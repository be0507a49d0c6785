//! Smallest fixed point of `g_N` and its criticality.
//!
//! The root is located by scanning `d(s) = g_N(s) - s` on a uniform grid.
//! `d(0) >= 0` always, so the first grid point where `d <= 0` brackets the
//! smallest crossing, which is then bisected. At a critical parameter the
//! curve only touches the diagonal and `d` never changes sign; grid local
//! minima are therefore refined by golden-section search followed by a
//! Newton step on `g_N'(s) = 1`, and a minimum below the tangency threshold
//! is accepted as a double root.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subtree::SubtreeGF;

/// Default absolute accuracy of the root.
pub const ROOT_TOL: f64 = 1e-12;
/// Default number of grid intervals for the initial scan.
pub const GRID_POINTS: usize = 4096;
/// A local minimum of `g_N(s) - s` at or below this value counts as tangency.
pub const TANGENCY_THRESHOLD: f64 = 1e-9;
/// Half-width of the band `|a_N - 1| <= tau` classified as critical.
pub const CRITICAL_BAND: f64 = 1e-6;

// |d| below this is indistinguishable from zero in double precision.
const ROUNDING_FLOOR: f64 = 1e-14;
// Local minima above this are not refined.
const DIP_SCREEN: f64 = 1e-2;
// Roots with |g'(r) - 1| below this are checked for being double roots.
const NEAR_TANGENT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    /// `gamma_N = 1`: no infinite complete N-ary subtree almost surely.
    Degenerate,
    /// `a_N < 1`.
    Subcritical,
    /// `a_N = 1`.
    Critical,
}

impl std::fmt::Display for Criticality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Degenerate => "degenerate",
            Self::Subcritical => "subcritical",
            Self::Critical => "critical",
        })
    }
}

/// The smallest root `gamma_N` of `s = g_N(s)` with `a_N = g_N'(gamma_N)`
/// and `b_N = g_N''(gamma_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub class: Criticality,
    /// Interval known to contain the root.
    pub bracket: [f64; 2],
    pub tol: f64,
    /// `gamma` is 0 or 1, outside the range where the asymptotic laws hold.
    pub boundary: bool,
    /// `g_N(gamma) - gamma`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub grid_points: usize,
    pub tangency_threshold: f64,
    pub critical_band: f64,
    pub max_bisections: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            grid_points: GRID_POINTS,
            tangency_threshold: TANGENCY_THRESHOLD,
            critical_band: CRITICAL_BAND,
            max_bisections: 200,
        }
    }
}

/// Smallest root of `s = g_N(s)` in `[0, 1]` with default settings.
pub fn smallest_root(gf: &SubtreeGF, tol: f64) -> Result<RootReport> {
    smallest_root_with(gf, tol, &SolverSettings::default())
}

pub fn smallest_root_with(
    gf: &SubtreeGF,
    tol: f64,
    settings: &SolverSettings,
) -> Result<RootReport> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidTolerance(tol));
    }
    if settings.grid_points < 2 {
        return Err(Error::InvalidConfig(
            "grid needs at least 2 intervals".into(),
        ));
    }
    let d = |s: f64| gf.g_at(s) - s;
    let grid = settings.grid_points;
    let h = 1.0 / grid as f64;
    let at = |k: usize| if k >= grid { 1.0 } else { k as f64 * h };

    let (gamma, bracket) = 'found: {
        let mut prev = d(0.0);
        if prev <= 0.0 {
            break 'found (0.0, [0.0, 0.0]);
        }
        let mut cur = d(at(1));
        for k in 1..grid {
            if cur <= 0.0 {
                if cur == 0.0 {
                    break 'found (at(k), [at(k), at(k)]);
                }
                let (lo, hi) = bisect(&d, at(k - 1), at(k), tol, settings.max_bisections)?;
                let r = 0.5 * (lo + hi);
                if (gf.g_prime_at(r) - 1.0).abs() <= NEAR_TANGENT {
                    let star = tangent_point(gf, r, at(k - 1), at(k + 1));
                    if d(star).abs() <= ROUNDING_FLOOR {
                        break 'found (star, [lo.min(star), hi.max(star)]);
                    }
                }
                break 'found (newton_root(gf, r, lo, hi), [lo, hi]);
            }
            let next = if k + 1 >= grid { 0.0 } else { d(at(k + 1)) };
            if cur <= prev && cur <= next && cur <= DIP_SCREEN {
                let (lo, hi) = (at(k - 1), at(k + 1));
                let star = tangent_point(gf, golden_min(&d, lo, hi), lo, hi);
                let dmin = d(star);
                if dmin < -ROUNDING_FLOOR {
                    let (blo, bhi) = bisect(&d, lo, star, tol, settings.max_bisections)?;
                    break 'found (newton_root(gf, 0.5 * (blo + bhi), blo, bhi), [blo, bhi]);
                }
                if dmin <= settings.tangency_threshold {
                    break 'found (star, [lo, hi]);
                }
            }
            prev = cur;
            cur = next;
        }
        (1.0, [at(grid - 1), 1.0])
    };

    let mut report = classify(gf, gamma, settings.critical_band)?;
    report.bracket = bracket;
    report.tol = tol;
    Ok(report)
}

fn bisect(
    d: &impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    for _ in 0..max_iter {
        if hi - lo <= tol {
            return Ok((lo, hi));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // floating-point resolution reached
            return Ok((lo, hi));
        }
        if d(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence { lo, hi })
}

fn golden_min(d: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (d(x1), d(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = d(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = d(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Newton iteration on `g_N(s) = s` from a bisected simple root; keeps the
/// bisection midpoint unless a step lowers the residual inside `[lo, hi]`.
fn newton_root(gf: &SubtreeGF, mut s: f64, lo: f64, hi: f64) -> f64 {
    let mut res = (gf.g_at(s) - s).abs();
    for _ in 0..8 {
        let slope = gf.g_prime_at(s) - 1.0;
        if slope == 0.0 || res == 0.0 {
            break;
        }
        let next = s - (gf.g_at(s) - s) / slope;
        if !(lo..=hi).contains(&next) {
            break;
        }
        let next_res = (gf.g_at(next) - next).abs();
        if next_res >= res {
            break;
        }
        s = next;
        res = next_res;
    }
    s
}

/// Newton iteration on `g_N'(s) = 1` from `s`, kept inside `[lo, hi]`.
fn tangent_point(gf: &SubtreeGF, mut s: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..50 {
        let curvature = gf.g_double_prime_at(s);
        if curvature.is_nan() || curvature <= 0.0 {
            break;
        }
        let next = (s - (gf.g_prime_at(s) - 1.0) / curvature).clamp(lo, hi);
        let step = (next - s).abs();
        s = next;
        if step <= 4.0 * f64::EPSILON * s.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    s
}

/// Evaluates `a_N`, `b_N` at a known root and assigns the criticality class.
///
/// `gamma = 1` is degenerate except for `N = 1` with `f'(1) = 1`, the
/// classical critical Galton-Watson process. Roots at 0 or 1 are flagged as
/// boundary reports; the `a_N <= 1` consistency check applies only to
/// interior roots.
pub fn classify(gf: &SubtreeGF, gamma: f64, tau: f64) -> Result<RootReport> {
    crate::error::check_unit("gamma", gamma)?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidTolerance(tau));
    }
    let a = gf.g_prime_at(gamma);
    let b = gf.g_double_prime_at(gamma);
    let boundary = gamma == 0.0 || gamma == 1.0;
    let class = if gamma == 1.0 {
        if gf.arity() == 1 && (a - 1.0).abs() <= tau {
            Criticality::Critical
        } else {
            Criticality::Degenerate
        }
    } else if (a - 1.0).abs() <= tau {
        Criticality::Critical
    } else if a < 1.0 - tau || boundary {
        Criticality::Subcritical
    } else {
        return Err(Error::Inconsistent(format!(
            "a_N = {a} exceeds 1 at gamma = {gamma}"
        )));
    };
    if class == Criticality::Critical && (b.is_nan() || b <= 0.0) {
        return Err(Error::Inconsistent(format!(
            "critical root at gamma = {gamma} has b_N = {b} <= 0"
        )));
    }
    Ok(RootReport {
        gamma,
        a,
        b,
        class,
        bracket: [gamma, gamma],
        tol: 0.0,
        boundary,
        residual: gf.g_at(gamma) - gamma,
    })
}

/// `g_N(s0) <= s0`, which implies `gamma_N <= s0`.
pub fn pemantle_bound(gf: &SubtreeGF, s0: f64) -> Result<bool> {
    if !(s0 > 0.0 && s0 < 1.0) {
        return Err(Error::Domain {
            name: "s0",
            value: s0,
            expected: "(0, 1)",
        });
    }
    Ok(gf.g_at(s0) <= s0)
}
