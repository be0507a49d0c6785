//! Conditional survival of height-t complete N-ary subtrees.
//!
//! `gamma_{N,t} = P(no complete N-ary subtree of height t)` obeys
//! `gamma_{N,0} = 0`, `gamma_{N,t} = g_N(gamma_{N,t-1})`, and increases to
//! `gamma_N`. Given that no infinite subtree exists, a height-t subtree
//! still exists with probability `(gamma_N - gamma_{N,t}) / gamma_N`.
//!
//! That probability decays geometrically, `d_N a_N^t + O(a_N^{2t})`, when
//! `a_N < 1`, and like `2 / (gamma_N b_N t)` when `a_N = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solve::{Criticality, RootReport};
use crate::subtree::SubtreeGF;

/// Default horizon for survival curves.
pub const DEFAULT_T_MAX: usize = 10_000;
/// Iteration stops once `gamma_N - gamma_{N,t}` falls below this.
pub const GAP_FLOOR: f64 = 1e-14;
/// Smallest gap admitted to the geometric fit window.
pub const FIT_GAP_FLOOR: f64 = 1e-9;
/// Maximal number of points in the geometric fit window.
pub const GEOMETRIC_WINDOW: usize = 20;
// Second-order check uses points with a^t above this.
const SECOND_ORDER_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub arity: usize,
    /// Requested horizon; `gamma_seq` is shorter when iteration stopped at
    /// the rounding floor.
    pub t_max: usize,
    pub gamma_seq: Vec<f64>,
    pub cond_survival: Vec<f64>,
    pub gamma: f64,
    pub class: Criticality,
}

impl SurvivalCurve {
    /// Last computed time index.
    pub fn t_end(&self) -> usize {
        self.gamma_seq.len() - 1
    }

    /// `gamma_N - gamma_{N,t}`.
    pub fn gap(&self, t: usize) -> f64 {
        self.gamma - self.gamma_seq[t]
    }
}

/// Iterates `g_N` from zero for up to `t_max` steps.
pub fn iterate_survival(gf: &SubtreeGF, root: &RootReport, t_max: usize) -> Result<SurvivalCurve> {
    if t_max == 0 {
        return Err(Error::InvalidConfig("t_max must be at least 1".into()));
    }
    if root.class == Criticality::Degenerate || root.gamma <= 0.0 {
        return Err(Error::DegenerateRoot(format!(
            "gamma = {}, class = {}",
            root.gamma, root.class
        )));
    }
    let gamma = root.gamma;
    let mut gamma_seq = Vec::with_capacity(t_max + 1);
    let mut cond_survival = Vec::with_capacity(t_max + 1);
    let mut x = 0.0;
    gamma_seq.push(x);
    cond_survival.push(1.0);
    for _ in 0..t_max {
        x = gf.g_at(x);
        gamma_seq.push(x);
        cond_survival.push(((gamma - x) / gamma).clamp(0.0, 1.0));
        if gamma - x < GAP_FLOOR {
            break;
        }
    }
    Ok(SurvivalCurve {
        arity: gf.arity(),
        t_max,
        gamma_seq,
        cond_survival,
        gamma,
        class: root.class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum FitModel {
    /// `cond_survival[t] ~ d a^t`.
    Geometric {
        /// `d_N`, from the regression intercept.
        d: f64,
        /// `a_N` from the root report.
        a: f64,
        /// `exp(slope)` of the log-linear regression.
        fitted_rate: f64,
        /// `cond_survival[t] / cond_survival[t-1]` at the window end.
        tail_ratio: f64,
        /// Smallest `C` with `|cond_survival[t] - d a^t| <= C a^{2t}` on the
        /// second-order range, using `d` matched at the window end.
        second_order_constant: f64,
        /// Max over min of `|residual| / a^{2t}` on that range.
        second_order_spread: f64,
    },
    /// `1 / (gamma - gamma_{N,t}) ~ slope * t`.
    CriticalReciprocal {
        /// Mean increment of `1 / (gamma - gamma_{N,t})` over the window,
        /// an estimate of `b_N / 2`.
        slope: f64,
        /// `t * cond_survival[t]` at the window end.
        tail_product: f64,
        /// `2 / (gamma_N b_N)`.
        predicted_constant: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteFit {
    pub model: FitModel,
    /// `d_N` for the geometric law; the limit of `t * cond_survival[t]`
    /// implied by the reciprocal slope for the critical law.
    pub fitted_constant: f64,
    pub fit_window: [usize; 2],
    /// Geometric: worst relative deviation from the fitted line on the
    /// window. Critical: worst relative deviation of the reciprocal
    /// increments from `b_N / 2`.
    pub max_rel_residual: f64,
}

impl AsymptoteFit {
    /// The asymptotic law's value at `t`, if defined.
    pub fn predict(&self, t: usize, root: &RootReport) -> Option<f64> {
        match self.model {
            FitModel::Geometric { d, a, .. } => Some(d * a.powi(t as i32)),
            FitModel::CriticalReciprocal {
                predicted_constant, ..
            } => (t > 0)
                .then(|| predicted_constant / t as f64)
                .filter(|_| root.b > 0.0),
        }
    }
}

/// Fits the asymptotic law matching `curve.class`.
pub fn fit_asymptote(curve: &SurvivalCurve, root: &RootReport) -> Result<AsymptoteFit> {
    if curve.class != root.class {
        return Err(Error::ClassMismatch(format!(
            "curve is {} but root is {}",
            curve.class, root.class
        )));
    }
    match curve.class {
        Criticality::Subcritical => fit_geometric(curve, root),
        Criticality::Critical => fit_reciprocal(curve, root),
        Criticality::Degenerate => Err(Error::ClassMismatch(curve.class.to_string())),
    }
}

fn fit_geometric(curve: &SurvivalCurve, root: &RootReport) -> Result<AsymptoteFit> {
    let a = root.a;
    let t_hi = (1..=curve.t_end())
        .rev()
        .find(|&t| curve.gap(t) > FIT_GAP_FLOOR)
        .ok_or_else(|| Error::WindowTooSmall("no point above the gap floor".into()))?;
    let t_lo = t_hi
        .saturating_sub(GEOMETRIC_WINDOW - 1)
        .max(t_hi.div_ceil(2))
        .max(1);
    if t_hi < t_lo + 2 {
        return Err(Error::WindowTooSmall(format!("window [{t_lo}, {t_hi}]")));
    }

    // least squares of ln(cond) on t
    let pts: Vec<(f64, f64)> = (t_lo..=t_hi)
        .map(|t| (t as f64, curve.cond_survival[t].ln()))
        .collect();
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let d = intercept.exp();
    let fitted_rate = slope.exp();

    let max_rel_residual = (t_lo..=t_hi)
        .map(|t| {
            let c = curve.cond_survival[t];
            ((c - d * fitted_rate.powi(t as i32)) / c).abs()
        })
        .fold(0.0, f64::max);
    let tail_ratio = curve.cond_survival[t_hi] / curve.cond_survival[t_hi - 1];

    let d_tail = curve.cond_survival[t_hi] / a.powi(t_hi as i32);
    let ratios: Vec<f64> = (1..t_hi)
        .take_while(|&t| a.powi(t as i32) >= SECOND_ORDER_FLOOR)
        .map(|t| {
            let at = a.powi(t as i32);
            (curve.cond_survival[t] - d_tail * at).abs() / (at * at)
        })
        .collect();
    let (second_order_constant, second_order_spread) = if ratios.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        (max, max / min)
    };

    Ok(AsymptoteFit {
        model: FitModel::Geometric {
            d,
            a,
            fitted_rate,
            tail_ratio,
            second_order_constant,
            second_order_spread,
        },
        fitted_constant: d,
        fit_window: [t_lo, t_hi],
        max_rel_residual,
    })
}

fn fit_reciprocal(curve: &SurvivalCurve, root: &RootReport) -> Result<AsymptoteFit> {
    let t_hi = curve.t_end();
    let t_lo = t_hi / 2;
    if t_lo < 1 || t_hi < t_lo + 2 {
        return Err(Error::WindowTooSmall(format!("window [{t_lo}, {t_hi}]")));
    }
    let recip = |t: usize| 1.0 / curve.gap(t);
    let slope = (recip(t_hi) - recip(t_lo)) / (t_hi - t_lo) as f64;
    let half_b = 0.5 * root.b;
    let max_rel_residual = (t_lo + 1..=t_hi)
        .map(|t| ((recip(t) - recip(t - 1)) / half_b - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(AsymptoteFit {
        model: FitModel::CriticalReciprocal {
            slope,
            tail_product: t_hi as f64 * curve.cond_survival[t_hi],
            predicted_constant: 2.0 / (curve.gamma * root.b),
        },
        fitted_constant: 1.0 / (curve.gamma * slope),
        fit_window: [t_lo, t_hi],
        max_rel_residual,
    })
}
