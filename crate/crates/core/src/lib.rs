//! Extinction and survival of complete N-ary subtrees in Galton-Watson trees.
//!
//! A complete N-ary subtree rooted at the ancestor is one in which every
//! vertex keeps at least `N` of its children. With offspring pgf `f`, the
//! probability `gamma_N` that no infinite such subtree exists is the
//! smallest root in `[0, 1]` of `s = g_N(s)`, where
//! `g_N(s) = sum_{j<N} (1-s)^j f^{(j)}(s)/j!`. This crate provides
//!
//! * [`offspring`]: offspring laws with exact pgf derivatives,
//! * [`subtree`]: `g_N` and its first two derivatives,
//! * [`solve`]: the smallest root and its criticality class,
//! * [`critical`]: critical parameters `m_N^c` of one-parameter families,
//! * [`survival`]: the conditional survival curve and its asymptotic laws,
//! * [`mc`]: a Monte Carlo tree simulator for cross-validation,
//! * [`validate`]: a reproduction suite for the reference families.

pub mod critical;
pub mod error;
pub mod mc;
pub mod offspring;
pub mod solve;
pub mod subtree;
pub mod survival;
pub mod validate;

pub use critical::{find_critical, one_or_many_closed_form, CriticalReport, Family};
pub use error::{Error, Result};
pub use mc::{estimate_gamma_nt, has_nary_subtree, McConfig, McEstimate, SubtreeOutcome};
pub use offspring::{OffspringSampler, OffspringSpec};
pub use solve::{classify, pemantle_bound, smallest_root, Criticality, RootReport, SolverSettings};
pub use subtree::SubtreeGF;
pub use survival::{fit_asymptote, iterate_survival, AsymptoteFit, FitModel, SurvivalCurve};
