//! Monte Carlo estimation of `gamma_{N,t}` on simulated family trees.
//!
//! A vertex roots a complete N-ary subtree of height `t` iff at least `N`
//! of its children root one of height `t - 1`; every vertex qualifies for
//! height 0. Trees are grown lazily during a depth-first search that stops
//! as soon as the answer at a vertex is known, so the search rarely touches
//! more than a thin slice of a supercritical tree.
//!
//! Trial `i` draws from its own ChaCha8 stream selected by `(seed, i)`, so
//! estimates do not depend on how trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::{OffspringSampler, OffspringSpec};

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubtreeOutcome {
    Present,
    Absent,
    BudgetExceeded,
}

/// Read access to a rooted tree whose offspring counts may be produced on
/// demand. `offspring` returns `None` once the source refuses to produce
/// more vertices.
pub trait FamilyTree {
    type Node: Copy;
    fn root(&self) -> Self::Node;
    fn offspring(&mut self, v: Self::Node) -> Option<usize>;
    fn child(&self, v: Self::Node, i: usize) -> Self::Node;
}

/// A tree sampled on the fly; vertices are anonymous because each is
/// visited at most once.
pub struct LazyTree<'a, R> {
    sampler: &'a OffspringSampler,
    rng: &'a mut R,
    budget: u64,
}

impl<'a, R: Rng> LazyTree<'a, R> {
    pub fn new(sampler: &'a OffspringSampler, rng: &'a mut R, node_budget: u64) -> Self {
        Self {
            sampler,
            rng,
            budget: node_budget,
        }
    }
}

impl<R: Rng> FamilyTree for LazyTree<'_, R> {
    type Node = ();

    fn root(&self) {}

    fn offspring(&mut self, _: ()) -> Option<usize> {
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        Some(self.sampler.sample(self.rng))
    }

    fn child(&self, _: (), _: usize) {}
}

/// A fully generated tree, truncated at a fixed depth.
#[derive(Debug, Clone)]
pub struct MaterializedTree {
    children: Vec<Vec<usize>>,
}

impl MaterializedTree {
    /// Generates every vertex down to `depth - 1` (their offspring counts
    /// included) in breadth-first order. Returns `None` if more than
    /// `max_nodes` vertices would be needed.
    pub fn grow<R: Rng>(
        sampler: &OffspringSampler,
        rng: &mut R,
        depth: usize,
        max_nodes: usize,
    ) -> Option<Self> {
        let mut children: Vec<Vec<usize>> = vec![Vec::new()];
        let mut level = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::new();
            for &v in &level {
                let k = sampler.sample(rng);
                if children.len() + k > max_nodes {
                    return None;
                }
                let first = children.len();
                children.extend(std::iter::repeat_with(Vec::new).take(k));
                children[v] = (first..first + k).collect();
                next.extend(first..first + k);
            }
            level = next;
        }
        Some(Self { children })
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }
}

impl FamilyTree for MaterializedTree {
    type Node = usize;

    fn root(&self) -> usize {
        0
    }

    fn offspring(&mut self, v: usize) -> Option<usize> {
        Some(self.children[v].len())
    }

    fn child(&self, v: usize, i: usize) -> usize {
        self.children[v][i]
    }
}

/// Whether `v` roots a complete `arity`-ary subtree of height `t`, with
/// two-sided early exit. `None` when the tree source ran out of budget.
pub fn decide<T: FamilyTree>(tree: &mut T, v: T::Node, arity: usize, t: usize) -> Option<bool> {
    if t == 0 {
        return Some(true);
    }
    let k = tree.offspring(v)?;
    if k < arity {
        return Some(false);
    }
    let allowed_failures = k - arity;
    let (mut hits, mut misses) = (0, 0);
    for i in 0..k {
        let c = tree.child(v, i);
        if decide(tree, c, arity, t - 1)? {
            hits += 1;
            if hits == arity {
                return Some(true);
            }
        } else {
            misses += 1;
            if misses > allowed_failures {
                return Some(false);
            }
        }
    }
    Some(false)
}

/// Reference evaluator without early exit: every child subtree is decided.
pub fn decide_exhaustive<T: FamilyTree>(
    tree: &mut T,
    v: T::Node,
    arity: usize,
    t: usize,
) -> Option<bool> {
    if t == 0 {
        return Some(true);
    }
    let k = tree.offspring(v)?;
    let mut hits = 0;
    for i in 0..k {
        let c = tree.child(v, i);
        if decide_exhaustive(tree, c, arity, t - 1)? {
            hits += 1;
        }
    }
    Some(hits >= arity)
}

/// Grows one tree lazily from `rng` and decides whether its root carries a
/// complete `arity`-ary subtree of height `t`.
pub fn has_nary_subtree<R: Rng>(
    sampler: &OffspringSampler,
    arity: usize,
    t: usize,
    rng: &mut R,
    node_budget: u64,
) -> SubtreeOutcome {
    let mut tree = LazyTree::new(sampler, rng, node_budget);
    match decide(&mut tree, (), arity, t) {
        Some(true) => SubtreeOutcome::Present,
        Some(false) => SubtreeOutcome::Absent,
        None => SubtreeOutcome::BudgetExceeded,
    }
}

/// The random stream of trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub spec: OffspringSpec,
    pub arity: usize,
    /// Target height.
    pub t: usize,
    pub n_trials: u64,
    pub seed: u64,
    /// Per-trial cap on sampled offspring counts.
    pub node_budget: u64,
}

impl McConfig {
    pub fn new(spec: OffspringSpec, arity: usize, t: usize, n_trials: u64, seed: u64) -> Self {
        Self {
            spec,
            arity,
            t,
            n_trials,
            seed,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.arity == 0 {
            return Err(Error::InvalidConfig("arity N must be at least 1".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
        }
        if self.node_budget == 0 {
            return Err(Error::InvalidConfig(
                "node_budget must be at least 1".into(),
            ));
        }
        self.spec.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Fraction of completed trials without the subtree.
    pub p_hat: f64,
    /// Completed trials, i.e. those that stayed within the node budget.
    pub n_trials: u64,
    pub half_width_95: f64,
    pub budget_exhausted_count: u64,
}

/// Estimates `gamma_{N,t}` from `cfg.n_trials` independent trees.
///
/// Trials that exhaust the node budget are excluded from the estimate and
/// counted; more than 1% of them is an error.
pub fn estimate_gamma_nt(cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    let sampler = cfg.spec.sampler()?;
    let (absent, exhausted) = (0..cfg.n_trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i);
            match has_nary_subtree(&sampler, cfg.arity, cfg.t, &mut rng, cfg.node_budget) {
                SubtreeOutcome::Present => (0u64, 0u64),
                SubtreeOutcome::Absent => (1, 0),
                SubtreeOutcome::BudgetExceeded => (0, 1),
            }
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));

    if exhausted * 100 > cfg.n_trials {
        return Err(Error::BudgetExhausted {
            exhausted,
            trials: cfg.n_trials,
        });
    }
    let completed = cfg.n_trials - exhausted;
    let p_hat = absent as f64 / completed as f64;
    Ok(McEstimate {
        p_hat,
        n_trials: completed,
        half_width_95: 1.96 * (p_hat * (1.0 - p_hat) / completed as f64).sqrt(),
        budget_exhausted_count: exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn height_zero_always_present() {
        let s = OffspringSpec::finite(vec![1.0]).unwrap().sampler().unwrap();
        let mut rng = trial_rng(1, 0);
        assert_eq!(
            has_nary_subtree(&s, 3, 0, &mut rng, 1),
            SubtreeOutcome::Present
        );
        let est = estimate_gamma_nt(&McConfig::new(
            OffspringSpec::geometric(0.7).unwrap(),
            2,
            0,
            1000,
            3,
        ))
        .unwrap();
        assert_eq!(est.p_hat, 0.0);
        assert_eq!(est.half_width_95, 0.0);
    }

    #[test]
    fn childless_root_never_has_subtree() {
        let s = OffspringSpec::finite(vec![1.0]).unwrap().sampler().unwrap();
        for i in 0..100 {
            let mut rng = trial_rng(9, i);
            assert_eq!(
                has_nary_subtree(&s, 1, 1, &mut rng, 100),
                SubtreeOutcome::Absent
            );
        }
    }

    #[test]
    fn binary_tree_always_has_subtree() {
        let s = OffspringSpec::finite(vec![0.0, 0.0, 1.0])
            .unwrap()
            .sampler()
            .unwrap();
        for t in 0..8 {
            let mut rng = trial_rng(4, t as u64);
            assert_eq!(
                has_nary_subtree(&s, 2, t, &mut rng, 1 << 20),
                SubtreeOutcome::Present
            );
        }
    }

    #[test]
    fn budget_exceeded_is_reported() {
        let s = OffspringSpec::finite(vec![0.0, 0.0, 1.0])
            .unwrap()
            .sampler()
            .unwrap();
        let mut rng = trial_rng(4, 0);
        // a complete binary tree of height 10 needs 2^10 - 1 internal vertices
        assert_eq!(
            has_nary_subtree(&s, 2, 10, &mut rng, 100),
            SubtreeOutcome::BudgetExceeded
        );
    }

    #[test]
    fn budget_gate() {
        let mut cfg = McConfig::new(
            OffspringSpec::finite(vec![0.0, 0.0, 1.0]).unwrap(),
            2,
            10,
            50,
            1,
        );
        cfg.node_budget = 100;
        assert_eq!(
            estimate_gamma_nt(&cfg),
            Err(Error::BudgetExhausted {
                exhausted: 50,
                trials: 50
            })
        );
    }

    #[test]
    fn invalid_configs() {
        let spec = OffspringSpec::geometric(0.5).unwrap();
        let mut cfg = McConfig::new(spec, 2, 3, 0, 1);
        assert!(estimate_gamma_nt(&cfg).is_err());
        cfg.n_trials = 10;
        cfg.arity = 0;
        assert!(estimate_gamma_nt(&cfg).is_err());
        cfg.arity = 2;
        cfg.node_budget = 0;
        assert!(estimate_gamma_nt(&cfg).is_err());
    }

    #[test]
    fn materialized_tree_shape() {
        let s = OffspringSpec::finite(vec![0.0, 0.0, 1.0])
            .unwrap()
            .sampler()
            .unwrap();
        let mut rng = trial_rng(0, 0);
        let tree = MaterializedTree::grow(&s, &mut rng, 3, 1000).unwrap();
        assert_eq!(tree.len(), 1 + 2 + 4 + 8);
        let mut rng = trial_rng(0, 0);
        assert!(MaterializedTree::grow(&s, &mut rng, 10, 100).is_none());
    }
}
