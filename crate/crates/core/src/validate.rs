//! Reproduction suite for the reference families.
//!
//! Each check recomputes a published constant or a structural property and
//! reports pass/fail with the measured values. The suite backs the
//! `validate` command of the CLI.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::critical::{find_critical, one_or_many_closed_form, Family};
use crate::error::Result;
use crate::mc::{estimate_gamma_nt, McConfig};
use crate::offspring::OffspringSpec;
use crate::solve::{pemantle_bound, smallest_root, Criticality, ROOT_TOL};
use crate::subtree::SubtreeGF;
use crate::survival::{fit_asymptote, iterate_survival, FitModel, DEFAULT_T_MAX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    /// Trials per Monte Carlo estimate.
    pub mc_trials: u64,
    pub seed: u64,
    /// Multiplies every `b_N` the suite reads. Anything other than 1 models
    /// a faulty second derivative and must make the suite fail.
    pub b_scale: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            mc_trials: 100_000,
            seed: 20_240_601,
            b_scale: 1.0,
        }
    }
}

type CheckFn<'a> = Box<dyn Fn(&ValidationOptions) -> Result<(bool, String)> + 'a>;

struct Check<'a> {
    id: u32,
    name: &'a str,
    run: CheckFn<'a>,
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn rel_within(x: f64, target: f64, rel: f64) -> bool {
    ((x - target) / target).abs() <= rel
}

/// Uniformly random weights on `0..=max_k`, normalized.
pub fn random_finite_spec<R: Rng>(rng: &mut R, max_k: usize) -> OffspringSpec {
    loop {
        let raw: Vec<f64> = (0..=max_k)
            .map(|_| {
                if rng.random_bool(0.25) {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        // absorb the normalization rounding into the largest weight
        let err = 1.0 - weights.iter().sum::<f64>();
        if let Some(w) = weights.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *w += err;
        }
        if let Ok(spec) = OffspringSpec::finite(weights) {
            return spec;
        }
    }
}

fn poisson_threshold() -> Result<crate::critical::CriticalReport> {
    find_critical(Family::Poisson, 2, [2.0, 5.0], 1e-12)
}

fn checks<'a>() -> Vec<Check<'a>> {
    vec![
        Check {
            id: 1,
            name: "geometric critical point (p=4/5, N=2)",
            run: Box::new(|o| {
                let gf = SubtreeGF::new(OffspringSpec::geometric(0.8)?, 2)?;
                let r = smallest_root(&gf, ROOT_TOL)?;
                let b = r.b * o.b_scale;
                let ok =
                    within(r.gamma, 0.75, 1e-9) && within(r.a, 1.0, 1e-6) && within(b, 2.0, 1e-8);
                Ok((ok, format!("gamma={} a={} b={}", r.gamma, r.a, b)))
            }),
        },
        Check {
            id: 2,
            name: "Poisson critical mean (N=2)",
            run: Box::new(|o| {
                let c = poisson_threshold()?;
                let b = c.b_at_critical * o.b_scale;
                let ok = within(c.mean_critical, 3.3509, 2e-3)
                    && within(c.gamma_critical, 0.4648, 2e-3)
                    && within(b, 1.48235, 1e-3);
                Ok((
                    ok,
                    format!("m={} gamma={} b={}", c.mean_critical, c.gamma_critical, b),
                ))
            }),
        },
        Check {
            id: 3,
            name: "one-or-many threshold vs closed form (r=3, N=2)",
            run: Box::new(|o| {
                let c = find_critical(Family::OneOrMany { r: 3 }, 2, [0.5, 0.99], 1e-12)?;
                let (p, g) = one_or_many_closed_form(2)?;
                let b = c.b_at_critical * o.b_scale;
                let ok = within(c.param_critical, p, 1e-12)
                    && within(c.gamma_critical, g, 1e-12)
                    && within(b, 8.0 / 3.0, 1e-10);
                Ok((
                    ok,
                    format!("p={} gamma={} b={}", c.param_critical, c.gamma_critical, b),
                ))
            }),
        },
        Check {
            id: 4,
            name: "critical law t*P -> 2/(gamma b) at t=1e4",
            run: Box::new(|o| {
                let poisson_m = poisson_threshold()?.param_critical;
                let cases = [
                    (OffspringSpec::geometric(0.8)?, 4.0 / 3.0),
                    (OffspringSpec::poisson(poisson_m)?, 2.9028),
                    (OffspringSpec::one_or_many(8.0 / 9.0, 3)?, 3.0),
                ];
                let mut ok = true;
                let mut detail = Vec::new();
                for (spec, target) in cases {
                    let gf = SubtreeGF::new(spec.clone(), 2)?;
                    let root = smallest_root(&gf, ROOT_TOL)?;
                    let curve = iterate_survival(&gf, &root, DEFAULT_T_MAX)?;
                    let t = curve.t_end();
                    let product = t as f64 * curve.cond_survival[t];
                    let predicted = 2.0 / (root.gamma * root.b * o.b_scale);
                    ok &= root.class == Criticality::Critical
                        && rel_within(product, target, 0.02)
                        && rel_within(predicted, target, 0.02);
                    detail.push(format!(
                        "{}: t*P={product:.5} 2/(gb)={predicted:.5}",
                        spec.family_name()
                    ));
                }
                Ok((ok, detail.join("; ")))
            }),
        },
        Check {
            id: 5,
            name: "subcritical geometric law (p=0.9, N=2)",
            run: Box::new(|_| {
                let gf = SubtreeGF::new(OffspringSpec::geometric(0.9)?, 2)?;
                let root = smallest_root(&gf, ROOT_TOL)?;
                let curve = iterate_survival(&gf, &root, DEFAULT_T_MAX)?;
                let fit = fit_asymptote(&curve, &root)?;
                let FitModel::Geometric {
                    d,
                    tail_ratio,
                    second_order_constant,
                    second_order_spread,
                    ..
                } = fit.model
                else {
                    return Ok((false, "wrong model".into()));
                };
                let ok = within(tail_ratio, root.a, 1e-6)
                    && d > 0.0
                    && second_order_constant.is_finite()
                    && second_order_spread < 10.0;
                Ok((
                    ok,
                    format!(
                        "a={} ratio={tail_ratio} d={d} C={second_order_constant:.4}",
                        root.a
                    ),
                ))
            }),
        },
        Check {
            id: 6,
            name: "a_N <= 1 on 200 random laws (support <= 6, N in {2,3})",
            run: Box::new(|o| {
                let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
                let (mut seen, mut worst) = (0, f64::NEG_INFINITY);
                while seen < 200 {
                    let spec = random_finite_spec(&mut rng, 6);
                    let n = if rng.random_bool(0.5) { 2 } else { 3 };
                    let Ok(gf) = SubtreeGF::new(spec, n) else {
                        continue;
                    };
                    let r = smallest_root(&gf, ROOT_TOL)?;
                    if r.gamma > 0.0 && r.gamma < 1.0 {
                        seen += 1;
                        worst = worst.max(r.a);
                    }
                }
                Ok((worst <= 1.0 + 1e-9, format!("max a_N = {worst}")))
            }),
        },
        Check {
            id: 7,
            name: "Monte Carlo agrees with iteration (t in {1,2,5,10})",
            run: Box::new(|o| {
                let poisson_m = poisson_threshold()?.param_critical;
                let specs = [
                    OffspringSpec::geometric(0.8)?,
                    OffspringSpec::poisson(poisson_m)?,
                    OffspringSpec::one_or_many(8.0 / 9.0, 3)?,
                ];
                let mut ok = true;
                let mut worst: f64 = 0.0;
                for spec in specs {
                    let gf = SubtreeGF::new(spec.clone(), 2)?;
                    let root = smallest_root(&gf, ROOT_TOL)?;
                    let curve = iterate_survival(&gf, &root, 10)?;
                    for t in [1usize, 2, 5, 10] {
                        let est = estimate_gamma_nt(&McConfig::new(
                            spec.clone(),
                            2,
                            t,
                            o.mc_trials,
                            o.seed + t as u64,
                        ))?;
                        let dev = (est.p_hat - curve.gamma_seq[t]).abs();
                        ok &= dev <= 3.0 * est.half_width_95;
                        worst = worst.max(dev / est.half_width_95);
                    }
                }
                Ok((
                    ok,
                    format!("max |p_hat - gamma_t| / half_width = {worst:.3}"),
                ))
            }),
        },
        Check {
            id: 8,
            name: "N=1 classical reduction",
            run: Box::new(|o| {
                let gf = SubtreeGF::new(OffspringSpec::finite(vec![0.5, 0.0, 0.5])?, 1)?;
                let root = smallest_root(&gf, ROOT_TOL)?;
                let curve = iterate_survival(&gf, &root, DEFAULT_T_MAX)?;
                let fit = fit_asymptote(&curve, &root)?;
                let t = curve.t_end();
                let product = t as f64 * curve.cond_survival[t];
                let b = root.b * o.b_scale;
                let geo = SubtreeGF::new(OffspringSpec::geometric(0.8)?, 1)?;
                let g1 = smallest_root(&geo, ROOT_TOL)?.gamma;
                let ok = rel_within(product, 2.0 / b, 0.02)
                    && rel_within(fit.fitted_constant, 2.0 / b, 0.02)
                    && within(g1, 0.25, 1e-10);
                Ok((
                    ok,
                    format!("t*P={product:.5} 2/b_1={:.5} gamma_1={g1}", 2.0 / b),
                ))
            }),
        },
        Check {
            id: 9,
            name: "Pemantle bound on 100 random subcritical laws",
            run: Box::new(|o| {
                let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0x9e37_79b9);
                let (mut seen, mut violations, mut bound_true) = (0, 0, 0);
                while seen < 100 {
                    let spec = random_finite_spec(&mut rng, 6);
                    let n = rng.random_range(1..=3);
                    let Ok(gf) = SubtreeGF::new(spec, n) else {
                        continue;
                    };
                    let r = smallest_root(&gf, ROOT_TOL)?;
                    if r.class != Criticality::Subcritical || r.boundary {
                        continue;
                    }
                    seen += 1;
                    for _ in 0..20 {
                        let s0 = rng.random_range(1e-9..1.0 - 1e-9);
                        if pemantle_bound(&gf, s0)? {
                            bound_true += 1;
                            if r.gamma > s0 + 1e-12 {
                                violations += 1;
                            }
                        }
                    }
                }
                Ok((
                    violations == 0,
                    format!("{bound_true} bounds checked, {violations} violations"),
                ))
            }),
        },
    ]
}

/// Runs every check in order.
pub fn run(opts: &ValidationOptions) -> Vec<CheckOutcome> {
    checks()
        .into_iter()
        .map(|check| {
            let start = Instant::now();
            let (passed, detail) = match (check.run)(opts) {
                Ok(res) => res,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckOutcome {
                id: check.id,
                name: check.name.to_string(),
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}
