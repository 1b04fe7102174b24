//! Cache allocation across commonness levels minimizing the coded rate.
//!
//! Each level's rate is a convex, non-increasing, piecewise-linear function of
//! its caching parameter, and caching costs bits linearly in that parameter.
//! Spending the budget on envelope segments in order of rate reduction per
//! cached bit is therefore optimal.

use rayon::prelude::*;

use crate::closed_form::{cacc_rate, level_curve, LevelRateCurve};
use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::model::{CacheAllocation, LibraryConfig};

/// Largest grid the exhaustive oracle will enumerate.
pub const ORACLE_GUARD: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    GreedyMarginal,
    Exhaustive,
}

/// A library together with the rate curve of each level.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    pub config: LibraryConfig,
    pub curves: Vec<LevelRateCurve>,
}

impl AllocationProblem {
    pub fn new(config: &LibraryConfig) -> Self {
        let curves = (1..=config.n_files())
            .map(|l| level_curve(config, l))
            .collect();
        Self {
            config: config.clone(),
            curves,
        }
    }

    /// Bits per user needed to raise level `l`'s parameter by one.
    fn bits_per_t(&self, level: usize) -> f64 {
        let n = self.config.n_files();
        binomial(n, level) as f64 * self.config.level_size(level) / self.config.n_users() as f64
    }
}

#[derive(Debug, Clone)]
pub struct AllocationSolution {
    pub alloc: CacheAllocation,
    pub rate: f64,
    pub method: Method,
}

impl AllocationSolution {
    pub fn t(&self, n_users: usize) -> Vec<f64> {
        (1..=self.alloc.fractions().len())
            .map(|l| self.alloc.t(n_users, l))
            .collect()
    }
}

/// Greedy marginal allocation over the per-level convex envelopes.
pub fn optimize_allocation(config: &LibraryConfig) -> Result<AllocationSolution> {
    if config.cache_capacity() < 0.0 {
        return Err(Error::Infeasible("negative cache capacity".into()));
    }
    let problem = AllocationProblem::new(config);
    let n = config.n_files();
    let k = config.n_users();
    let mut budget = config.cache_capacity() * config.file_size();
    let mut t = vec![0.0f64; n];
    // next unconsumed hull segment per level
    let mut cursor = vec![0usize; n];

    let efficiency = |level: usize, seg: usize| -> Option<(f64, f64)> {
        let curve = &problem.curves[level - 1];
        let v = curve.vertices();
        if seg + 1 >= v.len() {
            return None;
        }
        let (a, b) = (v[seg], v[seg + 1]);
        let gain = curve.raw(a) - curve.raw(b);
        let cost = problem.bits_per_t(level) * (b - a) as f64;
        if gain <= 0.0 || cost <= 0.0 {
            return None;
        }
        Some((gain / cost, cost))
    };

    while budget > 0.0 {
        // best next segment across levels; ties go to the lower level
        let mut best: Option<(usize, f64, f64)> = None;
        for level in 1..=n {
            if let Some((eff, cost)) = efficiency(level, cursor[level - 1]) {
                if best.is_none_or(|(_, e, _)| eff > e) {
                    best = Some((level, eff, cost));
                }
            }
        }
        let Some((level, _, cost)) = best else { break };
        let v = problem.curves[level - 1].vertices();
        let seg = cursor[level - 1];
        let (a, b) = (v[seg] as f64, v[seg + 1] as f64);
        if cost <= budget {
            t[level - 1] = b;
            budget -= cost;
            cursor[level - 1] += 1;
        } else {
            t[level - 1] = a + (b - a) * budget / cost;
            budget = 0.0;
        }
    }

    let alloc = CacheAllocation::from_t(k, &t)?;
    let rate = cacc_rate(config, &alloc);
    Ok(AllocationSolution {
        alloc,
        rate,
        method: Method::GreedyMarginal,
    })
}

/// Brute-force minimum of the coded rate over a grid of caching parameters
/// `t_l in {0, step, 2 step, ..., K}`. Levels with `F_l = 0` stay at zero.
pub fn exhaustive_allocation_oracle(
    config: &LibraryConfig,
    grid_step: f64,
) -> Result<AllocationSolution> {
    if !(grid_step > 0.0) {
        return Err(Error::InvalidConfig("grid step must be positive".into()));
    }
    let n = config.n_files();
    let k = config.n_users();
    let per_level = (k as f64 / grid_step).floor() as usize + 1;
    let active: Vec<usize> = (1..=n).filter(|&l| config.level_size(l) > 0.0).collect();
    let points = (per_level as u128).saturating_pow(active.len() as u32);
    if points > ORACLE_GUARD {
        return Err(Error::EnumerationGuard {
            points,
            limit: ORACLE_GUARD,
        });
    }
    let curves: Vec<LevelRateCurve> = (1..=n).map(|l| level_curve(config, l)).collect();
    let budget = config.cache_capacity() * config.file_size() + 1e-9 * config.file_size();
    let bits_per_t: Vec<f64> = (1..=n)
        .map(|l| binomial(n, l) as f64 * config.level_size(l) / k as f64)
        .collect();
    let grid_t = |i: usize| (i as f64 * grid_step).min(k as f64);

    let best = (0..points as u64)
        .into_par_iter()
        .filter_map(|idx| {
            let mut rest = idx;
            let mut cost = 0.0;
            let mut rate = 0.0;
            for &l in &active {
                let t = grid_t((rest % per_level as u64) as usize);
                rest /= per_level as u64;
                cost += bits_per_t[l - 1] * t;
                rate += curves[l - 1].envelope(t);
            }
            (cost <= budget).then_some((rate, idx))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("the all-zero allocation is always feasible");

    let mut t = vec![0.0; n];
    let mut rest = best.1;
    for &l in &active {
        t[l - 1] = grid_t((rest % per_level as u64) as usize);
        rest /= per_level as u64;
    }
    let alloc = CacheAllocation::from_t(k, &t)?;
    Ok(AllocationSolution {
        rate: cacc_rate(config, &alloc),
        alloc,
        method: Method::Exhaustive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::cacc_level_rate;

    fn cfg(n: usize, k: usize, m: f64, f: &[f64]) -> LibraryConfig {
        LibraryConfig::new(n, k, m, f.to_vec()).unwrap()
    }

    #[test]
    fn zero_memory_caches_nothing() {
        let c = cfg(3, 3, 0.0, &[1.0, 2.0, 3.0]);
        let s = optimize_allocation(&c).unwrap();
        assert!(s.alloc.fractions().iter().all(|&p| p == 0.0));
        let expect: f64 = (1..=3).map(|l| cacc_level_rate(&c, l, 0.0).unwrap()).sum();
        assert!((s.rate - expect).abs() < 1e-12);
        let o = exhaustive_allocation_oracle(&c, 0.5).unwrap();
        assert!(o.alloc.fractions().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn full_memory_caches_everything() {
        let c = cfg(3, 3, 0.0, &[1.0, 2.0, 3.0]);
        let c = c.with_capacity(c.library_size() / c.file_size()).unwrap();
        let s = optimize_allocation(&c).unwrap();
        for l in 1..=3 {
            assert!((s.alloc.t(3, l) - 3.0).abs() < 1e-9);
        }
        assert!(s.rate.abs() < 1e-12);
    }

    /// Integer t-vectors plus one memory-sharing split between any two
    /// integer vectors, evaluated on the envelopes.
    fn refined_oracle(c: &LibraryConfig) -> f64 {
        let k = c.n_users();
        let n = c.n_files();
        let budget = c.cache_capacity() * c.file_size() + 1e-9;
        let curves: Vec<_> = (1..=n).map(|l| level_curve(c, l)).collect();
        let cost = |t: &[f64]| -> f64 {
            (1..=n)
                .map(|l| binomial(n, l) as f64 * c.level_size(l) * t[l - 1] / k as f64)
                .sum()
        };
        let rate = |t: &[f64]| -> f64 { (1..=n).map(|l| curves[l - 1].envelope(t[l - 1])).sum() };
        let total = (k + 1).pow(n as u32);
        let vecs: Vec<Vec<f64>> = (0..total)
            .map(|mut i| {
                (0..n)
                    .map(|_| {
                        let v = (i % (k + 1)) as f64;
                        i /= k + 1;
                        v
                    })
                    .collect()
            })
            .collect();
        let mut best = f64::INFINITY;
        for a in &vecs {
            let ca = cost(a);
            if ca <= budget {
                best = best.min(rate(a));
            }
            for b in &vecs {
                let cb = cost(b);
                if ca <= budget && cb > budget {
                    // largest mix of b that fits
                    let w = (budget - ca) / (cb - ca);
                    let mix: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect();
                    best = best.min(rate(&mix));
                }
            }
        }
        best
    }

    #[test]
    fn matches_refined_oracle_on_small_instance() {
        let c = cfg(3, 3, 1.0, &[1.0, 1.0, 1.0]);
        let s = optimize_allocation(&c).unwrap();
        let oracle = refined_oracle(&c);
        assert!(s.rate <= oracle + 1e-9, "greedy {} oracle {}", s.rate, oracle);
        assert!(s.alloc.is_feasible(&c));
    }

    #[test]
    fn grid_oracle_close_to_greedy() {
        let c = cfg(3, 3, 0.5, &[1.0, 1.0, 1.0]);
        let s = optimize_allocation(&c).unwrap();
        let o = exhaustive_allocation_oracle(&c, 0.25).unwrap();
        assert!(s.rate <= o.rate + 1e-9);
        // one grid step of the steepest envelope slope bounds the gap
        let max_slope = (1..=3)
            .map(|l| {
                let cv = level_curve(&c, l);
                cv.raw(0) - cv.raw(1)
            })
            .fold(0.0, f64::max);
        assert!(o.rate - s.rate <= 0.25 * max_slope * 3.0 + 1e-9);
    }

    #[test]
    fn oracle_guard() {
        let c = cfg(5, 5, 1.0, &[1.0; 5]);
        assert!(matches!(
            exhaustive_allocation_oracle(&c, 0.001),
            Err(Error::EnumerationGuard { .. })
        ));
    }

    #[test]
    fn uses_whole_budget_while_rate_decreases() {
        let c = cfg(4, 4, 0.7, &[3.0, 1.0, 2.0, 1.0]);
        let s = optimize_allocation(&c).unwrap();
        let used = s.alloc.cached_bits(&c);
        let budget = c.cache_capacity() * c.file_size();
        assert!((used - budget).abs() < 1e-9, "used {used} of {budget}");
    }
}
