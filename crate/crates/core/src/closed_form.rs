//! Closed-form delivery rates and bounds.
//!
//! All rates are normalized by the file size `F`; cache sizes are in files.
//! These functions take real-valued subfile sizes and never round.
//!
//! Two terms of the published formulas contain `binom(min{N-K, 0}, l)`, which
//! vanishes identically for `l >= 1`. They are evaluated here as
//! `binom(max{N-K, 0}, l)`: the number of `l`-subfiles shared only among files
//! nobody requested under a worst-case demand. For `N <= K` both readings agree.

use crate::combinatorics::{binom_f, binomial};
use crate::error::{Error, Result};
use crate::model::{CacheAllocation, LibraryConfig};

/// A cache size / delivery rate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub memory: f64,
    pub rate: f64,
}

/// Achievable rate points at integer caching parameters `t = 0..=K` and
/// their lower convex envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRateCurve {
    pub level: usize,
    points: Vec<f64>,
    hull: Vec<usize>,
}

impl LevelRateCurve {
    /// Builds the curve from the rates at `t = 0..=K`.
    pub fn new(level: usize, points: Vec<f64>) -> Self {
        assert!(!points.is_empty());
        let hull = lower_hull(&points);
        Self {
            level,
            points,
            hull,
        }
    }

    pub fn k(&self) -> usize {
        self.points.len() - 1
    }

    /// Rate of the scheme run directly at integer `t`.
    pub fn raw(&self, t: usize) -> f64 {
        self.points[t]
    }

    pub fn raw_points(&self) -> &[f64] {
        &self.points
    }

    /// Integer parameters that are vertices of the lower convex envelope.
    pub fn vertices(&self) -> &[usize] {
        &self.hull
    }

    pub fn is_vertex(&self, t: usize) -> bool {
        self.hull.binary_search(&t).is_ok()
    }

    /// The two envelope vertices bracketing `t` and the weight of the lower
    /// one, so that `t = w a + (1 - w) b`. At a vertex, `a == b` and `w == 1`.
    pub fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let t = t.clamp(0.0, self.k() as f64);
        for w in self.hull.windows(2) {
            let (a, b) = (w[0], w[1]);
            if t == a as f64 {
                return (a, a, 1.0);
            }
            if t < b as f64 {
                return (a, b, (b as f64 - t) / (b - a) as f64);
            }
        }
        let last = *self.hull.last().unwrap();
        (last, last, 1.0)
    }

    /// Envelope value at real `t` in `[0, K]`.
    pub fn envelope(&self, t: f64) -> f64 {
        let (a, b, w) = self.bracket(t);
        if a == b {
            self.points[a]
        } else {
            w * self.points[a] + (1.0 - w) * self.points[b]
        }
    }
}

fn lower_hull(points: &[f64]) -> Vec<usize> {
    let scale = points.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    let mut hull: Vec<usize> = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b - a) as f64 * (points[i] - points[a])
                - (points[b] - points[a]) * (i - a) as f64;
            // pop b unless it lies strictly below the chord a..i
            if cross <= 1e-12 * scale {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// `C(l) = Σ_{i=l}^{N} binom(N, i) F_i`; `C(N+1) = 0`.
pub fn cumulative_tail(config: &LibraryConfig, level: usize) -> f64 {
    let n = config.n_files();
    (level.max(1)..=n)
        .map(|i| binomial(n, i) as f64 * config.level_size(i))
        .sum()
}

/// Number of `l`-subfiles a worst-case demand touches.
fn worst_case_subfiles(config: &LibraryConfig, level: usize) -> f64 {
    let n = config.n_files() as i64;
    let k = config.n_users() as i64;
    binom_f(n, level as i64) - binom_f((n - k).max(0), level as i64)
}

/// Worst-case rate of uncoded delivery of everything not cached.
pub fn cauc_rate(config: &LibraryConfig, alloc: &CacheAllocation) -> f64 {
    let f = config.file_size();
    (1..=config.n_files())
        .map(|l| (1.0 - alloc.fraction(l)) * config.level_size(l) * worst_case_subfiles(config, l))
        .sum::<f64>()
        / f
}

/// Optimal uncoded placement: fill the cache starting from the most shared
/// level.
pub fn cauc_optimal_allocation(config: &LibraryConfig) -> CacheAllocation {
    let n = config.n_files();
    let budget = config.cache_capacity() * config.file_size();
    let fractions = (1..=n)
        .map(|l| {
            let here = cumulative_tail(config, l);
            let above = cumulative_tail(config, l + 1);
            if here <= budget {
                1.0
            } else if above < budget {
                ((budget - above) / (binomial(n, l) as f64 * config.level_size(l))).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    CacheAllocation::new(fractions).expect("fractions clamped to [0, 1]")
}

/// Rate bound of coded delivery for level `level` at integer `t`.
pub fn cacc_alpha(config: &LibraryConfig, level: usize, t: usize) -> f64 {
    let n = config.n_files() as i64;
    let k = config.n_users() as i64;
    let l = level as i64;
    let t = t as i64;
    let nk = n.min(k);
    let s_lo = (l - k).max(0);
    let s_hi = (l - 1).min(n - k).max(0);
    let mut sum = 0.0;
    for s in s_lo..=s_hi {
        let b = l - s;
        if b < 1 {
            continue;
        }
        let width = (nk + b - 1) / b; // ceil(min(N,K) / (l-s))
        let spared = (k - width - 1).max(0);
        let steps = binom_f((n - k).max(0), s) * binom_f(nk - 1, l - s - 1);
        sum += steps * (binom_f(k, t + 1) - binom_f(spared, t + 1));
    }
    sum * config.level_size(level) / (config.file_size() * binom_f(k, t))
}

/// Rate of delivering every requested `l`-subfile by random combinations.
pub fn cacc_m(config: &LibraryConfig, level: usize, t: usize) -> f64 {
    let k = config.n_users() as f64;
    let fl = config.level_size(level);
    worst_case_subfiles(config, level) * (fl - t as f64 * fl / k) / config.file_size()
}

/// `min{alpha_l(t), m_l(t)}` for every integer `t`, with its envelope.
pub fn level_curve(config: &LibraryConfig, level: usize) -> LevelRateCurve {
    let points = (0..=config.n_users())
        .map(|t| cacc_alpha(config, level, t).min(cacc_m(config, level, t)))
        .collect();
    LevelRateCurve::new(level, points)
}

/// Achievable rate for level `level` at real caching parameter `t`: the lower
/// convex envelope of the integer points, reached by memory sharing.
pub fn cacc_level_rate(config: &LibraryConfig, level: usize, t: f64) -> Result<f64> {
    let k = config.n_users();
    if !(0.0..=k as f64).contains(&t) || t.is_nan() {
        return Err(Error::TOutOfRange { t, k });
    }
    if level == 0 || level > config.n_files() {
        return Err(Error::LevelOutOfRange {
            level,
            n_files: config.n_files(),
        });
    }
    Ok(level_curve(config, level).envelope(t))
}

/// Total coded rate for an allocation.
pub fn cacc_rate(config: &LibraryConfig, alloc: &CacheAllocation) -> f64 {
    let k = config.n_users();
    (1..=config.n_files())
        .map(|l| {
            let t = alloc.t(k, l).clamp(0.0, k as f64);
            level_curve(config, l).envelope(t)
        })
        .sum()
}

/// Coded rate without envelope memory sharing: integer `t` runs as is and a
/// fractional `t` mixes its floor and ceiling.
pub fn cacc_direct_rate(config: &LibraryConfig, alloc: &CacheAllocation) -> f64 {
    let k = config.n_users();
    (1..=config.n_files())
        .map(|l| {
            let t = alloc.t(k, l).clamp(0.0, k as f64);
            let curve = level_curve(config, l);
            let (lo, hi) = (t.floor() as usize, t.ceil() as usize);
            let w = hi as f64 - t;
            if lo == hi {
                curve.raw(lo)
            } else {
                w * curve.raw(lo) + (1.0 - w) * curve.raw(hi)
            }
        })
        .sum()
}

/// Rate curve of correlation-ignorant coded caching over `N` whole files.
pub fn cicc_curve(config: &LibraryConfig) -> LevelRateCurve {
    let k = config.n_users() as i64;
    let nk = (config.n_files() as i64).min(k);
    let points = (0..=k)
        .map(|t| (binom_f(k, t + 1) - binom_f(k - nk, t + 1)) / binom_f(k, t))
        .collect();
    LevelRateCurve::new(0, points)
}

/// Caching parameter of the baseline, `t = K M / N`.
pub fn cicc_t(config: &LibraryConfig) -> f64 {
    (config.n_users() as f64 * config.cache_capacity() / config.n_files() as f64)
        .min(config.n_users() as f64)
}

/// Rate of correlation-ignorant coded caching at the configured `M`.
pub fn cicc_rate(config: &LibraryConfig) -> f64 {
    cicc_curve(config).envelope(cicc_t(config))
}

/// Cut-set lower bound on the optimal rate, clamped at zero.
pub fn cutset_bound(config: &LibraryConfig) -> f64 {
    let n = config.n_files();
    let k = config.n_users();
    let f = config.file_size();
    let m = config.cache_capacity();
    let mut best = 0.0f64;
    for p in 1..=n.min(k) {
        let q = n / p;
        let covered = p * q;
        let rest = n - covered;
        let mut sum = 0.0;
        for s in 0..=rest {
            for l in 1..=covered {
                sum += binomial(rest, s) as f64
                    * binomial(covered, l) as f64
                    * config.level_size(l + s)
                    / f;
            }
        }
        best = best.max((sum - p as f64 * m) / q as f64);
    }
    best.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, k: usize, m: f64, f: &[f64]) -> LibraryConfig {
        LibraryConfig::new(n, k, m, f.to_vec()).unwrap()
    }

    const EPS: f64 = 1e-12;

    #[test]
    fn cumulative_tail_examples() {
        let c = cfg(2, 2, 0.0, &[1.0, 2.0]);
        assert_eq!(cumulative_tail(&c, 2), 2.0);
        assert_eq!(cumulative_tail(&c, 1), 4.0);
        assert_eq!(cumulative_tail(&c, 3), 0.0);
    }

    #[test]
    fn cauc_rate_examples() {
        let c = cfg(2, 2, 0.0, &[1.0, 1.0]);
        assert!((cauc_rate(&c, &CacheAllocation::zeros(2)) - 1.5).abs() < EPS);
        assert_eq!(cauc_rate(&c, &CacheAllocation::full(2)), 0.0);
        let c = cfg(3, 1, 0.0, &[1.0, 0.0, 0.0]);
        assert!((cauc_rate(&c, &CacheAllocation::zeros(3)) - 1.0).abs() < EPS);
    }

    #[test]
    fn cauc_optimal_examples() {
        // F = 1 + 2 = 3 bits; MF = 2 and 3 correspond to M = 2/3 and 1.
        let c = cfg(2, 2, 2.0 / 3.0, &[1.0, 2.0]);
        let p = cauc_optimal_allocation(&c);
        assert!((p.fraction(1) - 0.0).abs() < EPS && (p.fraction(2) - 1.0).abs() < EPS);
        let c = cfg(2, 2, 1.0, &[1.0, 2.0]);
        let p = cauc_optimal_allocation(&c);
        assert!((p.fraction(1) - 0.5).abs() < EPS && (p.fraction(2) - 1.0).abs() < EPS);
        let c = cfg(3, 2, 100.0, &[1.0, 2.0, 3.0]);
        assert_eq!(cauc_optimal_allocation(&c).fractions(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn alpha_examples() {
        // N=K=5, only F2: F = 4 F2.
        let c = cfg(5, 5, 0.0, &[0.0, 1.0, 0.0, 0.0, 0.0]);
        let f2 = 1.0 / 4.0;
        assert!((cacc_alpha(&c, 2, 1) - 8.0 * f2).abs() < EPS);
        assert!((cacc_alpha(&c, 2, 0) - 16.0 * f2).abs() < EPS);
        assert_eq!(cacc_alpha(&c, 2, 5), 0.0);
        // N=3, K=2: F = F1 + 2 F2 + F3 with only F2 = 1 -> F = 2.
        let c = cfg(3, 2, 0.0, &[0.0, 1.0, 0.0]);
        assert!((cacc_alpha(&c, 2, 1) - 1.0 / 2.0).abs() < EPS);
    }

    #[test]
    fn m_examples() {
        let c = cfg(5, 5, 0.0, &[0.0, 1.0, 0.0, 0.0, 0.0]);
        let f2 = 1.0 / 4.0;
        assert!((cacc_m(&c, 2, 1) - 8.0 * f2).abs() < EPS);
        assert!((cacc_m(&c, 2, 0) - 10.0 * f2).abs() < EPS);
        assert_eq!(cacc_m(&c, 2, 5), 0.0);
    }

    /// Independent envelope: minimum over all convex combinations of two
    /// integer points bracketing `t`.
    fn brute_envelope(points: &[f64], t: f64) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..points.len() {
            for b in a..points.len() {
                let (fa, fb) = (a as f64, b as f64);
                if fa <= t && t <= fb {
                    let v = if a == b {
                        points[a]
                    } else {
                        let w = (fb - t) / (fb - fa);
                        w * points[a] + (1.0 - w) * points[b]
                    };
                    best = best.min(v);
                }
            }
        }
        best
    }

    #[test]
    fn level_rate_examples() {
        let c = cfg(5, 5, 0.0, &[0.0, 1.0, 0.0, 0.0, 0.0]);
        let f2 = 1.0 / 4.0;
        let curve = level_curve(&c, 2);
        // raw points: min{16,10}, min{8,8}, min{4,6}, ...
        assert!((curve.raw(0) - 10.0 * f2).abs() < EPS);
        assert!((curve.raw(1) - 8.0 * f2).abs() < EPS);
        assert!((curve.raw(2) - 4.0 * f2).abs() < EPS);
        // t=1 lies above the chord from t=0 to t=2, so memory sharing beats it
        assert!(!curve.is_vertex(1));
        let pts = curve.raw_points().to_vec();
        for t in [0.0, 0.5, 1.0, 1.5, 2.0, 3.7, 5.0] {
            let got = cacc_level_rate(&c, 2, t).unwrap();
            assert!((got - brute_envelope(&pts, t)).abs() < 1e-12, "t={t}");
        }
        assert!((cacc_level_rate(&c, 2, 0.0).unwrap() - 10.0 * f2).abs() < EPS);
        assert!((cacc_level_rate(&c, 2, 0.5).unwrap() - 8.5 * f2).abs() < EPS);
        assert!((cacc_level_rate(&c, 2, 1.0).unwrap() - 7.0 * f2).abs() < EPS);
        assert!(cacc_level_rate(&c, 2, 5.5).is_err());
        assert!(cacc_level_rate(&c, 2, -0.1).is_err());
        let direct = |t: f64| {
            let a = CacheAllocation::from_t(5, &[0.0, t, 0.0, 0.0, 0.0]).unwrap();
            cacc_direct_rate(&c, &a)
        };
        assert!((direct(1.0) - 8.0 * f2).abs() < EPS);
        assert!((direct(0.5) - 9.0 * f2).abs() < EPS);
    }

    #[test]
    fn cacc_rate_examples() {
        let c = cfg(5, 5, 0.0, &[0.0, 1.0, 0.0, 0.0, 0.0]);
        let a = CacheAllocation::new(vec![0.0, 0.2, 0.0, 0.0, 0.0]).unwrap();
        assert!((cacc_rate(&c, &a) - cacc_level_rate(&c, 2, 1.0).unwrap()).abs() < EPS);
        assert_eq!(cacc_rate(&c, &CacheAllocation::full(5)), 0.0);
    }

    #[test]
    fn cicc_examples() {
        let c = cfg(10, 10, 0.0, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((cicc_rate(&c) - 10.0).abs() < EPS);
        let c = c.with_capacity(1.0).unwrap();
        assert!((cicc_rate(&c) - 4.5).abs() < EPS);
        // M = N only reachable when the library is N whole files
        let c = cfg(3, 3, 3.0, &[1.0, 0.0, 0.0]);
        assert_eq!(cicc_rate(&c), 0.0);
    }

    #[test]
    fn cicc_ignores_level_split() {
        // both libraries have F = 15
        let a = cfg(4, 4, 1.0, &[15.0, 0.0, 0.0, 0.0]);
        let b = cfg(4, 4, 1.0, &[3.0, 1.0, 2.0, 3.0]);
        assert_eq!(a.file_size(), b.file_size());
        assert!((cicc_rate(&a) - cicc_rate(&b)).abs() < 1e-12);
    }

    #[test]
    fn cutset_examples() {
        assert!((cutset_bound(&cfg(1, 1, 0.0, &[5.0])) - 1.0).abs() < EPS);
        assert!((cutset_bound(&cfg(2, 2, 0.0, &[1.0, 1.0])) - 1.5).abs() < EPS);
        assert_eq!(cutset_bound(&cfg(2, 2, 1.5, &[1.0, 1.0])), 0.0);
    }

    #[test]
    fn hull_drops_collinear_and_concave_points() {
        let c = LevelRateCurve::new(1, vec![4.0, 3.0, 2.0, 1.0, 0.0]);
        assert_eq!(c.vertices(), &[0, 4]);
        let c = LevelRateCurve::new(1, vec![4.0, 3.9, 1.0, 0.0]);
        assert_eq!(c.vertices(), &[0, 2, 3]);
        assert_eq!(c.bracket(1.0), (0, 2, 0.5));
        assert_eq!(c.bracket(2.0), (2, 2, 1.0));
        assert_eq!(c.bracket(3.0), (3, 3, 1.0));
    }
}
