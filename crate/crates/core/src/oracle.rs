//! Exhaustive checks tying simulated transcripts to the closed forms.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::allocator::optimize_allocation;
use crate::closed_form::{
    cacc_level_rate, cacc_rate, cauc_optimal_allocation, cauc_rate, cicc_rate, cutset_bound,
};
use crate::delivery::{
    cauc_deliver, cicc_deliver, decode, deliver, deliver_level, place, place_cauc, place_cicc,
    recover_units, Placement, Scheme, ScheduleSource, SharingPolicy, Strategy, Transcript, Unit,
};
use crate::error::{Error, Result};
use crate::model::{CacheAllocation, ContentStore, DemandVector, LibraryConfig, SubfileId};

/// Largest number of demand vectors a grid may enumerate.
pub const DEMAND_GUARD: u128 = 1_000_000;

const EPS: f64 = 1e-9;

/// Distinct demands when `N >= K`, otherwise a vector covering every file.
pub fn worst_case_demand(config: &LibraryConfig) -> DemandVector {
    let n = config.n_files();
    let demands = (0..config.n_users()).map(|k| k % n + 1).collect();
    DemandVector::new(n, demands).expect("demands within range")
}

pub fn config_digest(config: &LibraryConfig) -> String {
    let sizes: Vec<String> = config.subfile_sizes().iter().map(|f| f.to_string()).collect();
    format!(
        "N={} K={} M={} F_l=[{}]",
        config.n_files(),
        config.n_users(),
        config.cache_capacity(),
        sizes.join(" ")
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandOutcome {
    pub demand: DemandVector,
    pub measured_rate: f64,
    /// Declared slack (padding plus rounding) in rate units.
    pub slack_rate: f64,
    pub decode_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub config_digest: String,
    pub scheme: Scheme,
    pub formula_rate: f64,
    pub outcomes: Vec<DemandOutcome>,
    pub max_rate: f64,
    pub violations: Vec<String>,
}

impl GridReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// The demand vectors attaining the maximum measured rate.
    pub fn argmax(&self) -> Vec<&DemandVector> {
        self.outcomes
            .iter()
            .filter(|o| o.measured_rate == self.max_rate)
            .map(|o| &o.demand)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# {}\n# scheme={}\n", self.config_digest, self.scheme);
        out.push_str("demand,measured_rate,formula_rate,decode_ok\n");
        for o in &self.outcomes {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                o.demand, o.measured_rate, self.formula_rate, o.decode_ok
            );
        }
        out
    }
}

fn check_guard(config: &LibraryConfig) -> Result<()> {
    let points = (config.n_files() as u128).saturating_pow(config.n_users() as u32);
    if points > DEMAND_GUARD {
        return Err(Error::EnumerationGuard {
            points,
            limit: DEMAND_GUARD,
        });
    }
    Ok(())
}

/// Places content once and runs delivery plus decoding for every demand
/// vector in `[N]^K`.
pub fn verify_all_demands(
    config: &LibraryConfig,
    alloc: &CacheAllocation,
    scheme: Scheme,
    seed: u64,
) -> Result<GridReport> {
    check_guard(config)?;
    let store = ContentStore::random(config, seed)?;
    let placement = match scheme {
        Scheme::Cacc => place(config, alloc, &store, SharingPolicy::Envelope)?,
        Scheme::Cauc => place_cauc(config, alloc, &store)?,
        Scheme::Cicc => place_cicc(config, &store, SharingPolicy::Envelope)?,
    };
    let formula_rate = match scheme {
        Scheme::Cacc => cacc_rate(config, alloc),
        Scheme::Cauc => cauc_rate(config, alloc),
        Scheme::Cicc => cicc_rate(config),
    };
    let schedules = ScheduleSource::generated(seed);
    let f = config.file_size();
    let demands: Vec<DemandVector> =
        DemandVector::enumerate(config.n_files(), config.n_users()).collect();

    let results: Vec<Result<(DemandOutcome, Option<String>)>> = demands
        .into_par_iter()
        .map(|d| {
            let tr = match scheme {
                Scheme::Cacc => deliver(&placement, &d, &store, &schedules)?,
                Scheme::Cauc => cauc_deliver(&placement, &d, &store)?,
                Scheme::Cicc => cicc_deliver(&placement, &d, &store)?,
            };
            let decode_ok = decodes_all(&placement, &tr, &d, &store);
            let measured_rate = tr.rate(f);
            let slack_rate = tr.slack_bits() / f;
            let mut problem = None;
            if !decode_ok {
                problem = Some(format!("demand {d}: decoding failed"));
            } else if measured_rate > formula_rate + slack_rate + EPS {
                problem = Some(format!(
                    "demand {d}: measured {measured_rate} exceeds {formula_rate} + slack {slack_rate}"
                ));
            }
            Ok((
                DemandOutcome {
                    demand: d,
                    measured_rate,
                    slack_rate,
                    decode_ok,
                },
                problem,
            ))
        })
        .collect();

    let mut outcomes = Vec::with_capacity(results.len());
    let mut violations = Vec::new();
    for r in results {
        let (o, p) = r?;
        outcomes.push(o);
        violations.extend(p);
    }
    let max_rate = outcomes.iter().map(|o| o.measured_rate).fold(0.0, f64::max);
    Ok(GridReport {
        config_digest: config_digest(config),
        scheme,
        formula_rate,
        outcomes,
        max_rate,
        violations,
    })
}

fn decodes_all(p: &Placement, tr: &Transcript, d: &DemandVector, store: &ContentStore) -> bool {
    p.caches.iter().all(|c| {
        decode(c, &p.layout, tr, d).is_ok_and(|bits| bits == store.file(d.of(c.user)))
    })
}

/// Achievable rates of each scheme, and the lower bound, at the config's `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeComparison {
    pub memory: f64,
    pub cauc: f64,
    pub cacc: f64,
    pub cicc: f64,
    pub cutset: f64,
}

impl SchemeComparison {
    pub fn rows(&self) -> [(&'static str, f64); 4] {
        [
            ("cauc", self.cauc),
            ("cacc", self.cacc),
            ("cicc", self.cicc),
            ("cutset", self.cutset),
        ]
    }
}

pub fn compare_schemes(config: &LibraryConfig) -> Result<SchemeComparison> {
    Ok(SchemeComparison {
        memory: config.cache_capacity(),
        cauc: cauc_rate(config, &cauc_optimal_allocation(config)),
        cacc: optimize_allocation(config)?.rate,
        cicc: cicc_rate(config),
        cutset: cutset_bound(config),
    })
}

/// Delivered bits of one level at one integer `t`, for every demand vector.
#[derive(Debug, Clone)]
pub struct LevelMeasurement {
    pub level: usize,
    pub t: usize,
    /// Indexed like [`DemandVector::enumerate`].
    pub bits: Vec<usize>,
    pub slack_bits: Vec<f64>,
    pub decode_failures: Vec<String>,
}

/// Runs level `level` alone at caching parameter `t` for all demand vectors.
/// Users check only the `level`-subfiles of their requested file.
pub fn measure_level(
    config: &LibraryConfig,
    store: &ContentStore,
    schedules: &ScheduleSource,
    level: usize,
    t: usize,
) -> Result<LevelMeasurement> {
    check_guard(config)?;
    let n = config.n_files();
    let k = config.n_users();
    let mut tv = vec![0.0; n];
    tv[level - 1] = t as f64;
    let alloc = CacheAllocation::from_t(k, &tv)?;
    let placement = place(config, &alloc, store, SharingPolicy::Envelope)?;
    let rounding = placement.layout.rounding_bits;

    // level-subfiles of each file, reused for every demand
    let wanted: Vec<Vec<SubfileId>> = (1..=n)
        .map(|i| {
            ContentStore::layout(n, i)
                .into_iter()
                .filter(|s| s.level() == level)
                .collect()
        })
        .collect();

    let mut m = LevelMeasurement {
        level,
        t,
        bits: Vec::new(),
        slack_bits: Vec::new(),
        decode_failures: Vec::new(),
    };
    for d in DemandVector::enumerate(n, k) {
        let tr = deliver_level(&placement, level, &d, store, schedules, Strategy::Cheaper)?;
        for cache in &placement.caches {
            let file = d.of(cache.user);
            let units: Vec<Unit> = wanted[file - 1].iter().map(|&s| Unit::Subfile(s)).collect();
            let ok = recover_units(cache, &placement.layout, &tr, &units).is_ok_and(|got| {
                got.iter()
                    .zip(&wanted[file - 1])
                    .all(|(g, &s)| g == store.subfile(s))
            });
            if !ok {
                m.decode_failures
                    .push(format!("level {level} t={t} demand {d}: user {}", cache.user));
            }
        }
        m.bits.push(tr.total_bits());
        m.slack_bits.push(tr.slack_bits() + rounding);
    }
    Ok(m)
}

/// Level size used by the exhaustive grids: every sublayer split of every
/// integer `t` is exact and parts are whole bytes.
pub fn grid_level_bits(n_users: usize) -> usize {
    let lcm_1k = (1..=n_users as u64).fold(1, crate::combinatorics::lcm);
    8 * crate::combinatorics::part_unit(n_users) as usize * lcm_1k as usize
}

/// A library with every level at [`grid_level_bits`].
pub fn grid_config(n_files: usize, n_users: usize) -> Result<LibraryConfig> {
    let f = grid_level_bits(n_users) as f64;
    LibraryConfig::new(n_files, n_users, 0.0, vec![f; n_files])
}

/// Outcome of checking every integer allocation of one config.
#[derive(Debug, Clone, Default)]
pub struct IntegerGridReport {
    pub allocations: usize,
    pub demands: usize,
    pub seeds: usize,
    /// Largest `measured - formula - slack`, in bits; at most zero when sound.
    pub max_excess_bits: f64,
    /// Largest declared slack as a fraction of `F`.
    pub max_slack_fraction: f64,
    pub decode_failures: Vec<String>,
}

impl IntegerGridReport {
    pub fn is_sound(&self) -> bool {
        self.decode_failures.is_empty() && self.max_excess_bits <= EPS
    }
}

/// Checks decodability and rate soundness for every integer `t`-vector,
/// every demand vector and every seed.
///
/// Levels are delivered independently and a transcript is the concatenation
/// of its per-level transcripts, so each `(level, t)` is simulated once per
/// seed and the totals of every `t`-vector are composed from those runs.
pub fn verify_integer_allocations(config: &LibraryConfig, seeds: &[u64]) -> Result<IntegerGridReport> {
    check_guard(config)?;
    let n = config.n_files();
    let k = config.n_users();
    let f = config.file_size();
    let n_demands = (n as u64).pow(k as u32) as usize;
    let active: Vec<usize> = (1..=n).filter(|&l| config.level_size(l) > 0.0).collect();
    let mut report = IntegerGridReport {
        demands: n_demands,
        seeds: seeds.len(),
        max_excess_bits: f64::NEG_INFINITY,
        ..Default::default()
    };
    // formula bits per (level, t)
    let formula: Vec<Vec<f64>> = (1..=n)
        .map(|l| {
            (0..=k)
                .map(|t| cacc_level_rate(config, l, t as f64).map(|r| r * f))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    for &seed in seeds {
        let store = ContentStore::random(config, seed)?;
        let schedules = ScheduleSource::generated(seed);
        let jobs: Vec<(usize, usize)> = active
            .iter()
            .flat_map(|&l| (0..=k).map(move |t| (l, t)))
            .collect();
        let measured: Vec<LevelMeasurement> = jobs
            .par_iter()
            .map(|&(l, t)| measure_level(config, &store, &schedules, l, t))
            .collect::<Result<_>>()?;
        let table = |l: usize, t: usize| &measured[active.iter().position(|&a| a == l).unwrap() * (k + 1) + t];
        for m in &measured {
            report.decode_failures.extend(m.decode_failures.iter().cloned());
        }

        // every t-vector over the active levels
        let per = k + 1;
        let total = per.pow(active.len() as u32);
        let mut sum_bits = vec![0usize; n_demands];
        let mut sum_slack = vec![0f64; n_demands];
        for idx in 0..total {
            let mut rest = idx;
            let mut bound = 0.0;
            sum_bits.iter_mut().for_each(|b| *b = 0);
            sum_slack.iter_mut().for_each(|b| *b = 0.0);
            for &l in &active {
                let t = rest % per;
                rest /= per;
                bound += formula[l - 1][t];
                let m = table(l, t);
                for (s, b) in sum_bits.iter_mut().zip(&m.bits) {
                    *s += b;
                }
                for (s, b) in sum_slack.iter_mut().zip(&m.slack_bits) {
                    *s += b;
                }
            }
            for (b, s) in sum_bits.iter().zip(&sum_slack) {
                report.max_excess_bits = report.max_excess_bits.max(*b as f64 - bound - s);
                report.max_slack_fraction = report.max_slack_fraction.max(s / f);
            }
        }
        report.allocations = total;
    }
    Ok(report)
}
