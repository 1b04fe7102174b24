use super::{Contents, Layout, PartKey, Placement, Scheme, SharingPolicy, Sublayer, Unit, UserCache};
use crate::closed_form::{cicc_curve, cicc_t, level_curve, LevelRateCurve};
use crate::combinatorics::{binomial, lcm, subsets_of_size};
use crate::error::{Error, Result};
use crate::model::{CacheAllocation, ContentStore, LibraryConfig, SubfileId};

struct Split {
    sublayers: Vec<Sublayer>,
    rate_slack: f64,
    cache_slack: f64,
}

/// Cuts `bits` into sublayers realizing caching parameter `t`.
///
/// `bits_per_rate` converts the curve's normalized rate into delivered bits
/// for the whole unit; `units` is the number of units sharing this split.
fn split(
    curve: &LevelRateCurve,
    t: f64,
    bits: usize,
    k: usize,
    policy: SharingPolicy,
    bits_per_rate: f64,
    units: f64,
) -> Result<Split> {
    if !(0.0..=k as f64 + 1e-9).contains(&t) {
        return Err(Error::TOutOfRange { t, k });
    }
    let t = t.min(k as f64);
    let empty = Split {
        sublayers: Vec::new(),
        rate_slack: 0.0,
        cache_slack: 0.0,
    };
    if bits == 0 {
        return Ok(empty);
    }
    let (a, b, w_a) = match policy {
        SharingPolicy::Envelope => curve.bracket(t),
        SharingPolicy::Direct if t.fract() == 0.0 => (t as usize, t as usize, 1.0),
        SharingPolicy::Direct => (t.floor() as usize, t.ceil() as usize, t.ceil() - t),
    };
    if a == b {
        let parts = binomial(k, a) as usize;
        if bits % parts != 0 {
            return Err(Error::Divisibility { bits, parts });
        }
        return Ok(Split {
            sublayers: vec![Sublayer {
                t: a,
                offset: 0,
                len: bits,
                parts,
            }],
            ..empty
        });
    }
    let (pa, pb) = (binomial(k, a), binomial(k, b));
    let unit = lcm(pa, pb) as usize;
    if bits % unit != 0 {
        return Err(Error::Divisibility { bits, parts: unit });
    }
    let exact_a = w_a * bits as f64;
    let len_a = (((exact_a / unit as f64).round() as usize) * unit).min(bits);
    let len_b = bits - len_a;
    let delta = (len_a as f64 - exact_a).abs();
    let rate_slack =
        delta * (curve.raw(a) - curve.raw(b)).abs() * bits_per_rate / bits as f64;
    let cache_slack = delta * units * (b - a) as f64 / k as f64;

    let mut sublayers = Vec::new();
    if len_a > 0 {
        sublayers.push(Sublayer {
            t: a,
            offset: 0,
            len: len_a,
            parts: pa as usize,
        });
    }
    if len_b > 0 {
        sublayers.push(Sublayer {
            t: b,
            offset: len_a,
            len: len_b,
            parts: pb as usize,
        });
    }
    Ok(Split {
        sublayers,
        rate_slack,
        cache_slack,
    })
}

/// Layout of the correlation-aware coded scheme.
pub fn plan_cacc(
    config: &LibraryConfig,
    alloc: &CacheAllocation,
    policy: SharingPolicy,
) -> Result<Layout> {
    let n = config.n_files();
    let k = config.n_users();
    if alloc.fractions().len() != n {
        return Err(Error::InvalidConfig(format!(
            "allocation has {} levels, library has {n}",
            alloc.fractions().len()
        )));
    }
    let mut layout = Layout {
        scheme: Scheme::Cacc,
        n_files: n,
        n_users: k,
        sublayers: Vec::with_capacity(n),
        prefix: Vec::new(),
        unit_bits: Vec::with_capacity(n),
        rounding_bits: 0.0,
        cache_rounding_bits: 0.0,
    };
    for l in 1..=n {
        let bits = config.level_bits(l)?;
        let curve = level_curve(config, l);
        let s = split(
            &curve,
            alloc.t(k, l),
            bits,
            k,
            policy,
            config.file_size(),
            binomial(n, l) as f64,
        )?;
        layout.sublayers.push(s.sublayers);
        layout.unit_bits.push(bits);
        layout.rounding_bits += s.rate_slack;
        layout.cache_rounding_bits += s.cache_slack;
    }
    Ok(layout)
}

/// Layout of the baseline: whole files at `t = K M / N`.
pub fn plan_cicc(config: &LibraryConfig, policy: SharingPolicy) -> Result<Layout> {
    let n = config.n_files();
    let k = config.n_users();
    let f = config.file_size();
    if f.fract() != 0.0 {
        return Err(Error::NonIntegralSize { level: 0, size: f });
    }
    let bits = f as usize;
    let s = split(
        &cicc_curve(config),
        cicc_t(config),
        bits,
        k,
        policy,
        f,
        n as f64,
    )?;
    Ok(Layout {
        scheme: Scheme::Cicc,
        n_files: n,
        n_users: k,
        sublayers: vec![s.sublayers],
        prefix: Vec::new(),
        unit_bits: vec![bits],
        rounding_bits: s.rate_slack,
        cache_rounding_bits: s.cache_slack,
    })
}

/// Layout of the uncoded scheme: every user caches the same leading
/// `p_l F_l` bits (rounded down) of each `l`-subfile.
pub fn plan_cauc(config: &LibraryConfig, alloc: &CacheAllocation) -> Result<Layout> {
    let n = config.n_files();
    let mut prefix = Vec::with_capacity(n);
    let mut unit_bits = Vec::with_capacity(n);
    let mut rounding = 0.0;
    for l in 1..=n {
        let bits = config.level_bits(l)?;
        let exact = alloc.fraction(l) * bits as f64;
        let p = (exact + 1e-9).floor().min(bits as f64) as usize;
        rounding += (exact - p as f64).max(0.0) * binomial(n, l) as f64;
        prefix.push(p);
        unit_bits.push(bits);
    }
    Ok(Layout {
        scheme: Scheme::Cauc,
        n_files: n,
        n_users: config.n_users(),
        sublayers: Vec::new(),
        prefix,
        unit_bits,
        rounding_bits: rounding,
        cache_rounding_bits: 0.0,
    })
}

fn units_of(layout: &Layout) -> Vec<Unit> {
    let n = layout.n_files;
    match layout.scheme {
        Scheme::Cicc => (1..=n).map(Unit::File).collect(),
        _ => (1..1u32 << n)
            .map(|m| Unit::Subfile(SubfileId::from_mask(m).expect("nonzero mask")))
            .collect(),
    }
}

/// Fills every user's cache according to `layout`.
pub fn place_layout(layout: &Layout, store: &ContentStore) -> Placement {
    let contents = Contents::new(store, layout.scheme == Scheme::Cicc);
    let units = units_of(layout);
    let all = layout.all_users();
    let caches = (1..=layout.n_users)
        .map(|user| {
            let mut cache = UserCache::new(user);
            let me = 1u32 << (user - 1);
            for &unit in &units {
                if layout.scheme == Scheme::Cauc {
                    let Unit::Subfile(id) = unit else { continue };
                    let p = layout.prefix[id.level() - 1];
                    if p > 0 {
                        cache.insert_prefix(id, contents.unit(unit).slice(0, p));
                    }
                    continue;
                }
                for (si, sl) in layout.unit_sublayers(unit).iter().enumerate() {
                    for label in subsets_of_size(all, sl.t) {
                        if label & me != 0 {
                            let key = PartKey {
                                unit,
                                sublayer: si,
                                label,
                            };
                            cache.insert_part(key, contents.part(layout, key));
                        }
                    }
                }
            }
            cache
        })
        .collect();
    Placement {
        layout: layout.clone(),
        caches,
    }
}

/// Coded-scheme placement for a (possibly fractional) allocation.
pub fn place(
    config: &LibraryConfig,
    alloc: &CacheAllocation,
    store: &ContentStore,
    policy: SharingPolicy,
) -> Result<Placement> {
    Ok(place_layout(&plan_cacc(config, alloc, policy)?, store))
}

pub fn place_cauc(
    config: &LibraryConfig,
    alloc: &CacheAllocation,
    store: &ContentStore,
) -> Result<Placement> {
    Ok(place_layout(&plan_cauc(config, alloc)?, store))
}

pub fn place_cicc(
    config: &LibraryConfig,
    store: &ContentStore,
    policy: SharingPolicy,
) -> Result<Placement> {
    Ok(place_layout(&plan_cicc(config, policy)?, store))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_config() -> LibraryConfig {
        LibraryConfig::new(5, 5, 0.0, vec![0.0, 100.0, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn five_users_t_one_each_holds_own_part() {
        let c = example_config();
        let store = ContentStore::random(&c, 1).unwrap();
        let alloc = CacheAllocation::from_t(5, &[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = place(&c, &alloc, &store, SharingPolicy::Direct).unwrap();
        for cache in &p.caches {
            let me = 1u32 << (cache.user - 1);
            assert!(cache.part_keys().all(|k| k.label == me));
            // 10 subfiles, 20 bits each
            assert_eq!(cache.cached_bits(), 10 * 20);
        }
    }

    #[test]
    fn trivial_extremes() {
        let c = example_config();
        let store = ContentStore::random(&c, 1).unwrap();
        let p = place(&c, &CacheAllocation::zeros(5), &store, SharingPolicy::Direct).unwrap();
        assert!(p.caches.iter().all(|c| c.cached_bits() == 0));
        let p = place(&c, &CacheAllocation::full(5), &store, SharingPolicy::Direct).unwrap();
        assert!(p.caches.iter().all(|c| c.cached_bits() == 10 * 100));
    }

    #[test]
    fn envelope_splits_non_vertex() {
        // level 2 at t=1 is not an envelope vertex for this library
        let c = LibraryConfig::new(5, 5, 0.0, vec![0.0, 600.0, 0.0, 0.0, 0.0]).unwrap();
        let curve = level_curve(&c, 2);
        assert!(!curve.is_vertex(1));
        let alloc = CacheAllocation::from_t(5, &[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let layout = plan_cacc(&c, &alloc, SharingPolicy::Envelope).unwrap();
        let sls = &layout.sublayers[1];
        assert_eq!(sls.len(), 2);
        let t: f64 = sls.iter().map(|s| s.t as f64 * s.len as f64).sum::<f64>() / 600.0;
        assert!((t - 1.0).abs() < 1e-12);
        assert_eq!(layout.rounding_bits, 0.0);
    }

    #[test]
    fn divisibility_is_enforced() {
        let c = LibraryConfig::new(5, 5, 0.0, vec![0.0, 7.0, 0.0, 0.0, 0.0]).unwrap();
        let alloc = CacheAllocation::from_t(5, &[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            plan_cacc(&c, &alloc, SharingPolicy::Direct),
            Err(Error::Divisibility { bits: 7, parts: 5 })
        ));
    }

    #[test]
    fn cauc_prefix_is_shared() {
        let c = LibraryConfig::new(2, 2, 0.0, vec![8.0, 8.0]).unwrap();
        let store = ContentStore::random(&c, 4).unwrap();
        let alloc = CacheAllocation::new(vec![0.5, 0.25]).unwrap();
        let p = place_cauc(&c, &alloc, &store).unwrap();
        let s = SubfileId::new(&[1, 2]).unwrap();
        assert_eq!(p.caches[0].prefix(s), p.caches[1].prefix(s));
        assert_eq!(p.caches[0].cached_bits(), 2 * 4 + 2);
    }
}
