//! Correlated library model: files built from subfiles shared by subsets of
//! the library, user demands, per-level cache allocations, and bit content.
//!
//! File indices are 1-based everywhere in the public API. A subfile shared
//! exclusively by the files in `S` is identified by the bitmask of `S`, bit
//! `i - 1` standing for file `i`.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitBuf;
use crate::combinatorics::{binomial, bits_of, part_unit, subsets_of_size};
use crate::error::{Error, Result};

/// Largest library the bitmask encoding supports.
pub const MAX_FILES: usize = 20;
/// Largest user population (user sets are bitmasks as well).
pub const MAX_USERS: usize = 20;

/// Number of files `N`, users `K`, cache size `M` (in files) and the size
/// `F_l` in bits of every subfile of commonness level `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryConfig {
    n_files: usize,
    n_users: usize,
    cache_capacity: f64,
    subfile_sizes: Vec<f64>,
}

impl LibraryConfig {
    /// Validates the configuration. Cache capacity beyond the whole library is
    /// clamped to the library size.
    pub fn new(
        n_files: usize,
        n_users: usize,
        cache_capacity: f64,
        subfile_sizes: Vec<f64>,
    ) -> Result<Self> {
        if n_files == 0 || n_files > MAX_FILES {
            return Err(Error::InvalidConfig(format!(
                "N={n_files} must lie in 1..={MAX_FILES}"
            )));
        }
        if n_users == 0 || n_users > MAX_USERS {
            return Err(Error::InvalidConfig(format!(
                "K={n_users} must lie in 1..={MAX_USERS}"
            )));
        }
        if subfile_sizes.len() != n_files {
            return Err(Error::InvalidConfig(format!(
                "expected {n_files} subfile sizes, got {}",
                subfile_sizes.len()
            )));
        }
        if subfile_sizes.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidConfig(
                "subfile sizes must be finite and nonnegative".into(),
            ));
        }
        if !cache_capacity.is_finite() || cache_capacity < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cache capacity M={cache_capacity} must be nonnegative"
            )));
        }
        let mut cfg = Self {
            n_files,
            n_users,
            cache_capacity,
            subfile_sizes,
        };
        if cfg.file_size() <= 0.0 {
            return Err(Error::InvalidConfig("file size must be positive".into()));
        }
        let max_m = cfg.library_size() / cfg.file_size();
        if cfg.cache_capacity > max_m {
            cfg.cache_capacity = max_m;
        }
        Ok(cfg)
    }

    /// Convenience constructor from integral sizes.
    pub fn from_bits(
        n_files: usize,
        n_users: usize,
        cache_capacity: f64,
        subfile_bits: &[u64],
    ) -> Result<Self> {
        Self::new(
            n_files,
            n_users,
            cache_capacity,
            subfile_bits.iter().map(|&b| b as f64).collect(),
        )
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn cache_capacity(&self) -> f64 {
        self.cache_capacity
    }

    pub fn subfile_sizes(&self) -> &[f64] {
        &self.subfile_sizes
    }

    /// `F_l` for `l` in `1..=N`; zero outside that range.
    pub fn level_size(&self, level: usize) -> f64 {
        if level == 0 || level > self.n_files {
            0.0
        } else {
            self.subfile_sizes[level - 1]
        }
    }

    /// `F_l` as a bit count, for the simulation path.
    pub fn level_bits(&self, level: usize) -> Result<usize> {
        let size = self.level_size(level);
        if size.fract() != 0.0 {
            return Err(Error::NonIntegralSize { level, size });
        }
        Ok(size as usize)
    }

    /// `F = Σ binom(N-1, l-1) F_l`.
    pub fn file_size(&self) -> f64 {
        file_size(self)
    }

    /// `Σ binom(N, l) F_l`, the size of the whole library in bits.
    pub fn library_size(&self) -> f64 {
        (1..=self.n_files)
            .map(|l| binomial(self.n_files, l) as f64 * self.level_size(l))
            .sum()
    }

    /// Same library with a different cache size.
    pub fn with_capacity(&self, cache_capacity: f64) -> Result<Self> {
        Self::new(
            self.n_files,
            self.n_users,
            cache_capacity,
            self.subfile_sizes.clone(),
        )
    }

    /// The bitmask of all files.
    pub fn all_files(&self) -> u32 {
        (1u32 << self.n_files) - 1
    }
}

/// Size of every file in bits.
pub fn file_size(config: &LibraryConfig) -> f64 {
    (1..=config.n_files)
        .map(|l| binomial(config.n_files - 1, l - 1) as f64 * config.level_size(l))
        .sum()
}

/// A nonempty set of file indices; its cardinality is the commonness level.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubfileId(u32);

impl SubfileId {
    pub fn from_mask(mask: u32) -> Result<Self> {
        if mask == 0 {
            return Err(Error::InvalidConfig("subfile member set is empty".into()));
        }
        if mask >> MAX_FILES != 0 {
            return Err(Error::InvalidConfig(format!(
                "subfile mask {mask:#x} exceeds {MAX_FILES} files"
            )));
        }
        Ok(Self(mask))
    }

    /// From 1-based file indices, in any order.
    pub fn new(members: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &i in members {
            if i == 0 || i > MAX_FILES {
                return Err(Error::InvalidConfig(format!("file index {i} out of range")));
            }
            mask |= 1 << (i - 1);
        }
        Self::from_mask(mask)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn level(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, file: usize) -> bool {
        file >= 1 && file <= 32 && self.0 & (1 << (file - 1)) != 0
    }

    /// Members as ascending 1-based indices.
    pub fn members(self) -> Vec<usize> {
        bits_of(self.0).map(|b| b as usize + 1).collect()
    }
}

impl fmt::Display for SubfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.members().iter().map(|m| m.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl fmt::Debug for SubfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{self}")
    }
}

/// All `binom(N, l)` subfiles of commonness level `level`, ascending by mask.
pub fn subfiles_of_level(n_files: usize, level: usize) -> Result<Vec<SubfileId>> {
    if level == 0 || level > n_files || n_files > MAX_FILES {
        return Err(Error::LevelOutOfRange { level, n_files });
    }
    Ok(subsets_of_size((1u32 << n_files) - 1, level)
        .into_iter()
        .map(SubfileId)
        .collect())
}

/// One requested file per user, `d_k` at position `k - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    pub fn new(n_files: usize, demands: Vec<usize>) -> Result<Self> {
        if demands.is_empty() {
            return Err(Error::InvalidDemand("no users".into()));
        }
        if let Some(d) = demands.iter().find(|&&d| d == 0 || d > n_files) {
            return Err(Error::InvalidDemand(format!(
                "requested file {d} outside 1..={n_files}"
            )));
        }
        Ok(Self(demands))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn n_users(&self) -> usize {
        self.0.len()
    }

    /// Demand of user `k` (1-based).
    pub fn of(&self, user: usize) -> usize {
        self.0[user - 1]
    }

    /// Bitmask of requested files.
    pub fn requested_mask(&self) -> u32 {
        self.0.iter().fold(0, |m, &d| m | 1 << (d - 1))
    }

    /// Every demand vector in `[N]^K`, in lexicographic order.
    pub fn enumerate(n_files: usize, n_users: usize) -> impl Iterator<Item = DemandVector> {
        let total = (n_files as u64).pow(n_users as u32);
        (0..total).map(move |mut idx| {
            let mut d = vec![1; n_users];
            for slot in d.iter_mut().rev() {
                *slot = (idx % n_files as u64) as usize + 1;
                idx /= n_files as u64;
            }
            DemandVector(d)
        })
    }
}

impl fmt::Display for DemandVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Fraction `p_l` of every `l`-subfile cached by each user.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheAllocation {
    fractions: Vec<f64>,
}

impl CacheAllocation {
    pub fn new(fractions: Vec<f64>) -> Result<Self> {
        if fractions.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Infeasible(format!(
                "fractions must lie in [0, 1]: {fractions:?}"
            )));
        }
        Ok(Self { fractions })
    }

    /// From caching parameters `t_l = K p_l`.
    pub fn from_t(n_users: usize, t: &[f64]) -> Result<Self> {
        Self::new(t.iter().map(|&t| t / n_users as f64).collect())
    }

    pub fn zeros(n_files: usize) -> Self {
        Self {
            fractions: vec![0.0; n_files],
        }
    }

    pub fn full(n_files: usize) -> Self {
        Self {
            fractions: vec![1.0; n_files],
        }
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn fraction(&self, level: usize) -> f64 {
        self.fractions[level - 1]
    }

    /// `t_l = K p_l` for level `level`.
    pub fn t(&self, n_users: usize, level: usize) -> f64 {
        self.fractions[level - 1] * n_users as f64
    }

    /// Bits each user caches: `Σ binom(N, l) p_l F_l`.
    pub fn cached_bits(&self, config: &LibraryConfig) -> f64 {
        (1..=config.n_files())
            .map(|l| binomial(config.n_files(), l) as f64 * self.fraction(l) * config.level_size(l))
            .sum()
    }

    /// The capacity constraint, with tolerance `1e-9 F`.
    pub fn is_feasible(&self, config: &LibraryConfig) -> bool {
        self.fractions.len() == config.n_files()
            && self.cached_bits(config)
                <= config.cache_capacity() * config.file_size() + 1e-9 * config.file_size()
    }
}

/// Bit content of every subfile of the library.
#[derive(Debug, Clone)]
pub struct ContentStore {
    n_files: usize,
    subfiles: Vec<BitBuf>,
    seed: u64,
}

impl ContentStore {
    /// Fills every subfile with pseudorandom bits from `seed`.
    pub fn random(config: &LibraryConfig, seed: u64) -> Result<Self> {
        let n = config.n_files();
        let sizes: Vec<usize> = (1..=n).map(|l| config.level_bits(l)).collect::<Result<_>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let subfiles = (1..1u32 << n)
            .map(|mask| BitBuf::random(sizes[mask.count_ones() as usize - 1], &mut rng))
            .collect();
        Ok(Self {
            n_files: n,
            subfiles,
            seed,
        })
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.subfiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subfiles.is_empty()
    }

    pub fn subfile(&self, id: SubfileId) -> &BitBuf {
        &self.subfiles[id.mask() as usize - 1]
    }

    /// The subfiles making up file `file`, in layout order (ascending mask).
    pub fn layout(n_files: usize, file: usize) -> Vec<SubfileId> {
        let bit = 1u32 << (file - 1);
        (1..1u32 << n_files)
            .filter(|m| m & bit != 0)
            .map(SubfileId)
            .collect()
    }

    /// `W_i` as the concatenation of its subfiles.
    pub fn file(&self, file: usize) -> BitBuf {
        let mut out = BitBuf::default();
        for id in Self::layout(self.n_files, file) {
            out.extend(self.subfile(id));
        }
        out
    }
}

/// Library description by per-level ratios `r_l = binom(N-1, l-1) F_l / F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n_files: usize,
    pub n_users: usize,
    pub cache_capacity: f64,
    /// Target file size `F` in bits.
    pub file_bits: f64,
    pub ratios: Vec<f64>,
    /// Level whose ratio is swept; the complement goes to private subfiles.
    pub sweep_level: usize,
    pub grid: Vec<f64>,
}

impl ExperimentSpec {
    fn check_ratios(&self) -> Result<()> {
        if self.ratios.len() != self.n_files {
            return Err(Error::InvalidConfig(format!(
                "expected {} ratios, got {}",
                self.n_files,
                self.ratios.len()
            )));
        }
        if self.ratios.iter().any(|r| *r < 0.0 || !r.is_finite()) {
            return Err(Error::InvalidConfig("ratios must be nonnegative".into()));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::RatiosNotNormalized { sum });
        }
        if self.file_bits <= 0.0 {
            return Err(Error::InvalidConfig("file size must be positive".into()));
        }
        Ok(())
    }

    /// Real-valued sizes `F_l = r_l F / binom(N-1, l-1)` without rounding.
    pub fn exact_config(&self) -> Result<LibraryConfig> {
        self.check_ratios()?;
        let n = self.n_files;
        let sizes = (1..=n)
            .map(|l| self.ratios[l - 1] * self.file_bits / binomial(n - 1, l - 1) as f64)
            .collect();
        LibraryConfig::new(n, self.n_users, self.cache_capacity, sizes)
    }

    /// Ratios for sweep value `x`: `r_sweep = x`, `r_1 = 1 - x`, others zero.
    pub fn at(&self, x: f64) -> ExperimentSpec {
        let mut ratios = vec![0.0; self.n_files];
        ratios[self.sweep_level - 1] += x;
        ratios[0] += 1.0 - x;
        ExperimentSpec {
            ratios,
            ..self.clone()
        }
    }
}

/// Integral sizes for simulation: each `F_l` is rounded down to a multiple of
/// `lcm{binom(K, t)}` so every integer caching parameter splits it evenly.
pub fn ratios_to_sizes(spec: &ExperimentSpec) -> Result<LibraryConfig> {
    let exact = spec.exact_config()?;
    let unit = part_unit(spec.n_users) as f64;
    let sizes = exact
        .subfile_sizes()
        .iter()
        .map(|f| (f / unit).floor() * unit)
        .collect();
    LibraryConfig::new(spec.n_files, spec.n_users, spec.cache_capacity, sizes)
}

/// Inverse of the ratio parametrisation.
pub fn sizes_to_ratios(config: &LibraryConfig) -> Vec<f64> {
    let n = config.n_files();
    let f = config.file_size();
    (1..=n)
        .map(|l| binomial(n - 1, l - 1) as f64 * config.level_size(l) / f)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_size_examples() {
        let c = LibraryConfig::from_bits(3, 2, 0.0, &[4, 2, 8]).unwrap();
        assert_eq!(c.file_size(), 16.0);
        let c = LibraryConfig::from_bits(1, 1, 0.0, &[7]).unwrap();
        assert_eq!(c.file_size(), 7.0);
        let c = LibraryConfig::from_bits(2, 1, 0.0, &[0, 5]).unwrap();
        assert_eq!(c.file_size(), 5.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(LibraryConfig::from_bits(0, 1, 0.0, &[]).is_err());
        assert!(LibraryConfig::from_bits(2, 1, 0.0, &[0, 0]).is_err());
        assert!(LibraryConfig::from_bits(2, 1, -1.0, &[1, 1]).is_err());
        assert!(LibraryConfig::from_bits(2, 1, 0.0, &[1]).is_err());
    }

    #[test]
    fn capacity_is_clamped_to_library() {
        // library = 2*1 + 1*1 = 3 bits, F = 2 bits, so M <= 1.5
        let c = LibraryConfig::from_bits(2, 2, 10.0, &[1, 1]).unwrap();
        assert_eq!(c.cache_capacity(), 1.5);
    }

    #[test]
    fn subfiles_of_level_examples() {
        let got: Vec<Vec<usize>> = subfiles_of_level(3, 2)
            .unwrap()
            .into_iter()
            .map(SubfileId::members)
            .collect();
        assert_eq!(got, vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(
            subfiles_of_level(3, 3).unwrap(),
            vec![SubfileId::new(&[1, 2, 3]).unwrap()]
        );
        assert_eq!(subfiles_of_level(5, 2).unwrap().len(), 10);
        assert!(subfiles_of_level(3, 0).is_err());
        assert!(subfiles_of_level(3, 4).is_err());
    }

    #[test]
    fn levels_partition_the_power_set() {
        let n = 6;
        let mut seen = vec![false; 1 << n];
        for l in 1..=n {
            for s in subfiles_of_level(n, l).unwrap() {
                assert_eq!(s.level(), l);
                assert!(!seen[s.mask() as usize]);
                seen[s.mask() as usize] = true;
            }
        }
        assert!(!seen[0]);
        assert!(seen[1..].iter().all(|&b| b));
    }

    #[test]
    fn subfile_id_is_canonical() {
        let a = SubfileId::new(&[3, 1]).unwrap();
        let b = SubfileId::new(&[1, 3]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "{1,3}");
        assert!(SubfileId::new(&[]).is_err());
    }

    #[test]
    fn store_reconstructs_files() {
        let c = LibraryConfig::from_bits(4, 2, 0.0, &[3, 5, 2, 7]).unwrap();
        let store = ContentStore::random(&c, 11).unwrap();
        assert_eq!(store.len(), 15);
        let total: usize = (1..16u32)
            .map(|m| store.subfile(SubfileId::from_mask(m).unwrap()).len())
            .sum();
        assert_eq!(total as f64, c.library_size());
        for i in 1..=4 {
            assert_eq!(ContentStore::layout(4, i).len(), 8);
            assert_eq!(store.file(i).len() as f64, c.file_size());
        }
    }

    #[test]
    fn store_is_reproducible() {
        let c = LibraryConfig::from_bits(3, 2, 0.0, &[9, 9, 9]).unwrap();
        let a = ContentStore::random(&c, 5).unwrap();
        let b = ContentStore::random(&c, 5).unwrap();
        let d = ContentStore::random(&c, 6).unwrap();
        assert_eq!(a.file(1), b.file(1));
        assert_ne!(a.file(1), d.file(1));
    }

    #[test]
    fn demand_enumeration() {
        let all: Vec<DemandVector> = DemandVector::enumerate(3, 2).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0].as_slice(), &[1, 1]);
        assert_eq!(all[5].as_slice(), &[2, 3]);
        assert!(DemandVector::new(3, vec![1, 4]).is_err());
    }

    fn spec(n: usize, k: usize, f: f64, ratios: Vec<f64>) -> ExperimentSpec {
        ExperimentSpec {
            n_files: n,
            n_users: k,
            cache_capacity: 1.0,
            file_bits: f,
            ratios,
            sweep_level: 2,
            grid: vec![],
        }
    }

    #[test]
    fn ratios_to_sizes_examples() {
        // K=2 gives rounding unit 2, under which these sizes are exact.
        let mut r = vec![0.0; 10];
        r[9] = 1.0;
        let c = ratios_to_sizes(&spec(10, 2, 1e6, r)).unwrap();
        assert_eq!(c.level_size(10), 1e6);

        let mut r = vec![0.0; 10];
        r[1] = 1.0;
        let c = ratios_to_sizes(&spec(10, 2, 9e5, r)).unwrap();
        assert_eq!(c.level_size(2), 1e5);

        let mut r = vec![0.0; 10];
        r[0] = 0.5;
        r[1] = 0.5;
        let c = ratios_to_sizes(&spec(10, 2, 1e6, r.clone())).unwrap();
        assert_eq!(c.level_size(1), 5e5);
        assert_eq!(c.level_size(2), 55554.0);

        // K=10: unit 2520; every level divisible, deviation within N units.
        let c = ratios_to_sizes(&spec(10, 10, 1e6, r)).unwrap();
        for l in 1..=10 {
            assert_eq!(c.level_size(l) % 2520.0, 0.0);
        }
        assert_eq!(c.level_size(1), 498_960.0);
        assert_eq!(c.level_size(2), 55_440.0);
        assert!((1e6 - c.file_size()).abs() <= 10.0 * 2520.0);
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let err = ratios_to_sizes(&spec(2, 2, 100.0, vec![0.5, 0.4])).unwrap_err();
        assert!(matches!(err, Error::RatiosNotNormalized { .. }));
    }

    #[test]
    fn allocation_feasibility() {
        let c = LibraryConfig::from_bits(2, 2, 1.0, &[1, 2]).unwrap(); // F = 3
        assert!(CacheAllocation::new(vec![0.0, 1.0]).unwrap().is_feasible(&c));
        assert!(!CacheAllocation::new(vec![1.0, 1.0]).unwrap().is_feasible(&c));
        assert!(CacheAllocation::new(vec![1.2, 0.0]).is_err());
        let a = CacheAllocation::from_t(2, &[1.0, 2.0]).unwrap();
        assert_eq!(a.fractions(), &[0.5, 1.0]);
    }
}
