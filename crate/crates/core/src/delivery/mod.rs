//! Bit-exact placement, delivery and decoding.
//!
//! Content is addressed in *units*: subfiles for the correlation-aware
//! schemes, whole files for the correlation-ignorant baseline. A unit is cut
//! into one or two *sublayers*, each run at an integer caching parameter `t`
//! and split into `binom(K, t)` equal parts labelled by `t`-subsets of users.
//! User `k` caches exactly the parts whose label contains `k`.

mod decode;
mod placement;
mod transmit;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

pub use decode::{decode, recover_units};
pub use placement::{place, place_cauc, place_cicc, place_layout, plan_cacc, plan_cauc, plan_cicc};
pub use transmit::{
    cauc_deliver, cicc_deliver, coded_delivery_step, deliver, deliver_level, deliver_with,
    random_delivery, DeliveryMethod, Provenance, Segment, Strategy, Transcript, Transmission,
    TransmissionKind,
};

use crate::bits::BitBuf;
use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::model::{ContentStore, SubfileId};
use crate::schedule::{generate_schedule, AssignmentSchedule};

/// Addressable piece of content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Unit {
    Subfile(SubfileId),
    /// A whole file, 1-based.
    File(usize),
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unit::Subfile(s) => write!(f, "W{s}"),
            Unit::File(i) => write!(f, "F{i}"),
        }
    }
}

/// One labelled part of a unit's sublayer. `label` is a bitmask over users
/// (bit `k - 1` for user `k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartKey {
    pub unit: Unit,
    pub sublayer: usize,
    pub label: u32,
}

impl fmt::Display for PartKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let users: Vec<String> = crate::combinatorics::bits_of(self.label)
            .map(|b| (b + 1).to_string())
            .collect();
        write!(f, "{}.{}[{}]", self.unit, self.sublayer, users.join(","))
    }
}

/// A contiguous bit range of every unit at one level, run at integer `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sublayer {
    pub t: usize,
    pub offset: usize,
    pub len: usize,
    /// `binom(K, t)`.
    pub parts: usize,
}

impl Sublayer {
    pub fn part_len(&self) -> usize {
        self.len / self.parts
    }
}

/// Position of a label among all labels of its size, in ascending numeric
/// order.
pub fn label_rank(label: u32) -> usize {
    crate::combinatorics::bits_of(label)
        .enumerate()
        .map(|(i, b)| binomial(b as usize, i + 1) as usize)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Correlation-aware uncoded caching.
    Cauc,
    /// Correlation-aware coded caching.
    Cacc,
    /// Correlation-ignorant coded caching over whole files.
    Cicc,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Cauc => "cauc",
            Scheme::Cacc => "cacc",
            Scheme::Cicc => "cicc",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cauc" => Ok(Scheme::Cauc),
            "cacc" => Ok(Scheme::Cacc),
            "cicc" => Ok(Scheme::Cicc),
            other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }
}

/// How a caching parameter that is not an envelope vertex is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SharingPolicy {
    /// Split between the bracketing vertices of the level's convex envelope.
    #[default]
    Envelope,
    /// Run integer `t` as is; split fractional `t` between `floor` and `ceil`.
    Direct,
}

/// How units are split and cached, shared by server and users.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub scheme: Scheme,
    pub n_files: usize,
    pub n_users: usize,
    /// CACC: sublayers per level (index `l - 1`). CICC: one entry for files.
    pub sublayers: Vec<Vec<Sublayer>>,
    /// CAUC: cached prefix bits per level (index `l - 1`).
    pub prefix: Vec<usize>,
    /// Size in bits of a unit at each level (CICC: one entry, `F`).
    pub unit_bits: Vec<usize>,
    /// Upper bound on extra delivered bits caused by rounding sublayer sizes.
    pub rounding_bits: f64,
    /// Upper bound on extra cached bits per user caused by the same rounding.
    pub cache_rounding_bits: f64,
}

impl Layout {
    pub fn unit_sublayers(&self, unit: Unit) -> &[Sublayer] {
        match unit {
            Unit::Subfile(s) => self
                .sublayers
                .get(s.level() - 1)
                .map_or(&[], |v| v.as_slice()),
            Unit::File(_) => self.sublayers.first().map_or(&[], |v| v.as_slice()),
        }
    }

    pub fn all_users(&self) -> u32 {
        (1u32 << self.n_users) - 1
    }
}

/// A user's cache contents.
#[derive(Debug, Clone, Default)]
pub struct UserCache {
    /// 1-based user index.
    pub user: usize,
    parts: HashMap<PartKey, BitBuf>,
    prefixes: HashMap<SubfileId, BitBuf>,
}

impl UserCache {
    pub fn new(user: usize) -> Self {
        Self {
            user,
            ..Default::default()
        }
    }

    pub fn part(&self, key: &PartKey) -> Option<&BitBuf> {
        self.parts.get(key)
    }

    pub fn prefix(&self, id: SubfileId) -> Option<&BitBuf> {
        self.prefixes.get(&id)
    }

    pub fn part_keys(&self) -> impl Iterator<Item = &PartKey> {
        self.parts.keys()
    }

    pub fn insert_part(&mut self, key: PartKey, bits: BitBuf) {
        self.parts.insert(key, bits);
    }

    pub fn insert_prefix(&mut self, id: SubfileId, bits: BitBuf) {
        self.prefixes.insert(id, bits);
    }

    pub fn cached_bits(&self) -> usize {
        self.parts.values().map(BitBuf::len).sum::<usize>()
            + self.prefixes.values().map(BitBuf::len).sum::<usize>()
    }
}

/// Layout plus every user's cache.
#[derive(Debug, Clone)]
pub struct Placement {
    pub layout: Layout,
    pub caches: Vec<UserCache>,
}

/// Read access to unit contents; whole files are assembled once.
pub(crate) struct Contents<'a> {
    store: &'a ContentStore,
    files: Vec<BitBuf>,
}

impl<'a> Contents<'a> {
    pub(crate) fn new(store: &'a ContentStore, with_files: bool) -> Self {
        let files = if with_files {
            (1..=store.n_files()).map(|i| store.file(i)).collect()
        } else {
            Vec::new()
        };
        Self { store, files }
    }

    pub(crate) fn unit(&self, unit: Unit) -> &BitBuf {
        match unit {
            Unit::Subfile(s) => self.store.subfile(s),
            Unit::File(i) => &self.files[i - 1],
        }
    }

    pub(crate) fn part(&self, layout: &Layout, key: PartKey) -> BitBuf {
        let sl = layout.unit_sublayers(key.unit)[key.sublayer];
        let len = sl.part_len();
        self.unit(key.unit)
            .slice(sl.offset + label_rank(key.label) * len, len)
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

type ScheduleKey = (u32, u32, usize);

/// Supplies assignment schedules per `(window, fixed part, level)`.
///
/// Fixtures take precedence; anything else is generated from a seed derived
/// from the source seed and the key, and memoized.
#[derive(Debug, Default)]
pub struct ScheduleSource {
    seed: u64,
    fixtures: Vec<AssignmentSchedule>,
    cache: Mutex<HashMap<ScheduleKey, Arc<AssignmentSchedule>>>,
}

impl ScheduleSource {
    pub fn generated(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    pub fn with_fixture(mut self, schedule: AssignmentSchedule) -> Self {
        self.fixtures.push(schedule);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, window: u32, fixed: u32, level: usize) -> Result<Arc<AssignmentSchedule>> {
        let key = (window, fixed, level);
        if let Some(s) = self.cache.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let schedule = match self.fixtures.iter().find(|s| {
            s.window() == window && s.fixed_part() == fixed && s.level() == level
        }) {
            Some(s) => s.clone(),
            None => {
                let salt = (window as u64) << 32 | (fixed as u64) << 8 | level as u64;
                generate_schedule(window, fixed, level, mix(self.seed, salt))?
            }
        };
        let schedule = Arc::new(schedule);
        self.cache.lock().unwrap().insert(key, schedule.clone());
        Ok(schedule)
    }
}
