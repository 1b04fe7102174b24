use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mix, Contents, Layout, PartKey, Placement, Scheme, ScheduleSource, Unit};
use crate::bits::BitBuf;
use crate::combinatorics::{binomial, bits_of, subsets_of_size};
use crate::error::{Error, Result};
use crate::gf256;
use crate::model::{ContentStore, DemandVector, SubfileId};
use crate::schedule::{step_demands, AssignmentSchedule};

/// Draws allowed per accepted random combination before giving up.
const DRAW_GUARD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmissionKind {
    Xor,
    RandomCombo,
    Uncoded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// XOR of one part per user in `users`; each user misses exactly the term
    /// whose label excludes it.
    Xor { users: u32, terms: Vec<PartKey> },
    /// GF(256) combination of all parts of one unit's sublayer, coefficients
    /// in label order.
    RandomCombo {
        unit: Unit,
        sublayer: usize,
        seed: u64,
        coefficients: Vec<u8>,
    },
    /// Raw bit range of a subfile.
    Uncoded {
        subfile: SubfileId,
        offset: usize,
        len: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub payload: BitBuf,
    pub provenance: Provenance,
    /// Index into [`Transcript::segments`].
    pub segment: usize,
}

impl Transmission {
    pub fn kind(&self) -> TransmissionKind {
        match self.provenance {
            Provenance::Xor { .. } => TransmissionKind::Xor,
            Provenance::RandomCombo { .. } => TransmissionKind::RandomCombo,
            Provenance::Uncoded { .. } => TransmissionKind::Uncoded,
        }
    }

    pub fn bits(&self) -> usize {
        self.payload.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryMethod {
    Coded,
    Random,
    Uncoded,
}

/// Which delivery procedure to run per level sublayer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Whichever needs fewer bits; ties go to coded delivery.
    #[default]
    Cheaper,
    Coded,
    Random,
}

/// A run of consecutive transmissions sharing level, sublayer and step.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// 0 for whole-file units.
    pub level: usize,
    pub sublayer: usize,
    pub t: usize,
    pub fixed_part: u32,
    /// Coded step (schedule column) index.
    pub step: Option<usize>,
    pub method: DeliveryMethod,
    pub first: usize,
    pub count: usize,
    pub bits: usize,
    pub padding_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub transmissions: Vec<Transmission>,
    pub segments: Vec<Segment>,
    /// Declared bound on bits added by rounding sublayer sizes.
    pub rounding_bits: f64,
    /// Bits sent beyond exact rank sufficiency by random combinations.
    pub overshoot_bits: usize,
    pub content_seed: u64,
}

impl Transcript {
    pub fn new(content_seed: u64) -> Self {
        Self {
            content_seed,
            ..Default::default()
        }
    }

    fn push(&mut self, mut seg: Segment, txs: Vec<Transmission>) {
        if txs.is_empty() {
            return;
        }
        let idx = self.segments.len();
        seg.first = self.transmissions.len();
        seg.count = txs.len();
        seg.bits = txs.iter().map(Transmission::bits).sum();
        self.transmissions
            .extend(txs.into_iter().map(|tx| Transmission { segment: idx, ..tx }));
        self.segments.push(seg);
    }

    pub fn append(&mut self, other: Transcript) {
        let base_seg = self.segments.len();
        let base_tx = self.transmissions.len();
        self.segments.extend(other.segments.into_iter().map(|mut s| {
            s.first += base_tx;
            s
        }));
        self.transmissions
            .extend(other.transmissions.into_iter().map(|mut t| {
                t.segment += base_seg;
                t
            }));
        self.rounding_bits += other.rounding_bits;
        self.overshoot_bits += other.overshoot_bits;
    }

    pub fn total_bits(&self) -> usize {
        self.segments.iter().map(|s| s.bits).sum()
    }

    pub fn padding_bits(&self) -> usize {
        self.segments.iter().map(|s| s.padding_bits).sum()
    }

    /// Everything the measured rate may exceed the formula by.
    pub fn slack_bits(&self) -> f64 {
        self.padding_bits() as f64 + self.overshoot_bits as f64 + self.rounding_bits
    }

    pub fn rate(&self, file_size: f64) -> f64 {
        self.total_bits() as f64 / file_size
    }

    pub fn level_bits(&self, level: usize) -> usize {
        self.segments
            .iter()
            .filter(|s| s.level == level)
            .map(|s| s.bits)
            .sum()
    }

    /// Transmission counts of the coded steps at `level`, in order.
    pub fn step_counts(&self, level: usize) -> Vec<usize> {
        self.segments
            .iter()
            .filter(|s| s.level == level && s.method == DeliveryMethod::Coded)
            .map(|s| s.count)
            .collect()
    }

    pub fn segment_transmissions(&self, seg: usize) -> &[Transmission] {
        let s = &self.segments[seg];
        &self.transmissions[s.first..s.first + s.count]
    }

    /// Line-oriented log: one line per segment, then one per transmission.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.segments.iter().enumerate() {
            let step = s.step.map_or("-".to_string(), |j| (j + 1).to_string());
            let _ = writeln!(
                out,
                "segment {i} level={} sublayer={} t={} fixed={:#b} step={step} method={:?} count={} bits={}",
                s.level, s.sublayer, s.t, s.fixed_part, s.method, s.count, s.bits
            );
            for tx in self.segment_transmissions(i) {
                let _ = match &tx.provenance {
                    Provenance::Xor { terms, .. } => {
                        let terms: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
                        writeln!(out, "  xor {} {}", tx.bits(), terms.join(" ^ "))
                    }
                    Provenance::RandomCombo { unit, seed, .. } => {
                        writeln!(out, "  random_combo {} {unit} seed={seed:#x}", tx.bits())
                    }
                    Provenance::Uncoded {
                        subfile,
                        offset,
                        len,
                    } => writeln!(out, "  uncoded {} W{subfile}[{offset}..{}]", tx.bits(), offset + len),
                };
            }
        }
        let _ = writeln!(
            out,
            "total_bits={} padding_bits={} rounding_bits={} seed={}",
            self.total_bits(),
            self.padding_bits(),
            self.rounding_bits,
            self.content_seed
        );
        out
    }
}

/// Leader-based XOR delivery for one step in which user `k` wants
/// `units[k - 1]`.
fn coded_xors(
    contents: &Contents,
    layout: &Layout,
    units: &[Unit],
    sublayer: usize,
    t: usize,
) -> Vec<Transmission> {
    let mut leaders = 0u32;
    for (i, u) in units.iter().enumerate() {
        if !units[..i].contains(u) {
            leaders |= 1 << i;
        }
    }
    subsets_of_size(layout.all_users(), t + 1)
        .into_iter()
        .filter(|v| v & leaders != 0)
        .map(|v| {
            let terms: Vec<PartKey> = bits_of(v)
                .map(|b| PartKey {
                    unit: units[b as usize],
                    sublayer,
                    label: v & !(1 << b),
                })
                .collect();
            let mut payload = BitBuf::default();
            for &key in &terms {
                payload.xor_assign(&contents.part(layout, key));
            }
            Transmission {
                payload,
                provenance: Provenance::Xor { users: v, terms },
                segment: 0,
            }
        })
        .collect()
}

fn check_users(layout: &Layout, demands: &DemandVector) -> Result<()> {
    if demands.n_users() != layout.n_users || demands.as_slice().iter().any(|&d| d > layout.n_files)
    {
        return Err(Error::InvalidDemand(format!(
            "{} demands for {} users over {} files",
            demands.n_users(),
            layout.n_users,
            layout.n_files
        )));
    }
    Ok(())
}

/// XOR transmissions of one step (schedule column `column`, 0-based) for
/// level sublayer `sublayer`.
pub fn coded_delivery_step(
    layout: &Layout,
    store: &ContentStore,
    schedule: &AssignmentSchedule,
    column: usize,
    demands: &DemandVector,
    sublayer: usize,
) -> Result<Vec<Transmission>> {
    check_users(layout, demands)?;
    let sl = layout.sublayers[schedule.level() - 1][sublayer];
    let sd = step_demands(schedule, demands, column)?;
    let units: Vec<Unit> = sd.per_user.iter().map(|&s| Unit::Subfile(s)).collect();
    Ok(coded_xors(
        &Contents::new(store, false),
        layout,
        &units,
        sublayer,
        sl.t,
    ))
}

/// Subfiles of `level` that contain at least one demanded file.
fn relevant_subfiles(n: usize, level: usize, demands: &DemandVector) -> Vec<SubfileId> {
    let req = demands.requested_mask();
    subsets_of_size((1u32 << n) - 1, level)
        .into_iter()
        .filter(|m| m & req != 0)
        .map(|m| SubfileId::from_mask(m).expect("nonzero mask"))
        .collect()
}

/// Incrementally maintained row-echelon basis over GF(256).
struct Basis {
    rows: Vec<(usize, Vec<u8>)>,
}

impl Basis {
    fn reduce(&self, v: &mut [u8]) {
        for (p, row) in &self.rows {
            let c = v[*p];
            if c != 0 {
                gf256::mul_add_into(v, row, c);
            }
        }
    }

    /// Adds `v` (already reduced) if nonzero.
    fn insert(&mut self, mut v: Vec<u8>) {
        let Some(p) = v.iter().position(|&c| c != 0) else {
            return;
        };
        let inv = gf256::inv(v[p]);
        gf256::scale(&mut v, inv);
        for (_, row) in self.rows.iter_mut() {
            let c = row[p];
            if c != 0 {
                gf256::mul_add_into(row, &v, c);
            }
        }
        self.rows.push((p, v));
    }
}

/// Random-combination delivery of every subfile of `level` touched by the
/// demands: per subfile, combinations are drawn until every requester can
/// solve for its missing parts. A candidate is kept only if it is innovative
/// for every requester still short of full rank, so exactly `binom(K-1, t)`
/// combinations are sent per subfile.
pub fn random_delivery(
    layout: &Layout,
    store: &ContentStore,
    level: usize,
    sublayer: usize,
    demands: &DemandVector,
    seed: u64,
) -> Result<Vec<Transmission>> {
    check_users(layout, demands)?;
    let sl = layout.sublayers[level - 1][sublayer];
    let k = layout.n_users;
    let labels = subsets_of_size(layout.all_users(), sl.t);
    let needed = binomial(k - 1, sl.t) as usize;
    let contents = Contents::new(store, false);
    let mut out = Vec::new();
    if needed == 0 {
        return Ok(out);
    }
    for s in relevant_subfiles(layout.n_files, level, demands) {
        let unit = Unit::Subfile(s);
        let parts: Vec<BitBuf> = labels
            .iter()
            .map(|&label| {
                contents.part(
                    layout,
                    PartKey {
                        unit,
                        sublayer,
                        label,
                    },
                )
            })
            .collect();
        let requesters: Vec<usize> = (0..k).filter(|&u| s.contains(demands.of(u + 1))).collect();
        // coordinates each requester does not hold
        let unknown: Vec<Vec<bool>> = requesters
            .iter()
            .map(|&u| labels.iter().map(|l| l & (1 << u) == 0).collect())
            .collect();
        let mut bases: Vec<Basis> = requesters.iter().map(|_| Basis { rows: vec![] }).collect();
        let sub_seed = mix(seed, s.mask() as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        let mut draws = 0;
        while bases.iter().any(|b| b.rows.len() < needed) {
            draws += 1;
            if draws > DRAW_GUARD * needed {
                return Err(Error::Undecodable {
                    user: requesters[0] + 1,
                    reason: format!("no innovative combination found for {s}"),
                });
            }
            let coeffs: Vec<u8> = (0..labels.len()).map(|_| rng.gen()).collect();
            let mut reduced = Vec::with_capacity(bases.len());
            let mut ok = true;
            for (b, mask) in bases.iter().zip(&unknown) {
                if b.rows.len() == needed {
                    reduced.push(None);
                    continue;
                }
                let mut v: Vec<u8> = coeffs
                    .iter()
                    .zip(mask)
                    .map(|(&c, &u)| if u { c } else { 0 })
                    .collect();
                b.reduce(&mut v);
                if v.iter().all(|&c| c == 0) {
                    ok = false;
                    break;
                }
                reduced.push(Some(v));
            }
            if !ok {
                continue;
            }
            for (b, v) in bases.iter_mut().zip(reduced) {
                if let Some(v) = v {
                    b.insert(v);
                }
            }
            let bytes = sl.part_len().div_ceil(8);
            let mut acc = vec![0u8; bytes];
            for (p, &c) in parts.iter().zip(&coeffs) {
                gf256::mul_add_into(&mut acc, p.as_bytes(), c);
            }
            out.push(Transmission {
                payload: BitBuf::from_bytes(acc, bytes * 8),
                provenance: Provenance::RandomCombo {
                    unit,
                    sublayer,
                    seed: sub_seed,
                    coefficients: coeffs,
                },
                segment: 0,
            });
        }
    }
    Ok(out)
}

/// Windows `(R, R̄)` served at `level`.
fn windows(n: usize, k: usize, demands: &DemandVector, level: usize) -> Vec<(u32, u32)> {
    let all = (1u32 << n) - 1;
    if n <= k {
        return vec![(all, 0)];
    }
    let mut window = demands.requested_mask();
    for b in 0..n {
        if window.count_ones() as usize >= k {
            break;
        }
        window |= 1 << b;
    }
    let rest = all & !window;
    let lo = level.saturating_sub(k);
    let hi = (level - 1).min(n - k);
    (lo..=hi)
        .flat_map(|s| subsets_of_size(rest, s).into_iter().map(move |f| (window, f)))
        .collect()
}

/// Delivery for one level.
pub fn deliver_level(
    placement: &Placement,
    level: usize,
    demands: &DemandVector,
    store: &ContentStore,
    schedules: &ScheduleSource,
    strategy: Strategy,
) -> Result<Transcript> {
    let layout = &placement.layout;
    check_users(layout, demands)?;
    if layout.scheme != Scheme::Cacc {
        return Err(Error::InvalidConfig(format!(
            "level delivery needs a cacc layout, got {}",
            layout.scheme
        )));
    }
    let n = layout.n_files;
    let k = layout.n_users;
    if level == 0 || level > n {
        return Err(Error::LevelOutOfRange { level, n_files: n });
    }
    let mut transcript = Transcript::new(store.seed());
    let contents = Contents::new(store, false);
    let wins = windows(n, k, demands, level);

    for (si, sl) in layout.sublayers[level - 1].iter().enumerate() {
        let part = sl.part_len();
        // per window: schedule and per-column step-demand units
        let mut plan = Vec::new();
        let mut coded_count = 0u64;
        for &(w, fx) in &wins {
            let sched = schedules.get(w, fx, level)?;
            for j in 0..sched.n_columns() {
                let sd = step_demands(&sched, demands, j)?;
                let a = sd.distinct();
                coded_count += binomial(k, sl.t + 1) - binomial(k - a, sl.t + 1);
                let units: Vec<Unit> = sd.per_user.iter().map(|&s| Unit::Subfile(s)).collect();
                plan.push((fx, j, units));
            }
        }
        let coded_bits = coded_count as usize * part;
        let relevant = relevant_subfiles(n, level, demands).len();
        let random_bits = relevant * binomial(k - 1, sl.t) as usize * part.div_ceil(8) * 8;
        let use_coded = match strategy {
            Strategy::Cheaper => coded_bits <= random_bits,
            Strategy::Coded => true,
            Strategy::Random => false,
        };

        let seg = |fixed_part, step, method| Segment {
            level,
            sublayer: si,
            t: sl.t,
            fixed_part,
            step,
            method,
            first: 0,
            count: 0,
            bits: 0,
            padding_bits: 0,
        };
        if use_coded {
            for (fx, j, units) in plan {
                let txs = coded_xors(&contents, layout, &units, si, sl.t);
                transcript.push(seg(fx, Some(j), DeliveryMethod::Coded), txs);
            }
        } else {
            let seed = mix(store.seed(), (level as u64) << 8 | si as u64);
            let txs = random_delivery(layout, store, level, si, demands, seed)?;
            let mut s = seg(0, None, DeliveryMethod::Random);
            s.padding_bits = txs.len() * (part.div_ceil(8) * 8 - part);
            transcript.push(s, txs);
        }
    }
    Ok(transcript)
}

/// Coded-scheme delivery over all levels.
pub fn deliver_with(
    placement: &Placement,
    demands: &DemandVector,
    store: &ContentStore,
    schedules: &ScheduleSource,
    strategy: Strategy,
) -> Result<Transcript> {
    let mut transcript = Transcript::new(store.seed());
    transcript.rounding_bits = placement.layout.rounding_bits;
    for level in 1..=placement.layout.n_files {
        transcript.append(deliver_level(
            placement, level, demands, store, schedules, strategy,
        )?);
    }
    Ok(transcript)
}

pub fn deliver(
    placement: &Placement,
    demands: &DemandVector,
    store: &ContentStore,
    schedules: &ScheduleSource,
) -> Result<Transcript> {
    deliver_with(placement, demands, store, schedules, Strategy::Cheaper)
}

/// Uncoded delivery of the uncached suffix of every subfile touching a
/// demanded file.
pub fn cauc_deliver(
    placement: &Placement,
    demands: &DemandVector,
    store: &ContentStore,
) -> Result<Transcript> {
    let layout = &placement.layout;
    check_users(layout, demands)?;
    if layout.scheme != Scheme::Cauc {
        return Err(Error::InvalidConfig("uncoded delivery needs a cauc layout".into()));
    }
    let mut transcript = Transcript::new(store.seed());
    transcript.rounding_bits = layout.rounding_bits;
    for level in 1..=layout.n_files {
        let bits = layout.unit_bits[level - 1];
        let prefix = layout.prefix[level - 1];
        if prefix >= bits {
            continue;
        }
        let txs = relevant_subfiles(layout.n_files, level, demands)
            .into_iter()
            .map(|s| Transmission {
                payload: store.subfile(s).slice(prefix, bits - prefix),
                provenance: Provenance::Uncoded {
                    subfile: s,
                    offset: prefix,
                    len: bits - prefix,
                },
                segment: 0,
            })
            .collect();
        transcript.push(
            Segment {
                level,
                sublayer: 0,
                t: 0,
                fixed_part: 0,
                step: None,
                method: DeliveryMethod::Uncoded,
                first: 0,
                count: 0,
                bits: 0,
                padding_bits: 0,
            },
            txs,
        );
    }
    Ok(transcript)
}

/// Leader-based coded delivery treating every file as one unit.
pub fn cicc_deliver(
    placement: &Placement,
    demands: &DemandVector,
    store: &ContentStore,
) -> Result<Transcript> {
    let layout = &placement.layout;
    check_users(layout, demands)?;
    if layout.scheme != Scheme::Cicc {
        return Err(Error::InvalidConfig("baseline delivery needs a cicc layout".into()));
    }
    let contents = Contents::new(store, true);
    let units: Vec<Unit> = demands.as_slice().iter().map(|&d| Unit::File(d)).collect();
    let mut transcript = Transcript::new(store.seed());
    transcript.rounding_bits = layout.rounding_bits;
    for (si, sl) in layout.sublayers[0].iter().enumerate() {
        let txs = coded_xors(&contents, layout, &units, si, sl.t);
        transcript.push(
            Segment {
                level: 0,
                sublayer: si,
                t: sl.t,
                fixed_part: 0,
                step: Some(0),
                method: DeliveryMethod::Coded,
                first: 0,
                count: 0,
                bits: 0,
                padding_bits: 0,
            },
            txs,
        );
    }
    Ok(transcript)
}
