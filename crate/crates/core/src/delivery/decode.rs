use std::collections::{HashMap, HashSet};

use super::{Layout, PartKey, Provenance, Scheme, Transcript, Transmission, Unit, UserCache};
use crate::bits::BitBuf;
use crate::combinatorics::subsets_of_size;
use crate::error::{Error, Result};
use crate::gf256;
use crate::model::{ContentStore, DemandVector, SubfileId};

use super::transmit::DeliveryMethod;

/// Solves the XOR equations of one coded segment for every part they
/// determine, treating parts not in the cache as unknowns.
fn solve_xor(cache: &UserCache, txs: &[Transmission], out: &mut HashMap<PartKey, BitBuf>) {
    let mut index: HashMap<PartKey, usize> = HashMap::new();
    let mut keys = Vec::new();
    let mut sparse = Vec::with_capacity(txs.len());
    for tx in txs {
        let Provenance::Xor { terms, .. } = &tx.provenance else {
            continue;
        };
        let mut rhs = tx.payload.clone();
        let mut vars = Vec::new();
        for term in terms {
            match cache.part(term) {
                Some(bits) => rhs.xor_assign(bits),
                None => {
                    let next = keys.len();
                    let v = *index.entry(*term).or_insert_with(|| {
                        keys.push(*term);
                        next
                    });
                    vars.push(v);
                }
            }
        }
        sparse.push((vars, rhs));
    }
    let words = keys.len().div_ceil(64);
    let mut rows: Vec<(Vec<u64>, BitBuf)> = sparse
        .into_iter()
        .map(|(vars, rhs)| {
            let mut c = vec![0u64; words];
            for v in vars {
                c[v / 64] ^= 1 << (v % 64);
            }
            (c, rhs)
        })
        .collect();

    let mut pivot = 0;
    for col in 0..keys.len() {
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let Some(r) = (pivot..rows.len()).find(|&r| rows[r].0[w] & bit != 0) else {
            continue;
        };
        rows.swap(pivot, r);
        let (pc, prhs) = rows[pivot].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != pivot && row.0[w] & bit != 0 {
                row.0.iter_mut().zip(&pc).for_each(|(a, b)| *a ^= b);
                row.1.xor_assign(&prhs);
            }
        }
        pivot += 1;
    }
    for (c, rhs) in rows.into_iter().take(pivot) {
        let ones: u32 = c.iter().map(|w| w.count_ones()).sum();
        if ones == 1 {
            let col = c
                .iter()
                .enumerate()
                .find(|(_, w)| **w != 0)
                .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
                .unwrap();
            out.insert(keys[col], rhs);
        }
    }
}

/// Solves the random combinations of one unit's sublayer for the parts the
/// user does not hold.
fn solve_combos(
    cache: &UserCache,
    layout: &Layout,
    unit: Unit,
    sublayer: usize,
    txs: &[&Transmission],
    out: &mut HashMap<PartKey, BitBuf>,
) {
    let sl = layout.unit_sublayers(unit)[sublayer];
    let labels = subsets_of_size(layout.all_users(), sl.t);
    let key = |label| PartKey {
        unit,
        sublayer,
        label,
    };
    let unknown: Vec<usize> = (0..labels.len())
        .filter(|&i| cache.part(&key(labels[i])).is_none())
        .collect();
    let mut rows: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for tx in txs {
        let Provenance::RandomCombo { coefficients, .. } = &tx.provenance else {
            continue;
        };
        let mut rhs = tx.payload.as_bytes().to_vec();
        for (i, &c) in coefficients.iter().enumerate() {
            if let Some(bits) = cache.part(&key(labels[i])) {
                gf256::mul_add_into(&mut rhs, bits.as_bytes(), c);
            }
        }
        rows.push((unknown.iter().map(|&i| coefficients[i]).collect(), rhs));
    }
    let mut pivot = 0;
    for col in 0..unknown.len() {
        let Some(r) = (pivot..rows.len()).find(|&r| rows[r].0[col] != 0) else {
            continue;
        };
        rows.swap(pivot, r);
        let inv = gf256::inv(rows[pivot].0[col]);
        gf256::scale(&mut rows[pivot].0, inv);
        gf256::scale(&mut rows[pivot].1, inv);
        let (pc, prhs) = rows[pivot].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            let c = row.0[col];
            if i != pivot && c != 0 {
                gf256::mul_add_into(&mut row.0, &pc, c);
                gf256::mul_add_into(&mut row.1, &prhs, c);
            }
        }
        pivot += 1;
    }
    for (c, rhs) in rows.into_iter().take(pivot) {
        let nz: Vec<usize> = (0..c.len()).filter(|&i| c[i] != 0).collect();
        if let [col] = nz[..] {
            out.insert(
                key(labels[unknown[col]]),
                BitBuf::from_bytes(rhs, sl.part_len()),
            );
        }
    }
}

/// Reconstructs the given units from a user's cache and a transcript.
pub fn recover_units(
    cache: &UserCache,
    layout: &Layout,
    transcript: &Transcript,
    wanted: &[Unit],
) -> Result<Vec<BitBuf>> {
    let user = cache.user;
    let me = 1u32 << (user - 1);
    let all = layout.all_users();
    let wanted_set: HashSet<Unit> = wanted.iter().copied().collect();
    let mut missing: HashSet<PartKey> = HashSet::new();
    if layout.scheme != Scheme::Cauc {
        for &unit in wanted {
            for (si, sl) in layout.unit_sublayers(unit).iter().enumerate() {
                for label in subsets_of_size(all, sl.t) {
                    if label & me == 0 {
                        missing.insert(PartKey {
                            unit,
                            sublayer: si,
                            label,
                        });
                    }
                }
            }
        }
    }

    let mut recovered: HashMap<PartKey, BitBuf> = HashMap::new();
    let mut suffixes: HashMap<SubfileId, BitBuf> = HashMap::new();
    for (i, seg) in transcript.segments.iter().enumerate() {
        let txs = transcript.segment_transmissions(i);
        match seg.method {
            DeliveryMethod::Coded => {
                let touches = txs.iter().any(|tx| match &tx.provenance {
                    Provenance::Xor { terms, .. } => terms.iter().any(|t| missing.contains(t)),
                    _ => false,
                });
                if touches {
                    solve_xor(cache, txs, &mut recovered);
                }
            }
            DeliveryMethod::Random => {
                let mut groups: HashMap<(Unit, usize), Vec<&Transmission>> = HashMap::new();
                for tx in txs {
                    if let Provenance::RandomCombo { unit, sublayer, .. } = tx.provenance {
                        if wanted_set.contains(&unit) {
                            groups.entry((unit, sublayer)).or_default().push(tx);
                        }
                    }
                }
                for ((unit, sublayer), g) in groups {
                    solve_combos(cache, layout, unit, sublayer, &g, &mut recovered);
                }
            }
            DeliveryMethod::Uncoded => {
                for tx in txs {
                    if let Provenance::Uncoded { subfile, .. } = tx.provenance {
                        if wanted_set.contains(&Unit::Subfile(subfile)) {
                            suffixes.insert(subfile, tx.payload.clone());
                        }
                    }
                }
            }
        }
    }

    let fail = |what: String| Error::Undecodable { user, reason: what };
    wanted
        .iter()
        .map(|&unit| {
            let mut bits = BitBuf::default();
            if layout.scheme == Scheme::Cauc {
                let Unit::Subfile(id) = unit else {
                    return Err(fail(format!("{unit} is not a subfile")));
                };
                let size = layout.unit_bits[id.level() - 1];
                let prefix = layout.prefix[id.level() - 1];
                if prefix > 0 {
                    bits.extend(cache.prefix(id).ok_or_else(|| fail(format!("no prefix of {unit}")))?);
                }
                if prefix < size {
                    bits.extend(
                        suffixes
                            .get(&id)
                            .ok_or_else(|| fail(format!("suffix of {unit} not delivered")))?,
                    );
                }
                return Ok(bits);
            }
            for (si, sl) in layout.unit_sublayers(unit).iter().enumerate() {
                let labels = subsets_of_size(all, sl.t);
                for label in labels {
                    let key = PartKey {
                        unit,
                        sublayer: si,
                        label,
                    };
                    let part = cache
                        .part(&key)
                        .or_else(|| recovered.get(&key))
                        .ok_or_else(|| fail(format!("part {key} not recoverable")))?;
                    bits.extend(part);
                }
            }
            Ok(bits)
        })
        .collect()
}

/// Reconstructs the file requested by the cache's user.
pub fn decode(
    cache: &UserCache,
    layout: &Layout,
    transcript: &Transcript,
    demands: &DemandVector,
) -> Result<BitBuf> {
    let file = demands.of(cache.user);
    let units: Vec<Unit> = match layout.scheme {
        Scheme::Cicc => vec![Unit::File(file)],
        _ => ContentStore::layout(layout.n_files, file)
            .into_iter()
            .map(Unit::Subfile)
            .collect(),
    };
    let mut out = BitBuf::default();
    for part in recover_units(cache, layout, transcript, &units)? {
        out.extend(&part);
    }
    Ok(out)
}
