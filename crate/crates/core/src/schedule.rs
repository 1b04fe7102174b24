//! Step-assignment schedules.
//!
//! A schedule for window `R`, fixed part `R̄` (with `s = |R̄|`) and level `l`
//! covers the subfiles `S ∪ R̄` with `S ⊆ R`, `|S| = l - s`. Column `j` maps
//! every window file `i` to the subfile `c_ij` that users requesting `i`
//! recover in delivery step `j`. Over all `binom(|R|-1, l-s-1)` columns each
//! window file is mapped to every subfile containing it exactly once.
//!
//! Construction per column: cover the window with blocks of `l - s` files,
//! each block taking one unused subfile. When fewer than `l - s` files remain,
//! an unused subfile covering the remainder is chosen and its other members
//! receive it at the head of the next column (the "carry").

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::combinatorics::{binomial, bits_of, subsets_of_size};
use crate::error::{Error, Result};
use crate::model::{DemandVector, SubfileId};

/// Randomized greedy attempts before falling back to exhaustive search.
pub const RESTARTS: u64 = 1000;
/// Node budget of the backtracking fallback.
pub const BACKTRACK_BUDGET: u64 = 20_000_000;

/// Bitmask over 1-based file indices.
pub fn file_mask(files: &[usize]) -> u32 {
    files.iter().fold(0, |m, &i| m | 1 << (i - 1))
}

fn mask_files(mask: u32) -> Vec<usize> {
    bits_of(mask).map(|b| b as usize + 1).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentSchedule {
    window: u32,
    fixed_part: u32,
    level: usize,
    /// `columns[j][p]` is the subfile for the `p`-th smallest window file.
    columns: Vec<Vec<SubfileId>>,
}

impl AssignmentSchedule {
    /// Wraps explicit columns without validating them.
    pub fn from_columns(
        window: u32,
        fixed_part: u32,
        level: usize,
        columns: Vec<Vec<SubfileId>>,
    ) -> Self {
        Self {
            window,
            fixed_part,
            level,
            columns,
        }
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn window_files(&self) -> Vec<usize> {
        mask_files(self.window)
    }

    pub fn fixed_part(&self) -> u32 {
        self.fixed_part
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn block_size(&self) -> usize {
        self.level - self.fixed_part.count_ones() as usize
    }

    pub fn columns(&self) -> &[Vec<SubfileId>] {
        &self.columns
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// `binom(|R| - 1, l - s - 1)`.
    pub fn expected_columns(&self) -> usize {
        let w = self.window.count_ones() as usize;
        let b = self.block_size();
        if b == 0 || w == 0 {
            return 0;
        }
        binomial(w - 1, b - 1) as usize
    }

    /// `c_ij`; `None` for files outside the window (in particular `R̄`).
    pub fn entry(&self, file: usize, column: usize) -> Option<SubfileId> {
        if file == 0 || self.window & (1 << (file - 1)) == 0 {
            return None;
        }
        let pos = (self.window & ((1 << (file - 1)) - 1)).count_ones() as usize;
        self.columns.get(column).and_then(|c| c.get(pos)).copied()
    }

    /// Plain-text fixture: a header line, then one column per line with one
    /// comma-separated index set per window file.
    pub fn to_fixture(&self) -> String {
        let join = |m: u32| {
            mask_files(m)
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = format!(
            "# level={} window={} fixed={}\n",
            self.level,
            join(self.window),
            join(self.fixed_part)
        );
        for col in &self.columns {
            let entries: Vec<String> = col.iter().map(|s| join(s.mask())).collect();
            out.push_str(&entries.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse_fixture(text: &str) -> Result<Self> {
        let mut header: Option<(usize, u32, u32)> = None;
        let mut columns = Vec::new();
        let parse_set = |s: &str, line: usize| -> Result<u32> {
            if s.is_empty() {
                return Ok(0);
            }
            s.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<usize>()
                        .ok()
                        .filter(|&i| (1..=32).contains(&i))
                        .ok_or_else(|| Error::Fixture {
                            line,
                            reason: format!("bad file index {x:?}"),
                        })
                })
                .try_fold(0u32, |m, i| Ok(m | 1 << (i? - 1)))
        };
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            if let Some(rest) = raw.strip_prefix('#') {
                let mut level = None;
                let mut window = None;
                let mut fixed = 0;
                for kv in rest.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("level", v)) => level = v.parse::<usize>().ok(),
                        Some(("window", v)) => window = Some(parse_set(v, line)?),
                        Some(("fixed", v)) => fixed = parse_set(v, line)?,
                        _ => {}
                    }
                }
                if let (Some(l), Some(w)) = (level, window) {
                    header = Some((l, w, fixed));
                }
                continue;
            }
            let Some((_, window, _)) = header else {
                return Err(Error::Fixture {
                    line,
                    reason: "column before header".into(),
                });
            };
            let col = raw
                .split_whitespace()
                .map(|e| parse_set(e, line).and_then(SubfileId::from_mask))
                .collect::<Result<Vec<_>>>()?;
            if col.len() != window.count_ones() as usize {
                return Err(Error::Fixture {
                    line,
                    reason: format!(
                        "{} entries for a window of {}",
                        col.len(),
                        window.count_ones()
                    ),
                });
            }
            columns.push(col);
        }
        let (level, window, fixed) = header.ok_or(Error::Fixture {
            line: 0,
            reason: "missing header".into(),
        })?;
        Ok(Self::from_columns(window, fixed, level, columns))
    }
}

impl fmt::Display for AssignmentSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, col) in self.columns.iter().enumerate() {
            let entries: Vec<String> = col.iter().map(|s| s.to_string()).collect();
            writeln!(f, "C{} = ({})", j + 1, entries.join(", "))?;
        }
        Ok(())
    }
}

/// Hand-built schedule for `N = 5`, `l = 2`, used as a reference fixture.
pub fn example1_schedule() -> AssignmentSchedule {
    AssignmentSchedule::parse_fixture(EXAMPLE1_FIXTURE).expect("builtin fixture parses")
}

pub const EXAMPLE1_FIXTURE: &str = "\
# level=2 window=1,2,3,4,5 fixed=
1,2 1,2 3,4 3,4 1,5
1,5 2,3 2,3 4,5 4,5
1,3 2,5 1,3 2,4 2,5
1,4 2,4 3,5 1,4 3,5
";

struct Builder {
    window: u32,
    block: usize,
    n_cols: usize,
    pool: Vec<u32>,
    used: Vec<bool>,
    cols: Vec<Vec<u32>>,
    remaining: u32,
    carry: Option<(u32, u32)>,
}

impl Builder {
    fn new(window: u32, block: usize) -> Self {
        let w = window.count_ones() as usize;
        let pool = subsets_of_size(window, block);
        Self {
            window,
            block,
            n_cols: binomial(w - 1, block - 1) as usize,
            used: vec![false; pool.len()],
            pool,
            cols: vec![vec![0; w]],
            remaining: window,
            carry: None,
        }
    }

    fn assign(&mut self, members: u32, subfile: u32) {
        let col = self.cols.last_mut().unwrap();
        for b in bits_of(members) {
            let pos = (self.window & ((1 << b) - 1)).count_ones() as usize;
            col[pos] = subfile;
        }
    }

    /// Depth-first construction. Without `backtrack`, a single random path
    /// is followed; with it, options containing the lowest remaining file are
    /// explored exhaustively.
    fn run(&mut self, rng: &mut ChaCha8Rng, backtrack: bool, budget: &mut u64) -> bool {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;

        if self.remaining == 0 {
            if self.cols.len() == self.n_cols {
                return self.carry.is_none();
            }
            let saved = self.carry;
            self.cols.push(vec![0; self.window.count_ones() as usize]);
            self.remaining = self.window;
            if let Some((s, left)) = self.carry.take() {
                self.assign(left, s);
                self.remaining &= !left;
            }
            if self.run(rng, backtrack, budget) {
                return true;
            }
            self.cols.pop();
            self.remaining = 0;
            self.carry = saved;
            return false;
        }

        let count = self.remaining.count_ones() as usize;
        let full_block = count >= self.block;
        let lowest = self.remaining & self.remaining.wrapping_neg();
        let mut options: Vec<usize> = (0..self.pool.len())
            .filter(|&i| {
                let s = self.pool[i];
                !self.used[i]
                    && if full_block {
                        s & !self.remaining == 0 && (!backtrack || s & lowest != 0)
                    } else {
                        self.remaining & !s == 0
                    }
            })
            .collect();
        options.shuffle(rng);
        if !backtrack {
            options.truncate(1);
        }

        for i in options {
            let s = self.pool[i];
            let (prev_remaining, prev_carry) = (self.remaining, self.carry);
            let prev_col = self.cols.last().unwrap().clone();
            self.used[i] = true;
            if full_block {
                self.assign(s, s);
                self.remaining &= !s;
            } else {
                self.assign(self.remaining, s);
                self.carry = Some((s, s & !self.remaining));
                self.remaining = 0;
            }
            if self.run(rng, backtrack, budget) {
                return true;
            }
            self.used[i] = false;
            self.remaining = prev_remaining;
            self.carry = prev_carry;
            *self.cols.last_mut().unwrap() = prev_col;
        }
        false
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds a schedule for the given window, fixed part and level.
pub fn generate_schedule(
    window: u32,
    fixed_part: u32,
    level: usize,
    seed: u64,
) -> Result<AssignmentSchedule> {
    let w = window.count_ones() as usize;
    let s = fixed_part.count_ones() as usize;
    let fail = Error::ScheduleConstruction {
        window: w,
        fixed: s,
        level,
    };
    if window & fixed_part != 0 || level <= s || level - s > w {
        return Err(fail);
    }
    let block = level - s;

    let finish = |b: Builder| {
        let columns = b
            .cols
            .into_iter()
            .map(|col| {
                col.into_iter()
                    .map(|m| SubfileId::from_mask(m | fixed_part).expect("nonempty"))
                    .collect()
            })
            .collect();
        AssignmentSchedule::from_columns(window, fixed_part, level, columns)
    };

    for attempt in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, attempt));
        let mut b = Builder::new(window, block);
        let mut budget = u64::MAX;
        if b.run(&mut rng, false, &mut budget) {
            return Ok(finish(b));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, RESTARTS));
    let mut b = Builder::new(window, block);
    let mut budget = BACKTRACK_BUDGET;
    if b.run(&mut rng, true, &mut budget) {
        return Ok(finish(b));
    }
    Err(fail)
}

/// A broken schedule invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ColumnCount { expected: usize, got: usize },
    ColumnLength { column: usize, expected: usize, got: usize },
    Membership { column: usize, file: usize, subfile: SubfileId },
    Coverage { file: usize, subfile: SubfileId, count: usize },
    Width { column: usize, distinct: usize, bound: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ColumnCount { expected, got } => {
                write!(f, "expected {expected} columns, found {got}")
            }
            Violation::ColumnLength {
                column,
                expected,
                got,
            } => write!(f, "column {column}: {got} entries, expected {expected}"),
            Violation::Membership {
                column,
                file,
                subfile,
            } => write!(f, "column {column}: file {file} mapped to {subfile}"),
            Violation::Coverage {
                file,
                subfile,
                count,
            } => write!(f, "file {file} receives {subfile} {count} times"),
            Violation::Width {
                column,
                distinct,
                bound,
            } => write!(f, "column {column}: {distinct} distinct subfiles > {bound}"),
        }
    }
}

/// Checks membership, coverage and width. Columns are reported 1-based.
pub fn validate_schedule(schedule: &AssignmentSchedule) -> Vec<Violation> {
    let mut out = Vec::new();
    let window = schedule.window;
    let fixed = schedule.fixed_part;
    let w = window.count_ones() as usize;
    let files = schedule.window_files();
    let expected = schedule.expected_columns();
    if schedule.columns.len() != expected {
        out.push(Violation::ColumnCount {
            expected,
            got: schedule.columns.len(),
        });
    }
    let b = schedule.block_size();
    let bound = if b == 0 { 0 } else { w.div_ceil(b) + 1 };

    for (j, col) in schedule.columns.iter().enumerate() {
        if col.len() != w {
            out.push(Violation::ColumnLength {
                column: j + 1,
                expected: w,
                got: col.len(),
            });
            continue;
        }
        for (&file, &s) in files.iter().zip(col) {
            let m = s.mask();
            let ok = s.contains(file)
                && m & fixed == fixed
                && m & !fixed & !window == 0
                && s.level() == schedule.level;
            if !ok {
                out.push(Violation::Membership {
                    column: j + 1,
                    file,
                    subfile: s,
                });
            }
        }
        let mut distinct: Vec<SubfileId> = col.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() > bound {
            out.push(Violation::Width {
                column: j + 1,
                distinct: distinct.len(),
                bound,
            });
        }
    }

    if b >= 1 && b <= w {
        for (p, &file) in files.iter().enumerate() {
            for sub in subsets_of_size(window, b) {
                if sub & (1 << (file - 1)) == 0 {
                    continue;
                }
                let target = SubfileId::from_mask(sub | fixed).expect("nonempty");
                let count = schedule
                    .columns
                    .iter()
                    .filter(|c| c.get(p) == Some(&target))
                    .count();
                if count != 1 {
                    out.push(Violation::Coverage {
                        file,
                        subfile: target,
                        count,
                    });
                }
            }
        }
    }
    out
}

/// The subfile each user recovers in one delivery step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepDemand {
    pub per_user: Vec<SubfileId>,
}

impl StepDemand {
    /// Number of distinct step demands, `A_j`.
    pub fn distinct(&self) -> usize {
        let mut v = self.per_user.clone();
        v.sort();
        v.dedup();
        v.len()
    }

    /// 1-based users holding the first occurrence of each distinct demand.
    pub fn leaders(&self) -> Vec<usize> {
        let mut seen: Vec<SubfileId> = Vec::new();
        let mut out = Vec::new();
        for (k, s) in self.per_user.iter().enumerate() {
            if !seen.contains(s) {
                seen.push(*s);
                out.push(k + 1);
            }
        }
        out
    }
}

/// `d^j_k = c_{d_k, j}` for every user; `column` is 0-based.
pub fn step_demands(
    schedule: &AssignmentSchedule,
    demands: &DemandVector,
    column: usize,
) -> Result<StepDemand> {
    if column >= schedule.n_columns() {
        return Err(Error::ColumnOutOfRange {
            column,
            columns: schedule.n_columns(),
        });
    }
    let per_user = demands
        .as_slice()
        .iter()
        .map(|&d| {
            schedule
                .entry(d, column)
                .ok_or(Error::DemandOutsideWindow { file: d })
        })
        .collect::<Result<_>>()?;
    Ok(StepDemand { per_user })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sid(m: &[usize]) -> SubfileId {
        SubfileId::new(m).unwrap()
    }

    #[test]
    fn reference_fixture_is_valid() {
        let s = example1_schedule();
        assert_eq!(s.n_columns(), 4);
        assert_eq!(validate_schedule(&s), vec![]);
        assert_eq!(s.entry(5, 0), Some(sid(&[1, 5])));
        assert_eq!(s.entry(1, 1), Some(sid(&[1, 5])));
    }

    #[test]
    fn fixture_round_trips() {
        let s = generate_schedule(0b1111110, 0b1, 3, 9).unwrap();
        let back = AssignmentSchedule::parse_fixture(&s.to_fixture()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn fixture_errors() {
        assert!(AssignmentSchedule::parse_fixture("1,2 1,2\n").is_err());
        assert!(AssignmentSchedule::parse_fixture("# level=2 window=1,2\n1,2\n").is_err());
        assert!(AssignmentSchedule::parse_fixture("# level=2 window=1,2\n1,x 1,2\n").is_err());
    }

    #[test]
    fn membership_violation_detected() {
        let mut s = example1_schedule();
        s.columns[0][0] = sid(&[3, 4]);
        let v = validate_schedule(&s);
        assert!(v.contains(&Violation::Membership {
            column: 1,
            file: 1,
            subfile: sid(&[3, 4])
        }));
    }

    #[test]
    fn duplicate_assignment_is_a_coverage_violation() {
        let mut s = example1_schedule();
        // file 1 gets {1,2} in columns 1 and 2, never {1,5}
        s.columns[1][0] = sid(&[1, 2]);
        let v = validate_schedule(&s);
        assert!(v.contains(&Violation::Coverage {
            file: 1,
            subfile: sid(&[1, 2]),
            count: 2
        }));
        assert!(v.contains(&Violation::Coverage {
            file: 1,
            subfile: sid(&[1, 5]),
            count: 0
        }));
    }

    #[test]
    fn level_one_and_level_n() {
        let s = generate_schedule(0b11111, 0, 1, 3).unwrap();
        assert_eq!(s.n_columns(), 1);
        for i in 1..=5 {
            assert_eq!(s.entry(i, 0), Some(sid(&[i])));
        }
        let s = generate_schedule(0b11111, 0, 5, 3).unwrap();
        assert_eq!(s.n_columns(), 1);
        for i in 1..=5 {
            assert_eq!(s.entry(i, 0), Some(sid(&[1, 2, 3, 4, 5])));
        }
    }

    #[test]
    fn generated_example1_shape_is_valid() {
        for seed in 0..20 {
            let s = generate_schedule(0b11111, 0, 2, seed).unwrap();
            assert_eq!(validate_schedule(&s), vec![], "seed {seed}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_schedule(0b1111111, 0, 3, 42).unwrap();
        let b = generate_schedule(0b1111111, 0, 3, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_schedule(0b111, 0b1, 2, 0).is_err()); // overlap
        assert!(generate_schedule(0b111, 0b1000, 1, 0).is_err()); // l - s = 0
        assert!(generate_schedule(0b11, 0, 3, 0).is_err()); // l - s > |R|
    }

    #[test]
    fn step_demand_examples() {
        let s = example1_schedule();
        let d = DemandVector::new(5, vec![1, 2, 3, 4, 5]).unwrap();
        let sd = step_demands(&s, &d, 0).unwrap();
        assert_eq!(
            sd.per_user,
            vec![sid(&[1, 2]), sid(&[1, 2]), sid(&[3, 4]), sid(&[3, 4]), sid(&[1, 5])]
        );
        assert_eq!(sd.leaders(), vec![1, 3, 5]);

        let d = DemandVector::new(5, vec![1, 1, 1, 3, 4]).unwrap();
        let sd = step_demands(&s, &d, 0).unwrap();
        assert_eq!(
            sd.per_user,
            vec![sid(&[1, 2]), sid(&[1, 2]), sid(&[1, 2]), sid(&[3, 4]), sid(&[3, 4])]
        );
        assert_eq!(sd.leaders(), vec![1, 4]);
        assert_eq!(sd.distinct(), 2);

        let d = DemandVector::new(5, vec![1; 5]).unwrap();
        for j in 0..4 {
            assert_eq!(step_demands(&s, &d, j).unwrap().distinct(), 1);
        }
        assert!(step_demands(&s, &d, 4).is_err());
    }

    #[test]
    fn demand_outside_window_is_rejected() {
        let s = generate_schedule(0b0111, 0b1000, 2, 1).unwrap();
        let d = DemandVector::new(4, vec![1, 4]).unwrap();
        assert_eq!(
            step_demands(&s, &d, 0),
            Err(Error::DemandOutsideWindow { file: 4 })
        );
    }
}
