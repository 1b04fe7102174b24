//! Binomial coefficients and k-subset enumeration over bitmasks.

/// Exact binomial coefficient; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial overflow")
}

/// Binomial with signed upper argument; negative `n` yields zero, matching the
/// convention that binom(j, i) = 0 whenever j < i.
pub fn binom_f(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        return 0.0;
    }
    binomial(n as usize, k as usize) as f64
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// lcm{binom(k, t) : t in 0..=k}: the granularity that lets a subfile be split
/// into equal parts for every integer caching parameter.
pub fn part_unit(k: usize) -> u64 {
    (0..=k).fold(1, |acc, t| lcm(acc, binomial(k, t)))
}

/// All subsets of `universe` (a bitmask) with exactly `size` members, in
/// ascending numeric order.
pub fn subsets_of_size(universe: u32, size: usize) -> Vec<u32> {
    let members: Vec<u32> = bits_of(universe).collect();
    let mut out = Vec::with_capacity(binomial(members.len(), size) as usize);
    if size > members.len() {
        return out;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.iter().fold(0u32, |m, &i| m | (1 << members[i])));
        // advance to the next combination in lexicographic order
        let mut pos = size;
        loop {
            if pos == 0 {
                out.sort_unstable();
                return out;
            }
            pos -= 1;
            if idx[pos] < members.len() - size + pos {
                break;
            }
        }
        idx[pos] += 1;
        for q in pos + 1..size {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Positions of set bits, ascending.
pub fn bits_of(mask: u32) -> impl Iterator<Item = u32> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let b = m.trailing_zeros();
            m &= m - 1;
            Some(b)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(2, 3), 0);
        assert_eq!(binom_f(-1, 0), 0.0);
        assert_eq!(binom_f(0, 0), 1.0);
    }

    #[test]
    fn part_units() {
        assert_eq!(part_unit(1), 1);
        assert_eq!(part_unit(2), 2);
        assert_eq!(part_unit(4), 12);
        assert_eq!(part_unit(5), 10);
        assert_eq!(part_unit(10), 2520);
    }

    #[test]
    fn subset_enumeration_matches_filter() {
        for n in 0..=7u32 {
            let universe = (1u32 << n) - 1;
            for k in 0..=n as usize + 1 {
                let got = subsets_of_size(universe, k);
                let expect: Vec<u32> = (0..=universe)
                    .filter(|m| m & !universe == 0 && m.count_ones() as usize == k)
                    .collect();
                assert_eq!(got, expect, "n={n} k={k}");
            }
        }
        // sparse universe
        assert_eq!(subsets_of_size(0b10100, 1), vec![0b00100, 0b10000]);
    }
}
