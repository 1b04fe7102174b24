use corrcache::allocator::optimize_allocation;
use corrcache::bits::BitBuf;
use corrcache::closed_form::{cacc_level_rate, cacc_rate, cutset_bound, level_curve};
use corrcache::combinatorics::{binomial, subsets_of_size};
use corrcache::delivery::{decode, deliver, place, ScheduleSource, SharingPolicy};
use corrcache::gf256;
use corrcache::model::{CacheAllocation, ContentStore, DemandVector, LibraryConfig};
use corrcache::oracle::grid_level_bits;
use corrcache::schedule::{file_mask, generate_schedule, validate_schedule};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn library() -> impl Strategy<Value = LibraryConfig> {
    (1usize..=6, 1usize..=6)
        .prop_flat_map(|(n, k)| {
            (
                Just(n),
                Just(k),
                prop::collection::vec(prop_oneof![Just(0.0), 1.0..50.0], n),
                0.0..=1.0f64,
            )
        })
        .prop_map(|(n, k, mut sizes, m)| {
            if sizes.iter().all(|&s| s == 0.0) {
                sizes[0] = 1.0;
            }
            LibraryConfig::new(n, k, m * n as f64, sizes).unwrap()
        })
}

proptest! {
    #[test]
    fn xor_is_an_involution(len in 0usize..300, a in any::<u64>(), b in any::<u64>()) {
        let x = BitBuf::random(len, &mut ChaCha8Rng::seed_from_u64(a));
        let y = BitBuf::random(len, &mut ChaCha8Rng::seed_from_u64(b));
        let mut z = x.clone();
        z.xor_assign(&y);
        z.xor_assign(&y);
        prop_assert_eq!(z, x);
    }

    #[test]
    fn slices_reassemble(len in 1usize..300, cut in 0.0..1.0f64, seed in any::<u64>()) {
        let x = BitBuf::random(len, &mut ChaCha8Rng::seed_from_u64(seed));
        let at = (cut * len as f64) as usize;
        let mut joined = x.slice(0, at);
        joined.extend(&x.slice(at, len - at));
        prop_assert_eq!(joined, x);
    }

    #[test]
    fn gf256_inverse(a in 1u8..=255) {
        prop_assert_eq!(gf256::mul(a, gf256::inv(a)), 1);
    }

    #[test]
    fn subsets_have_the_right_size(n in 0usize..12, r in 0usize..12) {
        let universe = (1u32 << n) - 1;
        let subs = subsets_of_size(universe, r);
        prop_assert_eq!(subs.len() as u64, binomial(n, r));
        prop_assert!(subs.iter().all(|s| s.count_ones() as usize == r && s & !universe == 0));
        prop_assert!(subs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn envelope_is_convex_and_below_raw(c in library()) {
        for l in 1..=c.n_files() {
            let curve = level_curve(&c, l);
            let k = c.n_users();
            for t in 0..=k {
                prop_assert!(curve.envelope(t as f64) <= curve.raw(t) + 1e-9);
            }
            let v = curve.vertices();
            let slopes: Vec<f64> = v
                .windows(2)
                .map(|w| (curve.raw(w[1]) - curve.raw(w[0])) / (w[1] - w[0]) as f64)
                .collect();
            prop_assert!(slopes.windows(2).all(|s| s[0] <= s[1] + 1e-9));
            // midpoints never exceed the chord
            for step in 0..(4 * k) {
                let (a, b) = (step as f64 / 4.0, (step + 1) as f64 / 4.0);
                let mid = curve.envelope((a + b) / 2.0);
                prop_assert!(mid <= (curve.envelope(a) + curve.envelope(b)) / 2.0 + 1e-9);
            }
        }
    }

    #[test]
    fn optimized_allocation_is_feasible_and_above_cutset(c in library()) {
        let sol = optimize_allocation(&c).unwrap();
        prop_assert!(sol.alloc.is_feasible(&c));
        prop_assert!((sol.rate - cacc_rate(&c, &sol.alloc)).abs() < 1e-9);
        prop_assert!(cutset_bound(&c) <= sol.rate + 1e-9);
        let none = CacheAllocation::zeros(c.n_files());
        prop_assert!(sol.rate <= cacc_rate(&c, &none) + 1e-9);
    }

    #[test]
    fn schedules_are_valid(w in 1usize..=7, s in 0usize..=3, b in 1usize..=7, seed in any::<u64>()) {
        prop_assume!(b <= w);
        let window = file_mask(&(1..=w).collect::<Vec<_>>());
        let fixed = file_mask(&(w + 1..=w + s).collect::<Vec<_>>());
        let sched = generate_schedule(window, fixed, s + b, seed).unwrap();
        prop_assert!(validate_schedule(&sched).is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_user_decodes(
        n in 1usize..=4,
        k in 1usize..=3,
        ts in prop::collection::vec(0usize..=3, 4),
        active in prop::collection::vec(any::<bool>(), 4),
        demand in prop::collection::vec(1usize..=4, 3),
        seed in any::<u64>(),
    ) {
        let unit = grid_level_bits(k) as f64;
        let mut sizes: Vec<f64> = (0..n).map(|l| if active[l] { unit } else { 0.0 }).collect();
        if sizes.iter().all(|&s| s == 0.0) {
            sizes[n - 1] = unit;
        }
        let c = LibraryConfig::new(n, k, 0.0, sizes).unwrap();
        let tv: Vec<f64> = (0..n).map(|l| ts[l].min(k) as f64).collect();
        let alloc = CacheAllocation::from_t(k, &tv).unwrap();
        let store = ContentStore::random(&c, seed).unwrap();
        let p = place(&c, &alloc, &store, SharingPolicy::Envelope).unwrap();
        let d = DemandVector::new(n, demand[..k].iter().map(|&f| (f - 1) % n + 1).collect()).unwrap();
        let tr = deliver(&p, &d, &store, &ScheduleSource::generated(seed)).unwrap();
        for cache in &p.caches {
            let got = decode(cache, &p.layout, &tr, &d).unwrap();
            prop_assert_eq!(got, store.file(d.of(cache.user)));
        }
        let bound: f64 = (1..=n).map(|l| cacc_level_rate(&c, l, tv[l - 1]).unwrap()).sum::<f64>()
            * c.file_size();
        prop_assert!(tr.total_bits() as f64 <= bound + tr.slack_bits() + p.layout.rounding_bits + 1e-6);
        let budget = alloc.cached_bits(&c) + p.layout.cache_rounding_bits;
        prop_assert!(p.caches.iter().all(|u| u.cached_bits() as f64 <= budget + 1e-6));
    }
}
