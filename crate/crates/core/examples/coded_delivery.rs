//! Five users, five files, only pairwise-shared content. Places the caches,
//! delivers two demand vectors with the built-in schedule and decodes.

use corrcache::delivery::{decode, deliver, place, ScheduleSource, SharingPolicy};
use corrcache::model::{CacheAllocation, ContentStore, DemandVector, LibraryConfig};
use corrcache::schedule::example1_schedule;

fn main() -> corrcache::Result<()> {
    let f2 = 10_000.0;
    let c = LibraryConfig::new(5, 5, 0.0, vec![0.0, f2, 0.0, 0.0, 0.0])?;
    let store = ContentStore::random(&c, 1)?;
    let alloc = CacheAllocation::from_t(5, &[0.0, 1.0, 0.0, 0.0, 0.0])?;
    let placement = place(&c, &alloc, &store, SharingPolicy::Direct)?;
    let schedules = ScheduleSource::generated(0).with_fixture(example1_schedule());

    for demands in [vec![1, 2, 3, 4, 5], vec![1, 1, 1, 3, 4]] {
        let d = DemandVector::new(5, demands)?;
        let tr = deliver(&placement, &d, &store, &schedules)?;
        println!(
            "demands {d}: {} bits ({} x F2/5), steps {:?}",
            tr.total_bits(),
            tr.total_bits() as f64 / (f2 / 5.0),
            tr.step_counts(2)
        );
        for cache in &placement.caches {
            let file = decode(cache, &placement.layout, &tr, &d)?;
            assert_eq!(file, store.file(d.of(cache.user)));
        }
        println!("  all users recovered their files");
    }

    let d = DemandVector::new(5, vec![1, 2, 3, 4, 5])?;
    let tr = deliver(&placement, &d, &store, &schedules)?;
    print!("{}", tr.dump().lines().take(6).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
