//! Six files, three users: delivery runs over windows of requested files
//! padded with unrequested ones.

use corrcache::closed_form::cacc_rate;
use corrcache::delivery::{decode, deliver, place, ScheduleSource, SharingPolicy};
use corrcache::model::{CacheAllocation, ContentStore, DemandVector, LibraryConfig};
use corrcache::oracle::grid_level_bits;

fn main() -> corrcache::Result<()> {
    let unit = grid_level_bits(3) as f64;
    let c = LibraryConfig::new(6, 3, 0.0, vec![unit, unit, 0.0, unit, 0.0, unit])?;
    let alloc = CacheAllocation::from_t(3, &[1.0, 2.0, 0.0, 1.0, 0.0, 3.0])?;
    let store = ContentStore::random(&c, 9)?;
    let p = place(&c, &alloc, &store, SharingPolicy::Envelope)?;
    let schedules = ScheduleSource::generated(9);

    println!("formula rate {:.4}", cacc_rate(&c, &alloc));
    for demands in [vec![1, 2, 3], vec![6, 6, 2], vec![4, 4, 4]] {
        let d = DemandVector::new(6, demands)?;
        let tr = deliver(&p, &d, &store, &schedules)?;
        let ok = p.caches.iter().all(|u| {
            decode(u, &p.layout, &tr, &d).is_ok_and(|bits| bits == store.file(d.of(u.user)))
        });
        println!(
            "demands {d}: rate {:.4}, per level {:?}, decoded {ok}",
            tr.rate(c.file_size()),
            (1..=6).map(|l| tr.level_bits(l)).collect::<Vec<_>>()
        );
    }
    Ok(())
}
