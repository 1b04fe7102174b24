use corrcache::delivery::Scheme;
use corrcache::model::CacheAllocation;
use corrcache::oracle::{grid_config, verify_all_demands, verify_integer_allocations};

fn main() -> corrcache::Result<()> {
    let c = grid_config(3, 3)?;

    // one allocation, every demand vector, all three schemes
    let alloc = CacheAllocation::from_t(3, &[1.0, 2.0, 1.0])?;
    for scheme in [Scheme::Cauc, Scheme::Cacc, Scheme::Cicc] {
        let r = verify_all_demands(&c, &alloc, scheme, 4)?;
        println!(
            "{scheme}: {} demands, max rate {:.4}, formula {:.4}, clean {}",
            r.outcomes.len(),
            r.max_rate,
            r.formula_rate,
            r.is_clean()
        );
    }

    // every integer t-vector at once
    let r = verify_integer_allocations(&c, &[1, 2])?;
    println!(
        "{} t-vectors x {} demands x {} seeds: sound {}, max excess {} bits",
        r.allocations, r.demands, r.seeds, r.is_sound(), r.max_excess_bits
    );
    Ok(())
}
