use corrcache::allocator::{exhaustive_allocation_oracle, optimize_allocation};
use corrcache::closed_form::{cauc_optimal_allocation, cauc_rate, level_curve};
use corrcache::model::LibraryConfig;

fn main() -> corrcache::Result<()> {
    let c = LibraryConfig::new(4, 4, 1.5, vec![300.0, 50.0, 20.0, 400.0])?;

    for l in 1..=4 {
        let curve = level_curve(&c, l);
        println!("level {l}: hull vertices t = {:?}", curve.vertices());
    }

    let greedy = optimize_allocation(&c)?;
    println!("coded: rate {:.6} with t = {:?}", greedy.rate, greedy.t(4));

    let brute = exhaustive_allocation_oracle(&c, 0.25)?;
    println!("grid search (step 0.25): rate {:.6}", brute.rate);

    let uncoded = cauc_optimal_allocation(&c);
    println!(
        "uncoded: rate {:.6} with p = {:?}",
        cauc_rate(&c, &uncoded),
        uncoded.fractions()
    );
    Ok(())
}
