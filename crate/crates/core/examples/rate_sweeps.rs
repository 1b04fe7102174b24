//! The two standard sweeps at N = K = 10, M = 1, printed as CSV.

use corrcache::experiment::{figure1_spec, figure2_spec, run_sweep};

fn main() -> corrcache::Result<()> {
    for spec in [figure1_spec(), figure2_spec()] {
        print!("{}", run_sweep(&spec)?.to_csv());
        println!();
    }
    Ok(())
}
