//! Prints every scheme's rate against cache size for a small correlated library.

use corrcache::model::LibraryConfig;
use corrcache::oracle::compare_schemes;

fn main() -> corrcache::Result<()> {
    // four files, three users; a quarter of each file is private,
    // the rest is spread over pairs, triples and the all-file subfile
    let base = LibraryConfig::new(4, 3, 0.0, vec![250.0, 100.0, 80.0, 160.0])?;
    println!("F = {} bits, library = {} bits", base.file_size(), base.library_size());
    println!("{:>5} {:>9} {:>9} {:>9} {:>9}", "M", "cauc", "cacc", "cicc", "cutset");
    for step in 0..=5 {
        let m = step as f64 * 0.5;
        let row = compare_schemes(&base.with_capacity(m)?)?;
        println!(
            "{:>5.1} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            m, row.cauc, row.cacc, row.cicc, row.cutset
        );
    }
    Ok(())
}
