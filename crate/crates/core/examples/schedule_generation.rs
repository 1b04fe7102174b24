//! Builds assignment schedules, checks them, and round-trips the text format.

use corrcache::schedule::{example1_schedule, file_mask, generate_schedule, validate_schedule};

fn main() -> corrcache::Result<()> {
    let fixture = example1_schedule();
    println!("reference fixture:\n{fixture}");

    // seven files in the window, two more files fixed in every subfile
    let window = file_mask(&[1, 2, 3, 4, 5, 6, 7]);
    let fixed = file_mask(&[8, 9]);
    let s = generate_schedule(window, fixed, 5, 42)?;
    println!(
        "generated: {} columns, blocks of {}, violations {:?}",
        s.n_columns(),
        s.block_size(),
        validate_schedule(&s)
    );
    for (j, col) in s.columns().iter().take(3).enumerate() {
        let mut distinct = col.clone();
        distinct.sort();
        distinct.dedup();
        println!("column {}: {} distinct subfiles", j + 1, distinct.len());
    }

    let text = s.to_fixture();
    let back = corrcache::schedule::AssignmentSchedule::parse_fixture(&text)?;
    assert_eq!(back, s);
    print!("{text}");
    Ok(())
}
