use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrcache"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_fixture_reports_exact_bits() {
    let o = run(&[
        "simulate", "--n", "5", "--k", "5", "--demands", "1,2,3,4,5",
        "--level-sizes", "0,10000,0,0,0", "--fixture", "example1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("72000"), "{out}");
}

#[test]
fn rates_prints_a_row() {
    let o = run(&["rates", "--n", "3", "--k", "3", "--m", "1", "--ratios", "0.5,0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.lines().count() >= 2, "{out}");
}

#[test]
fn verify_small_grid_exits_zero() {
    let o = run(&["verify", "--n", "2", "--k", "2", "--m", "1", "--ratios", "0.5,0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_is_deterministic() {
    let a = run(&["sweep", "--figure", "1"]);
    let b = run(&["sweep", "--figure", "1"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("x,r_cauc,r_cacc,r_cicc,r_cutset"));
}

#[test]
fn bad_input_exits_with_two() {
    let o = run(&["rates", "--n", "0", "--k", "3"]);
    assert_eq!(o.status.code(), Some(2));
}
