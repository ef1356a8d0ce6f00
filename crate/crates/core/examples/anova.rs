//! One-way and repeated-measures ANOVA, partial eta squared and Pearson r
//! over per-participant aggregates.
//!
//! `cargo run -p gazekit --example anova`

use gazekit::stats;

fn main() {
    // Correct answers per participant under three visualization types.
    let groups = [
        vec![6.0, 8.0, 4.0, 5.0, 3.0, 4.0],
        vec![8.0, 12.0, 9.0, 11.0, 6.0, 8.0],
        vec![13.0, 9.0, 11.0, 8.0, 7.0, 12.0],
    ];
    let r = stats::one_way_anova(&groups).unwrap();
    println!(
        "one-way:  F({}, {}) = {:.3}, p = {:.4}, partial eta^2 = {:.3}",
        r.df1, r.df2, r.f, r.p, r.eta_sq_partial
    );

    // Each row is one participant across three conditions.
    let times = [
        vec![45.0, 50.0, 55.0],
        vec![42.0, 42.0, 45.0],
        vec![36.0, 41.0, 43.0],
        vec![39.0, 35.0, 40.0],
        vec![51.0, 55.0, 59.0],
        vec![44.0, 49.0, 56.0],
    ];
    let r = stats::rm_anova(&times).unwrap();
    println!(
        "repeated: F({}, {}) = {:.3}, p = {:.4}, partial eta^2 = {:.3}",
        r.df1, r.df2, r.f, r.p, r.eta_sq_partial
    );

    // Effect size from a reported F and its degrees of freedom.
    for f in [98.251, 1.252] {
        println!(
            "F = {f:>7} on (11, 110): partial eta^2 = {:.3}",
            stats::partial_eta_squared(f, 11, 110)
        );
    }

    let fixation_ms = [210.0, 260.0, 240.0, 300.0, 320.0, 280.0, 350.0];
    let answer_s = [18.0, 22.5, 20.1, 26.0, 27.9, 24.2, 30.5];
    let c = stats::pearson_r(&fixation_ms, &answer_s).unwrap();
    println!("pearson:  r = {:.3} (n = {}), p = {:.2e}", c.r, c.n, c.p);

    match stats::one_way_anova(&[vec![1.0, 1.0], vec![1.0, 1.0]]) {
        Err(e) => println!("constant data: {} ({})", e, e.code()),
        Ok(r) => println!("constant data: {r:?}"),
    }
}
