//! Central-difference check of the full training loss on random tiny models.
//!
//! cargo run --release --example gradient_check [seeds]

use vgmt::model::gradient_check;

fn main() -> vgmt::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let r = gradient_check(seed, 8, 4)?;
        let (name, idx) = r.worst.clone().unwrap_or_default();
        println!("seed {seed}: {} entries, max relative error {:.2e} at {name}[{idx}]", r.entries_checked, r.max_relative_error);
        worst = worst.max(r.max_relative_error);
    }
    println!("worst over {seeds} seeds: {worst:.2e}");
    Ok(())
}
