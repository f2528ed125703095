//! The frame-attention target at a few temperatures, and the KL loss of a
//! uniform attention row against it.
//!
//! cargo run --example gaussian_target

use vgmt::model::{frame_attention_loss, frame_positions, gaussian_target};
use vgmt::numerics::Graph;

fn main() -> vgmt::Result<()> {
    let m = 12;
    println!("positions {:?}", frame_positions(m, 3.0).iter().map(|z| format!("{z:.2}")).collect::<Vec<_>>());
    for t in [0.01, 0.1, 1.0, 10.0] {
        let target = gaussian_target(m, 3.0, 1.0, 1.0, t);
        let row: Vec<String> = target.iter().map(|p| format!("{p:.3}")).collect();
        let mut g = Graph::new();
        let uniform = g.constant_from(vec![1, 1, m], vec![1.0 / m as f64; m])?;
        let kl = frame_attention_loss(&mut g, uniform, &target, &[true])?;
        println!("T={t:<5} KL(uniform || target) {:.4}  [{}]", g.scalar(kl), row.join(" "));
    }
    Ok(())
}
