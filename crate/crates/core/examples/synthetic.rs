//! Trains the neural barycenter model on the synthetic block-model task.
//!
//! Usage: `cargo run --release --example synthetic [epochs] [lr_mlp] [lr_templates] [bary_max_outer] [bary_tol] [fgw_max_iter] [fgw_tol]`

use std::time::Instant;

use fgw_core::neural::{SolverConfig, TrainConfig, Trainer};
use fgw_core::synth::{make_dataset, LabelEncoding};

fn main() -> fgw_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, default: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let data = make_dataset(50, 0, LabelEncoding::Scalar)?;
    let config = TrainConfig {
        epochs: arg(1, 200.0) as usize,
        lr_mlp: arg(2, 1e-3),
        lr_templates: arg(3, 1e-2),
        solver: SolverConfig {
            bary_max_outer: arg(4, 10.0) as usize,
            bary_tol: arg(5, 1e-5),
            fgw_max_iter: arg(6, 50.0) as usize,
            fgw_tol: arg(7, 1e-6),
            ..Default::default()
        },
        ..Default::default()
    };
    let start = Instant::now();
    let mut trainer = Trainer::new(config, &data)?;
    trainer.run(&data, |epoch, loss| {
        println!("epoch {epoch:4} loss {loss:.5} ({:.1}s)", start.elapsed().as_secs_f64());
    })?;
    Ok(())
}
