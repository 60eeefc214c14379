//! Adaptive run on the L-shaped domain with cubic elements.
//!
//! `cargo run --release -p hdiv-eigen --example lshape_k3`

use hdiv_eigen::adapt::{adaptive_loop, error_rate};
use hdiv_eigen::io::RunConfig;
use hdiv_eigen::DomainTag;

fn main() -> hdiv_eigen::Result<()> {
    let mut config = RunConfig::new(DomainTag::LShape, 3);
    config.max_dofs = 30_000;
    let outcome = adaptive_loop(&config)?;
    println!("{:>5} {:>8} {:>18} {:>11} {:>11}", "level", "N", "lambda", "error", "eta");
    for r in &outcome.records {
        let err = r.err_lambda.map_or("-".into(), |e| format!("{e:.3e}"));
        println!("{:>5} {:>8} {:>18.12} {:>11} {:>11.3e}", r.level, r.n_dofs, r.lambda, err, r.eta_sq.sqrt());
    }
    if let Some(s) = error_rate(&outcome.records, 4) {
        println!("slope over last 4 levels: {s:.3}");
    }
    Ok(())
}
