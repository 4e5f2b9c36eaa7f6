//! Generates a synthetic signal, decomposes it and classifies it with both models.
//!
//! `cargo run --release -p hislr --example synthetic -- [seed]`

use hislr::data::{generate_synthetic, SyntheticSpec};
use hislr::{classify, SolverConfig};

fn main() -> hislr::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let spec = SyntheticSpec {
        rng_seed: seed,
        active_class: (seed % 7) as usize,
        noise_sigma: 0.02,
        ..SyntheticSpec::default()
    };
    let inst = generate_synthetic(&spec)?;
    let y = &inst.sample.y;
    let labels = inst.dictionary.labels();
    println!("true class {}", labels[spec.active_class]);
    for cfg in [SolverConfig::chislr(), SolverConfig::slr()] {
        let res = classify(y, &inst.dictionary, &cfg)?;
        let dec = &res.decomposition;
        println!(
            "{:?}: predicted {} | feasibility {:.2e} | rank {} | residuals {:.3?}",
            cfg.model,
            labels[res.predicted],
            dec.final_feasibility().unwrap_or(0.0) / y.norm(),
            dec.final_rank().unwrap_or(0),
            res.residuals
        );
    }
    Ok(())
}
