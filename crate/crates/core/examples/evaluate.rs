//! Expanding-window comparison of robust and standard fits on contaminated data.

use mortcast::eval::{compare_methods, EvalConfig};
use mortcast::scorecast::Method;
use mortcast::synth::{generate, SynthConfig};

fn main() -> mortcast::Result<()> {
    let cfg = SynthConfig { horizon: 1, outlier_fraction: 0.05, seed: 2, ..SynthConfig::default() };
    let data = generate(&cfg)?;
    let eval = EvalConfig {
        lambdas: vec![1.81, 3.0, f64::INFINITY],
        methods: vec![Method::Rwf, Method::Ets],
        // a short test period keeps the example quick; the full comparison uses 30 years
        replicates: 200,
        test_len: 10,
        ..EvalConfig::default()
    };
    let report = compare_methods(&data.dataset, &eval)?;
    print!("{}", report.summary());
    Ok(())
}
