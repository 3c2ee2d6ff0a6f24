//! Split two populations into a common trend and population-specific residual trends.

use mortcast::multilevel::{coherence_diagnostic, decompose};
use mortcast::scorecast::{forecast_all_scores, Method};
use mortcast::smooth::{smooth_dataset, SmoothConfig};
use mortcast::synth::{generate, SynthConfig};

fn main() -> mortcast::Result<()> {
    let data = generate(&SynthConfig { seed: 3, ..SynthConfig::default() })?;
    let sm = smooth_dataset(&data.dataset, &SmoothConfig::default())?;
    let dec = decompose(&sm, 1.81, 0.9)?;

    println!("common components: {}", dec.common.num_components());
    for (j, label) in dec.labels.iter().enumerate() {
        let (_, leftover) = dec.reconstruct(j, dec.n_years() - 1)?;
        println!(
            "{label}: {} residual components, within-cluster variability {:.3}, last-year max leftover {:.2e}",
            dec.residual[j].num_components(),
            dec.within_cluster_variability(j)?,
            leftover.amax()
        );
    }

    let fc = forecast_all_scores(&dec, Method::Rwf, 20)?;
    for r in coherence_diagnostic(&fc.residual[0], &fc.residual[1]) {
        println!("residual component {}: slope gap {:+.4} -> {:?}", r.component + 1, r.slope, r.status);
    }
    Ok(())
}
