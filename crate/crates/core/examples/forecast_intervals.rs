//! Full pipeline: smooth, decompose, forecast and bootstrap rates and life expectancy.

use mortcast::pipeline::{fit_and_forecast, ForecastSettings};
use mortcast::smooth::{smooth_dataset, SmoothConfig};
use mortcast::synth::{generate, SynthConfig};

fn main() -> mortcast::Result<()> {
    let data = generate(&SynthConfig { seed: 5, ..SynthConfig::default() })?;
    let sm = smooth_dataset(&data.dataset, &SmoothConfig::default())?;
    let settings = ForecastSettings { horizon: 30, replicates: 1000, seed: 1, ..ForecastSettings::default() };
    let out = fit_and_forecast(&sm, &settings)?;
    let bundle = &out.bundle;

    for (j, label) in bundle.labels.iter().enumerate() {
        let e80 = bundle.e0_band(j, 0.8)?;
        let e95 = bundle.e0_band(j, 0.95)?;
        println!("{label} life expectancy at birth");
        for h in [0, 9, 29] {
            println!(
                "  {}: {:6.2}  80% [{:6.2}, {:6.2}]  95% [{:6.2}, {:6.2}]",
                bundle.years[h],
                bundle.e0_point[j][h],
                e80.lower[(0, h)],
                e80.upper[(0, h)],
                e95.lower[(0, h)],
                e95.upper[(0, h)]
            );
        }
        let band = bundle.band(j, 0.8)?;
        let age = 65;
        println!(
            "  death rate at age {age} in {}: {:.5} [{:.5}, {:.5}]",
            bundle.years[29],
            bundle.point[j][(29, age)].exp(),
            band.lower[(29, age)],
            band.upper[(29, age)]
        );
    }
    for w in out.scores.warnings() {
        println!("warning: {w}");
    }
    Ok(())
}
