//! Forecast a single score series with each of the three univariate methods.

use mortcast::scorecast::{auto_arima, auto_ets, forecast_series, Method};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> mortcast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let noise = Normal::new(0.0, 0.3).expect("valid sd");
    // a drifting AR(1) around a declining level, like a leading mortality score
    let mut y = Vec::with_capacity(80);
    let mut e = 0.0;
    for t in 0..80 {
        e = 0.6 * e + noise.sample(&mut rng);
        y.push(5.0 - 0.12 * t as f64 + e);
    }

    let arima = auto_arima(&y)?;
    println!("auto-ARIMA picked {} (AICc {:.2})", arima.order, arima.aicc);
    let ets = auto_ets(&y)?;
    println!("ETS picked {}", ets.model.name());

    for method in Method::ALL {
        let fc = forecast_series(&y, method, 10)?;
        println!(
            "{method:>5}: h=1 {:7.3} (sd {:.3}), h=10 {:7.3} (sd {:.3}), long-run slope {:+.3}",
            fc.point[0],
            fc.variance[0].sqrt(),
            fc.point[9],
            fc.variance[9].sqrt(),
            fc.long_run_slope
        );
    }
    Ok(())
}
