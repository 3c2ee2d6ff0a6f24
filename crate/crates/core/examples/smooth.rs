//! Smooth one year of noisy log death rates with the weighted L1 smoother.

use mortcast::smooth::{smooth_curve, smoothing_objective};

fn main() -> mortcast::Result<()> {
    let ages: Vec<f64> = (0..=100).map(f64::from).collect();
    // Gompertz-like log rates with a deterministic wiggle standing in for noise
    let y: Vec<f64> = ages.iter().map(|x| -9.0 + 0.085 * x + 2.5 * (-x / 3.0).exp() + 0.15 * (1.7 * x).sin()).collect();
    // weights ~ inverse standard deviation; two cells are missing
    let mut w: Vec<f64> = ages.iter().map(|x| 1.0 + x / 50.0).collect();
    w[40] = 0.0;
    w[41] = 0.0;

    for alpha in [0.0, 10.0, 100.0] {
        let theta = smooth_curve(&y, &w, &ages, alpha, 65.0)?;
        let obj = smoothing_objective(&y, &w, &ages, alpha, &theta);
        let monotone = theta[65..].windows(2).all(|p| p[1] >= p[0]);
        println!("alpha {alpha:>5}: objective {obj:8.3}, monotone above 65: {monotone}");
        for a in [0usize, 20, 40, 41, 70, 100] {
            println!("    age {a:>3}: raw {:7.3} smoothed {:7.3}", y[a], theta[a]);
        }
    }
    Ok(())
}
