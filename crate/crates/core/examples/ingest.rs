//! Parse HMD-style rate and exposure tables and convert them to the canonical long CSV.

use mortcast::ingest::{build_dataset, canonical, parse_exposures, parse_rates, ColumnLayout};

/// A small made-up table in the `Year Age Female Male Total` layout.
fn table(title: &str, value: impl Fn(i32, u32, usize) -> String) -> String {
    let mut out = format!("{title}\n\n  Year  Age  Female  Male  Total\n");
    for year in 2000..2004 {
        for age in 0..=10u32 {
            let age_label = if age == 10 { "10+".to_string() } else { age.to_string() };
            let cols: Vec<String> = (0..3).map(|c| value(year, age, c)).collect();
            out.push_str(&format!("  {year}  {age_label}  {}\n", cols.join("  ")));
        }
    }
    out
}

fn main() -> mortcast::Result<()> {
    let rates = table("Imaginary land, death rates", |year, age, col| {
        if year == 2001 && age == 7 && col == 1 {
            return ".".into(); // missing cell
        }
        let m = (-7.0 + 0.35 * f64::from(age) - 0.02 * f64::from(year - 2000) + 0.1 * col as f64).exp();
        format!("{m:.6}")
    });
    let exposures = table("Imaginary land, exposure to risk", |_, age, col| {
        format!("{:.2}", if col == 2 { 2.0 } else { 1.0 } * (50_000.0 - 1_000.0 * f64::from(age)))
    });

    let layout = ColumnLayout::default();
    let ds = build_dataset(&parse_rates(&rates, &layout)?, &parse_exposures(&exposures, &layout)?, 0.0, 10.0)?;
    println!("years {}..{}, {} ages, populations {:?}", ds.years[0], ds.years[ds.n_years() - 1], ds.grid.len(), ds.populations.iter().map(|s| &s.label).collect::<Vec<_>>());
    for s in &ds.populations {
        println!("{}: {} masked cells", s.label, s.mask.iter().filter(|m| **m).count());
    }
    let csv = canonical::to_csv(&ds);
    for line in csv.lines().take(5) {
        println!("{line}");
    }
    Ok(())
}
