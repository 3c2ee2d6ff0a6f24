//! Generate a synthetic two-population dataset with known structure and write it out.

use mortcast::synth::{generate, ScoreProcess, SynthConfig};

fn main() -> mortcast::Result<()> {
    let cfg = SynthConfig {
        n: 60,
        p: 91,
        horizon: 20,
        scores: ScoreProcess::Ar1 { phi: 0.9 },
        outlier_fraction: 0.05,
        seed: 2024,
        ..SynthConfig::default()
    };
    let data = generate(&cfg)?;
    let dir = std::env::temp_dir().join("mortcast-simulate-example");
    let files = data.write_dir(&dir, "# simulated\n")?;
    println!("wrote {} files to {}", files.len(), dir.display());
    println!("{}", serde_json::to_string_pretty(&data.manifest())?);
    Ok(())
}
