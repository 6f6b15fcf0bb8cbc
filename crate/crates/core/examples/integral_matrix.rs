//! Builds the pitch-candidate integral matrix, prints the taps of one
//! candidate and exports the matrix in the `HGCU` binary format.
//!
//! ```text
//! cargo run --example integral_matrix -- [candidate_tenths_hz] [out.hgcu]
//! ```

use std::fs::File;
use std::io::BufWriter;

use hgcn::harmonic::{harmonic_taps, IntegralMatrix, IntegralOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let candidate: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(1000);
    let out = args
        .next()
        .unwrap_or_else(|| std::env::temp_dir().join("u.hgcu").display().to_string());

    let u = IntegralMatrix::build(8000, 257)?;
    println!("{} x {} matrix, {} non-zeros", u.values().nrows(), u.bins(), u.nonzeros());

    let taps = harmonic_taps(candidate, 8000, 257, IntegralOptions::default());
    println!("candidate {:.1} Hz: {} harmonics in band", candidate as f64 / 10.0, taps.len());
    for tap in taps.iter().take(6) {
        println!(
            "  k={:<2} peak bin {:<3} +{:.4}  valleys {:?}",
            tap.k, tap.peak, tap.weight, tap.valleys
        );
    }
    println!("row sum {:.2e}", u.values().row(candidate).sum());

    u.write_to(BufWriter::new(File::create(&out)?))?;
    println!("wrote {out}");
    Ok(())
}
