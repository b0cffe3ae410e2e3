//! Run the fertility sweep scenario and print the summary table.

use agepop::experiments::{sweep, Scenario};

fn main() -> anyhow::Result<()> {
    let mut sc = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/fertility_sweep.json"))?;
    sc.out = Some(std::env::temp_dir().join("agepop_fertility_sweep"));
    for r in sweep(&sc)? {
        println!(
            "scale {:>4}: R0 = {:.4}, lambda = {:+.4}, {} (rho_final = {:.3e})",
            r.sweep_value.unwrap_or(f64::NAN),
            r.r0,
            r.lambda.unwrap_or(f64::NAN),
            r.classification,
            r.rho_final.unwrap_or(f64::NAN)
        );
    }
    println!("artifacts in {}", sc.out_dir().display());
    Ok(())
}
