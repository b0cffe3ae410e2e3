//! Locate the equilibria of the bistable model and print their age profiles.

use agepop::analysis::Analysis;
use agepop::io::load_model;

fn main() -> anyhow::Result<()> {
    let spec = load_model(concat!(env!("CARGO_MANIFEST_DIR"), "/models/allee.json"))?;
    let analysis = Analysis::new(&spec);
    let eqs = analysis.find_equilibria(20.0, 1e-12)?;
    for (i, eq) in eqs.iter().enumerate() {
        println!("#{i}: P* = {:.8}, rho* = {:.8}, residual = {:.1e}", eq.p_star, eq.rho_star, eq.residual);
        let profile = analysis.equilibrium_profile(eq);
        let ages = [0.0, 2.5, 5.0, 7.5, 9.9];
        let row: Vec<String> = ages.iter().map(|&a| format!("n({a}) = {:.5}", profile.eval(a))).collect();
        println!("    {}", row.join(", "));
    }
    Ok(())
}
