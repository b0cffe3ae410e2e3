//! Characteristic roots at each equilibrium of the bistable model.

use agepop::analysis::find_equilibria;
use agepop::io::load_model;
use agepop::stability::analyze_stability;

fn main() -> anyhow::Result<()> {
    let spec = load_model(concat!(env!("CARGO_MANIFEST_DIR"), "/models/allee.json"))?;
    for eq in find_equilibria(&spec, 20.0, 1e-12)? {
        let report = analyze_stability(&spec, &eq, 1e-10)?;
        println!(
            "P* = {:.5}: {} (winding {}, {} roots located, right limit certified: {})",
            eq.p_star,
            report.classification,
            report.winding_count,
            report.located_count(),
            report.right_limit_certified
        );
        for r in report.roots.iter().rev().take(5) {
            println!("    {:+.6} {:+.6}i  |det| = {:.1e}", r.re, r.im, r.residual);
        }
    }
    Ok(())
}
