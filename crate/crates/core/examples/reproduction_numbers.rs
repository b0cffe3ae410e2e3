//! Net reproduction number and Malthusian rate as fertility is scaled.
//! For a constant hazard and a flat fertility window both have closed forms,
//! printed alongside for comparison.

use agepop::analysis::{net_reproduction_rate, solve_malthusian};
use agepop::model::{AgeFunction, BaselineHazard, DensityMortality, Fertility, ModelSpec};

fn model(b: f64) -> ModelSpec {
    let a_dag = 10.0;
    ModelSpec {
        label: format!("b = {b}"),
        a_dagger: a_dag,
        baseline: BaselineHazard::constant_rate(a_dag, 0.2),
        mortality: DensityMortality::zero(),
        fertility: Fertility::new(b, (2.0, 8.0), (2.5, 7.5), 0.5 * b, move |a, _| if (2.0..=8.0).contains(&a) { b } else { 0.0 }),
        weight_p: AgeFunction::constant(1.0, (0.0, a_dag)),
        p_band: (2.0, 8.0),
        weight_q: AgeFunction::constant(1.0, (0.0, a_dag)),
        initial: AgeFunction::constant(1.0, (0.0, a_dag)),
        a1_constant: Some(b),
    }
}

fn main() -> anyhow::Result<()> {
    println!("{:>6} {:>12} {:>12} {:>12}", "b", "R0", "exact R0", "lambda");
    for b in [0.1, 0.2, 0.3, 0.4, 0.6] {
        let spec = model(b);
        let exact = b * ((-0.4f64).exp() - (-1.6f64).exp()) / 0.2;
        println!(
            "{b:>6} {:>12.8} {:>12.8} {:>12.8}",
            net_reproduction_rate(&spec),
            exact,
            solve_malthusian(&spec, 1e-12)?
        );
    }
    Ok(())
}
