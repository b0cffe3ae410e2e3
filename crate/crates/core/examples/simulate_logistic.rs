//! Build a model in code, integrate it along characteristics and write the
//! newborn trajectory to CSV.
//!
//! With constant mortality `m + P` the population settles where `P` equals
//! the Malthusian rate of the density-free model.

use agepop::analysis::solve_malthusian;
use agepop::export::write_trajectory;
use agepop::model::{AgeFunction, BaselineHazard, DensityMortality, Fertility, ModelSpec};
use agepop::solver::{simulate, GridSpec};

fn main() -> anyhow::Result<()> {
    let a_dag = 10.0;
    let spec = ModelSpec {
        label: "logistic-in-code".into(),
        a_dagger: a_dag,
        baseline: BaselineHazard::constant_rate(a_dag, 0.1),
        mortality: DensityMortality::new(|_, x| x).with_derivative(|_, _| 1.0).with_psi(|x| x),
        fertility: Fertility::new(0.5, (1.0, 6.0), (1.5, 5.5), 0.1, |a, _| if (1.0..=6.0).contains(&a) { 0.5 } else { 0.0 }),
        weight_p: AgeFunction::constant(1.0, (0.0, a_dag)),
        p_band: (1.0, 6.0),
        weight_q: AgeFunction::constant(1.0, (0.0, a_dag)),
        initial: AgeFunction::new((0.0, a_dag), move |a| 1.0 - a / a_dag),
        a1_constant: Some(0.5),
    };

    let traj = simulate(&spec, GridSpec::new(0.01, 30.0 * a_dag), 1e-10, 200)?;
    let k = traj.len() - 1;
    println!("t = {:.1}: rho = {:.6}, P = {:.6}", traj.times[k], traj.rho[k], traj.p[k]);
    println!("malthusian rate without crowding: {:.6}", solve_malthusian(&spec, 1e-12)?);

    let out = std::env::temp_dir().join("agepop_logistic_trajectory.csv");
    write_trajectory(&traj, &out)?;
    println!("trajectory written to {}", out.display());
    Ok(())
}
