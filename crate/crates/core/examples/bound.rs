//! A-priori bound on the newborn function, compared with the largest value a
//! long simulation actually reaches.

use agepop::bounds::compute_bound;
use agepop::io::load_model;
use agepop::solver::{GridSpec, Simulator, SolverOptions};

fn main() -> anyhow::Result<()> {
    for name in ["logistic", "allee", "crowding"] {
        let path = format!("{}/models/{name}.json", env!("CARGO_MANIFEST_DIR"));
        let spec = load_model(&path)?;
        let grid = GridSpec::new(spec.a_dagger / 500.0, 30.0 * spec.a_dagger);
        let sim = Simulator::new(&spec, grid, SolverOptions::default())?;
        let cert = compute_bound(&spec, sim.initial_state().rho)?;
        let traj = sim.run()?;
        let sup = traj.rho.iter().copied().fold(0.0, f64::max);
        println!("{name:<10} B = {:>9.5}  sup rho = {:>9.5}  (c = {}, gamma = {}, M = {:.4})", cert.bound, sup, cert.c, cert.gamma, cert.m);
    }
    Ok(())
}
