//! Sub-reproduction box of the bistable model and the extinction trigger on
//! small and large starting populations.

use agepop::bounds::{allee_threshold, extinction_trigger_time, window_decay_ratios};
use agepop::io::load_model;
use agepop::solver::{simulate, GridSpec};

fn main() -> anyhow::Result<()> {
    let spec = load_model(concat!(env!("CARGO_MANIFEST_DIR"), "/models/allee.json"))?;
    let thr = allee_threshold(&spec, 20.0)?;
    println!("P* = {:.5}, Q* = {:.5} (capped: {:?})", thr.p_star, thr.q_star, thr.capped);
    println!("rho* = {:.5}, R1 = {:.5}", thr.rho_star, thr.r1);

    for scale in [0.5, 1.0, 2.0, 4.0] {
        let traj = simulate(&spec.with_initial_scaled(scale), GridSpec::new(0.05, 400.0), 1e-10, 200)?;
        match extinction_trigger_time(&traj, &thr, spec.a_dagger) {
            Some(t) => {
                let worst = window_decay_ratios(&traj, t, spec.a_dagger).into_iter().fold(0.0, f64::max);
                println!("scale {scale}: trigger at t = {t}, worst window ratio {worst:.3} (allowed {:.3})", thr.decay_ratio(0.1));
            }
            None => println!("scale {scale}: no trigger, rho(T) = {:.5}", traj.rho_final()),
        }
    }
    Ok(())
}
