//! Damped wave with a potential: boundary trace and energy decay.

use std::f64::consts::PI;

use obslab::error::Result;
use obslab::forward::{solve, Forcing, ObservationConfig, SolveOptions};
use obslab::grid::{CoefficientField, Grid1D, TimeGrid};
use obslab::operators::Equation;

fn main() -> Result<()> {
    let g = Grid1D::new(PI, 400)?;
    let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(4.0 * PI, 2e-3)?);
    let q = CoefficientField::from_fn(g, |x| 1.0 + 0.5 * x.cos());
    let a = CoefficientField::constant(g, 0.1);
    let u0 = CoefficientField::from_fn(g, |x| (x * (PI - x)).powi(2) / 10.0);
    let u1 = CoefficientField::zeros(g);
    let s = solve(&q, &a, u0.values(), u1.values(), &cfg, &Forcing::None, SolveOptions::default().with_energy())?;
    let energy = s.energy.expect("energy requested");
    let trace = s.trace.channel(0);
    let times = cfg.time.times();
    println!("{:>8} {:>14} {:>14}", "t", "u_x(0, t)", "energy");
    for i in (0..times.len()).step_by(times.len() / 10) {
        println!("{:8.3} {:14.6e} {:14.6e}", times[i], trace[i], energy[i]);
    }
    println!("energy ratio E(tau)/E(0) = {:.4}, exp(-a tau) = {:.4}", energy[energy.len() - 1] / energy[0], (-0.1 * cfg.time.tau()).exp());
    Ok(())
}
