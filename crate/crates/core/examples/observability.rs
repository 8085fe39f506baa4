//! Observability constants for the wave, beam and heat equations.

use std::f64::consts::PI;

use obslab::error::Result;
use obslab::forward::ObservationConfig;
use obslab::grid::{CoefficientField, Grid1D, TimeGrid};
use obslab::observability::{estimate_kappa, heat_final_time_kappa, observation_map, observation_modes};
use obslab::operators::Equation;

fn main() -> Result<()> {
    let g = Grid1D::new(PI, 200)?;
    let z = CoefficientField::zeros(g);
    for tau in [PI / 2.0, PI, 2.0 * PI] {
        let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(tau, 2e-3)?);
        let basis = observation_modes(Equation::Wave, &z, 10)?;
        let profile = observation_map(&z, &z, &basis, 10, &cfg)?.kappa_profile()?;
        println!("wave tau = {tau:.3}: kappa over K = 1..10");
        println!("  {}", profile.iter().map(|k| format!("{k:.3e}")).collect::<Vec<_>>().join(" "));
    }

    let gb = Grid1D::new(1.0, 150)?;
    let zb = CoefficientField::zeros(gb);
    let beam = ObservationConfig::left(Equation::Beam, TimeGrid::with_step(0.5, 1e-4)?);
    println!("beam tau = 0.5, K = 4: kappa {:.4}", estimate_kappa(&zb, &zb, &beam, 4)?.kappa);

    let heat = ObservationConfig::left(Equation::Heat, TimeGrid::with_step(1.0, 1e-3)?);
    println!("heat tau = 1, K = 4: kappa {:.4e}", estimate_kappa(&z, &z, &heat, 4)?.kappa);
    println!("heat final-time kappa, K = 4: {:.4e}", heat_final_time_kappa(&z, &heat, 4)?);
    Ok(())
}
