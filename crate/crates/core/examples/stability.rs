//! Reconstruction error against the data misfit over perturbation sizes.

use std::f64::consts::PI;

use obslab::error::Result;
use obslab::forward::ObservationConfig;
use obslab::grid::{CoefficientField, Grid1D, TimeGrid};
use obslab::operators::Equation;
use obslab::reconstruct::{stability_curve, Coefficients, PlanChoice, ProbeKind, ProbeSetup, SweepMode};

fn main() -> Result<()> {
    let g = Grid1D::new(PI, 200)?;
    let z = CoefficientField::zeros(g);
    let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(2.0 * PI, 5e-3)?);
    let setup = ProbeSetup::new(ProbeKind::Potential, z.clone(), z.clone(), cfg, 3, 16)?;
    let shape = CoefficientField::synthesize(g, &[10.0, 5.0, 3.0], setup.basis.modes())?;
    let dir = Coefficients::new(shape, z)?;
    let table = stability_curve(&setup, &dir, &[1e-5, 1e-4, 1e-3, 1e-2], SweepMode::PerturbationSize, PlanChoice::Modes(3), 7)?;
    table.write_csv(std::io::stdout().lock())?;
    println!("monotone: {}", table.monotone);
    if let Some(e) = table.envelope {
        println!("envelope |log||dLambda|||^-{} holds: {} (scale {:.3e})", e.exponent, e.holds, e.scale);
    }
    Ok(())
}
