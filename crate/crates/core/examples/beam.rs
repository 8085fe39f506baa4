//! Clamped beam: frequencies, observability and damping reconstruction.

use obslab::error::Result;
use obslab::forward::ObservationConfig;
use obslab::grid::{CoefficientField, Grid1D, TimeGrid};
use obslab::observability::estimate_kappa;
use obslab::operators::Equation;
use obslab::reconstruct::{reconstruct_field, Coefficients, PlanChoice, ProbeKind, ProbeSetup};

fn main() -> Result<()> {
    let g = Grid1D::new(1.0, 200)?;
    let z = CoefficientField::zeros(g);
    let cfg = ObservationConfig::left(Equation::Beam, TimeGrid::with_step(0.5, 1e-4)?);
    println!("kappa with 4 modes: {:.4}", estimate_kappa(&z, &z, &cfg, 4)?.kappa);

    let a0 = CoefficientField::constant(g, 1.0);
    let setup = ProbeSetup::new(ProbeKind::BeamDamping, z.clone(), a0.clone(), cfg, 2, 20)?.with_budget(10.0);
    println!("frequencies {:?}", setup.basis.frequencies().iter().take(3).map(|f| format!("{f:.3}")).collect::<Vec<_>>());
    let da = CoefficientField::synthesize(g, &[0.05, 0.025], setup.basis.modes())?;
    let report = reconstruct_field(&setup, &Coefficients::new(z, a0.add(&da)?)?, PlanChoice::Modes(2), None)?;
    let e = report.error("a").and_then(|e| e.relative).unwrap_or(f64::NAN);
    println!("damping relative L2 error {e:.3e}");
    Ok(())
}
