//! Simultaneous potential and damping reconstruction.

use std::f64::consts::PI;

use obslab::error::Result;
use obslab::forward::ObservationConfig;
use obslab::grid::{CoefficientField, Grid1D, TimeGrid};
use obslab::operators::Equation;
use obslab::reconstruct::{reconstruct_field, Coefficients, PlanChoice, ProbeKind, ProbeSetup};

fn main() -> Result<()> {
    let g = Grid1D::new(PI, 300)?;
    let z = CoefficientField::zeros(g);
    let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(2.0 * PI, 2e-3)?);
    let setup = ProbeSetup::new(ProbeKind::Joint, z.clone(), z, cfg, 3, 24)?;
    let q = CoefficientField::synthesize(g, &[0.05, 0.05, 0.05], setup.basis.modes())?;
    let a = CoefficientField::synthesize(g, &[0.05, -0.05, 0.05], setup.basis.modes())?;
    let report = reconstruct_field(&setup, &Coefficients::new(q, a)?, PlanChoice::Modes(3), None)?;
    for name in ["q", "a"] {
        let e = report.error(name).and_then(|e| e.relative).unwrap_or(f64::NAN);
        println!("{name}: relative L2 error {e:.3e}");
    }
    Ok(())
}
