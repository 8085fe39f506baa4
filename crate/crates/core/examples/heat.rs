//! Heat potential from boundary fluxes, with the weak-norm error.

use std::f64::consts::PI;

use obslab::error::Result;
use obslab::forward::ObservationConfig;
use obslab::grid::{CoefficientField, Grid1D, TimeGrid};
use obslab::operators::Equation;
use obslab::reconstruct::{reconstruct_field, Coefficients, PlanChoice, ProbeKind, ProbeSetup};

fn main() -> Result<()> {
    let g = Grid1D::new(PI, 200)?;
    let z = CoefficientField::zeros(g);
    let cfg = ObservationConfig::left(Equation::Heat, TimeGrid::with_step(1.0, 1e-3)?);
    let setup = ProbeSetup::new(ProbeKind::Heat, z.clone(), z.clone(), cfg, 3, 3)?;
    let want = [0.1, 0.05, 0.03];
    let q = CoefficientField::synthesize(g, &want, setup.basis.modes())?;
    let report = reconstruct_field(&setup, &Coefficients::new(q, z)?, PlanChoice::Modes(3), None)?;
    for (k, w) in want.iter().enumerate() {
        let c = report.coefficient(k as i64 + 1).map_or(f64::NAN, |c| c.re);
        println!("c_{} = {c:.5} (true {w})", k + 1);
    }
    if let Some(e) = report.error("q") {
        println!("relative L2 error {:.3e}, weak error {:.3e}", e.relative.unwrap_or(f64::NAN), e.weak.unwrap_or(f64::NAN));
    }
    Ok(())
}
