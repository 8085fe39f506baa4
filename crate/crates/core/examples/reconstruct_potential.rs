//! Potential reconstruction from five wave probes.

use std::f64::consts::PI;

use obslab::error::Result;
use obslab::forward::ObservationConfig;
use obslab::grid::{CoefficientField, Grid1D, TimeGrid};
use obslab::operators::Equation;
use obslab::reconstruct::{reconstruct_field, Coefficients, PlanChoice, ProbeKind, ProbeSetup};

fn main() -> Result<()> {
    let g = Grid1D::new(PI, 400)?;
    let z = CoefficientField::zeros(g);
    let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(2.0 * PI, 2e-3)?);
    let setup = ProbeSetup::new(ProbeKind::Potential, z.clone(), z.clone(), cfg, 5, 24)?;
    let q = CoefficientField::synthesize(g, &[0.1, 0.0, 0.05, 0.0, -0.02], setup.basis.modes())?;
    let report = reconstruct_field(&setup, &Coefficients::new(q, z)?, PlanChoice::Modes(5), None)?;
    for p in &report.probes {
        println!("c_{} = {:+.6}", p.k, p.coefficient.re);
    }
    let e = report.error("q").and_then(|e| e.relative).unwrap_or(f64::NAN);
    println!("relative L2 error {e:.3e} after {} sweeps", report.iterations);
    println!("||Delta Lambda|| = {:.3e}", report.delta_lambda_norm);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let text = String::from_utf8_lossy(&csv);
    for line in text.lines().step_by(50) {
        println!("{line}");
    }
    Ok(())
}
