//! Damping reconstruction about a nonzero reference through the perturbed modes.

use std::f64::consts::PI;

use obslab::error::Result;
use obslab::forward::ObservationConfig;
use obslab::grid::{CoefficientField, Grid1D, TimeGrid};
use obslab::operators::Equation;
use obslab::reconstruct::{reconstruct_field, Coefficients, PlanChoice, ProbeKind, ProbeSetup};

fn main() -> Result<()> {
    let g = Grid1D::new(PI, 300)?;
    let z = CoefficientField::zeros(g);
    let a0 = CoefficientField::constant(g, 0.2);
    let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(2.0 * PI, 2e-3)?);
    let setup = ProbeSetup::new(ProbeKind::DampingNonzero, z.clone(), a0.clone(), cfg, 3, 20)?.with_budget(0.01);
    let riesz = setup.riesz()?;
    println!("frame bounds [{:.4}, {:.4}], alpha_bar {:.4}", riesz.alpha_frame(), riesz.beta_frame(), riesz.alpha_bar());
    for m in riesz.modes().iter().filter(|m| m.k > 0) {
        println!("  mode {:2}: mu = {:.5}  decay rate {:+.4}", m.k, m.mu, m.decay_rate());
    }
    let da = CoefficientField::synthesize(g, &[0.03, 0.015, 0.009], setup.basis.modes())?;
    let truth = Coefficients::new(z, a0.add(&da)?)?;
    let report = reconstruct_field(&setup, &truth, PlanChoice::Modes(3), None)?;
    let e = report.error("a").and_then(|e| e.relative).unwrap_or(f64::NAN);
    println!("relative L2 error {e:.3e}");
    if let Some(b) = report.budget {
        println!("coefficient budget {:.4e} <= {}: {}", b.value, b.m, b.holds);
    }
    Ok(())
}
