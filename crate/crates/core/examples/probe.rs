//! Single probe coefficients of a potential, with and without noise.

use std::f64::consts::PI;

use obslab::error::Result;
use obslab::forward::ObservationConfig;
use obslab::grid::{inner_l2, CoefficientField, Grid1D, TimeGrid};
use obslab::operators::Equation;
use obslab::reconstruct::{probe_coefficient, Coefficients, NoiseModel, ProbeKind, ProbeSetup};

fn main() -> Result<()> {
    let g = Grid1D::new(PI, 400)?;
    let z = CoefficientField::zeros(g);
    let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(2.0 * PI, 2e-3)?);
    let setup = ProbeSetup::new(ProbeKind::Potential, z.clone(), z.clone(), cfg, 4, 24)?;
    let q = CoefficientField::from_fn(g, |x| 0.05 * x * (PI - x) / 2.0);
    let truth = Coefficients::new(q.clone(), z)?;
    println!("{:>3} {:>12} {:>12} {:>12}", "k", "(q, phi_k)", "noiseless", "sigma 1e-5");
    for k in 1..=4 {
        let exact = inner_l2(&q, setup.basis.mode(k)?)?;
        let clean = probe_coefficient(&setup, k as i64, &truth, None)?;
        let noisy = probe_coefficient(&setup, k as i64, &truth, Some(NoiseModel { sigma: 1e-5, seed: 1 }))?;
        println!("{k:3} {exact:12.6} {:12.6} {:12.6}", clean.coefficient.re, noisy.coefficient.re);
    }
    Ok(())
}
