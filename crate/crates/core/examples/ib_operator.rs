//! Input-to-boundary operator for the potential and the norm of its difference.

use std::f64::consts::PI;

use obslab::error::Result;
use obslab::forward::{assemble_ib_operator, operator_norm, IbKind, ObservationConfig};
use obslab::grid::{CoefficientField, Grid1D, TimeGrid};
use obslab::operators::Equation;
use obslab::spectral::dirichlet_eigenpairs;

fn main() -> Result<()> {
    let g = Grid1D::new(PI, 200)?;
    let z = CoefficientField::zeros(g);
    let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(2.0 * PI, 5e-3)?);
    let basis = dirichlet_eigenpairs(&z, 8)?;
    let reference = assemble_ib_operator(IbKind::Potential, &z, &z, &basis, 8, &cfg)?;
    println!("reference operator norm {:.6}", operator_norm(&reference)?);
    for eps in [1e-3, 1e-2, 1e-1] {
        let q = CoefficientField::from_fn(g, |x| eps * (1.0 + x.sin()));
        let op = assemble_ib_operator(IbKind::Potential, &q, &z, &basis, 8, &cfg)?;
        let d = operator_norm(&op.difference(&reference)?)?;
        println!("sup q = {:8.1e}  ||Lambda_q - Lambda_0|| = {d:.4e}  ratio {:.4}", 2.0 * eps, d / (2.0 * eps));
    }
    Ok(())
}
