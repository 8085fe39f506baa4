//! Dirichlet eigenvalues for a linear potential, Weyl constants and gaps.

use std::f64::consts::PI;

use obslab::error::Result;
use obslab::grid::{CoefficientField, Grid1D};
use obslab::spectral::{beam_eigenpairs, dirichlet_eigenpairs, gap_statistics, weyl_check};

fn main() -> Result<()> {
    let g = Grid1D::new(PI, 1000)?;
    let basis = dirichlet_eigenpairs(&CoefficientField::from_fn(g, |x| x), 8)?;
    println!("-u'' + x u = lambda u on (0, pi)");
    for (k, l) in basis.eigenvalues().iter().enumerate() {
        println!("  k = {:2}  lambda = {l:10.6}  k^2 + pi/2 = {:10.6}", k + 1, ((k + 1) * (k + 1)) as f64 + PI / 2.0);
    }
    let w = weyl_check(&basis)?;
    println!("Weyl constant {:.4}", w.c);
    let gaps = gap_statistics(&basis.frequencies())?;
    println!("frequency gap: min {:.4}, asymptotic {:.4}", gaps.min_gap, gaps.asymptotic_gap);

    let beam = beam_eigenpairs(4, Grid1D::new(1.0, 400)?)?;
    println!("clamped beam frequencies: {:?}", beam.frequencies().iter().map(|f| format!("{f:.3}")).collect::<Vec<_>>());
    Ok(())
}
