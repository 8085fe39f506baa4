//! Modulated traces: convolution with a modulation and its inversion.

use num_complex::Complex64;
use obslab::error::Result;
use obslab::grid::TimeGrid;
use obslab::volterra::{apply_s_samples, deconvolve_complex, ModulationSignal, Smoothing};

fn main() -> Result<()> {
    let t = TimeGrid::with_step(2.0, 1e-3)?;
    let h: Vec<Complex64> = t.times().iter().map(|s| Complex64::from((3.0 * s).sin() + 0.5 * s)).collect();
    let modulations = [
        ("constant 1", ModulationSignal::constant(t, 1.0)?),
        ("cos 2t", ModulationSignal::cosine(t, 2.0)?),
        ("exp(-3t)", ModulationSignal::exponential(t, Complex64::new(-3.0, 0.0))?),
        ("1 + t^2", ModulationSignal::from_fn(t, |s| 1.0 + s * s)?),
    ];
    for (name, lambda) in &modulations {
        let psi = apply_s_samples(lambda.values(), &h, t.dt());
        let back = deconvolve_complex(lambda, &[psi], Smoothing::Off)?;
        let err = back.channels[0].iter().zip(&h).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        println!("{name:>12}: max round-trip error {err:.2e}");
    }
    Ok(())
}
