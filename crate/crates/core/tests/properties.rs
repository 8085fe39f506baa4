//! Randomized invariants.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use obslab::forward::ObservationConfig;
use obslab::grid::{inner_l2, norm, weak_norm_star, CoefficientField, Grid1D, NormKind, TimeGrid};
use obslab::operators::Equation;
use obslab::reconstruct::{probe_coefficient, Coefficients, ProbeKind, ProbeSetup};
use obslab::spectral::{dirichlet_eigenpairs, perturbed_spectrum, varrho, SpectralBasis, StateVector};
use obslab::volterra::{apply_s_samples, deconvolve_complex, ModulationSignal, Smoothing};
use proptest::prelude::*;

fn grid() -> Grid1D {
    Grid1D::new(PI, 200).unwrap()
}

fn basis() -> &'static SpectralBasis {
    static B: OnceLock<SpectralBasis> = OnceLock::new();
    B.get_or_init(|| dirichlet_eigenpairs(&CoefficientField::from_fn(grid(), |x| 1.0 + x.sin()), 12).unwrap())
}

fn coefficients(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, len)
}

/// A smooth field `Σ c_j sin(j x)` plus a constant offset.
fn field(c: &[f64], offset: f64) -> CoefficientField {
    CoefficientField::from_fn(grid(), |x| offset + c.iter().enumerate().map(|(j, v)| v * ((j + 1) as f64 * x).sin()).sum::<f64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_on_the_mode_span(c in coefficients(12)) {
        let b = basis();
        let f = CoefficientField::synthesize(grid(), &c, b.modes()).unwrap();
        let l2 = norm(&f, NormKind::L2, None).unwrap();
        let sum: f64 = c.iter().map(|v| v * v).sum();
        prop_assert!((l2 * l2 - sum).abs() <= 1e-10 * sum.max(1e-12));
        let back = b.analyze(&f).unwrap();
        for (x, y) in back.iter().zip(&c) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn weak_norm_never_exceeds_l2(c in coefficients(8), offset in -1.0..1.0f64, tau in 0.01..2.0f64) {
        let f = field(&c, offset);
        let w = weak_norm_star(&f, basis(), tau).unwrap();
        prop_assert!(w <= norm(&f, NormKind::L2, None).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn integral_is_bounded_by_l2(c in coefficients(8), offset in -1.0..1.0f64) {
        let f = field(&c, offset);
        prop_assert!(f.integral().abs() <= PI.sqrt() * norm(&f, NormKind::L2, None).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn convolution_is_causal(
        l in coefficients(3),
        h in prop::collection::vec(-1.0..1.0f64, 200),
        cut in 1usize..199,
        bump in -1.0..1.0f64,
    ) {
        let lambda: Vec<Complex64> = (0..200).map(|i| {
            let t = i as f64 * 0.01;
            Complex64::new(1.0 + l[0] * t + l[1] * t * t + l[2] * (3.0 * t).sin(), 0.0)
        }).collect();
        let h0: Vec<Complex64> = h.iter().map(|&v| v.into()).collect();
        let mut h1 = h0.clone();
        for v in &mut h1[cut..] {
            *v += bump;
        }
        let a = apply_s_samples(&lambda, &h0, 0.01);
        let b = apply_s_samples(&lambda, &h1, 0.01);
        for i in 0..cut {
            prop_assert_eq!(a[i], b[i]);
        }
    }

    #[test]
    fn deconvolution_inverts_convolution(l in coefficients(3), w in 0.5..6.0f64, phase in 0.0..PI) {
        let t = TimeGrid::with_step(1.0, 5e-4).unwrap();
        let lambda = ModulationSignal::from_fn(t, |s| 1.0 + 0.5 * (l[0] * s + l[1] * s * s + l[2] * (2.0 * s).cos())).unwrap();
        let h: Vec<Complex64> = t.times().iter().map(|s| Complex64::from((w * s + phase).sin() + s)).collect();
        let psi = apply_s_samples(lambda.values(), &h, t.dt());
        let back = deconvolve_complex(&lambda, &[psi], Smoothing::Off).unwrap();
        let num: f64 = back.channels[0].iter().zip(&h).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((num / den).sqrt() < 1e-3, "{}", (num / den).sqrt());
    }

    #[test]
    fn series_tail_bound(n in 1u64..20_000) {
        let partial: f64 = (1..=n).rev().map(|k| 1.0 / ((2 * k + 1) as f64).powi(2)).sum();
        let tail = varrho() - partial;
        prop_assert!(tail > 0.0);
        prop_assert!(tail <= 1.0 / (4.0 * n as f64 + 4.0));
    }
}

fn random_state(r: &obslab::spectral::RieszBasisData, c: &[(f64, f64)]) -> (StateVector, Vec<Complex64>) {
    let n = r.grid().n();
    let mut x = StateVector::zeros(n);
    let coef: Vec<Complex64> = c.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
    for (m, cm) in r.modes().iter().zip(&coef) {
        x.displacement.iter_mut().zip(&m.state.displacement).for_each(|(o, v)| *o += cm * v);
        x.velocity.iter_mut().zip(&m.state.velocity).for_each(|(o, v)| *o += cm * v);
    }
    (x, coef)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn riesz_synthesis_and_frame_bounds(
        a0 in 0.0..0.2f64,
        a1 in -0.1..0.1f64,
        c in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 8),
    ) {
        let g = Grid1D::new(PI, 120).unwrap();
        let a = CoefficientField::from_fn(g, |x| a0 + a1 * (2.0 * x).cos());
        let r = perturbed_spectrum(&a, Equation::Wave, 4, None).unwrap();
        let (x, coef) = random_state(&r, &c);
        // Expansion in the dual basis returns the synthesis coefficients.
        for (got, want) in r.expand(&x).iter().zip(&coef) {
            prop_assert!((got - want).norm() < 1e-8, "{got} vs {want}");
        }
        // Dual synthesis inverts the moment map.
        let y = r.synthesize_dual(&coef).unwrap();
        for (m, want) in r.modes().iter().zip(&coef) {
            prop_assert!((r.inner(&y, &m.state) - want).norm() < 1e-8);
        }
        let nx = r.norm(&x).powi(2);
        let moments: f64 = r.modes().iter().map(|m| r.inner(&x, &m.state).norm_sqr()).sum();
        prop_assert!(r.alpha_frame() * nx <= moments * (1.0 + 1e-8));
        prop_assert!(moments <= r.beta_frame() * nx * (1.0 + 1e-8));
    }
}

fn potential_setup() -> &'static ProbeSetup {
    static S: OnceLock<ProbeSetup> = OnceLock::new();
    S.get_or_init(|| {
        let g = Grid1D::new(PI, 80).unwrap();
        let z = CoefficientField::zeros(g);
        let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(2.0 * PI, 1e-2).unwrap());
        ProbeSetup::new(ProbeKind::Potential, z.clone(), z, cfg, 3, 10).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn probe_coefficient_bounded_by_source_norm(c in coefficients(3), k in 1i64..=3) {
        let s = potential_setup();
        let q = CoefficientField::synthesize(*s.q0.grid(), &c, s.basis.modes()).unwrap().scaled(0.05);
        let truth = Coefficients::new(q.clone(), s.a0.clone()).unwrap();
        let r = probe_coefficient(s, k, &truth, None).unwrap();
        prop_assert!(r.coefficient.norm() <= PI.sqrt() * r.source_norm * (1.0 + 1e-9));
        let exact = inner_l2(&q, s.basis.mode(k as usize).unwrap()).unwrap();
        // First-order agreement: 5% of the perturbation size.
        let size = 0.05 * c.iter().map(|v| v.abs()).sum::<f64>();
        prop_assert!((r.coefficient.re - exact).abs() < 0.05 * size + 1e-4, "{} vs {exact}", r.coefficient);
    }
}
