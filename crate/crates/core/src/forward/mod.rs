//! Time-domain solvers for the damped wave, clamped beam and heat problems,
//! their boundary traces, and discretized initial-to-boundary operators.

mod ib;

pub use ib::{assemble_ib_operator, operator_norm, IBOperatorMatrix, IbKind, IbSidecar, RangeMetric};
pub(crate) use ib::sobolev_gram;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, SymBand};
use crate::error::{Error, Result};
use crate::grid::{CoefficientField, Grid1D, TimeGrid};
use crate::operators::Equation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Left,
    Right,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Left => "left",
            Boundary::Right => "right",
        }
    }
}

/// Which equation is observed, where, and over which time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationConfig {
    pub equation: Equation,
    pub boundaries: Vec<Boundary>,
    pub time: TimeGrid,
}

impl ObservationConfig {
    pub fn new(equation: Equation, boundaries: Vec<Boundary>, time: TimeGrid) -> Result<Self> {
        let cfg = Self { equation, boundaries, time };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Left-end observation, the default for every equation.
    pub fn left(equation: Equation, time: TimeGrid) -> Self {
        Self { equation, boundaries: vec![Boundary::Left], time }
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundaries.is_empty() {
            return Err(Error::invalid("observed boundary set must be nonempty"));
        }
        let mut sorted = self.boundaries.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.boundaries.len() {
            return Err(Error::invalid("observed boundary listed twice"));
        }
        if self.equation == Equation::Beam && self.boundaries != [Boundary::Left] {
            return Err(Error::invalid("beam torque is observed at the left end only"));
        }
        Ok(())
    }

    /// Warning when the wave observation time is below the `2L` threshold.
    pub fn threshold_warning(&self, grid: &Grid1D) -> Option<String> {
        let need = 2.0 * grid.length();
        (self.equation == Equation::Wave && self.time.tau() < need).then(|| {
            format!(
                "observation time tau = {} is below 2L = {need}; the wave is not exactly observable",
                self.time.tau()
            )
        })
    }
}

/// Boundary time series, one channel per observed boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSignal {
    time: TimeGrid,
    boundaries: Vec<Boundary>,
    channels: Vec<Vec<f64>>,
}

impl TraceSignal {
    pub fn new(time: TimeGrid, boundaries: Vec<Boundary>, channels: Vec<Vec<f64>>) -> Result<Self> {
        if boundaries.len() != channels.len() {
            return Err(Error::invalid("one channel per boundary point is required"));
        }
        for c in &channels {
            if c.len() != time.n_samples() {
                return Err(Error::invalid(format!(
                    "trace has {} samples, time grid has {}",
                    c.len(),
                    time.n_samples()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("trace contains non-finite samples"));
            }
        }
        Ok(Self { time, boundaries, channels })
    }

    /// Single-channel signal, handy for modulations and scalar series.
    pub fn scalar(time: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(time, vec![Boundary::Left], vec![values])
    }

    pub fn zeros(time: TimeGrid, boundaries: Vec<Boundary>) -> Self {
        let channels = vec![vec![0.0; time.n_samples()]; boundaries.len()];
        Self { time, boundaries, channels }
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn boundaries(&self) -> &[Boundary] {
        &self.boundaries
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn channels_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.channels
    }

    /// All channels concatenated.
    pub fn stacked(&self) -> Vec<f64> {
        self.channels.concat()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        self.time.check_same(&other.time)?;
        if self.boundaries != other.boundaries {
            return Err(Error::GridMismatch("traces observe different boundary sets".into()));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        Ok(Self { time: self.time, boundaries: self.boundaries.clone(), channels })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let channels = self.channels.iter().map(|c| c.iter().map(|v| v * s).collect()).collect();
        Self { time: self.time, boundaries: self.boundaries.clone(), channels }
    }

    /// `L²(0,τ; L²(Γ))` norm with the trapezoid rule.
    pub fn l2_norm(&self) -> f64 {
        let w = self.time.trapezoid_weights();
        self.channels.iter().flat_map(|c| c.iter().zip(&w).map(|(v, w)| w * v * v)).sum::<f64>().sqrt()
    }

    /// `H¹(0,τ; L²(Γ))` norm: `L²` plus forward-difference derivative.
    pub fn h1_norm(&self) -> f64 {
        time_h1_inner_stacked(&self.time, &self.stacked(), &self.stacked()).sqrt()
    }

    /// CSV with a `t` column followed by one column per boundary point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for b in &self.boundaries {
            write!(w, ",{}", b.name())?;
        }
        writeln!(w)?;
        for i in 0..self.time.n_samples() {
            write!(w, "{}", self.time.t(i))?;
            for c in &self.channels {
                write!(w, ",{}", c[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Discrete `H¹(0,τ)` pairing of single-channel samples.
pub(crate) fn time_h1_inner(time: &TimeGrid, x: &[f64], y: &[f64]) -> f64 {
    let w = time.trapezoid_weights();
    let dt = time.dt();
    let l2: f64 = x.iter().zip(y).zip(&w).map(|((a, b), w)| w * a * b).sum();
    let d: f64 = x.windows(2).zip(y.windows(2)).map(|(a, b)| (a[1] - a[0]) * (b[1] - b[0])).sum();
    l2 + d / dt
}

/// Same pairing applied channel by channel to stacked samples.
pub(crate) fn time_h1_inner_stacked(time: &TimeGrid, x: &[f64], y: &[f64]) -> f64 {
    let m = time.n_samples();
    x.chunks(m).zip(y.chunks(m)).map(|(a, b)| time_h1_inner(time, a, b)).sum()
}

pub(crate) fn time_l2_inner_stacked(time: &TimeGrid, x: &[f64], y: &[f64]) -> f64 {
    let w = time.trapezoid_weights();
    x.chunks(w.len())
        .zip(y.chunks(w.len()))
        .map(|(a, b)| a.iter().zip(b).zip(&w).map(|((p, q), w)| w * p * q).sum::<f64>())
        .sum()
}

/// Right-hand side `f(x, t)` added to the equation.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Forcing {
    #[default]
    None,
    /// `λ(t_i)·f(x)` from time samples of `λ` and a spatial shape.
    Separable { modulation: Vec<f64>, shape: Vec<f64> },
    /// Full space-time samples, one vector per time level.
    Sampled(Vec<Vec<f64>>),
}

impl Forcing {
    fn validate(&self, n: usize, time: &TimeGrid) -> Result<()> {
        let m = time.n_samples();
        match self {
            Forcing::None => Ok(()),
            Forcing::Separable { modulation, shape } => {
                if modulation.len() != m || shape.len() != n {
                    return Err(Error::invalid("separable forcing has the wrong dimensions"));
                }
                Ok(())
            }
            Forcing::Sampled(levels) => {
                if levels.len() != m || levels.iter().any(|l| l.len() != n) {
                    return Err(Error::invalid("sampled forcing has the wrong dimensions"));
                }
                Ok(())
            }
        }
    }

    /// Adds `s·f(·, t_i)` to `out`.
    fn add_at(&self, i: usize, s: f64, out: &mut [f64]) {
        match self {
            Forcing::None => {}
            Forcing::Separable { modulation, shape } => {
                let c = s * modulation[i];
                if c != 0.0 {
                    out.iter_mut().zip(shape).for_each(|(o, f)| *o += c * f);
                }
            }
            Forcing::Sampled(levels) => out.iter_mut().zip(&levels[i]).for_each(|(o, f)| *o += s * f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveOptions {
    /// Keep every `stride`-th displacement snapshot.
    pub record_stride: Option<usize>,
    pub energy: bool,
}

impl SolveOptions {
    pub fn trajectory(stride: usize) -> Self {
        Self { record_stride: Some(stride.max(1)), energy: false }
    }

    pub fn with_energy(mut self) -> Self {
        self.energy = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    /// CSV with `t` followed by one column per interior node.
    pub fn write_csv<W: Write>(&self, mut w: W, grid: &Grid1D) -> Result<()> {
        write!(w, "t")?;
        for x in grid.nodes() {
            write!(w, ",x={x}")?;
        }
        writeln!(w)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in s {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub trace: TraceSignal,
    pub trajectory: Option<Trajectory>,
    pub final_state: Vec<f64>,
    /// `None` for the heat equation.
    pub final_velocity: Option<Vec<f64>>,
    /// Discrete energy at each time level (if requested).
    pub energy: Option<Vec<f64>>,
}

fn check_vec(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::invalid(format!("{name} has {} values, grid has {n}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{name} contains non-finite values")));
    }
    Ok(())
}

/// Observation of a displacement vector on the configured boundary points.
pub(crate) fn observe(equation: Equation, boundaries: &[Boundary], h: f64, u: &[f64], out: &mut [Vec<f64>], i: usize) {
    let n = u.len();
    for (b, ch) in boundaries.iter().zip(out.iter_mut()) {
        ch[i] = match (equation, b) {
            // torque u''(0) from u(0) = u'(0) = 0
            (Equation::Beam, _) => (8.0 * u[0] - u[1]) / (2.0 * h * h),
            (_, Boundary::Left) => -(4.0 * u[0] - u[1]) / (2.0 * h),
            (_, Boundary::Right) => (u[n - 2] - 4.0 * u[n - 1]) / (2.0 * h),
        };
    }
}

/// Implicit trapezoid rule for `u'' + D u' + K u = f` written as a first
/// order system; unconditionally stable and second order.
#[allow(clippy::too_many_arguments)]
fn integrate_second_order(
    equation: Equation,
    grid: &Grid1D,
    stiffness: &SymBand,
    damping: &[f64],
    u0: &[f64],
    u1: &[f64],
    config: &ObservationConfig,
    forcing: &Forcing,
    options: SolveOptions,
) -> Result<Solution> {
    config.validate()?;
    let n = grid.n();
    check_vec("initial displacement", u0, n)?;
    check_vec("initial velocity", u1, n)?;
    forcing.validate(n, &config.time)?;
    let time = config.time;
    let dt = time.dt();
    let h = grid.h();

    let mut lhs = stiffness.scaled(0.25 * dt * dt);
    lhs.add_diag(&damping.iter().map(|d| 1.0 + 0.5 * dt * d).collect::<Vec<_>>());
    let lu: BandLu<f64> = lhs.lu()?;

    let m = time.n_samples();
    let mut channels = vec![vec![0.0; m]; config.boundaries.len()];
    let mut u = u0.to_vec();
    let mut v = u1.to_vec();
    observe(equation, &config.boundaries, h, &u, &mut channels, 0);

    let energy_of = |u: &[f64], v: &[f64]| 0.5 * h * (stiffness.quad(u, u) + crate::grid::dot(v, v));
    let mut energy = options.energy.then(|| vec![energy_of(&u, &v)]);
    let mut trajectory = options.record_stride.map(|_| Trajectory { times: vec![0.0], states: vec![u.clone()] });

    let mut rhs = vec![0.0; n];
    for i in 0..time.n_steps() {
        let ku = stiffness.matvec(&u);
        let kv = stiffness.matvec(&v);
        for j in 0..n {
            rhs[j] = v[j] - 0.5 * dt * damping[j] * v[j] - dt * ku[j] - 0.25 * dt * dt * kv[j];
        }
        forcing.add_at(i, 0.5 * dt, &mut rhs);
        forcing.add_at(i + 1, 0.5 * dt, &mut rhs);
        let v_new = lu.solve(&rhs);
        for j in 0..n {
            u[j] += 0.5 * dt * (v[j] + v_new[j]);
        }
        v = v_new;
        observe(equation, &config.boundaries, h, &u, &mut channels, i + 1);
        if let Some(e) = energy.as_mut() {
            e.push(energy_of(&u, &v));
        }
        if let (Some(tr), Some(stride)) = (trajectory.as_mut(), options.record_stride) {
            if (i + 1) % stride == 0 || i + 1 == time.n_steps() {
                tr.times.push(time.t(i + 1));
                tr.states.push(u.clone());
            }
        }
    }
    Ok(Solution {
        trace: TraceSignal::new(time, config.boundaries.clone(), channels)?,
        trajectory,
        final_state: u,
        final_velocity: Some(v),
        energy,
    })
}

/// `u'' − u_xx + q u + a u' = f` with zero Dirichlet data; Neumann trace.
#[allow(clippy::too_many_arguments)]
pub fn solve_wave(
    q: &CoefficientField,
    a: &CoefficientField,
    u0: &[f64],
    u1: &[f64],
    config: &ObservationConfig,
    forcing: &Forcing,
    options: SolveOptions,
) -> Result<Solution> {
    let grid = *q.grid();
    grid.check_same(a.grid())?;
    if config.equation != Equation::Wave {
        return Err(Error::invalid("observation config is not for the wave equation"));
    }
    let k = Equation::Wave.stiffness(&grid, Some(q));
    integrate_second_order(Equation::Wave, &grid, &k, a.values(), u0, u1, config, forcing, options)
}

/// `u'' + u_xxxx + a u' = f` with clamped ends; torque trace `u_xx(0, t)`.
pub fn solve_beam(
    a: &CoefficientField,
    u0: &[f64],
    u1: &[f64],
    config: &ObservationConfig,
    forcing: &Forcing,
    options: SolveOptions,
) -> Result<Solution> {
    let grid = *a.grid();
    if config.equation != Equation::Beam {
        return Err(Error::invalid("observation config is not for the beam equation"));
    }
    if grid.n() < 4 {
        return Err(Error::GridTooCoarse("beam needs at least 4 interior nodes".into()));
    }
    let k = Equation::Beam.principal_part(&grid);
    integrate_second_order(Equation::Beam, &grid, &k, a.values(), u0, u1, config, forcing, options)
}

/// Crank–Nicolson for `u' − u_xx + q u = f`; Neumann trace and final state.
pub fn solve_heat(
    q: &CoefficientField,
    u0: &[f64],
    config: &ObservationConfig,
    forcing: &Forcing,
    options: SolveOptions,
) -> Result<Solution> {
    config.validate()?;
    if config.equation != Equation::Heat {
        return Err(Error::invalid("observation config is not for the heat equation"));
    }
    let grid = *q.grid();
    let n = grid.n();
    check_vec("initial state", u0, n)?;
    forcing.validate(n, &config.time)?;
    let time = config.time;
    let dt = time.dt();
    let h = grid.h();
    let k = Equation::Heat.stiffness(&grid, Some(q));
    let mut lhs = k.scaled(0.5 * dt);
    lhs.add_diag(&vec![1.0; n]);
    let lu = lhs.lu()?;

    let m = time.n_samples();
    let mut channels = vec![vec![0.0; m]; config.boundaries.len()];
    let mut u = u0.to_vec();
    observe(Equation::Heat, &config.boundaries, h, &u, &mut channels, 0);
    let mut energy = options.energy.then(|| vec![0.5 * h * crate::grid::dot(&u, &u)]);
    let mut trajectory = options.record_stride.map(|_| Trajectory { times: vec![0.0], states: vec![u.clone()] });
    let mut rhs = vec![0.0; n];
    for i in 0..time.n_steps() {
        let ku = k.matvec(&u);
        for j in 0..n {
            rhs[j] = u[j] - 0.5 * dt * ku[j];
        }
        forcing.add_at(i, 0.5 * dt, &mut rhs);
        forcing.add_at(i + 1, 0.5 * dt, &mut rhs);
        u = lu.solve(&rhs);
        observe(Equation::Heat, &config.boundaries, h, &u, &mut channels, i + 1);
        if let Some(e) = energy.as_mut() {
            e.push(0.5 * h * crate::grid::dot(&u, &u));
        }
        if let (Some(tr), Some(stride)) = (trajectory.as_mut(), options.record_stride) {
            if (i + 1) % stride == 0 || i + 1 == time.n_steps() {
                tr.times.push(time.t(i + 1));
                tr.states.push(u.clone());
            }
        }
    }
    Ok(Solution {
        trace: TraceSignal::new(time, config.boundaries.clone(), channels)?,
        trajectory,
        final_state: u,
        final_velocity: None,
        energy,
    })
}

/// Dispatches homogeneous or forced solves by equation: `u1` is ignored
/// for the heat equation and `q` for the beam.
#[allow(clippy::too_many_arguments)]
pub fn solve(
    q: &CoefficientField,
    a: &CoefficientField,
    u0: &[f64],
    u1: &[f64],
    config: &ObservationConfig,
    forcing: &Forcing,
    options: SolveOptions,
) -> Result<Solution> {
    match config.equation {
        Equation::Wave => solve_wave(q, a, u0, u1, config, forcing, options),
        Equation::Beam => solve_beam(a, u0, u1, config, forcing, options),
        Equation::Heat => solve_heat(q, u0, config, forcing, options),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftIdentityReport {
    /// Relative `L²(Q)` mismatch between `∂_t u_φ` and `u_{∂_t φ, φ(·,0) − K u₀}`.
    pub residual: f64,
    pub lhs_norm: f64,
}

/// Compares the time derivative of the heat solution driven by `φ(x, t)`
/// from `u₀` with the solution driven by `∂_t φ` from `φ(·, 0) − K u₀`.
/// `∂_t φ` is taken by centered differences.
pub fn heat_shift_identity_check(
    q: &CoefficientField,
    u0: &[f64],
    phi: impl Fn(f64, f64) -> f64,
    time: TimeGrid,
) -> Result<ShiftIdentityReport> {
    let grid = *q.grid();
    let n = grid.n();
    check_vec("initial state", u0, n)?;
    let nodes = grid.nodes();
    let m = time.n_samples();
    let dt = time.dt();
    let eps = dt * 1e-2;
    let samples: Vec<Vec<f64>> = (0..m).map(|i| nodes.iter().map(|&x| phi(x, time.t(i))).collect()).collect();
    let dphi: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let t = time.t(i);
            nodes.iter().map(|&x| (phi(x, t + eps) - phi(x, t - eps)) / (2.0 * eps)).collect()
        })
        .collect();
    let config = ObservationConfig::left(Equation::Heat, time);
    let opts = SolveOptions::trajectory(1);
    let direct = solve_heat(q, u0, &config, &Forcing::Sampled(samples.clone()), opts)?;
    let k = Equation::Heat.stiffness(&grid, Some(q));
    let ku0 = k.matvec(u0);
    let w0: Vec<f64> = samples[0].iter().zip(&ku0).map(|(p, k)| p - k).collect();
    let shifted = solve_heat(q, &w0, &config, &Forcing::Sampled(dphi), opts)?;

    let ud = direct.trajectory.expect("trajectory requested").states;
    let us = shifted.trajectory.expect("trajectory requested").states;
    let w = time.trapezoid_weights();
    let h = grid.h();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        let deriv: Vec<f64> = if i == 0 {
            (0..n).map(|j| (-3.0 * ud[0][j] + 4.0 * ud[1][j] - ud[2][j]) / (2.0 * dt)).collect()
        } else if i == m - 1 {
            (0..n).map(|j| (3.0 * ud[i][j] - 4.0 * ud[i - 1][j] + ud[i - 2][j]) / (2.0 * dt)).collect()
        } else {
            (0..n).map(|j| (ud[i + 1][j] - ud[i - 1][j]) / (2.0 * dt)).collect()
        };
        for j in 0..n {
            num += w[i] * h * (deriv[j] - us[i][j]).powi(2);
            den += w[i] * h * deriv[j].powi(2);
        }
    }
    let lhs_norm = den.sqrt();
    let residual = if lhs_norm == 0.0 { num.sqrt() } else { (num / den).sqrt() };
    Ok(ShiftIdentityReport { residual, lhs_norm })
}
