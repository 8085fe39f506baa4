use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve, time_h1_inner_stacked, time_l2_inner_stacked, Boundary, Forcing, ObservationConfig, SolveOptions};
use crate::error::{Error, Result};
use crate::grid::{dot, CoefficientField, TimeGrid};
use crate::operators::Equation;
use crate::spectral::SpectralBasis;

/// Probe family spanning the domain of a discretized IB operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IbKind {
    /// `u₀ = φ_j`, `u₁ = 0`
    Potential,
    /// `u₀ = 0`, `u₁ = φ_j`
    Damping,
    /// `(φ_j, 0)` and `(0, √λ_j φ_j)`, the real and imaginary parts of
    /// `(φ_j, i√λ_j φ_j)`
    Joint,
    /// `u₀ = φ_j` for the heat equation
    Heat,
    /// `u₁` = beam mode `j`
    BeamDamping,
}

impl IbKind {
    pub fn equation(self) -> Equation {
        match self {
            IbKind::Potential | IbKind::Damping | IbKind::Joint => Equation::Wave,
            IbKind::Heat => Equation::Heat,
            IbKind::BeamDamping => Equation::Beam,
        }
    }

    fn default_range(self) -> RangeMetric {
        match self {
            IbKind::Heat | IbKind::BeamDamping => RangeMetric::TimeL2,
            _ => RangeMetric::TimeH1,
        }
    }

    fn domain_description(self) -> &'static str {
        match self {
            IbKind::Potential => "H1_0 cap H2 (displacement)",
            IbKind::Damping => "H1_0 (velocity)",
            IbKind::Joint => "(H1_0 cap H2) x H1_0",
            IbKind::Heat => "H1_0",
            IbKind::BeamDamping => "L2 (velocity)",
        }
    }
}

/// Metric on stacked trace samples.
#[derive(Debug, Clone, PartialEq)]
pub enum RangeMetric {
    TimeH1,
    TimeL2,
    Dense(DMatrix<f64>),
}

impl RangeMetric {
    fn name(&self) -> &'static str {
        match self {
            RangeMetric::TimeH1 => "H1(0,tau; L2(Gamma))",
            RangeMetric::TimeL2 => "L2(0,tau; L2(Gamma))",
            RangeMetric::Dense(_) => "dense",
        }
    }
}

/// Column `j` holds the stacked boundary trace of probe `j`.
#[derive(Debug, Clone)]
pub struct IBOperatorMatrix {
    kind: Option<IbKind>,
    time: Option<TimeGrid>,
    boundaries: Vec<Boundary>,
    matrix: DMatrix<f64>,
    domain_gram: DMatrix<f64>,
    range: RangeMetric,
}

#[derive(Debug, Clone, Serialize)]
pub struct IbSidecar {
    pub kind: Option<IbKind>,
    pub probes: usize,
    pub rows: usize,
    pub domain_metric: String,
    pub range_metric: String,
    pub boundaries: Vec<Boundary>,
    pub tau: Option<f64>,
    pub n_steps: Option<usize>,
    pub domain_gram: Vec<Vec<f64>>,
}

impl IBOperatorMatrix {
    /// Bare operator with explicit metrics.
    pub fn from_parts(matrix: DMatrix<f64>, domain_gram: DMatrix<f64>, range: RangeMetric) -> Result<Self> {
        if domain_gram.nrows() != matrix.ncols() || domain_gram.ncols() != matrix.ncols() {
            return Err(Error::invalid("domain Gram size must match the column count"));
        }
        if let RangeMetric::Dense(r) = &range {
            if r.nrows() != matrix.nrows() || r.ncols() != matrix.nrows() {
                return Err(Error::invalid("range Gram size must match the row count"));
            }
        }
        Ok(Self { kind: None, time: None, boundaries: vec![], matrix, domain_gram, range })
    }

    /// Operator on stacked traces sampled on `time`, one column per probe.
    pub fn from_columns(
        time: TimeGrid,
        boundaries: Vec<Boundary>,
        columns: &[Vec<f64>],
        domain_gram: DMatrix<f64>,
        range: RangeMetric,
    ) -> Result<Self> {
        if columns.is_empty() || columns.iter().any(|c| c.len() != time.n_samples() * boundaries.len()) {
            return Err(Error::invalid("columns must hold one stacked trace each"));
        }
        if matches!(range, RangeMetric::Dense(_)) {
            return Err(Error::invalid("dense range metrics apply to bare operators only"));
        }
        let rows = columns[0].len();
        let matrix = DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
        let mut op = Self::from_parts(matrix, domain_gram, RangeMetric::TimeL2)?;
        op.time = Some(time);
        op.boundaries = boundaries;
        op.range = range;
        Ok(op)
    }

    pub fn kind(&self) -> Option<IbKind> {
        self.kind
    }

    pub fn probes(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn domain_gram(&self) -> &DMatrix<f64> {
        &self.domain_gram
    }

    pub fn range(&self) -> &RangeMetric {
        &self.range
    }

    pub fn with_range(mut self, range: RangeMetric) -> Result<Self> {
        if let (RangeMetric::Dense(_), Some(_)) = (&range, self.time) {
            return Err(Error::invalid("dense range metrics apply to bare operators only"));
        }
        if !matches!(range, RangeMetric::Dense(_)) && self.time.is_none() {
            return Err(Error::invalid("time-based range metrics need a time grid"));
        }
        self.range = range;
        Ok(self)
    }

    /// `self − other`, keeping the metrics of `self`.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.matrix.shape() != other.matrix.shape() || self.kind != other.kind || self.time != other.time {
            return Err(Error::GridMismatch("IB operators have different shapes or probe families".into()));
        }
        Ok(Self { matrix: &self.matrix - &other.matrix, ..self.clone() })
    }

    fn range_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        match (&self.range, &self.time) {
            (RangeMetric::Dense(r), _) => {
                let ry = r * DVector::from_column_slice(y);
                dot(x, ry.as_slice())
            }
            (RangeMetric::TimeH1, Some(t)) => time_h1_inner_stacked(t, x, y),
            (RangeMetric::TimeL2, Some(t)) => time_l2_inner_stacked(t, x, y),
            _ => dot(x, y),
        }
    }

    /// `MᵀRM`, the range Gram pulled back to probe coordinates.
    pub fn normal_matrix(&self) -> DMatrix<f64> {
        let k = self.matrix.ncols();
        let cols: Vec<Vec<f64>> = (0..k).map(|j| self.matrix.column(j).iter().copied().collect()).collect();
        let mut n = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = self.range_inner(&cols[i], &cols[j]);
                n[(i, j)] = v;
                n[(j, i)] = v;
            }
        }
        n
    }

    pub fn sidecar(&self) -> IbSidecar {
        IbSidecar {
            kind: self.kind,
            probes: self.probes(),
            rows: self.matrix.nrows(),
            domain_metric: self.kind.map_or("explicit", |k| k.domain_description()).to_string(),
            range_metric: self.range.name().to_string(),
            boundaries: self.boundaries.clone(),
            tau: self.time.map(|t| t.tau()),
            n_steps: self.time.map(|t| t.n_steps()),
            domain_gram: self.domain_gram.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    /// CSV with one column per probe (`p1, p2, …`) and one row per stacked
    /// trace sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.probes()).map(|j| format!("p{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.matrix.row_iter() {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", vals.join(","))?;
        }
        Ok(())
    }
}

/// Discrete Sobolev Gram matrices of a list of displacement profiles.
pub(crate) fn sobolev_gram(
    profiles: &[Vec<f64>],
    e: &crate::banded::SymBand,
    h: f64,
    l2: f64,
    energy: f64,
    second: f64,
) -> DMatrix<f64> {
    let ep: Vec<Vec<f64>> = profiles.iter().map(|p| e.matvec(p)).collect();
    let k = profiles.len();
    DMatrix::from_fn(k, k, |i, j| {
        h * (l2 * dot(&profiles[i], &profiles[j]) + energy * dot(&ep[i], &profiles[j]) + second * dot(&ep[i], &ep[j]))
    })
}

/// Assembles the probe-to-trace matrix of the system `(q, a)` over the
/// first `count` modes of `basis`.
pub fn assemble_ib_operator(
    kind: IbKind,
    q: &CoefficientField,
    a: &CoefficientField,
    basis: &SpectralBasis,
    count: usize,
    config: &ObservationConfig,
) -> Result<IBOperatorMatrix> {
    if count > basis.len() {
        return Err(Error::TooManyModes { requested: count, available: basis.len() });
    }
    if count == 0 {
        return Err(Error::invalid("IB operator needs at least one probe"));
    }
    if config.equation != kind.equation() {
        return Err(Error::invalid(format!("{kind:?} probes need a {} configuration", kind.equation())));
    }
    let grid = *basis.grid();
    grid.check_same(q.grid())?;
    grid.check_same(a.grid())?;
    let n = grid.n();
    let zero = vec![0.0; n];
    let mut probes: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for j in 0..count {
        let phi = basis.modes()[j].values().to_vec();
        match kind {
            IbKind::Potential | IbKind::Heat => probes.push((phi, zero.clone())),
            IbKind::Damping | IbKind::BeamDamping => probes.push((zero.clone(), phi)),
            IbKind::Joint => {
                let w = basis.eigenvalues()[j].max(0.0).sqrt();
                probes.push((phi.clone(), zero.clone()));
                probes.push((zero.clone(), phi.iter().map(|v| w * v).collect()));
            }
        }
    }
    let traces: Vec<Vec<f64>> = probes
        .par_iter()
        .map(|(u0, u1)| solve(q, a, u0, u1, config, &Forcing::None, SolveOptions::default()).map(|s| s.trace.stacked()))
        .collect::<Result<_>>()?;
    let rows = traces[0].len();
    let matrix = DMatrix::from_fn(rows, traces.len(), |i, j| traces[j][i]);

    let h = grid.h();
    let e = kind.equation().principal_part(&grid);
    let domain_gram = match kind {
        IbKind::Potential => sobolev_gram(&probes.iter().map(|p| p.0.clone()).collect::<Vec<_>>(), &e, h, 1.0, 1.0, 1.0),
        IbKind::Heat => sobolev_gram(&probes.iter().map(|p| p.0.clone()).collect::<Vec<_>>(), &e, h, 0.0, 1.0, 0.0),
        IbKind::Damping => sobolev_gram(&probes.iter().map(|p| p.1.clone()).collect::<Vec<_>>(), &e, h, 0.0, 1.0, 0.0),
        IbKind::BeamDamping => {
            sobolev_gram(&probes.iter().map(|p| p.1.clone()).collect::<Vec<_>>(), &e, h, 1.0, 0.0, 0.0)
        }
        IbKind::Joint => {
            let u: Vec<Vec<f64>> = probes.iter().map(|p| p.0.clone()).collect();
            let v: Vec<Vec<f64>> = probes.iter().map(|p| p.1.clone()).collect();
            sobolev_gram(&u, &e, h, 1.0, 1.0, 1.0) + sobolev_gram(&v, &e, h, 0.0, 1.0, 0.0)
        }
    };
    Ok(IBOperatorMatrix {
        kind: Some(kind),
        time: Some(config.time),
        boundaries: config.boundaries.clone(),
        matrix,
        domain_gram,
        range: kind.default_range(),
    })
}

const POWER_TOL: f64 = 1e-8;
const POWER_CAP: usize = 10_000;

/// Largest generalized singular value of the operator between its
/// Gram-weighted domain and range, by power iteration on the normal form.
pub fn operator_norm(op: &IBOperatorMatrix) -> Result<f64> {
    let g = op.domain_gram();
    let chol = Cholesky::new(g.clone()).ok_or_else(|| Error::NotSpd("domain Gram".into()))?;
    if let RangeMetric::Dense(r) = op.range() {
        if Cholesky::new(r.clone()).is_none() {
            return Err(Error::NotSpd("range Gram".into()));
        }
    }
    let n = op.normal_matrix();
    let k = n.nrows();
    if n.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let g_norm = |x: &DVector<f64>| x.dot(&(g * x)).sqrt();
    let mut x = DVector::from_fn(k, |i, _| 1.0 + 0.37 * ((i as f64 + 1.0) * 0.618).sin());
    x /= g_norm(&x);
    let mut history = Vec::new();
    for _ in 0..POWER_CAP {
        let nx = &n * &x;
        let sigma2 = x.dot(&nx);
        let y = chol.solve(&nx);
        let resid = &y - &x * sigma2;
        let rel = g_norm(&resid) / sigma2.abs().max(f64::MIN_POSITIVE);
        history.push(sigma2.max(0.0).sqrt());
        if history.len() > 8 {
            history.remove(0);
        }
        if rel <= POWER_TOL {
            return Ok(sigma2.max(0.0).sqrt());
        }
        let ny = g_norm(&y);
        if !(ny.is_finite() && ny > 0.0) {
            return Ok(0.0);
        }
        x = y / ny;
    }
    Err(Error::NonConvergence { iterations: POWER_CAP, history })
}
