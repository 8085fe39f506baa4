//! Finite-difference matrices shared by the eigensolvers and time steppers.

use serde::{Deserialize, Serialize};

use crate::banded::SymBand;
use crate::grid::{CoefficientField, Grid1D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Wave,
    Beam,
    Heat,
}

impl Equation {
    pub fn name(self) -> &'static str {
        match self {
            Equation::Wave => "wave",
            Equation::Beam => "beam",
            Equation::Heat => "heat",
        }
    }

    /// Spatial operator without lower-order terms: `-d²/dx²` (wave, heat)
    /// or `d⁴/dx⁴` with clamped closure (beam).
    pub fn principal_part(self, grid: &Grid1D) -> SymBand {
        match self {
            Equation::Wave | Equation::Heat => dirichlet_laplacian(grid),
            Equation::Beam => clamped_bilaplacian(grid),
        }
    }

    /// Principal part plus `diag(q)`.
    pub fn stiffness(self, grid: &Grid1D, q: Option<&CoefficientField>) -> SymBand {
        let mut k = self.principal_part(grid);
        if let Some(q) = q {
            k.add_diag(q.values());
        }
        k
    }

    /// Whether the equation is first order in time.
    pub fn is_parabolic(self) -> bool {
        matches!(self, Equation::Heat)
    }
}

impl std::fmt::Display for Equation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Equation {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wave" => Ok(Equation::Wave),
            "beam" => Ok(Equation::Beam),
            "heat" => Ok(Equation::Heat),
            other => Err(crate::error::Error::invalid(format!("unknown equation '{other}'"))),
        }
    }
}

/// Three-point `-d²/dx²` with zero Dirichlet values.
pub fn dirichlet_laplacian(grid: &Grid1D) -> SymBand {
    let n = grid.n();
    let inv = 1.0 / (grid.h() * grid.h());
    let mut a = SymBand::zeros(n, 1);
    for i in 0..n {
        a.set(i, 0, 2.0 * inv);
        if i + 1 < n {
            a.set(i, 1, -inv);
        }
    }
    a
}

/// Five-point `d⁴/dx⁴` with `u = u' = 0` at both ends, closed with the
/// ghost value `u_{-1} = u_1`. Equals `D₂ᵀ W D₂ / h⁴` where `D₂` is the
/// second difference on all nodes and `W` the trapezoid weights, so
/// `h uᵀ A u` is the discrete `∫ |u''|²`.
pub fn clamped_bilaplacian(grid: &Grid1D) -> SymBand {
    let n = grid.n();
    let inv = 1.0 / grid.h().powi(4);
    let mut a = SymBand::zeros(n, 2);
    for i in 0..n {
        let d = if i == 0 || i == n - 1 { 7.0 } else { 6.0 };
        a.set(i, 0, d * inv);
        if i + 1 < n {
            a.set(i, 1, -4.0 * inv);
        }
        if i + 2 < n {
            a.set(i, 2, inv);
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilaplacian_is_trapezoid_second_difference_form() {
        let g = Grid1D::new(1.0, 12).unwrap();
        let a = clamped_bilaplacian(&g);
        let u: Vec<f64> = g.nodes().iter().map(|x| (x * (1.0 - x)).powi(2) + 0.1 * x.sin()).collect();
        let h = g.h();
        // second differences on nodes 0..=n+1 with u_0 = u_{n+1} = 0 and ghosts
        let n = u.len();
        let at = |j: isize| -> f64 {
            if j <= 0 || j as usize > n {
                0.0
            } else {
                u[j as usize - 1]
            }
        };
        let mut s = 0.0;
        for j in 0..=(n as isize + 1) {
            let (um, up) = if j == 0 {
                (at(1), at(1))
            } else if j as usize == n + 1 {
                (at(n as isize), at(n as isize))
            } else {
                (at(j - 1), at(j + 1))
            };
            let d2 = (um - 2.0 * at(j) + up) / (h * h);
            let w = if j == 0 || j as usize == n + 1 { 0.5 } else { 1.0 };
            s += w * h * d2 * d2;
        }
        let q = h * a.quad(&u, &u);
        assert!((s - q).abs() < 1e-9 * q.abs());
    }
}
