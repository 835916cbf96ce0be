//! Closed-form sech family of the Kerr NLSE with `κ = 2`, scaled by `η`.
//!
//! `ψ = η sech(ηx)` solves `-ψ'' - 2|ψ|²ψ = Eₙψ` with `Eₙ = -η²`; the
//! superpotential `W = 2η tanh(ηx)` belongs to `E₀ = -4η²`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::riccati::{NonlinearitySpec, Superpotential};
use crate::susy::SusyPair;

/// Which closed form to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CatalogMember {
    Psi,
    Phi,
    U,
    W,
    /// `exp(-∫W) = sech²(ηx)`, annihilated by `d/dx + W`.
    VacuumA,
    /// `sech(2ηx)`, a stationary state of the vacuum equation.
    VacuumB,
}

impl CatalogMember {
    pub const ALL: [CatalogMember; 6] = [Self::Psi, Self::Phi, Self::U, Self::W, Self::VacuumA, Self::VacuumB];

    pub fn name(self) -> &'static str {
        match self {
            Self::Psi => "psi",
            Self::Phi => "phi",
            Self::U => "u",
            Self::W => "w",
            Self::VacuumA => "vacuum_a",
            Self::VacuumB => "vacuum_b",
        }
    }
}

impl std::str::FromStr for CatalogMember {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown catalog member '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSolutionFamily {
    pub eta: f64,
    pub kappa: f64,
    pub e_n: f64,
    pub e0: f64,
}

/// `(Eₙ, E₀, ΔE) = (-η², -4η², 3η²)`.
pub fn energy_of(eta: f64) -> Result<(f64, f64, f64)> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Input(format!("eta must be positive and finite, got {eta}")));
    }
    let e2 = eta * eta;
    Ok((-e2, -4.0 * e2, 3.0 * e2))
}

impl AnalyticSolutionFamily {
    pub fn new(eta: f64) -> Result<Self> {
        let (e_n, e0, _) = energy_of(eta)?;
        Ok(Self { eta, kappa: 2.0, e_n, e0 })
    }

    pub fn delta_e(&self) -> f64 {
        self.e_n - self.e0
    }

    pub fn nonlinearity(&self) -> NonlinearitySpec {
        NonlinearitySpec::kerr(self.kappa)
    }

    /// Closed form of `which` at `(x, t)`.
    pub fn value(&self, which: CatalogMember, x: f64, t: f64) -> Complex64 {
        let eta = self.eta;
        let y = eta * x;
        let sech = 1.0 / y.cosh();
        // stationary states rotate as e^{-iEₙt}; u = 1/φ the other way
        let rot = Complex64::from_polar(1.0, -self.e_n * t);
        let s3 = 3f64.sqrt();
        match which {
            CatalogMember::Psi => rot * (eta * sech),
            CatalogMember::Phi => rot * (s3 * eta * sech * y.tanh()),
            CatalogMember::U => rot.conj() * (y.cosh() / (s3 * eta * y.tanh())),
            CatalogMember::W => Complex64::new(2.0 * eta * y.tanh(), 0.0),
            CatalogMember::VacuumA => Complex64::new(sech * sech, 0.0),
            // u = cosh(2ηx) has u'' = 4η²u, so i u̇ = u'' gives u ∝ e^{-4iη²t}
            CatalogMember::VacuumB => Complex64::from_polar(1.0 / (2.0 * y).cosh(), 4.0 * eta * eta * t),
        }
    }

    pub fn field(&self, which: CatalogMember, grid: Grid1D, t: f64) -> Field {
        Field::from_fn(grid, |x| self.value(which, x, t))
    }

    pub fn superpotential(&self, grid: Grid1D) -> Superpotential {
        Superpotential::analytic(self.field(CatalogMember::W, grid, 0.0), self.e0)
    }

    /// The exact `(ψ, φ)` pair at `t = 0`.
    pub fn pair(&self, grid: Grid1D) -> Result<SusyPair> {
        SusyPair::new(
            self.field(CatalogMember::Psi, grid, 0.0),
            self.field(CatalogMember::Phi, grid, 0.0),
            self.superpotential(grid),
            self.e_n,
            self.nonlinearity(),
        )
    }
}

/// Samples one closed form of the `η` member at time `t`.
pub fn eval_catalog(eta: f64, which: CatalogMember, grid: Grid1D, t: f64) -> Result<Field> {
    Ok(AnalyticSolutionFamily::new(eta)?.field(which, grid, t))
}
