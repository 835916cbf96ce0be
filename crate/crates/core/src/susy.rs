//! Factorization operators `Â = d/dx + W`, `Â† = -d/dx + W` and the maps
//! between an NLSE eigenfunction `ψ` and its partner `φ`.
//!
//! `Â†` here is only the formal transpose of `Â`; for non-decaying fields
//! the two are not adjoint, the difference being the boundary term.

use num_complex::Complex64;

use crate::diff::{antiderivative, DerivativeScheme};
use crate::error::{Error, Result};
use crate::grid::{Field, Mask, ResidualReport};
use crate::riccati::{NonlinearitySpec, Provenance, Superpotential};

/// One level of the construction: `ψₙ`, its partner `φₙ`, and the
/// superpotential tying them together.
#[derive(Debug, Clone)]
pub struct SusyPair {
    pub psi: Field,
    pub phi: Field,
    pub w: Superpotential,
    pub e_n: f64,
    pub e0: f64,
    pub delta_e: f64,
    pub nspec: NonlinearitySpec,
}

fn check_levels(e_n: f64, e0: f64) -> Result<f64> {
    if !(e_n.is_finite() && e0.is_finite()) {
        return Err(Error::Input("energies must be finite".into()));
    }
    if e_n <= e0 {
        return Err(Error::BrokenSusy { e_n, e0 });
    }
    Ok(e_n - e0)
}

impl SusyPair {
    pub fn new(
        psi: Field,
        phi: Field,
        w: Superpotential,
        e_n: f64,
        nspec: NonlinearitySpec,
    ) -> Result<Self> {
        psi.ensure_same_grid(&phi)?;
        psi.ensure_same_grid(&w.w)?;
        let e0 = w.e0;
        let delta_e = check_levels(e_n, e0)?;
        Ok(Self { psi, phi, w, e_n, e0, delta_e, nspec })
    }

    /// Builds the pair from `ψ` via `φ = ΔE^{-1/2} Â† ψ`.
    pub fn from_psi(
        psi: Field,
        w: Superpotential,
        e_n: f64,
        nspec: NonlinearitySpec,
        scheme: DerivativeScheme,
    ) -> Result<Self> {
        let phi = partner_from_psi(&psi, &w, e_n, w.e0, scheme)?;
        Self::new(psi, phi, w, e_n, nspec)
    }

    pub fn sqrt_delta_e(&self) -> f64 {
        self.delta_e.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialRole {
    /// `W² - W' + E₀`, the potential of the partner Hamiltonian.
    V1Effective,
    /// `-N(ψ)`, the effective potential of the NLSE.
    V2Effective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub v: Field,
    pub role: PotentialRole,
}

impl PotentialField {
    pub fn partner(w: &Superpotential, scheme: DerivativeScheme) -> Result<Self> {
        let dw = scheme.d1(&w.w)?;
        let e0 = w.e0;
        Ok(Self {
            v: w.w.zip_map(&dw, |wv, d| wv * wv - d + e0),
            role: PotentialRole::V1Effective,
        })
    }

    pub fn nlse(psi: &Field, nspec: &NonlinearitySpec) -> Self {
        Self {
            v: nspec.evaluate(psi).scale_real(-1.0),
            role: PotentialRole::V2Effective,
        }
    }

    /// `H f = -f'' + V f`.
    pub fn hamiltonian(&self, f: &Field, scheme: DerivativeScheme) -> Result<Field> {
        f.ensure_same_grid(&self.v)?;
        let d2 = scheme.d2(f)?;
        Ok(d2.zip_map(&(&self.v * f), |a, b| b - a))
    }
}

/// `Â f = f' + W f`.
pub fn apply_a(w: &Superpotential, f: &Field, scheme: DerivativeScheme) -> Result<Field> {
    f.ensure_same_grid(&w.w)?;
    let df = scheme.d1(f)?;
    Ok(&df + &(&w.w * f))
}

/// `Â† f = -f' + W f`.
pub fn apply_a_dagger(w: &Superpotential, f: &Field, scheme: DerivativeScheme) -> Result<Field> {
    f.ensure_same_grid(&w.w)?;
    let df = scheme.d1(f)?;
    Ok(&(&w.w * f) - &df)
}

/// `φ = (Eₙ - E₀)^{-1/2} Â† ψ`.
pub fn partner_from_psi(
    psi: &Field,
    w: &Superpotential,
    e_n: f64,
    e0: f64,
    scheme: DerivativeScheme,
) -> Result<Field> {
    let delta_e = check_levels(e_n, e0)?;
    Ok(apply_a_dagger(w, psi, scheme)?.scale_real(delta_e.sqrt().recip()))
}

/// `ψ = (Eₙ - E₀)^{-1/2} Â φ`.
pub fn psi_from_partner(
    phi: &Field,
    w: &Superpotential,
    e_n: f64,
    e0: f64,
    scheme: DerivativeScheme,
) -> Result<Field> {
    let delta_e = check_levels(e_n, e0)?;
    Ok(apply_a(w, phi, scheme)?.scale_real(delta_e.sqrt().recip()))
}

/// Recovers `W = (√ΔE ψ - φ') / φ` on unmasked points.
///
/// Masked points carry the same expression where `φ ≠ 0` and zero where it
/// vanishes; consumers must honour the mask there.
pub fn superpotential_from_pair(
    psi: &Field,
    phi: &Field,
    e_n: f64,
    e0: f64,
    mask: &Mask,
    scheme: DerivativeScheme,
) -> Result<Superpotential> {
    psi.ensure_same_grid(phi)?;
    let delta_e = check_levels(e_n, e0)?;
    if mask.len() != phi.len() {
        return Err(Error::Input("mask length differs from field length".into()));
    }
    let grid = *phi.grid();
    let dphi = scheme.d1(phi)?;
    let s = delta_e.sqrt();
    let mut w = Vec::with_capacity(phi.len());
    for i in 0..phi.len() {
        let p = phi.values()[i];
        if p.norm() == 0.0 {
            if !mask.is_masked(i) {
                return Err(Error::Singular { x: grid.x(i), magnitude: 0.0 });
            }
            w.push(Complex64::new(0.0, 0.0));
            continue;
        }
        w.push((psi.values()[i] * s - dphi.values()[i]) / p);
    }
    Ok(Superpotential {
        w: Field::new(grid, w)?,
        provenance: Provenance::PairDerived,
        e0,
        w0: None,
        non_unique: false,
    })
}

/// Residual of `(Â Â† + E₀) ψ - Eₙ ψ`.
pub fn factorization_check(pair: &SusyPair, scheme: DerivativeScheme) -> Result<ResidualReport> {
    let inner = apply_a_dagger(&pair.w, &pair.psi, scheme)?;
    let outer = apply_a(&pair.w, &inner, scheme)?;
    let shift = pair.e0 - pair.e_n;
    ResidualReport::unmasked(outer.zip_map(&pair.psi, |a, p| a + p * shift))
}

/// Annihilated state `φ₀ = exp(-∫ W)` of `Â`, normalised to unit peak.
pub fn vacuum_state_from_w(w: &Superpotential, scheme: DerivativeScheme) -> Result<Field> {
    let integral = antiderivative(&w.w, scheme)?;
    // the peak of |exp(-∫W)| sits at the largest real exponent
    let top = integral
        .values()
        .iter()
        .map(|z| -z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(integral.map(|z| (-z - top).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{mask_near_zeros_relative, norms, Grid1D};

    const SCHEME: DerivativeScheme = DerivativeScheme::spectral();

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn w_tanh(g: Grid1D, eta: f64) -> Superpotential {
        Superpotential::analytic(Field::from_real_fn(g, |x| 2.0 * eta * (eta * x).tanh()), -4.0 * eta * eta)
    }

    fn close(a: &Field, exact: impl Fn(f64) -> f64) -> f64 {
        (a - &Field::from_real_fn(*a.grid(), exact)).max_abs()
    }

    #[test]
    fn a_annihilates_sech_squared() {
        let g = Grid1D::standard();
        let r = apply_a(&w_tanh(g, 1.0), &Field::from_real_fn(g, |x| sech(x).powi(2)), SCHEME).unwrap();
        assert!(r.max_abs() <= 1e-8);
    }

    #[test]
    fn zero_superpotential_reduces_to_derivative() {
        let g = Grid1D::standard();
        let zero = Superpotential::analytic(Field::zeros(g), -1.0);
        let f = Field::from_real_fn(g, sech);
        assert!(close(&apply_a(&zero, &f, SCHEME).unwrap(), |x| -sech(x) * x.tanh()) < 1e-10);
        assert!(close(&apply_a_dagger(&zero, &f, SCHEME).unwrap(), |x| sech(x) * x.tanh()) < 1e-10);
    }

    #[test]
    fn a_maps_partner_to_psi() {
        let g = Grid1D::standard();
        let phi = Field::from_real_fn(g, |x| 3f64.sqrt() * sech(x) * x.tanh());
        let r = apply_a(&w_tanh(g, 1.0), &phi, SCHEME).unwrap();
        assert!(close(&r, |x| 3f64.sqrt() * sech(x)) < 1e-9);
        let a_dag = apply_a_dagger(&w_tanh(g, 1.0), &Field::from_real_fn(g, sech), SCHEME).unwrap();
        assert!(close(&a_dag, |x| 3.0 * sech(x) * x.tanh()) < 1e-9);
    }

    #[test]
    fn adjoint_fails_by_the_boundary_term() {
        let g = Grid1D::standard();
        let w = w_tanh(g, 1.0);
        let f = Field::from_real_fn(g, |x| 1.0 + x.tanh());
        let lhs = apply_a(&w, &f, SCHEME).unwrap().inner(&f);
        let rhs = f.inner(&apply_a_dagger(&w, &f, SCHEME).unwrap());
        let boundary = (1.0 + 10f64.tanh()).powi(2) - (1.0 - 10f64.tanh()).powi(2);
        let diff = lhs - rhs;
        assert!((diff.re - boundary).abs() < 1e-6, "{diff} vs {boundary}");
        assert!(diff.norm() > 1.0);
    }

    #[test]
    fn partner_of_soliton() {
        let g = Grid1D::standard();
        let phi = partner_from_psi(&Field::from_real_fn(g, sech), &w_tanh(g, 1.0), -1.0, -4.0, SCHEME).unwrap();
        assert!(close(&phi, |x| 3f64.sqrt() * sech(x) * x.tanh()) <= 1e-8);
        let zero = partner_from_psi(&Field::zeros(g), &w_tanh(g, 1.0), -1.0, -4.0, SCHEME).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn partner_of_scaled_soliton() {
        let g = Grid1D::standard();
        let psi = Field::from_real_fn(g, |x| 2.0 * sech(2.0 * x));
        let phi = partner_from_psi(&psi, &w_tanh(g, 2.0), -4.0, -16.0, SCHEME).unwrap();
        assert!(close(&phi, |x| 2.0 * 3f64.sqrt() * sech(2.0 * x) * (2.0 * x).tanh()) <= 1e-8);
    }

    #[test]
    fn broken_susy_is_rejected() {
        let g = Grid1D::standard();
        let psi = Field::from_real_fn(g, sech);
        let err = partner_from_psi(&psi, &w_tanh(g, 1.0), -4.0, -4.0, SCHEME).unwrap_err();
        assert_eq!(err, Error::BrokenSusy { e_n: -4.0, e0: -4.0 });
        assert!(psi_from_partner(&psi, &w_tanh(g, 1.0), -5.0, -4.0, SCHEME).is_err());
        let mask = Mask::none(g.len());
        assert!(superpotential_from_pair(&psi, &psi, -4.0, -4.0, &mask, SCHEME).is_err());
    }

    #[test]
    fn round_trip_through_partner() {
        let g = Grid1D::standard();
        for eta in [0.5, 1.0, 2.0] {
            let psi = Field::from_real_fn(g, |x| eta * sech(eta * x));
            let w = w_tanh(g, eta);
            let (e_n, e0) = (-eta * eta, -4.0 * eta * eta);
            let phi = partner_from_psi(&psi, &w, e_n, e0, SCHEME).unwrap();
            let back = psi_from_partner(&phi, &w, e_n, e0, SCHEME).unwrap();
            assert!((&back - &psi).max_abs() <= 1e-6, "eta {eta}");
        }
    }

    #[test]
    fn pair_recovers_superpotential() {
        let g = Grid1D::standard();
        let psi = Field::from_real_fn(g, sech);
        let phi = Field::from_real_fn(g, |x| 3f64.sqrt() * sech(x) * x.tanh());
        let (mask, _) = mask_near_zeros_relative(&phi, 1e-3).unwrap();
        let w = superpotential_from_pair(&psi, &phi, -1.0, -4.0, &mask, SCHEME).unwrap();
        assert_eq!(w.provenance, Provenance::PairDerived);
        let err = &w.w - &Field::from_real_fn(g, |x| 2.0 * x.tanh());
        let (linf, _) = norms(&err, &mask).unwrap();
        assert!(linf <= 1e-6, "{linf}");
    }

    #[test]
    fn unmasked_zero_is_singular() {
        let g = Grid1D::new(-10.0, 10.0, 1025).unwrap();
        let psi = Field::from_real_fn(g, sech);
        let phi = Field::from_real_fn(g, |x| 3f64.sqrt() * sech(x) * x.tanh());
        let err = superpotential_from_pair(&psi, &phi, -1.0, -4.0, &Mask::none(g.len()), SCHEME).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }), "{err:?}");
    }

    fn catalog_pair(g: Grid1D, eta: f64) -> SusyPair {
        let psi = Field::from_real_fn(g, |x| eta * sech(eta * x));
        SusyPair::from_psi(psi, w_tanh(g, eta), -eta * eta, NonlinearitySpec::kerr(2.0), SCHEME).unwrap()
    }

    #[test]
    fn factorization_holds_and_detects_perturbation() {
        let g = Grid1D::standard();
        let pair = catalog_pair(g, 1.0);
        assert!(factorization_check(&pair, SCHEME).unwrap().linf <= 1e-6);

        let mut bent = pair.clone();
        bent.w.w = bent.w.w.map(|z| z + 0.1);
        assert!(factorization_check(&bent, SCHEME).unwrap().linf >= 0.01);

        let mut empty = pair;
        empty.psi = Field::zeros(g);
        assert_eq!(factorization_check(&empty, SCHEME).unwrap().linf, 0.0);
    }

    #[test]
    fn both_orderings_scale_by_delta_e() {
        let g = Grid1D::standard();
        for eta in [0.5, 1.0, 2.0] {
            let pair = catalog_pair(g, eta);
            let aad = apply_a(&pair.w, &apply_a_dagger(&pair.w, &pair.psi, SCHEME).unwrap(), SCHEME).unwrap();
            assert!((&aad - &pair.psi.scale_real(pair.delta_e)).max_abs() <= 1e-6);
            let ada = apply_a_dagger(&pair.w, &apply_a(&pair.w, &pair.phi, SCHEME).unwrap(), SCHEME).unwrap();
            let (mask, _) = mask_near_zeros_relative(&pair.phi, 1e-3).unwrap();
            let (linf, _) = norms(&(&ada - &pair.phi.scale_real(pair.delta_e)), &mask).unwrap();
            // three nested derivatives lose a few digits at the box edge
            assert!(linf <= 1e-5, "eta {eta}: {linf}");
        }
    }

    #[test]
    fn vacuum_states() {
        // odd point count puts the peak on the grid
        let g = Grid1D::new(-10.0, 10.0, 1025).unwrap();
        let v = vacuum_state_from_w(&w_tanh(g, 1.0), SCHEME).unwrap();
        assert!(close(&v, |x| sech(x).powi(2)) < 1e-9);
        assert!(apply_a(&w_tanh(g, 1.0), &v, SCHEME).unwrap().max_abs() <= 1e-8);

        let v2 = vacuum_state_from_w(&w_tanh(g, 2.0), SCHEME).unwrap();
        assert!(close(&v2, |x| sech(2.0 * x).powi(2)) < 1e-9);

        let flat = vacuum_state_from_w(&Superpotential::analytic(Field::zeros(g), 0.0), SCHEME).unwrap();
        assert!(close(&flat, |_| 1.0) < 1e-14);

        // growing W: exp(-∫W) would overflow without the peak normalisation
        let steep = Superpotential::analytic(Field::from_real_fn(g, |x| -80.0 * x.tanh()), 0.0);
        let v = vacuum_state_from_w(&steep, DerivativeScheme::central2()).unwrap();
        assert!(v.is_finite());
        assert!((v.max_abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partner_hamiltonian_has_vacuum_at_e0() {
        let g = Grid1D::standard();
        let w = w_tanh(g, 1.0);
        let h1 = PotentialField::partner(&w, SCHEME).unwrap();
        assert_eq!(h1.role, PotentialRole::V1Effective);
        let phi0 = Field::from_real_fn(g, |x| sech(x).powi(2));
        let r = h1.hamiltonian(&phi0, SCHEME).unwrap();
        assert!((&r - &phi0.scale_real(-4.0)).max_abs() <= 1e-6);
    }

    #[test]
    fn nlse_potential_reproduces_eigenvalue() {
        let g = Grid1D::standard();
        let psi = Field::from_real_fn(g, sech);
        let h2 = PotentialField::nlse(&psi, &NonlinearitySpec::kerr(2.0));
        let r = h2.hamiltonian(&psi, SCHEME).unwrap();
        assert!((&r - &psi.scale_real(-1.0)).max_abs() <= 1e-8);
    }
}
