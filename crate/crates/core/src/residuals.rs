//! Pointwise residuals of the stationary equations: the NLSE, the partner
//! equation in `φ` (several algebraic forms) and its `u = 1/φ` version.

use num_complex::Complex64;

use crate::diff::{local_derivative, DerivativeScheme};
use crate::error::{Error, Result};
use crate::grid::{mask_near_zeros_relative, Field, Mask, ResidualReport};
use crate::riccati::NonlinearitySpec;
use crate::susy::SusyPair;

/// Derivative scheme and relative mask threshold shared by the evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualOptions {
    pub scheme: DerivativeScheme,
    /// Points with `|φ| <= mask_rel * max|φ|` are excluded.
    pub mask_rel: f64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self { scheme: DerivativeScheme::spectral(), mask_rel: 1e-3 }
    }
}

/// Algebraic form of the partner equation in `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartnerForm {
    /// `φ'' - 2φ'²/φ - κ|ψ|²φ + 2√ΔE (ψφ'/φ - ψ') = Eₙ φ` (Kerr only).
    Quotient,
    /// The quotient form with a general `N(ψ)` in place of `κ|ψ|²`.
    General,
    /// `φ'' - 8((√φ)')² - N φ - 2√ΔE φ (ψ/φ)' = Eₙ φ`.
    SqrtGradient,
    /// As above without the factor `φ` on the last term. Not equivalent to
    /// the other forms; kept to quantify the difference.
    SqrtGradientUnscaled,
}

impl PartnerForm {
    pub const ALL: [PartnerForm; 4] = [
        PartnerForm::Quotient,
        PartnerForm::General,
        PartnerForm::SqrtGradient,
        PartnerForm::SqrtGradientUnscaled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PartnerForm::Quotient => "partner-quotient",
            PartnerForm::General => "partner-general",
            PartnerForm::SqrtGradient => "partner-sqrt-gradient",
            PartnerForm::SqrtGradientUnscaled => "partner-sqrt-gradient-unscaled",
        }
    }
}

/// Residual of `-ψ'' - N(ψ)ψ - Eₙψ`.
pub fn nlse_residual(
    psi: &Field,
    e_n: f64,
    nspec: &NonlinearitySpec,
    scheme: DerivativeScheme,
) -> Result<ResidualReport> {
    psi.ensure_finite()?;
    let d2 = scheme.d2(psi)?;
    let nv = nspec.evaluate(psi);
    let mut r = Vec::with_capacity(psi.len());
    for i in 0..psi.len() {
        let p = psi.values()[i];
        r.push(-d2.values()[i] - nv.values()[i] * p - p * e_n);
    }
    ResidualReport::unmasked(Field::new(*psi.grid(), r)?)
}

#[allow(clippy::too_many_arguments)]
fn partner_field(
    psi: &Field,
    phi: &Field,
    e_n: f64,
    delta_e: f64,
    nv: &Field,
    form: PartnerForm,
    mask: &Mask,
    scheme: DerivativeScheme,
) -> Result<Field> {
    let grid = *phi.grid();
    let dphi = scheme.d1(phi)?;
    let d2phi = scheme.d2(phi)?;
    let dpsi = scheme.d1(psi)?;
    let s = delta_e.sqrt();
    let mut r = Vec::with_capacity(phi.len());
    for i in 0..phi.len() {
        if mask.is_masked(i) {
            r.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let (p, dp, d2p) = (phi.values()[i], dphi.values()[i], d2phi.values()[i]);
        let (q, dq) = (psi.values()[i], dpsi.values()[i]);
        if p.norm() == 0.0 {
            return Err(Error::Singular { x: grid.x(i), magnitude: 0.0 });
        }
        let base = d2p - nv.values()[i] * p - p * e_n;
        let value = match form {
            PartnerForm::Quotient | PartnerForm::General => {
                base - dp * dp * 2.0 / p + (q * dp / p - dq) * (2.0 * s)
            }
            PartnerForm::SqrtGradient | PartnerForm::SqrtGradientUnscaled => {
                // 8((√φ)')² = 2φ'²/φ, and (ψ/φ)' by the quotient rule; both
                // avoid a branch choice for √φ on complex fields
                let sqrt_grad = dp * dp * 2.0 / p;
                let ratio_grad = (dq * p - q * dp) / (p * p);
                let scale = if form == PartnerForm::SqrtGradient { p } else { Complex64::new(1.0, 0.0) };
                base - sqrt_grad - ratio_grad * scale * (2.0 * s)
            }
        };
        r.push(value);
    }
    Field::new(grid, r)
}

/// Residual of the partner equation in the requested form, masked near the
/// zeros of `φ`.
pub fn partner_residual_phi(
    pair: &SusyPair,
    form: PartnerForm,
    opts: ResidualOptions,
) -> Result<ResidualReport> {
    if form == PartnerForm::Quotient && pair.nspec.kappa().is_none() {
        return Err(Error::Input(format!(
            "the quotient form needs a Kerr nonlinearity, got `{}`",
            pair.nspec.name()
        )));
    }
    let (mask, threshold) = mask_near_zeros_relative(&pair.phi, opts.mask_rel)?;
    let nv = pair.nspec.evaluate(&pair.psi);
    let r = partner_field(&pair.psi, &pair.phi, pair.e_n, pair.delta_e, &nv, form, &mask, opts.scheme)?;
    ResidualReport::new(r, mask, threshold)
}

/// Reciprocal on unmasked points. Masked points hold the reciprocal where
/// it exists and NaN at exact zeros.
pub fn invert_field(f: &Field, mask: &Mask) -> Result<Field> {
    if mask.len() != f.len() {
        return Err(Error::Input("mask length differs from field length".into()));
    }
    let grid = *f.grid();
    let mut out = Vec::with_capacity(f.len());
    for (i, z) in f.values().iter().enumerate() {
        if z.norm() == 0.0 || !z.is_finite() {
            if !mask.is_masked(i) {
                return Err(Error::Singular { x: grid.x(i), magnitude: z.norm() });
            }
            out.push(Complex64::new(f64::NAN, f64::NAN));
        } else {
            out.push(z.inv());
        }
    }
    Field::new(grid, out)
}

/// `φ = 1/u` with poles of `u` (non-finite samples) mapped to zero.
fn reciprocal_through_poles(u: &Field) -> Result<Field> {
    let mut out = Vec::with_capacity(u.len());
    for z in u.values() {
        if !z.is_finite() {
            out.push(Complex64::new(0.0, 0.0));
        } else if z.norm() == 0.0 {
            return Err(Error::Input("u vanishes on the grid; 1/u is unbounded".into()));
        } else {
            out.push(z.inv());
        }
    }
    Field::new(*u.grid(), out)
}

/// Below this fraction of its peak, a decaying tail of `φ` is differentiated
/// through `u` directly.
const TAIL_LEVEL: f64 = 0.1;

/// Points in the leading and trailing runs over which `|f|` decreases
/// monotonically towards the box edge, restricted to `|f| < TAIL_LEVEL·max|f|`.
fn decaying_tails(f: &Field) -> Vec<bool> {
    let a: Vec<f64> = f.values().iter().map(|z| z.norm()).collect();
    let n = a.len();
    let mut tail = vec![false; n];
    let mut i = 0;
    while i < n {
        tail[i] = true;
        if i + 1 == n || a[i + 1] <= a[i] {
            break;
        }
        i += 1;
    }
    let mut i = n - 1;
    loop {
        tail[i] = true;
        if i == 0 || a[i - 1] <= a[i] {
            break;
        }
        i -= 1;
    }
    let level = TAIL_LEVEL * f.max_abs();
    for (t, v) in tail.iter_mut().zip(&a) {
        *t &= *v < level;
    }
    tail
}

/// Residual of `-u'' - N(ψ)u - 2√ΔE (u'uψ + ψ'u²) - Eₙ u`.
///
/// Near poles of `u` the derivatives are taken through `φ = 1/u`
/// (`u' = -φ'/φ²`, `u'' = (2φ'² - φφ'')/φ³`). In the decaying tails of `φ`
/// that route multiplies absolute errors of `φ''` by `u²`, so there `u` is
/// differentiated directly with a local stencil, whose error is relative to
/// `u`. Non-finite samples of `u` are treated as poles and masked.
pub fn partner_residual_u(
    u: &Field,
    psi: &Field,
    e_n: f64,
    e0: f64,
    nspec: &NonlinearitySpec,
    opts: ResidualOptions,
) -> Result<ResidualReport> {
    let phi = reciprocal_through_poles(u)?;
    u_residual(u, &phi, psi, e_n, e0, nspec, opts, true)
}

/// The `u` residual given `φ = 1/u` (zero at poles of `u`); `hybrid_tails`
/// selects direct stencils on `u` in the decaying tails, otherwise every
/// derivative goes through `φ`.
#[allow(clippy::too_many_arguments)]
fn u_residual(
    u: &Field,
    phi: &Field,
    psi: &Field,
    e_n: f64,
    e0: f64,
    nspec: &NonlinearitySpec,
    opts: ResidualOptions,
    hybrid_tails: bool,
) -> Result<ResidualReport> {
    u.ensure_same_grid(psi)?;
    if e_n <= e0 {
        return Err(Error::BrokenSusy { e_n, e0 });
    }
    if psi.is_identically_zero() {
        return Err(Error::Contract(
            "psi vanishes identically; the superpotential would not depend on the eigenfunction".into(),
        ));
    }
    psi.ensure_finite()?;
    let (mask, threshold) = mask_near_zeros_relative(phi, opts.mask_rel)?;
    let dphi = opts.scheme.d1(phi)?;
    let d2phi = opts.scheme.d2(phi)?;
    let dpsi = opts.scheme.d1(psi)?;
    let nv = nspec.evaluate(psi);
    let s = (e_n - e0).sqrt();
    let tails = if hybrid_tails { decaying_tails(phi) } else { vec![false; phi.len()] };
    let (h, accuracy) = (u.grid().h(), opts.scheme.local_accuracy());
    let mut r = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        if mask.is_masked(i) {
            r.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let (p, dp, d2p) = (phi.values()[i], dphi.values()[i], d2phi.values()[i]);
        let uv = p.inv();
        let direct = if tails[i] {
            local_derivative(u.values(), h, i, 1, accuracy).zip(local_derivative(u.values(), h, i, 2, accuracy))
        } else {
            None
        };
        let (du, d2u) = direct.unwrap_or_else(|| (-dp * uv * uv, (dp * dp * 2.0 - p * d2p) * uv * uv * uv));
        let (q, dq) = (psi.values()[i], dpsi.values()[i]);
        r.push(-d2u - nv.values()[i] * uv - (du * uv * q + dq * uv * uv) * (2.0 * s) - uv * e_n);
    }
    ResidualReport::new(Field::new(*u.grid(), r)?, mask, threshold)
}

/// Pointwise defect of the substitution identity `R_u(1/φ) = R_φ(φ) / φ²`
/// between the `u` residual and the general-form residual, multiplied
/// through by `φ²` so it is measured on the scale of the `φ` equation.
/// Holds for any `ψ`, `φ`, on or off shell. Both sides see the same `φ'`,
/// `φ''` (chain rule for `u`), so the defect tests the algebra of the two
/// forms rather than two differentiation routes.
pub fn duality_defect(
    psi: &Field,
    phi: &Field,
    e_n: f64,
    e0: f64,
    nspec: &NonlinearitySpec,
    opts: ResidualOptions,
) -> Result<ResidualReport> {
    psi.ensure_same_grid(phi)?;
    phi.ensure_finite()?;
    if e_n <= e0 {
        return Err(Error::BrokenSusy { e_n, e0 });
    }
    let (mask, threshold) = mask_near_zeros_relative(phi, opts.mask_rel)?;
    let nv = nspec.evaluate(psi);
    let r_phi = partner_field(psi, phi, e_n, e_n - e0, &nv, PartnerForm::General, &mask, opts.scheme)?;
    let u = invert_field(phi, &mask)?;
    // the same samples of φ on both sides: rebuilding φ as 1/u adds an
    // ulp of noise that the boundary-corrected d2 amplifies at the edges
    let r_u = u_residual(&u, phi, psi, e_n, e0, nspec, opts, false)?;
    let mut d = Vec::with_capacity(phi.len());
    for i in 0..phi.len() {
        if mask.is_masked(i) || r_u.mask.is_masked(i) {
            d.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let p = phi.values()[i];
        d.push(r_u.residual.values()[i] * p * p - r_phi.values()[i]);
    }
    ResidualReport::new(Field::new(*phi.grid(), d)?, mask.union(&r_u.mask), threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use crate::riccati::Superpotential;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn pair(g: Grid1D, eta: f64) -> SusyPair {
        let w = Superpotential::analytic(Field::from_real_fn(g, |x| 2.0 * eta * (eta * x).tanh()), -4.0 * eta * eta);
        SusyPair::new(
            Field::from_real_fn(g, |x| eta * sech(eta * x)),
            Field::from_real_fn(g, |x| 3f64.sqrt() * eta * sech(eta * x) * (eta * x).tanh()),
            w,
            -eta * eta,
            NonlinearitySpec::kerr(2.0),
        )
        .unwrap()
    }

    #[test]
    fn nlse_on_soliton() {
        let g = Grid1D::standard();
        let kerr = NonlinearitySpec::kerr(2.0);
        let s = DerivativeScheme::spectral();
        assert!(nlse_residual(&Field::from_real_fn(g, sech), -1.0, &kerr, s).unwrap().linf <= 1e-8);
        let scaled = Field::from_real_fn(g, |x| 2.0 * sech(2.0 * x));
        assert!(nlse_residual(&scaled, -4.0, &kerr, s).unwrap().linf <= 1e-8);
        assert_eq!(nlse_residual(&Field::zeros(g), 3.0, &kerr, s).unwrap().linf, 0.0);
        assert!(nlse_residual(&Field::from_real_fn(g, sech), -1.1, &kerr, s).unwrap().linf > 0.09);
    }

    #[test]
    fn partner_forms_on_catalog() {
        let g = Grid1D::standard();
        let opts = ResidualOptions::default();
        let p = pair(g, 1.0);
        for form in [PartnerForm::Quotient, PartnerForm::General, PartnerForm::SqrtGradient] {
            let rep = partner_residual_phi(&p, form, opts).unwrap();
            assert!(rep.linf <= 1e-6, "{form:?}: {}", rep.linf);
        }
        let printed = partner_residual_phi(&p, PartnerForm::SqrtGradientUnscaled, opts).unwrap();
        assert!(printed.linf >= 0.1);
        let q2 = pair(g, 2.0);
        assert!(partner_residual_phi(&q2, PartnerForm::General, opts).unwrap().linf <= 1e-6);
    }

    #[test]
    fn unscaled_form_matches_closed_form_difference() {
        // with s = sech x, t = tanh x the unscaled form leaves 2s²/t² - 2√3 s³/t
        let g = Grid1D::new(-10.0, 10.0, 1025).unwrap();
        let rep = partner_residual_phi(&pair(g, 1.0), PartnerForm::SqrtGradientUnscaled, ResidualOptions::default()).unwrap();
        let i = g.nearest_index(1.0);
        let x = g.x(i);
        let (s, t) = (sech(x), x.tanh());
        let expect = 2.0 * s * s / (t * t) - 2.0 * 3f64.sqrt() * s.powi(3) / t;
        assert!((rep.residual.values()[i].re - expect).abs() < 1e-8);
    }

    #[test]
    fn forms_agree_pointwise() {
        let g = Grid1D::standard();
        let opts = ResidualOptions::default();
        let mut p = pair(g, 1.0);
        // off shell, so the agreement is not just two zeros
        p.psi = p.psi.map(|z| z * 1.1);
        let a = partner_residual_phi(&p, PartnerForm::Quotient, opts).unwrap();
        let b = partner_residual_phi(&p, PartnerForm::SqrtGradient, opts).unwrap();
        let c = partner_residual_phi(&p, PartnerForm::General, opts).unwrap();
        assert!(a.linf > 1e-2);
        assert!((&a.residual - &b.residual).max_abs() <= 1e-10);
        assert!((&a.residual - &c.residual).max_abs() <= 1e-10);
    }

    #[test]
    fn quotient_form_requires_kerr() {
        let g = Grid1D::standard();
        let mut p = pair(g, 1.0);
        p.nspec = NonlinearitySpec::custom("cubic", |z| 2.0 * z.norm_sqr()).unwrap();
        assert!(matches!(partner_residual_phi(&p, PartnerForm::Quotient, ResidualOptions::default()), Err(Error::Input(_))));
        assert!(partner_residual_phi(&p, PartnerForm::General, ResidualOptions::default()).unwrap().linf <= 1e-6);
    }

    #[test]
    fn energy_shift_moves_residual_by_delta_phi() {
        let g = Grid1D::standard();
        let opts = ResidualOptions::default();
        let p = pair(g, 1.0);
        let base = partner_residual_phi(&p, PartnerForm::Quotient, opts).unwrap();
        for delta in [1e-3, 1e-2] {
            let mut q = p.clone();
            q.e_n += delta;
            let shifted = partner_residual_phi(&q, PartnerForm::Quotient, opts).unwrap();
            for i in 0..g.len() {
                if base.mask.is_masked(i) {
                    continue;
                }
                let change = shifted.residual.values()[i] - base.residual.values()[i];
                let expect = -delta * p.phi.values()[i];
                assert!((change - expect).norm() < 1e-12, "{i}");
            }
        }
    }

    #[test]
    fn degenerate_pair_is_fully_masked() {
        let g = Grid1D::standard();
        let mut p = pair(g, 1.0);
        p.phi = Field::zeros(g);
        p.psi = Field::zeros(g);
        assert!(matches!(partner_residual_phi(&p, PartnerForm::Quotient, ResidualOptions::default()), Err(Error::FullyMasked(_))));
    }

    #[test]
    fn u_form_on_catalog() {
        let opts = ResidualOptions::default();
        for n in [1024, 1025] {
            let g = Grid1D::new(-10.0, 10.0, n).unwrap();
            let u = Field::from_real_fn(g, |x| x.cosh() / x.tanh() / 3f64.sqrt());
            let rep = partner_residual_u(&u, &Field::from_real_fn(g, sech), -1.0, -4.0, &NonlinearitySpec::kerr(2.0), opts).unwrap();
            assert!(rep.linf <= 1e-6, "{n}: {}", rep.linf);
            if n == 1025 {
                assert!(rep.mask.is_masked(512));
            }
        }
    }

    #[test]
    fn u_form_guards() {
        let g = Grid1D::standard();
        let u = Field::from_real_fn(g, |x| x.cosh());
        let kerr = NonlinearitySpec::kerr(2.0);
        let opts = ResidualOptions::default();
        assert!(matches!(partner_residual_u(&u, &Field::zeros(g), -1.0, -4.0, &kerr, opts), Err(Error::Contract(_))));
        let psi = Field::from_real_fn(g, sech);
        assert!(matches!(partner_residual_u(&u, &psi, -4.0, -1.0, &kerr, opts), Err(Error::BrokenSusy { .. })));
    }

    #[test]
    fn inversion() {
        let g = Grid1D::new(-10.0, 10.0, 1025).unwrap();
        let phi = Field::from_real_fn(g, |x| 3f64.sqrt() * sech(x) * x.tanh());
        let (mask, _) = mask_near_zeros_relative(&phi, 1e-3).unwrap();
        let u = invert_field(&phi, &mask).unwrap();
        for (i, x) in g.points().enumerate() {
            if !mask.is_masked(i) {
                let expect = x.cosh() / x.tanh() / 3f64.sqrt();
                assert!((u.values()[i].re / expect - 1.0).abs() < 1e-13);
            }
        }
        assert!(u.values()[512].re.is_nan());
        let back = invert_field(&u, &mask).unwrap();
        for i in 0..g.len() {
            if !mask.is_masked(i) {
                assert!((back.values()[i] - phi.values()[i]).norm() <= 1e-15 * phi.values()[i].norm().max(1.0));
            }
        }
        let one = Field::constant(g, Complex64::new(1.0, 0.0));
        assert_eq!(invert_field(&one, &Mask::none(g.len())).unwrap(), one);
        assert!(matches!(invert_field(&phi, &Mask::none(g.len())), Err(Error::Singular { .. })));
    }

    #[test]
    fn duality_on_and_off_shell() {
        let g = Grid1D::standard();
        let kerr = NonlinearitySpec::kerr(2.0);
        let opts = ResidualOptions::default();
        for eta in [0.5, 1.0, 2.0] {
            let p = pair(g, eta);
            let rep = duality_defect(&p.psi, &p.phi, p.e_n, p.e0, &kerr, opts).unwrap();
            assert!(rep.linf <= 1e-8, "eta {eta}: {}", rep.linf);
        }
        let psi = Field::from_fn(g, |x| Complex64::new(sech(x), 0.3 * sech(2.0 * x)));
        let phi = Field::from_fn(g, |x| Complex64::new(1.0 + 0.5 * x.sin(), 0.2 * x.cos()) * sech(0.5 * x));
        let rep = duality_defect(&psi, &phi, -0.7, -3.0, &kerr, opts).unwrap();
        assert!(rep.linf <= 1e-8, "{}", rep.linf);
    }
}
