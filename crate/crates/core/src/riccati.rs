//! The eigenstate-dependent Riccati equation `W² + W' = -N(ψ) - E₀`.
//!
//! Two independent solvers are provided. [`RiccatiSolver::linearized`]
//! substitutes `W = v'/v` and integrates the linear equation
//! `v'' + (N + E₀) v = 0`; [`RiccatiSolver::shooting`] integrates the
//! Riccati equation directly and bisects on `W(0)`. Both start at `x = 0`
//! and integrate outward, which is the stable direction for the bounded
//! solution.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::diff::DerivativeScheme;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D, ResidualReport};
use crate::ode::{integrate, Halt, StepControl, UniformInterpolant};

/// Pointwise nonlinear operator `N(ψ)` of `-ψ'' - N(ψ) ψ = E ψ`.
#[derive(Clone)]
pub enum NonlinearitySpec {
    /// `N(ψ) = κ |ψ|²`.
    Kerr { kappa: f64 },
    Custom(CustomNonlinearity),
}

#[derive(Clone)]
pub struct CustomNonlinearity {
    name: String,
    eval: Arc<dyn Fn(Complex64) -> f64 + Send + Sync>,
}

impl NonlinearitySpec {
    pub fn kerr(kappa: f64) -> Self {
        Self::Kerr { kappa }
    }

    /// A user-defined pointwise nonlinearity. `N(0)` must vanish.
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(Complex64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let n0 = eval(Complex64::new(0.0, 0.0));
        if n0 != 0.0 {
            return Err(Error::Input(format!("custom nonlinearity must satisfy N(0) = 0, got {n0}")));
        }
        Ok(Self::Custom(CustomNonlinearity {
            name: name.into(),
            eval: Arc::new(eval),
        }))
    }

    pub fn kappa(&self) -> Option<f64> {
        match self {
            Self::Kerr { kappa } => Some(*kappa),
            Self::Custom(_) => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Kerr { .. } => "kerr",
            Self::Custom(c) => &c.name,
        }
    }

    #[inline]
    pub fn value(&self, psi: Complex64) -> f64 {
        match self {
            Self::Kerr { kappa } => kappa * psi.norm_sqr(),
            Self::Custom(c) => (c.eval)(psi),
        }
    }

    /// Samples `N(ψ)` as a (real-valued) field.
    pub fn evaluate(&self, psi: &Field) -> Field {
        psi.map(|z| Complex64::new(self.value(z), 0.0))
    }
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kerr { kappa } => f.debug_struct("Kerr").field("kappa", kappa).finish(),
            Self::Custom(c) => f.debug_tuple("Custom").field(&c.name).finish(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    RiccatiLinearized,
    RiccatiShooting,
    /// Recovered from an eigenfunction pair, `W = (√ΔE ψ - φ') / φ`.
    PairDerived,
    Analytic,
}

/// Sampled superpotential `W(x)` paired with its factorization energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Superpotential {
    pub w: Field,
    pub provenance: Provenance,
    pub e0: f64,
    /// `W(0)` of the returned trajectory, when a solver produced it.
    pub w0: Option<f64>,
    /// The bounded solution is not unique; a representative was chosen.
    pub non_unique: bool,
}

impl Superpotential {
    pub fn analytic(w: Field, e0: f64) -> Self {
        Self {
            w,
            provenance: Provenance::Analytic,
            e0,
            w0: None,
            non_unique: false,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        self.w.grid()
    }
}

/// Settings shared by both Riccati solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiSolver {
    pub control: StepControl,
    /// `|W|` beyond which a shooting trajectory counts as blown up.
    pub blowup_cap: f64,
    /// Bisection stops once the `W(0)` bracket is narrower than this.
    pub bisection_tol: f64,
    /// Points used to interpolate `N` between grid nodes.
    pub interpolation_width: usize,
}

impl Default for RiccatiSolver {
    fn default() -> Self {
        Self {
            control: StepControl::default(),
            blowup_cap: 1e6,
            bisection_tol: 1e-12,
            interpolation_width: 8,
        }
    }
}

/// Grid targets on each side of the origin, ordered outward.
struct Sides {
    right: Vec<(usize, f64)>,
    left: Vec<(usize, f64)>,
    origin: Option<usize>,
}

fn sides(grid: &Grid1D) -> Result<Sides> {
    if !grid.contains(0.0) {
        return Err(Error::Input(format!(
            "Riccati integration starts at x = 0, outside [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let mut s = Sides { right: Vec::new(), left: Vec::new(), origin: None };
    for (i, x) in grid.points().enumerate() {
        if x > 0.0 {
            s.right.push((i, x));
        } else if x < 0.0 {
            s.left.push((i, x));
        } else {
            s.origin = Some(i);
        }
    }
    s.left.reverse();
    Ok(s)
}

fn real_interpolant(n_field: &Field, width: usize) -> Result<UniformInterpolant> {
    n_field.ensure_finite()?;
    let peak = n_field.max_abs().max(1.0);
    if n_field.values().iter().any(|z| z.im.abs() > 1e-12 * peak) {
        return Err(Error::Input("N(ψ) samples must be real".into()));
    }
    let g = n_field.grid();
    Ok(UniformInterpolant::new(
        g.x_min(),
        g.h(),
        n_field.values().iter().map(|z| z.re).collect(),
        width,
    ))
}

impl RiccatiSolver {
    /// Solves via `W = v'/v`, `v'' + (N + E₀) v = 0`, `v(0) = 1`, `v'(0) = w0`.
    pub fn linearized(&self, n_field: &Field, e0: f64, w0: f64) -> Result<Superpotential> {
        let grid = *n_field.grid();
        let nl = real_interpolant(n_field, self.interpolation_width)?;
        let sides = sides(&grid)?;
        let mut w = vec![Complex64::new(0.0, 0.0); grid.len()];
        if let Some(i) = sides.origin {
            w[i] = Complex64::new(w0, 0.0);
        }
        for half in [&sides.right, &sides.left] {
            let targets: Vec<f64> = half.iter().map(|&(_, x)| x).collect();
            let (ys, halt) = integrate(
                |x, y: &[f64; 2]| [y[1], -(nl.eval(x) + e0) * y[0]],
                0.0,
                [1.0, w0],
                &targets,
                self.control,
                |_, y| y[0] > 0.0,
            )?;
            if let Some(Halt::Observer { x }) = halt {
                return Err(Error::Nodeful { x });
            }
            for (&(i, _), y) in half.iter().zip(&ys) {
                w[i] = Complex64::new(y[1] / y[0], 0.0);
            }
        }
        Ok(Superpotential {
            w: Field::new(grid, w)?,
            provenance: Provenance::RiccatiLinearized,
            e0,
            w0: Some(w0),
            non_unique: false,
        })
    }

    /// Integrates `W' = -N - E₀ - W²` outward from `W(0) = w0`; `None` if
    /// the trajectory exceeds the blow-up cap on this side.
    fn half_trajectory(
        &self,
        nl: &UniformInterpolant,
        e0: f64,
        w0: f64,
        targets: &[f64],
    ) -> Result<Option<Vec<f64>>> {
        let cap = self.blowup_cap;
        let (ys, halt) = integrate(
            |x, y: &[f64; 1]| [-nl.eval(x) - e0 - y[0] * y[0]],
            0.0,
            [w0],
            targets,
            self.control,
            |_, y| y[0].abs() < cap,
        )?;
        Ok(match halt {
            Some(_) => None,
            None => Some(ys.into_iter().map(|y| y[0]).collect()),
        })
    }

    /// Shooting on `W(0)` within `bracket`.
    ///
    /// Going right, low `W(0)` blows up towards `-∞`; going left, high
    /// `W(0)` blows up towards `+∞`. Both properties are monotone in `W(0)`,
    /// so each edge of the bounded window is found by bisection. With both
    /// edges inside the bracket the window's midpoint is returned (flagged
    /// non-unique when the window has positive width); with one edge the
    /// bounded side of that edge is returned; with no edge (both endpoints
    /// bounded) the bracket midpoint is returned, flagged non-unique.
    pub fn shooting(&self, n_field: &Field, e0: f64, bracket: [f64; 2]) -> Result<Superpotential> {
        let [lo, hi] = bracket;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Bracket(format!("need finite lo < hi, got [{lo}, {hi}]")));
        }
        let grid = *n_field.grid();
        let nl = real_interpolant(n_field, self.interpolation_width)?;
        let sides = sides(&grid)?;
        let right: Vec<f64> = sides.right.iter().map(|&(_, x)| x).collect();
        let left: Vec<f64> = sides.left.iter().map(|&(_, x)| x).collect();

        let blows_right = |w0: f64| -> Result<bool> { Ok(self.half_trajectory(&nl, e0, w0, &right)?.is_none()) };
        let blows_left = |w0: f64| -> Result<bool> { Ok(self.half_trajectory(&nl, e0, w0, &left)?.is_none()) };

        let (r_lo, r_hi) = (blows_right(lo)?, blows_right(hi)?);
        let (l_lo, l_hi) = (blows_left(lo)?, blows_left(hi)?);
        if r_lo && r_hi {
            return Err(Error::Bracket(format!("both ends of [{lo}, {hi}] blow up towards -inf")));
        }
        if l_lo && l_hi {
            return Err(Error::Bracket(format!("both ends of [{lo}, {hi}] blow up towards +inf")));
        }

        // Returns the last w0 for which `pred` is false, approaching from `a`
        // (pred false) against `b` (pred true).
        let bisect = |pred: &dyn Fn(f64) -> Result<bool>, mut good: f64, mut bad: f64| -> Result<f64> {
            while (bad - good).abs() > self.bisection_tol {
                let mid = 0.5 * (good + bad);
                if mid == good || mid == bad {
                    break;
                }
                if pred(mid)? {
                    bad = mid;
                } else {
                    good = mid;
                }
            }
            Ok(good)
        };

        let lower_edge = if r_lo { Some(bisect(&blows_right, hi, lo)?) } else { None };
        let upper_edge = if l_hi { Some(bisect(&blows_left, lo, hi)?) } else { None };

        let (w0, non_unique) = match (lower_edge, upper_edge) {
            (Some(a), Some(b)) => {
                if a > b {
                    return Err(Error::Unbounded(format!(
                        "bounded window is empty (right edge {a:.6} > left edge {b:.6})"
                    )));
                }
                (0.5 * (a + b), b - a > 1e3 * self.bisection_tol)
            }
            (Some(a), None) => (a, false),
            (None, Some(b)) => (b, false),
            (None, None) => (0.5 * (lo + hi), true),
        };

        let mut w = vec![Complex64::new(0.0, 0.0); grid.len()];
        if let Some(i) = sides.origin {
            w[i] = Complex64::new(w0, 0.0);
        }
        for (half, targets) in [(&sides.right, &right), (&sides.left, &left)] {
            let values = self.half_trajectory(&nl, e0, w0, targets)?.ok_or_else(|| {
                Error::Unbounded(format!("trajectory from W(0) = {w0} blows up"))
            })?;
            for (&(i, _), v) in half.iter().zip(values) {
                w[i] = Complex64::new(v, 0.0);
            }
        }
        Ok(Superpotential {
            w: Field::new(grid, w)?,
            provenance: Provenance::RiccatiShooting,
            e0,
            w0: Some(w0),
            non_unique,
        })
    }
}

/// [`RiccatiSolver::linearized`] with default settings.
pub fn solve_riccati_linearized(n_field: &Field, e0: f64, w0: f64) -> Result<Superpotential> {
    RiccatiSolver::default().linearized(n_field, e0, w0)
}

/// [`RiccatiSolver::shooting`] with default settings.
pub fn solve_riccati_shooting(n_field: &Field, e0: f64, bracket: [f64; 2]) -> Result<Superpotential> {
    RiccatiSolver::default().shooting(n_field, e0, bracket)
}

/// Pointwise `W² + W' + N + E₀`.
pub fn riccati_residual(
    w: &Superpotential,
    n_field: &Field,
    e0: f64,
    scheme: DerivativeScheme,
) -> Result<ResidualReport> {
    w.w.ensure_same_grid(n_field)?;
    let dw = scheme.d1(&w.w)?;
    let r = Field::new(
        *w.grid(),
        w.w.values()
            .iter()
            .zip(dw.values())
            .zip(n_field.values())
            .map(|((&wv, &d), &n)| wv * wv + d + n + e0)
            .collect(),
    )?;
    ResidualReport::unmasked(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn kerr_sech(grid: Grid1D, eta: f64) -> Field {
        let psi = Field::from_real_fn(grid, |x| eta * sech(eta * x));
        NonlinearitySpec::kerr(2.0).evaluate(&psi)
    }

    fn err_vs(w: &Superpotential, exact: impl Fn(f64) -> f64) -> f64 {
        (&w.w - &Field::from_real_fn(*w.grid(), exact)).max_abs()
    }

    #[test]
    fn kerr_matches_modulus_squared() {
        let nl = NonlinearitySpec::kerr(2.0);
        assert_eq!(nl.value(Complex64::new(0.0, 0.0)), 0.0);
        assert!((nl.value(Complex64::new(0.6, 0.8)) - 2.0).abs() < 1e-15);
        assert!(NonlinearitySpec::custom("shifted", |z| z.norm() + 1.0).is_err());
        let sat = NonlinearitySpec::custom("saturable", |z| z.norm_sqr() / (1.0 + z.norm_sqr())).unwrap();
        assert!(sat.kappa().is_none());
        assert_eq!(sat.name(), "saturable");
    }

    #[test]
    fn linearized_reproduces_two_tanh() {
        let g = Grid1D::standard();
        let w = solve_riccati_linearized(&kerr_sech(g, 1.0), -4.0, 0.0).unwrap();
        let e = err_vs(&w, |x| 2.0 * x.tanh());
        assert!(e <= 1e-6, "err {e}");
    }

    #[test]
    fn linearized_free_constant_solution() {
        let g = Grid1D::standard();
        let w = solve_riccati_linearized(&Field::zeros(g), -1.0, 1.0).unwrap();
        assert!(err_vs(&w, |_| 1.0) < 1e-10);
        let r = riccati_residual(&w, &Field::zeros(g), -1.0, DerivativeScheme::spectral()).unwrap();
        assert!(r.linf < 1e-9, "{}", r.linf);
    }

    #[test]
    fn linearized_scaled_family() {
        let g = Grid1D::standard();
        let w = solve_riccati_linearized(&kerr_sech(g, 2.0), -16.0, 0.0).unwrap();
        let e = err_vs(&w, |x| 4.0 * (2.0 * x).tanh());
        assert!(e <= 1e-6, "err {e}");
    }

    #[test]
    fn linearized_detects_nodes() {
        let g = Grid1D::standard();
        // E0 = -0.5 lies above the single bound level E = -1 of the well
        let err = solve_riccati_linearized(&kerr_sech(g, 1.0), -0.5, 0.0).unwrap_err();
        assert!(matches!(err, Error::Nodeful { .. }), "{err:?}");
    }

    #[test]
    fn linearized_rejects_box_without_origin() {
        let g = Grid1D::new(1.0, 5.0, 64).unwrap();
        assert!(solve_riccati_linearized(&Field::zeros(g), -1.0, 0.0).is_err());
    }

    #[test]
    fn shooting_reproduces_two_tanh() {
        let g = Grid1D::standard();
        let w = solve_riccati_shooting(&kerr_sech(g, 1.0), -4.0, [-1.0, 1.0]).unwrap();
        assert!(w.non_unique);
        assert_eq!(w.w0, Some(0.0));
        let e = err_vs(&w, |x| 2.0 * x.tanh());
        assert!(e <= 1e-4, "err {e}");
    }

    #[test]
    fn shooting_brackets_both_edges() {
        // bounded window for this problem is |W(0)| < 3/2
        let g = Grid1D::standard();
        let w = solve_riccati_shooting(&kerr_sech(g, 1.0), -4.0, [-2.0, 2.5]).unwrap();
        let w0 = w.w0.unwrap();
        assert!(w.non_unique);
        assert!(w0.abs() < 1e-3, "w0 {w0}");
    }

    #[test]
    fn shooting_finds_free_separatrix() {
        let g = Grid1D::standard();
        let w = solve_riccati_shooting(&Field::zeros(g), -1.0, [0.5, 1.5]).unwrap();
        // on [-10, 10] the edge is coth(10) = 1 + 4e-9, and the edge
        // trajectory coth(x + 10) only departs from 1 near the left wall
        assert!((w.w0.unwrap() - 1.0).abs() < 1e-8, "{:?}", w.w0);
        for (x, v) in g.points().zip(w.w.values()) {
            if x >= 0.0 {
                assert!((v.re - 1.0).abs() < 1e-6, "x {x}: {v}");
            }
        }
    }

    #[test]
    fn shooting_rejects_one_sided_bracket() {
        let g = Grid1D::standard();
        let err = solve_riccati_shooting(&kerr_sech(g, 1.0), -4.0, [2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::Bracket(_)), "{err:?}");
        assert!(solve_riccati_shooting(&kerr_sech(g, 1.0), -4.0, [1.0, -1.0]).is_err());
    }

    #[test]
    fn solvers_agree() {
        let g = Grid1D::standard();
        for eta in [0.5, 1.0, 2.0] {
            let n = kerr_sech(g, eta);
            let e0 = -4.0 * eta * eta;
            let a = solve_riccati_linearized(&n, e0, 0.0).unwrap();
            let b = solve_riccati_shooting(&n, e0, [-eta, eta]).unwrap();
            assert!((&a.w - &b.w).max_abs() <= 1e-4, "eta {eta}");
        }
    }

    #[test]
    fn analytic_residual_and_level_offset() {
        let g = Grid1D::standard();
        let n = kerr_sech(g, 1.0);
        let w = Superpotential::analytic(Field::from_real_fn(g, |x| 2.0 * x.tanh()), -4.0);
        let r = riccati_residual(&w, &n, -4.0, DerivativeScheme::spectral()).unwrap();
        assert!(r.linf <= 1e-8, "{}", r.linf);
        let wrong = riccati_residual(&w, &n, -3.0, DerivativeScheme::spectral()).unwrap();
        assert!((wrong.linf - 1.0).abs() < 1e-8);
        let zero = Superpotential::analytic(Field::zeros(g), 0.0);
        assert_eq!(riccati_residual(&zero, &Field::zeros(g), 0.0, DerivativeScheme::spectral()).unwrap().linf, 0.0);
    }

    #[test]
    fn plug_back_residuals() {
        let g = Grid1D::standard();
        let n = kerr_sech(g, 1.0);
        let lin = solve_riccati_linearized(&n, -4.0, 0.0).unwrap();
        let sh = solve_riccati_shooting(&n, -4.0, [-1.0, 1.0]).unwrap();
        let s = DerivativeScheme::spectral();
        assert!(riccati_residual(&lin, &n, -4.0, s).unwrap().linf <= 1e-6);
        assert!(riccati_residual(&sh, &n, -4.0, s).unwrap().linf <= 1e-4);
    }

    #[test]
    fn level_shift_is_a_constant_offset() {
        let g = Grid1D::standard();
        let n = kerr_sech(g, 1.0);
        let s = DerivativeScheme::spectral();
        let delta = 0.25;
        let a = solve_riccati_linearized(&n, -4.0, 0.0).unwrap();
        let b = solve_riccati_linearized(&n, -4.0 - delta, 0.0).unwrap();
        for w in [&a, &b] {
            let own = riccati_residual(w, &n, -4.0, s).unwrap().residual;
            let other = riccati_residual(w, &n, -4.0 - delta, s).unwrap().residual;
            let d = (&own - &other).map(|z| z - delta);
            assert!(d.max_abs() <= 1e-8);
        }
    }

    #[test]
    fn even_potential_gives_odd_superpotential() {
        let g = Grid1D::standard();
        let w = solve_riccati_linearized(&kerr_sech(g, 1.5), -7.0, 0.0).unwrap();
        let v = w.w.values();
        let n = v.len();
        for i in 0..n {
            assert!((v[i] + v[n - 1 - i]).norm() < 1e-9);
        }
    }
}
