//! The scale-free vacuum equation `i φ̇ - φ'' + 2φ'²/φ = 0`.
//!
//! With `u = 1/φ` it becomes `i u̇ = u''`, which is evolved by Crank–Nicolson
//! steps. The grid is extended past each edge by exponential continuation,
//! `u[-j] = ρ^j u[0]`, with the ratio `ρ` of the first two samples fixed at
//! `t = 0`; this is exact for separable `cosh`-type states.
//!
//! `u` typically spans many orders of magnitude (`cosh 2x` reaches 2e8 on
//! `[-10, 10]`), and the unitary step carries rounding made at the edges into
//! the centre undamped. So the exponential edge modes `A e^{κx}` fitted at
//! `t = 0`, which are eigenvectors of the discrete step, are advanced in
//! closed form and only the remainder is stepped. Forcing on the few rows
//! where a mode meets the far edge keeps the result identical to plain
//! Crank–Nicolson in exact arithmetic.

use num_complex::Complex64;

use crate::banded::{BandedLu, BandedMatrix};
use crate::diff::fornberg_weights;
use crate::error::{Error, Result};
use crate::grid::{mask_near_zeros_relative, norms, Field, ResidualReport};
use crate::residuals::ResidualOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    /// The linearizing variable `1/φ₀`.
    pub u: Field,
    pub t: f64,
    pub dt: f64,
    pub step_index: usize,
}

impl EvolutionState {
    /// State holding `u = 1/φ₀`.
    pub fn from_phi(phi0: &Field, t: f64, dt: f64, step_index: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Input(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { u: reciprocal(phi0)?, t, dt, step_index })
    }

    pub fn phi(&self) -> Field {
        self.u.map(|z| z.inv())
    }
}

fn reciprocal(f: &Field) -> Result<Field> {
    for (i, z) in f.values().iter().enumerate() {
        if z.norm() == 0.0 || !z.is_finite() {
            return Err(Error::Input(format!(
                "vacuum field must be finite and nonzero everywhere (x = {:.6})",
                f.grid().x(i)
            )));
        }
    }
    Ok(f.map(|z| z.inv()))
}

/// Crank–Nicolson evolution of `i u̇ = u''`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacuumEvolver {
    /// Order of the central stencil for `u''`.
    pub stencil_accuracy: usize,
    /// Evolution halts once `min|u|` drops below this fraction of its
    /// initial value (a zero of `u` is a blow-up of `φ₀`).
    pub halt_fraction: f64,
}

impl Default for VacuumEvolver {
    fn default() -> Self {
        Self { stencil_accuracy: 8, halt_fraction: 1e-8 }
    }
}

/// Relative size below which the remainder after the edge modes counts as
/// rounding of the sampled input. Sampling `e^{κx}` at rounded `x` alone
/// perturbs it by about `ε κ |x|`, tens of ε on a box of half-width 10.
const REMAINDER_ROUNDING: f64 = 256.0 * f64::EPSILON;

/// `A e^{κx}` decaying away from one edge, with its per-step factor.
struct EdgeMode {
    profile: Vec<Complex64>,
    factor: Complex64,
    /// Step-0 forcing on the rows where the far-edge continuation does not
    /// match the mode.
    forcing: Vec<(usize, Complex64)>,
}

struct Stepper {
    lhs: BandedLu,
    rhs: BandedMatrix,
    modes: Vec<EdgeMode>,
}

/// `ln ρ` for the continuation `u[-j] = ρ^j u[0]` of `v` past index 0.
/// The baseline `v[0]/v[m]` doubles while the estimate moves by no more
/// than its rounding, so neither the rounding of one ratio nor curvature
/// further in sets the decay rate.
fn edge_log_ratio(v: &[Complex64]) -> Option<Complex64> {
    let rho = v[0] / v[1];
    let base = rho.ln();
    if !base.is_finite() {
        return None;
    }
    // v[0]/v[m] = ρ^m up to a small factor whose log has no branch issue
    let estimate = |m: usize| base + ((v[0] / v[m]) / rho.powi(m as i32)).ln() / m as f64;
    let limit = v.len() / 4;
    let (mut m, mut best) = (1, base);
    while 2 * m <= limit {
        let next = estimate(2 * m);
        if !next.is_finite() || (next - best).norm() > 4.0 * f64::EPSILON / m as f64 {
            break;
        }
        m *= 2;
        best = next;
    }
    Some(best)
}

impl VacuumEvolver {
    fn stepper(&self, u0: &[Complex64], h: f64, dt: f64) -> Result<Stepper> {
        let n = u0.len();
        let r = self.stencil_accuracy / 2;
        if r == 0 || n < 2 * r + 2 {
            return Err(Error::Input("grid too small for the evolution stencil".into()));
        }
        let offsets: Vec<f64> = (0..=2 * r).map(|k| k as f64 - r as f64).collect();
        let mut w: Vec<f64> = fornberg_weights(0.0, &offsets, 2)[2].iter().map(|c| c / (h * h)).collect();
        // constants must see exactly zero curvature
        w[r] = -w.iter().enumerate().filter(|&(k, _)| k != r).map(|(_, c)| c).sum::<f64>();
        let reversed: Vec<Complex64> = u0.iter().rev().copied().collect();
        let (Some(log_left), Some(log_right)) = (edge_log_ratio(u0), edge_log_ratio(&reversed)) else {
            return Err(Error::Input("edge samples of u give no continuation ratio".into()));
        };
        // the continuation uses exactly the ratio of the edge modes
        let (rho_left, rho_right) = (log_left.exp(), log_right.exp());

        let mut d2 = BandedMatrix::zeros(n, r);
        for i in 0..n {
            for (k, &wk) in w.iter().enumerate() {
                let j = i as isize + k as isize - r as isize;
                let wk = Complex64::new(wk, 0.0);
                if j < 0 {
                    d2.add(i, 0, wk * rho_left.powi(-j as i32));
                } else if j as usize >= n {
                    d2.add(i, n - 1, wk * rho_right.powi((j as usize - (n - 1)) as i32));
                } else {
                    d2.add(i, j as usize, wk);
                }
            }
        }
        let tau = Complex64::new(0.0, 0.5 * dt);
        let mut lhs = BandedMatrix::zeros(n, r);
        let mut rhs = BandedMatrix::zeros(n, r);
        for i in 0..n {
            lhs.add(i, i, Complex64::new(1.0, 0.0));
            rhs.add(i, i, Complex64::new(1.0, 0.0));
            for j in i.saturating_sub(r)..=(i + r).min(n - 1) {
                let v = d2.get(i, j) * tau;
                lhs.add(i, j, v);
                rhs.add(i, j, -v);
            }
        }

        let mut modes = Vec::new();
        // left mode: u0[0] ρ_L^{-i}; right mode: u0[n-1] ρ_R^{-(n-1-i)}
        for (edge, log_rho, far_rows) in [(0usize, log_left, n - r..n), (n - 1, log_right, 0..r)] {
            if log_rho.re <= 0.0 {
                continue;
            }
            let profile: Vec<Complex64> =
                (0..n).map(|i| u0[edge] * (-log_rho * (i as f64 - edge as f64).abs()).exp()).collect();
            // eigenvalue of the interior stencil on e^{κx}, with e^{-κh} = ρ on the left
            let step = if edge == 0 { -log_rho } else { log_rho };
            let lambda: Complex64 =
                w.iter().enumerate().map(|(k, &wk)| wk * (step * (k as f64 - r as f64)).exp()).sum();
            let factor = (Complex64::new(1.0, 0.0) - tau * lambda) / (Complex64::new(1.0, 0.0) + tau * lambda);
            let forcing = far_rows
                .map(|i| {
                    let lo = i.saturating_sub(r);
                    let hi = (i + r).min(n - 1);
                    let dm: Complex64 = (lo..=hi).map(|j| d2.get(i, j) * profile[j]).sum();
                    (i, -tau * (factor + 1.0) * (dm - lambda * profile[i]))
                })
                .collect();
            modes.push(EdgeMode { profile, factor, forcing });
        }
        Ok(Stepper { lhs: lhs.factor()?, rhs, modes })
    }

    /// Evolves `φ₀` for `steps` steps of size `dt`; returns `steps + 1`
    /// states including the initial one.
    pub fn evolve(&self, phi0: &Field, dt: f64, steps: usize) -> Result<Vec<EvolutionState>> {
        let first = EvolutionState::from_phi(phi0, 0.0, dt, 0)?;
        let grid = *phi0.grid();
        let stepper = self.stepper(first.u.values(), grid.h(), dt)?;
        let floor = self.halt_fraction * min_abs(first.u.values());

        let mut rest: Vec<Complex64> = first.u.values().to_vec();
        for m in &stepper.modes {
            rest.iter_mut().zip(&m.profile).for_each(|(v, p)| *v -= p);
        }
        // a remainder at rounding level of u is noise in the input, and the
        // step would carry it from the large edge values into the centre
        for (v, u) in rest.iter_mut().zip(first.u.values()) {
            if v.norm() <= REMAINDER_ROUNDING * u.norm() {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        let mut states = Vec::with_capacity(steps + 1);
        states.push(first);
        for k in 1..=steps {
            let mut next = stepper.rhs.mul_vec(&rest);
            for m in &stepper.modes {
                let phase = m.factor.powu(k as u32 - 1);
                for &(i, f) in &m.forcing {
                    next[i] += f * phase;
                }
            }
            stepper.lhs.solve_in_place(&mut next);
            rest = next;

            let mut u = rest.clone();
            for m in &stepper.modes {
                let phase = m.factor.powu(k as u32);
                u.iter_mut().zip(&m.profile).for_each(|(v, p)| *v += p * phase);
            }
            let t = k as f64 * dt;
            if u.iter().any(|z| !z.is_finite()) {
                return Err(Error::EvolutionHalted { step: k, t, reason: "u became non-finite".into() });
            }
            let lowest = min_abs(&u);
            if lowest <= floor {
                return Err(Error::EvolutionHalted {
                    step: k,
                    t,
                    reason: format!("u approaches a zero (min |u| = {lowest:.3e}); the vacuum field blows up"),
                });
            }
            states.push(EvolutionState { u: Field::new(grid, u)?, t, dt, step_index: k });
        }
        Ok(states)
    }
}

fn min_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
}

pub fn evolve_vacuum(phi0: &Field, dt: f64, steps: usize) -> Result<Vec<EvolutionState>> {
    VacuumEvolver::default().evolve(phi0, dt, steps)
}

/// Largest change of `|φ₀|` from its initial profile along a trajectory.
pub fn modulus_drift(states: &[EvolutionState]) -> f64 {
    let Some(first) = states.first() else { return 0.0 };
    let start: Vec<f64> = first.phi().values().iter().map(|z| z.norm()).collect();
    states
        .iter()
        .flat_map(|s| {
            let phi = s.phi();
            let start = &start;
            (0..phi.len()).map(move |i| (phi.values()[i].norm() - start[i]).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

struct Level {
    phi: Field,
    phi_t: Field,
    dphi: Field,
    d2phi: Field,
}

/// Centred-in-time samples at every interior level of a trajectory.
fn interior_levels(states: &[EvolutionState], opts: ResidualOptions) -> Result<Vec<Level>> {
    if states.len() < 3 {
        return Err(Error::Input(format!("need at least 3 states, got {}", states.len())));
    }
    let grid = *states[0].u.grid();
    for s in states {
        s.u.ensure_same_grid(&states[0].u)?;
    }
    let phis: Vec<Field> = states.iter().map(|s| s.phi()).collect();
    let mut out = Vec::with_capacity(states.len() - 2);
    for n in 1..states.len() - 1 {
        let span = states[n + 1].t - states[n - 1].t;
        if !(span > 0.0) {
            return Err(Error::Input("state times must increase".into()));
        }
        let mid = states[n].t - states[n - 1].t;
        if ((mid / span) - 0.5).abs() > 1e-9 {
            return Err(Error::Input("centred time differences need uniform time steps".into()));
        }
        let phi = phis[n].clone();
        phi.ensure_finite()?;
        let phi_t = phis[n + 1].zip_map(&phis[n - 1], |a, b| (a - b) / span);
        let dphi = opts.scheme.d1(&phi)?;
        let d2phi = opts.scheme.d2(&phi)?;
        debug_assert_eq!(*phi.grid(), grid);
        out.push(Level { phi, phi_t, dphi, d2phi });
    }
    Ok(out)
}

/// Collapses per-level reports into one: the worst level's field and L∞, and
/// the space-time L2 norm over all levels.
fn combine(reports: Vec<ResidualReport>, dt: f64) -> Result<ResidualReport> {
    let l2 = (reports.iter().map(|r| r.l2 * r.l2).sum::<f64>() * dt).sqrt();
    let mut worst = reports
        .into_iter()
        .max_by(|a, b| a.linf.total_cmp(&b.linf))
        .ok_or_else(|| Error::Input("empty trajectory".into()))?;
    worst.l2 = l2;
    Ok(worst)
}

fn vacuum_field(level: &Level) -> Field {
    let v: Vec<Complex64> = (0..level.phi.len())
        .map(|i| {
            let (p, pt) = (level.phi.values()[i], level.phi_t.values()[i]);
            let (dp, d2p) = (level.dphi.values()[i], level.d2phi.values()[i]);
            Complex64::i() * pt - d2p + dp * dp * 2.0 / p
        })
        .collect();
    Field::new(*level.phi.grid(), v).expect("length preserved")
}

/// Residual of `i φ̇ - φ'' + 2φ'²/φ` on the interior time levels.
pub fn vacuum_residual(states: &[EvolutionState], opts: ResidualOptions) -> Result<ResidualReport> {
    let levels = interior_levels(states, opts)?;
    let mut reports = Vec::with_capacity(levels.len());
    for level in &levels {
        let (mask, threshold) = mask_near_zeros_relative(&level.phi, opts.mask_rel)?;
        reports.push(ResidualReport::new(vacuum_field(level), mask, threshold)?);
    }
    combine(reports, states[1].t - states[0].t)
}

/// Difference between the trajectory of `c·φ₀` and `c` times the trajectory
/// of `φ₀`, at the level where it is largest.
pub fn scale_invariance_check(phi0: &Field, c: Complex64, dt: f64, steps: usize) -> Result<ResidualReport> {
    if c.norm() == 0.0 || !c.is_finite() {
        return Err(Error::Input("scale factor must be finite and nonzero".into()));
    }
    let base = evolve_vacuum(phi0, dt, steps)?;
    let scaled = evolve_vacuum(&phi0.scale(c), dt, steps)?;
    let mut reports = Vec::with_capacity(base.len());
    for (a, b) in base.iter().zip(&scaled) {
        let d = b.phi().zip_map(&a.phi(), |x, y| x - y * c);
        reports.push(ResidualReport::unmasked(d)?);
    }
    combine(reports, dt)
}

/// `L̂ = d/dx + 1/φ₀`, `M̂ = d/dx + φ₀'/φ₀² + 1/φ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxPair {
    pub l_mult: Field,
    pub m_mult: Field,
}

impl LaxPair {
    pub fn new(phi0: &Field, opts: ResidualOptions) -> Result<Self> {
        let u = reciprocal(phi0)?;
        let dphi = opts.scheme.d1(phi0)?;
        let m = dphi.zip_map(&u, |d, uv| d * uv * uv + uv);
        Ok(Self { l_mult: u, m_mult: m })
    }

    pub fn apply_l(&self, f: &Field, opts: ResidualOptions) -> Result<Field> {
        Ok(&opts.scheme.d1(f)? + &(&self.l_mult * f))
    }

    pub fn apply_m(&self, f: &Field, opts: ResidualOptions) -> Result<Field> {
        Ok(&opts.scheme.d1(f)? + &(&self.m_mult * f))
    }

    /// `[L̂, M̂] f` by composing the operators.
    pub fn commutator(&self, f: &Field, opts: ResidualOptions) -> Result<Field> {
        let lm = self.apply_l(&self.apply_m(f, opts)?, opts)?;
        let ml = self.apply_m(&self.apply_l(f, opts)?, opts)?;
        Ok(&lm - &ml)
    }
}

/// The multiplier `(φ₀'/φ₀²)'` the commutator collapses to.
pub fn commutator_multiplier(phi0: &Field, opts: ResidualOptions) -> Result<Field> {
    let dphi = opts.scheme.d1(phi0)?;
    let d2phi = opts.scheme.d2(phi0)?;
    let mut v = Vec::with_capacity(phi0.len());
    for i in 0..phi0.len() {
        let (p, dp, d2p) = (phi0.values()[i], dphi.values()[i], d2phi.values()[i]);
        v.push((d2p * p - dp * dp * 2.0) / (p * p * p));
    }
    Field::new(*phi0.grid(), v)
}

#[derive(Debug, Clone)]
pub struct LaxReport {
    /// `i ∂ₜ(1/φ₀) + (φ₀'/φ₀²)'`.
    pub residual: ResidualReport,
    /// `r + (1/φ₀²)·(vacuum residual)`, zero on or off shell.
    pub identity_defect: ResidualReport,
}

/// Lax-equation residual along a trajectory. `∂ₜ(1/φ₀)` is taken as
/// `-φ̇₀/φ₀²` with the same centred `φ̇₀` as [`vacuum_residual`].
pub fn lax_residual(states: &[EvolutionState], opts: ResidualOptions) -> Result<LaxReport> {
    let levels = interior_levels(states, opts)?;
    let dt = states[1].t - states[0].t;
    let mut rs = Vec::with_capacity(levels.len());
    let mut defects = Vec::with_capacity(levels.len());
    for level in &levels {
        let (mask, threshold) = mask_near_zeros_relative(&level.phi, opts.mask_rel)?;
        let vac = vacuum_field(level);
        let mut r = Vec::with_capacity(level.phi.len());
        let mut d = Vec::with_capacity(level.phi.len());
        for i in 0..level.phi.len() {
            let (p, pt) = (level.phi.values()[i], level.phi_t.values()[i]);
            let (dp, d2p) = (level.dphi.values()[i], level.d2phi.values()[i]);
            let p2 = p * p;
            let ri = -Complex64::i() * pt / p2 + (d2p * p - dp * dp * 2.0) / (p2 * p);
            r.push(ri);
            d.push(ri + vac.values()[i] / p2);
        }
        let grid = *level.phi.grid();
        rs.push(ResidualReport::new(Field::new(grid, r)?, mask.clone(), threshold)?);
        defects.push(ResidualReport::new(Field::new(grid, d)?, mask, threshold)?);
    }
    Ok(LaxReport { residual: combine(rs, dt)?, identity_defect: combine(defects, dt)? })
}

/// L2 norm of `u` over the unmasked grid, for conservation checks.
pub fn u_norm(state: &EvolutionState) -> Result<f64> {
    Ok(norms(&state.u, &crate::grid::Mask::none(state.u.len()))?.1)
}
