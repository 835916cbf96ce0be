//! Numerical differentiation and integration of sampled fields.
//!
//! Available kinds: central finite differences of 2nd and 4th order, and
//! Fourier (pseudo-spectral) differentiation.
//!
//! Each comes with a boundary treatment. `OneSided` uses one-sided stencils
//! at the box ends for the finite-difference kinds. For the Fourier kind it
//! subtracts a two-point Hermite polynomial that matches the field and its
//! first [`HERMITE_ORDER`] derivatives at both ends (estimated with one-sided
//! stencils), so only a remainder whose periodic extension is smooth goes
//! through the FFT. This keeps spectral accuracy for fields that have not
//! decayed at the box edges, e.g. `tanh x` or `sech x` on `[-10, 10]`.
//! `PeriodicAssumedDecayed` wraps stencils or applies a plain FFT and flags
//! fields that are not decayed below [`DECAY_TOLERANCE`] at both ends.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::Field;

/// Edge magnitude below which a field counts as decayed for a periodic FFT.
pub const DECAY_TOLERANCE: f64 = 1e-10;

/// Highest endpoint derivative matched by the spectral boundary correction.
pub const HERMITE_ORDER: usize = 4;

/// Width of the one-sided stencils that estimate endpoint derivatives.
const HERMITE_STENCIL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Central2,
    Central4,
    SpectralFourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    OneSided,
    PeriodicAssumedDecayed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DerivativeScheme {
    pub kind: SchemeKind,
    pub boundary: Boundary,
}

impl Default for DerivativeScheme {
    fn default() -> Self {
        Self::spectral()
    }
}

/// A derivative together with the decay diagnostic of its input.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub field: Field,
    /// Set when a periodic FFT was applied to a field that is not decayed.
    pub decay_warning: bool,
}

impl DerivativeScheme {
    pub const fn new(kind: SchemeKind, boundary: Boundary) -> Self {
        Self { kind, boundary }
    }

    /// Fourier differentiation with boundary correction.
    pub const fn spectral() -> Self {
        Self::new(SchemeKind::SpectralFourier, Boundary::OneSided)
    }

    /// Plain periodic FFT differentiation.
    pub const fn spectral_periodic() -> Self {
        Self::new(SchemeKind::SpectralFourier, Boundary::PeriodicAssumedDecayed)
    }

    pub const fn central2() -> Self {
        Self::new(SchemeKind::Central2, Boundary::OneSided)
    }

    pub const fn central4() -> Self {
        Self::new(SchemeKind::Central4, Boundary::OneSided)
    }

    /// Whether `f` violates the decay assumption of this scheme.
    pub fn decay_warning(&self, f: &Field) -> bool {
        if self.kind != SchemeKind::SpectralFourier || self.boundary != Boundary::PeriodicAssumedDecayed {
            return false;
        }
        let v = f.values();
        v[0].norm() > DECAY_TOLERANCE || v[v.len() - 1].norm() > DECAY_TOLERANCE
    }

    /// Order of the local stencils that stand in for this scheme where only
    /// pointwise derivatives are wanted.
    pub fn local_accuracy(&self) -> usize {
        match self.kind {
            SchemeKind::Central2 => 2,
            SchemeKind::Central4 => 4,
            SchemeKind::SpectralFourier => 8,
        }
    }

    pub fn d1(&self, f: &Field) -> Result<Field> {
        Ok(derivative(f, 1, *self)?.field)
    }

    pub fn d2(&self, f: &Field) -> Result<Field> {
        Ok(derivative(f, 2, *self)?.field)
    }
}

/// First (`order = 1`) or second (`order = 2`) derivative of `f`.
pub fn derivative(f: &Field, order: usize, scheme: DerivativeScheme) -> Result<Derivative> {
    if order != 1 && order != 2 {
        return Err(Error::Input(format!("derivative order must be 1 or 2, got {order}")));
    }
    f.ensure_finite()?;
    let values = match scheme.kind {
        SchemeKind::Central2 => finite_difference(f, order, 2, scheme.boundary),
        SchemeKind::Central4 => finite_difference(f, order, 4, scheme.boundary),
        SchemeKind::SpectralFourier => match scheme.boundary {
            Boundary::OneSided => spectral_corrected(f, order),
            Boundary::PeriodicAssumedDecayed => {
                let v = f.values();
                let period = v.len() as f64 * f.grid().h();
                spectral_periodic(v, period, order)
            }
        },
    };
    Ok(Derivative {
        field: Field::new(*f.grid(), values)?,
        decay_warning: scheme.decay_warning(f),
    })
}

/// Antiderivative `F(x) = ∫_{x_min}^{x} f`, so `F(x_min) = 0`.
///
/// The Fourier kind integrates spectrally (with the same boundary treatment
/// as [`derivative`]); the finite-difference kinds use the cumulative
/// trapezoid rule.
pub fn antiderivative(f: &Field, scheme: DerivativeScheme) -> Result<Field> {
    f.ensure_finite()?;
    let grid = *f.grid();
    let values = match (scheme.kind, scheme.boundary) {
        (SchemeKind::SpectralFourier, Boundary::OneSided) => spectral_corrected_integral(f),
        (SchemeKind::SpectralFourier, Boundary::PeriodicAssumedDecayed) => {
            let v = f.values();
            let period = v.len() as f64 * grid.h();
            let mut out = spectral_periodic_integral(v, period, grid.h());
            let base = out[0];
            out.iter_mut().for_each(|z| *z -= base);
            out
        }
        _ => cumulative_trapezoid(f.values(), grid.h()),
    };
    Field::new(grid, values)
}

fn cumulative_trapezoid(v: &[Complex64], h: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(v.len());
    let mut acc = Complex64::new(0.0, 0.0);
    out.push(acc);
    for w in v.windows(2) {
        acc += (w[0] + w[1]) * (0.5 * h);
        out.push(acc);
    }
    out
}

/// Finite-difference weights (Fornberg's recursion).
///
/// Returns `w[k][j]`, the weight of `nodes[j]` in the `k`-th derivative at
/// `z`, for `k = 0..=max_order`.
pub fn fornberg_weights(z: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

fn apply_stencil(v: &[Complex64], idx: impl Iterator<Item = usize>, w: &[f64]) -> Complex64 {
    idx.zip(w).fold(Complex64::new(0.0, 0.0), |acc, (i, &wj)| acc + v[i] * wj)
}

fn finite_difference(f: &Field, order: usize, accuracy: usize, boundary: Boundary) -> Vec<Complex64> {
    let v = f.values();
    let n = v.len();
    let h = f.grid().h();
    let scale = h.powi(-(order as i32));
    let r = accuracy / 2;

    let offsets: Vec<f64> = (0..=2 * r).map(|k| k as f64 - r as f64).collect();
    let central: Vec<f64> = fornberg_weights(0.0, &offsets, order)[order]
        .iter()
        .map(|w| w * scale)
        .collect();

    let width = accuracy + order;
    let side_nodes: Vec<f64> = (0..width).map(|k| k as f64).collect();

    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, slot) in out.iter_mut().enumerate() {
        let interior = i >= r && i + r < n;
        *slot = if interior {
            apply_stencil(v, i - r..=i + r, &central)
        } else {
            match boundary {
                Boundary::PeriodicAssumedDecayed => apply_stencil(
                    v,
                    (0..=2 * r).map(|k| (i + n + k - r) % n),
                    &central,
                ),
                Boundary::OneSided => {
                    let start = if i < r { 0 } else { n - width };
                    let z = (i - start) as f64;
                    let w: Vec<f64> = fornberg_weights(z, &side_nodes, order)[order]
                        .iter()
                        .map(|w| w * scale)
                        .collect();
                    apply_stencil(v, start..start + width, &w)
                }
            }
        };
    }
    out
}

/// Finite-difference derivative of `v` at index `i` alone, central where the
/// stencil fits and one-sided otherwise. `None` if the window holds a
/// non-finite sample.
pub fn local_derivative(v: &[Complex64], h: f64, i: usize, order: usize, accuracy: usize) -> Option<Complex64> {
    let r = accuracy / 2;
    let n = v.len();
    let (start, width) = if i >= r && i + r < n {
        (i - r, 2 * r + 1)
    } else {
        let width = (accuracy + order).min(n);
        (if i < r { 0 } else { n - width }, width)
    };
    let window = &v[start..start + width];
    if window.iter().any(|z| !z.is_finite()) {
        return None;
    }
    let nodes: Vec<f64> = (0..width).map(|k| k as f64).collect();
    let w = &fornberg_weights((i - start) as f64, &nodes, order)[order];
    let acc: Complex64 = window.iter().zip(w).map(|(z, c)| z * c).sum();
    Some(acc * h.powi(-(order as i32)))
}

fn wavenumbers(m: usize, period: f64) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let k = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
            2.0 * PI * k / period
        })
        .collect()
}

fn fft(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    plan.process(buf);
}

/// Derivative of samples assumed periodic with the given period.
fn spectral_periodic(v: &[Complex64], period: f64, order: usize) -> Vec<Complex64> {
    let m = v.len();
    let mut buf = v.to_vec();
    fft(&mut buf, false);
    let k = wavenumbers(m, period);
    for (j, z) in buf.iter_mut().enumerate() {
        let ik = Complex64::new(0.0, k[j]);
        *z *= if order == 1 {
            // the Nyquist mode has no odd derivative on the grid
            if m.is_multiple_of(2) && j == m / 2 { Complex64::new(0.0, 0.0) } else { ik }
        } else {
            ik * ik
        };
    }
    fft(&mut buf, true);
    let norm = 1.0 / m as f64;
    buf.iter_mut().for_each(|z| *z *= norm);
    buf
}

/// Periodic antiderivative: mean slope plus the zero-mean spectral integral.
fn spectral_periodic_integral(v: &[Complex64], period: f64, h: f64) -> Vec<Complex64> {
    let m = v.len();
    let mut buf = v.to_vec();
    fft(&mut buf, false);
    let mean = buf[0] / m as f64;
    let k = wavenumbers(m, period);
    buf[0] = Complex64::new(0.0, 0.0);
    for j in 1..m {
        if m.is_multiple_of(2) && j == m / 2 {
            buf[j] = Complex64::new(0.0, 0.0);
        } else {
            buf[j] /= Complex64::new(0.0, k[j]);
        }
    }
    fft(&mut buf, true);
    let norm = 1.0 / m as f64;
    buf.iter_mut()
        .enumerate()
        .map(|(i, z)| *z * norm + mean * (i as f64 * h))
        .collect()
}

/// Real polynomial in ascending powers.
#[derive(Debug, Clone)]
struct Poly(Vec<f64>);

impl Poly {
    fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    /// `p(1 - s)`.
    fn reflect(&self) -> Poly {
        let one_minus = Poly(vec![1.0, -1.0]);
        let mut out = Poly(vec![0.0]);
        let mut power = Poly(vec![1.0]);
        for &c in &self.0 {
            out = out.add_scaled(&power, c);
            power = power.mul(&one_minus);
        }
        out
    }

    fn add_scaled(&self, other: &Poly, c: f64) -> Poly {
        let len = self.0.len().max(other.0.len());
        let mut out = vec![0.0; len];
        for (i, a) in self.0.iter().enumerate() {
            out[i] += a;
        }
        for (i, b) in other.0.iter().enumerate() {
            out[i] += c * b;
        }
        Poly(out)
    }

    fn deriv(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect())
    }

    fn integral(&self) -> Poly {
        let mut out = vec![0.0];
        out.extend(self.0.iter().enumerate().map(|(i, c)| c / (i + 1) as f64));
        Poly(out)
    }

    fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Two-point Hermite basis on `[0, 1]` matching derivatives `0..=m`.
///
/// `left[j]` has unit `j`-th derivative at 0 and vanishes to order `m` at 1;
/// `right[j]` is its mirror image.
fn hermite_basis(m: usize) -> (Vec<Poly>, Vec<Poly>) {
    let mut one_minus_pow = Poly(vec![1.0]);
    for _ in 0..=m {
        one_minus_pow = one_minus_pow.mul(&Poly(vec![1.0, -1.0]));
    }
    let mut left = Vec::with_capacity(m + 1);
    let mut right = Vec::with_capacity(m + 1);
    let mut factorial = 1.0;
    for j in 0..=m {
        if j > 0 {
            factorial *= j as f64;
        }
        let mut series = vec![0.0; m + 1];
        for k in 0..=m - j {
            series[j + k] = binomial(m + k, k) / factorial;
        }
        let a = Poly(series).mul(&one_minus_pow);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let b = a.reflect();
        right.push(Poly(b.0.iter().map(|c| c * sign).collect()));
        left.push(a);
    }
    (left, right)
}

/// Hermite polynomials (real and imaginary parts, in `s = (x - x_min)/L`)
/// matching the field's endpoint derivatives, estimated by one-sided stencils.
fn boundary_polynomial(f: &Field) -> (Poly, Poly) {
    let v = f.values();
    let n = v.len();
    let width = HERMITE_STENCIL.min(n);
    let m = HERMITE_ORDER.min(width - 1);
    let cells = (n - 1) as f64;

    let nodes: Vec<f64> = (0..width).map(|k| k as f64).collect();
    let wl = fornberg_weights(0.0, &nodes, m);
    let wr = fornberg_weights((width - 1) as f64, &nodes, m);

    let (left, right) = hermite_basis(m);
    let mut re = Poly(vec![0.0]);
    let mut im = Poly(vec![0.0]);
    for j in 0..=m {
        // d^j/ds^j = (L/h)^j d^j/di^j in index units
        let to_s = cells.powi(j as i32);
        let dl = apply_stencil(v, 0..width, &wl[j]) * to_s;
        let dr = apply_stencil(v, n - width..n, &wr[j]) * to_s;
        re = re.add_scaled(&left[j], dl.re).add_scaled(&right[j], dr.re);
        im = im.add_scaled(&left[j], dl.im).add_scaled(&right[j], dr.im);
    }
    (re, im)
}

/// Field minus its boundary polynomial, without the duplicated last point.
fn periodic_remainder(f: &Field, re: &Poly, im: &Poly) -> Vec<Complex64> {
    let n = f.len();
    (0..n - 1)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            f.values()[i] - Complex64::new(re.eval(s), im.eval(s))
        })
        .collect()
}

fn spectral_corrected(f: &Field, order: usize) -> Vec<Complex64> {
    let grid = f.grid();
    let n = f.len();
    let (re, im) = boundary_polynomial(f);
    let (mut dre, mut dim) = (re.clone(), im.clone());
    for _ in 0..order {
        dre = dre.deriv();
        dim = dim.deriv();
    }
    let chain = (grid.x_max() - grid.x_min()).powi(-(order as i32));

    let remainder = periodic_remainder(f, &re, &im);
    let mut d = spectral_periodic(&remainder, (n - 1) as f64 * grid.h(), order);
    d.push(d[0]);
    for (i, z) in d.iter_mut().enumerate() {
        let s = i as f64 / (n - 1) as f64;
        *z += Complex64::new(dre.eval(s), dim.eval(s)) * chain;
    }
    d
}

fn spectral_corrected_integral(f: &Field) -> Vec<Complex64> {
    let grid = f.grid();
    let n = f.len();
    let length = grid.x_max() - grid.x_min();
    let (re, im) = boundary_polynomial(f);
    let (ire, iim) = (re.integral(), im.integral());

    let remainder = periodic_remainder(f, &re, &im);
    let mean = remainder.iter().sum::<Complex64>() / remainder.len() as f64;
    let mut g = spectral_periodic_integral(&remainder, length, grid.h());
    // one full period past x_min: the oscillating part returns to its start
    g.push(g[0] + mean * length);
    let base = g[0];
    for (i, z) in g.iter_mut().enumerate() {
        let s = i as f64 / (n - 1) as f64;
        *z += Complex64::new(ire.eval(s), iim.eval(s)) * length - base;
    }
    g
}
