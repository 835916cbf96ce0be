//! Uniform 1-D grids, sampled complex fields, masks and residual norms.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Minimum number of grid points.
pub const MIN_POINTS: usize = 8;

/// Uniform grid `x_i = x_min + i * h`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::Input("grid bounds must be finite".into()));
        }
        if x_max <= x_min {
            return Err(Error::Input(format!(
                "x_max ({x_max}) must exceed x_min ({x_min})"
            )));
        }
        if n < MIN_POINTS {
            return Err(Error::Input(format!(
                "grid needs at least {MIN_POINTS} points, got {n}"
            )));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        Ok(Self { x_min, x_max, n, h })
    }

    /// The default verification box `[-10, 10]` with 1024 points.
    pub fn standard() -> Self {
        Self::new(-10.0, 10.0, 1024).expect("static grid is valid")
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Same box, spacing halved (`2(n-1) + 1` points).
    pub fn refined(&self) -> Self {
        Self::new(self.x_min, self.x_max, 2 * (self.n - 1) + 1).expect("refinement is valid")
    }

    /// Index of the grid point closest to `x` (clamped to the box).
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.h).round();
        i.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }
}

/// Complex samples of a function on a [`Grid1D`].
///
/// Samples are expected to be finite. Fields with poles (such as `u = 1/phi`)
/// may carry non-finite values, but only at points excluded by a [`Mask`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "field has {} samples, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn constant(grid: Grid1D, c: Complex64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples a complex-valued function.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values }
    }

    /// Samples a real-valued function.
    pub fn from_real_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self
            .values
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            None => Ok(()),
            Some(i) => Err(Error::Input(format!(
                "non-finite sample at x = {:.6}",
                self.grid.x(i)
            ))),
        }
    }

    /// Largest `|f|` over all points.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| c * z)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.map(|z| z * c)
    }

    /// Checks that `other` lives on the same grid.
    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::Input("fields live on different grids".into()))
        }
    }

    /// `true` when every sample is exactly zero.
    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Trapezoid-rule inner product `<self, other> = ∫ conj(self) other dx`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        let n = self.len();
        let h = self.grid.h();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += a.conj() * b * w;
        }
        acc * h
    }
}

impl Add for &Field {
    type Output = Field;

    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;

    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

/// Pointwise product.
impl Mul for &Field {
    type Output = Field;

    fn mul(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a * b)
    }
}

/// Boolean exclusion mask; `true` means the point is excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask(Vec<bool>);

impl Mask {
    pub fn none(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn from_vec(v: Vec<bool>) -> Self {
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn is_masked(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&m| m).count()
    }

    pub fn fraction(&self) -> f64 {
        if self.0.is_empty() {
            return 1.0;
        }
        self.count() as f64 / self.0.len() as f64
    }

    pub fn all_masked(&self) -> bool {
        self.0.iter().all(|&m| m)
    }

    pub fn any_masked(&self) -> bool {
        self.0.iter().any(|&m| m)
    }

    /// Union of two masks.
    pub fn union(&self, other: &Mask) -> Mask {
        Mask(self.0.iter().zip(&other.0).map(|(&a, &b)| a || b).collect())
    }

    /// Grows every masked run by `width` points on each side.
    pub fn dilate(&self, width: usize) -> Mask {
        let n = self.0.len();
        let mut out = self.0.clone();
        for (i, &m) in self.0.iter().enumerate() {
            if m {
                let lo = i.saturating_sub(width);
                let hi = (i + width).min(n - 1);
                out[lo..=hi].iter_mut().for_each(|v| *v = true);
            }
        }
        Mask(out)
    }
}

/// Masks points where `|f| <= threshold`, plus one neighbour on each side.
pub fn mask_near_zeros(f: &Field, threshold: f64) -> Result<Mask> {
    if !(threshold > 0.0) {
        return Err(Error::Input(format!(
            "mask threshold must be positive, got {threshold}"
        )));
    }
    let raw = Mask(
        f.values()
            .iter()
            .map(|z| !(z.norm() > threshold))
            .collect(),
    );
    let mask = raw.dilate(1);
    if mask.all_masked() {
        return Err(Error::FullyMasked(f.len()));
    }
    Ok(mask)
}

/// Masks points where `|f| <= rel * max|f|`. A zero field is fully masked.
pub fn mask_near_zeros_relative(f: &Field, rel: f64) -> Result<(Mask, f64)> {
    let peak = f.max_abs();
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::FullyMasked(f.len()));
    }
    let threshold = rel * peak;
    Ok((mask_near_zeros(f, threshold)?, threshold))
}

/// `(L∞, L2)` norms over unmasked points; `L2 = sqrt(h Σ w_i |f_i|²)` with
/// trapezoid weights (`w = 1/2` at the two box ends, 1 elsewhere).
pub fn norms(f: &Field, mask: &Mask) -> Result<(f64, f64)> {
    if mask.len() != f.len() {
        return Err(Error::Input("mask length differs from field length".into()));
    }
    if mask.all_masked() {
        return Err(Error::FullyMasked(f.len()));
    }
    let n = f.len();
    let mut linf = 0.0_f64;
    let mut sum = 0.0;
    for (i, z) in f.values().iter().enumerate() {
        if mask.is_masked(i) {
            continue;
        }
        let a = z.norm();
        linf = linf.max(a);
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sum += w * a * a;
    }
    Ok((linf, (f.grid().h() * sum).sqrt()))
}

/// Masked residual norms, the common currency of every verification.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub linf: f64,
    pub l2: f64,
    pub mask_fraction: f64,
    pub mask_threshold: f64,
    /// Per-point residual; masked points hold zero.
    pub residual: Field,
    pub mask: Mask,
}

impl ResidualReport {
    /// Builds a report, zeroing the residual at masked points.
    pub fn new(mut residual: Field, mask: Mask, mask_threshold: f64) -> Result<Self> {
        let (linf, l2) = norms(&residual, &mask)?;
        if !(linf.is_finite() && l2.is_finite()) {
            return Err(Error::Numeric("residual is not finite on unmasked points".into()));
        }
        for (i, z) in residual.values_mut().iter_mut().enumerate() {
            if mask.is_masked(i) {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        Ok(Self {
            linf,
            l2,
            mask_fraction: mask.fraction(),
            mask_threshold,
            residual,
            mask,
        })
    }

    /// Report with no mask.
    pub fn unmasked(residual: Field) -> Result<Self> {
        let n = residual.len();
        Self::new(residual, Mask::none(n), 0.0)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.linf <= tol
    }
}
