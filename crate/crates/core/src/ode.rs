//! Adaptive Dormand–Prince 5(4) integration for small real systems, with
//! outputs landing exactly on grid points.

use crate::error::{Error, Result};

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub min_step: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 2_000_000,
            min_step: 1e-13,
        }
    }
}

/// Why an integration stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Halt {
    /// The observer rejected the state at `x`.
    Observer { x: f64 },
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = rhs(x, y)` from `(x0, y0)` through the targets in order
/// (all on the same side of `x0`, monotone), calling `observe` at every
/// accepted step and recording `y` at each target.
///
/// `observe` returns `false` to stop; the states recorded so far are
/// returned together with the halt reason.
pub fn integrate<const D: usize>(
    rhs: impl Fn(f64, &[f64; D]) -> [f64; D],
    x0: f64,
    y0: [f64; D],
    targets: &[f64],
    control: StepControl,
    mut observe: impl FnMut(f64, &[f64; D]) -> bool,
) -> Result<(Vec<[f64; D]>, Option<Halt>)> {
    let mut out = Vec::with_capacity(targets.len());
    let Some(&last) = targets.last() else {
        return Ok((out, None));
    };
    let dir = if last >= x0 { 1.0 } else { -1.0 };
    let span = (last - x0).abs().max(1e-300);

    let mut x = x0;
    let mut y = y0;
    let mut h = (span * 1e-3).max(control.min_step * 10.0).min(1e-2);
    let mut steps = 0usize;
    let mut k1 = rhs(x, &y);

    for &target in targets {
        while (target - x) * dir > 0.0 {
            steps += 1;
            if steps > control.max_steps {
                return Err(Error::Numeric(format!(
                    "step limit {} exceeded near x = {x:.6}",
                    control.max_steps
                )));
            }
            let remaining = (target - x).abs();
            let landing = h >= remaining;
            let step = if landing { remaining } else { h };
            let (y_new, err, k_last) = dp_step(&rhs, x, &y, &k1, step * dir);

            let mut ratio: f64 = 0.0;
            for i in 0..D {
                let scale = control.atol + control.rtol * y[i].abs().max(y_new[i].abs());
                ratio = ratio.max((err[i] / scale).abs());
            }
            if !ratio.is_finite() {
                ratio = f64::INFINITY;
            }
            if ratio <= 1.0 {
                x = if landing { target } else { x + step * dir };
                y = y_new;
                k1 = k_last;
                if !observe(x, &y) {
                    return Ok((out, Some(Halt::Observer { x })));
                }
                let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                // keep the step that would have been taken had we not landed
                h = if landing { h.max(step * grow) } else { step * grow };
            } else {
                h = step * (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.5);
                if h < control.min_step {
                    return Err(Error::Numeric(format!(
                        "step size underflow ({h:.3e}) near x = {x:.6}"
                    )));
                }
            }
        }
        out.push(y);
    }
    Ok((out, None))
}

type StepResult<const D: usize> = ([f64; D], [f64; D], [f64; D]);

fn dp_step<const D: usize>(
    rhs: &impl Fn(f64, &[f64; D]) -> [f64; D],
    x: f64,
    y: &[f64; D],
    k1: &[f64; D],
    h: f64,
) -> StepResult<D> {
    let mut k = [[0.0; D]; 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..D {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = rhs(x + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; D];
    for s in 0..7 {
        for i in 0..D {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    (y5, err, k[6])
}

/// Local Lagrange interpolation of uniformly sampled real data.
#[derive(Debug, Clone)]
pub struct UniformInterpolant {
    x_min: f64,
    h: f64,
    values: Vec<f64>,
    width: usize,
}

impl UniformInterpolant {
    /// `width`-point interpolation (degree `width - 1`).
    pub fn new(x_min: f64, h: f64, values: Vec<f64>, width: usize) -> Self {
        let width = width.min(values.len()).max(2);
        Self { x_min, h, values, width }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = (x - self.x_min) / self.h;
        let half = self.width as f64 / 2.0;
        let start = (t - half + 1.0).floor().clamp(0.0, (n - self.width) as f64) as usize;
        let mut acc = 0.0;
        for j in 0..self.width {
            let tj = (start + j) as f64;
            if t == tj {
                return self.values[start + j];
            }
            let mut l = 1.0;
            for m in 0..self.width {
                if m != j {
                    let tm = (start + m) as f64;
                    l *= (t - tm) / (tj - tm);
                }
            }
            acc += l * self.values[start + j];
        }
        acc
    }
}
