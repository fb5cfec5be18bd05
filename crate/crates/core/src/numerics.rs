//! Shared grids, quadrature, numerical differentiation, and the oscillatory
//! Fourier-type integral used by the data-side modules.
//!
//! Everything here works in plain f64. Grids are uniform; composite Simpson
//! is used whenever the interval count is even, with trapezoid as the
//! fallback. Off-grid endpoints are handled by linear interpolation, keeping
//! the whole stack at O(h²) or better.

use num_complex::Complex64;

use crate::{Error, Result};

/// Comparison slack for snapping nominally-on-grid coordinates.
const GRID_SNAP: f64 = 1e-9;

/// A uniform grid of `n` intervals on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    /// Build a grid; requires `x_max > x_min` and at least 8 intervals.
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::Grid("grid bounds must be finite".into()));
        }
        if x_max <= x_min {
            return Err(Error::Grid(format!(
                "x_max ({x_max}) must exceed x_min ({x_min})"
            )));
        }
        if n < 8 {
            return Err(Error::Grid(format!("need n >= 8 intervals, got {n}")));
        }
        Ok(Grid { x_min, x_max, n })
    }

    /// Symmetric grid on `[-k_max, k_max]` with an even interval count, so
    /// that k = 0 is a grid point and k-points come in ± pairs.
    pub fn symmetric(k_max: f64, n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::Grid(format!(
                "symmetric grid needs an even interval count, got {n}"
            )));
        }
        Grid::new(-k_max, k_max, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points (`n + 1`).
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Step size `h = (x_max - x_min)/n`.
    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    /// i-th grid point.
    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n);
        self.x_min + i as f64 * self.h()
    }

    /// All grid points in order.
    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.point(i))
    }

    /// Whether `x` lies within the grid span (with snapping slack).
    pub fn contains(&self, x: f64) -> bool {
        let slack = GRID_SNAP * self.span_scale();
        x >= self.x_min - slack && x <= self.x_max + slack
    }

    /// Index of `x` if it coincides with a grid point (within slack).
    pub fn index_of(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let t = (x - self.x_min) / self.h();
        let i = t.round();
        if (t - i).abs() <= GRID_SNAP * (1.0 + t.abs()) {
            let i = i as usize;
            (i <= self.n).then_some(i)
        } else {
            None
        }
    }

    /// True when the grid is symmetric about 0 with a point at 0.
    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= GRID_SNAP * self.span_scale() && self.n % 2 == 0
    }

    fn span_scale(&self) -> f64 {
        self.x_max.abs().max(self.x_min.abs()).max(1.0)
    }

    /// Fractional position of `x` on the grid: `(index, weight)` so that a
    /// linear interpolation reads `v[i]*(1-w) + v[i+1]*w`.
    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        if !self.contains(x) {
            return Err(Error::Range(format!(
                "point {x} outside grid [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        let t = ((x - self.x_min) / self.h()).clamp(0.0, self.n as f64);
        let mut i = t.floor() as usize;
        if i == self.n {
            i -= 1;
        }
        Ok((i, t - i as f64))
    }
}

/// Scalar types the generic numerics operate on (f64 and Complex64).
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<f64, Output = Self>
{
    const ZERO: Self;
    fn is_finite_scalar(&self) -> bool;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    fn is_finite_scalar(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    fn is_finite_scalar(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// A function sampled on a uniform grid, one value per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction<T: Scalar> {
    grid: Grid,
    values: Vec<T>,
}

impl<T: Scalar> SampledFunction<T> {
    /// Wrap samples; the length must match the grid and all values be finite.
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite_scalar()) {
            return Err(Error::Domain(format!(
                "non-finite sample at grid point {i} (x = {})",
                grid.point(i)
            )));
        }
        Ok(SampledFunction { grid, values })
    }

    /// Sample a closure onto the grid.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> T) -> Result<Self> {
        let values = grid.points().map(f).collect();
        SampledFunction::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, i: usize) -> T {
        self.values[i]
    }

    /// Linear interpolation at an arbitrary in-range point.
    pub fn interpolate(&self, x: f64) -> Result<T> {
        let (i, w) = self.grid.locate(x)?;
        Ok(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }
}

impl SampledFunction<f64> {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Composite quadrature of `f` over `[a, b] ⊆ [x_min, x_max]`.
///
/// Simpson's rule is used on the on-grid part when its interval count is
/// even, trapezoid otherwise; the off-grid slivers at either end are closed
/// with linearly interpolated trapezoids.
pub fn integrate<T: Scalar>(f: &SampledFunction<T>, a: f64, b: f64) -> Result<T> {
    let grid = f.grid();
    if a > b + GRID_SNAP {
        return Err(Error::Range(format!("need a <= b, got a = {a}, b = {b}")));
    }
    if !grid.contains(a) || !grid.contains(b) {
        return Err(Error::Range(format!(
            "[{a}, {b}] not contained in [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    if (b - a).abs() <= GRID_SNAP * grid.span_scale() {
        return Ok(T::ZERO);
    }
    let h = grid.h();
    // First grid point at or above a; last grid point at or below b. An
    // endpoint sitting on a grid node (within slack) contributes no sliver.
    let (a_on, lo) = match grid.index_of(a) {
        Some(i) => (true, i),
        None => (false, grid.locate(a)?.0 + 1),
    };
    let (b_on, hi) = match grid.index_of(b) {
        Some(i) => (true, i),
        None => (false, grid.locate(b)?.0),
    };

    if lo > hi {
        // Both endpoints inside one cell: single interpolated trapezoid.
        let fa = f.interpolate(a)?;
        let fb = f.interpolate(b)?;
        return Ok((fa + fb) * (0.5 * (b - a)));
    }

    let mut total = T::ZERO;
    // Left sliver [a, x_lo].
    if !a_on {
        let fa = f.interpolate(a)?;
        total = total + (fa + f.value(lo)) * (0.5 * (grid.point(lo) - a));
    }
    // On-grid block [x_lo, x_hi].
    let m = hi - lo;
    if m > 0 {
        if m % 2 == 0 {
            // Composite Simpson.
            let mut acc = f.value(lo) + f.value(hi);
            let mut i = lo + 1;
            while i < hi {
                acc = acc + f.value(i) * if (i - lo) % 2 == 1 { 4.0 } else { 2.0 };
                i += 1;
            }
            total = total + acc * (h / 3.0);
        } else {
            let mut acc = (f.value(lo) + f.value(hi)) * 0.5;
            for i in lo + 1..hi {
                acc = acc + f.value(i);
            }
            total = total + acc * h;
        }
    }
    // Right sliver [x_hi, b].
    if !b_on {
        let fb = f.interpolate(b)?;
        total = total + (f.value(hi) + fb) * (0.5 * (b - grid.point(hi)));
    }
    Ok(total)
}

/// Second-order finite differences on the grid: central in the interior,
/// one-sided three-point stencils at both ends.
pub fn differentiate<T: Scalar>(f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
    let grid = f.grid();
    if grid.n() < 4 {
        return Err(Error::Domain("differentiate needs n >= 4".into()));
    }
    let h = grid.h();
    let v = f.values();
    let n = v.len();
    let mut out = Vec::with_capacity(n);
    out.push((v[1] * 4.0 - v[2] - v[0] * 3.0) * (1.0 / (2.0 * h)));
    for i in 1..n - 1 {
        out.push((v[i + 1] - v[i - 1]) * (1.0 / (2.0 * h)));
    }
    out.push((v[n - 1] * 3.0 - v[n - 2] * 4.0 + v[n - 3]) * (1.0 / (2.0 * h)));
    SampledFunction::new(grid.clone(), out)
}

/// `(1/2π) ∫ g(k) e^{ikx} dk` over a truncated symmetric k-grid by plain
/// fine trapezoid. Fails when the grid cannot resolve the oscillation
/// (`|x|·dk > 1`).
pub fn fourier_integral(g: &SampledFunction<Complex64>, x: f64) -> Result<Complex64> {
    let grid = g.grid();
    if !grid.is_symmetric() {
        return Err(Error::Domain(
            "fourier_integral requires a symmetric k-grid about 0".into(),
        ));
    }
    let dk = grid.h();
    if x.abs() * dk > 1.0 {
        return Err(Error::Resolution {
            x,
            dk,
            product: x.abs() * dk,
        });
    }
    let v = g.values();
    let mid = grid.n() / 2;
    // Walk outward from k = 0 so the phases at ±k are exact conjugates;
    // a Hermitian integrand then yields an exactly real sum, pair by pair.
    let step = Complex64::new(0.0, dk * x).exp();
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = v[mid];
    for j in 1..=mid {
        phase *= step;
        let w = if j == mid { 0.5 } else { 1.0 };
        acc += (v[mid + j] * phase + v[mid - j] * phase.conj()) * w;
    }
    Ok(acc * Complex64::new(dk / (2.0 * std::f64::consts::PI), 0.0))
}

/// Trapezoid over the full sample range with the Euler–Maclaurin endpoint
/// correction `-(h²/12)[f'(b) - f'(a)]` (slopes from one-sided 3-point
/// stencils). Boundary-driven O(h²) error is removed; interiors of smooth
/// integrands are then O(h⁴).
pub(crate) fn corrected_trapezoid<T: Scalar>(values: &[T], h: f64) -> T {
    let n = values.len();
    if n < 2 {
        return T::ZERO;
    }
    let mut acc = (values[0] + values[n - 1]) * 0.5;
    for v in &values[1..n - 1] {
        acc = acc + *v;
    }
    let plain = acc * h;
    if n < 4 {
        return plain;
    }
    let d_left = (values[1] * 4.0 - values[2] - values[0] * 3.0) * (1.0 / (2.0 * h));
    let d_right =
        (values[n - 1] * 3.0 - values[n - 2] * 4.0 + values[n - 3]) * (1.0 / (2.0 * h));
    plain - (d_right - d_left) * (h * h / 12.0)
}

/// `∫ v(x) e^{ikx} dx` over uniformly spaced real samples: per cell the
/// oscillation is integrated exactly against the linear interpolant of `v`
/// (Filon-type), plus a second-difference term removing the leading
/// interpolation error. Accuracy is then O(h³)-level uniformly in k; at
/// k = 0 the rule reduces to the endpoint-corrected trapezoid.
pub(crate) fn filon_transform(values: &[f64], x0: f64, k: f64, h: f64) -> Complex64 {
    let n = values.len();
    if n < 2 {
        return Complex64::new(0.0, 0.0);
    }
    let theta = k * h;
    // Cell weights: c0 = h∫₀¹(1-u)e^{iθu}du, c1 = h∫₀¹ u e^{iθu}du, and the
    // curvature moment m2 = ½∫₀ʰ t(h-t)e^{ikt}dt (→ h³/12 as θ → 0).
    let (c0, c1, m2) = if theta.abs() < 0.5 {
        let it = Complex64::new(0.0, theta);
        let mut term = Complex64::new(1.0, 0.0); // (iθ)^m / m!
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        for m in 0..14 {
            s0 += term / (((m + 1) * (m + 2)) as f64);
            s1 += term / ((m + 2) as f64);
            s2 += term / (((m + 2) * (m + 3)) as f64);
            term = term * it / ((m + 1) as f64);
        }
        (s0 * h, s1 * h, s2 * (0.5 * h * h * h))
    } else {
        let it = Complex64::new(0.0, theta);
        let e = it.exp();
        let c1 = (e / it - (e - 1.0) / (it * it)) * h;
        let c0 = (-1.0 / it + (e - 1.0) / (it * it)) * h;
        let t2 = theta * theta;
        let m2 = Complex64::new(0.5 * h * h * h, 0.0)
            * (-(e + 1.0) / t2 - (e - 1.0) * Complex64::new(0.0, 2.0 / (t2 * theta)));
        (c0, c1, m2)
    };
    let step = Complex64::new(0.0, theta).exp();
    let mut phase = Complex64::new(0.0, k * x0).exp();
    let mut acc = Complex64::new(0.0, 0.0);
    let inv_h2 = 1.0 / (h * h);
    for j in 0..n - 1 {
        // Second derivative on the cell from the nearest centered stencil.
        let c = if j == 0 { 1 } else { j.min(n - 2) };
        let d2 = (values[c + 1] - 2.0 * values[c] + values[c - 1]) * inv_h2;
        acc += phase * (c0 * values[j] + c1 * values[j + 1] - m2 * d2);
        phase *= step;
    }
    acc
}

/// Suffix (tail) integrals `T[i] = ∫_{x_i}^{x_max} f`, computed cumulatively
/// with the same endpoint correction applied per tail.
pub(crate) fn tail_integrals(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    // Plain cumulative trapezoid from the right.
    let mut acc = 0.0;
    for i in (0..n - 1).rev() {
        acc += 0.5 * h * (values[i] + values[i + 1]);
        out[i] = acc;
    }
    if n < 4 {
        return out;
    }
    // Endpoint correction: for the tail starting at i, subtract
    // (h²/12)(f'(end) - f'(x_i)) with one-sided slopes near both ends.
    let d_right = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    for i in 0..n - 1 {
        let d_left = if i == 0 {
            (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
        } else {
            (values[i + 1] - values[i - 1]) / (2.0 * h)
        };
        out[i] -= h * h / 12.0 * (d_right - d_left);
    }
    out
}
