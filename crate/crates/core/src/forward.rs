//! Forward map: from the potential to the transformation kernel `A(x,y)`
//! (a Volterra integral equation solved by successive approximation), and
//! from the kernel to the Jost function, the S-matrix, bound states, and
//! norming constants.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{corrected_trapezoid, differentiate, Grid, SampledFunction};
use crate::potential::Potential;
use crate::{Error, Result};

/// Triangular table of the transformation-operator kernel `A(x_i, y_j)` for
/// `y_j >= x_i`, both indices on the same grid over `[0, X]`.
///
/// The kernel is taken to vanish for `y > X`; the admissibility guard on the
/// potential tail (`σ(X)` small) keeps that truncation honest.
#[derive(Debug, Clone)]
pub struct TransformKernel {
    grid: Grid,
    rows: Vec<Vec<f64>>,
}

impl TransformKernel {
    pub fn zero(grid: Grid) -> Self {
        let n = grid.n();
        let rows = (0..=n).map(|i| vec![0.0; n - i + 1]).collect();
        TransformKernel { grid, rows }
    }

    /// Wrap a triangular table; row `i` must hold `n - i + 1` finite values.
    pub fn from_rows(grid: Grid, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.n();
        if rows.len() != n + 1 {
            return Err(Error::Domain(format!(
                "kernel needs {} rows, got {}",
                n + 1,
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n - i + 1 {
                return Err(Error::Domain(format!(
                    "kernel row {i} needs {} entries, got {}",
                    n - i + 1,
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite kernel entry in row {i}")));
            }
        }
        Ok(TransformKernel { grid, rows })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Row `A(x_i, ·)` over `y_j ∈ [x_i, X]`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// `A(x_i, y_j)` with `j >= i`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j - i]
    }

    /// `A(x_i, y)` for arbitrary `y >= x_i`: linear interpolation within the
    /// row, zero beyond the grid edge.
    pub fn eval(&self, i: usize, y: f64) -> f64 {
        let h = self.grid.h();
        let x = self.grid.point(i);
        if y > self.grid.x_max() + 1e-12 {
            return 0.0;
        }
        let t = (y - x) / h;
        if t < -1e-9 {
            return 0.0;
        }
        let row = &self.rows[i];
        let j = (t.floor() as usize).min(row.len() - 1);
        if j + 1 >= row.len() {
            return row[row.len() - 1];
        }
        let w = t - j as f64;
        row[j] * (1.0 - w) + row[j + 1] * w
    }

    /// Diagonal `A(x_i, x_i)` as a sampled function.
    pub fn diagonal(&self) -> SampledFunction<f64> {
        let diag: Vec<f64> = self.rows.iter().map(|r| r[0]).collect();
        SampledFunction::new(self.grid.clone(), diag).expect("finite by construction")
    }

    pub fn max_abs(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// One-sided / central x-derivative of the kernel along row `i`, at the
    /// row's own y-points. On the diagonal the identity
    /// `A_x(x,x) = dA(x,x)/dx - A_y(x,x)` fills the entry the triangular
    /// table cannot reach by differencing across rows.
    pub fn x_derivative_row(&self, i: usize) -> Vec<f64> {
        let n = self.n();
        let h = self.grid.h();
        let m = self.rows[i].len();
        let mut out = vec![0.0; m];
        for jj in 0..m {
            let j = i + jj; // absolute y-index
            out[jj] = if i >= 1 && i + 1 <= n && j >= i + 1 && j <= n {
                // central in x (rows i-1, i+1 both contain column j)
                (self.value(i + 1, j) - self.value(i - 1, j)) / (2.0 * h)
            } else if i + 2 <= n && j >= i + 2 {
                // one-sided upward
                (-3.0 * self.value(i, j) + 4.0 * self.value(i + 1, j) - self.value(i + 2, j))
                    / (2.0 * h)
            } else if i >= 2 {
                // one-sided downward (columns exist for all j >= i)
                (3.0 * self.value(i, j) - 4.0 * self.value(i - 1, j) + self.value(i - 2, j))
                    / (2.0 * h)
            } else if j == i {
                0.0 // patched below via the diagonal identity
            } else if i + 1 <= n && j >= i + 1 {
                (self.value(i + 1, j) - self.value(i, j)) / h
            } else {
                0.0
            };
        }
        // Diagonal entry via A_x = d/dx A(x,x) - A_y when differencing in x
        // is not available (top rows).
        if i < 2 {
            let ddiag = if i == 0 {
                (-3.0 * self.value(0, 0) + 4.0 * self.value(1, 1) - self.value(2, 2)) / (2.0 * h)
            } else {
                (self.value(i + 1, i + 1) - self.value(i - 1, i - 1)) / (2.0 * h)
            };
            let a_y = if m >= 3 {
                (-3.0 * self.rows[i][0] + 4.0 * self.rows[i][1] - self.rows[i][2]) / (2.0 * h)
            } else if m == 2 {
                (self.rows[i][1] - self.rows[i][0]) / h
            } else {
                0.0
            };
            out[0] = ddiag - a_y;
        }
        out
    }
}

/// Options for the Volterra fixed-point solve.
#[derive(Debug, Clone)]
pub struct VolterraOptions {
    /// Stop when the max-norm update falls below this.
    pub tol_fixpoint: f64,
    pub max_iter: usize,
    /// Entry guard: require `σ(X) < sigma_guard` so dropping integrals
    /// beyond the grid is justified.
    pub sigma_guard: f64,
}

impl Default for VolterraOptions {
    fn default() -> Self {
        VolterraOptions {
            tol_fixpoint: 1e-11,
            max_iter: 200,
            sigma_guard: 1e-10,
        }
    }
}

/// Converged kernel plus the iteration trace (update norms per sweep).
#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub kernel: TransformKernel,
    pub sweeps: usize,
    pub update_norms: Vec<f64>,
}

/// Solve the kernel equation
/// `A(x,y) = ½∫_{(x+y)/2}^∞ q + ∫_{(x+y)/2}^∞ ds ∫_0^{(y-x)/2} dt q(s-t) A(s-t, s+t)`
/// by successive approximation from the first term.
///
/// Internally the iteration runs in the characteristic variables
/// `α = (x+y)/2, β = (y-x)/2` on a half-step grid, where both integrals
/// become cumulative sums; each sweep costs O(n²).
pub fn kernel_from_potential(p: &Potential, opts: &VolterraOptions) -> Result<VolterraSolution> {
    let l11 = p.check_l11(0.0)?;
    if !l11.finite {
        return Err(Error::ClassViolation(format!(
            "potential tail is not integrable against x (fitted exponent {:?})",
            l11.fitted_exponent
        )));
    }
    let sigma = p.sigma_q();
    let sigma_end = sigma.value(sigma.grid().n() - 1).max(sigma.value(sigma.grid().n()));
    if sigma_end >= opts.sigma_guard {
        return Err(Error::ClassViolation(format!(
            "σ(X) = {sigma_end:.3e} >= guard {:.1e}: grid too short to truncate the tail",
            opts.sigma_guard
        )));
    }

    let grid = p.grid();
    let n = grid.n();
    let n2 = 2 * n; // half-step grid over [0, X]
    let h2 = grid.h() / 2.0;

    // Potential on the half-step grid; midpoints by 4-point cubic
    // interpolation (3-point at the edges) to keep the O(h⁴)-level accuracy
    // of the corrected quadratures downstream.
    let qv = p.samples().values();
    let mut q2 = vec![0.0; n2 + 1];
    for i in 0..=n {
        q2[2 * i] = qv[i];
    }
    for i in 0..n {
        q2[2 * i + 1] = if i >= 1 && i + 2 <= n {
            (9.0 * (qv[i] + qv[i + 1]) - qv[i - 1] - qv[i + 2]) / 16.0
        } else if i == 0 {
            (3.0 * qv[0] + 6.0 * qv[1] - qv[2]) / 8.0
        } else {
            (3.0 * qv[n] + 6.0 * qv[n - 1] - qv[n - 2]) / 8.0
        };
    }

    // First term: B0(α) = ½ ∫_α^X q (endpoint-corrected cumulative trapezoid).
    let b0: Vec<f64> = crate::numerics::tail_integrals(&q2, h2)
        .into_iter()
        .map(|v| 0.5 * v)
        .collect();

    // Triangle B[a][b] = A(α_a - β_b, α_a + β_b), 0 <= b <= a.
    let mut b: Vec<Vec<f64>> = (0..=n2).map(|a| vec![b0[a]; a + 1]).collect();
    let mut g: Vec<Vec<f64>> = (0..=n2).map(|a| vec![0.0; a + 1]).collect();

    let scale = b0.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let mut update_norms = Vec::new();
    let mut peak_update = 0.0_f64;
    let mut converged = false;
    let mut sweeps = 0;
    let em = h2 * h2 / 12.0; // Euler–Maclaurin endpoint weight
    let mut phi = vec![0.0; n2 + 1];
    let mut dphi = vec![0.0; n2 + 1];
    let mut col = vec![0.0; n2 + 1];
    let mut dcol = vec![0.0; n2 + 1];

    while sweeps < opts.max_iter {
        sweeps += 1;
        // Pass 1: G(s,b) = ∫_0^{β_b} q(s-t) B(s,t) dt — cumulative trapezoid
        // in t with the endpoint slope correction.
        for s in 0..=n2 {
            let row = &b[s];
            for t in 0..=s {
                phi[t] = q2[s - t] * row[t];
            }
            slopes(&phi[..=s], h2, &mut dphi);
            let gr = &mut g[s];
            gr[0] = 0.0;
            let mut acc = 0.0;
            for t in 1..=s {
                acc += 0.5 * h2 * (phi[t - 1] + phi[t]);
                gr[t] = acc - em * (dphi[t] - dphi[0]);
            }
        }
        // Pass 2: B(a,b) = B0(a) + ∫_{α_a}^X G(s,b) ds — suffix trapezoid per
        // b, again with corrected endpoints.
        let mut update = 0.0_f64;
        for bb in 0..=n2 {
            let m = n2 - bb; // entries s = bb..=n2
            for (off, s) in (bb..=n2).enumerate() {
                col[off] = g[s][bb];
            }
            slopes(&col[..=m], h2, &mut dcol);
            let mut suffix = 0.0;
            for a in (bb..=n2).rev() {
                let off = a - bb;
                if a < n2 {
                    suffix += 0.5 * h2 * (col[off] + col[off + 1]);
                }
                let new = b0[a] + suffix - em * (dcol[m] - dcol[off]);
                let old = b[a][bb];
                let d = (new - old).abs();
                if d > update {
                    update = d;
                }
                b[a][bb] = new;
            }
        }
        update_norms.push(update);
        peak_update = peak_update.max(update);
        // Converged, or pinned at the round-off floor of the transient peak.
        if update <= opts.tol_fixpoint * scale
            || update <= 1e3 * f64::EPSILON * peak_update
        {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Divergence {
            iterations: sweeps,
            residual: *update_norms.last().unwrap_or(&f64::NAN),
        });
    }

    // Resample the triangle onto kernel rows: A(x_i, y_j) = B[i+j][j-i].
    let rows: Vec<Vec<f64>> = (0..=n)
        .map(|i| (i..=n).map(|j| b[i + j][j - i]).collect())
        .collect();
    Ok(VolterraSolution {
        kernel: TransformKernel::from_rows(grid.clone(), rows)?,
        sweeps,
        update_norms,
    })
}

/// Second-order slope estimates of a sampled array (central interior,
/// one-sided 3-point ends, degrading gracefully for very short arrays).
pub(crate) fn slopes(vals: &[f64], h: f64, out: &mut [f64]) {
    let n = vals.len();
    match n {
        0 => {}
        1 => out[0] = 0.0,
        2 => {
            let d = (vals[1] - vals[0]) / h;
            out[0] = d;
            out[1] = d;
        }
        _ => {
            out[0] = (-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) / (2.0 * h);
            for i in 1..n - 1 {
                out[i] = (vals[i + 1] - vals[i - 1]) / (2.0 * h);
            }
            out[n - 1] = (3.0 * vals[n - 1] - 4.0 * vals[n - 2] + vals[n - 3]) / (2.0 * h);
        }
    }
}

/// Wavenumber argument of the Jost solution: real `k` or `k = iκ` on the
/// positive imaginary axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Wavenumber {
    Real(f64),
    /// `k = iκ`; requires `κ > 0` (decaying exponential under truncation).
    Imaginary(f64),
}

/// `f(x,k) = e^{ikx} + ∫_x^X A(x,y) e^{iky} dy` by endpoint-corrected
/// trapezoid along the kernel row at `x` (which must be a grid point).
pub fn jost_solution(kernel: &TransformKernel, x: f64, k: Wavenumber) -> Result<Complex64> {
    let i = kernel
        .grid()
        .index_of(x)
        .ok_or_else(|| Error::Domain(format!("x = {x} is not a grid point")))?;
    match k {
        Wavenumber::Real(kr) => {
            let (f, _) = row_transform(kernel, i, kr);
            Ok(f)
        }
        Wavenumber::Imaginary(kappa) => {
            if kappa <= 0.0 {
                return Err(Error::Domain(format!(
                    "imaginary wavenumber needs κ > 0, got κ = {kappa}"
                )));
            }
            Ok(Complex64::new(jost_imag_axis(kernel, i, kappa), 0.0))
        }
    }
}

/// Real-valued `f(x_i, iκ)` for κ > 0.
fn jost_imag_axis(kernel: &TransformKernel, i: usize, kappa: f64) -> f64 {
    let grid = kernel.grid();
    let h = grid.h();
    let x = grid.point(i);
    let row = kernel.row(i);
    let decay = (-kappa * h).exp();
    let mut w = (-kappa * x).exp();
    let vals: Vec<f64> = row
        .iter()
        .map(|&a| {
            let v = a * w;
            w *= decay;
            v
        })
        .collect();
    (-kappa * x).exp() + corrected_trapezoid(&vals, h)
}

/// `(f(x_i,k), ∫ A e^{iky})` for real `k`, by the Filon-type cell rule
/// (accuracy uniform in k).
fn row_transform(kernel: &TransformKernel, i: usize, k: f64) -> (Complex64, Complex64) {
    let grid = kernel.grid();
    let x = grid.point(i);
    let integral = crate::numerics::filon_transform(kernel.row(i), x, k, grid.h());
    (Complex64::new(0.0, k * x).exp() + integral, integral)
}

/// Transform of an arbitrary real row sampled from `x` with step `h`.
fn row_transform_values(values: &[f64], x: f64, k: f64, h: f64) -> Complex64 {
    crate::numerics::filon_transform(values, x, k, h)
}

/// A bound state `k_j` with the derivative data used by the norming
/// constants; `s` is filled by [`norming_constants`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundState {
    /// Zero of the Jost function on the imaginary axis (`f(ik_j) = 0`).
    pub k: f64,
    /// `ḟ(ik_j) = df/dk` at the zero (purely imaginary; stored as complex).
    pub fdot_re: f64,
    pub fdot_im: f64,
    /// `f'(0, ik_j)` (x-derivative of the Jost solution at the origin).
    pub fprime0: f64,
    /// Norming constant `s_j > 0`.
    pub s: Option<f64>,
}

/// Jost function, S-matrix and bound-state data on a symmetric k-grid.
#[derive(Debug, Clone)]
pub struct JostData {
    k_grid: Grid,
    f: Vec<Complex64>,
    fprime0: Vec<Complex64>,
    s: Vec<Complex64>,
    f0_abs: f64,
    bound_states: Vec<BoundState>,
    warnings: Vec<String>,
}

impl JostData {
    pub fn k_grid(&self) -> &Grid {
        &self.k_grid
    }

    pub fn f(&self) -> &[Complex64] {
        &self.f
    }

    pub fn fprime0(&self) -> &[Complex64] {
        &self.fprime0
    }

    pub fn s_matrix(&self) -> &[Complex64] {
        &self.s
    }

    /// |f(0)| — decides the Levinson branch (κ = -2J vs -2J-1).
    pub fn f0_abs(&self) -> f64 {
        self.f0_abs
    }

    pub fn bound_states(&self) -> &[BoundState] {
        &self.bound_states
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Serialized view (`{k_max, n_k, f_re, f_im, s_re, s_im, bound_states}`).
    pub fn to_file(&self) -> Result<JostFile> {
        let mut bound = Vec::new();
        for b in &self.bound_states {
            let s = b.s.ok_or_else(|| {
                Error::InconsistentData("norming constants not yet computed".into())
            })?;
            bound.push(BoundPair { k: b.k, s });
        }
        Ok(JostFile {
            k_max: self.k_grid.x_max(),
            n_k: self.k_grid.n(),
            f_re: self.f.iter().map(|v| v.re).collect(),
            f_im: self.f.iter().map(|v| v.im).collect(),
            s_re: self.s.iter().map(|v| v.re).collect(),
            s_im: self.s.iter().map(|v| v.im).collect(),
            bound_states: bound,
        })
    }
}

/// `{k, s}` pair as serialized.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundPair {
    pub k: f64,
    pub s: f64,
}

/// JSON export schema for [`JostData`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JostFile {
    pub k_max: f64,
    pub n_k: usize,
    pub f_re: Vec<f64>,
    pub f_im: Vec<f64>,
    pub s_re: Vec<f64>,
    pub s_im: Vec<f64>,
    pub bound_states: Vec<BoundPair>,
}

/// Options shared by the Jost-side operations.
#[derive(Debug, Clone)]
pub struct JostOptions {
    /// |f(k)| below this at a real k ≠ 0 makes S(k) ill-defined.
    pub eps_zero: f64,
    /// |f(0)| below this selects the exceptional Levinson branch.
    pub tol_f0: f64,
    /// Bisection tolerance for bound-state roots.
    pub tol_root: f64,
    /// κ-step for the five-point stencil defining ḟ(ik_j). Kept large
    /// enough that exponentially small slopes (nearly-full-line states,
    /// g'(κ) ~ e^{-2κ·x_c}) stay above the quadrature noise of g.
    pub fdot_step: f64,
    /// |g'(κ_j)| below this is a degenerate (non-simple) zero.
    pub eps_slope: f64,
    /// Relative imaginary residue allowed in s_j.
    pub tol_im: f64,
    /// Allowed relative disagreement between the residue formula and the
    /// L²-normalization route before the constant is considered unreliable.
    pub tol_cross: f64,
}

impl Default for JostOptions {
    fn default() -> Self {
        JostOptions {
            eps_zero: 1e-9,
            tol_f0: 1e-6,
            tol_root: 1e-8,
            fdot_step: 1e-2,
            eps_slope: 1e-7,
            tol_im: 1e-8,
            tol_cross: 1e-2,
        }
    }
}

/// Fill `f(k)`, `f'(0,k)` and `S(k) = f(-k)/f(k)` on a symmetric k-grid.
///
/// Values at `k >= 0` are computed by quadrature of the kernel row at the
/// origin; negative k are mirrored by conjugation (the kernel is real), so
/// `f(-k) = conj f(k)` holds to round-off by construction. When `f(0)`
/// vanishes within tolerance, `S(0)` is set to its limit value `-1`.
pub fn jost_function(
    kernel: &TransformKernel,
    k_grid: &Grid,
    opts: &JostOptions,
) -> Result<JostData> {
    if !k_grid.is_symmetric() {
        return Err(Error::Domain("jost_function needs a symmetric k-grid".into()));
    }
    let nk = k_grid.n();
    let mid = nk / 2;
    let h = kernel.grid().h();

    // x-derivative rows at the origin for f'(0,k).
    let ax0 = kernel.x_derivative_row(0);
    let a00 = kernel.value(0, 0);

    let mut f = vec![Complex64::new(0.0, 0.0); nk + 1];
    let mut fp = vec![Complex64::new(0.0, 0.0); nk + 1];
    for idx in mid..=nk {
        let k = k_grid.point(idx);
        let (fk, _) = row_transform(kernel, 0, k);
        f[idx] = fk;
        let ax_int = row_transform_values(&ax0, 0.0, k, h);
        fp[idx] = Complex64::new(-a00, k) + ax_int;
        if idx > mid {
            f[nk - idx] = fk.conj();
            fp[nk - idx] = fp[idx].conj();
        }
    }
    // k = 0 row is real.
    f[mid] = Complex64::new(f[mid].re, 0.0);
    fp[mid] = Complex64::new(fp[mid].re, fp[mid].im);

    let f0_abs = f[mid].norm();
    let exceptional = f0_abs < opts.tol_f0;
    let mut s = vec![Complex64::new(0.0, 0.0); nk + 1];
    for idx in 0..=nk {
        let k = k_grid.point(idx);
        let fk = f[idx];
        if idx == mid {
            // S(0) = f(0)/f(0) = 1 in the regular case; the limit is -1
            // when f(0) = 0.
            s[mid] = if exceptional {
                Complex64::new(-1.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            };
            continue;
        }
        if fk.norm() < opts.eps_zero {
            return Err(Error::NearZeroJost {
                k,
                magnitude: fk.norm(),
            });
        }
        s[idx] = f[nk - idx] / fk;
    }

    Ok(JostData {
        k_grid: k_grid.clone(),
        f,
        fprime0: fp,
        s,
        f0_abs,
        bound_states: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Locate all zeros of `g(κ) = f(iκ)` on `(κ_min, κ_max]` by a sign-change
/// scan plus bisection, and attach the derivative data `ḟ(ik_j)`,
/// `f'(0, ik_j)` needed downstream.
///
/// `κ_max = 1.1·sqrt(max(0, -min q)) + 0.5` with q estimated from the kernel
/// diagonal; the ground state obeys `k_1² <= max|q_-|` for the Dirichlet
/// problem, and the margin covers discretization.
pub fn find_bound_states(
    mut jd: JostData,
    kernel: &TransformKernel,
    opts: &JostOptions,
) -> Result<JostData> {
    let diag = kernel.diagonal();
    let q_est = differentiate(&diag)?;
    let q_min = q_est.values().iter().fold(0.0_f64, |m, v| m.min(-2.0 * v));
    let kappa_max = 1.1 * (-q_min).max(0.0).sqrt() + 0.5;
    let kappa_min = 1e-3;
    let scan_step = 0.01;

    let g = |kappa: f64| jost_imag_axis(kernel, 0, kappa);

    let mut roots = Vec::new();
    let mut warnings = Vec::new();
    let mut prev_k = kappa_min;
    let mut prev_g = g(prev_k);
    if prev_g == 0.0 {
        warnings.push(format!("g(κ_min = {kappa_min}) = 0: root at the scan boundary"));
    }
    let steps = ((kappa_max - kappa_min) / scan_step).ceil() as usize;
    for m in 1..=steps {
        let k = (kappa_min + m as f64 * scan_step).min(kappa_max);
        let gk = g(k);
        if prev_g * gk < 0.0 {
            if m == 1 {
                warnings.push(format!(
                    "sign change in the first scan cell ({prev_k:.4}, {k:.4}): κ_min resolution suspect"
                ));
            }
            // Bisection.
            let (mut lo, mut hi) = (prev_k, k);
            let (mut glo, _ghi) = (prev_g, gk);
            while hi - lo > opts.tol_root {
                let mid = 0.5 * (lo + hi);
                let gm = g(mid);
                if glo * gm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_k = k;
        prev_g = gk;
    }

    // Merge roots closer than 10x the bisection tolerance.
    roots.dedup_by(|b, a| (*b - *a).abs() < 10.0 * opts.tol_root);

    let mut states = Vec::new();
    for &kappa in &roots {
        // Fourth-order five-point stencil: accurate for O(1)-curvature g
        // while the step stays large enough to resolve exponentially small
        // slopes against quadrature noise.
        let step = opts.fdot_step.min(0.5 * kappa);
        let gprime = (8.0 * (g(kappa + step) - g(kappa - step))
            - (g(kappa + 2.0 * step) - g(kappa - 2.0 * step)))
            / (12.0 * step);
        if gprime.abs() < opts.eps_slope {
            return Err(Error::DegenerateZero {
                kappa,
                slope: gprime.abs(),
            });
        }
        // k = iκ ⇒ dk = i dκ ⇒ ḟ(ik_j) = -i g'(κ_j).
        let fdot = Complex64::new(0.0, -gprime);
        // f'(0, iκ) = -κ - A(0,0) + ∫ A_x(0,y) e^{-κy} dy.
        let ax0 = kernel.x_derivative_row(0);
        let h = kernel.grid().h();
        let decay = (-kappa * h).exp();
        let mut w = 1.0;
        let vals: Vec<f64> = ax0
            .iter()
            .map(|&a| {
                let v = a * w;
                w *= decay;
                v
            })
            .collect();
        let fprime0 = -kappa - kernel.value(0, 0) + corrected_trapezoid(&vals, h);
        states.push(BoundState {
            k: kappa,
            fdot_re: fdot.re,
            fdot_im: fdot.im,
            fprime0,
            s: None,
        });
    }
    // Canonical order: k_1 > k_2 > ...
    states.sort_by(|a, b| b.k.partial_cmp(&a.k).unwrap());
    jd.bound_states = states;
    jd.warnings.extend(warnings);
    Ok(jd)
}

/// Fill the norming constants from the residue identity
/// `s_j = -2ik_j / (f'(0,ik_j)·ḟ(ik_j))`, cross-checked against the
/// L²-normalization route `s_j = 1/∫ f(x,ik_j)² dx`.
///
/// The residue route degenerates when `f'(0,ik_j)` nearly vanishes (states
/// whose eigenfunction is almost even about a distant well center force a
/// many-decade cancellation in the kernel quadrature). Such a disagreement
/// is surfaced as a warning and the well-conditioned L² value — a positive
/// integrand, no cancellation — is adopted.
pub fn norming_constants(kernel: &TransformKernel, mut jd: JostData, opts: &JostOptions) -> Result<JostData> {
    let grid = kernel.grid();
    let h = grid.h();
    let mut warnings = Vec::new();
    for b in &mut jd.bound_states {
        let fdot = Complex64::new(b.fdot_re, b.fdot_im);
        let s_res = Complex64::new(0.0, -2.0 * b.k) / (Complex64::new(b.fprime0, 0.0) * fdot);

        // Independent route: 1 / ∫_0^X f(x, ik_j)² dx.
        let sq: Vec<f64> = (0..=grid.n())
            .map(|i| {
                let f = jost_imag_axis(kernel, i, b.k);
                f * f
            })
            .collect();
        let s_l2 = 1.0 / corrected_trapezoid(&sq, h);
        if !(s_l2 > 0.0 && s_l2.is_finite()) {
            return Err(Error::InconsistentData(format!(
                "L² normalization at k = {} is not positive: {s_l2}",
                b.k
            )));
        }

        let im_ok = s_res.im.abs() <= opts.tol_im * s_res.norm().max(1e-300);
        let agree = (s_res.re - s_l2).abs() <= opts.tol_cross * s_l2;
        if s_res.re > 0.0 && im_ok && agree {
            b.s = Some(s_res.re);
        } else {
            warnings.push(format!(
                "norming constant at k = {:.6}: residue formula gives {:.6e} \
                 (im {:.1e}) vs L² normalization {:.6e}; f'(0,ik) = {:.3e} is \
                 cancellation-limited, adopting the L² value",
                b.k, s_res.re, s_res.im, s_l2, b.fprime0
            ));
            b.s = Some(s_l2);
        }
    }
    jd.warnings.extend(warnings);
    Ok(jd)
}

/// `|f'(0,k) f(-k) - f'(0,-k) f(k) - 2ik|` per grid point — a pure
/// diagnostic of the scheme error (the identity is exact in the continuum).
pub fn wronskian_residual(jd: &JostData) -> SampledFunction<f64> {
    let nk = jd.k_grid.n();
    let vals: Vec<f64> = (0..=nk)
        .map(|idx| {
            let k = jd.k_grid.point(idx);
            let lhs = jd.fprime0[idx] * jd.f[nk - idx] - jd.fprime0[nk - idx] * jd.f[idx];
            (lhs - Complex64::new(0.0, 2.0 * k)).norm()
        })
        .collect();
    SampledFunction::new(jd.k_grid.clone(), vals).expect("finite by construction")
}
