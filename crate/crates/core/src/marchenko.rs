//! The inversion core: solve the Marchenko equation
//! `A(x,y) + ∫_x^∞ A(x,t) F(t+y) dt = -F(x+y)` for the kernel row at every
//! x, recover the potential from the kernel diagonal, and invert the step
//! (kernel back to `F`).
//!
//! The per-row Nyström systems are nested: ordering the y-grid from the far
//! end downward, the system at `x_i` is the leading principal block of the
//! system at `x = 0`, up to the trapezoid half-weight on its own left
//! endpoint — a rank-one correction whose direction coincides with the
//! right-hand side. One unpivoted LU factorization therefore serves every
//! row (each leading block is itself a valid Marchenko operator, which is
//! what justifies skipping pivoting), and each row costs two triangular
//! solves plus a scalar rescale.

use serde::{Deserialize, Serialize};

use crate::estimates::profile_f;
use crate::forward::TransformKernel;
use crate::numerics::{corrected_trapezoid, differentiate, Grid, SampledFunction};
use crate::potential::Potential;
use crate::scattering::FFunction;
use crate::{Error, Result};

/// Options for the Marchenko solves.
#[derive(Debug, Clone)]
pub struct MarchenkoSolveOptions {
    /// Pivot / reciprocal-condition floor: smaller means singular.
    pub tol_solve: f64,
    pub regularization: Regularization,
    pub method: SolveMethod,
    /// Iteration budget for the iterative mode and the inverse steps.
    pub max_iter: usize,
    /// Convergence tolerance of the fixed-point iterations (relative).
    pub tol_fixpoint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    None,
    /// Experimental knob for noisy synthetic data; outside the exact theory.
    Tikhonov(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    /// Dense direct solve (valid for all x ≥ 0).
    Direct,
    /// Fixed-point iteration; converges only past the contraction threshold.
    Iterative,
}

impl Default for MarchenkoSolveOptions {
    fn default() -> Self {
        MarchenkoSolveOptions {
            tol_solve: 1e-12,
            regularization: Regularization::None,
            method: SolveMethod::Direct,
            max_iter: 200,
            tol_fixpoint: 1e-12,
        }
    }
}

impl MarchenkoSolveOptions {
    fn validated(&self) -> Result<()> {
        if let Regularization::Tikhonov(lambda) = self.regularization {
            if !(lambda >= 0.0) {
                return Err(Error::Domain(format!("Tikhonov λ must be >= 0, got {lambda}")));
            }
        }
        if !(self.tol_solve > 0.0) {
            return Err(Error::Domain("tol_solve must be positive".into()));
        }
        Ok(())
    }
}

/// Kernel plus solve diagnostics.
#[derive(Debug, Clone)]
pub struct MarchenkoSolution {
    pub kernel: TransformKernel,
    /// Reciprocal condition estimate of the full (x = 0) Nyström matrix.
    pub rcond: f64,
    /// Smallest pivot magnitude seen by the shared factorization.
    pub min_pivot: f64,
}

/// How the F samples line up with a potential grid `[0, X]`: same step and
/// the F grid covers `[0, 2X]`.
struct FIndexing {
    /// Index of x = 0 on the F grid.
    zero: usize,
    h: f64,
}

fn f_indexing(f: &FFunction, x_grid: &Grid) -> Result<FIndexing> {
    let fg = f.grid();
    let h = x_grid.h();
    if ((fg.h() - h) / h).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "F grid step {} does not match the x-grid step {h}",
            fg.h()
        )));
    }
    let zero = fg
        .index_of(0.0)
        .ok_or_else(|| Error::Domain("F grid must contain x = 0".into()))?;
    let need = 2.0 * x_grid.x_max();
    if fg.x_max() < need - 1e-9 {
        return Err(Error::Range(format!(
            "F must be defined up to 2X = {need}, grid ends at {}",
            fg.x_max()
        )));
    }
    Ok(FIndexing { zero, h })
}

/// Dense LU with partial pivoting for one standalone Nyström system.
fn lu_solve_pivoted(mut m: Vec<Vec<f64>>, mut b: Vec<f64>, tol: f64, x: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() < tol * scale {
            return Err(Error::Singular {
                x,
                rcond: m[piv][col].abs() / scale,
            });
        }
        m.swap(col, piv);
        b.swap(col, piv);
        let (top, rest) = m.split_at_mut(col + 1);
        let prow = &top[col];
        let pval = prow[col];
        for (ri, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pval;
            if f != 0.0 {
                for c in col..n {
                    row[c] -= f * prow[c];
                }
                b[col + 1 + ri] -= f * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        for r in col + 1..n {
            b[col] -= m[col][r] * b[r];
        }
        b[col] /= m[col][col];
    }
    Ok(b)
}

/// Build the Nyström matrix for the row at grid index `i` in natural order
/// (y from x_i up to X) with trapezoid weights.
fn nystrom_matrix(f: &FFunction, x_grid: &Grid, idx: &FIndexing, i: usize) -> Vec<Vec<f64>> {
    let n = x_grid.n();
    let m = n - i + 1;
    let h = idx.h;
    let mut mat = vec![vec![0.0; m]; m];
    for p in 0..m {
        for q in 0..m {
            let w = if q == 0 || q == m - 1 { 0.5 * h } else { h };
            // F(y_q + y_p) with y = x_{i+p}: F-index = zero + (i+p) + (i+q).
            let fv = f.value(idx.zero + 2 * i + p + q);
            mat[p][q] = w * fv + if p == q { 1.0 } else { 0.0 };
        }
    }
    mat
}

fn nystrom_rhs(f: &FFunction, idx: &FIndexing, i: usize, m: usize) -> Vec<f64> {
    (0..m).map(|p| -f.value(idx.zero + 2 * i + p)).collect()
}

/// Solve the Marchenko equation at a single x (a grid point): returns the
/// row `A(x, y_j)` for `y_j ∈ [x, X]`.
pub fn solve_marchenko(
    f: &FFunction,
    x_grid: &Grid,
    x: f64,
    opts: &MarchenkoSolveOptions,
) -> Result<Vec<f64>> {
    opts.validated()?;
    let idx = f_indexing(f, x_grid)?;
    let i = x_grid
        .index_of(x)
        .ok_or_else(|| Error::Domain(format!("x = {x} is not a grid point")))?;
    let n = x_grid.n();
    let m = n - i + 1;
    let rhs = nystrom_rhs(f, &idx, i, m);

    match (opts.method, opts.regularization) {
        (SolveMethod::Direct, Regularization::None) => {
            let mat = nystrom_matrix(f, x_grid, &idx, i);
            lu_solve_pivoted(mat, rhs, opts.tol_solve, x)
        }
        (SolveMethod::Direct, Regularization::Tikhonov(lambda)) => {
            let mat = nystrom_matrix(f, x_grid, &idx, i);
            // Normal equations (MᵀM + λI) a = Mᵀ b.
            let mut mtm = vec![vec![0.0; m]; m];
            let mut mtb = vec![0.0; m];
            for r in 0..m {
                for c in 0..m {
                    mtb[c] += mat[r][c] * rhs[r];
                    for d in 0..m {
                        mtm[c][d] += mat[r][c] * mat[r][d];
                    }
                }
            }
            for (d, row) in mtm.iter_mut().enumerate() {
                row[d] += lambda;
            }
            lu_solve_pivoted(mtm, mtb, opts.tol_solve, x)
        }
        (SolveMethod::Iterative, _) => {
            // Neumann iteration a <- b - W F a; contractive only past x0.
            let h = idx.h;
            let mut a = rhs.clone();
            let mut prev_update = f64::INFINITY;
            let mut grew = 0;
            let scale = rhs.iter().fold(0.0_f64, |s, v| s.max(v.abs())).max(1e-300);
            for _ in 0..opts.max_iter {
                let mut next = rhs.clone();
                for (p, out) in next.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (q, aq) in a.iter().enumerate() {
                        let w = if q == 0 || q == m - 1 { 0.5 * h } else { h };
                        acc += w * f.value(idx.zero + 2 * i + p + q) * aq;
                    }
                    *out -= acc;
                }
                let update = next
                    .iter()
                    .zip(&a)
                    .fold(0.0_f64, |u, (x1, x0)| u.max((x1 - x0).abs()));
                a = next;
                if update > prev_update {
                    grew += 1;
                    if grew >= 2 {
                        return Err(Error::ContractionViolation { x });
                    }
                } else {
                    grew = 0;
                }
                if update <= opts.tol_fixpoint * scale {
                    return Ok(a);
                }
                prev_update = update;
            }
            Err(Error::Divergence {
                iterations: opts.max_iter,
                residual: prev_update,
            })
        }
    }
}

/// Solve the Marchenko equation at every grid x and assemble the triangular
/// kernel. With the default direct method this shares one factorization
/// across all rows (see the module docs); other modes loop over rows.
pub fn solve_marchenko_all(
    f: &FFunction,
    x_grid: &Grid,
    opts: &MarchenkoSolveOptions,
) -> Result<MarchenkoSolution> {
    opts.validated()?;
    let idx = f_indexing(f, x_grid)?;
    let n = x_grid.n();

    if !(opts.method == SolveMethod::Direct && opts.regularization == Regularization::None) {
        let mut rows = Vec::with_capacity(n + 1);
        for i in 0..=n {
            rows.push(solve_marchenko(f, x_grid, x_grid.point(i), opts)?);
        }
        return Ok(MarchenkoSolution {
            kernel: TransformKernel::from_rows(x_grid.clone(), rows)?,
            rcond: f64::NAN,
            min_pivot: f64::NAN,
        });
    }

    let h = idx.h;
    let dim = n + 1;
    // Reversed ordering y_p = X - p·h; the matrix at x = 0 in this ordering.
    // M[p][q] = δ_pq + w_q F(y_p + y_q), F-index of y_p + y_q = zero + 2n - p - q.
    let mut lu = vec![0.0; dim * dim];
    for p in 0..dim {
        for q in 0..dim {
            let w = if q == 0 || q == dim - 1 { 0.5 * h } else { h };
            let fv = f.value(idx.zero + 2 * n - p - q);
            lu[p * dim + q] = w * fv + if p == q { 1.0 } else { 0.0 };
        }
    }
    let norm_inf = (0..dim)
        .map(|p| lu[p * dim..(p + 1) * dim].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);

    // Unpivoted LU in place; every leading block is (a rank-one tweak of) a
    // Marchenko operator, nonsingular for admissible data.
    let mut min_pivot = f64::INFINITY;
    for k in 0..dim {
        let pivot = lu[k * dim + k];
        min_pivot = min_pivot.min(pivot.abs());
        if pivot.abs() < 1e-300 {
            return Err(Error::Singular {
                x: x_grid.x_max() - k as f64 * h,
                rcond: 0.0,
            });
        }
        let (head, tail) = lu.split_at_mut((k + 1) * dim);
        let prow = &head[k * dim..k * dim + dim];
        for r in 0..dim - k - 1 {
            let row = &mut tail[r * dim..r * dim + dim];
            let fct = row[k] / pivot;
            if fct != 0.0 {
                row[k] = fct;
                for c in k + 1..dim {
                    row[c] -= fct * prow[c];
                }
            } else {
                row[k] = 0.0;
            }
        }
    }

    let solve_block = |m: usize, b: &mut [f64]| {
        // Ly = b (unit diagonal), then Ux = y, on the leading m×m block.
        for r in 1..m {
            let mut acc = b[r];
            for c in 0..r {
                acc -= lu[r * dim + c] * b[c];
            }
            b[r] = acc;
        }
        for r in (0..m).rev() {
            let mut acc = b[r];
            for c in r + 1..m {
                acc -= lu[r * dim + c] * b[c];
            }
            b[r] = acc / lu[r * dim + r];
        }
    };

    // Reciprocal-condition estimate of the full matrix from one solve;
    // Theorem-level solvability means a healthy value on admissible data.
    let rcond = {
        let mut e = vec![1.0; dim];
        solve_block(dim, &mut e);
        let inv_norm = e.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        1.0 / (norm_inf * inv_norm).max(1e-300)
    };
    if rcond < opts.tol_solve {
        return Err(Error::Singular { x: 0.0, rcond });
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    rows.resize_with(dim, Vec::new);
    let mut b = vec![0.0; dim];
    for i in 0..=n {
        let m = n - i + 1;
        // b_p = -F(x_i + y_p) with y_p = X - p·h: F-index = zero + i + n - p.
        for (p, slot) in b[..m].iter_mut().enumerate() {
            *slot = -f.value(idx.zero + i + n - p);
        }
        solve_block(m, &mut b[..m]);
        // Rank-one weight fix: the block's last column should carry h/2, not
        // h; the correction direction equals -b, so the solution rescales.
        let a_last = b[m - 1];
        let denom = 1.0 + 0.5 * h * a_last;
        if denom.abs() < opts.tol_solve {
            return Err(Error::Singular {
                x: x_grid.point(i),
                rcond: denom.abs(),
            });
        }
        let gamma = if i == 0 { 1.0 } else { 1.0 / denom };
        // Un-reverse into natural row order y ∈ [x_i, X].
        let row: Vec<f64> = (0..m).map(|j| gamma * b[m - 1 - j]).collect();
        rows[i] = row;
    }

    Ok(MarchenkoSolution {
        kernel: TransformKernel::from_rows(x_grid.clone(), rows)?,
        rcond,
        min_pivot,
    })
}

/// `q(x) = -2 dA(x,x)/dx` from the kernel diagonal. Endpoint values use
/// one-sided stencils and are one order less accurate.
pub fn recover_potential(kernel: &TransformKernel) -> Result<Potential> {
    let diag = kernel.diagonal();
    let ddiag = differentiate(&diag)?;
    let q: Vec<f64> = ddiag.values().iter().map(|v| -2.0 * v).collect();
    Potential::new(
        SampledFunction::new(kernel.grid().clone(), q)?,
        None,
        "recovered (endpoint samples one-sided)",
    )
}

/// Smallest grid `x0 >= 0` with `σ_{1F}(2 x0) < 1` (0 when the data is
/// already contractive at the origin).
pub fn contraction_threshold(f: &FFunction) -> Result<f64> {
    let profile = profile_f(f)?;
    let sigma_1f = profile.sigma_1f();
    let grid = sigma_1f.grid();
    // σ_1F lives on [0, 2X]; x0 candidates are half the even points.
    let half_n = grid.n() / 2;
    for i in 0..=half_n {
        if sigma_1f.value(2 * i) < 1.0 {
            return Ok(i as f64 * grid.h());
        }
    }
    Err(Error::Domain(
        "σ_1F(2x) >= 1 on the whole grid: no contraction threshold".into(),
    ))
}

/// Smallest grid x with `σ_{1A}(x) = ∫_x^X |A(x,s)| ds < bound`; the row L¹
/// norm bounds the inverse-step operator, so this is the kernel-side
/// contraction threshold.
pub fn kernel_contraction_threshold(kernel: &TransformKernel, bound: f64) -> Option<f64> {
    let grid = kernel.grid();
    let h = grid.h();
    for i in 0..=grid.n() {
        let abs_row: Vec<f64> = kernel.row(i).iter().map(|v| v.abs()).collect();
        if corrected_trapezoid(&abs_row, h) < bound {
            return Some(grid.point(i));
        }
    }
    None
}


/// Plain composite trapezoid (the same rule the Nystrom matrix uses).
fn plain_trapezoid(vals: &[f64], h: f64) -> f64 {
    if vals.len() < 2 {
        return 0.0;
    }
    let inner: f64 = vals[1..vals.len() - 1].iter().sum();
    h * (0.5 * (vals[0] + vals[vals.len() - 1]) + inner)
}

/// Result of the inverse step at one x: `F` on `[2x, 2X]` plus the
/// fixed-point update history.
#[derive(Debug, Clone)]
pub struct KernelToF {
    pub f_tail: FFunction,
    pub update_norms: Vec<f64>,
}

/// Invert the kernel row at `x` into `F` on `[2x, 2X]` by the contraction
/// iteration `F ← -A(x, z-x) - ∫_z^{2X} A(x, v+x-z) F(v) dv`.
///
/// Requires the row L¹ norm below 1 (the operator bound); the update norms
/// are returned so the geometric rate can be audited.
pub fn kernel_to_f(
    kernel: &TransformKernel,
    x: f64,
    opts: &MarchenkoSolveOptions,
) -> Result<KernelToF> {
    let grid = kernel.grid();
    let i = grid
        .index_of(x)
        .ok_or_else(|| Error::Domain(format!("x = {x} is not a grid point")))?;
    let h = grid.h();
    let abs_row: Vec<f64> = kernel.row(i).iter().map(|v| v.abs()).collect();
    let sigma_1a = corrected_trapezoid(&abs_row, h);
    if sigma_1a >= 1.0 {
        return Err(Error::Domain(format!(
            "row L¹ norm {sigma_1a:.3} >= 1 at x = {x}: below the contraction threshold"
        )));
    }

    let x_max = grid.x_max();
    let nz = ((2.0 * x_max - 2.0 * x) / h).round() as usize;
    let z0 = 2.0 * x;
    let first: Vec<f64> = (0..=nz)
        .map(|zi| -kernel.eval(i, z0 + zi as f64 * h - x))
        .collect();
    let mut fv = first.clone();
    let scale = fv.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut update_norms = Vec::new();
    let mut prev_update = f64::INFINITY;
    let mut grew = 0;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let mut next = vec![0.0; nz + 1];
        let mut update = 0.0_f64;
        for zi in 0..=nz {
            let z = z0 + zi as f64 * h;
            // ∫_z^{2X} A(x, v+x-z) F(v) dv.
            let vals: Vec<f64> = (zi..=nz)
                .map(|vi| {
                    let v = z0 + vi as f64 * h;
                    kernel.eval(i, v + x - z) * fv[vi]
                })
                .collect();
            // Plain trapezoid mirrors the Nystrom discretization, so the
            // inverse step undoes a solved kernel near-exactly.
            let integral = plain_trapezoid(&vals, h);
            let val = first[zi] - integral;
            update = update.max((val - fv[zi]).abs());
            next[zi] = val;
        }
        fv = next;
        update_norms.push(update);
        if update > prev_update {
            grew += 1;
            if grew >= 2 {
                return Err(Error::ContractionViolation { x });
            }
        } else {
            grew = 0;
        }
        if update <= opts.tol_fixpoint * scale {
            converged = true;
            break;
        }
        prev_update = update;
    }
    if !converged {
        return Err(Error::Divergence {
            iterations: opts.max_iter,
            residual: *update_norms.last().unwrap_or(&f64::NAN),
        });
    }
    let tail_grid = Grid::new(z0, 2.0 * x_max, nz)?;
    Ok(KernelToF {
        f_tail: FFunction::from_samples(SampledFunction::new(tail_grid, fv)?),
        update_norms,
    })
}

/// Extend a known tail `F` on `[2x0, 2X]` down to `(0, 2x0)` by the Volterra
/// iteration with finite integration region (right-hand side assembled from
/// the kernel row at `x` and the tail), then concatenate.
pub fn extend_f_inward(
    kernel: &TransformKernel,
    f_tail: &FFunction,
    x: f64,
    opts: &MarchenkoSolveOptions,
) -> Result<FFunction> {
    let grid = kernel.grid();
    let h = grid.h();
    let i = grid
        .index_of(x)
        .ok_or_else(|| Error::Domain(format!("x = {x} is not a grid point")))?;
    let tg = f_tail.grid();
    if ((tg.h() - h) / h).abs() > 1e-9 {
        return Err(Error::Domain("tail grid step mismatch".into()));
    }
    let z_split = tg.x_min();
    if z_split < 2.0 * x - 1e-12 {
        return Err(Error::Domain(format!(
            "tail must start at 2x0 >= 2x (got {z_split} < {})",
            2.0 * x
        )));
    }
    let nz = (z_split / h).round() as usize; // points 0..nz on (0, 2x0]
    if nz == 0 {
        return Ok(f_tail.clone());
    }
    let n_tail = tg.n();

    // Right-hand side: -A(x, z-x) - ∫_{2x0}^{2X} A(x, v+x-z) F_tail(v) dv.
    let mut rhs = vec![0.0; nz]; // z-indices 0..nz-1 (z < 2x0)
    for (zi, slot) in rhs.iter_mut().enumerate() {
        let z = zi as f64 * h;
        let vals: Vec<f64> = (0..=n_tail)
            .map(|vi| {
                let v = z_split + vi as f64 * h;
                kernel.eval(i, v + x - z) * f_tail.value(vi)
            })
            .collect();
        *slot = -kernel.eval(i, z - x) - plain_trapezoid(&vals, h);
    }

    // Volterra iteration on z ∈ (0, 2x0): F ← RHS - ∫_z^{2x0} A(x,v+x-z) F(v) dv,
    // where the integral runs over the unknown part plus the boundary point.
    let mut fv = rhs.clone();
    let scale = fv
        .iter()
        .chain(f_tail.samples().values())
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        .max(1e-300);
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let mut update = 0.0_f64;
        let mut next = vec![0.0; nz];
        for zi in 0..nz {
            let z = zi as f64 * h;
            let vals: Vec<f64> = (zi..=nz)
                .map(|vi| {
                    let v = vi as f64 * h;
                    let fval = if vi < nz { fv[vi] } else { f_tail.value(0) };
                    kernel.eval(i, v + x - z) * fval
                })
                .collect();
            let integral = plain_trapezoid(&vals, h);
            let val = rhs[zi] - integral;
            update = update.max((val - fv[zi]).abs());
            next[zi] = val;
        }
        fv = next;
        if update <= opts.tol_fixpoint * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::IterationCap(format!(
            "Volterra extension did not reach tolerance in {} sweeps",
            opts.max_iter
        )));
    }

    // Concatenate (0, 2x0) with the tail into F on [0, 2X].
    let total_n = nz + n_tail;
    let out_grid = Grid::new(0.0, tg.x_max(), total_n)?;
    let mut values = Vec::with_capacity(total_n + 1);
    values.extend_from_slice(&fv);
    values.extend_from_slice(f_tail.samples().values());
    Ok(FFunction::from_samples(SampledFunction::new(
        out_grid, values,
    )?))
}
