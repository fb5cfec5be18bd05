//! Scattering data `{S(k), k_j, s_j}`, validation of its structural
//! identities, synthesis of the `F`-function, and the inverse extraction of
//! the data from `F`.
//!
//! The Fourier part of `F` is computed on a truncated k-grid. Slowly
//! decaying S-matrices (`1 - S ~ -Q/(ik)` whenever the total charge Q is
//! nonzero) would leave O(1/(K|x|)) truncation ripple, so `build_f` fits the
//! two leading tail coefficients from the data and transforms them in closed
//! form, integrating only the remainder numerically. The split is an exact
//! identity for any fitted values; the fit quality only controls how small
//! the truncated remainder is, and the edge residuals are reported.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::forward::{BoundPair, JostData};
use crate::numerics::{fourier_integral, Grid, SampledFunction};
use crate::report::{CheckItem, Report, Verdict};
use crate::{Error, Result};

/// The data triple on a symmetric k-grid, with bound states in canonical
/// order `k_1 > k_2 > ...`.
#[derive(Debug, Clone)]
pub struct ScatteringData {
    k_grid: Grid,
    s_values: Vec<Complex64>,
    bound_states: Vec<BoundPair>,
    index_kappa: Option<i64>,
}

impl ScatteringData {
    pub fn new(
        k_grid: Grid,
        s_values: Vec<Complex64>,
        mut bound_states: Vec<BoundPair>,
    ) -> Result<Self> {
        if !k_grid.is_symmetric() {
            return Err(Error::Domain(
                "scattering data needs a symmetric k-grid".into(),
            ));
        }
        if s_values.len() != k_grid.len() {
            return Err(Error::Domain(format!(
                "expected {} S(k) samples, got {}",
                k_grid.len(),
                s_values.len()
            )));
        }
        bound_states.sort_by(|a, b| b.k.partial_cmp(&a.k).unwrap());
        for pair in &bound_states {
            if !(pair.k > 0.0 && pair.s > 0.0) {
                return Err(Error::InconsistentData(format!(
                    "bound-state pair (k={}, s={}) must be positive",
                    pair.k, pair.s
                )));
            }
        }
        for w in bound_states.windows(2) {
            if (w[0].k - w[1].k).abs() < 1e-12 * (1.0 + w[0].k) {
                return Err(Error::InconsistentData(format!(
                    "tied bound states at k = {} (merge upstream)",
                    w[0].k
                )));
            }
        }
        Ok(ScatteringData {
            k_grid,
            s_values,
            bound_states,
            index_kappa: None,
        })
    }

    /// Free data: `S ≡ 1`, no bound states.
    pub fn free(k_grid: Grid) -> Result<Self> {
        let n = k_grid.len();
        ScatteringData::new(k_grid, vec![Complex64::new(1.0, 0.0); n], Vec::new())
    }

    /// Extract the data triple from a computed Jost dataset (norming
    /// constants must be filled).
    pub fn from_jost(jd: &JostData) -> Result<Self> {
        let mut pairs = Vec::new();
        for b in jd.bound_states() {
            let s = b.s.ok_or_else(|| {
                Error::InconsistentData("norming constants not yet computed".into())
            })?;
            pairs.push(BoundPair { k: b.k, s });
        }
        ScatteringData::new(jd.k_grid().clone(), jd.s_matrix().to_vec(), pairs)
    }

    pub fn k_grid(&self) -> &Grid {
        &self.k_grid
    }

    pub fn s_values(&self) -> &[Complex64] {
        &self.s_values
    }

    pub fn bound_states(&self) -> &[BoundPair] {
        &self.bound_states
    }

    pub fn index_kappa(&self) -> Option<i64> {
        self.index_kappa
    }

    pub fn set_index_kappa(&mut self, kappa: Option<i64>) {
        self.index_kappa = kappa;
    }

    pub fn to_file(&self) -> ScatteringFile {
        ScatteringFile {
            k_max: self.k_grid.x_max(),
            n_k: self.k_grid.n(),
            s_re: self.s_values.iter().map(|v| v.re).collect(),
            s_im: self.s_values.iter().map(|v| v.im).collect(),
            bound_states: self.bound_states.clone(),
            kappa: self.index_kappa,
        }
    }
}

/// JSON schema: `{k_max, n_k, s_re, s_im, bound_states, kappa?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringFile {
    pub k_max: f64,
    pub n_k: usize,
    pub s_re: Vec<f64>,
    pub s_im: Vec<f64>,
    pub bound_states: Vec<BoundPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<i64>,
}

impl ScatteringFile {
    pub fn into_data(self) -> Result<ScatteringData> {
        if self.s_re.len() != self.s_im.len() {
            return Err(Error::Domain("s_re/s_im length mismatch".into()));
        }
        let grid = Grid::symmetric(self.k_max, self.n_k)?;
        let s = self
            .s_re
            .iter()
            .zip(&self.s_im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        let mut data = ScatteringData::new(grid, s, self.bound_states)?;
        data.index_kappa = self.kappa;
        Ok(data)
    }
}

/// Tolerances for the condition-A/B checks.
#[derive(Debug, Clone)]
pub struct ValidateOptions {
    /// max ||S(k)| - 1| allowed.
    pub tol_unimodular: f64,
    /// max |S(-k) - conj S(k)| allowed.
    pub tol_conj: f64,
    /// |S(±K) - 1| allowed (truncated stand-in for S(∞) = 1).
    pub tol_s_infinity: f64,
    /// Distance from the raw winding to the nearest integer.
    pub tol_winding: f64,
    /// Largest per-step phase increment accepted by the unwinding.
    pub max_phase_step: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            tol_unimodular: 1e-6,
            tol_conj: 1e-10,
            tol_s_infinity: 0.1,
            tol_winding: 0.2,
            max_phase_step: 0.9 * std::f64::consts::PI,
        }
    }
}

/// Validation outcome: the per-check report plus the computed index.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub report: Report,
    /// Rounded winding number of S over the grid, when resolvable.
    pub kappa: Option<i64>,
    /// Raw (un-rounded) winding.
    pub kappa_raw: Option<f64>,
    /// Whether the data sits on the exceptional branch (f(0) = 0, S(0) = -1).
    pub exceptional_branch: bool,
}

impl ValidationReport {
    pub fn condition_a_passed(&self) -> bool {
        self.report
            .items
            .iter()
            .filter(|i| i.name.starts_with("A:"))
            .all(|i| i.verdict != Verdict::Fail)
    }

    pub fn condition_b_passed(&self) -> bool {
        self.report
            .items
            .iter()
            .filter(|i| i.name.starts_with("B:"))
            .all(|i| i.verdict != Verdict::Fail)
    }
}

/// Winding number of S over the grid by per-step phase accumulation.
/// Fails with the offending step when the phase is unresolved.
fn winding_number(s: &[Complex64], max_step: f64) -> std::result::Result<f64, f64> {
    let mut total = 0.0;
    for w in s.windows(2) {
        let mut d = w[1].arg() - w[0].arg();
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        if d.abs() > max_step {
            return Err(d);
        }
        total += d;
    }
    Ok(total / (2.0 * std::f64::consts::PI))
}

/// Check conditions A (unitarity/symmetry identities, positive ordered
/// pairs) and B (the index is a nonpositive integer matching the Levinson
/// count). Always returns a report; callers decide what is fatal.
pub fn validate(sd: &ScatteringData, opts: &ValidateOptions) -> ValidationReport {
    let mut report = Report::new();
    let s = &sd.s_values;
    let nk = sd.k_grid.n();
    let mid = nk / 2;

    let max_unimod = s
        .iter()
        .map(|v| (v.norm() - 1.0).abs())
        .fold(0.0_f64, f64::max);
    report.push(CheckItem::le(
        "A:unimodularity",
        max_unimod,
        opts.tol_unimodular,
    ));

    let max_conj = (0..=nk)
        .map(|i| (s[nk - i] - s[i].conj()).norm())
        .fold(0.0_f64, f64::max);
    report.push(CheckItem::le(
        "A:conjugate-symmetry",
        max_conj,
        opts.tol_conj,
    ));

    let edge = (s[0] - 1.0).norm().max((s[nk] - 1.0).norm());
    report.push(CheckItem::le("A:s-at-infinity", edge, opts.tol_s_infinity));

    let pairs_ok = sd.bound_states.iter().all(|p| p.k > 0.0 && p.s > 0.0)
        && sd.bound_states.windows(2).all(|w| w[0].k > w[1].k);
    report.push(CheckItem::new(
        "A:bound-pairs-positive-ordered",
        if pairs_ok { 0.0 } else { 1.0 },
        Some(0.5),
        if pairs_ok { Verdict::Pass } else { Verdict::Fail },
    ));

    // Branch detection from S(0): condition A forces S(0) = ±1.
    let s0 = s[mid];
    let exceptional = (s0 + 1.0).norm() < (s0 - 1.0).norm();
    let s0_dist = (s0 - if exceptional { -1.0 } else { 1.0 }).norm();
    report.push(
        CheckItem::le("A:s-at-zero-is-pm-one", s0_dist, 0.1).with_note(if exceptional {
            "S(0) ≈ -1: exceptional branch (f(0) = 0)"
        } else {
            "S(0) ≈ +1: regular branch"
        }),
    );

    // Condition B: winding number.
    let (kappa_raw, kappa) = match winding_number(s, opts.max_phase_step) {
        Ok(raw) => {
            let rounded = raw.round();
            let dist = (raw - rounded).abs();
            report.push(
                CheckItem::le("B:winding-near-integer", dist, opts.tol_winding)
                    .with_note(format!("raw winding {raw:.6}")),
            );
            (Some(raw), Some(rounded as i64))
        }
        Err(step) => {
            report.push(
                CheckItem::new(
                    "B:winding-near-integer",
                    step.abs(),
                    Some(opts.max_phase_step),
                    Verdict::Fail,
                )
                .with_note("phase step unresolved: refine dk"),
            );
            (None, None)
        }
    };

    if let Some(k) = kappa {
        report.push(CheckItem::new(
            "B:index-nonpositive",
            k as f64,
            Some(0.0),
            if k <= 0 { Verdict::Pass } else { Verdict::Fail },
        ));
        let j = sd.bound_states.len() as i64;
        let expected = if exceptional { -2 * j - 1 } else { -2 * j };
        report.push(
            CheckItem::new(
                "B:levinson",
                k as f64,
                Some(expected as f64),
                if k == expected {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
            )
            .with_note(format!(
                "J = {j}, branch {}",
                if exceptional { "κ = -2J-1" } else { "κ = -2J" }
            )),
        );
    }

    ValidationReport {
        report,
        kappa,
        kappa_raw,
        exceptional_branch: exceptional,
    }
}

/// `F(x)` on a grid spanning negative and positive x, split into the
/// Fourier part and the bound-state part when the synthesis is known.
/// Sample values at x = 0 store the right limit `F(0+)`.
#[derive(Debug, Clone)]
pub struct FFunction {
    values: SampledFunction<f64>,
    parts: Option<FParts>,
}

/// Synthesis split `F = F_s + F_d` plus the known jump of `F_s` at x = 0.
#[derive(Debug, Clone)]
pub struct FParts {
    pub f_s: Vec<f64>,
    pub f_d: Vec<f64>,
    pub jump0: f64,
}

impl FFunction {
    pub fn new(values: SampledFunction<f64>, parts: Option<FParts>) -> Result<Self> {
        if let Some(p) = &parts {
            if p.f_s.len() != values.values().len() || p.f_d.len() != values.values().len() {
                return Err(Error::Domain("F split length mismatch".into()));
            }
            let scale = values.max_abs().max(1.0);
            for (i, v) in values.values().iter().enumerate() {
                if (v - (p.f_s[i] + p.f_d[i])).abs() > 1e-12 * scale {
                    return Err(Error::InconsistentData(format!(
                        "F != F_s + F_d at index {i}"
                    )));
                }
            }
        }
        Ok(FFunction { values, parts })
    }

    /// Plain samples with no split metadata (closed-form inputs, recovered F̂).
    pub fn from_samples(values: SampledFunction<f64>) -> Self {
        FFunction {
            values,
            parts: None,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }

    pub fn samples(&self) -> &SampledFunction<f64> {
        &self.values
    }

    pub fn parts(&self) -> Option<&FParts> {
        self.parts.as_ref()
    }

    /// Jump of F at x = 0 (`F(0+) - F(0-)`); zero when unknown.
    pub fn jump0(&self) -> f64 {
        self.parts.as_ref().map(|p| p.jump0).unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.max_abs()
    }

    /// max |F| over the half-line part x >= 0 (the Marchenko-relevant
    /// scale; bound-state exponentials blow up toward negative x).
    pub fn max_abs_half(&self) -> f64 {
        let start = self.zero_index().unwrap_or(0);
        self.values.values()[start..]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Grid index of x = 0, when the grid crosses zero.
    pub fn zero_index(&self) -> Option<usize> {
        self.grid().index_of(0.0)
    }

    /// Value by absolute grid index.
    pub fn value(&self, i: usize) -> f64 {
        self.values.value(i)
    }

    pub fn to_file(&self) -> FFile {
        FFile {
            x_min: self.grid().x_min(),
            x_max: self.grid().x_max(),
            n: self.grid().n(),
            values: self.values.values().to_vec(),
            f_s: self.parts.as_ref().map(|p| p.f_s.clone()),
            f_d: self.parts.as_ref().map(|p| p.f_d.clone()),
            jump0: self.parts.as_ref().map(|p| p.jump0),
        }
    }
}

/// JSON schema: `{x_min, x_max, n, values, f_s?, f_d?, jump0?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FFile {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump0: Option<f64>,
}

impl FFile {
    pub fn into_f(self) -> Result<FFunction> {
        let grid = Grid::new(self.x_min, self.x_max, self.n)?;
        let values = SampledFunction::new(grid, self.values)?;
        let parts = match (self.f_s, self.f_d) {
            (Some(f_s), Some(f_d)) => Some(FParts {
                f_s,
                f_d,
                jump0: self.jump0.unwrap_or(0.0),
            }),
            _ => None,
        };
        FFunction::new(values, parts)
    }
}

/// Options for the F synthesis.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub validate: ValidateOptions,
    /// Pole softening of the analytic tail terms (both subtractions).
    pub mu_tail: f64,
    /// Fraction of the k-range used for the tail-coefficient fit.
    pub tail_window: f64,
    /// Relative imaginary residue allowed in the Fourier part.
    pub tol_im: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            validate: ValidateOptions::default(),
            mu_tail: 1.0,
            tail_window: 0.2,
            tol_im: 1e-8,
        }
    }
}

/// Diagnostics of one synthesis run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisInfo {
    /// Fitted leading tail coefficient: `1 - S(k) ≈ i a1 / k` (a1 ≈ charge).
    pub a1: f64,
    /// Fitted second coefficient: real even `a2 / k²` term.
    pub a2: f64,
    /// |1 - S| at the grid edge before subtraction.
    pub edge_raw: f64,
    /// Remainder at the grid edge after the tail subtraction.
    pub edge_residual: f64,
    /// Largest imaginary residue of the Fourier part, relative.
    pub max_im_rel: f64,
}

/// Synthesize `F(x) = (1/2π)∫[1-S]e^{ikx}dk + Σ s_j e^{-k_j x}` on
/// `out_grid`. Condition A must hold; the oscillation must be resolved for
/// every grid x.
pub fn build_f(
    sd: &ScatteringData,
    out_grid: &Grid,
    opts: &BuildOptions,
) -> Result<(FFunction, SynthesisInfo)> {
    let validation = validate(sd, &opts.validate);
    if !validation.condition_a_passed() {
        return Err(Error::Validation(format!(
            "condition A fails:\n{}",
            validation.report.render_table()
        )));
    }
    let dk = sd.k_grid.h();
    let x_reach = out_grid.x_min().abs().max(out_grid.x_max().abs());
    if x_reach * dk > 1.0 {
        return Err(Error::Resolution {
            x: x_reach,
            dk,
            product: x_reach * dk,
        });
    }

    let nk = sd.k_grid.n();
    let g: Vec<Complex64> = sd.s_values.iter().map(|s| 1.0 - s).collect();

    // Fit the leading tail coefficients over the outer window, one extra
    // basis term per parity so the next-order tail does not bias them:
    // Im g ≈ a1/k + a3/k³ (odd), Re g ≈ a2/k² + a4/k⁴ (even).
    let k_max = sd.k_grid.x_max();
    let window_lo = (1.0 - opts.tail_window) * k_max;
    let mut m_odd = [[0.0_f64; 2]; 2];
    let mut r_odd = [0.0_f64; 2];
    let mut m_even = [[0.0_f64; 2]; 2];
    let mut r_even = [0.0_f64; 2];
    for (i, k) in sd.k_grid.points().enumerate() {
        if k.abs() >= window_lo {
            let (w1, w3) = (1.0 / k, 1.0 / (k * k * k));
            m_odd[0][0] += w1 * w1;
            m_odd[0][1] += w1 * w3;
            m_odd[1][1] += w3 * w3;
            r_odd[0] += g[i].im * w1;
            r_odd[1] += g[i].im * w3;
            let (v2, v4) = (w1 * w1, w1 * w3);
            m_even[0][0] += v2 * v2;
            m_even[0][1] += v2 * v4;
            m_even[1][1] += v4 * v4;
            r_even[0] += g[i].re * v2;
            r_even[1] += g[i].re * v4;
        }
    }
    let solve2 = |m: [[f64; 2]; 2], r: [f64; 2]| -> f64 {
        let det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
        if det.abs() < 1e-300 {
            0.0
        } else {
            (r[0] * m[1][1] - r[1] * m[0][1]) / det
        }
    };
    let a1 = solve2(m_odd, r_odd);
    let a2 = solve2(m_even, r_even);
    let mu = opts.mu_tail;
    let r2 = a2 - a1 * mu;

    // Remainder h = g - t - u with t = i a1/(k + iμ), u = r2/(k² + μ²);
    // their transforms are added back in closed form below.
    let remainder: Vec<Complex64> = sd
        .k_grid
        .points()
        .enumerate()
        .map(|(i, k)| {
            let t = Complex64::new(0.0, a1) / Complex64::new(k, mu);
            let u = Complex64::new(r2 / (k * k + mu * mu), 0.0);
            g[i] - t - u
        })
        .collect();
    let edge_raw = g[0].norm().max(g[nk].norm());
    let edge_residual = remainder[0].norm().max(remainder[nk].norm());
    let remainder = SampledFunction::new(sd.k_grid.clone(), remainder)?;

    let mut f_s = Vec::with_capacity(out_grid.len());
    let mut max_im = 0.0_f64;
    let mut max_re = 0.0_f64;
    for x in out_grid.points() {
        let num = fourier_integral(&remainder, x)?;
        max_im = max_im.max(num.im.abs());
        max_re = max_re.max(num.re.abs());
        // (1/2π)∫ t e^{ikx} dk = a1 e^{μx} for x < 0, 0 for x > 0 (right
        // limit at the jump); (1/2π)∫ u e^{ikx} dk = (r2/2μ) e^{-μ|x|}.
        let t_part = if x < 0.0 { a1 * (mu * x).exp() } else { 0.0 };
        let u_part = r2 / (2.0 * mu) * (-mu * x.abs()).exp();
        f_s.push(num.re + t_part + u_part);
    }
    let max_im_rel = if max_re > 0.0 { max_im / max_re } else { 0.0 };
    if max_im_rel > opts.tol_im {
        return Err(Error::Synthesis(format!(
            "imaginary residue of F_s is {max_im_rel:.3e} (tol {:.1e})",
            opts.tol_im
        )));
    }

    let f_d: Vec<f64> = out_grid
        .points()
        .map(|x| {
            sd.bound_states
                .iter()
                .map(|p| p.s * (-p.k * x).exp())
                .sum()
        })
        .collect();
    let values: Vec<f64> = f_s.iter().zip(&f_d).map(|(a, b)| a + b).collect();
    let f = FFunction::new(
        SampledFunction::new(out_grid.clone(), values)?,
        Some(FParts {
            f_s,
            f_d,
            jump0: -a1,
        }),
    )?;
    Ok((
        f,
        SynthesisInfo {
            a1,
            a2,
            edge_raw,
            edge_residual,
            max_im_rel,
        },
    ))
}

/// Options for the data-recovery direction.
#[derive(Debug, Clone)]
pub struct RecoverOptions {
    /// Largest exponential-sum model order tried.
    pub max_order: usize,
    /// Relative residual target for order selection.
    pub tol_select: f64,
    /// Relative residual above which the fit is rejected outright.
    pub tol_fit: f64,
    /// Target sample count in the Prony window.
    pub window_samples: usize,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        RecoverOptions {
            max_order: 8,
            tol_select: 1e-8,
            tol_fit: 1e-4,
            window_samples: 120,
        }
    }
}

/// Diagnostics of a recovery run.
#[derive(Debug, Clone)]
pub struct RecoveryInfo {
    pub order: usize,
    pub fit_residual_rel: f64,
}

/// Recover `{S(k), k_j, s_j}` from `F`: fit the negative-x tail by a sum of
/// exponentials (Prony + Gauss-Newton refinement), subtract to get `F_s`,
/// and invert the Fourier transform for `1 - S(k)`.
pub fn recover_scattering(
    f: &FFunction,
    k_grid: &Grid,
    opts: &RecoverOptions,
) -> Result<(ScatteringData, RecoveryInfo)> {
    let grid = f.grid();
    if grid.x_min() > -1.0 {
        return Err(Error::Domain(format!(
            "recovery needs F on sufficiently negative x (x_min = {})",
            grid.x_min()
        )));
    }
    if !k_grid.is_symmetric() {
        return Err(Error::Domain("recovery needs a symmetric k-grid".into()));
    }
    if k_grid.x_max() * grid.h() > 1.0 {
        return Err(Error::Resolution {
            x: k_grid.x_max(),
            dk: grid.h(),
            product: k_grid.x_max() * grid.h(),
        });
    }

    // Prony window: the most negative half of the negative range.
    let x_hi = grid.x_min() / 2.0;
    let hi_idx = ((x_hi - grid.x_min()) / grid.h()).floor() as usize;
    let stride = (hi_idx / opts.window_samples).max(1);
    let samples: Vec<(f64, f64)> = (0..=hi_idx)
        .step_by(stride)
        .map(|i| (grid.point(i), f.value(i)))
        .collect();
    let global_scale = f.max_abs();
    let (pairs, residual, order) = fit_exponential_sum(&samples, global_scale, opts)?;

    // F_s = F - F_d on the full grid.
    let f_d: Vec<f64> = grid
        .points()
        .map(|x| pairs.iter().map(|p| p.s * (-p.k * x).exp()).sum::<f64>())
        .collect();
    let f_s: Vec<f64> = f
        .samples()
        .values()
        .iter()
        .zip(&f_d)
        .map(|(v, d)| v - d)
        .collect();

    // 1 - S(k) = ∫ F_s e^{-ikx} dx, split at the known x = 0 jump.
    let zero_idx = grid.index_of(0.0).ok_or_else(|| {
        Error::Domain("F grid must contain x = 0 for the inverse transform".into())
    })?;
    let jump0 = f.jump0();
    let h = grid.h();
    let nk = k_grid.n();
    let mid = nk / 2;
    let mut s_vals = vec![Complex64::new(0.0, 0.0); nk + 1];
    let mut left = f_s[..=zero_idx].to_vec();
    *left.last_mut().unwrap() -= jump0; // left limit at the jump
    let right = &f_s[zero_idx..];
    for idx in mid..=nk {
        let k = k_grid.point(idx);
        let int_left = transform_segment(&left, grid.x_min(), -k, h);
        let int_right = transform_segment(right, 0.0, -k, h);
        let one_minus_s = int_left + int_right;
        s_vals[idx] = 1.0 - one_minus_s;
        if idx > mid {
            s_vals[nk - idx] = s_vals[idx].conj();
        }
    }
    s_vals[mid] = Complex64::new(s_vals[mid].re, 0.0);

    let mut data = ScatteringData::new(k_grid.clone(), s_vals, pairs)?;
    let validation = validate(&data, &ValidateOptions::default());
    data.index_kappa = validation.kappa;
    Ok((
        data,
        RecoveryInfo {
            order,
            fit_residual_rel: residual,
        },
    ))
}

/// `∫ v(x) e^{ikx} dx` over one uniformly sampled segment (Filon cell rule).
fn transform_segment(vals: &[f64], x0: f64, k: f64, h: f64) -> Complex64 {
    crate::numerics::filon_transform(vals, x0, k, h)
}

/// Prony on uniformly spaced samples with model-order selection (smallest
/// order whose residual clears the target), then Gauss-Newton refinement.
///
/// Residuals are measured relative to the global F scale: a window holding
/// only synthesis noise (no growing exponentials) then selects J = 0 rather
/// than chasing the noise.
fn fit_exponential_sum(
    samples: &[(f64, f64)],
    global_scale: f64,
    opts: &RecoverOptions,
) -> Result<(Vec<BoundPair>, f64, usize)> {
    let scale = samples.iter().map(|s| s.1.abs()).fold(0.0_f64, f64::max);
    if scale == 0.0 || global_scale == 0.0 {
        return Ok((Vec::new(), 0.0, 0));
    }
    let m = samples.len();
    let delta = samples[1].0 - samples[0].0;
    let x0 = samples[0].0;
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();

    // Residuals per candidate order. The primary rule takes the smallest
    // order below the selection target; when the data floor sits above the
    // target (computed rather than synthetic S), fall back to parsimony:
    // the smallest order within a fixed factor of the best achievable
    // residual, so noise is never fitted by spurious exponentials.
    let mut fits: Vec<(usize, Vec<BoundPair>, f64)> = Vec::new();
    for order in 0..=opts.max_order.min(m / 2 - 1) {
        if let Some((pairs, residual)) = try_order(&y, x0, delta, order) {
            let rel = residual / global_scale;
            if rel < opts.tol_select {
                return Ok((pairs, rel, order));
            }
            fits.push((order, pairs, rel));
        }
    }
    let min_rel = fits
        .iter()
        .map(|f| f.2)
        .fold(f64::INFINITY, f64::min);
    let accept = (3.0 * min_rel).max(opts.tol_select);
    for (order, pairs, rel) in fits {
        if rel <= accept {
            return if rel < opts.tol_fit {
                Ok((pairs, rel, order))
            } else {
                Err(Error::Fit {
                    residual: rel,
                    threshold: opts.tol_fit,
                })
            };
        }
    }
    Err(Error::Fit {
        residual: min_rel,
        threshold: opts.tol_fit,
    })
}

/// One Prony fit at fixed order, refined by Gauss-Newton; returns pairs in
/// canonical order and the max-norm residual on the window.
fn try_order(y: &[f64], x0: f64, delta: f64, order: usize) -> Option<(Vec<BoundPair>, f64)> {
    let m = y.len();
    if order == 0 {
        let residual = y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        return Some((Vec::new(), residual));
    }
    // Linear-prediction least squares: y[n] = -Σ c_j y[n-j].
    let rows = m - order;
    let mut ata = vec![vec![0.0; order]; order];
    let mut atb = vec![0.0; order];
    for r in 0..rows {
        for j in 0..order {
            let vj = y[order + r - j - 1];
            atb[j] -= vj * y[order + r];
            for l in 0..order {
                ata[j][l] += vj * y[order + r - l - 1];
            }
        }
    }
    let coeffs = solve_dense(&mut ata, &atb)?;
    // Roots of z^J + c_0 z^{J-1} + ... + c_{J-1}.
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    poly.extend(coeffs.iter().map(|&c| Complex64::new(c, 0.0)));
    let roots = polynomial_roots(&poly);

    // Keep real decaying roots: ρ = e^{-kΔ} ∈ (0,1).
    let mut ks = Vec::new();
    for r in roots {
        if r.im.abs() < 1e-6 * (1.0 + r.re.abs()) && r.re > 1e-12 && r.re < 1.0 - 1e-12 {
            ks.push(-r.re.ln() / delta);
        }
    }
    if ks.is_empty() {
        return None;
    }
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ks.dedup_by(|b, a| (*b - *a).abs() < 1e-10 * (1.0 + *a));

    // Amplitudes at the window center for conditioning.
    let xc = x0 + 0.5 * delta * (m as f64 - 1.0);
    let xs: Vec<f64> = (0..m).map(|i| x0 + i as f64 * delta - xc).collect();
    let mut amps = ls_amplitudes(&xs, y, &ks)?;

    gauss_newton(&xs, y, &mut ks, &mut amps);

    let mut pairs = Vec::new();
    for (k, a) in ks.iter().zip(&amps) {
        let s = a * (*k * xc).exp();
        if !(*k > 0.0 && s > 0.0 && k.is_finite() && s.is_finite()) {
            return None;
        }
        pairs.push(BoundPair { k: *k, s });
    }
    pairs.sort_by(|a, b| b.k.partial_cmp(&a.k).unwrap());

    let residual = xs
        .iter()
        .zip(y)
        .map(|(&x, &v)| {
            let model: f64 = ks.iter().zip(&amps).map(|(k, a)| a * (-k * x).exp()).sum();
            (v - model).abs()
        })
        .fold(0.0_f64, f64::max);
    Some((pairs, residual))
}

fn ls_amplitudes(xs: &[f64], y: &[f64], ks: &[f64]) -> Option<Vec<f64>> {
    let j = ks.len();
    let mut ata = vec![vec![0.0; j]; j];
    let mut atb = vec![0.0; j];
    for (i, &x) in xs.iter().enumerate() {
        let basis: Vec<f64> = ks.iter().map(|k| (-k * x).exp()).collect();
        for a in 0..j {
            atb[a] += basis[a] * y[i];
            for b in 0..j {
                ata[a][b] += basis[a] * basis[b];
            }
        }
    }
    solve_dense(&mut ata, &atb)
}

/// Gauss-Newton on `(amplitudes, rates)` with step halving; amplitudes are
/// parametrized at the window center so the Jacobian stays well scaled.
fn gauss_newton(xs: &[f64], y: &[f64], ks: &mut [f64], amps: &mut [f64]) {
    let j = ks.len();
    let m = xs.len();
    for _ in 0..40 {
        let mut jt_j = vec![vec![0.0; 2 * j]; 2 * j];
        let mut jt_r = vec![0.0; 2 * j];
        let mut rss = 0.0;
        let mut grad = vec![0.0; 2 * j];
        for i in 0..m {
            let x = xs[i];
            let mut model = 0.0;
            for l in 0..j {
                let e = (-ks[l] * x).exp();
                model += amps[l] * e;
                grad[l] = -e; // ∂r/∂a_l
                grad[j + l] = amps[l] * x * e; // ∂r/∂k_l
            }
            let r = y[i] - model;
            rss += r * r;
            for a in 0..2 * j {
                jt_r[a] += grad[a] * r;
                for b in 0..2 * j {
                    jt_j[a][b] += grad[a] * grad[b];
                }
            }
        }
        let damp = 1e-12 * (1.0 + rss);
        for a in 0..2 * j {
            jt_j[a][a] += damp;
        }
        let delta = match solve_dense(&mut jt_j, &jt_r) {
            Some(d) => d,
            None => return,
        };
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let mut new_ks: Vec<f64> = (0..j).map(|l| ks[l] - step * delta[j + l]).collect();
            let new_amps: Vec<f64> = (0..j).map(|l| amps[l] - step * delta[l]).collect();
            if new_ks.iter().all(|k| *k > 0.0) {
                let new_rss: f64 = xs
                    .iter()
                    .zip(y)
                    .map(|(&x, &v)| {
                        let model: f64 = new_ks
                            .iter()
                            .zip(&new_amps)
                            .map(|(k, a)| a * (-k * x).exp())
                            .sum();
                        (v - model) * (v - model)
                    })
                    .sum();
                if new_rss <= rss {
                    ks.swap_with_slice(&mut new_ks);
                    amps.copy_from_slice(&new_amps);
                    improved = new_rss < rss * (1.0 - 1e-14);
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            return;
        }
    }
}

/// Gaussian elimination with partial pivoting for the small dense systems
/// in the fitting paths. Consumes the matrix.
fn solve_dense(a: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        x.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        for r in col + 1..n {
            let v = x[r];
            x[col] -= a[col][r] * v;
        }
        x[col] /= a[col][col];
    }
    Some(x)
}

/// Durand-Kerner root finder for small monic complex polynomials
/// (coefficients passed highest power first).
fn polynomial_roots(poly: &[Complex64]) -> Vec<Complex64> {
    let n = poly.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![-poly[1] / poly[0]];
    }
    let eval = |z: Complex64| {
        let mut acc = poly[0];
        for c in &poly[1..] {
            acc = acc * z + c;
        }
        acc
    };
    // Deterministic start: points on a slightly rotated circle.
    let mut roots: Vec<Complex64> = (0..n)
        .map(|i| {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / n as f64 + 0.35;
            Complex64::new(0.7 * angle.cos(), 0.7 * angle.sin())
        })
        .collect();
    for _ in 0..300 {
        let mut moved = 0.0_f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            moved = moved.max(delta.norm());
        }
        if moved < 1e-14 {
            break;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k_grid() -> Grid {
        Grid::symmetric(60.0, 12000).unwrap()
    }

    fn out_grid() -> Grid {
        // [-12, 30] at h = 0.01
        Grid::new(-12.0, 30.0, 4200).unwrap()
    }

    /// Closed-form data of the forward sech² problem:
    /// S(k) = -(1-ik)/(1+ik), no bound states, S(0) = -1.
    fn sech_closed_data() -> ScatteringData {
        let s: Vec<Complex64> = k_grid()
            .points()
            .map(|k| {
                let ik = Complex64::new(0.0, k);
                -(1.0 - ik) / (1.0 + ik)
            })
            .collect();
        ScatteringData::new(k_grid(), s, Vec::new()).unwrap()
    }

    #[test]
    fn validate_free_data() {
        let sd = ScatteringData::free(k_grid()).unwrap();
        let v = validate(&sd, &ValidateOptions::default());
        assert!(v.report.all_passed(), "{}", v.report.render_table());
        assert_eq!(v.kappa, Some(0));
        assert!(!v.exceptional_branch);
    }

    #[test]
    fn validate_sech_closed_form() {
        // Exceptional branch: winding -1 = -2J-1 with J = 0.
        let v = validate(&sech_closed_data(), &ValidateOptions::default());
        assert_eq!(v.kappa, Some(-1), "raw {:?}", v.kappa_raw);
        assert!(v.exceptional_branch);
        assert!(v.condition_b_passed(), "{}", v.report.render_table());
        assert!(v.condition_a_passed(), "{}", v.report.render_table());
    }

    #[test]
    fn validate_flags_broken_conjugate_symmetry() {
        let mut s: Vec<Complex64> = k_grid()
            .points()
            .map(|k| {
                let ik = Complex64::new(0.0, k);
                -(1.0 - ik) / (1.0 + ik)
            })
            .collect();
        // Flip the imaginary part on one side only.
        let nk = s.len();
        for v in s[..nk / 3].iter_mut() {
            *v = v.conj();
        }
        let sd = ScatteringData::new(k_grid(), s, Vec::new()).unwrap();
        let v = validate(&sd, &ValidateOptions::default());
        assert!(!v.condition_a_passed());
        assert_eq!(
            v.report.get("A:conjugate-symmetry").unwrap().verdict,
            Verdict::Fail
        );
    }

    #[test]
    fn winding_is_stable_under_k_refinement() {
        for n in [12000usize, 24000] {
            let grid = Grid::symmetric(60.0, n).unwrap();
            let s: Vec<Complex64> = grid
                .points()
                .map(|k| {
                    let ik = Complex64::new(0.0, k);
                    -(1.0 - ik) / (1.0 + ik)
                })
                .collect();
            let sd = ScatteringData::new(grid, s, Vec::new()).unwrap();
            let v = validate(&sd, &ValidateOptions::default());
            assert_eq!(v.kappa, Some(-1), "n = {n}");
        }
    }

    #[test]
    fn build_f_free_data_is_zero() {
        let sd = ScatteringData::free(k_grid()).unwrap();
        let (f, info) = build_f(&sd, &out_grid(), &BuildOptions::default()).unwrap();
        assert!(f.max_abs() < 1e-13, "max |F| = {:e}", f.max_abs());
        assert_eq!(info.a1, 0.0);
    }

    #[test]
    fn build_f_pure_bound_state() {
        // S ≡ 1 with one pair (k=1, s=2): F(x) = 2e^{-x} exactly.
        let sd = ScatteringData::new(
            k_grid(),
            vec![Complex64::new(1.0, 0.0); k_grid().len()],
            vec![BoundPair { k: 1.0, s: 2.0 }],
        )
        .unwrap();
        let (f, _) = build_f(&sd, &out_grid(), &BuildOptions::default()).unwrap();
        let mut worst = 0.0_f64;
        for (i, x) in f.grid().points().enumerate() {
            worst = worst.max((f.value(i) - 2.0 * (-x).exp()).abs());
        }
        assert!(worst < 1e-12, "max error {worst:e}");
        let parts = f.parts().unwrap();
        assert!(parts.f_s.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn build_f_sech_closed_form() {
        // Forward sech² data: F_s(x) = 2e^{-x} for x > 0, 0 for x < 0; the
        // tail subtraction makes the remainder integrand vanish identically,
        // so the synthesis is near machine precision.
        let (f, info) =
            build_f(&sech_closed_data(), &out_grid(), &BuildOptions::default()).unwrap();
        assert!((info.a1 + 2.0).abs() < 1e-6, "a1 = {}", info.a1);
        assert!(
            info.edge_residual < 1e-7,
            "edge residual {:e}",
            info.edge_residual
        );
        let mut worst = 0.0_f64;
        for (i, x) in f.grid().points().enumerate() {
            let exact = if x > 0.0 {
                2.0 * (-x).exp()
            } else if x < 0.0 {
                0.0
            } else {
                2.0 // right limit stored at the jump
            };
            worst = worst.max((f.value(i) - exact).abs());
        }
        assert!(worst < 1e-6, "max error {worst:e}");
        assert!((f.jump0() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn build_f_additive_in_bound_states() {
        let p1 = BoundPair { k: 1.0, s: 2.0 };
        let p2 = BoundPair { k: 0.6, s: 0.7 };
        let free = vec![Complex64::new(1.0, 0.0); k_grid().len()];
        let make = |pairs: Vec<BoundPair>| {
            let sd = ScatteringData::new(k_grid(), free.clone(), pairs).unwrap();
            build_f(&sd, &out_grid(), &BuildOptions::default())
                .unwrap()
                .0
        };
        let f1 = make(vec![p1]);
        let f2 = make(vec![p2]);
        let f12 = make(vec![p1, p2]);
        for i in 0..f12.grid().len() {
            let sum = f1.parts().unwrap().f_d[i] + f2.parts().unwrap().f_d[i];
            assert_eq!(f12.parts().unwrap().f_d[i], sum);
        }
    }

    #[test]
    fn recover_zero_f() {
        let f = FFunction::from_samples(SampledFunction::from_fn(out_grid(), |_| 0.0).unwrap());
        let (sd, info) = recover_scattering(&f, &k_grid(), &RecoverOptions::default()).unwrap();
        assert_eq!(info.order, 0);
        assert!(sd.bound_states().is_empty());
        assert!(sd.s_values().iter().all(|s| (s - 1.0).norm() < 1e-12));
    }

    #[test]
    fn recover_single_exponential() {
        let f = FFunction::from_samples(
            SampledFunction::from_fn(out_grid(), |x| 2.0 * (-x).exp()).unwrap(),
        );
        let (sd, info) = recover_scattering(&f, &k_grid(), &RecoverOptions::default()).unwrap();
        assert_eq!(sd.bound_states().len(), 1, "info {info:?}");
        let p = sd.bound_states()[0];
        assert!((p.k - 1.0).abs() < 1e-6, "k = {}", p.k);
        assert!((p.s - 2.0).abs() < 1e-6, "s = {}", p.s);
        // S should be 1 up to the truncation of the x-range.
        let worst = sd
            .s_values()
            .iter()
            .map(|s| (s - 1.0).norm())
            .fold(0.0_f64, f64::max);
        assert!(worst < 1e-4, "max |S-1| = {worst:e}");
    }

    #[test]
    fn roundtrip_data_with_bound_state_and_smooth_s() {
        // S(k) = ((k+i)/(k-i))² with one pair (k=1, s=5): admissible shape
        // (unimodular, Hermitian, winding -2 = -2J).
        let s: Vec<Complex64> = k_grid()
            .points()
            .map(|k| {
                let num = Complex64::new(k, 1.0);
                let den = Complex64::new(k, -1.0);
                (num / den).powi(2)
            })
            .collect();
        let sd = ScatteringData::new(k_grid(), s, vec![BoundPair { k: 1.0, s: 5.0 }]).unwrap();
        let v = validate(&sd, &ValidateOptions::default());
        assert_eq!(v.kappa, Some(-2));
        assert!(v.condition_b_passed(), "{}", v.report.render_table());

        let (f, _) = build_f(&sd, &out_grid(), &BuildOptions::default()).unwrap();
        let (back, info) = recover_scattering(&f, &k_grid(), &RecoverOptions::default()).unwrap();
        assert_eq!(back.bound_states().len(), 1, "info {info:?}");
        let p = back.bound_states()[0];
        assert!((p.k - 1.0).abs() < 1e-4, "k = {}", p.k);
        assert!((p.s - 5.0).abs() / 5.0 < 1e-4, "s = {}", p.s);
        let worst = back
            .s_values()
            .iter()
            .zip(sd.s_values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        assert!(worst < 1e-3, "max |S - Ŝ| = {worst:e}");
    }

    #[test]
    fn scattering_file_roundtrip() {
        let sd = ScatteringData::new(
            k_grid(),
            vec![Complex64::new(1.0, 0.0); k_grid().len()],
            vec![BoundPair { k: 1.0, s: 2.0 }],
        )
        .unwrap();
        let text = serde_json::to_string(&sd.to_file()).unwrap();
        let back: ScatteringFile = serde_json::from_str(&text).unwrap();
        let back = back.into_data().unwrap();
        assert_eq!(back.s_values(), sd.s_values());
        assert_eq!(back.bound_states()[0].k, 1.0);
    }

    #[test]
    fn rejects_bad_bound_states() {
        let free = vec![Complex64::new(1.0, 0.0); k_grid().len()];
        assert!(ScatteringData::new(
            k_grid(),
            free.clone(),
            vec![BoundPair { k: -1.0, s: 2.0 }]
        )
        .is_err());
        assert!(ScatteringData::new(
            k_grid(),
            free,
            vec![BoundPair { k: 1.0, s: 2.0 }, BoundPair { k: 1.0, s: 3.0 }]
        )
        .is_err());
    }

    #[test]
    fn polynomial_roots_quadratic() {
        // z² - 3z + 2 = 0 -> roots 1, 2.
        let poly = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-3.0, 0.0),
            Complex64::new(2.0, 0.0),
        ];
        let mut roots: Vec<f64> = polynomial_roots(&poly).iter().map(|r| r.re).collect();
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((roots[0] - 1.0).abs() < 1e-10);
        assert!((roots[1] - 2.0).abs() < 1e-10);
    }
}
