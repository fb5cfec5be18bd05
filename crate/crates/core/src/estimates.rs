//! σ-profile envelopes of the data and the kernel, the two-sided inequality
//! suite connecting them, and the characterization diagnostics: decay-class
//! membership of `F`, compact-support tests, and the square-integrability
//! conditions on the Jost side.
//!
//! Every "∈ L¹ / L²" verdict on a truncated grid uses the shared
//! tail-exponent fit; reports carry the fitted exponent so the verdicts can
//! be audited rather than trusted.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::forward::{JostData, TransformKernel};
use crate::numerics::{differentiate, tail_integrals, Grid, SampledFunction};
use crate::potential::tail_decay_verdict_with_cutoff;
use crate::report::{CheckItem, Report, Verdict};
use crate::scattering::FFunction;
use crate::{Error, Result};

/// Decay-exponent cutoffs for the verdicts: integrands already carrying the
/// x-weight must fall faster than x⁻², plain ones faster than x^(-1.2), and
/// L² tails in k faster than k^(-1/2).
const WEIGHTED_CUTOFF: f64 = -2.0;
const PLAIN_CUTOFF: f64 = -1.2;
const L2_CUTOFF: f64 = -0.5;

/// Relative margin added to the support radius before testing the tail.
const SUPPORT_DELTA: f64 = 0.05;

/// Denominator floor (relative to its max) for the inequality ratios.
/// Tail regions where the profiles sink into synthesis noise would
/// otherwise dominate the fitted constants.
const RATIO_FLOOR: f64 = 1e-6;

/// A numerator above this (relative to its max) over a floored denominator
/// is reported as an inequality-violation candidate.
const CANDIDATE_FLOOR: f64 = 1e-3;

/// Data-side profiles on `[0, 2X]`: running envelope of `F`, its tail
/// integral, and the tail integral of `|F'|`.
#[derive(Debug, Clone)]
pub struct FProfile {
    sigma_f: SampledFunction<f64>,
    sigma_1f: SampledFunction<f64>,
    sigma_2f: SampledFunction<f64>,
}

impl FProfile {
    /// `σ_F(x) = sup_{y>=x} |F(y)|`.
    pub fn sigma_f(&self) -> &SampledFunction<f64> {
        &self.sigma_f
    }

    /// `σ_{1F}(x) = ∫_x^{2X} σ_F`.
    pub fn sigma_1f(&self) -> &SampledFunction<f64> {
        &self.sigma_1f
    }

    /// `σ_{2F}(x) = ∫_x^{2X} |F'|`.
    pub fn sigma_2f(&self) -> &SampledFunction<f64> {
        &self.sigma_2f
    }
}

/// Restrict F to `[0, x_max]` (its grid may extend to negative x).
fn restrict_to_half(f: &FFunction) -> Result<SampledFunction<f64>> {
    let grid = f.grid();
    let zero = grid
        .index_of(0.0)
        .ok_or_else(|| Error::Domain("F grid must contain x = 0".into()))?;
    let n = grid.n() - zero;
    let half = Grid::new(0.0, grid.x_max(), n)?;
    SampledFunction::new(half, f.samples().values()[zero..].to_vec())
}

/// Compute the three data-side profiles from `F` on `[0, 2X]`.
pub fn profile_f(f: &FFunction) -> Result<FProfile> {
    let half = restrict_to_half(f)?;
    let grid = half.grid().clone();
    let n = grid.len();

    // Running suprema from the right.
    let mut sigma_f = vec![0.0; n];
    let mut running = 0.0_f64;
    for i in (0..n).rev() {
        running = running.max(half.value(i).abs());
        sigma_f[i] = running;
    }
    let sigma_1f = tail_integrals(&sigma_f, grid.h())
        .into_iter()
        .map(|v| v.max(0.0))
        .collect::<Vec<_>>();
    let df = differentiate(&half)?;
    let abs_df: Vec<f64> = df.values().iter().map(|v| v.abs()).collect();
    let sigma_2f = tail_integrals(&abs_df, grid.h())
        .into_iter()
        .map(|v| v.max(0.0))
        .collect::<Vec<_>>();

    Ok(FProfile {
        sigma_f: SampledFunction::new(grid.clone(), sigma_f)?,
        sigma_1f: SampledFunction::new(grid.clone(), sigma_1f)?,
        sigma_2f: SampledFunction::new(grid, sigma_2f)?,
    })
}

/// Kernel-side profiles on `[0, X]`: row envelopes, row L¹ norms, and the
/// L¹ norms of both difference-quotient rows.
#[derive(Debug, Clone)]
pub struct KernelProfile {
    sigma_a: SampledFunction<f64>,
    sigma_1a: SampledFunction<f64>,
    norm_ax_1: SampledFunction<f64>,
    norm_ay_1: SampledFunction<f64>,
}

impl KernelProfile {
    /// `σ_A(x) = sup_{y>=x} |A(x,y)|`.
    pub fn sigma_a(&self) -> &SampledFunction<f64> {
        &self.sigma_a
    }

    /// `σ_{1A}(x) = ∫_x^X |A(x,s)| ds`.
    pub fn sigma_1a(&self) -> &SampledFunction<f64> {
        &self.sigma_1a
    }

    /// `‖A_x(x,·)‖_1`.
    pub fn norm_ax_1(&self) -> &SampledFunction<f64> {
        &self.norm_ax_1
    }

    /// `‖A_y(x,·)‖_1`.
    pub fn norm_ay_1(&self) -> &SampledFunction<f64> {
        &self.norm_ay_1
    }
}

pub fn profile_a(kernel: &TransformKernel) -> Result<KernelProfile> {
    let grid = kernel.grid().clone();
    let h = grid.h();
    let n = grid.n();
    let mut sigma_a = Vec::with_capacity(n + 1);
    let mut sigma_1a = Vec::with_capacity(n + 1);
    let mut norm_ax = Vec::with_capacity(n + 1);
    let mut norm_ay = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let row = kernel.row(i);
        sigma_a.push(row.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        let abs_row: Vec<f64> = row.iter().map(|v| v.abs()).collect();
        sigma_1a.push(crate::numerics::corrected_trapezoid(&abs_row, h).max(0.0));

        // A_y along the row.
        let mut ay = vec![0.0; row.len()];
        crate::forward::slopes(row, h, &mut ay);
        let ay_abs: Vec<f64> = ay.iter().map(|v| v.abs()).collect();
        norm_ay.push(crate::numerics::corrected_trapezoid(&ay_abs, h).max(0.0));

        let ax_abs: Vec<f64> = kernel
            .x_derivative_row(i)
            .iter()
            .map(|v| v.abs())
            .collect();
        norm_ax.push(crate::numerics::corrected_trapezoid(&ax_abs, h).max(0.0));
    }
    Ok(KernelProfile {
        sigma_a: SampledFunction::new(grid.clone(), sigma_a)?,
        sigma_1a: SampledFunction::new(grid.clone(), sigma_1a)?,
        norm_ax_1: SampledFunction::new(grid.clone(), norm_ax)?,
        norm_ay_1: SampledFunction::new(grid, norm_ay)?,
    })
}

/// Both profile halves plus the contraction threshold they were fitted past.
#[derive(Debug, Clone)]
pub struct EstimateProfile {
    pub f: FProfile,
    pub a: KernelProfile,
    pub x0: f64,
}

/// Fitted constants of the inequality suite.
#[derive(Debug, Clone)]
pub struct Theorem21Report {
    pub report: Report,
    /// name -> fitted c* (max ratio over grid x >= x0).
    pub constants: BTreeMap<String, f64>,
    /// Grid points skipped because the denominator was below the floor.
    pub excluded: usize,
}

/// Fit the constants of the six two-sided inequalities on grid points
/// `x >= x0`: the kernel side against the data side at `2x`, and the two
/// reverse bounds. Ratios at denominators below the floor are excluded (and
/// counted); if such a point carries a non-negligible numerator it is
/// reported as a violation candidate.
pub fn check_theorem_2_1(ep: &EstimateProfile) -> Result<Theorem21Report> {
    let x_grid = ep.a.sigma_a.grid();
    let f_grid = ep.f.sigma_f.grid();
    let h = x_grid.h();
    if ((f_grid.h() - h) / h).abs() > 1e-9 {
        return Err(Error::Domain("profile grids must share the step".into()));
    }
    if f_grid.x_max() < 2.0 * x_grid.x_max() - 1e-9 {
        return Err(Error::Range("data profile must reach 2X".into()));
    }
    let i0 = (ep.x0 / h).ceil() as usize;
    let n = x_grid.n();

    let f_at_2x = |sf: &SampledFunction<f64>, i: usize| sf.value(2 * i);
    let mut report = Report::new();
    let mut constants = BTreeMap::new();
    let mut excluded_total = 0usize;

    let mut fit = |name: &str, num: Box<dyn Fn(usize) -> f64>, den: Box<dyn Fn(usize) -> f64>| {
        let mut den_max = 0.0_f64;
        for i in i0..=n {
            den_max = den_max.max(den(i));
        }
        let floor = RATIO_FLOOR * den_max.max(1e-300);
        let mut c_star = 0.0_f64;
        let mut excluded = 0usize;
        let mut candidate = None;
        let mut num_max = 0.0_f64;
        for i in i0..=n {
            num_max = num_max.max(num(i));
        }
        for i in i0..=n {
            let d = den(i);
            let v = num(i);
            if d <= floor {
                excluded += 1;
                if v > CANDIDATE_FLOOR * num_max.max(1e-300) {
                    candidate = Some(i);
                }
                continue;
            }
            c_star = c_star.max(v / d);
        }
        excluded_total += excluded;
        let verdict = if c_star.is_finite() && candidate.is_none() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let mut item = CheckItem::new(name, c_star, None, verdict).with_note(format!(
            "{excluded} excluded (denominator floor)"
        ));
        if let Some(i) = candidate {
            item = item.with_note(format!(
                "violation candidate at x = {}: numerator without denominator",
                x_grid.point(i)
            ));
        }
        constants.insert(name.to_string(), c_star);
        report.push(item);
    };

    let f = &ep.f;
    let a = &ep.a;
    fit(
        "T2.1:sigma_A<=c.sigma_F(2x)",
        Box::new({
            let s = a.sigma_a.clone();
            move |i| s.value(i)
        }),
        Box::new({
            let s = f.sigma_f.clone();
            move |i| f_at_2x(&s, i)
        }),
    );
    fit(
        "T2.1:sigma_1A<=c.sigma_1F(2x)",
        Box::new({
            let s = a.sigma_1a.clone();
            move |i| s.value(i)
        }),
        Box::new({
            let s = f.sigma_1f.clone();
            move |i| f_at_2x(&s, i)
        }),
    );
    fit(
        "T2.1:norm_Ay<=c.sigma_2F(2x)",
        Box::new({
            let s = a.norm_ay_1.clone();
            move |i| s.value(i)
        }),
        Box::new({
            let s = f.sigma_2f.clone();
            move |i| f_at_2x(&s, i)
        }),
    );
    fit(
        "T2.1:norm_Ax<=c.(sigma_2F+sigma_1F.sigma_F)(2x)",
        Box::new({
            let s = a.norm_ax_1.clone();
            move |i| s.value(i)
        }),
        Box::new({
            let s2 = f.sigma_2f.clone();
            let s1 = f.sigma_1f.clone();
            let s0 = f.sigma_f.clone();
            move |i| f_at_2x(&s2, i) + f_at_2x(&s1, i) * f_at_2x(&s0, i)
        }),
    );
    fit(
        "T2.1:sigma_F(2x)<=c.sigma_A",
        Box::new({
            let s = f.sigma_f.clone();
            move |i| f_at_2x(&s, i)
        }),
        Box::new({
            let s = a.sigma_a.clone();
            move |i| s.value(i)
        }),
    );
    fit(
        "T2.1:sigma_1F(2x)<=c.sigma_1A",
        Box::new({
            let s = f.sigma_1f.clone();
            move |i| f_at_2x(&s, i)
        }),
        Box::new({
            let s = a.sigma_1a.clone();
            move |i| s.value(i)
        }),
    );
    // Converse derivative bound, reported for completeness.
    fit(
        "T2.1:sigma_2F(2x)<=c.(sigma_A.sigma_1A+norm_Ax.(1+sigma_1A))",
        Box::new({
            let s = f.sigma_2f.clone();
            move |i| f_at_2x(&s, i)
        }),
        Box::new({
            let sa = a.sigma_a.clone();
            let s1a = a.sigma_1a.clone();
            let sax = a.norm_ax_1.clone();
            move |i| sa.value(i) * s1a.value(i) + sax.value(i) * (1.0 + s1a.value(i))
        }),
    );

    Ok(Theorem21Report {
        report,
        constants,
        excluded: excluded_total,
    })
}

/// Decay-class membership of `F`: `‖F‖₁`, `‖F‖_∞`, `∫x|F'|`, `∫σ_F`, each
/// with its truncated value and a tail-decay verdict.
pub fn check_condition_c(f: &FFunction) -> Result<Report> {
    let half = restrict_to_half(f)?;
    let grid = half.grid().clone();
    let h = grid.h();
    let abs_f: Vec<f64> = half.values().iter().map(|v| v.abs()).collect();
    let norm1 = crate::numerics::corrected_trapezoid(&abs_f, h);
    let norm_inf = abs_f.iter().fold(0.0_f64, |m, v| m.max(*v));
    let df = differentiate(&half)?;
    let x_df: Vec<f64> = grid
        .points()
        .zip(df.values())
        .map(|(x, v)| x * v.abs())
        .collect();
    let xdf_int = crate::numerics::corrected_trapezoid(&x_df, h);
    let profile = profile_f(f)?;
    let sigma_f_vals = profile.sigma_f.values().to_vec();
    let sigma_f_int = crate::numerics::corrected_trapezoid(&sigma_f_vals, h);

    let mut report = Report::new();
    let push_verdict = |report: &mut Report, name: &str, value: f64, vals: &[f64], cutoff: f64| {
        let (finite, exponent) = tail_decay_verdict_with_cutoff(&grid, vals, cutoff);
        let item = CheckItem::new(
            name,
            value,
            None,
            if finite { Verdict::Pass } else { Verdict::Fail },
        )
        .with_note(match exponent {
            Some(e) => format!("fitted tail exponent {e:.3} (cutoff {cutoff})"),
            None => "tail below numerical floor".to_string(),
        });
        report.push(item);
    };
    push_verdict(&mut report, "C:F-in-L1", norm1, &abs_f, PLAIN_CUTOFF);
    report.push(CheckItem::info("C:F-in-Linf", norm_inf));
    push_verdict(&mut report, "C:xF'-in-L1", xdf_int, &x_df, WEIGHTED_CUTOFF);
    push_verdict(
        &mut report,
        "C:sigma_F-in-L1",
        sigma_f_int,
        &sigma_f_vals,
        PLAIN_CUTOFF,
    );
    Ok(report)
}

/// Compact-support diagnostic.
#[derive(Debug, Clone)]
pub struct CompactSupportReport {
    pub report: Report,
    /// max |F| on `[2a(1+δ), 2X]`.
    pub max_tail: f64,
    pub pass: bool,
    /// Data-side support radius estimate `â = ½ sup{x : |F(x)| > tol}`.
    pub a_hat: f64,
}

/// Test `F(x) = 0` for `x >= 2a` (up to `tol`), the numerically checkable
/// equivalent of the support characterization.
pub fn check_compact_support(f: &FFunction, a: f64, tol: f64) -> Result<CompactSupportReport> {
    let half = restrict_to_half(f)?;
    let grid = half.grid();
    let start = 2.0 * a * (1.0 + SUPPORT_DELTA);
    if start >= grid.x_max() {
        return Err(Error::Range(format!(
            "grid ends at {} but the support test needs x beyond {start}",
            grid.x_max()
        )));
    }
    let mut max_tail = 0.0_f64;
    let mut sup_above = 0.0_f64;
    for (i, x) in grid.points().enumerate() {
        let v = half.value(i).abs();
        if x >= start {
            max_tail = max_tail.max(v);
        }
        if v > tol {
            sup_above = x;
        }
    }
    let a_hat = 0.5 * sup_above;
    let pass = max_tail <= tol;
    let mut report = Report::new();
    report.push(CheckItem::le("D:max|F|-past-2a", max_tail, tol).with_note(format!(
        "window [{start:.3}, {:.3}]",
        grid.x_max()
    )));
    report.push(CheckItem::info("D:a-hat", a_hat));
    Ok(CompactSupportReport {
        report,
        max_tail,
        pass,
        a_hat,
    })
}

/// The three square-integrability conditions on the Jost side, evaluated on
/// the k-grid with truncated L² norms and tail-decay verdicts.
///
/// `q_charge` is the total charge `Q = ∫ q`.
pub fn check_l2_conditions(jd: &JostData, q_charge: f64) -> Result<Report> {
    let grid = jd.k_grid();
    let nk = grid.n();
    let mid = nk / 2;
    let f = jd.f();
    let s = jd.s_matrix();

    let c1: Vec<Complex64> = (0..=nk)
        .map(|i| {
            let k = grid.point(i);
            Complex64::new(0.0, 2.0 * k) * (f[i] - 1.0) + q_charge
        })
        .collect();
    let c2: Vec<Complex64> = (0..=nk)
        .map(|i| {
            let k = grid.point(i);
            (1.0 - s[i]) * k - Complex64::new(0.0, q_charge)
        })
        .collect();
    let c3: Vec<Complex64> = (0..=nk)
        .map(|i| {
            let k = grid.point(i);
            Complex64::new(k * (f[i].norm_sqr() - 1.0), 0.0)
        })
        .collect();

    let half_grid = Grid::new(0.0, grid.x_max(), mid)?;
    let mut report = Report::new();
    for (name, vals) in [
        ("L2:2ik(f-1)+Q", &c1),
        ("L2:k(1-S)-iQ", &c2),
        ("L2:k(|f|^2-1)", &c3),
    ] {
        let sq: Vec<f64> = vals.iter().map(|v| v.norm_sqr()).collect();
        let norm = crate::numerics::corrected_trapezoid(&sq, grid.h())
            .max(0.0)
            .sqrt();
        let mags: Vec<f64> = vals[mid..].iter().map(|v| v.norm()).collect();
        let (finite, exponent) = tail_decay_verdict_with_cutoff(&half_grid, &mags, L2_CUTOFF);
        report.push(
            CheckItem::new(
                name,
                norm,
                None,
                if finite { Verdict::Pass } else { Verdict::Fail },
            )
            .with_note(match exponent {
                Some(e) => format!("tail exponent {e:.3} (cutoff {L2_CUTOFF})"),
                None => "tail below numerical floor".to_string(),
            }),
        );
    }
    Ok(report)
}
