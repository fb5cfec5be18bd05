//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured value against its pinned tolerance. Default grids are
//! h = 0.01, X = 15, K = 60, dk = 0.01, x_neg = -12 unless a criterion is a
//! refinement study (those say so).
//!
//! Two sub-clauses are implemented exactly as specified although the
//! underlying closed forms contradict them; the corresponding tests fail
//! with messages stating the mathematical facts. See the test bodies of
//! `criterion_03b_*` and `criterion_05b_*`.

use std::sync::OnceLock;

use invscat_core::estimates::{
    check_l2_conditions, check_theorem_2_1, profile_a, profile_f, EstimateProfile,
};
use invscat_core::forward::{
    find_bound_states, jost_function, kernel_from_potential, norming_constants, wronskian_residual,
    JostData, JostOptions, TransformKernel, VolterraOptions,
};
use invscat_core::marchenko::{
    contraction_threshold, extend_f_inward, kernel_contraction_threshold, kernel_to_f,
    recover_potential, solve_marchenko_all, MarchenkoSolveOptions,
};
use invscat_core::numerics::{Grid, SampledFunction};
use invscat_core::potential::Potential;
use invscat_core::report::Verdict;
use invscat_core::scattering::{
    build_f, recover_scattering, validate, BuildOptions, FFunction, RecoverOptions,
    ScatteringData, ValidateOptions,
};

// ── shared machinery ────────────────────────────────────────────────────

#[derive(Clone, Copy)]
struct Cfg {
    x_max: f64,
    h: f64,
    k_max: f64,
    dk: f64,
    x_neg: f64,
}

const DEFAULTS: Cfg = Cfg {
    x_max: 15.0,
    h: 0.01,
    k_max: 60.0,
    dk: 0.01,
    x_neg: -12.0,
};

impl Cfg {
    fn x_grid(&self) -> Grid {
        Grid::new(0.0, self.x_max, (self.x_max / self.h).round() as usize).unwrap()
    }
    fn k_grid(&self) -> Grid {
        Grid::symmetric(self.k_max, (2.0 * self.k_max / self.dk).round() as usize).unwrap()
    }
    fn f_grid(&self) -> Grid {
        let n = ((2.0 * self.x_max - self.x_neg) / self.h).round() as usize;
        Grid::new(self.x_neg, 2.0 * self.x_max, n).unwrap()
    }
}

/// Everything one potential produces through the full cycle.
struct Pipeline {
    cfg: Cfg,
    potential: Potential,
    kernel_fwd: TransformKernel,
    jd: JostData,
    sd: ScatteringData,
    f: FFunction,
    kernel_inv: TransformKernel,
    q_hat: Potential,
}

fn run_pipeline(p: Potential, cfg: Cfg) -> Pipeline {
    let kernel_fwd = kernel_from_potential(&p, &VolterraOptions::default())
        .unwrap()
        .kernel;
    let jopts = JostOptions::default();
    let jd = jost_function(&kernel_fwd, &cfg.k_grid(), &jopts).unwrap();
    let jd = find_bound_states(jd, &kernel_fwd, &jopts).unwrap();
    let jd = norming_constants(&kernel_fwd, jd, &jopts).unwrap();
    let sd = ScatteringData::from_jost(&jd).unwrap();
    let (f, _) = build_f(&sd, &cfg.f_grid(), &BuildOptions::default()).unwrap();
    let sol = solve_marchenko_all(&f, &cfg.x_grid(), &MarchenkoSolveOptions::default()).unwrap();
    let q_hat = recover_potential(&sol.kernel).unwrap();
    Pipeline {
        cfg,
        potential: p,
        kernel_fwd,
        jd,
        sd,
        f,
        kernel_inv: sol.kernel,
        q_hat,
    }
}

/// Forward map only (no F synthesis): enough for the index/Levinson and
/// bound-state checks, and required for strongly charged wells whose
/// |1 - S(K)| exceeds the condition-A edge gate at K = 60.
fn run_forward(p: &Potential, cfg: Cfg) -> (TransformKernel, JostData, ScatteringData) {
    let kernel = kernel_from_potential(p, &VolterraOptions::default())
        .unwrap()
        .kernel;
    let jopts = JostOptions::default();
    let jd = jost_function(&kernel, &cfg.k_grid(), &jopts).unwrap();
    let jd = find_bound_states(jd, &kernel, &jopts).unwrap();
    let jd = norming_constants(&kernel, jd, &jopts).unwrap();
    let sd = ScatteringData::from_jost(&jd).unwrap();
    (kernel, jd, sd)
}

fn sech_potential(cfg: &Cfg) -> Potential {
    Potential::sech_well(cfg.x_grid(), 1.0).unwrap()
}

fn bump_potential(cfg: &Cfg) -> Potential {
    Potential::poly_bump(cfg.x_grid(), -3.0, 2.0).unwrap()
}

fn sech_pipeline() -> &'static Pipeline {
    static CELL: OnceLock<Pipeline> = OnceLock::new();
    CELL.get_or_init(|| run_pipeline(sech_potential(&DEFAULTS), DEFAULTS))
}

fn bump_pipeline() -> &'static Pipeline {
    static CELL: OnceLock<Pipeline> = OnceLock::new();
    CELL.get_or_init(|| run_pipeline(bump_potential(&DEFAULTS), DEFAULTS))
}

fn half_cfg() -> Cfg {
    Cfg {
        h: 0.005,
        ..DEFAULTS
    }
}

fn sech_pipeline_half() -> &'static Pipeline {
    static CELL: OnceLock<Pipeline> = OnceLock::new();
    CELL.get_or_init(|| run_pipeline(sech_potential(&half_cfg()), half_cfg()))
}

fn bump_pipeline_half() -> &'static Pipeline {
    static CELL: OnceLock<Pipeline> = OnceLock::new();
    CELL.get_or_init(|| run_pipeline(bump_potential(&half_cfg()), half_cfg()))
}

fn max_abs_interior(q: &Potential, reference: impl Fn(f64) -> f64) -> f64 {
    let grid = q.grid();
    let mut worst = 0.0_f64;
    for (i, x) in grid.points().enumerate() {
        if i == 0 || i == grid.n() {
            continue;
        }
        worst = worst.max((q.samples().value(i) - reference(x)).abs());
    }
    worst
}

fn rel_l1_error(q: &Potential, q_hat: &Potential) -> f64 {
    let h = q.grid().h();
    let diff: f64 = q
        .samples()
        .values()
        .iter()
        .zip(q_hat.samples().values())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * h;
    let norm: f64 = q.samples().values().iter().map(|v| v.abs()).sum::<f64>() * h;
    diff / norm
}

fn oracle_kernel_value(x: f64, y: f64) -> f64 {
    -2.0 * (-(x + y)).exp() / (1.0 + (-2.0 * x).exp())
}

/// The degenerate-kernel oracle dataset: F(x) = 2e^{-x} sampled in closed
/// form, solved on [0, X].
fn oracle_pair(cfg: &Cfg) -> (FFunction, TransformKernel) {
    let f = FFunction::from_samples(
        SampledFunction::from_fn(cfg.f_grid(), |x| 2.0 * (-x).exp()).unwrap(),
    );
    let sol = solve_marchenko_all(&f, &cfg.x_grid(), &MarchenkoSolveOptions::default()).unwrap();
    (f, sol.kernel)
}

// ── criteria ────────────────────────────────────────────────────────────

#[test]
fn criterion_01_zero_case() {
    let cfg = DEFAULTS;
    let p = Potential::zero(cfg.x_grid()).unwrap();
    let pl = run_pipeline(p, cfg);
    let s_dev = pl
        .sd
        .s_values()
        .iter()
        .map(|s| (s - 1.0).norm())
        .fold(0.0_f64, f64::max);
    let f_max = pl.f.max_abs();
    let a_max = pl.kernel_inv.max_abs().max(pl.kernel_fwd.max_abs());
    let q_max = pl.q_hat.samples().max_abs();
    assert!(s_dev <= 1e-12, "max|S-1| = {s_dev:e}");
    assert_eq!(pl.sd.bound_states().len(), 0);
    assert!(f_max <= 1e-12, "max|F| = {f_max:e}");
    assert!(a_max <= 1e-12, "max|A| = {a_max:e}");
    assert!(q_max <= 1e-8, "max|q_hat| = {q_max:e}");
    println!(
        "criterion 1: PASS  (|S-1| {s_dev:.1e}, |F| {f_max:.1e}, |A| {a_max:.1e}, |q| {q_max:.1e})"
    );
}

#[test]
fn criterion_02_degenerate_kernel_oracle() {
    let cfg = DEFAULTS;
    let (_, kernel) = oracle_pair(&cfg);
    let grid = cfg.x_grid();
    let mut a_err = 0.0_f64;
    for i in 0..=grid.n() {
        for j in i..=grid.n() {
            a_err = a_err
                .max((kernel.value(i, j) - oracle_kernel_value(grid.point(i), grid.point(j))).abs());
        }
    }
    assert!(a_err <= 1e-4, "max kernel error {a_err:e}");

    let q_hat = recover_potential(&kernel).unwrap();
    let q_err = max_abs_interior(&q_hat, |x| -2.0 / x.cosh().powi(2));
    assert!(q_err <= 5e-3, "interior q error {q_err:e}");
    println!("criterion 2: PASS  (|A - exact| {a_err:.2e} <= 1e-4, |q - exact| {q_err:.2e} <= 5e-3)");
}

#[test]
fn criterion_03a_forward_jost_closed_form() {
    let pl = sech_pipeline();
    let mut worst = 0.0_f64;
    for (idx, k) in pl.jd.k_grid().points().enumerate() {
        let ik = num_complex::Complex64::new(0.0, k);
        let exact = -ik / (1.0 - ik);
        worst = worst.max((pl.jd.f()[idx] - exact).norm());
    }
    assert!(worst <= 5e-3, "max |f - closed form| = {worst:e}");
    println!("criterion 3a: PASS  (pointwise Jost error {worst:.2e} <= 5e-3)");
}

#[test]
fn criterion_03b_forward_bound_state_as_specified() {
    // Stated expectation: exactly one bound state k1 = 1, s1 = 2 for
    // q = -2 sech²x. The half-line Dirichlet operator for this potential
    // has empty negative spectrum: on the imaginary axis the closed form is
    // f(iκ) = κ/(1+κ), strictly positive for κ > 0, so no bound state
    // exists and the clause cannot be satisfied by a correct solver. The
    // bound-state pair (k=1, s=2) belongs to the degenerate data
    // {S ≡ 1, (1,2)} whose F agrees with this potential's F only on x > 0.
    let pl = sech_pipeline();
    let states = pl.sd.bound_states();
    println!(
        "criterion 3b: FAIL expected — computed J = {} (correct for this operator), clause demands J = 1",
        states.len()
    );
    assert_eq!(
        states.len(),
        1,
        "no bound state exists: f(iκ) = κ/(1+κ) > 0 for all κ > 0, and the \
         independent zero-energy shooting oracle counts zero Dirichlet \
         eigenvalues; k1 = 1, s1 = 2 is unattainable from q = -2 sech²x"
    );
    assert!((states[0].k - 1.0).abs() <= 1e-4);
    assert!((states[0].s - 2.0).abs() <= 1e-3);
}

#[test]
fn criterion_04_full_roundtrip_bump() {
    let pl = bump_pipeline();
    let cfg = &pl.cfg;
    // q -> S -> F -> A -> q_hat.
    let l1 = rel_l1_error(&pl.potential, &pl.q_hat);
    assert!(l1 <= 0.02, "relative L1 error {l1:e}");

    // A -> F_hat via the inverse steps.
    let opts = MarchenkoSolveOptions::default();
    let x_rec = kernel_contraction_threshold(&pl.kernel_inv, 0.5).unwrap();
    let tail = kernel_to_f(&pl.kernel_inv, x_rec, &opts).unwrap();
    let f_hat = extend_f_inward(&pl.kernel_inv, &tail.f_tail, 0.0, &opts).unwrap();
    let zero = pl.f.zero_index().unwrap();
    let mut f_err = 0.0_f64;
    for (i, v) in f_hat.samples().values().iter().enumerate() {
        f_err = f_err.max((v - pl.f.value(zero + i)).abs());
    }
    assert!(f_err <= 1e-3, "max |F - F_hat| = {f_err:e}");

    // F -> data.
    let (sd_hat, _) = recover_scattering(&pl.f, &cfg.k_grid(), &RecoverOptions::default()).unwrap();
    let s_err = pl
        .sd
        .s_values()
        .iter()
        .zip(sd_hat.s_values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0_f64, f64::max);
    assert!(s_err <= 1e-3, "max |S - S_hat| = {s_err:e}");
    assert_eq!(sd_hat.bound_states().len(), pl.sd.bound_states().len());
    let mut pair_err = 0.0_f64;
    for (a, b) in pl.sd.bound_states().iter().zip(sd_hat.bound_states()) {
        pair_err = pair_err.max((a.k - b.k).abs()).max((a.s - b.s).abs());
    }
    assert!(pair_err <= 1e-4, "bound data error {pair_err:e}");
    println!(
        "criterion 4: PASS  (L1 {l1:.2e} <= 2e-2, |F-F̂| {f_err:.2e} <= 1e-3, |S-Ŝ| {s_err:.2e} <= 1e-3, pairs {pair_err:.2e} <= 1e-4)"
    );
}

fn condition_a_core(sd: &ScatteringData) -> (f64, f64) {
    let nk = sd.k_grid().n();
    let s = sd.s_values();
    let unimod = s
        .iter()
        .map(|v| (v.norm() - 1.0).abs())
        .fold(0.0_f64, f64::max);
    let conj = (0..=nk)
        .map(|i| (s[nk - i] - s[i].conj()).norm())
        .fold(0.0_f64, f64::max);
    (unimod, conj)
}

#[test]
fn criterion_05a_condition_a_unitarity_and_symmetry() {
    let mut worst_u = 0.0_f64;
    let mut worst_c = 0.0_f64;
    for pl in [sech_pipeline(), bump_pipeline()] {
        let (u, c) = condition_a_core(&pl.sd);
        worst_u = worst_u.max(u);
        worst_c = worst_c.max(c);
    }
    let zero = run_pipeline(Potential::zero(DEFAULTS.x_grid()).unwrap(), DEFAULTS);
    let (u, c) = condition_a_core(&zero.sd);
    worst_u = worst_u.max(u);
    worst_c = worst_c.max(c);
    assert!(worst_u <= 1e-6, "max ||S|-1| = {worst_u:e}");
    assert!(worst_c <= 1e-10, "max |S(-k)-conj S(k)| = {worst_c:e}");
    println!("criterion 5a: PASS  (||S|-1| {worst_u:.1e} <= 1e-6, conj-symmetry {worst_c:.1e} <= 1e-10)");
}

#[test]
fn criterion_05b_s_at_edge_as_specified() {
    // Stated expectation: |S(±K) - 1| <= 1e-3 on every computed S. For any
    // potential with nonzero total charge Q the identity
    // 1 - S(k) = -Q/(ik) + O(k⁻²) forces |S(±K) - 1| ≈ |Q|/K: at K = 60
    // that is 0.033 for the sech² well (Q = -2) and 0.053 for the bump
    // (Q = -3.2). The threshold is reachable only as K → ∞ (K ≳ |Q|·10³),
    // which the resolution constraint K·h <= 1 puts far outside the stated
    // default grids. The zero potential passes; charged ones cannot.
    let mut worst = 0.0_f64;
    let mut worst_name = "";
    for (name, pl) in [("sech2", sech_pipeline()), ("bump", bump_pipeline())] {
        let nk = pl.sd.k_grid().n();
        let s = pl.sd.s_values();
        let edge = (s[0] - 1.0).norm().max((s[nk] - 1.0).norm());
        if edge > worst {
            worst = edge;
            worst_name = name;
        }
    }
    println!(
        "criterion 5b: FAIL expected — max |S(±K)-1| = {worst:.3e} ({worst_name}), clause demands <= 1e-3"
    );
    assert!(
        worst <= 1e-3,
        "|S(±K) - 1| = {worst:.3e} at K = 60: the S-matrix of a potential \
         with charge Q approaches 1 only like |Q|/K, so 1e-3 is unreachable \
         at the stated default K (needs K on the order of 10³)"
    );
}

#[test]
fn criterion_06_wronskian_identity() {
    let run = |pl: &Pipeline| -> f64 {
        let res = wronskian_residual(&pl.jd);
        let mut worst = 0.0_f64;
        for (i, k) in pl.jd.k_grid().points().enumerate() {
            worst = worst.max(res.value(i) / (1.0 + k.abs()));
        }
        worst
    };
    let coarse = run(sech_pipeline());
    assert!(coarse <= 1e-2, "normalized residual {coarse:e}");
    let fine = run(sech_pipeline_half());
    let ratio = coarse / fine;
    assert!(
        ratio >= 3.5,
        "refinement ratio {ratio:.2} (coarse {coarse:e}, fine {fine:e})"
    );
    println!(
        "criterion 6: PASS  (residual/(1+|k|) {coarse:.2e} <= 1e-2, h->h/2 ratio {ratio:.2} >= 3.5)"
    );
}

#[test]
fn criterion_07_levinson_index() {
    // Independent zero-energy shooting oracle for the eigenvalue count.
    let dirichlet_count = |q: &dyn Fn(f64) -> f64| -> usize {
        let n = 300_000;
        let h = 15.0 / n as f64;
        let (mut prev, mut cur, mut nodes) = (0.0_f64, h, 0usize);
        for i in 1..n {
            let next = 2.0 * cur - prev + h * h * q(i as f64 * h) * cur;
            if (cur > 0.0) != (next > 0.0) {
                nodes += 1;
            }
            prev = cur;
            cur = next;
        }
        nodes
    };

    let check = |name: &str, jd: &JostData, sd: &ScatteringData, q: &dyn Fn(f64) -> f64| {
        let v = validate(sd, &ValidateOptions::default());
        let raw = v.kappa_raw.unwrap();
        let kappa = v.kappa.unwrap();
        assert!(
            (raw - kappa as f64).abs() <= 0.2,
            "{name}: winding {raw} not near an integer"
        );
        let j = sd.bound_states().len() as i64;
        assert_eq!(
            j as usize,
            dirichlet_count(q),
            "{name}: J disagrees with the shooting oracle"
        );
        let expected = if jd.f0_abs() < 1e-6 { -2 * j - 1 } else { -2 * j };
        assert_eq!(kappa, expected, "{name}: Levinson count");
        println!(
            "  {name}: kappa = {kappa} (raw {raw:.4}), J = {j}, |f(0)| = {:.1e}",
            jd.f0_abs()
        );
    };

    let zero_p = Potential::zero(DEFAULTS.x_grid()).unwrap();
    let (_, jd, sd) = run_forward(&zero_p, DEFAULTS);
    check("zero", &jd, &sd, &|_| 0.0);
    let sech = sech_pipeline();
    check("sech2", &sech.jd, &sech.sd, &|x| -2.0 / x.cosh().powi(2));
    let deep_p = Potential::from_fn(DEFAULTS.x_grid(), "deep well", |x| {
        -6.0 / (x - 3.0).cosh().powi(2)
    })
    .unwrap();
    let (_, jd, sd) = run_forward(&deep_p, DEFAULTS);
    assert_eq!(sd.bound_states().len(), 2, "well must bind two states");
    check("two-state well", &jd, &sd, &|x| -6.0 / (x - 3.0).cosh().powi(2));
    println!("criterion 7: PASS");
}

#[test]
fn criterion_08_compact_support() {
    let pl = bump_pipeline();
    let zero = pl.f.zero_index().unwrap();
    let grid = pl.f.grid();
    let mut max_half = 0.0_f64;
    let mut max_tail = 0.0_f64;
    for i in zero..grid.len() {
        let x = grid.point(i);
        let v = pl.f.value(i).abs();
        max_half = max_half.max(v);
        if x >= 4.2 {
            max_tail = max_tail.max(v);
        }
    }
    let rel = max_tail / max_half;
    assert!(rel <= 1e-5, "max|F| past 2a: {max_tail:e} = {rel:e} rel");

    let q_grid = pl.q_hat.grid();
    let mut q_tail = 0.0_f64;
    for (i, x) in q_grid.points().enumerate() {
        if x >= 2.2 {
            q_tail = q_tail.max(pl.q_hat.samples().value(i).abs());
        }
    }
    assert!(q_tail <= 1e-3, "max|q_hat| past the support: {q_tail:e}");
    println!(
        "criterion 8: PASS  (F tail {rel:.2e} <= 1e-5 rel, q tail {q_tail:.2e} <= 1e-3)"
    );
}

#[test]
fn criterion_09_inequality_suite() {
    // Six fitted constants finite, <= 50, stable within ±20% under h->h/2;
    // x0 minimal w.r.t. σ_1F(2x) < 1.
    let names = [
        "T2.1:sigma_A<=c.sigma_F(2x)",
        "T2.1:sigma_1A<=c.sigma_1F(2x)",
        "T2.1:norm_Ay<=c.sigma_2F(2x)",
        "T2.1:norm_Ax<=c.(sigma_2F+sigma_1F.sigma_F)(2x)",
        "T2.1:sigma_F(2x)<=c.sigma_A",
        "T2.1:sigma_1F(2x)<=c.sigma_1A",
    ];
    let constants = |pl: &Pipeline| -> std::collections::BTreeMap<String, f64> {
        let x0 = contraction_threshold(&pl.f).unwrap();
        let ep = EstimateProfile {
            f: profile_f(&pl.f).unwrap(),
            a: profile_a(&pl.kernel_inv).unwrap(),
            x0,
        };
        let out = check_theorem_2_1(&ep).unwrap();
        assert!(out.report.all_passed(), "{}", out.report.render_table());
        out.constants
    };
    for (name, coarse, fine) in [
        ("sech2", sech_pipeline(), sech_pipeline_half()),
        ("bump", bump_pipeline(), bump_pipeline_half()),
    ] {
        let c0 = constants(coarse);
        let c1 = constants(fine);
        for key in names {
            let a = c0[key];
            let b = c1[key];
            assert!(a.is_finite() && a <= 50.0, "{name}/{key}: c* = {a}");
            let drift = (a - b).abs() / a.max(1e-300);
            assert!(
                drift <= 0.2,
                "{name}/{key}: drift {:.1}% (h: {a}, h/2: {b})",
                100.0 * drift
            );
        }
        // x0 minimality on the coarse grid.
        let x0 = contraction_threshold(&coarse.f).unwrap();
        let fp = profile_f(&coarse.f).unwrap();
        let i0 = (x0 / coarse.cfg.h).round() as usize;
        assert!(fp.sigma_1f().value(2 * i0) < 1.0);
        if i0 > 0 {
            assert!(
                fp.sigma_1f().value(2 * (i0 - 1)) >= 1.0,
                "{name}: x0 = {x0} not minimal"
            );
        }
        println!("  {name}: x0 = {x0}, constants {:?}", c0);
    }
    println!("criterion 9: PASS");
}

#[test]
fn criterion_10_contraction_rate() {
    let cfg = DEFAULTS;
    let (f, kernel) = oracle_pair(&cfg);
    let out = kernel_to_f(&kernel, 1.0, &MarchenkoSolveOptions::default()).unwrap();
    // Bound: measured ratio <= σ_1F(2x) + 0.05 at x = 1.
    let fp = profile_f(&f).unwrap();
    let idx = fp.sigma_1f().grid().index_of(2.0).unwrap();
    let bound = fp.sigma_1f().value(idx) + 0.05;
    let mut worst_ratio = 0.0_f64;
    for w in out.update_norms.windows(2) {
        if w[0] > 1e-13 {
            worst_ratio = worst_ratio.max(w[1] / w[0]);
        }
    }
    assert!(
        worst_ratio <= bound,
        "update ratio {worst_ratio:.4} exceeds σ_1F(2)+0.05 = {bound:.4}"
    );
    println!(
        "criterion 10: PASS  (geometric ratio {worst_ratio:.3} <= {bound:.3}, {} sweeps)",
        out.update_norms.len()
    );
}

#[test]
fn criterion_11_l2_conditions() {
    // Identically zero functions for the zero potential.
    let zero = run_pipeline(Potential::zero(DEFAULTS.x_grid()).unwrap(), DEFAULTS);
    let report = check_l2_conditions(&zero.jd, 0.0).unwrap();
    for item in &report.items {
        assert!(item.value <= 1e-12, "{}: {}", item.name, item.value);
    }
    // All three verdicts pass on the bump.
    let pl = bump_pipeline();
    let q_charge = pl.potential.total_charge();
    let report = check_l2_conditions(&pl.jd, q_charge).unwrap();
    assert!(report.all_passed(), "{}", report.render_table());
    for item in &report.items {
        assert_eq!(item.verdict, Verdict::Pass, "{}", item.name);
    }
    println!("criterion 11: PASS  (Q = {q_charge:.4})");
}

#[test]
fn criterion_12_convergence_order() {
    // Criterion 2 study on [0, 7.5] (domain truncation negligible for the
    // closed-form pair): kernel and potential errors vs h.
    let study_c2 = |h: f64| -> f64 {
        let nx = (7.5 / h).round() as usize;
        let xg = Grid::new(0.0, 7.5, nx).unwrap();
        let fg = Grid::new(0.0, 15.0, 2 * nx).unwrap();
        let f = FFunction::from_samples(
            SampledFunction::from_fn(fg, |z| 2.0 * (-z).exp()).unwrap(),
        );
        let sol = solve_marchenko_all(&f, &xg, &MarchenkoSolveOptions::default()).unwrap();
        let mut worst = 0.0_f64;
        for i in (0..=nx).step_by(3) {
            for j in (i..=nx).step_by(5) {
                worst = worst
                    .max((sol.kernel.value(i, j) - oracle_kernel_value(xg.point(i), xg.point(j))).abs());
            }
        }
        let q_hat = recover_potential(&sol.kernel).unwrap();
        worst.max(max_abs_interior(&q_hat, |x| -2.0 / x.cosh().powi(2)))
    };
    let r2 = study_c2(0.01) / study_c2(0.005);
    assert!(r2 >= 3.5, "criterion-2 refinement ratio {r2:.2}");

    // Criterion 3 study: pointwise Jost error vs h. At the default X = 15
    // the error already sits on the domain-truncation floor e^{-X}
    // (≈ 3e-7, h-independent), so the study runs at X = 25 where the floor
    // is far below the h² term being measured.
    let study_c3 = |h: f64| -> f64 {
        let cfg = Cfg {
            h,
            x_max: 25.0,
            ..DEFAULTS
        };
        let p = sech_potential(&cfg);
        let (_, jd, _) = run_forward(&p, cfg);
        let mut worst = 0.0_f64;
        for (idx, k) in jd.k_grid().points().enumerate() {
            let ik = num_complex::Complex64::new(0.0, k);
            let exact = -ik / (1.0 - ik);
            worst = worst.max((jd.f()[idx] - exact).norm());
        }
        worst
    };
    let r3 = study_c3(0.01) / study_c3(0.005);
    assert!(r3 >= 3.5, "criterion-3 refinement ratio {r3:.2}");

    // Criterion 4 study: full roundtrip on the bump with every
    // discretization parameter refined together (h, dk halved; the k-grid
    // reach doubled so its truncation floor refines too).
    let study_c4 = |cfg: Cfg| -> f64 {
        let pl = run_pipeline(bump_potential(&cfg), cfg);
        rel_l1_error(&pl.potential, &pl.q_hat)
    };
    let fine_cfg = Cfg {
        h: 0.005,
        dk: 0.005,
        k_max: 120.0,
        ..DEFAULTS
    };
    let e_coarse = study_c4(DEFAULTS);
    let e_fine = study_c4(fine_cfg);
    let r4 = e_coarse / e_fine;
    assert!(
        r4 >= 3.5,
        "criterion-4 refinement ratio {r4:.2} (coarse {e_coarse:.3e}, fine {e_fine:.3e})"
    );
    println!("criterion 12: PASS  (ratios: c2 {r2:.2}, c3 {r3:.2}, c4 {r4:.2}, all >= 3.5)");
}
