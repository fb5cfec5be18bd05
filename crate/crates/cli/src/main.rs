//! Command-line driver for the half-line inverse-scattering pipeline.
//!
//! Subcommands: `forward` (potential to scattering data), `invert` (data to
//! potential), `roundtrip` (both ways with error norms), `verify`
//! (diagnostics for a data/F/kernel file), `support` (compact-support test).
//!
//! Exit codes: 0 success, 2 validation failure, 3 solver failure, 4 I/O
//! failure.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::RunConfig;
use invscat_core::estimates::{
    check_compact_support, check_condition_c, check_theorem_2_1, profile_a, profile_f,
    EstimateProfile,
};
use invscat_core::forward::{
    find_bound_states, jost_function, kernel_from_potential, norming_constants, TransformKernel,
};
use invscat_core::marchenko::{
    contraction_threshold, extend_f_inward, kernel_contraction_threshold, kernel_to_f,
    recover_potential, solve_marchenko_all,
};
use invscat_core::numerics::Grid;
use invscat_core::potential::{Potential, PotentialFile};
use invscat_core::report::{CheckItem, Report};
use invscat_core::scattering::{
    build_f, recover_scattering, validate, FFile, FFunction, ScatteringData, ScatteringFile,
};
use invscat_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "invscat", version, about = "Half-line inverse scattering pipeline")]
struct Cli {
    /// JSON run configuration (grids and tolerances).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Override a named tolerance: --tol name=value (repeatable).
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Downgrade a failing Levinson/index check to a warning.
    #[arg(long, global = true)]
    no_levinson_strict: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Potential file (JSON or CSV) to Jost data and scattering data.
    Forward { potential: PathBuf },
    /// Scattering-data file to F, kernel, and recovered potential.
    Invert { scattering: PathBuf },
    /// Full cycle q => S => F => A => q plus inverse substeps, with error norms.
    Roundtrip { potential: PathBuf },
    /// Run every applicable diagnostic on a scattering/F/kernel file.
    Verify {
        input: PathBuf,
        /// Support radius for the compact-support check.
        #[arg(long)]
        support: Option<f64>,
    },
    /// Compact-support test of an F file against a declared radius.
    Support {
        f_file: PathBuf,
        #[arg(long)]
        support: f64,
    },
}

/// Error kinds mapped to exit codes.
enum CliError {
    Validation(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Validation(_)
            | CoreError::Domain(_)
            | CoreError::Range(_)
            | CoreError::Grid(_)
            | CoreError::Resolution { .. }
            | CoreError::ClassViolation(_) => CliError::Validation(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

fn io_err(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    cfg.validate().map_err(CliError::Validation)?;
    fs::create_dir_all(&cli.out_dir).map_err(|e| io_err("creating out-dir", e))?;
    match &cli.cmd {
        Cmd::Forward { potential } => cmd_forward(&cli, &cfg, potential),
        Cmd::Invert { scattering } => cmd_invert(&cli, &cfg, scattering),
        Cmd::Roundtrip { potential } => cmd_roundtrip(&cli, &cfg, potential),
        Cmd::Verify { input, support } => cmd_verify(&cli, &cfg, input, *support),
        Cmd::Support { f_file, support } => cmd_support(&cli, &cfg, f_file, *support),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| io_err(&format!("reading config {}", path.display()), e))?;
            serde_json::from_str(&text)
                .map_err(|e| io_err(&format!("parsing config {}", path.display()), e))?
        }
    };
    for spec in &cli.tol {
        let (name, value) = spec.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("--tol expects name=value, got {spec:?}"))
        })?;
        let value: f64 = value
            .parse()
            .map_err(|_| CliError::Validation(format!("--tol {name}: unparseable value")))?;
        cfg.tolerances.insert(name.to_string(), value);
    }
    Ok(cfg)
}

fn read_potential(path: &Path) -> Result<Potential, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| io_err(&format!("reading {}", path.display()), e))?;
    if path.extension().is_some_and(|e| e == "csv") {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".into());
        return Potential::from_csv(&text, label).map_err(CliError::from);
    }
    let file: PotentialFile = serde_json::from_str(&text)
        .map_err(|e| io_err(&format!("parsing potential {}", path.display()), e))?;
    file.into_potential().map_err(CliError::from)
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| io_err(&format!("serializing {name}"), e))?;
    fs::write(&path, text).map_err(|e| io_err(&format!("writing {}", path.display()), e))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Everything the forward pipeline produces that commands reuse.
struct ForwardOutput {
    jd: invscat_core::forward::JostData,
    sd: ScatteringData,
}

fn forward_pipeline(cfg: &RunConfig, p: &Potential) -> Result<ForwardOutput, CliError> {
    let l11 = p.check_l11(0.0)?;
    if !l11.finite {
        return Err(CliError::Validation(format!(
            "potential is not in the admissible decay class (fitted tail exponent {:?})",
            l11.fitted_exponent
        )));
    }
    let sol = kernel_from_potential(p, &cfg.volterra_options())?;
    let jopts = cfg.jost_options();
    let jd = jost_function(&sol.kernel, &cfg.k_grid(), &jopts)?;
    let jd = find_bound_states(jd, &sol.kernel, &jopts)?;
    let jd = norming_constants(&sol.kernel, jd, &jopts)?;
    for w in jd.warnings() {
        eprintln!("warning: {w}");
    }
    let mut sd = ScatteringData::from_jost(&jd)?;
    let v = validate(&sd, &cfg.validate_options());
    sd.set_index_kappa(v.kappa);
    Ok(ForwardOutput { jd, sd })
}

fn print_bound_table(sd: &ScatteringData) {
    println!("J = {} bound state(s)", sd.bound_states().len());
    if !sd.bound_states().is_empty() {
        println!("{:>4}  {:>18}  {:>18}", "j", "k_j", "s_j");
        for (j, p) in sd.bound_states().iter().enumerate() {
            println!("{:>4}  {:>18.12}  {:>18.12}", j + 1, p.k, p.s);
        }
    }
}

fn cmd_forward(cli: &Cli, cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let p = read_potential(path)?;
    println!("potential: {} on [0, {}]", p.label(), p.grid().x_max());
    let out = forward_pipeline(cfg, &p)?;
    let v = validate(&out.sd, &cfg.validate_options());
    println!("{}", v.report.render_table());
    match v.kappa {
        Some(k) => println!("index kappa = {k}"),
        None => println!("index kappa unresolved"),
    }
    print_bound_table(&out.sd);
    write_json(&cli.out_dir, "jost.json", &out.jd.to_file()?)?;
    write_json(&cli.out_dir, "scattering.json", &out.sd.to_file())?;
    Ok(())
}

fn read_scattering(path: &Path) -> Result<ScatteringData, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| io_err(&format!("reading {}", path.display()), e))?;
    let file: ScatteringFile = serde_json::from_str(&text)
        .map_err(|e| io_err(&format!("parsing scattering data {}", path.display()), e))?;
    file.into_data().map_err(CliError::from)
}

/// Kernel JSON export: `{x_max, n, rows}` with row i holding `A(x_i, y_j)`,
/// j = i..n.
#[derive(serde::Serialize, serde::Deserialize)]
struct KernelFile {
    x_max: f64,
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl KernelFile {
    fn from_kernel(k: &TransformKernel) -> Self {
        KernelFile {
            x_max: k.grid().x_max(),
            n: k.n(),
            rows: (0..=k.n()).map(|i| k.row(i).to_vec()).collect(),
        }
    }

    fn into_kernel(self) -> Result<TransformKernel, CliError> {
        let grid = Grid::new(0.0, self.x_max, self.n).map_err(CliError::from)?;
        TransformKernel::from_rows(grid, self.rows).map_err(CliError::from)
    }
}

fn write_kernel_csv(dir: &Path, kernel: &TransformKernel) -> Result<(), CliError> {
    let path = dir.join("kernel.csv");
    let file = fs::File::create(&path).map_err(|e| io_err("creating kernel.csv", e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "x,y,A").map_err(|e| io_err("writing kernel.csv", e))?;
    let grid = kernel.grid();
    for i in 0..=kernel.n() {
        for j in i..=kernel.n() {
            writeln!(
                w,
                "{},{},{}",
                grid.point(i),
                grid.point(j),
                kernel.value(i, j)
            )
            .map_err(|e| io_err("writing kernel.csv", e))?;
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_invert(cli: &Cli, cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let sd = read_scattering(path)?;
    let v = validate(&sd, &cfg.validate_options());
    println!("{}", v.report.render_table());
    if !v.condition_a_passed() {
        return Err(CliError::Validation(
            "condition A fails on the input data".into(),
        ));
    }
    if !v.condition_b_passed() {
        if cli.no_levinson_strict {
            eprintln!("warning: condition B (index/Levinson) fails; continuing");
        } else {
            return Err(CliError::Validation(
                "condition B (index/Levinson) fails; pass --no-levinson-strict to continue".into(),
            ));
        }
    }

    let (f, info) = build_f(&sd, &cfg.f_grid(), &cfg.build_options())?;
    println!(
        "F synthesized: tail fit a1 = {:.6}, edge residual |1-S-tail| = {:.3e} (raw {:.3e})",
        info.a1, info.edge_residual, info.edge_raw
    );
    let x0 = contraction_threshold(&f)?;
    println!("contraction threshold x0 = {x0}");

    let sol = solve_marchenko_all(&f, &cfg.x_grid(), &cfg.solve_options())?;
    println!("Nystrom solve: rcond estimate {:.3e}", sol.rcond);
    let q = recover_potential(&sol.kernel)?;

    let ep = EstimateProfile {
        f: profile_f(&f)?,
        a: profile_a(&sol.kernel)?,
        x0,
    };
    let t21 = check_theorem_2_1(&ep)?;
    println!("{}", t21.report.render_table());

    write_json(&cli.out_dir, "f.json", &f.to_file())?;
    write_json(
        &cli.out_dir,
        "kernel.json",
        &KernelFile::from_kernel(&sol.kernel),
    )?;
    write_kernel_csv(&cli.out_dir, &sol.kernel)?;
    write_json(&cli.out_dir, "potential_recovered.json", &q.to_file())?;
    write_json(&cli.out_dir, "invert_report.json", &t21.report)?;
    Ok(())
}

fn cmd_roundtrip(cli: &Cli, cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let p = read_potential(path)?;
    let out = forward_pipeline(cfg, &p)?;
    let (f, _) = build_f(&out.sd, &cfg.f_grid(), &cfg.build_options())?;
    let sol = solve_marchenko_all(&f, &cfg.x_grid(), &cfg.solve_options())?;
    let q_hat = recover_potential(&sol.kernel)?;

    let mut report = Report::new();
    // Potential errors.
    let h = cfg.h;
    let q0 = p.samples().values();
    let q1 = q_hat.samples().values();
    let diff: Vec<f64> = q0.iter().zip(q1).map(|(a, b)| (a - b).abs()).collect();
    let abs_q: Vec<f64> = q0.iter().map(|v| v.abs()).collect();
    let l1_diff = trapz(&diff, h);
    let l1_q = trapz(&abs_q, h);
    let rel_l1 = if l1_q > 0.0 { l1_diff / l1_q } else { l1_diff };
    let max_diff = diff.iter().fold(0.0_f64, |a, v| a.max(*v));
    report.push(CheckItem::info("roundtrip:|q-q_hat|_L1_rel", rel_l1));
    report.push(CheckItem::info("roundtrip:|q-q_hat|_max", max_diff));

    // Kernel to F-hat via the inverse steps.
    let margin = cfg.tol("contraction_margin");
    let x_rec = kernel_contraction_threshold(&sol.kernel, margin)
        .ok_or_else(|| CliError::Solver("no kernel-side contraction point found".into()))?;
    let tail = kernel_to_f(&sol.kernel, x_rec, &cfg.solve_options())?;
    let f_hat = extend_f_inward(&sol.kernel, &tail.f_tail, 0.0, &cfg.solve_options())?;
    let zero = f.zero_index().expect("f grid contains 0");
    let mut f_err = 0.0_f64;
    for (i, v) in f_hat.samples().values().iter().enumerate() {
        f_err = f_err.max((v - f.value(zero + i)).abs());
    }
    report.push(CheckItem::info("roundtrip:|F-F_hat|_max", f_err));
    report.push(CheckItem::info("roundtrip:x_rec", x_rec));

    // F back to the data.
    let (sd_hat, rec_info) = recover_scattering(&f, &cfg.k_grid(), &cfg.recover_options())?;
    let s_err = out
        .sd
        .s_values()
        .iter()
        .zip(sd_hat.s_values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0_f64, f64::max);
    report.push(CheckItem::info("roundtrip:|S-S_hat|_max", s_err));
    report.push(CheckItem::info(
        "roundtrip:J_hat",
        sd_hat.bound_states().len() as f64,
    ));
    report.push(CheckItem::info(
        "roundtrip:fit_residual",
        rec_info.fit_residual_rel,
    ));
    if out.sd.bound_states().len() == sd_hat.bound_states().len() {
        let mut dk_max = 0.0_f64;
        let mut ds_max = 0.0_f64;
        for (a, b) in out.sd.bound_states().iter().zip(sd_hat.bound_states()) {
            dk_max = dk_max.max((a.k - b.k).abs());
            ds_max = ds_max.max((a.s - b.s).abs() / a.s.max(1e-300));
        }
        report.push(CheckItem::info("roundtrip:|k_j-k_hat|_max", dk_max));
        report.push(CheckItem::info("roundtrip:|s_j-s_hat|_rel_max", ds_max));
    } else {
        report.push(CheckItem::info(
            "roundtrip:bound_count_mismatch",
            (out.sd.bound_states().len() as f64) - (sd_hat.bound_states().len() as f64),
        ));
    }

    // Compact-support diagnostic when the input declares a radius.
    if let Some(a) = p.support_radius() {
        let tol = cfg.tol("support_tol_rel") * f.max_abs_half();
        let cs = check_compact_support(&f, a, tol)?;
        report.push(CheckItem::le("roundtrip:max|F|-past-2a", cs.max_tail, tol));
        report.push(CheckItem::info("roundtrip:a_hat", cs.a_hat));
    }

    println!("{}", report.render_table());
    print_bound_table(&out.sd);
    write_json(&cli.out_dir, "roundtrip_report.json", &report)?;
    write_json(&cli.out_dir, "scattering.json", &out.sd.to_file())?;
    write_json(&cli.out_dir, "potential_recovered.json", &q_hat.to_file())?;
    Ok(())
}

fn trapz(vals: &[f64], h: f64) -> f64 {
    if vals.len() < 2 {
        return 0.0;
    }
    let inner: f64 = vals[1..vals.len() - 1].iter().sum();
    h * (0.5 * (vals[0] + vals[vals.len() - 1]) + inner)
}

fn cmd_verify(
    cli: &Cli,
    cfg: &RunConfig,
    path: &Path,
    support: Option<f64>,
) -> Result<(), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| io_err(&format!("reading {}", path.display()), e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| io_err(&format!("parsing {}", path.display()), e))?;
    let mut report = Report::new();

    if value.get("s_re").is_some() {
        // Scattering data: conditions A/B, then the inverse machinery for
        // the profile inequalities.
        let sd: ScatteringData = serde_json::from_str::<ScatteringFile>(&text)
            .map_err(|e| io_err("parsing scattering data", e))?
            .into_data()?;
        let v = validate(&sd, &cfg.validate_options());
        report.items.extend(v.report.items);
        let (f, _) = build_f(&sd, &cfg.f_grid(), &cfg.build_options())?;
        report.items.extend(check_condition_c(&f)?.items);
        let x0 = contraction_threshold(&f)?;
        report.push(CheckItem::info("x0", x0));
        let sol = solve_marchenko_all(&f, &cfg.x_grid(), &cfg.solve_options())?;
        let ep = EstimateProfile {
            f: profile_f(&f)?,
            a: profile_a(&sol.kernel)?,
            x0,
        };
        report.items.extend(check_theorem_2_1(&ep)?.report.items);
        if let Some(a) = support {
            let tol = cfg.tol("support_tol_rel") * f.max_abs_half();
            report
                .items
                .extend(check_compact_support(&f, a, tol)?.report.items);
        }
    } else if value.get("x_min").is_some() {
        let f: FFunction = serde_json::from_str::<FFile>(&text)
            .map_err(|e| io_err("parsing F file", e))?
            .into_f()?;
        report.items.extend(check_condition_c(&f)?.items);
        let x0 = contraction_threshold(&f)?;
        report.push(CheckItem::info("x0", x0));
        if let Some(a) = support {
            let tol = cfg.tol("support_tol_rel") * f.max_abs_half();
            report
                .items
                .extend(check_compact_support(&f, a, tol)?.report.items);
        }
    } else if value.get("rows").is_some() {
        let kernel = serde_json::from_str::<KernelFile>(&text)
            .map_err(|e| io_err("parsing kernel file", e))?
            .into_kernel()?;
        let prof = profile_a(&kernel)?;
        report.push(CheckItem::info("sigma_A(0)", prof.sigma_a().value(0)));
        report.push(CheckItem::info("sigma_1A(0)", prof.sigma_1a().value(0)));
        report.push(CheckItem::info("norm_Ax_1(0)", prof.norm_ax_1().value(0)));
        report.push(CheckItem::info("norm_Ay_1(0)", prof.norm_ay_1().value(0)));
        if let Some(x) = kernel_contraction_threshold(&kernel, 1.0) {
            report.push(CheckItem::info("x0_kernel_side", x));
        }
        let q = recover_potential(&kernel)?;
        report.push(CheckItem::info("recovered_total_charge", q.total_charge()));
    } else {
        return Err(CliError::Validation(format!(
            "{}: not a scattering/F/kernel file",
            path.display()
        )));
    }

    println!("{}", report.render_table());
    write_json(&cli.out_dir, "verify_report.json", &report)?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Validation("one or more checks failed".into()))
    }
}

fn cmd_support(cli: &Cli, cfg: &RunConfig, path: &Path, a: f64) -> Result<(), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| io_err(&format!("reading {}", path.display()), e))?;
    let f: FFunction = serde_json::from_str::<FFile>(&text)
        .map_err(|e| io_err(&format!("parsing F file {}", path.display()), e))?
        .into_f()?;
    let tol = cfg.tol("support_tol_rel") * f.max_abs_half();
    let cs = check_compact_support(&f, a, tol)?;
    println!("{}", cs.report.render_table());
    println!("a_hat = {}", cs.a_hat);
    write_json(&cli.out_dir, "support_report.json", &cs.report)?;
    if cs.pass {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "F does not vanish past 2a = {} (max tail {:.3e} > tol {:.3e})",
            2.0 * a,
            cs.max_tail,
            tol
        )))
    }
}
