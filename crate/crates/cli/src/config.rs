//! Run configuration: grids, tolerances, and their validation.
//!
//! Every tolerance used anywhere in the pipeline is surfaced here by name;
//! nothing numerical is hard-coded in the commands. Values come from the
//! defaults, then the `--config` JSON file, then repeated `--tol name=value`
//! flags, in that order.

use std::collections::BTreeMap;

use invscat_core::forward::{JostOptions, VolterraOptions};
use invscat_core::marchenko::MarchenkoSolveOptions;
use invscat_core::numerics::Grid;
use invscat_core::scattering::{BuildOptions, RecoverOptions, ValidateOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub x_max: f64,
    pub h: f64,
    pub k_max: f64,
    pub dk: f64,
    pub x_neg: f64,
    /// Named tolerances; unknown names are rejected.
    pub tolerances: BTreeMap<String, f64>,
    /// Seed reserved for randomized test tooling; the pipeline itself is
    /// deterministic.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            x_max: 15.0,
            h: 0.01,
            k_max: 60.0,
            dk: 0.01,
            x_neg: -12.0,
            tolerances: BTreeMap::new(),
            seed: 0,
        }
    }
}

/// All recognized tolerance names with their defaults.
pub const TOLERANCE_DEFAULTS: &[(&str, f64)] = &[
    ("tol_fixpoint", 1e-11),
    ("max_iter", 200.0),
    ("sigma_guard", 1e-10),
    ("eps_zero", 1e-9),
    ("tol_f0", 1e-6),
    ("tol_root", 1e-8),
    ("fdot_step", 1e-4),
    ("eps_slope", 1e-6),
    ("tol_im", 1e-8),
    ("tol_cross", 1e-2),
    ("tol_unimodular", 1e-6),
    ("tol_conj", 1e-10),
    ("tol_s_infinity", 0.1),
    ("tol_winding", 0.2),
    ("mu_tail", 1.0),
    ("tail_window", 0.2),
    ("tol_im_fs", 1e-8),
    ("tol_solve", 1e-12),
    ("tol_fixpoint_solve", 1e-12),
    ("max_order", 8.0),
    ("tol_select", 1e-8),
    ("tol_fit", 1e-4),
    ("support_tol_rel", 1e-5),
    ("contraction_margin", 0.5),
];

impl RunConfig {
    pub fn tol(&self, name: &str) -> f64 {
        if let Some(v) = self.tolerances.get(name) {
            return *v;
        }
        TOLERANCE_DEFAULTS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .expect("unknown tolerance name")
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("x_max", self.x_max),
            ("h", self.h),
            ("k_max", self.k_max),
            ("dk", self.dk),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(format!("{name} must be positive, got {value}"));
            }
        }
        if !(self.x_neg < 0.0) {
            return Err(format!("x_neg must be negative, got {}", self.x_neg));
        }
        for name in self.tolerances.keys() {
            if !TOLERANCE_DEFAULTS.iter().any(|(n, _)| n == name) {
                return Err(format!("unknown tolerance name {name:?}"));
            }
        }
        let near = |v: f64| (v - v.round()).abs() < 1e-9 * (1.0 + v.abs());
        if !near(self.x_max / self.h) {
            return Err("x_max/h must be an integer".into());
        }
        if !near(-self.x_neg / self.h) {
            return Err("x_neg/h must be an integer".into());
        }
        let nk = 2.0 * self.k_max / self.dk;
        if !near(nk) || (nk.round() as usize) % 2 != 0 {
            return Err("2*k_max/dk must be an even integer".into());
        }
        // Oscillation resolution for every grid point used anywhere.
        let reach = (2.0 * self.x_max).max(-self.x_neg);
        if reach * self.dk > 1.0 {
            return Err(format!(
                "resolution constraint violated: max|x|*dk = {} > 1",
                reach * self.dk
            ));
        }
        if self.k_max * self.h > 1.0 {
            return Err(format!(
                "resolution constraint violated: k_max*h = {} > 1",
                self.k_max * self.h
            ));
        }
        Ok(())
    }

    pub fn x_grid(&self) -> Grid {
        Grid::new(0.0, self.x_max, (self.x_max / self.h).round() as usize).expect("validated")
    }

    pub fn k_grid(&self) -> Grid {
        Grid::symmetric(self.k_max, (2.0 * self.k_max / self.dk).round() as usize)
            .expect("validated")
    }

    /// Grid for F spanning `[x_neg, 2 x_max]`.
    pub fn f_grid(&self) -> Grid {
        let n = ((2.0 * self.x_max - self.x_neg) / self.h).round() as usize;
        Grid::new(self.x_neg, 2.0 * self.x_max, n).expect("validated")
    }

    pub fn volterra_options(&self) -> VolterraOptions {
        VolterraOptions {
            tol_fixpoint: self.tol("tol_fixpoint"),
            max_iter: self.tol("max_iter") as usize,
            sigma_guard: self.tol("sigma_guard"),
        }
    }

    pub fn jost_options(&self) -> JostOptions {
        JostOptions {
            eps_zero: self.tol("eps_zero"),
            tol_f0: self.tol("tol_f0"),
            tol_root: self.tol("tol_root"),
            fdot_step: self.tol("fdot_step"),
            eps_slope: self.tol("eps_slope"),
            tol_im: self.tol("tol_im"),
            tol_cross: self.tol("tol_cross"),
        }
    }

    pub fn validate_options(&self) -> ValidateOptions {
        ValidateOptions {
            tol_unimodular: self.tol("tol_unimodular"),
            tol_conj: self.tol("tol_conj"),
            tol_s_infinity: self.tol("tol_s_infinity"),
            tol_winding: self.tol("tol_winding"),
            max_phase_step: 0.9 * std::f64::consts::PI,
        }
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            validate: self.validate_options(),
            mu_tail: self.tol("mu_tail"),
            tail_window: self.tol("tail_window"),
            tol_im: self.tol("tol_im_fs"),
        }
    }

    pub fn solve_options(&self) -> MarchenkoSolveOptions {
        MarchenkoSolveOptions {
            tol_solve: self.tol("tol_solve"),
            tol_fixpoint: self.tol("tol_fixpoint_solve"),
            max_iter: self.tol("max_iter") as usize,
            ..Default::default()
        }
    }

    pub fn recover_options(&self) -> RecoverOptions {
        RecoverOptions {
            max_order: self.tol("max_order") as usize,
            tol_select: self.tol("tol_select"),
            tol_fit: self.tol("tol_fit"),
            window_samples: 120,
        }
    }
}
