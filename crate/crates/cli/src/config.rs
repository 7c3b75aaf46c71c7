//! Run configuration: one TOML file with a section per mode.
//!
//! Every field has a default, so a file only needs the values it changes.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use cwbnlw_core::arithmetic::GdcSpec;
use cwbnlw_core::coupling::{C1Constants, C2Constants};
use cwbnlw_core::{ProblemParams, ScaleSchedule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Accept violations of the schedule inequalities, recording each one
    /// as a warning in every artifact.
    pub allow_override: bool,
    pub problem: ProblemSection,
    pub schedule: ScaleSchedule,
    pub solver: SolverSection,
    pub audit: AuditSection,
    pub scan: ScanSection,
    pub separation: SeparationSection,
    pub diophantine: DiophantineSection,
    pub coupling: CouplingSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            allow_override: false,
            problem: ProblemSection::default(),
            schedule: ScaleSchedule::default(),
            solver: SolverSection::default(),
            audit: AuditSection::default(),
            scan: ScanSection::default(),
            separation: SeparationSection::default(),
            diophantine: DiophantineSection::default(),
            coupling: CouplingSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub m0: Vec<i64>,
    pub rho: f64,
    pub alpha: f64,
    pub eps: f64,
    pub p0: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            m0: vec![1],
            rho: std::f64::consts::SQRT_2,
            alpha: 0.05,
            eps: 1e-3,
            p0: 1.5,
        }
    }
}

impl ProblemSection {
    pub fn params(&self) -> cwbnlw_core::Result<ProblemParams> {
        ProblemParams::new(self.m0.clone(), self.rho, self.alpha, self.eps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub damping: f64,
    pub tol: f64,
    pub max_outer: usize,
    /// Radius of the ℓ¹ ball the residual is audited on.
    pub audit_radius: i64,
    /// Gevrey exponent for the tail audit.
    pub gevrey_c: f64,
    /// Gate on the sup residual.
    pub residual_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            damping: 1.0,
            tol: 1e-12,
            max_outer: 50,
            audit_radius: 16,
            gevrey_c: 0.04,
            residual_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    /// Schedule for the contraction audit.
    pub contraction_schedule: ScaleSchedule,
    /// Exponent in `r_{j+1} <= r_j^q`.
    pub contraction_power: f64,
    pub tail_slack: f64,
    /// Instance for the certificate sweep.
    pub certificate_eps: f64,
    pub certificate_samples: usize,
    /// Diophantine constant in the Neumann regime checks.
    pub neumann_gamma: f64,
    pub neumann_slack: f64,
    /// Gate on `max |dense - neumann| / max |dense|`.
    pub inverse_agreement: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            contraction_schedule: ScaleSchedule {
                m: 2,
                c: 0.08,
                c1: 3.0,
                c2: 2.5,
                j0: 1,
                j_max: 5,
                residual_floor: 1e-13,
            },
            contraction_power: 1.5,
            tail_slack: 10.0,
            certificate_eps: 1e-9,
            certificate_samples: 8,
            neumann_gamma: 1e-3,
            neumann_slack: 0.9,
            inverse_agreement: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Decreasing `ε` values.
    pub eps_grid: Vec<f64>,
    /// `p0` runs over the midpoints of this many equal cells of `[1, 2]`.
    pub samples: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            eps_grid: vec![1e-3, 5e-4, 1e-4],
            samples: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationSection {
    pub d: usize,
    /// Ball radius `N`; singular threshold and cluster gap are `2 N^α`.
    pub n: i64,
    pub samples: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Condition the sampled `λ` must pass.
    pub gdc: GdcSpec,
    pub b: f64,
    pub b_prime: usize,
    pub budget: u64,
    /// Frozen exponent in `k <= (B B')^{C''}`.
    pub c_double_prime: f64,
    /// Radii for the `λ = 1` control.
    pub control_radii: Vec<i64>,
    pub control_budget: u64,
}

impl Default for SeparationSection {
    fn default() -> Self {
        Self {
            d: 2,
            n: 256,
            samples: 20,
            lambda_min: 1.2,
            lambda_max: 2.2,
            gdc: GdcSpec {
                b_tilde: 1,
                degree: 19,
                gamma: 1e-3,
                tau: 2.0,
                coeff_bound: 4,
                budget: None,
            },
            b: 4.0,
            b_prime: 4,
            budget: 1_000_000,
            c_double_prime: 2.0,
            control_radii: vec![64, 128, 256],
            control_budget: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiophantineSection {
    pub rho_gamma: f64,
    pub rho_n_max: i64,
    /// Check applied to `λ0`.
    pub lambda_gdc: GdcSpec,
    pub measure_degree: usize,
    pub measure_tau: f64,
    pub measure_coeff_bound: u32,
    pub measure_gammas: Vec<f64>,
    pub measure_samples: usize,
    pub measure_interval: (f64, f64),
    /// Exponents `k` for the sublevel check of `t^k` on `[-1, 1]`.
    pub sublevel_degrees: Vec<usize>,
    pub sublevel_eps: Vec<f64>,
    pub sublevel_tol: f64,
    /// Number of random degree-4 polynomials for the sublevel constant fit.
    pub sublevel_random: usize,
}

impl Default for DiophantineSection {
    fn default() -> Self {
        Self {
            rho_gamma: 1e-2,
            rho_n_max: 10_000,
            lambda_gdc: GdcSpec {
                b_tilde: 1,
                degree: 4,
                gamma: 1e-2,
                tau: 5.0,
                coeff_bound: 20,
                budget: None,
            },
            measure_degree: 2,
            measure_tau: 2.0,
            measure_coeff_bound: 6,
            measure_gammas: vec![1e-2, 1e-3, 1e-4],
            measure_samples: 100_000,
            measure_interval: (0.5, 2.5),
            sublevel_degrees: vec![1, 2, 3, 4, 5, 6],
            sublevel_eps: vec![1e-2, 1e-4, 1e-6],
            sublevel_tol: 1e-6,
            sublevel_random: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    /// Seeds `0..seeds` per lemma and grid point.
    pub seeds: u64,
    pub c1_side: i64,
    pub c1_dims: Vec<usize>,
    pub c1: C1Constants,
    /// Values of the tail exponent swept for the first lemma.
    pub c1_tail_grid: Vec<f64>,
    pub c2_dims: Vec<usize>,
    /// Box side per entry of `c2_dims`.
    pub c2_sides: Vec<i64>,
    pub c2_clusters: usize,
    pub c2_cluster_size: usize,
    pub c2: C2Constants,
    /// Values of `C` swept for the second lemma.
    pub c2_exp_grid: Vec<f64>,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            seeds: 100,
            c1_side: 200,
            c1_dims: vec![1],
            c1: C1Constants {
                b: 1.02,
                k: 20,
                c_tail: 1.5,
                c_prime: 3.0,
                c: 0.3,
            },
            c1_tail_grid: vec![1.5],
            c2_dims: vec![1, 2],
            c2_sides: vec![20, 7],
            c2_clusters: 4,
            c2_cluster_size: 3,
            c2: C2Constants {
                m: 400.0,
                eps1: 0.09,
                eps2: 0.08,
                eps3: 0.05,
                eps: 0.01,
                rho: 1.0,
                c_exp: 1.0,
                c: 0.2,
            },
            c2_exp_grid: vec![1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks the constants and returns the warnings for every inequality
    /// that was overridden.
    pub fn validate(&self) -> Result<Vec<String>, CliError> {
        let bad = |m: String| CliError::Config(m);
        self.problem.params().map_err(|e| bad(format!("[problem] {e}")))?;
        if !(1.0..=2.0).contains(&self.problem.p0) {
            return Err(bad(format!("[problem] p0 = {} outside [1, 2]", self.problem.p0)));
        }
        let mut warnings: Vec<String> = self
            .schedule
            .validate(self.allow_override)
            .map_err(|e| bad(format!("[schedule] {e}")))?
            .into_iter()
            .map(|w| format!("[schedule] {w}"))
            .collect();
        warnings.extend(
            self.audit
                .contraction_schedule
                .validate(self.allow_override)
                .map_err(|e| bad(format!("[audit.contraction_schedule] {e}")))?
                .into_iter()
                .map(|w| format!("[audit.contraction_schedule] {w}")),
        );
        if self.solver.audit_radius < 1 || !(self.solver.residual_tol > 0.0) {
            return Err(bad("[solver] audit_radius and residual_tol must be positive".into()));
        }
        if self.scan.samples == 0 || self.scan.eps_grid.iter().any(|e| !(*e >= 0.0)) {
            return Err(bad("[scan] need samples >= 1 and eps >= 0".into()));
        }
        let s = &self.separation;
        if s.d == 0 || s.n < 1 || s.b_prime == 0 || !(s.b > 0.0) || !(s.lambda_max > s.lambda_min) {
            return Err(bad("[separation] invalid ranges".into()));
        }
        s.gdc.validate().map_err(|e| bad(format!("[separation.gdc] {e}")))?;
        let dph = &self.diophantine;
        dph.lambda_gdc
            .validate()
            .map_err(|e| bad(format!("[diophantine.lambda_gdc] {e}")))?;
        if dph.measure_gammas.len() < 2 || dph.measure_gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(bad("[diophantine] need at least two positive measure_gammas".into()));
        }
        let c = &self.coupling;
        if c.c2_dims.len() != c.c2_sides.len() {
            return Err(bad("[coupling] c2_dims and c2_sides differ in length".into()));
        }
        c.c1.validate().map_err(|e| bad(format!("[coupling.c1] {e}")))?;
        c.c2.validate().map_err(|e| bad(format!("[coupling.c2] {e}")))?;
        Ok(warnings)
    }

    /// SHA-256 of the canonical TOML form, so equivalent files hash alike.
    /// The output location is not part of the hash.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output: OutputSection::default(),
            ..self.clone()
        };
        let text = toml::to_string(&canonical).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
