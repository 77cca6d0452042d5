//! Error norms, convergence rates and study tables.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::StudyConfig;
use crate::element::{ElementCache, ElementStore};
use crate::lifting::{build_lift_operators, lift, LiftOperator, LiftedField};
use crate::mesh::{MeshFamily, PolytopalMesh};
use crate::poly::{project_qh, WgFunction};
use crate::solver::{solve_poisson, SolveDiagnostics};
use crate::{Point, Result, WgError};

/// Exact solutions vanishing on the boundary of the unit square / cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactSolution {
    /// `sin(πx) sin(πy)`
    Sine2d,
    /// `sin(πx) sin(πy) sin(πz)`
    Sine3d,
}

impl ExactSolution {
    pub fn dim(self) -> usize {
        match self {
            Self::Sine2d => 2,
            Self::Sine3d => 3,
        }
    }

    pub fn for_dim(dim: usize) -> Self {
        if dim == 3 {
            Self::Sine3d
        } else {
            Self::Sine2d
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sine2d => "sine2d",
            Self::Sine3d => "sine3d",
        }
    }

    pub fn value(self, x: &Point) -> f64 {
        let s = (PI * x.x).sin() * (PI * x.y).sin();
        match self {
            Self::Sine2d => s,
            Self::Sine3d => s * (PI * x.z).sin(),
        }
    }

    pub fn gradient(self, x: &Point) -> Point {
        let (sx, cx) = (PI * x.x).sin_cos();
        let (sy, cy) = (PI * x.y).sin_cos();
        match self {
            Self::Sine2d => Point::new(PI * cx * sy, PI * sx * cy, 0.0),
            Self::Sine3d => {
                let (sz, cz) = (PI * x.z).sin_cos();
                Point::new(PI * cx * sy * sz, PI * sx * cy * sz, PI * sx * sy * cz)
            }
        }
    }

    /// `f = -Δu`.
    pub fn source(self, x: &Point) -> f64 {
        self.dim() as f64 * PI * PI * self.value(x)
    }
}

impl FromStr for ExactSolution {
    type Err = WgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sine2d" => Ok(Self::Sine2d),
            "sine3d" => Ok(Self::Sine3d),
            other => Err(WgError::Config {
                field: "solution".into(),
                reason: format!("unknown solution `{other}` (expected sine2d or sine3d)"),
            }),
        }
    }
}

/// A discontinuous field with one polynomial per cell in the scaled cell
/// bases.
pub trait CellwisePolynomial: Sync {
    fn degree(&self) -> usize;
    fn cell_coeffs(&self, cell: usize) -> &[f64];
}

/// The interior part `v_0` of a weak function.
impl CellwisePolynomial for WgFunction {
    fn degree(&self) -> usize {
        self.k
    }

    fn cell_coeffs(&self, cell: usize) -> &[f64] {
        self.cell(cell)
    }
}

impl CellwisePolynomial for LiftedField {
    fn degree(&self) -> usize {
        self.degree
    }

    fn cell_coeffs(&self, cell: usize) -> &[f64] {
        self.coeffs[cell].as_slice()
    }
}

/// `‖u - v‖_0`.
pub fn error_l2(
    mesh: &PolytopalMesh,
    store: &ElementStore,
    u: impl Fn(&Point) -> f64 + Sync,
    v: &impl CellwisePolynomial,
) -> f64 {
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let rule = store.physical_rule(c);
            let vals = store.values_at_rule(c, v.degree(), v.cell_coeffs(c));
            rule.points
                .iter()
                .zip(&rule.weights)
                .zip(vals.iter())
                .map(|((x, w), vx)| w * (u(x) - vx).powi(2))
                .sum::<f64>()
        })
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

/// `|u - v|_{1,h}`.
pub fn error_h1_broken(
    mesh: &PolytopalMesh,
    store: &ElementStore,
    grad_u: impl Fn(&Point) -> Point + Sync,
    v: &impl CellwisePolynomial,
) -> f64 {
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let rule = store.physical_rule(c);
            let grads = store.gradients_at_rule(c, v.degree(), v.cell_coeffs(c));
            rule.points
                .iter()
                .zip(&rule.weights)
                .zip(&grads)
                .map(|((x, w), gx)| w * (grad_u(x) - gx).norm_squared())
                .sum::<f64>()
        })
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

/// `|||a - b|||`.
pub fn error_triple_bar(
    mesh: &PolytopalMesh,
    store: &ElementStore,
    a: &WgFunction,
    b: &WgFunction,
) -> f64 {
    store.energy_squared(mesh, &a.sub(b)).max(0.0).sqrt()
}

/// The six error columns in table order.
pub const COLUMNS: [&str; 6] = [
    "err_l2",
    "err_l2_qh",
    "err_l2_lift",
    "err_h1",
    "err_energy_qh",
    "err_h1_lift",
];

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub level: u32,
    pub h: f64,
    pub num_cells: usize,
    pub num_dofs: usize,
    /// `‖u-u_h‖_0, ‖Q_hu-u_h‖_0, ‖u-L_hu_h‖_0, |u-u_h|_{1,h}, |||Q_hu-u_h|||, |u-L_hu_h|_{1,h}`.
    pub errors: [f64; 6],
    pub solve: SolveDiagnostics,
    pub element_classes: usize,
    pub min_sigma: f64,
}

/// Everything computed on one level, for diagnostics.
pub struct LevelOutcome {
    pub mesh: PolytopalMesh,
    pub store: ElementStore,
    pub operators: Vec<LiftOperator>,
    pub solution: WgFunction,
    pub lifted: LiftedField,
    pub result: LevelResult,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub family: MeshFamily,
    pub k: usize,
    pub solution: ExactSolution,
    pub levels: Vec<LevelResult>,
}

pub fn run_level(
    family: MeshFamily,
    level: u32,
    k: usize,
    solution: ExactSolution,
    tol: f64,
    cache: &ElementCache,
) -> Result<LevelOutcome> {
    let mesh = family.generate(level);
    let store = ElementStore::build_cached(&mesh, k, cache)?;
    let operators = build_lift_operators(&store)?;
    let (u_h, solve) = solve_poisson(&mesh, &store, |x| solution.source(x), tol)?;
    let qh = project_qh(&mesh, k, |x| solution.value(x), true)?;
    let lifted = lift(&mesh, &u_h, &operators);

    let u = |x: &Point| solution.value(x);
    let grad_u = |x: &Point| solution.gradient(x);
    let e_l2 = error_l2(&mesh, &store, u, &u_h);
    let e_l2_qh = error_l2(&mesh, &store, |_| 0.0, &qh.sub(&u_h));
    let e_l2_lift = error_l2(&mesh, &store, u, &lifted);
    let e_h1 = error_h1_broken(&mesh, &store, grad_u, &u_h);
    let e_energy = error_triple_bar(&mesh, &store, &qh, &u_h);
    let e_h1_lift = error_h1_broken(&mesh, &store, grad_u, &lifted);

    let min_sigma = operators
        .iter()
        .map(|o| o.sigma_min)
        .fold(f64::INFINITY, f64::min);
    let result = LevelResult {
        level,
        h: mesh.mesh_size(),
        num_cells: mesh.num_cells(),
        num_dofs: mesh.num_cells() * u_h.cell_dofs + mesh.num_interior_faces() * u_h.face_dofs,
        errors: [e_l2, e_l2_qh, e_l2_lift, e_h1, e_energy, e_h1_lift],
        solve,
        element_classes: store.num_classes(),
        min_sigma,
    };
    Ok(LevelOutcome {
        mesh,
        store,
        operators,
        solution: u_h,
        lifted,
        result,
    })
}

/// Runs every level of the study; `observe` sees each level's full outcome.
pub fn run_study_with(
    config: &StudyConfig,
    mut observe: impl FnMut(&LevelOutcome) -> Result<()>,
) -> Result<ConvergenceReport> {
    let mut levels = Vec::new();
    let cache = ElementCache::new();
    for level in config.levels.clone() {
        let outcome = run_level(
            config.family,
            level,
            config.k,
            config.solution,
            config.solver_tol,
            &cache,
        )
        .map_err(|e| WgError::Level {
            level,
            source: Box::new(e),
        })?;
        observe(&outcome).map_err(|e| WgError::Level {
            level,
            source: Box::new(e),
        })?;
        levels.push(outcome.result);
    }
    Ok(ConvergenceReport {
        family: config.family,
        k: config.k,
        solution: config.solution,
        levels,
    })
}

pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    run_study_with(config, |_| Ok(()))
}

impl ConvergenceReport {
    /// `log2(e_{ℓ-1} / e_ℓ)` for every level after the first.
    pub fn rates(&self, column: usize) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for w in self.levels.windows(2) {
            out.push(Some((w[0].errors[column] / w[1].errors[column]).log2()));
        }
        out.truncate(self.levels.len());
        out
    }

    /// Rates of all six columns between the two finest levels.
    pub fn finest_rates(&self) -> Option<[f64; 6]> {
        if self.levels.len() < 2 {
            return None;
        }
        let mut r = [0.0; 6];
        for (c, v) in r.iter_mut().enumerate() {
            *v = self.rates(c).last().copied().flatten()?;
        }
        Some(r)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,h");
        for c in COLUMNS {
            let rate = c.replacen("err", "rate", 1);
            let _ = write!(s, ",{c},{rate}");
        }
        s.push('\n');
        let rates: Vec<Vec<Option<f64>>> = (0..6).map(|c| self.rates(c)).collect();
        for (i, l) in self.levels.iter().enumerate() {
            let _ = write!(s, "{},{:.10e}", l.level, l.h);
            for (c, e) in l.errors.iter().enumerate() {
                let _ = write!(s, ",{e:.10e},");
                if let Some(r) = rates[c][i] {
                    let _ = write!(s, "{r:.6}");
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn to_table(&self) -> String {
        let headers = [
            "‖u-u_h‖",
            "‖Q_hu-u_h‖",
            "‖u-L_hu_h‖",
            "|u-u_h|_1",
            "|||Q_hu-u_h|||",
            "|u-L_hu_h|_1",
        ];
        let mut s = String::new();
        let _ = writeln!(
            s,
            "family = {}, k = {}, solution = {}",
            self.family.name(),
            self.k,
            self.solution.name()
        );
        let _ = write!(s, "{:>5} {:>10}", "level", "h");
        for h in headers {
            let _ = write!(s, " {h:>16} {:>5}", "rate");
        }
        s.push('\n');
        let rates: Vec<Vec<Option<f64>>> = (0..6).map(|c| self.rates(c)).collect();
        for (i, l) in self.levels.iter().enumerate() {
            let _ = write!(s, "{:>5} {:>10}", l.level, fortran_format(l.h));
            for (c, e) in l.errors.iter().enumerate() {
                let r = rates[c][i].map_or_else(|| "-".to_string(), |r| format!("{r:.2}"));
                let _ = write!(s, " {:>16} {r:>5}", fortran_format(*e));
            }
            s.push('\n');
        }
        s
    }
}

/// Scientific notation with a mantissa in `[0.1, 1)` and four digits,
/// e.g. `0.7356E-03`.
pub fn fortran_format(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.4E}");
    }
    let sign = if x < 0.0 { "-" } else { "" };
    let a = x.abs();
    let mut e = a.log10().floor() as i32 + 1;
    let mut m = (a / 10f64.powi(e) * 1e4).round() / 1e4;
    if m >= 1.0 {
        m /= 10.0;
        e += 1;
    }
    if m < 0.1 {
        m *= 10.0;
        e -= 1;
    }
    let es = if e < 0 { '-' } else { '+' };
    format!("{sign}{m:.4}E{es}{:02}", e.abs())
}
