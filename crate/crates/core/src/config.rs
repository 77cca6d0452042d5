//! Study configuration from command-line flags and an optional TOML file.
//!
//! Flags override values read from the file. Example file:
//!
//! ```toml
//! family = "mixed"
//! k = 1
//! levels = "3..5"
//! csv_out = "table3.csv"
//! ```

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Deserialize;

use crate::mesh::MeshFamily;
use crate::solver::DEFAULT_TOLERANCE;
use crate::study::ExactSolution;
use crate::{Result, WgError};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub family: MeshFamily,
    pub k: usize,
    pub levels: RangeInclusive<u32>,
    pub solution: ExactSolution,
    pub solver_tol: f64,
    pub dump_mesh: Option<PathBuf>,
    pub dump_lambda_dims: bool,
    pub dump_certificates: bool,
    pub csv_out: Option<PathBuf>,
}

impl StudyConfig {
    /// Desk-scale defaults for a family: levels 3..5 in 2D and 2..4 in 3D.
    pub fn new(family: MeshFamily, k: usize) -> Self {
        Self {
            family,
            k,
            levels: default_levels(family),
            solution: ExactSolution::for_dim(family.dim()),
            solver_tol: DEFAULT_TOLERANCE,
            dump_mesh: None,
            dump_lambda_dims: false,
            dump_certificates: false,
            csv_out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(config_err("k", "polynomial degree must be at least 1"));
        }
        if self.k > 4 {
            return Err(config_err(
                "k",
                format!("degree {} exceeds the quadrature range (k <= 4)", self.k),
            ));
        }
        if self.levels.is_empty() {
            return Err(config_err("levels", "empty level range"));
        }
        if self.family.dim() != self.solution.dim() {
            return Err(config_err(
                "solution",
                format!(
                    "dimension mismatch: family `{}` is {}D but solution `{}` is {}D",
                    self.family.name(),
                    self.family.dim(),
                    self.solution.name(),
                    self.solution.dim()
                ),
            ));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(config_err("solver-tol", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> WgError {
    WgError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

pub fn default_levels(family: MeshFamily) -> RangeInclusive<u32> {
    if family.dim() == 3 {
        2..=4
    } else {
        3..=5
    }
}

/// Deeper refinement runs (5..=7 in 2D, 2..=5 in 3D).
pub fn full_levels(family: MeshFamily) -> RangeInclusive<u32> {
    if family.dim() == 3 {
        2..=5
    } else {
        5..=7
    }
}

/// Parses `a..b`, `a..=b` or a single level.
pub fn parse_levels(s: &str) -> Result<RangeInclusive<u32>> {
    let bad = || {
        config_err(
            "levels",
            format!("malformed range `{s}` (expected e.g. 3..5)"),
        )
    };
    let s = s.trim();
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (s, s),
    };
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    if b > 9 {
        return Err(config_err(
            "levels",
            format!("level {b} is beyond the supported range 0..=9"),
        ));
    }
    Ok(a..=b)
}

/// Weak Galerkin Poisson solver with P_{k+2} lifting: convergence studies.
#[derive(Debug, Parser)]
#[command(name = "wg-lift", version)]
pub struct Cli {
    /// Mesh family: quad, mixed or wedge.
    #[arg(long)]
    pub family: Option<String>,
    /// Polynomial degree k of the interior space.
    #[arg(long)]
    pub k: Option<usize>,
    /// Inclusive level range, e.g. 3..5.
    #[arg(long)]
    pub levels: Option<String>,
    /// Run the deeper refinement levels (5..=7 in 2D, 2..=5 in 3D).
    #[arg(long, conflicts_with = "levels")]
    pub full_levels: bool,
    /// Exact solution: sine2d or sine3d.
    #[arg(long)]
    pub solution: Option<String>,
    /// Write each level's mesh to DIR/<family>_level<L>.wgmesh.
    #[arg(long, value_name = "DIR")]
    pub dump_mesh: Option<PathBuf>,
    /// Print the dimension of the test space on every cell class.
    #[arg(long)]
    pub dump_lambda_dims: bool,
    /// Print the lifting certificate sigma_min of every cell.
    #[arg(long)]
    pub dump_certificates: bool,
    /// Write the convergence table as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv_out: Option<PathBuf>,
    /// Relative residual at which PCG stops.
    #[arg(long)]
    pub solver_tol: Option<f64>,
    /// TOML file with any of the options above (flags take precedence).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    family: Option<String>,
    k: Option<usize>,
    levels: Option<String>,
    #[serde(default)]
    full_levels: bool,
    solution: Option<String>,
    dump_mesh: Option<PathBuf>,
    #[serde(default)]
    dump_lambda_dims: bool,
    #[serde(default)]
    dump_certificates: bool,
    csv_out: Option<PathBuf>,
    solver_tol: Option<f64>,
}

fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| config_err("config", format!("{}: {}", path.display(), e.message())))
}

/// Builds a validated configuration from parsed flags.
pub fn config_from_cli(cli: Cli) -> Result<StudyConfig> {
    let file = match &cli.config {
        Some(p) => read_file_config(p)?,
        None => FileConfig::default(),
    };
    let family: MeshFamily = cli
        .family
        .or(file.family)
        .ok_or_else(|| config_err("family", "missing (expected quad, mixed or wedge)"))?
        .parse()?;
    let k = cli.k.or(file.k).unwrap_or(1);
    let mut config = StudyConfig::new(family, k);
    if let Some(s) = cli.solution.or(file.solution) {
        config.solution = s.parse()?;
    }
    if let Some(l) = cli.levels {
        config.levels = parse_levels(&l)?;
    } else if cli.full_levels {
        config.levels = full_levels(family);
    } else if let Some(l) = file.levels {
        config.levels = parse_levels(&l)?;
    } else if file.full_levels {
        config.levels = full_levels(family);
    }
    config.solver_tol = cli
        .solver_tol
        .or(file.solver_tol)
        .unwrap_or(DEFAULT_TOLERANCE);
    config.dump_mesh = cli.dump_mesh.or(file.dump_mesh);
    config.dump_lambda_dims = cli.dump_lambda_dims || file.dump_lambda_dims;
    config.dump_certificates = cli.dump_certificates || file.dump_certificates;
    config.csv_out = cli.csv_out.or(file.csv_out);
    config.validate()?;
    Ok(config)
}

/// Parses command-line arguments (including the program name) into a
/// validated configuration.
pub fn parse_config<I, T>(args: I) -> Result<StudyConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli =
        Cli::try_parse_from(args).map_err(|e| config_err("arguments", e.to_string().trim_end()))?;
    config_from_cli(cli)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(e: WgError) -> String {
        match e {
            WgError::Config { field, .. } => field,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn valid_flags() {
        let c = parse_config([
            "wg-lift", "--family", "quad", "--k", "1", "--levels", "3..5",
        ])
        .unwrap();
        assert_eq!(c.family, MeshFamily::Quad);
        assert_eq!(c.k, 1);
        assert_eq!(c.levels, 3..=5);
        assert_eq!(c.solution, ExactSolution::Sine2d);
    }

    #[test]
    fn defaults_per_dimension() {
        let c = parse_config(["wg-lift", "--family", "wedge"]).unwrap();
        assert_eq!(c.levels, 2..=4);
        assert_eq!(c.solution, ExactSolution::Sine3d);
        let c = parse_config(["wg-lift", "--family", "mixed", "--full-levels"]).unwrap();
        assert_eq!(c.levels, 5..=7);
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_config(["wg-lift", "--family", "wedge", "--solution", "sine2d"]).unwrap_err();
        assert_eq!(field_of(e), "solution");
        let e = parse_config(["wg-lift", "--family", "quad", "--k", "0"]).unwrap_err();
        assert_eq!(field_of(e), "k");
        let e = parse_config(["wg-lift", "--family", "hex"]).unwrap_err();
        assert_eq!(field_of(e), "family");
        let e = parse_config(["wg-lift", "--family", "quad", "--levels", "5..3"]).unwrap_err();
        assert_eq!(field_of(e), "levels");
        let e = parse_config(["wg-lift", "--family", "quad", "--levels", "a..b"]).unwrap_err();
        assert_eq!(field_of(e), "levels");
    }

    #[test]
    fn level_syntax() {
        assert_eq!(parse_levels("2..=4").unwrap(), 2..=4);
        assert_eq!(parse_levels(" 3 ").unwrap(), 3..=3);
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.toml");
        std::fs::write(
            &path,
            "family = \"mixed\"\nk = 2\nlevels = \"2..3\"\ncsv_out = \"t.csv\"\n",
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let c = parse_config(["wg-lift", "--config", p]).unwrap();
        assert_eq!(
            (c.family, c.k, c.levels.clone()),
            (MeshFamily::Mixed, 2, 2..=3)
        );
        assert_eq!(c.csv_out.as_deref(), Some(Path::new("t.csv")));
        let c = parse_config(["wg-lift", "--config", p, "--k", "1"]).unwrap();
        assert_eq!(c.k, 1);
        std::fs::write(&path, "famly = \"quad\"\n").unwrap();
        let e = parse_config(["wg-lift", "--config", p]).unwrap_err();
        assert_eq!(field_of(e), "config");
    }
}
