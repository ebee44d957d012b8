//! Command-line front end: configuration loading, the four commands and
//! their output files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::discretization::{Mesh, DEFAULT_QUADRATURE_POINTS};
use crate::equilibria::{DensityProfile, PhysicalParams, ProfileKind};
use crate::growth_solver::{lattice_magnitudes, snap_to_lattice, GrowthSolver, SolverConfig};
use crate::modes::{build_normal_mode, fmt17, ModeConfig};
use crate::verify::{geometric_grid, run_suite, CheckReport, Suite, VerifyContext};
use crate::{Error, Result};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "RTSPEC_THREADS";

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NO_BRANCH: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub mu: f64,
    pub g: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let p = PhysicalParams::default();
        ParamsSection {
            mu: p.mu,
            g: p.g,
            l1: p.l1,
            l2: p.l2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub kind: ProfileKind,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub a: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            kind: ProfileKind::Bump,
            rho_minus: 1.0,
            rho_plus: 2.0,
            a: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub n_elements: usize,
    pub quadrature_points: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection {
            n_elements: 64,
            quadrature_points: DEFAULT_QUADRATURE_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    #[serde(rename = "Kmax")]
    pub kmax: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection { kmax: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Directory for files whose path is not given on the command line.
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from(".") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Random trials per wavenumber in the inequality suite.
    pub trials: usize,
    /// Replaces every check tolerance when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            trials: 1000,
            tolerance: None,
        }
    }
}

/// Fully resolved run configuration. Every section is optional in the file;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub params: ParamsSection,
    pub profile: ProfileSection,
    pub mesh: MeshSection,
    pub solver: SolverConfig,
    pub lattice: LatticeSection,
    pub modes: ModeConfig,
    pub output: OutputSection,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 20240101,
            params: ParamsSection::default(),
            profile: ProfileSection::default(),
            mesh: MeshSection::default(),
            solver: SolverConfig::default(),
            lattice: LatticeSection::default(),
            modes: ModeConfig::default(),
            output: OutputSection::default(),
            verify: VerifySection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            key: offending_key(&e, text),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.physical_params()?;
        self.density_profile()?;
        self.mesh()?;
        self.solver.validate()?;
        self.modes.validate()?;
        if !(self.lattice.kmax > 0.0 && self.lattice.kmax.is_finite()) {
            return Err(Error::config("lattice.Kmax", format!("must be positive, got {}", self.lattice.kmax)));
        }
        if self.verify.trials == 0 {
            return Err(Error::config("verify.trials", "must be at least 1"));
        }
        if let Some(t) = self.verify.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config("verify.tolerance", format!("must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn physical_params(&self) -> Result<PhysicalParams> {
        let p = &self.params;
        PhysicalParams::new(p.mu, p.g, p.l1, p.l2)
    }

    pub fn density_profile(&self) -> Result<DensityProfile> {
        let p = &self.profile;
        DensityProfile::new(p.kind, p.rho_minus, p.rho_plus, p.a)
    }

    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::with_quadrature(self.profile.a, self.mesh.n_elements, self.mesh.quadrature_points)
    }

    pub fn solver(&self) -> Result<GrowthSolver> {
        GrowthSolver::new(self.mesh()?, self.density_profile()?, self.physical_params()?, self.solver)
    }

    /// The resolved configuration as TOML, used as the header of every output.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Best guess at the dotted key a TOML error refers to.
fn offending_key(e: &toml::de::Error, text: &str) -> String {
    let Some(rest) = e.message().strip_prefix("unknown field `") else {
        return "config".to_string();
    };
    let field = rest.split('`').next().unwrap_or_default();
    // the enclosing table is the last header before the error position
    let before = &text[..e.span().map_or(0, |s| s.start.min(text.len()))];
    let section = before
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim());
    match section {
        Some(sec) => format!("{sec}.{field}"),
        None => field.to_string(),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Domain(_) => EXIT_CONFIG,
        Error::NoUnstableBranch { .. } => EXIT_NO_BRANCH,
        Error::Coercivity { .. } | Error::Numerical(_) => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "rtspec", version, about = "Unstable spectrum of the linearized viscous Rayleigh-Taylor problem")]
pub struct Cli {
    /// TOML configuration; defaults are used for anything missing.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate λ_n over geometrically spaced wavenumbers.
    Dispersion {
        #[arg(long)]
        k_min: f64,
        #[arg(long)]
        k_max: f64,
        #[arg(long, default_value_t = 20)]
        n_k: usize,
        /// Defaults to solver.n_max.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximal growth rate over the lattice up to lattice.Kmax.
    LambdaMax {
        /// Also write the per-magnitude table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sample one normal mode.
    Mode {
        #[arg(long, allow_hyphen_values = true)]
        k1: f64,
        #[arg(long, allow_hyphen_values = true)]
        k2: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        /// appendixD, energy, inequality, monotone, convergence or all.
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

/// Parses the process arguments, runs the command and maps errors to exit codes.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("rtspec: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(cli: &Cli) -> Result<u8> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Dispersion {
            k_min,
            k_max,
            n_k,
            n_max,
            out,
        } => {
            let n_max = n_max.unwrap_or(cfg.solver.n_max);
            let path = out.clone().unwrap_or_else(|| cfg.output.dir.join("dispersion.csv"));
            cmd_dispersion(&cfg, *k_min, *k_max, *n_k, n_max, &path)
        }
        Command::LambdaMax { csv } => {
            let mut stdout = std::io::stdout().lock();
            cmd_lambda_max(&cfg, csv.as_deref(), &mut stdout)
        }
        Command::Mode { k1, k2, n, out } => {
            let path = out
                .clone()
                .unwrap_or_else(|| cfg.output.dir.join(format!("mode_{k1}_{k2}_{n}.csv")));
            cmd_mode(&cfg, *k1, *k2, *n, &path)
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let mut stdout = std::io::stdout().lock();
            cmd_verify(&cfg, suite, &mut stdout)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::config(THREADS_ENV, format!("must be a positive integer, got `{raw}`")))?;
    // a pool that is already built (e.g. a second call in-process) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Numerical(format!("writing {}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn comment_block(text: &str) -> String {
    text.lines()
        .map(|l| if l.is_empty() { "#\n".to_string() } else { format!("# {l}\n") })
        .collect()
}

/// Writes the dispersion table. Returns 0 when every branch converged or has
/// no unstable root, 4 otherwise.
pub fn cmd_dispersion(cfg: &RunConfig, k_min: f64, k_max: f64, n_k: usize, n_max: usize, path: &Path) -> Result<u8> {
    if !(k_min > 0.0 && k_min.is_finite()) {
        return Err(Error::config("k_min", format!("must be positive, got {k_min}")));
    }
    if !(k_max >= k_min && k_max.is_finite()) {
        return Err(Error::config("k_max", format!("must be at least k_min = {k_min}, got {k_max}")));
    }
    if n_k == 0 {
        return Err(Error::config("n_k", "must be at least 1"));
    }
    if n_max == 0 {
        return Err(Error::config("n_max", "must be at least 1"));
    }
    let solver = cfg.solver()?;
    let ks = geometric_grid(k_min, k_max, n_k);
    let outcomes = solver.dispersion(&ks, n_max)?;

    let mut header = comment_block(&cfg.echo());
    writeln!(header, "# command: dispersion k_min={k_min} k_max={k_max} n_k={n_k} n_max={n_max}").unwrap();
    let mut rows = String::from("k,n,lambda_n,residual,iterations,converged\n");
    let mut clean = true;
    for (i, out) in outcomes.iter().enumerate() {
        let (k, n) = (ks[i / n_max], i % n_max + 1);
        match out {
            Ok(r) => {
                clean &= r.converged;
                writeln!(
                    rows,
                    "{},{},{},{},{},{}",
                    fmt17(r.k),
                    r.n,
                    fmt17(r.lambda_n),
                    fmt17(r.residual),
                    r.iterations,
                    r.converged
                )
                .unwrap();
            }
            Err(Error::NoUnstableBranch { .. }) => {
                writeln!(header, "# no unstable branch: k={},n={n}", fmt17(k)).unwrap();
            }
            Err(e) => {
                clean = false;
                writeln!(header, "# failed: k={},n={n}: {e}", fmt17(k)).unwrap();
            }
        }
    }
    header.push_str(&rows);
    write_file(path, &header)?;
    Ok(if clean { EXIT_OK } else { EXIT_NUMERICAL })
}

/// Prints Λ, its argmax and the per-magnitude list; optionally writes a CSV.
pub fn cmd_lambda_max<W: Write>(cfg: &RunConfig, csv: Option<&Path>, out: &mut W) -> Result<u8> {
    let solver = cfg.solver()?;
    let params = solver.params();
    let lattice = lattice_magnitudes(params.l1, params.l2, cfg.lattice.kmax)?;
    let res = solver.lambda_max(cfg.lattice.kmax)?;
    let mut text = String::new();
    writeln!(text, "Lambda = {}", fmt17(res.lambda)).unwrap();
    writeln!(text, "argmax |k| = {}", fmt17(res.argmax_k)).unwrap();
    writeln!(text, "sqrt(g/L0) = {}", fmt17(res.lambda_cap)).unwrap();
    writeln!(text, "Lambda <= sqrt(g/L0): {}", res.lambda <= res.lambda_cap).unwrap();
    writeln!(text, "Kmax = {}", cfg.lattice.kmax).unwrap();
    writeln!(text, "magnitudes = {}", lattice.len()).unwrap();
    let mut table = String::from("k,k1,k2,lambda_1,residual,iterations,converged\n");
    for p in &lattice {
        match res.records.iter().find(|r| r.k == p.magnitude) {
            Some(r) => {
                writeln!(text, "  |k| = {}  lambda_1 = {}", fmt17(r.k), fmt17(r.lambda_n)).unwrap();
                writeln!(
                    table,
                    "{},{},{},{},{},{},{}",
                    fmt17(r.k),
                    fmt17(p.k1),
                    fmt17(p.k2),
                    fmt17(r.lambda_n),
                    fmt17(r.residual),
                    r.iterations,
                    r.converged
                )
                .unwrap();
            }
            None => writeln!(text, "  |k| = {}  stable", fmt17(p.magnitude)).unwrap(),
        }
    }
    out.write_all(text.as_bytes())
        .map_err(|e| Error::Numerical(format!("writing summary: {e}")))?;
    if let Some(path) = csv {
        let mut file = comment_block(&cfg.echo());
        file.push_str(&comment_block(&text));
        file.push_str(&table);
        write_file(path, &file)?;
    }
    Ok(EXIT_OK)
}

/// Writes the sample file of mode `n` at the lattice wavenumber `(k1, k2)`.
pub fn cmd_mode(cfg: &RunConfig, k1: f64, k2: f64, n: usize, path: &Path) -> Result<u8> {
    if k1 == 0.0 && k2 == 0.0 {
        return Err(Error::Domain("zero wavenumber excluded".into()));
    }
    if n == 0 {
        return Err(Error::config("n", "branch index starts at 1"));
    }
    let params = cfg.physical_params()?;
    if let Err((s1, s2)) = snap_to_lattice(params.l1, params.l2, k1, k2) {
        return Err(Error::config(
            "k",
            format!("({k1}, {k2}) is not on the lattice L1^-1 Z x L2^-1 Z; nearest lattice point is ({s1}, {s2})"),
        ));
    }
    let solver = cfg.solver()?;
    let mode = build_normal_mode(&solver, (k1, k2), n, &cfg.modes)?;
    let mut buf = Vec::new();
    let echo = format!("{}command: mode k1={k1} k2={k2} n={n}", cfg.echo());
    mode.write(&mut buf, &echo)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    fs::write(path, buf).map_err(io_err(path))?;
    Ok(EXIT_OK)
}

/// Runs a suite and prints one line per check. Returns 0 iff all pass.
pub fn cmd_verify<W: Write>(cfg: &RunConfig, suite: Suite, out: &mut W) -> Result<u8> {
    let ctx = VerifyContext {
        solver: cfg.solver()?,
        modes: cfg.modes,
        seed: cfg.seed,
        kmax: cfg.lattice.kmax,
        trials: cfg.verify.trials,
    };
    let mut reports = run_suite(suite, &ctx)?;
    if let Some(t) = cfg.verify.tolerance {
        reports = reports
            .into_iter()
            .map(|r| CheckReport::new(r.name, r.residual, t, r.metadata))
            .collect();
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    let mut text = String::new();
    for r in &reports {
        writeln!(text, "{r}").unwrap();
    }
    writeln!(text, "summary: {} checks, {failed} failed, seed={}", reports.len(), cfg.seed).unwrap();
    out.write_all(text.as_bytes())
        .map_err(|e| Error::Numerical(format!("writing report: {e}")))?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_toml("seed = 3\n[mesh]\nn_elements = 32\n[verify]\ntolerance = 1e-20\n").unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.echo()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("[solver]\ntol_rell = 1e-8\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "solver.tol_rell"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_top_level_key_is_named() {
        match RunConfig::from_toml("sed = 1\n").unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "sed"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn invalid_values_name_their_key() {
        let cases = [
            ("[mesh]\nn_elements = 1\n", "mesh.n_elements"),
            ("[params]\nmu = -1.0\n", "params.mu"),
            ("[profile]\nrho_plus = 0.5\n", "profile.rho_plus"),
            ("[lattice]\nKmax = 0.0\n", "lattice.Kmax"),
            ("[solver]\nn_max = 0\n", "solver.n_max"),
            ("[verify]\ntrials = 0\n", "verify.trials"),
            ("[modes]\nsamples = 1\n", "modes.samples"),
        ];
        for (text, want) in cases {
            match RunConfig::from_toml(text).unwrap_err() {
                Error::Config { key, .. } => assert_eq!(key, want, "{text}"),
                other => panic!("{text}: {other}"),
            }
        }
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&Error::config("x", "y")), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Domain("zero wavenumber excluded".into())), EXIT_CONFIG);
        let nb = Error::NoUnstableBranch {
            k: 1.0,
            n: 1,
            reason: String::new(),
        };
        assert_eq!(exit_code(&nb), EXIT_NO_BRANCH);
        assert_eq!(exit_code(&Error::Numerical(String::new())), EXIT_NUMERICAL);
    }
}
