//! Command-line driver: `solve-eig`, `solve-source`, `study`, `glb-check`
//! and `mesh-info`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::eigen::{solve_smallest_with, EigenOptions, SolveMethod};
use crate::error::{Error, Result};
use crate::experiments::{self, build_mesh, parse_domain, ReferenceSet, StudyConfig};
use crate::glb::{check_conditions, check_lowest_order, derive_constants};
use crate::mesh::{validate, DomainKind};
use crate::source::{fitted_order, solve_source, ManufacturedCase};
use crate::wg::{assemble, GammaSchedule, StabilizerKind, WgSpace};

#[derive(Debug, Parser)]
#[command(name = "wgstokes", version, about = "Weak Galerkin solver for the Stokes eigenvalue problem")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smallest eigenpairs on one mesh.
    SolveEig(SolveEigArgs),
    /// Manufactured source problem over a sequence of meshes.
    SolveSource(SourceArgs),
    /// Eigenvalue convergence study with CSV/SVG export.
    Study(StudyArgs),
    /// Guaranteed-lower-bound certificate.
    GlbCheck(GlbArgs),
    /// Mesh statistics and validation.
    MeshInfo(MeshArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat `key = value` file; keys are long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// square | lshape
    #[arg(long, default_value = "square", value_parser = parse_domain_flag)]
    pub domain: DomainKind,
    /// Polynomial degree, 1 <= k <= 3.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// const[:c] | pow:<eps> | log
    #[arg(long, default_value = "const", value_parser = parse_gamma_flag)]
    pub gamma: GammaSchedule,
    /// standard | skeletal:<alpha>
    #[arg(long, default_value = "standard", value_parser = parse_stabilizer_flag)]
    pub stabilizer: StabilizerKind,
    /// Relative residual tolerance of the eigensolver.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Output prefix for data files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodFlag {
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Args)]
pub struct SolveEigArgs {
    #[command(flatten)]
    pub common: Common,
    /// Mesh denominator, h = 1/n.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 6)]
    pub num_eigs: usize,
    #[arg(long, value_enum, default_value_t = MethodFlag::Auto)]
    pub method: MethodFlag,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Mesh denominators, e.g. 4,8,16,32.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub h_seq: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Mesh denominators, e.g. 4,8,16,32.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub h_seq: Vec<usize>,
    #[arg(long, default_value_t = 6)]
    pub num_eigs: usize,
    /// Reference eigenvalues; extrapolated when absent.
    #[arg(long, value_delimiter = ',')]
    pub references: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct GlbArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Approximation constant; required unless `--kappa-cr` is given.
    #[arg(long)]
    pub c_apx: Option<f64>,
    /// Maximal mesh size; defaults to that of the mesh with denominator `n`.
    #[arg(long)]
    pub h_max: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long)]
    pub lambda_h: f64,
    #[arg(long)]
    pub lambda_ref: Option<f64>,
    /// Use the lowest-order test with this constant.
    #[arg(long)]
    pub kappa_cr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
}

fn parse_domain_flag(s: &str) -> std::result::Result<DomainKind, String> {
    parse_domain(s).map_err(|e| e.to_string())
}

fn parse_gamma_flag(s: &str) -> std::result::Result<GammaSchedule, String> {
    GammaSchedule::parse(s).map_err(|e| e.to_string())
}

fn parse_stabilizer_flag(s: &str) -> std::result::Result<StabilizerKind, String> {
    StabilizerKind::parse(s).map_err(|e| e.to_string())
}

impl Common {
    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.k) {
            return Err(Error::InvalidArgument(format!("k must satisfy 1 <= k <= 3, got {}", self.k)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidArgument(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        Ok(())
    }
}

fn positive_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(())
}

/// Expands `--config <file>` into `--key value` pairs placed right after
/// the subcommand, so explicit flags given later take precedence.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read config file {path}: {e}")))?;
    let mut extra = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("{path}:{}: expected key = value", ln + 1)))?;
        let key = k.trim().replace('_', "-");
        if key == "config" {
            return Err(Error::InvalidArgument(format!("{path}:{}: nested config files are not supported", ln + 1)));
        }
        extra.push(OsString::from(format!("--{key}")));
        extra.push(OsString::from(v.trim()));
    }
    let at = argv.len().min(2);
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::UnsupportedDegree { .. } => 1,
        _ => 2,
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status: 0 on success, 1 on invalid input, 2 on solver failure.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    return 0;
                }
                _ => 1,
            };
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::SolveEig(a) => solve_eig(a, out),
        Command::SolveSource(a) => source(a, out),
        Command::Study(a) => study(a, out),
        Command::GlbCheck(a) => glb(a, out),
        Command::MeshInfo(a) => mesh_info(a, out),
    }
}

fn solve_eig(a: SolveEigArgs, out: &mut dyn Write) -> Result<()> {
    let c = &a.common;
    c.validate()?;
    positive_n(a.n)?;
    if a.num_eigs == 0 {
        return Err(Error::InvalidArgument("num-eigs must be at least 1".into()));
    }
    let method = match a.method {
        MethodFlag::Auto => SolveMethod::Auto,
        MethodFlag::Dense => SolveMethod::Dense,
        MethodFlag::Iterative => SolveMethod::Iterative,
    };
    let mesh = build_mesh(c.domain, a.n)?;
    let space = WgSpace::new(&mesh, c.k)?;
    let system = assemble(&mesh, &space, c.gamma, c.stabilizer)?;
    let res = solve_smallest_with(&system, a.num_eigs, &EigenOptions { method, tol: c.tol, ..Default::default() })?;
    let mut csv = format!(
        "# domain={} k={} gamma={} stabilizer={} n={} num_eigs={} tol={:e} method={:?}\nj,lambda_h,residual\n",
        c.domain.name(),
        c.k,
        c.gamma,
        c.stabilizer,
        a.n,
        a.num_eigs,
        c.tol,
        res.method
    );
    writeln!(out, "{} h=1/{} k={} gamma={} ({:?}, {} steps)", c.domain.name(), a.n, c.k, c.gamma, res.method, res.iterations)?;
    for (j, (l, r)) in res.eigenvalues.iter().zip(&res.residuals).enumerate() {
        writeln!(out, "  lambda_{} = {:.11e}  residual {:.2e}", j + 1, l, r)?;
        csv.push_str(&format!("{},{:.11e},{:.3e}\n", j + 1, l, r));
    }
    if let Some(prefix) = &c.out {
        let path = with_suffix(prefix, ".csv");
        write_file(&path, &csv)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn source(a: SourceArgs, out: &mut dyn Write) -> Result<()> {
    let c = &a.common;
    c.validate()?;
    if a.h_seq.is_empty() || a.h_seq.contains(&0) || a.h_seq.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("h-seq must be strictly increasing positive denominators".into()));
    }
    let case = ManufacturedCase::stream_function();
    let mut csv = format!(
        "# domain={} k={} gamma={} stabilizer={} h_seq={}\nh,e_v,e_p,e_0,residual\n",
        c.domain.name(),
        c.k,
        c.gamma,
        c.stabilizer,
        a.h_seq.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
    );
    let (mut hs, mut ev, mut ep, mut e0) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    writeln!(out, "manufactured source problem, k={} gamma={}", c.k, c.gamma)?;
    for &n in &a.h_seq {
        let mesh = build_mesh(c.domain, n)?;
        let space = WgSpace::new(&mesh, c.k)?;
        let sol = solve_source(&mesh, &space, c.gamma, c.stabilizer, &case)?;
        let h = 1.0 / n as f64;
        let e = sol.errors;
        writeln!(out, "  h=1/{n}: e_V={:.4e} e_p={:.4e} e_0={:.4e}", e.e_v, e.e_p, e.e_0)?;
        csv.push_str(&format!("{h:.11e},{:.11e},{:.11e},{:.11e},{:.3e}\n", e.e_v, e.e_p, e.e_0, sol.residual));
        hs.push(h);
        ev.push(e.e_v);
        ep.push(e.e_p);
        e0.push(e.e_0);
    }
    if hs.len() >= 2 {
        writeln!(
            out,
            "fitted orders: V {:.3}, pressure {:.3}, L2 {:.3}",
            fitted_order(&hs, &ev),
            fitted_order(&hs, &ep),
            fitted_order(&hs, &e0)
        )?;
    }
    if let Some(prefix) = &c.out {
        let path = with_suffix(prefix, ".csv");
        write_file(&path, &csv)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn study(a: StudyArgs, out: &mut dyn Write) -> Result<()> {
    let c = &a.common;
    c.validate()?;
    let mut config = StudyConfig::new(c.domain, c.k, c.gamma, a.h_seq.clone(), a.num_eigs);
    config.stabilizer = c.stabilizer;
    config.tol = c.tol;
    config.references = a.references.clone().map(|values| ReferenceSet {
        values,
        provenance: "given".into(),
        low_confidence: false,
    });
    config.validate()?;
    let table = experiments::run_study(&config)?;
    if table.references.low_confidence {
        writeln!(out, "warning: extrapolated references are low-confidence ({})", table.references.provenance)?;
    }
    writeln!(out, "{:>6} {:>3} {:>18} {:>18} {:>12} {:>7}", "h", "j", "lambda_h", "lambda_ref", "error", "order")?;
    for r in &table.rows {
        match (r.lambda_h, r.error) {
            (Some(l), Some(e)) => writeln!(
                out,
                "{:>6} {:>3} {:>18.10} {:>18.10} {:>12.4e} {:>7}",
                format!("1/{}", r.h_denominator),
                r.j,
                l,
                r.lambda_ref,
                e,
                r.order.map_or_else(|| "-".to_string(), |o| format!("{o:.4}"))
            )?,
            _ => writeln!(
                out,
                "{:>6} {:>3} failed: {}",
                format!("1/{}", r.h_denominator),
                r.j,
                r.failure.as_deref().unwrap_or("")
            )?,
        }
    }
    writeln!(out, "{}", experiments::lower_bound_report(&table))?;
    if let Some(prefix) = &c.out {
        let files = experiments::export(&table, prefix)?;
        writeln!(out, "wrote {}", files.csv.display())?;
    }
    if table.rows.iter().any(|r| r.failure.is_some()) {
        return Err(Error::NoConvergence { iterations: 0, residuals: Vec::new() });
    }
    Ok(())
}

fn glb(a: GlbArgs, out: &mut dyn Write) -> Result<()> {
    a.common.validate()?;
    let h_max = match a.h_max {
        Some(h) => h,
        None => {
            positive_n(a.n)?;
            build_mesh(a.common.domain, a.n)?.h_max
        }
    };
    if !(a.lambda_h > 0.0 && a.lambda_h.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda-h must be positive, got {}", a.lambda_h)));
    }
    let cert = match a.kappa_cr {
        Some(kappa) => {
            if !(kappa > 0.0 && kappa.is_finite()) {
                return Err(Error::InvalidArgument(format!("kappa-cr must be positive, got {kappa}")));
            }
            if !(a.alpha >= 0.0) || !(h_max > 0.0) {
                return Err(Error::InvalidArgument("alpha must be >= 0 and h-max > 0".into()));
            }
            check_lowest_order(a.alpha, h_max, kappa, a.lambda_ref, a.lambda_h)
        }
        None => {
            let c_apx = a
                .c_apx
                .ok_or_else(|| Error::InvalidArgument("glb-check needs --c-apx (or --kappa-cr for the lowest-order test)".into()))?;
            check_conditions(&derive_constants(a.alpha, c_apx, h_max, a.dim)?, a.lambda_ref, a.lambda_h)
        }
    };
    write!(out, "{cert}")?;
    if let Some(prefix) = &a.common.out {
        let path = with_suffix(prefix, ".cert");
        write_file(&path, &cert.to_string())?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn mesh_info(a: MeshArgs, out: &mut dyn Write) -> Result<()> {
    a.common.validate()?;
    positive_n(a.n)?;
    let mesh = build_mesh(a.common.domain, a.n)?;
    let space = WgSpace::new(&mesh, a.common.k)?;
    let violations = validate(&mesh);
    writeln!(out, "domain {} n={}", mesh.domain.name(), a.n)?;
    writeln!(out, "  vertices {} edges {} cells {}", mesh.num_vertices(), mesh.num_edges(), mesh.num_cells())?;
    writeln!(out, "  h_max {:.6e} area {:.6e}", mesh.h_max, mesh.total_area())?;
    writeln!(
        out,
        "  k={}: interior {} edge {} pressure {}",
        a.common.k, space.n_interior, space.n_edge, space.n_pressure
    )?;
    writeln!(out, "  validation: {}", if violations.is_empty() { "ok".to_string() } else { format!("{violations:?}") })?;
    if let Some(prefix) = &a.common.out {
        let path = with_suffix(prefix, ".mesh");
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        mesh.write_text(&path)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    if !violations.is_empty() {
        return Err(Error::InvalidArgument("mesh failed validation".into()));
    }
    Ok(())
}
