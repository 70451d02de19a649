//! Convergence studies, reference eigenvalues, lower-bound reports and export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::eigen::{solve_smallest_with, EigenOptions, EigenResult};
use crate::error::{Error, Result};
use crate::mesh::{build_l_shape_mesh, build_unit_square_mesh, DomainKind, Mesh, Point};
use crate::wg::{assemble, GammaSchedule, LocalElement, StabilizerKind, WgSpace};

/// Leading corner exponent of the Stokes problem at a 270° reentrant corner.
pub const L_SHAPE_CORNER_EXPONENT: f64 = 0.544_483_736_782_46;

pub fn parse_domain(s: &str) -> Result<DomainKind> {
    match s {
        "square" | "unit-square" => Ok(DomainKind::UnitSquare),
        "lshape" | "l-shape" => Ok(DomainKind::LShape),
        _ => Err(Error::InvalidArgument(format!("unknown domain '{s}' (expected square or lshape)"))),
    }
}

/// Mesh with `n` subdivisions per unit length, so `h = 1/n`.
pub fn build_mesh(domain: DomainKind, n: usize) -> Result<Mesh> {
    match domain {
        DomainKind::UnitSquare => build_unit_square_mesh(n),
        DomainKind::LShape => build_l_shape_mesh(n),
        DomainKind::Custom => Err(Error::InvalidArgument("studies need the square or the L-shape".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    pub values: Vec<f64>,
    pub provenance: String,
    /// Set when the extrapolated sequence was not monotone.
    pub low_confidence: bool,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub domain: DomainKind,
    pub k: usize,
    pub gamma: GammaSchedule,
    pub stabilizer: StabilizerKind,
    /// Mesh denominators `n` with `h = 1/n`, strictly increasing.
    pub h_denominators: Vec<usize>,
    pub num_eigs: usize,
    pub references: Option<ReferenceSet>,
    pub tol: f64,
}

impl StudyConfig {
    pub fn new(domain: DomainKind, k: usize, gamma: GammaSchedule, h_denominators: Vec<usize>, num_eigs: usize) -> Self {
        Self {
            domain,
            k,
            gamma,
            stabilizer: StabilizerKind::Standard,
            h_denominators,
            num_eigs,
            references: None,
            tol: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.domain == DomainKind::Custom {
            return Err(Error::InvalidArgument("studies need the square or the L-shape".into()));
        }
        if !(1..=3).contains(&self.k) {
            return Err(Error::InvalidArgument(format!("k must satisfy 1 <= k <= 3, got {}", self.k)));
        }
        self.gamma.validate()?;
        if self.num_eigs == 0 {
            return Err(Error::InvalidArgument("number of eigenvalues must be at least 1".into()));
        }
        if self.h_denominators.is_empty() || self.h_denominators.contains(&0) {
            return Err(Error::InvalidArgument("h sequence must be a non-empty list of positive denominators".into()));
        }
        if self.h_denominators.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("h sequence must be strictly decreasing".into()));
        }
        if let Some(r) = &self.references {
            if r.values.len() < self.num_eigs {
                return Err(Error::InvalidArgument(format!(
                    "{} reference eigenvalues given, {} needed",
                    r.values.len(),
                    self.num_eigs
                )));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        Ok(())
    }

    /// Settings echoed into exported files.
    pub fn metadata(&self) -> Vec<(&'static str, String)> {
        let hs: Vec<String> = self.h_denominators.iter().map(|n| n.to_string()).collect();
        let mut out = vec![
            ("domain", self.domain.name().to_string()),
            ("k", self.k.to_string()),
            ("gamma", self.gamma.to_string()),
            ("stabilizer", self.stabilizer.to_string()),
            ("h_seq", hs.join(",")),
            ("num_eigs", self.num_eigs.to_string()),
            ("tol", format!("{:e}", self.tol)),
        ];
        if let Some(r) = &self.references {
            let vals: Vec<String> = r.values.iter().map(|v| format!("{v:e}")).collect();
            out.push(("references", vals.join(",")));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub h_denominator: usize,
    pub h: f64,
    pub j: usize,
    pub lambda_h: Option<f64>,
    pub lambda_ref: f64,
    /// λ_ref − λ_h
    pub error: Option<f64>,
    /// log(e(h_prev)/e(h)) / log(h_prev/h); absent on the coarsest level.
    pub order: Option<f64>,
    pub lower_bound: Option<bool>,
    pub failure: Option<String>,
}

/// Interior-field data of the finest successful level, kept for snapshots.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub mesh: Mesh,
    pub k: usize,
    pub eigen: EigenResult,
}

#[derive(Debug, Clone)]
pub struct StudyTable {
    pub config: StudyConfig,
    pub references: ReferenceSet,
    pub rows: Vec<StudyRow>,
    pub snapshot: Option<Snapshot>,
}

impl StudyTable {
    pub fn row(&self, h_denominator: usize, j: usize) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.h_denominator == h_denominator && r.j == j)
    }
}

fn eigen_options(tol: f64) -> EigenOptions {
    EigenOptions { tol, ..Default::default() }
}

/// Eigenvalues on one level of a study.
pub fn solve_level(
    domain: DomainKind,
    n: usize,
    k: usize,
    gamma: GammaSchedule,
    stabilizer: StabilizerKind,
    m: usize,
    tol: f64,
) -> Result<(Mesh, EigenResult)> {
    let mesh = build_mesh(domain, n)?;
    let space = WgSpace::new(&mesh, k)?;
    let system = assemble(&mesh, &space, gamma, stabilizer)?;
    let eig = solve_smallest_with(&system, m, &eigen_options(tol))?;
    Ok((mesh, eig))
}

/// Default reference levels: two for the square, three for the L-shape.
pub fn default_reference_levels(domain: DomainKind) -> Vec<usize> {
    match domain {
        DomainKind::LShape => vec![8, 16, 32],
        _ => vec![16, 32],
    }
}

pub fn reference_eigenvalues(domain: DomainKind, m: usize) -> Result<ReferenceSet> {
    reference_eigenvalues_with(domain, m, &default_reference_levels(domain), 1e-10)
}

/// Extrapolated eigenvalues from k = 2, γ = 1 solutions on `levels`.
///
/// Two levels use Richardson extrapolation under the `h⁴` model. Three
/// levels (needed on the L-shape) fit `λ − C₁ h^{2s} − C₂ h⁴`, with `s` the
/// corner exponent, which removes the leading singular term as well.
pub fn reference_eigenvalues_with(domain: DomainKind, m: usize, levels: &[usize], tol: f64) -> Result<ReferenceSet> {
    if !(levels.len() == 2 || levels.len() == 3) || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("reference levels must be 2 or 3 increasing denominators".into()));
    }
    let k = 2;
    let solved: Vec<Vec<f64>> = levels
        .par_iter()
        .map(|&n| solve_level(domain, n, k, GammaSchedule::Constant(1.0), StabilizerKind::Standard, m, tol).map(|r| r.1.eigenvalues))
        .collect::<Result<_>>()?;
    let hs: Vec<f64> = levels.iter().map(|&n| 1.0 / n as f64).collect();
    let mut values = Vec::with_capacity(m);
    let mut low_confidence = false;
    for j in 0..m {
        let seq: Vec<f64> = solved.iter().map(|l| l[j]).collect();
        if seq.windows(2).any(|w| w[1] < w[0]) {
            low_confidence = true;
        }
        values.push(match seq.len() {
            2 => richardson(seq[0], seq[1], (hs[0] / hs[1]).powi(2 * k as i32)),
            _ => two_term_fit(&hs, &seq, 2.0 * L_SHAPE_CORNER_EXPONENT, 2.0 * k as f64)?,
        });
    }
    let dens: Vec<String> = levels.iter().map(|n| format!("1/{n}")).collect();
    let model = if levels.len() == 2 { "richardson h^4" } else { "two-term fit h^(2s), h^4" };
    Ok(ReferenceSet {
        values,
        provenance: format!("{model}; k=2 gamma=const:1 h={}", dens.join(",")),
        low_confidence,
    })
}

/// `fine + (fine − coarse)/(ratio − 1)` where `ratio = (h_c/h_f)^p`.
pub fn richardson(coarse: f64, fine: f64, ratio: f64) -> f64 {
    fine + (fine - coarse) / (ratio - 1.0)
}

/// Solves `λ_h = λ − C₁ h^{p} − C₂ h^{q}` through three levels for λ.
fn two_term_fit(h: &[f64], lam: &[f64], p: f64, q: f64) -> Result<f64> {
    let a = nalgebra::Matrix3::from_fn(|i, c| match c {
        0 => 1.0,
        1 => -h[i].powf(p),
        _ => -h[i].powf(q),
    });
    let b = nalgebra::Vector3::new(lam[0], lam[1], lam[2]);
    a.lu()
        .solve(&b)
        .map(|x| x[0])
        .ok_or_else(|| Error::RankDeficient("degenerate extrapolation levels".into()))
}

pub fn run_study(config: &StudyConfig) -> Result<StudyTable> {
    config.validate()?;
    let m = config.num_eigs;
    let references = match &config.references {
        Some(r) => r.clone(),
        None => reference_eigenvalues(config.domain, m)?,
    };
    let levels: Vec<Result<(Mesh, EigenResult)>> = config
        .h_denominators
        .par_iter()
        .map(|&n| solve_level(config.domain, n, config.k, config.gamma, config.stabilizer, m, config.tol))
        .collect();

    let mut rows = Vec::with_capacity(levels.len() * m);
    let mut prev: Vec<Option<(f64, f64)>> = vec![None; m];
    let mut snapshot = None;
    for (&n, level) in config.h_denominators.iter().zip(&levels) {
        let h = 1.0 / n as f64;
        for j in 0..m {
            let lambda_ref = references.values[j];
            let row = match level {
                Ok((_, eig)) => {
                    let lambda_h = eig.eigenvalues[j];
                    let error = lambda_ref - lambda_h;
                    let order = match prev[j] {
                        Some((hp, ep)) if ep > 0.0 && error > 0.0 => Some((ep / error).ln() / (hp / h).ln()),
                        _ => None,
                    };
                    prev[j] = Some((h, error));
                    StudyRow {
                        h_denominator: n,
                        h,
                        j: j + 1,
                        lambda_h: Some(lambda_h),
                        lambda_ref,
                        error: Some(error),
                        order,
                        lower_bound: Some(error >= 0.0),
                        failure: None,
                    }
                }
                Err(e) => {
                    prev[j] = None;
                    StudyRow {
                        h_denominator: n,
                        h,
                        j: j + 1,
                        lambda_h: None,
                        lambda_ref,
                        error: None,
                        order: None,
                        lower_bound: None,
                        failure: Some(e.to_string()),
                    }
                }
            };
            rows.push(row);
        }
    }
    if let Some((mesh, eig)) = levels.into_iter().rev().find_map(|l| l.ok()) {
        snapshot = Some(Snapshot { mesh, k: config.k, eigen: eig });
    }
    Ok(StudyTable { config: config.clone(), references, rows, snapshot })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    pub total: usize,
    pub lower_bounds: usize,
    pub fraction: f64,
    /// Whether the γ schedule satisfies the lower-bound hypothesis γ(h) → 0.
    pub hypothesis_holds: bool,
    /// (h denominator, j) of rows with a negative error.
    pub violations: Vec<(usize, usize)>,
    pub failed: usize,
}

pub fn lower_bound_report(table: &StudyTable) -> LowerBoundReport {
    let evaluated: Vec<&StudyRow> = table.rows.iter().filter(|r| r.lower_bound.is_some()).collect();
    let lower_bounds = evaluated.iter().filter(|r| r.lower_bound == Some(true)).count();
    let total = evaluated.len();
    LowerBoundReport {
        total,
        lower_bounds,
        fraction: if total == 0 { 0.0 } else { lower_bounds as f64 / total as f64 },
        hypothesis_holds: table.config.gamma.vanishes(),
        violations: evaluated
            .iter()
            .filter(|r| r.lower_bound == Some(false))
            .map(|r| (r.h_denominator, r.j))
            .collect(),
        failed: table.rows.len() - total,
    }
}

impl std::fmt::Display for LowerBoundReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.hypothesis_holds { "certified-by-hypothesis" } else { "uncertified" };
        write!(
            f,
            "lower bounds: {}/{} rows ({:.1}%), {} failed, gamma schedule {}",
            self.lower_bounds,
            self.total,
            100.0 * self.fraction,
            self.failed,
            status
        )?;
        for (n, j) in &self.violations {
            write!(f, "\n  negative error at h=1/{n}, j={j}")?;
        }
        Ok(())
    }
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.11e}"))
}

pub fn csv_string(table: &StudyTable) -> String {
    let cfg = &table.config;
    let mut s = String::new();
    let meta: Vec<String> = cfg.metadata().iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(s, "# {} reference={}", meta.join(" "), table.references.provenance);
    let _ = writeln!(s, "domain,k,gamma,h,j,lambda_h,lambda_ref,error,order,lower_bound");
    for r in &table.rows {
        let lb = match r.lower_bound {
            Some(true) => "true",
            Some(false) => "false",
            None => "failed",
        };
        let _ = writeln!(
            s,
            "{},{},{},{:.11e},{},{},{:.11e},{},{},{}",
            cfg.domain.name(),
            cfg.k,
            cfg.gamma,
            r.h,
            r.j,
            num(r.lambda_h),
            r.lambda_ref,
            num(r.error),
            num(r.order),
            lb
        );
    }
    s
}

/// Log-log plot of the error against h for eigenvalue index `j`.
pub fn svg_plot(table: &StudyTable, j: usize) -> String {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.j == j)
        .filter_map(|r| r.error.filter(|e| *e > 0.0).map(|e| (r.h.log10(), e.log10())))
        .collect();
    let (w, hgt, pad) = (480.0, 360.0, 60.0);
    let bounds = |f: fn(&(f64, f64)) -> f64| -> (f64, f64) {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if pts.is_empty() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| hgt - pad - (y - y0) / (y1 - y0) * (hgt - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{hgt}" viewBox="0 0 {w} {hgt}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{hgt}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {} L{} {} M{pad} {} L{pad} {pad}" stroke="black" fill="none"/>"#,
        hgt - pad,
        w - pad,
        hgt - pad,
        hgt - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">log10 h</text>"#,
        w / 2.0,
        hgt - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {})">log10 error</text>"#,
        hgt / 2.0,
        hgt / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" font-size="16" text-anchor="middle">{} k={} gamma={} j={j}</text>"#,
        w / 2.0,
        table.config.domain.name(),
        table.config.k,
        table.config.gamma
    );
    for (val, pos) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(s, r#"<text x="{pos:.2}" y="{}" font-size="11" text-anchor="middle">{val:.3}</text>"#, hgt - pad + 16.0);
    }
    for (val, pos) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(s, r#"<text x="{}" y="{pos:.2}" font-size="11" text-anchor="end">{val:.3}</text>"#, pad - 6.0);
    }
    if !pts.is_empty() {
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#, path.join(" "));
        for (x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, sx(*x), sy(*y));
        }
    }
    s.push_str("</svg>\n");
    s
}

pub const RASTER_SIZE: usize = 129;

/// Samples `u₁, u₂, |u|, p` of mode `j` (1-based) from the interior
/// polynomial parts on a uniform raster over the domain's bounding box;
/// samples outside the domain are written as `nan`.
pub fn raster_csv(snapshot: &Snapshot, j: usize) -> Result<String> {
    let eig = &snapshot.eigen;
    let u = eig
        .eigenvectors
        .get(j - 1)
        .ok_or_else(|| Error::InvalidArgument(format!("mode {j} not available")))?;
    let mesh = &snapshot.mesh;
    let space = WgSpace::new(mesh, snapshot.k)?;
    let (lo, hi) = match mesh.domain {
        DomainKind::LShape => ([-1.0, -1.0], [1.0, 1.0]),
        _ => ([0.0, 0.0], [1.0, 1.0]),
    };
    let n = RASTER_SIZE;
    let coord = |i: usize, d: usize| lo[d] + (hi[d] - lo[d]) * i as f64 / (n - 1) as f64;
    let elements: Vec<LocalElement> =
        (0..mesh.num_cells()).into_par_iter().map(|c| LocalElement::new(mesh, c, snapshot.k)).collect::<Result<_>>()?;
    let pressure = u.pressure.as_deref().unwrap_or(&[]);
    let samples: Vec<String> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let p: Point = [coord(idx % n, 0), coord(idx / n, 1)];
            match locate(mesh, p) {
                Some(c) => {
                    let el = &elements[c];
                    let local = u.local_velocity(&space, mesh, c);
                    let u1 = el.eval_interior(&space, &local, 0, p);
                    let u2 = el.eval_interior(&space, &local, 1, p);
                    let pv: f64 = el
                        .low_basis
                        .values(p)
                        .iter()
                        .enumerate()
                        .map(|(a, v)| v * pressure.get(space.pressure_index(c, a)).copied().unwrap_or(0.0))
                        .sum();
                    format!("{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}", p[0], p[1], u1, u2, u1.hypot(u2), pv)
                }
                None => format!("{:.11e},{:.11e},nan,nan,nan,nan", p[0], p[1]),
            }
        })
        .collect();
    let mut s = String::from("x,y,u1,u2,speed,p\n");
    for line in samples {
        s.push_str(&line);
        s.push('\n');
    }
    Ok(s)
}

/// First cell containing `p` (with a small tolerance), by cell order.
fn locate(mesh: &Mesh, p: Point) -> Option<usize> {
    (0..mesh.num_cells()).find(|&c| {
        let [a, b, d] = mesh.cell_points(c);
        let area = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((b[0] - p[0]) * (d[1] - p[1]) - (d[0] - p[0]) * (b[1] - p[1])) / area;
        let l2 = ((d[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (d[1] - p[1])) / area;
        let l3 = 1.0 - l1 - l2;
        l1 >= -1e-12 && l2 >= -1e-12 && l3 >= -1e-12
    })
}

/// Files written by [`export`].
#[derive(Debug, Clone)]
pub struct ExportedFiles {
    pub csv: PathBuf,
    pub plots: Vec<PathBuf>,
    pub raster: Option<PathBuf>,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<prefix>.csv`, `<prefix>_j<j>.svg` per eigenvalue index and
/// `<prefix>_mode1_fields.csv` when a snapshot is available.
pub fn export(table: &StudyTable, prefix: &Path) -> Result<ExportedFiles> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let csv = with_suffix(prefix, ".csv");
    std::fs::write(&csv, csv_string(table))?;
    let mut plots = Vec::new();
    for j in 1..=table.config.num_eigs {
        let path = with_suffix(prefix, &format!("_j{j}.svg"));
        std::fs::write(&path, svg_plot(table, j))?;
        plots.push(path);
    }
    let raster = match &table.snapshot {
        Some(snap) => {
            let path = with_suffix(prefix, "_mode1_fields.csv");
            std::fs::write(&path, raster_csv(snap, 1)?)?;
            Some(path)
        }
        None => None,
    };
    Ok(ExportedFiles { csv, plots, raster })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(errors: &[f64]) -> StudyTable {
        let config = StudyConfig::new(DomainKind::UnitSquare, 1, GammaSchedule::Power(0.1), vec![4, 8, 16], 1);
        let rows = errors
            .iter()
            .zip([4usize, 8, 16])
            .map(|(&e, n)| StudyRow {
                h_denominator: n,
                h: 1.0 / n as f64,
                j: 1,
                lambda_h: Some(10.0 - e),
                lambda_ref: 10.0,
                error: Some(e),
                order: None,
                lower_bound: Some(e >= 0.0),
                failure: None,
            })
            .collect();
        StudyTable {
            config,
            references: ReferenceSet { values: vec![10.0], provenance: "test".into(), low_confidence: false },
            rows,
            snapshot: None,
        }
    }

    #[test]
    fn config_validation() {
        let ok = StudyConfig::new(DomainKind::UnitSquare, 1, GammaSchedule::Log, vec![4, 8], 2);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.h_denominators = vec![8, 4];
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.num_eigs = 0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.k = 0;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.references = Some(ReferenceSet { values: vec![1.0], provenance: "x".into(), low_confidence: false });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn negative_error_is_flagged() {
        let t = synthetic(&[1.0, -0.1, 0.05]);
        let rep = lower_bound_report(&t);
        assert_eq!((rep.total, rep.lower_bounds), (3, 2));
        assert_eq!(rep.violations, vec![(8, 1)]);
        assert!(rep.hypothesis_holds);
        assert!(rep.to_string().contains("h=1/8"));
        let mut c = t.clone();
        c.config.gamma = GammaSchedule::Constant(1.0);
        assert!(lower_bound_report(&c).to_string().contains("uncertified"));
    }

    #[test]
    fn richardson_removes_model_term() {
        let exact = 3.0;
        let f = |h: f64| exact - 5.0 * h.powi(4);
        assert!((richardson(f(0.1), f(0.05), 16.0) - exact).abs() < 1e-13);
        let g = |h: f64| exact - 2.0 * h.powf(1.1) - 7.0 * h.powi(4);
        let hs = [0.125, 0.0625, 0.03125];
        let l: Vec<f64> = hs.iter().map(|&h| g(h)).collect();
        assert!((two_term_fit(&hs, &l, 1.1, 4.0).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn csv_and_plot_shapes() {
        let t = synthetic(&[1.0, 0.25, 0.0625]);
        let csv = csv_string(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# domain=square k=1 gamma=pow:0.1"));
        assert_eq!(lines[1], "domain,k,gamma,h,j,lambda_h,lambda_ref,error,order,lower_bound");
        assert_eq!(lines.len(), 2 + 3);
        assert!(lines[2].ends_with(",,true"));
        let svg = svg_plot(&t, 1);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn small_study_is_deterministic() {
        let mut config = StudyConfig::new(DomainKind::UnitSquare, 1, GammaSchedule::Power(0.1), vec![2, 4], 2);
        config.references = Some(ReferenceSet { values: vec![52.3446911, 92.1], provenance: "given".into(), low_confidence: false });
        let a = run_study(&config).unwrap();
        let b = run_study(&config).unwrap();
        assert_eq!(csv_string(&a), csv_string(&b));
        assert_eq!(a.rows.len(), 4);
        assert!(a.rows[0].order.is_none() && a.rows[2].order.is_some());
        let raster = raster_csv(a.snapshot.as_ref().unwrap(), 1).unwrap();
        assert_eq!(raster.lines().count(), 1 + RASTER_SIZE * RASTER_SIZE);
        assert!(!raster.contains("nan"));
    }

    #[test]
    fn l_shape_raster_marks_the_hole() {
        let (mesh, eigen) = solve_level(DomainKind::LShape, 2, 1, GammaSchedule::Constant(1.0), StabilizerKind::Standard, 1, 1e-9).unwrap();
        let raster = raster_csv(&Snapshot { mesh, k: 1, eigen }, 1).unwrap();
        let outside = raster.lines().skip(1).filter(|l| l.ends_with("nan,nan,nan,nan")).count();
        // the open quadrant (0,1]² holds 64² of the 129² samples
        assert_eq!(outside, 64 * 64);
    }
}
