//! Conforming triangulations of the unit square and the L-shaped domain.
//!
//! Every mesh is stored with dense, deterministic indices: vertices in grid
//! order, cells in lexicographic order of the lower-left corner of their grid
//! square, and edges in order of first appearance while walking the cells.
//! Each edge carries a global orientation (lower vertex id first) which the
//! edge polynomial bases use, so both neighbours of an interior edge see the
//! same parameterization.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    UnitSquare,
    LShape,
    Custom,
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::UnitSquare => "square",
            DomainKind::LShape => "lshape",
            DomainKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
}

impl Vertex {
    pub fn point(&self) -> Point {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints, lower vertex id first. This fixes the edge orientation.
    pub vertices: [usize; 2],
    /// Adjacent cells; the second entry is `None` on the boundary.
    pub cells: [Option<usize>; 2],
    pub boundary: bool,
    pub length: f64,
    /// Outward unit normal seen from `cells[0]` and `cells[1]` respectively.
    pub normals: [Point; 2],
}

impl Edge {
    pub fn midpoint(&self, mesh: &Mesh) -> Point {
        let a = mesh.vertices[self.vertices[0]];
        let b = mesh.vertices[self.vertices[1]];
        [0.5 * (a.x + b.x), 0.5 * (a.y + b.y)]
    }

    /// Unit tangent pointing from the first to the second endpoint.
    pub fn tangent(&self, mesh: &Mesh) -> Point {
        let a = mesh.vertices[self.vertices[0]];
        let b = mesh.vertices[self.vertices[1]];
        [(b.x - a.x) / self.length, (b.y - a.y) / self.length]
    }

    /// Outward normal of this edge with respect to `cell`.
    pub fn normal_for(&self, cell: usize) -> Point {
        if self.cells[0] == Some(cell) {
            self.normals[0]
        } else {
            self.normals[1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Counterclockwise vertex triple.
    pub vertices: [usize; 3],
    /// `edges[i]` joins `vertices[i]` and `vertices[(i + 1) % 3]`.
    pub edges: [usize; 3],
    pub area: f64,
    /// Diameter, i.e. the longest edge.
    pub diameter: f64,
    pub centroid: Point,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub cells: Vec<Cell>,
    pub h_max: f64,
    pub domain: DomainKind,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

impl Mesh {
    /// Builds the edge list and all geometric quantities from a vertex list
    /// and counterclockwise cell triples.
    pub fn from_cells(points: Vec<Point>, triples: Vec<[usize; 3]>, domain: DomainKind) -> Result<Self> {
        let vertices: Vec<Vertex> = points.iter().map(|p| Vertex { x: p[0], y: p[1] }).collect();
        if let Some(p) = points.iter().find(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite vertex {p:?}")));
        }
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut cells = Vec::with_capacity(triples.len());

        for (ci, tri) in triples.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!("cell {ci} references a missing vertex")));
            }
            let p = tri.map(|v| points[v]);
            let area = signed_area(p[0], p[1], p[2]);
            let mut cell_edges = [0usize; 3];
            let mut diameter = 0.0f64;
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let len = dist(points[a], points[b]);
                diameter = diameter.max(len);
                let eid = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        cells: [None, None],
                        boundary: true,
                        length: len,
                        normals: [[0.0; 2]; 2],
                    });
                    edges.len() - 1
                });
                // outward normal of a CCW triangle: tangent rotated clockwise
                let t = [points[b][0] - points[a][0], points[b][1] - points[a][1]];
                let normal = [t[1] / len, -t[0] / len];
                let e = &mut edges[eid];
                if e.cells[0].is_none() {
                    e.cells[0] = Some(ci);
                    e.normals[0] = normal;
                } else if e.cells[1].is_none() {
                    e.cells[1] = Some(ci);
                    e.normals[1] = normal;
                    e.boundary = false;
                } else {
                    return Err(Error::InvalidArgument(format!("edge {key:?} shared by more than two cells")));
                }
                cell_edges[i] = eid;
            }
            let centroid = [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ];
            cells.push(Cell {
                vertices: *tri,
                edges: cell_edges,
                area,
                diameter,
                centroid,
            });
        }
        let h_max = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
        Ok(Mesh {
            vertices,
            edges,
            cells,
            h_max,
            domain,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_points(&self, cell: usize) -> [Point; 3] {
        self.cells[cell].vertices.map(|v| self.vertices[v].point())
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Plain-text export: `v x y` and `c i j k` lines, `#` comments.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# domain {} vertices {} cells {}",
            self.domain.name(),
            self.num_vertices(),
            self.num_cells()
        );
        for v in &self.vertices {
            let _ = writeln!(s, "v {:.17e} {:.17e}", v.x, v.y);
        }
        for c in &self.cells {
            let _ = writeln!(s, "c {} {} {}", c.vertices[0], c.vertices[1], c.vertices[2]);
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Uniform triangulation of (0,1)² with `n` squares per side, each square
/// cut along its bottom-left to top-right diagonal.
pub fn build_unit_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("unit square mesh needs n >= 1".into()));
    }
    let h = 1.0 / n as f64;
    let mut points = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            points.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triples = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            split_square(&mut triples, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
        }
    }
    Mesh::from_cells(points, triples, DomainKind::UnitSquare)
}

/// Uniform triangulation of (-1,1)² \ [0,1]² with `n` squares per unit length.
pub fn build_l_shape_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("L-shape mesh needs n >= 1".into()));
    }
    let m = 2 * n;
    let h = 1.0 / n as f64;
    // grid index of the reentrant corner (0,0)
    let inside = |i: usize, j: usize| !(i >= n && j >= n);
    // a grid node is used if any adjacent square is inside
    let used = |i: usize, j: usize| {
        let lo_i = i.saturating_sub(1);
        let lo_j = j.saturating_sub(1);
        (lo_i..=i.min(m - 1)).any(|si| (lo_j..=j.min(m - 1)).any(|sj| inside(si, sj)))
    };
    let mut index = vec![usize::MAX; (m + 1) * (m + 1)];
    let mut points = Vec::new();
    for j in 0..=m {
        for i in 0..=m {
            if used(i, j) {
                index[j * (m + 1) + i] = points.len();
                points.push([-1.0 + i as f64 * h, -1.0 + j as f64 * h]);
            }
        }
    }
    let id = |i: usize, j: usize| index[j * (m + 1) + i];
    let mut triples = Vec::with_capacity(6 * n * n);
    for j in 0..m {
        for i in 0..m {
            if inside(i, j) {
                split_square(&mut triples, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            }
        }
    }
    Mesh::from_cells(points, triples, DomainKind::LShape)
}

fn split_square(triples: &mut Vec<[usize; 3]>, ll: usize, lr: usize, ur: usize, ul: usize) {
    triples.push([ll, lr, ur]);
    triples.push([ll, ur, ul]);
}

/// Red refinement: every triangle is split into four congruent children
/// through its edge midpoints.
pub fn uniform_refine(mesh: &Mesh) -> Result<Mesh> {
    let nv = mesh.num_vertices();
    let mut points: Vec<Point> = mesh.vertices.iter().map(|v| v.point()).collect();
    for e in &mesh.edges {
        points.push(e.midpoint(mesh));
    }
    let mut triples = Vec::with_capacity(4 * mesh.num_cells());
    for c in &mesh.cells {
        let [a, b, cc] = c.vertices;
        let m_ab = nv + c.edges[0];
        let m_bc = nv + c.edges[1];
        let m_ca = nv + c.edges[2];
        triples.push([a, m_ab, m_ca]);
        triples.push([m_ab, b, m_bc]);
        triples.push([m_ca, m_bc, cc]);
        triples.push([m_ab, m_bc, m_ca]);
    }
    Mesh::from_cells(points, triples, mesh.domain)
}

/// A violated mesh invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Orientation { cell: usize, signed_area: f64 },
    Adjacency { edge: usize, detail: String },
    Euler { characteristic: i64 },
    Normal { edge: usize, detail: String },
    Measure { detail: String },
}

/// Checks every structural and geometric invariant; returns an empty list on
/// success.
pub fn validate(mesh: &Mesh) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut refs = vec![0usize; mesh.num_edges()];

    for (ci, c) in mesh.cells.iter().enumerate() {
        let p = mesh.cell_points(ci);
        let sa = signed_area(p[0], p[1], p[2]);
        if !(sa > 0.0) {
            out.push(Violation::Orientation { cell: ci, signed_area: sa });
        }
        if (c.area - sa).abs() > 1e-14 * sa.abs().max(f64::MIN_POSITIVE) {
            out.push(Violation::Measure {
                detail: format!("cell {ci}: stored area {} vs {}", c.area, sa),
            });
        }
        let longest = (0..3).map(|i| dist(p[i], p[(i + 1) % 3])).fold(0.0, f64::max);
        if (c.diameter - longest).abs() > 1e-14 * longest {
            out.push(Violation::Measure {
                detail: format!("cell {ci}: diameter {} vs longest edge {}", c.diameter, longest),
            });
        }
        for i in 0..3 {
            let Some(e) = mesh.edges.get(c.edges[i]) else {
                out.push(Violation::Adjacency {
                    edge: c.edges[i],
                    detail: format!("cell {ci} references a missing edge"),
                });
                continue;
            };
            refs[c.edges[i]] += 1;
            let (a, b) = (c.vertices[i], c.vertices[(i + 1) % 3]);
            if e.vertices != [a.min(b), a.max(b)] {
                out.push(Violation::Adjacency {
                    edge: c.edges[i],
                    detail: format!("cell {ci} local edge {i} does not match its vertices"),
                });
            }
            if !e.cells.contains(&Some(ci)) {
                out.push(Violation::Adjacency {
                    edge: c.edges[i],
                    detail: format!("edge does not list cell {ci}"),
                });
            }
        }
    }

    for (ei, e) in mesh.edges.iter().enumerate() {
        let n_adj = e.cells.iter().flatten().count();
        if refs[ei] != n_adj || n_adj == 0 {
            out.push(Violation::Adjacency {
                edge: ei,
                detail: format!("referenced by {} cells, lists {}", refs[ei], n_adj),
            });
        }
        if e.boundary != (n_adj == 1) {
            out.push(Violation::Adjacency {
                edge: ei,
                detail: format!("boundary flag {} with {} adjacent cells", e.boundary, n_adj),
            });
        }
        let (Some(a), Some(b)) = (mesh.vertices.get(e.vertices[0]), mesh.vertices.get(e.vertices[1])) else {
            continue;
        };
        let len = dist(a.point(), b.point());
        if (e.length - len).abs() > 1e-14 * len {
            out.push(Violation::Measure {
                detail: format!("edge {ei}: length {} vs {}", e.length, len),
            });
        }
        let mid = [0.5 * (a.x + b.x), 0.5 * (a.y + b.y)];
        for (slot, cell) in e.cells.iter().enumerate() {
            let Some(ci) = *cell else { continue };
            let Some(c) = mesh.cells.get(ci) else { continue };
            let nrm = e.normals[slot];
            let to_mid = [mid[0] - c.centroid[0], mid[1] - c.centroid[1]];
            if nrm[0] * to_mid[0] + nrm[1] * to_mid[1] <= 0.0 {
                out.push(Violation::Normal {
                    edge: ei,
                    detail: format!("normal for cell {ci} points inward"),
                });
            }
            if ((nrm[0] * nrm[0] + nrm[1] * nrm[1]).sqrt() - 1.0).abs() > 1e-12 {
                out.push(Violation::Normal {
                    edge: ei,
                    detail: "normal is not unit length".into(),
                });
            }
        }
        if n_adj == 2 {
            let d = e.normals[0][0] * e.normals[1][0] + e.normals[0][1] * e.normals[1][1];
            if (d + 1.0).abs() > 1e-12 {
                out.push(Violation::Normal {
                    edge: ei,
                    detail: format!("normals not antiparallel (dot {d})"),
                });
            }
        }
    }

    let chi = mesh.num_vertices() as i64 - mesh.num_edges() as i64 + mesh.num_cells() as i64;
    if chi != 1 {
        out.push(Violation::Euler { characteristic: chi });
    }
    let h = mesh.cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
    if mesh.h_max != h {
        out.push(Violation::Measure {
            detail: format!("h_max {} vs max diameter {}", mesh.h_max, h),
        });
    }
    out
}
