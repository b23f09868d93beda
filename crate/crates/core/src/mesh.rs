//! Structured node-centred grids for the bulk domain and its boundary.
//!
//! Two geometries are supported:
//!
//! * `Interval`: nodes `x_j = j·h`, `h = lx/(nx−1)`; the boundary is the two
//!   endpoints, each carrying unit (counting) measure, and the surface
//!   gradient is the zero map.
//! * `PeriodicStrip`: periodic in `x` with `hx = lx/nx` (no duplicated seam
//!   column), bounded in `y` with `hy = ly/(ny−1)`; the boundary is the two
//!   rows `y = 0` and `y = ly`, each a periodic circle.
//!
//! Surface unknowns are the boundary rows of the bulk grid. Gradients live on
//! edges (forward differences); every edge carries a dual-cell weight so that
//! `Σ_e w_e (D_e u)²` is the usual five-point Dirichlet form.
//!
//! Nodes are stored row-major: node `(i, j)` has index `j·nx + i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    PeriodicStrip,
    Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub geometry: Geometry,
    pub nx: usize,
    #[serde(default = "default_ny")]
    pub ny: usize,
    pub lx: f64,
    #[serde(default = "default_ly")]
    pub ly: f64,
}

fn default_ny() -> usize {
    1
}

fn default_ly() -> f64 {
    1.0
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            geometry: Geometry::PeriodicStrip,
            nx: 64,
            ny: 32,
            lx: 1.0,
            ly: 1.0,
        }
    }
}

impl MeshSpec {
    pub fn interval(nx: usize, lx: f64) -> Self {
        Self {
            geometry: Geometry::Interval,
            nx,
            ny: 1,
            lx,
            ly: 1.0,
        }
    }

    pub fn strip(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        Self {
            geometry: Geometry::PeriodicStrip,
            nx,
            ny,
            lx,
            ly,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.nx < 2 {
            return Err(Error::InvalidParameter(format!("nx = {} must be >= 2", self.nx)));
        }
        if !(self.lx > 0.0) || !self.lx.is_finite() {
            return Err(Error::InvalidParameter(format!("lx = {} must be > 0", self.lx)));
        }
        if self.geometry == Geometry::PeriodicStrip {
            if self.ny < 3 {
                return Err(Error::InvalidParameter(format!(
                    "ny = {} must be >= 3 for a periodic strip",
                    self.ny
                )));
            }
            if !(self.ly > 0.0) || !self.ly.is_finite() {
                return Err(Error::InvalidParameter(format!("ly = {} must be > 0", self.ly)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// A forward difference `D_e u = (u[head] − u[tail]) · inv_len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub inv_len: f64,
    /// Quadrature weight of the edge's dual cell.
    pub weight: f64,
    pub axis: Axis,
}

impl Edge {
    #[inline]
    pub fn diff(&self, u: &[f64]) -> f64 {
        (u[self.head] - u[self.tail]) * self.inv_len
    }
}

/// Boundary node with its quadrature data and the edge joining it to the interior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryNode {
    pub node: usize,
    pub area: f64,
    /// Adjacent interior node (one-sided trace).
    pub interior: usize,
    /// Edge from `node` to `interior` along the normal direction.
    pub normal_edge: usize,
    /// `±1` so that `normal_sign · p[normal_edge]` is the outward normal component.
    pub normal_sign: f64,
    /// Boundary component (0 = bottom/left, 1 = top/right).
    pub component: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    spec: MeshSpec,
    hx: f64,
    hy: f64,
    coords: Vec<[f64; 2]>,
    volume: Vec<f64>,
    edges: Vec<Edge>,
    boundary: Vec<BoundaryNode>,
    /// Surface edges, indexed into `boundary` (not node indices).
    surface_edges: Vec<Edge>,
    slot_of_node: Vec<Option<usize>>,
}

pub fn build_mesh(spec: &MeshSpec) -> Result<Mesh> {
    Mesh::new(spec)
}

impl Mesh {
    pub fn new(spec: &MeshSpec) -> Result<Self> {
        spec.check()?;
        match spec.geometry {
            Geometry::Interval => Ok(Self::interval(spec)),
            Geometry::PeriodicStrip => Ok(Self::strip(spec)),
        }
    }

    fn interval(spec: &MeshSpec) -> Self {
        let n = spec.nx;
        let h = spec.lx / (n - 1) as f64;
        let coords = (0..n).map(|j| [j as f64 * h, 0.0]).collect();
        let mut volume = vec![h; n];
        volume[0] = 0.5 * h;
        volume[n - 1] = 0.5 * h;
        let edges: Vec<Edge> = (0..n - 1)
            .map(|j| Edge {
                tail: j,
                head: j + 1,
                inv_len: 1.0 / h,
                weight: h,
                axis: Axis::X,
            })
            .collect();
        let boundary = vec![
            BoundaryNode {
                node: 0,
                area: 1.0,
                interior: 1,
                normal_edge: 0,
                normal_sign: -1.0,
                component: 0,
            },
            BoundaryNode {
                node: n - 1,
                area: 1.0,
                interior: n - 2,
                normal_edge: n - 2,
                normal_sign: 1.0,
                component: 1,
            },
        ];
        Self::assemble(spec.clone(), h, 0.0, coords, volume, edges, boundary, Vec::new())
    }

    fn strip(spec: &MeshSpec) -> Self {
        let (nx, ny) = (spec.nx, spec.ny);
        let hx = spec.lx / nx as f64;
        let hy = spec.ly / (ny - 1) as f64;
        let idx = |i: usize, j: usize| j * nx + i;
        let mut coords = Vec::with_capacity(nx * ny);
        let mut volume = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let row_scale = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
            for i in 0..nx {
                coords.push([i as f64 * hx, j as f64 * hy]);
                volume.push(row_scale * hx * hy);
            }
        }
        let mut edges = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            let row_scale = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
            for i in 0..nx {
                edges.push(Edge {
                    tail: idx(i, j),
                    head: idx((i + 1) % nx, j),
                    inv_len: 1.0 / hx,
                    weight: row_scale * hx * hy,
                    axis: Axis::X,
                });
            }
        }
        let first_y = edges.len();
        let y_edge = |i: usize, j: usize| first_y + j * nx + i;
        for j in 0..ny - 1 {
            for i in 0..nx {
                edges.push(Edge {
                    tail: idx(i, j),
                    head: idx(i, j + 1),
                    inv_len: 1.0 / hy,
                    weight: hx * hy,
                    axis: Axis::Y,
                });
            }
        }
        let mut boundary = Vec::with_capacity(2 * nx);
        for i in 0..nx {
            boundary.push(BoundaryNode {
                node: idx(i, 0),
                area: hx,
                interior: idx(i, 1),
                normal_edge: y_edge(i, 0),
                normal_sign: -1.0,
                component: 0,
            });
        }
        for i in 0..nx {
            boundary.push(BoundaryNode {
                node: idx(i, ny - 1),
                area: hx,
                interior: idx(i, ny - 2),
                normal_edge: y_edge(i, ny - 2),
                normal_sign: 1.0,
                component: 1,
            });
        }
        let mut surface_edges = Vec::with_capacity(2 * nx);
        for c in 0..2 {
            for i in 0..nx {
                surface_edges.push(Edge {
                    tail: c * nx + i,
                    head: c * nx + (i + 1) % nx,
                    inv_len: 1.0 / hx,
                    weight: hx,
                    axis: Axis::X,
                });
            }
        }
        Self::assemble(spec.clone(), hx, hy, coords, volume, edges, boundary, surface_edges)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        spec: MeshSpec,
        hx: f64,
        hy: f64,
        coords: Vec<[f64; 2]>,
        volume: Vec<f64>,
        edges: Vec<Edge>,
        boundary: Vec<BoundaryNode>,
        surface_edges: Vec<Edge>,
    ) -> Self {
        let mut slot_of_node = vec![None; coords.len()];
        for (s, b) in boundary.iter().enumerate() {
            slot_of_node[b.node] = Some(s);
        }
        Self {
            spec,
            hx,
            hy,
            coords,
            volume,
            edges,
            boundary,
            surface_edges,
            slot_of_node,
        }
    }

    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn geometry(&self) -> Geometry {
        self.spec.geometry
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn n_surface_edges(&self) -> usize {
        self.surface_edges.len()
    }

    /// Grid spacing along x.
    pub fn hx(&self) -> f64 {
        self.hx
    }

    /// Grid spacing normal to the boundary (y for the strip, x for the interval).
    pub fn normal_spacing(&self) -> f64 {
        match self.spec.geometry {
            Geometry::Interval => self.hx,
            Geometry::PeriodicStrip => self.hy,
        }
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Bulk quadrature weights.
    pub fn volumes(&self) -> &[f64] {
        &self.volume
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn surface_edges(&self) -> &[Edge] {
        &self.surface_edges
    }

    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.slot_of_node[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.slot_of_node[node].is_some()
    }

    /// Lumped mass of the product space `L²(Ω) × L²(Γ)` under the identification
    /// of surface unknowns with boundary nodes.
    pub fn h_mass(&self) -> Vec<f64> {
        let mut m = self.volume.clone();
        for b in &self.boundary {
            m[b.node] += b.area;
        }
        m
    }

    pub(crate) fn check_bulk(&self, u: &[f64], what: &'static str) -> Result<()> {
        if u.len() != self.n_nodes() {
            return Err(Error::shape(what, self.n_nodes(), u.len()));
        }
        Ok(())
    }

    pub(crate) fn check_surface(&self, u: &[f64], what: &'static str) -> Result<()> {
        if u.len() != self.n_boundary() {
            return Err(Error::shape(what, self.n_boundary(), u.len()));
        }
        Ok(())
    }

    pub fn apply_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_bulk(u, "bulk field")?;
        Ok(self.edges.iter().map(|e| e.diff(u)).collect())
    }

    pub fn apply_surface_gradient(&self, u_gamma: &[f64]) -> Result<Vec<f64>> {
        self.check_surface(u_gamma, "surface field")?;
        Ok(self.surface_edges.iter().map(|e| e.diff(u_gamma)).collect())
    }

    /// Values of a bulk field on its boundary nodes (the surface field under the identification).
    pub fn restrict_to_boundary(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_bulk(u, "bulk field")?;
        Ok(self.boundary.iter().map(|b| u[b.node]).collect())
    }

    /// One-sided interior trace: the value at the interior neighbour of each boundary node.
    pub fn trace_interior(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_bulk(u, "bulk field")?;
        Ok(self.boundary.iter().map(|b| u[b.interior]).collect())
    }

    /// `Dᵀ W p`: for every node, `Σ_e w_e p_e ∂(D_e u)/∂u_node`.
    pub fn gradient_transpose(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.n_edges() {
            return Err(Error::shape("edge field", self.n_edges(), p.len()));
        }
        let mut out = vec![0.0; self.n_nodes()];
        for (e, &pe) in self.edges.iter().zip(p) {
            let c = e.weight * e.inv_len * pe;
            out[e.head] += c;
            out[e.tail] -= c;
        }
        Ok(out)
    }

    /// Outward normal component of an edge field at each boundary node.
    pub fn normal_component(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.n_edges() {
            return Err(Error::shape("edge field", self.n_edges(), p.len()));
        }
        Ok(self.boundary.iter().map(|b| b.normal_sign * p[b.normal_edge]).collect())
    }

    /// Discrete divergence, defined so that
    /// `⟨∇_h u, p⟩_edges = −⟨u, div_h p⟩_bulk + Σ_Γ u (p·n) dΓ` holds exactly.
    pub fn divergence(&self, p: &[f64]) -> Result<Vec<f64>> {
        let c = self.gradient_transpose(p)?;
        let flux = self.normal_component(p)?;
        let mut div: Vec<f64> = c.iter().map(|v| -v).collect();
        for (b, f) in self.boundary.iter().zip(&flux) {
            div[b.node] += b.area * f;
        }
        for (d, m) in div.iter_mut().zip(&self.volume) {
            *d /= m;
        }
        Ok(div)
    }

    /// `Σ_Γ u (p·n) dΓ`.
    pub fn boundary_flux(&self, u: &[f64], p: &[f64]) -> Result<f64> {
        self.check_bulk(u, "bulk field")?;
        let flux = self.normal_component(p)?;
        Ok(self
            .boundary
            .iter()
            .zip(&flux)
            .map(|(b, f)| u[b.node] * f * b.area)
            .sum())
    }

    /// `⟨p, q⟩_edges = Σ_e w_e p_e q_e`.
    pub fn edge_inner(&self, p: &[f64], q: &[f64]) -> f64 {
        self.edges
            .iter()
            .zip(p.iter().zip(q))
            .map(|(e, (a, b))| e.weight * a * b)
            .sum()
    }

    /// `⟨u, v⟩_bulk = Σ_n m_n u_n v_n`.
    pub fn bulk_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.volume
            .iter()
            .zip(u.iter().zip(v))
            .map(|(m, (a, b))| m * a * b)
            .sum()
    }

    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.volume.iter().zip(u).map(|(m, v)| m * v).sum()
    }

    pub fn integrate_surface(&self, u_gamma: &[f64]) -> f64 {
        self.boundary.iter().zip(u_gamma).map(|(b, v)| b.area * v).sum()
    }

    /// `x,y,value` rows (y omitted for the interval), row-major, with header.
    pub fn field_csv(&self, u: &[f64]) -> Result<String> {
        self.check_bulk(u, "bulk field")?;
        let mut out = String::new();
        match self.spec.geometry {
            Geometry::Interval => {
                out.push_str("x,value\n");
                for (c, v) in self.coords.iter().zip(u) {
                    out.push_str(&format!("{},{}\n", c[0], v));
                }
            }
            Geometry::PeriodicStrip => {
                out.push_str("x,y,value\n");
                for (c, v) in self.coords.iter().zip(u) {
                    out.push_str(&format!("{},{},{}\n", c[0], c[1], v));
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`Mesh::field_csv`]; coordinates are checked against the mesh.
    pub fn parse_field_csv(&self, text: &str) -> Result<Vec<f64>> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().trim();
        let ncol = match (self.spec.geometry, header) {
            (Geometry::Interval, "x,value") => 2,
            (Geometry::PeriodicStrip, "x,y,value") => 3,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unexpected field header `{header}`"
                )))
            }
        };
        let mut out = Vec::with_capacity(self.n_nodes());
        for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != ncol || k >= self.n_nodes() {
                return Err(Error::InvalidParameter(format!("malformed field row {}", k + 2)));
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!("bad number `{s}` in field row {}", k + 2))
                })
            };
            for (d, col) in cols[..ncol - 1].iter().enumerate() {
                let x = parse(col)?;
                if (x - self.coords[k][d]).abs() > 1e-9 * (1.0 + x.abs()) {
                    return Err(Error::InvalidParameter(format!(
                        "field row {} does not match mesh coordinates",
                        k + 2
                    )));
                }
            }
            out.push(parse(cols[ncol - 1])?);
        }
        self.check_bulk(&out, "field file")?;
        Ok(out)
    }
}
