//! Axis-aligned rectangular meshes with one-irregular quadtree refinement.
//!
//! Cells are stored in a flat arena (active and refined cells alike); a
//! refined cell keeps its id and gains four children. Edge topology is
//! rebuilt from vertex ids after every refinement, so the slit domain's
//! duplicated vertices cut the mesh without any geometric special cases.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

pub type CellId = usize;
pub type EdgeId = usize;
pub type VertexId = usize;

/// Which of the three model domains a mesh discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainTag {
    /// `(0,1)^2`
    Square,
    /// `(-1,1)^2` minus the closed quadrant `[0,1]^2`
    LShape,
    /// `(-1,1)^2` cut along `{0} x (-1,0)`
    Slit,
}

impl DomainTag {
    pub fn area(self) -> f64 {
        match self {
            DomainTag::Square => 1.0,
            DomainTag::LShape => 3.0,
            DomainTag::Slit => 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainTag::Square => "square",
            DomainTag::LShape => "lshape",
            DomainTag::Slit => "slit",
        }
    }
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DomainTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(DomainTag::Square),
            "lshape" => Ok(DomainTag::LShape),
            "slit" => Ok(DomainTag::Slit),
            other => Err(Error::InvalidArgument(format!("unknown domain '{other}'"))),
        }
    }
}

/// Local face numbering of a rectangle: `x`-min, `x`-max, `y`-min, `y`-max.
pub const FACE_OUTWARD_NORMALS: [[f64; 2]; 4] = [[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]];

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: CellId,
    pub level: u32,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub parent: Option<CellId>,
    pub children: Option<[CellId; 4]>,
    /// Counter-clockwise from the lower-left corner.
    pub vertices: [VertexId; 4],
}

impl Cell {
    pub fn is_active(&self) -> bool {
        self.children.is_none()
    }

    pub fn dx(&self) -> f64 {
        self.upper[0] - self.lower[0]
    }

    pub fn dy(&self) -> f64 {
        self.upper[1] - self.lower[1]
    }

    /// Cell diameter (diagonal length).
    pub fn diameter(&self) -> f64 {
        self.dx().hypot(self.dy())
    }

    pub fn area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.lower[0] + self.upper[0]), 0.5 * (self.lower[1] + self.upper[1])]
    }

    /// Physical point to reference coordinates in `[0,1]^2`.
    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        [(x[0] - self.lower[0]) / self.dx(), (x[1] - self.lower[1]) / self.dy()]
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> [f64; 2] {
        [self.lower[0] + xi[0] * self.dx(), self.lower[1] + xi[1] * self.dy()]
    }

    /// Face endpoints, ordered by increasing tangential coordinate.
    pub fn face_endpoints(&self, face: usize) -> ([f64; 2], [f64; 2]) {
        let [x0, y0] = self.lower;
        let [x1, y1] = self.upper;
        match face {
            0 => ([x0, y0], [x0, y1]),
            1 => ([x1, y0], [x1, y1]),
            2 => ([x0, y0], [x1, y0]),
            3 => ([x0, y1], [x1, y1]),
            _ => panic!("face index {face} out of range"),
        }
    }

    fn face_vertices(&self, face: usize) -> (VertexId, VertexId) {
        let [v0, v1, v2, v3] = self.vertices;
        match face {
            0 => (v0, v3),
            1 => (v1, v2),
            2 => (v0, v1),
            3 => (v3, v2),
            _ => panic!("face index {face} out of range"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    InteriorRegular,
    /// Coarse side of a hanging configuration; not an integration face.
    HangingMaster,
    /// Half of a master edge, seen from the fine cell.
    HangingSlave,
    Boundary,
}

/// One cell's view of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSide {
    pub cell: CellId,
    pub face: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub vertices: [VertexId; 2],
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub kind: EdgeKind,
    /// For slaves this is the fine cell; for regular faces the cell whose
    /// outward normal points in the positive coordinate direction.
    pub plus: EdgeSide,
    pub minus: Option<EdgeSide>,
    /// Unit outward normal of the `plus` cell.
    pub normal: [f64; 2],
    pub master: Option<EdgeId>,
    pub slaves: Option<[EdgeId; 2]>,
}

impl Edge {
    pub fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }

    pub fn midpoint(&self) -> [f64; 2] {
        [0.5 * (self.start[0] + self.end[0]), 0.5 * (self.start[1] + self.end[1])]
    }

    pub fn point_at(&self, t: f64) -> [f64; 2] {
        [
            self.start[0] + t * (self.end[0] - self.start[0]),
            self.start[1] + t * (self.end[1] - self.start[1]),
        ]
    }

    pub fn is_integration_face(&self) -> bool {
        self.kind != EdgeKind::HangingMaster
    }

    pub fn is_interior(&self) -> bool {
        matches!(self.kind, EdgeKind::InteriorRegular | EdgeKind::HangingSlave)
    }
}

/// Relationship of one active-cell face to the rest of the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceLink {
    Boundary,
    /// Conforming interior face shared with `neighbor`.
    Regular { edge: EdgeId, neighbor: EdgeSide },
    /// Coarse face covered by two finer neighbors.
    Master { edge: EdgeId },
    /// Fine face lying on half `half` (0 = lower coordinate) of `master`.
    Slave { edge: EdgeId, master: EdgeSide, half: usize },
}

type VertexKey = (i64, i64, i8);

const COORD_SCALE: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone)]
pub struct Mesh {
    domain: DomainTag,
    cells: Vec<Cell>,
    vertices: Vec<[f64; 2]>,
    vertex_index: HashMap<VertexKey, VertexId>,
    active: Vec<CellId>,
    edges: Vec<Edge>,
    face_links: HashMap<CellId, [FaceLink; 4]>,
}

impl Mesh {
    pub fn domain(&self) -> DomainTag {
        self.domain
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id]
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Active cell ids in ascending order.
    pub fn active_cells(&self) -> &[CellId] {
        &self.active
    }

    pub fn num_active(&self) -> usize {
        self.active.len()
    }

    /// All edges, including hanging masters.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Integration faces: regular interior faces, slave sub-edges and
    /// boundary faces.
    pub fn active_edges(&self) -> Vec<&Edge> {
        self.edges.iter().filter(|e| e.is_integration_face()).collect()
    }

    pub fn face_links(&self, cell: CellId) -> &[FaceLink; 4] {
        &self.face_links[&cell]
    }

    pub fn max_level(&self) -> u32 {
        self.active.iter().map(|&c| self.cells[c].level).max().unwrap_or(0)
    }

    pub fn total_area(&self) -> f64 {
        self.active.iter().map(|&c| self.cells[c].area()).sum()
    }

    pub fn hanging_master_count(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::HangingMaster).count()
    }

    fn vertex_key(&self, p: [f64; 2], cell_center_x: f64) -> VertexKey {
        let side = if self.domain == DomainTag::Slit && p[0] == 0.0 && p[1] < 0.0 {
            if cell_center_x < 0.0 {
                -1
            } else {
                1
            }
        } else {
            0
        };
        ((p[0] * COORD_SCALE).round() as i64, (p[1] * COORD_SCALE).round() as i64, side)
    }

    fn add_vertex(&mut self, p: [f64; 2], cell_center_x: f64) -> VertexId {
        let key = self.vertex_key(p, cell_center_x);
        let next = self.vertices.len();
        let id = *self.vertex_index.entry(key).or_insert(next);
        if id == next {
            self.vertices.push(p);
        }
        id
    }

    fn push_cell(&mut self, lower: [f64; 2], upper: [f64; 2], level: u32, parent: Option<CellId>) -> CellId {
        let cx = 0.5 * (lower[0] + upper[0]);
        let corners = [lower, [upper[0], lower[1]], upper, [lower[0], upper[1]]];
        let vertices = corners.map(|p| self.add_vertex(p, cx));
        let id = self.cells.len();
        self.cells.push(Cell { id, level, lower, upper, parent, children: None, vertices });
        id
    }

    fn split(&mut self, id: CellId) {
        debug_assert!(self.cells[id].is_active());
        let Cell { lower, upper, level, .. } = self.cells[id].clone();
        let mid = [0.5 * (lower[0] + upper[0]), 0.5 * (lower[1] + upper[1])];
        let quads = [
            (lower, mid),
            ([mid[0], lower[1]], [upper[0], mid[1]]),
            ([lower[0], mid[1]], [mid[0], upper[1]]),
            (mid, upper),
        ];
        let children = quads.map(|(lo, hi)| self.push_cell(lo, hi, level + 1, Some(id)));
        self.cells[id].children = Some(children);
    }

    /// A cell must be refined when a vertex sits at a quarter point of one
    /// of its faces: the neighbor there is two levels finer.
    fn violates_one_irregularity(&self, id: CellId) -> bool {
        let cell = &self.cells[id];
        let cx = cell.center()[0];
        (0..4).any(|f| {
            let (a, b) = cell.face_endpoints(f);
            [0.25, 0.75].iter().any(|&t| {
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                self.vertex_index.contains_key(&self.vertex_key(p, cx))
            })
        })
    }

    fn rebuild_topology(&mut self) {
        self.active = self.cells.iter().filter(|c| c.is_active()).map(|c| c.id).collect();

        let mut owners: HashMap<(VertexId, VertexId), Vec<EdgeSide>> = HashMap::new();
        for &c in &self.active {
            for face in 0..4 {
                owners.entry(self.cells[c].face_vertices(face)).or_default().push(EdgeSide { cell: c, face });
            }
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut links: HashMap<CellId, [FaceLink; 4]> =
            self.active.iter().map(|&c| (c, [FaceLink::Boundary; 4])).collect();
        let mut consumed: HashSet<(VertexId, VertexId)> = HashSet::new();

        let make_edge = |id: EdgeId, seg: (VertexId, VertexId), kind, plus: EdgeSide, minus, verts: &[[f64; 2]]| Edge {
            id,
            vertices: [seg.0, seg.1],
            start: verts[seg.0],
            end: verts[seg.1],
            kind,
            plus,
            minus,
            normal: FACE_OUTWARD_NORMALS[plus.face],
            master: None,
            slaves: None,
        };

        for &c in &self.active {
            for face in 0..4 {
                let seg = self.cells[c].face_vertices(face);
                if consumed.contains(&seg) {
                    continue;
                }
                let sides = &owners[&seg];
                if sides.len() == 2 {
                    let (plus, minus) = if sides[0].face % 2 == 1 { (sides[0], sides[1]) } else { (sides[1], sides[0]) };
                    let id = edges.len();
                    edges.push(make_edge(id, seg, EdgeKind::InteriorRegular, plus, Some(minus), &self.vertices));
                    links.get_mut(&plus.cell).unwrap()[plus.face] = FaceLink::Regular { edge: id, neighbor: minus };
                    links.get_mut(&minus.cell).unwrap()[minus.face] = FaceLink::Regular { edge: id, neighbor: plus };
                    consumed.insert(seg);
                    continue;
                }
                debug_assert_eq!(sides.len(), 1);
                let cell = &self.cells[c];
                let (a, b) = (self.vertices[seg.0], self.vertices[seg.1]);
                let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let Some(&mid) = self.vertex_index.get(&self.vertex_key(m, cell.center()[0])) else {
                    continue;
                };
                let halves = [(seg.0, mid), (mid, seg.1)];
                let (Some(lo), Some(hi)) = (owners.get(&halves[0]), owners.get(&halves[1])) else {
                    continue;
                };
                if lo.len() != 1 || hi.len() != 1 {
                    continue;
                }
                let coarse = EdgeSide { cell: c, face };
                let master_id = edges.len();
                edges.push(make_edge(master_id, seg, EdgeKind::HangingMaster, coarse, None, &self.vertices));
                let mut slave_ids = [0; 2];
                for (half, (hseg, fine)) in halves.iter().zip([lo[0], hi[0]]).enumerate() {
                    let id = edges.len();
                    let mut e = make_edge(id, *hseg, EdgeKind::HangingSlave, fine, Some(coarse), &self.vertices);
                    e.master = Some(master_id);
                    edges.push(e);
                    slave_ids[half] = id;
                    links.get_mut(&fine.cell).unwrap()[fine.face] =
                        FaceLink::Slave { edge: id, master: coarse, half };
                    consumed.insert(*hseg);
                }
                edges[master_id].slaves = Some(slave_ids);
                links.get_mut(&c).unwrap()[face] = FaceLink::Master { edge: master_id };
                consumed.insert(seg);
            }
        }

        for &c in &self.active {
            for face in 0..4 {
                let seg = self.cells[c].face_vertices(face);
                if consumed.insert(seg) {
                    let id = edges.len();
                    edges.push(make_edge(id, seg, EdgeKind::Boundary, EdgeSide { cell: c, face }, None, &self.vertices));
                }
            }
        }

        self.edges = edges;
        self.face_links = links;
    }

    /// Refines the marked cells and then every cell needed to restore
    /// one-irregularity. Closure sweeps cells in ascending id order.
    pub fn refine(&self, marked: &BTreeSet<CellId>) -> Result<Mesh> {
        for &c in marked {
            if c >= self.cells.len() || !self.cells[c].is_active() {
                return Err(Error::InvalidArgument(format!("cell {c} is not an active cell")));
            }
        }
        let mut mesh = self.clone();
        if marked.is_empty() {
            return Ok(mesh);
        }
        for &c in marked {
            mesh.split(c);
        }
        loop {
            let mut changed = false;
            let mut id = 0;
            while id < mesh.cells.len() {
                if mesh.cells[id].is_active() && mesh.violates_one_irregularity(id) {
                    mesh.split(id);
                    changed = true;
                }
                id += 1;
            }
            if !changed {
                break;
            }
        }
        mesh.rebuild_topology();
        Ok(mesh)
    }

    /// Refines every active cell once.
    pub fn refine_uniform(&self) -> Mesh {
        let all: BTreeSet<CellId> = self.active.iter().copied().collect();
        self.refine(&all).expect("active cells are valid marks")
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let area = self.total_area();
        let expected = self.domain.area();
        if ((area - expected) / expected).abs() > 1e-12 {
            return Err(format!("active area {area} differs from domain area {expected}"));
        }
        for c in &self.cells {
            if c.diameter() <= 0.0 {
                return Err(format!("cell {} is degenerate", c.id));
            }
            if let Some(children) = c.children {
                let sum: f64 = children.iter().map(|&k| self.cells[k].area()).sum();
                if (sum - c.area()).abs() > 1e-14 * c.area().max(1.0) {
                    return Err(format!("children of cell {} do not partition it", c.id));
                }
            }
        }
        for e in &self.edges {
            match e.kind {
                EdgeKind::InteriorRegular | EdgeKind::HangingSlave => {
                    let minus = e.minus.ok_or_else(|| format!("interior edge {} lacks a minus side", e.id))?;
                    let (lp, lm) = (self.cells[e.plus.cell].level, self.cells[minus.cell].level);
                    if lp.abs_diff(lm) > 1 {
                        return Err(format!("edge {} joins levels {lp} and {lm}", e.id));
                    }
                }
                EdgeKind::HangingMaster => {
                    let [s0, s1] = e.slaves.ok_or_else(|| format!("master edge {} has no slaves", e.id))?;
                    let covered = self.edges[s0].length() + self.edges[s1].length();
                    if (covered - e.length()).abs() > 1e-14 * e.length()
                        || (self.edges[s0].length() - 0.5 * e.length()).abs() > 1e-14 * e.length()
                    {
                        return Err(format!("master edge {} is not covered by two half edges", e.id));
                    }
                }
                EdgeKind::Boundary => {
                    if e.minus.is_some() {
                        return Err(format!("boundary edge {} has two sides", e.id));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds the initial uniform mesh of a model domain.
pub fn make_domain(domain: DomainTag, initial_divisions: usize) -> Result<Mesh> {
    if initial_divisions == 0 {
        return Err(Error::InvalidArgument("initial_divisions must be at least 1".into()));
    }
    if domain != DomainTag::Square && initial_divisions % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "{domain} needs an even number of divisions so the origin lies on mesh lines, got {initial_divisions}"
        )));
    }
    let n = initial_divisions;
    let (origin, extent) = match domain {
        DomainTag::Square => (0.0, 1.0),
        DomainTag::LShape | DomainTag::Slit => (-1.0, 2.0),
    };
    let h = extent / n as f64;
    let mut mesh = Mesh {
        domain,
        cells: Vec::with_capacity(n * n),
        vertices: Vec::new(),
        vertex_index: HashMap::new(),
        active: Vec::new(),
        edges: Vec::new(),
        face_links: HashMap::new(),
    };
    // Grid coordinates are computed from integers so that the origin is hit exactly.
    let coord = |i: usize| if 2 * i == n && domain != DomainTag::Square { 0.0 } else { origin + h * i as f64 };
    for j in 0..n {
        for i in 0..n {
            let lower = [coord(i), coord(j)];
            let upper = [coord(i + 1), coord(j + 1)];
            if domain == DomainTag::LShape && lower[0] >= 0.0 && lower[1] >= 0.0 {
                continue;
            }
            mesh.push_cell(lower, upper, 0, None);
        }
    }
    mesh.rebuild_topology();
    Ok(mesh)
}
