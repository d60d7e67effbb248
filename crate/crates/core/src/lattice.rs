//! Digitized design domains and their assembly into frame models.
//!
//! Grid rows are numbered top to bottom, so row 0 is the top of the domain and
//! slot `(r, c)` has its bottom-left corner at
//! `origin + (c·l_c, (rows − 1 − r)·l_c)`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cells::{emit_geometry, CellKind, CellParams, Facing, Reinforcement, Section};
use crate::geom::Point;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Fixed(CellKind),
    Design,
    Hole,
}

impl Slot {
    pub fn code(&self) -> String {
        match self {
            Slot::Fixed(k) => k.code(),
            Slot::Design => "?".into(),
            Slot::Hole => "-".into(),
        }
    }

    pub fn parse(code: &str) -> Result<Slot, Error> {
        match code {
            "?" => Ok(Slot::Design),
            "-" => Ok(Slot::Hole),
            other => other.parse().map(Slot::Fixed),
        }
    }
}

/// Rectangular slot grid describing one design domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignGrid {
    rows: usize,
    cols: usize,
    slots: Vec<Slot>,
    pub origin: Point,
}

impl DesignGrid {
    pub fn new(rows: usize, cols: usize, fill: Slot) -> Self {
        Self { rows, cols, slots: vec![fill; rows * cols], origin: Point::new(0.0, 0.0) }
    }

    pub fn from_codes(rows: &[&str]) -> Result<Self, Error> {
        let parsed: Vec<Vec<Slot>> =
            rows.iter().map(|line| line.split_whitespace().map(Slot::parse).collect::<Result<Vec<_>, _>>()).collect::<Result<_, _>>()?;
        let cols = parsed.first().map_or(0, Vec::len);
        if parsed.iter().any(|r| r.len() != cols) {
            return Err(Error::DesignFile("rows have differing lengths".into()));
        }
        Ok(Self { rows: parsed.len(), cols, slots: parsed.into_iter().flatten().collect(), origin: Point::new(0.0, 0.0) })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Slot {
        self.slots[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, slot: Slot) {
        self.slots[r * self.cols + c] = slot;
    }

    pub fn slots(&self) -> impl Iterator<Item = ((usize, usize), Slot)> + '_ {
        self.slots.iter().enumerate().map(move |(i, s)| ((i / self.cols, i % self.cols), *s))
    }

    /// Design slot coordinates in row-major order. Tiling orders index into
    /// this list.
    pub fn design_slots(&self) -> Vec<(usize, usize)> {
        self.slots().filter(|(_, s)| *s == Slot::Design).map(|(rc, _)| rc).collect()
    }

    pub fn design_count(&self) -> usize {
        self.slots.iter().filter(|s| **s == Slot::Design).count()
    }

    pub fn is_resolved(&self) -> bool {
        self.design_count() == 0
    }

    pub fn slot_origin(&self, r: usize, c: usize, params: &CellParams) -> Point {
        let l = params.cell_size;
        self.origin.translated(c as f64 * l, (self.rows - 1 - r) as f64 * l)
    }

    /// Fill design slots. `kinds[i]` goes to `design_slots()[i]`.
    pub fn resolve(&self, kinds: &[CellKind]) -> Result<DesignGrid, Error> {
        let slots = self.design_slots();
        if slots.len() != kinds.len() {
            return Err(Error::DimensionMismatch(format!("{} placements for {} design slots", kinds.len(), slots.len())));
        }
        let mut out = self.clone();
        for (&(r, c), &k) in slots.iter().zip(kinds) {
            out.set(r, c, Slot::Fixed(k));
        }
        Ok(out)
    }

    /// Left-right mirror about the grid's vertical centerline.
    pub fn mirrored(&self) -> DesignGrid {
        let mut out = self.clone();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let slot = match self.get(r, self.cols - 1 - c) {
                    Slot::Fixed(k) => Slot::Fixed(k.mirrored()),
                    other => other,
                };
                out.set(r, c, slot);
            }
        }
        out
    }

    /// Area of all non-hole slots, mm².
    pub fn domain_area(&self, params: &CellParams) -> f64 {
        let n = self.slots.iter().filter(|s| **s != Slot::Hole).count();
        n as f64 * params.cell_size * params.cell_size
    }

    pub fn code_rows(&self) -> Vec<String> {
        (0..self.rows).map(|r| (0..self.cols).map(|c| self.get(r, c).code()).collect::<Vec<_>>().join(" ")).collect()
    }
}

impl fmt::Display for DesignGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.code_rows() {
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

impl Serialize for DesignGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GridRepr { rows: self.rows, cols: self.cols, origin: [self.origin.x, self.origin.y], slots: self.code_rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DesignGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = GridRepr::deserialize(d)?;
        let lines: Vec<&str> = repr.slots.iter().map(String::as_str).collect();
        let mut grid = DesignGrid::from_codes(&lines).map_err(D::Error::custom)?;
        if grid.rows != repr.rows || grid.cols != repr.cols {
            return Err(D::Error::custom(format!(
                "declared {}x{} grid but slots describe {}x{}",
                repr.rows, repr.cols, grid.rows, grid.cols
            )));
        }
        grid.origin = Point::new(repr.origin[0], repr.origin[1]);
        Ok(grid)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    rows: usize,
    cols: usize,
    #[serde(default)]
    origin: [f64; 2],
    slots: Vec<String>,
}

pub const DESIGN_FORMAT: &str = "mechrl-design";
pub const DESIGN_VERSION: u32 = 1;

/// On-disk design: a grid plus the cell parameters it was built with.
///
/// ```json
/// {
///   "format": "mechrl-design",
///   "version": 1,
///   "grid": { "rows": 1, "cols": 2, "origin": [0.0, 0.0], "slots": ["SP FD"] },
///   "params": { "cell_size": 10.0, "thickness": 1.2, "depth": 25.0, "para_shear": 10.0 }
/// }
/// ```
///
/// Slot codes: `SP SF SB SD` square cells, `FP FF FB FD` forward-faced and
/// `BP BF BB BD` backward-faced parallelograms (second letter is the
/// reinforcement: pure, forward, backward, double), `R` rigid, `.` empty,
/// `?` design slot, `-` hole (outside the domain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub format: String,
    pub version: u32,
    pub grid: DesignGrid,
    #[serde(default)]
    pub params: CellParams,
}

impl DesignFile {
    pub fn new(grid: DesignGrid, params: CellParams) -> Self {
        Self { format: DESIGN_FORMAT.into(), version: DESIGN_VERSION, grid, params }
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let file: DesignFile = serde_json::from_str(text).map_err(|e| Error::DesignFile(e.to_string()))?;
        if file.format != DESIGN_FORMAT {
            return Err(Error::DesignFile(format!("unexpected format tag {:?}", file.format)));
        }
        if file.version != DESIGN_VERSION {
            return Err(Error::DesignFile(format!("unsupported version {}", file.version)));
        }
        file.params.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serialization cannot fail")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

// ---------------------------------------------------------------------------
// Tiling orders

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TilingStrategy {
    Spiral,
    Zigzag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TilingDirection {
    Inward,
    Outward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TilingSpec {
    pub strategy: TilingStrategy,
    pub direction: TilingDirection,
    pub axis: Axis,
}

/// Order in which design slots are filled; `order[t]` indexes
/// [`DesignGrid::design_slots`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilingOrder {
    pub spec: TilingSpec,
    pub order: Vec<usize>,
}

impl TilingOrder {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Spiral orders peel rings off the bounding box of the design region,
/// starting at its top-left corner (clockwise for a horizontal first leg,
/// counter-clockwise for a vertical one); the inward order walks the outer
/// ring first. Zigzag orders sweep rows (horizontal) or columns (vertical)
/// with alternating direction; the outward order starts at row 0 / column 0.
/// In both cases the opposite direction is the exact reverse.
pub fn tiling_order(grid: &DesignGrid, spec: TilingSpec) -> Result<TilingOrder, Error> {
    let slots = grid.design_slots();
    if slots.is_empty() {
        return Err(Error::EmptyDesignRegion);
    }
    let index: HashMap<(usize, usize), usize> = slots.iter().enumerate().map(|(i, rc)| (*rc, i)).collect();
    let r0 = slots.iter().map(|s| s.0).min().unwrap();
    let r1 = slots.iter().map(|s| s.0).max().unwrap();
    let c0 = slots.iter().map(|s| s.1).min().unwrap();
    let c1 = slots.iter().map(|s| s.1).max().unwrap();

    let walk = match spec.strategy {
        TilingStrategy::Spiral => spiral_walk(r0, r1, c0, c1, spec.axis),
        TilingStrategy::Zigzag => zigzag_walk(r0, r1, c0, c1, spec.axis),
    };
    let mut order: Vec<usize> = walk.iter().filter_map(|rc| index.get(rc).copied()).collect();
    debug_assert_eq!(order.len(), slots.len());

    let base_is_inward = spec.strategy == TilingStrategy::Spiral;
    let want_inward = spec.direction == TilingDirection::Inward;
    if base_is_inward != want_inward {
        order.reverse();
    }
    Ok(TilingOrder { spec, order })
}

fn spiral_walk(r0: usize, r1: usize, c0: usize, c1: usize, axis: Axis) -> Vec<(usize, usize)> {
    let (mut top, mut bottom, mut left, mut right) = (r0 as isize, r1 as isize, c0 as isize, c1 as isize);
    let mut out = Vec::new();
    while top <= bottom && left <= right {
        let mut ring = Vec::new();
        if top == bottom {
            ring.extend((left..=right).map(|c| (top, c)));
        } else if left == right {
            ring.extend((top..=bottom).map(|r| (r, left)));
        } else {
            match axis {
                Axis::Horizontal => {
                    ring.extend((left..=right).map(|c| (top, c)));
                    ring.extend((top + 1..=bottom).map(|r| (r, right)));
                    ring.extend((left..right).rev().map(|c| (bottom, c)));
                    ring.extend((top + 1..bottom).rev().map(|r| (r, left)));
                }
                Axis::Vertical => {
                    ring.extend((top..=bottom).map(|r| (r, left)));
                    ring.extend((left + 1..=right).map(|c| (bottom, c)));
                    ring.extend((top..bottom).rev().map(|r| (r, right)));
                    ring.extend((left + 1..right).rev().map(|c| (top, c)));
                }
            }
        }
        out.extend(ring.into_iter().map(|(r, c)| (r as usize, c as usize)));
        top += 1;
        bottom -= 1;
        left += 1;
        right -= 1;
    }
    out
}

fn zigzag_walk(r0: usize, r1: usize, c0: usize, c1: usize, axis: Axis) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    match axis {
        Axis::Horizontal => {
            for (i, r) in (r0..=r1).enumerate() {
                if i % 2 == 0 {
                    out.extend((c0..=c1).map(|c| (r, c)));
                } else {
                    out.extend((c0..=c1).rev().map(|c| (r, c)));
                }
            }
        }
        Axis::Vertical => {
            for (i, c) in (c0..=c1).enumerate() {
                if i % 2 == 0 {
                    out.extend((r0..=r1).map(|r| (r, c)));
                } else {
                    out.extend((r0..=r1).rev().map(|r| (r, c)));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Built-in domains and guidance presets

/// Door-latch domain: 8×10 slots (80×100 mm) with rigid top, bottom and left
/// borders, a 2×2 rigid axle at the domain centre and a 2×1 rigid latch
/// outside the right edge. Columns 8–9 are outside the domain.
pub mod latch {
    pub const ROWS: usize = 10;
    pub const COLS: usize = 10;
    pub const DOMAIN_COLS: usize = 8;
    pub const AXLE_ROWS: [usize; 2] = [4, 5];
    pub const AXLE_COLS: [usize; 2] = [3, 4];
    pub const LATCH_ROW: usize = 4;
    pub const LATCH_COLS: [usize; 2] = [8, 9];
}

pub fn latch_domain() -> DesignGrid {
    use latch::*;
    let mut g = DesignGrid::new(ROWS, COLS, Slot::Hole);
    for r in 0..ROWS {
        for c in 0..DOMAIN_COLS {
            let border = r == 0 || r == ROWS - 1 || c == 0;
            let axle = AXLE_ROWS.contains(&r) && AXLE_COLS.contains(&c);
            g.set(r, c, if border || axle { Slot::Fixed(CellKind::Rigid) } else { Slot::Design });
        }
    }
    for c in LATCH_COLS {
        g.set(LATCH_ROW, c, Slot::Fixed(CellKind::Rigid));
    }
    g
}

/// Half gripper (right of the symmetry line x = 0): a rigid 1×2 handle above
/// a 5×5 body, and a rigid 2×6 jaw hanging below body columns 2–3.
pub mod gripper {
    pub const ROWS: usize = 13;
    pub const COLS: usize = 5;
    pub const HANDLE_ROWS: [usize; 2] = [0, 1];
    pub const BODY_ROWS: std::ops::RangeInclusive<usize> = 2..=6;
    pub const JAW_ROWS: std::ops::RangeInclusive<usize> = 7..=12;
    pub const JAW_COLS: [usize; 2] = [2, 3];
}

pub fn gripper_domain() -> DesignGrid {
    use gripper::*;
    let mut g = DesignGrid::new(ROWS, COLS, Slot::Hole);
    for r in HANDLE_ROWS {
        g.set(r, 0, Slot::Fixed(CellKind::Rigid));
    }
    for r in BODY_ROWS {
        for c in 0..COLS {
            g.set(r, c, Slot::Design);
        }
    }
    for r in JAW_ROWS {
        for c in JAW_COLS {
            g.set(r, c, Slot::Fixed(CellKind::Rigid));
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub enum Guidance {
    LatchUnguided,
    /// Outer ring of the latch design region becomes predefined cells, except
    /// the three right-column slots around the latch row.
    LatchGuided(CellKind),
    /// Body column next to the symmetry line gets `center`; the top and bottom
    /// outer-edge slots get `edge`.
    GripperGuided {
        center: CellKind,
        edge: CellKind,
    },
    /// Fixed slots of the given grid override the target; `?` and `-` slots
    /// leave it unchanged.
    Custom(DesignGrid),
}

impl Guidance {
    pub fn latch_guided() -> Self {
        Guidance::LatchGuided(CellKind::para(Facing::Forward, Reinforcement::Pure))
    }

    pub fn gripper_guided() -> Self {
        Guidance::GripperGuided {
            center: CellKind::para(Facing::Forward, Reinforcement::Pure),
            edge: CellKind::para(Facing::Backward, Reinforcement::Pure),
        }
    }

    pub fn custom_from_file(path: &Path) -> Result<Self, Error> {
        Ok(Guidance::Custom(DesignFile::load(path)?.grid))
    }
}

pub fn apply_guidance(grid: &DesignGrid, preset: &Guidance) -> Result<DesignGrid, Error> {
    let mismatch = |what: &str, rows: usize, cols: usize| {
        Error::DimensionMismatch(format!("{what} preset needs a {rows}x{cols} grid, got {}x{}", grid.rows, grid.cols))
    };
    let mut out = grid.clone();
    match preset {
        Guidance::LatchUnguided => {
            if (grid.rows, grid.cols) != (latch::ROWS, latch::COLS) {
                return Err(mismatch("latch", latch::ROWS, latch::COLS));
            }
        }
        Guidance::LatchGuided(kind) => {
            use latch::*;
            if (grid.rows, grid.cols) != (ROWS, COLS) {
                return Err(mismatch("latch", ROWS, COLS));
            }
            let (top, bottom, left, right) = (1, ROWS - 2, 1, DOMAIN_COLS - 1);
            for ((r, c), slot) in grid.slots() {
                if slot != Slot::Design {
                    continue;
                }
                let ring = r == top || r == bottom || c == left || c == right;
                let near_latch = c == right && r.abs_diff(LATCH_ROW) <= 1;
                if ring && !near_latch {
                    out.set(r, c, Slot::Fixed(*kind));
                }
            }
        }
        Guidance::GripperGuided { center, edge } => {
            use gripper::*;
            if (grid.rows, grid.cols) != (ROWS, COLS) {
                return Err(mismatch("gripper", ROWS, COLS));
            }
            for r in BODY_ROWS {
                if grid.get(r, 0) == Slot::Design {
                    out.set(r, 0, Slot::Fixed(*center));
                }
            }
            for r in [*BODY_ROWS.start(), *BODY_ROWS.end()] {
                if grid.get(r, COLS - 1) == Slot::Design {
                    out.set(r, COLS - 1, Slot::Fixed(*edge));
                }
            }
        }
        Guidance::Custom(overlay) => {
            if (overlay.rows, overlay.cols) != (grid.rows, grid.cols) {
                return Err(mismatch("custom", overlay.rows, overlay.cols));
            }
            for ((r, c), slot) in overlay.slots() {
                if let Slot::Fixed(k) = slot {
                    out.set(r, c, Slot::Fixed(k));
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Frame model

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// MPa
    pub youngs_modulus: f64,
    /// Not used by Euler–Bernoulli elements; kept with the material record.
    pub poisson_ratio: f64,
}

impl Material {
    /// Thermoplastic polyurethane (95A) filament.
    pub const TPU: Material = Material { youngs_modulus: 24.1, poisson_ratio: 0.39 };
}

impl Default for Material {
    fn default() -> Self {
        Material::TPU
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub nodes: [usize; 2],
    pub section: Section,
    pub material: Material,
}

/// Nodes and beam elements of one structure. Loads and supports live in
/// [`crate::fea::LoadCase`].
#[derive(Debug, Clone, Default)]
pub struct FrameModel {
    pub nodes: Vec<Point>,
    pub elements: Vec<Element>,
    /// Whether each node belongs to a rigid predefined cell.
    pub rigid: Vec<bool>,
    /// Slot corners of mechanism cells; each is a potential hinge even when
    /// no ligament reaches it.
    pub hinge_sites: Vec<Point>,
    index: HashMap<(i64, i64), usize>,
    edges: HashSet<(usize, usize)>,
}

impl FrameModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn node_at(&self, p: Point) -> Option<usize> {
        self.index.get(&p.key()).copied()
    }

    /// Existing node within `tol` of `p`, nearest first.
    pub fn nearest_node(&self, p: Point, tol: f64) -> Option<usize> {
        if let Some(i) = self.node_at(p) {
            return Some(i);
        }
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, q)| (i, q.distance(&p)))
            .filter(|(_, d)| *d <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    pub fn add_node(&mut self, p: Point) -> usize {
        if let Some(i) = self.node_at(p) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(p);
        self.rigid.push(false);
        self.index.insert(p.key(), i);
        i
    }

    /// Adds a beam between two points. Returns `None` when the same ligament
    /// already exists; the existing element is kept unchanged.
    pub fn add_segment(&mut self, a: Point, b: Point, section: Section, material: Material) -> Option<usize> {
        let i = self.add_node(a);
        let j = self.add_node(b);
        assert_ne!(i, j, "zero-length ligament at {a:?}");
        let key = (i.min(j), i.max(j));
        if !self.edges.insert(key) {
            return None;
        }
        self.elements.push(Element { nodes: [i, j], section, material });
        Some(self.elements.len() - 1)
    }

    pub fn element_length(&self, e: usize) -> f64 {
        let [i, j] = self.elements[e].nodes;
        self.nodes[i].distance(&self.nodes[j])
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.elements {
            deg[e.nodes[0]] += 1;
            deg[e.nodes[1]] += 1;
        }
        deg
    }

    /// Splits every element into `parts` equal pieces. Original nodes keep
    /// their indices. Interior nodes are never shared, so members that cross
    /// without a joint stay unjoined.
    pub fn subdivided(&self, parts: usize) -> FrameModel {
        assert!(parts >= 1);
        let mut out = self.clone();
        if parts == 1 {
            return out;
        }
        out.elements.clear();
        out.edges.clear();
        for e in &self.elements {
            let (a, b) = (self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]);
            let rigid = self.rigid[e.nodes[0]] && self.rigid[e.nodes[1]];
            let mut prev = e.nodes[0];
            for k in 1..=parts {
                let next = if k == parts {
                    e.nodes[1]
                } else {
                    let s = k as f64 / parts as f64;
                    out.nodes.push(Point::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)));
                    out.rigid.push(rigid);
                    out.nodes.len() - 1
                };
                out.edges.insert((prev.min(next), prev.max(next)));
                out.elements.push(Element { nodes: [prev, next], section: e.section, material: e.material });
                prev = next;
            }
        }
        out
    }

    /// Inserts a node at `p` on the element containing it and returns the
    /// node index. An existing node at `p` is returned as-is.
    pub fn insert_node(&mut self, p: Point) -> Result<usize, Error> {
        if let Some(i) = self.node_at(p) {
            return Ok(i);
        }
        let host = self.elements.iter().position(|e| {
            let (a, b) = (self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]);
            let len = a.distance(&b);
            let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            let along = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len);
            (cross / len).abs() < 1e-6 && along > 0.0 && along < 1.0
        });
        let Some(e) = host else {
            return Err(Error::NoNodeNear(p));
        };
        let old = self.elements[e];
        let [i, j] = old.nodes;
        let k = self.add_node(p);
        self.rigid[k] = self.rigid[i] && self.rigid[j];
        self.edges.remove(&(i.min(j), i.max(j)));
        self.elements[e] = Element { nodes: [i, k], ..old };
        self.edges.insert((i.min(k), i.max(k)));
        self.edges.insert((k.min(j), k.max(j)));
        self.elements.push(Element { nodes: [k, j], ..old });
        Ok(k)
    }

    /// Node connectivity components (isolated nodes form their own).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.elements {
            adj[e.nodes[0]].push(e.nodes[1]);
            adj[e.nodes[1]].push(e.nodes[0]);
        }
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut k = 0;
            while k < comp.len() {
                let v = comp[k];
                k += 1;
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Bounding box `(min, max)` of all nodes.
    pub fn bounds(&self) -> Option<(Point, Point)> {
        let first = *self.nodes.first()?;
        Some(
            self.nodes
                .iter()
                .fold((first, first), |(lo, hi), p| (Point::new(lo.x.min(p.x), lo.y.min(p.y)), Point::new(hi.x.max(p.x), hi.y.max(p.y)))),
        )
    }
}

/// Union of all cell geometries with exact node deduplication. Ligaments
/// shared by neighbouring cells become a single element.
pub fn assemble(grid: &DesignGrid, params: &CellParams, material: Material) -> Result<FrameModel, Error> {
    params.validate()?;
    if !grid.is_resolved() {
        return Err(Error::Unresolved(grid.design_count()));
    }
    let mut model = FrameModel::new();
    for ((r, c), slot) in grid.slots() {
        let Slot::Fixed(kind) = slot else { continue };
        if kind == CellKind::Empty {
            continue;
        }
        let origin = grid.slot_origin(r, c, params);
        for seg in emit_geometry(kind, origin, params)? {
            model.add_segment(seg.a, seg.b, seg.section, material);
            if kind == CellKind::Rigid {
                for p in [seg.a, seg.b] {
                    let i = model.node_at(p).unwrap();
                    model.rigid[i] = true;
                }
            }
        }
        if kind.is_action() {
            let l = params.cell_size;
            for (dx, dy) in [(0.0, 0.0), (l, 0.0), (l, l), (0.0, l)] {
                model.hinge_sites.push(origin.translated(dx, dy));
            }
        }
    }
    Ok(model)
}

/// Hinges with fewer than two attached ligaments. Candidates are all
/// non-rigid nodes plus the slot corners of mechanism cells (a corner that no
/// ligament reaches has zero connections). Nodes of rigid cells are ignored.
pub fn count_disconnected_hinges(model: &FrameModel) -> usize {
    let deg = model.degrees();
    let mut seen = HashSet::new();
    let mut count = 0;
    for (i, p) in model.nodes.iter().enumerate() {
        if !model.rigid[i] && seen.insert(p.key()) && deg[i] < 2 {
            count += 1;
        }
    }
    for p in &model.hinge_sites {
        if !seen.insert(p.key()) {
            continue;
        }
        match model.node_at(*p) {
            Some(i) if model.rigid[i] => {}
            Some(i) => count += usize::from(deg[i] < 2),
            None => count += 1,
        }
    }
    count
}

/// Ligament area (length × wall thickness, shared walls counted once) as a
/// percentage of the domain area (all non-hole slots).
pub fn area_density(grid: &DesignGrid, params: &CellParams) -> Result<f64, Error> {
    let model = assemble(grid, params, Material::TPU)?;
    let area = grid.domain_area(params);
    if area == 0.0 {
        return Ok(0.0);
    }
    let material: f64 = (0..model.elements.len()).map(|e| model.element_length(e) * params.thickness).sum();
    Ok(material / area * 100.0)
}
