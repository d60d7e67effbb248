//! Placeable cell vocabulary and per-cell ligament geometry.
//!
//! Every cell occupies one `l_c × l_c` slot of the design grid. Square cells
//! fill the slot exactly. Parallelogram cells keep their bottom edge on the
//! slot and shift the top edge horizontally by `para_shear` (to the right for
//! forward-faced cells, to the left for backward-faced ones), so all corners
//! still land on the `l_c` node lattice.
//!
//! Diagonal naming follows the square cell: the forward diagonal runs from the
//! bottom-left to the top-right corner, the backward diagonal from the
//! bottom-right to the top-left corner.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::Error;

/// Number of action-eligible cell kinds.
pub const ACTION_COUNT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reinforcement {
    Pure,
    Forward,
    Backward,
    Double,
}

impl Reinforcement {
    pub const ALL: [Reinforcement; 4] = [Reinforcement::Pure, Reinforcement::Forward, Reinforcement::Backward, Reinforcement::Double];

    pub fn diagonal_count(self) -> usize {
        match self {
            Reinforcement::Pure => 0,
            Reinforcement::Forward | Reinforcement::Backward => 1,
            Reinforcement::Double => 2,
        }
    }

    fn code(self) -> char {
        match self {
            Reinforcement::Pure => 'P',
            Reinforcement::Forward => 'F',
            Reinforcement::Backward => 'B',
            Reinforcement::Double => 'D',
        }
    }

    /// A left-right mirror turns a forward diagonal into a backward one.
    pub fn mirrored(self) -> Self {
        match self {
            Reinforcement::Forward => Reinforcement::Backward,
            Reinforcement::Backward => Reinforcement::Forward,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Facing {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shape {
    Square,
    Parallelogram(Facing),
}

/// A cell that can sit in a grid slot.
///
/// `Rigid` has the geometry of a double-diagonal square and marks predefined
/// stiff regions; `Empty` places nothing. Neither is ever an agent action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    Cell(Shape, Reinforcement),
    Rigid,
    Empty,
}

impl CellKind {
    pub const fn square(r: Reinforcement) -> Self {
        CellKind::Cell(Shape::Square, r)
    }

    pub const fn para(facing: Facing, r: Reinforcement) -> Self {
        CellKind::Cell(Shape::Parallelogram(facing), r)
    }

    pub fn is_square(&self) -> bool {
        matches!(self, CellKind::Cell(Shape::Square, _))
    }

    pub fn is_action(&self) -> bool {
        matches!(self, CellKind::Cell(..))
    }

    /// Position of this kind in [`catalog`], if it is action-eligible.
    pub fn action_index(&self) -> Option<usize> {
        match *self {
            CellKind::Cell(shape, r) => {
                let block = match shape {
                    Shape::Square => 0,
                    Shape::Parallelogram(Facing::Forward) => 1,
                    Shape::Parallelogram(Facing::Backward) => 2,
                };
                let offset = Reinforcement::ALL.iter().position(|x| *x == r).unwrap();
                Some(block * 4 + offset)
            }
            _ => None,
        }
    }

    pub fn from_action(action: usize) -> Result<Self, Error> {
        catalog().get(action).copied().ok_or(Error::InvalidAction(action))
    }

    /// Mirror image about a vertical axis.
    pub fn mirrored(&self) -> Self {
        match *self {
            CellKind::Cell(Shape::Square, r) => CellKind::square(r.mirrored()),
            CellKind::Cell(Shape::Parallelogram(f), r) => {
                let f = match f {
                    Facing::Forward => Facing::Backward,
                    Facing::Backward => Facing::Forward,
                };
                CellKind::para(f, r.mirrored())
            }
            other => other,
        }
    }

    /// Two-letter code: shape (`S`, `F`orward-faced, `B`ackward-faced) then
    /// reinforcement (`P`, `F`, `B`, `D`). `R` is rigid, `.` is empty.
    pub fn code(&self) -> String {
        match *self {
            CellKind::Cell(shape, r) => {
                let s = match shape {
                    Shape::Square => 'S',
                    Shape::Parallelogram(Facing::Forward) => 'F',
                    Shape::Parallelogram(Facing::Backward) => 'B',
                };
                format!("{s}{}", r.code())
            }
            CellKind::Rigid => "R".to_string(),
            CellKind::Empty => ".".to_string(),
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "R" => return Ok(CellKind::Rigid),
            "." => return Ok(CellKind::Empty),
            _ => {}
        }
        let mut chars = s.chars();
        let (Some(a), Some(b), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(Error::UnknownCode(s.to_string()));
        };
        let shape = match a {
            'S' => Shape::Square,
            'F' => Shape::Parallelogram(Facing::Forward),
            'B' => Shape::Parallelogram(Facing::Backward),
            _ => return Err(Error::UnknownCode(s.to_string())),
        };
        let r = match b {
            'P' => Reinforcement::Pure,
            'F' => Reinforcement::Forward,
            'B' => Reinforcement::Backward,
            'D' => Reinforcement::Double,
            _ => return Err(Error::UnknownCode(s.to_string())),
        };
        Ok(CellKind::Cell(shape, r))
    }
}

impl Serialize for CellKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for CellKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The twelve action-eligible kinds in action-index order: the four square
/// variants, then forward-faced and backward-faced parallelograms, each in
/// Pure, FDR, BDR, DDR order.
pub fn catalog() -> [CellKind; ACTION_COUNT] {
    let mut out = [CellKind::Empty; ACTION_COUNT];
    let shapes = [Shape::Square, Shape::Parallelogram(Facing::Forward), Shape::Parallelogram(Facing::Backward)];
    for (i, shape) in shapes.iter().enumerate() {
        for (j, r) in Reinforcement::ALL.iter().enumerate() {
            out[i * 4 + j] = CellKind::Cell(*shape, *r);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    /// Cell edge length, mm.
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
    /// Ligament wall thickness, mm.
    #[serde(default = "default_thickness")]
    pub thickness: f64,
    /// Out-of-plane extrusion depth, mm.
    #[serde(default = "default_depth")]
    pub depth: f64,
    /// Horizontal offset of a parallelogram's top edge, mm.
    #[serde(default = "default_cell_size")]
    pub para_shear: f64,
    /// Join the two diagonals of a double-reinforced cell at a shared node
    /// where they cross.
    #[serde(default)]
    pub cross_node: bool,
}

fn default_cell_size() -> f64 {
    10.0
}
fn default_thickness() -> f64 {
    1.2
}
fn default_depth() -> f64 {
    25.0
}

impl Default for CellParams {
    fn default() -> Self {
        Self {
            cell_size: default_cell_size(),
            thickness: default_thickness(),
            depth: default_depth(),
            para_shear: default_cell_size(),
            cross_node: false,
        }
    }
}

impl CellParams {
    pub fn validate(&self) -> Result<(), Error> {
        let fields = [("cell_size", self.cell_size), ("thickness", self.thickness), ("depth", self.depth), ("para_shear", self.para_shear)];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        let ratio = self.para_shear / self.cell_size;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("para_shear {} is not a multiple of cell_size {}", self.para_shear, self.cell_size)));
        }
        Ok(())
    }

    pub fn section(&self) -> Section {
        Section::rectangular(self.thickness, self.depth)
    }
}

/// Rectangular ligament cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    /// mm²
    pub area: f64,
    /// In-plane second moment of area, mm⁴.
    pub inertia: f64,
}

impl Section {
    pub fn rectangular(thickness: f64, depth: f64) -> Self {
        Self { area: thickness * depth, inertia: depth * thickness.powi(3) / 12.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
    pub section: Section,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.a.distance(&self.b)
    }
}

/// Ligaments of one cell whose slot has bottom-left corner `origin`.
///
/// Perimeter first (bottom, right, top, left), then diagonals.
pub fn emit_geometry(kind: CellKind, origin: Point, params: &CellParams) -> Result<Vec<Segment>, Error> {
    let (shape, reinforcement) = match kind {
        CellKind::Cell(shape, r) => (shape, r),
        CellKind::Rigid => (Shape::Square, Reinforcement::Double),
        CellKind::Empty => return Err(Error::NotPlaceable(kind)),
    };
    let l = params.cell_size;
    let shift = match shape {
        Shape::Square => 0.0,
        Shape::Parallelogram(Facing::Forward) => params.para_shear,
        Shape::Parallelogram(Facing::Backward) => -params.para_shear,
    };
    let bl = origin;
    let br = origin.translated(l, 0.0);
    let tr = origin.translated(l + shift, l);
    let tl = origin.translated(shift, l);

    let section = params.section();
    let seg = |a: Point, b: Point| Segment { a, b, section };
    let mut out = vec![seg(bl, br), seg(br, tr), seg(tr, tl), seg(tl, bl)];
    match reinforcement {
        Reinforcement::Pure => {}
        Reinforcement::Forward => out.push(seg(bl, tr)),
        Reinforcement::Backward => out.push(seg(br, tl)),
        Reinforcement::Double if params.cross_node => {
            // diagonals of a parallelogram bisect each other
            let mid = Point::new(0.5 * (bl.x + tr.x), 0.5 * (bl.y + tr.y));
            out.extend([seg(bl, mid), seg(mid, tr), seg(br, mid), seg(mid, tl)]);
        }
        Reinforcement::Double => {
            out.push(seg(bl, tr));
            out.push(seg(br, tl));
        }
    }
    Ok(out)
}
