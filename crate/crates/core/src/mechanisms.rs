//! Mechanism scenarios (door latch, gripper), their rewards, and the
//! unit-cell load tests.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cells::{emit_geometry, CellKind, CellParams};
use crate::fea::{self, apply_torque_couple, Component, DisplacementField, Dof, LoadCase};
use crate::geom::Point;
use crate::lattice::{
    apply_guidance, assemble, count_disconnected_hinges, gripper_domain, latch_domain, Axis, DesignGrid, FrameModel, Guidance, Material,
    Slot, TilingDirection, TilingSpec, TilingStrategy,
};
use crate::Error;

pub const SCENARIO_FORMAT: &str = "mechrl-scenario";
pub const SCENARIO_VERSION: u32 = 1;

/// Door-latch axle torque, N·mm.
pub const LATCH_TORQUE: f64 = 5000.0;
pub const LATCH_C: f64 = 0.1;
pub const GRIPPER_C1: f64 = 50.0;
pub const GRIPPER_FORCE: f64 = 100.0;
/// Residual above which a solve is rejected.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

pub fn latch_reward(ux: f64, uy: f64, c: f64) -> f64 {
    ux / (c + uy * uy)
}

pub fn gripper_reward(theta: f64, disconnections: usize, c1: f64, c2: f64) -> f64 {
    c1 * theta / (1.0 + c2 * disconnections as f64)
}

/// Nodes of an assembled model picked by location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum NodeSelector {
    Point(Point),
    /// Closed box; a zero-height box selects a horizontal line.
    Rect {
        min: Point,
        max: Point,
    },
}

impl NodeSelector {
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        NodeSelector::Rect { min: Point::new(x0, y0), max: Point::new(x1, y1) }
    }

    pub fn select(&self, model: &FrameModel) -> Vec<usize> {
        let tol = 1e-6;
        match self {
            NodeSelector::Point(p) => model.nearest_node(*p, tol).into_iter().collect(),
            NodeSelector::Rect { min, max } => model
                .nodes
                .iter()
                .enumerate()
                .filter(|(_, p)| p.x >= min.x - tol && p.x <= max.x + tol && p.y >= min.y - tol && p.y <= max.y + tol)
                .map(|(i, _)| i)
                .collect(),
        }
    }
}

fn all_dofs() -> Vec<Dof> {
    Dof::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Support {
    pub at: NodeSelector,
    #[serde(default = "all_dofs")]
    pub dofs: Vec<Dof>,
}

/// Total force split evenly over the selected nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodalForce {
    pub at: NodeSelector,
    #[serde(default)]
    pub fx: f64,
    #[serde(default)]
    pub fy: f64,
    #[serde(default)]
    pub mz: f64,
}

/// Counter-clockwise couple on four corner nodes, N·mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Torque {
    pub center: Point,
    pub corners: [Point; 4],
    pub torque: f64,
}

fn one() -> f64 {
    1.0
}

/// Probe node plus the signs mapping global `ux` and `θz` to the reward
/// convention (e.g. retraction-positive latch motion along −x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub point: Point,
    #[serde(default = "one")]
    pub ux_sign: f64,
    #[serde(default = "one")]
    pub theta_sign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum RewardSpec {
    Latch { c: f64 },
    Gripper { c1: f64, c2: f64 },
}

impl RewardSpec {
    pub fn validate(&self) -> Result<(), Error> {
        let ok = match *self {
            RewardSpec::Latch { c } => c > 0.0,
            RewardSpec::Gripper { c1, c2 } => c1 > 0.0 && c2 >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Scenario(format!("reward constants out of range: {self:?}")))
        }
    }
}

fn scenario_format() -> String {
    SCENARIO_FORMAT.to_string()
}

fn scenario_version() -> u32 {
    SCENARIO_VERSION
}

/// A design problem: template grid, boundary conditions, probe and reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "scenario_format")]
    pub format: String,
    #[serde(default = "scenario_version")]
    pub version: u32,
    pub name: String,
    pub grid: DesignGrid,
    #[serde(default)]
    pub params: CellParams,
    #[serde(default)]
    pub material: Material,
    /// Points on existing ligaments where a node is inserted before analysis.
    #[serde(default)]
    pub insert_nodes: Vec<Point>,
    pub supports: Vec<Support>,
    #[serde(default)]
    pub symmetry: Option<NodeSelector>,
    #[serde(default)]
    pub torques: Vec<Torque>,
    #[serde(default)]
    pub forces: Vec<NodalForce>,
    pub probe: Probe,
    pub reward: RewardSpec,
    pub tiling: TilingSpec,
    /// Reward assigned to designs whose analysis is singular.
    #[serde(default)]
    pub floor_reward: f64,
}

/// Probe values and reward of one fully resolved design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub reward: f64,
    /// Signed by `Probe::ux_sign`.
    pub ux: f64,
    pub uy: f64,
    /// Signed by `Probe::theta_sign`, radians.
    pub theta: f64,
    pub disconnections: usize,
    pub singular: bool,
}

pub struct Analysis {
    pub model: FrameModel,
    pub case: LoadCase,
    pub field: DisplacementField,
    pub probe_node: usize,
    pub evaluation: Evaluation,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        if s.format != SCENARIO_FORMAT || s.version != SCENARIO_VERSION {
            return Err(Error::Scenario(format!(
                "expected format {SCENARIO_FORMAT:?} version {SCENARIO_VERSION}, got {:?} version {}",
                s.format, s.version
            )));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.params.validate()?;
        self.reward.validate()?;
        if self.supports.is_empty() {
            return Err(Error::Scenario("no supports".into()));
        }
        if self.grid.design_count() == 0 {
            return Err(Error::EmptyDesignRegion);
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.grid.design_count()
    }

    /// Stable identity of everything that affects evaluation results.
    pub fn key(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut value = serde_json::to_value(self).expect("scenario serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("tiling");
        }
        Sha256::digest(value.to_string().as_bytes()).into()
    }

    /// Grid with the design slots filled in `design_slots()` order.
    pub fn design(&self, kinds: &[CellKind]) -> Result<DesignGrid, Error> {
        self.grid.resolve(kinds)
    }

    /// Frame model and load case of a resolved grid.
    pub fn build(&self, grid: &DesignGrid) -> Result<(FrameModel, LoadCase, usize), Error> {
        if (grid.rows(), grid.cols()) != (self.grid.rows(), self.grid.cols()) {
            return Err(Error::DimensionMismatch(format!(
                "design is {}x{}, scenario {} is {}x{}",
                grid.rows(),
                grid.cols(),
                self.name,
                self.grid.rows(),
                self.grid.cols()
            )));
        }
        let mut model = assemble(grid, &self.params, self.material)?;
        for p in &self.insert_nodes {
            model.insert_node(*p)?;
        }
        let mut case = LoadCase::new();
        let pick = |sel: &NodeSelector, what: &str| {
            let nodes = sel.select(&model);
            if nodes.is_empty() {
                Err(Error::Scenario(format!("{what} selector {sel:?} matches no node")))
            } else {
                Ok(nodes)
            }
        };
        for s in &self.supports {
            for n in pick(&s.at, "support")? {
                for d in &s.dofs {
                    case.fix(n, *d);
                }
            }
        }
        if let Some(sel) = &self.symmetry {
            case.symmetry = pick(sel, "symmetry")?;
        }
        for f in &self.forces {
            let nodes = pick(&f.at, "force")?;
            let share = 1.0 / nodes.len() as f64;
            for n in nodes {
                case.add_load(n, f.fx * share, f.fy * share, f.mz * share);
            }
        }
        for t in &self.torques {
            let mut corners = [0; 4];
            for (slot, p) in corners.iter_mut().zip(&t.corners) {
                *slot = model.nearest_node(*p, 1e-6).ok_or(Error::NoNodeNear(*p))?;
            }
            case.merge(apply_torque_couple(&model, t.center, corners, t.torque)?);
        }
        let probe = model.nearest_node(self.probe.point, 1e-6).ok_or(Error::NoNodeNear(self.probe.point))?;
        Ok((model, case, probe))
    }

    /// Strict analysis: singular systems and excessive residuals are errors.
    pub fn analyse(&self, grid: &DesignGrid) -> Result<Analysis, Error> {
        let (model, case, probe_node) = self.build(grid)?;
        let field = fea::solve(&model, &case)?;
        if !(field.relative_residual <= RESIDUAL_TOLERANCE) {
            return Err(Error::Residual(field.relative_residual));
        }
        let ux = self.probe.ux_sign * field.component(probe_node, Component::Ux);
        let uy = field.component(probe_node, Component::Uy);
        let theta = self.probe.theta_sign * field.component(probe_node, Component::Rz);
        let disconnections = count_disconnected_hinges(&model);
        let reward = match self.reward {
            RewardSpec::Latch { c } => latch_reward(ux, uy, c),
            RewardSpec::Gripper { c1, c2 } => gripper_reward(theta, disconnections, c1, c2),
        };
        if !reward.is_finite() {
            return Err(Error::Residual(f64::NAN));
        }
        let evaluation = Evaluation { reward, ux, uy, theta, disconnections, singular: false };
        Ok(Analysis { model, case, field, probe_node, evaluation })
    }

    /// Total evaluation: numeric failures yield the floor reward.
    pub fn evaluate(&self, grid: &DesignGrid) -> Result<Evaluation, Error> {
        match self.analyse(grid) {
            Ok(a) => Ok(a.evaluation),
            Err(e) if e.is_numeric() => {
                let model = assemble(grid, &self.params, self.material)?;
                Ok(Evaluation {
                    reward: self.floor_reward,
                    ux: 0.0,
                    uy: 0.0,
                    theta: 0.0,
                    disconnections: count_disconnected_hinges(&model),
                    singular: true,
                })
            }
            Err(e) => Err(e),
        }
    }

    pub fn evaluate_kinds(&self, kinds: &[CellKind]) -> Result<Evaluation, Error> {
        self.evaluate(&self.design(kinds)?)
    }
}

fn square_corners(x0: f64, y0: f64, side: f64) -> [Point; 4] {
    [Point::new(x0, y0), Point::new(x0 + side, y0), Point::new(x0 + side, y0 + side), Point::new(x0, y0 + side)]
}

/// Door latch: 80×100 mm domain with rigid top, bottom and left borders, a
/// 20×20 mm rigid axle and a rigid latch protruding right. Top and bottom
/// edges are clamped, the axle carries a counter-clockwise torque, and the
/// probe is the latch tip midpoint with retraction (−x) positive.
pub fn build_door_latch(guided: bool) -> Scenario {
    use crate::lattice::latch::*;
    let params = CellParams::default();
    let l = params.cell_size;
    let preset = if guided { Guidance::latch_guided() } else { Guidance::LatchUnguided };
    let grid = apply_guidance(&latch_domain(), &preset).expect("latch preset matches the latch domain");
    let width = DOMAIN_COLS as f64 * l;
    let height = ROWS as f64 * l;
    let axle_x = AXLE_COLS[0] as f64 * l;
    let axle_y = (ROWS - 1 - AXLE_ROWS[1]) as f64 * l;
    let tip_x = (LATCH_COLS[1] + 1) as f64 * l;
    let tip_y = (ROWS - 1 - LATCH_ROW) as f64 * l + 0.5 * l;
    Scenario {
        format: scenario_format(),
        version: SCENARIO_VERSION,
        name: if guided { "latch-guided" } else { "latch-unguided" }.into(),
        grid,
        params,
        material: Material::TPU,
        insert_nodes: vec![Point::new(tip_x, tip_y)],
        supports: vec![
            Support { at: NodeSelector::rect(0.0, 0.0, width, 0.0), dofs: all_dofs() },
            Support { at: NodeSelector::rect(0.0, height, width, height), dofs: all_dofs() },
        ],
        symmetry: None,
        torques: vec![Torque {
            center: Point::new(axle_x + l, axle_y + l),
            corners: square_corners(axle_x, axle_y, 2.0 * l),
            torque: LATCH_TORQUE,
        }],
        forces: vec![],
        probe: Probe { point: Point::new(tip_x, tip_y), ux_sign: -1.0, theta_sign: 1.0 },
        reward: RewardSpec::Latch { c: LATCH_C },
        tiling: TilingSpec { strategy: TilingStrategy::Spiral, direction: TilingDirection::Inward, axis: Axis::Horizontal },
        floor_reward: 0.0,
    }
}

/// Half gripper right of the symmetry line x = 0: rigid handle on top, 5×5
/// body, rigid jaw below. Symmetry conditions on x = 0, the upper outer body
/// corner clamped, 100 N upward on the handle, and the jaw's inner bottom
/// corner as probe with grasping (clockwise) rotation positive.
pub fn build_gripper() -> Scenario {
    let grid = apply_guidance(&gripper_domain(), &Guidance::gripper_guided()).expect("gripper preset");
    gripper_scenario("gripper", grid, GRIPPER_C1, 1.0)
}

fn gripper_scenario(name: &str, grid: DesignGrid, c1: f64, c2: f64) -> Scenario {
    let params = CellParams::default();
    let l = params.cell_size;
    let rows = grid.rows() as f64;
    let top = rows * l;
    let cols = grid.cols() as f64;
    // body occupies the first row below the handle
    let handle_rows = (0..grid.rows()).take_while(|&r| (1..grid.cols()).all(|c| grid.get(r, c) == Slot::Hole)).count() as f64;
    let body_top = top - handle_rows * l;
    let jaw_col = (0..grid.cols()).find(|&c| grid.get(grid.rows() - 1, c) != Slot::Hole).unwrap_or(0) as f64;
    Scenario {
        format: scenario_format(),
        version: SCENARIO_VERSION,
        name: name.into(),
        grid,
        params,
        material: Material::TPU,
        insert_nodes: vec![],
        supports: vec![Support { at: NodeSelector::rect((cols - 1.0) * l, body_top - l, cols * l, body_top), dofs: all_dofs() }],
        symmetry: Some(NodeSelector::rect(0.0, 0.0, 0.0, top)),
        torques: vec![],
        forces: vec![NodalForce { at: NodeSelector::rect(0.0, top, l, top), fx: 0.0, fy: GRIPPER_FORCE, mz: 0.0 }],
        probe: Probe { point: Point::new(jaw_col * l, 0.0), ux_sign: 1.0, theta_sign: -1.0 },
        reward: RewardSpec::Gripper { c1, c2 },
        tiling: TilingSpec { strategy: TilingStrategy::Zigzag, direction: TilingDirection::Outward, axis: Axis::Vertical },
        floor_reward: 0.0,
    }
}

/// Gripper with hinge penalization `c2`.
pub fn gripper_with_penalty(c2: f64) -> Scenario {
    let mut s = build_gripper();
    s.reward = RewardSpec::Gripper { c1: GRIPPER_C1, c2 };
    s
}

/// Torque on the reduced latch, N·mm.
pub const TOY_LATCH_TORQUE: f64 = 500.0;

/// Reduced latch with a 3×3 design block (H = 9) between clamped rigid
/// rails, a one-cell rigid axle on the left and a rigid latch on the right.
pub fn toy_latch() -> Scenario {
    let grid = DesignGrid::from_codes(&["R R R R R - -", ". . ? ? ? - -", ". R ? ? ? R R", ". . ? ? ? - -", "R R R R R - -"])
        .expect("toy latch layout");
    let params = CellParams::default();
    let l = params.cell_size;
    let (tip_x, tip_y) = (7.0 * l, 2.5 * l);
    Scenario {
        format: scenario_format(),
        version: SCENARIO_VERSION,
        name: "toy-latch".into(),
        grid,
        params,
        material: Material::TPU,
        insert_nodes: vec![Point::new(tip_x, tip_y)],
        supports: vec![
            Support { at: NodeSelector::rect(0.0, 0.0, 5.0 * l, 0.0), dofs: all_dofs() },
            Support { at: NodeSelector::rect(0.0, 5.0 * l, 5.0 * l, 5.0 * l), dofs: all_dofs() },
        ],
        symmetry: None,
        torques: vec![Torque { center: Point::new(1.5 * l, 2.5 * l), corners: square_corners(l, 2.0 * l, l), torque: TOY_LATCH_TORQUE }],
        forces: vec![],
        probe: Probe { point: Point::new(tip_x, tip_y), ux_sign: -1.0, theta_sign: 1.0 },
        reward: RewardSpec::Latch { c: LATCH_C },
        tiling: TilingSpec { strategy: TilingStrategy::Spiral, direction: TilingDirection::Inward, axis: Axis::Horizontal },
        floor_reward: 0.0,
    }
}

/// Named built-in scenarios.
pub fn builtin(name: &str) -> Option<Scenario> {
    Some(match name {
        "latch-unguided" => build_door_latch(false),
        "latch-guided" => build_door_latch(true),
        "gripper" => build_gripper(),
        "gripper-unpenalized" => gripper_with_penalty(0.0),
        "toy-latch" => toy_latch(),
        _ => return None,
    })
}

pub const BUILTIN_SCENARIOS: [&str; 5] = ["latch-unguided", "latch-guided", "gripper", "gripper-unpenalized", "toy-latch"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellLoad {
    F1,
    F2,
    F3,
}

impl CellLoad {
    pub fn name(&self) -> &'static str {
        match self {
            CellLoad::F1 => "F1",
            CellLoad::F2 => "F2",
            CellLoad::F3 => "F3",
        }
    }

    /// Force at the loaded corner, N.
    pub fn force(&self) -> (f64, f64) {
        match self {
            CellLoad::F1 => (-100.0, 0.0),
            CellLoad::F2 => (0.0, -100.0),
            CellLoad::F3 => (100.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResponse {
    pub load: CellLoad,
    pub ux: f64,
    pub uy: f64,
    pub magnitude: f64,
    /// Largest nodal |u| over the whole cell.
    pub peak: f64,
}

/// Standalone cell with its bottom edge clamped; each load acts at the
/// top-left corner and the response is read at the top-right corner and as
/// the peak over all nodes.
/// Parallelograms get the extra opposite horizontal load F3.
pub fn cell_load_tests(kind: CellKind, params: &CellParams) -> Result<Vec<CellResponse>, Error> {
    if !kind.is_action() {
        return Err(Error::NotPlaceable(kind));
    }
    let mut model = FrameModel::new();
    for seg in emit_geometry(kind, Point::new(0.0, 0.0), params)? {
        model.add_segment(seg.a, seg.b, seg.section, Material::TPU);
    }
    let l = params.cell_size;
    let mut base = LoadCase::new();
    let mut top: Vec<usize> = Vec::new();
    for (i, p) in model.nodes.iter().enumerate() {
        if p.y.abs() < 1e-9 {
            base.clamp(i);
        } else if (p.y - l).abs() < 1e-9 {
            top.push(i);
        }
    }
    top.sort_by(|a, b| model.nodes[*a].x.total_cmp(&model.nodes[*b].x));
    let (p1, p2) = (top[0], *top.last().unwrap());
    let loads: &[CellLoad] = if kind.is_square() { &[CellLoad::F1, CellLoad::F2] } else { &[CellLoad::F1, CellLoad::F2, CellLoad::F3] };
    loads
        .iter()
        .map(|&load| {
            let mut case = base.clone();
            let (fx, fy) = load.force();
            case.add_load(p1, fx, fy, 0.0);
            let u = fea::solve(&model, &case)?;
            Ok(CellResponse {
                load,
                ux: u.component(p2, Component::Ux),
                uy: u.component(p2, Component::Uy),
                magnitude: u.component(p2, Component::Magnitude),
                peak: u.max_translation(),
            })
        })
        .collect()
}

/// One qualitative comparison between unit-cell responses, read as |u| at
/// the top-right corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

fn response(kind: CellKind, params: &CellParams, load: CellLoad) -> Result<f64, Error> {
    cell_load_tests(kind, params)?.into_iter().find(|r| r.load == load).map(|r| r.magnitude).ok_or(Error::NotPlaceable(kind))
}

/// Deformation orderings among the unit cells: pure square far softer than
/// any reinforced square under F1, the double-diagonal square stiffest under
/// each load, diagonal-reinforced forward parallelograms stiffer under F2
/// than F1, and the pure parallelogram within a factor of 3 across loads.
pub fn unit_cell_orderings(params: &CellParams) -> Result<Vec<OrderingCheck>, Error> {
    use crate::cells::{Facing, Reinforcement as R};
    let mut checks = Vec::new();
    let reinforced = [R::Forward, R::Backward, R::Double];

    let pure = response(CellKind::square(R::Pure), params, CellLoad::F1)?;
    let mut stiffest = 0.0f64;
    for r in reinforced {
        stiffest = stiffest.max(response(CellKind::square(r), params, CellLoad::F1)?);
    }
    checks.push(OrderingCheck {
        name: "SP >= 5x every reinforced square under F1".into(),
        holds: pure >= 5.0 * stiffest,
        detail: format!("SP {pure:.4} mm, largest reinforced {stiffest:.4} mm, ratio {:.2}", pure / stiffest),
    });

    for load in [CellLoad::F1, CellLoad::F2] {
        let d = response(CellKind::square(R::Double), params, load)?;
        let mut others = Vec::new();
        for r in [R::Pure, R::Forward, R::Backward] {
            let kind = CellKind::square(r);
            others.push((kind.code(), response(kind, params, load)?));
        }
        let (min_code, min) = others.iter().cloned().fold((String::new(), f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        checks.push(OrderingCheck {
            name: format!("SD minimal among squares under {}", load.name()),
            holds: d <= min,
            detail: format!("SD {d:.4} mm, smallest other {min_code} {min:.4} mm"),
        });
    }

    for r in [R::Backward, R::Double] {
        let kind = CellKind::para(Facing::Forward, r);
        let (f1, f2) = (response(kind, params, CellLoad::F1)?, response(kind, params, CellLoad::F2)?);
        checks.push(OrderingCheck {
            name: format!("{} smaller under F2 than F1", kind.code()),
            holds: f2 < f1,
            detail: format!("F1 {f1:.4} mm, F2 {f2:.4} mm"),
        });
    }

    let fp: Vec<f64> = cell_load_tests(CellKind::para(Facing::Forward, R::Pure), params)?.iter().map(|r| r.magnitude).collect();
    let (lo, hi) = fp.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    checks.push(OrderingCheck {
        name: "FP same order across F1-F3 (max/min <= 3)".into(),
        holds: hi <= 3.0 * lo,
        detail: format!("min {lo:.4} mm, max {hi:.4} mm, ratio {:.3}", hi / lo),
    });
    Ok(checks)
}
