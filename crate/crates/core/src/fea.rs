//! Linear-static 2D frame analysis with Euler–Bernoulli beam elements.
//!
//! Each node carries three degrees of freedom `(ux, uy, θz)`. The reduced
//! stiffness matrix is stored as a skyline (variable band) after a reverse
//! Cuthill–McKee renumbering and factored as `L·D·Lᵀ`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cells::Section;
use crate::geom::Point;
use crate::lattice::{FrameModel, Material};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dof {
    Ux = 0,
    Uy = 1,
    Rz = 2,
}

impl Dof {
    pub const ALL: [Dof; 3] = [Dof::Ux, Dof::Uy, Dof::Rz];
}

/// Nodal loads and supports for one analysis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadCase {
    /// `(node, [Fx N, Fy N, Mz N·mm])`; repeated nodes accumulate.
    pub loads: Vec<(usize, [f64; 3])>,
    pub fixed: Vec<(usize, Dof)>,
    /// Nodes on a vertical symmetry plane: `ux = 0` and `θz = 0`.
    pub symmetry: Vec<usize>,
}

impl LoadCase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_load(&mut self, node: usize, fx: f64, fy: f64, mz: f64) {
        self.loads.push((node, [fx, fy, mz]));
    }

    pub fn clamp(&mut self, node: usize) {
        self.fixed.extend(Dof::ALL.iter().map(|d| (node, *d)));
    }

    pub fn fix(&mut self, node: usize, dof: Dof) {
        self.fixed.push((node, dof));
    }

    pub fn merge(&mut self, other: LoadCase) {
        self.loads.extend(other.loads);
        self.fixed.extend(other.fixed);
        self.symmetry.extend(other.symmetry);
    }

    pub fn scaled(&self, factor: f64) -> LoadCase {
        let mut out = self.clone();
        for (_, f) in &mut out.loads {
            for v in f.iter_mut() {
                *v *= factor;
            }
        }
        out
    }

    fn fixed_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; 3 * n];
        for &(node, dof) in &self.fixed {
            mask[3 * node + dof as usize] = true;
        }
        for &node in &self.symmetry {
            mask[3 * node] = true;
            mask[3 * node + 2] = true;
        }
        mask
    }

    fn load_vector(&self, n: usize) -> Vec<f64> {
        let mut f = vec![0.0; 3 * n];
        for (node, v) in &self.loads {
            for k in 0..3 {
                f[3 * node + k] += v[k];
            }
        }
        f
    }
}

/// Per-node `(ux mm, uy mm, θz rad)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub values: Vec<[f64; 3]>,
    /// `‖K·u − f‖ / ‖f‖` over the free degrees of freedom.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Ux,
    Uy,
    Magnitude,
    Rz,
}

impl DisplacementField {
    pub fn component(&self, node: usize, c: Component) -> f64 {
        let [ux, uy, rz] = self.values[node];
        match c {
            Component::Ux => ux,
            Component::Uy => uy,
            Component::Magnitude => ux.hypot(uy),
            Component::Rz => rz,
        }
    }

    pub fn max_translation(&self) -> f64 {
        self.values.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }
}

/// Value of `component` at the node located at `point`.
pub fn probe(model: &FrameModel, field: &DisplacementField, point: Point, component: Component) -> Result<f64, Error> {
    let node = model.nearest_node(point, 1e-6).ok_or(Error::NoNodeNear(point))?;
    Ok(field.component(node, component))
}

/// Global 6×6 stiffness of a frame element between `a` and `b`, DOF order
/// `(ux_a, uy_a, θ_a, ux_b, uy_b, θ_b)`.
pub fn element_stiffness(a: Point, b: Point, section: &Section, material: &Material) -> Result<[[f64; 6]; 6], Error> {
    let length = a.distance(&b);
    if !(length > 1e-9) {
        return Err(Error::ZeroLengthElement(a));
    }
    let e = material.youngs_modulus;
    let ea = e * section.area / length;
    let ei = e * section.inertia;
    let k1 = 12.0 * ei / length.powi(3);
    let k2 = 6.0 * ei / length.powi(2);
    let k3 = 4.0 * ei / length;
    let k4 = 2.0 * ei / length;
    let local = [
        [ea, 0.0, 0.0, -ea, 0.0, 0.0],
        [0.0, k1, k2, 0.0, -k1, k2],
        [0.0, k2, k3, 0.0, -k2, k4],
        [-ea, 0.0, 0.0, ea, 0.0, 0.0],
        [0.0, -k1, -k2, 0.0, k1, -k2],
        [0.0, k2, k4, 0.0, -k2, k3],
    ];
    let c = (b.x - a.x) / length;
    let s = (b.y - a.y) / length;
    // local = T · global
    let mut t = [[0.0; 6]; 6];
    for blk in [0, 3] {
        t[blk][blk] = c;
        t[blk][blk + 1] = s;
        t[blk + 1][blk] = -s;
        t[blk + 1][blk + 1] = c;
        t[blk + 2][blk + 2] = 1.0;
    }
    let mut kt = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            kt[i][j] = (0..6).map(|m| local[i][m] * t[m][j]).sum();
        }
    }
    let mut out = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            out[i][j] = (0..6).map(|m| t[m][i] * kt[m][j]).sum();
        }
    }
    // exact symmetry
    for i in 0..6 {
        for j in 0..i {
            let v = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

fn element_dofs(model: &FrameModel, e: usize) -> [usize; 6] {
    let [i, j] = model.elements[e].nodes;
    [3 * i, 3 * i + 1, 3 * i + 2, 3 * j, 3 * j + 1, 3 * j + 2]
}

fn model_element_stiffness(model: &FrameModel, e: usize) -> Result<[[f64; 6]; 6], Error> {
    let el = &model.elements[e];
    element_stiffness(model.nodes[el.nodes[0]], model.nodes[el.nodes[1]], &el.section, &el.material)
}

/// Unconstrained global stiffness as a dense row-major matrix. Intended for
/// small models and diagnostics.
pub fn global_stiffness_dense(model: &FrameModel) -> Result<Vec<Vec<f64>>, Error> {
    let n = 3 * model.nodes.len();
    let mut k = vec![vec![0.0; n]; n];
    for e in 0..model.elements.len() {
        let ke = model_element_stiffness(model, e)?;
        let dofs = element_dofs(model, e);
        for a in 0..6 {
            for b in 0..6 {
                k[dofs[a]][dofs[b]] += ke[a][b];
            }
        }
    }
    Ok(k)
}

/// Nodal reaction forces `K·u − f` (non-zero only at supported DOFs).
pub fn reactions(model: &FrameModel, case: &LoadCase, field: &DisplacementField) -> Result<Vec<[f64; 3]>, Error> {
    let n = model.nodes.len();
    let mut r = vec![0.0; 3 * n];
    for e in 0..model.elements.len() {
        let ke = model_element_stiffness(model, e)?;
        let dofs = element_dofs(model, e);
        for a in 0..6 {
            let mut acc = 0.0;
            for b in 0..6 {
                acc += ke[a][b] * field.values[dofs[b] / 3][dofs[b] % 3];
            }
            r[dofs[a]] += acc;
        }
    }
    let f = case.load_vector(n);
    Ok((0..n).map(|i| [r[3 * i] - f[3 * i], r[3 * i + 1] - f[3 * i + 1], r[3 * i + 2] - f[3 * i + 2]]).collect())
}

/// Four tangential corner forces of magnitude `T / (4r)` turning
/// counter-clockwise about `center`: zero net force, net moment `torque`.
pub fn apply_torque_couple(model: &FrameModel, center: Point, corners: [usize; 4], torque: f64) -> Result<LoadCase, Error> {
    let degenerate = |why: &str| Error::DegenerateCouple(why.to_string());
    let mut sorted = corners;
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(degenerate("repeated corner node"));
    }
    let pts: Vec<Point> = corners
        .iter()
        .map(|&i| model.nodes.get(i).copied().ok_or_else(|| degenerate("corner node out of range")))
        .collect::<Result<_, _>>()?;
    let r = pts[0].distance(&center);
    if !(r > 1e-9) {
        return Err(degenerate("corner at the centre"));
    }
    if pts.iter().any(|p| (p.distance(&center) - r).abs() > 1e-9 * r) {
        return Err(degenerate("corners are not equidistant from the centre"));
    }
    let magnitude = torque / (4.0 * r);
    let mut case = LoadCase::new();
    let (mut sx, mut sy) = (0.0, 0.0);
    for (&node, p) in corners.iter().zip(&pts) {
        let (dx, dy) = (p.x - center.x, p.y - center.y);
        let fx = -dy / r * magnitude;
        let fy = dx / r * magnitude;
        sx += fx;
        sy += fy;
        case.add_load(node, fx, fy, 0.0);
    }
    if sx.hypot(sy) > 1e-9 * magnitude.abs().max(f64::MIN_POSITIVE) * 4.0 {
        return Err(degenerate("corner forces do not cancel"));
    }
    Ok(case)
}

/// Solves `K·u = f` on the free degrees of freedom.
///
/// Components with neither supports nor loads are held at zero. A loaded
/// component without supports, or a singular reduced matrix, is an error
/// listing the components that carry no clamped node.
pub fn solve(model: &FrameModel, case: &LoadCase) -> Result<DisplacementField, Error> {
    let n = model.nodes.len();
    for &(node, _) in case.loads.iter() {
        if node >= n {
            return Err(Error::InvalidLoadCase(format!("load on missing node {node}")));
        }
    }
    if let Some(&(node, _)) = case.fixed.iter().find(|(node, _)| *node >= n) {
        return Err(Error::InvalidLoadCase(format!("support on missing node {node}")));
    }
    if let Some(&node) = case.symmetry.iter().find(|node| **node >= n) {
        return Err(Error::InvalidLoadCase(format!("symmetry on missing node {node}")));
    }

    let mut fixed = case.fixed_mask(n);
    let f = case.load_vector(n);
    if let Some(d) = (0..3 * n).find(|&d| fixed[d] && f[d] != 0.0) {
        return Err(Error::InvalidLoadCase(format!("node {} dof {} is both loaded and fixed", d / 3, d % 3)));
    }
    if fixed.iter().filter(|x| **x).count() < 3 && n > 0 {
        return Err(Error::InvalidLoadCase("fewer than three constrained DOFs".into()));
    }

    let components = model.components();
    let mut floating = Vec::new();
    for comp in &components {
        let supported = comp.iter().any(|&v| (0..3).any(|k| fixed[3 * v + k]));
        if supported {
            continue;
        }
        let loaded = comp.iter().any(|&v| (0..3).any(|k| f[3 * v + k] != 0.0));
        if loaded {
            floating.push(comp.clone());
        } else {
            for &v in comp {
                for k in 0..3 {
                    fixed[3 * v + k] = true;
                }
            }
        }
    }
    if !floating.is_empty() {
        return Err(Error::Singular { floating });
    }

    // reverse Cuthill–McKee over nodes, then number free DOFs node by node
    let order = rcm_order(model);
    let mut eq = vec![usize::MAX; 3 * n];
    let mut dof_of_eq = Vec::new();
    for &v in &order {
        for k in 0..3 {
            if !fixed[3 * v + k] {
                eq[3 * v + k] = dof_of_eq.len();
                dof_of_eq.push(3 * v + k);
            }
        }
    }
    let neq = dof_of_eq.len();
    let mut field = vec![[0.0; 3]; n];
    if neq == 0 {
        return Ok(DisplacementField { values: field, relative_residual: 0.0 });
    }

    let mut first: Vec<usize> = (0..neq).collect();
    for e in 0..model.elements.len() {
        let eqs: Vec<usize> = element_dofs(model, e).iter().map(|&d| eq[d]).filter(|&q| q != usize::MAX).collect();
        if let Some(&lo) = eqs.iter().min() {
            for &q in &eqs {
                first[q] = first[q].min(lo);
            }
        }
    }
    let mut sky = Skyline::new(first);
    for e in 0..model.elements.len() {
        let ke = model_element_stiffness(model, e)?;
        let dofs = element_dofs(model, e);
        for a in 0..6 {
            let qa = eq[dofs[a]];
            if qa == usize::MAX {
                continue;
            }
            for b in 0..6 {
                let qb = eq[dofs[b]];
                if qb != usize::MAX && qb <= qa {
                    *sky.at_mut(qa, qb) += ke[a][b];
                }
            }
        }
    }
    let rhs: Vec<f64> = dof_of_eq.iter().map(|&d| f[d]).collect();
    let original = sky.clone();

    if let Err(q) = sky.factor() {
        let node = dof_of_eq[q] / 3;
        let suspects = components
            .iter()
            .filter(|comp| !comp.iter().any(|&v| (0..3).all(|k| case_fixed(case, v, k))))
            .filter(|comp| comp.contains(&node) || comp.len() > 1)
            .cloned()
            .collect::<Vec<_>>();
        return Err(Error::Singular { floating: suspects });
    }
    let u = sky.solve(&rhs);

    let ku = original.symmetric_mul(&u);
    let norm_f = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_r = ku.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let relative_residual = if norm_f > 0.0 { norm_r / norm_f } else { norm_r };

    for (q, &d) in dof_of_eq.iter().enumerate() {
        field[d / 3][d % 3] = u[q];
    }
    Ok(DisplacementField { values: field, relative_residual })
}

fn case_fixed(case: &LoadCase, node: usize, k: usize) -> bool {
    case.fixed.iter().any(|&(v, d)| v == node && d as usize == k)
}

fn rcm_order(model: &FrameModel) -> Vec<usize> {
    let n = model.nodes.len();
    let mut adj = vec![Vec::new(); n];
    for e in &model.elements {
        adj[e.nodes[0]].push(e.nodes[1]);
        adj[e.nodes[1]].push(e.nodes[0]);
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&v| (degree[v], v));
    for &s in &starts {
        if seen[s] {
            continue;
        }
        let root = pseudo_peripheral(s, &adj);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(start: usize, adj: &[Vec<usize>]) -> usize {
    let mut root = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let (far, depth) = farthest(root, adj);
        if depth <= ecc {
            break;
        }
        ecc = depth;
        root = far;
    }
    root
}

fn farthest(root: usize, adj: &[Vec<usize>]) -> (usize, usize) {
    let mut dist = std::collections::HashMap::from([(root, 0usize)]);
    let mut queue = VecDeque::from([root]);
    let mut best = (root, 0);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d > best.1 || (d == best.1 && adj[v].len() < adj[best.0].len()) {
            best = (v, d);
        }
        for &w in &adj[v] {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                e.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    best
}

/// Lower-triangle skyline storage: row `i` holds columns `first[i]..=i`.
#[derive(Debug, Clone)]
struct Skyline {
    first: Vec<usize>,
    ptr: Vec<usize>,
    data: Vec<f64>,
}

const PIVOT_TOLERANCE: f64 = 1e-11;

impl Skyline {
    fn new(first: Vec<usize>) -> Self {
        let mut ptr = Vec::with_capacity(first.len() + 1);
        ptr.push(0);
        for (i, &f) in first.iter().enumerate() {
            ptr.push(ptr[i] + (i - f + 1));
        }
        let data = vec![0.0; *ptr.last().unwrap()];
        Self { first, ptr, data }
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(j <= i && j >= self.first[i]);
        &mut self.data[self.ptr[i] + j - self.first[i]]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.ptr[i]..self.ptr[i + 1]]
    }

    /// In-place `L·D·Lᵀ`; on a non-positive pivot returns its equation index.
    fn factor(&mut self) -> Result<(), usize> {
        let n = self.first.len();
        for i in 0..n {
            let fi = self.first[i];
            let diag = self.data[self.ptr[i + 1] - 1];
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let (head, tail) = self.data.split_at_mut(self.ptr[i]);
                let row_j = &head[self.ptr[j]..self.ptr[j + 1]];
                let row_i = &mut tail[..self.ptr[i + 1] - self.ptr[i]];
                let dot: f64 = row_i[k0 - fi..j - fi].iter().zip(&row_j[k0 - fj..j - fj]).map(|(a, b)| a * b).sum();
                row_i[j - fi] -= dot;
            }
            let mut d = diag;
            for j in fi..i {
                let dj = self.data[self.ptr[j + 1] - 1];
                let w = self.data[self.ptr[i] + j - fi];
                let l = w / dj;
                d -= w * l;
                self.data[self.ptr[i] + j - fi] = l;
            }
            if !(d > PIVOT_TOLERANCE * diag.abs()) {
                return Err(i);
            }
            self.data[self.ptr[i + 1] - 1] = d;
        }
        Ok(())
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        let mut z = rhs.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = self.row(i);
            let s: f64 = row[..i - fi].iter().zip(&z[fi..i]).map(|(l, v)| l * v).sum();
            z[i] -= s;
        }
        for i in 0..n {
            z[i] /= self.row(i)[i - self.first[i]];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let ui = z[i];
            let row = &self.data[self.ptr[i]..self.ptr[i + 1]];
            for (k, l) in (fi..i).zip(row) {
                z[k] -= l * ui;
            }
        }
        z
    }

    /// `A·x` for the unfactored symmetric matrix.
    fn symmetric_mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let fi = self.first[i];
            let row = self.row(i);
            for (j, a) in (fi..=i).zip(row) {
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }
}
