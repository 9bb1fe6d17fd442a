//! Twin-girder Euler-Bernoulli finite element model producing bottom-fiber
//! stress influence lines.
//!
//! Both girders share one longitudinal mesh. Node `k` carries the degrees of
//! freedom `[w_L, θ_L, w_R, θ_R]` (deflection positive upward), so the global
//! stiffness is block tridiagonal with 4 × 4 blocks and is factored with the
//! same block Cholesky used by the likelihood. Units: geometry in m, `E` in
//! Pa, loads in kN, spring stiffnesses in kN/m and kNm/rad (as base-10
//! logarithms), stresses in MPa.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::SpaceTimeGrid;
use crate::linalg::{block_tridiag_cholesky, block_tridiag_solve, BlockCholeskyFactor, BlockTridiagonal};

const DOF_PER_NODE: usize = 4;
const KILO: f64 = 1e3;
const MEGA: f64 = 1e6;

/// Prismatic cross-section properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section {
    /// Young's modulus, Pa.
    pub e: f64,
    /// Second moment of area, m⁴.
    pub i: f64,
    /// Neutral axis to bottom fiber, m.
    pub c_bottom: f64,
}

impl Default for Section {
    fn default() -> Self {
        Self {
            e: 210e9,
            i: 0.25,
            c_bottom: 1.9,
        }
    }
}

/// Section override for elements whose midpoint lies in `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionZone {
    pub start: f64,
    pub end: f64,
    pub section: Section,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Girder {
    Left,
    Right,
}

impl Girder {
    fn offset(self) -> usize {
        match self {
            Girder::Left => 0,
            Girder::Right => 2,
        }
    }
}

/// How an axle between nodes is transferred to the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxleLumping {
    /// Whole load on the closest node.
    Nearest,
    /// Load split between the two element nodes in proportion to position;
    /// statically equivalent, so peaks converge at second order in the mesh.
    #[default]
    Lever,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamGeometry {
    /// Span lengths from the first support, m.
    pub span_lengths: Vec<f64>,
    /// Default section for every element.
    #[serde(default)]
    pub section: Section,
    /// Later zones take precedence over earlier ones.
    #[serde(default)]
    pub section_zones: Vec<SectionZone>,
    pub max_element_length: f64,
    /// Spacing of the vertical coupling springs; `None` leaves the girders
    /// uncoupled.
    pub coupling_spacing: Option<f64>,
    /// Support indices carrying a rotational spring, in the order of the
    /// `log10_kr` entries of [`ThetaS`]. Other supports are hinges.
    pub spring_supports: Vec<usize>,
    /// Lateral positions of the left and right girders, m.
    pub girder_z: [f64; 2],
    /// Lateral extent of the deck, m.
    pub deck_z: [f64; 2],
    pub instrumented: Girder,
    #[serde(default)]
    pub lumping: AxleLumping,
}

impl Default for BeamGeometry {
    fn default() -> Self {
        Self {
            span_lengths: vec![45.0, 50.0, 105.0, 50.0, 45.0],
            section: Section::default(),
            section_zones: Vec::new(),
            max_element_length: 2.0,
            coupling_spacing: Some(5.4),
            spring_supports: vec![0, 1, 2, 3],
            girder_z: [-3.0, 3.0],
            deck_z: [-6.0, 6.0],
            instrumented: Girder::Right,
            lumping: AxleLumping::default(),
        }
    }
}

impl BeamGeometry {
    /// One pinned-pinned span without springs or coupling.
    pub fn single_span(length: f64) -> Self {
        Self {
            span_lengths: vec![length],
            coupling_spacing: None,
            spring_supports: Vec::new(),
            ..Self::default()
        }
    }

    pub fn total_length(&self) -> f64 {
        self.span_lengths.iter().sum()
    }

    pub fn support_positions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.span_lengths.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for l in &self.span_lengths {
            acc += l;
            out.push(acc);
        }
        out
    }

    /// Start and end coordinate of span `s`.
    pub fn span_bounds(&self, s: usize) -> (f64, f64) {
        let sup = self.support_positions();
        (sup[s], sup[s + 1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.span_lengths.is_empty() {
            return Err(Error::Geometry("no spans".into()));
        }
        if let Some(l) = self.span_lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Geometry(format!("span length {l} must be positive")));
        }
        if !(self.max_element_length > 0.0) {
            return Err(Error::Geometry("max_element_length must be positive".into()));
        }
        if let Some(s) = self.coupling_spacing {
            if !(s > 0.0) {
                return Err(Error::Geometry("coupling_spacing must be positive".into()));
            }
        }
        let n_sup = self.span_lengths.len() + 1;
        if let Some(s) = self.spring_supports.iter().find(|s| **s >= n_sup) {
            return Err(Error::Geometry(format!("spring support index {s} out of range")));
        }
        let sec_ok = |s: &Section| s.e > 0.0 && s.i > 0.0 && s.c_bottom.is_finite();
        if !sec_ok(&self.section) || !self.section_zones.iter().all(|z| sec_ok(&z.section)) {
            return Err(Error::Geometry("section properties must be positive".into()));
        }
        let [zl, zr] = self.girder_z;
        if !(zr > zl) {
            return Err(Error::Geometry("right girder must lie right of the left girder".into()));
        }
        if !(self.deck_z[0] <= zl && self.deck_z[1] >= zr) {
            return Err(Error::Geometry("deck must contain both girders".into()));
        }
        Ok(())
    }

    /// Interior coupling spring positions: `round(total / spacing)` equal
    /// bays, one spring at each interior bay boundary.
    pub fn coupling_stations(&self) -> Vec<f64> {
        let Some(spacing) = self.coupling_spacing else {
            return Vec::new();
        };
        let total = self.total_length();
        let n = (total / spacing).round().max(1.0) as usize;
        (1..n).map(|i| total * i as f64 / n as f64).collect()
    }

    fn section_at(&self, x: f64) -> Section {
        self.section_zones
            .iter()
            .rev()
            .find(|z| x >= z.start && x < z.end)
            .map_or(self.section, |z| z.section)
    }
}

/// Structural parameters: base-10 logarithms of the support rotational
/// springs (kNm/rad) and of the girder coupling springs (kN/m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaS {
    pub log10_kr: Vec<f64>,
    pub log10_kv: f64,
}

impl ThetaS {
    /// Midpoints of the default prior boxes.
    pub fn midpoint(n_springs: usize) -> Self {
        Self {
            log10_kr: vec![7.0; n_springs],
            log10_kv: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lane {
    Left,
    Right,
}

/// A truck crossing in the `+x` direction. The front axle sits at the load
/// position and axle `i` trails it by `axle_offsets[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruckLoad {
    pub axle_offsets: Vec<f64>,
    /// Axle loads, kN.
    pub axle_loads: Vec<f64>,
    pub lane: Lane,
    /// Lateral position of the truck, m.
    pub z: f64,
}

impl TruckLoad {
    /// Five-axle test truck.
    pub fn standard(lane: Lane, z: f64) -> Self {
        Self {
            axle_offsets: vec![0.0, 2.06, 3.89, 5.71, 7.53],
            axle_loads: vec![59.35, 108.82, 108.82, 108.82, 108.82],
            lane,
            z,
        }
    }

    /// Standard truck over each girder: left lane first.
    pub fn standard_pair(geometry: &BeamGeometry) -> Vec<TruckLoad> {
        vec![
            TruckLoad::standard(Lane::Left, geometry.girder_z[0]),
            TruckLoad::standard(Lane::Right, geometry.girder_z[1]),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.axle_offsets.len() != self.axle_loads.len() || self.axle_loads.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: self.axle_offsets.len(),
                got: self.axle_loads.len(),
            });
        }
        if self.axle_loads.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Geometry("axle loads must be positive".into()));
        }
        if self.axle_offsets.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Geometry("axle offsets must be nondecreasing".into()));
        }
        Ok(())
    }
}

/// Share of a load at lateral position `z` carried by `(left, right)`
/// girders: linear in `z`, `(1, 0)` over the left girder, `(0, 1)` over the
/// right one.
pub fn lateral_load_function(z: f64, geometry: &BeamGeometry) -> Result<(f64, f64)> {
    let [min, max] = geometry.deck_z;
    if !(z >= min && z <= max) {
        return Err(Error::OutsideDeck { z, min, max });
    }
    let [zl, zr] = geometry.girder_z;
    let right = (z - zl) / (zr - zl);
    Ok((1.0 - right, right))
}

/// Longitudinal discretization shared by both girders.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<f64>,
    /// Section of element `e` spanning `nodes[e]..nodes[e + 1]`.
    pub sections: Vec<Section>,
    pub support_nodes: Vec<usize>,
    pub coupling_nodes: Vec<usize>,
}

impl Mesh {
    /// Mesh whose breakpoints are the supports, the coupling stations and
    /// `extra_points`; each
    /// interval is split uniformly into `ceil(len / max_element_length)`
    /// elements.
    pub fn build(geometry: &BeamGeometry, extra_points: &[f64]) -> Result<Self> {
        geometry.validate()?;
        let supports = geometry.support_positions();
        let total = geometry.total_length();
        let tol = 1e-9 * total;
        let stations = geometry.coupling_stations();
        let mut breaks = supports.clone();
        breaks.extend_from_slice(&stations);
        for &x in extra_points {
            if !(x > 0.0 && x < total) {
                return Err(Error::Geometry(format!("point {x} lies outside the bridge (0, {total})")));
            }
            breaks.push(x);
        }
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup_by(|a, b| (*a - *b).abs() <= tol);

        let mut nodes = vec![breaks[0]];
        for w in breaks.windows(2) {
            let len = w[1] - w[0];
            let n = (len / geometry.max_element_length - 1e-9).ceil().max(1.0) as usize;
            for i in 1..n {
                nodes.push(w[0] + len * i as f64 / n as f64);
            }
            nodes.push(w[1]);
        }
        let sections = nodes
            .windows(2)
            .map(|w| geometry.section_at(0.5 * (w[0] + w[1])))
            .collect();
        let support_nodes = supports.iter().map(|&x| nearest_node(&nodes, x)).collect();
        let coupling_nodes = stations.iter().map(|&x| nearest_node(&nodes, x)).collect();
        Ok(Self {
            nodes,
            sections,
            support_nodes,
            coupling_nodes,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Element containing `x`, with local coordinate `ξ ∈ [0, 1]`.
    fn locate(&self, x: f64) -> (usize, f64) {
        let n_el = self.nodes.len() - 1;
        let e = match self.nodes.binary_search_by(|n| n.total_cmp(&x)) {
            Ok(i) => i.min(n_el - 1),
            Err(i) => i.saturating_sub(1).min(n_el - 1),
        };
        let (a, b) = (self.nodes[e], self.nodes[e + 1]);
        (e, ((x - a) / (b - a)).clamp(0.0, 1.0))
    }
}

/// Index of the node closest to `x`; ties go to the lower index.
fn nearest_node(nodes: &[f64], x: f64) -> usize {
    match nodes.binary_search_by(|n| n.total_cmp(&x)) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) if i == nodes.len() => nodes.len() - 1,
        Err(i) => {
            if x - nodes[i - 1] <= nodes[i] - x {
                i - 1
            } else {
                i
            }
        }
    }
}

/// Euler-Bernoulli element stiffness for local DOFs `[w_i, θ_i, w_j, θ_j]`.
fn element_stiffness(s: &Section, l: f64) -> [[f64; 4]; 4] {
    let k = s.e * s.i / (l * l * l);
    let (l2, l1) = (l * l, l);
    [
        [12.0 * k, 6.0 * l1 * k, -12.0 * k, 6.0 * l1 * k],
        [6.0 * l1 * k, 4.0 * l2 * k, -6.0 * l1 * k, 2.0 * l2 * k],
        [-12.0 * k, -6.0 * l1 * k, 12.0 * k, -6.0 * l1 * k],
        [6.0 * l1 * k, 2.0 * l2 * k, -6.0 * l1 * k, 4.0 * l2 * k],
    ]
}

/// Global stiffness (N, m) with pinned vertical supports applied as identity
/// rows and columns.
pub fn assemble(geometry: &BeamGeometry, mesh: &Mesh, theta_s: &ThetaS) -> Result<BlockTridiagonal> {
    if theta_s.log10_kr.len() != geometry.spring_supports.len() {
        return Err(Error::DimensionMismatch {
            expected: geometry.spring_supports.len(),
            got: theta_s.log10_kr.len(),
        });
    }
    if theta_s.log10_kr.iter().chain([&theta_s.log10_kv]).any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Geometry("spring stiffness must be finite".into()));
    }
    let m = mesh.n_nodes();
    let mut k = BlockTridiagonal::zeros(m, DOF_PER_NODE);
    for (e, w) in mesh.nodes.windows(2).enumerate() {
        let ke = element_stiffness(&mesh.sections[e], w[1] - w[0]);
        for g in [Girder::Left, Girder::Right] {
            let o = g.offset();
            {
                let mut d = k.diag_block_mut(e);
                for a in 0..2 {
                    for b in 0..2 {
                        d[(o + a, o + b)] += ke[a][b];
                    }
                }
            }
            {
                let mut d = k.diag_block_mut(e + 1);
                for a in 0..2 {
                    for b in 0..2 {
                        d[(o + a, o + b)] += ke[2 + a][2 + b];
                    }
                }
            }
            let mut c = k.off_block_mut(e);
            for a in 0..2 {
                for b in 0..2 {
                    c[(o + a, o + b)] += ke[2 + a][b];
                }
            }
        }
    }
    for (&s, &lk) in geometry.spring_supports.iter().zip(&theta_s.log10_kr) {
        let kr = 10f64.powf(lk) * KILO;
        let mut d = k.diag_block_mut(mesh.support_nodes[s]);
        d[(1, 1)] += kr;
        d[(3, 3)] += kr;
    }
    let kv = 10f64.powf(theta_s.log10_kv) * KILO;
    for &node in &mesh.coupling_nodes {
        let mut d = k.diag_block_mut(node);
        d[(0, 0)] += kv;
        d[(2, 2)] += kv;
        d[(0, 2)] -= kv;
        d[(2, 0)] -= kv;
    }
    for &node in &mesh.support_nodes {
        for dof in [0, 2] {
            pin(&mut k, node, dof);
        }
    }
    Ok(k)
}

fn pin(k: &mut BlockTridiagonal, node: usize, dof: usize) {
    let n = DOF_PER_NODE;
    let m = k.n_blocks();
    {
        let mut d = k.diag_block_mut(node);
        for j in 0..n {
            d[(dof, j)] = 0.0;
            d[(j, dof)] = 0.0;
        }
        d[(dof, dof)] = 1.0;
    }
    if node > 0 {
        let mut c = k.off_block_mut(node - 1);
        for j in 0..n {
            c[(dof, j)] = 0.0;
        }
    }
    if node + 1 < m {
        let mut c = k.off_block_mut(node);
        for j in 0..n {
            c[(j, dof)] = 0.0;
        }
    }
}

/// A point force on one girder, kN, positive downward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalForce {
    pub node: usize,
    pub girder: Girder,
    pub kn: f64,
}

/// Meshed model with a fixed set of sensor positions.
#[derive(Debug, Clone)]
pub struct BeamModel {
    geometry: BeamGeometry,
    mesh: Mesh,
}

/// Factored stiffness for one `θ_s`.
#[derive(Debug, Clone)]
pub struct StaticSystem<'a> {
    model: &'a BeamModel,
    factor: BlockCholeskyFactor,
}

impl BeamModel {
    /// Builds the mesh with `sensor_x` as additional breakpoints.
    pub fn new(geometry: BeamGeometry, sensor_x: &[f64]) -> Result<Self> {
        let mesh = Mesh::build(&geometry, sensor_x)?;
        Ok(Self { geometry, mesh })
    }

    pub fn geometry(&self) -> &BeamGeometry {
        &self.geometry
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn factor(&self, theta_s: &ThetaS) -> Result<StaticSystem<'_>> {
        let k = assemble(&self.geometry, &self.mesh, theta_s)?;
        let factor = block_tridiag_cholesky(&k)
            .map_err(|e| Error::Geometry(format!("singular constrained stiffness: {e}")))?;
        Ok(StaticSystem { model: self, factor })
    }

    /// Nodal forces of a truck with its front axle at `x`: axles lumped to
    /// nodes per [`AxleLumping`] and split between girders by the lateral
    /// load function. Axles off the bridge are dropped.
    pub fn truck_forces(&self, truck: &TruckLoad, x: f64) -> Result<Vec<NodalForce>> {
        let (fl, fr) = lateral_load_function(truck.z, &self.geometry)?;
        let total = self.geometry.total_length();
        let mut out = Vec::with_capacity(2 * truck.axle_loads.len());
        for (off, p) in truck.axle_offsets.iter().zip(&truck.axle_loads) {
            let xa = x - off;
            if !(xa >= 0.0 && xa <= total) {
                continue;
            }
            let shares = match self.geometry.lumping {
                AxleLumping::Nearest => [(nearest_node(&self.mesh.nodes, xa), 1.0), (0, 0.0)],
                AxleLumping::Lever => {
                    let (e, xi) = self.mesh.locate(xa);
                    [(e, 1.0 - xi), (e + 1, xi)]
                }
            };
            for (node, share) in shares {
                for (girder, f) in [(Girder::Left, fl), (Girder::Right, fr)] {
                    if f != 0.0 && share != 0.0 {
                        out.push(NodalForce {
                            node,
                            girder,
                            kn: p * f * share,
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    /// Weights `g` with `σ_bottom(x) [MPa] = gᵀ u` on the instrumented girder.
    fn stress_functional(&self, x: f64) -> (usize, [f64; 4]) {
        let (e, xi) = self.mesh.locate(x);
        let l = self.mesh.nodes[e + 1] - self.mesh.nodes[e];
        let s = &self.mesh.sections[e];
        let scale = s.e * s.c_bottom / MEGA;
        let b = [
            (-6.0 + 12.0 * xi) / (l * l),
            (-4.0 + 6.0 * xi) / l,
            (6.0 - 12.0 * xi) / (l * l),
            (-2.0 + 6.0 * xi) / l,
        ];
        (e, b.map(|v| v * scale))
    }

    /// Stress influence line of one sensor: one value per load position.
    pub fn influence_line(
        &self,
        theta_s: &ThetaS,
        truck: &TruckLoad,
        sensor_x: f64,
        load_positions: &[f64],
    ) -> Result<Vec<f64>> {
        let sys = self.factor(theta_s)?;
        let adj = sys.adjoint(sensor_x)?;
        load_positions
            .iter()
            .map(|&x| Ok(sys.apply_adjoint(&adj, &self.truck_forces(truck, x)?)))
            .collect()
    }

    /// Model predictions for every truck (lane) on `grid`: one time-major
    /// block of length `grid.len()` per truck, in truck order.
    pub fn model_response_grid(&self, theta_s: &ThetaS, trucks: &[TruckLoad], grid: &SpaceTimeGrid) -> Result<Vec<f64>> {
        let sys = self.factor(theta_s)?;
        let adjoints = grid
            .x()
            .iter()
            .map(|&x| sys.adjoint(x))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(trucks.len() * grid.len());
        for truck in trucks {
            for &t in grid.t() {
                let forces = self.truck_forces(truck, t)?;
                for adj in &adjoints {
                    out.push(sys.apply_adjoint(adj, &forces));
                }
            }
        }
        Ok(out)
    }
}

impl StaticSystem<'_> {
    /// Displacements (m, rad) under downward nodal forces.
    pub fn solve(&self, forces: &[NodalForce]) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.model.mesh.n_nodes() * DOF_PER_NODE];
        for nf in forces {
            f[nf.node * DOF_PER_NODE + nf.girder.offset()] -= nf.kn * KILO;
        }
        for &node in &self.model.mesh.support_nodes {
            f[node * DOF_PER_NODE] = 0.0;
            f[node * DOF_PER_NODE + 2] = 0.0;
        }
        block_tridiag_solve(&self.factor, &f)
    }

    /// Bottom-fiber stress (MPa) at `x` on the instrumented girder for
    /// displacement field `u`.
    pub fn stress(&self, u: &[f64], x: f64) -> f64 {
        let (e, g) = self.model.stress_functional(x);
        let o = self.model.geometry.instrumented.offset();
        let dofs = [
            e * DOF_PER_NODE + o,
            e * DOF_PER_NODE + o + 1,
            (e + 1) * DOF_PER_NODE + o,
            (e + 1) * DOF_PER_NODE + o + 1,
        ];
        dofs.iter().zip(g).map(|(&d, w)| u[d] * w).sum()
    }

    /// `K⁻¹ g` for the stress functional at `x`; the stress under force
    /// vector `f` is then `vᵀ f`.
    fn adjoint(&self, x: f64) -> Result<Vec<f64>> {
        let (e, g) = self.model.stress_functional(x);
        let o = self.model.geometry.instrumented.offset();
        let mut rhs = vec![0.0; self.model.mesh.n_nodes() * DOF_PER_NODE];
        rhs[e * DOF_PER_NODE + o] = g[0];
        rhs[e * DOF_PER_NODE + o + 1] = g[1];
        rhs[(e + 1) * DOF_PER_NODE + o] = g[2];
        rhs[(e + 1) * DOF_PER_NODE + o + 1] = g[3];
        for &node in &self.model.mesh.support_nodes {
            rhs[node * DOF_PER_NODE] = 0.0;
            rhs[node * DOF_PER_NODE + 2] = 0.0;
        }
        block_tridiag_solve(&self.factor, &rhs)
    }

    fn apply_adjoint(&self, adj: &[f64], forces: &[NodalForce]) -> f64 {
        forces
            .iter()
            .map(|f| -f.kn * KILO * adj[f.node * DOF_PER_NODE + f.girder.offset()])
            .sum()
    }
}
