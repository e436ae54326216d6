//! The Mini element: continuous P1 per velocity component enriched with one
//! cubic bubble `27 l1 l2 l3` per triangle, and continuous P1 pressure.
//!
//! Velocity coefficient layout: all x-dofs then all y-dofs; within a
//! component, the nodal values come first followed by one bubble coefficient
//! per triangle.

use crate::error::{check_len, Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// Index arithmetic for the velocity and pressure spaces of one mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub num_nodes: usize,
    pub num_triangles: usize,
}

impl DofLayout {
    pub fn new(mesh: &Mesh) -> Self {
        DofLayout {
            num_nodes: mesh.num_nodes(),
            num_triangles: mesh.num_triangles(),
        }
    }

    /// Scalar dofs per velocity component.
    pub fn per_component(&self) -> usize {
        self.num_nodes + self.num_triangles
    }

    pub fn velocity_dofs(&self) -> usize {
        2 * self.per_component()
    }

    pub fn pressure_dofs(&self) -> usize {
        self.num_nodes
    }

    pub fn node_dof(&self, component: usize, node: usize) -> usize {
        component * self.per_component() + node
    }

    pub fn bubble_dof(&self, component: usize, triangle: usize) -> usize {
        component * self.per_component() + self.num_nodes + triangle
    }

    /// Scalar (single-component) local-to-global map of a triangle: three
    /// vertices then the bubble.
    pub fn scalar_element_dofs(&self, mesh: &Mesh, t: usize) -> [usize; 4] {
        let [a, b, c] = mesh.triangles()[t];
        [a, b, c, self.num_nodes + t]
    }
}

/// Velocity in the Mini space.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    layout: DofLayout,
    coefficients: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(mesh: &Mesh) -> Self {
        let layout = DofLayout::new(mesh);
        VelocityField {
            coefficients: vec![0.0; layout.velocity_dofs()],
            layout,
        }
    }

    pub fn from_coefficients(mesh: &Mesh, coefficients: Vec<f64>) -> Result<Self> {
        let layout = DofLayout::new(mesh);
        check_len("velocity coefficients", layout.velocity_dofs(), coefficients.len())?;
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite velocity coefficient".into()));
        }
        Ok(VelocityField { layout, coefficients })
    }

    pub(crate) fn from_raw(layout: DofLayout, coefficients: Vec<f64>) -> Self {
        debug_assert_eq!(coefficients.len(), layout.velocity_dofs());
        VelocityField { layout, coefficients }
    }

    /// Nodal values only; bubbles are zero.
    pub fn from_nodal(mesh: &Mesh, values: &[[f64; 2]]) -> Result<Self> {
        check_len("nodal velocity values", mesh.num_nodes(), values.len())?;
        let mut u = VelocityField::zeros(mesh);
        for (i, v) in values.iter().enumerate() {
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite velocity at node {i}")));
            }
            u.coefficients[u.layout.node_dof(0, i)] = v[0];
            u.coefficients[u.layout.node_dof(1, i)] = v[1];
        }
        Ok(u)
    }

    pub fn layout(&self) -> DofLayout {
        self.layout
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn nodal(&self, node: usize) -> [f64; 2] {
        [
            self.coefficients[self.layout.node_dof(0, node)],
            self.coefficients[self.layout.node_dof(1, node)],
        ]
    }

    pub fn bubble(&self, triangle: usize) -> [f64; 2] {
        [
            self.coefficients[self.layout.bubble_dof(0, triangle)],
            self.coefficients[self.layout.bubble_dof(1, triangle)],
        ]
    }

    pub fn conforms_to(&self, mesh: &Mesh) -> Result<()> {
        if self.layout == DofLayout::new(mesh) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context: "velocity field vs mesh",
                expected: DofLayout::new(mesh).velocity_dofs(),
                actual: self.coefficients.len(),
            })
        }
    }
}

/// Continuous P1 pressure.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureField {
    coefficients: Vec<f64>,
}

impl PressureField {
    pub fn zeros(mesh: &Mesh) -> Self {
        PressureField {
            coefficients: vec![0.0; mesh.num_nodes()],
        }
    }

    pub fn from_coefficients(mesh: &Mesh, coefficients: Vec<f64>) -> Result<Self> {
        check_len("pressure coefficients", mesh.num_nodes(), coefficients.len())?;
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite pressure coefficient".into()));
        }
        Ok(PressureField { coefficients })
    }

    pub(crate) fn from_raw(coefficients: Vec<f64>) -> Self {
        PressureField { coefficients }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }
}

/// Vector-valued P1 data on the inflow or outflow boundary, stored
/// interleaved (`x0, y0, x1, y1, ...`) over `Mesh::boundary_nodes(tag)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryField {
    tag: BoundaryTag,
    values: Vec<f64>,
}

impl BoundaryField {
    pub fn zeros(mesh: &Mesh, tag: BoundaryTag) -> Self {
        BoundaryField {
            tag,
            values: vec![0.0; 2 * mesh.boundary_nodes(tag).len()],
        }
    }

    pub fn new(mesh: &Mesh, tag: BoundaryTag, values: Vec<f64>) -> Result<Self> {
        if !matches!(tag, BoundaryTag::Inflow | BoundaryTag::Outflow) {
            return Err(Error::InvalidArgument(format!(
                "boundary data lives on inflow or outflow, not {tag:?}"
            )));
        }
        check_len("boundary field", 2 * mesh.boundary_nodes(tag).len(), values.len())?;
        Ok(BoundaryField { tag, values })
    }

    pub(crate) fn from_raw(tag: BoundaryTag, values: Vec<f64>) -> Self {
        BoundaryField { tag, values }
    }

    pub fn tag(&self) -> BoundaryTag {
        self.tag
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Nodal interpolation into the Mini space (bubble coefficients zero).
pub fn interpolate(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> VelocityField {
    let values: Vec<[f64; 2]> = mesh.nodes().iter().map(|&p| f(p)).collect();
    VelocityField::from_nodal(mesh, &values).expect("interpolated function must be finite")
}

pub fn interpolate_pressure(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> PressureField {
    PressureField {
        coefficients: mesh.nodes().iter().map(|&p| f(p)).collect(),
    }
}

/// Nodal interpolation of boundary data on `tag`.
pub fn interpolate_boundary(mesh: &Mesh, tag: BoundaryTag, f: impl Fn([f64; 2]) -> [f64; 2]) -> BoundaryField {
    let values = mesh
        .boundary_nodes(tag)
        .into_iter()
        .flat_map(|i| f(mesh.nodes()[i]))
        .collect();
    BoundaryField::new(mesh, tag, values).expect("inflow or outflow tag")
}

/// Affine geometry of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct Element {
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_bary: [[f64; 2]; 3],
}

impl Element {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let v = mesh.vertices(t);
        let area = mesh.triangle_area(t);
        let inv = 1.0 / (2.0 * area);
        let mut grad_bary = [[0.0; 2]; 3];
        for k in 0..3 {
            let (a, b) = (v[(k + 1) % 3], v[(k + 2) % 3]);
            grad_bary[k] = [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv];
        }
        Element {
            vertices: v,
            area,
            grad_bary,
        }
    }

    pub fn point(&self, bary: [f64; 3]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for k in 0..3 {
            p[0] += bary[k] * self.vertices[k][0];
            p[1] += bary[k] * self.vertices[k][1];
        }
        p
    }

    /// Values of the four scalar basis functions (three hats, bubble).
    pub fn basis(&self, l: [f64; 3]) -> [f64; 4] {
        [l[0], l[1], l[2], 27.0 * l[0] * l[1] * l[2]]
    }

    /// Gradients of the four scalar basis functions.
    pub fn basis_grad(&self, l: [f64; 3]) -> [[f64; 2]; 4] {
        let g = self.grad_bary;
        let mut gb = [0.0; 2];
        for d in 0..2 {
            gb[d] = 27.0 * (l[1] * l[2] * g[0][d] + l[0] * l[2] * g[1][d] + l[0] * l[1] * g[2][d]);
        }
        [g[0], g[1], g[2], gb]
    }
}

/// Value and gradient (`grad[i][j] = d u_i / d x_j`) of a velocity field at
/// barycentric point `l` of triangle `t`.
pub fn eval_velocity(
    mesh: &Mesh,
    el: &Element,
    u: &VelocityField,
    t: usize,
    l: [f64; 3],
) -> ([f64; 2], [[f64; 2]; 2]) {
    let layout = u.layout();
    let dofs = layout.scalar_element_dofs(mesh, t);
    let phi = el.basis(l);
    let dphi = el.basis_grad(l);
    let mut val = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for c in 0..2 {
        let off = c * layout.per_component();
        for k in 0..4 {
            let coef = u.coefficients()[off + dofs[k]];
            val[c] += coef * phi[k];
            grad[c][0] += coef * dphi[k][0];
            grad[c][1] += coef * dphi[k][1];
        }
    }
    (val, grad)
}

pub fn eval_pressure(mesh: &Mesh, p: &PressureField, t: usize, l: [f64; 3]) -> f64 {
    let tri = mesh.triangles()[t];
    (0..3).map(|k| l[k] * p.coefficients()[tri[k]]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_examples() {
        let mesh = Mesh::channel(5.0, 1.0, 10, 4).unwrap();
        let zero = interpolate(&mesh, |_| [0.0, 0.0]);
        assert!(zero.coefficients().iter().all(|&v| v == 0.0));

        let u = interpolate(&mesh, |p| [10.0 * p[1] * (1.0 - p[1]), 0.0]);
        let node = mesh
            .nodes()
            .iter()
            .position(|p| p[0] == 2.5 && p[1] == 0.5)
            .unwrap();
        assert_eq!(u.nodal(node), [2.5, 0.0]);

        let ones = interpolate(&mesh, |_| [1.0, 1.0]);
        let layout = ones.layout();
        for i in 0..mesh.num_nodes() {
            assert_eq!(ones.nodal(i), [1.0, 1.0]);
        }
        for t in 0..mesh.num_triangles() {
            assert_eq!(ones.bubble(t), [0.0, 0.0]);
        }
        assert_eq!(ones.coefficients().len(), layout.velocity_dofs());
        assert_eq!(layout.velocity_dofs(), 2 * (55 + 80));
    }

    #[test]
    fn bubble_vanishes_on_edges_and_peaks_at_centroid() {
        let mesh = Mesh::channel(5.0, 1.0, 1, 1).unwrap();
        let el = Element::new(&mesh, 0);
        assert_eq!(el.basis([0.0, 0.3, 0.7])[3], 0.0);
        let c = el.basis([1.0 / 3.0; 3])[3];
        assert!((c - 1.0).abs() < 1e-15);
        let g = el.basis_grad([1.0 / 3.0; 3])[3];
        assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14);
    }

    #[test]
    fn linear_fields_are_reproduced_with_exact_gradients() {
        let mesh = Mesh::channel(5.0, 1.0, 4, 2).unwrap();
        let u = interpolate(&mesh, |p| [2.0 * p[0] - p[1], 3.0 * p[1] + 1.0]);
        for t in 0..mesh.num_triangles() {
            let el = Element::new(&mesh, t);
            let l = [0.2, 0.3, 0.5];
            let x = el.point(l);
            let (v, g) = eval_velocity(&mesh, &el, &u, t, l);
            assert!((v[0] - (2.0 * x[0] - x[1])).abs() < 1e-13);
            assert!((v[1] - (3.0 * x[1] + 1.0)).abs() < 1e-13);
            assert!((g[0][0] - 2.0).abs() < 1e-13 && (g[0][1] + 1.0).abs() < 1e-13);
            assert!(g[1][0].abs() < 1e-13 && (g[1][1] - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn shape_checks() {
        let mesh = Mesh::channel(5.0, 1.0, 2, 2).unwrap();
        assert!(VelocityField::from_coefficients(&mesh, vec![0.0; 3]).is_err());
        assert!(PressureField::from_coefficients(&mesh, vec![0.0; 9]).is_ok());
        assert!(BoundaryField::new(&mesh, BoundaryTag::Inflow, vec![0.0; 2]).is_ok());
        assert!(BoundaryField::new(&mesh, BoundaryTag::Inflow, vec![0.0; 4]).is_err());
        assert!(BoundaryField::new(&mesh, BoundaryTag::Wall, vec![]).is_err());
    }
}
