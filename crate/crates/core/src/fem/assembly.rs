//! Assembly of the discrete operators of the linearized flow model.
//!
//! Row index = test function, column index = trial function throughout, so
//! `C[i][j] = c(w; phi_j, phi_i)` and `B[q][i] = -(div phi_i, psi_q)`.

use super::space::{eval_velocity, DofLayout, Element, VelocityField};
use crate::error::Result;
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::{edge_gauss3, triangle_degree6};

type Local4 = [[f64; 4]; 4];

fn scatter_scalar_block(t: &mut TripletBuilder, layout: DofLayout, dofs: &[usize; 4], local: &Local4) {
    let n = layout.per_component();
    for c in 0..2 {
        for a in 0..4 {
            for b in 0..4 {
                t.push(c * n + dofs[a], c * n + dofs[b], local[a][b]);
            }
        }
    }
}

/// Vector Laplacian `K_ij = (grad phi_i, grad phi_j)`, block diagonal over
/// the two components.
pub fn assemble_stiffness(mesh: &Mesh) -> CsrMatrix {
    let layout = DofLayout::new(mesh);
    let rule = triangle_degree6();
    let mut t = TripletBuilder::with_capacity(layout.velocity_dofs(), layout.velocity_dofs(), 32 * mesh.num_triangles());
    for tri in 0..mesh.num_triangles() {
        let el = Element::new(mesh, tri);
        let mut local = [[0.0; 4]; 4];
        for q in &rule {
            let w = q.weight * el.area;
            let g = el.basis_grad(q.bary);
            for a in 0..4 {
                for b in 0..4 {
                    local[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
        scatter_scalar_block(&mut t, layout, &layout.scalar_element_dofs(mesh, tri), &local);
    }
    t.build()
}

/// Velocity mass matrix `M` (Mini basis) and pressure mass matrix `Mp` (P1).
pub fn assemble_mass(mesh: &Mesh) -> (CsrMatrix, CsrMatrix) {
    let layout = DofLayout::new(mesh);
    let rule = triangle_degree6();
    let nt = mesh.num_triangles();
    let mut tm = TripletBuilder::with_capacity(layout.velocity_dofs(), layout.velocity_dofs(), 32 * nt);
    let mut tp = TripletBuilder::with_capacity(layout.pressure_dofs(), layout.pressure_dofs(), 9 * nt);
    for tri in 0..nt {
        let el = Element::new(mesh, tri);
        let mut local = [[0.0; 4]; 4];
        let mut local_p = [[0.0; 3]; 3];
        for q in &rule {
            let w = q.weight * el.area;
            let phi = el.basis(q.bary);
            for a in 0..4 {
                for b in 0..4 {
                    local[a][b] += w * phi[a] * phi[b];
                }
            }
            for a in 0..3 {
                for b in 0..3 {
                    local_p[a][b] += w * q.bary[a] * q.bary[b];
                }
            }
        }
        scatter_scalar_block(&mut tm, layout, &layout.scalar_element_dofs(mesh, tri), &local);
        let v = mesh.triangles()[tri];
        for a in 0..3 {
            for b in 0..3 {
                tp.push(v[a], v[b], local_p[a][b]);
            }
        }
    }
    (tm.build(), tp.build())
}

/// Skew-symmetric convection matrix for the convecting field `w`:
/// `C = (C1 - C1^T) / 2` with `C1_ij = (w . grad phi_j, phi_i)`, so that
/// `v^T C v = 0` holds exactly in floating point.
pub fn assemble_convection(mesh: &Mesh, w: &VelocityField) -> Result<CsrMatrix> {
    w.conforms_to(mesh)?;
    let layout = DofLayout::new(mesh);
    let rule = triangle_degree6();
    let mut t = TripletBuilder::with_capacity(layout.velocity_dofs(), layout.velocity_dofs(), 32 * mesh.num_triangles());
    for tri in 0..mesh.num_triangles() {
        let el = Element::new(mesh, tri);
        let mut local = [[0.0; 4]; 4];
        for q in &rule {
            let wq = q.weight * el.area;
            let (wv, _) = eval_velocity(mesh, &el, w, tri, q.bary);
            let phi = el.basis(q.bary);
            let g = el.basis_grad(q.bary);
            for b in 0..4 {
                let adv = wv[0] * g[b][0] + wv[1] * g[b][1];
                for a in 0..4 {
                    local[a][b] += wq * adv * phi[a];
                }
            }
        }
        let mut skew = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                skew[a][b] = 0.5 * (local[a][b] - local[b][a]);
            }
        }
        scatter_scalar_block(&mut t, layout, &layout.scalar_element_dofs(mesh, tri), &skew);
    }
    Ok(t.build())
}

/// Discrete divergence `B_qi = -(div phi_i, psi_q)`; pressure rows, velocity
/// columns.
pub fn assemble_divergence(mesh: &Mesh) -> CsrMatrix {
    let layout = DofLayout::new(mesh);
    let rule = triangle_degree6();
    let n = layout.per_component();
    let mut t = TripletBuilder::with_capacity(layout.pressure_dofs(), layout.velocity_dofs(), 24 * mesh.num_triangles());
    for tri in 0..mesh.num_triangles() {
        let el = Element::new(mesh, tri);
        let dofs = layout.scalar_element_dofs(mesh, tri);
        let v = mesh.triangles()[tri];
        let mut local = [[[0.0; 4]; 2]; 3];
        for q in &rule {
            let w = q.weight * el.area;
            let g = el.basis_grad(q.bary);
            for p in 0..3 {
                for c in 0..2 {
                    for a in 0..4 {
                        local[p][c][a] -= w * g[a][c] * q.bary[p];
                    }
                }
            }
        }
        for p in 0..3 {
            for c in 0..2 {
                for a in 0..4 {
                    t.push(v[p], c * n + dofs[a], local[p][c][a]);
                }
            }
        }
    }
    t.build()
}

/// Boundary operators of the penalized Dirichlet and Neumann conditions.
#[derive(Clone, Debug)]
pub struct BoundaryOperators {
    /// Velocity trace mass on inflow, wall and corners.
    pub r: CsrMatrix,
    /// Extension by zero: inflow boundary dofs -> velocity dofs.
    pub e: CsrMatrix,
    /// Outflow boundary mass: outflow boundary dofs -> velocity dofs.
    pub n: CsrMatrix,
    /// Inflow H^1_0 Gramian (mass + tangential stiffness).
    pub g: CsrMatrix,
    /// Outflow L^2 Gramian.
    pub h: CsrMatrix,
    pub inflow_nodes: Vec<usize>,
    pub outflow_nodes: Vec<usize>,
}

/// Assembles `R`, `E`, `N`, `G`, `H` with 1D P1 line elements and 3-point
/// Gauss quadrature on each boundary edge.
pub fn assemble_boundary(mesh: &Mesh) -> BoundaryOperators {
    let layout = DofLayout::new(mesh);
    let nv = layout.velocity_dofs();
    let inflow_nodes = mesh.boundary_nodes(BoundaryTag::Inflow);
    let outflow_nodes = mesh.boundary_nodes(BoundaryTag::Outflow);
    let position = |list: &[usize]| {
        let mut pos = vec![usize::MAX; mesh.num_nodes()];
        for (k, &i) in list.iter().enumerate() {
            pos[i] = k;
        }
        pos
    };
    let in_pos = position(&inflow_nodes);
    let out_pos = position(&outflow_nodes);
    let (nin, nout) = (2 * inflow_nodes.len(), 2 * outflow_nodes.len());

    let mut r = TripletBuilder::new(nv, nv);
    let mut nmat = TripletBuilder::new(nv, nout);
    let mut g = TripletBuilder::new(nin, nin);
    let mut h = TripletBuilder::new(nout, nout);
    let gauss = edge_gauss3();

    for edge in mesh.boundary_edges() {
        let [a, b] = edge.nodes;
        let (pa, pb) = (mesh.nodes()[a], mesh.nodes()[b]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let mut mass = [[0.0; 2]; 2];
        for &(s, w) in &gauss {
            let phi = [1.0 - s, s];
            for i in 0..2 {
                for j in 0..2 {
                    mass[i][j] += w * len * phi[i] * phi[j];
                }
            }
        }
        let stiff = [[1.0 / len, -1.0 / len], [-1.0 / len, 1.0 / len]];
        let ends = [a, b];
        match edge.tag {
            BoundaryTag::Inflow | BoundaryTag::Wall => {
                for c in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            r.push(layout.node_dof(c, ends[i]), layout.node_dof(c, ends[j]), mass[i][j]);
                        }
                    }
                }
                if edge.tag == BoundaryTag::Inflow {
                    // Corner endpoints are dropped: H^1_0 on the inflow.
                    for i in 0..2 {
                        for j in 0..2 {
                            let (ki, kj) = (in_pos[ends[i]], in_pos[ends[j]]);
                            if ki != usize::MAX && kj != usize::MAX {
                                for c in 0..2 {
                                    g.push(2 * ki + c, 2 * kj + c, mass[i][j] + stiff[i][j]);
                                }
                            }
                        }
                    }
                }
            }
            BoundaryTag::Outflow => {
                for i in 0..2 {
                    for j in 0..2 {
                        let kj = out_pos[ends[j]];
                        if kj == usize::MAX {
                            continue;
                        }
                        for c in 0..2 {
                            nmat.push(layout.node_dof(c, ends[i]), 2 * kj + c, mass[i][j]);
                        }
                        let ki = out_pos[ends[i]];
                        if ki != usize::MAX {
                            for c in 0..2 {
                                h.push(2 * ki + c, 2 * kj + c, mass[i][j]);
                            }
                        }
                    }
                }
            }
            BoundaryTag::Interior | BoundaryTag::WallCorner => unreachable!("edge tags are boundary parts"),
        }
    }

    let mut e = TripletBuilder::new(nv, nin);
    for (k, &i) in inflow_nodes.iter().enumerate() {
        for c in 0..2 {
            e.push(layout.node_dof(c, i), 2 * k + c, 1.0);
        }
    }

    BoundaryOperators {
        r: r.build(),
        e: e.build(),
        n: nmat.build(),
        g: g.build(),
        h: h.build(),
        inflow_nodes,
        outflow_nodes,
    }
}

/// Every matrix of the discrete state, filter and optimality systems for
/// one mesh and one convecting field.
#[derive(Clone, Debug)]
pub struct SystemMatrices {
    pub layout: DofLayout,
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    pub mp: CsrMatrix,
    pub c: CsrMatrix,
    pub b: CsrMatrix,
    pub boundary: BoundaryOperators,
}

impl SystemMatrices {
    /// Assembles all operators, with `C` built from the convecting field.
    pub fn assemble(mesh: &Mesh, convecting: &VelocityField) -> Result<Self> {
        let c = assemble_convection(mesh, convecting)?;
        let (m, mp) = assemble_mass(mesh);
        Ok(SystemMatrices {
            layout: DofLayout::new(mesh),
            k: assemble_stiffness(mesh),
            m,
            mp,
            c,
            b: assemble_divergence(mesh),
            boundary: assemble_boundary(mesh),
        })
    }

    pub fn velocity_dofs(&self) -> usize {
        self.layout.velocity_dofs()
    }

    pub fn pressure_dofs(&self) -> usize {
        self.layout.pressure_dofs()
    }

    pub fn inflow_dofs(&self) -> usize {
        self.boundary.e.ncols()
    }

    pub fn outflow_dofs(&self) -> usize {
        self.boundary.n.ncols()
    }
}
