//! Structured triangulations of the channel `(0, L) x (0, H)` with tagged
//! boundary parts, plus the line-oriented `mesh v1` text format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Which part of the domain a node or boundary edge belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    Inflow,
    Outflow,
    Wall,
    /// The four channel corners; they carry homogeneous Dirichlet data.
    WallCorner,
}

impl BoundaryTag {
    pub fn code(self) -> &'static str {
        match self {
            BoundaryTag::Interior => "I",
            BoundaryTag::Inflow => "IN",
            BoundaryTag::Outflow => "OUT",
            BoundaryTag::Wall => "W",
            BoundaryTag::WallCorner => "WC",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Some(match code {
            "I" => BoundaryTag::Interior,
            "IN" => BoundaryTag::Inflow,
            "OUT" => BoundaryTag::Outflow,
            "W" => BoundaryTag::Wall,
            "WC" => BoundaryTag::WallCorner,
            _ => return None,
        })
    }

    /// Velocity is prescribed (by penalty) on this part.
    pub fn is_dirichlet(self) -> bool {
        matches!(
            self,
            BoundaryTag::Inflow | BoundaryTag::Wall | BoundaryTag::WallCorner
        )
    }
}

/// A boundary edge `(a, b)` and the boundary part it lies on
/// (`Inflow`, `Outflow` or `Wall`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Immutable triangulation of the rectangular channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    length: f64,
    height: f64,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    node_tags: Vec<BoundaryTag>,
    boundary_edges: Vec<BoundaryEdge>,
}

impl Mesh {
    /// Uniform `nx x ny` grid over `(0, length) x (0, height)`, every cell
    /// split along its lower-left to upper-right diagonal.
    pub fn channel(length: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "length must be positive, got {length}"
            )));
        }
        if !(height.is_finite() && height > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "height must be positive, got {height}"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "nx and ny must be positive, got nx={nx}, ny={ny}"
            )));
        }

        let idx = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            // Exact endpoints; interior coordinates from the same formula on
            // every run so files are byte-identical.
            let y = if j == ny {
                height
            } else {
                height * j as f64 / ny as f64
            };
            for i in 0..=nx {
                let x = if i == nx {
                    length
                } else {
                    length * i as f64 / nx as f64
                };
                nodes.push([x, y]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (n00, n10, n01, n11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            }
        }

        let mut node_tags = vec![BoundaryTag::Interior; nodes.len()];
        for j in 0..=ny {
            for i in 0..=nx {
                let on_wall = j == 0 || j == ny;
                let on_in = i == 0;
                let on_out = i == nx;
                node_tags[idx(i, j)] = match (on_wall, on_in || on_out) {
                    (true, true) => BoundaryTag::WallCorner,
                    (true, false) => BoundaryTag::Wall,
                    (false, true) if on_in => BoundaryTag::Inflow,
                    (false, true) => BoundaryTag::Outflow,
                    (false, false) => BoundaryTag::Interior,
                };
            }
        }

        let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary_edges.push(BoundaryEdge {
                nodes: [idx(i, 0), idx(i + 1, 0)],
                tag: BoundaryTag::Wall,
            });
        }
        for j in 0..ny {
            boundary_edges.push(BoundaryEdge {
                nodes: [idx(nx, j), idx(nx, j + 1)],
                tag: BoundaryTag::Outflow,
            });
        }
        for i in (0..nx).rev() {
            boundary_edges.push(BoundaryEdge {
                nodes: [idx(i + 1, ny), idx(i, ny)],
                tag: BoundaryTag::Wall,
            });
        }
        for j in (0..ny).rev() {
            boundary_edges.push(BoundaryEdge {
                nodes: [idx(0, j + 1), idx(0, j)],
                tag: BoundaryTag::Inflow,
            });
        }

        Ok(Mesh {
            length,
            height,
            nodes,
            triangles,
            node_tags,
            boundary_edges,
        })
    }

    /// Builds a mesh from raw parts (e.g. a parsed file). Boundary edges are
    /// recovered from the topology and tagged by position.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        node_tags: Vec<BoundaryTag>,
    ) -> Result<Mesh> {
        if nodes.len() != node_tags.len() {
            return Err(Error::InvalidArgument(format!(
                "{} nodes but {} tags",
                nodes.len(),
                node_tags.len()
            )));
        }
        if nodes.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidArgument("empty mesh".into()));
        }
        if nodes.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidArgument("non-finite node coordinate".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nodes.len()) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} references a missing node"
                )));
            }
            if signed_area(&nodes, tri) <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} is not counterclockwise"
                )));
            }
        }
        let length = nodes.iter().map(|p| p[0]).fold(f64::MIN, f64::max);
        let height = nodes.iter().map(|p| p[1]).fold(f64::MIN, f64::max);

        let mut edge_count: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = edge_count.entry((a.min(b), a.max(b))).or_insert((0, [a, b]));
                e.0 += 1;
            }
        }
        let tol = 1e-12 * length.max(height);
        let mut boundary_edges: Vec<BoundaryEdge> = edge_count
            .into_values()
            .filter(|(count, _)| *count == 1)
            .map(|(_, [a, b])| {
                let mid = [
                    0.5 * (nodes[a][0] + nodes[b][0]),
                    0.5 * (nodes[a][1] + nodes[b][1]),
                ];
                let tag = if mid[0].abs() <= tol {
                    BoundaryTag::Inflow
                } else if (mid[0] - length).abs() <= tol {
                    BoundaryTag::Outflow
                } else {
                    BoundaryTag::Wall
                };
                BoundaryEdge { nodes: [a, b], tag }
            })
            .collect();
        boundary_edges.sort_by_key(|e| (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1])));

        Ok(Mesh {
            length,
            height,
            nodes,
            triangles,
            node_tags,
            boundary_edges,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn node_tags(&self) -> &[BoundaryTag] {
        &self.node_tags
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.nodes, &self.triangles[t])
    }

    pub fn vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Node indices carrying `tag`, ordered along the boundary part: by `y`
    /// on inflow/outflow, by `x` on the walls (then by `y`).
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.node_tags[i] == tag)
            .collect();
        let key = |i: usize| match tag {
            BoundaryTag::Inflow | BoundaryTag::Outflow => (self.nodes[i][1], self.nodes[i][0]),
            _ => (self.nodes[i][0], self.nodes[i][1]),
        };
        out.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap().then(a.cmp(&b)));
        out
    }

    /// Serializes to the `mesh v1` text format.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(48 * (self.nodes.len() + self.triangles.len()));
        s.push_str("mesh v1\n");
        let _ = writeln!(s, "{} {}", self.nodes.len(), self.triangles.len());
        for (p, tag) in self.nodes.iter().zip(&self.node_tags) {
            let _ = writeln!(s, "{:.17e} {:.17e} {}", p[0], p[1], tag.code());
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    /// Parses the `mesh v1` text format. `origin` is only used in messages.
    pub fn from_text(text: &str, origin: &Path) -> Result<Mesh> {
        let perr = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "mesh v1")) => {}
            Some((n, other)) => return Err(perr(n, format!("expected `mesh v1`, found `{other}`"))),
            None => return Err(perr(1, "empty file".into())),
        }
        let (n, counts) = lines.next().ok_or_else(|| perr(2, "missing counts".into()))?;
        let counts: Vec<usize> = counts
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(n, format!("bad counts: {e}")))?;
        let [num_nodes, num_triangles] = counts[..] else {
            return Err(perr(n, "expected `<num_nodes> <num_triangles>`".into()));
        };

        let mut nodes = Vec::with_capacity(num_nodes);
        let mut tags = Vec::with_capacity(num_nodes);
        for _ in 0..num_nodes {
            let (n, line) = lines.next().ok_or_else(|| perr(0, "truncated node block".into()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [x, y, tag] = fields[..] else {
                return Err(perr(n, "expected `x y tag`".into()));
            };
            let x: f64 = x.parse().map_err(|e| perr(n, format!("bad x: {e}")))?;
            let y: f64 = y.parse().map_err(|e| perr(n, format!("bad y: {e}")))?;
            let tag = BoundaryTag::from_code(tag).ok_or_else(|| perr(n, format!("unknown tag `{tag}`")))?;
            nodes.push([x, y]);
            tags.push(tag);
        }
        let mut triangles = Vec::with_capacity(num_triangles);
        for _ in 0..num_triangles {
            let (n, line) = lines
                .next()
                .ok_or_else(|| perr(0, "truncated triangle block".into()))?;
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| perr(n, format!("bad triangle: {e}")))?;
            let [i, j, k] = idx[..] else {
                return Err(perr(n, "expected `i j k`".into()));
            };
            triangles.push([i, j, k]);
        }
        Mesh::from_parts(nodes, triangles, tags)
    }

    pub fn read(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path)?;
        Mesh::from_text(&text, path)
    }
}

fn signed_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fine_channel_counts() {
        let m = Mesh::channel(5.0, 1.0, 112, 80).unwrap();
        assert_eq!(m.num_nodes(), 9153);
        assert_eq!(m.num_triangles(), 17920);
    }

    #[test]
    fn smallest_grid() {
        let m = Mesh::channel(5.0, 1.0, 1, 1).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.num_triangles(), 2);
        let area: f64 = (0..2).map(|t| m.triangle_area(t)).sum();
        assert_eq!(area, 5.0);
        assert!(m.boundary_nodes(BoundaryTag::Inflow).is_empty());
        assert_eq!(m.boundary_nodes(BoundaryTag::WallCorner).len(), 4);
    }

    #[test]
    fn coordinate_tags() {
        let m = Mesh::channel(5.0, 1.0, 10, 4).unwrap();
        assert_eq!(m.num_nodes(), 55);
        assert_eq!(m.num_triangles(), 80);
        let find = |x: f64, y: f64| {
            m.nodes()
                .iter()
                .position(|p| (p[0] - x).abs() < 1e-14 && (p[1] - y).abs() < 1e-14)
                .unwrap()
        };
        assert_eq!(m.node_tags()[find(0.0, 0.25)], BoundaryTag::Inflow);
        assert_eq!(m.node_tags()[find(2.5, 0.0)], BoundaryTag::Wall);
        assert_eq!(m.node_tags()[find(0.0, 0.0)], BoundaryTag::WallCorner);
        assert_eq!(m.node_tags()[find(5.0, 0.5)], BoundaryTag::Outflow);
    }

    #[test]
    fn boundary_node_lists() {
        let m = Mesh::channel(5.0, 1.0, 10, 4).unwrap();
        let inflow = m.boundary_nodes(BoundaryTag::Inflow);
        let ys: Vec<f64> = inflow.iter().map(|&i| m.nodes()[i][1]).collect();
        assert_eq!(ys, vec![0.25, 0.5, 0.75]);
        assert!(inflow.iter().all(|&i| m.nodes()[i][0] == 0.0));

        // Enumerate grid nodes with y in {0, H} that are not corners.
        let expected_wall = m
            .nodes()
            .iter()
            .filter(|p| (p[1] == 0.0 || p[1] == 1.0) && p[0] != 0.0 && p[0] != 5.0)
            .count();
        let wall = m.boundary_nodes(BoundaryTag::Wall);
        assert_eq!(wall.len(), expected_wall);
        assert_eq!(wall.len(), 18);
        let xs: Vec<f64> = wall.iter().map(|&i| m.nodes()[i][0]).collect();
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn invariants_on_generated_meshes() {
        for &(nx, ny) in &[(1, 1), (4, 2), (10, 4), (7, 3), (40, 8)] {
            let m = Mesh::channel(5.0, 1.0, nx, ny).unwrap();
            let mut area = 0.0;
            for t in 0..m.num_triangles() {
                let a = m.triangle_area(t);
                assert!(a > 0.0);
                area += a;
            }
            assert!((area - 5.0).abs() <= 1e-12 * 5.0);

            // Each boundary edge belongs to exactly one triangle.
            for e in m.boundary_edges() {
                let owners = m
                    .triangles()
                    .iter()
                    .filter(|t| t.contains(&e.nodes[0]) && t.contains(&e.nodes[1]))
                    .count();
                assert_eq!(owners, 1);
            }
            assert_eq!(m.boundary_edges().len(), 2 * (nx + ny));

            for (p, tag) in m.nodes().iter().zip(m.node_tags()) {
                match tag {
                    BoundaryTag::Inflow => assert!(p[0] == 0.0 && p[1] > 0.0 && p[1] < 1.0),
                    BoundaryTag::Outflow => assert!(p[0] == 5.0 && p[1] > 0.0 && p[1] < 1.0),
                    BoundaryTag::Wall => assert!(p[1] == 0.0 || p[1] == 1.0),
                    BoundaryTag::WallCorner => {
                        assert!((p[0] == 0.0 || p[0] == 5.0) && (p[1] == 0.0 || p[1] == 1.0))
                    }
                    BoundaryTag::Interior => {
                        assert!(p[0] > 0.0 && p[0] < 5.0 && p[1] > 0.0 && p[1] < 1.0)
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(Mesh::channel(0.0, 1.0, 2, 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(Mesh::channel(5.0, -1.0, 2, 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(Mesh::channel(5.0, 1.0, 0, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn text_round_trip() {
        let m = Mesh::channel(5.0, 1.0, 10, 4).unwrap();
        let text = m.to_text();
        assert!(text.starts_with("mesh v1\n55 80\n"));
        let back = Mesh::from_text(&text, Path::new("mem")).unwrap();
        assert_eq!(back.nodes(), m.nodes());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.node_tags(), m.node_tags());
        assert_eq!(back.boundary_edges().len(), m.boundary_edges().len());
        for tag in [BoundaryTag::Inflow, BoundaryTag::Outflow, BoundaryTag::Wall] {
            let count = |mesh: &Mesh| mesh.boundary_edges().iter().filter(|e| e.tag == tag).count();
            assert_eq!(count(&back), count(&m));
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Mesh::from_text("mesh v1\n1 1\n0 0 Q\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = Mesh::from_text("mesh v2\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
