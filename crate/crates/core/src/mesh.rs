//! One-dimensional interval meshes.
//!
//! Elements are indexed from 0, so element `i` is the open interval
//! `(x_i, x_{i+1})`. Vertices double as the skeleton: interior vertices are
//! the interfaces between neighbouring elements, the two end points form the
//! boundary.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Interior,
    Boundary,
}

/// A vertex seen as a face of the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkeletonNode {
    pub index: usize,
    pub kind: NodeKind,
    /// Element to the left of the node, if any. Its outward normal is +1.
    pub left: Option<usize>,
    /// Element to the right of the node, if any. Its outward normal is -1.
    pub right: Option<usize>,
    pub h_e: f64,
}

impl SkeletonNode {
    /// Outward normal of the domain at a boundary node; 0 for interior nodes.
    pub fn boundary_normal(&self) -> f64 {
        match (self.left, self.right) {
            (None, Some(_)) => -1.0,
            (Some(_), None) => 1.0,
            _ => 0.0,
        }
    }
}

/// Result of [`Mesh1D::locate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Location {
    pub element: usize,
    pub nearest_vertex: usize,
    pub vertex_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct MeshData {
    vertices: Vec<f64>,
    element_sizes: Vec<f64>,
    node_sizes: Vec<f64>,
}

/// Immutable interval mesh. Cloning is cheap (shared storage).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    data: Arc<MeshData>,
}

impl Mesh1D {
    /// Builds a mesh from strictly increasing vertex coordinates.
    pub fn from_vertices(vertices: Vec<f64>) -> Result<Self> {
        if vertices.len() < 2 {
            return invalid("a mesh needs at least two vertices");
        }
        if vertices.iter().any(|x| !x.is_finite()) {
            return invalid("mesh vertices must be finite");
        }
        if vertices.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("mesh vertices must be strictly increasing");
        }
        let element_sizes: Vec<f64> = vertices.windows(2).map(|w| w[1] - w[0]).collect();
        let n = element_sizes.len();
        let node_sizes = (0..=n)
            .map(|i| match i {
                0 => element_sizes[0],
                i if i == n => element_sizes[n - 1],
                i => element_sizes[i - 1].max(element_sizes[i]),
            })
            .collect();
        Ok(Self {
            data: Arc::new(MeshData {
                vertices,
                element_sizes,
                node_sizes,
            }),
        })
    }

    pub fn uniform(n: usize, domain: (f64, f64)) -> Result<Self> {
        check_domain(n, domain)?;
        let (a, b) = domain;
        let h = (b - a) / n as f64;
        let mut vertices: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
        vertices[n] = b;
        Self::from_vertices(vertices)
    }

    /// Uniform mesh whose interior vertices are shifted by at most
    /// `jitter * (b - a) / n`, deterministically for a given seed.
    pub fn perturbed(n: usize, domain: (f64, f64), jitter: f64, seed: u64) -> Result<Self> {
        check_domain(n, domain)?;
        if !(0.0..0.5).contains(&jitter) {
            return invalid(format!("jitter must lie in [0, 0.5), got {jitter}"));
        }
        let (a, b) = domain;
        let h = (b - a) / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vertices: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
        vertices[n] = b;
        if jitter > 0.0 {
            for x in vertices.iter_mut().take(n).skip(1) {
                *x += rng.random_range(-jitter..=jitter) * h;
            }
        }
        Self::from_vertices(vertices)
    }

    /// Bisects every element at its midpoint.
    pub fn refine(&self) -> Self {
        let v = self.vertices();
        let mut out = Vec::with_capacity(2 * v.len() - 1);
        for w in v.windows(2) {
            out.push(w[0]);
            out.push(0.5 * (w[0] + w[1]));
        }
        out.push(v[v.len() - 1]);
        Self::from_vertices(out).expect("bisection preserves monotonicity")
    }

    pub fn vertices(&self) -> &[f64] {
        &self.data.vertices
    }

    pub fn num_elements(&self) -> usize {
        self.data.element_sizes.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.data.vertices.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        let v = self.vertices();
        (v[0], v[v.len() - 1])
    }

    pub fn length(&self) -> f64 {
        let (a, b) = self.domain();
        b - a
    }

    /// End points of element `e`.
    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.data.vertices[e], self.data.vertices[e + 1])
    }

    pub fn element_sizes(&self) -> &[f64] {
        &self.data.element_sizes
    }

    pub fn element_size(&self, e: usize) -> f64 {
        self.data.element_sizes[e]
    }

    /// Face size surrogate `h_e` at every vertex.
    pub fn node_sizes(&self) -> &[f64] {
        &self.data.node_sizes
    }

    pub fn h_max(&self) -> f64 {
        self.element_sizes().iter().cloned().fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.element_sizes()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Ratio of the largest to the smallest element size.
    pub fn quasi_uniformity(&self) -> f64 {
        self.h_max() / self.h_min()
    }

    /// Ratio of inscribed ball radius to diameter; constant for segments.
    pub fn shape_regularity(&self) -> f64 {
        0.5
    }

    /// Piecewise constant meshsize function: the largest size among the
    /// elements whose closure contains `x`.
    pub fn meshsize_at(&self, x: f64) -> Result<f64> {
        let loc = self.locate(x)?;
        if loc.vertex_distance == 0.0 {
            Ok(self.data.node_sizes[loc.nearest_vertex])
        } else {
            Ok(self.element_size(loc.element))
        }
    }

    pub fn node(&self, i: usize) -> SkeletonNode {
        let n = self.num_elements();
        let left = (i > 0).then(|| i - 1);
        let right = (i < n).then_some(i);
        let kind = if i == 0 || i == n {
            NodeKind::Boundary
        } else {
            NodeKind::Interior
        };
        SkeletonNode {
            index: i,
            kind,
            left,
            right,
            h_e: self.data.node_sizes[i],
        }
    }

    /// All vertices as faces, boundary nodes included.
    pub fn nodes(&self) -> impl Iterator<Item = SkeletonNode> + '_ {
        (0..self.num_vertices()).map(|i| self.node(i))
    }

    /// Interior faces only.
    pub fn skeleton(&self) -> impl Iterator<Item = SkeletonNode> + '_ {
        (1..self.num_elements()).map(|i| self.node(i))
    }

    /// Element containing `x` using half-open intervals `[x_i, x_{i+1})`,
    /// except that `x = b` belongs to the last element.
    pub fn locate(&self, x: f64) -> Result<Location> {
        let (a, b) = self.domain();
        if !(a..=b).contains(&x) {
            return invalid(format!("x = {x} outside the domain [{a}, {b}]"));
        }
        let v = self.vertices();
        let n = self.num_elements();
        // index of the first vertex strictly greater than x
        let upper = v.partition_point(|&p| p <= x);
        let element = upper.saturating_sub(1).min(n - 1);
        let (l, r) = self.element(element);
        let (nearest_vertex, vertex_distance) = if x - l <= r - x {
            (element, x - l)
        } else {
            (element + 1, r - x)
        };
        Ok(Location {
            element,
            nearest_vertex,
            vertex_distance,
        })
    }
}

fn check_domain(n: usize, (a, b): (f64, f64)) -> Result<()> {
    if n == 0 {
        return invalid("element count must be at least 1");
    }
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return invalid(format!("domain [{a}, {b}] is empty or not finite"));
    }
    Ok(())
}
