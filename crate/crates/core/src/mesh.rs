//! Uniform structured triangulations of axis-aligned rectangles.
//!
//! Vertices lie on an equidistant Cartesian grid in row-major order
//! (index `iy * (nx + 1) + ix`). Every grid cell is split into two
//! counterclockwise triangles by the diagonal from its lower-left to its
//! upper-right corner; this convention is fixed so that runs are
//! reproducible bit for bit.

use crate::error::{Error, Result};

/// A point in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Closed axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Rect {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn unit_square() -> Self {
        Rect::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    fn validate(&self) -> Result<()> {
        if !(self.xmax > self.xmin && self.ymax > self.ymin) {
            return Err(Error::InvalidInput(format!(
                "rectangle must have positive extent, got [{}, {}] x [{}, {}]",
                self.xmin, self.xmax, self.ymin, self.ymax
            )));
        }
        Ok(())
    }
}

/// Per-element P1 data: area and the constant gradient of each of the three
/// barycentric basis functions (ordered like the triangle's vertices).
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

/// Uniform structured triangular mesh on a rectangle.
#[derive(Debug)]
pub struct Mesh {
    domain: Rect,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.nx == other.nx && self.ny == other.ny
    }
}

impl Mesh {
    /// Build the uniform mesh with `nx * ny` cells (two triangles each).
    pub fn uniform(domain: Rect, nx: usize, ny: usize) -> Result<Mesh> {
        domain.validate()?;
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput(format!(
                "cell counts must be positive, got nx={nx}, ny={ny}"
            )));
        }
        let hx = domain.width() / nx as f64;
        let hy = domain.height() / ny as f64;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
        for iy in 0..=ny {
            // exact endpoints so boundary detection needs no tolerance
            let y = if iy == ny {
                domain.ymax
            } else {
                domain.ymin + iy as f64 * hy
            };
            for ix in 0..=nx {
                let x = if ix == nx {
                    domain.xmax
                } else {
                    domain.xmin + ix as f64 * hx
                };
                vertices.push(Point::new(x, y));
                boundary.push(ix == 0 || ix == nx || iy == 0 || iy == ny);
            }
        }

        let idx = |ix: usize, iy: usize| iy * (nx + 1) + ix;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for cy in 0..ny {
            for cx in 0..nx {
                let v00 = idx(cx, cy);
                let v10 = idx(cx + 1, cy);
                let v11 = idx(cx + 1, cy + 1);
                let v01 = idx(cx, cy + 1);
                // lower-left -> upper-right diagonal, both triangles CCW
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        Ok(Mesh {
            domain,
            nx,
            ny,
            hx,
            hy,
            vertices,
            triangles,
            boundary,
        })
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Mesh-size parameter: the larger cell edge.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Grid index of the vertex at column `ix`, row `iy`.
    pub fn vertex_index(&self, ix: usize, iy: usize) -> usize {
        iy * (self.nx + 1) + ix
    }

    /// Inverse of [`vertex_index`](Self::vertex_index).
    pub fn vertex_grid_coords(&self, i: usize) -> (usize, usize) {
        (i % (self.nx + 1), i / (self.nx + 1))
    }

    /// Area and barycentric basis gradients of element `t`.
    pub fn element_geometry(&self, t: usize) -> Result<ElementGeometry> {
        let tri = *self.triangles.get(t).ok_or_else(|| {
            Error::InvalidInput(format!(
                "triangle index {t} out of range (mesh has {})",
                self.triangles.len()
            ))
        })?;
        let [a, b, c] = tri;
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        let pc = self.vertices[c];
        let det = (pb.x - pa.x) * (pc.y - pa.y) - (pc.x - pa.x) * (pb.y - pa.y);
        let area = 0.5 * det;
        debug_assert!(area > 0.0, "triangles are CCW by construction");
        let inv = 1.0 / det;
        // grad of barycentric coordinate i is the inward normal of the
        // opposite edge scaled by 1/det
        let grads = [
            [(pb.y - pc.y) * inv, (pc.x - pb.x) * inv],
            [(pc.y - pa.y) * inv, (pa.x - pc.x) * inv],
            [(pa.y - pb.y) * inv, (pb.x - pa.x) * inv],
        ];
        Ok(ElementGeometry { area, grads })
    }

    /// Indices of the interior (non-boundary) vertices, ascending.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices())
            .filter(|&i| !self.boundary[i])
            .collect()
    }

    /// Indices of the boundary vertices, ascending.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices())
            .filter(|&i| self.boundary[i])
            .collect()
    }

    /// Map a barycentric point of element `t` to physical coordinates.
    pub fn map_barycentric(&self, t: usize, bary: [f64; 3]) -> Point {
        let [a, b, c] = self.triangles[t];
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        let pc = self.vertices[c];
        Point::new(
            bary[0] * pa.x + bary[1] * pb.x + bary[2] * pc.x,
            bary[0] * pa.y + bary[1] * pb.y + bary[2] * pc.y,
        )
    }
}
