//! Piecewise-constant media and their P1 interpolants.
//!
//! A [`Medium`] is a stack of background pieces covering the domain plus an
//! ordered list of inclusions. Shapes are closed sets (membership uses `<=`)
//! and later list entries override earlier ones, which makes pointwise
//! evaluation total and deterministic even on the measure-zero interfaces.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, Rect};

/// Geometric primitive for medium pieces.
#[derive(Clone, Debug)]
pub enum Shape {
    Disc {
        center: Point,
        radius: f64,
    },
    Rectangle {
        rect: Rect,
    },
    /// Simple polygon, counterclockwise vertex order.
    Polygon {
        vertices: Vec<Point>,
    },
    /// Disc minus the open angular sector (angles in radians, counterclockwise
    /// from `angle_start` to `angle_end`).
    SectorComplement {
        center: Point,
        radius: f64,
        angle_start: f64,
        angle_end: f64,
    },
    /// Regular star with `n_points` spikes, stored as its 2n-gon.
    Star {
        center: Point,
        n_points: usize,
        r_outer: f64,
        r_inner: f64,
    },
}

impl Shape {
    pub fn disc(cx: f64, cy: f64, radius: f64) -> Self {
        Shape::Disc {
            center: Point::new(cx, cy),
            radius,
        }
    }

    pub fn rectangle(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Shape::Rectangle {
            rect: Rect::new(xmin, ymin, xmax, ymax),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Disc { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::InvalidInput("disc radius must be positive".into()));
                }
            }
            Shape::Rectangle { rect } => {
                if rect.area() <= 0.0 {
                    return Err(Error::InvalidInput(
                        "rectangle shape must have positive area".into(),
                    ));
                }
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::InvalidInput(
                        "polygon needs at least 3 vertices".into(),
                    ));
                }
                if polygon_area(vertices).abs() <= 0.0 {
                    return Err(Error::InvalidInput("polygon has zero area".into()));
                }
            }
            Shape::SectorComplement { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::InvalidInput("disc radius must be positive".into()));
                }
            }
            Shape::Star {
                n_points,
                r_outer,
                r_inner,
                ..
            } => {
                if *n_points < 3 {
                    return Err(Error::InvalidInput("star needs at least 3 points".into()));
                }
                if !(*r_inner > 0.0 && *r_outer > *r_inner) {
                    return Err(Error::InvalidInput(
                        "star radii must satisfy 0 < r_inner < r_outer".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Closed-set membership.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Disc { center, radius } => p.dist(*center) <= *radius,
            Shape::Rectangle { rect } => rect.contains(p),
            Shape::Polygon { vertices } => point_in_polygon(vertices, p),
            Shape::SectorComplement {
                center,
                radius,
                angle_start,
                angle_end,
            } => {
                if p.dist(*center) > *radius {
                    return false;
                }
                let theta = (p.y - center.y).atan2(p.x - center.x);
                // membership in the closed complement: exclude the open sector
                !angle_strictly_in(theta, *angle_start, *angle_end)
            }
            Shape::Star {
                center,
                n_points,
                r_outer,
                r_inner,
            } => {
                let poly = star_polygon(*center, *n_points, *r_outer, *r_inner);
                point_in_polygon(&poly, p)
            }
        }
    }
}

/// Vertices of the 2n-gon of a regular star, first spike pointing up.
pub fn star_polygon(center: Point, n_points: usize, r_outer: f64, r_inner: f64) -> Vec<Point> {
    let mut v = Vec::with_capacity(2 * n_points);
    for k in 0..2 * n_points {
        let angle = PI / 2.0 + k as f64 * PI / n_points as f64;
        let r = if k % 2 == 0 { r_outer } else { r_inner };
        v.push(Point::new(
            center.x + r * angle.cos(),
            center.y + r * angle.sin(),
        ));
    }
    v
}

fn polygon_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

/// Closed-set point-in-polygon: ray casting with an explicit on-edge test.
fn point_in_polygon(vertices: &[Point], p: Point) -> bool {
    let n = vertices.len();
    for i in 0..n {
        if on_segment(vertices[i], vertices[(i + 1) % n], p) {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let vi = vertices[i];
        let vj = vertices[j];
        if (vi.y > p.y) != (vj.y > p.y) {
            let x_cross = vj.x + (p.y - vj.y) / (vi.y - vj.y) * (vi.x - vj.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    let len2 = (b.x - a.x).powi(2) + (b.y - a.y).powi(2);
    if cross * cross > 1e-28 * len2 {
        return false;
    }
    let dot = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
    dot >= 0.0 && dot <= len2
}

/// True iff `theta` lies strictly inside the counterclockwise open sector
/// (`start`, `end`); all angles normalized to (-pi, pi].
fn angle_strictly_in(theta: f64, start: f64, end: f64) -> bool {
    let norm = |a: f64| {
        let mut a = a.rem_euclid(2.0 * PI);
        if a > PI {
            a -= 2.0 * PI;
        }
        a
    };
    let t = norm(theta);
    let s = norm(start);
    let e = norm(end);
    if s <= e {
        t > s && t < e
    } else {
        t > s || t < e
    }
}

/// One background layer: `region: None` means "rest of the domain".
#[derive(Clone, Debug)]
pub struct BackgroundPiece {
    pub region: Option<Shape>,
    pub value: f64,
}

/// Piecewise-constant medium `u = background + inclusions` (later entries
/// override earlier ones; an inclusion value replaces the background value).
#[derive(Clone, Debug)]
pub struct Medium {
    domain: Rect,
    background: Vec<BackgroundPiece>,
    inclusions: Vec<(Shape, f64)>,
}

impl Medium {
    /// Medium that is `rest_value` everywhere until pieces are added.
    pub fn new(domain: Rect, rest_value: f64) -> Self {
        Medium {
            domain,
            background: vec![BackgroundPiece {
                region: None,
                value: rest_value,
            }],
            inclusions: Vec::new(),
        }
    }

    pub fn with_background_piece(mut self, shape: Shape, value: f64) -> Result<Self> {
        shape.validate()?;
        self.background.push(BackgroundPiece {
            region: Some(shape),
            value,
        });
        Ok(self)
    }

    pub fn with_inclusion(mut self, shape: Shape, value: f64) -> Result<Self> {
        shape.validate()?;
        if value == 0.0 {
            return Err(Error::InvalidInput(
                "inclusion values must be nonzero".into(),
            ));
        }
        self.inclusions.push((shape, value));
        Ok(self)
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn n_inclusions(&self) -> usize {
        self.inclusions.len()
    }

    pub fn inclusions(&self) -> &[(Shape, f64)] {
        &self.inclusions
    }

    /// True if every background piece has value zero.
    pub fn background_is_zero(&self) -> bool {
        self.background.iter().all(|p| p.value == 0.0)
    }

    /// Pointwise evaluation; `p` must lie in the (closed) domain.
    pub fn evaluate(&self, p: Point) -> Result<f64> {
        if !self.domain.contains(p) {
            return Err(Error::InvalidInput(format!(
                "point ({}, {}) outside medium domain",
                p.x, p.y
            )));
        }
        Ok(self.value_unchecked(p))
    }

    /// Same as [`evaluate`](Self::evaluate) without the domain check; used on
    /// points that are inside by construction (mesh vertices, quadrature
    /// points of elements tiling the domain).
    pub fn value_unchecked(&self, p: Point) -> f64 {
        let mut value = 0.0;
        for piece in &self.background {
            match &piece.region {
                None => value = piece.value,
                Some(shape) => {
                    if shape.contains(p) {
                        value = piece.value;
                    }
                }
            }
        }
        for (shape, alpha) in &self.inclusions {
            if shape.contains(p) {
                value = *alpha;
            }
        }
        value
    }
}

/// Pixel grid with physical placement; pixel centers tile the domain and
/// row 0 is the top of the image.
#[derive(Clone, Debug)]
pub struct RasterMedium {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub domain: Rect,
}

impl RasterMedium {
    pub fn new(width: usize, height: usize, values: Vec<f64>, domain: Rect) -> Result<Self> {
        if width * height != values.len() {
            return Err(Error::InvalidInput(format!(
                "raster size {}x{} does not match {} values",
                width,
                height,
                values.len()
            )));
        }
        if domain.area() <= 0.0 {
            return Err(Error::InvalidInput(
                "raster domain must have positive area".into(),
            ));
        }
        Ok(RasterMedium {
            width,
            height,
            values,
            domain,
        })
    }

    /// Parse a binary (P5) or ASCII (P2) grayscale PGM payload.
    pub fn from_pgm(bytes: &[u8], domain: Rect) -> Result<Self> {
        let (width, height, values) = parse_pgm(bytes)?;
        RasterMedium::new(width, height, values, domain)
    }

    /// Nearest-pixel lookup (no smoothing), clamped to the grid.
    pub fn value_at(&self, p: Point) -> f64 {
        let fx = (p.x - self.domain.xmin) / self.domain.width() * self.width as f64;
        let fy = (self.domain.ymax - p.y) / self.domain.height() * self.height as f64;
        let col = (fx.floor() as isize).clamp(0, self.width as isize - 1) as usize;
        let row = (fy.floor() as isize).clamp(0, self.height as isize - 1) as usize;
        self.values[row * self.width + col]
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let err = |offset: usize, message: &str| Error::Parse {
        offset,
        message: message.to_string(),
    };

    let magic = bytes.get(0..2).ok_or_else(|| err(0, "truncated magic"))?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(err(0, "not a P2/P5 PGM payload")),
    };
    let mut pos = 2usize;

    // header tokens: width, height, maxval; '#' starts a comment to EOL
    let next_token = |pos: &mut usize| -> Result<usize> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if *pos == start {
            return Err(err(start, "expected an unsigned integer"));
        }
        let text = std::str::from_utf8(&bytes[start..*pos]).expect("digits are ascii");
        text.parse::<usize>()
            .map_err(|_| err(start, "integer out of range"))
    };

    let width = next_token(&mut pos)?;
    let height = next_token(&mut pos)?;
    let maxval = next_token(&mut pos)?;
    if width == 0 || height == 0 {
        return Err(err(2, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(err(2, "maxval must be in 1..=65535"));
    }

    let n = width * height;
    let mut values = Vec::with_capacity(n);
    if binary {
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(err(pos, "missing whitespace after maxval"));
        }
        pos += 1; // exactly one whitespace byte before raster data
        let bytes_per = if maxval < 256 { 1 } else { 2 };
        let needed = n * bytes_per;
        if bytes.len() < pos + needed {
            return Err(err(bytes.len(), "truncated P5 pixel data"));
        }
        for k in 0..n {
            let v = if bytes_per == 1 {
                bytes[pos + k] as f64
            } else {
                // big-endian per the PGM specification
                (256.0 * bytes[pos + 2 * k] as f64) + bytes[pos + 2 * k + 1] as f64
            };
            values.push(v);
        }
    } else {
        for _ in 0..n {
            let v = next_token(&mut pos)?;
            if v > maxval {
                return Err(err(pos, "pixel value exceeds maxval"));
            }
            values.push(v as f64);
        }
    }
    Ok((width, height, values))
}

/// Continuous piecewise-linear function given by one coefficient per vertex.
#[derive(Clone, Debug)]
pub struct FeFunction {
    mesh: Arc<Mesh>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(mesh: Arc<Mesh>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mesh.n_vertices() {
            return Err(Error::InvalidInput(format!(
                "coefficient count {} does not match vertex count {}",
                coeffs.len(),
                mesh.n_vertices()
            )));
        }
        Ok(FeFunction { mesh, coeffs })
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.n_vertices();
        FeFunction {
            mesh,
            coeffs: vec![c; n],
        }
    }

    /// Nodal interpolant of a piecewise-constant medium (the admissible
    /// approximation `u_delta` with `delta = h`).
    pub fn interpolate_medium(medium: &Medium, mesh: &Arc<Mesh>) -> Result<Self> {
        if medium.domain() != mesh.domain() {
            return Err(Error::DomainMismatch(
                "medium domain differs from mesh domain".into(),
            ));
        }
        let coeffs = mesh
            .vertices()
            .iter()
            .map(|&p| medium.value_unchecked(p))
            .collect();
        Ok(FeFunction {
            mesh: mesh.clone(),
            coeffs,
        })
    }

    /// Nodal interpolant of raster data (nearest-pixel sampling).
    pub fn interpolate_raster(raster: &RasterMedium, mesh: &Arc<Mesh>) -> Result<Self> {
        if raster.domain != mesh.domain() {
            return Err(Error::DomainMismatch(
                "raster domain differs from mesh domain".into(),
            ));
        }
        let coeffs = mesh
            .vertices()
            .iter()
            .map(|&p| raster.value_at(p))
            .collect();
        Ok(FeFunction {
            mesh: mesh.clone(),
            coeffs,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Value at a barycentric point of element `t`.
    pub fn eval_in_element(&self, t: usize, bary: [f64; 3]) -> f64 {
        let [a, b, c] = self.mesh.triangle(t);
        bary[0] * self.coeffs[a] + bary[1] * self.coeffs[b] + bary[2] * self.coeffs[c]
    }

    /// Constant gradient on element `t`.
    pub fn gradient_on_element(&self, t: usize) -> [f64; 2] {
        let geom = self.mesh.element_geometry(t).expect("valid element");
        let [a, b, c] = self.mesh.triangle(t);
        let mut g = [0.0, 0.0];
        for (v, grad) in [a, b, c].iter().zip(geom.grads.iter()) {
            g[0] += self.coeffs[*v] * grad[0];
            g[1] += self.coeffs[*v] * grad[1];
        }
        g
    }

    pub fn same_mesh(&self, other: &FeFunction) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }
}

/// Concrete geometries used throughout the experiments, pinned here once so
/// every driver and test agrees on them.
pub mod presets {
    use super::*;

    /// Characteristic function of a disc, vanishing background.
    pub fn disc() -> Medium {
        Medium::new(Rect::unit_square(), 0.0)
            .with_inclusion(Shape::disc(0.5, 0.5, 0.3), 1.0)
            .expect("valid")
    }

    /// Characteristic function of the square [0.2, 0.8]^2.
    pub fn square() -> Medium {
        Medium::new(Rect::unit_square(), 0.0)
            .with_inclusion(Shape::rectangle(0.2, 0.2, 0.8, 0.8), 1.0)
            .expect("valid")
    }

    /// Disc minus the open sector (-30 deg, 30 deg).
    pub fn pacman() -> Medium {
        Medium::new(Rect::unit_square(), 0.0)
            .with_inclusion(
                Shape::SectorComplement {
                    center: Point::new(0.5, 0.5),
                    radius: 0.3,
                    angle_start: -PI / 6.0,
                    angle_end: PI / 6.0,
                },
                1.0,
            )
            .expect("valid")
    }

    /// Five-pointed star.
    pub fn star() -> Medium {
        Medium::new(Rect::unit_square(), 0.0)
            .with_inclusion(
                Shape::Star {
                    center: Point::new(0.5, 0.5),
                    n_points: 5,
                    r_outer: 0.35,
                    r_inner: 0.15,
                },
                1.0,
            )
            .expect("valid")
    }

    /// Four equal squares tiling [0.25, 0.75]^2 with values 1..4
    /// (row-major from the bottom-left).
    pub fn four_squares() -> Medium {
        Medium::new(Rect::unit_square(), 0.0)
            .with_inclusion(Shape::rectangle(0.25, 0.25, 0.5, 0.5), 1.0)
            .and_then(|m| m.with_inclusion(Shape::rectangle(0.5, 0.25, 0.75, 0.5), 2.0))
            .and_then(|m| m.with_inclusion(Shape::rectangle(0.25, 0.5, 0.5, 0.75), 3.0))
            .and_then(|m| m.with_inclusion(Shape::rectangle(0.5, 0.5, 0.75, 0.75), 4.0))
            .expect("valid")
    }

    /// Nonuniform background with M = 5 pieces touching the boundary and
    /// K = 4 interior inclusions with mutually disjoint interfaces.
    pub fn nonuniform_background() -> Medium {
        Medium::new(Rect::unit_square(), 0.0)
            .with_background_piece(Shape::rectangle(0.0, 0.0, 0.28, 0.28), 0.6)
            .and_then(|m| m.with_background_piece(Shape::rectangle(0.72, 0.0, 1.0, 0.28), 1.2))
            .and_then(|m| m.with_background_piece(Shape::rectangle(0.0, 0.72, 0.28, 1.0), 0.9))
            .and_then(|m| m.with_background_piece(Shape::rectangle(0.72, 0.72, 1.0, 1.0), 1.5))
            .and_then(|m| m.with_inclusion(Shape::disc(0.5, 0.5, 0.12), 2.0))
            .and_then(|m| m.with_inclusion(Shape::rectangle(0.42, 0.08, 0.58, 0.2), -1.0))
            .and_then(|m| m.with_inclusion(Shape::disc(0.14, 0.14, 0.07), -0.8))
            .and_then(|m| m.with_inclusion(Shape::rectangle(0.76, 0.44, 0.88, 0.56), 1.6))
            .expect("valid")
    }
}
