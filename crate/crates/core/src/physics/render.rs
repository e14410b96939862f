//! Software rasterizer: geoms are tessellated into triangles and drawn with a
//! z-buffer and flat Lambert shading.

use nalgebra::{Matrix3, Vector3};

use super::{Physics, PhysicsError, Result};
use crate::engine::{self, CompiledModel, Data, GeomType};
use crate::modeldom::Namespace;

const SLICES: usize = 24;
const STACKS: usize = 16;
const NEAR: f64 = 0.01;
const BACKGROUND: [u8; 3] = [38, 51, 77];
const FREE_FOVY: f64 = 45.0;
const FREE_AZIMUTH: f64 = 90.0;
const FREE_ELEVATION: f64 = -30.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CameraSel {
    /// Orbit camera framing the whole model in its reference pose.
    Free,
    Index(usize),
    Name(String),
}

impl From<usize> for CameraSel {
    fn from(i: usize) -> Self {
        CameraSel::Index(i)
    }
}

impl From<&str> for CameraSel {
    fn from(s: &str) -> Self {
        CameraSel::Name(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderMode {
    Rgb,
    Depth,
    Segmentation,
}

/// Row-major image buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    fn filled(width: usize, height: usize, v: T) -> Self {
        Grid {
            width,
            height,
            data: vec![v; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }
}

impl Grid<[u8; 3]> {
    /// Interleaved RGB bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().flatten().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Image {
    Rgb(Grid<[u8; 3]>),
    /// Distance along the view axis in metres; 0 where nothing was hit.
    Depth(Grid<f32>),
    /// Geom index per pixel; -1 for background.
    Segmentation(Grid<i32>),
}

impl Image {
    pub fn width(&self) -> usize {
        match self {
            Image::Rgb(g) => g.width,
            Image::Depth(g) => g.width,
            Image::Segmentation(g) => g.width,
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Image::Rgb(g) => g.height,
            Image::Depth(g) => g.height,
            Image::Segmentation(g) => g.height,
        }
    }

    pub fn as_rgb(&self) -> Option<&Grid<[u8; 3]>> {
        match self {
            Image::Rgb(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_depth(&self) -> Option<&Grid<f32>> {
        match self {
            Image::Depth(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_segmentation(&self) -> Option<&Grid<i32>> {
        match self {
            Image::Segmentation(g) => Some(g),
            _ => None,
        }
    }
}

impl Physics {
    /// Renders the current configuration.
    pub fn render(
        &mut self,
        width: usize,
        height: usize,
        camera: impl Into<CameraSel>,
        mode: RenderMode,
    ) -> Result<Image> {
        if width == 0 || height == 0 {
            return Err(PhysicsError::ImageSize(width, height));
        }
        let camera = resolve_camera(&self.model, &self.data, &camera.into())?;
        self.ensure_position()?;
        let mut r = Raster::new(width, height, camera);
        r.draw(&self.model, &self.data);
        Ok(match mode {
            RenderMode::Rgb => Image::Rgb(r.rgb),
            RenderMode::Depth => Image::Depth(Grid {
                width,
                height,
                data: r
                    .depth
                    .data
                    .iter()
                    .map(|&z| if z.is_finite() { z as f32 } else { 0.0 })
                    .collect(),
            }),
            RenderMode::Segmentation => Image::Segmentation(r.seg),
        })
    }
}

struct View {
    eye: Vector3<f64>,
    /// Columns: right, up, backward.
    rot: Matrix3<f64>,
    fovy: f64,
}

fn resolve_camera(m: &CompiledModel, d: &Data, sel: &CameraSel) -> Result<View> {
    let index = match sel {
        CameraSel::Free => return Ok(free_camera(m)),
        CameraSel::Index(i) if *i < m.cameras.len() => *i,
        CameraSel::Index(i) => return Err(PhysicsError::UnknownCamera(i.to_string())),
        CameraSel::Name(n) => m
            .name2id(Namespace::Camera, n)
            .ok_or_else(|| PhysicsError::UnknownCamera(n.clone()))?,
    };
    // frames may be stale; cameras are cheap to recompute from body poses
    let cam = &m.cameras[index];
    let mut probe = d.clone();
    engine::kinematics(m, &mut probe);
    let (pos, quat) = (probe.xpos[cam.body], probe.xquat[cam.body]);
    Ok(View {
        eye: pos + quat * cam.pos,
        rot: *(quat * cam.quat).to_rotation_matrix().matrix(),
        fovy: cam.fovy,
    })
}

fn bounding_radius(kind: GeomType, s: &[f64; 3]) -> f64 {
    match kind {
        GeomType::Sphere => s[0],
        GeomType::Capsule => s[0] + s[1],
        GeomType::Cylinder => (s[0] * s[0] + s[1] * s[1]).sqrt(),
        GeomType::Box => (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt(),
        GeomType::Ellipsoid => s[0].max(s[1]).max(s[2]),
        GeomType::Plane => 0.0,
    }
}

/// Centre and radius of the model's extent in its reference configuration.
fn extent(m: &CompiledModel) -> (Vector3<f64>, f64) {
    let mut d = Data::new(m);
    engine::kinematics(m, &mut d);
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for (g, geom) in m.geoms.iter().enumerate() {
        if geom.kind == GeomType::Plane {
            continue;
        }
        let r = bounding_radius(geom.kind, &geom.size);
        lo = lo.inf(&(d.geom_xpos[g] - Vector3::repeat(r)));
        hi = hi.sup(&(d.geom_xpos[g] + Vector3::repeat(r)));
    }
    if !lo.x.is_finite() {
        return (Vector3::zeros(), 1.0);
    }
    ((lo + hi) / 2.0, ((hi - lo).norm() / 2.0).max(0.1))
}

fn free_camera(m: &CompiledModel) -> View {
    let (center, radius) = extent(m);
    let (az, el) = (FREE_AZIMUTH.to_radians(), FREE_ELEVATION.to_radians());
    let forward = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
    let distance = 1.1 * radius / (FREE_FOVY.to_radians() / 2.0).sin();
    let right = forward.cross(&Vector3::z()).normalize();
    let up = right.cross(&forward);
    View {
        eye: center - forward * distance,
        rot: Matrix3::from_columns(&[right, up, -forward]),
        fovy: FREE_FOVY,
    }
}

/// Surface of revolution about z from `(z, radius)` rings, top to bottom.
fn revolve(rings: &[(f64, f64)], out: &mut Vec<[Vector3<f64>; 3]>) {
    let point = |(z, r): (f64, f64), k: usize| {
        let a = 2.0 * std::f64::consts::PI * k as f64 / SLICES as f64;
        Vector3::new(r * a.cos(), r * a.sin(), z)
    };
    for w in rings.windows(2) {
        for k in 0..SLICES {
            let (a0, a1) = (point(w[0], k), point(w[0], k + 1));
            let (b0, b1) = (point(w[1], k), point(w[1], k + 1));
            if w[0].1 > 0.0 {
                out.push([a0, b0, a1]);
            }
            if w[1].1 > 0.0 {
                out.push([a1, b0, b1]);
            }
        }
    }
}

fn hemisphere_rings(r: f64, offset: f64, upper: bool, rings: &mut Vec<(f64, f64)>) {
    let half = STACKS / 2;
    for i in 0..=half {
        let t = if upper { i } else { half + i };
        let th = std::f64::consts::PI * t as f64 / STACKS as f64;
        rings.push((r * th.cos() + offset, r * th.sin()));
    }
}

fn tessellate(kind: GeomType, s: &[f64; 3], plane_extent: f64) -> Vec<[Vector3<f64>; 3]> {
    let mut tris = Vec::new();
    match kind {
        GeomType::Sphere | GeomType::Ellipsoid => {
            let mut rings = Vec::new();
            hemisphere_rings(1.0, 0.0, true, &mut rings);
            rings.pop();
            hemisphere_rings(1.0, 0.0, false, &mut rings);
            revolve(&rings, &mut tris);
            let scale = match kind {
                GeomType::Sphere => Vector3::repeat(s[0]),
                _ => Vector3::new(s[0], s[1], s[2]),
            };
            for t in &mut tris {
                for v in t.iter_mut() {
                    *v = v.component_mul(&scale);
                }
            }
        }
        GeomType::Capsule => {
            let mut rings = Vec::new();
            hemisphere_rings(s[0], s[1], true, &mut rings);
            hemisphere_rings(s[0], -s[1], false, &mut rings);
            revolve(&rings, &mut tris);
        }
        GeomType::Cylinder => {
            revolve(&[(s[1], 0.0), (s[1], s[0]), (-s[1], s[0]), (-s[1], 0.0)], &mut tris);
        }
        GeomType::Box => {
            let c = |i: usize| {
                Vector3::new(
                    if i & 1 == 0 { -s[0] } else { s[0] },
                    if i & 2 == 0 { -s[1] } else { s[1] },
                    if i & 4 == 0 { -s[2] } else { s[2] },
                )
            };
            for quad in [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]] {
                tris.push([c(quad[0]), c(quad[1]), c(quad[2])]);
                tris.push([c(quad[0]), c(quad[2]), c(quad[3])]);
            }
        }
        GeomType::Plane => {
            let hx = if s[0] > 0.0 { s[0] } else { plane_extent };
            let hy = if s[1] > 0.0 { s[1] } else { plane_extent };
            let p = |x: f64, y: f64| Vector3::new(x, y, 0.0);
            tris.push([p(-hx, -hy), p(hx, -hy), p(hx, hy)]);
            tris.push([p(-hx, -hy), p(hx, hy), p(-hx, hy)]);
        }
    }
    tris
}

/// Vertex in camera space carrying plane-local coordinates for texturing.
#[derive(Clone, Copy)]
struct Vert {
    cam: Vector3<f64>,
    uv: [f64; 2],
}

fn lerp(a: &Vert, b: &Vert, t: f64) -> Vert {
    Vert {
        cam: a.cam + (b.cam - a.cam) * t,
        uv: [a.uv[0] + (b.uv[0] - a.uv[0]) * t, a.uv[1] + (b.uv[1] - a.uv[1]) * t],
    }
}

/// Clips a polygon to depth >= NEAR (depth is -z in camera space).
fn clip_near(poly: &[Vert]) -> Vec<Vert> {
    let mut out = Vec::with_capacity(4);
    for i in 0..poly.len() {
        let (a, b) = (&poly[i], &poly[(i + 1) % poly.len()]);
        let (da, db) = (-a.cam.z - NEAR, -b.cam.z - NEAR);
        if da >= 0.0 {
            out.push(*a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            out.push(lerp(a, b, da / (da - db)));
        }
    }
    out
}

struct Checker {
    rgb1: [f64; 3],
    rgb2: [f64; 3],
    repeat: [f64; 2],
}

struct Raster {
    width: usize,
    height: usize,
    view: View,
    focal: f64,
    rgb: Grid<[u8; 3]>,
    depth: Grid<f64>,
    seg: Grid<i32>,
}

impl Raster {
    fn new(width: usize, height: usize, view: View) -> Raster {
        let focal = height as f64 / 2.0 / (view.fovy.to_radians() / 2.0).tan();
        Raster {
            width,
            height,
            view,
            focal,
            rgb: Grid::filled(width, height, BACKGROUND),
            depth: Grid::filled(width, height, f64::INFINITY),
            seg: Grid::filled(width, height, -1),
        }
    }

    fn draw(&mut self, m: &CompiledModel, d: &Data) {
        let (_, radius) = extent(m);
        let plane_extent = (5.0 * radius).max(10.0);
        let back = self.view.rot.column(2).into_owned();
        let lights: Vec<(Vector3<f64>, Vector3<f64>)> = d
            .light_xdir
            .iter()
            .zip(&m.lights)
            .map(|(dir, l)| (-dir, l.diffuse))
            .collect();
        for (g, geom) in m.geoms.iter().enumerate() {
            if geom.rgba[3] <= 0.0 {
                continue;
            }
            let checker = geom
                .material
                .and_then(|i| m.materials[i].texture.map(|t| (i, t)))
                .filter(|&(_, t)| m.textures[t].checker)
                .map(|(i, t)| Checker {
                    rgb1: m.textures[t].rgb1,
                    rgb2: m.textures[t].rgb2,
                    repeat: m.materials[i].texrepeat,
                });
            let (pos, rot) = (d.geom_xpos[g], d.geom_xmat[g]);
            for tri in tessellate(geom.kind, &geom.size, plane_extent) {
                let world = tri.map(|v| pos + rot * v);
                let mut n = (world[1] - world[0]).cross(&(world[2] - world[0]));
                if n.norm() < 1e-15 {
                    continue;
                }
                n.normalize_mut();
                // two-sided: face the camera
                if n.dot(&(self.view.eye - world[0])) < 0.0 {
                    n = -n;
                }
                let mut light = 0.3 + 0.4 * n.dot(&back).abs();
                for (dir, diffuse) in &lights {
                    light += diffuse.mean() * n.dot(dir).max(0.0);
                }
                let verts: Vec<Vert> = (0..3)
                    .map(|k| Vert {
                        cam: self.view.rot.transpose() * (world[k] - self.view.eye),
                        uv: [tri[k].x, tri[k].y],
                    })
                    .collect();
                let shade = |base: [f64; 3]| base.map(|c| ((c * light).min(1.0) * 255.0).round() as u8);
                let flat = shade([geom.rgba[0], geom.rgba[1], geom.rgba[2]]);
                let tex = checker
                    .as_ref()
                    .map(|c| (shade(c.rgb1), shade(c.rgb2), c.repeat));
                let poly = clip_near(&verts);
                for k in 1..poly.len().saturating_sub(1) {
                    self.fill([&poly[0], &poly[k], &poly[k + 1]], g as i32, flat, tex);
                }
            }
        }
    }

    fn fill(&mut self, v: [&Vert; 3], id: i32, color: [u8; 3], tex: Option<([u8; 3], [u8; 3], [f64; 2])>) {
        let (cx, cy) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
        let scr: Vec<(f64, f64, f64)> = v
            .iter()
            .map(|p| {
                let z = -p.cam.z;
                (cx + self.focal * p.cam.x / z, cy - self.focal * p.cam.y / z, 1.0 / z)
            })
            .collect();
        let area = (scr[1].0 - scr[0].0) * (scr[2].1 - scr[0].1) - (scr[2].0 - scr[0].0) * (scr[1].1 - scr[0].1);
        if area.abs() < 1e-12 {
            return;
        }
        let xmin = scr.iter().map(|s| s.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let ymin = scr.iter().map(|s| s.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let xmax = scr.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max).ceil().min(self.width as f64) as usize;
        let ymax = scr.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max).ceil().min(self.height as f64) as usize;
        for y in ymin..ymax {
            let py = y as f64 + 0.5;
            for x in xmin..xmax {
                let px = x as f64 + 0.5;
                let edge = |a: usize, b: usize| {
                    (scr[b].0 - scr[a].0) * (py - scr[a].1) - (scr[b].1 - scr[a].1) * (px - scr[a].0)
                };
                let w0 = edge(1, 2) / area;
                let w1 = edge(2, 0) / area;
                let w2 = edge(0, 1) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let inv_z = w0 * scr[0].2 + w1 * scr[1].2 + w2 * scr[2].2;
                let z = 1.0 / inv_z;
                let i = y * self.width + x;
                if z >= self.depth.data[i] {
                    continue;
                }
                self.depth.data[i] = z;
                self.seg.data[i] = id;
                self.rgb.data[i] = match tex {
                    None => color,
                    Some((c1, c2, repeat)) => {
                        let uv = |k: usize| {
                            (w0 * v[0].uv[k] * scr[0].2 + w1 * v[1].uv[k] * scr[1].2 + w2 * v[2].uv[k] * scr[2].2) * z
                        };
                        let cell = (uv(0) * repeat[0]).floor() as i64 + (uv(1) * repeat[1]).floor() as i64;
                        if cell.rem_euclid(2) == 0 {
                            c1
                        } else {
                            c2
                        }
                    }
                };
            }
        }
    }
}
