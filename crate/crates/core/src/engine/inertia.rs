use std::f64::consts::PI;

use nalgebra::Vector3;

use super::model::GeomType;

/// Volume and principal inertia per unit density of a primitive, about its
/// centre in its own frame. Planes are massless.
pub fn unit_mass_properties(kind: GeomType, size: &[f64; 3]) -> (f64, Vector3<f64>) {
    match kind {
        GeomType::Plane => (0.0, Vector3::zeros()),
        GeomType::Sphere => {
            let r = size[0];
            let v = 4.0 / 3.0 * PI * r.powi(3);
            let i = 0.4 * v * r * r;
            (v, Vector3::new(i, i, i))
        }
        GeomType::Box => {
            let (a, b, c) = (size[0], size[1], size[2]);
            let v = 8.0 * a * b * c;
            (
                v,
                Vector3::new(
                    v / 3.0 * (b * b + c * c),
                    v / 3.0 * (a * a + c * c),
                    v / 3.0 * (a * a + b * b),
                ),
            )
        }
        GeomType::Ellipsoid => {
            let (a, b, c) = (size[0], size[1], size[2]);
            let v = 4.0 / 3.0 * PI * a * b * c;
            (
                v,
                Vector3::new(
                    v / 5.0 * (b * b + c * c),
                    v / 5.0 * (a * a + c * c),
                    v / 5.0 * (a * a + b * b),
                ),
            )
        }
        GeomType::Cylinder => {
            let (r, h) = (size[0], size[1]);
            let v = PI * r * r * 2.0 * h;
            let t = v * (3.0 * r * r + 4.0 * h * h) / 12.0;
            (v, Vector3::new(t, t, v * r * r / 2.0))
        }
        GeomType::Capsule => {
            let (r, h) = (size[0], size[1]);
            let vc = PI * r * r * 2.0 * h;
            let vs = 4.0 / 3.0 * PI * r.powi(3);
            let axial = vc * r * r / 2.0 + vs * 0.4 * r * r;
            let t = vc * (3.0 * r * r + 4.0 * h * h) / 12.0 + vs * (0.4 * r * r + h * h + 0.75 * h * r);
            (vc + vs, Vector3::new(t, t, axial))
        }
    }
}

/// Frontal areas seen by flow along each local axis.
pub fn projected_areas(kind: GeomType, size: &[f64; 3]) -> Vector3<f64> {
    match kind {
        GeomType::Plane => Vector3::zeros(),
        GeomType::Sphere => Vector3::repeat(PI * size[0] * size[0]),
        GeomType::Box => Vector3::new(
            4.0 * size[1] * size[2],
            4.0 * size[0] * size[2],
            4.0 * size[0] * size[1],
        ),
        GeomType::Ellipsoid => Vector3::new(
            PI * size[1] * size[2],
            PI * size[0] * size[2],
            PI * size[0] * size[1],
        ),
        GeomType::Cylinder => {
            let side = 4.0 * size[0] * size[1];
            Vector3::new(side, side, PI * size[0] * size[0])
        }
        GeomType::Capsule => {
            let end = PI * size[0] * size[0];
            let side = 4.0 * size[0] * size[1] + end;
            Vector3::new(side, side, end)
        }
    }
}
