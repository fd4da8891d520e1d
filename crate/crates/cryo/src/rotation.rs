//! Rotations, quadrature sets on SO(3) and von Mises-Fisher view sampling.
//!
//! A rotation `R` acts on a volume as `(R v)(p) = v(R^T p)`; its projection
//! along z has Fourier transform `vhat(R^T (kx, ky, 0))`. Rotations are
//! assembled as `R = Rz(alpha) B(d)` where `B(d)` maps the viewing direction
//! `d` to the z-axis, so the slice plane has normal `R^T e_z = d`.

use std::f64::consts::PI;

use orbit_core::SeededRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::designs::{DESIGN_100_13, DESIGN_36_7};
use crate::error::{CryoError, Result};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation(pub [[f64; 3]; 3]);

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: Vec3) -> Vec3 {
    let s = dot(a, a).sqrt();
    [a[0] / s, a[1] / s, a[2] / s]
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Rotation by `alpha` about the z-axis.
    pub fn rz(alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Rotation([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rotation by `angle` about the unit vector `axis` (Rodrigues).
    pub fn axis_angle(axis: Vec3, angle: f64) -> Self {
        let [x, y, z] = normalize(axis);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Rotation([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    /// The smallest rotation taking unit vector `d` to `e_z`.
    pub fn to_z(d: Vec3) -> Self {
        let d = normalize(d);
        let ez = [0.0, 0.0, 1.0];
        let c = d[2];
        if c < -1.0 + 1e-12 {
            return Rotation::axis_angle([1.0, 0.0, 0.0], PI);
        }
        let axis = cross(d, ez);
        let s = dot(axis, axis).sqrt();
        if s < 1e-15 {
            return Rotation::IDENTITY;
        }
        Rotation::axis_angle(axis, s.atan2(c))
    }

    /// `Rz(alpha) B(d)`: slice plane normal `d`, in-plane angle `alpha`.
    pub fn from_view(d: Vec3, alpha: f64) -> Self {
        Rotation::rz(alpha).mul(&Rotation::to_z(d))
    }

    pub fn mul(&self, other: &Rotation) -> Rotation {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Rotation(out)
    }

    pub fn transpose(&self) -> Rotation {
        let a = &self.0;
        Rotation([[a[0][0], a[1][0], a[2][0]], [a[0][1], a[1][1], a[2][1]], [a[0][2], a[1][2], a[2][2]]])
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let a = &self.0;
        [dot(a[0], v), dot(a[1], v), dot(a[2], v)]
    }

    /// `R^T v`.
    pub fn apply_t(&self, v: Vec3) -> Vec3 {
        let a = &self.0;
        [
            a[0][0] * v[0] + a[1][0] * v[1] + a[2][0] * v[2],
            a[0][1] * v[0] + a[1][1] * v[1] + a[2][1] * v[2],
            a[0][2] * v[0] + a[1][2] * v[1] + a[2][2] * v[2],
        ]
    }

    pub fn det(&self) -> f64 {
        let a = &self.0;
        dot(a[0], cross(a[1], a[2]))
    }

    /// Largest deviation from `R^T R = I` and `det R = 1`.
    pub fn defect(&self) -> f64 {
        let p = self.transpose().mul(self);
        let mut worst = (self.det() - 1.0).abs();
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.0[i][j] - id).abs());
            }
        }
        worst
    }

    /// Viewing direction `R^T e_z`.
    pub fn direction(&self) -> Vec3 {
        self.0[2]
    }
}

/// Where the viewing directions of a quadrature set come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// An embedded spherical t-design.
    Design { degree: usize },
    /// Fibonacci lattice; not exact for any degree.
    Fibonacci,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSet {
    /// Direction-major: entry `i * q2 + a` has direction `i`, angle `a`.
    pub rotations: Vec<Rotation>,
    pub q1: usize,
    pub q2: usize,
    pub kind: DesignKind,
}

impl QuadratureSet {
    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }
}

/// Fibonacci-lattice directions.
pub fn fibonacci_points(q1: usize) -> Vec<Vec3> {
    let golden = PI * (1.0 + 5f64.sqrt());
    (0..q1)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / q1 as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * (i as f64 + 0.5);
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Directions for `q1` points: an embedded design when one exists,
/// otherwise the Fibonacci lattice.
pub fn design_points(q1: usize) -> (Vec<Vec3>, DesignKind) {
    match q1 {
        36 => (DESIGN_36_7.to_vec(), DesignKind::Design { degree: 7 }),
        100 => (DESIGN_100_13.to_vec(), DesignKind::Design { degree: 13 }),
        _ => (fibonacci_points(q1), DesignKind::Fibonacci),
    }
}

/// `q2` equispaced in-plane angles for every direction.
pub fn build_quadrature(points: &[Vec3], q2: usize, kind: DesignKind) -> Result<QuadratureSet> {
    if points.is_empty() || q2 == 0 {
        return Err(CryoError::Invalid("quadrature needs at least one direction and one in-plane angle".into()));
    }
    if let Some(p) = points.iter().find(|p| (dot(**p, **p).sqrt() - 1.0).abs() > 1e-9) {
        return Err(CryoError::Invalid(format!("design point {p:?} is not unit-norm")));
    }
    let mut rotations = Vec::with_capacity(points.len() * q2);
    for &d in points {
        let base = Rotation::to_z(d);
        for a in 0..q2 {
            rotations.push(Rotation::rz(2.0 * PI * a as f64 / q2 as f64).mul(&base));
        }
    }
    Ok(QuadratureSet { rotations, q1: points.len(), q2, kind })
}

/// Convenience: `build_quadrature(design_points(q1), q2)`.
pub fn quadrature(q1: usize, q2: usize) -> Result<QuadratureSet> {
    let (points, kind) = design_points(q1);
    build_quadrature(&points, q2, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmfComponent {
    pub weight: f64,
    pub mean: Vec3,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmfMixtureSpec {
    pub components: Vec<VmfComponent>,
}

impl Default for VmfMixtureSpec {
    /// Eight equal components at the cube-corner directions, `kappa = 20`.
    fn default() -> Self {
        let s = 1.0 / 3f64.sqrt();
        let mut components = Vec::with_capacity(8);
        for x in [-s, s] {
            for y in [-s, s] {
                for z in [-s, s] {
                    components.push(VmfComponent { weight: 0.125, mean: [x, y, z], kappa: 20.0 });
                }
            }
        }
        Self { components }
    }
}

impl VmfMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(CryoError::Invalid("vMF mixture has no components".into()));
        }
        for c in &self.components {
            if !(c.kappa >= 0.0 && c.kappa.is_finite()) {
                return Err(CryoError::Invalid(format!("concentration must be >= 0, got {}", c.kappa)));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(CryoError::Invalid(format!("weight must be >= 0, got {}", c.weight)));
            }
            if (dot(c.mean, c.mean).sqrt() - 1.0).abs() > 1e-9 {
                return Err(CryoError::Invalid(format!("mean direction {:?} is not unit-norm", c.mean)));
            }
        }
        let s: f64 = self.components.iter().map(|c| c.weight).sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(CryoError::Invalid(format!("weights sum to {s}, not 1")));
        }
        Ok(())
    }
}

/// One draw from vMF(mean, kappa) on the 2-sphere. The cosine to the mean
/// has the closed-form inverse CDF `1 + ln(u + (1 - u) e^{-2 kappa}) / kappa`;
/// the tangent direction is uniform.
pub fn sample_vmf(mean: Vec3, kappa: f64, rng: &mut impl Rng) -> Vec3 {
    let u: f64 = rng.random();
    let w = if kappa < 1e-12 {
        2.0 * u - 1.0
    } else {
        (1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0)
    };
    let theta = 2.0 * PI * rng.random::<f64>();
    let r = (1.0 - w * w).max(0.0).sqrt();
    // orthonormal frame around the mean
    let mu = normalize(mean);
    let helper = if mu[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(cross(mu, helper));
    let e2 = cross(mu, e1);
    let (s, c) = theta.sin_cos();
    [0, 1, 2].map(|i| w * mu[i] + r * (c * e1[i] + s * e2[i]))
}

/// Rotations per deterministic sampling chunk.
pub const CHUNK: usize = 1024;

fn sample_one(spec: &VmfMixtureSpec, cdf: &[f64], rng: &mut impl Rng) -> Rotation {
    let u: f64 = rng.random::<f64>() * cdf.last().expect("non-empty");
    let i = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
    let c = &spec.components[i];
    let d = sample_vmf(c.mean, c.kappa, rng);
    Rotation::from_view(d, 2.0 * PI * rng.random::<f64>())
}

fn mixture_cdf(spec: &VmfMixtureSpec) -> Vec<f64> {
    let mut acc = 0.0;
    spec.components
        .iter()
        .map(|c| {
            acc += c.weight;
            acc
        })
        .collect()
}

/// Draw `count` rotations: viewing direction from the mixture, independent
/// uniform in-plane angle. Chunk `i` of [`CHUNK`] draws uses stream `i`.
pub fn sample_rotations(spec: &VmfMixtureSpec, count: usize, rng: &SeededRng) -> Result<Vec<Rotation>> {
    spec.validate()?;
    Ok((0..count.div_ceil(CHUNK)).flat_map(|chunk| sample_rotation_chunk(spec, count, chunk, rng)).collect())
}

/// Rotations of chunk `chunk` only; identical to the matching slice of
/// [`sample_rotations`].
pub fn sample_rotation_chunk(spec: &VmfMixtureSpec, count: usize, chunk: usize, rng: &SeededRng) -> Vec<Rotation> {
    let cdf = mixture_cdf(spec);
    let mut s = rng.stream(chunk as u64);
    (0..CHUNK.min(count - chunk * CHUNK)).map(|_| sample_one(spec, &cdf, &mut s)).collect()
}
