//! Ambient-space helpers for the two geometries: the unit sphere S² ⊂ R³ and
//! the upper hyperboloid H² in Minkowski space R^{2,1}.
//!
//! Everything downstream is written against [`Flavor`] so that the spherical
//! and hyperbolic pipelines share code; the only difference is which bilinear
//! form, exponential map, and trigonometry are used.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Which geometry a pattern lives in.
///
/// `Spherical` patterns sit on the unit sphere of Euclidean `R^3` and lift to
/// cmc surfaces in `R^3`; `Hyperbolic` patterns sit on the upper sheet of
/// `⟨x,x⟩ = −1` in `R^{2,1}` and lift to spacelike cmc surfaces there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Spherical,
    Hyperbolic,
}

/// The bilinear form ⟨x,y⟩ = x₁y₁ + x₂y₂ − x₃y₃ of signature (+,+,−).
#[derive(Clone, Copy, Debug, Default)]
pub struct MinkowskiForm;

impl MinkowskiForm {
    #[inline]
    pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
        a.x * b.x + a.y * b.y - a.z * b.z
    }

    #[inline]
    pub fn norm2(a: &Vec3) -> f64 {
        Self::dot(a, a)
    }

    /// Minkowski cross product: the unique vector with ⟨a ⊠ b, c⟩ = det(a,b,c).
    #[inline]
    pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
        Vec3::new(
            a.y * b.z - a.z * b.y,
            a.z * b.x - a.x * b.z,
            -(a.x * b.y - a.y * b.x),
        )
    }
}

impl Flavor {
    /// Ambient inner product (Euclidean or Minkowski).
    #[inline]
    pub fn dot(self, a: &Vec3, b: &Vec3) -> f64 {
        match self {
            Flavor::Spherical => a.dot(b),
            Flavor::Hyperbolic => MinkowskiForm::dot(a, b),
        }
    }

    /// Cross product compatible with the form: ⟨a × b, c⟩ = det(a,b,c).
    #[inline]
    pub fn cross(self, a: &Vec3, b: &Vec3) -> Vec3 {
        match self {
            Flavor::Spherical => a.cross(b),
            Flavor::Hyperbolic => MinkowskiForm::cross(a, b),
        }
    }

    /// Squared norm of the point constraint: +1 on S², −1 on H².
    #[inline]
    pub fn point_norm2(self) -> f64 {
        match self {
            Flavor::Spherical => 1.0,
            Flavor::Hyperbolic => -1.0,
        }
    }

    /// Base point of the seed gauge: north pole / hyperboloid apex.
    #[inline]
    pub fn base_point(self) -> Vec3 {
        Vec3::new(0.0, 0.0, 1.0)
    }

    /// Rescale an approximate surface point exactly onto the surface
    /// (‖p‖ = 1 or ⟨p,p⟩ = −1 with x₃ > 0).
    pub fn renormalize(self, p: &Vec3) -> Vec3 {
        match self {
            Flavor::Spherical => p / p.norm(),
            Flavor::Hyperbolic => {
                let s = (-MinkowskiForm::norm2(p)).sqrt();
                let q = p / s;
                if q.z < 0.0 {
                    -q
                } else {
                    q
                }
            }
        }
    }

    /// Geodesic distance between two surface points.
    pub fn distance(self, a: &Vec3, b: &Vec3) -> f64 {
        match self {
            Flavor::Spherical => a.dot(b).clamp(-1.0, 1.0).acos(),
            Flavor::Hyperbolic => (-MinkowskiForm::dot(a, b)).max(1.0).acosh(),
        }
    }

    /// cos/cosh of a geodesic length, as it appears in ⟨p,q⟩:
    /// ⟨p,q⟩ = cos d on S², ⟨p,q⟩ = −cosh d on H².
    #[inline]
    pub fn pair_dot_of_distance(self, d: f64) -> f64 {
        match self {
            Flavor::Spherical => d.cos(),
            Flavor::Hyperbolic => -d.cosh(),
        }
    }

    /// Project `x` into the tangent plane at surface point `p`.
    #[inline]
    pub fn tangent_project(self, p: &Vec3, x: &Vec3) -> Vec3 {
        match self {
            Flavor::Spherical => x - p * x.dot(p),
            Flavor::Hyperbolic => x + p * MinkowskiForm::dot(x, p),
        }
    }

    /// Deterministic oriented orthonormal tangent frame (e₁, e₂) at `p`.
    ///
    /// Bearings are measured as atan2(⟨t,e₂⟩, ⟨t,e₁⟩); the orientation is
    /// fixed by e₂ = p × e₁ (with the form-compatible cross product), so all
    /// frames agree with one global orientation of the surface.
    pub fn tangent_frame(self, p: &Vec3) -> (Vec3, Vec3) {
        let trial = if p.x.abs() < 0.8 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        let t = self.tangent_project(p, &trial);
        let e1 = t / self.dot(&t, &t).sqrt();
        let c = self.cross(p, &e1);
        let e2 = c / self.dot(&c, &c).sqrt();
        (e1, e2)
    }

    /// Exponential map: walk geodesic distance `s` from `p` in the tangent
    /// direction at bearing `theta` in the frame (e₁, e₂).
    pub fn exp_bearing(self, p: &Vec3, e1: &Vec3, e2: &Vec3, theta: f64, s: f64) -> Vec3 {
        let w = e1 * theta.cos() + e2 * theta.sin();
        let out = match self {
            Flavor::Spherical => p * s.cos() + w * s.sin(),
            Flavor::Hyperbolic => p * s.cosh() + w * s.sinh(),
        };
        self.renormalize(&out)
    }

    /// Bearing of surface point `x` seen from `p` in the frame (e₁, e₂).
    pub fn bearing(self, p: &Vec3, e1: &Vec3, e2: &Vec3, x: &Vec3) -> f64 {
        let t = self.tangent_project(p, x);
        self.dot(&t, e2).atan2(self.dot(&t, e1))
    }

    /// sin/sinh of a length (the "circumference factor" of the geometry).
    #[inline]
    pub fn sin_like(self, x: f64) -> f64 {
        match self {
            Flavor::Spherical => x.sin(),
            Flavor::Hyperbolic => x.sinh(),
        }
    }

    /// cos/cosh of a length.
    #[inline]
    pub fn cos_like(self, x: f64) -> f64 {
        match self {
            Flavor::Spherical => x.cos(),
            Flavor::Hyperbolic => x.cosh(),
        }
    }
}
