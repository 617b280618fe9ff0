//! Rigid transforms, rotational symmetry and symmetry-aware camera viewpoints.
//!
//! Rotations are unit quaternions kept in a canonical sign (`w >= 0`, ties
//! broken on the first non-zero vector component), so two equal poses
//! compare equal field by field.
//!
//! Symmetry is handled by splitting a rotation into swing and twist about
//! the object's symmetry axis. Right-multiplying by a symmetry element only
//! changes the twist, so canonicalization reduces the twist into the
//! fundamental domain of the group: `[0, 2π/n)` for cyclic order `n`, and
//! exactly zero for a solid of revolution.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Twist angles this close to a multiple of the cyclic step (relative to
/// the step) are snapped onto it, keeping canonicalization idempotent.
const DOMAIN_SNAP: f64 = 1e-9;

/// Rotation plus translation (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

fn canonical_sign(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let c = q.quaternion().coords; // [x, y, z, w]
    let flip = if c[3] != 0.0 {
        c[3] < 0.0
    } else {
        c.iter()
            .take(3)
            .find(|v| **v != 0.0)
            .is_some_and(|v| *v < 0.0)
    };
    if flip {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

impl RigidPose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        RigidPose {
            rotation: canonical_sign(UnitQuaternion::new_normalize(rotation.into_inner())),
            translation,
        }
    }

    pub fn identity() -> Self {
        RigidPose::new(UnitQuaternion::identity(), Vector3::zeros())
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        RigidPose::new(UnitQuaternion::identity(), Vector3::new(x, y, z))
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        RigidPose::new(rotation, Vector3::zeros())
    }

    /// From a `(w, x, y, z)` quaternion and translation. The quaternion must
    /// be finite and have unit norm within 1e-6; it is renormalized.
    pub fn from_wxyz(q: [f64; 4], t: [f64; 3]) -> Result<Self> {
        if q.iter().chain(&t).any(|v| !v.is_finite()) {
            return Err(Error::validation("pose contains non-finite values"));
        }
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        let norm = quat.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::validation(format!(
                "quaternion norm {norm} is not 1"
            )));
        }
        Ok(RigidPose::new(
            UnitQuaternion::new_normalize(quat),
            Vector3::from(t),
        ))
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `(w, x, y, z)`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// `self · other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose::new(
            self.rotation * other.rotation,
            self.translation + self.rotation * other.translation,
        )
    }

    pub fn inverse(&self) -> RigidPose {
        let r_inv = self.rotation.inverse();
        RigidPose::new(r_inv, -(r_inv * self.translation))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation.to_rotation_matrix().matrix()
    }

    /// Homogeneous 4×4 matrix.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// From a homogeneous matrix whose rotation block is already orthonormal.
    pub fn from_matrix(m: &Matrix4<f64>) -> RigidPose {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
        RigidPose::new(q, m.fixed_view::<3, 1>(0, 3).into_owned())
    }
}

/// Free-function form of [`RigidPose::compose`].
pub fn compose(a: &RigidPose, b: &RigidPose) -> RigidPose {
    a.compose(b)
}

/// Free-function form of [`RigidPose::inverse`].
pub fn invert(p: &RigidPose) -> RigidPose {
    p.inverse()
}

/// Geodesic angle between two rotations, in `[0, π]`.
pub fn rotation_angle_between(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let r = a.inverse() * b;
    let q = r.quaternion();
    2.0 * q.imag().norm().atan2(q.w.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryKind {
    /// Invariant under rotations by multiples of `2π / order`.
    Cyclic(u32),
    /// Invariant under every rotation about the axis.
    Revolution,
}

/// Rotational symmetry of an object about an axis in its own frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetrySpec {
    axis: Unit<Vector3<f64>>,
    kind: SymmetryKind,
}

impl SymmetrySpec {
    /// `axis` must be finite and non-zero; it is normalized.
    pub fn new(axis: Vector3<f64>, kind: SymmetryKind) -> Result<Self> {
        if axis.iter().any(|v| !v.is_finite()) || axis.norm() < 1e-12 {
            return Err(Error::validation("symmetry axis must be a non-zero vector"));
        }
        if let SymmetryKind::Cyclic(n) = kind {
            if n < 2 {
                return Err(Error::validation(format!(
                    "cyclic symmetry order must be >= 2, got {n}"
                )));
            }
        }
        Ok(SymmetrySpec {
            axis: Unit::new_normalize(axis),
            kind,
        })
    }

    pub fn cyclic(axis: Vector3<f64>, order: u32) -> Result<Self> {
        Self::new(axis, SymmetryKind::Cyclic(order))
    }

    pub fn revolution(axis: Vector3<f64>) -> Result<Self> {
        Self::new(axis, SymmetryKind::Revolution)
    }

    pub fn axis(&self) -> &Unit<Vector3<f64>> {
        &self.axis
    }

    pub fn kind(&self) -> SymmetryKind {
        self.kind
    }

    /// Width of the azimuthal fundamental domain (`2π / n`; zero for revolution).
    pub fn fundamental_width(&self) -> f64 {
        match self.kind {
            SymmetryKind::Cyclic(n) => TAU / n as f64,
            SymmetryKind::Revolution => 0.0,
        }
    }

    /// The group element rotating by `angle` about the axis.
    pub fn element(&self, angle: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&self.axis, angle)
    }
}

/// Signed twist of `q` about `axis`, in `[-π, π]` for a sign-canonical `q`.
pub fn twist_angle(q: &UnitQuaternion<f64>, axis: &Unit<Vector3<f64>>) -> f64 {
    let q = canonical_sign(*q);
    let inner = q.quaternion();
    2.0 * inner.imag().dot(axis).atan2(inner.w)
}

/// `p · S` with `S` the symmetry element that brings the twist about the
/// axis into the fundamental domain. Translation is untouched.
pub fn canonicalize_pose(p: &RigidPose, sym: &SymmetrySpec) -> RigidPose {
    let theta = twist_angle(&p.rotation, &sym.axis);
    let correction = match sym.kind {
        SymmetryKind::Revolution => -theta,
        SymmetryKind::Cyclic(_) => {
            let step = sym.fundamental_width();
            let wrapped = theta.rem_euclid(TAU);
            let k = (wrapped / step + DOMAIN_SNAP).floor();
            -k * step
        }
    };
    RigidPose::new(p.rotation * sym.element(correction), p.translation)
}

/// Smallest rotation angle between `a · S` and `b` over the symmetry group,
/// and the Euclidean distance between translations.
pub fn symmetry_distance(a: &RigidPose, b: &RigidPose, sym: &SymmetrySpec) -> (f64, f64) {
    let translation = (a.translation - b.translation).norm();
    let relative = a.rotation.inverse() * b.rotation;
    // angle(a·S, b) = |rotation of S⁻¹·(a⁻¹ b)|, smallest when S matches the
    // twist of the relative rotation
    let best = twist_angle(&relative, &sym.axis);
    let angle = match sym.kind {
        SymmetryKind::Revolution => rotation_angle_between(&sym.element(best), &relative),
        SymmetryKind::Cyclic(_) => {
            let step = sym.fundamental_width();
            let k = (best / step).round();
            [k - 1.0, k, k + 1.0]
                .iter()
                .map(|k| rotation_angle_between(&sym.element(k * step), &relative))
                .fold(f64::INFINITY, f64::min)
        }
    };
    (angle, translation)
}

/// Grasp pose expressed in the object frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspOffset(pub RigidPose);

impl Default for GraspOffset {
    fn default() -> Self {
        GraspOffset(RigidPose::identity())
    }
}

/// World grasp pose from an estimated object pose.
pub fn grasp_from_pose(object_pose: &RigidPose, offset: &GraspOffset) -> RigidPose {
    object_pose.compose(&offset.0)
}

/// A sampled camera, with the spherical coordinates it was placed at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    /// Camera-in-object pose. The camera looks along its own `-z`, `+y` up.
    pub camera: RigidPose,
    /// About the symmetry axis, radians.
    pub azimuth: f64,
    /// Above the plane orthogonal to the symmetry axis, radians.
    pub elevation: f64,
    /// In-plane rotation about the viewing axis, radians.
    pub roll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointSet {
    pub views: Vec<Viewpoint>,
    pub radius: f64,
    pub elevation: (f64, f64),
}

impl ViewpointSet {
    pub fn camera_poses(&self) -> impl Iterator<Item = &RigidPose> {
        self.views.iter().map(|v| &v.camera)
    }

    /// Object-in-camera poses for an object sitting at the origin.
    pub fn object_in_camera(&self) -> Vec<RigidPose> {
        self.views.iter().map(|v| v.camera.inverse()).collect()
    }
}

/// Orthonormal `(e1, e2)` completing `axis` to a right-handed frame.
fn axis_frame(axis: &Unit<Vector3<f64>>) -> (Vector3<f64>, Vector3<f64>) {
    let a = axis.into_inner();
    let mut pick = Vector3::x();
    let mut best = a.x.abs();
    for (i, v) in [a.y.abs(), a.z.abs()].into_iter().enumerate() {
        if v < best {
            best = v;
            pick = if i == 0 { Vector3::y() } else { Vector3::z() };
        }
    }
    let e1 = (pick - a * pick.dot(&a)).normalize();
    let e2 = a.cross(&e1);
    (e1, e2)
}

/// Camera pose at the given spherical coordinates, looking at the origin.
pub fn look_at_origin(
    sym: &SymmetrySpec,
    radius: f64,
    azimuth: f64,
    elevation: f64,
    roll: f64,
) -> RigidPose {
    let a = sym.axis.into_inner();
    let (e1, e2) = axis_frame(&sym.axis);
    let radial = e1 * (elevation.cos() * azimuth.cos())
        + e2 * (elevation.cos() * azimuth.sin())
        + a * elevation.sin();
    let z = radial.normalize();
    // azimuthal tangent; orthogonal to z even at the pole
    let tangent = e2 * azimuth.cos() - e1 * azimuth.sin();
    let x0 = (tangent - z * tangent.dot(&z)).normalize();
    let y0 = z.cross(&x0);
    let x = x0 * roll.cos() + y0 * roll.sin();
    let y = z.cross(&x);
    let m = Matrix3::from_columns(&[x, y, z]);
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    RigidPose::new(q, z * radius)
}

/// Seeded camera placements restricted to the symmetry's fundamental domain.
///
/// Elevation is stratified into `n` equal bands with one jittered sample
/// each. For cyclic symmetry the azimuth walks a golden-ratio sequence over
/// `[0, 2π/order)`. For revolution the azimuth is fixed at zero and, when
/// `roll` is set, each camera gets a seeded in-plane roll instead.
pub fn sample_viewpoints_with(
    n: usize,
    radius: f64,
    elevation: (f64, f64),
    sym: &SymmetrySpec,
    seed: u64,
    roll: bool,
) -> Result<ViewpointSet> {
    if n == 0 {
        return Err(Error::param("viewpoint count must be >= 1"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::param(format!("radius must be > 0, got {radius}")));
    }
    let (lo, hi) = elevation;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi && hi <= PI / 2.0) {
        return Err(Error::param(format!(
            "elevation range must satisfy 0 < min < max <= π/2, got [{lo}, {hi}]"
        )));
    }
    const GOLDEN: f64 = 0.618_033_988_749_894_8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: f64 = rng.gen();
    let step = sym.fundamental_width();
    let views = (0..n)
        .map(|i| {
            let jitter: f64 = rng.gen();
            let el = lo + (hi - lo) * (i as f64 + jitter) / n as f64;
            let (az, r) = match sym.kind {
                SymmetryKind::Cyclic(_) => {
                    let frac = (phase + i as f64 * GOLDEN).fract();
                    let mut az = frac * step;
                    if az >= step {
                        az = step.next_down();
                    }
                    (az, 0.0)
                }
                SymmetryKind::Revolution => {
                    let r = if roll { rng.gen_range(-PI..PI) } else { 0.0 };
                    (0.0, r)
                }
            };
            Viewpoint {
                camera: look_at_origin(sym, radius, az, el, r),
                azimuth: az,
                elevation: el,
                roll: r,
            }
        })
        .collect();
    Ok(ViewpointSet {
        views,
        radius,
        elevation,
    })
}

/// [`sample_viewpoints_with`] with in-plane roll enabled for revolution symmetry.
pub fn sample_viewpoints(
    n: usize,
    radius: f64,
    elevation: (f64, f64),
    sym: &SymmetrySpec,
    seed: u64,
) -> Result<ViewpointSet> {
    sample_viewpoints_with(n, radius, elevation, sym, seed, true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OffsetDocument {
    /// `(w, x, y, z)`.
    quaternion: [f64; 4],
    translation: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDocument {
    axis: [f64; 3],
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grasp_offset: Option<OffsetDocument>,
}

/// Per-object symmetry and grasp configuration, read from JSON:
///
/// ```json
/// {"axis": [0, 0, 1], "kind": "cyclic", "order": 4,
///  "grasp_offset": {"quaternion": [1, 0, 0, 0], "translation": [0, 0, 0.01]}}
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectConfig {
    pub symmetry: SymmetrySpec,
    pub grasp_offset: GraspOffset,
}

impl ObjectConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ObjectDocument =
            serde_json::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        let axis = Vector3::from(doc.axis);
        let symmetry = match (doc.kind.as_str(), doc.order) {
            ("cyclic", Some(order)) => SymmetrySpec::cyclic(axis, order)?,
            ("cyclic", None) => return Err(Error::validation("cyclic symmetry requires `order`")),
            ("revolution", None) => SymmetrySpec::revolution(axis)?,
            ("revolution", Some(_)) => {
                return Err(Error::validation("`order` only applies to cyclic symmetry"))
            }
            (other, _) => {
                return Err(Error::validation(format!(
                    "unknown symmetry kind {other:?} (expected \"cyclic\" or \"revolution\")"
                )))
            }
        };
        let grasp_offset = match doc.grasp_offset {
            Some(o) => GraspOffset(RigidPose::from_wxyz(o.quaternion, o.translation)?),
            None => GraspOffset::default(),
        };
        Ok(ObjectConfig {
            symmetry,
            grasp_offset,
        })
    }

    pub fn to_json(&self) -> String {
        let (kind, order) = match self.symmetry.kind {
            SymmetryKind::Cyclic(n) => ("cyclic", Some(n)),
            SymmetryKind::Revolution => ("revolution", None),
        };
        let a = self.symmetry.axis;
        let t = self.grasp_offset.0.translation;
        let doc = ObjectDocument {
            axis: [a.x, a.y, a.z],
            kind: kind.into(),
            order,
            grasp_offset: Some(OffsetDocument {
                quaternion: self.grasp_offset.0.wxyz(),
                translation: [t.x, t.y, t.z],
            }),
        };
        serde_json::to_string_pretty(&doc).expect("config serializes")
    }
}
