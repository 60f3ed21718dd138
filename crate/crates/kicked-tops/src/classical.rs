//! Classical limit of the kicked coupled tops: two unit spin vectors i and j
//! evolved by one kick of j about the space-fixed z axis (angle beta) followed
//! by precession of both spins about their sum f = i + j (angle alpha |f|).
//!
//! Sign conventions are those induced by the quantum one-period operator
//! acting on kets as precession after kick: the kick is a right-handed
//! rotation about +z by beta, the precession a right-handed rotation about
//! f/|f| by alpha |f|. The Ehrenfest test in the Floquet module pins these
//! against a spin-150 coherent state.
//!
//! F_z = i_z + j_z is conserved, and on the F_z = 0 surface the motion
//! reduces to the section coordinates (delta_fz, delta_phi) =
//! (i_z - j_z, phi_i - phi_j); the mean azimuth is cyclic and dropped.
//! Chaos diagnostics (Lyapunov exponents via a finite-difference tangent map,
//! regular/chaotic grid classification) operate on these section points.

use rayon::prelude::*;

use crate::{Error, Result};

/// Finite-difference step of the tangent map.
const FD_STEP: f64 = 1e-7;
/// Tangent frame is re-orthonormalized every this many steps.
const RENORM_INTERVAL: usize = 10;
/// Below this |f| the precession angle vanishes and the rotation is skipped;
/// the map is analytic there, this only avoids a 0/0 in the axis.
const F_EPS: f64 = 1e-12;

/// Default threshold on the per-step Lyapunov exponent separating chaotic
/// from regular initial conditions.
pub const DEFAULT_CHAOS_THRESHOLD: f64 = 0.05;
/// Default iteration count for Lyapunov estimates used in classification.
pub const DEFAULT_LYAPUNOV_STEPS: usize = 2000;

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

/// Rodrigues rotation of v about the unit axis k by `angle`, right-handed.
fn rotate(v: Vec3, k: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    let kv = cross(k, v);
    let kd = dot(k, v) * (1.0 - c);
    [
        v[0] * c + kv[0] * s + k[0] * kd,
        v[1] * c + kv[1] * s + k[1] * kd,
        v[2] * c + kv[2] * s + k[2] * kd,
    ]
}

/// The two classical unit spins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalSpinPair {
    i_vec: Vec3,
    j_vec: Vec3,
}

impl ClassicalSpinPair {
    /// Both vectors must be unit length within 1e-9.
    pub fn new(i_vec: Vec3, j_vec: Vec3) -> Result<Self> {
        for (v, name) in [(i_vec, "i"), (j_vec, "j")] {
            if !v.iter().all(|x| x.is_finite()) || (norm(v) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "spin vector {name} = {v:?} is not unit length"
                )));
            }
        }
        Ok(ClassicalSpinPair { i_vec, j_vec })
    }

    pub fn i_vec(&self) -> Vec3 {
        self.i_vec
    }

    pub fn j_vec(&self) -> Vec3 {
        self.j_vec
    }

    /// Conserved total z component.
    pub fn f_z(&self) -> f64 {
        self.i_vec[2] + self.j_vec[2]
    }

    pub fn dot_product(&self) -> f64 {
        dot(self.i_vec, self.j_vec)
    }
}

/// Precession strength alpha and kick angle beta, both in radians (alpha per
/// unit |f|).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalMapParams {
    pub alpha: f64,
    pub beta: f64,
}

impl ClassicalMapParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "map parameters must be finite, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(ClassicalMapParams { alpha, beta })
    }
}

/// A point of the F_z = 0 surface of section. `delta_fz` = i_z - j_z in
/// [-2, 2], `delta_phi` = phi_i - phi_j in [0, 2pi).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionPoint {
    pub delta_fz: f64,
    pub delta_phi: f64,
}

impl SectionPoint {
    pub fn new(delta_fz: f64, delta_phi: f64) -> Self {
        SectionPoint {
            delta_fz,
            delta_phi,
        }
    }

    /// The polar difference angle delta_theta = theta_i - theta_j on the
    /// section, where delta_fz = -2 sin(delta_theta / 2).
    pub fn delta_theta(&self) -> f64 {
        -2.0 * (self.delta_fz / 2.0).asin()
    }

    /// Inverse of [`SectionPoint::delta_theta`].
    pub fn from_angles(delta_theta: f64, delta_phi: f64) -> Self {
        SectionPoint {
            delta_fz: -2.0 * (delta_theta / 2.0).sin(),
            delta_phi,
        }
    }
}

/// Rotates j about the z axis by beta; i and j_z are untouched.
pub fn kick_rotate(state: ClassicalSpinPair, beta: f64) -> ClassicalSpinPair {
    let (s, c) = beta.sin_cos();
    let j = state.j_vec;
    ClassicalSpinPair {
        i_vec: state.i_vec,
        j_vec: [j[0] * c - j[1] * s, j[0] * s + j[1] * c, j[2]],
    }
}

/// Rotates both spins about f = i + j by alpha |f|. The |f| -> 0 limit is the
/// identity.
pub fn precess(state: ClassicalSpinPair, alpha: f64) -> ClassicalSpinPair {
    let f = add(state.i_vec, state.j_vec);
    let n = norm(f);
    if n < F_EPS {
        return state;
    }
    let axis = scale(f, 1.0 / n);
    let angle = alpha * n;
    ClassicalSpinPair {
        i_vec: rotate(state.i_vec, axis, angle),
        j_vec: rotate(state.j_vec, axis, angle),
    }
}

/// One driving period: kick, then precession.
pub fn floquet_step(state: ClassicalSpinPair, params: &ClassicalMapParams) -> ClassicalSpinPair {
    precess(kick_rotate(state, params.beta), params.alpha)
}

/// Exact inverse of [`floquet_step`].
pub fn floquet_step_inverse(
    state: ClassicalSpinPair,
    params: &ClassicalMapParams,
) -> ClassicalSpinPair {
    kick_rotate(precess(state, -params.alpha), -params.beta)
}

/// Unique F_z = 0 state with the given section coordinates and mean azimuth
/// zero. Errors when |delta_fz| > 2.
pub fn section_embed(p: SectionPoint) -> Result<ClassicalSpinPair> {
    if !p.delta_fz.is_finite() || p.delta_fz.abs() > 2.0 {
        return Err(Error::OffSection(format!(
            "delta_fz = {} outside [-2, 2]",
            p.delta_fz
        )));
    }
    let iz = p.delta_fz / 2.0;
    let st = (1.0 - iz * iz).max(0.0).sqrt();
    let (s, c) = (p.delta_phi / 2.0).sin_cos();
    Ok(ClassicalSpinPair {
        i_vec: [st * c, st * s, iz],
        j_vec: [st * c, -(st * s), -iz],
    })
}

/// Section coordinates of a state on the F_z = 0 surface (|f_z| < 1e-9
/// required). Poles, where the azimuths degenerate, project to delta_phi = 0.
pub fn section_project(state: &ClassicalSpinPair) -> Result<SectionPoint> {
    let fz = state.f_z();
    if fz.abs() >= 1e-9 {
        return Err(Error::OffSection(format!(
            "f_z = {fz:e} is not zero within 1e-9"
        )));
    }
    let i = state.i_vec;
    let j = state.j_vec;
    let phi = f64::atan2(i[1], i[0]) - f64::atan2(j[1], j[0]);
    Ok(SectionPoint {
        delta_fz: i[2] - j[2],
        delta_phi: phi.rem_euclid(std::f64::consts::TAU),
    })
}

/// Stroboscopic orbits on the section: for each initial point, `n_steps`
/// points starting with the initial condition itself.
pub fn poincare_section(
    params: &ClassicalMapParams,
    initial_points: &[SectionPoint],
    n_steps: usize,
) -> Result<Vec<Vec<SectionPoint>>> {
    if n_steps < 1 {
        return Err(Error::InvalidParameter(
            "poincare_section needs n_steps >= 1".into(),
        ));
    }
    initial_points
        .par_iter()
        .map(|&p| {
            let mut state = section_embed(p)?;
            let mut orbit = Vec::with_capacity(n_steps);
            orbit.push(section_project(&state)?);
            for _ in 1..n_steps {
                state = floquet_step(state, params);
                orbit.push(section_project(&state)?);
            }
            Ok(orbit)
        })
        .collect()
}

/// Fraction of an n_bins x n_bins partition of the section (uniform in
/// delta_fz/2 and delta_phi) visited by the given points. Chaotic orbits fill
/// the section and approach 1; regular orbits stay on curves and stay small.
pub fn section_occupancy(points: &[SectionPoint], n_bins: usize) -> f64 {
    let mut hit = vec![false; n_bins * n_bins];
    for p in points {
        let u = ((p.delta_fz / 2.0 + 1.0) / 2.0).clamp(0.0, 1.0);
        let v = (p.delta_phi / std::f64::consts::TAU).rem_euclid(1.0);
        let a = ((u * n_bins as f64) as usize).min(n_bins - 1);
        let b = ((v * n_bins as f64) as usize).min(n_bins - 1);
        hit[a * n_bins + b] = true;
    }
    hit.iter().filter(|&&x| x).count() as f64 / (n_bins * n_bins) as f64
}

/// A base state plus deviation 6-vectors (delta_i, delta_j) constrained to
/// the tangent space of the product of spheres.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub base: ClassicalSpinPair,
    pub deviations: Vec<[f64; 6]>,
}

impl TangentFrame {
    /// Deterministic orthonormal frame of all four tangent directions.
    pub fn full_frame(base: ClassicalSpinPair) -> Self {
        let (i1, i2) = sphere_tangent_basis(base.i_vec);
        let (j1, j2) = sphere_tangent_basis(base.j_vec);
        let z = [0.0; 3];
        let pack = |a: Vec3, b: Vec3| [a[0], a[1], a[2], b[0], b[1], b[2]];
        TangentFrame {
            base,
            deviations: vec![pack(i1, z), pack(i2, z), pack(z, j1), pack(z, j2)],
        }
    }

    /// max over deviations of the component parallel to the base spins.
    pub fn tangency_residual(&self) -> f64 {
        self.deviations.iter().fold(0.0f64, |acc, d| {
            let di = [d[0], d[1], d[2]];
            let dj = [d[3], d[4], d[5]];
            acc.max(dot(di, self.base.i_vec).abs())
                .max(dot(dj, self.base.j_vec).abs())
        })
    }
}

/// Orthonormal pair spanning the tangent plane of the unit sphere at v.
fn sphere_tangent_basis(v: Vec3) -> (Vec3, Vec3) {
    let seed = if v[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let e1 = normalize(cross(seed, v));
    let e2 = cross(v, e1);
    (e1, e2)
}

fn tangent_norm(d: &[f64; 6]) -> f64 {
    d.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Pushes one unit tangent direction through the finite-difference tangent
/// map at `state`, projecting the image onto the tangent space at `next`.
fn fd_tangent_image(
    state: ClassicalSpinPair,
    next: ClassicalSpinPair,
    dir: &[f64; 6],
    params: &ClassicalMapParams,
) -> [f64; 6] {
    let perturb = |sign: f64| -> ClassicalSpinPair {
        let i = normalize(add(state.i_vec, scale([dir[0], dir[1], dir[2]], sign * FD_STEP)));
        let j = normalize(add(state.j_vec, scale([dir[3], dir[4], dir[5]], sign * FD_STEP)));
        ClassicalSpinPair { i_vec: i, j_vec: j }
    };
    let plus = floquet_step(perturb(1.0), params);
    let minus = floquet_step(perturb(-1.0), params);
    let mut di = scale(sub(plus.i_vec, minus.i_vec), 0.5 / FD_STEP);
    let mut dj = scale(sub(plus.j_vec, minus.j_vec), 0.5 / FD_STEP);
    di = sub(di, scale(next.i_vec, dot(di, next.i_vec)));
    dj = sub(dj, scale(next.j_vec, dot(dj, next.j_vec)));
    [di[0], di[1], di[2], dj[0], dj[1], dj[2]]
}

/// Modified Gram-Schmidt; returns the pre-normalization norm of the first
/// vector (the growth factor of the leading direction).
fn orthonormalize(frame: &mut [[f64; 6]]) -> f64 {
    let mut first = 0.0;
    for k in 0..frame.len() {
        let (done, rest) = frame.split_at_mut(k);
        let v = &mut rest[0];
        for u in done.iter() {
            let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= proj * b;
            }
        }
        let n = tangent_norm(v);
        if k == 0 {
            first = n;
        }
        for a in v.iter_mut() {
            *a /= n;
        }
    }
    first
}

/// Largest Lyapunov exponent (per step) at a section initial condition,
/// estimated by iterating the finite-difference tangent map along the orbit
/// with periodic re-orthonormalization. Deterministic for fixed inputs.
pub fn lyapunov_exponent(
    params: &ClassicalMapParams,
    ic: SectionPoint,
    n_steps: usize,
) -> Result<f64> {
    if n_steps < 100 {
        return Err(Error::InvalidParameter(format!(
            "lyapunov_exponent needs n_steps >= 100, got {n_steps}"
        )));
    }
    let mut state = section_embed(ic)?;
    let mut frame = TangentFrame::full_frame(state).deviations;
    let mut norms = [1.0f64; 4];
    let mut log_sum = 0.0;
    let mut since_renorm = 0usize;

    for _ in 0..n_steps {
        let next = floquet_step(state, params);
        for (dev, n) in frame.iter_mut().zip(norms.iter_mut()) {
            // The direction is kept unit length for the finite difference;
            // growth accumulates in the scalar norm.
            let image = fd_tangent_image(state, next, dev, params);
            let g = tangent_norm(&image);
            *n *= g;
            *dev = std::array::from_fn(|c| image[c] / g);
        }
        state = next;
        since_renorm += 1;
        if since_renorm == RENORM_INTERVAL {
            // Fold the scalar norms back in so Gram-Schmidt sees true
            // magnitudes, then restart from unit vectors.
            for (dev, n) in frame.iter_mut().zip(norms.iter_mut()) {
                for c in dev.iter_mut() {
                    *c *= *n;
                }
                *n = 1.0;
            }
            log_sum += orthonormalize(&mut frame).ln();
            since_renorm = 0;
        }
    }
    if since_renorm > 0 {
        for (dev, n) in frame.iter_mut().zip(norms.iter_mut()) {
            for c in dev.iter_mut() {
                *c *= *n;
            }
        }
        log_sum += orthonormalize(&mut frame).ln();
    }
    Ok(log_sum / n_steps as f64)
}

/// Lyapunov exponent and chaotic/regular label of one grid node.
#[derive(Clone, Copy, Debug)]
pub struct PointClass {
    pub lyapunov: f64,
    pub chaotic: bool,
}

/// Labels every node of a section grid by thresholding the Lyapunov
/// exponent. Nodes are independent; evaluation is parallel and the output
/// order matches the input order.
pub fn classify_grid(
    params: &ClassicalMapParams,
    points: &[SectionPoint],
    threshold: f64,
    n_steps: usize,
) -> Result<Vec<PointClass>> {
    points
        .par_iter()
        .map(|&p| {
            let lyapunov = lyapunov_exponent(params, p, n_steps)?;
            Ok(PointClass {
                lyapunov,
                chaotic: lyapunov > threshold,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::{PI, TAU};

    fn random_state(rng: &mut impl Rng) -> ClassicalSpinPair {
        let sample = |rng: &mut dyn RngCore| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..TAU);
            let s = (1.0f64 - z * z).sqrt();
            [s * phi.cos(), s * phi.sin(), z]
        };
        ClassicalSpinPair::new(sample(rng), sample(rng)).unwrap()
    }

    #[test]
    fn kick_leaves_axis_aligned_spin_and_identity_angle() {
        let s = ClassicalSpinPair::new([0.6, 0.0, 0.8], [0.0, 0.0, 1.0]).unwrap();
        let k = kick_rotate(s, PI / 2.0);
        assert_eq!(k.j_vec(), [0.0, 0.0, 1.0]);
        assert_eq!(k.i_vec(), s.i_vec());

        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let s = random_state(&mut rng);
        assert_eq!(kick_rotate(s, 0.0), s);
    }

    #[test]
    fn kick_convention_is_right_handed_about_plus_z() {
        let s = ClassicalSpinPair::new([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]).unwrap();
        let k = kick_rotate(s, PI / 2.0);
        assert_abs_diff_eq!(k.j_vec()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.j_vec()[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.j_vec()[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn precess_fixes_parallel_spins_and_zero_f() {
        let s = ClassicalSpinPair::new([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        let p = precess(s, 6.0);
        for c in 0..3 {
            assert_abs_diff_eq!(p.i_vec()[c], s.i_vec()[c], epsilon = 1e-15);
            assert_abs_diff_eq!(p.j_vec()[c], s.j_vec()[c], epsilon = 1e-15);
        }

        let s = ClassicalSpinPair::new([0.0, 0.0, 1.0], [0.0, 0.0, -1.0]).unwrap();
        let p = precess(s, 6.0);
        assert_eq!(p, s);
    }

    #[test]
    fn pole_is_an_exact_fixed_point() {
        let s = ClassicalSpinPair::new([0.0, 0.0, 1.0], [0.0, 0.0, -1.0]).unwrap();
        let params = ClassicalMapParams::new(6.0, PI / 2.0).unwrap();
        let mut t = s;
        for _ in 0..100 {
            t = floquet_step(t, &params);
            assert_eq!(t, s, "pole must be bit-exactly invariant");
        }
    }

    #[test]
    fn precess_conserves_geometry() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = random_state(&mut rng);
            let p = precess(s, 6.0);
            assert_abs_diff_eq!(norm(p.i_vec()), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(norm(p.j_vec()), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p.f_z(), s.f_z(), epsilon = 1e-12);
            assert_abs_diff_eq!(p.dot_product(), s.dot_product(), epsilon = 1e-12);
        }
    }

    #[test]
    fn kick_conserves_jz() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..50 {
            let s = random_state(&mut rng);
            let k = kick_rotate(s, 2.31);
            assert_eq!(k.j_vec()[2], s.j_vec()[2]);
            assert_abs_diff_eq!(norm(k.j_vec()), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn long_runs_conserve_norms_and_fz() {
        let params = ClassicalMapParams::new(6.0, PI / 2.0).unwrap();
        let mut s = section_embed(SectionPoint::new(0.37, 1.1)).unwrap();
        let fz0 = s.f_z();
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            s = floquet_step(s, &params);
            worst = worst
                .max((norm(s.i_vec()) - 1.0).abs())
                .max((norm(s.j_vec()) - 1.0).abs())
                .max((s.f_z() - fz0).abs());
        }
        assert!(worst < 1e-10, "drift {worst:.3e}");
    }

    #[test]
    fn forward_then_inverse_returns_start() {
        // Full round trip on a regular orbit; on chaotic orbits roundoff is
        // amplified by e^(2 lambda n), so there the inverse is checked one
        // step at a time instead.
        let params = ClassicalMapParams::new(0.5, PI / 2.0).unwrap();
        let start = section_embed(SectionPoint::new(-0.8, 2.9)).unwrap();
        let mut s = start;
        for _ in 0..1000 {
            s = floquet_step(s, &params);
        }
        for _ in 0..1000 {
            s = floquet_step_inverse(s, &params);
        }
        for c in 0..3 {
            assert_abs_diff_eq!(s.i_vec()[c], start.i_vec()[c], epsilon = 1e-10);
            assert_abs_diff_eq!(s.j_vec()[c], start.j_vec()[c], epsilon = 1e-10);
        }

        let params = ClassicalMapParams::new(6.0, PI / 2.0).unwrap();
        let mut s = start;
        for _ in 0..1000 {
            let forward = floquet_step(s, &params);
            let back = floquet_step_inverse(forward, &params);
            for c in 0..3 {
                assert_abs_diff_eq!(back.i_vec()[c], s.i_vec()[c], epsilon = 1e-12);
                assert_abs_diff_eq!(back.j_vec()[c], s.j_vec()[c], epsilon = 1e-12);
            }
            s = forward;
        }
    }

    #[test]
    fn section_embedding_geometry() {
        let s = section_embed(SectionPoint::new(2.0, 1.234)).unwrap();
        assert_eq!(s.i_vec()[2], 1.0);
        assert_eq!(s.j_vec()[2], -1.0);
        assert_abs_diff_eq!(norm(s.i_vec()), 1.0, epsilon = 1e-15);

        let s = section_embed(SectionPoint::new(0.0, 0.0)).unwrap();
        for c in 0..3 {
            assert_abs_diff_eq!(s.i_vec()[c], [1.0, 0.0, 0.0][c], epsilon = 1e-15);
            assert_abs_diff_eq!(s.j_vec()[c], [1.0, 0.0, 0.0][c], epsilon = 1e-15);
        }

        assert!(section_embed(SectionPoint::new(2.5, 0.0)).is_err());
        let tilted = ClassicalSpinPair::new([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]).unwrap();
        assert!(section_project(&tilted).is_err());
    }

    #[test]
    fn measure_is_preserved_in_canonical_coordinates() {
        // Chart (i_z, phi_i, j_z, phi_j); the map's Jacobian determinant must
        // be 1. Finite differences at seeded random points away from poles.
        let embed = |q: [f64; 4]| -> ClassicalSpinPair {
            let si = (1.0 - q[0] * q[0]).sqrt();
            let sj = (1.0 - q[2] * q[2]).sqrt();
            ClassicalSpinPair {
                i_vec: [si * q[1].cos(), si * q[1].sin(), q[0]],
                j_vec: [sj * q[3].cos(), sj * q[3].sin(), q[2]],
            }
        };
        let chart = |s: &ClassicalSpinPair| -> [f64; 4] {
            [
                s.i_vec()[2],
                f64::atan2(s.i_vec()[1], s.i_vec()[0]),
                s.j_vec()[2],
                f64::atan2(s.j_vec()[1], s.j_vec()[0]),
            ]
        };
        let det4 = |m: [[f64; 4]; 4]| -> f64 {
            // Gaussian elimination with partial pivoting.
            let mut a = m;
            let mut det = 1.0;
            for col in 0..4 {
                let p = (col..4).max_by(|&r, &s| {
                    a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap()
                }).unwrap();
                if p != col {
                    a.swap(p, col);
                    det = -det;
                }
                det *= a[col][col];
                let pivot = a[col];
                for row in a.iter_mut().skip(col + 1) {
                    let f = row[col] / pivot[col];
                    for (x, p) in row.iter_mut().zip(&pivot).skip(col) {
                        *x -= f * p;
                    }
                }
            }
            det
        };

        let mut rng = ChaCha12Rng::seed_from_u64(20);
        for &(alpha, beta) in &[(6.0, PI / 2.0), (1.5, PI / 2.0), (0.5, 1.0)] {
            let params = ClassicalMapParams::new(alpha, beta).unwrap();
            for _ in 0..34 {
                let q0 = [
                    rng.random_range(-0.9..0.9),
                    rng.random_range(0.0..TAU),
                    rng.random_range(-0.9..0.9),
                    rng.random_range(0.0..TAU),
                ];
                let h = 1e-6;
                let mut jac = [[0.0; 4]; 4];
                for k in 0..4 {
                    let mut qp = q0;
                    let mut qm = q0;
                    qp[k] += h;
                    qm[k] -= h;
                    let fp = chart(&floquet_step(embed(qp), &params));
                    let fm = chart(&floquet_step(embed(qm), &params));
                    for r in 0..4 {
                        let mut diff = fp[r] - fm[r];
                        // Azimuth rows live on the circle.
                        if r == 1 || r == 3 {
                            diff = (diff + PI).rem_euclid(TAU) - PI;
                        }
                        jac[r][k] = diff / (2.0 * h);
                    }
                }
                let det = det4(jac);
                assert!(
                    (det.abs() - 1.0).abs() < 1e-6,
                    "({alpha}, {beta}): |det| = {det}"
                );
            }
        }
    }

    #[test]
    fn lyapunov_regimes() {
        let ic = SectionPoint::new(0.0, PI / 3.0);
        let integrable = ClassicalMapParams::new(0.0, PI / 2.0).unwrap();
        let l0 = lyapunov_exponent(&integrable, ic, 2000).unwrap();
        assert!(l0.abs() < 0.01, "integrable lambda = {l0}");

        let regular = ClassicalMapParams::new(0.5, PI / 2.0).unwrap();
        let lr = lyapunov_exponent(&regular, SectionPoint::new(0.42, 2.0), 2000).unwrap();
        assert!(lr < 0.02, "regular lambda = {lr}");

        let chaotic = ClassicalMapParams::new(6.0, PI / 2.0).unwrap();
        let lc = lyapunov_exponent(&chaotic, ic, 2000).unwrap();
        assert!(lc > 0.3, "chaotic lambda = {lc}");

        assert!(lyapunov_exponent(&chaotic, ic, 50).is_err());
    }

    /// Log-divergence slope of two nearby trajectories, the independent
    /// estimator for the tangent-map result.
    fn two_trajectory_lyapunov(
        params: &ClassicalMapParams,
        ic: SectionPoint,
        n_steps: usize,
    ) -> f64 {
        let delta = 1e-9;
        let mut a = section_embed(ic).unwrap();
        let mut b = a;
        // Deterministic initial offset within the tangent space.
        let (e1, _) = sphere_tangent_basis(a.i_vec());
        b.i_vec = normalize(add(b.i_vec, scale(e1, delta)));
        let mut log_sum = 0.0;
        for _ in 0..n_steps {
            a = floquet_step(a, params);
            b = floquet_step(b, params);
            let d = [
                sub(b.i_vec, a.i_vec),
                sub(b.j_vec, a.j_vec),
            ];
            let dist = (dot(d[0], d[0]) + dot(d[1], d[1])).sqrt();
            log_sum += (dist / delta).ln();
            // Pull b back to distance delta along the current offset.
            let f = delta / dist;
            b.i_vec = normalize(add(a.i_vec, scale(d[0], f)));
            b.j_vec = normalize(add(a.j_vec, scale(d[1], f)));
        }
        log_sum / n_steps as f64
    }

    #[test]
    fn tangent_map_agrees_with_two_trajectory_oracle() {
        let params = ClassicalMapParams::new(6.0, PI / 2.0).unwrap();
        for ic in [SectionPoint::new(0.0, PI / 3.0), SectionPoint::new(0.7, 4.0)] {
            let tangent = lyapunov_exponent(&params, ic, 4000).unwrap();
            let pair = two_trajectory_lyapunov(&params, ic, 4000);
            let rel = (tangent - pair).abs() / pair.abs();
            assert!(
                rel < 0.10,
                "tangent {tangent:.4} vs two-trajectory {pair:.4} (rel {rel:.3})"
            );
        }
    }

    #[test]
    fn classification_separates_the_three_regimes() {
        let mut points = Vec::new();
        let n = 14;
        for a in 0..n {
            for b in 0..n {
                let v = -1.0 + 2.0 * (a as f64 + 0.5) / n as f64;
                let phi = TAU * (b as f64 + 0.5) / n as f64;
                points.push(SectionPoint::new(2.0 * v, phi));
            }
        }
        let frac = |alpha: f64| -> f64 {
            let params = ClassicalMapParams::new(alpha, PI / 2.0).unwrap();
            let labels =
                classify_grid(&params, &points, DEFAULT_CHAOS_THRESHOLD, 800).unwrap();
            labels.iter().filter(|c| c.chaotic).count() as f64 / labels.len() as f64
        };
        let (f_reg, f_mix, f_cha) = (frac(0.5), frac(1.5), frac(6.0));
        assert!(f_reg <= 0.10, "alpha=1/2 chaotic fraction {f_reg}");
        assert!(
            f_mix > 0.15 && f_mix < 0.85,
            "alpha=3/2 chaotic fraction {f_mix}"
        );
        assert!(f_cha >= 0.90, "alpha=6 chaotic fraction {f_cha}");
    }

    #[test]
    fn chaotic_orbit_fills_the_section_and_regular_orbit_does_not() {
        let chaotic = ClassicalMapParams::new(6.0, PI / 2.0).unwrap();
        let orbit = &poincare_section(&chaotic, &[SectionPoint::new(0.0, PI / 3.0)], 100_000)
            .unwrap()[0];
        let occ = section_occupancy(orbit, 20);
        assert!(occ > 0.9, "chaotic occupancy {occ}");

        let regular = ClassicalMapParams::new(0.5, PI / 2.0).unwrap();
        let orbit =
            &poincare_section(&regular, &[SectionPoint::new(0.42, 2.0)], 10_000).unwrap()[0];
        let occ = section_occupancy(orbit, 20);
        assert!(occ < 0.2, "regular occupancy {occ}");

        let fixed = poincare_section(&chaotic, &[SectionPoint::new(2.0, 0.0)], 100).unwrap();
        assert!(fixed[0]
            .iter()
            .all(|p| p.delta_fz == 2.0 && p.delta_phi == 0.0));
    }

    #[test]
    fn tangent_frame_is_tangent() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..20 {
            let frame = TangentFrame::full_frame(random_state(&mut rng));
            assert!(frame.tangency_residual() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn section_roundtrip(v in -1.0f64..1.0, phi in 0.0f64..TAU) {
            let p = SectionPoint::new(2.0 * v, phi);
            let q = section_project(&section_embed(p).unwrap()).unwrap();
            prop_assert!((q.delta_fz - p.delta_fz).abs() < 1e-12);
            let dphi = (q.delta_phi - p.delta_phi + PI).rem_euclid(TAU) - PI;
            prop_assert!(dphi.abs() < 1e-12);
        }

        #[test]
        fn delta_theta_roundtrip(v in -1.0f64..1.0, phi in 0.0f64..TAU) {
            let p = SectionPoint::new(2.0 * v, phi);
            let q = SectionPoint::from_angles(p.delta_theta(), p.delta_phi);
            prop_assert!((q.delta_fz - p.delta_fz).abs() < 1e-12);
        }

        #[test]
        fn step_conserves_invariants(
            v in -1.0f64..1.0,
            phi in 0.0f64..TAU,
            alpha in -8.0f64..8.0,
            beta in -8.0f64..8.0,
        ) {
            let params = ClassicalMapParams::new(alpha, beta).unwrap();
            let s0 = section_embed(SectionPoint::new(2.0 * v, phi)).unwrap();
            let mut s = s0;
            for _ in 0..50 {
                s = floquet_step(s, &params);
            }
            prop_assert!((norm(s.i_vec()) - 1.0).abs() < 1e-12);
            prop_assert!((norm(s.j_vec()) - 1.0).abs() < 1e-12);
            prop_assert!((s.f_z() - s0.f_z()).abs() < 1e-11);
        }
    }
}
