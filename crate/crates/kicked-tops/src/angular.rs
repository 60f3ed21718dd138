//! Angular-momentum algebra for fixed-F_z blocks of two coupled spins.
//!
//! The dynamics conserves F_z = I_z + J_z, so everything happens inside the
//! block spanned by the uncoupled product states |I, M_F - m_J> |J, m_J>,
//! indexed here by m_J alone in ascending order. The coupled basis |F, M_F>
//! spans the same block with F running from max(|I-J|, |M_F|) to I+J in
//! ascending order. The change of basis is the real orthogonal matrix of
//! Clebsch-Gordan coefficients restricted to the block.
//!
//! Coefficients are needed up to spin ~150, far beyond where factorial
//! formulas survive in double precision. Each coupled row is instead computed
//! as the eigenvector of the exactly known tridiagonal representation of F^2
//! in the uncoupled basis, by a two-sided three-term recursion: sweeps seeded
//! at both ends of the m_J range grow into the classically allowed region
//! (their numerically stable direction), are spliced where both carry full
//! weight, normalized, and sign-fixed to the Condon-Shortley convention. The
//! anchor entry (lowest m_J, i.e. highest m_I) reduces to a single positive
//! term of the Racah sum, so fixing its sign positive reproduces the standard
//! convention for every row.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Spin projection or magnitude quantum number, stored as twice its value so
/// half-integers stay exact integers.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);

    /// Builds from twice the value: `from_doubled(3)` is 3/2.
    pub fn from_doubled(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub fn from_int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    /// Accepts only exact integers and half-integers.
    pub fn from_f64(x: f64) -> Result<Self> {
        let twice = (2.0 * x).round();
        if !x.is_finite() || (twice - 2.0 * x).abs() > 1e-9 || twice.abs() > i32::MAX as f64 {
            return Err(Error::InvalidQuantumNumbers(format!(
                "{x} is not an integer or half-integer"
            )));
        }
        Ok(HalfInt(twice as i32))
    }

    pub fn doubled(self) -> i32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// Values self, self+1, ..., hi (empty when hi < self).
    pub fn ladder_to(self, hi: HalfInt) -> impl Iterator<Item = HalfInt> {
        (self.0..=hi.0).step_by(2).map(HalfInt)
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for HalfInt {
    type Err = Error;

    /// Parses "150", "3/2", "-1/2", or a decimal like "0.5".
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(n) = s.parse::<i32>() {
            return Ok(HalfInt::from_int(n));
        }
        if let Some((num, den)) = s.split_once('/') {
            let num: i32 = num.trim().parse().map_err(|_| bad_halfint(s))?;
            let den: i32 = den.trim().parse().map_err(|_| bad_halfint(s))?;
            return match den {
                1 => Ok(HalfInt::from_int(num)),
                2 => Ok(HalfInt::from_doubled(num)),
                _ => Err(bad_halfint(s)),
            };
        }
        let x: f64 = s.parse().map_err(|_| bad_halfint(s))?;
        HalfInt::from_f64(x)
    }
}

fn bad_halfint(s: &str) -> Error {
    Error::InvalidQuantumNumbers(format!(
        "cannot parse {s:?} as an integer or half-integer (use forms like 150, 3/2, 0.5)"
    ))
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        HalfInt::from_f64(x).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Quantum numbers of one fixed-F_z block: the two spin magnitudes and the
/// conserved total projection M_F.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SubspaceSpec {
    spin_i: HalfInt,
    spin_j: HalfInt,
    m_f: HalfInt,
}

impl SubspaceSpec {
    pub fn new(spin_i: HalfInt, spin_j: HalfInt, m_f: HalfInt) -> Result<Self> {
        if spin_i.doubled() < 0 || spin_j.doubled() < 0 {
            return Err(Error::InvalidQuantumNumbers(format!(
                "spin magnitudes must be nonnegative, got ({spin_i}, {spin_j})"
            )));
        }
        if m_f.abs() > spin_i + spin_j {
            return Err(Error::InvalidQuantumNumbers(format!(
                "|M_F| = |{m_f}| exceeds I + J = {}",
                spin_i + spin_j
            )));
        }
        // m_I + m_J lives on the same half-integer ladder as I + J.
        if (m_f.doubled() - (spin_i + spin_j).doubled()).rem_euclid(2) != 0 {
            return Err(Error::InvalidQuantumNumbers(format!(
                "M_F = {m_f} is incompatible with the (I, J) = ({spin_i}, {spin_j}) ladder"
            )));
        }
        Ok(SubspaceSpec { spin_i, spin_j, m_f })
    }

    /// The block studied throughout: equal spins, M_F = 0.
    pub fn symmetric(spin: HalfInt) -> Result<Self> {
        SubspaceSpec::new(spin, spin, HalfInt::ZERO)
    }

    pub fn spin_i(&self) -> HalfInt {
        self.spin_i
    }

    pub fn spin_j(&self) -> HalfInt {
        self.spin_j
    }

    pub fn m_f(&self) -> HalfInt {
        self.m_f
    }

    pub fn is_symmetric_zero_block(&self) -> bool {
        self.spin_i == self.spin_j && self.m_f == HalfInt::ZERO
    }

    pub fn m_j_min(&self) -> HalfInt {
        std::cmp::max(-self.spin_j, self.m_f - self.spin_i)
    }

    pub fn m_j_max(&self) -> HalfInt {
        std::cmp::min(self.spin_j, self.m_f + self.spin_i)
    }

    /// Block dimension; 2J+1 for the symmetric M_F = 0 block.
    pub fn dim(&self) -> usize {
        ((self.m_j_max() - self.m_j_min()).doubled() / 2 + 1) as usize
    }

    /// Uncoupled index order: m_J ascending.
    pub fn m_j_values(&self) -> Vec<HalfInt> {
        self.m_j_min().ladder_to(self.m_j_max()).collect()
    }

    pub fn f_min(&self) -> HalfInt {
        std::cmp::max((self.spin_i - self.spin_j).abs(), self.m_f.abs())
    }

    pub fn f_max(&self) -> HalfInt {
        self.spin_i + self.spin_j
    }

    /// Coupled index order: F ascending.
    pub fn f_values(&self) -> Vec<HalfInt> {
        self.f_min().ladder_to(self.f_max()).collect()
    }

    pub fn index_of_m_j(&self, m_j: HalfInt) -> Option<usize> {
        let lo = self.m_j_min();
        if m_j < lo || m_j > self.m_j_max() || (m_j.doubled() - lo.doubled()) % 2 != 0 {
            return None;
        }
        Some(((m_j - lo).doubled() / 2) as usize)
    }
}

/// j(j+1) as an exact double.
fn casimir(j: HalfInt) -> f64 {
    let t = j.doubled() as i64;
    (t * (t + 2)) as f64 / 4.0
}

/// Product of two projections, exact.
fn proj_product(a: HalfInt, b: HalfInt) -> f64 {
    (a.doubled() as i64 * b.doubled() as i64) as f64 / 4.0
}

/// Sub/superdiagonal of F^2 in the uncoupled basis: the matrix element
/// coupling m_J and m_J + 1, from I_-J_+ acting on |I, M-m_J>|J, m_J>.
fn f2_offdiag(spec: &SubspaceSpec, m_j: HalfInt) -> f64 {
    let one = HalfInt::from_int(1);
    let m_i = spec.m_f - m_j;
    let a = casimir(spec.spin_i) - proj_product(m_i, m_i - one);
    let b = casimir(spec.spin_j) - proj_product(m_j, m_j + one);
    (a * b).sqrt()
}

/// Diagonal of F^2 in the uncoupled basis at m_J.
fn f2_diag(spec: &SubspaceSpec, m_j: HalfInt) -> f64 {
    casimir(spec.spin_i) + casimir(spec.spin_j) + 2.0 * proj_product(spec.m_f - m_j, m_j)
}

/// One coupled row <F, M_F | . > over the block's uncoupled basis, m_J
/// ascending, unit norm, Condon-Shortley sign.
fn cg_row(spec: &SubspaceSpec, f: HalfInt) -> Vec<f64> {
    let ms = spec.m_j_values();
    let d = ms.len();
    if d == 1 {
        return vec![1.0];
    }
    let lambda = casimir(f);
    let diag: Vec<f64> = ms.iter().map(|&m| f2_diag(spec, m)).collect();
    let off: Vec<f64> = ms[..d - 1].iter().map(|&m| f2_offdiag(spec, m)).collect();

    // Eigenvector recursion of the tridiagonal:
    //   off[k-1] v[k-1] + (diag[k] - lambda) v[k] + off[k] v[k+1] = 0.
    // Each sweep is stable while |v| grows; values past its own peak are
    // discarded at the splice.
    const HUGE: f64 = 1e250;

    let mut down = vec![0.0; d];
    down[d - 1] = 1.0;
    down[d - 2] = (lambda - diag[d - 1]) / off[d - 2];
    for k in (0..d - 2).rev() {
        down[k] = ((lambda - diag[k + 1]) * down[k + 1] - off[k + 1] * down[k + 2]) / off[k];
        if down[k].abs() > HUGE {
            for x in down[k..].iter_mut() {
                *x /= HUGE;
            }
        }
    }

    let mut up = vec![0.0; d];
    up[0] = 1.0;
    up[1] = (lambda - diag[0]) / off[0];
    for k in 2..d {
        up[k] = ((lambda - diag[k - 1]) * up[k - 1] - off[k - 2] * up[k - 2]) / off[k - 1];
        if up[k].abs() > HUGE {
            for x in up[..=k].iter_mut() {
                *x /= HUGE;
            }
        }
    }

    // Splice where both sweeps carry significant weight.
    let dmax = down.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let umax = up.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut s = 0;
    let mut best = -1.0;
    for k in 0..d {
        let q = (down[k].abs() / dmax).min(up[k].abs() / umax);
        if q > best {
            best = q;
            s = k;
        }
    }

    let scale = down[s] / up[s];
    let mut v: Vec<f64> = (0..d)
        .map(|k| if k <= s { up[k] * scale } else { down[k] })
        .collect();

    // The sign of the anchor entry v[0] equals the sign of `scale` before any
    // normalization, which survives even if v[0] itself underflows.
    let flip = scale < 0.0;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sgn = if flip { -1.0 } else { 1.0 };
    for x in v.iter_mut() {
        *x *= sgn / norm;
    }
    v
}

/// Clebsch-Gordan coefficient <F, M | I, m_I; J, m_J> in the Condon-Shortley
/// convention.
///
/// Selection-rule violations (M != m_I + m_J, F outside the triangle range or
/// off its ladder, |M| > F) return exactly 0. Internally inconsistent quantum
/// numbers (negative spins, projections off their spin's ladder) are errors.
pub fn clebsch_gordan(
    spin_i: HalfInt,
    m_i: HalfInt,
    spin_j: HalfInt,
    m_j: HalfInt,
    f: HalfInt,
    m: HalfInt,
) -> Result<f64> {
    for (spin, proj, name) in [(spin_i, m_i, "m_I"), (spin_j, m_j, "m_J"), (f, m, "M")] {
        if spin.doubled() < 0 {
            return Err(Error::InvalidQuantumNumbers(format!(
                "negative spin magnitude {spin}"
            )));
        }
        if proj.abs() > spin || (proj.doubled() - spin.doubled()).rem_euclid(2) != 0 {
            return Err(Error::InvalidQuantumNumbers(format!(
                "projection {name} = {proj} is not on the ladder of spin {spin}"
            )));
        }
    }
    if m != m_i + m_j {
        return Ok(0.0);
    }
    if f < (spin_i - spin_j).abs()
        || f > spin_i + spin_j
        || (f.doubled() - (spin_i + spin_j).doubled()).rem_euclid(2) != 0
    {
        return Ok(0.0);
    }
    let spec = SubspaceSpec::new(spin_i, spin_j, m)?;
    let idx = spec
        .index_of_m_j(m_j)
        .expect("projection checked against its ladder");
    Ok(cg_row(&spec, f)[idx])
}

/// Orthogonal transform between the uncoupled and coupled bases of one block.
///
/// Row index: F ascending over [`SubspaceSpec::f_values`]. Column index: m_J
/// ascending over [`SubspaceSpec::m_j_values`]. Rows are unit vectors, the
/// matrix is orthogonal, and the highest-m_I entry of each row is positive
/// (Condon-Shortley).
#[derive(Clone, Debug)]
pub struct CGBlock {
    spec: SubspaceSpec,
    f_values: Vec<HalfInt>,
    matrix: Array2<f64>,
}

impl CGBlock {
    pub fn spec(&self) -> &SubspaceSpec {
        &self.spec
    }

    pub fn f_values(&self) -> &[HalfInt] {
        &self.f_values
    }

    /// Rows F, columns m_J.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// max |B B^T - 1| over both orthogonality senses.
    pub fn orthogonality_residual(&self) -> f64 {
        let b = &self.matrix;
        let d = b.nrows();
        let eye = Array2::<f64>::eye(d);
        let r1 = b.dot(&b.t()) - &eye;
        let r2 = b.t().dot(b) - &eye;
        r1.iter()
            .chain(r2.iter())
            .fold(0.0f64, |a, x| a.max(x.abs()))
    }
}

/// Builds the full coupled/uncoupled transform of a block.
pub fn cg_block(spec: &SubspaceSpec) -> CGBlock {
    let f_values = spec.f_values();
    let d = spec.dim();
    debug_assert_eq!(f_values.len(), d, "block F count must equal its dimension");
    let mut matrix = Array2::<f64>::zeros((d, d));
    for (r, &f) in f_values.iter().enumerate() {
        let row = cg_row(spec, f);
        for (c, x) in row.into_iter().enumerate() {
            matrix[(r, c)] = x;
        }
    }
    CGBlock {
        spec: *spec,
        f_values,
        matrix,
    }
}

/// Eigenvalues F(F+1) of the total-spin Casimir, aligned with
/// [`SubspaceSpec::f_values`] (the coupled basis order).
pub fn op_f_squared(spec: &SubspaceSpec) -> Array1<f64> {
    spec.f_values().iter().map(|&f| casimir(f)).collect()
}

/// Eigenvalues m_J of J_z, aligned with [`SubspaceSpec::m_j_values`] (the
/// uncoupled basis order).
pub fn op_j_z(spec: &SubspaceSpec) -> Array1<f64> {
    spec.m_j_values().iter().map(|&m| m.as_f64()).collect()
}

const CG_CACHE_MAGIC: &[u8; 4] = b"KTCG";
const CG_CACHE_VERSION: u32 = 1;

/// Like [`cg_block`], backed by a binary file cache under `dir` when given.
/// Cache hits are bit-identical to recomputation; unreadable or mismatched
/// cache files are ignored and rewritten.
pub fn cg_block_cached(spec: &SubspaceSpec, dir: Option<&Path>) -> CGBlock {
    let Some(dir) = dir else {
        return cg_block(spec);
    };
    let path = dir.join(format!(
        "cg_{}_{}_{}.bin",
        spec.spin_i.doubled(),
        spec.spin_j.doubled(),
        spec.m_f.doubled()
    ));
    if let Ok(bytes) = std::fs::read(&path) {
        if let Some(block) = decode_cg_cache(spec, &bytes) {
            return block;
        }
    }
    let block = cg_block(spec);
    // Caching is a pure optimization; failure to persist is not an error.
    let _ = std::fs::create_dir_all(dir);
    let tmp = path.with_extension("tmp");
    if std::fs::write(&tmp, encode_cg_cache(&block)).is_ok() {
        let _ = std::fs::rename(&tmp, &path);
    }
    block
}

fn encode_cg_cache(block: &CGBlock) -> Vec<u8> {
    let d = block.matrix.nrows();
    let mut out = Vec::with_capacity(24 + 8 * d * d);
    out.extend_from_slice(CG_CACHE_MAGIC);
    out.extend_from_slice(&CG_CACHE_VERSION.to_le_bytes());
    for v in [
        block.spec.spin_i.doubled(),
        block.spec.spin_j.doubled(),
        block.spec.m_f.doubled(),
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(d as u64).to_le_bytes());
    for x in block.matrix.iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn decode_cg_cache(spec: &SubspaceSpec, bytes: &[u8]) -> Option<CGBlock> {
    let d = spec.dim();
    let expect = 24 + 8 * d * d;
    if bytes.len() != expect || &bytes[0..4] != CG_CACHE_MAGIC {
        return None;
    }
    let read_u32 = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let read_i32 = |i: usize| i32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if read_u32(4) != CG_CACHE_VERSION
        || read_i32(8) != spec.spin_i.doubled()
        || read_i32(12) != spec.spin_j.doubled()
        || read_i32(16) != spec.m_f.doubled()
        || u64::from_le_bytes(bytes[20..28].try_into().unwrap()) != d as u64
    {
        return None;
    }
    let mut matrix = Array2::<f64>::zeros((d, d));
    for (k, x) in matrix.iter_mut().enumerate() {
        let i = 28 + 8 * k;
        *x = f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    }
    Some(CGBlock {
        spec: *spec,
        f_values: spec.f_values(),
        matrix,
    })
}
