//! Dense complex linear algebra primitives: seeded RNG, Haar-random unitary
//! sampling, DFT matrices, phase planes, and matrix product chains.
//!
//! All types are immutable after construction; operations are pure functions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Dense complex matrix, row/column indexed as (output mode, input mode).
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex vector (an optical field over modes).
pub type CVector = DVector<Complex64>;

/// Admission tolerance for unitarity: max-norm of `U†U − I`.
pub const UNITARITY_TOL: f64 = 1e-10;

/// A 64-bit seed for the crate's deterministic RNG (ChaCha12).
///
/// Identical seeds produce bit-identical streams on every platform. Derived
/// seeds are obtained with [`RngSeed::mix`], a splitmix64 absorption chain,
/// so any sub-computation can be re-run in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSeed {
    /// Deterministic generator seeded from this value.
    pub fn rng(self) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.0)
    }

    /// Absorb a sequence of words into a derived seed (splitmix64 chain).
    pub fn mix(self, words: &[u64]) -> RngSeed {
        let mut state = self.0;
        for &w in words {
            state = splitmix64(state ^ w);
        }
        RngSeed(state)
    }
}

impl std::fmt::Display for RngSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Checks every entry is finite; NaN/Inf never enter the numeric core.
pub fn check_finite(m: &CMatrix, context: &str) -> Result<()> {
    if m.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context.to_string()))
    }
}

/// Max-norm of `U†U − I`; zero for an exactly unitary matrix.
pub fn unitarity_deviation(m: &CMatrix) -> f64 {
    let gram = m.ad_mul(m);
    let n = gram.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let expected = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[(i, j)] - Complex64::new(expected, 0.0)).norm());
        }
    }
    dev
}

/// An n×n matrix admitted as unitary: `‖U†U − I‖_max ≤ 1e-10`.
///
/// Recovered or learned matrices that fail admission must be kept as plain
/// [`CMatrix`] values instead.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    m: CMatrix,
}

impl Unitary {
    /// Admit a matrix after checking squareness, finiteness, and unitarity.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidDimension(format!(
                "unitary must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite(&m, "unitary admission")?;
        let deviation = unitarity_deviation(&m);
        if deviation > UNITARITY_TOL {
            return Err(Error::NotUnitary {
                deviation,
                tolerance: UNITARITY_TOL,
            });
        }
        Ok(Unitary { m })
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("identity of dimension 0".into()));
        }
        Ok(Unitary {
            m: CMatrix::identity(n, n),
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary {
            m: self.m.adjoint(),
        }
    }
}

/// A programmable plane of `n` phases θ, applied as `diag(e^{iθ})`.
///
/// Phases are normalized into `(−π, π]` on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhasePlane {
    phases: Vec<f64>,
}

/// Map an angle into the canonical range `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

impl PhasePlane {
    pub fn new(phases: Vec<f64>) -> Self {
        PhasePlane {
            phases: phases.into_iter().map(wrap_angle).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        PhasePlane {
            phases: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// The diagonal factors `e^{iθ_q}`.
    pub fn factors(&self) -> CVector {
        CVector::from_iterator(
            self.phases.len(),
            self.phases.iter().map(|&t| Complex64::from_polar(1.0, t)),
        )
    }

    /// Multiply each row q of a stack of column fields by `e^{iθ_q}`.
    pub(crate) fn scale_rows(&self, fields: &mut CMatrix) {
        debug_assert_eq!(fields.nrows(), self.phases.len());
        for (q, &t) in self.phases.iter().enumerate() {
            let f = Complex64::from_polar(1.0, t);
            for c in 0..fields.ncols() {
                fields[(q, c)] *= f;
            }
        }
    }

    /// As above but with conjugated factors `e^{−iθ_q}` (adjoint plane).
    pub(crate) fn scale_rows_conj(&self, fields: &mut CMatrix) {
        debug_assert_eq!(fields.nrows(), self.phases.len());
        for (q, &t) in self.phases.iter().enumerate() {
            let f = Complex64::from_polar(1.0, -t);
            for c in 0..fields.ncols() {
                fields[(q, c)] *= f;
            }
        }
    }
}

/// Element-wise product of a field with `e^{iθ_q}`; preserves the 2-norm.
pub fn apply_phase_plane(plane: &PhasePlane, field: &CVector) -> Result<CVector> {
    if plane.len() != field.len() {
        return Err(Error::DimensionMismatch(format!(
            "phase plane of length {} applied to field of length {}",
            plane.len(),
            field.len()
        )));
    }
    let mut out = field.clone();
    for (q, &t) in plane.phases.iter().enumerate() {
        out[q] *= Complex64::from_polar(1.0, t);
    }
    Ok(out)
}

/// Sample an n×n unitary from the Haar measure.
///
/// QR decomposition of an i.i.d. complex standard-Gaussian matrix, with
/// column j of Q multiplied by `R_jj/|R_jj|` so the implied R has a positive
/// diagonal (Mezzadri's correction). Deterministic for a given seed.
pub fn sample_haar_unitary(n: usize, seed: RngSeed) -> Result<Unitary> {
    if n == 0 {
        return Err(Error::InvalidDimension(
            "cannot sample a 0-dimensional unitary".into(),
        ));
    }
    let mut rng = seed.rng();
    let normal = StandardNormal;
    let scale = 1.0 / 2f64.sqrt();
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = normal.sample(&mut rng);
        let im: f64 = normal.sample(&mut rng);
        Complex64::new(re * scale, im * scale)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let rjj = r[(j, j)];
        let mag = rjj.norm();
        // R_jj = 0 has probability zero; guard against it anyway.
        let phase = if mag > 0.0 {
            rjj / mag
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Unitary::new(q)
}

/// The n×n discrete Fourier transform: entry (a,b) = `ω^{ab}/√n`, ω = e^{2πi/n}.
pub fn dft_matrix(n: usize) -> Result<Unitary> {
    if n == 0 {
        return Err(Error::InvalidDimension(
            "cannot build a 0-dimensional DFT".into(),
        ));
    }
    let norm = 1.0 / (n as f64).sqrt();
    let m = CMatrix::from_fn(n, n, |a, b| {
        // reduce the exponent mod n before trig for full precision
        let k = (a * b) % n;
        let angle = 2.0 * PI * (k as f64) / (n as f64);
        Complex64::from_polar(norm, angle)
    });
    Unitary::new(m)
}

/// Left-to-right product of a chain of matrices in the order written.
pub fn matrix_product_chain(ms: &[CMatrix]) -> Result<CMatrix> {
    let first = ms.first().ok_or_else(|| {
        Error::InvalidConfiguration("matrix product chain must be non-empty".into())
    })?;
    let mut acc = first.clone();
    for m in &ms[1..] {
        if acc.ncols() != m.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                acc.nrows(),
                acc.ncols(),
                m.nrows(),
                m.ncols()
            )));
        }
        acc = &acc * m;
    }
    Ok(acc)
}

/// Canonical basis vector `e_idx` in dimension n.
pub fn basis_vector(n: usize, idx: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[idx] = Complex64::new(1.0, 0.0);
    v
}
