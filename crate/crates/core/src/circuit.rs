//! The layered device: mixers interleaved with phase planes, port embeddings,
//! and extraction of the effective d-dimensional transform.
//!
//! With depth L, the total transfer is
//! `T = U_{L+1} · P_L · U_L · … · P_1 · U_1` (the input meets `U_1` first).
//! Setting `trailing_mixer = false` replaces `U_{L+1}` with the identity.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{
    basis_vector, dft_matrix, sample_haar_unitary, CMatrix, CVector, PhasePlane, RngSeed, Unitary,
};

/// Maps d logical modes onto orthonormal vectors of the n-dimensional
/// ambient space. Default mode shapes are canonical basis vectors ("foci")
/// at the given indices; arbitrary orthonormal shapes may be supplied to
/// represent rotated input bases.
#[derive(Debug, Clone, PartialEq)]
pub struct PortEmbedding {
    n: usize,
    indices: Vec<usize>,
    modes: Vec<CVector>,
}

impl PortEmbedding {
    /// Canonical embedding: mode a is the basis vector at `indices[a]`.
    pub fn canonical(n: usize, indices: Vec<usize>) -> Result<Self> {
        Self::validate_indices(n, &indices)?;
        let modes = indices.iter().map(|&i| basis_vector(n, i)).collect();
        Ok(PortEmbedding { n, indices, modes })
    }

    /// Embedding with explicit orthonormal mode shapes, one per port index.
    pub fn with_modes(n: usize, indices: Vec<usize>, modes: Vec<CVector>) -> Result<Self> {
        Self::validate_indices(n, &indices)?;
        if modes.len() != indices.len() {
            return Err(Error::InvalidConfiguration(format!(
                "{} mode shapes for {} ports",
                modes.len(),
                indices.len()
            )));
        }
        for m in &modes {
            if m.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "mode shape of length {} in ambient dimension {n}",
                    m.len()
                )));
            }
        }
        for i in 0..modes.len() {
            for j in 0..=i {
                let ip: Complex64 = modes[i].dotc(&modes[j]);
                let expected = if i == j { 1.0 } else { 0.0 };
                if (ip - Complex64::new(expected, 0.0)).norm() > 1e-10 {
                    return Err(Error::InvalidConfiguration(
                        "mode shapes are not orthonormal".into(),
                    ));
                }
            }
        }
        Ok(PortEmbedding { n, indices, modes })
    }

    fn validate_indices(n: usize, indices: &[usize]) -> Result<()> {
        if indices.is_empty() || indices.len() > n {
            return Err(Error::InvalidConfiguration(format!(
                "{} ports in ambient dimension {n}",
                indices.len()
            )));
        }
        let mut seen = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange(format!("port {i} in dimension {n}")));
            }
            if seen[i] {
                return Err(Error::InvalidConfiguration(format!("duplicate port {i}")));
            }
            seen[i] = true;
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn logical_dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn modes(&self) -> &[CVector] {
        &self.modes
    }

    /// n×d matrix whose columns are the mode shapes.
    pub fn mode_stack(&self) -> CMatrix {
        let d = self.logical_dim();
        CMatrix::from_fn(self.n, d, |i, a| self.modes[a][i])
    }
}

/// Sample d distinct port indices uniformly without replacement.
pub fn random_ports(n: usize, d: usize, seed: RngSeed) -> Result<PortEmbedding> {
    if d > n {
        return Err(Error::InvalidConfiguration(format!(
            "cannot select {d} distinct ports from {n} modes"
        )));
    }
    let mut rng = seed.rng();
    let indices = rand::seq::index::sample(&mut rng, n, d).into_vec();
    PortEmbedding::canonical(n, indices)
}

/// The layered circuit: L+1 mixers, L phase planes, and the port embeddings
/// selecting the d-dimensional target space.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredCircuit {
    mixers: Vec<Unitary>,
    planes: Vec<PhasePlane>,
    input: PortEmbedding,
    output: PortEmbedding,
}

impl LayeredCircuit {
    pub fn new(
        mixers: Vec<Unitary>,
        planes: Vec<PhasePlane>,
        input: PortEmbedding,
        output: PortEmbedding,
    ) -> Result<Self> {
        if mixers.len() != planes.len() + 1 {
            return Err(Error::InvalidConfiguration(format!(
                "{} mixers for {} planes; need planes + 1",
                mixers.len(),
                planes.len()
            )));
        }
        let n = mixers[0].dim();
        if mixers.iter().any(|u| u.dim() != n) {
            return Err(Error::DimensionMismatch("mixers of unequal size".into()));
        }
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::DimensionMismatch(
                "phase plane length differs from mixer dimension".into(),
            ));
        }
        if input.ambient_dim() != n || output.ambient_dim() != n {
            return Err(Error::DimensionMismatch(
                "port embedding in wrong ambient dimension".into(),
            ));
        }
        if input.logical_dim() != output.logical_dim() {
            return Err(Error::InvalidConfiguration(format!(
                "{} input ports vs {} output ports",
                input.logical_dim(),
                output.logical_dim()
            )));
        }
        Ok(LayeredCircuit {
            mixers,
            planes,
            input,
            output,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.mixers[0].dim()
    }

    pub fn depth(&self) -> usize {
        self.planes.len()
    }

    pub fn logical_dim(&self) -> usize {
        self.input.logical_dim()
    }

    pub fn mixers(&self) -> &[Unitary] {
        &self.mixers
    }

    pub fn planes(&self) -> &[PhasePlane] {
        &self.planes
    }

    pub fn input_ports(&self) -> &PortEmbedding {
        &self.input
    }

    pub fn output_ports(&self) -> &PortEmbedding {
        &self.output
    }

    /// Same circuit with replacement phase planes.
    pub fn with_planes(&self, planes: Vec<PhasePlane>) -> Result<Self> {
        LayeredCircuit::new(
            self.mixers.clone(),
            planes,
            self.input.clone(),
            self.output.clone(),
        )
    }

    pub(crate) fn set_plane(&mut self, p: usize, plane: PhasePlane) {
        debug_assert_eq!(plane.len(), self.ambient_dim());
        self.planes[p] = plane;
    }

    /// The full n×n transfer matrix `T = U_{L+1} P_L U_L … P_1 U_1`.
    pub fn total_transfer(&self) -> Unitary {
        let mut acc = self.mixers[0].matrix().clone();
        for (j, plane) in self.planes.iter().enumerate() {
            plane.scale_rows(&mut acc);
            acc = self.mixers[j + 1].matrix() * acc;
        }
        Unitary::new(acc).expect("phases and unitary mixers preserve unitarity")
    }

    /// Propagate a stack of column fields through the whole device.
    pub(crate) fn propagate_stack(&self, fields: &CMatrix) -> CMatrix {
        let mut x = fields.clone();
        for (j, plane) in self.planes.iter().enumerate() {
            x = self.mixers[j].matrix() * x;
            plane.scale_rows(&mut x);
        }
        self.mixers[self.planes.len()].matrix() * &x
    }

    /// The effective d×d transform `T̃`, entry (b,a) = ⟨out mode b|T|in mode a⟩.
    ///
    /// A submatrix of a unitary: generally not unitary itself.
    pub fn effective_transform(&self) -> CMatrix {
        let out = self.propagate_stack(&self.input.mode_stack());
        self.output.mode_stack().ad_mul(&out)
    }
}

/// How the mixers of a circuit are generated.
///
/// `HaarShared` uses the same Haar sample for every layer (string form
/// `haar`, alias `haar-shared`); `HaarPerLayer` draws a fresh mixer per
/// layer; `Dft` uses the discrete Fourier transform; `File` loads a fixed
/// matrix in the binary CMPLXMAT format (`file:<path>`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MixerKind {
    HaarShared,
    HaarPerLayer,
    Dft,
    File(PathBuf),
}

impl MixerKind {
    /// Label used in sweep CSV output.
    pub fn sweep_label(&self) -> String {
        match self {
            MixerKind::HaarShared => "haar-shared".into(),
            MixerKind::HaarPerLayer => "haar-per-layer".into(),
            MixerKind::Dft => "dft".into(),
            MixerKind::File(p) => format!("file:{}", p.display()),
        }
    }
}

impl fmt::Display for MixerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MixerKind::HaarShared => write!(f, "haar"),
            MixerKind::HaarPerLayer => write!(f, "haar-per-layer"),
            MixerKind::Dft => write!(f, "dft"),
            MixerKind::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for MixerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" | "haar-shared" => Ok(MixerKind::HaarShared),
            "haar-per-layer" => Ok(MixerKind::HaarPerLayer),
            "dft" => Ok(MixerKind::Dft),
            other => {
                if let Some(path) = other.strip_prefix("file:") {
                    Ok(MixerKind::File(PathBuf::from(path)))
                } else {
                    Err(Error::InvalidConfiguration(format!(
                        "unknown mixer kind {other:?}"
                    )))
                }
            }
        }
    }
}

impl Serialize for MixerKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MixerKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// JSON-serializable description of a circuit, including solved phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub depth: usize,
    pub mixer_kind: MixerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixer_seed: Option<RngSeed>,
    pub trailing_mixer: bool,
    pub input_ports: Vec<usize>,
    pub output_ports: Vec<usize>,
    /// L phase vectors; empty means all-zero planes.
    pub phases: Vec<Vec<f64>>,
}

impl CircuitSpec {
    pub fn build(&self) -> Result<LayeredCircuit> {
        if self.n == 0 || self.depth == 0 {
            return Err(Error::InvalidConfiguration(
                "circuit requires n ≥ 1 and L ≥ 1".into(),
            ));
        }
        let mixer_count = self.depth + 1;
        let mut mixers = self.build_mixers(mixer_count)?;
        if !self.trailing_mixer {
            mixers[self.depth] = Unitary::identity(self.n)?;
        }
        let planes = if self.phases.is_empty() {
            vec![PhasePlane::zeros(self.n); self.depth]
        } else {
            if self.phases.len() != self.depth {
                return Err(Error::InvalidConfiguration(format!(
                    "{} phase vectors for depth {}",
                    self.phases.len(),
                    self.depth
                )));
            }
            self.phases
                .iter()
                .map(|v| {
                    if v.len() != self.n {
                        Err(Error::DimensionMismatch(format!(
                            "phase vector of length {} for n={}",
                            v.len(),
                            self.n
                        )))
                    } else {
                        Ok(PhasePlane::new(v.clone()))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        };
        let input = PortEmbedding::canonical(self.n, self.input_ports.clone())?;
        let output = PortEmbedding::canonical(self.n, self.output_ports.clone())?;
        LayeredCircuit::new(mixers, planes, input, output)
    }

    fn build_mixers(&self, count: usize) -> Result<Vec<Unitary>> {
        match &self.mixer_kind {
            MixerKind::HaarShared => {
                let seed = self.require_seed()?;
                let u = sample_haar_unitary(self.n, seed)?;
                Ok(vec![u; count])
            }
            MixerKind::HaarPerLayer => {
                let seed = self.require_seed()?;
                (0..count)
                    .map(|j| sample_haar_unitary(self.n, seed.mix(&[j as u64])))
                    .collect()
            }
            MixerKind::Dft => {
                let u = dft_matrix(self.n)?;
                Ok(vec![u; count])
            }
            MixerKind::File(path) => {
                let m = crate::matio::load_matrix(path)?;
                if m.nrows() != self.n || m.ncols() != self.n {
                    return Err(Error::DimensionMismatch(format!(
                        "mixer file is {}x{}, circuit n={}",
                        m.nrows(),
                        m.ncols(),
                        self.n
                    )));
                }
                let u = Unitary::new(m)?;
                Ok(vec![u; count])
            }
        }
    }

    fn require_seed(&self) -> Result<RngSeed> {
        self.mixer_seed.ok_or_else(|| {
            Error::InvalidConfiguration("mixer_seed required for haar mixer kinds".into())
        })
    }
}
