//! Target gate constructors in arbitrary dimension d.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{sample_haar_unitary, CMatrix, RngSeed, Unitary};

/// The supported target gates.
///
/// `RandomUnitary` carries its seed so a realization is reproducible.
/// String form (CLI/config): `identity`, `z`, `x`, `fourier`, `random:<seed>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Identity,
    PauliZ,
    PauliX,
    Fourier,
    RandomUnitary(RngSeed),
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKind::Identity => write!(f, "identity"),
            GateKind::PauliZ => write!(f, "z"),
            GateKind::PauliX => write!(f, "x"),
            GateKind::Fourier => write!(f, "fourier"),
            GateKind::RandomUnitary(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(GateKind::Identity),
            "z" => Ok(GateKind::PauliZ),
            "x" => Ok(GateKind::PauliX),
            "fourier" => Ok(GateKind::Fourier),
            other => {
                if let Some(seed) = other.strip_prefix("random:") {
                    let seed: u64 = seed.parse().map_err(|_| {
                        Error::InvalidConfiguration(format!("bad gate seed in {other:?}"))
                    })?;
                    Ok(GateKind::RandomUnitary(RngSeed(seed)))
                } else {
                    Err(Error::InvalidConfiguration(format!(
                        "unknown gate {other:?}; expected identity|z|x|fourier|random:<seed>"
                    )))
                }
            }
        }
    }
}

impl Serialize for GateKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for GateKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Build the d×d gate matrix, row = output logical mode, column = input.
///
/// Identity → `I_d`; PauliZ → `diag(ω^a)`; PauliX → the cyclic shift
/// `|a⊕1⟩⟨a|`; Fourier → `ω^{ab}/√d`; RandomUnitary → a Haar sample from the
/// embedded seed. ω = e^{2πi/d}.
pub fn build_gate(kind: GateKind, d: usize) -> Result<Unitary> {
    if d == 0 {
        return Err(Error::InvalidDimension(
            "cannot build a 0-dimensional gate".into(),
        ));
    }
    match kind {
        GateKind::Identity => Unitary::identity(d),
        GateKind::PauliZ => {
            let m = CMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    Complex64::from_polar(1.0, 2.0 * PI * (i as f64) / (d as f64))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            Unitary::new(m)
        }
        GateKind::PauliX => {
            let m = CMatrix::from_fn(d, d, |i, j| {
                if i == (j + 1) % d {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            Unitary::new(m)
        }
        GateKind::Fourier => crate::linalg::dft_matrix(d),
        GateKind::RandomUnitary(seed) => sample_haar_unitary(d, seed),
    }
}
