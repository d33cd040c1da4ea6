//! JSON wire formats.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major lists of
//! rows. Pure states are `{"dims":[dA,dB],"amplitudes":[...]}` in `a ⊗ b`
//! order; density matrices are `{"dims":[dA,dB],"matrix":[[...],...]}`.

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bipartite::{DensityMatrix, Dims, Ensemble, PureState};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector};

pub type WireComplex = [f64; 2];
pub type WireMatrix = Vec<Vec<WireComplex>>;

pub fn complex_to_wire(z: Complex64) -> WireComplex {
    [z.re, z.im]
}

pub fn matrix_to_wire(m: &CMatrix) -> WireMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| complex_to_wire(m[(i, j)])).collect())
        .collect()
}

pub fn matrix_from_wire(rows: &WireMatrix) -> Result<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            what: "matrix row length",
            expected: ncols,
            got: bad.len(),
        });
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

/// `serde(with = ...)` adapter for complex matrices.
pub mod cmatrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_wire(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let wire = WireMatrix::deserialize(d)?;
        matrix_from_wire(&wire).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
pub struct PureStateWire {
    pub dims: [usize; 2],
    pub amplitudes: Vec<WireComplex>,
}

impl TryFrom<PureStateWire> for PureState {
    type Error = Error;
    fn try_from(w: PureStateWire) -> Result<Self> {
        let v = CVector::from_iterator(w.amplitudes.len(), w.amplitudes.iter().map(|z| c(z[0], z[1])));
        PureState::from_vector(Dims::from(w.dims), v)
    }
}

impl From<PureState> for PureStateWire {
    fn from(p: PureState) -> Self {
        PureStateWire {
            dims: p.dims().into(),
            amplitudes: p.amplitudes().iter().map(|z| complex_to_wire(*z)).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct DensityMatrixWire {
    pub dims: [usize; 2],
    pub matrix: WireMatrix,
}

impl TryFrom<DensityMatrixWire> for DensityMatrix {
    type Error = Error;
    fn try_from(w: DensityMatrixWire) -> Result<Self> {
        DensityMatrix::new(Dims::from(w.dims), matrix_from_wire(&w.matrix)?)
    }
}

impl From<DensityMatrix> for DensityMatrixWire {
    fn from(r: DensityMatrix) -> Self {
        DensityMatrixWire {
            dims: r.dims().into(),
            matrix: matrix_to_wire(r.matrix()),
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct MemberWire {
    pub weight: f64,
    pub state: PureState,
}

#[derive(Serialize, Deserialize)]
pub struct EnsembleWire {
    pub members: Vec<MemberWire>,
}

impl TryFrom<EnsembleWire> for Ensemble {
    type Error = Error;
    fn try_from(w: EnsembleWire) -> Result<Self> {
        Ensemble::new(w.members.into_iter().map(|m| (m.weight, m.state)).collect())
    }
}

impl From<Ensemble> for EnsembleWire {
    fn from(e: Ensemble) -> Self {
        EnsembleWire {
            members: e
                .members()
                .iter()
                .map(|(w, s)| MemberWire {
                    weight: *w,
                    state: s.clone(),
                })
                .collect(),
        }
    }
}

/// Parses JSON, reporting failures with the byte offset into `text`.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> std::result::Result<T, JsonError> {
    serde_json::from_str(text).map_err(|e| JsonError {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// JSON parse failure with position information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsonError {
    pub offset: usize,
    pub message: String,
}

impl std::fmt::Display for JsonError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (byte offset {})", self.message, self.offset)
    }
}

impl std::error::Error for JsonError {}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::{random_density, random_pure};
    use crate::majorization::SchmidtVector;
    use proptest::prelude::*;

    #[test]
    fn pure_state_format() {
        let json = r#"{"dims":[2,2],"amplitudes":[[0.7071067811865476,0],[0,0],[0,0],[0.7071067811865476,0]]}"#;
        let psi: PureState = serde_json::from_str(json).unwrap();
        assert_eq!(psi.dims(), Dims(2, 2));
        assert!((psi.amplitudes()[3].re - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn invalid_payloads_are_rejected() {
        let short = r#"{"dims":[2,2],"amplitudes":[[1,0]]}"#;
        assert!(serde_json::from_str::<PureState>(short).is_err());
        let not_psd = r#"{"dims":[1,2],"matrix":[[[1.5,0],[0,0]],[[0,0],[-0.5,0]]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(not_psd).is_err());
        let bad_sum = r#"{"values":[0.7,0.2]}"#;
        assert!(serde_json::from_str::<SchmidtVector>(bad_sum).is_err());
    }

    #[test]
    fn parse_errors_carry_byte_offsets() {
        let text = "{\"values\":\n [0.5, 0.5,]}";
        let err = parse_json::<SchmidtVector>(text).unwrap_err();
        assert_eq!(&text[err.offset..err.offset + 1], "]");
    }

    proptest! {
        #[test]
        fn states_round_trip(seed in 0u64..1000, da in 1usize..4, db in 1usize..4) {
            let psi = random_pure(Dims(da, db), seed).unwrap();
            let back: PureState = serde_json::from_str(&serde_json::to_string(&psi).unwrap()).unwrap();
            prop_assert_eq!(&back, &psi);
            let rho = random_density(Dims(da, db), 1 + (seed as usize) % (da * db), seed).unwrap();
            let back: DensityMatrix = serde_json::from_str(&serde_json::to_string(&rho).unwrap()).unwrap();
            prop_assert_eq!(back, rho);
        }
    }
}
