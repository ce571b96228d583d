//! Input documents: scattering data, or a raw triplet under `rawTriplet`.

use kdv_core::linalg::DenseMatrix;
use kdv_core::realization::{build_triplet, BoundState, ComplexPolePair, ImaginaryPole, ScatteringSpec, Triplet};
use serde::de::IgnoredAny;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTriplet {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    /// Column vector, written as `[[b₁], [b₂], …]`.
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    /// Row vector, written as `[[c₁, c₂, …]]`.
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(default)]
    pub eta: f64,
}

impl RawTriplet {
    pub fn from_triplet(t: &Triplet) -> Self {
        RawTriplet {
            a: t.a().to_rows(),
            b: t.b().to_rows(),
            c: t.c().to_rows(),
            eta: t.eta(),
        }
    }

    fn to_triplet(&self) -> Result<Triplet, CliError> {
        let matrix = |name: &str, rows: &[Vec<f64>]| {
            DenseMatrix::from_rows(rows).map_err(|e| CliError::Input(format!("rawTriplet.{name}: {e}")))
        };
        Triplet::new(
            matrix("A", &self.a)?,
            matrix("B", &self.b)?,
            matrix("C", &self.c)?,
            self.eta,
        )
        .map_err(|e| CliError::Input(format!("rawTriplet: {e}")))
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Document {
    eta: Option<f64>,
    complex_poles: Option<Vec<ComplexPolePair>>,
    imag_poles: Option<Vec<ImaginaryPole>>,
    bound_states: Option<Vec<BoundState>>,
    raw_triplet: Option<RawTriplet>,
    /// Written by `kdv build` alongside `rawTriplet`; ignored on input.
    #[allow(dead_code)]
    info: Option<IgnoredAny>,
}

/// A parsed input: the triplet, and the scattering data it came from if any.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub triplet: Triplet,
    pub spec: Option<ScatteringSpec>,
}

fn parse_document(text: &str) -> Result<Document, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Input(inner.to_string())
        } else {
            CliError::Input(format!("{path}: {inner}"))
        }
    })
}

/// Parses and validates an input document. `eta` overrides the document's drift.
pub fn load(text: &str, eta: Option<f64>) -> Result<Loaded, CliError> {
    let doc = parse_document(text)?;
    let has_spec =
        doc.eta.is_some() || doc.complex_poles.is_some() || doc.imag_poles.is_some() || doc.bound_states.is_some();
    match doc.raw_triplet {
        Some(_) if has_spec => Err(CliError::Input(
            "rawTriplet: give either scattering data or rawTriplet, not both".into(),
        )),
        Some(raw) => {
            let mut triplet = raw.to_triplet()?;
            if let Some(eta) = eta {
                triplet = triplet.with_eta(eta)?;
            }
            Ok(Loaded { triplet, spec: None })
        }
        None => {
            if doc.info.is_some() {
                return Err(CliError::Input("info: only allowed alongside rawTriplet".into()));
            }
            let spec = ScatteringSpec {
                eta: eta.or(doc.eta).unwrap_or(0.0),
                complex_poles: doc.complex_poles.unwrap_or_default(),
                imaginary_poles: doc.imag_poles.unwrap_or_default(),
                bound_states: doc.bound_states.unwrap_or_default(),
            };
            let triplet = build_triplet(&spec)?;
            Ok(Loaded {
                triplet,
                spec: Some(spec),
            })
        }
    }
}
