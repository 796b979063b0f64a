//! JSON documents for states, local operators, subspaces, bases and
//! protocols.
//!
//! Matrices are written either densely as `{"re": [[..]], "im": [[..]]}`
//! (`im` optional) or sparsely as `[{"row": r, "col": c, "re": x, "im": y}]`.
//! Vectors use `{"re": [..], "im": [..]}`. Floats are written in the
//! shortest form that parses back to the same value, so save/load is
//! lossless.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dss::{LocalBases, LocalSubspace};
use crate::error::{Error, Result};
use crate::localops::{LocalFactor, ProductOperator};
use crate::protocols::{discard_subsystem, Predicate, ProtocolStep};
use crate::states::{DensityMatrix, Party, SystemShape};
use crate::tensor::{basis_vector, ComplexMatrix, Tolerance};

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| schema(format!("{what}: {e}")))
}

/* Building blocks ************************************************************/

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyDoc {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsystems: Option<Vec<usize>>,
}

impl PartyDoc {
    fn to_party(&self) -> Result<Party> {
        match (&self.dim, &self.subsystems) {
            (None, None) => Err(schema(format!(
                "party {} needs `dim` or `subsystems`",
                self.label
            ))),
            (Some(d), None) => Ok(Party::new(self.label.clone(), *d)),
            (dim, Some(subs)) => {
                let product: usize = subs.iter().product();
                if subs.is_empty() || dim.is_some_and(|d| d != product) {
                    return Err(schema(format!(
                        "party {}: subsystems {subs:?} do not multiply to dim {}",
                        self.label,
                        dim.unwrap_or(0)
                    )));
                }
                Ok(Party::with_subsystems(self.label.clone(), subs.clone()))
            }
        }
    }

    fn from_party(p: &Party) -> Self {
        Self {
            label: p.label.clone(),
            dim: Some(p.dim()),
            subsystems: (p.subsystems().len() > 1).then(|| p.subsystems().to_vec()),
        }
    }
}

pub fn shape_from_docs(parties: &[PartyDoc]) -> Result<SystemShape> {
    SystemShape::new(
        parties
            .iter()
            .map(PartyDoc::to_party)
            .collect::<Result<_>>()?,
    )
}

pub fn shape_to_docs(shape: &SystemShape) -> Vec<PartyDoc> {
    shape.parties().iter().map(PartyDoc::from_party).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseDoc {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDoc {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixDoc {
    Dense(DenseDoc),
    Sparse(Vec<EntryDoc>),
}

fn check_finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(schema(format!("non-finite number in {what}")))
    }
}

impl MatrixDoc {
    /// Reads a matrix; sparse documents need the square side `side`.
    pub fn to_matrix(&self, side: Option<usize>) -> Result<ComplexMatrix> {
        match self {
            MatrixDoc::Dense(d) => {
                let rows = d.re.len();
                let cols = d.re.first().map_or(0, Vec::len);
                if rows == 0 || cols == 0 {
                    return Err(schema("empty matrix"));
                }
                if d.re.iter().any(|r| r.len() != cols) {
                    return Err(schema("ragged `re` rows"));
                }
                if let Some(im) = &d.im {
                    if im.len() != rows || im.iter().any(|r| r.len() != cols) {
                        return Err(schema("`im` does not match the shape of `re`"));
                    }
                }
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for c in 0..cols {
                        let re = check_finite(d.re[r][c], "matrix")?;
                        let im = match &d.im {
                            Some(im) => check_finite(im[r][c], "matrix")?,
                            None => 0.0,
                        };
                        data.push(C64::new(re, im));
                    }
                }
                ComplexMatrix::from_vec(rows, cols, data)
            }
            MatrixDoc::Sparse(entries) => {
                let side = side.ok_or_else(|| schema("sparse matrices need a known dimension"))?;
                let mut m = ComplexMatrix::zeros(side, side);
                let mut seen = std::collections::HashSet::new();
                for e in entries {
                    if e.row >= side || e.col >= side {
                        return Err(schema(format!(
                            "entry ({}, {}) outside a {side}x{side} matrix",
                            e.row, e.col
                        )));
                    }
                    if !seen.insert((e.row, e.col)) {
                        return Err(schema(format!("entry ({}, {}) listed twice", e.row, e.col)));
                    }
                    m[(e.row, e.col)] =
                        C64::new(check_finite(e.re, "matrix")?, check_finite(e.im, "matrix")?);
                }
                Ok(m)
            }
        }
    }

    pub fn dense(m: &ComplexMatrix) -> Self {
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            (0..m.rows())
                .map(|r| m.row(r).iter().map(f).collect())
                .collect()
        };
        let im = rows(|z| z.im);
        let any_im = im.iter().flatten().any(|&x| x != 0.0);
        MatrixDoc::Dense(DenseDoc {
            re: rows(|z| z.re),
            im: any_im.then_some(im),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorDoc {
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl VectorDoc {
    fn to_vector(&self) -> Result<Vec<C64>> {
        if let Some(im) = &self.im {
            if im.len() != self.re.len() {
                return Err(schema("vector `im` length differs from `re`"));
            }
        }
        (0..self.re.len())
            .map(|i| {
                let im = self
                    .im
                    .as_ref()
                    .map_or(Ok(0.0), |v| check_finite(v[i], "vector"))?;
                Ok(C64::new(check_finite(self.re[i], "vector")?, im))
            })
            .collect()
    }

    pub fn from_vector(v: &[C64]) -> Self {
        let any_im = v.iter().any(|z| z.im != 0.0);
        Self {
            re: v.iter().map(|z| z.re).collect(),
            im: any_im.then(|| v.iter().map(|z| z.im).collect()),
        }
    }
}

/* States *********************************************************************/

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub parties: Vec<PartyDoc>,
    pub matrix: MatrixDoc,
}

impl StateDoc {
    pub fn to_state(&self, tol: &Tolerance) -> Result<DensityMatrix> {
        let shape = shape_from_docs(&self.parties)?;
        let m = self.matrix.to_matrix(Some(shape.total_dim()))?;
        DensityMatrix::new(shape, m, tol)
    }

    pub fn from_state(rho: &DensityMatrix) -> Self {
        Self {
            parties: shape_to_docs(rho.shape()),
            matrix: MatrixDoc::dense(rho.matrix()),
        }
    }
}

pub fn state_from_json(text: &str, tol: &Tolerance) -> Result<DensityMatrix> {
    parse::<StateDoc>(text, "state document")?.to_state(tol)
}

pub fn state_to_json(rho: &DensityMatrix) -> String {
    serde_json::to_string_pretty(&StateDoc::from_state(rho)).expect("state documents serialize")
}

pub fn load_state(path: &Path, tol: &Tolerance) -> Result<DensityMatrix> {
    state_from_json(&read_text(path)?, tol)
}

pub fn save_state(path: &Path, rho: &DensityMatrix) -> Result<()> {
    write_text(path, &state_to_json(rho))
}

/* Operators ******************************************************************/

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorDoc {
    pub party: String,
    pub matrix: MatrixDoc,
}

/// Factors are matched to parties by label; unlisted parties get the
/// identity. `parties` is optional when the operator is read against a known
/// shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parties: Option<Vec<PartyDoc>>,
    pub factors: Vec<FactorDoc>,
}

impl OperatorDoc {
    pub fn shape(&self) -> Result<Option<SystemShape>> {
        self.parties.as_deref().map(shape_from_docs).transpose()
    }

    pub fn to_operator(&self, shape: &SystemShape) -> Result<ProductOperator> {
        if let Some(own) = self.shape()? {
            if own.labels() != shape.labels() || own.dims() != shape.dims() {
                return Err(schema(format!(
                    "operator declared on {own}, used on {shape}"
                )));
            }
        }
        let mut mats: Vec<Option<ComplexMatrix>> = vec![None; shape.len()];
        for f in &self.factors {
            let k = shape
                .party_index(&f.party)
                .ok_or_else(|| schema(format!("factor for unknown party {}", f.party)))?;
            if mats[k].is_some() {
                return Err(schema(format!("party {} has two factors", f.party)));
            }
            mats[k] = Some(f.matrix.to_matrix(Some(shape.party(k).dim()))?);
        }
        let factors = shape
            .parties()
            .iter()
            .zip(mats)
            .map(|(p, m)| match m {
                Some(m) => LocalFactor::new(p.label.clone(), m),
                None => Ok(LocalFactor::identity(p.label.clone(), p.dim())),
            })
            .collect::<Result<Vec<_>>>()?;
        ProductOperator::new(shape.clone(), factors)
    }

    pub fn from_operator(op: &ProductOperator) -> Self {
        Self {
            parties: Some(shape_to_docs(op.shape())),
            factors: op
                .factors()
                .iter()
                .map(|f| FactorDoc {
                    party: f.party().to_string(),
                    matrix: MatrixDoc::dense(f.matrix()),
                })
                .collect(),
        }
    }
}

pub fn load_operator(path: &Path) -> Result<OperatorDoc> {
    parse(&read_text(path)?, "operator document")
}

/* Subspaces and bases ********************************************************/

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalVectorsDoc {
    pub label: String,
    /// Computational-basis indices (alternative to `vectors`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<VectorDoc>>,
}

/// Per-party vector lists; used both for subspaces and for full bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorsDoc {
    pub parties: Vec<LocalVectorsDoc>,
}

impl VectorsDoc {
    fn resolve(&self, shape: &SystemShape) -> Result<Vec<Vec<Vec<C64>>>> {
        if self.parties.len() != shape.len() {
            return Err(schema(format!(
                "document lists {} parties, the state has {}",
                self.parties.len(),
                shape.len()
            )));
        }
        shape
            .parties()
            .iter()
            .zip(&self.parties)
            .map(|(p, doc)| {
                if doc.label != p.label {
                    return Err(schema(format!(
                        "party {} listed where {} was expected",
                        doc.label, p.label
                    )));
                }
                match (&doc.indices, &doc.vectors) {
                    (Some(idx), None) => idx
                        .iter()
                        .map(|&i| {
                            if i < p.dim() {
                                Ok(basis_vector(p.dim(), i))
                            } else {
                                Err(schema(format!(
                                    "index {i} out of range for party {}",
                                    p.label
                                )))
                            }
                        })
                        .collect(),
                    (None, Some(vs)) => vs.iter().map(VectorDoc::to_vector).collect(),
                    _ => Err(schema(format!(
                        "party {} needs exactly one of `indices` or `vectors`",
                        p.label
                    ))),
                }
            })
            .collect()
    }

    pub fn to_subspace(&self, shape: &SystemShape) -> Result<LocalSubspace> {
        LocalSubspace::new(shape, self.resolve(shape)?)
    }

    pub fn to_bases(&self, shape: &SystemShape) -> Result<LocalBases> {
        let mats = self
            .resolve(shape)?
            .iter()
            .zip(shape.parties())
            .map(|(vs, p)| {
                if vs.len() != p.dim() {
                    return Err(schema(format!(
                        "basis for party {} has {} vectors, dimension is {}",
                        p.label,
                        vs.len(),
                        p.dim()
                    )));
                }
                if vs.iter().any(|v| v.len() != p.dim()) {
                    return Err(schema(format!(
                        "basis vector of wrong length for party {}",
                        p.label
                    )));
                }
                Ok(ComplexMatrix::from_columns(vs))
            })
            .collect::<Result<Vec<_>>>()?;
        LocalBases::new(shape, mats)
    }

    pub fn from_subspace(shape: &SystemShape, s: &LocalSubspace) -> Self {
        Self {
            parties: shape
                .parties()
                .iter()
                .zip(s.parties())
                .map(|(p, vs)| LocalVectorsDoc {
                    label: p.label.clone(),
                    indices: None,
                    vectors: Some(vs.iter().map(|v| VectorDoc::from_vector(v)).collect()),
                })
                .collect(),
        }
    }
}

pub fn load_vectors(path: &Path) -> Result<VectorsDoc> {
    parse(&read_text(path)?, "subspace document")
}

/* Protocols ******************************************************************/

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitaryDoc {
    pub party: String,
    pub matrix: MatrixDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredicateDoc {
    Parity { parity: Vec<usize>, odd: bool },
    Equals { step: usize, equals: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepDoc {
    Project {
        #[serde(default)]
        subspace: Option<VectorsDoc>,
        #[serde(default)]
        subspace_file: Option<PathBuf>,
    },
    LocalUnitary {
        unitaries: Vec<UnitaryDoc>,
    },
    MeasureAndDiscard {
        party: String,
        subsystem: usize,
        #[serde(default)]
        basis: Option<MatrixDoc>,
    },
    Filter {
        #[serde(default)]
        operator: Option<OperatorDoc>,
        #[serde(default)]
        operator_file: Option<PathBuf>,
    },
    Conditional {
        predicate: PredicateDoc,
        then: Box<StepDoc>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDoc {
    pub steps: Vec<StepDoc>,
}

fn inline_or_file<T: for<'de> Deserialize<'de> + Clone>(
    inline: &Option<T>,
    file: &Option<PathBuf>,
    base: &Path,
    what: &str,
) -> Result<T> {
    match (inline, file) {
        (Some(doc), None) => Ok(doc.clone()),
        (None, Some(f)) => parse(&read_text(&base.join(f))?, what),
        _ => Err(schema(format!(
            "{what}: give exactly one of the inline object or the file reference"
        ))),
    }
}

impl ProtocolDoc {
    /// Resolves the steps against the shape each step will see, starting from
    /// `shape`. File references are relative to `base`.
    pub fn resolve(&self, shape: &SystemShape, base: &Path) -> Result<Vec<ProtocolStep>> {
        let mut shape = shape.clone();
        let mut steps = Vec::with_capacity(self.steps.len());
        for (i, doc) in self.steps.iter().enumerate() {
            let step = resolve_step(doc, &shape, base, false).map_err(|e| Error::Protocol {
                step: i,
                message: e.to_string(),
            })?;
            if let ProtocolStep::MeasureAndDiscard {
                party, subsystem, ..
            } = &step
            {
                let k = shape.party_index(party).expect("checked while resolving");
                shape = discard_subsystem(&shape, k, *subsystem).map_err(|e| Error::Protocol {
                    step: i,
                    message: e.to_string(),
                })?;
            }
            steps.push(step);
        }
        Ok(steps)
    }
}

fn resolve_step(
    doc: &StepDoc,
    shape: &SystemShape,
    base: &Path,
    nested: bool,
) -> Result<ProtocolStep> {
    Ok(match doc {
        StepDoc::Project {
            subspace,
            subspace_file,
        } => {
            let vectors: VectorsDoc = inline_or_file(subspace, subspace_file, base, "subspace")?;
            ProtocolStep::Project(vectors.to_subspace(shape)?)
        }
        StepDoc::LocalUnitary { unitaries } => ProtocolStep::LocalUnitary(
            unitaries
                .iter()
                .map(|u| {
                    let side = shape.party_index(&u.party).map(|k| shape.party(k).dim());
                    Ok((u.party.clone(), u.matrix.to_matrix(side)?))
                })
                .collect::<Result<_>>()?,
        ),
        StepDoc::MeasureAndDiscard {
            party,
            subsystem,
            basis,
        } => {
            if nested {
                return Err(schema(
                    "measurements inside a conditional are not supported",
                ));
            }
            let k = shape
                .party_index(party)
                .ok_or_else(|| schema(format!("unknown party {party}")))?;
            let subs = shape.party(k).subsystems();
            if *subsystem >= subs.len() {
                return Err(schema(format!(
                    "party {party} has {} subsystems, index {subsystem} requested",
                    subs.len()
                )));
            }
            let basis = basis
                .as_ref()
                .map(|b| b.to_matrix(Some(subs[*subsystem])))
                .transpose()?;
            ProtocolStep::MeasureAndDiscard {
                party: party.clone(),
                subsystem: *subsystem,
                basis,
            }
        }
        StepDoc::Filter {
            operator,
            operator_file,
        } => {
            let op: OperatorDoc = inline_or_file(operator, operator_file, base, "operator")?;
            ProtocolStep::Filter(op.to_operator(shape)?)
        }
        StepDoc::Conditional { predicate, then } => ProtocolStep::Conditional {
            predicate: match predicate {
                PredicateDoc::Parity { parity, odd } => Predicate::Parity {
                    steps: parity.clone(),
                    odd: *odd,
                },
                PredicateDoc::Equals { step, equals } => Predicate::Equals {
                    step: *step,
                    value: *equals,
                },
            },
            step: Box::new(resolve_step(then, shape, base, true)?),
        },
    })
}

/// Reads a protocol file and resolves it against the initial state shape.
pub fn load_protocol(path: &Path, shape: &SystemShape) -> Result<Vec<ProtocolStep>> {
    let doc: ProtocolDoc = parse(&read_text(path)?, "protocol document")?;
    let base = path.parent().unwrap_or(Path::new("."));
    doc.resolve(shape, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{three_qubit_example, werner};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn state_round_trip_is_exact() {
        for rho in [
            werner(0.7).unwrap(),
            three_qubit_example(0.3).unwrap().tensor_power(2).unwrap(),
        ] {
            let back = state_from_json(&state_to_json(&rho), &tol()).unwrap();
            assert_eq!(back, rho);
        }
    }

    #[test]
    fn sparse_state() {
        let text = r#"{"parties":[{"label":"A","dim":2},{"label":"B","dim":2}],
            "matrix":[{"row":0,"col":0,"re":0.5},{"row":3,"col":3,"re":0.5},
                      {"row":0,"col":3,"re":0.5},{"row":3,"col":0,"re":0.5}]}"#;
        let rho = state_from_json(text, &tol()).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn malformed_states() {
        let cases = [
            r#"{"parties":[{"label":"A","dim":2}],"matrix":{"re":[[1,0],[0,0]]},"extra":1}"#,
            r#"{"parties":[{"label":"A","dim":2}],"matrix":{"re":[[1,0],[0]]}}"#,
            r#"{"parties":[{"label":"A","dim":2}],"matrix":{"re":[[0.5,0],[0,0.6]]}}"#,
            r#"{"parties":[{"label":"A","dim":2}],"matrix":{"re":[[0.5,0.1],[0,0.5]]}}"#,
            r#"{"parties":[{"label":"A","dim":2}],"matrix":{"re":[[1.5,0],[0,-0.5]]}}"#,
            r#"{"parties":[{"label":"A","dim":3}],"matrix":{"re":[[1,0],[0,0]]}}"#,
            r#"{"parties":[{"label":"A"}],"matrix":{"re":[[1,0],[0,0]]}}"#,
            r#"{"parties":[{"label":"A","dim":2}],"matrix":[{"row":0,"col":0,"re":1},{"row":0,"col":0,"re":1}]}"#,
            r#"not json"#,
        ];
        for c in cases {
            assert!(state_from_json(c, &tol()).is_err(), "{c}");
        }
    }

    #[test]
    fn subspace_and_bases_documents() {
        let rho2 = three_qubit_example(0.5).unwrap().tensor_power(2).unwrap();
        let text = r#"{"parties":[{"label":"A","indices":[1,2]},{"label":"B","indices":[1,2]},{"label":"C","indices":[1,2]}]}"#;
        let doc: VectorsDoc = serde_json::from_str(text).unwrap();
        let s = doc.to_subspace(rho2.shape()).unwrap();
        assert_eq!(s.dims(), vec![2, 2, 2]);
        let back = VectorsDoc::from_subspace(rho2.shape(), &s)
            .to_subspace(rho2.shape())
            .unwrap();
        assert_eq!(back, s);
        assert!(doc.to_bases(rho2.shape()).is_err());
    }

    #[test]
    fn protocol_document_matches_builder() {
        let rho2 = three_qubit_example(0.5).unwrap().tensor_power(2).unwrap();
        let text = r#"{"steps":[
            {"kind":"project","subspace":{"parties":[{"label":"A","indices":[1,2]},{"label":"B","indices":[1,2]},{"label":"C","indices":[1,2]}]}},
            {"kind":"local_unitary","unitaries":[
                {"party":"A","matrix":{"re":[[0.7071067811865476,0.7071067811865476,0,0],[0.7071067811865476,-0.7071067811865476,0,0],[0,0,0.7071067811865476,0.7071067811865476],[0,0,0.7071067811865476,-0.7071067811865476]]}},
                {"party":"B","matrix":{"re":[[0.7071067811865476,0.7071067811865476,0,0],[0.7071067811865476,-0.7071067811865476,0,0],[0,0,0.7071067811865476,0.7071067811865476],[0,0,0.7071067811865476,-0.7071067811865476]]}},
                {"party":"C","matrix":{"re":[[0.7071067811865476,0.7071067811865476,0,0],[0.7071067811865476,-0.7071067811865476,0,0],[0,0,0.7071067811865476,0.7071067811865476],[0,0,0.7071067811865476,-0.7071067811865476]]}}]},
            {"kind":"measure_and_discard","party":"A","subsystem":1},
            {"kind":"measure_and_discard","party":"B","subsystem":1},
            {"kind":"measure_and_discard","party":"C","subsystem":1},
            {"kind":"conditional","predicate":{"parity":[2,3,4],"odd":true},
             "then":{"kind":"local_unitary","unitaries":[{"party":"A","matrix":{"re":[[1,0],[0,-1]]}}]}}
        ]}"#;
        let doc: ProtocolDoc = serde_json::from_str(text).unwrap();
        let steps = doc.resolve(rho2.shape(), Path::new(".")).unwrap();
        let built = crate::protocols::ghz_protocol(rho2.shape(), true).unwrap();
        let a = crate::protocols::run(&steps, &rho2).unwrap();
        let b = crate::protocols::run(&built, &rho2).unwrap();
        assert_eq!(a.branches.len(), b.branches.len());
        for (x, y) in a.branches.iter().zip(&b.branches) {
            assert!((x.probability - y.probability).abs() < 1e-14);
            assert!(x.state.matrix().max_abs_diff(y.state.matrix()) < 1e-12);
        }
    }

    #[test]
    fn protocol_errors_name_the_step() {
        let rho = werner(0.9).unwrap();
        let text = r#"{"steps":[{"kind":"local_unitary","unitaries":[]},{"kind":"measure_and_discard","party":"Q","subsystem":0}]}"#;
        let doc: ProtocolDoc = serde_json::from_str(text).unwrap();
        assert!(matches!(
            doc.resolve(rho.shape(), Path::new(".")),
            Err(Error::Protocol { step: 1, .. })
        ));
    }
}
