//! JSON schemas for problem files, subspaces, index queries and curves. Matrices are arrays of rows.

use crate::error::{Error, Result};
use crate::indices::{kashiwara, leray, lift_curve, positive_maslov, LiftedPlane};
use crate::lderiv::JacobiCurve;
use crate::linearization::{builtin, PiecewiseTable, ProblemLinearization};
use crate::morse::ConjugatePoint;
use crate::symplectic::{fiber_plane, LinearSubspace, SymplecticSpace};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub type Rows = Vec<Vec<f64>>;

/// Reads a row-array matrix; an empty array is `0 × 0`.
pub fn matrix_from_rows(rows: &Rows, what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Invalid(format!(
            "{what}: rows have different lengths"
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("{what}: non-finite entry")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn n0_matrix(rows: &Rows, n: usize) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows.iter().all(Vec::is_empty) {
        return Ok(DMatrix::zeros(n, 0));
    }
    let m = matrix_from_rows(rows, "N0")?;
    if m.nrows() != n {
        return Err(Error::Dimension(format!(
            "N0 has {} rows, expected {n}",
            m.nrows()
        )));
    }
    Ok(m)
}

/// Piecewise-constant table as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableFile {
    pub times: Vec<f64>,
    pub values: Vec<Rows>,
}

impl TableFile {
    fn to_table(&self, what: &str) -> Result<PiecewiseTable<f64>> {
        let values = self
            .values
            .iter()
            .map(|v| matrix_from_rows(v, what))
            .collect::<Result<Vec<_>>>()?;
        Ok(PiecewiseTable {
            times: self.times.clone(),
            values,
        })
    }
}

/// Problem description. `N0` is an `n × d` basis of the initial manifold's tangent space; empty means a point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProblemFile {
    Lq {
        #[serde(rename = "A")]
        a: Rows,
        #[serde(rename = "B")]
        b: Rows,
        #[serde(rename = "W")]
        w: Rows,
        #[serde(rename = "R")]
        r: Rows,
        #[serde(rename = "T")]
        horizon: f64,
        #[serde(rename = "N0", default)]
        n0: Rows,
    },
    Builtin {
        name: String,
        #[serde(rename = "T", default)]
        horizon: Option<f64>,
    },
    Table {
        n: usize,
        k: usize,
        #[serde(rename = "C")]
        c: TableFile,
        #[serde(rename = "D")]
        d: TableFile,
        b: TableFile,
        #[serde(rename = "T")]
        horizon: f64,
        #[serde(rename = "N0", default)]
        n0: Rows,
    },
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("problem file: {e}")))
    }

    pub fn horizon(&self) -> Option<f64> {
        match self {
            ProblemFile::Lq { horizon, .. } | ProblemFile::Table { horizon, .. } => Some(*horizon),
            ProblemFile::Builtin { horizon, .. } => *horizon,
        }
    }

    /// Builds the linearization; `t_max` overrides the stored horizon.
    pub fn build(&self, t_max: Option<f64>) -> Result<ProblemLinearization<f64>> {
        let horizon = t_max.or(self.horizon()).ok_or_else(|| {
            Error::Invalid("no horizon: set T in the file or pass --t-max".into())
        })?;
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::Invalid("horizon must be positive".into()));
        }
        match self {
            ProblemFile::Lq { a, b, w, r, n0, .. } => {
                let a = matrix_from_rows(a, "A")?;
                let n = a.nrows();
                let mut prob = ProblemLinearization::lq(
                    a,
                    matrix_from_rows(b, "B")?,
                    matrix_from_rows(w, "W")?,
                    matrix_from_rows(r, "R")?,
                    horizon,
                    n0_matrix(n0, n)?,
                )?;
                prob.name = "lq".into();
                Ok(prob)
            }
            ProblemFile::Builtin { name, .. } => builtin(name, horizon, None),
            ProblemFile::Table {
                n, k, c, d, b, n0, ..
            } => ProblemLinearization::piecewise(
                *n,
                *k,
                c.to_table("C")?,
                d.to_table("D")?,
                b.to_table("b")?,
                horizon,
                n0_matrix(n0, *n)?,
            ),
        }
    }
}

/// Subspace file: `basis` is `2n × d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubspaceFile {
    pub n: usize,
    pub basis: Rows,
}

impl SubspaceFile {
    pub fn from_subspace(s: &LinearSubspace<f64>) -> Self {
        Self {
            n: s.ambient() / 2,
            basis: matrix_to_rows(s.basis()),
        }
    }

    pub fn to_subspace(&self, tol: f64) -> Result<LinearSubspace<f64>> {
        plane_from_rows(&self.basis, self.n, tol)
    }
}

fn plane_from_rows(rows: &Rows, n: usize, tol: f64) -> Result<LinearSubspace<f64>> {
    let m = matrix_from_rows(rows, "basis")?;
    if m.nrows() != 2 * n {
        return Err(Error::Dimension(format!(
            "basis has {} rows, expected {}",
            m.nrows(),
            2 * n
        )));
    }
    Ok(LinearSubspace::span(&m, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexOp {
    Kashiwara,
    Ind,
    Leray,
}

/// Index query. Planes are `2n × n` bases; `pi` defaults to the fiber plane.
///
/// `kashiwara` takes `[Λ₁, Λ₂]` with `pi` in the middle, or three planes and no `pi`.
/// `ind` takes `[Λ₁, Λ₂]`. `leray` lifts the planes as a curve from the lifted `pi`
/// and returns `Li` of the first against the last sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexQuery {
    pub planes: Vec<Rows>,
    #[serde(default)]
    pub pi: Option<Rows>,
    pub op: IndexOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IndexAnswer {
    pub op: IndexOp,
    pub value: f64,
    pub halves: i64,
}

impl IndexQuery {
    pub fn evaluate(&self, tol: f64) -> Result<IndexAnswer> {
        let first = self
            .planes
            .first()
            .ok_or_else(|| Error::Invalid("no planes given".into()))?;
        if first.len() % 2 != 0 || first.is_empty() {
            return Err(Error::Dimension("plane bases need 2n rows".into()));
        }
        let n = first.len() / 2;
        let space = SymplecticSpace::standard(n);
        let planes = self
            .planes
            .iter()
            .map(|p| plane_from_rows(p, n, tol))
            .collect::<Result<Vec<_>>>()?;
        let pi = match &self.pi {
            Some(p) => plane_from_rows(p, n, tol)?,
            None => fiber_plane(n),
        };
        let halves = match self.op {
            IndexOp::Kashiwara => {
                let v = match (planes.as_slice(), &self.pi) {
                    ([a, b], _) => kashiwara(&space, a, &pi, b, tol)?,
                    ([a, m, b], None) => kashiwara(&space, a, m, b, tol)?,
                    _ => {
                        return Err(Error::Invalid(
                            "kashiwara takes two planes and pi, or three planes".into(),
                        ))
                    }
                };
                2 * v
            }
            IndexOp::Ind => match planes.as_slice() {
                [a, b] => positive_maslov(&space, a, &pi, b, tol)?.halves(),
                _ => return Err(Error::Invalid("ind takes two planes".into())),
            },
            IndexOp::Leray => {
                let lifted = lift_curve(
                    &space,
                    LiftedPlane::base_point(&pi),
                    &planes,
                    self.seed.unwrap_or(0),
                    tol,
                )?;
                2 * leray(&space, &lifted[1], lifted.last().expect("nonempty"), tol)?
            }
        };
        Ok(IndexAnswer {
            op: self.op,
            value: halves as f64 / 2.0,
            halves,
        })
    }
}

/// Sampled Jacobi curve with its conjugate points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveOutput {
    pub times: Vec<f64>,
    pub planes: Vec<Rows>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lifts: Option<Vec<i64>>,
    pub conjugate: Vec<ConjugatePoint>,
}

impl CurveOutput {
    pub fn new(curve: &JacobiCurve<f64>, conjugate: Vec<ConjugatePoint>) -> Self {
        Self {
            times: curve.times.clone(),
            planes: curve
                .planes
                .iter()
                .map(|p| matrix_to_rows(p.basis()))
                .collect(),
            lifts: curve.lifts.clone(),
            conjugate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lq_file_round_trip() {
        let text = r#"{"type":"lq","A":[[0.0]],"B":[[1.0]],"W":[[-1.0]],"R":[[1.0]],"T":10.0}"#;
        let f = ProblemFile::from_json(text).unwrap();
        let p = f.build(None).unwrap();
        assert_eq!((p.n, p.k, p.n0_tangent.ncols()), (1, 1, 0));
        assert_eq!(p.horizon, 10.0);
        assert_eq!(f.build(Some(2.0)).unwrap().horizon, 2.0);
        let again = ProblemFile::from_json(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(again.horizon(), Some(10.0));
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(ProblemFile::from_json("{").is_err());
        assert!(ProblemFile::from_json(r#"{"type":"nope"}"#).is_err());
        let ragged =
            r#"{"type":"lq","A":[[0.0,1.0],[0.0]],"B":[[1.0]],"W":[[0.0]],"R":[[1.0]],"T":1.0}"#;
        assert!(ProblemFile::from_json(ragged).unwrap().build(None).is_err());
        let no_t = ProblemFile::from_json(r#"{"type":"builtin","name":"free_particle"}"#).unwrap();
        assert!(no_t.build(None).is_err());
        assert!(no_t.build(Some(1.0)).is_ok());
    }

    #[test]
    fn index_queries() {
        let q: IndexQuery = serde_json::from_str(
            r#"{"planes":[[[1.0],[1.0]],[[1.0],[-1.0]]],"pi":[[1.0],[0.0]],"op":"kashiwara"}"#,
        )
        .unwrap();
        assert_eq!(q.evaluate(1e-10).unwrap().halves, -2);
        let q = IndexQuery {
            op: IndexOp::Ind,
            planes: vec![vec![vec![0.0], vec![1.0]], vec![vec![1.0], vec![0.0]]],
            pi: None,
            seed: None,
        };
        let a = q.evaluate(1e-10).unwrap();
        assert_eq!((a.value, a.halves), (0.5, 1));
    }
}
