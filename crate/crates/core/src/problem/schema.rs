//! JSON problem files.
//!
//! ```json
//! {"n": 2, "m_I": 1, "m_E": 1,
//!  "quadratic": {"H": [[2, 0], [0, 2]], "q": [0, 0]},
//!  "ineq_affine": {"F": [[1, 0]], "v": [1]},
//!  "ineq_builtin": [],
//!  "A": [[1, 1]], "b": [1], "mu": 2, "ell": 2}
//! ```
//!
//! Affine rows come first in the constraint order, then built-ins. Matrices
//! are row-major.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ConvexProgram, Hessian, Inequality, QuadraticFn};
use crate::error::{Error, Result};
use crate::io::to_json_string;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBlock {
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineBlock {
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    pub v: Vec<f64>,
}

/// A named nonlinear inequality.
///
/// `"soc"` alone is the unit ball `‖x‖² − 1 ≤ 0`; the object form restricts
/// it to `indices`, shifts it to `center` and sets `radius`:
/// `Σ_{j∈indices} (x_j − center_j)² − radius² ≤ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BuiltinIneq {
    Named(String),
    Parameterized {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        indices: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
}

impl BuiltinIneq {
    fn build(&self, n: usize) -> Result<Inequality> {
        let (name, indices, center, radius) = match self {
            BuiltinIneq::Named(name) => (name.as_str(), None, None, None),
            BuiltinIneq::Parameterized {
                name,
                indices,
                center,
                radius,
            } => (name.as_str(), indices.as_ref(), center.as_ref(), *radius),
        };
        match name {
            "soc" => {
                let idx: Vec<usize> = indices.cloned().unwrap_or_else(|| (0..n).collect());
                if idx.iter().any(|&j| j >= n) {
                    return Err(Error::contract("soc index out of range"));
                }
                if let Some(c) = center {
                    if c.len() != idx.len() {
                        return Err(Error::contract("soc center length must match indices"));
                    }
                }
                let radius = radius.unwrap_or(1.0);
                if !(radius > 0.0) {
                    return Err(Error::contract("soc radius must be positive"));
                }
                let mut diag = DVector::zeros(n);
                let mut lin = DVector::zeros(n);
                let mut constant = -radius * radius;
                for (k, &j) in idx.iter().enumerate() {
                    let cj = center.map_or(0.0, |c| c[k]);
                    diag[j] += 2.0;
                    lin[j] -= 2.0 * cj;
                    constant += cj * cj;
                }
                Ok(Inequality::new(QuadraticFn::new(
                    Hessian::Diagonal(diag),
                    lin,
                    constant,
                )))
            }
            other => Err(Error::contract(format!("unknown built-in inequality '{other}'"))),
        }
    }
}

/// Serialized form of a program with quadratic objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    #[serde(rename = "m_I")]
    pub m_i: usize,
    #[serde(rename = "m_E")]
    pub m_e: usize,
    pub quadratic: QuadraticBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ineq_affine: Option<AffineBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ineq_builtin: Vec<BuiltinIneq>,
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<f64>,
    pub mu: f64,
    pub ell: f64,
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::contract(format!(
            "{what}: row {bad} has length {}, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Pretty JSON with 17-significant-digit doubles.
    pub fn to_json(&self) -> String {
        to_json_string(self)
    }

    pub fn to_program(&self, name: impl Into<String>) -> Result<ConvexProgram> {
        let n = self.n;
        let h = matrix_from_rows(&self.quadratic.h, n, "H")?;
        if h.nrows() != n {
            return Err(Error::contract(format!("H has {} rows, expected {n}", h.nrows())));
        }
        if self.quadratic.q.len() != n {
            return Err(Error::contract("q length mismatch"));
        }
        if (&h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
            return Err(Error::contract("H must be symmetric"));
        }
        let objective = QuadraticFn::new(Hessian::Dense(h), DVector::from_column_slice(&self.quadratic.q), 0.0);

        let mut inequalities = Vec::new();
        if let Some(aff) = &self.ineq_affine {
            let f = matrix_from_rows(&aff.f, n, "F")?;
            if aff.v.len() != f.nrows() {
                return Err(Error::contract("F and v row counts differ"));
            }
            for (row, &v) in f.row_iter().zip(aff.v.iter()) {
                inequalities.push(Inequality::affine(row.transpose(), v));
            }
        }
        for b in &self.ineq_builtin {
            inequalities.push(b.build(n)?);
        }
        if inequalities.len() != self.m_i {
            return Err(Error::contract(format!(
                "m_I = {} but {} inequalities given",
                self.m_i,
                inequalities.len()
            )));
        }
        let a = matrix_from_rows(&self.a, n, "A")?;
        if a.nrows() != self.m_e || self.b.len() != self.m_e {
            return Err(Error::contract(format!(
                "m_E = {} but A has {} rows and b has length {}",
                self.m_e,
                a.nrows(),
                self.b.len()
            )));
        }
        ConvexProgram::new(
            name,
            n,
            objective,
            inequalities,
            a,
            DVector::from_column_slice(&self.b),
            self.mu,
            self.ell,
        )
    }

    /// Assemble a spec from dense QP data (`Fx ≤ v`, `Ax = b`).
    #[allow(clippy::too_many_arguments)]
    pub fn from_qp(
        h: &DMatrix<f64>,
        q: &DVector<f64>,
        f: &DMatrix<f64>,
        v: &DVector<f64>,
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        mu: f64,
        ell: f64,
    ) -> Self {
        ProblemSpec {
            n: q.len(),
            m_i: f.nrows(),
            m_e: a.nrows(),
            quadratic: QuadraticBlock {
                h: rows_of(h),
                q: q.iter().copied().collect(),
            },
            ineq_affine: (f.nrows() > 0).then(|| AffineBlock {
                f: rows_of(f),
                v: v.iter().copied().collect(),
            }),
            ineq_builtin: Vec::new(),
            a: rows_of(a),
            b: b.iter().copied().collect(),
            mu,
            ell,
        }
    }
}
