//! Wire schemas. Matrices travel as `{"rows": n, "cols": m, "data": [..]}`
//! with row-major data; pairs, estimators, certificates, and scenarios wrap
//! them as documented on each DTO. Parsing validates finiteness and shape
//! before anything numerical happens.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{CertificateReport, VerdictAl};
use crate::estimators::{EstimatorKind, EstimatorMatrix};
use crate::matrix::Matrix;
use crate::model::{LinearModel, ModelError, PerturbedPair};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("matrix data length {len} does not match {rows} x {cols}")]
    DataLength {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("unknown estimator kind {0:?}")]
    UnknownKind(String),
    #[error("estimator kind {kind:?} requires field {field:?}")]
    MissingField { kind: String, field: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// `{"rows": n, "cols": m, "data": [row-major reals]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(a: &Matrix) -> Self {
        let mut data = Vec::with_capacity(a.nrows() * a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                data.push(a[(i, j)]);
            }
        }
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix, SchemaError> {
        if self.data.len() != self.rows * self.cols {
            return Err(SchemaError::DataLength {
                rows: self.rows,
                cols: self.cols,
                len: self.data.len(),
            });
        }
        if self.data.iter().any(|x| !x.is_finite()) {
            return Err(SchemaError::NonFinite);
        }
        Ok(Matrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// `{"h": Matrix, "delta": Matrix, "epsilon": real, "r": int, "kappa": real}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairJson {
    pub h: MatrixJson,
    pub delta: MatrixJson,
    pub epsilon: f64,
    pub r: usize,
    pub kappa: f64,
}

impl PairJson {
    pub fn from_pair(pair: &PerturbedPair) -> Self {
        Self {
            h: MatrixJson::from_matrix(pair.base().h()),
            delta: MatrixJson::from_matrix(pair.delta()),
            epsilon: pair.epsilon(),
            r: pair.r(),
            kappa: pair.kappa(),
        }
    }

    pub fn to_pair(&self) -> Result<PerturbedPair, SchemaError> {
        let h = self.h.to_matrix()?;
        let delta = self.delta.to_matrix()?;
        let base = LinearModel::new(h, self.epsilon)?;
        Ok(PerturbedPair::new(base, delta, self.r, self.kappa)?)
    }
}

/// `{"kind": "mmse"|"rmmse"|"rsvd"|"ridge", "r": int?, "eta": real?, "w": Matrix}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub w: MatrixJson,
}

impl EstimatorJson {
    pub fn from_estimator(est: &EstimatorMatrix) -> Self {
        let (kind, r, eta) = match est.kind {
            EstimatorKind::Mmse => ("mmse", None, None),
            EstimatorKind::RMmse(r) => ("rmmse", Some(r), None),
            EstimatorKind::RSvd(r) => ("rsvd", Some(r), None),
            EstimatorKind::Ridge(eta) => ("ridge", None, Some(eta)),
        };
        Self {
            kind: kind.to_string(),
            r,
            eta,
            w: MatrixJson::from_matrix(&est.w),
        }
    }

    pub fn to_estimator(&self) -> Result<EstimatorMatrix, SchemaError> {
        let kind = match self.kind.as_str() {
            "mmse" => EstimatorKind::Mmse,
            "rmmse" => EstimatorKind::RMmse(self.r.ok_or(SchemaError::MissingField {
                kind: self.kind.clone(),
                field: "r",
            })?),
            "rsvd" => EstimatorKind::RSvd(self.r.ok_or(SchemaError::MissingField {
                kind: self.kind.clone(),
                field: "r",
            })?),
            "ridge" => EstimatorKind::Ridge(self.eta.ok_or(SchemaError::MissingField {
                kind: self.kind.clone(),
                field: "eta",
            })?),
            _ => return Err(SchemaError::UnknownKind(self.kind.clone())),
        };
        Ok(EstimatorMatrix {
            kind,
            w: self.w.to_matrix()?,
        })
    }
}

/// `{"rhs_el", "rhs_ter", "lhs_al", "threshold_al", "rho": [..],
///   "delta": [..], "rho_gate": bool, "verdict_al": ..}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateJson {
    pub rhs_el: f64,
    pub rhs_ter: f64,
    pub lhs_al: f64,
    pub threshold_al: f64,
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
    pub rho_gate: bool,
    pub verdict_al: String,
}

impl CertificateJson {
    pub fn from_report(report: &CertificateReport) -> Self {
        let verdict_al = match report.verdict_al {
            VerdictAl::MmseWorse => "mmse-worse",
            VerdictAl::Inconclusive => "inconclusive",
            VerdictAl::RhoGateFailed => "rho-gate-failed",
        };
        Self {
            rhs_el: report.rhs_el,
            rhs_ter: report.rhs_ter,
            lhs_al: report.lhs_al,
            threshold_al: report.threshold_al,
            rho: report.separation.rhos.clone(),
            delta: report.separation.deltas.clone(),
            rho_gate: report.rho_gate,
            verdict_al: verdict_al.to_string(),
        }
    }
}

/// Scenario output: the pair schema plus the seed it came from and how many
/// draws were rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioJson {
    #[serde(flatten)]
    pub pair: PairJson,
    pub seed: u64,
    pub rejects: u64,
}
