//! Per-graph operator bundle shared by the unrolled models and baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{eigendecompose, estimate_lambda_max, SpectralDecomposition};
use crate::sparse::{IncidenceOperator, SparseSymmetricMatrix};

/// How the `(I + L/γ)⁻¹` filter is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accel {
    /// Precomputed eigendecomposition.
    Evd,
    /// Chebyshev polynomial approximation.
    Cheb,
}

impl Accel {
    pub fn suffix(self) -> &'static str {
        match self {
            Accel::Evd => "E",
            Accel::Cheb => "C",
        }
    }
}

/// Immutable operators of one graph: incidence, Laplacian and whichever of
/// the eigendecomposition / spectral bound were requested.
#[derive(Debug, Clone)]
pub struct GraphContext {
    incidence: IncidenceOperator,
    laplacian: SparseSymmetricMatrix,
    decomposition: Option<SpectralDecomposition>,
    lambda_max: Option<f64>,
}

impl GraphContext {
    /// Operators for a single acceleration path.
    pub fn new(g: &Graph, accel: Accel) -> Result<Self> {
        let laplacian = g.laplacian();
        let (decomposition, lambda_max) = match accel {
            Accel::Evd => (Some(eigendecompose(&laplacian)?), None),
            Accel::Cheb => (None, Some(estimate_lambda_max(&laplacian))),
        };
        Ok(Self {
            incidence: g.incidence(),
            laplacian,
            decomposition,
            lambda_max,
        })
    }

    /// Operators for both paths.
    pub fn full(g: &Graph) -> Result<Self> {
        let laplacian = g.laplacian();
        Ok(Self {
            incidence: g.incidence(),
            decomposition: Some(eigendecompose(&laplacian)?),
            lambda_max: Some(estimate_lambda_max(&laplacian)),
            laplacian,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.laplacian.dim()
    }

    pub fn n_edges(&self) -> usize {
        self.incidence.n_edges()
    }

    pub fn incidence(&self) -> &IncidenceOperator {
        &self.incidence
    }

    pub fn laplacian(&self) -> &SparseSymmetricMatrix {
        &self.laplacian
    }

    pub fn decomposition(&self) -> Result<&SpectralDecomposition> {
        self.decomposition
            .as_ref()
            .ok_or_else(|| Error::Config("graph context has no eigendecomposition (EVD path unavailable)".into()))
    }

    pub fn lambda_max(&self) -> Result<f64> {
        self.lambda_max
            .ok_or_else(|| Error::Config("graph context has no spectral bound (Chebyshev path unavailable)".into()))
    }

    pub fn supports(&self, accel: Accel) -> bool {
        match accel {
            Accel::Evd => self.decomposition.is_some(),
            Accel::Cheb => self.lambda_max.is_some(),
        }
    }
}
