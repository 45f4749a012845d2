use crate::baddata::BadDataError;
use crate::estimation::EstimationError;
use crate::io::IoError;
use crate::lp::LpError;
use crate::measurement::MeasurementError;
use crate::network::NetworkError;
use crate::observability::ObservabilityError;
use crate::opf::OpfError;
use crate::powerflow::PowerFlowError;
use crate::qss::QssError;
use crate::sparse::SparseError;
use thiserror::Error;

/// Any error the crate produces.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Opf(#[from] OpfError),
    #[error(transparent)]
    Observability(#[from] ObservabilityError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    BadData(#[from] BadDataError),
    #[error(transparent)]
    Qss(#[from] QssError),
}

impl Error {
    /// True when the inputs were malformed or inconsistent, as opposed to
    /// a well-posed analysis that failed (divergence, infeasibility,
    /// unobservability).
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io(_) | Error::Network(_) | Error::Measurement(_) => true,
            Error::PowerFlow(PowerFlowError::Network(_)) => true,
            Error::Opf(OpfError::Network(_) | OpfError::MissingCost(_) | OpfError::NonlinearCost { .. } | OpfError::UnboundedCostRange(_)) => {
                true
            }
            Error::Estimation(EstimationError::Network(_) | EstimationError::Measurement(_)) => true,
            Error::Observability(
                ObservabilityError::Network(_) | ObservabilityError::InvalidPseudo(_) | ObservabilityError::UnknownElement { .. },
            ) => true,
            Error::BadData(BadDataError::Estimation(e)) => matches!(e, EstimationError::Network(_) | EstimationError::Measurement(_)),
            Error::Qss(e) => e.is_input_error(),
            _ => false,
        }
    }
}
