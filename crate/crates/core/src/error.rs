use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Point outside the chart domain or a singular expression at the point.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("jet order {requested} exceeds the maximum of {max}")]
    Order { requested: usize, max: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular bilinear form at {point:?}")]
    SingularForm { point: Vec<f64> },

    #[error("degenerate section: symmetric Rho tensor is singular at {point:?}")]
    DegenerateSection { point: Vec<f64> },

    #[error("section is not Lagrangian: skew part of Rho is {skew:e} at {point:?}")]
    NonLagrangian { point: Vec<f64>, skew: f64 },

    #[error("density vanishes at {point:?}")]
    ZeroDensity { point: Vec<f64> },

    #[error("projective class is not flat: {0}")]
    NotFlat(String),

    #[error("line is not transversal to the hyperplane sigma = 0")]
    Transversality,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("degenerate metric at {point:?}")]
    DegenerateMetric { point: Vec<f64> },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by numerics at a sample point rather than by
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::SingularForm { .. }
                | Error::DegenerateSection { .. }
                | Error::NonLagrangian { .. }
                | Error::ZeroDensity { .. }
                | Error::DegenerateMetric { .. }
                | Error::NotFlat(_)
                | Error::Transversality
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
