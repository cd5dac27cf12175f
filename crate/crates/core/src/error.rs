use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("axis {axis} out of range for rank-{rank} tensor")]
    AxisOutOfRange { axis: usize, rank: usize },

    #[error("invalid axis partition: {0}")]
    Partition(String),

    #[error("matrix is not symmetric (max deviation {deviation:.3e})")]
    NotSymmetric { deviation: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error(
        "time step dt = {dt} exceeds the {limit} guard; coarse-grained truncation selects \
         high-energy states in this regime (pass the override flag to run anyway)"
    )]
    DtGuard { dt: f64, limit: f64 },

    #[error("site {site} out of range for a {n_sites}-site chain")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("dense reference limited to {max} sites, got {n_sites}")]
    SizeGuard { n_sites: usize, max: usize },

    #[error("state has zero norm after {0}")]
    ZeroNorm(&'static str),

    #[error("fingerprint mismatch: expected `{expected}`, found `{found}`")]
    Fingerprint { expected: String, found: String },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("malformed cache file: {0}")]
    CacheFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl From<ndarray::ShapeError> for Error {
    fn from(e: ndarray::ShapeError) -> Self {
        Error::Shape(e.to_string())
    }
}
