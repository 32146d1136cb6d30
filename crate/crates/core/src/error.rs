use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {context}: {left} vs {right}")]
    Shape {
        context: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("invalid dimensions: {0}")]
    Dimensions(String),

    #[error("model file format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("model file shape validation failed at byte offset {offset}: {message}")]
    ShapeValidation { offset: u64, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(context: &'static str, left: Shape, right: Shape) -> Self {
        Error::Shape {
            context,
            left,
            right,
        }
    }
}
