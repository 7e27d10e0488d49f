//! Library surface of the command-line tool, exposed so integration tests
//! can drive the commands directly.

pub mod commands;
pub mod config;

use vitatt_core::error::Error;

/// Exit code contract: 1 usage, 2 data problems, 3 numeric failures.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidConfig(_) => 1,
        Error::Io(_)
        | Error::Csv(_)
        | Error::MalformedRow { .. }
        | Error::UnknownLevel { .. }
        | Error::MissingImage(_)
        | Error::BadImage(_)
        | Error::Checkpoint(_)
        | Error::Data(_)
        | Error::EmptyClass { .. }
        | Error::LabelOutOfRange { .. } => 2,
        Error::ShapeMismatch { .. }
        | Error::NonFinite { .. }
        | Error::NonScalarLoss { .. }
        | Error::BatchTooSmall { .. }
        | Error::MissingTraceGradients
        | Error::Diverged { .. } => 3,
    }
}
