//! Exit-code contract: 2 for usage and validation problems, 3 for data
//! problems.

use crowdtrack::Error;

pub const USAGE: u8 = 2;
pub const DATA: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn usage(e: impl std::fmt::Display) -> Self {
        Self::new(USAGE, e.to_string())
    }

    pub fn data(e: impl std::fmt::Display) -> Self {
        Self::new(DATA, e.to_string())
    }
}

/// Library errors raised while processing already loaded inputs.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInput(_) | Error::InvalidParams { .. } => USAGE,
            Error::Data(_)
            | Error::FrameMismatch { .. }
            | Error::MissingGoal(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Io(_) => DATA,
        };
        Self::new(code, e.to_string())
    }
}
