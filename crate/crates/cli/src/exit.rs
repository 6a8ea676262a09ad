use std::fmt::Display;

/// Bad input, missing files, client or I/O failure.
pub const INPUT: u8 = 2;
/// Script parse or validation failure.
pub const VALIDATION: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self { code: INPUT, error: error.into() }
    }

    pub fn validation(error: impl Into<anyhow::Error>) -> Self {
        Self { code: VALIDATION, error: error.into() }
    }
}

pub trait OrExit<T> {
    fn or_input(self, context: impl Display) -> Result<T, Failure>;
    fn or_validation(self, context: impl Display) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_input(self, context: impl Display) -> Result<T, Failure> {
        self.map_err(|e| Failure::input(e.into().context(context.to_string())))
    }

    fn or_validation(self, context: impl Display) -> Result<T, Failure> {
        self.map_err(|e| Failure::validation(e.into().context(context.to_string())))
    }
}
