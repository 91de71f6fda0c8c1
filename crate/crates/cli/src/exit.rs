//! Process exit codes. Stable across releases.

pub const OK: u8 = 0;
pub const USAGE: u8 = 1;
pub const VALIDATION: u8 = 2;
pub const REJECTED: u8 = 3;
pub const REFUSED: u8 = 4;
pub const IO: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl std::fmt::Display) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

pub fn usage(m: impl std::fmt::Display) -> Failure {
    Failure::new(USAGE, m)
}

pub fn invalid(m: impl std::fmt::Display) -> Failure {
    Failure::new(VALIDATION, m)
}

pub fn io(m: impl std::fmt::Display) -> Failure {
    Failure::new(IO, m)
}
