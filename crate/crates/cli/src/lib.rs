//! Command implementations behind the `tablex` binary.

pub mod dataset;
pub mod evaluate;
pub mod extract;
pub mod inspect;
pub mod io;
pub mod leaderboard;
pub mod manifest;
pub mod pool;

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some inputs could not be fully processed.
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial => 1,
        }
    }

    pub fn worst(self, other: Outcome) -> Outcome {
        if self == Outcome::Partial || other == Outcome::Partial {
            Outcome::Partial
        } else {
            Outcome::Success
        }
    }
}

/// Exit code for fatal errors.
pub const EXIT_FATAL: u8 = 2;
