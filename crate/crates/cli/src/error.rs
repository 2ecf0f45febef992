use std::fmt;

use condprep_core::Error;

/// Failures surfaced by the command-line tool, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(Error),
    Io(String),
    /// Number of acceptance criteria that failed.
    Verify(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::NotDetectable { .. } => 3,
                Error::NotPure { .. } => 4,
                Error::ImaginaryResidue { .. }
                | Error::IndefiniteP { .. }
                | Error::NotInDomRic { .. }
                | Error::IllConditionedSubspace { .. }
                | Error::UnstableDrift { .. }
                | Error::EigenSolverFailed => 5,
                Error::RankDeficient { .. } | Error::VerificationFailed { .. } => 6,
                Error::StepSizeTooLarge { .. } | Error::NonFiniteState { .. } => 7,
                Error::DimensionMismatch(_)
                | Error::NonSymmetricG { .. }
                | Error::NonSymmetric { .. }
                | Error::NotHermitian { .. }
                | Error::InvalidEfficiency(_)
                | Error::SingularCovariance
                | Error::InvalidConfig(_) => 2,
            },
            CliError::Verify(_) => 8,
            CliError::Io(_) => 9,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Core(Error::NotDetectable {
                eigenvalue,
                vector,
                margin,
            }) => {
                write!(
                    f,
                    "not detectable: unobserved mode at eigenvalue {:.6}{:+.6}i (margin {margin:.3e})\n  witness vector:",
                    eigenvalue.re, eigenvalue.im
                )?;
                for z in vector {
                    write!(f, " ({:.6}{:+.6}i)", z.re, z.im)?;
                }
                Ok(())
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::Verify(n) => write!(f, "{n} acceptance criteria failed"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
