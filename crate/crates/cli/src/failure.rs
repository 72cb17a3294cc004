//! Exit-code classification: 2 for bad input, 3 for numerical failure.

use std::fmt;

#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        Failure::Input(e.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(e) => write!(f, "input error: {e:#}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e:#}"),
        }
    }
}

impl From<ioncascade::Error> for Failure {
    fn from(e: ioncascade::Error) -> Self {
        use ioncascade::Error as E;
        match e {
            E::NotUnitary(_)
            | E::EquilibriumNotConverged { .. }
            | E::DecompositionFailed { .. }
            | E::TruncationNotConverged { .. }
            | E::FitFailed(_)
            | E::Tomography(_) => Failure::Numerical(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        let parse = ioncascade::Error::Parse { line: 3, reason: "unknown gate 'FOO'".into() };
        assert_eq!(Failure::from(parse).exit_code(), 2);
        assert_eq!(Failure::from(ioncascade::Error::FitFailed("x".into())).exit_code(), 3);
    }
}
