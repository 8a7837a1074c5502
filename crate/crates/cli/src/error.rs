use std::fmt;

/// Bad flags, unreadable inputs or an invalid configuration (exit 2).
#[derive(Debug)]
pub struct Usage(pub String);

/// A guarantee suite found a counterexample (exit 3).
#[derive(Debug)]
pub struct Violation(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}
impl std::error::Error for Violation {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        2
    } else if err.downcast_ref::<Violation>().is_some() {
        3
    } else {
        1
    }
}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_the_error_kind() {
        assert_eq!(exit_code(&usage("bad flag")), 2);
        assert_eq!(exit_code(&Violation("bound".into()).into()), 3);
        assert_eq!(exit_code(&anyhow::Error::from(lowrank_core::Error::AllCandidatesInfeasible)), 1);
        assert_eq!(exit_code(&usage("inner").context("outer")), 2);
    }
}
