use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
    Skipped,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_fail(self) -> bool {
        self == Verdict::Fail
    }

    /// Worst of two verdicts; `Skipped` never dominates.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Warn, _) | (_, Warn) => Warn,
            (Pass, _) | (_, Pass) => Pass,
            _ => Skipped,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Warn => "WARN",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIPPED",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_and_wire_format() {
        assert_eq!(Verdict::Pass.and(Verdict::Skipped), Verdict::Pass);
        assert_eq!(Verdict::Warn.and(Verdict::Pass), Verdict::Warn);
        assert_eq!(Verdict::Skipped.and(Verdict::Fail), Verdict::Fail);
        assert_eq!(serde_json::to_string(&Verdict::Skipped).unwrap(), "\"SKIPPED\"");
    }
}
