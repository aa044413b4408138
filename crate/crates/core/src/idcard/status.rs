use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerificationStatus {
    Uploaded,
    Extracted,
    Verified,
    Rejected,
}

impl VerificationStatus {
    pub const ALL: [VerificationStatus; 4] = [
        VerificationStatus::Uploaded,
        VerificationStatus::Extracted,
        VerificationStatus::Verified,
        VerificationStatus::Rejected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerificationStatus::Uploaded => "UPLOADED",
            VerificationStatus::Extracted => "EXTRACTED",
            VerificationStatus::Verified => "VERIFIED",
            VerificationStatus::Rejected => "REJECTED",
        }
    }

    pub fn can_transition_to(self, to: VerificationStatus) -> bool {
        use VerificationStatus::*;
        matches!(
            (self, to),
            (Uploaded, Extracted) | (Extracted, Verified) | (Extracted, Rejected)
        )
    }

    pub fn is_terminal(self) -> bool {
        VerificationStatus::ALL
            .iter()
            .all(|to| !self.can_transition_to(*to))
    }
}

impl fmt::Display for VerificationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VerificationStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VerificationStatus::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown status {s:?}"))
    }
}
