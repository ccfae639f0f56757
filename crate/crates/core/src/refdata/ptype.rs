use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// The eight problem categories of the reference dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProblemType {
    #[serde(rename = "NRM")]
    Nrm,
    #[serde(rename = "RA")]
    Ra,
    #[serde(rename = "TP")]
    Tp,
    #[serde(rename = "FLP")]
    Flp,
    #[serde(rename = "AP")]
    Ap,
    #[serde(rename = "SBLP")]
    Sblp,
    Others,
    Mixture,
}

impl ProblemType {
    pub const ALL: [ProblemType; 8] = [
        ProblemType::Nrm,
        ProblemType::Ra,
        ProblemType::Tp,
        ProblemType::Flp,
        ProblemType::Ap,
        ProblemType::Sblp,
        ProblemType::Others,
        ProblemType::Mixture,
    ];

    /// Types that get a demo-driven workflow.
    pub const TAILORED: [ProblemType; 6] = [
        ProblemType::Nrm,
        ProblemType::Ra,
        ProblemType::Tp,
        ProblemType::Flp,
        ProblemType::Ap,
        ProblemType::Sblp,
    ];

    pub fn full_name(self) -> &'static str {
        match self {
            ProblemType::Nrm => "Network Revenue Management",
            ProblemType::Ra => "Resource Allocation",
            ProblemType::Tp => "Transportation",
            ProblemType::Flp => "Facility Location",
            ProblemType::Ap => "Assignment",
            ProblemType::Sblp => "Sales-Based Linear Programming",
            ProblemType::Others => "Others",
            ProblemType::Mixture => "Mixture",
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            ProblemType::Nrm => "NRM",
            ProblemType::Ra => "RA",
            ProblemType::Tp => "TP",
            ProblemType::Flp => "FLP",
            ProblemType::Ap => "AP",
            ProblemType::Sblp => "SBLP",
            ProblemType::Others => "Others",
            ProblemType::Mixture => "Mixture",
        }
    }

    pub fn is_tailored(self) -> bool {
        !matches!(self, ProblemType::Others | ProblemType::Mixture)
    }

    /// Match free text against the allowed list. Case, punctuation, a
    /// trailing "problem" and a parenthesised code are ignored.
    pub fn from_answer(text: &str) -> Option<ProblemType> {
        let norm: String = text
            .chars()
            .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
            .collect();
        let words: Vec<&str> = norm.split_whitespace().collect();
        let mut words: &[&str] = &words;
        while let Some((last, rest)) = words.split_last() {
            if matches!(*last, "problem" | "problems" | "type") {
                words = rest;
            } else {
                break;
            }
        }
        let joined = words.join(" ");
        ProblemType::ALL.into_iter().find(|t| {
            let full = t.full_name().to_ascii_lowercase().replace('-', " ");
            let code = t.code().to_ascii_lowercase();
            joined == full
                || joined == code
                || joined == format!("{full} {code}")
                || joined == format!("{full} problem {code}")
                || (*t == ProblemType::Others && joined == "other")
        })
    }
}

impl fmt::Display for ProblemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.full_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{0}` is not one of the allowed problem types")]
pub struct UnknownProblemType(pub String);

impl FromStr for ProblemType {
    type Err = UnknownProblemType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProblemType::from_answer(s).ok_or_else(|| UnknownProblemType(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answers_normalize() {
        assert_eq!(ProblemType::from_answer("Network Revenue Management."), Some(ProblemType::Nrm));
        assert_eq!(ProblemType::from_answer("Resource Allocation Problem"), Some(ProblemType::Ra));
        assert_eq!(ProblemType::from_answer("facility location problem (FLP)"), Some(ProblemType::Flp));
        assert_eq!(ProblemType::from_answer("Sales-Based Linear Programming"), Some(ProblemType::Sblp));
        assert_eq!(ProblemType::from_answer("tp"), Some(ProblemType::Tp));
        assert_eq!(ProblemType::from_answer("Inventory Management Problem"), None);
        for t in ProblemType::ALL {
            assert_eq!(ProblemType::from_answer(t.full_name()), Some(t));
            assert_eq!(t.code().parse::<ProblemType>().unwrap(), t);
        }
    }
}
