//! International Patent Classification codes.
//!
//! A code is parsed into its hierarchy levels (section, class, subclass and an
//! optional main-group/subgroup pair). The canonical textual form is
//! `G06F` for subclass-level codes and `G06F 17/30` for group-level codes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Hierarchy level used when truncating codes into categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IpcLevel {
    Section,
    Class,
    Subclass,
    Group,
}

impl FromStr for IpcLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "section" => Ok(IpcLevel::Section),
            "class" => Ok(IpcLevel::Class),
            "subclass" => Ok(IpcLevel::Subclass),
            "group" => Ok(IpcLevel::Group),
            other => Err(format!("unknown IPC level `{other}`")),
        }
    }
}

/// A parsed IPC code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IpcCode {
    section: char,
    class: u8,
    subclass: char,
    group: Option<(u16, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid IPC code `{0}`")]
pub struct IpcParseError(pub String);

const SECTIONS: &str = "ABCDEFGHY";

impl IpcCode {
    pub fn parse(raw: &str) -> Result<Self, IpcParseError> {
        let err = || IpcParseError(raw.to_string());
        let s = raw.trim();
        let bytes = s.as_bytes();
        if bytes.len() < 4 || !s.is_ascii() {
            return Err(err());
        }
        let section = (bytes[0] as char).to_ascii_uppercase();
        if !SECTIONS.contains(section) {
            return Err(err());
        }
        if !bytes[1].is_ascii_digit() || !bytes[2].is_ascii_digit() {
            return Err(err());
        }
        let class = (bytes[1] - b'0') * 10 + (bytes[2] - b'0');
        let subclass = (bytes[3] as char).to_ascii_uppercase();
        if !subclass.is_ascii_uppercase() {
            return Err(err());
        }
        let rest = s[4..].trim();
        let group = if rest.is_empty() {
            None
        } else {
            let (main, sub) = rest.split_once('/').ok_or_else(err)?;
            let main = main.trim();
            let sub = sub.trim();
            let digits = |t: &str, max: usize| !t.is_empty() && t.len() <= max && t.bytes().all(|b| b.is_ascii_digit());
            if !digits(main, 4) || !digits(sub, 6) {
                return Err(err());
            }
            Some((main.parse().map_err(|_| err())?, sub.to_string()))
        };
        Ok(IpcCode { section, class, subclass, group })
    }

    pub fn section(&self) -> char {
        self.section
    }

    pub fn class(&self) -> u8 {
        self.class
    }

    pub fn subclass(&self) -> char {
        self.subclass
    }

    pub fn group(&self) -> Option<(u16, &str)> {
        self.group.as_ref().map(|(m, s)| (*m, s.as_str()))
    }

    /// The deepest level this code carries.
    pub fn level(&self) -> IpcLevel {
        if self.group.is_some() {
            IpcLevel::Group
        } else {
            IpcLevel::Subclass
        }
    }

    /// Canonical string of this code cut at `level`. Levels deeper than the
    /// code itself return the full code.
    pub fn truncate(&self, level: IpcLevel) -> String {
        match level {
            IpcLevel::Section => self.section.to_string(),
            IpcLevel::Class => format!("{}{:02}", self.section, self.class),
            IpcLevel::Subclass => format!("{}{:02}{}", self.section, self.class, self.subclass),
            IpcLevel::Group => self.to_string(),
        }
    }
}

impl fmt::Display for IpcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}{}", self.section, self.class, self.subclass)?;
        if let Some((main, sub)) = &self.group {
            write!(f, " {main}/{sub}")?;
        }
        Ok(())
    }
}

impl FromStr for IpcCode {
    type Err = IpcParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IpcCode::parse(s)
    }
}

/// Truncates a canonical code string to `level`. Strings that do not parse
/// are returned unchanged.
pub fn truncate_code(code: &str, level: IpcLevel) -> String {
    match IpcCode::parse(code) {
        Ok(c) => c.truncate(level),
        Err(_) => code.to_string(),
    }
}
