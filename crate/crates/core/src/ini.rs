//! Minimal INI reader that keeps line numbers for error reporting.
//!
//! `[kind name]` headers, `key = value` entries, `#` and `;` comments.
//! Entries before the first header are rejected.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct IniError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    /// First word of the header.
    pub kind: String,
    /// Rest of the header, trimmed; empty for `[fsm]`.
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

pub fn parse(text: &str) -> Result<Vec<Section>, IniError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| IniError { line, message: "unterminated section header".into() })?
                .trim();
            let mut parts = header.splitn(2, char::is_whitespace);
            let kind = parts.next().unwrap_or("").to_string();
            if kind.is_empty() {
                return Err(IniError { line, message: "empty section header".into() });
            }
            let name = parts.next().unwrap_or("").trim().to_string();
            sections.push(Section { kind, name, line, entries: Vec::new() });
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| IniError { line, message: format!("expected `key = value`, found {trimmed:?}") })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(IniError { line, message: "empty key".into() });
        }
        let section = sections.last_mut().ok_or_else(|| IniError { line, message: "entry before any section".into() })?;
        if section.get(&key).is_some() {
            return Err(IniError { line, message: format!("duplicate key {key}") });
        }
        section.entries.push(Entry { key, value: value.trim().to_string(), line });
    }
    Ok(sections)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_entries() {
        let s = parse("# c\n[fsm]\ngreeting = Hi! I am = here\n\n[state ask_timing]\nweight=0.5\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].kind, "fsm");
        assert_eq!(s[0].get("greeting").unwrap().value, "Hi! I am = here");
        assert_eq!((s[1].kind.as_str(), s[1].name.as_str(), s[1].line), ("state", "ask_timing", 5));
        assert_eq!(s[1].get("weight").unwrap().line, 6);
    }

    #[test]
    fn errors_carry_lines() {
        assert_eq!(parse("k = v").unwrap_err().line, 1);
        assert_eq!(parse("[a]\nnot an entry").unwrap_err().line, 2);
        assert_eq!(parse("[a]\nk=1\nk=2").unwrap_err().line, 3);
        assert_eq!(parse("[a").unwrap_err().line, 1);
    }
}
