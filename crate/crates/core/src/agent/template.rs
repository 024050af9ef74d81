use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("template `{template}` has no value for placeholder <<{placeholder}>>")]
    MissingValue { template: String, placeholder: String },
}

/// A prompt template with `<<NAME>>` placeholders.
#[derive(Debug, Clone, Copy)]
pub struct Template {
    name: &'static str,
    text: &'static str,
}

const COURNOT: &str = include_str!("../../templates/cournot_prompt.txt");
const BERTRAND: &str = include_str!("../../templates/bertrand_prompt.txt");

fn strip_final_newline(s: &'static str) -> &'static str {
    s.strip_suffix('\n').unwrap_or(s)
}

impl Template {
    pub fn cournot() -> Self {
        Self {
            name: "cournot",
            text: strip_final_newline(COURNOT),
        }
    }

    pub fn bertrand() -> Self {
        Self {
            name: "bertrand",
            text: strip_final_newline(BERTRAND),
        }
    }

    pub fn name(&self) -> &str {
        self.name
    }

    pub fn text(&self) -> &str {
        self.text
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut rest = self.text;
        while let Some((name, after)) = next_placeholder(rest) {
            if let Some(name) = name {
                if !out.contains(&name) {
                    out.push(name);
                }
            }
            rest = after;
        }
        out
    }

    /// Substitutes every placeholder in one pass. Values are not rescanned.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len() * 2);
        let mut rest = self.text;
        loop {
            let Some(start) = rest.find("<<") else {
                out.push_str(rest);
                return Ok(out);
            };
            out.push_str(&rest[..start]);
            let tail = &rest[start..];
            match placeholder_at(tail) {
                Some(name) => {
                    let value = values.get(name).ok_or_else(|| TemplateError::MissingValue {
                        template: self.name.to_string(),
                        placeholder: name.to_string(),
                    })?;
                    out.push_str(value);
                    rest = &tail[name.len() + 4..];
                }
                None => {
                    out.push_str("<<");
                    rest = &tail[2..];
                }
            }
        }
    }
}

fn placeholder_at(s: &str) -> Option<&str> {
    let body = s.strip_prefix("<<")?;
    let end = body.find(">>")?;
    let name = &body[..end];
    let valid = !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_');
    valid.then_some(name)
}

fn next_placeholder(s: &'static str) -> Option<(Option<&'static str>, &'static str)> {
    let start = s.find("<<")?;
    let tail = &s[start..];
    match placeholder_at(tail) {
        Some(name) => Some((Some(name), &tail[name.len() + 4..])),
        None => Some((None, &tail[2..])),
    }
}
