//! Extraction of a structured decision from a free-text model response.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::GameMode;

/// Raw fields read from a response, before any market-level validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub observations_and_thoughts: String,
    pub new_plans: String,
    pub new_insights: String,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub investment_letter: Option<char>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ParseFailure(pub String);

fn fail<T>(msg: impl Into<String>) -> Result<T, ParseFailure> {
    Err(ParseFailure(msg.into()))
}

/// Finds the first JSON object embedded in `text`.
pub fn extract_json_object(text: &str) -> Option<Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

fn string_field(obj: &Map<String, Value>, key: &str, path: &str) -> Result<String, ParseFailure> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Null) | None => fail(format!("missing field `{path}`")),
        Some(other) => Ok(other.to_string()),
    }
}

/// Accepts numbers and numeric strings such as `" $1,250.5 "`.
pub fn coerce_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            let t = s.trim();
            let (neg, t) = match t.strip_prefix('-') {
                Some(rest) => (true, rest.trim_start()),
                None => (false, t),
            };
            let t = t.strip_prefix('$').unwrap_or(t).trim();
            let cleaned: String = t.chars().filter(|c| *c != ',').collect();
            if cleaned.is_empty()
                || !cleaned
                    .chars()
                    .all(|c| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || c == '+' || c == '-')
            {
                return None;
            }
            let x: f64 = cleaned.parse().ok()?;
            Some(if neg { -x } else { x })
        }
        _ => None,
    }
}

fn letter_field(raw: &str) -> Option<char> {
    let t = raw
        .trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '(' || c == ')');
    let head = t.split([':', ')', '.']).next().unwrap_or("").trim();
    let head = head
        .strip_prefix("Option ")
        .or_else(|| head.strip_prefix("option "))
        .unwrap_or(head)
        .trim();
    let mut chars = head.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Some(c.to_ascii_uppercase()),
        _ => None,
    }
}

/// Parses a response. In strict mode the whole response must be the JSON object.
pub fn parse_response(mode: GameMode, text: &str, strict: bool) -> Result<ParsedResponse, ParseFailure> {
    let obj = if strict {
        match serde_json::from_str::<Value>(text.trim()) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return fail("response is not a JSON object"),
            Err(e) => return fail(format!("response is not valid JSON: {e}")),
        }
    } else {
        match extract_json_object(text) {
            Some(m) => m,
            None => return fail("no JSON object found in the response"),
        }
    };

    let observations_and_thoughts = string_field(&obj, "observations_and_thoughts", "observations_and_thoughts")?;
    let content = match obj.get("new_content") {
        Some(Value::Object(c)) => c,
        Some(_) => return fail("field `new_content` is not an object"),
        None => return fail("missing field `new_content`"),
    };
    let new_plans = string_field(content, "PLANS.txt", "new_content.PLANS.txt")?;
    let new_insights = string_field(content, "INSIGHTS.txt", "new_content.INSIGHTS.txt")?;

    let (key, what) = match mode {
        GameMode::Cournot => ("chosen_quantities", "quantity"),
        GameMode::Bertrand => ("chosen_prices", "price"),
    };
    let chosen = match obj.get(key) {
        Some(Value::Object(c)) => c,
        Some(_) => return fail(format!("field `{key}` is not an object")),
        None => return fail(format!("missing field `{key}`")),
    };
    let mut values = Vec::with_capacity(2);
    for product in ["Product_A", "Product_B"] {
        let raw = chosen
            .get(product)
            .ok_or_else(|| ParseFailure(format!("missing field `{key}.{product}`")))?;
        let x = coerce_number(raw).ok_or_else(|| ParseFailure(format!("{product} {what} {raw} is not a number")))?;
        if !x.is_finite() {
            return fail(format!("{product} {what} is not finite"));
        }
        if x < 0.0 {
            return fail(format!("negative {what} for {product}: {x}"));
        }
        values.push(x);
    }

    let investment_letter = match mode {
        GameMode::Cournot => None,
        GameMode::Bertrand => {
            let raw = string_field(&obj, "investment_option", "investment_option")?;
            Some(
                letter_field(&raw)
                    .ok_or_else(|| ParseFailure(format!("investment_option `{raw}` is not a single option letter")))?,
            )
        }
    };

    Ok(ParsedResponse {
        observations_and_thoughts,
        new_plans,
        new_insights,
        values,
        investment_letter,
    })
}
