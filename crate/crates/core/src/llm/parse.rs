use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EOS, TRIPLE_LIST_PREFIX};
use crate::evaluation::{Triple, TripleSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseStatus {
    /// An array was found and every item was usable.
    Ok,
    /// Some items were skipped, or the array was cut off.
    Partial,
    /// No JSON array at all, e.g. a refusal.
    NoJson,
}

impl ParseStatus {
    pub fn name(self) -> &'static str {
        match self {
            ParseStatus::Ok => "ok",
            ParseStatus::Partial => "partial",
            ParseStatus::NoJson => "no-json",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCompletion {
    pub triples: TripleSet,
    pub status: ParseStatus,
    pub warnings: Vec<String>,
}

impl ParsedCompletion {
    fn no_json(reason: &str) -> Self {
        ParsedCompletion {
            triples: TripleSet::new(),
            status: ParseStatus::NoJson,
            warnings: vec![reason.to_string()],
        }
    }
}

/// Tolerant parse: the first bracket-balanced JSON array after an optional
/// `triple_list:` prefix. Never fails.
pub fn parse_completion(text: &str) -> ParsedCompletion {
    parse_completion_with(text, false)
}

/// With `strict`, the text must be exactly one array, optionally prefixed by
/// `triple_list:` and followed by `</s>`.
pub fn parse_completion_with(text: &str, strict: bool) -> ParsedCompletion {
    if strict {
        let mut body = text.trim();
        body = body.strip_prefix(TRIPLE_LIST_PREFIX).unwrap_or(body).trim_start();
        body = body.strip_suffix(EOS).unwrap_or(body).trim_end();
        return match serde_json::from_str::<Value>(body) {
            Ok(Value::Array(items)) => collect(&items, Vec::new()),
            _ => ParsedCompletion::no_json("completion is not a single JSON array"),
        };
    }
    // A clean completion reads the same in both modes, even when the prefix
    // also occurs inside one of its strings.
    let whole = parse_completion_with(text, true);
    if whole.status != ParseStatus::NoJson {
        return whole;
    }
    let start = text.find(TRIPLE_LIST_PREFIX).map_or(0, |p| p + TRIPLE_LIST_PREFIX.len());
    let bytes = text.as_bytes();
    let mut from = start;
    while let Some(off) = text[from..].find('[') {
        let open = from + off;
        match matching_close(bytes, open) {
            Some(close) => {
                if let Ok(Value::Array(items)) = serde_json::from_str::<Value>(&text[open..=close]) {
                    return collect(&items, Vec::new());
                }
                from = open + 1;
            }
            None => {
                let items = salvage_objects(text, open);
                if items.is_empty() {
                    from = open + 1;
                    continue;
                }
                let mut parsed = collect(&items, vec!["array is not closed; kept complete items".into()]);
                parsed.status = ParseStatus::Partial;
                return parsed;
            }
        }
    }
    ParsedCompletion::no_json("no JSON array found")
}

/// Index of the bracket closing the one at `open`, skipping string
/// contents. None when the text ends first or the closer does not match.
fn matching_close(bytes: &[u8], open: usize) -> Option<usize> {
    let want = if bytes[open] == b'[' { b']' } else { b'}' };
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'[' | b'{' => depth += 1,
            b']' | b'}' => {
                depth -= 1;
                if depth == 0 {
                    return (b == want).then_some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Complete `{...}` objects directly inside an unterminated array.
fn salvage_objects(text: &str, open: usize) -> Vec<Value> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = open + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'{' => match matching_close(bytes, i) {
                Some(end) => {
                    if let Ok(v) = serde_json::from_str::<Value>(&text[i..=end]) {
                        out.push(v);
                    }
                    i = end + 1;
                }
                None => break,
            },
            b',' | b' ' | b'\n' | b'\r' | b'\t' => i += 1,
            _ => break,
        }
    }
    out
}

fn str_at<'a>(v: &'a Value, outer: &str, inner: &str) -> Option<&'a str> {
    v.get(outer)?.get(inner)?.as_str()
}

fn collect(items: &[Value], mut warnings: Vec<String>) -> ParsedCompletion {
    let mut triples = TripleSet::new();
    for (k, item) in items.iter().enumerate() {
        let (Some(rel), Some(head), Some(tail)) = (
            str_at(item, "rel", "type"),
            str_at(item, "head", "text"),
            str_at(item, "tail", "text"),
        ) else {
            warnings.push(format!("item {k}: missing rel.type, head.text or tail.text"));
            continue;
        };
        let ty = |side: &str| str_at(item, side, "type").map(str::to_string);
        triples.insert(Triple::new(head, rel, tail).with_types(ty("head"), ty("tail")));
    }
    let status = if warnings.is_empty() { ParseStatus::Ok } else { ParseStatus::Partial };
    ParsedCompletion { triples, status, warnings }
}
