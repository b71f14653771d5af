use std::sync::LazyLock;

use regex::Regex;

use super::LlmError;

pub const PROMPT_TEMPLATE: &str = "Our dynamic analysis tool identified a taint flow in a Node.js package, suggesting a potential vulnerability related to either arbitrary code execution (CWE-094) or arbitrary command injection (CWE-078). While the tool attempts to confirm vulnerabilities by generating exploits, this approach may miss some cases. I hope you can assist with triaging and classification by predicting whether the vulnerability is exploitable.\n\nI have extracted relevant parts of the code from the file containing the sink, along with surrounding lines for context. After reasoning about the snippet, please output \"Yes\" if you believe it contains an exploitable vulnerability, or \"No\" if you believe it is not exploitable.\n\n{code snippet here}";

pub const SNIPPET_PLACEHOLDER: &str = "{code snippet here}";

pub fn build_prompt(snippet: &str) -> Result<String, LlmError> {
    if snippet.trim().is_empty() {
        return Err(LlmError::BadRequest("snippet is empty".into()));
    }
    Ok(PROMPT_TEMPLATE.replacen(SNIPPET_PLACEHOLDER, snippet, 1))
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ThinkDelimiters {
    pub open: String,
    pub close: String,
}

impl Default for ThinkDelimiters {
    fn default() -> Self {
        Self { open: "<think>".into(), close: "</think>".into() }
    }
}

/// Removes reasoning segments. Besides well-formed pairs, a close marker
/// without an opener drops everything before it (the opener was part of the
/// prompt template) and an unclosed opener drops everything after it.
pub fn strip_reasoning(text: &str, delimiters: &[ThinkDelimiters]) -> (String, bool) {
    let mut out = text.to_string();
    let mut stripped = false;
    for d in delimiters {
        if d.open.is_empty() || d.close.is_empty() {
            continue;
        }
        loop {
            let open = out.find(&d.open);
            let close = out.find(&d.close);
            match (open, close) {
                (Some(o), Some(c)) if o < c => {
                    out.replace_range(o..c + d.close.len(), "");
                }
                (_, Some(c)) => {
                    out.replace_range(..c + d.close.len(), "");
                }
                (Some(o), None) => {
                    out.truncate(o);
                }
                (None, None) => break,
            }
            stripped = true;
        }
    }
    (out, stripped)
}

static YES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bYes\b").expect("static pattern"));

/// Vulnerable iff the standalone, capitalised word "Yes" remains after
/// reasoning is stripped.
pub fn parse_response(text: &str, delimiters: &[ThinkDelimiters]) -> bool {
    let (answer, _) = strip_reasoning(text, delimiters);
    YES.is_match(&answer)
}
