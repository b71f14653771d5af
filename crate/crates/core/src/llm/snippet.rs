use std::path::{Path, PathBuf};

use super::LlmError;

pub const DEFAULT_BUDGET: usize = 1024;
pub const TOKEN_HEURISTIC: &str = "ceil(bytes/4)";

/// Heuristic token count: ⌈bytes / 4⌉.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnippetRequest {
    pub package_root: PathBuf,
    /// Relative to `package_root`.
    pub sink_file: PathBuf,
    /// 1-based.
    pub sink_line: usize,
    /// 0-based.
    pub sink_col: usize,
    pub budget: usize,
}

impl SnippetRequest {
    pub fn new(package_root: impl Into<PathBuf>, sink_file: impl Into<PathBuf>, sink_line: usize, sink_col: usize) -> Self {
        Self {
            package_root: package_root.into(),
            sink_file: sink_file.into(),
            sink_line,
            sink_col,
            budget: DEFAULT_BUDGET,
        }
    }
}

pub fn extract_snippet(req: &SnippetRequest) -> Result<String, LlmError> {
    let path = req.package_root.join(&req.sink_file);
    let text = std::fs::read_to_string(&path).map_err(|source| LlmError::Io { path: path.clone(), source })?;
    snippet_from_text(&text, req.sink_line, req.sink_col, req.budget, &path)
}

/// The whole text when it fits `budget`; otherwise the sink line plus
/// neighbours taken alternately above and below, stopping at the first
/// line that would push the estimate over budget. A sink line that alone
/// exceeds the budget is cut to a byte window centred on `sink_col`.
pub fn snippet_from_text(text: &str, line: usize, col: usize, budget: usize, path: &Path) -> Result<String, LlmError> {
    if budget == 0 {
        return Err(LlmError::BadRequest("snippet budget must be positive".into()));
    }
    let lines: Vec<&str> = text.lines().collect();
    if line == 0 || line > lines.len() {
        return Err(LlmError::LineOutOfRange { path: path.to_path_buf(), line, lines: lines.len() });
    }
    if estimate_tokens(text) <= budget {
        return Ok(text.to_string());
    }
    let max_bytes = budget * 4;
    let sink = line - 1;
    if lines[sink].len() > max_bytes {
        return Ok(window_around(lines[sink], col, max_bytes).to_string());
    }

    let (mut lo, mut hi) = (sink, sink);
    let mut bytes = lines[sink].len();
    let mut above = true;
    loop {
        let can_up = lo > 0;
        let can_down = hi + 1 < lines.len();
        let take_up = match (can_up, can_down) {
            (false, false) => break,
            (true, false) => true,
            (false, true) => false,
            (true, true) => above,
        };
        let next = if take_up { lines[lo - 1] } else { lines[hi + 1] };
        // +1 for the joining newline
        if bytes + 1 + next.len() > max_bytes {
            break;
        }
        bytes += 1 + next.len();
        if take_up {
            lo -= 1;
        } else {
            hi += 1;
        }
        above = !above;
    }
    Ok(lines[lo..=hi].join("\n"))
}

fn window_around(line: &str, col: usize, max_bytes: usize) -> &str {
    let col = col.min(line.len());
    let mut start = col.saturating_sub(max_bytes / 2).min(line.len() - max_bytes);
    while !line.is_char_boundary(start) {
        start += 1;
    }
    let mut end = (start + max_bytes).min(line.len());
    while !line.is_char_boundary(end) {
        end -= 1;
    }
    &line[start..end]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(n: usize) -> String {
        (1..=n).map(|i| format!("const line{i} = compute({i});\n")).collect()
    }

    #[test]
    fn small_file_returned_whole() {
        let text = numbered(10);
        assert_eq!(snippet_from_text(&text, 4, 0, 1024, Path::new("f.js")).unwrap(), text);
    }

    #[test]
    fn large_file_window_is_centred_and_within_budget() {
        let text = numbered(10_000);
        let s = snippet_from_text(&text, 5000, 0, 1024, Path::new("f.js")).unwrap();
        assert!(estimate_tokens(&s) <= 1024);
        let got: Vec<&str> = s.lines().collect();
        let pos = got.iter().position(|l| *l == "const line5000 = compute(5000);").unwrap();
        let below = got.len() - 1 - pos;
        assert!(pos.abs_diff(below) <= 1, "{pos} above vs {below} below");
        // the next line on either side would not have fit
        let neighbour = "const line4000 = compute(4000);".len();
        assert!(s.len() + 1 + neighbour > 1024 * 4);
    }

    #[test]
    fn window_near_file_start_extends_downwards() {
        let text = numbered(10_000);
        let s = snippet_from_text(&text, 1, 0, 64, Path::new("f.js")).unwrap();
        assert!(s.starts_with("const line1 = "));
        assert!(estimate_tokens(&s) <= 64);
        assert!(s.lines().count() > 2);
    }

    #[test]
    fn out_of_range_line() {
        let e = snippet_from_text(&numbered(10), 50, 0, 1024, Path::new("f.js")).unwrap_err();
        assert!(matches!(e, LlmError::LineOutOfRange { line: 50, lines: 10, .. }));
    }

    #[test]
    fn oversized_sink_line_is_cut_around_the_column() {
        let long = format!("{}exec(x){}", "a".repeat(10_000), "b".repeat(10_000));
        let text = format!("intro\n{long}\noutro\n");
        let s = snippet_from_text(&text, 2, 10_000, 16, Path::new("f.js")).unwrap();
        assert_eq!(s.len(), 64);
        assert!(s.contains("exec(x)"));
    }

    #[test]
    fn missing_file() {
        let req = SnippetRequest::new("/nonexistent-root", "index.js", 1, 0);
        assert!(matches!(extract_snippet(&req), Err(LlmError::Io { .. })));
    }
}
