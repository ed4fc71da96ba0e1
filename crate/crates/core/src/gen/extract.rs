// SPDX-License-Identifier: Apache-2.0

/// Pulls SystemVerilog out of a chat response.
///
/// Fenced blocks that contain a `module` win; otherwise every bare
/// `module ... endmodule` span is taken. Returns `None` when nothing is found.
pub fn extract_code(raw: &str) -> Option<String> {
    let fenced: Vec<String> = fenced_blocks(raw).into_iter().filter(|b| find_word(b, "module", 0).is_some()).collect();
    let parts = if fenced.is_empty() { module_spans(raw) } else { fenced };
    if parts.is_empty() {
        return None;
    }
    let joined = parts.iter().map(|p| p.trim_end()).collect::<Vec<_>>().join("\n\n");
    let trimmed = joined.trim_matches('\n');
    if trimmed.trim().is_empty() {
        return None;
    }
    Some(format!("{trimmed}\n"))
}

fn fenced_blocks(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        let t = line.trim_start();
        match current.as_mut() {
            None if t.starts_with("```") => current = Some(Vec::new()),
            None => {}
            Some(_) if t.starts_with("```") => {
                out.push(current.take().unwrap_or_default().join("\n"));
            }
            Some(lines) => lines.push(line),
        }
    }
    // An unterminated fence still counts.
    if let Some(lines) = current {
        out.push(lines.join("\n"));
    }
    out
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

fn find_word(s: &str, word: &str, from: usize) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut start = from;
    while let Some(off) = s.get(start..)?.find(word) {
        let i = start + off;
        let before = i == 0 || !is_ident_byte(bytes[i - 1]);
        let j = i + word.len();
        let after = j >= bytes.len() || !is_ident_byte(bytes[j]);
        if before && after {
            return Some(i);
        }
        start = i + word.len();
    }
    None
}

fn module_spans(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(m) = find_word(raw, "module", pos) {
        let Some(e) = find_word(raw, "endmodule", m) else { break };
        let end = e + "endmodule".len();
        out.push(raw[m..end].to_string());
        pos = end;
    }
    out
}
