const SPLIT_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '\'', '"', '(', ')'];

/// Evaluation tokenizer: lowercases, splits `.,!?;:'"()` into their own
/// tokens and collapses whitespace.
pub fn eval_tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            flush(&mut cur, &mut out);
        } else if SPLIT_PUNCT.contains(&ch) {
            flush(&mut cur, &mut out);
            out.push(ch.to_string());
        } else {
            cur.extend(ch.to_lowercase());
        }
    }
    flush(&mut cur, &mut out);
    out
}

fn flush(cur: &mut String, out: &mut Vec<String>) {
    if !cur.is_empty() {
        out.push(std::mem::take(cur));
    }
}

/// True when `needle`'s token sequence occurs contiguously in `haystack`'s,
/// both under [`eval_tokenize`]. An empty needle never matches.
pub fn contains_span(haystack: &str, needle: &str) -> bool {
    let hay = eval_tokenize(haystack);
    let pat = eval_tokenize(needle);
    if pat.is_empty() || pat.len() > hay.len() {
        return false;
    }
    hay.windows(pat.len()).any(|w| w == pat.as_slice())
}
