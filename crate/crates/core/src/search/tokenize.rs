/// A token with its character (not byte) span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Splits on non-alphanumeric characters and case-folds. No stemming, no stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_offsets(text)
        .into_iter()
        .map(|t| t.text)
        .collect()
}

pub fn tokenize_with_offsets(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut pos = 0;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if current.is_empty() {
                start = pos;
            }
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(Token {
                text: std::mem::take(&mut current),
                start,
                end: pos,
            });
        }
        pos += 1;
    }
    if !current.is_empty() {
        tokens.push(Token {
            text: current,
            start,
            end: pos,
        });
    }
    tokens
}
