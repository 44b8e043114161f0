use serde::{Deserialize, Serialize};

/// Placeholders and special tokens that are never split.
pub const ATOMIC_TOKENS: &[&str] = &[
    "[ISSUE_NUMBER]",
    "[URL]",
    "[CODE]",
    "[SEP]",
    "[BR]",
    "[FR]",
    "[EN]",
];

/// A token with half-open character offsets `[start, end)` into the source text.
///
/// Offsets count Unicode scalar values, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            text: text.into(),
            start,
            end,
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn atomic_at(chars: &[char], i: usize) -> Option<usize> {
    if chars[i] != '[' {
        return None;
    }
    ATOMIC_TOKENS.iter().find_map(|tok| {
        let len = tok.chars().count();
        let fits = i + len <= chars.len() && tok.chars().zip(&chars[i..i + len]).all(|(a, b)| a == *b);
        fits.then_some(len)
    })
}

/// Splits text on whitespace, separates every punctuation character into its own
/// token and keeps the placeholder tokens in [`ATOMIC_TOKENS`] whole.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let end = if let Some(len) = atomic_at(&chars, i) {
            i + len
        } else if is_word_char(c) {
            let mut j = i + 1;
            while j < chars.len() && is_word_char(chars[j]) {
                j += 1;
            }
            j
        } else {
            i + 1
        };
        tokens.push(Token::new(chars[i..end].iter().collect::<String>(), i, end));
        i = end;
    }
    tokens
}

/// Token count under [`tokenize`] without allocating token strings.
pub fn token_count(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut n = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        n += 1;
        if let Some(len) = atomic_at(&chars, i) {
            i += len;
        } else if is_word_char(c) {
            i += 1;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    n
}

/// Lowercased token texts, as used by the generation metrics.
pub fn metric_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text.to_lowercase()).collect()
}

/// Substring by character offsets. Out-of-range bounds are clamped.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triples(text: &str) -> Vec<(String, usize, usize)> {
        tokenize(text).into_iter().map(|t| (t.text, t.start, t.end)).collect()
    }

    #[test]
    fn whitespace_split() {
        assert_eq!(triples("fix NPE"), vec![("fix".into(), 0, 3), ("NPE".into(), 4, 7)]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t").is_empty());
    }

    #[test]
    fn placeholder_is_atomic() {
        assert_eq!(
            triples("see [URL] now"),
            vec![("see".into(), 0, 3), ("[URL]".into(), 4, 9), ("now".into(), 10, 13)]
        );
        assert_eq!(tokenize("[ISSUE_NUMBER]:").len(), 2);
    }

    #[test]
    fn punctuation_is_split() {
        let texts: Vec<String> = tokenize("foo.bar(x)!").into_iter().map(|t| t.text).collect();
        assert_eq!(texts, ["foo", ".", "bar", "(", "x", ")", "!"]);
        // an unknown bracketed word is not a placeholder
        let texts: Vec<String> = tokenize("[FOO]").into_iter().map(|t| t.text).collect();
        assert_eq!(texts, ["[", "FOO", "]"]);
    }

    #[test]
    fn offsets_are_characters_not_bytes() {
        let toks = tokenize("héllo wörld");
        assert_eq!((toks[1].start, toks[1].end), (6, 11));
        assert_eq!(char_slice("héllo wörld", 6, 11), "wörld");
    }

    proptest! {
        #[test]
        fn reconstructs_input(text in "[a-zé \\[\\]URLCODE.,_\n]{0,40}") {
            let toks = tokenize(&text);
            let chars: Vec<char> = text.chars().collect();
            let mut cursor = 0;
            for t in &toks {
                prop_assert!(chars[cursor..t.start].iter().all(|c| c.is_whitespace()));
                prop_assert_eq!(chars[t.start..t.end].iter().collect::<String>(), t.text.clone());
                cursor = t.end;
            }
            prop_assert!(chars[cursor..].iter().all(|c| c.is_whitespace()));
            prop_assert_eq!(token_count(&text), toks.len());
        }

        #[test]
        fn retokenizing_a_token_is_identity(text in "[a-z \\[\\]URLCODE.,_]{0,40}") {
            for t in tokenize(&text) {
                let sub = char_slice(&text, t.start, t.end);
                let again = tokenize(&sub);
                prop_assert_eq!(again.len(), 1);
                prop_assert_eq!(&again[0].text, &t.text);
            }
        }
    }
}
