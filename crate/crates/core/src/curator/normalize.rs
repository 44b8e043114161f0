use regex::{Captures, Regex};
use std::sync::OnceLock;

pub const URL_TOKEN: &str = "[URL]";
pub const CODE_TOKEN: &str = "[CODE]";
pub const ISSUE_NUMBER_TOKEN: &str = "[ISSUE_NUMBER]";

struct BodyPatterns {
    fenced: Regex,
    inline_code: Regex,
    url: Regex,
}

fn body_patterns() -> &'static BodyPatterns {
    static P: OnceLock<BodyPatterns> = OnceLock::new();
    P.get_or_init(|| BodyPatterns {
        fenced: Regex::new(r"(?s)```.*?```|~~~.*?~~~").unwrap(),
        inline_code: Regex::new(r"`[^`\n]+`").unwrap(),
        url: Regex::new(r#"(?i)\b(?:(?:https?|ftp)://|www\.)[^\s<>()\[\]{}"'`]+"#).unwrap(),
    })
}

/// Replaces runs of indented lines that follow a blank line (or open the
/// text) with a single `[CODE]` line.
fn replace_indented_blocks(text: &str) -> String {
    let is_indented = |l: &str| (l.starts_with("    ") || l.starts_with('\t')) && !l.trim().is_empty();
    let mut out: Vec<&str> = Vec::new();
    let mut prev_blank = true;
    let mut in_block = false;
    for line in text.split('\n') {
        if in_block && is_indented(line) {
            continue;
        }
        in_block = false;
        if prev_blank && is_indented(line) {
            out.push(CODE_TOKEN);
            in_block = true;
            prev_blank = false;
            continue;
        }
        prev_blank = line.trim().is_empty();
        out.push(line);
    }
    out.join("\n")
}

fn trim_url(caps: &Captures) -> String {
    let m = &caps[0];
    let kept = m.trim_end_matches(['.', ',', ';', ':', '!', '?']);
    if kept.is_empty() || kept.eq_ignore_ascii_case("www.") {
        return m.to_string();
    }
    format!("{URL_TOKEN}{}", &m[kept.len()..])
}

/// Replaces code blocks, inline code spans and URLs in an issue body.
///
/// Fenced blocks (```` ``` ```` or `~~~`), indented blocks and inline
/// `` `code` `` become `[CODE]`; `http(s)://`, `ftp://` and `www.` links become
/// `[URL]`, with trailing sentence punctuation left in place. Markdown images
/// and links keep their syntax around the replaced target.
pub fn normalize_issue_body(body: &str) -> String {
    let p = body_patterns();
    let mut text = body.to_string();
    // a pass can expose a new match (e.g. a fence formed across a removed span),
    // so iterate to a fixed point; every productive pass removes backticks,
    // tildes, indented lines or URL scheme text, so this terminates
    loop {
        let next = p.fenced.replace_all(&text, CODE_TOKEN);
        let next = p.inline_code.replace_all(&next, CODE_TOKEN);
        let next = replace_indented_blocks(&next);
        let next = p.url.replace_all(&next, trim_url).into_owned();
        if next == text {
            return text;
        }
        text = next;
    }
}

fn issue_ref_pattern() -> &'static Regex {
    static P: OnceLock<Regex> = OnceLock::new();
    // group 1 keeps the character before `#`, which must not be a word
    // character, `&` (HTML entities), `/` (URL fragments) or `]` (a
    // placeholder produced by an earlier replacement)
    P.get_or_init(|| Regex::new(r"(?i)\bGH-\d+\b|(^|[^\w&/#\]])#\d+\b").unwrap())
}

/// Replaces issue references (`#123`, `GH-123`, including those after
/// closing keywords such as `fixes #123`) with `[ISSUE_NUMBER]`.
pub fn normalize_commit_message(message: &str) -> String {
    issue_ref_pattern()
        .replace_all(message, |caps: &Captures| {
            format!("{}{ISSUE_NUMBER_TOKEN}", caps.get(1).map_or("", |m| m.as_str()))
        })
        .into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_url() {
        assert_eq!(normalize_issue_body("see https://x.y/z for details"), "see [URL] for details");
        assert_eq!(normalize_issue_body("docs at www.example.com."), "docs at [URL].");
    }

    #[test]
    fn fenced_block() {
        assert_eq!(normalize_issue_body("run: ```a=1```"), "run: [CODE]");
        assert_eq!(
            normalize_issue_body("Steps:\n```java\nint x = 1;\n```\nThen boom"),
            "Steps:\n[CODE]\nThen boom"
        );
    }

    #[test]
    fn inline_and_indented_code() {
        assert_eq!(normalize_issue_body("call `foo()` twice"), "call [CODE] twice");
        assert_eq!(
            normalize_issue_body("Trace:\n\n    at A.b(A.java:1)\n    at C.d(C.java:2)\nend"),
            "Trace:\n\n[CODE]\nend"
        );
        // an indented continuation of a paragraph is not a code block
        assert_eq!(normalize_issue_body("list\n    item"), "list\n    item");
    }

    #[test]
    fn image_link_becomes_url() {
        assert_eq!(
            normalize_issue_body("![shot](https://img.host/a.png)"),
            "![shot]([URL])"
        );
    }

    #[test]
    fn already_normalized_body_is_unchanged() {
        let s = "see [URL] and [CODE]";
        assert_eq!(normalize_issue_body(s), s);
    }

    #[test]
    fn issue_number_example() {
        assert_eq!(normalize_commit_message("Fixes issue #1234"), "Fixes issue [ISSUE_NUMBER]");
    }

    #[test]
    fn issue_reference_forms() {
        assert_eq!(normalize_commit_message("bump to 2.0"), "bump to 2.0");
        assert_eq!(
            normalize_commit_message("close #1, #2"),
            "close [ISSUE_NUMBER], [ISSUE_NUMBER]"
        );
        assert_eq!(normalize_commit_message("See GH-42"), "See [ISSUE_NUMBER]");
        assert_eq!(normalize_commit_message("(#7)"), "([ISSUE_NUMBER])");
        assert_eq!(normalize_commit_message("escape &#123;"), "escape &#123;");
        assert_eq!(normalize_commit_message("C#1 naming"), "C#1 naming");
    }

    proptest! {
        #[test]
        fn body_normalization_is_idempotent(
            body in r"([a-z]{1,5}|`|```|~~~|\n|\n    |\t| |https://[a-z.]{1,6}|www\.[a-z]{1,3}|\[URL\]|\[CODE\]|[.,()\[\]])*"
        ) {
            let once = normalize_issue_body(&body);
            prop_assert_eq!(normalize_issue_body(&once), once);
        }

        #[test]
        fn message_normalization_is_idempotent(msg in r"([a-z]{1,4}|#|[0-9]{1,3}|GH-|&| |/|,|\[ISSUE_NUMBER\])*") {
            let once = normalize_commit_message(&msg);
            prop_assert_eq!(normalize_commit_message(&once), once);
        }
    }
}
