use super::{StateTagger, TypedIssueText};
use crate::schema::{encode_bio, BioTag, IssueRecord, Location, StateSpan, StateType, Token};
use std::collections::HashMap;

/// Words that open an actual-state clause.
pub const ACTUAL_TRIGGERS: &[&str] = &[
    "crash", "crashes", "crashed", "fails", "failed", "fail", "throws", "threw", "thrown", "hangs", "freezes",
    "leaks", "breaks", "broken", "returns", "returned", "shows", "ignores", "cannot", "doesn", "does", "is",
    "npe", "exception", "error",
];

/// Words that open an expected-state clause.
pub const EXPECTED_TRIGGERS: &[&str] = &[
    "should", "expected", "expect", "expects", "instead", "ideally", "must", "would", "want", "wish",
];

const HEADER_NOUNS: &[&str] = &["behavior", "behaviour", "result", "results", "output", "outcome"];
const SENTENCE_END: &[&str] = &[".", "!", "?", ";"];

/// Trigger-word tagger.
///
/// Text is cut into sentences at `. ! ? ;` and line breaks. In each sentence
/// the first trigger word decides the state type and the span runs from that
/// word to the end of the sentence, excluding closing punctuation. A header
/// like `Expected behavior:` tags the text after the colon, or the next
/// sentence when the header stands alone. `does` and `is` count only when
/// followed by `not`/`n't`.
#[derive(Debug, Clone, Default)]
pub struct LexicalTagger;

fn trigger(tokens: &[Token], i: usize) -> Option<StateType> {
    let w = tokens[i].text.to_lowercase();
    let next = tokens.get(i + 1).map(|t| t.text.to_lowercase());
    if EXPECTED_TRIGGERS.contains(&w.as_str()) {
        if w == "would" && !matches!(next.as_deref(), Some("be" | "like")) {
            return None;
        }
        return Some(StateType::Expected);
    }
    if ACTUAL_TRIGGERS.contains(&w.as_str()) {
        if matches!(w.as_str(), "does" | "is" | "doesn") && !matches!(next.as_deref(), Some("not" | "'")) {
            return None;
        }
        if w == "doesn" && next.as_deref() != Some("'") {
            return None;
        }
        return Some(StateType::Actual);
    }
    None
}

fn header(tokens: &[Token], sentence: &[usize]) -> Option<(StateType, usize)> {
    let [a, b, c, ..] = sentence else { return None };
    let first = tokens[*a].text.to_lowercase();
    let state = match first.as_str() {
        "expected" => StateType::Expected,
        "actual" | "current" | "observed" => StateType::Actual,
        _ => return None,
    };
    let noun = tokens[*b].text.to_lowercase();
    (HEADER_NOUNS.contains(&noun.as_str()) && tokens[*c].text == ":").then_some((state, 3))
}

fn sentences(typed: &TypedIssueText) -> Vec<Vec<usize>> {
    let chars: Vec<char> = typed.text.chars().collect();
    let mut out = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    for (i, tok) in typed.tokens.iter().enumerate().skip(1) {
        let newline_before = i > 1 && chars[typed.tokens[i - 1].end..tok.start].contains(&'\n');
        if newline_before && !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        cur.push(i);
        if SENTENCE_END.contains(&tok.text.as_str()) {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

impl StateTagger for LexicalTagger {
    fn tag(&self, typed: &TypedIssueText) -> Vec<BioTag> {
        let tokens = &typed.tokens;
        let mut tags = vec![BioTag::O; tokens.len()];
        let mut pending_header: Option<StateType> = None;
        for sentence in sentences(typed) {
            let mut content: Vec<usize> = sentence
                .iter()
                .copied()
                .filter(|&i| !SENTENCE_END.contains(&tokens[i].text.as_str()))
                .collect();
            let mut state = pending_header.take();
            if let Some((s, skip)) = header(tokens, &content) {
                content.drain(..skip);
                if content.is_empty() {
                    pending_header = Some(s);
                    continue;
                }
                state = Some(s);
            }
            let start = match state {
                Some(_) => Some(0),
                None => (0..content.len()).find(|&k| trigger(tokens, content[k]).is_some()),
            };
            let Some(start) = start else { continue };
            let state = state.unwrap_or_else(|| trigger(tokens, content[start]).expect("found above"));
            for (n, &i) in content[start..].iter().enumerate() {
                tags[i] = if n == 0 { BioTag::begin(state) } else { BioTag::inside(state) };
            }
        }
        tags
    }
}

/// Test double that replays gold annotations for issues it has seen.
/// Unknown issues are tagged all `O`.
#[derive(Debug, Clone, Default)]
pub struct GoldReplayTagger {
    gold: HashMap<IssueRecord, Vec<StateSpan>>,
}

impl GoldReplayTagger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, issue: IssueRecord, spans: Vec<StateSpan>) {
        self.gold.insert(issue, spans);
    }
}

impl StateTagger for GoldReplayTagger {
    fn tag(&self, typed: &TypedIssueText) -> Vec<BioTag> {
        let Some(spans) = self.gold.get(&typed.issue) else {
            return vec![BioTag::O; typed.tokens.len()];
        };
        let shifted: Vec<StateSpan> = spans
            .iter()
            .map(|s| {
                let (start, end) = typed.to_text_span(s);
                StateSpan::new(Location::Body, s.state_type, start, end)
            })
            .collect();
        encode_bio(&typed.tokens, &shifted)
            .map(|seq| seq.tags)
            .unwrap_or_else(|_| vec![BioTag::O; typed.tokens.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{prepend_type_token, tag_state_info};
    use crate::schema::IssueType;
    use BioTag::*;

    fn tag(title: &str, body: &str, ty: IssueType) -> Vec<BioTag> {
        let typed = prepend_type_token(&IssueRecord::new(title, body), ty).unwrap();
        tag_state_info(&typed, &LexicalTagger).tags
    }

    #[test]
    fn trigger_clause() {
        assert_eq!(tag("parser crashes on input X", "", IssueType::BugReport), [O, O, BAs, IAs, IAs, IAs]);
    }

    #[test]
    fn stopwords_only() {
        assert!(tag("the of and", "a an the", IssueType::Enhancement).iter().all(|t| *t == O));
    }

    #[test]
    fn expected_and_actual_sentences() {
        let tags = tag("Save dialog", "It crashes on save. It should keep the file.", IssueType::BugReport);
        // [BR] Save dialog It crashes on save . It should keep the file .
        assert_eq!(
            tags,
            [O, O, O, O, BAs, IAs, IAs, O, O, BEs, IEs, IEs, IEs, O]
        );
    }

    #[test]
    fn negated_copula_is_a_trigger_only_with_not() {
        let tags = tag("x", "It is fine", IssueType::BugReport);
        assert!(tags.iter().all(|t| *t == O));
        let tags = tag("x", "It is not fine", IssueType::BugReport);
        assert_eq!(tags, [O, O, O, BAs, IAs, IAs]);
    }

    #[test]
    fn template_headers() {
        let body = "Expected behavior:\nthe file is saved\nActual behavior: nothing happens";
        let tags = tag("Save", body, IssueType::BugReport);
        // [BR] Save Expected behavior : the file is saved Actual behavior : nothing happens
        assert_eq!(tags, [O, O, O, O, O, BEs, IEs, IEs, IEs, O, O, O, BAs, IAs]);
    }

    #[test]
    fn gold_replay_reproduces_gold() {
        let issue = IssueRecord::new("Parser crashes", "It should not crash.");
        let spans = vec![
            StateSpan::new(Location::Title, StateType::Actual, 7, 14),
            StateSpan::new(Location::Body, StateType::Expected, 3, 19),
        ];
        let mut replay = GoldReplayTagger::new();
        replay.insert(issue.clone(), spans.clone());
        let typed = prepend_type_token(&issue, IssueType::BugReport).unwrap();
        let seq = tag_state_info(&typed, &replay);
        assert_eq!(seq.tags, [O, O, BAs, O, BEs, IEs, IEs, O]);
        let unknown = prepend_type_token(&IssueRecord::new("other", ""), IssueType::BugReport).unwrap();
        assert!(tag_state_info(&unknown, &replay).tags.iter().all(|t| *t == O));
    }
}
