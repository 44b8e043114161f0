use super::{Location, StateSpan, StateType, Token};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BioTag {
    #[serde(rename = "O")]
    O,
    #[serde(rename = "B-AS")]
    BAs,
    #[serde(rename = "I-AS")]
    IAs,
    #[serde(rename = "B-ES")]
    BEs,
    #[serde(rename = "I-ES")]
    IEs,
}

impl BioTag {
    pub fn begin(state: StateType) -> Self {
        match state {
            StateType::Actual => BioTag::BAs,
            StateType::Expected => BioTag::BEs,
        }
    }

    pub fn inside(state: StateType) -> Self {
        match state {
            StateType::Actual => BioTag::IAs,
            StateType::Expected => BioTag::IEs,
        }
    }

    pub fn state(self) -> Option<StateType> {
        match self {
            BioTag::O => None,
            BioTag::BAs | BioTag::IAs => Some(StateType::Actual),
            BioTag::BEs | BioTag::IEs => Some(StateType::Expected),
        }
    }

    pub fn is_inside(self) -> bool {
        matches!(self, BioTag::IAs | BioTag::IEs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSequence {
    pub tokens: Vec<Token>,
    pub tags: Vec<BioTag>,
}

impl TaggedSequence {
    pub fn all_outside(tokens: Vec<Token>) -> Self {
        let tags = vec![BioTag::O; tokens.len()];
        Self { tokens, tags }
    }

    /// No `I-X` directly after `O`, after a different type, or at the start.
    pub fn is_well_formed(&self) -> bool {
        self.tokens.len() == self.tags.len()
            && self.tags.iter().enumerate().all(|(i, tag)| {
                !tag.is_inside() || (i > 0 && self.tags[i - 1].state() == tag.state())
            })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BioError {
    #[error("spans [{0}, {1}) and [{2}, {3}) overlap")]
    Overlap(usize, usize, usize, usize),
}

/// Tags every token that shares at least one character with a span.
///
/// The first such token of a span is tagged `B-`, the rest `I-`. A token that
/// straddles two spans belongs to the earlier one.
pub fn encode_bio(tokens: &[Token], spans: &[StateSpan]) -> Result<TaggedSequence, BioError> {
    let mut ordered: Vec<&StateSpan> = spans.iter().collect();
    ordered.sort_by_key(|s| (s.start, s.end));
    for pair in ordered.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(BioError::Overlap(
                pair[0].start,
                pair[0].end,
                pair[1].start,
                pair[1].end,
            ));
        }
    }

    let mut tags = vec![BioTag::O; tokens.len()];
    for span in ordered {
        let mut first = true;
        for (tok, tag) in tokens.iter().zip(tags.iter_mut()) {
            if tok.start < span.end && span.start < tok.end && *tag == BioTag::O {
                *tag = if first {
                    BioTag::begin(span.state_type)
                } else {
                    BioTag::inside(span.state_type)
                };
                first = false;
            }
        }
    }
    Ok(TaggedSequence {
        tokens: tokens.to_vec(),
        tags,
    })
}

/// Rewrites each `I-X` that does not continue an `X` run as `B-X`.
pub fn repair_bio(tags: &[BioTag]) -> Vec<BioTag> {
    let mut out = Vec::with_capacity(tags.len());
    let mut prev: Option<StateType> = None;
    for &tag in tags {
        let fixed = match tag.state() {
            Some(state) if tag.is_inside() && prev != Some(state) => BioTag::begin(state),
            _ => tag,
        };
        prev = fixed.state();
        out.push(fixed);
    }
    out
}

/// One span per maximal `B-X I-X ...` run; offsets snap to token bounds.
pub fn decode_bio(seq: &TaggedSequence, location: Location) -> Vec<StateSpan> {
    let tags = repair_bio(&seq.tags);
    let mut spans = Vec::new();
    let mut open: Option<StateSpan> = None;
    for (tok, tag) in seq.tokens.iter().zip(&tags) {
        match tag.state() {
            Some(_) if tag.is_inside() => {
                if let Some(span) = open.as_mut() {
                    span.end = tok.end;
                }
            }
            Some(state) => {
                spans.extend(open.take());
                open = Some(StateSpan::new(location, state, tok.start, tok.end));
            }
            None => spans.extend(open.take()),
        }
    }
    spans.extend(open);
    spans
}
