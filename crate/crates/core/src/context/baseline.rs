use super::{estimate_tokens, TokenCount};

/// An unanchored sliding window over the raw history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineRender {
    pub text: String,
    pub tokens: TokenCount,
    /// Index into the history of the oldest entry kept.
    pub first_kept: usize,
}

/// Plain sliding window over `history` (the spec is entry 0 and is evicted
/// like any other turn). Keeps the longest suffix of entries whose summed
/// token estimates fit `budget`; `None` keeps everything.
pub fn baseline_render<S: AsRef<str>>(history: &[S], budget: Option<TokenCount>) -> BaselineRender {
    let mut first_kept = history.len();
    let mut tokens = TokenCount::ZERO;
    for (i, entry) in history.iter().enumerate().rev() {
        let t = estimate_tokens(entry.as_ref());
        if budget.is_some_and(|b| tokens + t > b) {
            break;
        }
        tokens += t;
        first_kept = i;
    }
    let text = history[first_kept..]
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join("\n\n");
    BaselineRender {
        text,
        tokens,
        first_kept,
    }
}
