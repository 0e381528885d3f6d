//! Training and evaluation prompt rendering.
//!
//! A prompt is laid out as
//!
//! ```text
//! <instruction>\n
//! Issue: <title>\n<description>\n
//! <trailer>
//! ```
//!
//! where the trailer is `Assignee:` for training and `Top 10 assignees:` for
//! evaluation. When the whole prompt exceeds the token budget, whole tokens
//! are removed from the end of the issue text only.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::corpus::IssueReport;
use crate::error::{Error, Result};

pub const TRAIN_INSTRUCTION: &str = "Below is a GitHub issue. Suggest the single best developer \
identifier to resolve it. Only return the identifier.";

pub const EVAL_INSTRUCTION: &str = "Below is a GitHub issue. List the TOP 10 developers to \
handle the issue, ranked from best to worst. Use only developer identifiers known in this \
project. Return EXACTLY 10 comma-separated items, unique, with no extra text.";

pub const ISSUE_MARKER: &str = "Issue: ";
pub const TRAIN_TRAILER: &str = "Assignee:";
pub const EVAL_TRAILER: &str = "Top 10 assignees:";
pub const DEFAULT_BUDGET_TOKENS: usize = 2048;

/// Room kept for the completion line on top of the instruction.
const COMPLETION_HEADROOM: usize = 8;

/// Pluggable token counting scheme.
///
/// Implementations must be additive across whitespace: for strings `a`, `b`
/// the count of `a + ws + b` equals `count(a) + count(b)` whenever `ws` is
/// non-empty whitespace. The prompt layout relies on this to budget the
/// fixed parts independently of the issue text.
pub trait TokenCounter {
    fn count(&self, text: &str) -> usize;

    /// Byte length of the longest prefix of `text` made of at most `tokens`
    /// whole tokens.
    fn prefix_len(&self, text: &str, tokens: usize) -> usize;
}

/// Maximal runs of non-whitespace characters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WhitespaceTokens;

impl TokenCounter for WhitespaceTokens {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }

    fn prefix_len(&self, text: &str, tokens: usize) -> usize {
        if tokens == 0 {
            return 0;
        }
        let mut seen = 0;
        let mut in_token = false;
        for (pos, ch) in text.char_indices() {
            if ch.is_whitespace() {
                if in_token {
                    in_token = false;
                    if seen == tokens {
                        return pos;
                    }
                }
            } else if !in_token {
                in_token = true;
                seen += 1;
            }
        }
        text.len()
    }
}

pub fn count_tokens(text: &str) -> usize {
    WhitespaceTokens.count(text)
}

/// Longest prefix of `issue_text` holding at most `allowed_tokens` whole
/// tokens. Text already within the allowance is returned unchanged.
pub fn truncate_issue_text<'a>(issue_text: &'a str, allowed_tokens: usize) -> &'a str {
    truncate_with(&WhitespaceTokens, issue_text, allowed_tokens)
}

pub fn truncate_with<'a, T: TokenCounter + ?Sized>(
    counter: &T,
    issue_text: &'a str,
    allowed_tokens: usize,
) -> &'a str {
    if counter.count(issue_text) <= allowed_tokens {
        return issue_text;
    }
    &issue_text[..counter.prefix_len(issue_text, allowed_tokens)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    kind: PromptKind,
    instruction: &'static str,
    trailer: &'static str,
    budget_tokens: usize,
}

impl PromptTemplate {
    pub fn train() -> Self {
        Self {
            kind: PromptKind::Train,
            instruction: TRAIN_INSTRUCTION,
            trailer: TRAIN_TRAILER,
            budget_tokens: DEFAULT_BUDGET_TOKENS,
        }
    }

    pub fn eval() -> Self {
        Self {
            kind: PromptKind::Eval,
            instruction: EVAL_INSTRUCTION,
            trailer: EVAL_TRAILER,
            budget_tokens: DEFAULT_BUDGET_TOKENS,
        }
    }

    pub fn for_kind(kind: PromptKind) -> Self {
        match kind {
            PromptKind::Train => Self::train(),
            PromptKind::Eval => Self::eval(),
        }
    }

    /// Replaces the token budget. The budget must leave room for the
    /// instruction plus a completion line.
    pub fn with_budget(mut self, budget_tokens: usize) -> Result<Self> {
        let floor = count_tokens(self.instruction) + COMPLETION_HEADROOM;
        if budget_tokens < floor || budget_tokens < self.fixed_tokens(&WhitespaceTokens) {
            return Err(Error::BudgetTooSmall {
                budget: budget_tokens,
                fixed: floor.max(self.fixed_tokens(&WhitespaceTokens)),
            });
        }
        self.budget_tokens = budget_tokens;
        Ok(self)
    }

    pub fn kind(&self) -> PromptKind {
        self.kind
    }

    pub fn instruction(&self) -> &'static str {
        self.instruction
    }

    pub fn trailer(&self) -> &'static str {
        self.trailer
    }

    pub fn budget_tokens(&self) -> usize {
        self.budget_tokens
    }

    /// Tokens spent on everything except the issue text.
    pub fn fixed_tokens<T: TokenCounter + ?Sized>(&self, counter: &T) -> usize {
        counter.count(self.instruction) + counter.count(ISSUE_MARKER) + counter.count(self.trailer)
    }

    /// Renders the prompt for `report`, truncating the issue text so the
    /// whole prompt fits the budget under `counter`.
    pub fn render_with<T: TokenCounter + ?Sized>(&self, counter: &T, report: &IssueReport) -> String {
        let text = report.issue_text();
        let allowed = self.budget_tokens.saturating_sub(self.fixed_tokens(counter));
        let body = truncate_with(counter, &text, allowed);
        let mut prompt = String::with_capacity(
            self.instruction.len() + ISSUE_MARKER.len() + body.len() + self.trailer.len() + 2,
        );
        prompt.push_str(self.instruction);
        prompt.push('\n');
        prompt.push_str(ISSUE_MARKER);
        prompt.push_str(body);
        prompt.push('\n');
        prompt.push_str(self.trailer);
        prompt
    }

    pub fn render(&self, report: &IssueReport) -> String {
        self.render_with(&WhitespaceTokens, report)
    }
}

/// One supervised pair. The trainer appends the end-of-sequence token after
/// `completion` when `eos_appended` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub prompt: String,
    pub completion: String,
    #[serde(skip, default = "eos_default")]
    pub eos_appended: bool,
}

fn eos_default() -> bool {
    true
}

pub fn render_training_example(report: &IssueReport, template: &PromptTemplate) -> Result<TrainingExample> {
    if template.kind() != PromptKind::Train {
        return Err(Error::TemplateKind { expected: "train" });
    }
    Ok(TrainingExample {
        prompt: template.render(report),
        completion: String::from(report.assignee.raw()),
        eos_appended: true,
    })
}

pub fn render_eval_prompt(report: &IssueReport, template: &PromptTemplate) -> Result<String> {
    if template.kind() != PromptKind::Eval {
        return Err(Error::TemplateKind { expected: "eval" });
    }
    Ok(template.render(report))
}
