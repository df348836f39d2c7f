//! The thought decompiler: parse LLM chat responses into alpha blocks, drive
//! the iterative validate-and-correct mining loop, manage the conversation's
//! token budget, and retrieve few-shot examples from the knowledge library.

pub mod client;
pub mod embed;

use std::collections::HashSet;

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::dsl::{parse, print_expr, OPERATOR_TABLE};
use crate::error::{Error, Result};
use crate::semantics::{validate, ValidationReport};

pub use client::{ChatClient, HttpChatClient, ScriptedClient};
pub use embed::{load_knowledge, retrieve_examples, Embedder, HashedBowEmbedder, KnowledgeDoc};

pub const DEFAULT_TOKEN_BUDGET: usize = 12_288;

/// One alpha proposal extracted from an LLM response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaBlock {
    pub name: String,
    pub expression: String,
    pub description: String,
    /// Byte range of the block in the source response.
    pub source_span: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    pub pinned: bool,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>, pinned: bool) -> ChatMessage {
        ChatMessage { role, content: content.into(), pinned }
    }
}

/// Conservative token estimate: ceil(bytes / 4).
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatHistory {
    pub messages: Vec<ChatMessage>,
    pub token_budget: usize,
}

impl ChatHistory {
    pub fn new(token_budget: usize) -> ChatHistory {
        ChatHistory { messages: Vec::new(), token_budget }
    }

    pub fn total_tokens(&self) -> usize {
        self.messages.iter().map(|m| estimate_tokens(&m.content)).sum()
    }

    pub fn push(&mut self, message: ChatMessage) {
        self.messages.push(message);
    }
}

/// Enforce the token budget: drop the oldest non-pinned messages first; when
/// only one non-pinned message remains and the history still exceeds the
/// budget, hard-truncate its content from the front, prefixing
/// `[truncated]`. Pinned messages always survive.
pub fn truncate_history(history: &ChatHistory) -> Result<ChatHistory> {
    let mut h = history.clone();
    loop {
        if h.total_tokens() <= h.token_budget {
            return Ok(h);
        }
        let non_pinned: Vec<usize> = h
            .messages
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.pinned)
            .map(|(i, _)| i)
            .collect();
        match non_pinned.len() {
            0 => {
                return Err(Error::PinnedOverBudget {
                    tokens: h.total_tokens(),
                    budget: h.token_budget,
                })
            }
            1 => {
                let i = non_pinned[0];
                let others: usize = h
                    .messages
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, m)| estimate_tokens(&m.content))
                    .sum();
                if others >= h.token_budget {
                    // Even an empty survivor cannot fit; drop it and let the
                    // pinned-only case report the overflow.
                    h.messages.remove(i);
                    continue;
                }
                let allowed_bytes = (h.token_budget - others) * 4;
                const PREFIX: &str = "[truncated]";
                if allowed_bytes <= PREFIX.len() {
                    // Not even the prefix fits; the message cannot shrink
                    // into the budget, so drop it entirely.
                    h.messages.remove(i);
                    continue;
                }
                let content = &h.messages[i].content;
                let keep = allowed_bytes.saturating_sub(PREFIX.len());
                // Keep the newest tail on a char boundary.
                let mut start = content.len().saturating_sub(keep);
                while start < content.len() && !content.is_char_boundary(start) {
                    start += 1;
                }
                h.messages[i].content = format!("{PREFIX}{}", &content[start..]);
            }
            _ => {
                h.messages.remove(non_pinned[0]);
            }
        }
    }
}

/// Parse an LLM response into alpha blocks.
///
/// A block is three labeled lines — `Name:`, `Expression:`, `Description:` —
/// with case-insensitive labels, optional numbering/bullet prefixes, and an
/// optional code fence around the expression. Blocks missing a label are
/// skipped with a diagnostic; order is preserved.
pub fn parse_response(text: &str) -> (Vec<AlphaBlock>, Vec<String>) {
    static LABEL: OnceLock<Regex> = OnceLock::new();
    let label = LABEL.get_or_init(|| {
        Regex::new(r"(?i)^\s*(?:#+\s*)?(?:\d+\s*[.)]\s*)?(?:[-*]\s*)?(name|expression|description)\s*:\s*(.*)$")
            .expect("label regex compiles")
    });

    struct Partial {
        start: usize,
        end: usize,
        name: Option<String>,
        expression: Option<String>,
        description: Vec<String>,
        in_fence: bool,
        fence_is_expression: bool,
    }

    let mut blocks = Vec::new();
    let mut diagnostics = Vec::new();
    let mut current: Option<Partial> = None;

    let finalize = |p: Partial, blocks: &mut Vec<AlphaBlock>, diagnostics: &mut Vec<String>| {
        let name = p.name.unwrap_or_default();
        match p.expression {
            Some(expr) if !expr.trim().is_empty() && !name.trim().is_empty() => {
                blocks.push(AlphaBlock {
                    name: name.trim().to_string(),
                    expression: expr.trim().to_string(),
                    description: p.description.join(" ").trim().to_string(),
                    source_span: (p.start, p.end),
                });
            }
            _ => {
                let missing = if name.trim().is_empty() { "Name" } else { "Expression" };
                diagnostics.push(format!(
                    "block at bytes {}..{} is missing its {missing}: label",
                    p.start, p.end
                ));
            }
        }
    };

    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let trimmed_line = line.trim_end_matches(['\n', '\r']);

        if let Some(p) = current.as_mut() {
            if p.in_fence {
                if trimmed_line.trim_start().starts_with("```") {
                    p.in_fence = false;
                } else if p.fence_is_expression {
                    let existing = p.expression.get_or_insert_with(String::new);
                    if !existing.is_empty() {
                        existing.push(' ');
                    }
                    existing.push_str(trimmed_line.trim());
                }
                p.end = offset;
                continue;
            }
        }

        if let Some(caps) = label.captures(trimmed_line) {
            let which = caps[1].to_lowercase();
            let value = caps[2].trim().to_string();
            if which == "name" {
                if let Some(p) = current.take() {
                    finalize(p, &mut blocks, &mut diagnostics);
                }
                current = Some(Partial {
                    start,
                    end: offset,
                    name: Some(value),
                    expression: None,
                    description: Vec::new(),
                    in_fence: false,
                    fence_is_expression: false,
                });
            } else if let Some(p) = current.as_mut() {
                p.end = offset;
                if which == "expression" {
                    p.expression = Some(strip_inline_fence(&value));
                    if value.is_empty() {
                        // Expression may follow in a fenced block.
                        p.fence_is_expression = true;
                    }
                } else {
                    if !value.is_empty() {
                        p.description.push(value);
                    }
                    p.fence_is_expression = false;
                }
            }
            continue;
        }

        if let Some(p) = current.as_mut() {
            let t = trimmed_line.trim();
            if t.starts_with("```") {
                p.in_fence = true;
                p.end = offset;
            } else if !t.is_empty() {
                if p.fence_is_expression && p.expression.as_deref().unwrap_or("").is_empty() {
                    // Bare continuation line right after an empty Expression:.
                    p.expression = Some(strip_inline_fence(t));
                } else if p.expression.is_some() {
                    p.description.push(t.to_string());
                }
                p.end = offset;
            }
        }
    }
    if let Some(p) = current.take() {
        finalize(p, &mut blocks, &mut diagnostics);
    }
    (blocks, diagnostics)
}

fn strip_inline_fence(s: &str) -> String {
    let t = s.trim();
    let t = t.strip_prefix("```").map(|x| x.trim_start()).unwrap_or(t);
    let t = t.strip_suffix("```").map(|x| x.trim_end()).unwrap_or(t);
    t.trim_matches('`').trim().to_string()
}

/// Render well-formed blocks back into the canonical response format
/// (the inverse of `parse_response` on clean inputs).
pub fn render_blocks(blocks: &[AlphaBlock]) -> String {
    let mut out = String::new();
    for (i, b) in blocks.iter().enumerate() {
        out.push_str(&format!(
            "{}. Name: {}\nExpression: {}\nDescription: {}\n\n",
            i + 1,
            b.name,
            b.expression,
            b.description
        ));
    }
    out
}

fn system_prompt() -> String {
    let ops: Vec<String> = OPERATOR_TABLE
        .iter()
        .map(|s| format!("{}/{}", s.name, s.arity))
        .collect();
    format!(
        "You translate trading ideas into formulaic alphas.\n\
         Grammar: expressions over the fields open, high, low, close, volume, vwap \
         using only these operators (name/arity): {}.\n\
         Window arguments must be integer literals between 1 and 250.\n\
         Keep units consistent: never add or subtract series measured in \
         different units (for example volume + close is invalid).\n\
         Respond with numbered blocks, each exactly three lines:\n\
         Name: <short name>\n\
         Expression: <one expression>\n\
         Description: <one-paragraph rationale>",
        ops.join(", ")
    )
}

/// Messages to append for the next round.
///
/// Round 1 (`errors` empty): pinned system message with the grammar and block
/// format plus a pinned user message carrying the idea and retrieved
/// examples. Correction rounds: one user message enumerating the failures.
pub fn build_prompt(
    idea: &str,
    examples: &[KnowledgeDoc],
    errors: &[(String, ValidationReport)],
    batch_size: usize,
) -> Vec<ChatMessage> {
    if errors.is_empty() {
        let mut user = format!("Trading idea: {idea}\n");
        if !examples.is_empty() {
            user.push_str("\nExamples of well-formed alphas:\n");
            for d in examples {
                user.push_str(&format!("- {} — {}\n", d.expression, d.explanation));
            }
        }
        user.push_str(&format!(
            "\nGenerate {batch_size} candidate alphas in the required block format."
        ));
        vec![
            ChatMessage::new(Role::System, system_prompt(), true),
            ChatMessage::new(Role::User, user, true),
        ]
    } else {
        let mut user = String::from("These expressions failed validation:\n");
        for (i, (expr, report)) in errors.iter().enumerate() {
            user.push_str(&format!("{}. {} — {}\n", i + 1, expr, report.render_line()));
        }
        user.push_str(
            "\nRe-generate corrected versions of only these alphas, in the required block format.",
        );
        vec![ChatMessage::new(Role::User, user, false)]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningConfig {
    pub target_valid: usize,
    pub batch_size: usize,
    pub max_rounds: usize,
    pub k_examples: usize,
    pub token_budget: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            target_valid: 5,
            batch_size: 10,
            max_rounds: 5,
            k_examples: 3,
            token_budget: DEFAULT_TOKEN_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinedAlpha {
    /// Canonical expression text (round-tripped through the parser).
    pub expression: String,
    pub block: AlphaBlock,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningOutcome {
    pub alphas: Vec<MinedAlpha>,
    pub history: ChatHistory,
    pub rounds_run: usize,
    /// Set when the chat client failed after retries; the alphas gathered up
    /// to that point are still returned.
    pub client_error: Option<String>,
}

/// The iterative validate-and-correct loop.
///
/// Each round: build the prompt (idea + examples first, error lists after),
/// truncate to budget, call the client, parse the blocks, validate each, and
/// accumulate valid alphas (deduplicated by canonical text) until
/// `target_valid` is reached or `max_rounds` elapse.
pub fn mining_loop(
    idea: &str,
    client: &mut dyn ChatClient,
    library: &[KnowledgeDoc],
    cfg: &MiningConfig,
) -> Result<MiningOutcome> {
    if cfg.batch_size == 0 || cfg.max_rounds == 0 {
        return Err(Error::InvalidArgument("batch_size and max_rounds must be >= 1".into()));
    }
    let embedder = HashedBowEmbedder::default();
    let examples = retrieve_examples(library, idea, cfg.k_examples, &embedder);

    let mut history = ChatHistory::new(cfg.token_budget);
    let mut alphas: Vec<MinedAlpha> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut errors: Vec<(String, ValidationReport)> = Vec::new();
    let mut rounds_run = 0usize;
    let mut client_error = None;

    for round in 0..cfg.max_rounds {
        let delta = if round == 0 {
            build_prompt(idea, &examples, &[], cfg.batch_size)
        } else {
            build_prompt(idea, &[], &errors, cfg.batch_size)
        };
        history.messages.extend(delta);
        history = truncate_history(&history)?;

        let reply = match client.complete(&history.messages) {
            Ok(r) => r,
            Err(e) => {
                client_error = Some(e.to_string());
                break;
            }
        };
        rounds_run = round + 1;
        history.push(ChatMessage::new(Role::Assistant, reply.clone(), false));

        let (blocks, diagnostics) = parse_response(&reply);
        errors.clear();
        if blocks.is_empty() {
            errors.push((
                "<no blocks parsed>".to_string(),
                ValidationReport {
                    verdict: crate::semantics::Verdict::SyntaxError,
                    message: format!(
                        "no blocks found in the response ({} diagnostics)",
                        diagnostics.len()
                    ),
                    offset: None,
                    stats: None,
                },
            ));
        }
        for block in blocks {
            let report = validate(&block.expression);
            if report.is_valid() {
                let canonical =
                    print_expr(&parse(&block.expression).expect("valid implies parseable"));
                if seen.insert(canonical.clone()) {
                    alphas.push(MinedAlpha { expression: canonical, block, report });
                }
            } else {
                errors.push((block.expression.clone(), report));
            }
        }
        if alphas.len() >= cfg.target_valid {
            break;
        }
    }
    Ok(MiningOutcome { alphas, history, rounds_run, client_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn two_well_formed_blocks_in_order() {
        let text = "1. Name: Momentum\nExpression: cs_rank(ts_delta(close, 5))\nDescription: weekly momentum.\n\n\
                    2. Name: Volume spike\nExpression: div(volume, ts_mean(volume, 20))\nDescription: abnormal volume.\n";
        let (blocks, diags) = parse_response(text);
        assert_eq!(blocks.len(), 2);
        assert!(diags.is_empty());
        assert_eq!(blocks[0].name, "Momentum");
        assert_eq!(blocks[1].expression, "div(volume, ts_mean(volume, 20))");
    }

    #[test]
    fn missing_expression_is_a_diagnostic() {
        let text = "Name: Broken\nDescription: no formula here.\n";
        let (blocks, diags) = parse_response(text);
        assert!(blocks.is_empty());
        assert_eq!(diags.len(), 1);
        assert!(diags[0].contains("Expression"));
    }

    #[test]
    fn code_fences_are_stripped() {
        let text = "Name: Fenced\nExpression:\n```\ncs_rank(close)\n```\nDescription: fenced formula.\n";
        let (blocks, _) = parse_response(text);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].expression, "cs_rank(close)");

        let inline = "Name: Inline\nExpression: `cs_zscore(volume)`\nDescription: inline ticks.\n";
        let (blocks, _) = parse_response(inline);
        assert_eq!(blocks[0].expression, "cs_zscore(volume)");
    }

    #[test]
    fn render_parse_round_trip() {
        let blocks = vec![
            AlphaBlock {
                name: "A".into(),
                expression: "cs_rank(close)".into(),
                description: "ranked close.".into(),
                source_span: (0, 0),
            },
            AlphaBlock {
                name: "B".into(),
                expression: "ts_corr(close, volume, 10)".into(),
                description: "price-volume link.".into(),
                source_span: (0, 0),
            },
        ];
        let (parsed, diags) = parse_response(&render_blocks(&blocks));
        assert!(diags.is_empty());
        assert_eq!(parsed.len(), 2);
        for (a, b) in blocks.iter().zip(&parsed) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.expression, b.expression);
            assert_eq!(a.description, b.description);
        }
    }

    #[test]
    fn first_round_prompt_is_two_messages() {
        let msgs = build_prompt("mean reversion", &[], &[], 10);
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].role, Role::System);
        assert!(msgs.iter().all(|m| m.pinned));
    }

    #[test]
    fn correction_prompt_enumerates_errors() {
        let report = validate("add(volume, close)");
        let errors = vec![
            ("add(volume, close)".to_string(), report.clone()),
            ("foo(close)".to_string(), validate("foo(close)")),
            ("ts_std(close, 1)".to_string(), validate("ts_std(close, 1)")),
        ];
        let msgs = build_prompt("idea", &[], &errors, 10);
        assert_eq!(msgs.len(), 1);
        assert!(!msgs[0].pinned);
        for i in 1..=3 {
            assert!(msgs[0].content.contains(&format!("{i}. ")));
        }
    }

    #[test]
    fn example_docs_appear_verbatim() {
        let doc = KnowledgeDoc {
            id: "x".into(),
            expression: "cs_rank(ts_delta(close, 5))".into(),
            explanation: "weekly momentum ranked".into(),
            embedding: vec![],
        };
        let msgs = build_prompt("idea", &[doc.clone()], &[], 5);
        assert!(msgs[1].content.contains(&doc.expression));
        assert!(msgs[1].content.contains(&doc.explanation));
    }

    #[test]
    fn truncation_drops_oldest_non_pinned_first() {
        let mut h = ChatHistory::new(12_288);
        h.push(ChatMessage::new(Role::System, "s".repeat(8_000), true));
        h.push(ChatMessage::new(Role::User, "u".repeat(8_000), true));
        for i in 0..8 {
            h.push(ChatMessage::new(Role::Assistant, format!("{i}").repeat(8_000), false));
        }
        let t = truncate_history(&h).unwrap();
        assert!(t.total_tokens() <= t.token_budget);
        assert!(t.messages.len() <= 6);
        assert!(t.messages[0].pinned && t.messages[1].pinned);
        // The survivors are the newest non-pinned messages.
        let last = t.messages.last().unwrap();
        assert!(last.content.starts_with('7') || last.content.starts_with("[truncated]"));
    }

    #[test]
    fn pinned_over_budget_is_an_error() {
        let mut h = ChatHistory::new(100);
        h.push(ChatMessage::new(Role::System, "x".repeat(80_000), true));
        assert!(matches!(truncate_history(&h), Err(Error::PinnedOverBudget { .. })));
    }

    #[test]
    fn truncation_is_idempotent_on_random_histories() {
        let mut rng = Rng::seed_from(17);
        for _ in 0..200 {
            let budget = 64 + rng.below(512);
            let mut h = ChatHistory::new(budget);
            let n = 1 + rng.below(12);
            for i in 0..n {
                let len = rng.below(2_000);
                let pinned = i < 2 && rng.bool_with(0.5);
                h.push(ChatMessage::new(Role::User, "m".repeat(len), pinned));
            }
            match truncate_history(&h) {
                Ok(once) => {
                    assert!(once.total_tokens() <= budget);
                    assert!(once.total_tokens() <= h.total_tokens());
                    let twice = truncate_history(&once).unwrap();
                    assert_eq!(once, twice);
                    let pinned_in = h.messages.iter().filter(|m| m.pinned).count();
                    let pinned_out = once.messages.iter().filter(|m| m.pinned).count();
                    assert_eq!(pinned_in, pinned_out);
                }
                Err(Error::PinnedOverBudget { .. }) => {
                    let pinned_tokens: usize = h
                        .messages
                        .iter()
                        .filter(|m| m.pinned)
                        .map(|m| estimate_tokens(&m.content))
                        .sum();
                    assert!(pinned_tokens > budget);
                }
                Err(e) => panic!("unexpected error {e:?}"),
            }
        }
    }

    fn demo_round_one() -> String {
        render_blocks(&[
            block("Momentum", "cs_rank(ts_delta(close, 5))"),
            block("Mean reversion", "mul(-1, cs_zscore(sub(close, ts_mean(close, 20))))"),
            block("Volume spike", "cs_rank(div(volume, ts_mean(volume, 20)))"),
            block("Golden cross", "sub(ts_mean(close, 5), ts_mean(close, 20))"),
            block("Liquidity", "add(volume, close)"),
            block("Fast mean", "ts_mean(close 5)"),
            block("Mystery", "foo(close)"),
            block("Log gap", "log(sub(close, close))"),
            block("Flat", "sub(close, close)"),
            block("Tight std", "ts_std(close, 1)"),
        ])
    }

    fn demo_round_two() -> String {
        render_blocks(&[
            block("Liquidity fixed", "div(volume, ts_mean(volume, 5))"),
            block("Fast mean fixed", "cs_zscore(div(close, vwap))"),
            block("Mystery fixed", "ts_corr(close, volume, 10)"),
            block("Log gap fixed", "mul(-1, cs_rank(ts_std(close, 10)))"),
            block("Flat fixed", "group_neutralize(cs_zscore(ts_delta(close, 3)))"),
            block("Tight std fixed", "sub(close, ts_min(close, 10))"),
        ])
    }

    fn block(name: &str, expr: &str) -> AlphaBlock {
        AlphaBlock {
            name: name.into(),
            expression: expr.into(),
            description: format!("{name} rationale."),
            source_span: (0, 0),
        }
    }

    #[test]
    fn mining_loop_four_of_ten_then_corrections() {
        let mut client = ScriptedClient::new(vec![demo_round_one(), demo_round_two()]);
        let cfg = MiningConfig { target_valid: 10, max_rounds: 5, ..MiningConfig::default() };
        let out = mining_loop("momentum and liquidity ideas", &mut client, &[], &cfg).unwrap();
        assert_eq!(out.rounds_run, 2);
        assert_eq!(out.alphas.len(), 10);
        assert!(out.client_error.is_none());
        for a in &out.alphas {
            assert!(validate(&a.expression).is_valid());
        }
    }

    #[test]
    fn mining_loop_is_deterministic() {
        let cfg = MiningConfig { target_valid: 10, ..MiningConfig::default() };
        let run = || {
            let mut c = ScriptedClient::new(vec![demo_round_one(), demo_round_two()]);
            mining_loop("idea", &mut c, &[], &cfg).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(
            serde_json::to_string(&a.history).unwrap(),
            serde_json::to_string(&b.history).unwrap()
        );
    }

    #[test]
    fn mining_loop_stops_at_max_rounds_with_persistent_failures() {
        let bad = render_blocks(&[block("Bad", "add(volume, close)")]);
        let mut client =
            ScriptedClient::new(vec![bad.clone(), bad.clone(), bad.clone(), bad.clone(), bad]);
        let cfg = MiningConfig { target_valid: 1, max_rounds: 3, ..MiningConfig::default() };
        let out = mining_loop("idea", &mut client, &[], &cfg).unwrap();
        assert_eq!(out.rounds_run, 3);
        assert!(out.alphas.is_empty());
        assert!(out.client_error.is_none());
    }

    #[test]
    fn client_failure_keeps_partial_results() {
        // One scripted round, then exhaustion => client error on round 2.
        let mut client = ScriptedClient::new(vec![demo_round_one()]);
        let cfg = MiningConfig { target_valid: 10, max_rounds: 5, ..MiningConfig::default() };
        let out = mining_loop("idea", &mut client, &[], &cfg).unwrap();
        assert_eq!(out.alphas.len(), 4);
        assert!(out.client_error.is_some());
    }

    #[test]
    fn target_reached_in_round_one_stops_the_loop() {
        let mut client = ScriptedClient::new(vec![demo_round_one(), demo_round_two()]);
        let cfg = MiningConfig { target_valid: 1, ..MiningConfig::default() };
        let out = mining_loop("idea", &mut client, &[], &cfg).unwrap();
        assert_eq!(out.rounds_run, 1);
        assert!(out.alphas.len() >= 1);
    }
}
