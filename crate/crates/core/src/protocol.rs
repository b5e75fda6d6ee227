//! Parse raw LLM responses into structured actions and final answers.
//!
//! Both templates demand output fenced in three backticks. Models sometimes
//! emit reasoning prose or several fenced snippets anyway, so extraction
//! takes the last complete fenced block: appending prose after a valid block
//! never changes the parsed action, and appending a new block replaces it.

use thiserror::Error;

use crate::domain::{AspProgram, FinalAnswer, GeneratorAction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("no complete triple-backtick fenced block in response")]
    MissingFence,
    #[error("fenced block is empty")]
    EmptyBlock,
}

/// Content of the last complete ```-fenced block.
///
/// An info string after the opening fence (e.g. a language tag) is accepted
/// and discarded. An unterminated trailing fence is ignored.
fn last_fenced_block(raw: &str) -> Result<String, ProtocolError> {
    let mut last: Option<String> = None;
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                None => current = Some(Vec::new()),
                Some(body) => last = Some(body.join("\n")),
            }
        } else if let Some(body) = current.as_mut() {
            body.push(line);
        }
    }
    last.ok_or(ProtocolError::MissingFence)
}

/// Parse a generator response into UPDATE or PASS.
///
/// A block whose trimmed content case-insensitively equals `OPERATION: PASS`
/// is a pass; anything else is an update carrying the block verbatim.
pub fn parse_generator_action(raw: &str) -> Result<GeneratorAction, ProtocolError> {
    let block = last_fenced_block(raw)?;
    let trimmed = block.trim();
    if trimmed.is_empty() {
        return Err(ProtocolError::EmptyBlock);
    }
    if trimmed.to_uppercase() == "OPERATION: PASS" {
        return Ok(GeneratorAction::Pass);
    }
    Ok(GeneratorAction::Update {
        program: AspProgram::new(block),
    })
}

/// Parse a formatter response into the final answer or a sentinel.
pub fn parse_formatter_output(raw: &str) -> Result<FinalAnswer, ProtocolError> {
    let block = last_fenced_block(raw)?;
    let trimmed = block.trim();
    match trimmed {
        "" => Err(ProtocolError::EmptyBlock),
        "UNSAT" => Ok(FinalAnswer::UnsatSentinel),
        "ERROR" => Ok(FinalAnswer::ErrorSentinel),
        _ => Ok(FinalAnswer::Text(trimmed.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_block_parses_as_pass() {
        let action = parse_generator_action("```\nOPERATION: PASS\n```").unwrap();
        assert_eq!(action, GeneratorAction::Pass);
    }

    #[test]
    fn pass_matching_is_case_insensitive_after_trim() {
        let action = parse_generator_action("```\n  operation: pass  \n```").unwrap();
        assert_eq!(action, GeneratorAction::Pass);
    }

    #[test]
    fn fenced_program_parses_as_update() {
        let raw = "```\nhouse(1..6).\n\n{ house_is(H, T) : house(H) } = 1 :- house_type(T).\n```";
        match parse_generator_action(raw).unwrap() {
            GeneratorAction::Update { program } => {
                assert!(program.source.starts_with("house(1..6)."));
            }
            GeneratorAction::Pass => panic!("expected update"),
        }
    }

    #[test]
    fn unfenced_prose_is_a_violation() {
        assert_eq!(
            parse_generator_action("I think the answer is fine."),
            Err(ProtocolError::MissingFence)
        );
    }

    #[test]
    fn empty_block_is_a_violation() {
        assert_eq!(
            parse_generator_action("```\n\n```"),
            Err(ProtocolError::EmptyBlock)
        );
    }

    #[test]
    fn last_block_wins() {
        let raw = "First try:\n```\nold(1).\n```\nActually:\n```\nnew(1).\n```\ndone";
        match parse_generator_action(raw).unwrap() {
            GeneratorAction::Update { program } => assert_eq!(program.source, "new(1)."),
            GeneratorAction::Pass => panic!(),
        }
    }

    #[test]
    fn trailing_prose_does_not_change_action() {
        let base = "```\np(1).\n```";
        let with_prose = format!("{base}\nHope that helps!");
        assert_eq!(
            parse_generator_action(base),
            parse_generator_action(&with_prose)
        );
    }

    #[test]
    fn info_string_is_discarded() {
        let raw = "```prolog\np(1).\n```";
        match parse_generator_action(raw).unwrap() {
            GeneratorAction::Update { program } => assert_eq!(program.source, "p(1)."),
            GeneratorAction::Pass => panic!(),
        }
    }

    #[test]
    fn unterminated_block_is_ignored() {
        let raw = "```\ncomplete(1).\n```\n```\ndangling";
        match parse_generator_action(raw).unwrap() {
            GeneratorAction::Update { program } => assert_eq!(program.source, "complete(1)."),
            GeneratorAction::Pass => panic!(),
        }
    }

    #[test]
    fn formatter_sentinels() {
        assert_eq!(
            parse_formatter_output("```\nUNSAT\n```").unwrap(),
            FinalAnswer::UnsatSentinel
        );
        assert_eq!(
            parse_formatter_output("```\nERROR\n```").unwrap(),
            FinalAnswer::ErrorSentinel
        );
        assert_eq!(
            parse_formatter_output("no fences"),
            Err(ProtocolError::MissingFence)
        );
    }

    #[test]
    fn formatter_text_body() {
        let raw = "```\n- **House 1**: The Mexican lawyer lives in the studio.\n```";
        match parse_formatter_output(raw).unwrap() {
            FinalAnswer::Text(body) => assert!(body.starts_with("- **House 1**")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
