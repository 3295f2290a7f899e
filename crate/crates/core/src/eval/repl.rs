use std::io::{self, BufRead, Write};

use crate::nav::object_to_waypoint;
use crate::reasoner::external::{run_external, ExternalReasonerConfig};
use crate::reasoner::{GroundingResult, Grounder, ReasonerError};
use crate::scene::Scene;

/// `tool(n) > tool(n) > ...` with the number of ids each call returned.
pub fn trace_summary(result: &GroundingResult) -> String {
    if result.trace.is_empty() {
        return "no tool calls".into();
    }
    result
        .trace
        .iter()
        .map(|r| format!("{}({})", r.tool, r.result_ids.len()))
        .collect::<Vec<_>>()
        .join(" > ")
}

fn answer(grounder: &Grounder, scene: &Scene, external: Option<&ExternalReasonerConfig>, query: &str) -> String {
    let result = match grounder.resolve_utterance(query, scene) {
        Err(ReasonerError::OutOfGrammar(e)) => match external {
            None => return format!("needs external reasoner: {e}"),
            Some(config) => config
                .backend_for(query)
                .and_then(|mut b| run_external(config, b.as_mut(), grounder, scene, query)),
        },
        other => other,
    };
    let result = match result {
        Ok(r) => r,
        Err(e) => return format!("error: {e}"),
    };
    let Some(id) = result.target_id else {
        return format!("no target | {}", trace_summary(&result));
    };
    let label = scene.object(id).map(|o| o.label()).unwrap_or("?");
    let waypoint = match object_to_waypoint(scene, id) {
        Ok(w) => format!("[{:.2}, {:.2}]", w.x, w.y),
        Err(e) => format!("none ({e})"),
    };
    let flag = if result.low_confidence { " (low confidence)" } else { "" };
    format!("{id} {label}{flag} | waypoint {waypoint} | {}", trace_summary(&result))
}

/// Answers one query per input line until `:quit` or end of input. Errors
/// are printed and the loop continues. Statements outside the template
/// grammar go to `external` when given.
pub fn run_repl<R: BufRead, W: Write>(
    grounder: &Grounder,
    scene: &Scene,
    external: Option<&ExternalReasonerConfig>,
    input: R,
    mut output: W,
) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        let query = line.trim();
        if query.is_empty() {
            continue;
        }
        if query == ":quit" {
            break;
        }
        writeln!(output, "{}", answer(grounder, scene, external, query))?;
        output.flush()?;
    }
    Ok(())
}
