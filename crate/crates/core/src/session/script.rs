//! Scripted sessions driven by a simulated learner, used for golden files,
//! the CLI and the bindings.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ResponseInput, Session, SessionError, UpdateSummary};
use crate::config::EngineConfig;
use crate::sim::{student_rng, SimStudent};

/// Free text attached to every [`FREE_TEXT_EVERY`]-th response, alternating.
pub const SCRIPT_FREE_TEXT: [&str; 2] = ["I am confused and lost on this one", "That was clear and fun, I get it now"];
pub const FREE_TEXT_EVERY: usize = 5;

/// A learner whose true abilities are standard normal draws keyed by `seed`.
pub fn scripted_student(config: &EngineConfig, seed: u64) -> SimStudent {
    let mut rng = student_rng(seed, 1 << 32);
    let theta: BTreeMap<String, f64> =
        config.all_constructs().into_iter().map(|c| (c, rng.sample::<f64, _>(StandardNormal))).collect();
    SimStudent::with_rng(theta, seed, rng)
}

/// Answer up to `responses` more items, stopping early when the session
/// ends. Free text placement follows the session's response count, so a
/// resumed script continues exactly.
pub fn run_script(
    session: &mut Session,
    student: &mut SimStudent,
    responses: usize,
) -> Result<Vec<UpdateSummary>, SessionError> {
    let mut out = Vec::with_capacity(responses);
    for _ in 0..responses {
        let n = session.state().responses + 1;
        let step = match session.next_step() {
            Ok(s) => s,
            Err(SessionError::Finished) => break,
            Err(e) => return Err(e),
        };
        let item = session.engine().bank.get(&step.item.id).expect("served items are in the bank").clone();
        let obs = student.simulate_response(&item).map_err(|e| SessionError::InvalidAnswer(e.to_string()))?;
        let mut input = ResponseInput::new(&student.answer_text(&item, obs.correct), obs.latency_ms);
        input.item_id = Some(item.id.clone());
        if n.is_multiple_of(FREE_TEXT_EVERY) {
            input.free_text = Some(SCRIPT_FREE_TEXT[(n / FREE_TEXT_EVERY - 1) % 2].to_string());
        }
        out.push(session.submit_response(&input)?);
    }
    Ok(out)
}
