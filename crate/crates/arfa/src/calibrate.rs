//! Offline calibration: replays resolution records through the belief
//! optimizer in ledger order.

use arfa_core::{
    observe_outcome, update_beliefs, AdamState, OperatorId, OperatorProfile, OptimizerConfig, ResolutionRecord,
    SuccessTracker,
};

/// Replays `records` starting from `initial` profiles. Operators that
/// appear only in the records are appended with uninformed beliefs, in
/// order of first appearance.
///
/// For a trial run online this reproduces the trial's final beliefs
/// exactly, given the same optimizer settings and starting beliefs.
pub fn replay(
    records: &[ResolutionRecord],
    initial: Vec<OperatorProfile>,
    config: &OptimizerConfig,
) -> arfa_core::Result<Vec<OperatorProfile>> {
    config.validate()?;
    let mut profiles = initial;
    for r in records {
        if !profiles.iter().any(|p| p.id == r.operator_id) {
            profiles.push(OperatorProfile::new(r.operator_id.clone()));
        }
    }
    let mut adam = vec![AdamState::new(); profiles.len()];
    let mut tracker = SuccessTracker::new(config.grid());
    for r in records {
        let i = index_of(&profiles, &r.operator_id);
        observe_outcome(&mut tracker, &r.operator_id, &r.requirements, r.succeeded);
        update_beliefs(&mut profiles[i], &tracker, &mut adam[i], config);
    }
    Ok(profiles)
}

fn index_of(profiles: &[OperatorProfile], id: &OperatorId) -> usize {
    profiles.iter().position(|p| &p.id == id).expect("every record operator has a profile")
}
