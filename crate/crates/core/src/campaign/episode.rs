//! The per-frame sensing, control and actuation loop of one trial.

use std::collections::BTreeMap;

use super::{environment_seed, AgentConfig, CampaignError, EpisodeRecord, Outcome, ResolvedCampaign, Trial};
use crate::agent::{
    nn_forward, nn_input, rule_controller, sense, AgentParams, ControlCommand, ControllerState, SensorFrame, Weights,
};
use crate::faultlib::{
    apply_to_command, apply_to_sensor, inject_data_fault, inject_ml_fault, select_locations, trigger_active,
    ChannelDirection, DataMemory, FaultModel, FaultSpec, FaultTarget, ParamIndex, TimingChannel,
};
use crate::rng::{derive_seed, SimRng};
use crate::violations::{is_accident, CountMode, ViolationLedger};
use crate::world::{MissionStatus, World};

/// Everything a trial needs that is shared across the campaign.
#[derive(Clone, Debug)]
pub struct EpisodeContext {
    pub master_seed: u64,
    pub scenarios: BTreeMap<String, World>,
    pub fault_specs: BTreeMap<String, FaultSpec>,
    pub ml_locations: BTreeMap<String, Vec<ParamIndex>>,
    pub weights: Option<Weights>,
    pub params: AgentParams,
    pub halt_on_collision: bool,
    pub count_mode: CountMode,
    pub contact_cooldown: u64,
}

impl EpisodeContext {
    pub fn new(c: &ResolvedCampaign) -> Self {
        let ml_locations = match &c.weights {
            Some(w) => c
                .fault_specs
                .iter()
                .filter_map(|s| select_locations(&w.shape(), s).ok().map(|l| (s.id.clone(), l)))
                .collect(),
            None => BTreeMap::new(),
        };
        EpisodeContext {
            master_seed: c.config.master_seed,
            scenarios: c.scenarios.iter().map(|s| (s.id.clone(), s.world.clone())).collect(),
            fault_specs: c.fault_specs.iter().map(|s| (s.id.clone(), s.clone())).collect(),
            ml_locations,
            weights: match c.config.agent {
                AgentConfig::Rule => None,
                AgentConfig::Nn { .. } => c.weights.clone(),
            },
            params: c.config.agent_params.apply(AgentParams::default()),
            halt_on_collision: c.config.halt_on_collision,
            count_mode: c.config.count_mode,
            contact_cooldown: c.config.contact_cooldown,
        }
    }
}

struct ActiveFault<'a> {
    spec: &'a FaultSpec,
    rng: SimRng,
    memory: DataMemory,
    sensor_link: Option<TimingChannel<SensorFrame>>,
    command_link: Option<TimingChannel<ControlCommand>>,
    faulted_weights: Option<Weights>,
}

fn data_err(trial: &Trial, e: impl std::fmt::Display) -> CampaignError {
    CampaignError::Data(format!("trial {}: {e}", trial.id()))
}

/// Runs one trial to success, timeout or a halting collision.
pub fn run_episode(trial: &Trial, ctx: &EpisodeContext) -> Result<EpisodeRecord, CampaignError> {
    let template = ctx
        .scenarios
        .get(&trial.scenario_id)
        .ok_or_else(|| CampaignError::Config(format!("unknown scenario id {}", trial.scenario_id)))?;
    let mut faults: Vec<ActiveFault> = Vec::new();
    if !trial.is_golden() {
        let spec = ctx
            .fault_specs
            .get(&trial.fault_spec_id)
            .ok_or_else(|| CampaignError::Config(format!("unknown fault spec id {}", trial.fault_spec_id)))?;
        faults.push(ActiveFault {
            spec,
            rng: SimRng::seed_from_u64(derive_seed(trial.seed, &[&spec.id, &spec.seed.to_string()])),
            memory: DataMemory::default(),
            sensor_link: None,
            command_link: None,
            faulted_weights: None,
        });
    }

    let params = &ctx.params;
    let mut world = template.clone();
    let mut env = SimRng::seed_from_u64(environment_seed(ctx.master_seed, &trial.scenario_id, trial.replicate_index));
    let mut state = ControllerState::default();
    let mut ledger = ViolationLedger::new(ctx.count_mode, ctx.contact_cooldown);
    let mut first_injection: Option<f64> = None;
    let mut nan_substitutions = 0u32;

    let outcome = loop {
        let f = world.frame;
        let mut frame = sense(&world, &mut env, params);

        let active: Vec<bool> = faults.iter_mut().map(|a| trigger_active(&a.spec.trigger, f, &mut a.rng)).collect();
        if first_injection.is_none() && active.iter().any(|&a| a) {
            first_injection = Some(world.time());
        }

        for (a, _) in faults.iter_mut().zip(&active).filter(|(_, &on)| on) {
            if let FaultModel::Data(_) = a.spec.model {
                frame = inject_data_fault(&frame, a.spec, &mut a.memory, &mut a.rng).map_err(|e| data_err(trial, e))?;
            }
        }
        for (a, _) in faults.iter_mut().zip(&active).filter(|(_, &on)| on) {
            if let (FaultModel::Hardware(m), FaultTarget::SensorChannel(ch)) = (&a.spec.model, &a.spec.target) {
                frame = apply_to_sensor(&frame, *ch, m, &mut a.rng);
            }
        }
        nan_substitutions += frame.sanitize(params.max_range);

        for (a, &on) in faults.iter_mut().zip(&active) {
            if let (FaultModel::Timing(m), FaultTarget::ChannelDirection(ChannelDirection::SenseToAgent)) =
                (&a.spec.model, &a.spec.target)
            {
                let link = a.sensor_link.get_or_insert_with(|| TimingChannel::new(m, frame.clone()));
                frame = if on {
                    link.push(f, frame);
                    link.pop(f, &mut a.rng)
                } else {
                    link.bypass(frame)
                };
            }
        }

        let mut cmd = match &ctx.weights {
            None => rule_controller(&frame, &world.mission, &mut state, params),
            Some(clean) => {
                let mut weights = clean;
                for (a, &on) in faults.iter_mut().zip(&active) {
                    if !(on && matches!(a.spec.model, FaultModel::Ml(_))) {
                        continue;
                    }
                    if a.faulted_weights.is_none() {
                        let locs = ctx.ml_locations.get(&a.spec.id).map(Vec::as_slice).unwrap_or(&[]);
                        a.faulted_weights =
                            Some(inject_ml_fault(clean, locs, a.spec, &mut a.rng).map_err(|e| data_err(trial, e))?);
                    }
                }
                for (a, &on) in faults.iter().zip(&active) {
                    if let (true, Some(w)) = (on, &a.faulted_weights) {
                        weights = w;
                    }
                }
                let input = nn_input(&frame, &world.mission, &mut state, params);
                nn_forward(&input, weights, f).map_err(|e| data_err(trial, e))?
            }
        };
        cmd.frame = f;

        for (a, _) in faults.iter_mut().zip(&active).filter(|(_, &on)| on) {
            if let (FaultModel::Hardware(m), FaultTarget::CommandField(field)) = (&a.spec.model, &a.spec.target) {
                cmd = apply_to_command(&cmd, *field, m, &mut a.rng);
            }
        }
        for (a, &on) in faults.iter_mut().zip(&active) {
            if let (FaultModel::Timing(m), FaultTarget::ChannelDirection(ChannelDirection::AgentToActuation)) =
                (&a.spec.model, &a.spec.target)
            {
                let link = a.command_link.get_or_insert_with(|| TimingChannel::new(m, ControlCommand::safe_default(0)));
                cmd = if on {
                    link.push(f, cmd);
                    link.pop(f, &mut a.rng)
                } else {
                    link.bypass(cmd)
                };
            }
        }
        nan_substitutions += cmd.sanitize();

        let next = world.step(&cmd);
        let crashed = ledger.observe(&world, &next).iter().any(|e| is_accident(e.kind));
        world = next;
        if crashed && ctx.halt_on_collision {
            break Outcome::HaltedOnCollision;
        }
        match world.mission_status() {
            MissionStatus::Success => break Outcome::Success,
            MissionStatus::Timeout => break Outcome::Timeout,
            MissionStatus::InProgress => {}
        }
    };

    Ok(EpisodeRecord {
        trial: trial.clone(),
        outcome,
        distance_km: world.odometer_km,
        violations: ledger.into_events(),
        first_injection_time: first_injection,
        duration_s: world.time(),
        nan_substitutions,
    })
}
