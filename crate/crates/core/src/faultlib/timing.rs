//! A single logical link with delay, loss and bounded reordering.

use std::collections::VecDeque;

use super::{TimingMode, TimingModel};
use crate::agent::{ControlCommand, SensorFrame};
use crate::rng::SimRng;

/// Payloads that can travel over a [`TimingChannel`].
pub trait TimingPayload: Clone {
    /// Frame the payload was produced for.
    fn origin_frame(&self) -> u64;
}

impl TimingPayload for ControlCommand {
    fn origin_frame(&self) -> u64 {
        self.frame
    }
}

impl TimingPayload for SensorFrame {
    fn origin_frame(&self) -> u64 {
        self.frame
    }
}

/// `pop(f)` delivers the payload pushed at `f - delay`. When nothing is due,
/// or the due payload is dropped, the channel falls back to the last
/// delivered payload (`replay_last`, `reorder`) or to the default payload
/// (`drop_to_default`). With `reorder(w)` a due pop picks uniformly among the
/// `w` oldest buffered payloads, due or not; no payload is ever delivered
/// before the frame it was pushed.
#[derive(Clone, Debug)]
pub struct TimingChannel<P> {
    queue: VecDeque<(u64, P)>,
    pub delay: u64,
    pub drop_probability: f64,
    pub mode: TimingMode,
    default: P,
    last: P,
}

impl<P: TimingPayload> TimingChannel<P> {
    pub fn new(model: &TimingModel, default: P) -> Self {
        TimingChannel {
            queue: VecDeque::new(),
            delay: model.delay_frames,
            drop_probability: model.drop_probability,
            mode: model.mode,
            last: default.clone(),
            default,
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Upper bound on the buffered payload count after a pop.
    pub fn capacity_bound(&self) -> usize {
        let w = match self.mode {
            TimingMode::Reorder { window } => window,
            _ => 0,
        };
        self.delay as usize + w
    }

    pub fn push(&mut self, frame: u64, payload: P) {
        self.queue.push_back((frame, payload));
    }

    fn fallback(&self) -> P {
        match self.mode {
            TimingMode::DropToDefault => self.default.clone(),
            TimingMode::ReplayLast | TimingMode::Reorder { .. } => self.last.clone(),
        }
    }

    /// Delivers the payload for `frame`. Consumes one uniform draw for the
    /// drop decision whenever a payload is due (plus one index draw in
    /// reorder mode), regardless of the drop probability.
    pub fn pop(&mut self, frame: u64, rng: &mut SimRng) -> P {
        let due = self.queue.front().is_some_and(|(f, _)| f + self.delay <= frame);
        if !due {
            return self.fallback();
        }
        let idx = match self.mode {
            TimingMode::Reorder { window } => rng.below(window.min(self.queue.len())),
            _ => 0,
        };
        let (_, payload) = self.queue.remove(idx).expect("index within queue");
        if rng.uniform() < self.drop_probability {
            return self.fallback();
        }
        self.last = payload.clone();
        payload
    }

    /// Passes `payload` straight through while the fault is not engaged,
    /// discarding anything still buffered.
    pub fn bypass(&mut self, payload: P) -> P {
        self.queue.clear();
        self.last = payload.clone();
        payload
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmd(frame: u64) -> ControlCommand {
        ControlCommand { steer: frame as f64 / 1000.0, throttle: 0.5, brake: 0.0, frame }
    }

    fn model(delay: u64, drop: f64, mode: TimingMode) -> TimingModel {
        TimingModel { delay_frames: delay, drop_probability: drop, mode }
    }

    #[test]
    fn zero_delay_is_identity() {
        let mut ch = TimingChannel::new(&model(0, 0.0, TimingMode::ReplayLast), ControlCommand::safe_default(0));
        let mut rng = SimRng::seed_from_u64(1);
        for f in 0..50 {
            ch.push(f, cmd(f));
            assert_eq!(ch.pop(f, &mut rng), cmd(f));
        }
    }

    #[test]
    fn delay_of_thirty_frames_lags_two_seconds() {
        let mut ch = TimingChannel::new(&model(30, 0.0, TimingMode::ReplayLast), ControlCommand::safe_default(0));
        let mut rng = SimRng::seed_from_u64(1);
        for f in 0..100 {
            ch.push(f, cmd(f));
            let out = ch.pop(f, &mut rng);
            if f < 30 {
                assert_eq!(out, ControlCommand::safe_default(0));
            } else {
                assert_eq!(out.frame, f - 30);
                assert_eq!((f - out.frame) as f64 / 15.0, 2.0);
            }
            assert!(ch.len() <= ch.capacity_bound());
        }
    }

    #[test]
    fn certain_drop_replays_initial_default_forever() {
        let mut ch = TimingChannel::new(&model(0, 1.0, TimingMode::ReplayLast), ControlCommand::safe_default(0));
        let mut rng = SimRng::seed_from_u64(1);
        for f in 0..200 {
            ch.push(f, cmd(f));
            assert_eq!(ch.pop(f, &mut rng), ControlCommand::safe_default(0));
        }
    }

    #[test]
    fn drop_to_default_vs_replay_last() {
        let mut replay = TimingChannel::new(&model(0, 0.5, TimingMode::ReplayLast), ControlCommand::safe_default(0));
        let mut dflt = TimingChannel::new(&model(0, 0.5, TimingMode::DropToDefault), ControlCommand::safe_default(0));
        let (mut r1, mut r2) = (SimRng::seed_from_u64(3), SimRng::seed_from_u64(3));
        let mut last = ControlCommand::safe_default(0);
        for f in 0..200 {
            replay.push(f, cmd(f));
            dflt.push(f, cmd(f));
            let a = replay.pop(f, &mut r1);
            let b = dflt.pop(f, &mut r2);
            if b == ControlCommand::safe_default(0) {
                assert_eq!(a, last);
            } else {
                assert_eq!(a, b);
                last = a;
            }
        }
    }

    #[test]
    fn reorder_delivers_out_of_order_but_never_early() {
        let mut ch = TimingChannel::new(&model(3, 0.0, TimingMode::Reorder { window: 4 }), ControlCommand::safe_default(0));
        let mut rng = SimRng::seed_from_u64(9);
        let mut frames = vec![];
        for f in 0..300 {
            ch.push(f, cmd(f));
            let out = ch.pop(f, &mut rng);
            assert!(out.frame <= f);
            assert!(ch.len() <= ch.capacity_bound());
            frames.push(out.frame);
        }
        assert!(frames.windows(2).any(|w| w[1] < w[0]), "no reordering observed");
    }
}
