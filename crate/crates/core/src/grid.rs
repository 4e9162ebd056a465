//! Slot grid of random-access opportunities over the activation horizon.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Regular grid of RA time slots: slot `i` (1-based) sits at `i * slot_interval_ms`,
/// with `num_slots = floor(horizon / interval)` slots inside the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotGrid {
    slot_interval_ms: u32,
    horizon_ms: u64,
    num_slots: usize,
}

impl SlotGrid {
    pub fn new(slot_interval_ms: u32, horizon_ms: u64) -> Result<Self> {
        if slot_interval_ms == 0 {
            return Err(ModelError::InvalidParameter(
                "slot interval must be positive".into(),
            ));
        }
        if horizon_ms == 0 {
            return Err(ModelError::InvalidParameter(
                "activation horizon must be positive".into(),
            ));
        }
        let num_slots = (horizon_ms / u64::from(slot_interval_ms)) as usize;
        if num_slots == 0 {
            return Err(ModelError::InvalidParameter(
                "horizon shorter than one slot interval".into(),
            ));
        }
        Ok(Self {
            slot_interval_ms,
            horizon_ms,
            num_slots,
        })
    }

    pub fn slot_interval_ms(&self) -> u32 {
        self.slot_interval_ms
    }

    pub fn horizon_ms(&self) -> u64 {
        self.horizon_ms
    }

    /// Number of RA slots in the horizon.
    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    /// Time of slot `i` in ms, for `i` in `1..=num_slots`.
    pub fn slot_time_ms(&self, i: usize) -> u64 {
        debug_assert!(i >= 1 && i <= self.num_slots);
        i as u64 * u64::from(self.slot_interval_ms)
    }

    pub fn check_slot(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.num_slots {
            Err(ModelError::SlotOutOfRange {
                index: i,
                num_slots: self.num_slots,
            })
        } else {
            Ok(())
        }
    }

    /// Slot attended by an arrival at `t_ms`: the first slot at or after the
    /// arrival instant. `None` when the arrival falls past the last slot.
    pub fn slot_for_arrival(&self, t_ms: f64) -> Option<usize> {
        if t_ms < 0.0 {
            return None;
        }
        let slot = (t_ms / f64::from(self.slot_interval_ms)).ceil() as usize;
        let slot = slot.max(1);
        (slot <= self.num_slots).then_some(slot)
    }

    /// First slot whose time is at or after `t_ms` (integer ms), clamped to
    /// be no earlier than `min_slot`. `None` when past the horizon.
    pub fn first_slot_at_or_after(&self, t_ms: u64, min_slot: usize) -> Option<usize> {
        let interval = u64::from(self.slot_interval_ms);
        let slot = (t_ms.div_ceil(interval) as usize).max(min_slot);
        (slot <= self.num_slots).then_some(slot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_times_increase_and_stay_inside_horizon() {
        let grid = SlotGrid::new(10, 10_000).unwrap();
        assert_eq!(grid.num_slots(), 1000);
        let mut prev = 0;
        for i in 1..=grid.num_slots() {
            let t = grid.slot_time_ms(i);
            assert!(t > prev);
            prev = t;
        }
        assert!(prev <= grid.horizon_ms());
    }

    #[test]
    fn truncated_horizon_drops_partial_slot() {
        let grid = SlotGrid::new(10, 10_005).unwrap();
        assert_eq!(grid.num_slots(), 1000);
        assert_eq!(grid.slot_time_ms(1000), 10_000);
    }

    #[test]
    fn arrival_attaches_to_next_slot() {
        let grid = SlotGrid::new(10, 100).unwrap();
        assert_eq!(grid.slot_for_arrival(0.0), Some(1));
        assert_eq!(grid.slot_for_arrival(5.0), Some(1));
        assert_eq!(grid.slot_for_arrival(10.0), Some(1));
        assert_eq!(grid.slot_for_arrival(10.5), Some(2));
        assert_eq!(grid.slot_for_arrival(100.0), Some(10));
        assert_eq!(grid.slot_for_arrival(100.1), None);
    }

    #[test]
    fn zero_parameters_rejected() {
        assert!(SlotGrid::new(0, 100).is_err());
        assert!(SlotGrid::new(10, 0).is_err());
        assert!(SlotGrid::new(10, 5).is_err());
    }
}
