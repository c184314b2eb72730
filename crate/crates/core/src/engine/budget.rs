//! Time-budget controller: picks the processing mode for the next units
//! from a moving average of recent unit costs.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::classifier::ProcessingMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetParams {
    pub ema_alpha: f64,
    pub window: usize,
    pub recompute_every: usize,
    pub hysteresis: f64,
    /// Fraction of the budget kept back for redaction and output.
    pub reserve: f64,
}

impl Default for BudgetParams {
    fn default() -> Self {
        BudgetParams {
            ema_alpha: 0.2,
            window: 64,
            recompute_every: 16,
            hysteresis: 0.8,
            reserve: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub mode: ProcessingMode,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub after_units: usize,
    pub elapsed_s: f64,
    pub from: ProcessingMode,
    pub to: ProcessingMode,
}

#[derive(Debug, Clone)]
pub struct BudgetState {
    params: BudgetParams,
    budget_s: f64,
    parallelism: f64,
    total_units: usize,
    completed: usize,
    mode: ProcessingMode,
    ema: [Option<f64>; 3],
    samples: VecDeque<Sample>,
    transitions: Vec<Transition>,
}

fn slot(mode: ProcessingMode) -> usize {
    match mode {
        ProcessingMode::Concise => 0,
        ProcessingMode::Boolean => 1,
        ProcessingMode::Skip => 2,
    }
}

impl BudgetState {
    /// `budget_s` is the time available for classification; `parallelism`
    /// is the number of units processed at once.
    pub fn new(params: BudgetParams, budget_s: f64, parallelism: usize, total_units: usize) -> Self {
        BudgetState {
            params,
            budget_s,
            parallelism: parallelism.max(1) as f64,
            total_units,
            completed: 0,
            mode: ProcessingMode::Concise,
            ema: [None; 3],
            samples: VecDeque::with_capacity(params.window),
            transitions: Vec::new(),
        }
    }

    pub fn mode(&self) -> ProcessingMode {
        self.mode
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn ema(&self, mode: ProcessingMode) -> Option<f64> {
        self.ema[slot(mode)]
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter()
    }

    /// Estimated seconds per unit in `mode`. Boolean falls back to the
    /// concise cost until measured; skip costs nothing until measured.
    fn per_unit(&self, mode: ProcessingMode) -> f64 {
        let concise = self.ema[0].unwrap_or(0.0);
        match mode {
            ProcessingMode::Concise => concise,
            ProcessingMode::Boolean => self.ema[1].unwrap_or(concise),
            ProcessingMode::Skip => self.ema[2].unwrap_or(0.0),
        }
    }

    /// Projected seconds to finish the remaining units in `mode`.
    pub fn projected(&self, mode: ProcessingMode) -> f64 {
        let remaining = self.total_units.saturating_sub(self.completed) as f64;
        self.per_unit(mode) * remaining / self.parallelism
    }

    /// Folds in one completed unit and returns the mode for the next units.
    /// `elapsed_s` is the time spent so far against the budget.
    pub fn update(&mut self, sample: Sample, elapsed_s: f64) -> ProcessingMode {
        let a = self.params.ema_alpha;
        let e = &mut self.ema[slot(sample.mode)];
        *e = Some(match *e {
            Some(prev) => a * sample.seconds + (1.0 - a) * prev,
            None => sample.seconds,
        });
        if self.samples.len() == self.params.window {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
        self.completed += 1;
        if !self.completed.is_multiple_of(self.params.recompute_every.max(1)) {
            return self.mode;
        }
        let remaining = self.budget_s - elapsed_s;
        let next = match self.mode {
            ProcessingMode::Concise if self.projected(ProcessingMode::Concise) > remaining => ProcessingMode::Boolean,
            ProcessingMode::Boolean
                if self.projected(ProcessingMode::Boolean) > remaining && self.ema[1].is_some() =>
            {
                ProcessingMode::Skip
            }
            ProcessingMode::Boolean
                if self.projected(ProcessingMode::Concise) < self.params.hysteresis * remaining =>
            {
                ProcessingMode::Concise
            }
            ProcessingMode::Skip
                if self.projected(ProcessingMode::Boolean) < self.params.hysteresis * remaining =>
            {
                ProcessingMode::Boolean
            }
            m => m,
        };
        if next != self.mode {
            self.transitions.push(Transition {
                after_units: self.completed,
                elapsed_s,
                from: self.mode,
                to: next,
            });
            self.mode = next;
        }
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feed(state: &mut BudgetState, mode: ProcessingMode, seconds: f64, n: usize, elapsed: f64) -> ProcessingMode {
        let mut m = state.mode();
        for _ in 0..n {
            m = state.update(Sample { mode, seconds }, elapsed);
        }
        m
    }

    #[test]
    fn huge_budget_stays_concise() {
        let mut s = BudgetState::new(BudgetParams::default(), 1e9, 1, 1000);
        assert_eq!(feed(&mut s, ProcessingMode::Concise, 0.01, 64, 0.64), ProcessingMode::Concise);
        assert!(s.transitions().is_empty());
    }

    #[test]
    fn over_budget_steps_to_boolean() {
        // 16 done at 1 s each, 84 left: projection 84 s = 2x the 42 s left.
        let mut s = BudgetState::new(BudgetParams::default(), 58.0, 1, 100);
        assert_eq!(feed(&mut s, ProcessingMode::Concise, 1.0, 16, 16.0), ProcessingMode::Boolean);
        assert!((s.projected(ProcessingMode::Concise) - 84.0).abs() < 1e-9);
        // Boolean measured at 0.3 s: 68 * 0.3 = 20.4 s, under the 26 s left.
        assert_eq!(feed(&mut s, ProcessingMode::Boolean, 0.3, 16, 20.8), ProcessingMode::Boolean);
        assert_eq!(s.transitions().len(), 1);
    }

    #[test]
    fn boolean_too_slow_steps_to_skip() {
        let mut s = BudgetState::new(BudgetParams::default(), 20.0, 1, 100);
        feed(&mut s, ProcessingMode::Concise, 1.0, 16, 16.0);
        assert_eq!(s.mode(), ProcessingMode::Boolean);
        assert_eq!(feed(&mut s, ProcessingMode::Boolean, 0.5, 16, 19.9), ProcessingMode::Skip);
        let path: Vec<_> = s.transitions().iter().map(|t| (t.from, t.to)).collect();
        assert_eq!(
            path,
            [
                (ProcessingMode::Concise, ProcessingMode::Boolean),
                (ProcessingMode::Boolean, ProcessingMode::Skip)
            ]
        );
    }

    #[test]
    fn steps_back_when_there_is_slack() {
        let mut s = BudgetState::new(BudgetParams::default(), 40.0, 1, 200);
        feed(&mut s, ProcessingMode::Concise, 1.0, 16, 16.0);
        assert_eq!(s.mode(), ProcessingMode::Boolean);
        // Concise cost falls far below the remaining budget.
        s.ema[0] = Some(0.001);
        assert_eq!(feed(&mut s, ProcessingMode::Boolean, 0.001, 16, 16.1), ProcessingMode::Concise);
    }

    #[test]
    fn parallelism_divides_projection() {
        let mut s = BudgetState::new(BudgetParams::default(), 100.0, 4, 116);
        feed(&mut s, ProcessingMode::Concise, 1.0, 16, 4.0);
        assert!((s.projected(ProcessingMode::Concise) - 25.0).abs() < 1e-9);
        assert_eq!(s.mode(), ProcessingMode::Concise);
    }

    #[test]
    fn ema_weights_recent_samples() {
        let mut s = BudgetState::new(BudgetParams::default(), 1e9, 1, 10);
        s.update(Sample { mode: ProcessingMode::Concise, seconds: 1.0 }, 0.0);
        s.update(Sample { mode: ProcessingMode::Concise, seconds: 2.0 }, 0.0);
        assert!((s.ema(ProcessingMode::Concise).unwrap() - 1.2).abs() < 1e-12);
    }

    fn rank(m: ProcessingMode) -> i32 {
        slot(m) as i32
    }

    proptest! {
        #[test]
        fn transitions_move_one_step(
            budget in 0.01f64..100.0,
            samples in proptest::collection::vec((0.0f64..2.0, 0.0f64..1.0), 1..300),
        ) {
            let mut s = BudgetState::new(BudgetParams::default(), budget, 2, samples.len());
            let mut elapsed = 0.0;
            for (seconds, jitter) in samples {
                let mode = s.mode();
                elapsed += seconds * (0.5 + jitter) / 2.0;
                let next = s.update(Sample { mode, seconds }, elapsed);
                prop_assert!((rank(next) - rank(mode)).abs() <= 1);
            }
            for t in s.transitions() {
                prop_assert_eq!((rank(t.to) - rank(t.from)).abs(), 1);
                prop_assert_eq!(t.after_units % BudgetParams::default().recompute_every, 0);
            }
        }
    }
}
