use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Grid, Segment, SegmentView};

/// A simulated path on −r0 + i·h, i = 0..; the first n + 1 points are the
/// initial segment and index n is t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub grid: Grid,
    pub d: usize,
    pub seed: u64,
    pub replica: u64,
    states: Vec<f64>,
}

impl PathRecord {
    pub(crate) fn new(grid: Grid, d: usize, seed: u64, replica: u64, states: Vec<f64>) -> Self {
        debug_assert_eq!(states.len() % d, 0);
        Self {
            grid,
            d,
            seed,
            replica,
            states,
        }
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    /// Number of steps after t = 0.
    pub fn steps(&self) -> usize {
        self.states.len() / self.d - self.grid.n - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.grid.h
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// Grid times from −r0 to T.
    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len() / self.d)
            .map(|i| (i as f64 - self.grid.n as f64) * self.grid.h)
            .collect()
    }

    /// X(k·h) for k ≥ 0.
    #[inline]
    pub fn state(&self, k: usize) -> &[f64] {
        let i = self.grid.n + k;
        &self.states[i * self.d..(i + 1) * self.d]
    }

    /// X at any grid time in [−r0, T].
    pub fn state_at_index(&self, i: usize) -> &[f64] {
        &self.states[i * self.d..(i + 1) * self.d]
    }

    /// Segment X_t at t = k·h.
    #[inline]
    pub fn segment_view(&self, k: usize) -> SegmentView<'_> {
        let d = self.d;
        SegmentView::new(self.grid, d, &self.states[k * d..(k + self.grid.n + 1) * d])
    }

    pub fn segment_at(&self, k: usize) -> Segment {
        self.segment_view(k).to_segment()
    }

    /// Step index of time t, when t is on the grid.
    pub fn step_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.grid.h).round();
        ((k * self.grid.h - t).abs() <= 1e-9 * t.abs().max(self.grid.h) && k >= 0.0)
            .then_some(k as usize)
            .filter(|&k| k <= self.steps())
    }

    /// `t,x1,...,xd` per grid time.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 0..self.d {
            let _ = write!(s, ",x{}", i + 1);
        }
        s.push('\n');
        for (i, t) in self.times().into_iter().enumerate() {
            let _ = write!(s, "{t:.12e}");
            for v in self.state_at_index(i) {
                let _ = write!(s, ",{v:.12e}");
            }
            s.push('\n');
        }
        s
    }
}
