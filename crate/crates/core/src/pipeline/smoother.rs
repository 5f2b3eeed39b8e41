use std::collections::VecDeque;

/// Three-tap moving average over ROI centers: the current value and up to
/// two previous ones.
#[derive(Debug, Clone, Default)]
pub struct SmootherState {
    history: VecDeque<(f64, f64)>,
}

const HISTORY: usize = 2;

impl SmootherState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn smooth(&mut self, current: (f64, f64)) -> (f64, f64) {
        let n = (self.history.len() + 1) as f64;
        let (sx, sy) = self
            .history
            .iter()
            .fold(current, |(ax, ay), &(x, y)| (ax + x, ay + y));
        if self.history.len() == HISTORY {
            self.history.pop_front();
        }
        self.history.push_back(current);
        (sx / n, sy / n)
    }
}

pub fn smooth_center(current: (f64, f64), state: &mut SmootherState) -> (f64, f64) {
    state.smooth(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let mut s = SmootherState::new();
        assert_eq!(smooth_center((42.0, 42.0), &mut s), (42.0, 42.0));
        let mut s = SmootherState::new();
        s.smooth((10.0, 10.0));
        s.smooth((20.0, 20.0));
        assert_eq!(s.smooth((30.0, 30.0)), (20.0, 20.0));
        assert_eq!(s.history_len(), 2);
        assert_eq!(s.smooth((60.0, 0.0)), (110.0 / 3.0, 50.0 / 3.0));
    }

    #[test]
    fn constant_is_a_fixed_point() {
        let mut s = SmootherState::new();
        for _ in 0..10 {
            assert_eq!(s.smooth((7.5, 3.25)), (7.5, 3.25));
        }
    }

    proptest! {
        #[test]
        fn output_within_input_range(xs in proptest::collection::vec(0.0f64..240.0, 1..30)) {
            let mut s = SmootherState::new();
            for (i, &x) in xs.iter().enumerate() {
                let (out, _) = s.smooth((x, 0.0));
                let lo = i.saturating_sub(2);
                let win = &xs[lo..=i];
                let min = win.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = win.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out >= min - 1e-9 && out <= max + 1e-9);
            }
        }
    }
}
