/// Sweep indices at which observables are recorded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    sweeps: Vec<u64>,
}

impl Schedule {
    /// Roughly `per_decade` log-spaced sweeps in `[1, t_max]`, always ending at `t_max`.
    pub fn geometric(t_max: u64, per_decade: u32) -> Self {
        let mut sweeps = Vec::new();
        if t_max == 0 {
            return Schedule { sweeps: vec![0] };
        }
        let per = per_decade.max(1) as f64;
        let n = ((t_max as f64).log10() * per).ceil() as u64;
        for k in 0..=n {
            let s = (10f64.powf(k as f64 / per)).round() as u64;
            let s = s.clamp(1, t_max);
            if sweeps.last() != Some(&s) {
                sweeps.push(s);
            }
        }
        if sweeps.last() != Some(&t_max) {
            sweeps.push(t_max);
        }
        Schedule { sweeps }
    }

    /// Every `stride` sweeps up to `t_max`, always ending at `t_max`.
    pub fn linear(t_max: u64, stride: u64) -> Self {
        let stride = stride.max(1);
        let mut sweeps: Vec<u64> = (1..=t_max / stride).map(|k| k * stride).collect();
        if sweeps.last() != Some(&t_max) {
            sweeps.push(t_max);
        }
        Schedule { sweeps }
    }

    pub fn from_sweeps(mut sweeps: Vec<u64>) -> Self {
        sweeps.sort_unstable();
        sweeps.dedup();
        Schedule { sweeps }
    }

    /// Adds a sample of the initial state.
    pub fn with_origin(mut self) -> Self {
        if self.sweeps.first() != Some(&0) {
            self.sweeps.insert(0, 0);
        }
        self
    }

    pub fn sweeps(&self) -> &[u64] {
        &self.sweeps
    }

    pub fn last(&self) -> u64 {
        self.sweeps.last().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.sweeps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sweeps.is_empty()
    }
}
