//! Random-sequential Monte Carlo kernels.

pub mod chiral;
pub mod periodic;
pub mod schedule;

pub use chiral::{chiral_event, chiral_sweep, run_chiral, ChiralEvent, ChiralTable};
pub use periodic::{mc_event, mc_sweep, run_trajectory, EventKind, EventTable};
pub use schedule::Schedule;

/// Walker alias table over `N` categories, `N` a power of two. A draw uses
/// the top `log2 N` bits of one 64-bit word to pick a column and the remaining
/// bits against the column threshold, so it costs one comparison and no
/// data-dependent branch. Probabilities are resolved to `2^-(64 - log2 N)`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Thresholds<const N: usize> {
    cut: [u64; N],
    alias: [u8; N],
}

impl<const N: usize> Thresholds<N> {
    pub(crate) fn new(probs: &[f64; N]) -> Self {
        assert!(N.is_power_of_two() && N <= 256);
        let total: f64 = probs.iter().sum();
        let mut scaled: Vec<f64> = probs.iter().map(|p| p / total * N as f64).collect();
        let mut cut = [u64::MAX; N];
        let mut alias = [0u8; N];
        for (i, a) in alias.iter_mut().enumerate() {
            *a = i as u8;
        }
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..N).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            cut[s] = to_u64(scaled[s]);
            alias[s] = l as u8;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are full columns up to rounding.
        for i in small.into_iter().chain(large) {
            cut[i] = u64::MAX;
            alias[i] = i as u8;
        }
        Thresholds { cut, alias }
    }

    #[inline(always)]
    pub(crate) fn pick(&self, r: u64) -> usize {
        let bits = N.trailing_zeros();
        let col = if bits == 0 { 0 } else { (r >> (64 - bits)) as usize };
        let u = r << bits;
        let keep = (u < self.cut[col]) as usize;
        keep * col + (1 - keep) * self.alias[col] as usize
    }

    /// Exact probability of each category implied by the integer table.
    #[cfg(test)]
    pub(crate) fn implied(&self) -> [f64; N] {
        let mut out = [0.0; N];
        let two64 = 18_446_744_073_709_551_616.0f64;
        for i in 0..N {
            let p_keep = if self.cut[i] == u64::MAX { 1.0 } else { self.cut[i] as f64 / two64 };
            out[i] += p_keep / N as f64;
            out[self.alias[i] as usize] += (1.0 - p_keep) / N as f64;
        }
        out
    }
}

fn to_u64(x: f64) -> u64 {
    if x >= 1.0 {
        u64::MAX
    } else {
        (x * 18_446_744_073_709_551_616.0) as u64
    }
}
