//! Tunables shared by the enumeration routines.

use crate::error::{HeckeError, Result};
use crate::padic::PrecisionContext;

/// Knobs for coset enumeration. `window_extra` widens every derived depth
/// window; since the windows are provably sufficient, results must not change
/// under widening — the verification suites re-run with `window_extra = 1`
/// to check exactly that.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComputeOpts {
    /// Hard cap on enumerated cosets per call.
    pub budget: u64,
    /// Extra depth added to every enumeration window.
    pub window_extra: u32,
    /// Cap on the congruence depth probed by the graded transform before
    /// giving up; `None` uses the built-in stabilization bound.
    pub depth_max: Option<u32>,
}

impl Default for ComputeOpts {
    fn default() -> Self {
        ComputeOpts {
            budget: 10_000_000,
            window_extra: 0,
            depth_max: None,
        }
    }
}

impl ComputeOpts {
    pub fn with_budget(budget: u64) -> Self {
        ComputeOpts {
            budget,
            ..Default::default()
        }
    }

    pub fn charge(&self, used: &mut u64, amount: u64) -> Result<()> {
        *used += amount;
        if *used > self.budget {
            return Err(HeckeError::BudgetExceeded(format!(
                "enumeration exceeded budget of {} cosets",
                self.budget
            )));
        }
        Ok(())
    }
}

/// Working precision giving `a` output digits with headroom for denominators
/// up to p^depth and the logarithm's digit loss.
pub fn precision_for(p: u64, a: u32, depth_hint: u32) -> Result<PrecisionContext> {
    let n = (a + depth_hint + 2).max(10);
    PrecisionContext::new(p, n, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let o = ComputeOpts::default();
        assert_eq!(o.budget, 10_000_000);
        assert_eq!(o.window_extra, 0);
        let mut used = 0;
        assert!(o.charge(&mut used, 5).is_ok());
    }

    #[test]
    fn budget_trips() {
        let o = ComputeOpts::with_budget(10);
        let mut used = 0;
        assert!(o.charge(&mut used, 10).is_ok());
        assert!(matches!(
            o.charge(&mut used, 1),
            Err(HeckeError::BudgetExceeded(_))
        ));
    }

    #[test]
    fn precision_floor() {
        let c = precision_for(5, 1, 0).unwrap();
        assert_eq!(c.n_digits(), 10);
        let c = precision_for(5, 2, 9).unwrap();
        assert_eq!(c.n_digits(), 13);
    }
}
