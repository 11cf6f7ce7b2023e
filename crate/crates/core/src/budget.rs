use core::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

/// Default cap on the number of entries of any dense tensor.
pub const DEFAULT_ENTRY_BUDGET: usize = 10_000_000;

static ENTRY_BUDGET: AtomicUsize = AtomicUsize::new(DEFAULT_ENTRY_BUDGET);

/// Current process-wide entry cap.
pub fn entry_budget() -> usize {
    ENTRY_BUDGET.load(Ordering::Relaxed)
}

/// Replaces the process-wide entry cap. Affects every later allocation check.
pub fn set_entry_budget(entries: usize) {
    ENTRY_BUDGET.store(entries.max(1), Ordering::Relaxed);
}

/// `m^order` as an entry count, or a budget error.
pub(crate) fn checked_entries(resolution: usize, order: usize) -> Result<usize> {
    let budget = entry_budget();
    let mut entries: u128 = 1;
    for _ in 0..order {
        entries = entries.saturating_mul(resolution as u128);
    }
    if entries > budget as u128 {
        return Err(Error::BudgetExceeded {
            order,
            resolution,
            entries,
            budget,
        });
    }
    Ok(entries as usize)
}
