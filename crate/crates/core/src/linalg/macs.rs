//! Per-thread multiply-accumulate ledger.
//!
//! Every dense product issued through [`Matrix`](super::Matrix) adds
//! `m * k * n` to a thread-local counter. Elementwise work is not counted.
//! The ledger lets tests check the analytic cost model against what the
//! implementation actually executes.

use std::cell::Cell;

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn record(count: u64) {
    MACS.with(|c| c.set(c.get().wrapping_add(count)));
}

/// Current value of this thread's counter.
pub fn read() -> u64 {
    MACS.with(Cell::get)
}

/// Zero this thread's counter.
pub fn reset() {
    MACS.with(|c| c.set(0));
}

/// Run `f` and return its result together with the MACs it issued on this
/// thread. The outer counter keeps accumulating.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let before = read();
    let out = f();
    (out, read().wrapping_sub(before))
}
