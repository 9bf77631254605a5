//! Thread-local floating-point operation counter.
//!
//! Matrix products, activations and the polynomial heads report their work
//! here so tests can compare the cost of different head layouts.

use std::cell::Cell;

thread_local! {
    static COUNTER: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub fn add(n: u64) {
    COUNTER.with(|c| c.set(c.get().wrapping_add(n)));
}

pub fn reset() {
    COUNTER.with(|c| c.set(0));
}

pub fn get() -> u64 {
    COUNTER.with(|c| c.get())
}

/// Runs `f` and returns its result along with the flops it recorded on this thread.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = get();
    let out = f();
    (out, get().wrapping_sub(before))
}
