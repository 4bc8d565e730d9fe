//! Fixtures shared by the criterion benchmarks.

use sfi_core::harness::{builtin_case, BuiltCase};

/// Lock-exchange case at `n × n` cells.
pub fn lock_exchange(n: usize) -> BuiltCase {
    let mut case = builtin_case("lock_exchange").expect("registered case");
    case.grid.nx = n;
    case.grid.nz = n;
    case.build().expect("valid case")
}
