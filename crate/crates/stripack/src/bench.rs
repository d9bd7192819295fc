//! Benchmark harness (to be filled).
