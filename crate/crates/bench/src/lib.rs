//! Criterion benchmarks for the active-inference engine; see `benches/planning.rs`.
