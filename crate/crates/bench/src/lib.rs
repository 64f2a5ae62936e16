//! Criterion benchmarks for the hot paths. See `benches/hotpaths.rs`.
