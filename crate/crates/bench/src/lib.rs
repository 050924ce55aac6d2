//! Criterion benchmarks for `svcert`; see `benches/`.
