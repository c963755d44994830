//! Criterion benchmarks for the `filippov` crate; see `benches/`.
