//! Criterion benchmarks for the msfeec pipeline live in benches/.
