//! Benchmarks for the biortho-core kernels; see `benches/`.
