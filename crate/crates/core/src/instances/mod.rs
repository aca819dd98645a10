//! Benchmark and adversarial instance generators, and graph file I/O.

mod generators;
mod io;

pub use generators::{
    gen_erls_adversary, gen_forkjoin, gen_heft_adversary, gen_hlp_adversary, ForkJoinSpec, GeneratorError,
};
pub use io::{graph_from_json, graph_to_json, read_graph, write_graph, write_graph_with_meta, GraphFile, IoError};
