//! stepdbg runs programs in a small strict functional language
//! ("MiniML") by direct single-step interpretation, printing each
//! evaluation state with the redex marked, with configurable elision
//! and trace search. It also carries a debuggable-bytecode route:
//! compile a core subset to a ZINC-style machine and decompile any
//! reachable state back to source, cross-checking the two execution
//! routes against each other.
//!
//! The `examples/` directory holds one runnable example per major
//! capability; the `stepdbg` binary exposes the same machinery as a
//! command-line tool.

pub mod bytecode;
pub mod cli;
pub mod stepper;
pub mod syntax;
pub mod trace;
