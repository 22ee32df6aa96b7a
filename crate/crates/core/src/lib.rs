//! Electromagnetic-transient (EMT) simulation stack.
//!
//! A model document is parsed into a [`model::NetworkModel`], compiled into a
//! layered computation graph and a schedule program ([`compiler`]), and run
//! by one of the execution backends ([`exec`]). [`kernels`] holds the
//! numerical processes and the serial reference stepper, [`grid`] packages
//! tasks as isolated engines and dispatches them to worker slots, and
//! [`bench`] generates the benchmark families.

pub mod bench;
pub mod compiler;
pub mod exec;
pub mod graph;
pub mod grid;
pub mod kernels;
pub mod model;
pub mod waveform;
