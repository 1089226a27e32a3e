//! Constructive checks of the analytical machinery behind the extrapolation:
//! generating sequences and their growth bound, Gevrey constants, the
//! dilation expansion, and resource formulas. All logarithms are natural.

pub mod dilation;
pub mod gevrey;
pub mod resources;
pub mod sequences;

pub use dilation::{dilation_expansion, step_expansion_superoperators, DilationExpansion};
pub use gevrey::{gevrey_constants, gevrey_envelope_check, m2_bound, GevreyConstants, GevreyReport};
pub use resources::{resource_estimates, ResourceReport};
pub use sequences::{build_sequence, verify_bound, BoundConstants, BoundReport, GeneratingSequence, SequenceVariant};
