//! Construction and exact verification of Sherali-Adams integrality-gap
//! instances for MAX k-CSP.
//!
//! The crate is organized around a pipeline: a small "template" instance with
//! a known basic-LP gap is lifted to a large block-structured random instance
//! (`gap`), the associated constraint hypergraph is cleaned up (`hypergraph`),
//! embedded into the unit sphere through the damped path metric (`metric`),
//! partitioned by seeded ball carving (`partition`), and the resulting local
//! distributions are assembled into a Sherali-Adams certificate that the LP
//! layer (`lp`, `cert`) checks in exact rational arithmetic. The `resistance`
//! module carries the vanishing-measure machinery for approximation-resistant
//! predicates.

pub mod cert;
pub mod csp;
pub mod error;
pub mod gap;
pub mod hypergraph;
pub mod io;
pub mod lp;
pub mod metric;
pub mod par;
pub mod partition;
pub mod ratio;
pub mod resistance;
pub mod rng;

pub use cert::{BasicCertificate, LocalDistribution, SaCertificate};
pub use csp::{Assignment, Constraint, Instance, Predicate};
pub use error::{Error, Result};
pub use hypergraph::{Hypergraph, IncidenceGraph};
pub use lp::{LinearProgram, LpOutcome};
pub use metric::{EmbeddedSet, MuMetric};
pub use partition::{CarveParams, Partition};
pub use ratio::Rat;
pub use rng::CounterRng;
