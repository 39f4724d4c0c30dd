//! Power-network dependency modeling, worst-case cascade simulation, and
//! K-contingency analysis.
//!
//! The crate models a network as typed entities (generator, load, and neutral
//! buses plus transmission lines) carrying power bounds and instantaneous
//! values, with Boolean dependency relations (IDRs) between buses. On top of
//! that sit:
//!
//! - cascade propagation over the dependency relations ([`cascade`]),
//! - the K-contingency list solvers: a greedy heuristic and exhaustive
//!   enumeration ([`contingency`]),
//! - a mixed-integer model of worst-case cascade propagation with LP-file
//!   export and independent solution verification ([`mip`]),
//! - a self-contained bounded-variable simplex and branch-and-bound solver
//!   ([`simplex`], [`bb`]),
//! - the hardness reduction from densest p-subhypergraph instances
//!   ([`reduction`]).

pub mod bb;
pub mod case;
pub mod cascade;
pub mod contingency;
pub mod error;
pub mod fixtures;
pub mod id;
pub mod mip;
pub mod network;
pub mod reduction;
pub mod simplex;

pub use id::EntityId;
pub use network::{Entity, EntityKind, Idr, PowerNetwork};
