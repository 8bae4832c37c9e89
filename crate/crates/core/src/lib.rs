//! Delivery-delay distributions for delay-tolerant networks whose contacts
//! follow known periodic probabilities.
//!
//! Time is a grid of `H` bins. A [`DeliveryDistribution`] gives, for every
//! send bin, the probability of delivery after each delay. Distributions are
//! combined with [`forward`], [`duplicate`] and [`schedule`], optimised per
//! destination by [`bellman_ford`], and turned into multi-copy schemes by
//! [`plan`]. The [`sim`] module checks any of these by sampling contacts.

pub mod conditions;
pub mod distribution;
pub mod error;
pub mod forwarding;
pub mod network;
pub mod operators;
pub mod planner;
pub mod routing;
pub mod scheme;
pub mod sim;

pub use conditions::{parse_condition, Atom, ConditionError, DeliveryCondition};
pub use distribution::{
    DeliveryDistribution, Dominance, FirstContactDistribution, TimeGrid, EPS_MASS, EPS_NUM,
    EPS_ORD,
};
pub use error::{Error, Result};
pub use forwarding::{receive_probabilities, routed_delivery, visit_expectations, ForwardingGraph};
pub use network::{load_network, save_network, ContactProfile, Network, NodeId};
pub use operators::{duplicate, forward, schedule, Choice, Scheduled};
pub use planner::{plan, Plan, PlanOptions, StopReason};
pub use routing::{bellman_ford, routing_intervals, RouteInterval, RouteOptions, RoutingState};
pub use scheme::{validate_disjoint, DeliveryScheme, Expr, Routed};
pub use sim::{simulate_routed, simulate_scheme, SimulationOptions, SimulationReport, WaitPolicy};
