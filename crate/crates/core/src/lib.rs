//! Goal mediation for smart environments.
//!
//! Users set goals (desired values) on property instances such as a room's
//! temperature or a desk's lighting. A reaction collects the goals users are
//! allowed to set, mediates conflicting goals on each property instance
//! into one target through the zone's policy, and turns the targets into
//! validated actuator settings.
//!
//! ```
//! use goalmed::{document::EnvironmentDocument, model::Snapshot, pipeline::react, registry::PolicyRegistry};
//!
//! let doc = EnvironmentDocument::from_json(r#"{
//!     "propertyTypes": ["temp"],
//!     "actuators": [{"id": "ac", "propertyType": "temp"}],
//!     "zones": [{"id": "livingroom"}],
//!     "propertyInstances": [{"zone": "livingroom", "id": "roomTemp", "propertyType": "temp", "actuators": ["ac"]}],
//!     "users": [{"id": "alice", "allowedZones": ["livingroom"]}, {"id": "bob", "allowedZones": ["livingroom"]}],
//!     "goals": [
//!         {"user": "alice", "zone": "livingroom", "instance": "roomTemp", "value": 20},
//!         {"user": "bob", "zone": "livingroom", "instance": "roomTemp", "value": 26}
//!     ]
//! }"#).unwrap();
//! let snapshot = Snapshot::from_document(&doc).unwrap();
//! let result = react(&snapshot, &PolicyRegistry::with_builtins()).unwrap();
//! assert_eq!(result.actions[0].value, 23.0);
//! ```

pub mod document;
pub mod dsl;
pub mod model;
pub mod pipeline;
pub mod policies;
pub mod registry;
pub mod scenario;
pub mod service;

pub use document::EnvironmentDocument;
pub use model::{EnvironmentModel, Goal, GoalStore, Snapshot};
pub use pipeline::{react, Action, MediatedRequest, ReactionResult, Request};
pub use registry::PolicyRegistry;
