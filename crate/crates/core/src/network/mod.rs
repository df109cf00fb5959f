//! Topology, lightpaths, modulation table and ageing-dependent physical
//! parameters.

mod config;
mod modulation;
mod params;
mod topology;

pub use config::{load_config, load_config_file, load_network, table3, LoadedConfig, TABLE3_CONFIG};
pub use modulation::{ModulationFormat, UnknownFormat};
pub use params::{interpolate_param, AgeingPair, ParamsAt, PhysicalParams, XciSpanMode};
pub use topology::{ChannelSpec, Lightpath, Network, Route, Span};
