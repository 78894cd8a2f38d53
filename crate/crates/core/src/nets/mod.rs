//! Parameters, graph layers, Sinkhorn scaling and energy functions.

mod energy;
mod layers;
mod params;
mod sinkhorn;

pub use energy::{build_energy, EnergyConfig, EnergyKind, Hamiltonian, OscillatorEnergy, QuadEnergy, VanillaEnergy};
pub use layers::{DotAttention, GatLayer, GcnLayer, GraphContext, Linear};
pub use params::{BoundParams, ParamId, ParamStore};
pub use sinkhorn::{sinkhorn_normalize, sinkhorn_on_tape, SinkhornStats, FLOOR as SINKHORN_FLOOR};
