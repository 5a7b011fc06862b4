//! Two-patch Ricker map with a strong Allee effect and symmetric dispersal.
//!
//! The crate covers the isolated one-patch map ([`local`]), the coupled map
//! ([`coupled`]), attractor detection and census ([`attractor`]),
//! deterministic parallel grid sweeps ([`sweep`]) and nullcline / fixed point
//! geometry ([`nullcline`]).
//!
//! ```
//! use ricker_allee::{detect_attractor, CoupledParams, DetectorSettings, PatchState};
//!
//! let cp = CoupledParams::normalized(0.63, 0.01).unwrap();
//! let rec = detect_attractor(&cp, PatchState::new(0.38, 0.58), &DetectorSettings::default()).unwrap();
//! assert_eq!(rec.to_string(), "Symmetric period=2 phase=OutOfPhase");
//! ```

pub mod attractor;
pub mod coupled;
pub mod error;
pub mod local;
pub mod nullcline;
mod roots;
pub mod sweep;

pub use attractor::{
    census, detect_attractor, time_to_extinction, transient_trace, AttractorRecord, Category,
    DetectorSettings, ExtinctionTime, Phase, TransientTrace,
};
pub use coupled::{CoupledParams, Mat2, OrbitSegment, PatchState};
pub use error::{DynError, Result};
pub use local::{solve_r_th, LocalParams, Regime, RegimeReport, ThresholdSolution};
pub use nullcline::{fixed_points, nullclines, CurveSet, Family, FixedPoint, FixedPointReport};
pub use sweep::{
    basin_grid, extinction_time_grid, parameter_plane, Axis, BasinCell, BasinLabel, ClassifiedGrid,
    GridSpec, SweepRunner,
};
