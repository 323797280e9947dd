//! Number-conserving binary cellular automata of radius one on the
//! two-dimensional torus: compositional rule descriptions (an overarching
//! motion plus conditional traffic rules) compiled to lookup tables, exact
//! and oracle-based conservation checks, exhaustive rule enumeration for
//! the 2x3 and von Neumann neighborhoods, and particle-flow simulation
//! with individual trajectory tracking.

pub mod conservation;
pub mod error;
pub mod grid;
pub mod lut;
pub mod rules;
pub mod sim;

pub use conservation::{
    durand_check_2x3, enumerate_nc_2x3, finite_support_check, torus_check, NcVerdict,
    PartialAssignment2x3, TorusMode, Witness, DEFAULT_ORACLE_BUDGET,
};
pub use error::{Error, Result};
pub use grid::{Configuration, Coord, NeighborhoodKind, Offset};
pub use lut::{pattern_index, Lut};
pub use rules::{
    admissible_slots, enumerate_specs_2x3, enumerate_specs_vn, random_valid_spec, recognize_2x3,
    recognize_moore, recognize_vn, witness_offsets, Condition, Direction, Omega, PatternWitness,
    RuleSpec, TrafficRule, Violation, MIXED_PAIRS,
};
pub use sim::{
    displacement_map, find_noninjectivity, frame_filename, run, step, step_reference, track,
    traces_to_csv, DisplacementMap, ParticleTrace,
};
