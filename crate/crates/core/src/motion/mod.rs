//! Rigid-motion forward model.
//!
//! A motion curve assigns one rigid pose to every phase-encode line. The
//! corrupted volume is assembled in k-space: each line (a full plane in 3D)
//! is taken from the spectrum of the volume moved to that line's pose.

mod curve;
mod rigid;
mod synth;

pub use curve::{
    assign_balanced_classes, build_curve, sample_events, sample_events_with, ClassRange,
    CurveFile, EventRecord, MotionClass, MotionCurve, MotionEvent, MotionProfile, RigidPose,
};
pub use rigid::{apply_rigid, rotation_matrix};
pub use synth::{line_to_plane, synthesize_motion, synthesize_motion_with_stats, SynthesisStats};
