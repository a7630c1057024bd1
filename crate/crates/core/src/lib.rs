//! Belief-driven dialog management for a course-advising assistant.

pub mod bundled;
pub mod classifier;
pub mod dialog;
pub mod epistemic;
pub mod extraction;
mod ini;
pub mod knowledge;
pub mod text;
