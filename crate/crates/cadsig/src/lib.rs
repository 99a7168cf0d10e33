//! Recovery of sketch-and-extrude CAD design histories from 3D point clouds.
//!
//! The crate is organized around a tokenized CAD language and the machinery
//! to learn it from geometry:
//!
//! - [`lang`] — token vocabulary, 8-bit quantization, structured program ⇄
//!   token stream conversion, matrix encoding, and preprocessing.
//! - [`geom`] — a sampled-solid kernel: extrusion membership oracles, CSG
//!   booleans, boundary sampling, sketch-plane projection, sketch-instance
//!   extraction, normal estimation, and OBJ/PLY export.
//! - [`synth`] — procedural generation of valid programs with paired point
//!   clouds, plus dataset persistence.
//! - [`tensor`] — a minimal reverse-mode autodiff engine with the dense ops
//!   the network needs, and an AdamW-style optimizer.
//! - [`net`] — the multi-modal transformer: local feature aggregation over
//!   points, token embedding, layer-wise cross-attention with
//!   sketch-instance guided masking, and dual output heads.
//! - [`pipeline`] — teacher-forced training with curriculum ordering,
//!   auto-regressive decoding with hybrid sampling, conditional
//!   auto-completion, and step-wise candidate generation.
//! - [`metrics`] — Chamfer distance, invalidity ratio, Hungarian-matched
//!   per-curve F1, extrusion F1, and quartile reports.
//! - [`corpus`] — golden fixture runner binding hand-derived cases to the
//!   implementation.
//! - [`cli`] — the `cadsig` command surface built from the modules above.
//!
//! See the crate examples for one runnable entry point per capability.

pub mod cli;
pub mod corpus;
pub mod geom;
pub mod lang;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod synth;
pub mod tensor;
