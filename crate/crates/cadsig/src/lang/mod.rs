//! The tokenized sketch-and-extrude CAD language.
//!
//! A design history is an ordered list of steps, each pairing one extrusion
//! with one sketch. Histories serialize to a flat stream of 2-dimensional
//! tokens: every token is an `(a, b)` pair of class indices in `[0, 266]`,
//! where the first 11 classes are structural and `[11, 266]` is the 8-bit
//! numeric band. Sketch point coordinates occupy both components; every
//! other token carries `b = pad`.

pub mod curve2d;
mod matrices;
mod preprocess;
mod quant;
mod stream;
mod streamio;

pub use matrices::{encode_matrices, StreamMatrices};
pub use preprocess::reorder_and_orient;
pub use quant::{dequantize_scalar, quantize_scalar, try_dequantize, QUANTUM};
pub use stream::{
    program_to_stream, stream_from_tokens, stream_to_program, StreamTracker, TokenInfo,
};
pub use streamio::{read_stream, write_stream};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Padding token value (both components of a pad token).
pub const PAD: u16 = 0;
/// Sequence start marker; the same class also terminates a sequence.
pub const CLS: u16 = 1;
/// Sequence end marker (shares the class index with `CLS`).
pub const END: u16 = 1;
/// End-of-sketch marker.
pub const E_S: u16 = 2;
/// End-of-face marker.
pub const E_F: u16 = 3;
/// End-of-loop marker.
pub const E_L: u16 = 4;
/// End-of-curve marker.
pub const E_C: u16 = 5;
/// End-of-extrusion marker.
pub const E_E: u16 = 6;
/// First boolean-operation class (`New`).
pub const BOOL_BASE: u16 = 7;
/// Smallest numeric token value.
pub const NUM_MIN: u16 = 11;
/// Largest numeric token value.
pub const NUM_MAX: u16 = 266;
/// Number of quantization levels in the numeric band.
pub const NUM_LEVELS: u16 = 256;
/// Vocabulary size: 11 structural classes plus 256 numeric levels.
pub const VOCAB: usize = 267;
/// Number of token-flag classes minus one (flags run 0..=11).
pub const FLAG_MAX: u8 = 11;
/// Flag value assigned to pad tokens.
pub const FLAG_PAD: u8 = 11;
/// Maximum number of design steps per program.
pub const MAX_STEPS: usize = 10;
/// Maximum (padded) token-stream length.
pub const MAX_TOKENS: usize = 273;
/// Number of tokens in one extrusion block.
pub const EXTRUSION_TOKENS: usize = 11;

/// One 2-dimensional token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token2D {
    pub a: u16,
    pub b: u16,
}

impl Token2D {
    pub const fn new(a: u16, b: u16) -> Self {
        Self { a, b }
    }

    pub const fn pad() -> Self {
        Self { a: PAD, b: PAD }
    }

    /// True when both components sit in the numeric band.
    pub fn is_coord(&self) -> bool {
        (NUM_MIN..=NUM_MAX).contains(&self.a) && (NUM_MIN..=NUM_MAX).contains(&self.b)
    }
}

/// A flat token sequence with per-token flags and step indices.
///
/// Only the `true_len` meaningful tokens are stored; positions beyond
/// `true_len` are implicitly `(pad, pad)` up to [`MAX_TOKENS`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<Token2D>,
    pub flags: Vec<u8>,
    pub steps: Vec<u8>,
}

impl TokenStream {
    /// Unpadded length.
    pub fn true_len(&self) -> usize {
        self.tokens.len()
    }

    /// Token at `pos`, treating positions past the end as pad.
    pub fn token_at(&self, pos: usize) -> Token2D {
        self.tokens.get(pos).copied().unwrap_or(Token2D::pad())
    }

    pub fn flag_at(&self, pos: usize) -> u8 {
        self.flags.get(pos).copied().unwrap_or(FLAG_PAD)
    }

    pub fn step_at(&self, pos: usize) -> u8 {
        self.steps.get(pos).copied().unwrap_or(0)
    }

    /// Number of design steps, counted from step indices.
    pub fn step_count(&self) -> usize {
        self.steps.iter().copied().max().unwrap_or(0) as usize
    }

    /// True when the stream opens with `cls` and terminates with `end`.
    pub fn is_complete(&self) -> bool {
        self.tokens.len() >= 2
            && self.tokens.len() <= MAX_TOKENS
            && self.tokens[0] == Token2D::new(CLS, PAD)
            && *self.tokens.last().unwrap() == Token2D::new(END, PAD)
    }
}

/// A 2D sketch point in the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, o: &Point2) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2)).sqrt()
    }
}

/// A parametric sketch curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Curve {
    Line {
        start: Point2,
        end: Point2,
    },
    Arc {
        start: Point2,
        mid: Point2,
        end: Point2,
    },
    Circle {
        center: Point2,
        top: Point2,
    },
}

impl Curve {
    pub fn kind(&self) -> CurveKind {
        match self {
            Curve::Line { .. } => CurveKind::Line,
            Curve::Arc { .. } => CurveKind::Arc,
            Curve::Circle { .. } => CurveKind::Circle,
        }
    }

    /// First point of the curve along its orientation (circles: center).
    pub fn start_point(&self) -> Point2 {
        match self {
            Curve::Line { start, .. } | Curve::Arc { start, .. } => *start,
            Curve::Circle { center, .. } => *center,
        }
    }

    /// Last point of the curve along its orientation (circles: center).
    pub fn end_point(&self) -> Point2 {
        match self {
            Curve::Line { end, .. } | Curve::Arc { end, .. } => *end,
            Curve::Circle { center, .. } => *center,
        }
    }

    /// Reverse the traversal direction in place (circles unchanged).
    pub fn reverse(&mut self) {
        match self {
            Curve::Line { start, end } => std::mem::swap(start, end),
            Curve::Arc { start, end, .. } => std::mem::swap(start, end),
            Curve::Circle { .. } => {}
        }
    }
}

/// Curve type label used by the per-type metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CurveKind {
    Line,
    Arc,
    Circle,
}

/// A closed path of curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loop {
    pub curves: Vec<Curve>,
}

/// A planar region bounded by loops under the even-odd rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub loops: Vec<Loop>,
}

/// A 2D drawing: one or more faces in the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    pub faces: Vec<Face>,
}

impl Sketch {
    /// Total curve count across faces and loops.
    pub fn curve_count(&self) -> usize {
        self.faces
            .iter()
            .flat_map(|f| &f.loops)
            .map(|l| l.curves.len())
            .sum()
    }
}

/// Boolean combination mode of an extrusion into the running solid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BooleanOp {
    New,
    Cut,
    Join,
    Intersect,
}

impl BooleanOp {
    pub fn token_value(&self) -> u16 {
        BOOL_BASE
            + match self {
                BooleanOp::New => 0,
                BooleanOp::Cut => 1,
                BooleanOp::Join => 2,
                BooleanOp::Intersect => 3,
            }
    }

    pub fn from_token_value(v: u16) -> Option<Self> {
        match v {
            7 => Some(BooleanOp::New),
            8 => Some(BooleanOp::Cut),
            9 => Some(BooleanOp::Join),
            10 => Some(BooleanOp::Intersect),
            _ => None,
        }
    }
}

/// Sketch-plane pose, scale, extrusion distances, and boolean mode.
///
/// Token emission order is fixed: `d+ d- tau_x tau_y tau_z theta phi gamma
/// sigma beta e_e`. All continuous fields live in `[0, 1]` after model
/// normalization except the Euler angles, which are radians in `[0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrusionOp {
    pub d_plus: f64,
    pub d_minus: f64,
    pub tau: [f64; 3],
    /// Euler angles `(theta, phi, gamma)` in radians.
    pub euler: [f64; 3],
    pub sigma: f64,
    pub boolean_op: BooleanOp,
}

/// One design step: an extrusion and the sketch it operates on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub extrusion: ExtrusionOp,
    pub sketch: Sketch,
}

/// A full design history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CadProgram {
    pub steps: Vec<Step>,
}

impl CadProgram {
    /// Total curve count over all steps.
    pub fn curve_count(&self) -> usize {
        self.steps.iter().map(|s| s.sketch.curve_count()).sum()
    }

    /// Snap every continuous parameter to the 8-bit quantization grid.
    pub fn quantized(&self) -> Result<CadProgram, LangError> {
        let snap =
            |v: f64| -> Result<f64, LangError> { Ok(dequantize_scalar(quantize_scalar(v)?)) };
        // Wrapping after the snap keeps the cyclic alias at 2pi consistent
        // with what emission + parsing produce.
        let snap_angle = |v: f64| -> Result<f64, LangError> {
            Ok(wrap_angle(
                snap(wrap_angle(v) / std::f64::consts::TAU)? * std::f64::consts::TAU,
            ))
        };
        let snap_pt =
            |p: &Point2| -> Result<Point2, LangError> { Ok(Point2::new(snap(p.x)?, snap(p.y)?)) };
        let mut steps = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            let e = &step.extrusion;
            let extrusion = ExtrusionOp {
                d_plus: snap(e.d_plus)?,
                d_minus: snap(e.d_minus)?,
                tau: [snap(e.tau[0])?, snap(e.tau[1])?, snap(e.tau[2])?],
                euler: [
                    snap_angle(e.euler[0])?,
                    snap_angle(e.euler[1])?,
                    snap_angle(e.euler[2])?,
                ],
                sigma: snap(e.sigma)?,
                boolean_op: e.boolean_op,
            };
            let mut faces = Vec::with_capacity(step.sketch.faces.len());
            for face in &step.sketch.faces {
                let mut loops = Vec::with_capacity(face.loops.len());
                for lp in &face.loops {
                    let mut curves = Vec::with_capacity(lp.curves.len());
                    for c in &lp.curves {
                        curves.push(match c {
                            Curve::Line { start, end } => Curve::Line {
                                start: snap_pt(start)?,
                                end: snap_pt(end)?,
                            },
                            Curve::Arc { start, mid, end } => Curve::Arc {
                                start: snap_pt(start)?,
                                mid: snap_pt(mid)?,
                                end: snap_pt(end)?,
                            },
                            Curve::Circle { center, top } => Curve::Circle {
                                center: snap_pt(center)?,
                                top: snap_pt(top)?,
                            },
                        });
                    }
                    loops.push(Loop { curves });
                }
                faces.push(Face { loops });
            }
            steps.push(Step {
                extrusion,
                sketch: Sketch { faces },
            });
        }
        Ok(CadProgram { steps })
    }
}

/// Wrap an angle into `[0, 2pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut r = a % tau;
    if r < 0.0 {
        r += tau;
    }
    // `% tau` can return tau itself after the negative fixup at -eps.
    if r >= tau {
        r = 0.0;
    }
    r
}

/// Errors raised by the language kernel.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LangError {
    #[error("value {0} outside domain {1}")]
    Domain(f64, &'static str),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid program: {0}")]
    Validation(String),
    #[error("syntax error at token {position}: expected {expected}, found {found}")]
    Syntax {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("stream io: {0}")]
    Io(String),
}
