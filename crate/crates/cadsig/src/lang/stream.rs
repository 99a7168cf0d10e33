//! Structured program ⇄ flat token stream conversion.
//!
//! [`program_to_stream`] emits the canonical serialization; the inverse
//! [`stream_to_program`] is the prediction parser and accepts arbitrary
//! token sequences, reporting the first offending position on failure.
//! [`StreamTracker`] is the lenient incremental classifier both decoding
//! and stream loading use to assign flags, step indices, and sketch-row
//! membership to tokens one at a time.

use super::{
    quantize_scalar, try_dequantize, wrap_angle, BooleanOp, CadProgram, Curve, ExtrusionOp, Face,
    LangError, Loop, Point2, Sketch, Step, Token2D, TokenStream, CLS, END, EXTRUSION_TOKENS, E_C,
    E_E, E_F, E_L, E_S, FLAG_PAD, MAX_STEPS, MAX_TOKENS, NUM_MAX, NUM_MIN, PAD,
};

/// Flags for the nine ordered numeric extrusion slots, then beta and e_e.
const EXTRUSION_FLAGS: [u8; 11] = [1, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Per-position classification emitted by [`StreamTracker`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenInfo {
    pub flag: u8,
    pub step: u8,
    /// True for tokens inside a sketch block (coordinates and the
    /// end-of-curve/loop/face/sketch markers).
    pub is_sketch: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TrackState {
    ExpectCls,
    /// Start of a step (or the terminating `end`).
    ExpectStep,
    /// Inside the 11-token extrusion block; slot already consumed count.
    Extrusion(usize),
    /// Inside a sketch block.
    Sketch {
        pts_in_curve: u8,
        curves_in_loop: u16,
        loops_in_face: u16,
        faces: u16,
    },
    Done,
    Derailed,
}

/// Incremental token classifier tolerant of ungrammatical streams.
///
/// Once a token violates the grammar the tracker derails: subsequent tokens
/// get best-effort value-class flags, step stays frozen, and no token counts
/// as a sketch row (downstream attention falls back to the unmasked path).
#[derive(Debug, Clone)]
pub struct StreamTracker {
    state: TrackState,
    step: u8,
}

impl StreamTracker {
    pub fn new() -> Self {
        Self {
            state: TrackState::ExpectCls,
            step: 0,
        }
    }

    /// True when the tracker has consumed a terminating `end` token.
    pub fn is_done(&self) -> bool {
        self.state == TrackState::Done
    }

    /// True once the stream stopped following the grammar.
    pub fn is_derailed(&self) -> bool {
        self.state == TrackState::Derailed
    }

    /// True when the next token starts a design step (or may be `end`).
    pub fn at_step_boundary(&self) -> bool {
        self.state == TrackState::ExpectStep
    }

    pub fn current_step(&self) -> u8 {
        self.step
    }

    /// Consume one token, returning its classification.
    pub fn feed(&mut self, tok: Token2D) -> TokenInfo {
        let a = tok.a;
        let numeric = (NUM_MIN..=NUM_MAX).contains(&a);
        match self.state {
            TrackState::ExpectCls => {
                if a == CLS {
                    self.state = TrackState::ExpectStep;
                    TokenInfo {
                        flag: 0,
                        step: 0,
                        is_sketch: false,
                    }
                } else {
                    self.derail(tok)
                }
            }
            TrackState::ExpectStep => {
                if a == END {
                    self.state = TrackState::Done;
                    TokenInfo {
                        flag: 0,
                        step: 0,
                        is_sketch: false,
                    }
                } else if numeric && self.step < MAX_STEPS as u8 {
                    self.step += 1;
                    self.state = TrackState::Extrusion(1);
                    TokenInfo {
                        flag: EXTRUSION_FLAGS[0],
                        step: self.step,
                        is_sketch: false,
                    }
                } else {
                    self.derail(tok)
                }
            }
            TrackState::Extrusion(slot) => {
                let ok = match slot {
                    1..=8 => numeric,
                    9 => BooleanOp::from_token_value(a).is_some(),
                    10 => a == E_E,
                    _ => false,
                };
                if !ok {
                    return self.derail(tok);
                }
                let flag = EXTRUSION_FLAGS[slot];
                if slot + 1 == EXTRUSION_TOKENS {
                    self.state = TrackState::Sketch {
                        pts_in_curve: 0,
                        curves_in_loop: 0,
                        loops_in_face: 0,
                        faces: 0,
                    };
                } else {
                    self.state = TrackState::Extrusion(slot + 1);
                }
                TokenInfo {
                    flag,
                    step: self.step,
                    is_sketch: false,
                }
            }
            TrackState::Sketch {
                pts_in_curve,
                curves_in_loop,
                loops_in_face,
                faces,
            } => {
                let info = TokenInfo {
                    flag: 0,
                    step: self.step,
                    is_sketch: true,
                };
                match a {
                    _ if numeric && pts_in_curve < 3 => {
                        self.state = TrackState::Sketch {
                            pts_in_curve: pts_in_curve + 1,
                            curves_in_loop,
                            loops_in_face,
                            faces,
                        };
                        info
                    }
                    x if x == E_C && pts_in_curve >= 2 => {
                        self.state = TrackState::Sketch {
                            pts_in_curve: 0,
                            curves_in_loop: curves_in_loop + 1,
                            loops_in_face,
                            faces,
                        };
                        info
                    }
                    x if x == E_L && pts_in_curve == 0 && curves_in_loop >= 1 => {
                        self.state = TrackState::Sketch {
                            pts_in_curve: 0,
                            curves_in_loop: 0,
                            loops_in_face: loops_in_face + 1,
                            faces,
                        };
                        info
                    }
                    x if x == E_F
                        && pts_in_curve == 0
                        && curves_in_loop == 0
                        && loops_in_face >= 1 =>
                    {
                        self.state = TrackState::Sketch {
                            pts_in_curve: 0,
                            curves_in_loop: 0,
                            loops_in_face: 0,
                            faces: faces + 1,
                        };
                        info
                    }
                    x if x == E_S
                        && pts_in_curve == 0
                        && curves_in_loop == 0
                        && loops_in_face == 0
                        && faces >= 1 =>
                    {
                        self.state = TrackState::ExpectStep;
                        info
                    }
                    _ => self.derail(tok),
                }
            }
            TrackState::Done | TrackState::Derailed => self.derail(tok),
        }
    }

    fn derail(&mut self, tok: Token2D) -> TokenInfo {
        self.state = TrackState::Derailed;
        TokenInfo {
            flag: value_class_flag(tok.a),
            step: self.step,
            is_sketch: false,
        }
    }
}

impl Default for StreamTracker {
    fn default() -> Self {
        Self::new()
    }
}

/// Best-effort flag from the token value alone (derailed streams).
fn value_class_flag(a: u16) -> u8 {
    match a {
        PAD => FLAG_PAD,
        E_E => 10,
        v if BooleanOp::from_token_value(v).is_some() => 9,
        _ => 0,
    }
}

/// Build a [`TokenStream`] from raw token pairs, classifying with the
/// lenient tracker.
pub fn stream_from_tokens(tokens: Vec<Token2D>) -> TokenStream {
    let mut tracker = StreamTracker::new();
    let mut flags = Vec::with_capacity(tokens.len());
    let mut steps = Vec::with_capacity(tokens.len());
    for &t in &tokens {
        let info = tracker.feed(t);
        flags.push(info.flag);
        steps.push(info.step);
    }
    TokenStream {
        tokens,
        flags,
        steps,
    }
}

struct Emitter {
    tokens: Vec<Token2D>,
    flags: Vec<u8>,
    steps: Vec<u8>,
}

impl Emitter {
    fn push(&mut self, tok: Token2D, flag: u8, step: u8) -> Result<(), LangError> {
        if self.tokens.len() >= MAX_TOKENS {
            return Err(LangError::Capacity(format!(
                "token stream exceeds the maximum length of {MAX_TOKENS}"
            )));
        }
        self.tokens.push(tok);
        self.flags.push(flag);
        self.steps.push(step);
        Ok(())
    }
}

/// Serialize a program into its canonical token stream.
///
/// Continuous parameters are quantized during emission; structure tokens
/// follow the fixed order `cls [extrusion sketch]+ end`.
pub fn program_to_stream(prog: &CadProgram) -> Result<TokenStream, LangError> {
    if prog.steps.is_empty() {
        return Err(LangError::Validation("program has no steps".into()));
    }
    if prog.steps.len() > MAX_STEPS {
        return Err(LangError::Capacity(format!(
            "{} steps exceed the maximum of {MAX_STEPS}",
            prog.steps.len()
        )));
    }
    if prog.steps[0].extrusion.boolean_op != BooleanOp::New {
        return Err(LangError::Validation(
            "first step must use the New boolean operation".into(),
        ));
    }

    let mut em = Emitter {
        tokens: Vec::with_capacity(64),
        flags: Vec::with_capacity(64),
        steps: Vec::with_capacity(64),
    };
    em.push(Token2D::new(CLS, PAD), 0, 0)?;

    for (si, step) in prog.steps.iter().enumerate() {
        let step_idx = (si + 1) as u8;
        emit_extrusion(&mut em, &step.extrusion, step_idx)?;
        emit_sketch(&mut em, &step.sketch, step_idx)?;
    }
    em.push(Token2D::new(END, PAD), 0, 0)?;

    Ok(TokenStream {
        tokens: em.tokens,
        flags: em.flags,
        steps: em.steps,
    })
}

fn emit_extrusion(em: &mut Emitter, e: &ExtrusionOp, step: u8) -> Result<(), LangError> {
    if e.sigma <= 0.0 {
        return Err(LangError::Validation(format!(
            "step {step}: sigma must be positive"
        )));
    }
    if e.d_plus < 0.0 || e.d_minus < 0.0 {
        return Err(LangError::Validation(format!(
            "step {step}: extrusion distances must be non-negative"
        )));
    }
    let tau = std::f64::consts::TAU;
    let values = [
        e.d_plus,
        e.d_minus,
        e.tau[0],
        e.tau[1],
        e.tau[2],
        wrap_angle(e.euler[0]) / tau,
        wrap_angle(e.euler[1]) / tau,
        wrap_angle(e.euler[2]) / tau,
        e.sigma,
    ];
    for (slot, v) in values.iter().enumerate() {
        let q = quantize_scalar(*v)?;
        em.push(Token2D::new(q, PAD), EXTRUSION_FLAGS[slot], step)?;
    }
    em.push(Token2D::new(e.boolean_op.token_value(), PAD), 9, step)?;
    em.push(Token2D::new(E_E, PAD), 10, step)?;
    Ok(())
}

fn emit_sketch(em: &mut Emitter, sketch: &Sketch, step: u8) -> Result<(), LangError> {
    if sketch.faces.is_empty() {
        return Err(LangError::Validation(format!("step {step}: empty sketch")));
    }
    for face in &sketch.faces {
        if face.loops.is_empty() {
            return Err(LangError::Validation(format!(
                "step {step}: face without loops"
            )));
        }
        for lp in &face.loops {
            if lp.curves.is_empty() {
                return Err(LangError::Validation(format!(
                    "step {step}: loop without curves"
                )));
            }
            for curve in &lp.curves {
                let pts: &[Point2] = match curve {
                    Curve::Line { start, end } => &[*start, *end],
                    Curve::Arc { start, mid, end } => &[*start, *mid, *end],
                    Curve::Circle { center, top } => &[*center, *top],
                };
                for p in pts {
                    let qa = quantize_scalar(p.x)?;
                    let qb = quantize_scalar(p.y)?;
                    em.push(Token2D::new(qa, qb), 0, step)?;
                }
                em.push(Token2D::new(E_C, PAD), 0, step)?;
            }
            em.push(Token2D::new(E_L, PAD), 0, step)?;
        }
        em.push(Token2D::new(E_F, PAD), 0, step)?;
    }
    em.push(Token2D::new(E_S, PAD), 0, step)?;
    Ok(())
}

struct Parser<'a> {
    stream: &'a TokenStream,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Token2D> {
        (self.pos < self.stream.true_len()).then(|| self.stream.token_at(self.pos))
    }

    fn next(&mut self, expected: &str) -> Result<Token2D, LangError> {
        match self.peek() {
            Some(t) => {
                self.pos += 1;
                Ok(t)
            }
            None => Err(LangError::Syntax {
                position: self.pos,
                expected: expected.to_string(),
                found: "end of stream".to_string(),
            }),
        }
    }

    fn err(&self, expected: &str, found: Token2D) -> LangError {
        LangError::Syntax {
            position: self.pos - 1,
            expected: expected.to_string(),
            found: describe(found),
        }
    }

    fn numeric(&mut self, expected: &'static str) -> Result<f64, LangError> {
        let t = self.next(expected)?;
        if (NUM_MIN..=NUM_MAX).contains(&t.a) {
            Ok(try_dequantize(t.a).expect("range checked"))
        } else {
            Err(self.err(expected, t))
        }
    }
}

fn describe(t: Token2D) -> String {
    let name = match t.a {
        PAD => "pad",
        CLS => "cls/end",
        E_S => "e_s",
        E_F => "e_f",
        E_L => "e_l",
        E_C => "e_c",
        E_E => "e_e",
        v if BooleanOp::from_token_value(v).is_some() => "boolean",
        v if (NUM_MIN..=NUM_MAX).contains(&v) => "numeric",
        _ => "out-of-vocabulary",
    };
    format!("{name} ({}, {})", t.a, t.b)
}

/// Parse a token stream back into a structured program.
///
/// Accepts arbitrary streams; returns a [`LangError::Syntax`] naming the
/// first offending token position when the grammar is violated. Geometric
/// validity (degenerate curves, open loops) is not checked here — the
/// geometry kernel diagnoses that downstream.
pub fn stream_to_program(stream: &TokenStream) -> Result<CadProgram, LangError> {
    let mut p = Parser { stream, pos: 0 };
    let t = p.next("cls")?;
    if t.a != CLS {
        return Err(p.err("cls", t));
    }
    let mut steps = Vec::new();
    loop {
        let t = p.next("extrusion distance or end")?;
        if t.a == END {
            if steps.is_empty() {
                return Err(p.err("at least one design step before end", t));
            }
            // Trailing tokens after `end` must be padding.
            while let Some(t) = p.peek() {
                if t.a != PAD || t.b != PAD {
                    p.pos += 1;
                    return Err(p.err("padding after end", t));
                }
                p.pos += 1;
            }
            return Ok(CadProgram { steps });
        }
        if steps.len() == MAX_STEPS {
            return Err(p.err("end (step capacity reached)", t));
        }
        p.pos -= 1;
        let extrusion = parse_extrusion(&mut p, steps.is_empty())?;
        let sketch = parse_sketch(&mut p)?;
        steps.push(Step { extrusion, sketch });
    }
}

fn parse_extrusion(p: &mut Parser, first: bool) -> Result<ExtrusionOp, LangError> {
    let names = [
        "d+ numeric",
        "d- numeric",
        "tau_x numeric",
        "tau_y numeric",
        "tau_z numeric",
        "theta numeric",
        "phi numeric",
        "gamma numeric",
        "sigma numeric",
    ];
    let mut vals = [0.0; 9];
    for (i, name) in names.iter().enumerate() {
        vals[i] = p.numeric(name)?;
    }
    let bt = p.next("boolean token")?;
    let boolean_op = BooleanOp::from_token_value(bt.a).ok_or_else(|| p.err("boolean token", bt))?;
    if first && boolean_op != BooleanOp::New {
        return Err(p.err("New boolean on the first step", bt));
    }
    let ee = p.next("e_e")?;
    if ee.a != E_E {
        return Err(p.err("e_e", ee));
    }
    let tau_c = std::f64::consts::TAU;
    Ok(ExtrusionOp {
        d_plus: vals[0],
        d_minus: vals[1],
        tau: [vals[2], vals[3], vals[4]],
        euler: [
            wrap_angle(vals[5] * tau_c),
            wrap_angle(vals[6] * tau_c),
            wrap_angle(vals[7] * tau_c),
        ],
        sigma: vals[8],
        boolean_op,
    })
}

fn parse_sketch(p: &mut Parser) -> Result<Sketch, LangError> {
    let mut faces = Vec::new();
    loop {
        faces.push(parse_face(p)?);
        let t = p.next("coordinate or e_s")?;
        if t.a == E_S {
            return Ok(Sketch { faces });
        }
        p.pos -= 1;
    }
}

fn parse_face(p: &mut Parser) -> Result<Face, LangError> {
    let mut loops = Vec::new();
    loop {
        loops.push(parse_loop(p)?);
        let t = p.next("coordinate or e_f")?;
        if t.a == E_F {
            return Ok(Face { loops });
        }
        p.pos -= 1;
    }
}

fn parse_loop(p: &mut Parser) -> Result<Loop, LangError> {
    let mut raw: Vec<Vec<Point2>> = Vec::new();
    loop {
        raw.push(parse_curve_points(p)?);
        let t = p.next("coordinate or e_l")?;
        if t.a == E_L {
            break;
        }
        p.pos -= 1;
    }
    // A lone 2-point curve closes the loop only as a circle; in multi-curve
    // loops 2-point curves are lines and 3-point curves are arcs.
    let single = raw.len() == 1;
    let curves = raw
        .into_iter()
        .map(|pts| match (pts.len(), single) {
            (2, true) => Curve::Circle {
                center: pts[0],
                top: pts[1],
            },
            (2, false) => Curve::Line {
                start: pts[0],
                end: pts[1],
            },
            (3, _) => Curve::Arc {
                start: pts[0],
                mid: pts[1],
                end: pts[2],
            },
            _ => unreachable!("parse_curve_points yields 2 or 3 points"),
        })
        .collect();
    Ok(Loop { curves })
}

fn parse_curve_points(p: &mut Parser) -> Result<Vec<Point2>, LangError> {
    let mut pts = Vec::with_capacity(3);
    loop {
        let t = p.next("coordinate")?;
        if t.is_coord() {
            if pts.len() == 3 {
                return Err(p.err("e_c (a curve has at most 3 points)", t));
            }
            pts.push(Point2::new(
                try_dequantize(t.a).expect("checked"),
                try_dequantize(t.b).expect("checked"),
            ));
        } else if t.a == E_C {
            if pts.len() < 2 {
                return Err(p.err("at least 2 curve points before e_c", t));
            }
            return Ok(pts);
        } else if (NUM_MIN..=NUM_MAX).contains(&t.a) {
            // Numeric a-component with structural b: not a coordinate.
            return Err(p.err("coordinate with numeric y-component", t));
        } else if pts.is_empty() {
            return Err(p.err("coordinate", t));
        } else {
            return Err(p.err("coordinate or e_c", t));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::dequantize_scalar;
    use crate::lang::fixtures::single_step_program;

    #[test]
    fn square_program_stream_has_28_tokens() {
        let stream = program_to_stream(&single_step_program()).unwrap();
        // cls + 11 extrusion + 4*(2 points + e_c) + e_l + e_f + e_s + end.
        assert_eq!(stream.true_len(), 28);
        assert!(stream.is_complete());
        assert_eq!(stream.token_at(0), Token2D::new(CLS, PAD));
        assert_eq!(stream.token_at(27), Token2D::new(END, PAD));
        // Extrusion block flags per slot.
        assert_eq!(&stream.flags[1..12], &[1, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        // Step indices: 0 on cls/end, 1 on all step tokens.
        assert_eq!(stream.step_at(0), 0);
        assert_eq!(stream.step_at(27), 0);
        assert!((1..27).all(|i| stream.step_at(i) == 1));
    }

    #[test]
    fn round_trip_single_step() {
        let prog = single_step_program().quantized().unwrap();
        let stream = program_to_stream(&prog).unwrap();
        let back = stream_to_program(&stream).unwrap();
        assert_eq!(back, prog);
    }

    #[test]
    fn empty_program_rejected() {
        let err = program_to_stream(&CadProgram { steps: vec![] }).unwrap_err();
        assert!(matches!(err, LangError::Validation(_)));
    }

    #[test]
    fn truncated_stream_reports_position() {
        let prog = single_step_program();
        let mut stream = program_to_stream(&prog).unwrap();
        stream.tokens.truncate(8);
        stream.flags.truncate(8);
        stream.steps.truncate(8);
        let err = stream_to_program(&stream).unwrap_err();
        match err {
            LangError::Syntax { position, .. } => assert_eq!(position, 8),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_line_parses() {
        // A line with identical endpoints is grammatical; geometry flags it.
        let mut prog = single_step_program();
        prog.steps[0].sketch.faces[0].loops[0].curves[0] = Curve::Line {
            start: Point2::new(0.0, 0.0),
            end: Point2::new(0.0, 0.0),
        };
        let stream = program_to_stream(&prog).unwrap();
        let back = stream_to_program(&stream).unwrap();
        assert_eq!(
            back.steps[0].sketch.faces[0].loops[0].curves[0],
            Curve::Line {
                start: Point2::new(0.0, 0.0),
                end: Point2::new(0.0, 0.0),
            }
        );
    }

    #[test]
    fn circle_loop_disambiguation() {
        let sketch = Sketch {
            faces: vec![Face {
                loops: vec![Loop {
                    curves: vec![Curve::Circle {
                        center: Point2::new(0.5, 0.5),
                        top: Point2::new(0.5, 1.0),
                    }],
                }],
            }],
        };
        let prog = CadProgram {
            steps: vec![Step {
                extrusion: single_step_program().steps[0].extrusion,
                sketch,
            }],
        };
        let stream = program_to_stream(&prog).unwrap();
        let back = stream_to_program(&stream).unwrap();
        assert!(matches!(
            back.steps[0].sketch.faces[0].loops[0].curves[0],
            Curve::Circle { .. }
        ));
    }

    #[test]
    fn tracker_matches_emitted_flags() {
        let stream = program_to_stream(&single_step_program()).unwrap();
        let rebuilt = stream_from_tokens(stream.tokens.clone());
        assert_eq!(rebuilt.flags, stream.flags);
        assert_eq!(rebuilt.steps, stream.steps);
    }

    #[test]
    fn tracker_derails_on_garbage() {
        let mut tr = StreamTracker::new();
        tr.feed(Token2D::new(CLS, PAD));
        tr.feed(Token2D::new(42, PAD)); // d+
        let info = tr.feed(Token2D::new(E_S, PAD)); // structural where numeric expected
        assert!(tr.is_derailed());
        assert!(!info.is_sketch);
    }

    #[test]
    fn parsed_values_dequantize() {
        let prog = single_step_program();
        let stream = program_to_stream(&prog).unwrap();
        let back = stream_to_program(&stream).unwrap();
        let e = &back.steps[0].extrusion;
        assert_eq!(e.d_plus, 1.0);
        assert_eq!(e.d_minus, 0.0);
        assert_eq!(e.sigma, 1.0);
        assert_eq!(e.boolean_op, BooleanOp::New);
        assert_eq!(dequantize_scalar(quantize_scalar(e.tau[0]).unwrap()), 0.0);
    }
}
