//! Sketch canonicalization: deterministic element ordering and loop
//! orientation, applied before serialization so equivalent sketches emit
//! identical token streams.

use super::curve2d::{curve_bbox, loop_signed_area, Bbox2};
use super::{Curve, Face, LangError, Loop, Point2, Sketch};

const AREA_TOL: f64 = 1e-9;

/// Canonicalize a sketch: orient every loop counter-clockwise, rotate each
/// loop's curve list to start at the curve with the smallest bounding-box
/// bottom-left corner, and stably sort loops within faces and faces within
/// the sketch by the same `(x, then y)` ascending key.
///
/// Curves keep their cyclic adjacency — a full sort would open the loop.
/// Idempotent; circles are never reversed.
pub fn reorder_and_orient(sketch: &Sketch) -> Result<Sketch, LangError> {
    let mut faces = Vec::with_capacity(sketch.faces.len());
    for face in &sketch.faces {
        let mut loops = Vec::with_capacity(face.loops.len());
        for lp in &face.loops {
            loops.push(orient_loop(lp)?);
        }
        sort_by_key_stable(&mut loops, loop_bbox);
        faces.push(Face { loops });
    }
    sort_by_key_stable(&mut faces, face_bbox);
    Ok(Sketch { faces })
}

fn orient_loop(lp: &Loop) -> Result<Loop, LangError> {
    let area = loop_signed_area(&lp.curves);
    if area.abs() < AREA_TOL {
        return Err(LangError::Validation(
            "degenerate loop with zero area".into(),
        ));
    }
    let mut curves = lp.curves.clone();
    if area < 0.0 {
        curves.reverse();
        for c in &mut curves {
            c.reverse();
        }
    }
    // Rotate the cyclic order to a canonical starting curve: the first
    // curve holding the minimal bottom-left key.
    if curves.len() > 1 {
        let mut start = 0;
        for i in 1..curves.len() {
            if cmp_key(bl_key(&curves[i]), bl_key(&curves[start])) == std::cmp::Ordering::Less {
                start = i;
            }
        }
        curves.rotate_left(start);
    }
    Ok(Loop { curves })
}

fn bl_key(c: &Curve) -> Point2 {
    curve_bbox(c).bottom_left()
}

fn cmp_key(a: Point2, b: Point2) -> std::cmp::Ordering {
    a.x.partial_cmp(&b.x)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal))
}

fn loop_bbox(lp: &Loop) -> Bbox2 {
    let mut bb = Bbox2::empty();
    for c in &lp.curves {
        bb.merge(&curve_bbox(c));
    }
    bb
}

fn face_bbox(face: &Face) -> Bbox2 {
    let mut bb = Bbox2::empty();
    for lp in &face.loops {
        bb.merge(&loop_bbox(lp));
    }
    bb
}

fn sort_by_key_stable<T>(items: &mut [T], bbox: impl Fn(&T) -> Bbox2) {
    items.sort_by(|a, b| cmp_key(bbox(a).bottom_left(), bbox(b).bottom_left()));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::curve2d::loop_signed_area;

    fn square_loop(x0: f64, y0: f64, s: f64, ccw: bool) -> Loop {
        let mut pts = vec![
            Point2::new(x0, y0),
            Point2::new(x0 + s, y0),
            Point2::new(x0 + s, y0 + s),
            Point2::new(x0, y0 + s),
        ];
        if !ccw {
            pts.reverse();
        }
        Loop {
            curves: (0..4)
                .map(|i| Curve::Line {
                    start: pts[i],
                    end: pts[(i + 1) % 4],
                })
                .collect(),
        }
    }

    #[test]
    fn clockwise_loop_gets_reversed() {
        let cw = square_loop(0.0, 0.0, 0.5, false);
        assert!((loop_signed_area(&cw.curves) + 0.25).abs() < 1e-12);
        let sketch = Sketch {
            faces: vec![Face { loops: vec![cw] }],
        };
        let out = reorder_and_orient(&sketch).unwrap();
        let area = loop_signed_area(&out.faces[0].loops[0].curves);
        assert!((area - 0.25).abs() < 1e-12);
    }

    #[test]
    fn loops_sorted_by_bottom_left_x_then_y() {
        let sketch = Sketch {
            faces: vec![Face {
                loops: vec![
                    square_loop(0.2, 0.1, 0.1, true),
                    square_loop(0.1, 0.3, 0.1, true),
                ],
            }],
        };
        let out = reorder_and_orient(&sketch).unwrap();
        let bl0 = curve_bbox(&out.faces[0].loops[0].curves[0]);
        assert!((bl0.min.x - 0.1).abs() < 1e-12);
        let key0 = super::loop_bbox(&out.faces[0].loops[0]).bottom_left();
        let key1 = super::loop_bbox(&out.faces[0].loops[1]).bottom_left();
        assert!((key0.x, key0.y) < (key1.x, key1.y));
        assert!((key0.x - 0.1).abs() < 1e-12 && (key0.y - 0.3).abs() < 1e-12);
    }

    #[test]
    fn idempotent_on_canonical_sketch() {
        let sketch = Sketch {
            faces: vec![
                Face {
                    loops: vec![square_loop(0.0, 0.0, 0.4, true)],
                },
                Face {
                    loops: vec![square_loop(0.5, 0.5, 0.4, true)],
                },
            ],
        };
        let once = reorder_and_orient(&sketch).unwrap();
        let twice = reorder_and_orient(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn zero_area_loop_rejected() {
        let degenerate = Loop {
            curves: vec![
                Curve::Line {
                    start: Point2::new(0.1, 0.1),
                    end: Point2::new(0.5, 0.5),
                },
                Curve::Line {
                    start: Point2::new(0.5, 0.5),
                    end: Point2::new(0.1, 0.1),
                },
            ],
        };
        let sketch = Sketch {
            faces: vec![Face {
                loops: vec![degenerate],
            }],
        };
        assert!(matches!(
            reorder_and_orient(&sketch),
            Err(LangError::Validation(_))
        ));
    }

    #[test]
    fn circle_loops_untouched_and_sortable() {
        let circle = Loop {
            curves: vec![Curve::Circle {
                center: Point2::new(0.7, 0.7),
                top: Point2::new(0.7, 0.9),
            }],
        };
        let sketch = Sketch {
            faces: vec![Face {
                loops: vec![circle.clone(), square_loop(0.0, 0.0, 0.3, true)],
            }],
        };
        let out = reorder_and_orient(&sketch).unwrap();
        // Square's bottom-left (0,0) sorts before the circle's (0.5,0.5).
        assert!(matches!(
            out.faces[0].loops[0].curves[0],
            Curve::Line { .. }
        ));
        assert_eq!(out.faces[0].loops[1], circle);
    }
}
