//! Marching squares on a regular lattice.

/// A contour piece in fractional lattice coordinates `(i, j)`, where integer
/// coordinates are lattice nodes.
pub type Segment = [(f64, f64); 2];

/// Iso-line segments of `field` at `level`.
///
/// `field` is x-major, `field[i * ny + j]`. Nodes with value `>= level` count
/// as inside. Saddle cells are resolved by the mean of their four corners.
pub fn marching_squares(field: &[f64], nx: usize, ny: usize, level: f64) -> Vec<Segment> {
    assert_eq!(field.len(), nx * ny, "field size does not match lattice");
    let mut segments = Vec::new();
    if nx < 2 || ny < 2 {
        return segments;
    }
    let at = |i: usize, j: usize| field[i * ny + j];

    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let v00 = at(i, j);
            let v10 = at(i + 1, j);
            let v11 = at(i + 1, j + 1);
            let v01 = at(i, j + 1);
            let inside = [v00 >= level, v10 >= level, v11 >= level, v01 >= level];
            let (x, y) = (i as f64, j as f64);

            let crossing = |a: f64, b: f64| (level - a) / (b - a);
            let bottom = || (x + crossing(v00, v10), y);
            let right = || (x + 1.0, y + crossing(v10, v11));
            let top = || (x + crossing(v01, v11), y + 1.0);
            let left = || (x, y + crossing(v00, v01));

            let mut crossed = Vec::with_capacity(4);
            if inside[0] != inside[1] {
                crossed.push(bottom());
            }
            if inside[1] != inside[2] {
                crossed.push(right());
            }
            if inside[2] != inside[3] {
                crossed.push(top());
            }
            if inside[3] != inside[0] {
                crossed.push(left());
            }

            match crossed.len() {
                0 => {}
                2 => segments.push([crossed[0], crossed[1]]),
                4 => {
                    let center_inside = 0.25 * (v00 + v10 + v11 + v01) >= level;
                    // Diagonal corners 00 and 11 share a state here.
                    let corners_00_11_inside = inside[0];
                    if center_inside == corners_00_11_inside {
                        // Isolate corners 10 and 01.
                        segments.push([bottom(), right()]);
                        segments.push([top(), left()]);
                    } else {
                        // Isolate corners 00 and 11.
                        segments.push([left(), bottom()]);
                        segments.push([right(), top()]);
                    }
                }
                _ => unreachable!("a square has an even number of crossed edges"),
            }
        }
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_field_has_no_contour() {
        assert!(marching_squares(&[1.0; 9], 3, 3, 0.5).is_empty());
        assert!(marching_squares(&[1.0; 9], 3, 3, 1.5).is_empty());
    }

    #[test]
    fn single_peak_is_enclosed() {
        // 3x3 with a peak in the middle: the level-0.5 contour is a diamond
        // through the midpoints of the four edges adjacent to the center.
        let mut field = [0.0; 9];
        field[4] = 1.0;
        let segs = marching_squares(&field, 3, 3, 0.5);
        assert_eq!(segs.len(), 4);
        let mut points: Vec<(f64, f64)> = segs.iter().flat_map(|s| s.iter().copied()).collect();
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        assert_eq!(points, [(0.5, 1.0), (1.0, 0.5), (1.0, 1.5), (1.5, 1.0)]);
    }

    #[test]
    fn interpolates_linearly() {
        let field = [0.0, 0.0, 4.0, 4.0];
        let segs = marching_squares(&field, 2, 2, 1.0);
        assert_eq!(segs.len(), 1);
        let [a, b] = segs[0];
        assert_eq!(a.0, 0.25);
        assert_eq!(b.0, 0.25);
    }

    #[test]
    fn saddle_uses_center_value() {
        // Corners 00 and 11 high, 10 and 01 low.
        let field = [1.0, 0.0, 0.0, 1.0];
        let high_center = marching_squares(&field, 2, 2, 0.4);
        let low_center = marching_squares(&field, 2, 2, 0.6);
        assert_eq!(high_center.len(), 2);
        assert_eq!(low_center.len(), 2);
        assert_ne!(high_center, low_center);
    }
}
