//! Netpbm renderings of grid files. The top image row is the highest grid
//! row, so the grid's local y axis points up.

use crate::gridfile::GridFile;

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn pixels(g: &GridFile, scale: usize, mut emit: impl FnMut(&mut Vec<u8>, usize)) -> Vec<u8> {
    let n = g.header.side_cells;
    let mut out = Vec::new();
    for row in (0..n).rev() {
        for _ in 0..scale {
            for col in 0..n {
                for _ in 0..scale {
                    emit(&mut out, row * n + col);
                }
            }
        }
    }
    out
}

/// Binary PGM of one channel. Values above 1 (hit counts) are scaled by the
/// channel maximum.
pub fn render_pgm(g: &GridFile, channel: usize, scale: usize) -> Option<Vec<u8>> {
    if channel >= g.channels() || scale == 0 {
        return None;
    }
    let plane = g.plane(channel);
    let max = plane.iter().fold(1.0f32, |m, &v| m.max(v));
    let side = g.header.side_cells * scale;
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(pixels(g, scale, |o, i| o.push(to_byte(plane[i] / max))));
    Some(out)
}

/// Binary PPM of a belief grid: free mass green, occupied mass red, unknown
/// mass blue.
pub fn render_ppm(g: &GridFile, scale: usize) -> Option<Vec<u8>> {
    if g.channels() != 3 || scale == 0 {
        return None;
    }
    let side = g.header.side_cells * scale;
    let mut out = format!("P6\n{side} {side}\n255\n").into_bytes();
    out.extend(pixels(g, scale, |o, i| {
        let c = g.cell(i);
        o.extend_from_slice(&[to_byte(c[1]), to_byte(c[0]), to_byte(c[2])]);
    }));
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfile::{BELIEF_CHANNELS, RADAR_CHANNELS};
    use radar_ism_core::grid::{GridSpec, Pose2D};

    #[test]
    fn ppm_colours_and_orientation() {
        let spec = GridSpec::new(8, 1.0).unwrap();
        let mut data = vec![0.0f32; 3 * 64];
        data[0] = 1.0; // row 0, col 0: free
        data[3 * 63 + 1] = 1.0; // row 7, col 7: occupied
        for i in 1..63 {
            data[3 * i + 2] = 1.0;
        }
        let g = GridFile::new(spec, Pose2D::default(), &BELIEF_CHANNELS, data).unwrap();
        let img = render_ppm(&g, 2).unwrap();
        let head = b"P6\n16 16\n255\n";
        assert_eq!(&img[..head.len()], head);
        let px = &img[head.len()..];
        assert_eq!(px.len(), 16 * 16 * 3);
        // Top-right pixel is row 7, col 7.
        assert_eq!(&px[3 * 15..3 * 16], &[255, 0, 0]);
        // Bottom-left pixel is row 0, col 0.
        assert_eq!(&px[3 * 16 * 15..3 * 16 * 15 + 3], &[0, 255, 0]);
        assert_eq!(&px[3..6], &[0, 0, 255]);
    }

    #[test]
    fn pgm_normalises_counts() {
        let spec = GridSpec::new(8, 1.0).unwrap();
        let mut data = vec![0.0f32; 128];
        data[2 * 9] = 4.0;
        data[2 * 10] = 2.0;
        let g = GridFile::new(spec, Pose2D::default(), &RADAR_CHANNELS, data).unwrap();
        let img = render_pgm(&g, 0, 1).unwrap();
        let px = &img[b"P5\n8 8\n255\n".len()..];
        assert_eq!(px[6 * 8 + 1], 255);
        assert_eq!(px[6 * 8 + 2], 128);
        assert!(render_pgm(&g, 2, 1).is_none());
        assert!(render_ppm(&g, 1).is_none());
    }
}
