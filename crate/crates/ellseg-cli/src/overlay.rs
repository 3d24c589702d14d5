//! Contour overlay rendering.

use ellseg_core::EllipseParams;
use image::RgbImage;

const CONTOUR_SAMPLES: usize = 1024;
const CONTOUR_COLOR: image::Rgb<u8> = image::Rgb([0, 255, 0]);

/// Draws the ellipse boundary onto the canvas by sampling its parametric
/// form and coloring the nearest pixel of each sample.
pub fn draw_ellipse(canvas: &mut RgbImage, ellipse: &EllipseParams) {
    let (w, h) = (canvas.width() as i64, canvas.height() as i64);
    for k in 0..CONTOUR_SAMPLES {
        let t = 2.0 * std::f64::consts::PI * k as f64 / CONTOUR_SAMPLES as f64;
        let (x, y) = ellipse.point_at(t);
        let (cx, cy) = (x.round() as i64, y.round() as i64);
        if (0..w).contains(&cx) && (0..h).contains(&cy) {
            canvas.put_pixel(cx as u32, cy as u32, CONTOUR_COLOR);
        }
    }
}
