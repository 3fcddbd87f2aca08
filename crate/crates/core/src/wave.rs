//! Planar-wave image exporter: a low-frequency wave oriented at the invariant
//! angle superposed with a high-frequency wave at the spurious angle.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::textio::g17;

/// Cycles per image of the low-frequency (shape) wave.
pub const LOW_CYCLES: f64 = 2.0;
/// Cycles per image of the high-frequency (texture) wave.
pub const HIGH_CYCLES: f64 = 8.0;

/// A square grayscale image with values in `[0, 1]`, row-major.
#[derive(Debug, Clone)]
pub struct WaveImage<S> {
    pub size: usize,
    pub pixels: Vec<S>,
}

/// Render `pixel(r,c) = ½ + ¼·sin(k_lo·(c·cosθ_inv + r·sinθ_inv))
///                        + ¼·sin(k_hi·(c·cosθ_spu + r·sinθ_spu))`
/// with `k_lo = 2π·2/size` and `k_hi = 2π·8/size`.
pub fn render_wave_image<S: Real>(theta_inv: S, theta_spu: S, size: usize) -> Result<WaveImage<S>> {
    if size == 0 {
        return Err(Error::InvalidInput("image size must be positive".into()));
    }
    if !theta_inv.is_finite() || !theta_spu.is_finite() {
        return Err(Error::InvalidInput("wave angles must be finite".into()));
    }
    let tau = S::of(std::f64::consts::TAU);
    let k_lo = tau * S::of(LOW_CYCLES) / S::of(size as f64);
    let k_hi = tau * S::of(HIGH_CYCLES) / S::of(size as f64);
    let (ci, si) = (theta_inv.cos(), theta_inv.sin());
    let (cs, ss) = (theta_spu.cos(), theta_spu.sin());
    let half = S::of(0.5);
    let quarter = S::of(0.25);
    let mut pixels = Vec::with_capacity(size * size);
    for r in 0..size {
        let rr = S::of(r as f64);
        for c in 0..size {
            let cc = S::of(c as f64);
            let lo = (k_lo * (cc * ci + rr * si)).sin();
            let hi = (k_hi * (cc * cs + rr * ss)).sin();
            pixels.push(half + quarter * lo + quarter * hi);
        }
    }
    Ok(WaveImage { size, pixels })
}

impl<S: Real> WaveImage<S> {
    /// Plain-text portable graymap, 8-bit.
    pub fn write_pgm<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "P2")?;
        writeln!(out, "{} {}", self.size, self.size)?;
        writeln!(out, "255")?;
        for row in self.pixels.chunks(self.size) {
            let line: Vec<String> = row
                .iter()
                .map(|&v| {
                    let level = (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8;
                    level.to_string()
                })
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Raw pixel values as CSV rows.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        for row in self.pixels.chunks(self.size) {
            let line: Vec<String> = row.iter().map(|&v| g17(v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Naive 1-D DFT magnitude of a real signal.
    fn dft_mag(signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in signal.iter().enumerate() {
                    let ang = -std::f64::consts::TAU * (k * t) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn axis_aligned_waves() {
        let img = render_wave_image(0.0f64, 0.0, 32).unwrap();
        // Wavefronts vertical: every row identical, columns periodic.
        let first = &img.pixels[..32];
        for row in img.pixels.chunks(32) {
            assert_eq!(row, first);
        }
        for &v in &img.pixels {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn dominant_frequencies_match_wave_numbers() {
        let size = 64;
        let img = render_wave_image(0.0f64, 0.0, size).unwrap();
        let row: Vec<f64> = img.pixels[..size].iter().map(|&v| v - 0.5).collect();
        let mag = dft_mag(&row);
        // Strongest non-DC bins at 2 and 8 cycles (and mirrors).
        let mut order: Vec<usize> = (1..size / 2).collect();
        order.sort_by(|&a, &b| mag[b].partial_cmp(&mag[a]).unwrap());
        let top: Vec<usize> = order[..2].to_vec();
        assert!(top.contains(&(LOW_CYCLES as usize)), "{top:?}");
        assert!(top.contains(&(HIGH_CYCLES as usize)), "{top:?}");
    }

    #[test]
    fn rotation_by_pi_preserves_spectrum() {
        let size = 32;
        let pi = std::f64::consts::PI;
        let a = render_wave_image(0.4f64, 1.1, size).unwrap();
        let b = render_wave_image(0.4 + pi, 1.1 + pi, size).unwrap();
        // sin flips sign under a π rotation, so centered images negate and
        // every DFT magnitude is unchanged; check rows and columns.
        for r in 0..size {
            let row_a: Vec<f64> = (0..size).map(|c| a.pixels[r * size + c] - 0.5).collect();
            let row_b: Vec<f64> = (0..size).map(|c| b.pixels[r * size + c] - 0.5).collect();
            let (ma, mb) = (dft_mag(&row_a), dft_mag(&row_b));
            for k in 0..size {
                assert!((ma[k] - mb[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pgm_format() {
        let img = render_wave_image(0.0f64, 0.0, 4).unwrap();
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("4 4"));
        assert_eq!(lines.next(), Some("255"));
        assert_eq!(lines.clone().count(), 4);
        for line in lines {
            for tok in line.split(' ') {
                let v: u32 = tok.parse().unwrap();
                assert!(v <= 255);
            }
        }
    }
}
