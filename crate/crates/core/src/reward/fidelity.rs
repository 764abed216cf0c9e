//! Reconstruction fidelity between two images: PSNR and SSIM on
//! channel-averaged intensity.

use crate::bundle::Image;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FidelityError {
    #[error("image sizes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("image smaller than the {0}x{0} SSIM window")]
    TooSmall(usize),
}

fn check(a: &Image, b: &Image) -> Result<(), FidelityError> {
    if a.height != b.height || a.width != b.width {
        return Err(FidelityError::ShapeMismatch(a.height, a.width, b.height, b.width));
    }
    Ok(())
}

fn intensities(img: &Image) -> Vec<f64> {
    (0..img.height).flat_map(|r| (0..img.width).map(move |c| img.intensity(r, c))).collect()
}

/// Peak signal-to-noise ratio in dB for signals with range `peak`.
/// Identical images give `+∞`.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64, FidelityError> {
    check(a, b)?;
    let (x, y) = (intensities(a), intensities(b));
    let mse = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let k: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering (no padding).
fn filter(x: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..n).map(|i| k[i] * x[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..n).map(|i| k[i] * rows[(r + i) * ow + c]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5) and
/// the usual stabilizers `(0.01·L)²`, `(0.03·L)²`.
pub fn ssim(a: &Image, b: &Image, peak: f64) -> Result<f64, FidelityError> {
    check(a, b)?;
    if a.height < SSIM_WINDOW || a.width < SSIM_WINDOW {
        return Err(FidelityError::TooSmall(SSIM_WINDOW));
    }
    let (h, w) = (a.height, a.width);
    let k = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let (x, y) = (intensities(a), intensities(b));
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let (mx, _, _) = filter(&x, h, w, &k);
    let (my, _, _) = filter(&y, h, w, &k);
    let (sxx, _, _) = filter(&xx, h, w, &k);
    let (syy, _, _) = filter(&yy, h, w, &k);
    let (sxy, _, _) = filter(&xy, h, w, &k);
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Image {
        Image::gray(h, w, (0..h * w).map(|i| f(i / w, i % w)).collect())
    }

    #[test]
    fn psnr_known_value() {
        let a = ramp(4, 4, |_, _| 0.5);
        let b = ramp(4, 4, |_, _| 0.6);
        // mse = 0.01 → 20 dB
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert!(psnr(&a, &ramp(4, 5, |_, _| 0.0), 1.0).is_err());
    }

    #[test]
    fn ssim_identity_and_degradation() {
        let a = ramp(24, 20, |r, c| ((r as f64 * 0.4).sin() * (c as f64 * 0.3).cos() + 1.0) / 2.0);
        assert!((ssim(&a, &a, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let noisy = ramp(24, 20, |r, c| a.intensity(r, c) + if (r + c) % 2 == 0 { 0.05 } else { -0.05 });
        let s = ssim(&a, &noisy, 1.0).unwrap();
        assert!(s < 0.99 && s > 0.0);
        assert!(matches!(ssim(&ramp(5, 5, |_, _| 0.0), &ramp(5, 5, |_, _| 0.0), 1.0), Err(FidelityError::TooSmall(11))));
    }

    #[test]
    fn ssim_constant_shift_closed_form() {
        // Flat images: ssim = (2ab + c1) / (a² + b² + c1)
        let (p, q) = (0.3, 0.5);
        let a = ramp(12, 12, |_, _| p);
        let b = ramp(12, 12, |_, _| q);
        let c1 = 1e-4;
        let expect = (2.0 * p * q + c1) / (p * p + q * q + c1);
        assert!((ssim(&a, &b, 1.0).unwrap() - expect).abs() < 1e-9);
    }
}
