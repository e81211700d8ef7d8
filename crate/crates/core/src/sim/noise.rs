use std::f64::consts::TAU;

use crate::image::PolarimetricImage;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn to_unit(x: u64) -> f64 {
    // (0, 1]: avoids log(0) in Box-Muller.
    ((x >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}

/// Standard normal draw keyed by (seed, image, element). Counter-based, so
/// the output does not depend on evaluation order or parallel schedule.
fn gaussian(seed: u64, image_index: u64, element: u64) -> f64 {
    let k = splitmix64(seed ^ splitmix64(image_index.wrapping_mul(0xA24B_AED4_963E_E407)));
    let a = splitmix64(k ^ element);
    let b = splitmix64(a);
    let u1 = to_unit(a);
    let u2 = to_unit(b);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Add i.i.d. Gaussian noise with standard deviation `sigma` relative to the
/// per-image mean over valid pixels. `sigma = 0` leaves the images
/// bit-identical; a fixed seed gives identical output on every call.
pub fn add_noise(images: &mut [PolarimetricImage], sigma: f64, seed: u64) {
    if sigma == 0.0 {
        return;
    }
    for (idx, img) in images.iter_mut().enumerate() {
        let mut sum = 0.0;
        let mut count = 0usize;
        for v in img.data.iter().filter(|v| !v.is_nan()) {
            sum += v;
            count += 1;
        }
        if count == 0 {
            continue;
        }
        let scale = sigma * (sum / count as f64);
        for (el, v) in img.data.iter_mut().enumerate() {
            if v.is_nan() {
                continue;
            }
            *v += scale * gaussian(seed, idx as u64, el as u64);
        }
    }
}
