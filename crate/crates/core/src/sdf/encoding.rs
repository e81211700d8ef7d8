use ndarray::Array2;

use super::scalar::Real;

/// Output dimension of the positional encoding: raw coordinates plus
/// sin/cos pairs for each frequency band.
pub fn encode_dim(frequencies: usize) -> usize {
    3 + 6 * frequencies
}

/// Positional encoding of a batch of points:
/// `[x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(F-1) pi x), cos(2^(F-1) pi x)]`
/// applied componentwise (three sins then three coses per band).
pub fn encode_batch<T: Real>(pts: &Array2<T>, frequencies: usize) -> Array2<T> {
    let n = pts.nrows();
    let mut out = Array2::zeros((n, encode_dim(frequencies)));
    let pi = T::from_f64(std::f64::consts::PI);
    for i in 0..n {
        for c in 0..3 {
            out[(i, c)] = pts[(i, c)];
        }
        let mut scale = pi;
        for k in 0..frequencies {
            let base = 3 + 6 * k;
            for c in 0..3 {
                let arg = pts[(i, c)] * scale;
                out[(i, base + c)] = arg.sin();
                out[(i, base + 3 + c)] = arg.cos();
            }
            scale = scale + scale;
        }
    }
    out
}

/// Derivative of each encoding column with respect to its own coordinate,
/// evaluated at the batch points (same layout as [`encode_batch`]).
pub fn encode_jacobian_batch<T: Real>(pts: &Array2<T>, frequencies: usize) -> Array2<T> {
    let n = pts.nrows();
    let mut out = Array2::zeros((n, encode_dim(frequencies)));
    let pi = T::from_f64(std::f64::consts::PI);
    for i in 0..n {
        for c in 0..3 {
            out[(i, c)] = T::one();
        }
        let mut scale = pi;
        for k in 0..frequencies {
            let base = 3 + 6 * k;
            for c in 0..3 {
                let arg = pts[(i, c)] * scale;
                out[(i, base + c)] = scale * arg.cos();
                out[(i, base + 3 + c)] = -scale * arg.sin();
            }
            scale = scale + scale;
        }
    }
    out
}

/// 0/1 matrix mapping encoding columns to their source coordinate, so that
/// `(g_enc * jacobian) . selector` contracts a 63-wide gradient to 3-wide.
pub fn coordinate_selector<T: Real>(frequencies: usize) -> Array2<T> {
    let dim = encode_dim(frequencies);
    let mut s = Array2::zeros((dim, 3));
    for c in 0..3 {
        s[(c, c)] = T::one();
    }
    for k in 0..frequencies {
        let base = 3 + 6 * k;
        for c in 0..3 {
            s[(base + c, c)] = T::one();
            s[(base + 3 + c, c)] = T::one();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use std::f64::consts::PI;

    #[test]
    fn dimension_is_sixty_three_for_ten_bands() {
        assert_eq!(encode_dim(10), 63);
    }

    #[test]
    fn origin_encodes_to_zeros_and_ones() {
        let e = encode_batch(&arr2(&[[0.0f64, 0.0, 0.0]]), 10);
        assert_eq!(e.ncols(), 63);
        for c in 0..3 {
            assert_eq!(e[(0, c)], 0.0);
        }
        for k in 0..10 {
            for c in 0..3 {
                assert_eq!(e[(0, 3 + 6 * k + c)], 0.0); // sines
                assert_eq!(e[(0, 3 + 6 * k + 3 + c)], 1.0); // cosines
            }
        }
    }

    #[test]
    fn unit_x_kills_first_coordinate_sines() {
        let e = encode_batch(&arr2(&[[1.0f64, 0.25, -0.5]]), 10);
        for k in 0..10 {
            // sin(2^k * pi * 1) = 0 for every integer power of two.
            assert!(e[(0, 3 + 6 * k)].abs() < 1e-9, "band {k}");
        }
    }

    #[test]
    fn lowest_band_has_period_two() {
        let a = encode_batch(&arr2(&[[0.3f64, -0.7, 0.1]]), 1);
        let b = encode_batch(&arr2(&[[2.3f64, 1.3, 2.1]]), 1);
        for c in 0..6 {
            assert!((a[(0, 3 + c)] - b[(0, 3 + c)]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = arr2(&[[0.31f64, -0.44, 0.72]]);
        let jac = encode_jacobian_batch(&p, 4);
        let h = 1e-7;
        for c in 0..3 {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[(0, c)] += h;
            pm[(0, c)] -= h;
            let ep = encode_batch(&pp, 4);
            let em = encode_batch(&pm, 4);
            let sel = coordinate_selector::<f64>(4);
            for j in 0..encode_dim(4) {
                if sel[(j, c)] == 0.0 {
                    continue;
                }
                let fd = (ep[(0, j)] - em[(0, j)]) / (2.0 * h);
                assert!(
                    (jac[(0, j)] - fd).abs() < 1e-4 * (1.0 + fd.abs()),
                    "col {j}: {} vs {}",
                    jac[(0, j)],
                    fd
                );
            }
        }
        let _ = PI;
    }
}
