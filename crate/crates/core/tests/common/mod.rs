//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relief_core::{GradientField, Grid, Mask, NormalImage, ScalarField, UnitNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on the sphere.
pub fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

/// Upper-hemisphere normals tilted at most `max_angle` from `+z`.
pub fn random_normals(rng: &mut impl Rng, w: usize, h: usize, max_angle: f64) -> NormalImage {
    Grid::from_fn(w, h, |_, _| {
        let angle = rng.random_range(0.0..max_angle);
        let azimuth = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        UnitNormal::from_spherical(angle, azimuth)
    })
}

/// Bilateral filter straight from its definition: every pixel against every
/// pixel, Gaussian in pixel distance and in Euclidean normal distance.
pub fn brute_force_bilateral(image: &NormalImage, sigma_c: f64, sigma_s: f64) -> NormalImage {
    let (w, h) = image.dims();
    Grid::from_fn(w, h, |x, y| {
        let p = image.get(x, y).to_array();
        let mut sum = [0.0; 3];
        for qy in 0..h {
            for qx in 0..w {
                let q = image.get(qx, qy).to_array();
                let d2 = (x as f64 - qx as f64).powi(2) + (y as f64 - qy as f64).powi(2);
                let r2: f64 = (0..3).map(|i| (p[i] - q[i]).powi(2)).sum();
                let weight = (-d2 / (2.0 * sigma_c * sigma_c)).exp() * (-r2 / (2.0 * sigma_s * sigma_s)).exp();
                for i in 0..3 {
                    sum[i] += weight * q[i];
                }
            }
        }
        UnitNormal::new(sum[0], sum[1], sum[2]).unwrap()
    })
}

/// Minimizer of
/// `Σ_edges (z_q − z_p − t_pq)² + λ² Σ_p (z_p − h_p)²`
/// over foreground pixels off the image frame, all other heights fixed at 0.
/// `t_pq` is the mean of the two pixel gradients along the edge. The normal
/// equations are assembled edge by edge and solved by Gaussian elimination.
pub fn dense_screened_poisson(g: &GradientField, h: &ScalarField, lambda: f64, domain: &Mask) -> ScalarField {
    let (w, hgt) = g.dims();
    let mut unknown = vec![None; w * hgt];
    let mut count = 0;
    for y in 0..hgt {
        for x in 0..w {
            let interior = x > 0 && y > 0 && x + 1 < w && y + 1 < hgt;
            if interior && domain.is_foreground(x, y) {
                unknown[y * w + x] = Some(count);
                count += 1;
            }
        }
    }
    let mut a = vec![vec![0.0; count]; count];
    let mut b = vec![0.0; count];
    let l2 = lambda * lambda;
    let mut edge = |p: usize, q: usize, target: f64| {
        if let Some(i) = unknown[p] {
            a[i][i] += 1.0;
            b[i] -= target;
        }
        if let Some(j) = unknown[q] {
            a[j][j] += 1.0;
            b[j] += target;
        }
        if let (Some(i), Some(j)) = (unknown[p], unknown[q]) {
            a[i][j] -= 1.0;
            a[j][i] -= 1.0;
        }
    };
    for y in 0..hgt {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                edge(p, p + 1, 0.5 * (g.get(x, y)[0] + g.get(x + 1, y)[0]));
            }
            if y + 1 < hgt {
                edge(p, p + w, 0.5 * (g.get(x, y)[1] + g.get(x, y + 1)[1]));
            }
        }
    }
    for y in 0..hgt {
        for x in 0..w {
            if let Some(i) = unknown[y * w + x] {
                a[i][i] += l2;
                b[i] += l2 * h.get(x, y);
            }
        }
    }
    let z = gaussian_elimination(a, b);
    Grid::from_fn(w, hgt, |x, y| unknown[y * w + x].map_or(0.0, |i| z[i]))
}

/// Solves `a·x = b` with partial pivoting.
pub fn gaussian_elimination(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                let (upper, lower) = a.split_at_mut(row);
                for (target, pivot) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *target -= f * pivot;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn l2(field: &ScalarField) -> f64 {
    field.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn l2_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Normals of the height field `f` at integer pixels, from its analytic
/// gradient, in the convention where `(N_x, N_y) / N_z` is the slope.
pub fn normals_of(w: usize, h: usize, grad: impl Fn(f64, f64) -> [f64; 2]) -> NormalImage {
    Grid::from_fn(w, h, |x, y| {
        let [gx, gy] = grad(x as f64, y as f64);
        UnitNormal::new(gx, gy, 1.0).unwrap()
    })
}
