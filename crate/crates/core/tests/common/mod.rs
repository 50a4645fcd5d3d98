//! Reference implementations used only by the test suites. None of them
//! share code with the crate under test.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::OnceLock;

use coilstack_core::forcemap::{build_map, ForceMapGrid, GridSpec};
use coilstack_core::magnet::MagnetSpec;
use coilstack_core::magnetics::{CoilSpec, CoilStack};
use coilstack_core::scene::{SceneObject, Shape};
use coilstack_core::Vec3;

pub const MU0: f64 = 4.0e-7 * PI;

pub fn device_map() -> &'static ForceMapGrid {
    static MAP: OnceLock<ForceMapGrid> = OnceLock::new();
    MAP.get_or_init(|| {
        build_map(&CoilSpec::device(), &MagnetSpec::n35(), GridSpec::device()).unwrap()
    })
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Biot–Savart field `(B_r, B_z)` of a circular loop of radius `a` in the
/// plane `z = 0`, integrated over the azimuth with the periodic trapezoid
/// rule, doubling the node count until it settles.
pub fn loop_field_quadrature(a: f64, current: f64, r: f64, z: f64) -> (f64, f64) {
    let integrate = |n: usize| {
        let (mut br, mut bz) = (0.0, 0.0);
        for k in 0..n {
            let phi = 2.0 * PI * k as f64 / n as f64;
            let c = phi.cos();
            let d2 = r * r + a * a - 2.0 * a * r * c + z * z;
            let inv3 = 1.0 / (d2 * d2.sqrt());
            br += a * z * c * inv3;
            bz += (a * a - a * r * c) * inv3;
        }
        let scale = MU0 * current / (4.0 * PI) * 2.0 * PI / n as f64;
        (br * scale, bz * scale)
    };
    let mut n = 64;
    let mut prev = integrate(n);
    loop {
        n *= 2;
        let next = integrate(n);
        let settled = (next.0 - prev.0).abs() <= 1e-13 * next.0.abs().max(next.1.abs())
            && (next.1 - prev.1).abs() <= 1e-13 * next.1.abs().max(next.0.abs());
        if settled || n >= 1 << 20 {
            return next;
        }
        prev = next;
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Thick-coil field from an `n × n` Gauss–Legendre integral of the current
/// density over the winding cross-section, each loop by quadrature.
pub fn coil_field_gauss(coil: &CoilSpec, current: f64, r: f64, dz: f64, n: usize) -> (f64, f64) {
    let nodes = gauss_legendre(n);
    let (r1, r2, len) = (coil.inner_radius, coil.outer_radius, coil.axial_length);
    let density = coil.turns as f64 * current / ((r2 - r1) * len);
    let (mut br, mut bz) = (0.0, 0.0);
    for &(u, wu) in &nodes {
        let a = 0.5 * (r1 + r2) + 0.5 * (r2 - r1) * u;
        for &(v, wv) in &nodes {
            let zc = 0.5 * len * v;
            let (lr, lz) = loop_field_quadrature(a, 1.0, r, dz - zc);
            let w = wu * wv * 0.25 * (r2 - r1) * len;
            br += w * lr;
            bz += w * lz;
        }
    }
    (br * density, bz * density)
}

/// Closed-form on-axis field of a uniformly wound rectangular-section coil.
pub fn coil_on_axis_closed_form(coil: &CoilSpec, current: f64, dz: f64) -> f64 {
    let (r1, r2, len) = (coil.inner_radius, coil.outer_radius, coil.axial_length);
    let density = coil.turns as f64 * current / ((r2 - r1) * len);
    let term = |zeta: f64| {
        zeta * ((r2 + (r2 * r2 + zeta * zeta).sqrt()) / (r1 + (r1 * r1 + zeta * zeta).sqrt())).ln()
    };
    0.5 * MU0 * density * (term(dz + 0.5 * len) - term(dz - 0.5 * len))
}

/// Stack field by summing [`coil_field_gauss`] over powered coils.
pub fn stack_field_gauss(
    stack: &CoilStack,
    currents: &[f64; 6],
    r: f64,
    z: f64,
    n: usize,
) -> (f64, f64) {
    let mut total = (0.0, 0.0);
    for (c, &i) in stack.centers_z.iter().zip(currents) {
        if i != 0.0 {
            let (br, bz) = coil_field_gauss(&stack.coil, i, r, z - c, n);
            total.0 += br;
            total.1 += bz;
        }
    }
    total
}

/// Dipole force from the quadrature field, 4th-order central difference.
pub fn dipole_force_gauss(
    magnet: &MagnetSpec,
    stack: &CoilStack,
    currents: &[f64; 6],
    r: f64,
    z: f64,
    n: usize,
) -> f64 {
    let h = 1e-3;
    let bz = |z: f64| stack_field_gauss(stack, currents, r, z, n).1;
    let grad = (-bz(z + 2.0 * h) + 8.0 * bz(z + h) - 8.0 * bz(z - h) + bz(z - 2.0 * h)) / (12.0 * h);
    magnet.moment() * grad
}

/// Dense surface samples of a scene object, for brute-force distances.
pub fn surface_cloud(object: &SceneObject, n: usize) -> Vec<Vec3> {
    let c = object.center;
    let mut pts = Vec::new();
    match object.shape {
        Shape::Sphere { diameter } => {
            let rad = 0.5 * diameter;
            // Fibonacci lattice.
            let golden = PI * (3.0 - 5f64.sqrt());
            let m = n * n;
            for k in 0..m {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                let s = (1.0 - z * z).sqrt();
                let t = golden * k as f64;
                pts.push(c + Vec3::new(s * t.cos(), s * t.sin(), z) * rad);
            }
        }
        Shape::Cube { edge } => {
            let h = 0.5 * edge;
            for i in 0..=n {
                for j in 0..=n {
                    let u = -h + edge * i as f64 / n as f64;
                    let v = -h + edge * j as f64 / n as f64;
                    for s in [-h, h] {
                        pts.push(c + Vec3::new(s, u, v));
                        pts.push(c + Vec3::new(u, s, v));
                        pts.push(c + Vec3::new(u, v, s));
                    }
                }
            }
        }
        Shape::Cylinder { diameter, length } => {
            let (rad, h) = (0.5 * diameter, 0.5 * length);
            for i in 0..n {
                let t = 2.0 * PI * i as f64 / n as f64;
                for j in 0..=n {
                    let z = -h + length * j as f64 / n as f64;
                    pts.push(c + Vec3::new(rad * t.cos(), rad * t.sin(), z));
                    let rr = rad * j as f64 / n as f64;
                    for s in [-h, h] {
                        pts.push(c + Vec3::new(rr * t.cos(), rr * t.sin(), s));
                    }
                }
            }
        }
    }
    pts
}

/// Inside test written from the shape definitions.
pub fn contains(object: &SceneObject, p: Vec3) -> bool {
    let q = p - object.center;
    match object.shape {
        Shape::Sphere { diameter } => q.norm() < 0.5 * diameter,
        Shape::Cube { edge } => q.x.abs() < 0.5 * edge && q.y.abs() < 0.5 * edge && q.z.abs() < 0.5 * edge,
        Shape::Cylinder { diameter, length } => {
            q.x.hypot(q.y) < 0.5 * diameter && q.z.abs() < 0.5 * length
        }
    }
}

/// Signed distance by brute force over a surface cloud.
pub fn cloud_sdf(cloud: &[Vec3], inside: bool, p: Vec3) -> f64 {
    let d = cloud.iter().map(|q| (*q - p).norm()).fold(f64::INFINITY, f64::min);
    if inside {
        -d
    } else {
        d
    }
}

/// Complex Fourier coefficient at `freq` of samples `(t, y)`.
pub fn fourier(samples: &[(f64, f64)], freq: f64) -> (f64, f64) {
    let w = 2.0 * PI * freq;
    let (mut re, mut im) = (0.0, 0.0);
    for &(t, y) in samples {
        re += y * (w * t).cos();
        im -= y * (w * t).sin();
    }
    let n = samples.len() as f64;
    (2.0 * re / n, 2.0 * im / n)
}
