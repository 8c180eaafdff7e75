//! Real spherical harmonics up to degree 3, using the basis ordering and sign
//! conventions of the reference 3D-GS rasterizer.

pub const C0: f32 = 0.282_094_79;
pub const C1: f32 = 0.488_602_5;
pub const C2: [f32; 5] = [
    1.092_548_4,
    -1.092_548_4,
    0.315_391_57,
    -1.092_548_4,
    0.546_274_2,
];
pub const C3: [f32; 7] = [
    -0.590_043_6,
    2.890_611_4,
    -0.457_045_8,
    0.373_176_34,
    -0.457_045_8,
    1.445_305_7,
    -0.590_043_6,
];

/// The 16 basis values for a unit direction.
pub fn basis(dir: [f32; 3]) -> [f32; 16] {
    let [x, y, z] = dir;
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    [
        C0,
        -C1 * y,
        C1 * z,
        -C1 * x,
        C2[0] * xy,
        C2[1] * yz,
        C2[2] * (2.0 * zz - xx - yy),
        C2[3] * xz,
        C2[4] * (xx - yy),
        C3[0] * y * (3.0 * xx - yy),
        C3[1] * xy * z,
        C3[2] * y * (4.0 * zz - xx - yy),
        C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        C3[4] * x * (4.0 * zz - xx - yy),
        C3[5] * z * (xx - yy),
        C3[6] * x * (xx - 3.0 * yy),
    ]
}

/// `0.5 + Σ coeff_k · Y_k(dir)` per color channel, unclamped.
pub fn evaluate_sh(coeffs: &[[f32; 3]; 16], dir: [f32; 3]) -> [f32; 3] {
    let b = basis(dir);
    let mut rgb = [0.0f32; 3];
    for (k, coeff) in coeffs.iter().enumerate() {
        for c in 0..3 {
            rgb[c] += b[k] * coeff[c];
        }
    }
    rgb.map(|v| v + 0.5)
}
