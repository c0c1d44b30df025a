//! Polarizer transmission (Malus' law) and the camera image model.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use super::{cos2_deg, check_range, ModelError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalusParams {
    pub i0: f64,
    /// Transmission rate with parallel polarizers.
    pub tp: f64,
    /// Transmission rate with crossed polarizers.
    pub tc: f64,
}

impl Default for MalusParams {
    fn default() -> Self {
        // Averages of the per-color rates below.
        MalusParams { i0: 1.0, tp: (0.29 + 0.35 + 0.33) / 3.0, tc: (0.02 + 0.08 + 0.18) / 3.0 }
    }
}

impl MalusParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.i0 >= 0.0) {
            return Err(ModelError::InvalidParams("i0 must be >= 0".into()));
        }
        if !(0.0 <= self.tc && self.tc < self.tp && self.tp <= 1.0) {
            return Err(ModelError::InvalidParams("need 0 <= tc < tp <= 1".into()));
        }
        Ok(())
    }

    /// Slope and intercept of the equivalent linear model in `cos^2`.
    pub fn betas(&self) -> (f64, f64) {
        (self.i0 * (self.tp - self.tc), self.i0 * self.tc)
    }
}

/// Intensity behind two imperfect polarizers at angles `theta1`, `theta2` (degrees).
pub fn malus_intensity(theta1: f64, theta2: f64, p: &MalusParams) -> f64 {
    p.i0 * ((p.tp - p.tc) * cos2_deg(theta1, theta2) + p.tc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorFidelity {
    /// Ideal polarizers, ideal camera.
    F1,
    /// Adds camera sensor response, white balance and exposure.
    F2,
    /// Adds per-color polarizer transmission.
    F3,
}

impl fmt::Display for ColorFidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ColorFidelity {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(ColorFidelity::F1),
            "F2" => Ok(ColorFidelity::F2),
            "F3" => Ok(ColorFidelity::F3),
            _ => Err(ModelError::UnknownModel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageModelParams {
    pub sensor_matrix: [[f64; 3]; 3],
    pub white_balance: [f64; 3],
    pub exposure: f64,
    pub tp_rgb: [f64; 3],
    pub tc_rgb: [f64; 3],
}

impl Default for ImageModelParams {
    fn default() -> Self {
        ImageModelParams {
            sensor_matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            white_balance: [1.0 / 3.0; 3],
            exposure: 3.0,
            tp_rgb: [0.29, 0.35, 0.33],
            tc_rgb: [0.02, 0.08, 0.18],
        }
    }
}

impl ImageModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidParams(msg.to_string()));
        if self.sensor_matrix.iter().flatten().any(|v| !(*v >= 0.0)) {
            return bad("sensor matrix entries must be >= 0");
        }
        if self.white_balance.iter().any(|v| !(*v >= 0.0))
            || (self.white_balance.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("white balance must be nonnegative and sum to 1");
        }
        if !(self.exposure > 0.0) {
            return bad("exposure must be > 0");
        }
        for c in 0..3 {
            if !(0.0 <= self.tc_rgb[c] && self.tc_rgb[c] < self.tp_rgb[c] && self.tp_rgb[c] <= 1.0) {
                return bad("need 0 <= tc < tp <= 1 per color");
            }
        }
        Ok(())
    }
}

/// Color of the hexagon seen by the camera, each channel in `[0, 1]`.
pub fn camera_color(
    rgb: [f64; 3],
    theta1: f64,
    theta2: f64,
    fidelity: ColorFidelity,
    p: &ImageModelParams,
) -> Result<[f64; 3], ModelError> {
    const NAMES: [&str; 3] = ["red", "green", "blue"];
    for (c, name) in NAMES.iter().enumerate() {
        check_range(name, rgb[c], 0.0, 255.0)?;
    }
    let c2 = cos2_deg(theta1, theta2);
    let transmitted: [f64; 3] = match fidelity {
        ColorFidelity::F1 => return Ok(rgb.map(|v| c2 * v / 255.0)),
        ColorFidelity::F2 => rgb.map(|v| c2 * v / 255.0),
        ColorFidelity::F3 => {
            let mut out = [0.0; 3];
            for c in 0..3 {
                let t = (p.tp_rgb[c] - p.tc_rgb[c]) * c2 + p.tc_rgb[c];
                out[c] = t * rgb[c] / 255.0;
            }
            out
        }
    };
    let mut out = [0.0; 3];
    for (r, row) in p.sensor_matrix.iter().enumerate() {
        let s: f64 = row.iter().zip(transmitted).map(|(a, b)| a * b).sum();
        out[r] = (p.exposure * p.white_balance[r] * s).min(1.0);
    }
    Ok(out)
}

/// Square 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub size: usize,
    /// Row-major RGB triples.
    pub data: Vec<u8>,
}

impl Raster {
    pub fn black(size: usize) -> Raster {
        Raster { size, data: vec![0; size * size * 3] }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.size + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Mean channel values over the whole image, in `[0, 255]`.
    pub fn mean(&self) -> [f64; 3] {
        let mut acc = [0u64; 3];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                acc[c] += px[c] as u64;
            }
        }
        let n = (self.size * self.size).max(1) as f64;
        acc.map(|a| a as f64 / n)
    }

    /// Binary PPM (P6).
    pub fn write_ppm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.size, self.size)?;
        w.write_all(&self.data)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + 20);
        self.write_ppm(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Option<Raster> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return None;
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
        }
        pos += 1;
        let w: usize = fields[1].parse().ok()?;
        let h: usize = fields[2].parse().ok()?;
        if fields[0] != "P6" || fields[3] != "255" || w != h || bytes.len() != pos + w * h * 3 {
            return None;
        }
        Some(Raster { size: w, data: bytes[pos..].to_vec() })
    }
}

pub const MIN_RASTER_SIZE: usize = 16;

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// A centered, flat-topped regular hexagon of the given color on black.
pub fn render_hexagon(color: [f64; 3], size: usize) -> Result<Raster, ModelError> {
    if size < MIN_RASTER_SIZE {
        return Err(ModelError::OutOfRange {
            name: "size",
            value: size as f64,
            range: format!("[{MIN_RASTER_SIZE}, inf)"),
        });
    }
    for v in color {
        if !v.is_finite() {
            return Err(ModelError::NonFinite { name: "color", value: v });
        }
    }
    let px = color.map(quantize);
    let mut raster = Raster::black(size);
    if px == [0, 0, 0] {
        return Ok(raster);
    }
    let r = 0.4 * size as f64;
    let half = size as f64 / 2.0;
    let s3 = 3f64.sqrt();
    for y in 0..size {
        let dy = (y as f64 + 0.5 - half).abs();
        if dy > r * s3 / 2.0 {
            continue;
        }
        for x in 0..size {
            let dx = (x as f64 + 0.5 - half).abs();
            if s3 * dx + dy <= s3 * r {
                let i = (y * size + x) * 3;
                raster.data[i..i + 3].copy_from_slice(&px);
            }
        }
    }
    Ok(raster)
}
