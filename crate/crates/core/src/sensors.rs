//! Measurement layer: turns latent physical quantities into sensor readings.
//!
//! Analog sensors take the maximum number of raw readings (8), quantize each
//! one with a 10-bit ADC and average the first `osr` of them. Light sensors
//! are 16-bit with heteroscedastic noise; barometers are digital and have
//! their own oversampling.
//!
//! All functions draw from the stream they are given and nothing else.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::variables::{Chamber, OSR_VALUES, VREF_SETTINGS};

pub const FULL_SCALE_COUNTS: f64 = 1023.0;
pub const MAX_READINGS: usize = 8;
pub const LIGHT_COUNTS_MAX: f64 = 65535.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("reference voltage setting {0} is not one of 1.1, 2.56, 5")]
    BadVref(f64),
    #[error("oversampling rate {0} is not one of 1, 2, 4, 8")]
    BadOsr(f64),
    #[error("{name} = {value} is outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
}

/// Measured reference voltage for a nominal setting.
pub fn vref_actual(chamber: Chamber, setting: f64) -> Result<f64, SensorError> {
    let table: [f64; 3] = match chamber {
        Chamber::WindTunnel => [1.16, 2.65, 5.0],
        Chamber::LightTunnel => [1.09, 2.55, 5.0],
    };
    VREF_SETTINGS
        .iter()
        .position(|&v| v == setting)
        .map(|i| table[i])
        .ok_or(SensorError::BadVref(setting))
}

pub fn osr_count(osr: f64) -> Result<usize, SensorError> {
    if OSR_VALUES.contains(&osr) {
        Ok(osr as usize)
    } else {
        Err(SensorError::BadOsr(osr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogSensorConfig {
    pub vref_actual: f64,
    pub osr: usize,
    /// Gaussian noise per raw reading, volts.
    pub noise_sigma: f64,
    /// Amplitude of square-wave supply ripple, volts. Each raw reading sees
    /// it at an independent random phase, i.e. as `+ripple` or `-ripple`.
    pub ripple: f64,
}

impl AnalogSensorConfig {
    pub fn new(vref_actual: f64, osr: usize) -> Self {
        AnalogSensorConfig { vref_actual, osr, noise_sigma: 0.0, ripple: 0.0 }
    }

    pub fn with_noise(self, noise_sigma: f64, ripple: f64) -> Self {
        AnalogSensorConfig { noise_sigma, ripple, ..self }
    }
}

fn adc_counts(v: f64, vref: f64) -> f64 {
    (v.clamp(0.0, vref) / vref * FULL_SCALE_COUNTS).floor().min(FULL_SCALE_COUNTS)
}

/// Measure a constant voltage; see [`analog_measure_with`].
pub fn analog_measure<R: Rng + ?Sized>(true_voltage: f64, cfg: &AnalogSensorConfig, rng: &mut R) -> f64 {
    analog_measure_with(cfg, rng, |_| true_voltage)
}

/// Measure a signal whose noise-free value may change from one raw reading
/// to the next (`signal` is called once per reading, in order).
///
/// A reading whose noise-free value is at or above the reference voltage is
/// railed at full scale regardless of noise.
pub fn analog_measure_with<R, F>(cfg: &AnalogSensorConfig, rng: &mut R, mut signal: F) -> f64
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    let mut sum = 0.0;
    for i in 0..MAX_READINGS {
        let clean = signal(rng);
        let mut v = clean;
        if cfg.noise_sigma > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            v += cfg.noise_sigma * z;
        }
        if cfg.ripple > 0.0 {
            v += if rng.random::<bool>() { cfg.ripple } else { -cfg.ripple };
        }
        if i < cfg.osr {
            sum += if clean >= cfg.vref_actual {
                FULL_SCALE_COUNTS
            } else {
                adc_counts(v, cfg.vref_actual)
            };
        }
    }
    sum / cfg.osr as f64
}

fn check_counts(counts: f64) -> Result<(), SensorError> {
    if (0.0..=FULL_SCALE_COUNTS).contains(&counts) {
        Ok(())
    } else {
        Err(SensorError::OutOfRange { name: "counts", value: counts, range: "[0, 1023]" })
    }
}

/// Counts of a current sensor to amperes.
pub fn calibrate_current(counts: f64, vref_actual: f64) -> Result<f64, SensorError> {
    check_counts(counts)?;
    Ok(counts * vref_actual / (FULL_SCALE_COUNTS * 5.0) * 2.5)
}

/// Voltage produced by the current sensor for a current in amperes.
pub fn current_to_volts(amps: f64) -> f64 {
    amps * 2.0
}

/// Counts of a polarizer angle sensor to degrees; `zero` is the count read
/// at 0 degrees with a 5 V reference.
pub fn calibrate_angle(counts: f64, zero: f64, vref_actual: f64) -> Result<f64, SensorError> {
    check_counts(counts)?;
    Ok((counts - zero) * (720.0 / FULL_SCALE_COUNTS) * (vref_actual / 5.0))
}

/// Voltage at the angle potentiometer; inverse of [`calibrate_angle`] at 5 V.
pub fn angle_to_volts(degrees: f64, zero: f64) -> f64 {
    zero * 5.0 / FULL_SCALE_COUNTS + degrees * 5.0 / 720.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LightChannel {
    Infrared,
    Visible,
}

/// Sensitivity multiplier of a light sensor for a photodiode size and
/// exposure setting. Strictly increasing in both.
pub fn light_gain(channel: LightChannel, diode: f64, exposure: f64) -> Result<f64, SensorError> {
    let diodes: &[f64] = match channel {
        LightChannel::Infrared => &[0.25, 0.5, 1.0],
        LightChannel::Visible => &[0.3, 1.0],
    };
    let d = diodes
        .get(diode as usize)
        .filter(|_| diode.fract() == 0.0 && diode >= 0.0)
        .ok_or(SensorError::OutOfRange { name: "diode", value: diode, range: "diode index" })?;
    const EXPOSURE: [f64; 4] = [0.125, 0.25, 0.5, 1.0];
    let e = EXPOSURE
        .get(exposure as usize)
        .filter(|_| exposure.fract() == 0.0 && exposure >= 0.0)
        .ok_or(SensorError::OutOfRange { name: "exposure", value: exposure, range: "{0, 1, 2, 3}" })?;
    Ok(d * e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSensorConfig {
    pub gain: f64,
    pub sigma0: f64,
    pub sigma1: f64,
}

/// 16-bit light reading: `floor(clamp(g x + N(0, (s0 + s1 g x)^2), 0, 65535))`.
pub fn light_measure<R: Rng + ?Sized>(intensity: f64, cfg: &LightSensorConfig, rng: &mut R) -> f64 {
    let x = cfg.gain * intensity.max(0.0);
    let sigma = cfg.sigma0 + cfg.sigma1 * x;
    let noisy = if sigma > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        x + sigma * z
    } else {
        x
    };
    noisy.clamp(0.0, LIGHT_COUNTS_MAX).floor()
}

fn check_byte(name: &'static str, v: f64) -> Result<(), SensorError> {
    if (0.0..=255.0).contains(&v) {
        Ok(())
    } else {
        Err(SensorError::OutOfRange { name, value: v, range: "[0, 255]" })
    }
}

/// Both speaker-signal channels. The speaker plays binary white noise; the
/// two channels see the same bit per raw reading, at amplitudes
/// `v1 = 5 A1 / 255` and `v2 = v1 A2 / 255`.
pub fn speaker_signal<R: Rng + ?Sized>(
    a1: f64,
    a2: f64,
    cfg1: &AnalogSensorConfig,
    cfg2: &AnalogSensorConfig,
    rng: &mut R,
) -> Result<(f64, f64), SensorError> {
    check_byte("A1", a1)?;
    check_byte("A2", a2)?;
    let v1 = 5.0 * a1 / 255.0;
    let v2 = v1 * a2 / 255.0;
    let bits: [bool; MAX_READINGS] = std::array::from_fn(|_| rng.random());
    let mut i = 0;
    let s1 = analog_measure_with(cfg1, rng, |_| {
        i += 1;
        if bits[i - 1] { v1 } else { 0.0 }
    });
    let mut j = 0;
    let s2 = analog_measure_with(cfg2, rng, |_| {
        j += 1;
        if bits[j - 1] { v2 } else { 0.0 }
    });
    Ok((s1, s2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarometerConfig {
    /// Noise of one raw reading, Pa.
    pub sigma: f64,
    /// Output resolution at oversampling 1, Pa; divided by `osr`.
    pub resolution: f64,
    pub osr: usize,
}

/// Digital barometer: average `osr` raw readings, then round to the
/// resolution of that oversampling mode.
pub fn barometer_measure<R: Rng + ?Sized>(pressure: f64, cfg: &BarometerConfig, rng: &mut R) -> f64 {
    let mut sum = 0.0;
    for i in 0..MAX_READINGS {
        let z: f64 = StandardNormal.sample(rng);
        if i < cfg.osr {
            sum += pressure + cfg.sigma * z;
        }
    }
    let mean = sum / cfg.osr as f64;
    let step = cfg.resolution / cfg.osr as f64;
    if step > 0.0 {
        (mean / step).round() * step
    } else {
        mean
    }
}

/// Tachometer reading in RPM. The revolution period is counted in ticks of
/// 1 kHz (`resolution` 0) or 1 MHz (`resolution` 1); `jitter` is the
/// relative standard deviation of the measured period.
pub fn tachometer_rpm<R: Rng + ?Sized>(
    omega: f64,
    resolution: f64,
    jitter: f64,
    rng: &mut R,
) -> Result<f64, SensorError> {
    let tick_hz = if resolution == 0.0 {
        1e3
    } else if resolution == 1.0 {
        1e6
    } else {
        return Err(SensorError::OutOfRange { name: "resolution", value: resolution, range: "{0, 1}" });
    };
    if !(omega > 1e-9) {
        return Ok(0.0);
    }
    let mut period = std::f64::consts::TAU / omega;
    if jitter > 0.0 {
        let n = Normal::new(1.0, jitter).expect("jitter is finite and positive");
        period *= n.sample(rng).max(0.5);
    }
    let ticks = (period * tick_hz).round().max(1.0);
    Ok(60.0 * tick_hz / ticks)
}
