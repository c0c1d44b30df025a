//! The virtual chamber: state, physics in virtual time, interventions and
//! measurement rows.
//!
//! An [`Engine`] owns one chamber. `set` intervenes on a manipulable
//! variable, `wait` advances the virtual clock (integrating the fan
//! dynamics in [`Fidelity::Dynamic`]), and `measure` samples every sensor
//! once. Sensor readings draw from random streams keyed by
//! `(seed, variable, row index)`, so a run is fully determined by its
//! protocol, parameters and seed.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::models::{fan, light, pressure, ModelError, Raster};
use crate::params::Params;
use crate::protocol::{Instruction, Protocol};
use crate::rng::{substream, Stream};
use crate::sensors::{self, AnalogSensorConfig, BarometerConfig, LightChannel, LightSensorConfig, SensorError};
use crate::variables::{Chamber, ChamberVariable, ColumnType, Config, VariableError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Variable(#[from] VariableError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("{what} became non-finite at t = {clock} s")]
    NonFinite { what: &'static str, clock: f64 },
    #[error("{0} cannot be overridden in this configuration")]
    NotOverridable(String),
    #[error("duration {0} s must be finite and >= 0")]
    BadDuration(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fidelity {
    /// Fans jump to the steady-state speed of their load.
    SteadyState,
    /// Fan speeds follow the torque balance in virtual time.
    Dynamic,
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fidelity::SteadyState => "steady_state",
            Fidelity::Dynamic => "dynamic",
        })
    }
}

impl FromStr for Fidelity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "steady_state" => Ok(Fidelity::SteadyState),
            "dynamic" => Ok(Fidelity::Dynamic),
            other => Err(format!("unknown fidelity '{other}' (expected steady_state or dynamic)")),
        }
    }
}

/// Extra columns appended in the pressure-control configuration.
pub const PID_COLUMNS: [&str; 8] = [
    "pid_target",
    "pid_kp",
    "pid_ki",
    "pid_kd",
    "pid_output",
    "pid_error",
    "pid_error_sum",
    "pid_error_diff",
];

/// One measurement of every variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub timestamp: f64,
    /// Set on the first row after any intervention.
    pub intervention: bool,
    /// Aligned with [`Engine::columns`]; NaN in the image column.
    pub values: Vec<f64>,
    pub image: Option<Raster>,
    /// Aligned with [`Engine::extra_columns`].
    pub extra: Vec<f64>,
}

/// Discrete PID controller, one step per call.
#[derive(Debug, Clone, PartialEq)]
pub struct Pid {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub target: Option<f64>,
    pub error_sum: f64,
    pub prev_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidStep {
    pub target: f64,
    pub output: f64,
    pub error: f64,
    pub error_sum: f64,
    pub error_diff: f64,
}

impl PidStep {
    /// Loads of the intake and exhaust fans for this output.
    pub fn loads(&self) -> (f64, f64) {
        let u = self.output;
        (if u > 0.0 { u.min(1.0) } else { 0.0 }, if u < 0.0 { (-u).min(1.0) } else { 0.0 })
    }
}

impl Pid {
    pub fn new(kp: f64, ki: f64, kd: f64, target: Option<f64>) -> Self {
        Pid { kp, ki, kd, target, error_sum: 0.0, prev_error: 0.0 }
    }

    /// `e = T - measured`, `u = kp e + ki sum(e) + kd (e - e_prev)`. Without
    /// a target, the first measurement becomes the target.
    pub fn step(&mut self, measured: f64) -> PidStep {
        let target = *self.target.get_or_insert(measured);
        let error = target - measured;
        self.error_sum += error;
        let error_diff = error - self.prev_error;
        self.prev_error = error;
        let output = self.kp * error + self.ki * self.error_sum + self.kd * error_diff;
        PidStep { target, output, error, error_sum: self.error_sum, error_diff }
    }
}

macro_rules! slots {
    ($name:ident { $($field:ident),* $(,)? }) => {
        #[derive(Debug, Clone)]
        struct $name { $($field: usize),* }
        impl $name {
            fn new(chamber: Chamber) -> Self {
                let vars = chamber.variables();
                let at = |id: &str| vars.iter().position(|v| v.id == id).expect("variable table entry");
                $name { $($field: at(stringify!($field))),* }
            }
        }
    };
}

slots!(WtSlots {
    load_in, load_out, current_in, current_out, rpm_in, rpm_out, res_in, res_out,
    pressure_upwind, pressure_downwind, pressure_ambient, pressure_intake,
    pot_1, pot_2, signal_1, signal_2, hatch, mic,
    v_in, v_out, v_1, v_2, v_mic,
    osr_in, osr_out, osr_1, osr_2, osr_mic, osr_upwind, osr_downwind, osr_ambient, osr_intake,
});

slots!(LtSlots {
    red, green, blue, current, ir_1, ir_2, ir_3, vis_1, vis_2, vis_3,
    diode_ir_1, diode_ir_2, diode_ir_3, diode_vis_1, diode_vis_2, diode_vis_3,
    t_ir_1, t_ir_2, t_ir_3, t_vis_1, t_vis_2, t_vis_3,
    l_11, l_12, l_21, l_22, l_31, l_32, pol_1, pol_2, angle_1, angle_2,
    v_c, v_angle_1, v_angle_2, osr_c, osr_angle_1, osr_angle_2,
    aperture, iso, shutter_speed,
});

#[derive(Debug, Clone)]
enum Slots {
    Wind(WtSlots),
    Light(LtSlots),
}

#[derive(Debug, Clone)]
pub struct Engine {
    config: Config,
    params: Params,
    fidelity: Fidelity,
    seed: u64,
    vars: &'static [ChamberVariable],
    /// Chamber-table indices of the dataset columns.
    columns: Vec<usize>,
    slots: Slots,
    /// Indexed like the chamber table. Sensors hold their last reading.
    values: Vec<f64>,
    overrides: Vec<(usize, f64)>,
    frozen: [bool; 2],
    clock: f64,
    omega: [f64; 2],
    last_rpm: [f64; 2],
    ambient_offset: f64,
    row_index: u64,
    drift_index: u64,
    intervention_pending: bool,
    pid: Option<Pid>,
    last_pid: Option<PidStep>,
}

impl Engine {
    pub fn new(config: Config, params: Params, fidelity: Fidelity, seed: u64) -> Result<Engine, EngineError> {
        params.validate().map_err(|e| EngineError::Params(e.to_string()))?;
        let chamber = config.chamber();
        let vars = chamber.variables();
        let columns = vars
            .iter()
            .enumerate()
            .filter(|(_, v)| config.has_camera() || !v.camera_only)
            .map(|(i, _)| i)
            .collect();
        let slots = match chamber {
            Chamber::WindTunnel => Slots::Wind(WtSlots::new(chamber)),
            Chamber::LightTunnel => Slots::Light(LtSlots::new(chamber)),
        };
        let pid = (config == Config::WtPressureControl)
            .then(|| Pid::new(params.pid.kp, params.pid.ki, params.pid.kd, params.pid.target));
        Ok(Engine {
            config,
            params,
            fidelity,
            seed,
            vars,
            columns,
            slots,
            values: vars.iter().map(|v| v.default).collect(),
            overrides: Vec::new(),
            frozen: [false; 2],
            clock: 0.0,
            omega: [0.0; 2],
            last_rpm: [0.0; 2],
            ambient_offset: 0.0,
            row_index: 0,
            drift_index: 0,
            intervention_pending: false,
            pid,
            last_pid: None,
        })
    }

    pub fn config(&self) -> Config {
        self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn fidelity(&self) -> Fidelity {
        self.fidelity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Current angular speeds of the intake and exhaust fans, rad/s, before
    /// coupling.
    pub fn fan_speeds(&self) -> [f64; 2] {
        match self.fidelity {
            Fidelity::Dynamic => self.omega,
            Fidelity::SteadyState => match &self.slots {
                Slots::Wind(s) => [self.values[s.load_in], self.values[s.load_out]]
                    .map(|l| fan::steady_speed(l, &self.params.fan).unwrap_or(0.0)),
                Slots::Light(_) => [0.0; 2],
            },
        }
    }

    /// Dataset column names, in order (excluding timestamp and intervention).
    pub fn columns(&self) -> impl Iterator<Item = &'static ChamberVariable> + '_ {
        self.columns.iter().map(|&i| &self.vars[i])
    }

    pub fn extra_columns(&self) -> &'static [&'static str] {
        if self.pid.is_some() { &PID_COLUMNS } else { &[] }
    }

    /// Current value of a variable (last reading for sensors).
    pub fn value(&self, id: &str) -> Result<f64, EngineError> {
        self.config.variable(id)?;
        Ok(self.values[self.index(id)])
    }

    fn index(&self, id: &str) -> usize {
        self.vars.iter().position(|v| v.id == id).expect("checked by config.variable")
    }

    /// Intervene on a manipulable variable. In pressure control, an
    /// intervened fan load is no longer written by the controller until
    /// [`Engine::release`].
    pub fn set(&mut self, id: &str, value: f64) -> Result<(), EngineError> {
        let var = self.config.variable(id)?;
        var.check_settable(value)?;
        let i = self.index(id);
        self.values[i] = value;
        if let Slots::Wind(s) = &self.slots {
            if i == s.load_in {
                self.frozen[0] = true;
            } else if i == s.load_out {
                self.frozen[1] = true;
            }
        }
        self.intervention_pending = true;
        Ok(())
    }

    /// Apply several interventions at once. An empty list changes nothing.
    pub fn intervene(&mut self, assignments: &[(&str, f64)]) -> Result<(), EngineError> {
        for (id, _) in assignments {
            let var = self.config.variable(id)?;
            if var.is_sensor() {
                return Err(VariableError::NotSettable(id.to_string()).into());
            }
        }
        for (id, v) in assignments {
            self.set(id, *v)?;
        }
        Ok(())
    }

    /// Hand an intervened fan load back to the pressure controller.
    pub fn release(&mut self, id: &str) -> Result<(), EngineError> {
        self.config.variable(id)?;
        if let Slots::Wind(s) = &self.slots {
            let i = self.index(id);
            if i == s.load_in {
                self.frozen[0] = false;
            } else if i == s.load_out {
                self.frozen[1] = false;
            }
        }
        Ok(())
    }

    /// Replace a sensor's reading by a fixed value. Only the downwind
    /// barometer can be overridden, and only under pressure control, where
    /// its reading feeds the controller.
    pub fn override_sensor(&mut self, id: &str, value: f64) -> Result<(), EngineError> {
        self.config.variable(id)?;
        if self.config != Config::WtPressureControl || id != "pressure_downwind" || !value.is_finite() {
            return Err(EngineError::NotOverridable(id.to_string()));
        }
        let i = self.index(id);
        self.overrides.retain(|(j, _)| *j != i);
        self.overrides.push((i, value));
        self.intervention_pending = true;
        Ok(())
    }

    pub fn clear_overrides(&mut self) {
        self.overrides.clear();
    }

    /// Advance virtual time by `seconds`.
    pub fn wait(&mut self, seconds: f64) -> Result<(), EngineError> {
        self.advance(seconds)?;
        self.clock += seconds;
        Ok(())
    }

    fn advance(&mut self, seconds: f64) -> Result<(), EngineError> {
        if !(seconds >= 0.0) || !seconds.is_finite() {
            return Err(EngineError::BadDuration(seconds));
        }
        if seconds == 0.0 {
            return Ok(());
        }
        if let Slots::Wind(s) = &self.slots {
            if self.fidelity == Fidelity::Dynamic {
                let loads = [self.values[s.load_in], self.values[s.load_out]];
                for k in 0..2 {
                    self.omega[k] =
                        fan::integrate_speed(self.omega[k], loads[k], seconds, self.params.dt, &self.params.fan)?;
                    if !self.omega[k].is_finite() {
                        return Err(EngineError::NonFinite { what: "fan speed", clock: self.clock });
                    }
                }
            }
            if self.params.ambient_drift > 0.0 {
                let mut rng = substream(self.seed, "ambient_drift", self.drift_index);
                self.drift_index += 1;
                let z: f64 = StandardNormal.sample(&mut rng);
                self.ambient_offset += self.params.ambient_drift * seconds.sqrt() * z;
            }
        }
        Ok(())
    }

    fn stream(&self, key: &str) -> Stream {
        substream(self.seed, key, self.row_index)
    }

    /// Sample every sensor once and return the row at the current clock.
    /// Does not advance the clock.
    pub fn measure(&mut self) -> Result<Row, EngineError> {
        match self.slots.clone() {
            Slots::Wind(s) => self.measure_wind(&s)?,
            Slots::Light(s) => self.measure_light(&s)?,
        }
        for &(i, v) in &self.overrides {
            self.values[i] = v;
        }
        let mut extra = Vec::new();
        if let (Some(pid), Slots::Wind(s)) = (self.pid.as_mut(), &self.slots) {
            let step = pid.step(self.values[s.pressure_downwind]);
            let (l_in, l_out) = step.loads();
            if !self.frozen[0] {
                self.values[s.load_in] = l_in;
            }
            if !self.frozen[1] {
                self.values[s.load_out] = l_out;
            }
            extra = vec![
                step.target,
                pid.kp,
                pid.ki,
                pid.kd,
                step.output,
                step.error,
                step.error_sum,
                step.error_diff,
            ];
            self.last_pid = Some(step);
        }
        let image = match &self.slots {
            Slots::Light(s) if self.config.has_camera() => Some(self.render_image(s)?),
            _ => None,
        };
        let values = self
            .columns
            .iter()
            .map(|&i| if self.vars[i].column_type == ColumnType::Image { f64::NAN } else { self.values[i] })
            .collect();
        let row = Row {
            timestamp: self.clock,
            intervention: std::mem::take(&mut self.intervention_pending),
            values,
            image,
            extra,
        };
        self.row_index += 1;
        Ok(row)
    }

    /// Emit `count` rows spaced `1/hz` apart starting now. The clock ends at
    /// `start + count / hz`.
    pub fn measure_many(&mut self, count: u64, hz: f64) -> Result<Vec<Row>, EngineError> {
        let mut out = Vec::with_capacity(count as usize);
        let mut msr = self.start_msr(count, hz)?;
        while let Some(row) = self.next_msr_row(&mut msr) {
            out.push(row?);
        }
        Ok(out)
    }

    fn start_msr(&self, count: u64, hz: f64) -> Result<MsrState, EngineError> {
        let max = self.config.chamber().max_rate_hz();
        if !(hz > 0.0 && hz <= max) || count == 0 {
            return Err(EngineError::Params(format!("MSR needs count >= 1 and 0 < hz <= {max}")));
        }
        Ok(MsrState { start: self.clock, count, hz, k: 0 })
    }

    fn next_msr_row(&mut self, msr: &mut MsrState) -> Option<Result<Row, EngineError>> {
        if msr.k >= msr.count {
            return None;
        }
        self.clock = msr.start + msr.k as f64 / msr.hz;
        let row = self.measure();
        msr.k += 1;
        let row = row.and_then(|r| {
            self.advance(1.0 / msr.hz)?;
            Ok(r)
        });
        self.clock = msr.start + msr.k as f64 / msr.hz;
        Some(row)
    }

    /// Execute one non-measuring instruction (SEED is ignored here; it only
    /// matters when the engine is created).
    fn execute(&mut self, ins: &Instruction) -> Result<(), EngineError> {
        match ins {
            Instruction::Seed(_) | Instruction::Msr { .. } => Ok(()),
            Instruction::Set { variable, value } => self.set(variable, *value),
            Instruction::Wait { ms } => self.wait(*ms as f64 / 1000.0),
        }
    }

    /// Lazily run a protocol's instructions against this engine.
    pub fn run<'a>(&'a mut self, protocol: &'a Protocol) -> ProtocolRun<'a> {
        ProtocolRun { engine: self, instructions: &protocol.instructions, pc: 0, msr: None, failed: false }
    }

    fn analog(&self, vref_slot: usize, osr_slot: usize) -> Result<AnalogSensorConfig, EngineError> {
        let vref = sensors::vref_actual(self.config.chamber(), self.values[vref_slot])?;
        let osr = sensors::osr_count(self.values[osr_slot])?;
        Ok(AnalogSensorConfig::new(vref, osr).with_noise(self.params.analog.sigma, self.params.analog.ripple))
    }

    fn barometer(&self, osr_slot: usize) -> Result<BarometerConfig, EngineError> {
        Ok(BarometerConfig {
            sigma: self.params.barometer.sigma,
            resolution: self.params.barometer.resolution,
            osr: sensors::osr_count(self.values[osr_slot])?,
        })
    }

    /// Fan speeds after mutual coupling, rad/s.
    pub fn coupled_speeds(&self) -> [f64; 2] {
        let [w_in, w_out] = self.fan_speeds();
        let w_max = self.params.fan.omega_max;
        let h = match &self.slots {
            Slots::Wind(s) => self.values[s.hatch],
            Slots::Light(_) => 0.0,
        };
        let kappa = self.params.coupling.fan * (1.0 - self.params.coupling.hatch * h / 45.0);
        let couple = |w: f64, other: f64| (w * (1.0 + kappa * other / w_max)).min(w_max);
        [couple(w_in, w_out), couple(w_out, w_in)]
    }

    /// Noise-free downwind pressure, Pa.
    pub fn true_downwind_pressure(&self) -> Result<f64, EngineError> {
        let Slots::Wind(s) = &self.slots else { return Ok(f64::NAN) };
        let [w_in, w_out] = self.coupled_speeds();
        let p = pressure::PressureParams {
            p_amb: self.params.pressure.p_amb + self.ambient_offset,
            ..self.params.pressure
        };
        Ok(pressure::downwind_pressure_hatch(w_in, w_out, self.values[s.hatch], self.params.fan.omega_max, &p)?)
    }

    fn measure_wind(&mut self, s: &WtSlots) -> Result<(), EngineError> {
        let p = &self.params;
        let v = &self.values;
        let [w_in, w_out] = self.coupled_speeds();
        let w_max = p.fan.omega_max;
        let (x_in, x_out) = (w_in / w_max, w_out / w_max);
        let (l_in, l_out, hatch) = (v[s.load_in], v[s.load_out], v[s.hatch]);

        let c_min = p.fan.c_min;
        let i_in = fan::drawn_current(l_in, &p.fan)?;
        let i_out = fan::drawn_current(l_out, &p.fan)?;
        let k = p.coupling.supply;
        let amps_in = i_in - k * (i_out - c_min);
        let amps_out = i_out - k * (i_in - c_min);
        let current_in = sensors::analog_measure(
            sensors::current_to_volts(amps_in),
            &self.analog(s.v_in, s.osr_in)?,
            &mut self.stream("current_in"),
        );
        let current_out = sensors::analog_measure(
            sensors::current_to_volts(amps_out),
            &self.analog(s.v_out, s.osr_out)?,
            &mut self.stream("current_out"),
        );

        // No tachometer signal from an unpowered fan: keep the last reading.
        let mut rpm = self.last_rpm;
        for (k, (load, w, res, key)) in
            [(l_in, w_in, s.res_in, "rpm_in"), (l_out, w_out, s.res_out, "rpm_out")].into_iter().enumerate()
        {
            if load > 0.0 {
                rpm[k] = sensors::tachometer_rpm(w, v[res], p.tachometer_jitter, &mut self.stream(key))?;
            }
        }

        let p_dw = self.true_downwind_pressure()?;
        let p_up = p_dw + pressure::pitot_difference(w_in, &p.bernoulli)?;
        let p_amb = p.pressure.p_amb + self.ambient_offset;
        let p_int = p_amb - p.intake.k_in * x_in * x_in * (1.0 - p.intake.hatch * hatch / 45.0)
            - p.intake.k_out * x_out * x_out;
        let baro = |slot: usize, pressure: f64, key: &str| -> Result<f64, EngineError> {
            Ok(sensors::barometer_measure(pressure, &self.barometer(slot)?, &mut self.stream(key)))
        };
        let readings_p = [
            baro(s.osr_upwind, p_up, "pressure_upwind")?,
            baro(s.osr_downwind, p_dw, "pressure_downwind")?,
            baro(s.osr_ambient, p_amb, "pressure_ambient")?,
            baro(s.osr_intake, p_int, "pressure_intake")?,
        ];

        let (a1, a2) = (v[s.pot_1], v[s.pot_2]);
        let (signal_1, signal_2) = sensors::speaker_signal(
            a1,
            a2,
            &self.analog(s.v_1, s.osr_1)?,
            &self.analog(s.v_2, s.osr_2)?,
            &mut self.stream("signal"),
        )?;

        let m = p.mic;
        let damping = 1.0 - m.hatch_damping * hatch / 45.0;
        let fan_level = m.fan_gain * (x_in * x_in + x_out * x_out) / 2.0;
        let speaker = m.speaker_gain * a1 / 255.0;
        let mic = sensors::analog_measure_with(&self.analog(s.v_mic, s.osr_mic)?, &mut self.stream("mic"), |rng| {
            let bit = if rng.random::<bool>() { 1.0 } else { 0.0 };
            let u: f64 = rng.random();
            damping * (m.baseline + speaker * bit + fan_level * u)
        });

        let v = &mut self.values;
        v[s.current_in] = current_in;
        v[s.current_out] = current_out;
        v[s.rpm_in] = rpm[0];
        v[s.rpm_out] = rpm[1];
        v[s.pressure_upwind] = readings_p[0];
        v[s.pressure_downwind] = readings_p[1];
        v[s.pressure_ambient] = readings_p[2];
        v[s.pressure_intake] = readings_p[3];
        v[s.signal_1] = signal_1;
        v[s.signal_2] = signal_2;
        v[s.mic] = mic;
        self.last_rpm = rpm;
        if readings_p.iter().any(|x| !x.is_finite()) {
            return Err(EngineError::NonFinite { what: "pressure", clock: self.clock });
        }
        Ok(())
    }

    /// Light reaching sensor `k` (1-based) for a channel, before gain.
    fn light_intensity(&self, s: &LtSlots, k: usize, channel: LightChannel) -> f64 {
        let p = &self.params;
        let v = &self.values;
        let rgb = [v[s.red], v[s.green], v[s.blue]].map(|c| c / 255.0);
        let sens = match channel {
            LightChannel::Infrared => p.light.ir_sensitivity,
            LightChannel::Visible => p.light.vis_sensitivity,
        };
        let c2 = crate::models::cos2_deg(v[s.pol_1], v[s.pol_2]);
        let mut source = 0.0;
        for c in 0..3 {
            let t = match k {
                1 => 1.0,
                2 => p.light.sensor2_factor,
                _ => (p.image.tp_rgb[c] - p.image.tc_rgb[c]) * c2 + p.image.tc_rgb[c],
            };
            source += sens[c] * rgb[c] * t;
        }
        let leds = match k {
            1 => [v[s.l_11], v[s.l_12]],
            2 => [v[s.l_21], v[s.l_22]],
            _ => [v[s.l_31], v[s.l_32]],
        };
        let led: f64 = leds.iter().map(|l| p.light.led_a * ((p.light.led_b * l / 255.0).exp() - 1.0)).sum();
        source + led
    }

    fn measure_light(&mut self, s: &LtSlots) -> Result<(), EngineError> {
        let p = &self.params;
        let v = &self.values;
        let rgb = [v[s.red], v[s.green], v[s.blue]];
        let amps = p.light.current_idle
            + (0..3).map(|c| p.light.current_rgb[c] * rgb[c] / 255.0).sum::<f64>();
        let current = sensors::analog_measure(
            sensors::current_to_volts(amps),
            &self.analog(s.v_c, s.osr_c)?,
            &mut self.stream("current"),
        );
        let mut angles = [0.0; 2];
        for (k, (pol, vref, osr, key)) in [
            (s.pol_1, s.v_angle_1, s.osr_angle_1, "angle_1"),
            (s.pol_2, s.v_angle_2, s.osr_angle_2, "angle_2"),
        ]
        .into_iter()
        .enumerate()
        {
            let volts = sensors::angle_to_volts(v[pol], p.angle_zero[k]);
            angles[k] = sensors::analog_measure(volts, &self.analog(vref, osr)?, &mut self.stream(key));
        }
        let sensors_spec = [
            (s.ir_1, 1, LightChannel::Infrared, s.diode_ir_1, s.t_ir_1, "ir_1"),
            (s.ir_2, 2, LightChannel::Infrared, s.diode_ir_2, s.t_ir_2, "ir_2"),
            (s.ir_3, 3, LightChannel::Infrared, s.diode_ir_3, s.t_ir_3, "ir_3"),
            (s.vis_1, 1, LightChannel::Visible, s.diode_vis_1, s.t_vis_1, "vis_1"),
            (s.vis_2, 2, LightChannel::Visible, s.diode_vis_2, s.t_vis_2, "vis_2"),
            (s.vis_3, 3, LightChannel::Visible, s.diode_vis_3, s.t_vis_3, "vis_3"),
        ];
        let mut light = [0.0; 6];
        for (n, &(_, k, ch, diode, exposure, key)) in sensors_spec.iter().enumerate() {
            let cfg = LightSensorConfig {
                gain: sensors::light_gain(ch, v[diode], v[exposure])?,
                sigma0: p.light.sigma0,
                sigma1: p.light.sigma1,
            };
            light[n] = sensors::light_measure(self.light_intensity(s, k, ch), &cfg, &mut self.stream(key));
        }
        self.values[s.current] = current;
        self.values[s.angle_1] = angles[0];
        self.values[s.angle_2] = angles[1];
        for (n, spec) in sensors_spec.iter().enumerate() {
            self.values[spec.0] = light[n];
        }
        Ok(())
    }

    /// Camera exposure factor for the current aperture, ISO and shutter.
    pub fn camera_exposure(&self) -> f64 {
        let Slots::Light(s) = &self.slots else { return f64::NAN };
        let v = &self.values;
        self.params.camera.exposure_ref
            * (v[s.iso] / 500.0)
            * (v[s.shutter_speed] / 1e-3)
            * (5.6 / v[s.aperture]).powi(2)
    }

    fn render_image(&self, s: &LtSlots) -> Result<Raster, EngineError> {
        let v = &self.values;
        let params = light::ImageModelParams { exposure: self.camera_exposure(), ..self.params.image };
        let color = light::camera_color(
            [v[s.red], v[s.green], v[s.blue]],
            v[s.pol_1],
            v[s.pol_2],
            self.params.camera.fidelity,
            &params,
        )?;
        Ok(light::render_hexagon(color, self.params.camera.size)?)
    }

    /// Last controller step (pressure control only).
    pub fn last_pid_step(&self) -> Option<PidStep> {
        self.last_pid
    }
}

#[derive(Debug, Clone, Copy)]
struct MsrState {
    start: f64,
    count: u64,
    hz: f64,
    k: u64,
}

/// Row stream of a protocol run; stops after the first error.
pub struct ProtocolRun<'a> {
    engine: &'a mut Engine,
    instructions: &'a [Instruction],
    pc: usize,
    msr: Option<MsrState>,
    failed: bool,
}

impl ProtocolRun<'_> {
    pub fn engine(&self) -> &Engine {
        self.engine
    }
}

impl Iterator for ProtocolRun<'_> {
    type Item = Result<Row, EngineError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            if let Some(mut msr) = self.msr.take() {
                if let Some(row) = self.engine.next_msr_row(&mut msr) {
                    self.msr = Some(msr);
                    self.failed = row.is_err();
                    return Some(row);
                }
            }
            let ins = self.instructions.get(self.pc)?;
            self.pc += 1;
            let result = match ins {
                Instruction::Msr { count, hz } => self.engine.start_msr(*count, *hz).map(|m| self.msr = Some(m)),
                other => self.engine.execute(other),
            };
            if let Err(e) = result {
                self.failed = true;
                return Some(Err(e));
            }
        }
    }
}

/// Seed used for a run: an explicit override, else the protocol's SEED,
/// else 0.
pub fn effective_seed(protocol: &Protocol, seed_override: Option<u64>) -> u64 {
    seed_override.or(protocol.seed()).unwrap_or(0)
}

/// Validate a protocol and create the engine that will run it.
pub fn engine_for(
    protocol: &Protocol,
    params: Params,
    fidelity: Fidelity,
    seed_override: Option<u64>,
) -> Result<Engine, EngineError> {
    protocol.validate().map_err(|e| EngineError::Params(e.to_string()))?;
    Engine::new(protocol.config, params, fidelity, effective_seed(protocol, seed_override))
}

/// Run a protocol to completion and collect its rows.
pub fn run_protocol(
    protocol: &Protocol,
    params: Params,
    fidelity: Fidelity,
    seed_override: Option<u64>,
) -> Result<Vec<Row>, EngineError> {
    let mut engine = engine_for(protocol, params, fidelity, seed_override)?;
    engine.run(protocol).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::parse_protocol;

    fn quiet() -> Params {
        let mut p = Params::default();
        p.analog.sigma = 0.0;
        p.analog.ripple = 0.0;
        p.light.sigma0 = 0.0;
        p.light.sigma1 = 0.0;
        p.barometer.sigma = 0.0;
        p.tachometer_jitter = 0.0;
        p
    }

    fn col(engine: &Engine, row: &Row, id: &str) -> f64 {
        let i = engine.columns().position(|v| v.id == id).unwrap();
        row.values[i]
    }

    #[test]
    fn pid_examples() {
        let mut pid = Pid::new(0.5, 0.1, 1e-3, Some(100.0));
        let step = pid.step(97.0);
        assert!((step.output - 1.803).abs() < 1e-12);
        assert_eq!(step.loads(), (1.0, 0.0));
        let mut pid = Pid::new(0.5, 0.1, 1e-3, Some(100.0));
        let step = pid.step(103.0);
        assert_eq!(step.loads(), (0.0, 1.0));
        let mut pid = Pid::new(0.5, 0.1, 1e-3, Some(100.0));
        for _ in 0..5 {
            assert_eq!(pid.step(100.0).loads(), (0.0, 0.0));
        }
        let mut pid = Pid::new(0.5, 0.1, 1e-3, None);
        assert_eq!(pid.step(42.0).target, 42.0);
    }

    #[test]
    fn full_load_reads_3000_rpm() {
        let p = parse_protocol("CHAMBER,wt,standard\nSET,load_in,1\nWAIT,10000\nMSR,1,7").unwrap();
        let mut e = engine_for(&p, quiet(), Fidelity::SteadyState, None).unwrap();
        let rows: Vec<Row> = e.run(&p).collect::<Result<_, _>>().unwrap();
        assert_eq!(col(&e, &rows[0], "rpm_in"), 3000.0);
        assert!(rows[0].intervention);
        assert_eq!(rows[0].timestamp, 10.0);
    }

    #[test]
    fn tachometer_holds_last_value() {
        let p = parse_protocol(
            "CHAMBER,wt,standard\nSET,load_in,1\nWAIT,20000\nMSR,1,7\nSET,load_in,0\nWAIT,5000\nMSR,2,7",
        )
        .unwrap();
        for fidelity in [Fidelity::SteadyState, Fidelity::Dynamic] {
            let mut e = engine_for(&p, quiet(), fidelity, None).unwrap();
            let rows: Vec<Row> = e.run(&p).collect::<Result<_, _>>().unwrap();
            let spun = col(&e, &rows[0], "rpm_in");
            assert!(spun > 2900.0, "{fidelity}: {spun}");
            assert_eq!(col(&e, &rows[1], "rpm_in"), spun);
            assert_eq!(col(&e, &rows[2], "rpm_in"), spun);
            assert!(rows[1].intervention && !rows[2].intervention);
        }
    }

    #[test]
    fn dark_light_tunnel_reads_zero() {
        let p = parse_protocol("CHAMBER,lt,standard\nMSR,3,10").unwrap();
        let mut e = engine_for(&p, quiet(), Fidelity::SteadyState, None).unwrap();
        let rows: Vec<Row> = e.run(&p).collect::<Result<_, _>>().unwrap();
        for row in &rows {
            assert_eq!(col(&e, row, "ir_3"), 0.0);
            assert_eq!(col(&e, row, "vis_3"), 0.0);
            assert!(!row.intervention);
        }
        let ts: Vec<f64> = rows.iter().map(|r| r.timestamp).collect();
        assert_eq!(ts, vec![0.0, 0.1, 0.2]);
        assert!((e.clock() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn clock_advances_by_count_over_hz() {
        let mut e = Engine::new(Config::WtStandard, Params::default(), Fidelity::SteadyState, 1).unwrap();
        e.wait(1.5).unwrap();
        e.measure_many(7, 7.0).unwrap();
        assert_eq!(e.clock(), 2.5);
        e.measure_many(3, 6.0).unwrap();
        assert_eq!(e.clock(), 3.0);
        assert!(e.measure_many(1, 8.0).is_err());
        assert!(e.wait(-1.0).is_err());
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let text = "CHAMBER,lt,camera\nSET,red,200\nSET,pol_1,45\nMSR,5,10\nSET,l_31,100\nMSR,5,10";
        let p = parse_protocol(text).unwrap();
        let a = run_protocol(&p, Params::default(), Fidelity::Dynamic, Some(9)).unwrap();
        let b = run_protocol(&p, Params::default(), Fidelity::Dynamic, Some(9)).unwrap();
        let same_nan = |x: &Row, y: &Row| {
            x.values.iter().zip(&y.values).all(|(a, b)| a.to_bits() == b.to_bits()) && x.image == y.image
        };
        assert!(a.iter().zip(&b).all(|(x, y)| same_nan(x, y)));
        let c = run_protocol(&p, Params::default(), Fidelity::Dynamic, Some(10)).unwrap();
        assert!(!a.iter().zip(&c).all(|(x, y)| same_nan(x, y)));
        assert!(a[0].image.is_some());
    }

    #[test]
    fn seed_precedence() {
        let p = parse_protocol("CHAMBER,wt,standard\nSEED,5\nMSR,1,1").unwrap();
        assert_eq!(effective_seed(&p, None), 5);
        assert_eq!(effective_seed(&p, Some(6)), 6);
        let q = parse_protocol("CHAMBER,wt,standard\nMSR,1,1").unwrap();
        assert_eq!(effective_seed(&q, None), 0);
    }

    #[test]
    fn interventions() {
        let mut e = Engine::new(Config::WtPressureControl, quiet(), Fidelity::SteadyState, 0).unwrap();
        e.intervene(&[]).unwrap();
        assert!(!e.measure().unwrap().intervention);
        e.intervene(&[("load_in", 0.3)]).unwrap();
        for _ in 0..5 {
            e.measure().unwrap();
            assert_eq!(e.value("load_in").unwrap(), 0.3);
        }
        e.release("load_in").unwrap();
        e.override_sensor("pressure_downwind", 0.0).unwrap();
        e.measure().unwrap();
        assert_eq!(e.value("pressure_downwind").unwrap(), 0.0);
        assert!(e.intervene(&[("rpm_in", 1.0)]).is_err());
        assert!(e.set("load_in", 2.0).is_err());
        assert!(e.override_sensor("rpm_in", 1.0).is_err());
        let mut plain = Engine::new(Config::WtStandard, quiet(), Fidelity::SteadyState, 0).unwrap();
        assert!(plain.override_sensor("pressure_downwind", 1.0).is_err());
    }

    #[test]
    fn same_seed_same_row_regardless_of_history() {
        let mut a = Engine::new(Config::LtStandard, Params::default(), Fidelity::SteadyState, 3).unwrap();
        a.set("pol_1", 45.0).unwrap();
        let r1 = a.measure().unwrap();
        let mut b = Engine::new(Config::LtStandard, Params::default(), Fidelity::SteadyState, 3).unwrap();
        b.set("pol_1", 45.0).unwrap();
        let r2 = b.measure().unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn pressure_control_converges() {
        let mut p = quiet();
        p.pid.target = Some(p.pressure.p_amb + 10.0);
        let mut e = Engine::new(Config::WtPressureControl, p.clone(), Fidelity::Dynamic, 0).unwrap();
        e.set("osr_downwind", 8.0).unwrap();
        let rows = e.measure_many(7 * 60, 7.0).unwrap();
        let i = e.columns().position(|v| v.id == "pressure_downwind").unwrap();
        let tail = &rows[rows.len() - 7..];
        for r in tail {
            assert!((r.values[i] - (p.pressure.p_amb + 10.0)).abs() < 1.0, "{}", r.values[i]);
        }
        assert_eq!(e.extra_columns().len(), 8);
        assert_eq!(rows[0].extra.len(), 8);
    }

    #[test]
    fn pid_extra_columns_absent_elsewhere() {
        let mut e = Engine::new(Config::WtStandard, quiet(), Fidelity::SteadyState, 0).unwrap();
        assert!(e.extra_columns().is_empty());
        assert!(e.measure().unwrap().extra.is_empty());
    }

    #[test]
    fn camera_exposure_reference() {
        let e = Engine::new(Config::LtCamera, quiet(), Fidelity::SteadyState, 0).unwrap();
        assert!((e.camera_exposure() - 3.0).abs() < 1e-12);
    }
}
