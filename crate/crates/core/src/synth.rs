//! Synthetic SCADA streams with ground-truth icing episodes.
//!
//! The generator works in physical units first (m/s, rpm, kW, degrees, deg C)
//! and then maps every channel through a per-turbine affine "desensitization"
//! so that exported values look like an anonymised competition export.
//!
//! Physics, per step:
//!
//! * wind follows an AR(1) process around its mean, floored at 0;
//! * ambient temperature is a daily sine plus an AR(1) weather anomaly;
//! * below cut-in the rotor idles and power is a small self-consumption
//!   draw; between cut-in and rated, power grows with `v^3`; above rated the
//!   blades pitch out and power saturates;
//! * while the ambient temperature sits below the icing threshold an episode
//!   starts with a fixed per-step hazard; iced blades lose power and rotor
//!   speed and keep the pitch in its small-angle band.
//!
//! Records near an episode boundary are left out of every label window, so
//! they come back as `invalid` after labeling.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{Channel, Label, LabelWindow, ScadaRecord, Timestamp, WindowClass};
use crate::rng::{seeded, SeededRng};

/// 2015-11-01T00:00:00Z
pub const DEFAULT_START: Timestamp = 1_446_336_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindModel {
    /// m/s
    pub mean: f64,
    /// AR(1) coefficient, in `[0, 1)`.
    pub persistence: f64,
    /// Innovation standard deviation per step, m/s.
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbientModel {
    /// deg C
    pub mean: f64,
    pub diurnal_amplitude: f64,
    /// AR(1) coefficient of the weather anomaly.
    pub persistence: f64,
    /// Innovation standard deviation of the weather anomaly per step.
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcingTrigger {
    /// Episodes can only start below this ambient temperature (deg C).
    pub temp_threshold: f64,
    /// Per-step start probability while cold.
    pub hazard_rate: f64,
    pub min_episode: usize,
    pub max_episode: usize,
    /// Records on each side of an episode left unlabeled.
    pub guard: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcingEffect {
    /// Fraction of power lost at full severity, in `(0, 1)`.
    pub power_derating: f64,
    /// Fraction of generator speed lost at full severity.
    pub speed_droop: f64,
    /// Steps for ice to build up to full severity.
    pub ramp: usize,
}

/// `exported = scale * physical + offset`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelAffine {
    pub channel: Channel,
    pub scale: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub duration: usize,
    pub start_time: Timestamp,
    /// Seconds between records.
    pub nominal_dt: i64,
    /// Mix in occasional `+1 s` and `+3 s` sampling gaps.
    pub irregular_sampling: bool,
    pub wind: WindModel,
    pub ambient: AmbientModel,
    pub icing: IcingTrigger,
    pub effect: IcingEffect,
    /// m/s
    pub cut_in: f64,
    /// m/s
    pub rated: f64,
    /// kW
    pub rated_power: f64,
    /// Channels not listed are exported unchanged.
    pub desensitize: Vec<ChannelAffine>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration: 100_000,
            start_time: DEFAULT_START,
            nominal_dt: 7,
            irregular_sampling: true,
            wind: WindModel {
                mean: 6.0,
                persistence: 0.995,
                noise: 0.25,
            },
            ambient: AmbientModel {
                mean: 4.0,
                diurnal_amplitude: 3.0,
                persistence: 0.999,
                noise: 0.1,
            },
            icing: IcingTrigger {
                temp_threshold: 1.5,
                hazard_rate: 2.5e-3,
                min_episode: 100,
                max_episode: 400,
                guard: 120,
            },
            effect: IcingEffect {
                power_derating: 0.5,
                speed_droop: 0.3,
                ramp: 30,
            },
            cut_in: 3.5,
            rated: 11.0,
            rated_power: 1500.0,
            desensitize: default_desensitization(),
            seed: 0,
        }
    }
}

/// Affine map that puts cut-in at about -0.25 on the exported wind channel,
/// 1.5 deg C at 1.5 on the temperature channels and the small pitch band
/// around 0.2.
pub fn default_desensitization() -> Vec<ChannelAffine> {
    Channel::ALL
        .iter()
        .map(|&channel| {
            use Channel::*;
            let (scale, offset) = match channel {
                WindSpeed => (1.0 / 3.0, -4.25 / 3.0),
                GeneratorSpeed => (1.0 / 600.0, -1.0),
                Power => (1.0 / 500.0, -0.5),
                Pitch1Angle | Pitch2Angle | Pitch3Angle => (0.1, 0.07),
                Pitch1Speed | Pitch2Speed | Pitch3Speed => (1.0, 0.0),
                EnvironmentTmp | IntTmp => (1.0 / 3.0, 1.0),
                Pitch1MotoTmp | Pitch2MotoTmp | Pitch3MotoTmp => (1.0 / 5.0, -2.0),
                Pitch1Ng5Tmp | Pitch2Ng5Tmp | Pitch3Ng5Tmp => (1.0 / 5.0, -3.0),
                WindDirection | WindDirectionMean | YawPosition => (1.0 / 90.0, 0.0),
                _ => (1.0, 0.0),
            };
            ChannelAffine {
                channel,
                scale,
                offset,
            }
        })
        .collect()
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        use SynthError::InvalidConfig as bad;
        if self.duration == 0 {
            return Err(bad("duration must be positive"));
        }
        if self.nominal_dt <= 0 {
            return Err(bad("nominal_dt must be positive"));
        }
        if !(0.0..1.0).contains(&self.wind.persistence)
            || !(0.0..1.0).contains(&self.ambient.persistence)
        {
            return Err(bad("AR(1) persistence must lie in [0, 1)"));
        }
        if !(self.wind.noise >= 0.0 && self.ambient.noise >= 0.0) {
            return Err(bad("noise levels must be non-negative"));
        }
        let e = &self.effect;
        if !(e.power_derating > 0.0 && e.power_derating < 1.0) {
            return Err(bad("power derating must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&e.speed_droop) {
            return Err(bad("speed droop must lie in [0, 1)"));
        }
        let i = &self.icing;
        if i.min_episode == 0 || i.min_episode > i.max_episode {
            return Err(bad("episode lengths need 1 <= min <= max"));
        }
        if !(0.0..=1.0).contains(&i.hazard_rate) {
            return Err(bad("hazard rate must be a probability"));
        }
        if !(self.cut_in > 0.0 && self.cut_in < self.rated && self.rated_power > 0.0) {
            return Err(bad("need 0 < cut_in < rated and positive rated power"));
        }
        if self
            .desensitize
            .iter()
            .any(|a| a.scale == 0.0 || !a.scale.is_finite() || !a.offset.is_finite())
        {
            return Err(bad("desensitization scales must be finite and nonzero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub start: Timestamp,
    /// Exclusive.
    pub end: Timestamp,
    /// Peak fraction of the configured icing effect, in `(0, 1]`.
    pub severity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub records: Vec<ScadaRecord>,
    pub truth_windows: Vec<LabelWindow>,
    pub episode_ledger: Vec<Episode>,
    /// The generator's own per-record labels.
    pub truth_labels: Vec<Label>,
}

impl SynthOutput {
    pub fn count(&self, label: Label) -> usize {
        self.truth_labels.iter().filter(|&&l| l == label).count()
    }
}

fn gauss(rng: &mut SeededRng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

struct Physics {
    wind: f64,
    weather: f64,
    pitch: [f64; 3],
    yaw: f64,
    direction_mean: f64,
    motor_heat: f64,
}

pub fn generate_turbine(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let n = cfg.duration;

    let stationary_weather =
        cfg.ambient.noise / libm::sqrt(1.0 - cfg.ambient.persistence * cfg.ambient.persistence);
    let stationary_wind =
        cfg.wind.noise / libm::sqrt(1.0 - cfg.wind.persistence * cfg.wind.persistence);
    let mut st = Physics {
        wind: (cfg.wind.mean + stationary_wind * gauss(&mut rng)).max(0.0),
        weather: stationary_weather * gauss(&mut rng),
        pitch: [1.5; 3],
        yaw: rng.random_range(0.0..360.0),
        direction_mean: 0.0,
        motor_heat: 0.0,
    };
    let blade_bias: [f64; 3] = core::array::from_fn(|_| 0.05 * gauss(&mut rng));
    let motor_bias: [f64; 3] = core::array::from_fn(|_| 0.8 * gauss(&mut rng));

    let mut records = Vec::with_capacity(n);
    let mut episode_of: Vec<Option<usize>> = Vec::with_capacity(n);
    let mut ledger: Vec<(usize, usize, f64)> = Vec::new();
    let mut time = cfg.start_time;
    // (steps left, elapsed, severity)
    let mut active: Option<(usize, usize, f64)> = None;
    let mut cooldown = 0usize;

    for step in 0..n {
        if step > 0 {
            time += cfg.nominal_dt;
            if cfg.irregular_sampling {
                let u: f64 = rng.random();
                time += if u < 0.05 {
                    3
                } else if u < 0.20 {
                    1
                } else {
                    0
                };
            }
        }

        let w = &cfg.wind;
        st.wind =
            (w.mean + w.persistence * (st.wind - w.mean) + w.noise * gauss(&mut rng)).max(0.0);
        let a = &cfg.ambient;
        st.weather = a.persistence * st.weather + a.noise * gauss(&mut rng);
        let day_phase = 2.0 * PI * ((time - cfg.start_time) as f64) / 86_400.0;
        let ambient = a.mean + a.diurnal_amplitude * libm::sin(day_phase - PI / 2.0) + st.weather;

        let start_roll: f64 = rng.random();
        let severity_roll: f64 = rng.random();
        let length_roll = rng.random_range(cfg.icing.min_episode..=cfg.icing.max_episode);
        if active.is_none()
            && cooldown == 0
            && ambient < cfg.icing.temp_threshold
            && start_roll < cfg.icing.hazard_rate
        {
            ledger.push((step, step + length_roll, 0.5 + 0.5 * severity_roll));
            active = Some((length_roll, 0, 0.5 + 0.5 * severity_roll));
        }
        let ice = match active {
            Some((_, elapsed, severity)) => {
                severity * ((elapsed + 1) as f64 / cfg.effect.ramp.max(1) as f64).min(1.0)
            }
            None => 0.0,
        };
        episode_of.push(active.map(|_| ledger.len() - 1));
        active = match active {
            Some((left, elapsed, severity)) if left > 1 => Some((left - 1, elapsed + 1, severity)),
            Some(_) => {
                cooldown = 2 * cfg.icing.guard + 1;
                None
            }
            None => {
                cooldown = cooldown.saturating_sub(1);
                None
            }
        };

        records.push(physical_record(
            cfg,
            &mut st,
            &mut rng,
            time,
            ambient,
            ice,
            &blade_bias,
            &motor_bias,
        ));
    }
    // an episode cut off by the end of the stream ends at the last record
    if let Some(last) = ledger.last_mut() {
        last.1 = last.1.min(n);
    }

    for r in &mut records {
        desensitize(r, &cfg.desensitize);
    }

    let (truth_windows, truth_labels) = truth_from_episodes(&records, &episode_of, cfg.icing.guard);
    let episode_ledger = ledger
        .iter()
        .map(|&(s, e, severity)| Episode {
            start: records[s].time,
            end: records[e - 1].time + 1,
            severity,
        })
        .collect();
    Ok(SynthOutput {
        records,
        truth_windows,
        episode_ledger,
        truth_labels,
    })
}

#[allow(clippy::too_many_arguments)]
fn physical_record(
    cfg: &SynthConfig,
    st: &mut Physics,
    rng: &mut SeededRng,
    time: Timestamp,
    ambient: f64,
    ice: f64,
    blade_bias: &[f64; 3],
    motor_bias: &[f64; 3],
) -> ScadaRecord {
    let v = st.wind;
    let (ci, rated) = (cfg.cut_in, cfg.rated);
    let e = &cfg.effect;

    let mut power = if v < ci {
        -15.0
    } else if v < rated {
        cfg.rated_power * (v * v * v - ci * ci * ci) / (rated * rated * rated - ci * ci * ci)
    } else {
        cfg.rated_power
    };
    power *= 1.0 - e.power_derating * ice;
    power = power * (1.0 + 0.03 * gauss(rng)) + 8.0 * gauss(rng);

    let mut gen_speed = if v < ci {
        90.0 * v
    } else {
        (160.0 * v).clamp(560.0, 1750.0)
    };
    gen_speed *= 1.0 - e.speed_droop * ice;
    gen_speed += 12.0 * gauss(rng);

    let target_pitch = if v < rated {
        1.5
    } else {
        1.5 + 3.0 * (v - rated)
    };
    // ice keeps the controller from pitching out
    let target_pitch = 1.5 + (target_pitch - 1.5) * (1.0 - ice);
    let mut pitch_speed = [0.0; 3];
    for b in 0..3 {
        let next = target_pitch + blade_bias[b] + 0.15 * gauss(rng);
        pitch_speed[b] = (next - st.pitch[b]) / cfg.nominal_dt as f64 + 0.01 * gauss(rng);
        st.pitch[b] = next;
    }

    let activity = pitch_speed.iter().map(|s| s.abs()).sum::<f64>();
    st.motor_heat = 0.995 * st.motor_heat
        + 0.005 * (6.0 + 40.0 * activity + 4.0 * power.max(0.0) / cfg.rated_power);

    st.direction_mean = 0.9 * st.direction_mean + 0.1 * 8.0 * gauss(rng);
    st.yaw = (st.yaw + 0.02 * gauss(rng)).rem_euclid(360.0);

    let mut r = ScadaRecord::filled(time, 0.0);
    r.wind_speed = v + 0.3 * gauss(rng);
    r.generator_speed = gen_speed;
    r.power = power;
    r.wind_direction = st.direction_mean + 4.0 * gauss(rng);
    r.wind_direction_mean = st.direction_mean;
    r.yaw_position = st.yaw;
    r.yaw_speed = 0.01 * gauss(rng);
    r.pitch1_angle = st.pitch[0];
    r.pitch2_angle = st.pitch[1];
    r.pitch3_angle = st.pitch[2];
    r.pitch1_speed = pitch_speed[0];
    r.pitch2_speed = pitch_speed[1];
    r.pitch3_speed = pitch_speed[2];
    r.pitch1_moto_tmp = ambient + st.motor_heat + motor_bias[0] + 0.3 * gauss(rng);
    r.pitch2_moto_tmp = ambient + st.motor_heat + motor_bias[1] + 0.3 * gauss(rng);
    r.pitch3_moto_tmp = ambient + st.motor_heat + motor_bias[2] + 0.3 * gauss(rng);
    let shake = 0.02 + 0.004 * v;
    r.acc_x = shake * gauss(rng);
    r.acc_y = shake * gauss(rng);
    r.environment_tmp = ambient + 0.2 * gauss(rng);
    r.int_tmp = ambient + 12.0 + 6.0 * power.max(0.0) / cfg.rated_power + 0.3 * gauss(rng);
    r.pitch1_ng5_tmp = ambient + 15.0 + 0.4 * gauss(rng);
    r.pitch2_ng5_tmp = ambient + 15.0 + 0.4 * gauss(rng);
    r.pitch3_ng5_tmp = ambient + 15.0 + 0.4 * gauss(rng);
    r.pitch1_ng5_dc = 1.0 + 0.5 * pitch_speed[0].abs() + 0.05 * gauss(rng);
    r.pitch2_ng5_dc = 1.0 + 0.5 * pitch_speed[1].abs() + 0.05 * gauss(rng);
    r.pitch3_ng5_dc = 1.0 + 0.5 * pitch_speed[2].abs() + 0.05 * gauss(rng);
    r.group = (time - cfg.start_time) / 86_400;
    r
}

fn desensitize(r: &mut ScadaRecord, affines: &[ChannelAffine]) {
    for a in affines {
        let v = r.channel_mut(a.channel);
        *v = a.scale * *v + a.offset;
    }
}

/// Icing windows cover episodes; normal windows cover everything further
/// than `guard` records from any episode.
fn truth_from_episodes(
    records: &[ScadaRecord],
    episode_of: &[Option<usize>],
    guard: usize,
) -> (Vec<LabelWindow>, Vec<Label>) {
    let n = records.len();
    let mut near_ice = alloc::vec![false; n];
    for (i, e) in episode_of.iter().enumerate() {
        if e.is_some() {
            let lo = i.saturating_sub(guard);
            let hi = (i + guard + 1).min(n);
            near_ice[lo..hi].iter_mut().for_each(|v| *v = true);
        }
    }
    let labels: Vec<Label> = (0..n)
        .map(|i| match (episode_of[i], near_ice[i]) {
            (Some(_), _) => Label::Abnormal,
            (None, true) => Label::Invalid,
            (None, false) => Label::Normal,
        })
        .collect();

    let mut windows = Vec::new();
    let mut i = 0;
    while i < n {
        let key = (labels[i], episode_of[i]);
        let mut j = i + 1;
        while j < n && (labels[j], episode_of[j]) == key {
            j += 1;
        }
        let class = match labels[i] {
            Label::Abnormal => Some(WindowClass::Icing),
            Label::Normal => Some(WindowClass::Normal),
            Label::Invalid => None,
        };
        if let Some(class) = class {
            // strictly increasing times make the window non-empty and keep
            // the next record out
            windows.push(LabelWindow {
                start: records[i].time,
                end: records[j - 1].time + 1,
                class,
            });
        }
        i = j;
    }
    (windows, labels)
}

/// Calibration differences between two turbines sharing the same physics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetProfile {
    /// Added to the base seed for the second turbine.
    pub seed_offset: u64,
    /// Multiplies the base scale and adds to the base offset, per channel.
    pub adjust: Vec<ChannelAffine>,
}

impl OffsetProfile {
    /// No calibration change; the second turbine still gets its own seed.
    pub fn zero() -> Self {
        OffsetProfile {
            seed_offset: 1,
            adjust: Vec::new(),
        }
    }

    /// The shipped cross-turbine profile: the second turbine reads rotor speed
    /// about 15% low, power slightly low and its pitch motors about 5 deg C
    /// cold.
    pub fn documented_default() -> Self {
        use Channel::*;
        let adj = |channel, scale, offset| ChannelAffine {
            channel,
            scale,
            offset,
        };
        OffsetProfile {
            seed_offset: 1,
            adjust: alloc::vec![
                adj(Power, 0.92, -0.05),
                adj(GeneratorSpeed, 0.85, -0.03),
                adj(WindSpeed, 1.0, 0.05),
                adj(EnvironmentTmp, 1.0, -0.1),
                adj(IntTmp, 1.0, 0.3),
                adj(Pitch1MotoTmp, 1.0, -1.0),
                adj(Pitch2MotoTmp, 1.0, -1.1),
                adj(Pitch3MotoTmp, 1.0, -0.9),
                adj(Pitch1Angle, 1.0, 0.02),
                adj(Pitch2Angle, 1.0, 0.02),
                adj(Pitch3Angle, 1.0, 0.02),
            ],
        }
    }

    pub fn apply(&self, base: &SynthConfig) -> SynthConfig {
        let mut cfg = base.clone();
        cfg.seed = base.seed.wrapping_add(self.seed_offset);
        for adj in &self.adjust {
            match cfg
                .desensitize
                .iter_mut()
                .find(|a| a.channel == adj.channel)
            {
                Some(a) => {
                    a.scale *= adj.scale;
                    a.offset += adj.offset;
                }
                None => cfg.desensitize.push(*adj),
            }
        }
        cfg
    }
}

/// Two turbines with identical physics; the second uses `offset_profile`.
pub fn make_turbine_pair(
    base: &SynthConfig,
    offset_profile: &OffsetProfile,
) -> Result<(SynthOutput, SynthOutput), SynthError> {
    let a = generate_turbine(base)?;
    let b = generate_turbine(&offset_profile.apply(base))?;
    Ok((a, b))
}
