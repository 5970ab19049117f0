//! Seeded generator of synthetic UWB measurements.
//!
//! Produces complex baseband CIRs (reported as magnitudes) aligned so the
//! path detected by the receiver sits at [`FIRST_PATH_LEAD`]. The ranging
//! error has three parts, each leaving a trace in the CIR:
//!
//! * an obstruction delay that grows with material density; it stretches
//!   the multipath decay and moves a reflection cluster later in the
//!   window, so recovering it needs most of the window;
//! * a detection slip of whole taps when an attenuated direct path falls
//!   below the leading-edge threshold and the receiver locks onto a later
//!   path; the weak direct path stays visible ahead of the window origin;
//! * a small range-dependent bias and white ranging noise.
//!
//! Room geometry sets the multipath density and decay. Outdoor links have
//! little multipath, through-wall links a strongly attenuated first path
//! and a long tail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{CirSample, Environment, CIR_WINDOW, FIRST_PATH_LEAD};

/// Distance light travels during one CIR tap (~1.0016 ns).
pub const TAP_SPACING_M: f64 = 0.3003;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub big_room: usize,
    pub medium_room: usize,
    pub small_room: usize,
    pub outdoor: usize,
    pub through_wall: usize,
}

impl SynthConfig {
    /// Environment proportions of a 55,000-measurement campaign, scaled.
    pub fn campaign(scale: f64, seed: u64) -> Self {
        let n = |count: f64| (count * scale).round().max(0.0) as usize;
        SynthConfig {
            seed,
            big_room: n(18_500.0),
            medium_room: n(13_210.0),
            small_room: n(17_523.0),
            outdoor: n(3_000.0),
            through_wall: n(2_767.0),
        }
    }

    pub fn total(&self) -> usize {
        self.big_room + self.medium_room + self.small_room + self.outdoor + self.through_wall
    }

    fn counts(&self) -> [(Environment, usize); 5] {
        [
            (Environment::BigRoom, self.big_room),
            (Environment::MediumRoom, self.medium_room),
            (Environment::SmallRoom, self.small_room),
            (Environment::Outdoor, self.outdoor),
            (Environment::ThroughWall, self.through_wall),
        ]
    }
}

struct Material {
    name: &'static str,
    attenuation: f64,
    delay_m: f64,
    slip_prob: f64,
}

const INDOOR_MATERIALS: [Material; 5] = [
    Material {
        name: "plastic",
        attenuation: 0.75,
        delay_m: 0.04,
        slip_prob: 0.03,
    },
    Material {
        name: "glass",
        attenuation: 0.6,
        delay_m: 0.07,
        slip_prob: 0.06,
    },
    Material {
        name: "wood",
        attenuation: 0.5,
        delay_m: 0.09,
        slip_prob: 0.08,
    },
    Material {
        name: "metal",
        attenuation: 0.12,
        delay_m: 0.17,
        slip_prob: 0.3,
    },
    Material {
        name: "aluminum",
        attenuation: 0.08,
        delay_m: 0.22,
        slip_prob: 0.4,
    },
];

const WALL: [Material; 1] = [Material {
    name: "wall",
    attenuation: 0.3,
    delay_m: 0.25,
    slip_prob: 0.35,
}];

struct Profile {
    range_m: (f64, f64),
    decay_taps: f64,
    multipath_gain: f64,
    tap_density: f64,
    los_prob: f64,
    materials: &'static [Material],
}

fn profile(env: Environment) -> Profile {
    match env {
        Environment::BigRoom => Profile {
            range_m: (1.0, 10.0),
            decay_taps: 28.0,
            multipath_gain: 0.55,
            tap_density: 0.45,
            los_prob: 0.5,
            materials: &INDOOR_MATERIALS,
        },
        Environment::MediumRoom => Profile {
            range_m: (1.0, 6.5),
            decay_taps: 22.0,
            multipath_gain: 0.6,
            tap_density: 0.45,
            los_prob: 0.5,
            materials: &INDOOR_MATERIALS,
        },
        Environment::SmallRoom => Profile {
            range_m: (1.0, 5.5),
            decay_taps: 16.0,
            multipath_gain: 0.65,
            tap_density: 0.45,
            los_prob: 0.5,
            materials: &INDOOR_MATERIALS,
        },
        Environment::Outdoor => Profile {
            range_m: (2.0, 20.0),
            decay_taps: 6.0,
            multipath_gain: 0.12,
            tap_density: 0.2,
            los_prob: 0.6,
            materials: &INDOOR_MATERIALS,
        },
        Environment::ThroughWall => Profile {
            range_m: (2.0, 8.0),
            decay_taps: 40.0,
            multipath_gain: 0.7,
            tap_density: 0.6,
            los_prob: 0.0,
            materials: &WALL,
        },
    }
}

struct ComplexCir {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexCir {
    fn new() -> Self {
        ComplexCir {
            re: vec![0.0; CIR_WINDOW],
            im: vec![0.0; CIR_WINDOW],
        }
    }

    /// Adds a Gaussian-shaped pulse centred at fractional tap `pos`.
    fn pulse(&mut self, pos: f64, amp: f64, phase: f64) {
        let lo = (pos - 4.0).floor().max(0.0) as usize;
        let hi = ((pos + 4.0).ceil() as usize).min(CIR_WINDOW - 1);
        let (c, s) = (phase.cos(), phase.sin());
        for i in lo..=hi {
            let g = amp * (-((i as f64 - pos) / 0.9).powi(2)).exp();
            self.re[i] += g * c;
            self.im[i] += g * s;
        }
    }

    fn magnitude(&self, scale: f64) -> Vec<f64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| (r * r + i * i).sqrt() * scale)
            .collect()
    }
}

fn sample_one(rng: &mut ChaCha8Rng, env: Environment) -> CirSample {
    let p = profile(env);
    let phase = |rng: &mut ChaCha8Rng| rng.random_range(0.0..std::f64::consts::TAU);
    let true_range = rng.random_range(p.range_m.0..p.range_m.1);
    let los = rng.random::<f64>() < p.los_prob;
    let (material, obstruction, slip) = if los {
        ("none", 0.0, 0)
    } else {
        let m = &p.materials[rng.random_range(0..p.materials.len())];
        let delay = m.delay_m * rng.random_range(0.5..1.5);
        let slip = if rng.random::<f64>() < m.slip_prob {
            rng.random_range(1..=3)
        } else {
            0
        };
        (m.name, delay, slip)
    };
    let attenuation = if los {
        1.0
    } else {
        p.materials
            .iter()
            .find(|m| m.name == material)
            .map_or(1.0, |m| m.attenuation)
    };

    let noise = Normal::<f64>::new(0.0, 0.02).expect("valid sigma");
    let range_error =
        obstruction + slip as f64 * TAP_SPACING_M + 0.008 + 0.003 * true_range + noise.sample(rng);

    let mut cir = ComplexCir::new();
    let fp = FIRST_PATH_LEAD as f64 + rng.random_range(-0.5..0.5);
    let fading = LogNormal::new(0.0, 0.1).expect("valid sigma").sample(rng);
    let direct = fading * attenuation / (1.0 + 0.08 * true_range);
    if slip == 0 {
        cir.pulse(fp, direct, phase(rng));
    } else {
        cir.pulse(fp - slip as f64, 0.35 * direct, phase(rng));
        let locked = rng.random_range(0.6..0.9);
        cir.pulse(fp, locked, phase(rng));
    }

    let scatter = Normal::<f64>::new(0.0, 0.7).expect("valid sigma");
    let decay = p.decay_taps * (1.0 + 3.0 * obstruction);
    for t in (FIRST_PATH_LEAD + 1)..CIR_WINDOW {
        if rng.random::<f64>() < p.tap_density {
            let rayleigh = scatter.sample(rng).hypot(scatter.sample(rng));
            let amp = p.multipath_gain * rayleigh * (-((t - FIRST_PATH_LEAD) as f64) / decay).exp();
            let pos = t as f64 + rng.random_range(-0.5..0.5);
            cir.pulse(pos, amp, phase(rng));
        }
    }
    if !los {
        let cluster = FIRST_PATH_LEAD as f64 + 10.0 + 300.0 * obstruction;
        for k in 0..3 {
            let pos = cluster + k as f64;
            if pos < (CIR_WINDOW - 1) as f64 {
                cir.pulse(pos, 0.3, phase(rng));
            }
        }
    }
    let floor = Normal::new(0.0, 0.015).expect("valid sigma");
    for i in 0..CIR_WINDOW {
        cir.re[i] += floor.sample(rng);
        cir.im[i] += floor.sample(rng);
    }
    let gain = 1000.0 * rng.random_range(0.5..2.0);

    CirSample::new(
        cir.magnitude(gain),
        true_range + range_error,
        true_range,
        env,
        material,
        los,
    )
    .expect("generator produces valid samples")
}

/// Generates `config.total()` samples, grouped by environment.
pub fn generate(config: &SynthConfig) -> Vec<CirSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(config.total());
    for (env, count) in config.counts() {
        for _ in 0..count {
            out.push(sample_one(&mut rng, env));
        }
    }
    out
}
