//! Drive cycles: uniformly sampled current profiles (positive = discharge).

use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io;

const SPACING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DriveCycle {
    pub name: String,
    timestamps: Vec<f64>,
    current: Vec<f64>,
}

impl DriveCycle {
    pub fn new(name: impl Into<String>, timestamps: Vec<f64>, current: Vec<f64>) -> Result<Self> {
        if timestamps.len() != current.len() {
            return Err(Error::Cycle(format!(
                "{} timestamps but {} current samples",
                timestamps.len(),
                current.len()
            )));
        }
        if timestamps.len() < 2 {
            return Err(Error::Cycle("a cycle needs at least two samples".into()));
        }
        if let Some(i) = current.iter().position(|c| !c.is_finite()) {
            return Err(Error::Cycle(format!("non-finite current at sample {i}")));
        }
        let dt = timestamps[1] - timestamps[0];
        if !(dt > 0.0) {
            return Err(Error::Cycle("timestamps must be strictly increasing".into()));
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            let step = w[1] - w[0];
            if !(step > 0.0) {
                return Err(Error::Cycle(format!(
                    "timestamps not strictly increasing at sample {}",
                    i + 1
                )));
            }
            if (step - dt).abs() > SPACING_TOL {
                return Err(Error::Cycle(format!(
                    "non-uniform spacing at sample {}: {step} s vs {dt} s",
                    i + 1
                )));
            }
        }
        Ok(DriveCycle {
            name: name.into(),
            timestamps,
            current,
        })
    }

    /// Cycle sampled at `dt` starting from t = 0.
    pub fn from_current(name: impl Into<String>, dt: f64, current: Vec<f64>) -> Result<Self> {
        let t = (0..current.len()).map(|k| k as f64 * dt).collect();
        DriveCycle::new(name, t, current)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.timestamps[1] - self.timestamps[0]
    }

    /// Joins cycles end to end at the first cycle's dt, re-timing from zero.
    pub fn concat(name: impl Into<String>, parts: &[DriveCycle]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Cycle("nothing to concatenate".into()))?;
        let dt = first.dt();
        if let Some(p) = parts.iter().find(|p| (p.dt() - dt).abs() > SPACING_TOL) {
            return Err(Error::Cycle(format!(
                "cycle `{}` has dt {} but `{}` has {dt}",
                p.name,
                p.dt(),
                first.name
            )));
        }
        let current = parts.iter().flat_map(|p| p.current.iter().copied()).collect();
        DriveCycle::from_current(name, dt, current)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let (t, i) = io::read_columns2(path, ["t_s", "current_a"])?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        DriveCycle::new(name, t, i).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: e.to_string(),
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        io::write_csv(
            path,
            &["t_s", "current_a"],
            &[&self.timestamps, &self.current],
        )
    }
}

/// One piece of a synthetic or ingested current profile.
#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    ConstantCurrent {
        c_rate: f64,
        duration_s: f64,
    },
    /// Square pulses of `c_rate` for `on_s` then rest for `off_s`.
    Pulse {
        c_rate: f64,
        on_s: f64,
        off_s: f64,
        duration_s: f64,
    },
    /// Seeded drive-like profile: piecewise targets held for random
    /// durations, first-order smoothed, occasionally regenerative.
    RandomWalk {
        duration_s: f64,
        max_c_rate: f64,
        regen_c_rate: f64,
        max_hold_s: f64,
        seed: u64,
    },
    File(std::path::PathBuf),
}

impl Segment {
    /// Current samples for this segment at `dt`, scaled by `capacity_ah` for 1C.
    pub fn render(&self, capacity_ah: f64, dt: f64) -> Result<Vec<f64>> {
        let samples = |duration: f64| (duration / dt).round().max(1.0) as usize;
        Ok(match self {
            Segment::ConstantCurrent { c_rate, duration_s } => {
                vec![c_rate * capacity_ah; samples(*duration_s)]
            }
            Segment::Pulse {
                c_rate,
                on_s,
                off_s,
                duration_s,
            } => {
                let period = on_s + off_s;
                if !(period > 0.0) {
                    return Err(Error::Cycle("pulse period must be > 0".into()));
                }
                (0..samples(*duration_s))
                    .map(|k| {
                        let phase = (k as f64 * dt) % period;
                        if phase < *on_s {
                            c_rate * capacity_ah
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            Segment::RandomWalk {
                duration_s,
                max_c_rate,
                regen_c_rate,
                max_hold_s,
                seed,
            } => random_walk(
                samples(*duration_s),
                dt,
                max_c_rate * capacity_ah,
                regen_c_rate * capacity_ah,
                max_hold_s.max(dt),
                *seed,
            ),
            Segment::File(path) => {
                let c = DriveCycle::load_csv(path)?;
                if (c.dt() - dt).abs() > SPACING_TOL {
                    return Err(Error::Cycle(format!(
                        "{} has dt {} s, expected {dt} s",
                        path.display(),
                        c.dt()
                    )));
                }
                c.current
            }
        })
    }
}

fn random_walk(n: usize, dt: f64, max_a: f64, regen_a: f64, max_hold: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let smoothing = (-dt / 3.0).exp();
    let mut out = Vec::with_capacity(n);
    let mut level = 0.0;
    let mut target = 0.0;
    let mut remaining = 0.0;
    for _ in 0..n {
        if remaining <= 0.0 {
            remaining = rng.random_range(dt.max(1.0)..=max_hold);
            let u: f64 = rng.random();
            target = if u < 0.2 {
                -regen_a * rng.random::<f64>()
            } else if u < 0.3 {
                0.0
            } else {
                max_a * rng.random::<f64>().powf(1.5)
            };
        }
        remaining -= dt;
        level = smoothing * level + (1.0 - smoothing) * target;
        out.push(level);
    }
    out
}

impl FromStr for Segment {
    type Err = Error;

    /// `cc:c_rate=1,duration=600`, `pulse:c_rate=2,on=10,off=20,duration=600`,
    /// `walk:duration=1800,max_c_rate=2,regen_c_rate=0.8,hold=20,seed=3`,
    /// `file:path=cycle.csv` (or `file:cycle.csv`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::Config(format!("segment `{s}`: {msg}"));
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        if kind == "file" && !rest.contains('=') {
            return Ok(Segment::File(rest.into()));
        }
        let mut kv = std::collections::BTreeMap::new();
        for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{pair}`")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match kv.get(key) {
                Some(v) => v.parse().map_err(|_| bad(format!("`{key}` is not a number"))),
                None => default.ok_or_else(|| bad(format!("missing `{key}`"))),
            }
        };
        Ok(match kind {
            "cc" => Segment::ConstantCurrent {
                c_rate: num("c_rate", None)?,
                duration_s: num("duration", None)?,
            },
            "pulse" => Segment::Pulse {
                c_rate: num("c_rate", None)?,
                on_s: num("on", Some(10.0))?,
                off_s: num("off", Some(10.0))?,
                duration_s: num("duration", None)?,
            },
            "walk" => Segment::RandomWalk {
                duration_s: num("duration", None)?,
                max_c_rate: num("max_c_rate", Some(2.0))?,
                regen_c_rate: num("regen_c_rate", Some(0.8))?,
                max_hold_s: num("hold", Some(20.0))?,
                seed: num("seed", Some(0.0))? as u64,
            },
            "file" => Segment::File(
                kv.get("path")
                    .ok_or_else(|| bad("missing `path`".into()))?
                    .into(),
            ),
            other => return Err(bad(format!("unknown kind `{other}`"))),
        })
    }
}

/// Constant-current charge inserted between consecutive segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterSegmentCharge {
    /// Magnitude of the charging C-rate.
    pub c_rate: f64,
    pub duration_s: f64,
}

/// Renders and concatenates segments, inserting the optional charge between them.
pub fn build_cycle(
    name: &str,
    segments: &[Segment],
    capacity_ah: f64,
    dt: f64,
    charge: Option<InterSegmentCharge>,
) -> Result<DriveCycle> {
    if segments.is_empty() {
        return Err(Error::Cycle("no segments given".into()));
    }
    let mut current = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 {
            if let Some(ch) = charge {
                let n = (ch.duration_s / dt).round() as usize;
                current.extend(std::iter::repeat_n(-ch.c_rate.abs() * capacity_ah, n));
            }
        }
        current.extend(seg.render(capacity_ah, dt)?);
    }
    DriveCycle::from_current(name, dt, current)
}
