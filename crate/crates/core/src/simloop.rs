//! Fixed-timestep haptic rendering loop.
//!
//! Every force tick: hold the latest tracker sample, evaluate contact,
//! clamp the desired force to what the coils can deliver, allocate duties,
//! advance the first-order current lag, and report the force the lagged
//! currents actually produce.

use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::allocator::{self, DutyVector, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::forcemap::ForceMapGrid;
use crate::magnetics::{CoilStack, CurrentVector};
use crate::scene::{Scene, Texture};
use crate::vec3::Vec3;

pub const DEFAULT_FORCE_RATE: f64 = 1000.0;
pub const DEFAULT_TRACKER_RATE: f64 = 27.0;
/// Current time constant giving a 95 % step response in about 40 ms.
pub const DEFAULT_TAU: f64 = 0.0134;

const TIME_EPS: f64 = 1e-12;

pub const CSV_HEADER: &str = "t,x,y,z,f_desired,f_commanded,f_achieved,\
d1,d2,d3,d4,d5,d6,i1,i2,i3,i4,i5,i6,contact,infeasible";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t: f64,
    pub p: Vec3,
}

/// Piecewise-linear fingertip path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub keyframes: Vec<Keyframe>,
}

impl Trajectory {
    pub fn new(keyframes: Vec<Keyframe>) -> Result<Self> {
        let traj = Self { keyframes };
        traj.validate()?;
        Ok(traj)
    }

    /// A finger held still at `p` for `duration` seconds.
    pub fn hold(p: Vec3, duration: f64) -> Self {
        Self {
            keyframes: vec![Keyframe { t: 0.0, p }, Keyframe { t: duration, p }],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let traj: Trajectory = serde_json::from_str(text)?;
        traj.validate()?;
        Ok(traj)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.keyframes.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let finite = self.keyframes.iter().all(|k| k.t.is_finite() && k.p.is_finite());
        let sorted = self.keyframes.windows(2).all(|w| w[1].t >= w[0].t);
        if !(finite && sorted) {
            return Err(Error::InvalidInput("keyframes must be finite and time-sorted".into()));
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.keyframes[0].t
    }

    pub fn end(&self) -> f64 {
        self.keyframes[self.keyframes.len() - 1].t
    }

    /// Linear interpolation, held constant outside the keyframe span.
    pub fn position_at(&self, t: f64) -> Vec3 {
        let k = &self.keyframes;
        let idx = k.partition_point(|f| f.t <= t);
        if idx == 0 {
            return k[0].p;
        }
        if idx == k.len() {
            return k[k.len() - 1].p;
        }
        let (a, b) = (k[idx - 1], k[idx]);
        let span = b.t - a.t;
        if span <= 0.0 {
            return b.p;
        }
        let s = (t - a.t) / span;
        a.p + (b.p - a.p) * s
    }
}

/// One tracker measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerState {
    pub position: Vec3,
    pub timestamp: f64,
}

/// Replays a trajectory as a fixed-rate tracker with optional Gaussian noise.
#[derive(Debug, Clone)]
pub struct TrackerPlayback {
    trajectory: Trajectory,
    rate: f64,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    next: u64,
}

impl TrackerPlayback {
    pub fn new(trajectory: Trajectory, rate: f64, noise_sigma: f64, seed: u64) -> Result<Self> {
        trajectory.validate()?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput(format!("tracker rate must be positive, got {rate}")));
        }
        let noise = if noise_sigma > 0.0 {
            Some(Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidInput(e.to_string()))?)
        } else if noise_sigma == 0.0 {
            None
        } else {
            return Err(Error::InvalidInput(format!("noise sigma must be >= 0, got {noise_sigma}")));
        };
        Ok(Self {
            trajectory,
            rate,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next: 0,
        })
    }

    pub fn sample_time(&self, index: u64) -> f64 {
        self.trajectory.start() + index as f64 / self.rate
    }
}

impl Iterator for TrackerPlayback {
    type Item = FingerState;

    fn next(&mut self) -> Option<FingerState> {
        let timestamp = self.sample_time(self.next);
        if timestamp > self.trajectory.end() + TIME_EPS {
            return None;
        }
        self.next += 1;
        let mut position = self.trajectory.position_at(timestamp);
        if let Some(noise) = &self.noise {
            let rng = &mut self.rng;
            position = position
                + Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
        }
        Some(FingerState { position, timestamp })
    }
}

/// Samples `trajectory` at `rate` Hz.
pub fn tracker_playback(
    trajectory: &Trajectory,
    rate: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<TrackerPlayback> {
    TrackerPlayback::new(trajectory.clone(), rate, noise_sigma, seed)
}

/// Commanded and lagged actual coil currents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoilDriveState {
    pub commanded: CurrentVector,
    pub actual: CurrentVector,
    pub time_constant: f64,
}

impl CoilDriveState {
    pub fn idle(time_constant: f64) -> Self {
        Self {
            commanded: CurrentVector::ZERO,
            actual: CurrentVector::ZERO,
            time_constant,
        }
    }
}

/// Exact discrete solution of `dI/dt = (I_cmd - I) / tau` over `dt` with the
/// command held constant.
pub fn current_dynamics_step(state: &CoilDriveState, dt: f64) -> CoilDriveState {
    debug_assert!(dt > 0.0);
    let alpha = if state.time_constant > 0.0 {
        -(-dt / state.time_constant).exp_m1()
    } else {
        1.0
    };
    let actual = std::array::from_fn(|i| {
        let (cmd, act) = (state.commanded.0[i], state.actual.0[i]);
        act + (cmd - act) * alpha
    });
    CoilDriveState {
        actual: CurrentVector(actual),
        ..*state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub force_rate: f64,
    pub tracker_rate: f64,
    pub clamp_to_capacity: bool,
    pub tau: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub tolerance: f64,
    /// Extrapolate the finger linearly from the last two tracker samples
    /// instead of holding the latest one.
    pub extrapolate: bool,
    /// Run length in seconds; defaults to the trajectory span.
    pub duration: Option<f64>,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            force_rate: DEFAULT_FORCE_RATE,
            tracker_rate: DEFAULT_TRACKER_RATE,
            clamp_to_capacity: true,
            tau: DEFAULT_TAU,
            noise_sigma: 0.0,
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
            extrapolate: false,
            duration: None,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        let rates_ok = self.force_rate > 0.0
            && self.tracker_rate > 0.0
            && self.force_rate.is_finite()
            && self.force_rate >= self.tracker_rate;
        if !rates_ok {
            return Err(Error::InvalidInput(format!(
                "need 0 < tracker_rate <= force_rate, got {} / {}",
                self.tracker_rate, self.force_rate
            )));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tau must be >= 0 and tolerance > 0".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.force_rate
    }
}

/// Everything that happened on one force tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub t: f64,
    pub finger: Vec3,
    pub f_desired: f64,
    pub f_commanded: f64,
    pub f_achieved: f64,
    pub duties: DutyVector,
    pub currents_actual: CurrentVector,
    pub in_contact: bool,
    pub infeasible: bool,
}

/// Changes applied between ticks.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    SetPosition(Vec3),
    LoadScene(Scene),
    SetParams {
        stiffness: Option<f64>,
        texture: Option<Texture>,
        tau: Option<f64>,
    },
}

/// The single stepper that owns loop state.
#[derive(Debug, Clone)]
pub struct Simulator {
    stack: CoilStack,
    map: Arc<ForceMapGrid>,
    scene: Scene,
    config: LoopConfig,
    drive: CoilDriveState,
    start: f64,
    tick: u64,
    latest: Option<FingerState>,
    previous: Option<FingerState>,
}

impl Simulator {
    pub fn new(
        stack: CoilStack,
        map: Arc<ForceMapGrid>,
        scene: Scene,
        config: LoopConfig,
    ) -> Result<Self> {
        stack.validate()?;
        config.validate()?;
        for object in &scene.objects {
            object.validate()?;
        }
        Ok(Self {
            stack,
            map,
            drive: CoilDriveState::idle(config.tau),
            scene,
            config,
            start: 0.0,
            tick: 0,
            latest: None,
            previous: None,
        })
    }

    pub fn with_start_time(mut self, start: f64) -> Self {
        self.start = start;
        self
    }

    pub fn time(&self) -> f64 {
        self.start + self.tick as f64 / self.config.force_rate
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn stack(&self) -> &CoilStack {
        &self.stack
    }

    pub fn map(&self) -> &ForceMapGrid {
        &self.map
    }

    pub fn drive(&self) -> &CoilDriveState {
        &self.drive
    }

    pub fn latest_sample(&self) -> Option<FingerState> {
        self.latest
    }

    /// Feeds a tracker measurement.
    pub fn observe(&mut self, sample: FingerState) {
        self.previous = self.latest.replace(sample);
    }

    pub fn apply(&mut self, command: Command) -> Result<()> {
        match command {
            Command::SetPosition(p) => {
                if !self.stack.in_workspace(p.radial(), p.z) {
                    return Err(Error::InvalidInput(format!(
                        "position [{}, {}, {}] is outside the workspace",
                        p.x, p.y, p.z
                    )));
                }
                let timestamp = self.time();
                self.latest = Some(FingerState { position: p, timestamp });
                self.previous = None;
            }
            Command::LoadScene(scene) => {
                for object in &scene.objects {
                    object.validate()?;
                }
                self.scene = scene;
            }
            Command::SetParams {
                stiffness,
                texture,
                tau,
            } => {
                if let Some(k) = stiffness {
                    if !(k > 0.0 && k.is_finite()) {
                        return Err(Error::InvalidInput(format!("stiffness must be > 0, got {k}")));
                    }
                }
                if let Some(tau) = tau {
                    if !(tau >= 0.0 && tau.is_finite()) {
                        return Err(Error::InvalidInput(format!("tau must be >= 0, got {tau}")));
                    }
                    self.config.tau = tau;
                    self.drive.time_constant = tau;
                }
                for object in &mut self.scene.objects {
                    if let Some(k) = stiffness {
                        object.stiffness = k;
                    }
                    if let Some(t) = texture {
                        object.texture = t;
                    }
                }
            }
        }
        Ok(())
    }

    fn finger_position(&self, t: f64) -> Option<Vec3> {
        let latest = self.latest?;
        match (self.config.extrapolate, self.previous) {
            (true, Some(prev)) if latest.timestamp > prev.timestamp => {
                let rate = (latest.position - prev.position)
                    * (1.0 / (latest.timestamp - prev.timestamp));
                Some(latest.position + rate * (t - latest.timestamp))
            }
            _ => Some(latest.position),
        }
    }

    /// Advances one force tick.
    pub fn step(&mut self) -> LoopRecord {
        let t = self.time();
        let max_current = self.stack.coil.max_current;
        let finger = self.finger_position(t);

        let mut infeasible = false;
        let (contact, f_desired, duties, f_commanded) = match finger {
            None => (None, 0.0, DutyVector::ZERO, 0.0),
            Some(p) => {
                let contact = self.scene.contact(p);
                let f_desired = contact.f_desired_z;
                let (duties, f_commanded) = self.command(p, f_desired, &mut infeasible);
                (Some(contact), f_desired, duties, f_commanded)
            }
        };

        self.drive.commanded = duties.currents(max_current);
        self.drive = current_dynamics_step(&self.drive, self.config.dt());
        let actual = self.drive.actual;

        let f_achieved = finger
            .and_then(|p| {
                let effective = DutyVector::from_currents(&actual, max_current);
                allocator::forward_force(&effective, p, &self.map, &self.stack).ok()
            })
            .unwrap_or(0.0);

        self.tick += 1;
        LoopRecord {
            t,
            finger: finger.unwrap_or_default(),
            f_desired,
            f_commanded,
            f_achieved,
            duties,
            currents_actual: actual,
            in_contact: contact.is_some_and(|c| c.in_contact),
            infeasible,
        }
    }

    fn command(&self, p: Vec3, f_desired: f64, infeasible: &mut bool) -> (DutyVector, f64) {
        let (map, stack, tol) = (&*self.map, &self.stack, self.config.tolerance);
        let mut target = f_desired;
        if self.config.clamp_to_capacity {
            match allocator::capacity(p, map, stack) {
                Ok((lo, hi)) => {
                    if target > hi || target < lo {
                        *infeasible = true;
                        target = target.clamp(lo, hi);
                    }
                }
                Err(_) => {
                    *infeasible = true;
                    return (DutyVector::ZERO, 0.0);
                }
            }
        }
        match allocator::allocate(target, p, map, stack, tol) {
            Ok(res) => (res.duties, target),
            Err(Error::Infeasible { duties, .. }) => {
                *infeasible = true;
                (duties, target)
            }
            Err(_) => {
                *infeasible = true;
                (DutyVector::ZERO, 0.0)
            }
        }
    }
}

/// Batch run over a recorded trajectory, as fast as possible.
pub fn run(
    stack: &CoilStack,
    map: Arc<ForceMapGrid>,
    scene: &Scene,
    trajectory: &Trajectory,
    config: &LoopConfig,
) -> Result<Vec<LoopRecord>> {
    trajectory.validate()?;
    let mut sim = Simulator::new(*stack, map, scene.clone(), *config)?
        .with_start_time(trajectory.start());
    let mut tracker = TrackerPlayback::new(
        trajectory.clone(),
        config.tracker_rate,
        config.noise_sigma,
        config.seed,
    )?
    .peekable();

    let duration = config.duration.unwrap_or(trajectory.end() - trajectory.start());
    let ticks = (duration * config.force_rate).round().max(0.0) as u64;
    let mut records = Vec::with_capacity(ticks as usize);
    for _ in 0..ticks {
        let now = sim.time();
        while let Some(sample) = tracker.next_if(|s| s.timestamp <= now + TIME_EPS) {
            sim.observe(sample);
        }
        records.push(sim.step());
    }
    Ok(records)
}

/// Writes the loop log as CSV with nine significant digits per float.
pub fn write_csv(records: &[LoopRecord], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let mut fields: Vec<String> = [
            r.t,
            r.finger.x,
            r.finger.y,
            r.finger.z,
            r.f_desired,
            r.f_commanded,
            r.f_achieved,
        ]
        .iter()
        .chain(&r.duties.0)
        .chain(&r.currents_actual.0)
        .map(|v| format!("{v:.8e}"))
        .collect();
        fields.push(u8::from(r.in_contact).to_string());
        fields.push(u8::from(r.infeasible).to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn csv_string(records: &[LoopRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}
