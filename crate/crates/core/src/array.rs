//! Array geometry, steering vectors, per-link frequency responses and the
//! active-RIS amplification budget.
//!
//! Both arrays are uniform planar arrays lying in the local YOZ plane with
//! the first element at the local origin. Element `(iy, iz)` has linear index
//! `iy * n_z + iz`, which makes the steering vector the Kronecker product of
//! the Y-axis and Z-axis responses.

use std::f64::consts::PI;

use rand::Rng;
use thiserror::Error;

use crate::linalg::{kron_vec, CMat, CVec, C64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("zero-length hop between {0:?} and {1:?}")]
    CoincidentPoints([f64; 3], [f64; 3]),
    #[error("negative RIS power budget {0} W")]
    NegativeBudget(f64),
    #[error("non-positive incident-plus-noise power {0} W")]
    NonPositiveIncident(f64),
    #[error("path delay {delay:e} s exceeds unambiguous range {limit:e} s")]
    DelayAmbiguous { delay: f64, limit: f64 },
    #[error("source direction {0:?} lies behind the BS array plane")]
    BehindArray([f64; 3]),
}

pub type Result<T> = std::result::Result<T, ChannelError>;

/// Whether the RIS amplifies (and adds thermal noise) or is purely passive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RisMode {
    Active,
    Passive,
}

/// Immutable physical and dimensional parameters of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    /// RIS elements along local Y and Z.
    pub ris_y: usize,
    pub ris_z: usize,
    /// BS elements along local Y and Z.
    pub bs_y: usize,
    pub bs_z: usize,
    /// Combiner beams along Y and Z.
    pub beams_y: usize,
    pub beams_z: usize,
    /// Total subcarriers.
    pub subcarriers: usize,
    /// Pilot subcarriers, taken as the first `pilots` ones.
    pub pilots: usize,
    /// Spatial-smoothing window length along the subcarrier mode.
    pub smoothing_len: usize,
    /// Time slots split as `slots_y * slots_z` (paired with RIS Y and Z).
    pub slots_y: usize,
    pub slots_z: usize,
    pub subcarrier_spacing: f64,
    pub carrier_freq: f64,
    pub ris_spacing: f64,
    pub bs_spacing: f64,
    /// Transmit power in W.
    pub tx_power: f64,
    /// RIS amplifier budget in W.
    pub ris_power: f64,
    /// Per-subcarrier thermal noise at BS and RIS in W.
    pub bs_noise: f64,
    pub ris_noise: f64,
    pub ris_mode: RisMode,
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Per-subcarrier noise power from a PSD and a noise figure.
pub fn noise_power(psd_dbm_hz: f64, noise_figure_db: f64, spacing_hz: f64) -> f64 {
    dbm_to_watt(psd_dbm_hz + noise_figure_db + 10.0 * spacing_hz.log10())
}

impl SystemConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn slots(&self) -> usize {
        self.slots_y * self.slots_z
    }

    pub fn ris_elements(&self) -> usize {
        self.ris_y * self.ris_z
    }

    pub fn bs_elements(&self) -> usize {
        self.bs_y * self.bs_z
    }

    pub fn beams(&self) -> usize {
        self.beams_y * self.beams_z
    }

    /// Second smoothing length `K − K1 + 1`.
    pub fn smoothing_rest(&self) -> usize {
        self.pilots + 1 - self.smoothing_len
    }

    /// Largest delay that maps to a unique subcarrier phase slope.
    pub fn max_delay(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ChannelError::InvalidConfig(m.to_string()));
        let counts = [
            self.ris_y,
            self.ris_z,
            self.bs_y,
            self.bs_z,
            self.beams_y,
            self.beams_z,
            self.subcarriers,
            self.pilots,
            self.smoothing_len,
            self.slots_y,
            self.slots_z,
        ];
        if counts.iter().any(|&c| c == 0) {
            return bad("all extents must be at least 1");
        }
        if self.pilots > self.subcarriers {
            return bad("pilot count exceeds subcarrier count");
        }
        if self.smoothing_len > self.pilots {
            return bad("smoothing length exceeds pilot count");
        }
        if self.beams_y > self.bs_y || self.beams_z > self.bs_z {
            return bad("more combiner beams than BS elements along an axis");
        }
        let positive = [self.subcarrier_spacing, self.carrier_freq, self.ris_spacing, self.bs_spacing];
        if positive.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return bad("spacings and frequencies must be positive");
        }
        let nonneg = [self.tx_power, self.ris_power, self.bs_noise, self.ris_noise];
        if nonneg.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return bad("powers must be non-negative");
        }
        Ok(())
    }

    /// Y/Z spatial frequency at the RIS for a combined angle parameter.
    pub fn ris_generator(&self, psi: f64) -> f64 {
        2.0 * PI * self.ris_spacing * psi / self.wavelength()
    }

    pub fn ris_psi(&self, omega: f64) -> f64 {
        self.wavelength() * omega / (2.0 * PI * self.ris_spacing)
    }

    /// BS Y and Z spatial frequencies for an arrival direction.
    pub fn bs_generators(&self, dir: Direction) -> (f64, f64) {
        let k = 2.0 * PI * self.bs_spacing / self.wavelength();
        (k * dir.az.sin() * dir.el.cos(), k * dir.el.sin())
    }

    /// Delay-mode generator `−2πΔf τ`.
    pub fn delay_generator(&self, delay: f64) -> f64 {
        -2.0 * PI * self.subcarrier_spacing * delay
    }
}

/// Azimuth/elevation pair in radians.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Direction {
    pub az: f64,
    pub el: f64,
}

impl Direction {
    pub fn unit_vector(&self) -> [f64; 3] {
        [self.az.cos() * self.el.cos(), self.az.sin() * self.el.cos(), self.el.sin()]
    }

    pub fn from_vector(v: [f64; 3]) -> Direction {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let el = (v[2] / n).clamp(-1.0, 1.0).asin();
        let az = v[1].atan2(v[0]);
        Direction { az, el }
    }
}

/// `[1, e^{jω}, …, e^{j(M−1)ω}]`.
pub fn uniform_steering(m: usize, omega: f64) -> CVec {
    CVec::from_fn(m, |i, _| C64::from_polar(1.0, i as f64 * omega))
}

/// Derivative of [`uniform_steering`] with respect to ω.
pub fn uniform_steering_deriv(m: usize, omega: f64) -> CVec {
    CVec::from_fn(m, |i, _| C64::new(0.0, i as f64) * C64::from_polar(1.0, i as f64 * omega))
}

/// Local element positions of a `ny × nz` YOZ-plane UPA, row `iy*nz + iz`.
pub fn upa_positions(ny: usize, nz: usize, spacing: f64) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(ny * nz);
    for iy in 0..ny {
        for iz in 0..nz {
            out.push([0.0, iy as f64 * spacing, iz as f64 * spacing]);
        }
    }
    out
}

/// Steering vector evaluated from explicit positions: `e^{j 2π/λ pᵀd}`.
pub fn steering_from_positions(pos: &[[f64; 3]], wavelength: f64, dir: Direction) -> CVec {
    let d = dir.unit_vector();
    let k = 2.0 * PI / wavelength;
    CVec::from_fn(pos.len(), |i, _| {
        let p = pos[i];
        C64::from_polar(1.0, k * (p[0] * d[0] + p[1] * d[1] + p[2] * d[2]))
    })
}

/// UPA steering vector in Kronecker form.
pub fn upa_steering(ny: usize, nz: usize, spacing: f64, wavelength: f64, dir: Direction) -> CVec {
    let k = 2.0 * PI * spacing / wavelength;
    let wy = k * dir.az.sin() * dir.el.cos();
    let wz = k * dir.el.sin();
    kron_vec(&uniform_steering(ny, wy), &uniform_steering(nz, wz))
}

/// One propagation path of a single hop.
#[derive(Clone, Debug, PartialEq)]
pub struct PathComponent {
    pub gain: C64,
    /// Delay in seconds.
    pub delay: f64,
    /// Arrival direction at the receiving array of this hop (BS or RIS).
    pub arrival: Direction,
    /// Departure direction at the RIS, for RIS-to-BS paths only.
    pub departure: Option<Direction>,
}

/// A UE→RIS→BS path pairing UE-RIS path `p` with RIS-BS path `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadedPath {
    pub ue_ris: usize,
    pub ris_bs: usize,
    pub gain: C64,
    pub delay: f64,
    pub psi_y: f64,
    pub psi_z: f64,
}

/// Generators of the five tensor modes; `ris_*` are indexed by cascaded
/// path, the others by overall path (direct first, then cascaded).
#[derive(Clone, Debug, PartialEq)]
pub struct Generators {
    pub delay: Vec<f64>,
    pub ris_y: Vec<f64>,
    pub ris_z: Vec<f64>,
    pub bs_y: Vec<f64>,
    pub bs_z: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultipathGroundTruth {
    pub direct: Vec<PathComponent>,
    pub ue_ris: Vec<PathComponent>,
    pub ris_bs: Vec<PathComponent>,
    /// Ordered with the UE-RIS index varying fastest: `c = q * P + p`.
    pub cascaded: Vec<CascadedPath>,
}

/// Combines one UE-RIS path with one RIS-BS path.
pub fn cascade_parameters(
    ue_ris: &PathComponent,
    ris_bs: &PathComponent,
    p: usize,
    q: usize,
) -> CascadedPath {
    let a = ue_ris.arrival;
    let d = ris_bs.departure.unwrap_or_default();
    CascadedPath {
        ue_ris: p,
        ris_bs: q,
        gain: ue_ris.gain * ris_bs.gain,
        delay: ue_ris.delay + ris_bs.delay,
        psi_y: a.az.sin() * a.el.cos() + d.az.sin() * d.el.cos(),
        psi_z: a.el.sin() + d.el.sin(),
    }
}

impl MultipathGroundTruth {
    /// Builds the cascaded list from the one-hop components.
    pub fn new(direct: Vec<PathComponent>, ue_ris: Vec<PathComponent>, ris_bs: Vec<PathComponent>) -> Self {
        let mut cascaded = Vec::with_capacity(ue_ris.len() * ris_bs.len());
        for (q, rb) in ris_bs.iter().enumerate() {
            for (p, ur) in ue_ris.iter().enumerate() {
                cascaded.push(cascade_parameters(ur, rb, p, q));
            }
        }
        Self { direct, ue_ris, ris_bs, cascaded }
    }

    pub fn num_direct(&self) -> usize {
        self.direct.len()
    }

    pub fn num_ue_ris(&self) -> usize {
        self.ue_ris.len()
    }

    pub fn num_ris_bs(&self) -> usize {
        self.ris_bs.len()
    }

    pub fn num_cascaded(&self) -> usize {
        self.cascaded.len()
    }

    pub fn rank(&self) -> usize {
        self.direct.len() + self.cascaded.len()
    }

    /// BS arrival direction of overall path `r`.
    pub fn bs_direction(&self, r: usize) -> Direction {
        if r < self.direct.len() {
            self.direct[r].arrival
        } else {
            self.ris_bs[self.cascaded[r - self.direct.len()].ris_bs].arrival
        }
    }

    pub fn delays(&self) -> Vec<f64> {
        self.direct.iter().map(|p| p.delay).chain(self.cascaded.iter().map(|c| c.delay)).collect()
    }

    pub fn gains(&self) -> Vec<C64> {
        self.direct.iter().map(|p| p.gain).chain(self.cascaded.iter().map(|c| c.gain)).collect()
    }

    pub fn generators(&self, cfg: &SystemConfig) -> Generators {
        let r = self.rank();
        let delay = self.delays().iter().map(|&t| cfg.delay_generator(t)).collect();
        let ris_y = self.cascaded.iter().map(|c| cfg.ris_generator(c.psi_y)).collect();
        let ris_z = self.cascaded.iter().map(|c| cfg.ris_generator(c.psi_z)).collect();
        let (bs_y, bs_z) = (0..r).map(|i| cfg.bs_generators(self.bs_direction(i))).unzip();
        Generators { delay, ris_y, ris_z, bs_y, bs_z }
    }

    /// Checks delays against the unambiguous range of the subcarrier grid.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        let limit = cfg.max_delay();
        for d in self.delays() {
            if !(0.0..limit).contains(&d) {
                return Err(ChannelError::DelayAmbiguous { delay: d, limit });
            }
        }
        Ok(())
    }
}

/// Node positions for the geometric channel generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub bs: [f64; 3],
    pub ue: [f64; 3],
    pub ris: [f64; 3],
    /// Rotation of the RIS local frame about the global Z axis, radians.
    /// The BS local frame coincides with the global one.
    pub ris_yaw: f64,
    pub scatterers_direct: Vec<[f64; 3]>,
    pub scatterers_ue_ris: Vec<[f64; 3]>,
    pub scatterers_ris_bs: Vec<[f64; 3]>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn hop(a: [f64; 3], b: [f64; 3]) -> Result<f64> {
    let d = norm(sub(b, a));
    if d <= 0.0 {
        return Err(ChannelError::CoincidentPoints(a, b));
    }
    Ok(d)
}

impl Scene {
    fn to_ris_frame(&self, v: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.ris_yaw.sin_cos();
        [c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]]
    }

    fn bs_direction(&self, towards: [f64; 3]) -> Result<Direction> {
        let v = sub(towards, self.bs);
        if v[0] <= 0.0 {
            return Err(ChannelError::BehindArray(v));
        }
        Ok(Direction::from_vector(v))
    }

    fn ris_direction(&self, towards: [f64; 3]) -> Direction {
        Direction::from_vector(self.to_ris_frame(sub(towards, self.ris)))
    }
}

fn free_space_gain<R: Rng + ?Sized>(wavelength: f64, length: f64, rng: &mut R) -> C64 {
    let phase = rng.random_range(-PI..PI);
    C64::from_polar(wavelength / (4.0 * PI * length), phase)
}

/// Generates one LOS path plus one single-bounce path per scatterer on each
/// link. Gains have free-space magnitude and a uniformly random phase drawn
/// from `rng` in a fixed order (direct, UE-RIS, RIS-BS).
pub fn geometry_to_paths<R: Rng + ?Sized>(
    scene: &Scene,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<MultipathGroundTruth> {
    let lambda = cfg.wavelength();

    let mut direct = Vec::new();
    let mut via = vec![None];
    via.extend(scene.scatterers_direct.iter().map(|s| Some(*s)));
    for s in &via {
        let (len, last) = match s {
            None => (hop(scene.ue, scene.bs)?, scene.ue),
            Some(s) => (hop(scene.ue, *s)? + hop(*s, scene.bs)?, *s),
        };
        direct.push(PathComponent {
            gain: free_space_gain(lambda, len, rng),
            delay: len / SPEED_OF_LIGHT,
            arrival: scene.bs_direction(last)?,
            departure: None,
        });
    }

    let mut ue_ris = Vec::new();
    let mut via = vec![None];
    via.extend(scene.scatterers_ue_ris.iter().map(|s| Some(*s)));
    for s in &via {
        let (len, last) = match s {
            None => (hop(scene.ue, scene.ris)?, scene.ue),
            Some(s) => (hop(scene.ue, *s)? + hop(*s, scene.ris)?, *s),
        };
        ue_ris.push(PathComponent {
            gain: free_space_gain(lambda, len, rng),
            delay: len / SPEED_OF_LIGHT,
            arrival: scene.ris_direction(last),
            departure: None,
        });
    }

    let mut ris_bs = Vec::new();
    let mut via = vec![None];
    via.extend(scene.scatterers_ris_bs.iter().map(|s| Some(*s)));
    for s in &via {
        let (len, first, last) = match s {
            None => (hop(scene.ris, scene.bs)?, scene.bs, scene.ris),
            Some(s) => (hop(scene.ris, *s)? + hop(*s, scene.bs)?, *s, *s),
        };
        ris_bs.push(PathComponent {
            gain: free_space_gain(lambda, len, rng),
            delay: len / SPEED_OF_LIGHT,
            arrival: scene.bs_direction(last)?,
            departure: Some(scene.ris_direction(first)),
        });
    }

    let gt = MultipathGroundTruth::new(direct, ue_ris, ris_bs);
    gt.validate(cfg)?;
    Ok(gt)
}

/// Frequency responses of the three links on one subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkResponses {
    /// UE→BS, length `bs_y * bs_z`.
    pub direct: CVec,
    /// UE→RIS, length `ris_y * ris_z`.
    pub ue_ris: CVec,
    /// RIS→BS, shape `(bs elements) × (ris elements)`.
    pub ris_bs: CMat,
}

/// Subcarrier frequency offset of 0-based subcarrier `k`.
pub fn subcarrier_freq(cfg: &SystemConfig, k: usize) -> f64 {
    k as f64 * cfg.subcarrier_spacing
}

pub fn bs_steering(cfg: &SystemConfig, dir: Direction) -> CVec {
    upa_steering(cfg.bs_y, cfg.bs_z, cfg.bs_spacing, cfg.wavelength(), dir)
}

pub fn ris_steering(cfg: &SystemConfig, dir: Direction) -> CVec {
    upa_steering(cfg.ris_y, cfg.ris_z, cfg.ris_spacing, cfg.wavelength(), dir)
}

/// Channel frequency responses on 0-based subcarrier `k`.
pub fn channel_frequency_response(gt: &MultipathGroundTruth, cfg: &SystemConfig, k: usize) -> LinkResponses {
    let f = subcarrier_freq(cfg, k);
    let phase = |tau: f64| C64::from_polar(1.0, -2.0 * PI * f * tau);

    let mut direct = CVec::zeros(cfg.bs_elements());
    for p in &gt.direct {
        direct += bs_steering(cfg, p.arrival) * (p.gain * phase(p.delay));
    }
    let mut ue_ris = CVec::zeros(cfg.ris_elements());
    for p in &gt.ue_ris {
        ue_ris += ris_steering(cfg, p.arrival) * (p.gain * phase(p.delay));
    }
    let mut ris_bs = CMat::zeros(cfg.bs_elements(), cfg.ris_elements());
    for p in &gt.ris_bs {
        let a_b = bs_steering(cfg, p.arrival);
        let a_r = ris_steering(cfg, p.departure.unwrap_or_default());
        ris_bs += (a_b * a_r.transpose()) * (p.gain * phase(p.delay));
    }
    LinkResponses { direct, ue_ris, ris_bs }
}

/// Mean incident power per RIS element over the pilot subcarriers.
pub fn incident_power(gt: &MultipathGroundTruth, cfg: &SystemConfig) -> f64 {
    let total: f64 = (0..cfg.pilots)
        .map(|k| channel_frequency_response(gt, cfg, k).ue_ris.norm_squared())
        .sum();
    cfg.tx_power * total / (cfg.pilots as f64 * cfg.ris_elements() as f64)
}

/// Amplification factor that exactly spends `budget` W across `elements`
/// RIS elements: `η = sqrt(1 + P_R / (M (P_in + σ_R²)))`.
pub fn amplification_from_budget(budget: f64, incident: f64, ris_noise: f64, elements: usize) -> Result<f64> {
    if budget < 0.0 {
        return Err(ChannelError::NegativeBudget(budget));
    }
    let denom = incident + ris_noise;
    if !(denom > 0.0) {
        return Err(ChannelError::NonPositiveIncident(denom));
    }
    Ok((1.0 + budget / (elements as f64 * denom)).sqrt())
}

/// Power consumed by amplification `eta`, the inverse of
/// [`amplification_from_budget`].
pub fn budget_from_amplification(eta: f64, incident: f64, ris_noise: f64, elements: usize) -> f64 {
    (eta * eta - 1.0) * elements as f64 * (incident + ris_noise)
}
