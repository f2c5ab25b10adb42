//! IMU synthesis and the onboard dead-reckoning estimator.
//!
//! The world frame has gravity along −z. Accelerometers report specific
//! force in the body frame. The estimator is an error-state Kalman filter
//! over (δp, δv, δθ), with the attitude error expressed in the world frame:
//! `q_true = exp(δθ) ⊗ q_est`.

use nalgebra::{Matrix3, Point3, SMatrix, SVector, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consts::GRAVITY;
use crate::vasculature::{AnomalyEvent, BnsState, VesselGraph};

pub type Covariance = SMatrix<f64, 9, 9>;

/// World-frame gravity vector.
pub fn gravity() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -GRAVITY)
}

#[derive(Debug, Error, PartialEq)]
pub enum ImuError {
    #[error("invalid IMU spec: {0}")]
    InvalidSpec(String),
    #[error("anchor {anchor} update requested while the sensor is out of range")]
    OutOfRange { anchor: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSpec {
    pub accel_noise_std: f64,
    pub accel_bias: Vector3<f64>,
    pub gyro_noise_std: f64,
    pub gyro_bias: Vector3<f64>,
    pub sample_rate: f64,
}

impl Default for ImuSpec {
    /// Lowest level of the sweep grid on every axis.
    fn default() -> Self {
        Self::isotropic(0.01, 0.001, 0.01, 0.001)
    }
}

impl ImuSpec {
    /// Noise stds with the same bias value on every axis.
    pub fn isotropic(gyro_noise_std: f64, gyro_bias: f64, accel_noise_std: f64, accel_bias: f64) -> Self {
        Self {
            accel_noise_std,
            accel_bias: Vector3::repeat(accel_bias),
            gyro_noise_std,
            gyro_bias: Vector3::repeat(gyro_bias),
            sample_rate: 100.0,
        }
    }

    pub fn perfect() -> Self {
        Self::isotropic(0.0, 0.0, 0.0, 0.0)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn validate(&self) -> Result<(), ImuError> {
        let finite = self
            .accel_bias
            .iter()
            .chain(self.gyro_bias.iter())
            .all(|x| x.is_finite());
        if !(self.accel_noise_std >= 0.0 && self.gyro_noise_std >= 0.0) {
            return Err(ImuError::InvalidSpec("noise stds must be non-negative".into()));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(ImuError::InvalidSpec("sample_rate must be positive".into()));
        }
        if !finite {
            return Err(ImuError::InvalidSpec("biases must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    pub accel_meas: Vector3<f64>,
    pub gyro_meas: Vector3<f64>,
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Mean velocity over the truth interval `from → to`.
pub fn mean_velocity(from: &BnsState, to: &BnsState) -> Vector3<f64> {
    (to.position - from.position) / (to.sim_time - from.sim_time)
}

/// Noise-free specific force and body rate at `from`, both in its body frame.
///
/// Acceleration is the change between the mean velocity of the preceding
/// interval (`incoming`) and that of `from → to`, so it is a second
/// difference of truth positions and stays exact across junction kinks.
pub fn true_kinematics(incoming: &Vector3<f64>, from: &BnsState, to: &BnsState) -> (Vector3<f64>, Vector3<f64>) {
    let dt = to.sim_time - from.sim_time;
    let accel_world = (mean_velocity(from, to) - incoming) / dt;
    let specific = from.orientation.inverse_transform_vector(&(accel_world - gravity()));
    let rate = (from.orientation.inverse() * to.orientation).scaled_axis() / dt;
    (specific, rate)
}

/// Stateless reading for `from → to`, taking `from.velocity` as the
/// incoming mean velocity (exact when no junction was crossed just before).
///
/// Six standard normals are always drawn so that streams stay aligned
/// across noise levels.
pub fn synthesize_imu<R: Rng + ?Sized>(from: &BnsState, to: &BnsState, spec: &ImuSpec, rng: &mut R) -> ImuSample {
    sample_with(&from.velocity, from, to, spec, rng)
}

fn sample_with<R: Rng + ?Sized>(
    incoming: &Vector3<f64>,
    from: &BnsState,
    to: &BnsState,
    spec: &ImuSpec,
    rng: &mut R,
) -> ImuSample {
    let (specific, rate) = true_kinematics(incoming, from, to);
    let na = gaussian3(rng);
    let ng = gaussian3(rng);
    ImuSample {
        t: from.sim_time,
        accel_meas: specific + spec.accel_bias + na * spec.accel_noise_std,
        gyro_meas: rate + spec.gyro_bias + ng * spec.gyro_noise_std,
    }
}

/// IMU synthesis over a stream of truth states.
#[derive(Debug, Clone, Default)]
pub struct ImuSynth {
    incoming: Option<Vector3<f64>>,
}

impl ImuSynth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        from: &BnsState,
        to: &BnsState,
        spec: &ImuSpec,
        rng: &mut R,
    ) -> ImuSample {
        let incoming = self.incoming.unwrap_or(from.velocity);
        self.incoming = Some(mean_velocity(from, to));
        sample_with(&incoming, from, to, spec, rng)
    }

    /// Mean truth velocity over the latest interval; what the estimator's
    /// velocity represents after a predict.
    pub fn reference_velocity(&self) -> Option<Vector3<f64>> {
        self.incoming
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    pub position_est: Point3<f64>,
    pub velocity_est: Vector3<f64>,
    pub orientation_est: UnitQuaternion<f64>,
    pub covariance: Covariance,
    pub distance_since_reset: f64,
    pub t: f64,
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn symmetrize(p: &mut Covariance) {
    let t = p.transpose();
    *p = (*p + t) * 0.5;
}

impl EstimatorState {
    /// Estimator initialized exactly on the true state with zero covariance.
    pub fn from_truth(truth: &BnsState) -> Self {
        Self {
            position_est: truth.position,
            velocity_est: truth.velocity,
            orientation_est: truth.orientation,
            covariance: Covariance::zeros(),
            distance_since_reset: 0.0,
            t: truth.sim_time,
        }
    }

    pub fn position_std(&self) -> Vector3<f64> {
        Vector3::new(
            self.covariance[(0, 0)].max(0.0).sqrt(),
            self.covariance[(1, 1)].max(0.0).sqrt(),
            self.covariance[(2, 2)].max(0.0).sqrt(),
        )
    }

    // Applies an error-state correction and renormalizes.
    fn inject(&mut self, dx: &SVector<f64, 9>) {
        self.position_est += Vector3::new(dx[0], dx[1], dx[2]);
        self.velocity_est += Vector3::new(dx[3], dx[4], dx[5]);
        let dtheta = Vector3::new(dx[6], dx[7], dx[8]);
        let q = UnitQuaternion::from_scaled_axis(dtheta) * self.orientation_est;
        self.orientation_est = UnitQuaternion::new_normalize(q.into_inner());
    }

    /// Joseph-form update for a linear measurement with residual `y`.
    fn kalman_update<const M: usize>(&mut self, h: &SMatrix<f64, M, 9>, y: &SVector<f64, M>, r: &SMatrix<f64, M, M>) {
        let p = self.covariance;
        let s = h * p * h.transpose() + r;
        let Some(s_inv) = s.try_inverse() else {
            return;
        };
        let k = p * h.transpose() * s_inv;
        let ikh = Covariance::identity() - k * h;
        let mut p_new = ikh * p * ikh.transpose() + k * r * k.transpose();
        symmetrize(&mut p_new);
        self.covariance = p_new;
        self.inject(&(k * y));
    }
}

/// Strapdown propagation plus covariance prediction.
///
/// Velocity is carried on the half-step grid: the incoming value is the mean
/// over the previous interval, the kick yields the mean over the next one,
/// and position advances by that mid-interval velocity.
pub fn predict(state: &EstimatorState, sample: &ImuSample, spec: &ImuSpec, dt: f64) -> EstimatorState {
    let rot = state.orientation_est;
    let f_world = rot * sample.accel_meas;
    let v_new = state.velocity_est + (f_world + gravity()) * dt;
    let dp = v_new * dt;
    let q_new = rot * UnitQuaternion::from_scaled_axis(sample.gyro_meas * dt);

    let tilt = -skew(&f_world) * dt;
    let mut f = Covariance::identity();
    f.fixed_view_mut::<3, 3>(0, 3).copy_from(&(Matrix3::identity() * dt));
    f.fixed_view_mut::<3, 3>(0, 6).copy_from(&(tilt * dt));
    f.fixed_view_mut::<3, 3>(3, 6).copy_from(&tilt);

    // Velocity noise enters before the drift, so it also reaches position.
    let accel_var = (spec.accel_noise_std.powi(2) + spec.accel_bias.norm_squared() / 3.0) * dt * dt;
    let gyro_var = (spec.gyro_noise_std.powi(2) + spec.gyro_bias.norm_squared() / 3.0) * dt * dt;
    let mut q = Covariance::zeros();
    for i in 0..3 {
        q[(i, i)] = accel_var * dt * dt;
        q[(i, 3 + i)] = accel_var * dt;
        q[(3 + i, i)] = accel_var * dt;
        q[(3 + i, 3 + i)] = accel_var;
        q[(6 + i, 6 + i)] = gyro_var;
    }
    let mut p = f * state.covariance * f.transpose() + q;
    symmetrize(&mut p);

    EstimatorState {
        position_est: state.position_est + dp,
        velocity_est: v_new,
        orientation_est: UnitQuaternion::new_normalize(q_new.into_inner()),
        covariance: p,
        distance_since_reset: state.distance_since_reset + dp.norm(),
        t: state.t + dt,
    }
}

/// Which point the reset box is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetReference {
    /// Anchor centre on the skin, as logged by the anchor.
    #[default]
    AnchorCenter,
    /// The sensor's true position (isolates dead-reckoning drift).
    TruePosition,
}

/// Bounds of the uniform location error applied at a reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetModel {
    pub reference: ResetReference,
    pub half_width: f64,
    pub skin_thickness: f64,
}

impl Default for ResetModel {
    fn default() -> Self {
        Self {
            reference: ResetReference::AnchorCenter,
            half_width: 0.025,
            skin_thickness: 0.0025,
        }
    }
}

impl ResetModel {
    pub fn box_diagonal(&self) -> f64 {
        (2.0 * self.half_width.powi(2) + self.skin_thickness.powi(2)).sqrt()
    }
}

/// What the caller knows at an anchor visit.
#[derive(Debug, Clone, Copy)]
pub struct ResetFix<'a> {
    pub anchor_id: u32,
    /// Anchor location on the skin.
    pub anchor_center: Point3<f64>,
    /// Communication-gate verdict for this step.
    pub in_range: bool,
    pub truth: &'a BnsState,
    /// Mean truth velocity over the last interval (see [`ImuSynth::reference_velocity`]).
    pub reference_velocity: Vector3<f64>,
}

/// Resets the estimator at an anchor visit; refused when out of range.
pub fn anchor_update<R: Rng + ?Sized>(
    state: &EstimatorState,
    fix: &ResetFix<'_>,
    model: &ResetModel,
    rng: &mut R,
) -> Result<EstimatorState, ImuError> {
    if !fix.in_range {
        return Err(ImuError::OutOfRange { anchor: fix.anchor_id });
    }
    let (w, t) = (model.half_width, model.skin_thickness);
    let ex = if w > 0.0 { rng.random_range(-w..=w) } else { 0.0 };
    let ey = if w > 0.0 { rng.random_range(-w..=w) } else { 0.0 };
    let ez = if t > 0.0 { rng.random_range(-t..=0.0) } else { 0.0 };
    let base = match model.reference {
        ResetReference::AnchorCenter => fix.anchor_center,
        ResetReference::TruePosition => fix.truth.position,
    };
    let mut cov = Covariance::zeros();
    cov[(0, 0)] = w * w / 3.0;
    cov[(1, 1)] = w * w / 3.0;
    cov[(2, 2)] = t * t / 3.0;
    Ok(EstimatorState {
        position_est: base + Vector3::new(ex, ey, ez),
        velocity_est: fix.reference_velocity,
        orientation_est: fix.truth.orientation,
        covariance: cov,
        distance_since_reset: 0.0,
        t: state.t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselConstraint {
    pub enabled: bool,
    pub std_m: f64,
}

impl Default for VesselConstraint {
    fn default() -> Self {
        Self {
            enabled: false,
            std_m: 0.001,
        }
    }
}

/// Pseudo-measurement pulling the position estimate onto the nearest centerline.
///
/// Interior matches constrain only the two directions normal to the vessel;
/// matches clamped to a segment end constrain all three.
pub fn vessel_constraint_update(
    state: &EstimatorState,
    graph: &VesselGraph,
    constraint: &VesselConstraint,
) -> EstimatorState {
    if !constraint.enabled {
        return *state;
    }
    let m = graph.nearest_centerline(&state.position_est);
    let seg = graph.segment(m.segment_id).expect("match refers to graph segment");
    let offset = state.position_est - m.point;
    let var = constraint.std_m * constraint.std_m;
    let mut out = *state;
    let interior = m.arc_offset > 0.0 && m.arc_offset < seg.length();
    if interior {
        let t = seg.tangent();
        let helper = if t.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = t.cross(&helper).normalize();
        let e2 = t.cross(&e1);
        let mut h = SMatrix::<f64, 2, 9>::zeros();
        for j in 0..3 {
            h[(0, j)] = e1[j];
            h[(1, j)] = e2[j];
        }
        let y = SVector::<f64, 2>::new(-e1.dot(&offset), -e2.dot(&offset));
        out.kalman_update(&h, &y, &(SMatrix::<f64, 2, 2>::identity() * var));
    } else {
        let mut h = SMatrix::<f64, 3, 9>::zeros();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        out.kalman_update(&h, &(-offset), &(Matrix3::identity() * var));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StampedEvent {
    pub event_id: u32,
    pub true_location: Point3<f64>,
    pub estimated_location: Point3<f64>,
    pub distance_since_reset_at_stamp: f64,
    pub error_m: f64,
}

pub fn stamp_event(state: &EstimatorState, event: &AnomalyEvent) -> StampedEvent {
    StampedEvent {
        event_id: event.id,
        true_location: event.true_location,
        estimated_location: state.position_est,
        distance_since_reset_at_stamp: state.distance_since_reset,
        error_m: (state.position_est - event.true_location).norm(),
    }
}

/// Smallest eigenvalue of the symmetrized covariance.
pub fn min_eigenvalue(p: &Covariance) -> f64 {
    let mut s = *p;
    symmetrize(&mut s);
    s.symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vasculature::{load_graph, stream_rng, GraphDocument, TrajectoryIter};
    use approx::assert_relative_eq;

    fn straight_graph() -> VesselGraph {
        load_graph(
            &GraphDocument::from_json_str(
                r#"{"segments":[
                {"id":1,"kind":"artery","start_xyz_m":[0,0,-0.02],"end_xyz_m":[1,0,-0.02],"flow_speed_mps":0.1,
                 "downstream":[{"id":2,"p":1.0}]},
                {"id":2,"kind":"vein","start_xyz_m":[1,0,-0.02],"end_xyz_m":[0,0,-0.02],"flow_speed_mps":0.1,
                 "downstream":[{"id":1,"p":1.0}]}],
               "injection_points":[1]}"#,
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn assert_healthy(s: &EstimatorState) {
        assert!(min_eigenvalue(&s.covariance) >= -1e-12);
        assert_relative_eq!(s.covariance, s.covariance.transpose(), epsilon = 1e-18);
        assert!((s.orientation_est.quaternion().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn straight_motion_measures_gravity_only() {
        let g = straight_graph();
        let a = g.state_at(1, 0.1, 0.0).unwrap();
        let b = g.state_at(1, 0.101, 0.01).unwrap();
        let s = synthesize_imu(&a, &b, &ImuSpec::perfect(), &mut stream_rng(0, 1));
        let expected = a.orientation.inverse_transform_vector(&Vector3::new(0.0, 0.0, GRAVITY));
        assert_relative_eq!(s.accel_meas, expected, epsilon = 1e-12);
        assert_relative_eq!(s.gyro_meas, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn accel_bias_is_additive() {
        let g = straight_graph();
        let a = g.state_at(1, 0.1, 0.0).unwrap();
        let b = g.state_at(1, 0.101, 0.01).unwrap();
        let mut spec = ImuSpec::perfect();
        let clean = synthesize_imu(&a, &b, &spec, &mut stream_rng(0, 1));
        spec.accel_bias = Vector3::new(0.1, 0.0, 0.0);
        let biased = synthesize_imu(&a, &b, &spec, &mut stream_rng(0, 1));
        assert_eq!(biased.accel_meas - clean.accel_meas, Vector3::new(0.1, 0.0, 0.0));
    }

    #[test]
    fn noise_statistics_match_spec() {
        let g = straight_graph();
        let a = g.state_at(1, 0.1, 0.0).unwrap();
        let b = g.state_at(1, 0.1, 0.01).unwrap();
        let mut spec = ImuSpec::isotropic(0.0, 0.0, 0.05, 0.02);
        spec.accel_bias = Vector3::new(0.02, -0.01, 0.0);
        let (truth, _) = true_kinematics(&a.velocity, &a, &b);
        let mut rng = stream_rng(11, 1);
        let n = 100_000;
        let mut sum = Vector3::zeros();
        let mut sq = Vector3::zeros();
        for _ in 0..n {
            let e = synthesize_imu(&a, &b, &spec, &mut rng).accel_meas - truth;
            sum += e;
            sq += e.component_mul(&e);
        }
        let mean = sum / n as f64;
        for i in 0..3 {
            let std = (sq[i] / n as f64 - mean[i] * mean[i]).sqrt();
            assert!((std / 0.05 - 1.0).abs() < 0.02, "axis {i} std {std}");
            assert!((mean[i] - spec.accel_bias[i]).abs() < 3.0 * 0.05 / (n as f64).sqrt());
        }
    }

    #[test]
    fn stationary_input_keeps_pose_and_grows_covariance() {
        let g = straight_graph();
        let truth = g.state_at(1, 0.3, 0.0).unwrap();
        let mut s = EstimatorState::from_truth(&truth);
        s.velocity_est = Vector3::zeros();
        let spec = ImuSpec::isotropic(0.01, 0.0, 0.02, 0.0);
        let sample = ImuSample {
            t: 0.0,
            accel_meas: s
                .orientation_est
                .inverse_transform_vector(&Vector3::new(0.0, 0.0, GRAVITY)),
            gyro_meas: Vector3::zeros(),
        };
        let mut trace = s.covariance.trace();
        for _ in 0..500 {
            let next = predict(&s, &sample, &spec, 0.01);
            assert!(next.covariance.trace() > trace);
            trace = next.covariance.trace();
            assert_healthy(&next);
            s = next;
        }
        assert_relative_eq!(s.position_est, truth.position, epsilon = 1e-12);
        assert!(s.orientation_est.angle_to(&truth.orientation) < 1e-12);
    }

    #[test]
    fn perfect_imu_tracks_loop() {
        let g = straight_graph();
        let dt = 0.01;
        let mut it = TrajectoryIter::new(&g, 1, 100.0, dt, 5).unwrap();
        let first = it.next().unwrap();
        let mut est = EstimatorState::from_truth(&first);
        let mut prev = first;
        let mut rng = stream_rng(5, 1);
        let mut synth = ImuSynth::new();
        let spec = ImuSpec::perfect();
        let mut worst: f64 = 0.0;
        for truth in it {
            let sample = synth.sample(&prev, &truth, &spec, &mut rng);
            est = predict(&est, &sample, &spec, dt);
            worst = worst.max((est.position_est - truth.position).norm());
            prev = truth;
        }
        assert!(worst <= 1e-3, "worst {worst}");
    }

    #[test]
    fn degenerate_reset_box_lands_on_reference() {
        let g = straight_graph();
        let truth = g.state_at(1, 0.5, 0.0).unwrap();
        let s = EstimatorState::from_truth(&truth);
        let model = ResetModel {
            reference: ResetReference::AnchorCenter,
            half_width: 0.0,
            skin_thickness: 0.0,
        };
        let c = Point3::new(0.5, 0.0, 0.0);
        let mut fix = ResetFix {
            anchor_id: 4,
            anchor_center: c,
            in_range: true,
            truth: &truth,
            reference_velocity: truth.velocity,
        };
        let r = anchor_update(&s, &fix, &model, &mut stream_rng(0, 2)).unwrap();
        assert_eq!(r.position_est, c);
        assert_eq!(r.covariance.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::zeros());
        assert_eq!(r.distance_since_reset, 0.0);
        fix.in_range = false;
        assert_eq!(
            anchor_update(&s, &fix, &model, &mut stream_rng(0, 2)),
            Err(ImuError::OutOfRange { anchor: 4 })
        );
    }

    #[test]
    fn reset_error_is_uniform_in_the_box() {
        let g = straight_graph();
        let truth = g.state_at(1, 0.5, 0.0).unwrap();
        let s = EstimatorState::from_truth(&truth);
        let model = ResetModel::default();
        let c = Point3::new(0.5, 0.0, 0.0);
        let mut rng = stream_rng(3, 2);
        let n = 100_000;
        let fix = ResetFix {
            anchor_id: 1,
            anchor_center: c,
            in_range: true,
            truth: &truth,
            reference_velocity: truth.velocity,
        };
        let mut ex = Vec::with_capacity(n);
        for _ in 0..n {
            let r = anchor_update(&s, &fix, &model, &mut rng).unwrap();
            let e = r.position_est - c;
            assert!((-0.0025..=0.0).contains(&e.z));
            assert!(e.norm() <= model.box_diagonal());
            ex.push(e.x);
        }
        // Kolmogorov–Smirnov against U(-w, w): p > 0.01 needs D < 1.628 / sqrt(n).
        ex.sort_by(f64::total_cmp);
        let w = model.half_width;
        let d = ex
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let cdf = (x + w) / (2.0 * w);
                (cdf - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn vessel_constraint_scalar_oracle() {
        let g = straight_graph();
        let truth = g.state_at(1, 0.5, 0.0).unwrap();
        let mut s = EstimatorState::from_truth(&truth);
        s.position_est.y += 0.010;
        s.covariance = Covariance::identity() * 1e-4;
        let c = VesselConstraint {
            enabled: true,
            std_m: 0.001,
        };
        let out = vessel_constraint_update(&s, &g, &c);
        // k = 100 / (100 + 1) on the offset axis
        assert_relative_eq!(out.position_est.y, 0.010 / 101.0, epsilon = 1e-12);
        assert_relative_eq!(out.covariance[(1, 1)], 1e-4 / 101.0, max_relative = 1e-9);
        assert_relative_eq!(out.position_est.x, truth.position.x, epsilon = 1e-15);
        assert_healthy(&out);

        let on = EstimatorState {
            covariance: Covariance::identity() * 1e-4,
            ..EstimatorState::from_truth(&truth)
        };
        let out = vessel_constraint_update(&on, &g, &c);
        assert_relative_eq!(out.position_est, on.position_est, epsilon = 1e-15);
        assert!(out.covariance.trace() < on.covariance.trace());

        let off = VesselConstraint::default();
        assert_eq!(vessel_constraint_update(&s, &g, &off), s);
    }

    #[test]
    fn stamp_reports_euclidean_error() {
        let g = straight_graph();
        let truth = g.state_at(1, 0.5, 0.0).unwrap();
        let mut s = EstimatorState::from_truth(&truth);
        s.position_est.x += 0.003;
        s.position_est.z -= 0.004;
        s.distance_since_reset = 0.2;
        let ev = AnomalyEvent::on_segment(&g, 9, 1, 0.5, 0.001).unwrap();
        let st = stamp_event(&s, &ev);
        assert_relative_eq!(st.error_m, 0.005, epsilon = 1e-15);
        assert_eq!(st.distance_since_reset_at_stamp, 0.2);
    }
}
