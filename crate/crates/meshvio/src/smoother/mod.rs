//! Fixed-lag smoother: maintains the factor graph over a receding keyframe
//! horizon, promotes plane-associated landmarks to explicit variables, spawns
//! gated plane variables, optimizes, and marginalizes exiting variables into
//! a dense Gaussian prior.

mod values;

pub use values::{Symbol, SymbolKind, Value, Values, VelBias};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::{Matrix2, Vector3};
use thiserror::Error;

use crate::factors::{
    propagate_navstate, Factor, ImuFactor, LinearGaussianFactor, Measurement, NavState,
    NoiseModels, PixelMeasurement, PriorFactor, ProjectionFactor, RegularityFactor,
    StructurelessFactor, GRAVITY,
};
use crate::geometry::{s2_tangent_basis, Plane, Pose};
use crate::mesher::LandmarkId;
use crate::optimizer::{self, OptStats, OptimizeConfig, OptimizerError};
use crate::regularity::PlaneCandidate;

#[derive(Debug, Error)]
pub enum SmootherError {
    #[error("keyframe {0} arrived without a preintegrated IMU interval")]
    MissingImuInterval(u64),
    #[error("first keyframe requires a prior state")]
    MissingPrior,
    #[error("keyframe ids must be strictly increasing (got {0})")]
    NonMonotonicKeyframe(u64),
    #[error("marginalization of unknown symbol {0}")]
    UnknownSymbol(String),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

/// Receding-horizon policy. The lag is counted in keyframes, which at a
/// fixed keyframe rate is equivalent to a time horizon.
#[derive(Debug, Clone, Copy)]
pub struct HorizonPolicy {
    pub lag_keyframes: usize,
    pub max_planes: usize,
}

impl Default for HorizonPolicy {
    fn default() -> Self {
        HorizonPolicy {
            lag_keyframes: 20,
            max_planes: 5,
        }
    }
}

/// Which factor families the pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineVariant {
    /// Structureless factors only.
    S,
    /// Structureless + projection factors for plane-associated landmarks,
    /// no regularity factors.
    Sp,
    /// Structureless + projection + regularity factors.
    Spr,
}

impl PipelineVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            PipelineVariant::S => "s",
            PipelineVariant::Sp => "sp",
            PipelineVariant::Spr => "spr",
        }
    }
}

/// Gating thresholds for spawning a plane variable.
#[derive(Debug, Clone, Copy)]
pub struct PlaneGating {
    /// Minimum number of associated landmarks present as variables.
    pub min_landmarks: usize,
    /// Both eigenvalues of the in-plane landmark scatter must exceed this
    /// (m^2), rejecting collinear supports.
    pub min_scatter_eigenvalue: f64,
}

impl Default for PlaneGating {
    fn default() -> Self {
        PlaneGating {
            min_landmarks: 3,
            min_scatter_eigenvalue: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmootherConfig {
    pub variant: PipelineVariant,
    pub policy: HorizonPolicy,
    pub noise: NoiseModels,
    pub camera: crate::factors::CameraModel,
    pub optimize: OptimizeConfig,
    pub gating: PlaneGating,
}

/// Everything the front-end hands over for one keyframe.
#[derive(Debug, Clone)]
pub struct KeyframeData {
    pub id: u64,
    pub timestamp: f64,
    /// Required for every keyframe but the first.
    pub pim: Option<crate::factors::PreintegratedImu>,
    /// Required for the first keyframe: the prior state anchoring the world
    /// frame.
    pub prior: Option<NavState>,
    pub measurements: Vec<Measurement>,
    /// Detector candidates matched to already-tracked planes (candidate,
    /// plane index).
    pub matched_planes: Vec<(PlaneCandidate, u64)>,
    /// Detector candidates with no tracked counterpart.
    pub new_candidates: Vec<PlaneCandidate>,
}

impl KeyframeData {
    pub fn empty(id: u64, timestamp: f64) -> Self {
        KeyframeData {
            id,
            timestamp,
            pim: None,
            prior: None,
            measurements: Vec::new(),
            matched_planes: Vec::new(),
            new_candidates: Vec::new(),
        }
    }
}

/// Why a plane candidate was not turned into a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpawnRejection {
    TooFewLandmarks,
    DegenerateSupport,
    PlaneCapReached,
}

/// Result of a spawn attempt; rejection is a value, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpawnOutcome {
    Accepted(u64),
    Rejected(SpawnRejection),
}

/// The factor graph: an ordered sequence of typed factors.
#[derive(Debug, Clone, Default)]
pub struct FactorGraph {
    factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn new() -> Self {
        FactorGraph::default()
    }

    pub fn add(&mut self, factor: Factor) {
        self.factors.push(factor);
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn retain<F: FnMut(&Factor) -> bool>(&mut self, keep: F) {
        self.factors.retain(keep);
    }

    /// Stable one-line description per factor, for graph comparisons.
    pub fn describe(&self) -> Vec<String> {
        self.factors
            .iter()
            .map(|f| {
                let kind = match f {
                    Factor::Prior(_) => "prior",
                    Factor::Imu(_) => "imu",
                    Factor::Projection(_) => "projection",
                    Factor::Structureless(_) => "structureless",
                    Factor::Regularity(_) => "regularity",
                    Factor::LinearGaussian(_) => "linear",
                };
                let keys: Vec<String> = f.keys().iter().map(|k| k.to_string()).collect();
                format!("{}({})", kind, keys.join(","))
            })
            .collect()
    }
}

/// Schur-complement marginalization of `exiting` variables.
///
/// Every factor touching an exiting symbol is linearized at the current
/// values and folded; the Schur complement onto the Markov blanket becomes a
/// dense Gaussian prior factor, the folded factors and exiting variables are
/// removed. An empty exiting set leaves the graph unchanged.
pub fn marginalize(
    graph: &mut FactorGraph,
    values: &mut Values,
    exiting: &BTreeSet<Symbol>,
) -> Result<(), SmootherError> {
    if exiting.is_empty() {
        return Ok(());
    }
    for s in exiting {
        if !values.contains(s) {
            return Err(SmootherError::UnknownSymbol(s.to_string()));
        }
    }
    let touching: Vec<usize> = graph
        .factors
        .iter()
        .enumerate()
        .filter(|(_, f)| f.keys().iter().any(|k| exiting.contains(k)))
        .map(|(i, _)| i)
        .collect();

    let mut blanket: BTreeSet<Symbol> = BTreeSet::new();
    for &i in &touching {
        for k in graph.factors[i].keys() {
            if !exiting.contains(k) {
                blanket.insert(*k);
            }
        }
    }

    if !touching.is_empty() {
        let order: Vec<Symbol> = exiting.iter().chain(blanket.iter()).copied().collect();
        let fold: Vec<&Factor> = touching.iter().map(|&i| &graph.factors[i]).collect();
        let (h, g) = optimizer::information_of(&fold, values, &order);
        let ne: usize = exiting.iter().map(|s| s.dim()).sum();
        let nb: usize = blanket.iter().map(|s| s.dim()).sum();

        if nb > 0 {
            let h_ee = h.view((0, 0), (ne, ne)).into_owned();
            let h_be = h.view((ne, 0), (nb, ne)).into_owned();
            let h_bb = h.view((ne, ne), (nb, nb)).into_owned();
            let g_e = g.rows(0, ne).into_owned();
            let g_b = g.rows(ne, nb).into_owned();

            // Pseudo-inverse of the exiting block: flat (unconstrained)
            // directions carry no information and are dropped.
            let sym = (&h_ee + h_ee.transpose()) * 0.5;
            let eig = sym.symmetric_eigen();
            let maxev = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
            let mut pinv = nalgebra::DMatrix::zeros(ne, ne);
            for (i, &ev) in eig.eigenvalues.iter().enumerate() {
                if ev > maxev * 1e-10 && ev > 0.0 {
                    let v = eig.eigenvectors.column(i);
                    pinv += v * v.transpose() / ev;
                }
            }
            let lambda = &h_bb - &h_be * &pinv * h_be.transpose();
            let eta = g_b - &h_be * pinv * g_e;

            let blanket_keys: Vec<Symbol> = blanket.iter().copied().collect();
            let lin: Vec<Value> = blanket_keys
                .iter()
                .map(|k| *values.get(k).expect("blanket value"))
                .collect();
            let prior = LinearGaussianFactor::from_information(blanket_keys, lin, &lambda, &eta);
            let keep: BTreeSet<usize> = touching.iter().copied().collect();
            let mut idx = 0;
            graph.factors.retain(|_| {
                let drop = keep.contains(&idx);
                idx += 1;
                !drop
            });
            if prior.dim() > 0 {
                graph.add(Factor::LinearGaussian(prior));
            }
        } else {
            let keep: BTreeSet<usize> = touching.iter().copied().collect();
            let mut idx = 0;
            graph.factors.retain(|_| {
                let drop = keep.contains(&idx);
                idx += 1;
                !drop
            });
        }
    }

    for s in exiting {
        values.remove(s);
    }
    debug_assert!(graph
        .factors
        .iter()
        .all(|f| f.keys().iter().all(|k| !exiting.contains(k))));
    Ok(())
}

/// What one marginalization round removed.
#[derive(Debug, Clone, Default)]
pub struct MarginalizationSummary {
    pub exited_keyframes: Vec<u64>,
    /// Landmarks gone from the horizon (both explicit and structureless).
    pub exited_landmarks: BTreeSet<LandmarkId>,
    pub exited_planes: BTreeSet<u64>,
}

/// The fixed-lag smoother.
pub struct FixedLagSmoother {
    config: SmootherConfig,
    graph: FactorGraph,
    values: Values,
    keyframes: VecDeque<u64>,
    timestamps: BTreeMap<u64, f64>,
    /// Observation history of structureless (unpromoted) landmarks.
    observations: BTreeMap<LandmarkId, Vec<(u64, PixelMeasurement)>>,
    dirty_structureless: BTreeSet<LandmarkId>,
    promoted: BTreeSet<LandmarkId>,
    tracked_planes: BTreeSet<u64>,
    next_plane_index: u64,
    regularity_pairs: BTreeSet<(LandmarkId, u64)>,
    /// Keyframe poses captured when they left the horizon.
    finalized: Vec<(f64, Pose)>,
}

impl FixedLagSmoother {
    pub fn new(config: SmootherConfig) -> Self {
        FixedLagSmoother {
            config,
            graph: FactorGraph::new(),
            values: Values::new(),
            keyframes: VecDeque::new(),
            timestamps: BTreeMap::new(),
            observations: BTreeMap::new(),
            dirty_structureless: BTreeSet::new(),
            promoted: BTreeSet::new(),
            tracked_planes: BTreeSet::new(),
            next_plane_index: 0,
            regularity_pairs: BTreeSet::new(),
            finalized: Vec::new(),
        }
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn config(&self) -> &SmootherConfig {
        &self.config
    }

    pub fn keyframes(&self) -> impl Iterator<Item = &u64> {
        self.keyframes.iter()
    }

    pub fn timestamp_of(&self, keyframe: u64) -> Option<f64> {
        self.timestamps.get(&keyframe).copied()
    }

    pub fn pose_of(&self, keyframe: u64) -> Option<&Pose> {
        self.values.pose(&Symbol::pose(keyframe))
    }

    pub fn state_of(&self, keyframe: u64) -> Option<NavState> {
        let pose = self.values.pose(&Symbol::pose(keyframe))?;
        let vb = self.values.vel_bias(&Symbol::vel_bias(keyframe))?;
        Some(NavState::from_parts(pose, vb))
    }

    /// Tracked plane variables, by index.
    pub fn tracked_planes(&self) -> Vec<(u64, Plane)> {
        self.tracked_planes
            .iter()
            .filter_map(|idx| self.values.plane(&Symbol::plane(*idx)).map(|p| (*idx, *p)))
            .collect()
    }

    pub fn promoted_landmarks(&self) -> &BTreeSet<LandmarkId> {
        &self.promoted
    }

    /// Poses finalized by marginalization so far.
    pub fn finalized_trajectory(&self) -> &[(f64, Pose)] {
        &self.finalized
    }

    /// Current best 3D estimate of every landmark in the horizon: variable
    /// values for promoted landmarks, fresh triangulations for structureless
    /// ones (skipped when degenerate).
    pub fn landmark_estimates(&self) -> BTreeMap<LandmarkId, Vector3<f64>> {
        let mut out = BTreeMap::new();
        for lm in &self.promoted {
            if let Some(p) = self.values.landmark(&Symbol::landmark(*lm)) {
                out.insert(*lm, *p);
            }
        }
        for (lm, obs) in &self.observations {
            let tri: Vec<(Pose, PixelMeasurement)> = obs
                .iter()
                .filter_map(|(kf, px)| self.values.pose(&Symbol::pose(*kf)).map(|p| (*p, *px)))
                .collect();
            if tri.is_empty() {
                continue;
            }
            if let Ok((point, _)) = triangulate_landmark_checked(&tri, &self.config.camera) {
                out.insert(*lm, point);
            }
        }
        out
    }

    /// Appends one keyframe's variables and factors.
    pub fn add_keyframe(&mut self, data: KeyframeData) -> Result<(), SmootherError> {
        if let Some(last) = self.keyframes.back() {
            if data.id <= *last {
                return Err(SmootherError::NonMonotonicKeyframe(data.id));
            }
        }

        if self.keyframes.is_empty() {
            let prior = data.prior.ok_or(SmootherError::MissingPrior)?;
            self.values
                .insert(Symbol::pose(data.id), Value::Pose(prior.pose()));
            self.values
                .insert(Symbol::vel_bias(data.id), Value::VelBias(prior.vel_bias()));
            self.graph.add(Factor::Prior(PriorFactor::new(
                data.id,
                prior,
                &self.config.noise,
            )));
        } else {
            let prev = *self.keyframes.back().unwrap();
            let pim = data
                .pim
                .clone()
                .ok_or(SmootherError::MissingImuInterval(data.id))?;
            let prev_state = self.state_of(prev).expect("previous state present");
            let predicted = propagate_navstate(&prev_state, &pim, &GRAVITY);
            self.values
                .insert(Symbol::pose(data.id), Value::Pose(predicted.pose()));
            self.values.insert(
                Symbol::vel_bias(data.id),
                Value::VelBias(predicted.vel_bias()),
            );
            self.graph.add(Factor::Imu(ImuFactor::new(
                prev,
                data.id,
                pim,
                GRAVITY,
                &self.config.noise.imu,
            )));
        }
        self.keyframes.push_back(data.id);
        self.timestamps.insert(data.id, data.timestamp);

        // Observations: projection factors for promoted landmarks, history
        // for structureless ones.
        let mut measurements = data.measurements;
        measurements.sort_by_key(|m| m.landmark);
        for m in measurements {
            if self.promoted.contains(&m.landmark) {
                self.graph.add(Factor::Projection(ProjectionFactor::new(
                    data.id,
                    m.landmark,
                    m.pixel,
                    self.config.camera,
                    self.config.noise.pixel_sigma,
                )));
            } else {
                self.observations
                    .entry(m.landmark)
                    .or_default()
                    .push((data.id, m.pixel));
                self.dirty_structureless.insert(m.landmark);
            }
        }

        // Plane handling: promotion in SP and SPR, plane variables and
        // regularity factors in SPR only.
        if self.config.variant != PipelineVariant::S {
            let mut associated: BTreeSet<LandmarkId> = BTreeSet::new();
            for (cand, _) in &data.matched_planes {
                associated.extend(cand.supporting_landmarks.iter().copied());
            }
            for cand in &data.new_candidates {
                associated.extend(cand.supporting_landmarks.iter().copied());
            }
            for lm in associated {
                self.try_promote(lm);
            }

            if self.config.variant == PipelineVariant::Spr {
                for (cand, plane_idx) in &data.matched_planes {
                    self.add_regularity_factors(&cand.supporting_landmarks, *plane_idx);
                }
                let new_candidates = data.new_candidates;
                for cand in new_candidates {
                    self.spawn_plane(&cand);
                }
            }
        }

        self.rebuild_structureless();
        Ok(())
    }

    /// Turns a structureless landmark into an explicit variable with
    /// retroactive projection factors for all stored observations. Landmarks
    /// with degenerate triangulation stay structureless for now.
    fn try_promote(&mut self, landmark: LandmarkId) {
        if self.promoted.contains(&landmark) {
            return;
        }
        let Some(obs) = self.observations.get(&landmark) else {
            return;
        };
        let tri: Vec<(Pose, PixelMeasurement)> = obs
            .iter()
            .filter_map(|(kf, px)| self.values.pose(&Symbol::pose(*kf)).map(|p| (*p, *px)))
            .collect();
        if tri.is_empty() {
            return;
        }
        let Ok((point, _)) = triangulate_landmark_checked(&tri, &self.config.camera) else {
            return;
        };
        self.values
            .insert(Symbol::landmark(landmark), Value::Landmark(point));
        let obs = self.observations.remove(&landmark).unwrap();
        for (kf, px) in obs {
            self.graph.add(Factor::Projection(ProjectionFactor::new(
                kf,
                landmark,
                px,
                self.config.camera,
                self.config.noise.pixel_sigma,
            )));
        }
        self.dirty_structureless.remove(&landmark);
        self.graph.retain(|f| match f {
            Factor::Structureless(s) => s.landmark_id() != Some(landmark),
            _ => true,
        });
        self.promoted.insert(landmark);
    }

    /// Adds regularity factors between a plane and the promoted landmarks of
    /// a candidate, skipping pairs that already exist.
    fn add_regularity_factors(&mut self, landmarks: &BTreeSet<LandmarkId>, plane_idx: u64) {
        if !self.tracked_planes.contains(&plane_idx) {
            return;
        }
        for lm in landmarks {
            if !self.promoted.contains(lm) {
                continue;
            }
            if !self.values.contains(&Symbol::landmark(*lm)) {
                continue;
            }
            if self.regularity_pairs.insert((*lm, plane_idx)) {
                self.graph.add(Factor::Regularity(RegularityFactor::new(
                    *lm,
                    plane_idx,
                    self.config.noise.regularity_sigma,
                )));
            }
        }
    }

    /// Gates and, if accepted, inserts a plane variable for a new candidate:
    /// enough associated landmark variables, non-degenerate in-plane scatter,
    /// and room under the plane cap.
    pub fn spawn_plane(&mut self, candidate: &PlaneCandidate) -> SpawnOutcome {
        let present: Vec<Vector3<f64>> = candidate
            .supporting_landmarks
            .iter()
            .filter_map(|lm| self.values.landmark(&Symbol::landmark(*lm)).copied())
            .collect();
        if let Err(rejection) = gate_plane_candidate(
            &candidate.plane,
            &present,
            &self.config.gating,
            self.tracked_planes.len(),
            self.config.policy.max_planes,
        ) {
            return SpawnOutcome::Rejected(rejection);
        }
        let idx = self.next_plane_index;
        self.next_plane_index += 1;
        self.values
            .insert(Symbol::plane(idx), Value::Plane(candidate.plane));
        self.tracked_planes.insert(idx);
        self.add_regularity_factors(&candidate.supporting_landmarks, idx);
        SpawnOutcome::Accepted(idx)
    }

    // Rebuilds the structureless factor of every landmark whose observation
    // history changed; landmarks with fewer than two observations have no
    // factor yet.
    fn rebuild_structureless(&mut self) {
        if self.dirty_structureless.is_empty() {
            return;
        }
        let dirty = std::mem::take(&mut self.dirty_structureless);
        self.graph.retain(|f| match f {
            Factor::Structureless(s) => match s.landmark_id() {
                Some(lm) => !dirty.contains(&lm),
                None => true,
            },
            _ => true,
        });
        for lm in dirty {
            let Some(obs) = self.observations.get(&lm) else {
                continue;
            };
            if obs.len() < 2 {
                continue;
            }
            let observations: Vec<(u64, PixelMeasurement)> = obs.clone();
            self.graph
                .add(Factor::Structureless(StructurelessFactor::with_landmark(
                    lm,
                    observations,
                    self.config.camera,
                    self.config.noise.pixel_sigma,
                )));
        }
    }

    /// Runs the Levenberg-Marquardt solver on the current graph.
    pub fn optimize(&mut self) -> Result<OptStats, SmootherError> {
        let (values, stats) =
            optimizer::optimize(self.graph.factors(), &self.values, &self.config.optimize)?;
        self.values = values;
        Ok(stats)
    }

    /// Marginalizes everything older than the lag: exiting states are folded
    /// into a dense prior; observations of surviving landmarks at exiting
    /// keyframes are dropped to keep the landmark block sparse; landmarks and
    /// planes whose factors all connect to exiting variables are folded with
    /// them.
    pub fn marginalize_old(&mut self) -> Result<MarginalizationSummary, SmootherError> {
        let mut summary = MarginalizationSummary::default();
        if self.keyframes.len() <= self.config.policy.lag_keyframes {
            return Ok(summary);
        }
        let exit_count = self.keyframes.len() - self.config.policy.lag_keyframes;
        let exiting_kfs: Vec<u64> = self.keyframes.iter().take(exit_count).copied().collect();
        let exiting_kf_set: BTreeSet<u64> = exiting_kfs.iter().copied().collect();

        // Structureless landmarks: drop observations at exiting keyframes.
        for (lm, obs) in self.observations.iter_mut() {
            let before = obs.len();
            obs.retain(|(kf, _)| !exiting_kf_set.contains(kf));
            if obs.len() != before {
                self.dirty_structureless.insert(*lm);
            }
        }
        let gone: Vec<LandmarkId> = self
            .observations
            .iter()
            .filter(|(_, obs)| obs.is_empty())
            .map(|(lm, _)| *lm)
            .collect();
        for lm in gone {
            self.observations.remove(&lm);
            summary.exited_landmarks.insert(lm);
        }
        self.rebuild_structureless();

        // Promoted landmarks: count surviving projection factors.
        let mut surviving_obs: BTreeMap<LandmarkId, usize> = BTreeMap::new();
        for f in self.graph.factors() {
            if let Factor::Projection(p) = f {
                let kf = p.keys()[0].index;
                if !exiting_kf_set.contains(&kf) {
                    *surviving_obs.entry(p.landmark_id()).or_insert(0) += 1;
                }
            }
        }
        let exiting_landmarks: BTreeSet<LandmarkId> = self
            .promoted
            .iter()
            .filter(|lm| surviving_obs.get(lm).copied().unwrap_or(0) == 0)
            .copied()
            .collect();

        // Sparsity policy: observations of surviving landmarks taken at
        // exiting keyframes are dropped, not folded.
        self.graph.retain(|f| match f {
            Factor::Projection(p) => {
                let kf = p.keys()[0].index;
                !(exiting_kf_set.contains(&kf) && !exiting_landmarks.contains(&p.landmark_id()))
            }
            _ => true,
        });

        // Planes whose live regularity factors all reference exiting
        // landmarks exit too.
        let mut plane_live: BTreeMap<u64, usize> = BTreeMap::new();
        for f in self.graph.factors() {
            if let Factor::Regularity(r) = f {
                if !exiting_landmarks.contains(&r.landmark_id()) {
                    *plane_live.entry(r.plane_index()).or_insert(0) += 1;
                }
            }
        }
        let exiting_planes: BTreeSet<u64> = self
            .tracked_planes
            .iter()
            .filter(|p| plane_live.get(p).copied().unwrap_or(0) == 0)
            .copied()
            .collect();

        // Capture finalized poses before removal.
        for kf in &exiting_kfs {
            if let (Some(ts), Some(pose)) = (self.timestamp_of(*kf), self.pose_of(*kf)) {
                self.finalized.push((ts, *pose));
            }
        }

        let mut exiting_symbols: BTreeSet<Symbol> = BTreeSet::new();
        for kf in &exiting_kfs {
            exiting_symbols.insert(Symbol::pose(*kf));
            exiting_symbols.insert(Symbol::vel_bias(*kf));
        }
        for lm in &exiting_landmarks {
            exiting_symbols.insert(Symbol::landmark(*lm));
        }
        for p in &exiting_planes {
            exiting_symbols.insert(Symbol::plane(*p));
        }

        marginalize(&mut self.graph, &mut self.values, &exiting_symbols)?;

        for kf in &exiting_kfs {
            self.keyframes.pop_front();
            self.timestamps.remove(kf);
        }
        for lm in &exiting_landmarks {
            self.promoted.remove(lm);
            summary.exited_landmarks.insert(*lm);
        }
        for p in &exiting_planes {
            self.tracked_planes.remove(p);
        }
        self.regularity_pairs.retain(|(lm, p)| {
            !exiting_landmarks.contains(lm) && !exiting_planes.contains(p)
        });

        summary.exited_keyframes = exiting_kfs;
        summary.exited_planes = exiting_planes;
        Ok(summary)
    }

    /// Full estimated trajectory: finalized poses plus the live horizon.
    pub fn trajectory(&self) -> Vec<(f64, Pose)> {
        let mut out = self.finalized.clone();
        for kf in &self.keyframes {
            if let (Some(ts), Some(pose)) = (self.timestamp_of(*kf), self.pose_of(*kf)) {
                out.push((ts, *pose));
            }
        }
        out
    }
}

fn triangulate_landmark_checked(
    obs: &[(Pose, PixelMeasurement)],
    cam: &crate::factors::CameraModel,
) -> Result<(Vector3<f64>, f64), crate::factors::FactorError> {
    crate::factors::triangulate_landmark(obs, cam)
}

/// Pure gating rule behind [`FixedLagSmoother::spawn_plane`].
///
/// A candidate is accepted when (a) at least `min_landmarks` associated
/// landmarks exist as variables, (b) the covariance of their positions
/// projected onto the candidate plane has both eigenvalues above the scatter
/// threshold (collinear supports cannot constrain a plane), and (c) the
/// plane budget has room.
pub fn gate_plane_candidate(
    plane: &Plane,
    landmark_positions: &[Vector3<f64>],
    gating: &PlaneGating,
    current_planes: usize,
    max_planes: usize,
) -> Result<(), SpawnRejection> {
    if landmark_positions.len() < gating.min_landmarks {
        return Err(SpawnRejection::TooFewLandmarks);
    }
    let centroid = landmark_positions
        .iter()
        .fold(Vector3::zeros(), |acc: Vector3<f64>, p| acc + p)
        / landmark_positions.len() as f64;
    let (b1, b2) = s2_tangent_basis(plane.normal());
    let mut cov = Matrix2::<f64>::zeros();
    for p in landmark_positions {
        let d = p - centroid;
        let u = nalgebra::Vector2::new(d.dot(&b1), d.dot(&b2));
        cov += u * u.transpose();
    }
    cov /= landmark_positions.len() as f64;
    let eig = cov.symmetric_eigen();
    if eig.eigenvalues.min() <= gating.min_scatter_eigenvalue {
        return Err(SpawnRejection::DegenerateSupport);
    }
    if current_planes >= max_planes {
        return Err(SpawnRejection::PlaneCapReached);
    }
    Ok(())
}
