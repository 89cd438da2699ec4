//! Gridworld with one belonging cell per attachment style. The user's
//! self-awareness lowers the pull of the complementary insecure partner;
//! a relationship app that correctly declares inferences raises it faster.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::relationship::{CyclePhase, RelationshipConfig, RelationshipTrace, DECLARE_MIN_ENTRIES, ENTRIES_PER_CYCLE};
use super::{AttachmentError, AttachmentStyle};
use crate::engine::{Activity, Cell, EnvironmentSpec, NeedKind, Pos, SimConfig, Simulation};
use crate::envgen::{place, SUPPORTIVE_SALIENCE};
use crate::lmkit::Provider;
use crate::stats::{ewma, mean};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BelongingParams {
    pub secure_salience: f64,
    pub secure_replenish: f64,
    pub same_salience: f64,
    pub same_replenish: f64,
    /// Complementary salience before self-awareness is subtracted.
    pub complementary_base_salience: f64,
    pub complementary_replenish: f64,
}

impl Default for BelongingParams {
    fn default() -> Self {
        BelongingParams {
            secure_salience: 1.0,
            secure_replenish: 1.0,
            same_salience: 0.5,
            same_replenish: 0.5,
            complementary_base_salience: 2.0,
            complementary_replenish: 0.5,
        }
    }
}

impl BelongingParams {
    pub fn complementary_salience(&self, awareness: f64) -> f64 {
        (self.complementary_base_salience - awareness).max(0.0)
    }
}

fn insecure_pair(user_style: AttachmentStyle) -> Result<AttachmentStyle, AttachmentError> {
    user_style.complement().ok_or(AttachmentError::SecureUser)
}

/// Supportive cells for every non-belonging need plus three belonging cells
/// tagged by attachment style.
pub fn attachment_environment_with(
    params: &BelongingParams,
    user_style: AttachmentStyle,
    awareness: f64,
    seed: u64,
) -> Result<EnvironmentSpec, AttachmentError> {
    let complement = insecure_pair(user_style)?;
    let mut env = EnvironmentSpec::new(EnvironmentSpec::DEFAULT_SIZE, EnvironmentSpec::DEFAULT_SIZE, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user_style as u64);
    let mut protos: Vec<Cell> = NeedKind::ALL
        .into_iter()
        .filter(|&n| n != NeedKind::Belonging)
        .map(|n| Cell::new(Pos(0, 0), n, SUPPORTIVE_SALIENCE, SUPPORTIVE_SALIENCE))
        .collect();
    let belonging = [
        (AttachmentStyle::Secure, params.secure_salience, params.secure_replenish),
        (user_style, params.same_salience, params.same_replenish),
        (complement, params.complementary_salience(awareness), params.complementary_replenish),
    ];
    protos.extend(
        belonging
            .iter()
            .map(|&(style, sal, rep)| Cell::new(Pos(0, 0), NeedKind::Belonging, sal, rep).with_tag(style.name())),
    );
    place(&mut env, protos, &mut rng);
    Ok(env)
}

pub fn attachment_environment(
    user_style: AttachmentStyle,
    awareness: f64,
    seed: u64,
) -> Result<EnvironmentSpec, AttachmentError> {
    attachment_environment_with(&BelongingParams::default(), user_style, awareness, seed)
}

pub fn belonging_cell(env: &EnvironmentSpec, style: AttachmentStyle) -> Option<Pos> {
    env.cells_for(NeedKind::Belonging)
        .find(|c| c.tag.as_deref() == Some(style.name()))
        .map(|c| c.position)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfAwareness {
    pub level: f64,
    pub per_cycle_increment: f64,
    pub attachment_bonus_granted: bool,
    pub contempt_bonus_granted: bool,
}

impl SelfAwareness {
    pub fn new(per_cycle_increment: f64) -> Self {
        SelfAwareness {
            level: 0.0,
            per_cycle_increment,
            attachment_bonus_granted: false,
            contempt_bonus_granted: false,
        }
    }

    pub fn complete_cycle(&mut self) {
        self.level += self.per_cycle_increment;
    }

    /// Returns whether the bonus was newly granted.
    pub fn grant_attachment(&mut self, amount: f64) -> bool {
        !std::mem::replace(&mut self.attachment_bonus_granted, true) && {
            self.level += amount;
            true
        }
    }

    pub fn grant_contempt(&mut self, amount: f64) -> bool {
        !std::mem::replace(&mut self.contempt_bonus_granted, true) && {
            self.level += amount;
            true
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceSource {
    /// Inference correctness drawn at fixed rates.
    Oracle,
    /// Logs generated and inferred through a provider.
    Provider,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnowledgeConfig {
    pub user_style: AttachmentStyle,
    pub with_app: bool,
    /// When false the app still runs but never changes awareness.
    pub bonuses_enabled: bool,
    pub inference: InferenceSource,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub per_cycle_increment: f64,
    pub attachment_bonus: f64,
    pub contempt_bonus: f64,
    /// Probability that a gated attachment declaration is correct (oracle mode).
    pub attachment_accuracy: f64,
    /// Probability that contempt is correctly declared (oracle mode).
    pub contempt_accuracy: f64,
    pub belonging: BelongingParams,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        KnowledgeConfig {
            user_style: AttachmentStyle::Anxious,
            with_app: false,
            bonuses_enabled: true,
            inference: InferenceSource::Oracle,
            seeds: (0..10).collect(),
            steps: 5000,
            per_cycle_increment: 0.25,
            attachment_bonus: 0.5,
            contempt_bonus: 0.5,
            attachment_accuracy: 1.0,
            contempt_accuracy: 0.996,
            belonging: BelongingParams::default(),
        }
    }
}

impl KnowledgeConfig {
    pub fn label(&self) -> &'static str {
        match (self.with_app, self.bonuses_enabled) {
            (false, _) => "control",
            (true, true) => "with_app",
            (true, false) => "with_app_no_bonus",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRun {
    pub seed: u64,
    /// Awareness after each step.
    pub awareness: Vec<f64>,
    pub needs_met: Vec<u8>,
    /// Steps at which a cycle completed.
    pub cycle_steps: Vec<usize>,
    pub attachment_bonus_step: Option<usize>,
    pub contempt_bonus_step: Option<usize>,
    /// First step after which the secure partner outranks the complementary one.
    pub escape_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<RelationshipTrace>,
}

struct App<'a> {
    source: InferenceSource,
    provider: Option<&'a dyn Provider>,
    rng: ChaCha8Rng,
    trace: Option<RelationshipTrace>,
    entries_seen: usize,
}

#[derive(Default)]
struct CycleOutcome {
    attachment_correct: bool,
    contempt_correct: bool,
}

impl App<'_> {
    /// Logs one full cycle and reports which inferences were correctly declared.
    fn run_cycle(&mut self, cfg: &KnowledgeConfig) -> Result<CycleOutcome, AttachmentError> {
        let mut out = CycleOutcome::default();
        for _ in 0..ENTRIES_PER_CYCLE {
            self.entries_seen += 1;
            let n = self.entries_seen;
            match self.source {
                InferenceSource::Oracle => {
                    if n >= DECLARE_MIN_ENTRIES && self.rng.random_bool(cfg.attachment_accuracy) {
                        out.attachment_correct = true;
                    }
                    if CyclePhase::at(n) == CyclePhase::Contempt && self.rng.random_bool(cfg.contempt_accuracy) {
                        out.contempt_correct = true;
                    }
                }
                InferenceSource::Provider => {
                    let provider = self.provider.expect("provider mode has a provider");
                    let trace = self.trace.as_mut().expect("provider mode has a trace");
                    let entry = trace.advance(provider)?.clone();
                    out.attachment_correct |= entry.styles_declared_correctly(&trace.config);
                    out.contempt_correct |= entry.contempt_declared_correctly(&trace.config);
                }
            }
        }
        Ok(out)
    }
}

const APP_STREAM: u64 = 0x6b6e_6f77_0000_0001;

/// One seeded run of the gridworld.
pub fn run_knowledge_run(
    cfg: &KnowledgeConfig,
    seed: u64,
    provider: Option<&dyn Provider>,
) -> Result<KnowledgeRun, AttachmentError> {
    let complement = insecure_pair(cfg.user_style)?;
    let params = cfg.belonging;
    let env = attachment_environment_with(&params, cfg.user_style, 0.0, seed)?;
    let comp_pos = belonging_cell(&env, complement).expect("complementary cell placed");
    let mut sim = Simulation::new(env, SimConfig { steps: cfg.steps, ..SimConfig::with_seed(seed) })?;
    let belonging: Vec<Cell> = sim.env.cells_for(NeedKind::Belonging).cloned().collect();
    for cell in &belonging {
        sim.agent.remember(cell);
    }

    let mut app_rng = ChaCha8Rng::seed_from_u64(seed ^ APP_STREAM);
    let mut app = None;
    if cfg.with_app {
        let trace = match cfg.inference {
            InferenceSource::Oracle => None,
            InferenceSource::Provider => {
                if provider.is_none() {
                    return Err(crate::lmkit::LmError::InvalidRequest("provider mode needs a provider".into()).into());
                }
                let rel = RelationshipConfig::sample(cfg.user_style, complement, &mut app_rng)?;
                Some(RelationshipTrace::new(rel)?)
            }
        };
        app = Some(App { source: cfg.inference, provider, rng: app_rng, trace, entries_seen: 0 });
    }

    let mut awareness = SelfAwareness::new(cfg.per_cycle_increment);
    let mut run = KnowledgeRun {
        seed,
        awareness: Vec::with_capacity(cfg.steps),
        needs_met: Vec::with_capacity(cfg.steps),
        cycle_steps: Vec::new(),
        attachment_bonus_step: None,
        contempt_bonus_step: None,
        escape_step: None,
        trace: None,
    };
    let mut on_complement = false;
    while !sim.is_done() {
        let ev = sim.step();
        let engaging_here = matches!(ev.activity, Activity::Engaging { cell, .. } if cell == comp_pos);
        if on_complement && !engaging_here {
            awareness.complete_cycle();
            run.cycle_steps.push(ev.step);
            if let Some(app) = app.as_mut() {
                let outcome = app.run_cycle(cfg)?;
                if cfg.bonuses_enabled {
                    if outcome.attachment_correct && awareness.grant_attachment(cfg.attachment_bonus) {
                        run.attachment_bonus_step = Some(ev.step);
                    }
                    if outcome.contempt_correct && awareness.grant_contempt(cfg.contempt_bonus) {
                        run.contempt_bonus_step = Some(ev.step);
                    }
                }
            }
            let salience = params.complementary_salience(awareness.level);
            sim.env.cell_at_mut(comp_pos).expect("complementary cell").salience = salience;
            if run.escape_step.is_none() && salience < params.secure_salience {
                run.escape_step = Some(ev.step);
            }
        }
        on_complement = engaging_here;
        run.awareness.push(awareness.level);
        run.needs_met.push(ev.needs_met);
    }
    run.trace = app.and_then(|a| a.trace);
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeSeries {
    pub label: String,
    pub runs: Vec<KnowledgeRun>,
    pub mean_awareness: Vec<f64>,
    pub mean_flourishing: Vec<f64>,
}

fn column_mean<T: Copy + Into<f64>>(rows: impl Iterator<Item = Vec<T>> + Clone, len: usize) -> Vec<f64> {
    let n = rows.clone().count().max(1) as f64;
    let mut out = vec![0.0; len];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v.into();
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Runs every seed of one condition in parallel and averages per step.
pub fn run_knowledge_experiment(
    cfg: &KnowledgeConfig,
    provider: Option<&dyn Provider>,
) -> Result<KnowledgeSeries, AttachmentError> {
    let runs: Vec<KnowledgeRun> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_knowledge_run(cfg, seed, provider))
        .collect::<Result<_, _>>()?;
    let mean_awareness = column_mean(runs.iter().map(|r| r.awareness.clone()), cfg.steps);
    let mean_flourishing = column_mean(runs.iter().map(|r| r.needs_met.clone()), cfg.steps);
    Ok(KnowledgeSeries { label: cfg.label().to_owned(), runs, mean_awareness, mean_flourishing })
}

/// EWMA weight applied before comparing condition means step by step.
pub const SMOOTHING_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionComparison {
    /// Steps after the app's first cycle can first matter and before the
    /// control's mean awareness reaches the escape level.
    pub window: Option<std::ops::Range<usize>>,
    pub min_gap_in_window: Option<f64>,
    pub mean_gap_in_window: Option<f64>,
    /// Difference of mean flourishing over the final `tail` steps.
    pub final_gap: f64,
    pub tail: usize,
}

impl ConditionComparison {
    /// `app` ahead of `control` at every smoothed step of a nonempty window.
    pub fn app_leads_throughout(&self) -> bool {
        self.min_gap_in_window.is_some_and(|g| g > 0.0)
    }
}

/// Compares smoothed mean flourishing of two conditions.
///
/// The window opens one need period (full level over decay) after the last
/// app run completes its first cycle, since a satisfied belonging need is
/// not sought again before then.
pub fn compare_conditions(
    control: &KnowledgeSeries,
    app: &KnowledgeSeries,
    params: &BelongingParams,
    tail: usize,
) -> ConditionComparison {
    let sim = SimConfig::default();
    let need_period = (sim.full_level / sim.decay_per_step).round() as usize;
    let escape_level = params.complementary_base_salience - params.secure_salience;
    let start = app.runs.iter().map(|r| r.cycle_steps.first().copied()).collect::<Option<Vec<_>>>()
        .and_then(|firsts| firsts.into_iter().max())
        .map(|s| s + need_period);
    let end = control.mean_awareness.iter().position(|&a| a > escape_level);
    let window = start.zip(end).map(|(s, e)| s..e).filter(|w| !w.is_empty());
    let c = ewma(&control.mean_flourishing, SMOOTHING_ALPHA);
    let a = ewma(&app.mean_flourishing, SMOOTHING_ALPHA);
    let gaps: Option<Vec<f64>> = window.clone().map(|w| w.map(|t| a[t] - c[t]).collect());
    let len = c.len().min(a.len());
    let tail = tail.min(len);
    let tail_mean = |v: &[f64]| mean(&v[len - tail..len]);
    ConditionComparison {
        min_gap_in_window: gaps.as_ref().map(|g| g.iter().copied().fold(f64::INFINITY, f64::min)),
        mean_gap_in_window: gaps.as_deref().map(mean),
        window,
        final_gap: tail_mean(&app.mean_flourishing) - tail_mean(&control.mean_flourishing),
        tail,
    }
}
