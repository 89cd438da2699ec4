//! The gridworld simulator.
//!
//! An agent with five hierarchically ordered needs walks an 8x8 grid. Needs
//! decay every step; needs-cells restore one need at a rate proportional to
//! their replenishment rate. The agent policy is fixed: it services its
//! lowest unmet need using the most salient (then closest) cell it knows,
//! and explores when it knows none.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tag carried by adversarial (high-salience, low-replenishment) cells.
pub const ADVERSARIAL_TAG: &str = "adversarial";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("run record is empty")]
    EmptyRecord,
    #[error("simulation needs at least one step")]
    ZeroSteps,
    #[error("environment has no cell for required need {0}")]
    MissingNeed(NeedKind),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Levels of Maslow's hierarchy, ordered from most to least basic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeedKind {
    Physiological,
    Safety,
    Belonging,
    Esteem,
    SelfActualization,
}

impl NeedKind {
    pub const ALL: [NeedKind; 5] = [
        NeedKind::Physiological,
        NeedKind::Safety,
        NeedKind::Belonging,
        NeedKind::Esteem,
        NeedKind::SelfActualization,
    ];

    /// 1-based rank in the hierarchy.
    pub fn ordinal(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn index(self) -> usize {
        match self {
            NeedKind::Physiological => 0,
            NeedKind::Safety => 1,
            NeedKind::Belonging => 2,
            NeedKind::Esteem => 3,
            NeedKind::SelfActualization => 4,
        }
    }

    pub fn from_ordinal(ordinal: u8) -> Option<NeedKind> {
        NeedKind::ALL.get((ordinal as usize).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            NeedKind::Physiological => "physiological",
            NeedKind::Safety => "safety",
            NeedKind::Belonging => "belonging",
            NeedKind::Esteem => "esteem",
            NeedKind::SelfActualization => "self_actualization",
        }
    }
}

impl fmt::Display for NeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid coordinate as (row, col).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos(pub usize, pub usize);

impl Pos {
    pub fn row(self) -> usize {
        self.0
    }

    pub fn col(self) -> usize {
        self.1
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.0.abs_diff(other.0) + self.1.abs_diff(other.1)
    }
}

/// A needs-satisfying grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub position: Pos,
    pub need: NeedKind,
    pub salience: f64,
    pub replenish_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl Cell {
    pub fn new(position: Pos, need: NeedKind, salience: f64, replenish_rate: f64) -> Self {
        Cell { position, need, salience, replenish_rate, tag: None }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn is_adversarial(&self) -> bool {
        self.tag.as_deref() == Some(ADVERSARIAL_TAG)
    }
}

/// Grid dimensions plus the set of needs-cells (at most one per position).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
    pub seed: u64,
}

impl EnvironmentSpec {
    pub const DEFAULT_SIZE: usize = 8;

    pub fn new(width: usize, height: usize, seed: u64) -> Self {
        EnvironmentSpec { width, height, cells: Vec::new(), seed }
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, pos: Pos) -> bool {
        pos.0 < self.height && pos.1 < self.width
    }

    pub fn cell_at(&self, pos: Pos) -> Option<&Cell> {
        self.cells.iter().find(|c| c.position == pos)
    }

    pub fn cell_at_mut(&mut self, pos: Pos) -> Option<&mut Cell> {
        self.cells.iter_mut().find(|c| c.position == pos)
    }

    pub fn cells_for(&self, need: NeedKind) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(move |c| c.need == need)
    }

    pub fn count_for(&self, need: NeedKind) -> usize {
        self.cells_for(need).count()
    }

    /// Adds a cell, rejecting out-of-bounds positions, collisions and
    /// negative parameters.
    pub fn add_cell(&mut self, cell: Cell) -> Result<(), EngineError> {
        if !self.contains(cell.position) {
            return Err(EngineError::InvalidEnvironment(format!(
                "cell {:?} outside {}x{} grid",
                cell.position, self.height, self.width
            )));
        }
        if self.cell_at(cell.position).is_some() {
            return Err(EngineError::InvalidEnvironment(format!(
                "two cells at {:?}",
                cell.position
            )));
        }
        if !(cell.salience >= 0.0) || !(cell.replenish_rate >= 0.0) {
            return Err(EngineError::InvalidEnvironment(format!(
                "cell {:?} has negative salience or replenishment",
                cell.position
            )));
        }
        self.cells.push(cell);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let mut check = EnvironmentSpec::new(self.width, self.height, self.seed);
        for cell in &self.cells {
            check.add_cell(cell.clone())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, EngineError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, EngineError> {
        let env: EnvironmentSpec = serde_json::from_str(s)?;
        env.validate()?;
        Ok(env)
    }
}

/// Per-need satiation levels, indexed by [`NeedKind::index`].
pub type Satiation = [f64; 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Pos,
    pub satiation: Satiation,
    /// Known cell positions per need.
    pub memory: BTreeMap<NeedKind, BTreeSet<Pos>>,
    pub visited: BTreeSet<Pos>,
    /// Need currently being replenished on the agent's cell, if any.
    pub engaged: Option<NeedKind>,
    pub self_awareness: f64,
}

impl AgentState {
    pub fn new(position: Pos) -> Self {
        AgentState {
            position,
            satiation: [0.0; 5],
            memory: BTreeMap::new(),
            visited: BTreeSet::new(),
            engaged: None,
            self_awareness: 0.0,
        }
    }

    pub fn level(&self, need: NeedKind) -> f64 {
        self.satiation[need.index()]
    }

    pub fn set_level(&mut self, need: NeedKind, value: f64) {
        self.satiation[need.index()] = value;
    }

    /// Records a cell location without visiting it.
    pub fn remember(&mut self, cell: &Cell) {
        self.memory.entry(cell.need).or_default().insert(cell.position);
    }

    pub fn needs_met(&self, threshold: f64) -> u8 {
        self.satiation.iter().filter(|&&s| s > threshold).count() as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub steps: usize,
    pub teleport_interval: usize,
    pub decay_per_step: f64,
    pub replenish_multiplier: f64,
    /// A need counts as unmet while its satiation is at or below this value.
    pub unmet_threshold: f64,
    pub full_level: f64,
    pub rng_seed: u64,
    /// Needs the environment must be able to serve; empty means no check.
    pub required_needs: Vec<NeedKind>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            steps: 5000,
            teleport_interval: 500,
            decay_per_step: 1.0,
            replenish_multiplier: 7.0,
            unmet_threshold: 0.0,
            full_level: 100.0,
            rng_seed: 0,
            required_needs: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn with_seed(rng_seed: u64) -> Self {
        SimConfig { rng_seed, ..SimConfig::default() }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.steps == 0 {
            return Err(EngineError::ZeroSteps);
        }
        if self.teleport_interval == 0 {
            return Err(EngineError::InvalidConfig("teleport_interval must be positive".into()));
        }
        if !(self.decay_per_step > 0.0) || !(self.replenish_multiplier > 0.0) {
            return Err(EngineError::InvalidConfig(
                "decay and replenish multiplier must be positive".into(),
            ));
        }
        if !(0.0..100.0).contains(&self.unmet_threshold) {
            return Err(EngineError::InvalidConfig("unmet_threshold must lie in [0, 100)".into()));
        }
        if !(self.full_level > self.unmet_threshold) || self.full_level > 100.0 {
            return Err(EngineError::InvalidConfig(
                "full_level must lie in (unmet_threshold, 100]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activity {
    Exploring,
    Traveling {
        target: Pos,
    },
    Engaging {
        cell: Pos,
        need: NeedKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
}

impl Activity {
    pub fn is_engaging(&self) -> bool {
        matches!(self, Activity::Engaging { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub step: usize,
    /// Where the step's activity took place (movement is applied afterwards).
    pub pos: Pos,
    pub activity: Activity,
    pub satiation: Satiation,
    pub needs_met: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub events: Vec<StepEvent>,
    pub flourishing_series: Vec<u8>,
    pub engagement_flags: Vec<bool>,
}

impl RunRecord {
    pub fn with_capacity(steps: usize) -> Self {
        RunRecord {
            events: Vec::with_capacity(steps),
            flourishing_series: Vec::with_capacity(steps),
            engagement_flags: Vec::with_capacity(steps),
        }
    }

    pub fn push(&mut self, event: StepEvent) {
        self.flourishing_series.push(event.needs_met);
        self.engagement_flags.push(event.activity.is_engaging());
        self.events.push(event);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// One JSON object per step event.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), EngineError> {
        for event in &self.events {
            serde_json::to_writer(&mut out, event)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, EngineError> {
        let mut record = RunRecord::default();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            record.push(serde_json::from_str(&line)?);
        }
        Ok(record)
    }
}

/// Target selection outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Cell(Pos),
    Explore,
}

/// Lowest-ordinal need at or below the unmet threshold.
pub fn current_need(agent: &AgentState, cfg: &SimConfig) -> Option<NeedKind> {
    NeedKind::ALL.into_iter().find(|&n| agent.level(n) <= cfg.unmet_threshold)
}

/// Picks the most salient known cell for `need`; ties go to the closest,
/// then to the lowest (row, col).
pub fn select_target(agent: &AgentState, need: NeedKind, env: &EnvironmentSpec) -> Target {
    let Some(known) = agent.memory.get(&need) else {
        return Target::Explore;
    };
    let mut best: Option<(&Cell, usize)> = None;
    for &pos in known {
        let Some(cell) = env.cell_at(pos).filter(|c| c.need == need) else {
            continue;
        };
        let dist = agent.position.manhattan(pos);
        let better = match best {
            None => true,
            Some((b, bd)) => {
                cell.salience > b.salience
                    || (cell.salience == b.salience
                        && (dist < bd || (dist == bd && cell.position < b.position)))
            }
        };
        if better {
            best = Some((cell, dist));
        }
    }
    best.map_or(Target::Explore, |(c, _)| Target::Cell(c.position))
}

const DIRECTIONS: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

fn offset(env: &EnvironmentSpec, pos: Pos, (dr, dc): (isize, isize)) -> Option<Pos> {
    let r = pos.0.checked_add_signed(dr)?;
    let c = pos.1.checked_add_signed(dc)?;
    let next = Pos(r, c);
    env.contains(next).then_some(next)
}

fn step_toward(from: Pos, to: Pos) -> Pos {
    if from.0 != to.0 {
        Pos(if to.0 > from.0 { from.0 + 1 } else { from.0 - 1 }, from.1)
    } else if from.1 != to.1 {
        Pos(from.0, if to.1 > from.1 { from.1 + 1 } else { from.1 - 1 })
    } else {
        from
    }
}

fn explore_move<R: Rng + ?Sized>(agent: &AgentState, env: &EnvironmentSpec, rng: &mut R) -> Pos {
    let unvisited: Vec<Pos> = DIRECTIONS
        .iter()
        .filter_map(|&d| offset(env, agent.position, d))
        .filter(|p| !agent.visited.contains(p))
        .collect();
    if let Some(&next) = unvisited.choose(rng) {
        return next;
    }
    // The grid edge blocks movement.
    let dir = DIRECTIONS[rng.random_range(0..DIRECTIONS.len())];
    offset(env, agent.position, dir).unwrap_or(agent.position)
}

pub fn random_position<R: Rng + ?Sized>(env: &EnvironmentSpec, rng: &mut R) -> Pos {
    Pos(rng.random_range(0..env.height), rng.random_range(0..env.width))
}

/// Advances the agent by one step.
///
/// Order within a step: teleport (when `step` is a multiple of the teleport
/// interval), decay, interruption check, engagement and replenishment,
/// clamping, then movement.
pub fn step<R: Rng + ?Sized>(
    agent: &mut AgentState,
    env: &EnvironmentSpec,
    cfg: &SimConfig,
    rng: &mut R,
    step: usize,
) -> StepEvent {
    if step > 0 && step % cfg.teleport_interval == 0 {
        agent.position = random_position(env, rng);
        agent.engaged = None;
    }

    for s in agent.satiation.iter_mut() {
        *s -= cfg.decay_per_step;
    }

    if let Some(engaged) = agent.engaged {
        let interrupted = NeedKind::ALL[..engaged.index()]
            .iter()
            .any(|&n| agent.level(n) <= cfg.unmet_threshold);
        if interrupted {
            agent.engaged = None;
        }
    }
    let focus = agent.engaged.or_else(|| current_need(agent, cfg));

    let here = agent.position;
    agent.visited.insert(here);
    let cell_here = env.cell_at(here);
    if let Some(cell) = cell_here {
        agent.remember(cell);
    }

    let mut activity = None;
    if let (Some(need), Some(cell)) = (focus, cell_here) {
        if select_target(agent, need, env) == Target::Cell(here) {
            agent.engaged = Some(need);
            agent.satiation[need.index()] += cfg.replenish_multiplier * cell.replenish_rate;
            activity = Some(Activity::Engaging { cell: here, need, tag: cell.tag.clone() });
        } else {
            agent.engaged = None;
        }
    } else {
        agent.engaged = None;
    }

    for s in agent.satiation.iter_mut() {
        *s = s.clamp(0.0, 100.0);
    }

    let staying = agent.engaged.is_some_and(|n| agent.level(n) < cfg.full_level);
    if !staying {
        agent.engaged = None;
        let next = match current_need(agent, cfg).map(|n| select_target(agent, n, env)) {
            Some(Target::Cell(target)) => {
                activity.get_or_insert(Activity::Traveling { target });
                step_toward(here, target)
            }
            _ => {
                activity.get_or_insert(Activity::Exploring);
                explore_move(agent, env, rng)
            }
        };
        agent.position = next;
    }

    StepEvent {
        step,
        pos: here,
        activity: activity.expect("activity set on every branch"),
        satiation: agent.satiation,
        needs_met: agent.needs_met(cfg.unmet_threshold),
    }
}

/// A running simulation. The environment may be edited between steps
/// (e.g. salience that tracks the agent's self-awareness).
#[derive(Debug, Clone)]
pub struct Simulation {
    pub env: EnvironmentSpec,
    pub cfg: SimConfig,
    pub agent: AgentState,
    rng: ChaCha8Rng,
    next_step: usize,
}

impl Simulation {
    pub fn new(env: EnvironmentSpec, cfg: SimConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        env.validate()?;
        for &need in &cfg.required_needs {
            if env.count_for(need) == 0 {
                return Err(EngineError::MissingNeed(need));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let agent = AgentState::new(random_position(&env, &mut rng));
        Ok(Simulation { env, cfg, agent, rng, next_step: 0 })
    }

    pub fn step_index(&self) -> usize {
        self.next_step
    }

    pub fn is_done(&self) -> bool {
        self.next_step >= self.cfg.steps
    }

    pub fn step(&mut self) -> StepEvent {
        let event = step(&mut self.agent, &self.env, &self.cfg, &mut self.rng, self.next_step);
        self.next_step += 1;
        event
    }

    pub fn run(mut self) -> RunRecord {
        let mut record = RunRecord::with_capacity(self.cfg.steps);
        while !self.is_done() {
            record.push(self.step());
        }
        record
    }
}

/// Runs `cfg.steps` steps; a pure function of `(env, cfg)`.
pub fn run_simulation(env: &EnvironmentSpec, cfg: &SimConfig) -> Result<RunRecord, EngineError> {
    Ok(Simulation::new(env.clone(), cfg.clone())?.run())
}

/// Mean number of needs met per step.
pub fn compute_flourishing(record: &RunRecord) -> Result<f64, EngineError> {
    if record.is_empty() {
        return Err(EngineError::EmptyRecord);
    }
    let total: u64 = record.flourishing_series.iter().map(|&n| n as u64).sum();
    Ok(total as f64 / record.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngagementScope {
    #[default]
    AllNeeds,
    BelongingOnly,
}

/// Fraction of steps spent engaging a needs-cell.
pub fn compute_engagement(record: &RunRecord, scope: EngagementScope) -> Result<f64, EngineError> {
    if record.is_empty() {
        return Err(EngineError::EmptyRecord);
    }
    let engaged = record
        .events
        .iter()
        .filter(|e| match (&e.activity, scope) {
            (Activity::Engaging { .. }, EngagementScope::AllNeeds) => true,
            (Activity::Engaging { need, .. }, EngagementScope::BelongingOnly) => {
                *need == NeedKind::Belonging
            }
            _ => false,
        })
        .count();
    Ok(engaged as f64 / record.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_with(cells: Vec<Cell>) -> EnvironmentSpec {
        let mut env = EnvironmentSpec::new(8, 8, 0);
        for c in cells {
            env.add_cell(c).unwrap();
        }
        env
    }

    fn agent_with(levels: Satiation) -> AgentState {
        let mut a = AgentState::new(Pos(0, 0));
        a.satiation = levels;
        a
    }

    #[test]
    fn need_ordering() {
        assert!(NeedKind::Physiological < NeedKind::SelfActualization);
        assert_eq!(NeedKind::Esteem.ordinal(), 4);
        assert_eq!(NeedKind::from_ordinal(2), Some(NeedKind::Safety));
        assert_eq!(NeedKind::from_ordinal(0), None);
        assert_eq!(NeedKind::from_ordinal(6), None);
    }

    #[test]
    fn current_need_examples() {
        let cfg = SimConfig::default();
        let a = agent_with([0.0, 80.0, 80.0, 80.0, 80.0]);
        assert_eq!(current_need(&a, &cfg), Some(NeedKind::Physiological));
        let a = agent_with([100.0; 5]);
        assert_eq!(current_need(&a, &cfg), None);
        let a = agent_with([50.0, 0.0, 100.0, 100.0, 100.0]);
        assert_eq!(current_need(&a, &cfg), Some(NeedKind::Safety));
    }

    #[test]
    fn select_target_prefers_salience_then_distance() {
        let a_cell = Cell::new(Pos(0, 3), NeedKind::Belonging, 1.0, 1.0);
        let b_cell = Cell::new(Pos(5, 5), NeedKind::Belonging, 2.0, 1.0);
        let env = env_with(vec![a_cell.clone(), b_cell.clone()]);
        let mut agent = agent_with([0.0; 5]);
        agent.remember(&a_cell);
        agent.remember(&b_cell);
        assert_eq!(select_target(&agent, NeedKind::Belonging, &env), Target::Cell(Pos(5, 5)));

        let far = Cell::new(Pos(0, 3), NeedKind::Belonging, 1.0, 1.0);
        let near = Cell::new(Pos(1, 0), NeedKind::Belonging, 1.0, 1.0);
        let env = env_with(vec![far.clone(), near.clone()]);
        let mut agent = agent_with([0.0; 5]);
        agent.remember(&far);
        agent.remember(&near);
        assert_eq!(select_target(&agent, NeedKind::Belonging, &env), Target::Cell(Pos(1, 0)));

        let agent = agent_with([0.0; 5]);
        assert_eq!(select_target(&agent, NeedKind::Belonging, &env), Target::Explore);
    }

    #[test]
    fn select_target_breaks_full_ties_by_position() {
        let left = Cell::new(Pos(2, 1), NeedKind::Safety, 1.0, 1.0);
        let right = Cell::new(Pos(2, 5), NeedKind::Safety, 1.0, 1.0);
        let env = env_with(vec![right.clone(), left.clone()]);
        let mut agent = agent_with([0.0; 5]);
        agent.position = Pos(2, 3);
        agent.remember(&right);
        agent.remember(&left);
        assert_eq!(select_target(&agent, NeedKind::Safety, &env), Target::Cell(Pos(2, 1)));
    }

    #[test]
    fn step_pure_decay_off_cell() {
        let env = env_with(vec![]);
        let cfg = SimConfig::default();
        let mut agent = agent_with([50.0; 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ev = step(&mut agent, &env, &cfg, &mut rng, 1);
        assert_eq!(ev.satiation, [49.0; 5]);
        assert_eq!(ev.activity, Activity::Exploring);
    }

    #[test]
    fn step_decays_then_replenishes() {
        let cell = Cell::new(Pos(0, 0), NeedKind::Safety, 1.0, 1.0);
        let env = env_with(vec![cell.clone()]);
        let cfg = SimConfig::default();
        let mut agent = agent_with([100.0, 50.0, 100.0, 100.0, 100.0]);
        agent.engaged = Some(NeedKind::Safety);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ev = step(&mut agent, &env, &cfg, &mut rng, 1);
        assert_eq!(ev.satiation[1], 56.0);
        assert!(ev.activity.is_engaging());
        assert_eq!(agent.position, Pos(0, 0));

        agent.satiation[1] = 99.0;
        let ev = step(&mut agent, &env, &cfg, &mut rng, 2);
        assert_eq!(ev.satiation[1], 100.0);
        // Full: the agent leaves the cell in the same step.
        assert_eq!(agent.engaged, None);
    }

    #[test]
    fn engagement_interrupted_by_lower_need() {
        let cell = Cell::new(Pos(0, 0), NeedKind::Belonging, 1.0, 1.0);
        let env = env_with(vec![cell]);
        let cfg = SimConfig::default();
        let mut agent = agent_with([1.0, 50.0, 30.0, 0.0, 0.0]);
        agent.engaged = Some(NeedKind::Belonging);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ev = step(&mut agent, &env, &cfg, &mut rng, 1);
        assert!(!ev.activity.is_engaging());
        assert_eq!(ev.satiation[2], 29.0);
        assert_eq!(agent.engaged, None);
    }

    #[test]
    fn agent_does_not_engage_lower_salience_cell_en_route() {
        let weak = Cell::new(Pos(0, 1), NeedKind::Belonging, 1.0, 1.0);
        let strong = Cell::new(Pos(0, 4), NeedKind::Belonging, 2.0, 0.25).with_tag(ADVERSARIAL_TAG);
        let env = env_with(vec![weak.clone(), strong.clone()]);
        let cfg = SimConfig::default();
        let mut agent = agent_with([100.0, 100.0, 0.0, 0.0, 0.0]);
        agent.remember(&weak);
        agent.remember(&strong);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut engaged_at = None;
        for t in 1..10 {
            let ev = step(&mut agent, &env, &cfg, &mut rng, t);
            if let Activity::Engaging { cell, .. } = ev.activity {
                engaged_at = Some(cell);
                break;
            }
        }
        assert_eq!(engaged_at, Some(Pos(0, 4)));
    }

    #[test]
    fn teleport_only_on_interval() {
        let env = env_with(vec![]);
        let cfg = SimConfig { teleport_interval: 7, steps: 50, ..SimConfig::default() };
        let record = run_simulation(&env, &cfg).unwrap();
        for pair in record.events.windows(2) {
            let jump = pair[0].pos.manhattan(pair[1].pos);
            if pair[1].step % 7 != 0 {
                assert!(jump <= 1, "jump {jump} at step {}", pair[1].step);
            }
        }
    }

    #[test]
    fn flourishing_and_engagement_arithmetic() {
        let mut rec = RunRecord::default();
        for i in 0..500 {
            let activity = if i % 2 == 0 {
                Activity::Engaging { cell: Pos(0, 0), need: NeedKind::Safety, tag: None }
            } else {
                Activity::Exploring
            };
            rec.push(StepEvent {
                step: i,
                pos: Pos(0, 0),
                activity,
                satiation: [0.0; 5],
                needs_met: if i % 2 == 0 { 2 } else { 4 },
            });
        }
        assert_eq!(compute_flourishing(&rec).unwrap(), 3.0);
        assert_eq!(compute_engagement(&rec, EngagementScope::AllNeeds).unwrap(), 0.5);
        assert_eq!(compute_engagement(&rec, EngagementScope::BelongingOnly).unwrap(), 0.0);
        assert!(matches!(
            compute_flourishing(&RunRecord::default()),
            Err(EngineError::EmptyRecord)
        ));
    }

    #[test]
    fn rejects_bad_environments_and_configs() {
        let mut env = EnvironmentSpec::new(8, 8, 0);
        env.add_cell(Cell::new(Pos(1, 1), NeedKind::Safety, 1.0, 1.0)).unwrap();
        assert!(env.add_cell(Cell::new(Pos(1, 1), NeedKind::Esteem, 1.0, 1.0)).is_err());
        assert!(env.add_cell(Cell::new(Pos(8, 0), NeedKind::Esteem, 1.0, 1.0)).is_err());
        assert!(env.add_cell(Cell::new(Pos(2, 0), NeedKind::Esteem, -1.0, 1.0)).is_err());

        let cfg = SimConfig { required_needs: vec![NeedKind::Belonging], ..SimConfig::default() };
        assert!(matches!(run_simulation(&env, &cfg), Err(EngineError::MissingNeed(_))));
        let cfg = SimConfig { steps: 0, ..SimConfig::default() };
        assert!(matches!(run_simulation(&env, &cfg), Err(EngineError::ZeroSteps)));
    }

    #[test]
    fn environment_json_round_trip() {
        let mut env = EnvironmentSpec::new(8, 8, 11);
        env.add_cell(Cell::new(Pos(1, 2), NeedKind::Safety, 1.0, 1.0)).unwrap();
        env.add_cell(Cell::new(Pos(5, 6), NeedKind::Belonging, 2.0, 0.25).with_tag(ADVERSARIAL_TAG)).unwrap();
        let back = EnvironmentSpec::from_json(&env.to_json().unwrap()).unwrap();
        assert_eq!(back, env);
        assert!(back.cells[1].is_adversarial());
        assert!(EnvironmentSpec::from_json("{\"width\": 8}").is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut env = EnvironmentSpec::new(8, 8, 0);
        env.add_cell(Cell::new(Pos(3, 3), NeedKind::Physiological, 1.0, 1.0)).unwrap();
        let cfg = SimConfig { steps: 200, ..SimConfig::default() };
        let rec = run_simulation(&env, &cfg).unwrap();
        let text = rec.to_jsonl();
        assert_eq!(text.lines().count(), 200);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["step", "pos", "activity", "satiation", "needs_met"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        let back = RunRecord::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, rec);
    }
}
