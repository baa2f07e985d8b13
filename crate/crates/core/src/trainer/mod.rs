//! Pre-training from demonstrations and DDPG training with a Q-filtered
//! behavioral-cloning term, two replay buffers and hard target copies.

pub mod ordering;
pub mod replay;

use std::io::Write;
use std::sync::Arc;

use log::{info, warn};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use replay::{BufferKind, ReplayBuffer, Transition};

use crate::env::{CutAction, EnvConfig, ParseEnv, ParseState};
use crate::error::{Error, Result};
use crate::expert::{expert_action, Demonstration};
use crate::geom::{chamfer_l1, surface_iou, TriMesh, VoxelGrid};
use crate::neural::{encode_state, Checkpoint, EncodedState, Inputs, NetConfig, Network, ACTION_DIM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub gamma: f64,
    /// Mini-batch size drawn from each buffer.
    pub batch_size: usize,
    pub bc_weight: f64,
    /// Q-filter demonstration samples as well as agent samples.
    pub q_filter_demos: bool,
    /// Targets are hard-copied every `target_period` updates.
    pub target_period: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub momentum: f64,
    pub pretrain_iters: usize,
    /// Environment step budget of the training phase.
    pub train_steps: usize,
    /// Upper bound on training episodes; 0 means no bound.
    pub max_episodes: usize,
    pub noise_sigma: f64,
    pub demo_capacity: usize,
    pub agent_capacity: usize,
    /// Replace a shape's demonstrations with an agent episode that earned
    /// a higher return on the same shape.
    pub refresh_demos: bool,
    /// Zero the silhouette channels (the no-projection baseline).
    pub zero_projections: bool,
    /// Report every this many pre-training iterations.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            gamma: 0.99,
            batch_size: 64,
            bc_weight: 10.0,
            q_filter_demos: false,
            target_period: 100,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            momentum: 0.9,
            pretrain_iters: 5000,
            train_steps: 20_000,
            max_episodes: 0,
            noise_sigma: 0.1,
            demo_capacity: 50_000,
            agent_capacity: 100_000,
            refresh_demos: true,
            zero_projections: false,
            log_every: 500,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma must be in [0, 1], got {}", self.gamma)));
        }
        if self.batch_size == 0 || self.target_period == 0 || self.log_every == 0 {
            return Err(Error::invalid("batch_size, target_period and log_every must be >= 1"));
        }
        if !(self.bc_weight >= 0.0 && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("bc_weight and noise_sigma must be >= 0"));
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0 && (0.0..1.0).contains(&self.momentum)) {
            return Err(Error::invalid("learning rates must be > 0 and momentum in [0, 1)"));
        }
        if self.demo_capacity == 0 || self.agent_capacity == 0 {
            return Err(Error::invalid("buffer capacities must be >= 1"));
        }
        Ok(())
    }
}

/// Everything a training run reads from a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub net: NetConfig,
    pub trainer: TrainerConfig,
}

impl RunConfig {
    /// Parses `key = value` text with optional `[env]`, `[net]` and
    /// `[trainer]` sections.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            source_name: "config".into(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.net.validate()?;
        self.trainer.validate()
    }

    /// Seeds network initialisation and the trainer's random stream.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.net.seed = seed;
        self.trainer.seed = seed;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// DDPG from scratch: no demonstrations, no cloning term.
    Ddpg,
    /// Pre-training on demonstrations only; no environment interaction.
    Il,
    /// Pre-training followed by DDPG with the cloning term.
    IlRl,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(Mode::Ddpg),
            "il" => Ok(Mode::Il),
            "il+rl" | "ilrl" => Ok(Mode::IlRl),
            other => Err(Error::invalid(format!("unknown mode {other:?} (ddpg, il, il+rl)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Ddpg => "ddpg",
            Mode::Il => "il",
            Mode::IlRl => "il+rl",
        })
    }
}

/// A transition with its encoded states, tagged with the shape it came
/// from.
#[derive(Clone, Debug)]
pub struct Entry {
    pub transition: Transition,
    pub shape: String,
    /// Lives in the demonstration buffer.
    pub demo: bool,
    pub s: Arc<EncodedState>,
    pub s2: Arc<EncodedState>,
}

impl Entry {
    pub fn new(transition: Transition, shape: &str, cfg: &NetConfig, zero_projections: bool) -> Self {
        let s = Arc::new(encode_state(&transition.state, cfg, zero_projections));
        let s2 = Arc::new(encode_state(&transition.next_state, cfg, zero_projections));
        Entry {
            transition,
            shape: shape.to_string(),
            demo: false,
            s,
            s2,
        }
    }
}

/// Plain gradient descent with momentum.
#[derive(Clone, Debug, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, n: usize) -> Self {
        Sgd {
            lr,
            momentum,
            velocity: vec![0.0; n],
        }
    }

    /// `v ← μv + g; θ ← θ − lr·v`, then parameters are rounded to `f32`.
    pub fn step(&mut self, net: &mut Network, grad: &[f64]) {
        for ((p, v), g) in net.params.iter_mut().zip(self.velocity.iter_mut()).zip(grad) {
            *v = self.momentum * *v + g;
            *p -= self.lr * *v;
        }
        net.round_to_f32();
    }
}

/// Actor, critic, their targets and optimiser state.
#[derive(Clone, Debug)]
pub struct Agent {
    pub actor: Network,
    pub critic: Network,
    pub target_actor: Network,
    pub target_critic: Network,
    actor_opt: Sgd,
    critic_opt: Sgd,
    /// Updates applied so far; targets are copied when it hits a multiple of
    /// the target period.
    pub updates: u64,
}

impl Agent {
    pub fn new(net: &NetConfig, tc: &TrainerConfig) -> Result<Self> {
        let ck = Checkpoint::new(net)?;
        Ok(Agent::from_checkpoint(ck, tc))
    }

    pub fn from_checkpoint(ck: Checkpoint, tc: &TrainerConfig) -> Self {
        let (na, nc) = (ck.actor.n_params(), ck.critic.n_params());
        Agent {
            target_actor: ck.actor.clone(),
            target_critic: ck.critic.clone(),
            actor: ck.actor,
            critic: ck.critic,
            actor_opt: Sgd::new(tc.lr_actor, tc.momentum, na),
            critic_opt: Sgd::new(tc.lr_critic, tc.momentum, nc),
            updates: 0,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            actor: self.actor.clone(),
            critic: self.critic.clone(),
        }
    }

    pub fn copy_targets(&mut self) {
        self.target_actor = self.actor.clone();
        self.target_critic = self.critic.clone();
    }
}

fn actions_matrix(rows: impl Iterator<Item = [f64; ACTION_DIM]>) -> Array2<f64> {
    let v: Vec<[f64; ACTION_DIM]> = rows.collect();
    Array2::from_shape_fn((v.len(), ACTION_DIM), |(i, j)| v[i][j])
}

fn state_inputs(batch: &[&Entry], next: bool) -> Inputs {
    let enc: Vec<&EncodedState> = batch.iter().map(|e| if next { &*e.s2 } else { &*e.s }).collect();
    Inputs::from_encoded(&enc, None)
}

/// `y = r + γ (1 − done) Q′(s′, π′(s′))`.
pub fn td_target(batch: &[&Entry], agent: &Agent, gamma: f64) -> Result<Vec<f64>> {
    let next = state_inputs(batch, true);
    let (a2, _) = agent.target_actor.forward(&next)?;
    let (q2, _) = agent.target_critic.forward(&next.with_actions(a2))?;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let t = &e.transition;
            let cont = if t.done { 0.0 } else { 1.0 };
            t.reward + gamma * cont * q2[[i, 0]]
        })
        .collect())
}

/// One TD step on the critic; returns the mean squared error before it.
pub fn critic_update(batch: &[&Entry], agent: &mut Agent, gamma: f64) -> Result<f64> {
    let y = td_target(batch, agent, gamma)?;
    let inp = state_inputs(batch, false).with_actions(actions_matrix(batch.iter().map(|e| e.transition.action.to_array())));
    let (q, tape) = agent.critic.forward(&inp)?;
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut dq = Array2::zeros((batch.len(), 1));
    for i in 0..batch.len() {
        let d = q[[i, 0]] - y[i];
        loss += d * d / n;
        dq[[i, 0]] = 2.0 * d / n;
    }
    let (g, _) = agent.critic.backward(&tape, &dq)?;
    agent.critic_opt.step(&mut agent.critic, &g);
    Ok(loss)
}

/// `Σ_i ‖π(s_i) − π^h(s_i)‖² · 1[Q(s_i, π^h(s_i)) > Q(s_i, π(s_i))]`.
pub fn bc_loss(pi: &[[f64; ACTION_DIM]], expert: &[[f64; ACTION_DIM]], q_expert: &[f64], q_pi: &[f64]) -> f64 {
    let mask: Vec<bool> = q_expert.iter().zip(q_pi).map(|(qe, qp)| qe > qp).collect();
    masked_sq_distance(pi, expert, &mask)
}

fn masked_sq_distance(pi: &[[f64; ACTION_DIM]], expert: &[[f64; ACTION_DIM]], mask: &[bool]) -> f64 {
    pi.iter()
        .zip(expert)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((a, b), _)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum()
}

/// How the cloning term enters the actor objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BcTerm {
    pub weight: f64,
    /// Apply the Q-filter to demonstration samples too. Agent samples are
    /// always filtered.
    pub filter_demos: bool,
}

impl BcTerm {
    pub const OFF: BcTerm = BcTerm {
        weight: 0.0,
        filter_demos: true,
    };

    pub fn from_config(tc: &TrainerConfig) -> Self {
        BcTerm {
            weight: tc.bc_weight,
            filter_demos: tc.q_filter_demos,
        }
    }
}

/// Actor objective pieces for a batch, without touching parameters.
pub struct ActorObjective {
    /// `−mean Q(s, π(s)) + w·L_BC`.
    pub loss: f64,
    pub bc: f64,
    /// Samples whose cloning term survived the filter.
    pub cloned: usize,
    /// Gradient of `loss` with respect to the actor parameters.
    pub grad: Vec<f64>,
}

/// Evaluates the actor objective and its gradient. Samples without an
/// expert action contribute no cloning term.
pub fn actor_objective(batch: &[&Entry], agent: &Agent, bc: BcTerm) -> Result<ActorObjective> {
    let inp = state_inputs(batch, false);
    let (pi, actor_tape) = agent.actor.forward(&inp)?;
    let (q, critic_tape) = agent.critic.forward(&inp.with_actions(pi.clone()))?;
    let b = batch.len();
    let n = b as f64;
    let (_, dq_da) = agent.critic.backward(&critic_tape, &Array2::from_elem((b, 1), 1.0))?;
    let dq_da = dq_da.expect("critic returns action gradient");
    let mut d_pi = dq_da.mapv(|v| -v / n);

    let mut l_bc = 0.0;
    let mut cloned = 0;
    let labelled: Vec<usize> = (0..b).filter(|&i| batch[i].transition.expert_action.is_some()).collect();
    if bc.weight > 0.0 && !labelled.is_empty() {
        let expert: Vec<[f64; ACTION_DIM]> = labelled
            .iter()
            .map(|&i| batch[i].transition.expert_action.expect("filtered").to_array())
            .collect();
        let sub: Vec<&EncodedState> = labelled.iter().map(|&i| &*batch[i].s).collect();
        let (qe, _) = agent.critic.forward(&Inputs::from_encoded(&sub, Some(&expert)))?;
        let pis: Vec<[f64; ACTION_DIM]> = labelled
            .iter()
            .map(|&i| std::array::from_fn(|j| pi[[i, j]]))
            .collect();
        let mask: Vec<bool> = labelled
            .iter()
            .enumerate()
            .map(|(k, &i)| (batch[i].demo && !bc.filter_demos) || qe[[k, 0]] > q[[i, 0]])
            .collect();
        l_bc = masked_sq_distance(&pis, &expert, &mask);
        for (k, &i) in labelled.iter().enumerate() {
            if mask[k] {
                cloned += 1;
                for j in 0..ACTION_DIM {
                    d_pi[[i, j]] += bc.weight * 2.0 * (pis[k][j] - expert[k][j]);
                }
            }
        }
    }
    let loss = -q.iter().sum::<f64>() / n + bc.weight * l_bc;
    let (grad, _) = agent.actor.backward(&actor_tape, &d_pi)?;
    Ok(ActorObjective {
        loss,
        bc: l_bc,
        cloned,
        grad,
    })
}

/// One step on `−mean Q + w·L_BC`; returns the objective before it.
pub fn actor_update(batch: &[&Entry], agent: &mut Agent, bc: BcTerm) -> Result<f64> {
    let obj = actor_objective(batch, agent, bc)?;
    agent.actor_opt.step(&mut agent.actor, &obj.grad);
    Ok(obj.loss)
}

/// Critic then actor update on one batch; returns both pre-step losses.
pub fn update_on_batch(batch: &[&Entry], agent: &mut Agent, gamma: f64, bc: BcTerm) -> Result<(f64, f64)> {
    let lc = critic_update(batch, agent, gamma)?;
    let la = actor_update(batch, agent, bc)?;
    Ok((lc, la))
}

/// One row of the training report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub phase: String,
    /// Episode index (train) or iteration count (pretrain).
    pub episode: usize,
    pub steps: usize,
    pub shape: String,
    pub episode_return: Option<f64>,
    pub surface_iou: Option<f64>,
    pub chamfer: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
}

pub fn write_report_csv<W: Write>(rows: &[ReportRow], mut w: W) -> Result<()> {
    writeln!(w, "phase,episode,steps,shape,return,surface_iou,chamfer,critic_loss,actor_loss")?;
    let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.phase,
            r.episode,
            r.steps,
            r.shape,
            f(r.episode_return),
            f(r.surface_iou),
            f(r.chamfer),
            f(r.critic_loss),
            f(r.actor_loss)
        )?;
    }
    Ok(())
}

/// Fills a demo buffer from demonstrations.
pub fn demo_buffer(demos: &[Demonstration], net: &NetConfig, tc: &TrainerConfig) -> Result<ReplayBuffer<Entry>> {
    let mut buf = ReplayBuffer::new(BufferKind::Demo, tc.demo_capacity)?;
    for d in demos {
        for t in &d.transitions {
            if t.expert_action.is_none() {
                return Err(Error::invalid("demonstration transition without expert action"));
            }
            let mut e = Entry::new(t.clone(), &d.shape, net, tc.zero_projections);
            e.demo = true;
            if !buf.push(e) {
                warn!("demo buffer full at {} transitions", buf.len());
                return Ok(buf);
            }
        }
    }
    Ok(buf)
}

/// `iters` updates on demo batches only, with hard target copies every
/// `target_period` iterations.
pub fn pretrain(
    agent: &mut Agent,
    demos: &ReplayBuffer<Entry>,
    tc: &TrainerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    if tc.pretrain_iters == 0 {
        return Ok(rows);
    }
    let n = tc.batch_size.min(demos.len());
    if n == 0 {
        return Err(Error::invalid("pre-training needs demonstrations"));
    }
    if n < tc.batch_size {
        warn!("demo buffer holds {} transitions; batches shrink to that size", demos.len());
    }
    let (mut sc, mut sa) = (0.0, 0.0);
    let mut since = 0;
    for it in 1..=tc.pretrain_iters {
        let batch = demos.sample(n, rng)?;
        let (lc, la) = update_on_batch(&batch, agent, tc.gamma, BcTerm::from_config(tc))?;
        agent.updates += 1;
        if agent.updates % tc.target_period as u64 == 0 {
            agent.copy_targets();
        }
        sc += lc;
        sa += la;
        since += 1;
        if it % tc.log_every == 0 || it == tc.pretrain_iters {
            rows.push(ReportRow {
                phase: "pretrain".into(),
                episode: it,
                steps: 0,
                shape: String::new(),
                episode_return: None,
                surface_iou: None,
                chamfer: None,
                critic_loss: Some(sc / since as f64),
                actor_loss: Some(sa / since as f64),
            });
            info!("pretrain {it}/{}: critic {:.5} actor {:.5}", tc.pretrain_iters, sc / since as f64, sa / since as f64);
            (sc, sa, since) = (0.0, 0.0, 0);
        }
    }
    Ok(rows)
}

/// Final-reconstruction quality of a finished environment.
fn episode_quality(env: &ParseEnv, shape: &VoxelGrid, samples: usize) -> Result<(f64, Option<f64>)> {
    let iou = surface_iou(&env.reconstruction_voxels()?, shape)?;
    let mesh = env.final_mesh();
    let gt = TriMesh::from_voxels(shape);
    let cd = if mesh.surface_area() > 0.0 {
        Some(chamfer_l1(&mesh, &gt, samples)?)
    } else {
        None
    };
    Ok((iou, cd))
}

/// Agent–environment interaction with updates after every step, until the
/// step budget is spent.
pub fn train(
    agent: &mut Agent,
    shapes: &[(String, VoxelGrid)],
    env_cfg: &EnvConfig,
    tc: &TrainerConfig,
    mut demos: Option<&mut ReplayBuffer<Entry>>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    if tc.train_steps == 0 || shapes.is_empty() {
        return Ok(rows);
    }
    let use_bc = demos.is_some();
    let bc = if use_bc { BcTerm::from_config(tc) } else { BcTerm::OFF };
    let net_cfg = agent.actor.config().clone();
    let mut agent_buf: ReplayBuffer<Entry> = ReplayBuffer::new(BufferKind::Agent, tc.agent_capacity)?;
    let mut best_return: std::collections::HashMap<String, f64> = std::collections::HashMap::new();
    if let Some(d) = demos.as_deref() {
        for e in d.iter() {
            *best_return.entry(e.shape.clone()).or_insert(0.0) += e.transition.reward;
        }
    }
    let noise = Normal::new(0.0, tc.noise_sigma.max(1e-12)).expect("sigma is positive");
    let mut env = ParseEnv::new(env_cfg.clone())?;
    let mut steps = 0usize;
    let mut episode = 0usize;
    let mut warned = false;
    while steps < tc.train_steps && (tc.max_episodes == 0 || episode < tc.max_episodes) {
        let si = rng.gen_range(0..shapes.len());
        let (name, shape) = &shapes[si];
        let mut state: Arc<ParseState> = env.reset(shape)?;
        let mut ep_entries = Vec::new();
        let mut ret = 0.0;
        let (mut sc, mut sa, mut nu) = (0.0, 0.0, 0usize);
        loop {
            let enc = encode_state(&state, &net_cfg, tc.zero_projections);
            let a = agent.actor.forward_one(&enc, None)?;
            let noisy: [f64; ACTION_DIM] = std::array::from_fn(|j| {
                let n = if tc.noise_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
                (a[j] + n).clamp(0.0, 1.0)
            });
            let action = CutAction::from_array(noisy);
            let r = env.step(&action)?;
            steps += 1;
            ret += r.reward;
            let t = Transition {
                state: state.clone(),
                action,
                reward: r.reward,
                next_state: r.next_state.clone(),
                done: r.done,
                expert_action: use_bc.then(|| expert_action(&state)),
            };
            let entry = Entry::new(t, name, &net_cfg, tc.zero_projections);
            ep_entries.push(entry.clone());
            agent_buf.push(entry);

            let mut did_update = false;
            if let Some(d) = demos.as_deref() {
                if d.len() >= tc.batch_size {
                    let batch = d.sample(tc.batch_size, rng)?;
                    let (lc, la) = update_on_batch(&batch, agent, tc.gamma, bc)?;
                    (sc, sa, nu) = (sc + lc, sa + la, nu + 1);
                    did_update = true;
                }
            }
            if agent_buf.len() >= tc.batch_size {
                let batch = agent_buf.sample(tc.batch_size, rng)?;
                let (lc, la) = update_on_batch(&batch, agent, tc.gamma, bc)?;
                (sc, sa, nu) = (sc + lc, sa + la, nu + 1);
                did_update = true;
            } else if !warned {
                warn!("agent buffer below batch size; skipping its updates until it fills");
                warned = true;
            }
            if did_update {
                agent.updates += 1;
            }
            if steps % tc.target_period == 0 {
                agent.copy_targets();
            }
            state = r.next_state;
            if r.done || steps >= tc.train_steps {
                break;
            }
        }
        if tc.refresh_demos {
            if let Some(d) = demos.as_deref_mut() {
                let best = best_return.get(name).copied();
                if env.is_done() && best.is_some_and(|b| ret > b) {
                    d.retain(|e| &e.shape != name);
                    for mut e in ep_entries {
                        e.demo = true;
                        d.push(e);
                    }
                    best_return.insert(name.clone(), ret);
                    info!("refreshed demonstrations of {name} (return {ret:.3})");
                }
            }
        }
        let (iou, cd) = if env.is_done() {
            let (i, c) = episode_quality(&env, shape, env_cfg.chamfer_samples)?;
            (Some(i), c)
        } else {
            (None, None)
        };
        rows.push(ReportRow {
            phase: "train".into(),
            episode,
            steps,
            shape: name.clone(),
            episode_return: Some(ret),
            surface_iou: iou,
            chamfer: cd,
            critic_loss: (nu > 0).then(|| sc / nu as f64),
            actor_loss: (nu > 0).then(|| sa / nu as f64),
        });
        episode += 1;
    }
    Ok(rows)
}

/// Mean final surface IoU of greedy (noise-free) episodes, per shape.
pub fn evaluate(
    actor: &Network,
    shapes: &[(String, VoxelGrid)],
    env_cfg: &EnvConfig,
    zero_projections: bool,
) -> Result<Vec<(String, f64, Option<f64>)>> {
    use rayon::prelude::*;
    shapes
        .par_iter()
        .map(|(name, grid)| {
            let mut policy = ActorPolicy { actor, zero_projections };
            let ep = crate::env::run_episode(grid, env_cfg, &mut policy, None)?;
            Ok((name.clone(), ep.metrics.surface_iou, ep.metrics.chamfer_l1))
        })
        .collect()
}

/// The actor as a policy.
pub struct ActorPolicy<'a> {
    pub actor: &'a Network,
    pub zero_projections: bool,
}

impl crate::env::Policy for ActorPolicy<'_> {
    fn act(&mut self, state: &ParseState) -> Result<CutAction> {
        self.actor.act(state, self.zero_projections)
    }
}

/// Output of [`run_training`].
pub struct TrainingRun {
    pub agent: Agent,
    pub report: Vec<ReportRow>,
}

/// The three schedules: DDPG from scratch, pre-training only, and
/// pre-training followed by DDPG with cloning.
pub fn run_training(
    mode: Mode,
    shapes: &[(String, VoxelGrid)],
    demos: Option<&[Demonstration]>,
    cfg: &RunConfig,
) -> Result<TrainingRun> {
    cfg.validate()?;
    let tc = &cfg.trainer;
    let mut agent = Agent::new(&cfg.net, tc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut report = Vec::new();
    match mode {
        Mode::Ddpg => {
            report.extend(train(&mut agent, shapes, &cfg.env, tc, None, &mut rng)?);
        }
        Mode::Il | Mode::IlRl => {
            let demos = demos.ok_or_else(|| Error::invalid(format!("mode {mode} needs demonstrations")))?;
            let mut buf = demo_buffer(demos, &cfg.net, tc)?;
            report.extend(pretrain(&mut agent, &buf, tc, &mut rng)?);
            if mode == Mode::IlRl {
                report.extend(train(&mut agent, shapes, &cfg.env, tc, Some(&mut buf), &mut rng)?);
            }
        }
    }
    Ok(TrainingRun { agent, report })
}
