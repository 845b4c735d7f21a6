//! The hybrid search loop.
//!
//! Per outer step a fresh UCT tree is grown over topological actions;
//! geometric actions inside the tree come from the configured fast
//! estimator. The highest-Q root child's action is committed with a
//! geometric action recomputed by the full inverse estimator, and the loop
//! repeats until the silhouette matches or the step budget runs out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate, OptimConfig};
use crate::image_io::SilhouetteImage;
use crate::mesh::{GeomAction, Mesh2D, TopoAction};
use crate::reward::{compute_reward, RewardBreakdown, RewardWeights};
use crate::sequence::{ConstructionSequence, SequenceStep};
use crate::tps::{fast_estimate, TpsConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutEstimator {
    /// Thin-plate-spline warp surrogate.
    TpsFast,
    /// Truncated differentiable-rendering descent.
    DrFast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Maximum number of committed construction steps (K).
    pub outer_steps: usize,
    /// MCTS iterations per tree.
    pub mcts_iterations: usize,
    /// UCT exploration constant.
    pub exploration: f64,
    /// Rollout depth (N_sim).
    pub rollout_depth: usize,
    pub estimator: RolloutEstimator,
    /// Terminal shape-matching IoU.
    pub stop_iou: f64,
    pub weights: RewardWeights,
    pub seed: u64,
    /// Canonical extrusion offset length.
    pub extrude_len: f64,
    /// Full inverse estimation (committed steps).
    pub optim: OptimConfig,
    /// Truncated inverse estimation (dr_fast rollouts).
    pub fast_optim: OptimConfig,
    /// TPS surrogate settings (tps_fast rollouts).
    pub tps: TpsConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            outer_steps: 12,
            // Search budgets are tuned for single-core desk-scale runs: a
            // shallow tree with a cheap surrogate matches deeper searches in
            // final quality here while solving in seconds.
            mcts_iterations: 16,
            exploration: std::f64::consts::SQRT_2,
            rollout_depth: 1,
            estimator: RolloutEstimator::TpsFast,
            stop_iou: 0.95,
            weights: RewardWeights::default(),
            seed: 0,
            extrude_len: 8.0,
            optim: OptimConfig::default(),
            fast_optim: OptimConfig::fast(),
            tps: TpsConfig { iterations: 16, ..TpsConfig::default() },
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_steps == 0 || self.mcts_iterations == 0 {
            return Err(Error::InvalidArgument("planner step counts must be positive".into()));
        }
        if !(self.exploration >= 0.0) {
            return Err(Error::InvalidArgument("exploration constant must be >= 0".into()));
        }
        if !(self.stop_iou > 0.0 && self.stop_iou <= 1.0) {
            return Err(Error::InvalidArgument("stop_iou must lie in (0,1]".into()));
        }
        self.weights.validate()
    }
}

/// MCTS node: mesh snapshot, value statistics, untried actions, children.
pub struct SearchNode {
    pub mesh: Mesh2D,
    value_sum: f64,
    pub visits: u64,
    /// Remaining valid actions, tagged with their enumeration index.
    pub untried: Vec<(usize, TopoAction)>,
    pub children: Vec<Child>,
    pub reward_here: RewardBreakdown,
}

pub struct Child {
    /// Index of the action in the parent's enumeration order (tie-break key).
    pub action_index: usize,
    pub topo: TopoAction,
    pub geom: GeomAction,
    pub node: SearchNode,
}

impl SearchNode {
    fn new(mesh: Mesh2D, target: &SilhouetteImage, cfg: &PlannerConfig) -> Result<Self> {
        let res = (target.width, target.height);
        let reward_here = compute_reward(&mesh, target, &cfg.weights, res)?;
        let untried = mesh
            .enumerate_valid_actions(cfg.extrude_len)
            .into_iter()
            .enumerate()
            .collect();
        Ok(SearchNode { mesh, value_sum: 0.0, visits: 0, untried, children: Vec::new(), reward_here })
    }

    pub fn q_value(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.value_sum / self.visits as f64
        }
    }

    fn is_terminal(&self, cfg: &PlannerConfig) -> bool {
        self.reward_here.r_sm >= cfg.stop_iou
    }

    /// Records one backpropagated value (running mean via tracked sum).
    pub fn record(&mut self, value: f64) {
        self.visits += 1;
        self.value_sum += value;
    }
}

/// Updates every node on a root-to-leaf path with one observed value.
pub fn backpropagate(path: &mut [&mut SearchNode], value: f64) {
    for node in path.iter_mut() {
        node.record(value);
    }
}

/// UCT child choice: argmax of q + c sqrt(ln(parent visits)/child visits),
/// ties broken by lowest child index. Requires a fully expanded node.
pub fn uct_select(node: &SearchNode, c: f64) -> Result<usize> {
    if !node.untried.is_empty() {
        return Err(Error::InvalidArgument("uct_select called with untried actions remaining".into()));
    }
    if node.children.is_empty() {
        return Err(Error::InvalidArgument("uct_select called on a childless node".into()));
    }
    let ln_parent = (node.visits.max(1) as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, child) in node.children.iter().enumerate() {
        let bonus = c * (ln_parent / child.node.visits.max(1) as f64).sqrt();
        let score = child.node.q_value() + bonus;
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    Ok(best)
}

fn run_fast_estimator(
    mesh: &Mesh2D,
    target: &SilhouetteImage,
    cfg: &PlannerConfig,
) -> GeomAction {
    let result = match cfg.estimator {
        RolloutEstimator::TpsFast => fast_estimate(mesh, target, &cfg.tps),
        RolloutEstimator::DrFast => estimate(mesh, target, &cfg.fast_optim).map(|(g, _)| g),
    };
    // Estimator failures degrade to a zero geometric action.
    result.unwrap_or_else(|_| GeomAction::zero(mesh.vertices().len()))
}

/// Expands one untried action chosen uniformly at random, resolving its
/// geometric action with the fast estimator. Returns the new child's index.
pub fn expand(
    node: &mut SearchNode,
    target: &SilhouetteImage,
    cfg: &PlannerConfig,
    rng: &mut impl Rng,
) -> Result<usize> {
    if node.untried.is_empty() {
        return Err(Error::InvalidArgument("expand called with no untried actions".into()));
    }
    let pick = rng.gen_range(0..node.untried.len());
    let (action_index, topo) = node.untried.remove(pick);
    let after_topo = node.mesh.apply_topo(&topo)?;
    let geom = run_fast_estimator(&after_topo, target, cfg);
    let child_mesh = after_topo.apply_geom(&geom)?;
    let child = SearchNode::new(child_mesh, target, cfg)?;
    node.children.push(Child { action_index, topo, geom, node: child });
    Ok(node.children.len() - 1)
}

/// Random rollout from a node: up to rollout_depth steps of (random valid
/// topological action, fast-estimated geometry), accumulating the reward of
/// every resulting state. A state matching the target is absorbing: its
/// reward repeats for the remaining depth, so early success is never
/// penalized relative to longer rollouts.
pub fn simulate(
    node: &SearchNode,
    target: &SilhouetteImage,
    cfg: &PlannerConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    let res = (target.width, target.height);
    let mut mesh = node.mesh.clone();
    let mut last = node.reward_here;
    let mut acc = 0.0;
    for _ in 0..cfg.rollout_depth {
        if last.r_sm >= cfg.stop_iou {
            acc += last.r_all;
            continue;
        }
        let actions = mesh.enumerate_valid_actions(cfg.extrude_len);
        if actions.is_empty() {
            break;
        }
        let topo = actions[rng.gen_range(0..actions.len())];
        let after_topo = mesh.apply_topo(&topo)?;
        let geom = run_fast_estimator(&after_topo, target, cfg);
        let next = after_topo.apply_geom(&geom)?;
        let breakdown = compute_reward(&next, target, &cfg.weights, res)?;
        acc += breakdown.r_all;
        last = breakdown;
        mesh = next;
    }
    Ok(acc)
}

/// One select-expand-simulate-backpropagate pass. Returns the accumulated
/// reward observed from `node` downward (including the node's own reward).
fn mcts_iterate(
    node: &mut SearchNode,
    target: &SilhouetteImage,
    cfg: &PlannerConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    let value = if node.is_terminal(cfg) || (node.untried.is_empty() && node.children.is_empty()) {
        node.reward_here.r_all
    } else if !node.untried.is_empty() {
        let ci = expand(node, target, cfg, rng)?;
        let child = &mut node.children[ci];
        let below = child.node.reward_here.r_all + simulate(&child.node, target, cfg, rng)?;
        child.node.record(below);
        node.reward_here.r_all + below
    } else {
        let ci = uct_select(node, cfg.exploration)?;
        let below = mcts_iterate(&mut node.children[ci].node, target, cfg, rng)?;
        node.reward_here.r_all + below
    };
    node.record(value);
    Ok(value)
}

/// Schedule-independent RNG stream for (seed, outer step, iteration).
fn derive_rng(seed: u64, outer: u64, iteration: u64) -> ChaCha8Rng {
    // splitmix64 over the combined indices.
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(outer.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(iteration.wrapping_mul(0x94d0_49bb_1331_11eb))
        .wrapping_add(0x2545_f491_4f6c_dd1d);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Builds and searches one fresh tree, returning the root's actions ranked
/// by Q value (descending, ties broken by lowest action index).
pub fn plan_ranked(
    mesh: &Mesh2D,
    target: &SilhouetteImage,
    cfg: &PlannerConfig,
    outer_index: usize,
) -> Result<Vec<TopoAction>> {
    let mut root = SearchNode::new(mesh.clone(), target, cfg)?;
    if root.untried.is_empty() {
        return Ok(Vec::new());
    }
    for it in 0..cfg.mcts_iterations {
        let mut rng = derive_rng(cfg.seed, outer_index as u64, it as u64);
        mcts_iterate(&mut root, target, cfg, &mut rng)?;
    }
    let mut order: Vec<(f64, usize, TopoAction)> = root
        .children
        .iter()
        .map(|c| (c.node.q_value(), c.action_index, c.topo))
        .collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    Ok(order.into_iter().map(|(_, _, t)| t).collect())
}

/// Searches one fresh tree and returns the best root action with its
/// geometry recomputed by the full inverse estimator, or `None` when no
/// valid action exists.
pub fn plan_one_step(
    mesh: &Mesh2D,
    target: &SilhouetteImage,
    cfg: &PlannerConfig,
    outer_index: usize,
) -> Result<Option<(TopoAction, GeomAction)>> {
    let ranked = plan_ranked(mesh, target, cfg, outer_index)?;
    let Some(topo) = ranked.first() else {
        return Ok(None);
    };
    // The fast-estimate geometry seen during search is discarded; the
    // committed action uses the full estimator.
    let after_topo = mesh.apply_topo(topo)?;
    let (geom, _) = estimate(&after_topo, target, &cfg.optim)?;
    Ok(Some((*topo, geom)))
}

/// Full-estimator geometry for a committed action, taking the better of two
/// deterministic descent starts: the mesh as-is, and the mesh translated so
/// its rendered centroid matches the target's. The second start escapes the
/// poor local optima the raster loss has when the target's mass lies far
/// from the current silhouette.
fn commit_geom(
    after_topo: &Mesh2D,
    target: &SilhouetteImage,
    cfg: &PlannerConfig,
) -> Result<(GeomAction, Mesh2D, RewardBreakdown)> {
    let res = (target.width, target.height);
    let evaluate = |geom: GeomAction| -> Result<(GeomAction, Mesh2D, RewardBreakdown)> {
        let next = after_topo.apply_geom(&geom)?;
        let reward = compute_reward(&next, target, &cfg.weights, res)?;
        Ok((geom, next, reward))
    };
    let (plain, _) = estimate(after_topo, target, &cfg.optim)?;
    let mut best = evaluate(plain)?;

    let target_c = target.foreground_centroid();
    let mesh_c = crate::raster::render_binary(after_topo, res)?.foreground_centroid();
    if let (Some(tc), Some(mc)) = (target_c, mesh_c) {
        let shift = [tc[0] - mc[0], tc[1] - mc[1]];
        if shift[0].hypot(shift[1]) > 1.0 {
            let n = after_topo.vertices().len();
            let shifted = after_topo.apply_geom(&GeomAction { deltas: vec![shift; n] })?;
            let (refine, _) = estimate(&shifted, target, &cfg.optim)?;
            let combined = GeomAction {
                deltas: refine
                    .deltas
                    .iter()
                    .map(|d| [d[0] + shift[0], d[1] + shift[1]])
                    .collect(),
            };
            let aligned = evaluate(combined)?;
            if aligned.2.r_all > best.2.r_all {
                best = aligned;
            }
        }
    }
    Ok(best)
}

/// Runs the outer loop: plan, commit, repeat until the target is matched,
/// no action remains, or the step budget is exhausted.
pub fn solve(
    initial: &Mesh2D,
    target: &SilhouetteImage,
    cfg: &PlannerConfig,
) -> Result<ConstructionSequence> {
    cfg.validate()?;
    let res = (target.width, target.height);
    let mut mesh = initial.clone();
    let mut steps = Vec::new();
    for outer in 0..cfg.outer_steps {
        let here = compute_reward(&mesh, target, &cfg.weights, res)?;
        if here.r_sm >= cfg.stop_iou {
            break;
        }
        // Try candidates in Q order; commit the first whose full-estimator
        // geometry improves r_all, or improves the silhouette match without
        // introducing new self-intersections. Stops when neither holds, so
        // the match quality never regresses.
        let ranked = plan_ranked(&mesh, target, cfg, outer)?;
        let mut committed = false;
        for topo in ranked {
            let after_topo = mesh.apply_topo(&topo)?;
            let (geom, next, reward) = commit_geom(&after_topo, target, cfg)?;
            if reward.r_all > here.r_all || (reward.r_sm > here.r_sm && reward.r_si <= here.r_si) {
                steps.push(SequenceStep { topo: Some(topo), geom, reward });
                mesh = next;
                committed = true;
                break;
            }
        }
        if !committed {
            break;
        }
    }
    Ok(ConstructionSequence {
        initial: initial.clone(),
        steps,
        final_mesh: mesh,
        config_echo: serde_json::to_value(cfg)?,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::render_binary;

    fn test_cfg() -> PlannerConfig {
        PlannerConfig {
            mcts_iterations: 20,
            rollout_depth: 2,
            tps: TpsConfig { iterations: 15, ..Default::default() },
            fast_optim: OptimConfig { iterations: 10, ..Default::default() },
            optim: OptimConfig { iterations: 60, ..Default::default() },
            ..Default::default()
        }
    }

    fn node_with_stats(mesh: &Mesh2D, target: &SilhouetteImage, cfg: &PlannerConfig, q: f64, visits: u64) -> SearchNode {
        let mut n = SearchNode::new(mesh.clone(), target, cfg).unwrap();
        for _ in 0..visits {
            n.record(q);
        }
        n
    }

    #[test]
    fn uct_pure_exploitation_and_exploration() {
        let cfg = test_cfg();
        let mesh = Mesh2D::new_rect([32.0, 32.0], 20.0, 12.0).unwrap();
        let target = render_binary(&mesh, (64, 64)).unwrap();
        let mut parent = SearchNode::new(mesh.clone(), &target, &cfg).unwrap();
        parent.untried.clear();
        for (q, visits) in [(3.0, 10), (7.0, 10), (5.0, 10)] {
            parent.children.push(Child {
                action_index: parent.children.len(),
                topo: TopoAction::edge_split(0, 0.5),
                geom: GeomAction::zero(4),
                node: node_with_stats(&mesh, &target, &cfg, q, visits),
            });
        }
        parent.visits = 30;
        assert_eq!(uct_select(&parent, 0.0).unwrap(), 1);

        // Equal Q and visits: tie-break to index 0.
        let mut tied = SearchNode::new(mesh.clone(), &target, &cfg).unwrap();
        tied.untried.clear();
        for _ in 0..3 {
            tied.children.push(Child {
                action_index: tied.children.len(),
                topo: TopoAction::edge_split(0, 0.5),
                geom: GeomAction::zero(4),
                node: node_with_stats(&mesh, &target, &cfg, 4.0, 5),
            });
        }
        tied.visits = 15;
        assert_eq!(uct_select(&tied, 1.0).unwrap(), 0);

        // Huge exploration constant: least-visited child wins.
        let mut explore = SearchNode::new(mesh.clone(), &target, &cfg).unwrap();
        explore.untried.clear();
        for visits in [100u64, 1] {
            explore.children.push(Child {
                action_index: explore.children.len(),
                topo: TopoAction::edge_split(0, 0.5),
                geom: GeomAction::zero(4),
                node: node_with_stats(&mesh, &target, &cfg, 4.0, visits),
            });
        }
        explore.visits = 101;
        assert_eq!(uct_select(&explore, 1e6).unwrap(), 1);

        // Contract violation with untried actions remaining.
        let with_untried = SearchNode::new(mesh, &target, &cfg).unwrap();
        assert!(uct_select(&with_untried, 1.0).is_err());
    }

    #[test]
    fn backpropagate_running_mean() {
        let cfg = test_cfg();
        let mesh = Mesh2D::new_rect([32.0, 32.0], 20.0, 12.0).unwrap();
        let target = render_binary(&mesh, (64, 64)).unwrap();
        let mut a = SearchNode::new(mesh.clone(), &target, &cfg).unwrap();
        let mut b = SearchNode::new(mesh.clone(), &target, &cfg).unwrap();
        let mut c = SearchNode::new(mesh, &target, &cfg).unwrap();
        backpropagate(&mut [&mut a], 10.0);
        assert_eq!(a.q_value(), 10.0);
        assert_eq!(a.visits, 1);
        backpropagate(&mut [&mut a], 0.0);
        assert_eq!(a.q_value(), 5.0);
        assert_eq!(a.visits, 2);
        backpropagate(&mut [&mut a, &mut b, &mut c], 3.0);
        assert_eq!(a.visits, 3);
        assert_eq!(b.visits, 1);
        assert_eq!(c.visits, 1);
    }

    #[test]
    fn expand_bookkeeping() {
        let cfg = test_cfg();
        let mesh = Mesh2D::new_rect([32.0, 32.0], 20.0, 12.0).unwrap();
        let target = render_binary(&Mesh2D::new_rect([32.0, 32.0], 24.0, 14.0).unwrap(), (64, 64)).unwrap();
        let mut node = SearchNode::new(mesh.clone(), &target, &cfg).unwrap();
        let total = node.untried.len();
        let mut rng = derive_rng(1, 0, 0);
        let ci = expand(&mut node, &target, &cfg, &mut rng).unwrap();
        assert_eq!(node.untried.len(), total - 1);
        assert_eq!(node.children.len(), 1);
        let child = &node.children[ci];
        let expected_topo = mesh.apply_topo(&child.topo).unwrap();
        assert_eq!(child.node.mesh.euler_counts(), expected_topo.euler_counts());
    }

    #[test]
    fn expand_single_untried_is_forced() {
        let cfg = test_cfg();
        let mesh = Mesh2D::new_rect([32.0, 32.0], 20.0, 12.0).unwrap();
        let target = render_binary(&mesh, (64, 64)).unwrap();
        let mut node = SearchNode::new(mesh, &target, &cfg).unwrap();
        let keep = node.untried[3];
        node.untried = vec![keep];
        let mut rng = derive_rng(9, 0, 0);
        let ci = expand(&mut node, &target, &cfg, &mut rng).unwrap();
        assert_eq!(node.children[ci].action_index, keep.0);
        assert!(node.untried.is_empty());
    }

    #[test]
    fn simulate_zero_depth_and_determinism() {
        let mut cfg = test_cfg();
        let mesh = Mesh2D::new_rect([32.0, 32.0], 20.0, 12.0).unwrap();
        let target = render_binary(&Mesh2D::new_rect([34.0, 32.0], 22.0, 14.0).unwrap(), (64, 64)).unwrap();
        let node = SearchNode::new(mesh, &target, &cfg).unwrap();
        cfg.rollout_depth = 0;
        let mut rng = derive_rng(1, 0, 0);
        assert_eq!(simulate(&node, &target, &cfg, &mut rng).unwrap(), 0.0);
        cfg.rollout_depth = 2;
        let a = simulate(&node, &target, &cfg, &mut derive_rng(5, 1, 2)).unwrap();
        let b = simulate(&node, &target, &cfg, &mut derive_rng(5, 1, 2)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn solve_already_matching_target_is_empty() {
        let cfg = test_cfg();
        let mesh = Mesh2D::new_rect([32.0, 32.0], 20.0, 12.0).unwrap();
        let target = render_binary(&mesh, (64, 64)).unwrap();
        let seq = solve(&mesh, &target, &cfg).unwrap();
        assert!(seq.steps.is_empty());
        assert_eq!(seq.final_mesh, mesh);
        seq.verify_replay().unwrap();
    }

    #[test]
    fn solve_deterministic_and_replayable() {
        let mut cfg = test_cfg();
        cfg.outer_steps = 2;
        cfg.mcts_iterations = 8;
        let mesh = Mesh2D::new_rect([30.0, 32.0], 16.0, 12.0).unwrap();
        let target = render_binary(&Mesh2D::new_rect([34.0, 32.0], 26.0, 18.0).unwrap(), (64, 64)).unwrap();
        let a = solve(&mesh, &target, &cfg).unwrap();
        let b = solve(&mesh, &target, &cfg).unwrap();
        assert_eq!(a, b);
        a.verify_replay().unwrap();
        let acc: f64 = a.steps.iter().map(|s| s.reward.r_all).sum();
        assert_eq!(acc, a.accumulated_reward());
    }
}
