//! Run configuration: a flat TOML file of optional keys layered over the
//! library defaults, then over by command-line flags. Unknown keys are
//! rejected.

use serde::Deserialize;

use autopoly::dataset::GenConfig;
use autopoly::estimator::OptimConfig;
use autopoly::planner::{PlannerConfig, RolloutEstimator};
use autopoly::tps::TpsConfig;
use autopoly::RewardWeights;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub res: Option<String>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,

    pub outer_steps: Option<usize>,
    pub mcts_iterations: Option<usize>,
    pub exploration: Option<f64>,
    pub rollout_depth: Option<usize>,
    pub estimator: Option<String>,
    pub stop_iou: Option<f64>,
    pub extrude_len: Option<f64>,

    pub w_sm: Option<f64>,
    pub w_sc: Option<f64>,
    pub w_si: Option<f64>,

    pub optim_iterations: Option<usize>,
    pub optim_eta: Option<f64>,
    pub fast_iterations: Option<usize>,
    pub fast_eta: Option<f64>,

    pub tps_m: Option<usize>,
    pub tps_iterations: Option<usize>,
    pub tps_eta: Option<f64>,

    pub gen_steps: Option<usize>,
    pub gen_jitter: Option<f64>,
    pub gen_count: Option<usize>,
}

pub fn parse_res(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("resolution must look like 64x64, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad resolution width {w:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad resolution height {h:?}"))?;
    if w == 0 || h == 0 {
        return Err("resolution components must be positive".into());
    }
    Ok((w, h))
}

pub fn parse_weights(s: &str) -> Result<RewardWeights, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("weights must look like sm,sc,si, got {s:?}"));
    }
    let mut v = [0.0f64; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.trim().parse().map_err(|_| format!("bad weight {p:?}"))?;
    }
    Ok(RewardWeights { w_sm: v[0], w_sc: v[1], w_si: v[2] })
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    pub fn resolution(&self) -> Result<(usize, usize), String> {
        match &self.res {
            Some(s) => parse_res(s),
            None => Ok((64, 64)),
        }
    }

    pub fn weights(&self) -> RewardWeights {
        let d = RewardWeights::default();
        RewardWeights {
            w_sm: self.w_sm.unwrap_or(d.w_sm),
            w_sc: self.w_sc.unwrap_or(d.w_sc),
            w_si: self.w_si.unwrap_or(d.w_si),
        }
    }

    pub fn planner(&self) -> Result<PlannerConfig, String> {
        let mut cfg = PlannerConfig::default();
        if let Some(v) = self.outer_steps {
            cfg.outer_steps = v;
        }
        if let Some(v) = self.mcts_iterations {
            cfg.mcts_iterations = v;
        }
        if let Some(v) = self.exploration {
            cfg.exploration = v;
        }
        if let Some(v) = self.rollout_depth {
            cfg.rollout_depth = v;
        }
        if let Some(name) = &self.estimator {
            cfg.estimator = match name.as_str() {
                "tps_fast" => RolloutEstimator::TpsFast,
                "dr_fast" => RolloutEstimator::DrFast,
                other => return Err(format!("unknown estimator {other:?} (expected tps_fast or dr_fast)")),
            };
        }
        if let Some(v) = self.stop_iou {
            cfg.stop_iou = v;
        }
        if let Some(v) = self.extrude_len {
            cfg.extrude_len = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.weights = self.weights();
        cfg.optim = self.optim();
        cfg.fast_optim = self.fast_optim();
        cfg.tps = self.tps_over(cfg.tps);
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn optim(&self) -> OptimConfig {
        let mut c = OptimConfig::default();
        if let Some(v) = self.optim_iterations {
            c.iterations = v;
        }
        if let Some(v) = self.optim_eta {
            c.eta = v;
        }
        if let Some(v) = self.sigma {
            c.sigma = v;
        }
        c
    }

    pub fn fast_optim(&self) -> OptimConfig {
        let mut c = OptimConfig::fast();
        if let Some(v) = self.fast_iterations {
            c.iterations = v;
        }
        if let Some(v) = self.fast_eta {
            c.eta = v;
        }
        if let Some(v) = self.sigma {
            c.sigma = v;
        }
        c
    }

    pub fn tps(&self) -> TpsConfig {
        self.tps_over(TpsConfig::default())
    }

    /// Overlays the tps_* keys onto a caller-chosen base (the planner's own
    /// default differs from the standalone `TpsConfig` default).
    pub fn tps_over(&self, base: TpsConfig) -> TpsConfig {
        let mut c = base;
        if let Some(v) = self.tps_m {
            c.m = v;
        }
        if let Some(v) = self.tps_iterations {
            c.iterations = v;
        }
        if let Some(v) = self.tps_eta {
            c.eta = v;
        }
        if let Some(v) = self.sigma {
            c.sigma = v;
        }
        c
    }

    pub fn gen(&self) -> Result<GenConfig, String> {
        let mut c = GenConfig::default();
        if let Some(v) = self.gen_steps {
            c.steps = v;
        }
        if let Some(v) = self.gen_jitter {
            c.jitter = v;
        }
        if let Some(v) = self.gen_count {
            c.count = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.extrude_len {
            c.extrude_len = v;
        }
        c.resolution = self.resolution()?;
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }
}
