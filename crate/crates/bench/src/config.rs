//! Experiment configuration as flat `key = value` text.
//!
//! Blank lines and `#` comments are ignored. `problem` picks the defaults for
//! every other key, so it is applied first regardless of where it appears.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `|Ax - y|^2 + lambda * Huber_delta(Dx)`, solved by the gradient scheme.
    HuberTv,
    /// `|Ax - y|^2 + lambda * |Wx|_1`, solved by forward-backward splitting.
    WaveletL1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Ray,
    Blur,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    SheppLike,
    Blobs,
    /// A graymap file; the same image is used for every seed.
    Ingest(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Gd,
    Nesterov,
    Ista,
    Fista,
    /// Random feasible deviations; exercises the certificates without training.
    Random,
    Learned,
    /// Network output used as-is, without safeguard or enforcement.
    LearnedUnnormalized,
}

impl Solver {
    pub const ALL: [Solver; 7] = [
        Solver::Gd,
        Solver::Nesterov,
        Solver::Ista,
        Solver::Fista,
        Solver::Random,
        Solver::Learned,
        Solver::LearnedUnnormalized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Gd => "gd",
            Solver::Nesterov => "nesterov",
            Solver::Ista => "ista",
            Solver::Fista => "fista",
            Solver::Random => "random",
            Solver::Learned => "learned",
            Solver::LearnedUnnormalized => "learned_unnormalized",
        }
    }

    /// Whether runs of this solver carry certificates that are checked.
    pub fn enforced(self) -> bool {
        matches!(self, Solver::Random | Solver::Learned)
    }

    pub fn needs_training(self) -> bool {
        matches!(self, Solver::Learned | Solver::LearnedUnnormalized)
    }

    fn fits(self, problem: ProblemKind) -> bool {
        match self {
            Solver::Gd | Solver::Nesterov => problem == ProblemKind::HuberTv,
            Solver::Ista | Solver::Fista => problem == ProblemKind::WaveletL1,
            _ => true,
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown solver {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub operator: OperatorKind,
    /// Image side length.
    pub size: usize,
    /// Projection angles of the ray transform.
    pub angles: usize,
    pub blur_sigma: f64,
    /// Noise norm as a fraction of the clean data norm.
    pub noise: f64,
    pub lambda: f64,
    /// Huber transition width.
    pub delta: f64,
    pub wavelet_levels: usize,
    pub eps: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    /// Forward-backward step size; defaults to `beta`.
    pub gamma: Option<f64>,
    pub iters: usize,
    /// Base seed: test problems are the first `test_problems` test-pool seeds
    /// at or above it, training draws from the train pool.
    pub seed: u64,
    pub test_problems: usize,
    pub phantom: PhantomKind,
    pub solvers: Vec<Solver>,
    pub reference_budget: usize,
    pub train_steps: usize,
    pub train_seed: u64,
    pub checkpoint: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemKind) -> Self {
        let (lambda, solvers) = match problem {
            ProblemKind::HuberTv => (0.0015, vec![Solver::Gd, Solver::Nesterov, Solver::Learned]),
            ProblemKind::WaveletL1 => (0.0005, vec![Solver::Ista, Solver::Fista, Solver::Learned]),
        };
        Self {
            problem,
            operator: OperatorKind::Ray,
            size: 32,
            angles: 32,
            blur_sigma: 1.0,
            noise: 0.05,
            lambda,
            delta: 0.01,
            wavelet_levels: 3,
            eps: 0.9,
            kappa_a: 0.5,
            kappa_b: 0.5,
            gamma: None,
            iters: 500,
            seed: 0,
            test_problems: 20,
            phantom: PhantomKind::Blobs,
            solvers,
            reference_budget: 5000,
            train_steps: 2000,
            train_seed: 0,
            checkpoint: None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.problem == ProblemKind::HuberTv
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Invalid(m));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.is_smooth() && !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        for (name, v) in [("eps", self.eps), ("kappa_a", self.kappa_a), ("kappa_b", self.kappa_b)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if self.size < 4 {
            return bad(format!("size {} is too small", self.size));
        }
        if self.problem == ProblemKind::WaveletL1 {
            if !self.size.is_power_of_two() {
                return bad(format!("wavelets need a power-of-two size, got {}", self.size));
            }
            if self.wavelet_levels == 0 || (self.size >> self.wavelet_levels) == 0 {
                return bad(format!(
                    "{} wavelet levels do not fit a {} grid",
                    self.wavelet_levels, self.size
                ));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be nonnegative, got {}", self.noise));
        }
        if self.operator == OperatorKind::Blur && !(self.blur_sigma > 0.0) {
            return bad("blur_sigma must be positive".into());
        }
        if self.operator == OperatorKind::Ray && self.angles == 0 {
            return bad("angles must be positive".into());
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("gamma must be positive, got {g}"));
            }
        }
        if self.iters < 2 {
            return bad("iters must be at least 2".into());
        }
        if self.test_problems == 0 {
            return bad("test_problems must be positive".into());
        }
        if self.reference_budget < 1000 {
            return bad(format!("reference_budget {} is below 1000", self.reference_budget));
        }
        if self.solvers.is_empty() {
            return bad("no solvers configured".into());
        }
        for s in &self.solvers {
            if !s.fits(self.problem) {
                return bad(format!("solver {s} does not apply to {:?}", self.problem));
            }
        }
        Ok(())
    }

    /// Parses and validates a config file body.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| BenchError::Config {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let problem = match pairs.iter().find(|(_, k, _)| k == "problem") {
            Some((line, _, v)) => parse_problem(v).map_err(|message| BenchError::Config {
                line: *line,
                message,
            })?,
            None => ProblemKind::HuberTv,
        };
        let mut cfg = Self::new(problem);
        for (line, k, v) in &pairs {
            cfg.set(k, v).map_err(|message| BenchError::Config {
                line: *line,
                message,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("bad value {v:?} for {key}"))
        }
        match key {
            "problem" => self.problem = parse_problem(v)?,
            "operator" => {
                self.operator = match v {
                    "ray" => OperatorKind::Ray,
                    "blur" => OperatorKind::Blur,
                    _ => return Err(format!("unknown operator {v:?}")),
                }
            }
            "size" => self.size = num(key, v)?,
            "angles" => self.angles = num(key, v)?,
            "blur_sigma" => self.blur_sigma = num(key, v)?,
            "noise" => self.noise = num(key, v)?,
            "lambda" => self.lambda = num(key, v)?,
            "delta" => self.delta = num(key, v)?,
            "wavelet_levels" => self.wavelet_levels = num(key, v)?,
            "eps" => self.eps = num(key, v)?,
            "kappa" => {
                self.kappa_a = num(key, v)?;
                self.kappa_b = self.kappa_a;
            }
            "kappa_a" => self.kappa_a = num(key, v)?,
            "kappa_b" => self.kappa_b = num(key, v)?,
            "gamma" => {
                self.gamma = match v {
                    "beta" => None,
                    _ => Some(num(key, v)?),
                }
            }
            "iters" => self.iters = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "test_problems" => self.test_problems = num(key, v)?,
            "phantom" => {
                self.phantom = match v {
                    "blobs" => PhantomKind::Blobs,
                    "shepp_like" => PhantomKind::SheppLike,
                    _ => match v.strip_prefix("ingest:") {
                        Some(p) if !p.is_empty() => PhantomKind::Ingest(PathBuf::from(p)),
                        _ => return Err(format!("unknown phantom {v:?}")),
                    },
                }
            }
            "solvers" => {
                self.solvers = v
                    .split(',')
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(Solver::from_str)
                    .collect::<std::result::Result<_, _>>()?;
            }
            "reference_budget" => self.reference_budget = num(key, v)?,
            "train_steps" => self.train_steps = num(key, v)?,
            "train_seed" => self.train_seed = num(key, v)?,
            "checkpoint" => {
                self.checkpoint = match v {
                    "" | "none" => None,
                    _ => Some(PathBuf::from(v)),
                }
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Config file text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let problem = match self.problem {
            ProblemKind::HuberTv => "huber_tv",
            ProblemKind::WaveletL1 => "wavelet_l1",
        };
        let operator = match self.operator {
            OperatorKind::Ray => "ray",
            OperatorKind::Blur => "blur",
        };
        let phantom = match &self.phantom {
            PhantomKind::Blobs => "blobs".to_string(),
            PhantomKind::SheppLike => "shepp_like".to_string(),
            PhantomKind::Ingest(p) => format!("ingest:{}", p.display()),
        };
        let solvers: Vec<&str> = self.solvers.iter().map(|s| s.name()).collect();
        let mut lines = vec![
            format!("problem = {problem}"),
            format!("operator = {operator}"),
            format!("size = {}", self.size),
            format!("angles = {}", self.angles),
            format!("blur_sigma = {:?}", self.blur_sigma),
            format!("noise = {:?}", self.noise),
            format!("lambda = {:?}", self.lambda),
            format!("delta = {:?}", self.delta),
            format!("wavelet_levels = {}", self.wavelet_levels),
            format!("eps = {:?}", self.eps),
            format!("kappa_a = {:?}", self.kappa_a),
            format!("kappa_b = {:?}", self.kappa_b),
            match self.gamma {
                Some(g) => format!("gamma = {g:?}"),
                None => "gamma = beta".to_string(),
            },
            format!("iters = {}", self.iters),
            format!("seed = {}", self.seed),
            format!("test_problems = {}", self.test_problems),
            format!("phantom = {phantom}"),
            format!("solvers = {}", solvers.join(",")),
            format!("reference_budget = {}", self.reference_budget),
            format!("train_steps = {}", self.train_steps),
            format!("train_seed = {}", self.train_seed),
        ];
        if let Some(p) = &self.checkpoint {
            lines.push(format!("checkpoint = {}", p.display()));
        }
        lines.join("\n") + "\n"
    }
}

fn parse_problem(v: &str) -> std::result::Result<ProblemKind, String> {
    match v {
        "huber_tv" => Ok(ProblemKind::HuberTv),
        "wavelet_l1" => Ok(ProblemKind::WaveletL1),
        _ => Err(format!("unknown problem {v:?}")),
    }
}
