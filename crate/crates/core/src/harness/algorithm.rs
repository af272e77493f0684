use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::baselines;
use crate::error::{JsrError, Result};
use crate::model::JsrProblem;
use crate::noise::{self, DEFAULT_NOISE_EPSILON_FACTOR};
use crate::solver::{self, SignalSubspace, SolveResult, SsMusicConfig};

/// Registered solvers, by the names used on the command line and in output
/// files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Music,
    SsMusic,
    IMusic,
    SaMusic,
    Somp,
    SCoSaMP,
    RaOrmp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Music,
        Algorithm::SsMusic,
        Algorithm::IMusic,
        Algorithm::SaMusic,
        Algorithm::Somp,
        Algorithm::SCoSaMP,
        Algorithm::RaOrmp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Music => "music",
            Algorithm::SsMusic => "ss_music",
            Algorithm::IMusic => "imusic",
            Algorithm::SaMusic => "sa_music",
            Algorithm::Somp => "somp",
            Algorithm::SCoSaMP => "scosamp",
            Algorithm::RaOrmp => "ra_ormp",
        }
    }

    /// Runs the solver. With `noise_sigma` set, rank-aware methods estimate
    /// the signal subspace and threshold from the noise level.
    pub fn run(
        self,
        problem: &JsrProblem,
        settings: &SolverSettings,
        noise_sigma: Option<f64>,
    ) -> Result<SolveResult> {
        let cfg = &settings.ss;
        let Some(sigma) = noise_sigma else {
            return match self {
                Algorithm::SsMusic => solver::ss_music(problem, cfg),
                Algorithm::IMusic => baselines::imusic(problem, cfg),
                Algorithm::Somp => baselines::somp(problem),
                Algorithm::SCoSaMP => {
                    baselines::scosamp_with_epsilon(problem, cfg.t_max, cfg.epsilon)
                }
                Algorithm::Music => solver::music(problem, rank(problem, cfg)?),
                Algorithm::SaMusic => baselines::sa_music(problem, rank(problem, cfg)?),
                Algorithm::RaOrmp => baselines::ra_ormp(problem, rank(problem, cfg)?),
            };
        };
        match self {
            Algorithm::SsMusic => {
                noise::ss_music_noisy_with_factor(problem, cfg, Some(sigma), settings.noise_factor)
            }
            Algorithm::Somp => baselines::somp(problem),
            _ => {
                solver::check_solvable(problem)?;
                let (signal, noisy_cfg) =
                    noise::noisy_setup(problem, cfg, Some(sigma), settings.noise_factor)?;
                self.run_with_signal(problem, &noisy_cfg, &signal)
            }
        }
    }

    fn run_with_signal(
        self,
        problem: &JsrProblem,
        cfg: &SsMusicConfig,
        signal: &SignalSubspace,
    ) -> Result<SolveResult> {
        match self {
            Algorithm::SsMusic => solver::ss_music_with_signal(problem, cfg, signal),
            Algorithm::IMusic => baselines::imusic_with_signal(problem, cfg, signal),
            Algorithm::SaMusic => baselines::sa_music_with_signal(problem, signal),
            Algorithm::RaOrmp => baselines::ra_ormp_with_signal(problem, signal),
            Algorithm::Music => solver::music(problem, signal.rank),
            Algorithm::SCoSaMP => baselines::scosamp_with_epsilon(problem, cfg.t_max, cfg.epsilon),
            Algorithm::Somp => baselines::somp(problem),
        }
    }
}

fn rank(problem: &JsrProblem, cfg: &SsMusicConfig) -> Result<usize> {
    match cfg.rank_override {
        Some(r) => Ok(r.min(problem.k())),
        None => solver::signal_rank(problem),
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = JsrError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                JsrError::Config(format!(
                    "unknown algorithm `{s}` (known: {})",
                    known.join(", ")
                ))
            })
    }
}

impl Serialize for Algorithm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Resolves a list of names, failing on the first unknown one. Duplicates are
/// dropped, keeping first occurrences.
pub fn parse_algorithms<S: AsRef<str>>(names: &[S]) -> Result<Vec<Algorithm>> {
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let alg: Algorithm = name.as_ref().parse()?;
        if !out.contains(&alg) {
            out.push(alg);
        }
    }
    Ok(out)
}

/// Settings shared by every solver in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    pub ss: SsMusicConfig,
    /// Multiplier on the noise-floor energy used as the noisy threshold.
    pub noise_factor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            ss: SsMusicConfig::default(),
            noise_factor: DEFAULT_NOISE_EPSILON_FACTOR,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        self.ss.validate()?;
        if !(self.noise_factor.is_finite() && self.noise_factor > 0.0) {
            return Err(JsrError::Config(format!(
                "noise factor must be positive, got {}",
                self.noise_factor
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for alg in Algorithm::ALL {
            assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
        }
        assert!("SS-MUSIC".parse::<Algorithm>().is_err());
    }

    #[test]
    fn duplicates_collapse() {
        let algs = parse_algorithms(&["somp", "ss_music", "somp"]).unwrap();
        assert_eq!(algs, vec![Algorithm::Somp, Algorithm::SsMusic]);
    }
}
