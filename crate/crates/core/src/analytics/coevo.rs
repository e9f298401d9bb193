//! Fault-injection model of coupled validation failure.
//!
//! Each trial draws a model and a testbench. A flawed model's testbench
//! shares its flaw with probability `p_shared_hallucination`, in which case
//! the pair passes falsely. A correct model's testbench is independently
//! wrong with probability `p_indep_tb_flaw`. Every arbitration detects a
//! spec violation with probability `p_arbiter_detect`.
//!
//! Every trial owns a ChaCha substream keyed by its index and consumes a
//! fixed number of draws per round, so modes see common random numbers and
//! results do not depend on how trials are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::session::PolicyName;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoEvoParams {
    pub p_model_flaw: f64,
    pub p_shared_hallucination: f64,
    pub p_indep_tb_flaw: f64,
    pub p_arbiter_detect: f64,
    pub max_rounds: u32,
    pub trials: u64,
    pub seed: u64,
}

impl Default for CoEvoParams {
    fn default() -> Self {
        CoEvoParams {
            p_model_flaw: 0.5,
            p_shared_hallucination: 0.4,
            p_indep_tb_flaw: 0.2,
            p_arbiter_detect: 0.9,
            max_rounds: 1,
            trials: 100_000,
            seed: 42,
        }
    }
}

impl CoEvoParams {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        for (name, p) in [
            ("p_model_flaw", self.p_model_flaw),
            ("p_shared_hallucination", self.p_shared_hallucination),
            ("p_indep_tb_flaw", self.p_indep_tb_flaw),
            ("p_arbiter_detect", self.p_arbiter_detect),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(AnalyticsError::InvalidInput(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        if self.trials == 0 {
            return Err(AnalyticsError::InvalidInput("trials must be at least 1".into()));
        }
        if self.max_rounds == 0 {
            return Err(AnalyticsError::InvalidInput("max_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// False-positive rates after a single arbitration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormFp {
    pub fixed_tb: f64,
    pub refevo: f64,
}

pub fn closed_form_fp(p: &CoEvoParams) -> ClosedFormFp {
    let fixed_tb = p.p_model_flaw * p.p_shared_hallucination;
    ClosedFormFp {
        fixed_tb,
        refevo: fixed_tb * (1.0 - p.p_arbiter_detect),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRates {
    pub mode: PolicyName,
    pub false_positive_rate: f64,
    pub true_pass_rate: f64,
    pub func_fail_rate: f64,
    pub mean_rounds: f64,
    /// Binomial standard error of the false-positive rate, taken at the
    /// single-arbitration closed form for the iterating modes.
    pub fp_standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoEvoReport {
    pub params: CoEvoParams,
    pub modes: Vec<ModeRates>,
    pub closed_form_fp: ClosedFormFp,
    pub seed: u64,
}

impl CoEvoReport {
    pub fn mode(&self, mode: PolicyName) -> Option<&ModeRates> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TrialOutcome {
    FalsePositive,
    TruePass,
    FuncFail,
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    model_ok: bool,
    tb_ok: bool,
    /// The testbench encodes the model's flaw.
    coupled: bool,
}

impl Pair {
    fn passes(&self) -> bool {
        (self.model_ok && self.tb_ok) || (!self.model_ok && !self.tb_ok && self.coupled)
    }
}

/// Three uniforms per draw, always consumed.
fn draw_pair(p: &CoEvoParams, u: [f64; 3]) -> Pair {
    let model_ok = u[0] >= p.p_model_flaw;
    if model_ok {
        Pair {
            model_ok,
            tb_ok: u[2] >= p.p_indep_tb_flaw,
            coupled: false,
        }
    } else {
        let shared = u[1] < p.p_shared_hallucination;
        Pair {
            model_ok,
            tb_ok: !shared,
            coupled: shared,
        }
    }
}

fn redraw_model(p: &CoEvoParams, pair: Pair, u: [f64; 3]) -> Pair {
    let model_ok = u[0] >= p.p_model_flaw;
    Pair {
        model_ok,
        tb_ok: pair.tb_ok,
        coupled: !model_ok && !pair.tb_ok && u[1] < p.p_shared_hallucination,
    }
}

fn uniforms(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn run_trial(p: &CoEvoParams, mode: PolicyName, trial: u64) -> (TrialOutcome, u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(trial);
    let mut pair = draw_pair(p, uniforms(&mut rng));
    let iterating = matches!(mode, PolicyName::FixedTb | PolicyName::Refevo);
    let rounds = if iterating { p.max_rounds } else { 1 };
    for round in 1..=rounds {
        let detect: f64 = rng.random();
        let u = uniforms(&mut rng);
        let detected = detect < p.p_arbiter_detect;
        if pair.passes() {
            if mode == PolicyName::Refevo && pair.coupled && detected {
                pair = redraw_model(p, pair, u);
                continue;
            }
            let outcome = if pair.model_ok {
                TrialOutcome::TruePass
            } else {
                TrialOutcome::FalsePositive
            };
            return (outcome, round);
        }
        if !iterating || !detected {
            continue;
        }
        if !pair.model_ok {
            pair = redraw_model(p, pair, u);
        } else if mode == PolicyName::Refevo {
            pair = Pair {
                model_ok: true,
                tb_ok: u[2] >= p.p_indep_tb_flaw,
                coupled: false,
            };
        }
    }
    (TrialOutcome::FuncFail, rounds)
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    fp: u64,
    pass: u64,
    fail: u64,
    rounds: u64,
}

impl Counts {
    fn add(mut self, (o, r): (TrialOutcome, u32)) -> Counts {
        match o {
            TrialOutcome::FalsePositive => self.fp += 1,
            TrialOutcome::TruePass => self.pass += 1,
            TrialOutcome::FuncFail => self.fail += 1,
        }
        self.rounds += u64::from(r);
        self
    }

    fn merge(self, o: Counts) -> Counts {
        Counts {
            fp: self.fp + o.fp,
            pass: self.pass + o.pass,
            fail: self.fail + o.fail,
            rounds: self.rounds + o.rounds,
        }
    }
}

/// Empirical outcome rates of one mode.
pub fn simulate_coupled_validation(params: &CoEvoParams, mode: PolicyName) -> Result<ModeRates, AnalyticsError> {
    params.validate()?;
    let c = (0..params.trials)
        .into_par_iter()
        .map(|t| run_trial(params, mode, t))
        .fold(Counts::default, Counts::add)
        .reduce(Counts::default, Counts::merge);
    let n = params.trials as f64;
    let cf = closed_form_fp(params);
    let p_ref = if mode == PolicyName::Refevo { cf.refevo } else { cf.fixed_tb };
    Ok(ModeRates {
        mode,
        false_positive_rate: c.fp as f64 / n,
        true_pass_rate: c.pass as f64 / n,
        func_fail_rate: c.fail as f64 / n,
        mean_rounds: c.rounds as f64 / n,
        fp_standard_error: (p_ref * (1.0 - p_ref) / n).sqrt(),
    })
}

/// Rates for all four modes plus the closed forms.
pub fn coevo_report(params: &CoEvoParams) -> Result<CoEvoReport, AnalyticsError> {
    let modes = PolicyName::ALL
        .iter()
        .map(|m| simulate_coupled_validation(params, *m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CoEvoReport {
        params: *params,
        modes,
        closed_form_fp: closed_form_fp(params),
        seed: params.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let cf = closed_form_fp(&CoEvoParams::default());
        assert!((cf.fixed_tb - 0.20).abs() < 1e-12);
        assert!((cf.refevo - 0.02).abs() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = CoEvoParams {
            p_model_flaw: 1.5,
            ..CoEvoParams::default()
        };
        assert!(p.validate().is_err());
        let p = CoEvoParams {
            trials: 0,
            ..CoEvoParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn no_model_flaws_means_no_false_positives() {
        let p = CoEvoParams {
            p_model_flaw: 0.0,
            trials: 5000,
            max_rounds: 4,
            ..CoEvoParams::default()
        };
        for m in PolicyName::ALL {
            let r = simulate_coupled_validation(&p, m).unwrap();
            assert_eq!(r.false_positive_rate, 0.0);
            assert!(r.true_pass_rate >= 1.0 - p.p_indep_tb_flaw - 0.03);
        }
    }

    #[test]
    fn rates_partition_trials() {
        let p = CoEvoParams {
            trials: 3000,
            max_rounds: 3,
            ..CoEvoParams::default()
        };
        for m in PolicyName::ALL {
            let r = simulate_coupled_validation(&p, m).unwrap();
            let sum = r.false_positive_rate + r.true_pass_rate + r.func_fail_rate;
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}
