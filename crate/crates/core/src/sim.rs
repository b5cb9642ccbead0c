//! Monte Carlo simulation of two-arm trials analysed with a one-sided
//! log-rank (Cox score) test.
//!
//! Every participant owns a fixed block of four 64-bit words in a ChaCha8
//! keystream keyed by the replicate seed, so participant `i` can be
//! regenerated on its own by seeking to word `8 * i`. Generation within a
//! replicate reads the stream sequentially, which yields the same values.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{DesignSpec, IncidenceScenario};
use crate::error::{Error, Result};
use crate::stats::normal_quantile;

const WORDS_PER_PARTICIPANT: u128 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Participant {
    /// 1 or 2.
    pub arm: u8,
    pub entry_time: f64,
    pub time_at_risk: f64,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialDataset {
    pub participants: Vec<Participant>,
    pub seed: u64,
    pub spec_snapshot: DesignSpec,
}

impl TrialDataset {
    pub fn events_in_arm(&self, arm: u8) -> usize {
        self.participants
            .iter()
            .filter(|p| p.arm == arm && p.event)
            .count()
    }

    /// Writes `arm,entry_time,time_at_risk,event` rows (years; event as 0/1).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "arm,entry_time,time_at_risk,event")?;
        for p in &self.participants {
            writeln!(
                out,
                "{},{},{},{}",
                p.arm,
                p.entry_time,
                p.time_at_risk,
                u8::from(p.event)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub rejection_rate: f64,
    pub mc_replicates: usize,
    pub mc_halfwidth_95: f64,
    /// Replicates with no events, counted as non-rejections.
    pub no_event_replicates: usize,
}

impl PowerEstimate {
    fn from_outcomes(outcomes: &[ReplicateOutcome]) -> Self {
        let reps = outcomes.len();
        let rejections = outcomes.iter().filter(|o| o.reject).count();
        let p = rejections as f64 / reps as f64;
        PowerEstimate {
            rejection_rate: p,
            mc_replicates: reps,
            mc_halfwidth_95: 1.96 * (p * (1.0 - p) / reps as f64).sqrt(),
            no_event_replicates: outcomes.iter().filter(|o| o.no_events).count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplicateOutcome {
    pub reject: bool,
    pub no_events: bool,
}

/// Seed for replicate `r`, derived from the run seed with the SplitMix64
/// finalizer so that neighbouring replicates get unrelated keystreams.
pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    let mut z = seed ^ replicate.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform on the open interval (0, 1).
fn open_unit(word: u64) -> f64 {
    ((word >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[derive(Clone, Copy)]
struct ArmDraw {
    hazard: f64,
    /// exp(-hazard * followup), the survival past the admin censor.
    survive_window: f64,
}

struct Generator {
    followup: f64,
    accrual: f64,
    dropout_hazard: f64,
    /// exp(-dropout_hazard * followup)
    stay_window: f64,
    arms: [ArmDraw; 2],
    arm1_share: u64,
    block: u64,
}

impl Generator {
    fn new(spec: &DesignSpec, scen: &IncidenceScenario) -> Result<Self> {
        spec.validate()?;
        for (name, v) in [
            ("annual_incidence_arm1", scen.annual_incidence_arm1),
            ("annual_incidence_arm2", scen.annual_incidence_arm2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        let t = spec.followup_years;
        let mu = spec.dropout_hazard();
        let arm = |hazard: f64| ArmDraw {
            hazard,
            survive_window: (-hazard * t).exp(),
        };
        Ok(Generator {
            followup: t,
            accrual: spec.accrual_years,
            dropout_hazard: mu,
            stay_window: (-mu * t).exp(),
            arms: [arm(scen.annual_incidence_arm1), arm(scen.annual_incidence_arm2)],
            arm1_share: spec.allocation.arm1 as u64,
            block: spec.allocation.block() as u64,
        })
    }

    fn arm_of(&self, index: u64) -> u8 {
        if index % self.block < self.arm1_share {
            1
        } else {
            2
        }
    }

    /// Turns one participant's four keystream words into an observation.
    fn participant(&self, index: u64, words: [u64; 4]) -> Participant {
        let arm = self.arm_of(index);
        let draw = self.arms[(arm - 1) as usize];
        let entry_time = self.accrual * open_unit(words[0]);

        // Dropout before the admin censor iff -ln(u)/mu < T, i.e. u > exp(-mu T).
        let u_drop = open_unit(words[2]);
        let censor = if self.dropout_hazard > 0.0 && u_drop > self.stay_window {
            -u_drop.ln() / self.dropout_hazard
        } else {
            self.followup
        };

        let u_inf = open_unit(words[1]);
        let mut time_at_risk = censor;
        let mut event = false;
        if draw.hazard > 0.0 {
            let threshold = if censor == self.followup {
                draw.survive_window
            } else {
                (-draw.hazard * censor).exp()
            };
            if u_inf > threshold {
                let infection = -u_inf.ln() / draw.hazard;
                if infection < censor {
                    time_at_risk = infection;
                    event = true;
                }
            }
        }
        Participant {
            arm,
            entry_time,
            time_at_risk,
            event,
        }
    }

    fn fill(&self, n_total: usize, seed: u64, out: &mut Vec<Participant>) {
        out.clear();
        out.reserve(n_total);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..n_total as u64 {
            let words = [rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()];
            out.push(self.participant(i, words));
        }
    }
}

/// Keystream words owned by participant `index` under `seed`, obtained by
/// seeking rather than by generating the preceding participants.
pub fn participant_words(seed: u64, index: u64) -> [u64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(index as u128 * WORDS_PER_PARTICIPANT);
    [rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()]
}

/// Simulates one trial. Arms follow the allocation pattern in fixed blocks,
/// entry is uniform over the accrual window, infection and dropout are
/// exponential, and everyone is censored `followup_years` after entry.
pub fn simulate_trial(
    spec: &DesignSpec,
    scen: &IncidenceScenario,
    n_total: usize,
    seed: u64,
) -> Result<TrialDataset> {
    if n_total < 2 {
        return Err(Error::InvalidSize(n_total));
    }
    let generator = Generator::new(spec, scen)?;
    let mut participants = Vec::new();
    generator.fill(n_total, seed, &mut participants);
    Ok(TrialDataset {
        participants,
        seed,
        spec_snapshot: *spec,
    })
}

/// Regenerates a single participant of the trial simulated with `seed`.
pub fn simulate_participant(
    spec: &DesignSpec,
    scen: &IncidenceScenario,
    seed: u64,
    index: u64,
) -> Result<Participant> {
    let generator = Generator::new(spec, scen)?;
    Ok(generator.participant(index, participant_words(seed, index)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRankResult {
    /// (O1 - E1) / sqrt(V); negative values favour arm 1.
    pub z_statistic: f64,
    pub reject: bool,
    /// One-step score estimate hr_null * exp((O1 - E1) / V).
    pub hazard_ratio_estimate: f64,
    pub null_hazard_ratio: f64,
    pub observed_arm1: f64,
    pub expected_arm1: f64,
    pub variance: f64,
    pub events: usize,
}

/// One-sided log-rank test of H0: hazard ratio (arm 1 / arm 2) >= the
/// design's null value, rejecting for small arm-1 hazard.
pub fn logrank_test(data: &TrialDataset, one_sided_alpha: f64) -> Result<LogRankResult> {
    if !(one_sided_alpha > 0.0 && one_sided_alpha < 1.0) {
        return Err(Error::invalid(
            "one_sided_alpha",
            format!("must be in (0, 1), got {one_sided_alpha}"),
        ));
    }
    let hr_null = data.spec_snapshot.hypotheses.hr_null();
    let crit = normal_quantile(1.0 - one_sided_alpha);
    logrank_scored(&data.participants, hr_null, crit, &mut Scratch::default())
}

/// Log-rank test against an explicit null hazard ratio.
pub fn logrank_with_null(
    participants: &[Participant],
    hr_null: f64,
    one_sided_alpha: f64,
) -> Result<LogRankResult> {
    if !(hr_null > 0.0 && hr_null.is_finite()) {
        return Err(Error::invalid("hr_null", format!("must be positive, got {hr_null}")));
    }
    let crit = normal_quantile(1.0 - one_sided_alpha);
    logrank_scored(participants, hr_null, crit, &mut Scratch::default())
}

#[derive(Default)]
struct Scratch {
    events: Vec<(f64, u8)>,
    times: Vec<f64>,
    deaths: Vec<[u32; 2]>,
    exits: Vec<[u32; 2]>,
}

/// Score test of the Cox model at a fixed log hazard ratio. For a null
/// ratio of one this is the usual log-rank test with the hypergeometric
/// variance; otherwise Breslow's handling of ties is used.
fn logrank_scored(
    participants: &[Participant],
    hr_null: f64,
    crit: f64,
    s: &mut Scratch,
) -> Result<LogRankResult> {
    s.events.clear();
    s.events.extend(
        participants
            .iter()
            .filter(|p| p.event)
            .map(|p| (p.time_at_risk, p.arm)),
    );
    if s.events.is_empty() {
        return Err(Error::NoEvents);
    }
    // Stable sort keeps participant order among equal times.
    s.events.sort_by(|a, b| a.0.total_cmp(&b.0));

    s.times.clear();
    s.deaths.clear();
    for &(t, arm) in &s.events {
        if s.times.last() != Some(&t) {
            s.times.push(t);
            s.deaths.push([0, 0]);
        }
        s.deaths.last_mut().unwrap()[(arm - 1) as usize] += 1;
    }
    let k = s.times.len();
    let last = s.times[k - 1];

    // exits[j] counts participants whose last at-risk event time index is j - 1,
    // i.e. who are at risk at the first j distinct event times.
    s.exits.clear();
    s.exits.resize(k + 1, [0, 0]);
    for p in participants {
        let j = if p.time_at_risk >= last {
            k
        } else {
            s.times.partition_point(|&t| t <= p.time_at_risk)
        };
        s.exits[j][(p.arm - 1) as usize] += 1;
    }

    let mut at_risk = [0f64; 2];
    let mut observed = 0.0;
    let mut expected = 0.0;
    let mut variance = 0.0;
    for j in (0..k).rev() {
        at_risk[0] += s.exits[j + 1][0] as f64;
        at_risk[1] += s.exits[j + 1][1] as f64;
        let d1 = s.deaths[j][0] as f64;
        let d = d1 + s.deaths[j][1] as f64;
        let weighted = hr_null * at_risk[0];
        let total = weighted + at_risk[1];
        let share = weighted / total;
        observed += d1;
        expected += d * share;
        let mut v = d * share * (1.0 - share);
        if hr_null == 1.0 && d > 1.0 {
            let n = at_risk[0] + at_risk[1];
            v *= (n - d) / (n - 1.0);
        }
        variance += v;
    }

    let events = s.events.len();
    if variance <= 0.0 {
        return Ok(LogRankResult {
            z_statistic: 0.0,
            reject: false,
            hazard_ratio_estimate: f64::NAN,
            null_hazard_ratio: hr_null,
            observed_arm1: observed,
            expected_arm1: expected,
            variance,
            events,
        });
    }
    let score = observed - expected;
    let z = score / variance.sqrt();
    Ok(LogRankResult {
        z_statistic: z,
        reject: z < -crit,
        hazard_ratio_estimate: hr_null * (score / variance).exp(),
        null_hazard_ratio: hr_null,
        observed_arm1: observed,
        expected_arm1: expected,
        variance,
        events,
    })
}

/// Outcome of every replicate, in replicate order. Replicate `r` is
/// simulated with [`replicate_seed`]`(seed, r)`, so extending `n_reps`
/// leaves earlier outcomes unchanged.
pub fn replicate_outcomes(
    spec: &DesignSpec,
    scen: &IncidenceScenario,
    n_total: usize,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<ReplicateOutcome>> {
    if n_total < 2 {
        return Err(Error::InvalidSize(n_total));
    }
    let generator = Generator::new(spec, scen)?;
    let hr_null = spec.hypotheses.hr_null();
    let crit = normal_quantile(1.0 - spec.hypotheses.one_sided_alpha);
    (0..n_reps as u64)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(n_total), Scratch::default()),
            |(buf, scratch), r| {
                generator.fill(n_total, replicate_seed(seed, r), buf);
                match logrank_scored(buf, hr_null, crit, scratch) {
                    Ok(res) => Ok(ReplicateOutcome {
                        reject: res.reject,
                        no_events: false,
                    }),
                    Err(Error::NoEvents) => Ok(ReplicateOutcome {
                        reject: false,
                        no_events: true,
                    }),
                    Err(e) => Err(e),
                }
            },
        )
        .collect()
}

/// Monte Carlo power of the one-sided log-rank test at `n_total`.
pub fn estimate_power(
    spec: &DesignSpec,
    scen: &IncidenceScenario,
    n_total: usize,
    n_reps: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    if n_reps < 100 {
        return Err(Error::invalid(
            "n_reps",
            format!("need at least 100 replicates, got {n_reps}"),
        ));
    }
    let outcomes = replicate_outcomes(spec, scen, n_total, n_reps, seed)?;
    Ok(PowerEstimate::from_outcomes(&outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignKind, HypothesisPair};

    fn layer() -> DesignSpec {
        DesignSpec::new(DesignKind::Layer, HypothesisPair::new(0.0, 0.5))
    }

    fn p(arm: u8, t: f64, event: bool) -> Participant {
        Participant {
            arm,
            entry_time: 0.0,
            time_at_risk: t,
            event,
        }
    }

    #[test]
    fn single_event_by_hand() {
        // One event in arm 2 at t=0.5 with both participants at risk:
        // O1 = 0, E1 = 1/2, V = 1/4, Z = -1.
        let data = [p(1, 2.0, false), p(2, 0.5, true)];
        let res = logrank_with_null(&data, 1.0, 0.025).unwrap();
        assert_eq!(res.expected_arm1, 0.5);
        assert_eq!(res.variance, 0.25);
        assert_eq!(res.z_statistic, -1.0);
        assert!(!res.reject);
    }

    #[test]
    fn tied_events_use_hypergeometric_variance() {
        // Two tied events (one per arm) among four at risk:
        // E1 = 2 * 2/4 = 1, V = 2 * 1/4 * (4 - 2)/(4 - 1) = 1/3.
        let data = [p(1, 1.0, true), p(2, 1.0, true), p(1, 2.0, false), p(2, 2.0, false)];
        let res = logrank_with_null(&data, 1.0, 0.025).unwrap();
        assert_eq!(res.expected_arm1, 1.0);
        assert!((res.variance - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(res.z_statistic, 0.0);
    }

    #[test]
    fn shifted_null_weights_arm1() {
        // hr_null = 0.5, one event in arm 1 with one at risk per arm:
        // share = 0.5 / 1.5, E1 = 1/3, V = 2/9.
        let data = [p(1, 1.0, true), p(2, 2.0, false)];
        let res = logrank_with_null(&data, 0.5, 0.025).unwrap();
        assert!((res.expected_arm1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((res.variance - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn censored_before_event_leaves_risk_set() {
        // Arm 1 participant drops out before the event and is not at risk.
        let data = [p(1, 0.2, false), p(2, 0.5, true), p(1, 1.0, false)];
        let res = logrank_with_null(&data, 1.0, 0.025).unwrap();
        assert_eq!(res.expected_arm1, 0.5);
    }

    #[test]
    fn no_events_is_flagged() {
        let data = [p(1, 2.0, false), p(2, 2.0, false)];
        assert!(matches!(logrank_with_null(&data, 1.0, 0.025), Err(Error::NoEvents)));
    }

    #[test]
    fn too_small_trial() {
        let scen = IncidenceScenario::new(0.01, 0.02);
        assert!(matches!(simulate_trial(&layer(), &scen, 1, 0), Err(Error::InvalidSize(1))));
    }

    #[test]
    fn seeking_matches_sequential_generation() {
        let mut spec = layer();
        spec.accrual_years = 1.5;
        let scen = IncidenceScenario::new(0.2, 0.4);
        let data = simulate_trial(&spec, &scen, 300, 99).unwrap();
        for i in [0u64, 1, 2, 17, 150, 299] {
            let alone = simulate_participant(&spec, &scen, 99, i).unwrap();
            assert_eq!(alone, data.participants[i as usize]);
        }
    }

    #[test]
    fn dataset_invariants() {
        let mut spec = layer();
        spec.accrual_years = 1.0;
        let scen = IncidenceScenario::new(0.3, 0.6);
        let data = simulate_trial(&spec, &scen, 5000, 3).unwrap();
        assert_eq!(data.participants.iter().filter(|p| p.arm == 1).count(), 2500);
        for p in &data.participants {
            assert!(p.time_at_risk > 0.0 && p.time_at_risk <= 2.0);
            assert!((0.0..=1.0).contains(&p.entry_time));
        }
        assert!(data.events_in_arm(1) < data.events_in_arm(2));
    }

    #[test]
    fn zero_incidence_arm_has_no_events() {
        let scen = IncidenceScenario::new(0.0, 0.05);
        let data = simulate_trial(&layer(), &scen, 2000, 11).unwrap();
        assert_eq!(data.events_in_arm(1), 0);
        assert!(data.events_in_arm(2) > 0);
    }

    #[test]
    fn exchangeable_arms() {
        let scen = IncidenceScenario::new(0.03, 0.03);
        for seed in 0..5 {
            let data = simulate_trial(&layer(), &scen, 1000, seed).unwrap();
            let (a, b) = (data.events_in_arm(1) as f64, data.events_in_arm(2) as f64);
            // Difference of two Poisson-ish counts: sd ~ sqrt(a + b).
            assert!((a - b).abs() < 4.0 * (a + b).max(1.0).sqrt());
        }
    }

    #[test]
    fn csv_dump() {
        let scen = IncidenceScenario::new(0.03, 0.03);
        let data = simulate_trial(&layer(), &scen, 4, 5).unwrap();
        let mut out = Vec::new();
        data.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("arm,entry_time,time_at_risk,event"));
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn power_needs_enough_replicates() {
        let scen = IncidenceScenario::new(0.015, 0.03);
        assert!(estimate_power(&layer(), &scen, 100, 50, 1).is_err());
    }

    #[test]
    fn replicate_prefix_is_stable() {
        let scen = IncidenceScenario::new(0.05, 0.1);
        let short = replicate_outcomes(&layer(), &scen, 200, 50, 8).unwrap();
        let long = replicate_outcomes(&layer(), &scen, 200, 100, 8).unwrap();
        assert_eq!(short[..], long[..50]);
    }
}
