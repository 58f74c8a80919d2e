#![allow(dead_code)]

pub mod props;

use std::f64::consts::PI;
use std::path::PathBuf;

use neuromech::experiment::{BlockData, Design, ExperimentId, Session};
use neuromech::metrics::TrialRecord;
use neuromech::synth::{gen_trace, Component, SynthSpec};
use neuromech::timeseries::Muscle;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    got == want || (got - want).abs() <= tol * want.abs().max(got.abs())
}

/// Two-tailed Student-t tail probability for integer degrees of freedom
/// from the finite trigonometric series for `A(t | nu)`, with
/// `theta = atan(t / sqrt(nu))`:
///
/// odd nu:  `A = (2/pi) (theta + sin(theta) (c + (2/3) c^3 + ... ))`
/// even nu: `A = sin(theta) (1 + (1/2) c^2 + (1*3)/(2*4) c^4 + ...)`
///
/// where `c = cos(theta)` and the series stop at power `nu - 2`.
pub fn t_tail_closed_form(t: f64, nu: usize) -> f64 {
    let theta = (t.abs() / (nu as f64).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let a = if nu % 2 == 1 {
        let mut sum = 0.0;
        if nu > 1 {
            let mut term = c;
            sum = term;
            let mut k = 3;
            while k < nu {
                term *= (k - 1) as f64 / k as f64 * c * c;
                sum += term;
                k += 2;
            }
        }
        2.0 / PI * (theta + s * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 2;
        while k < nu {
            term *= (k - 1) as f64 / k as f64 * c * c;
            sum += term;
            k += 2;
        }
        s * sum
    };
    // 1 - A loses digits for tiny tails; those are far below the tolerance.
    (1.0 - a).clamp(0.0, 1.0)
}

/// Reach or timed session built in memory: sine background, one triangular
/// burst per trial or window, optional noise. Every `perfect_every`-th trial
/// is a perfect reach.
pub fn memory_session(
    design: &Design,
    condition: &str,
    seed: u64,
    rate: f64,
    trial_s: f64,
    perfect_every: Option<u32>,
) -> Session {
    let layout = design.condition(condition).expect("known condition");
    let timed = design.is_timed();
    let per_block = design.trials_per_block.unwrap_or(18);
    let period = if timed { 10.0 } else { trial_s };
    let duration = if timed { 181.0 } else { per_block as f64 * period + 1.0 };
    let blocks = layout
        .blocks
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let channel = |m: u64, muscle: Muscle| {
                let mut components = vec![Component::Sine { freq_hz: 3.0 + m as f64 * 2.0, amp: 0.05, phase: 0.3 * m as f64 }];
                for k in 0..per_block {
                    components.push(Component::Burst {
                        t_center: (k as f64 + 0.5) * period,
                        width: period / 2.0,
                        apex: 0.3 + 0.1 * ((k + i + m as usize) % 7) as f64,
                    });
                }
                components.push(Component::Noise { sigma: 0.01 });
                let spec = SynthSpec {
                    seed,
                    stream: 2 * i as u64 + m,
                    components,
                    rate,
                    duration,
                };
                gen_trace(&spec).unwrap().with_muscle(muscle)
            };
            let trials = (!timed).then(|| {
                (1..=per_block as u32)
                    .map(|k| TrialRecord {
                        block_id: (i + 1).to_string(),
                        trial_index: k,
                        d_req: 1.0 + 0.1 * k as f64,
                        d_moved: if perfect_every.is_some_and(|n| k % n == 0) { 1.0 + 0.1 * k as f64 } else { 0.5 + 0.05 * k as f64 },
                        window: Some(((k - 1) as f64 * period, k as f64 * period)),
                    })
                    .collect()
            });
            BlockData {
                label: label.clone(),
                tb: channel(0, Muscle::Tb),
                fcr: channel(1, Muscle::Fcr),
                trials,
            }
        })
        .collect();
    Session {
        participant_id: format!("p{seed}"),
        experiment: design.experiment,
        condition: layout.name.clone(),
        blocks,
    }
}

pub fn all_conditions() -> Vec<(Design, String)> {
    [ExperimentId::E1, ExperimentId::E2, ExperimentId::E3]
        .into_iter()
        .flat_map(|e| {
            let d = Design::for_experiment(e);
            d.conditions.iter().map(|c| (d.clone(), c.name.clone())).collect::<Vec<_>>()
        })
        .collect()
}
