//! Generative checks of the documented invariants. Each entry runs a
//! seeded proptest runner for the requested number of cases.

use std::path::Path;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRng, TestRunner};

use neuromech::cli::{cmd_analyze, AnalyzeArgs, PipelineArgs, SessionArgs, StatsArgs, DesignArg, PairingArg};
use neuromech::experiment::aggregate::{read_correlations, read_histogram_csv, read_ttests};
use neuromech::experiment::{load_session, run_pipeline, validate_design, Design, PipelineConfig};
use neuromech::looptrace::{
    axis_skews, hysteresis_index, quadrant_fractions, read_loop_table, read_points_csv, LoopTrace, QuadrantFractions,
};
use neuromech::metrics::io::read_metrics_csv;
use neuromech::metrics::{mpo, spikiness, switching_degree, ump, ump_histogram, SwitchEvent, TrialRecord};
use neuromech::stats::{bonferroni_adjust, classify_p, paired_t_test, pearson_r, Significance};
use neuromech::synth::{gen_session, random_plan, SynthOptions};
use neuromech::timeseries::{
    detect_peaks, lowpass_iir, rectify, running_avg_downsample, segment, EmgTrace, FilterSpec, Muscle, Segment,
    WindowSpec,
};

use super::{all_conditions, memory_session, rel_close};

pub type Property = fn(u32) -> Result<(), String>;

/// Every invariant, by name.
pub const ALL: &[(&str, Property)] = &[
    ("lowpass linearity", lowpass_linearity),
    ("rectify non-negative and idempotent", rectify_idempotent),
    ("fixed windows disjoint prefix cover", fixed_windows_cover_prefix),
    ("running average keeps constants and bounds", downsample_constants_and_bounds),
    ("peak set max equals plain max", peak_max_is_plain_max),
    ("mpo target symmetry", mpo_target_symmetry),
    ("ump monotonicity", ump_monotonicity),
    ("spikiness scale invariance", spikiness_scale_invariance),
    ("switching degree antisymmetry", switching_antisymmetry),
    ("histogram proportions sum to one", histogram_proportions_sum),
    ("quadrant sum to one and scale invariance", quadrant_sum_and_scale),
    ("skew affine invariance", skew_affine_invariance),
    ("hysteresis index is a metric", hysteresis_metric),
    ("channel swap symmetry", channel_swap_symmetry),
    ("t-test argument swap", ttest_swap),
    ("t-test common shift", ttest_shift),
    ("bonferroni monotone and capped", bonferroni_monotone),
    ("pearson affine invariance", pearson_affine),
    ("significance classes ordered", significance_ordered),
    ("pipeline determinism under parallel schedules", pipeline_determinism),
    ("metrics row counts", row_counts),
    ("distance scaling leaves mpo and ump unchanged", distance_scaling),
    ("block file order does not matter", block_file_order),
    ("synthetic fixtures validate", fixtures_validate),
    ("noise-free fixtures match the oracle", fixtures_match_oracle),
    ("analyze output is byte-deterministic", analyze_byte_determinism),
    ("output tables round-trip through readers", outputs_round_trip),
];

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    let mut runner = TestRunner::new_with_rng(config, rng);
    runner.run(&strategy, test).map_err(|e| match e {
        TestError::Fail(why, value) => format!("{why} for {value:?}"),
        TestError::Abort(why) => format!("aborted: {why}"),
    })
}

fn trace(samples: Vec<f64>, rate: f64) -> EmgTrace {
    EmgTrace::new(samples, rate, Muscle::Tb, 0.0).unwrap()
}

fn signal(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

pub fn lowpass_linearity(cases: u32) -> Result<(), String> {
    let strat = (signal(40..400), -3.0f64..3.0, -3.0f64..3.0, 1usize..5, 5.0f64..200.0);
    run(cases, strat, |(x, a, b, order, cutoff)| {
        let y: Vec<f64> = x.iter().rev().map(|v| v * 0.7 + 0.1).collect();
        let spec = FilterSpec::lowpass(cutoff, order);
        let fx = lowpass_iir(&trace(x.clone(), 1000.0), &spec).unwrap().samples;
        let fy = lowpass_iir(&trace(y.clone(), 1000.0), &spec).unwrap().samples;
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let fm = lowpass_iir(&trace(mix, 1000.0), &spec).unwrap().samples;
        let scale = a.abs() * sup(&fx) + b.abs() * sup(&fy) + 1e-300;
        for i in 0..fm.len() {
            prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-9 * scale);
        }
        Ok(())
    })
}

pub fn rectify_idempotent(cases: u32) -> Result<(), String> {
    run(cases, signal(1..300), |x| {
        let r = rectify(&trace(x, 100.0));
        prop_assert!(r.samples.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(rectify(&r).samples, r.samples);
        Ok(())
    })
}

pub fn fixed_windows_cover_prefix(cases: u32) -> Result<(), String> {
    run(cases, (1usize..2000, 1.0f64..1000.0, 0.001f64..5.0), |(n, rate, d)| {
        let t = trace(vec![0.0; n], rate);
        let segs = match segment(&t, &WindowSpec::FixedDuration(d)) {
            Ok(s) => s,
            Err(_) => {
                prop_assert!(d * rate < 1.0);
                return Ok(());
            }
        };
        let mut next = 0;
        for s in &segs {
            prop_assert_eq!(s.start, next);
            prop_assert!(s.end > s.start && s.end <= n);
            next = s.end;
        }
        Ok(())
    })
}

pub fn downsample_constants_and_bounds(cases: u32) -> Result<(), String> {
    let strat = (signal(60..600), -4.0f64..4.0, 1usize..50, 1.0f64..1000.0);
    run(cases, strat, |(x, c, w, target)| {
        let d = running_avg_downsample(&trace(vec![c; x.len()], 1000.0), w, target).unwrap();
        prop_assert!(d.samples.iter().all(|&v| (v - c).abs() <= 1e-12 * c.abs().max(1.0)));
        let (lo, hi) = x.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        let d = running_avg_downsample(&trace(x, 1000.0), w, target).unwrap();
        prop_assert!(d.samples.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        Ok(())
    })
}

pub fn peak_max_is_plain_max(cases: u32) -> Result<(), String> {
    run(cases, (signal(2..300), any::<prop::sample::Index>(), any::<prop::sample::Index>()), |(x, i, j)| {
        let t = trace(x.clone(), 100.0);
        let (a, b) = (i.index(x.len()), j.index(x.len()));
        let (start, end) = (a.min(b), a.max(b) + 1);
        let p = detect_peaks(&Segment { trace: &t, start, end }, f64::NEG_INFINITY).unwrap();
        let plain = x[start..end].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(p.max_amplitude, plain);
        Ok(())
    })
}

fn record(d_req: f64, d_moved: f64) -> TrialRecord {
    TrialRecord {
        block_id: "1".into(),
        trial_index: 1,
        d_req,
        d_moved,
        window: None,
    }
}

pub fn mpo_target_symmetry(cases: u32) -> Result<(), String> {
    run(cases, (0.01f64..100.0, 0.0f64..2.0), |(d_req, frac)| {
        let d_moved = d_req * frac;
        let a = mpo(&record(d_req, d_moved)).unwrap();
        let b = mpo(&record(d_req, 2.0 * d_req - d_moved)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        Ok(())
    })
}

pub fn ump_monotonicity(cases: u32) -> Result<(), String> {
    run(cases, (0.0f64..50.0, 0.001f64..5.0, 1.0001f64..10.0), |(rp, m, k)| {
        let base = ump(rp, m).unwrap().value.unwrap();
        prop_assert!(ump(rp * k + 1e-6, m).unwrap().value.unwrap() > base);
        if rp > 0.0 {
            prop_assert!(ump(rp, m * k).unwrap().value.unwrap() < base);
        }
        Ok(())
    })
}

pub fn spikiness_scale_invariance(cases: u32) -> Result<(), String> {
    run(cases, (prop::collection::vec(0.0f64..10.0, 1..200), 1e-3f64..1e3), |(x, c)| {
        let x: Vec<f64> = x.into_iter().map(|v| v + 1e-3).collect();
        let z = spikiness(&x).unwrap();
        prop_assert!(z >= 0.0);
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        prop_assert!(rel_close(spikiness(&scaled).unwrap(), z, 1e-12) || z < 1e-12);
        Ok(())
    })
}

pub fn switching_antisymmetry(cases: u32) -> Result<(), String> {
    run(cases, (-100.0f64..100.0, -100.0f64..100.0, 1e-3f64..100.0), |(a, b, t)| {
        let f = switching_degree(&SwitchEvent { d_begin: a, d_end: b, duration_t: t }).unwrap();
        let g = switching_degree(&SwitchEvent { d_begin: b, d_end: a, duration_t: t }).unwrap();
        prop_assert_eq!(f, -g);
        Ok(())
    })
}

pub fn histogram_proportions_sum(cases: u32) -> Result<(), String> {
    let edges = neuromech::metrics::default_class_edges();
    run(cases, prop::collection::vec(-2.0f64..20.0, 1..300), move |v| {
        let h = ump_histogram(&v, &edges).unwrap();
        let s: f64 = h.proportions().iter().sum::<f64>() + h.underflow_proportion() + h.overflow_proportion();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        Ok(())
    })
}

fn loop_points() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..200).prop_flat_map(|n| (prop::collection::vec(-3.0f64..3.0, n), prop::collection::vec(-3.0f64..3.0, n)))
}

fn lt(x: Vec<f64>, y: Vec<f64>) -> LoopTrace {
    LoopTrace {
        x,
        y,
        rate: 30.0,
        block_id: "b".into(),
    }
}

pub fn quadrant_sum_and_scale(cases: u32) -> Result<(), String> {
    run(cases, (loop_points(), 1e-3f64..1e3, 1e-3f64..1e3), |((x, y), a, b)| {
        let q = quadrant_fractions(&lt(x.clone(), y.clone())).unwrap().fractions;
        prop_assert!((q.sum() - 1.0).abs() <= 1e-12);
        let s = quadrant_fractions(&lt(x.iter().map(|v| v * a).collect(), y.iter().map(|v| v * b).collect()))
            .unwrap()
            .fractions;
        prop_assert_eq!(q, s);
        Ok(())
    })
}

pub fn skew_affine_invariance(cases: u32) -> Result<(), String> {
    run(cases, (loop_points(), 0.05f64..20.0, 0.05f64..20.0, -5.0f64..5.0, -5.0f64..5.0), |((x, y), a, a2, b, c)| {
        let Ok(base) = axis_skews(&lt(x.clone(), y.clone())) else { return Ok(()) };
        let close = |p: f64, q: f64| (p - q).abs() <= 1e-6 * (1.0 + q.abs());
        // independent per-channel transforms keep h_s and v_s
        let t = axis_skews(&lt(x.iter().map(|v| a * v + b).collect(), y.iter().map(|v| a2 * v + c).collect())).unwrap();
        prop_assert!(close(t.h_s, base.h_s) && close(t.v_s, base.v_s), "{t:?} vs {base:?}");
        // a common scale with separate shifts keeps all three
        let t = axis_skews(&lt(x.iter().map(|v| a * v + b).collect(), y.iter().map(|v| a * v + c).collect())).unwrap();
        prop_assert!(close(t.d_s_skew, base.d_s_skew), "{t:?} vs {base:?}");
        Ok(())
    })
}

fn fractions() -> impl Strategy<Value = QuadrantFractions> {
    prop::array::uniform4(0.0f64..1.0).prop_map(|w| {
        let s: f64 = w.iter().sum::<f64>() + 1e-9;
        QuadrantFractions {
            np: w[0] / s,
            pp: w[1] / s,
            pn: w[2] / s,
            nn: w[3] / s,
        }
    })
}

pub fn hysteresis_metric(cases: u32) -> Result<(), String> {
    run(cases, (fractions(), fractions(), fractions()), |(p, q, r)| {
        let pq = hysteresis_index(&p, &q);
        prop_assert_eq!(pq, hysteresis_index(&q, &p));
        prop_assert_eq!(hysteresis_index(&p, &p), 0.0);
        prop_assert!(pq > 0.0 || p == q);
        prop_assert!(pq <= hysteresis_index(&p, &r) + hysteresis_index(&r, &q) + 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&pq));
        Ok(())
    })
}

pub fn channel_swap_symmetry(cases: u32) -> Result<(), String> {
    run(cases, loop_points(), |(x, y)| {
        let a = lt(x, y);
        let b = a.swapped();
        let (qa, qb) = (quadrant_fractions(&a).unwrap().fractions, quadrant_fractions(&b).unwrap().fractions);
        prop_assert_eq!((qa.np, qa.pn, qa.pp, qa.nn), (qb.pn, qb.np, qb.pp, qb.nn));
        if let (Ok(sa), Ok(sb)) = (axis_skews(&a), axis_skews(&b)) {
            prop_assert_eq!((sa.h_s, sa.v_s), (sb.v_s, sb.h_s));
            prop_assert!((sa.d_s_skew - sb.d_s_skew).abs() <= 1e-12 * (1.0 + sa.d_s_skew));
        }
        Ok(())
    })
}

fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..30).prop_flat_map(|n| (prop::collection::vec(-10.0f64..10.0, n), prop::collection::vec(-10.0f64..10.0, n)))
}

pub fn ttest_swap(cases: u32) -> Result<(), String> {
    run(cases, paired(), |(a, b)| {
        let f = paired_t_test(&a, &b).unwrap();
        let g = paired_t_test(&b, &a).unwrap();
        prop_assert_eq!(f.t_stat, -g.t_stat);
        prop_assert!((f.p_value - g.p_value).abs() <= 1e-14);
        Ok(())
    })
}

pub fn ttest_shift(cases: u32) -> Result<(), String> {
    run(cases, (paired(), -100.0f64..100.0), |((a, b), c)| {
        let f = paired_t_test(&a, &b).unwrap();
        let sa: Vec<f64> = a.iter().map(|v| v + c).collect();
        let sb: Vec<f64> = b.iter().map(|v| v + c).collect();
        let g = paired_t_test(&sa, &sb).unwrap();
        prop_assert!((f.t_stat - g.t_stat).abs() <= 1e-9 * (1.0 + f.t_stat.abs()));
        prop_assert!((f.p_value - g.p_value).abs() <= 1e-9);
        Ok(())
    })
}

pub fn bonferroni_monotone(cases: u32) -> Result<(), String> {
    run(cases, (prop::collection::vec(0.0f64..=1.0, 1..50), 1usize..40), |(p, m)| {
        let adj = bonferroni_adjust(&p, m).unwrap();
        for i in 0..p.len() {
            prop_assert!(adj[i] >= p[i] && adj[i] <= 1.0);
            for j in 0..p.len() {
                if p[i] <= p[j] {
                    prop_assert!(adj[i] <= adj[j]);
                }
            }
        }
        Ok(())
    })
}

pub fn pearson_affine(cases: u32) -> Result<(), String> {
    let nonzero = prop_oneof![-10.0f64..-0.01, 0.01f64..10.0];
    run(cases, (paired(), nonzero.clone(), nonzero, -5.0f64..5.0, -5.0f64..5.0), |((x, y), a, c, b, d)| {
        let Ok(r) = pearson_r(&x, &y) else { return Ok(()) };
        let tx: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let ty: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        let s = pearson_r(&tx, &ty).unwrap();
        prop_assert!((s.r - (a * c).signum() * r.r).abs() <= 1e-9);
        Ok(())
    })
}

pub fn significance_ordered(cases: u32) -> Result<(), String> {
    let rank = |s: Significance| match s {
        Significance::Significant => 0,
        Significance::Near => 1,
        Significance::NotSignificant => 2,
    };
    run(cases, (0.0f64..=1.0, 0.0f64..=1.0), move |(p, q)| {
        let (lo, hi) = (p.min(q), p.max(q));
        prop_assert!(rank(classify_p(lo)) <= rank(classify_p(hi)));
        Ok(())
    })
}

fn small_design() -> impl Strategy<Value = (usize, u64)> {
    (0usize..8, 0u64..1000)
}

fn reach_condition(k: usize) -> (Design, String) {
    let all: Vec<_> = all_conditions().into_iter().filter(|(d, _)| !d.is_timed()).collect();
    all[k % all.len()].clone()
}

pub fn pipeline_determinism(cases: u32) -> Result<(), String> {
    let pools: Vec<rayon::ThreadPool> =
        [1, 3, 8].iter().map(|&n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()).collect();
    run(cases, small_design(), move |(k, seed)| {
        let (design, condition) = reach_condition(k);
        let s = memory_session(&design, &condition, seed, 500.0, 0.4, Some(5));
        let cfg = PipelineConfig::default();
        let outs: Vec<_> = pools.iter().map(|p| p.install(|| run_pipeline(&s, &design, &cfg).unwrap())).collect();
        for o in &outs[1..] {
            prop_assert!(o == &outs[0]);
            for (a, b) in o.metrics.rows.iter().zip(&outs[0].metrics.rows) {
                prop_assert_eq!(a.metrics.rp.to_bits(), b.metrics.rp.to_bits());
            }
        }
        Ok(())
    })
}

pub fn row_counts(cases: u32) -> Result<(), String> {
    run(cases, (0usize..11, 0u64..1000, prop::option::of(2u32..9)), |(k, seed, perfect)| {
        let all = all_conditions();
        let (design, condition) = &all[k % all.len()];
        let rate = if design.is_timed() { 100.0 } else { 400.0 };
        let s = memory_session(design, condition, seed, rate, 0.5, perfect);
        let out = run_pipeline(&s, design, &PipelineConfig::default()).unwrap();
        let blocks = s.blocks.len();
        if design.is_timed() {
            prop_assert_eq!(out.metrics.len(), 18 * blocks * 2);
            prop_assert_eq!(out.excluded_trials, 0);
        } else {
            prop_assert_eq!(out.metrics.len(), blocks * 16 * 2);
            let flagged = perfect.map_or(0, |n| (16 / n) as usize) * blocks;
            prop_assert_eq!(out.excluded_trials, flagged);
            prop_assert_eq!(out.metrics.included().count(), blocks * 16 * 2 - 2 * flagged);
        }
        Ok(())
    })
}

pub fn distance_scaling(cases: u32) -> Result<(), String> {
    run(cases, (small_design(), 1e-3f64..1e3), |((k, seed), c)| {
        let (design, condition) = reach_condition(k);
        let s = memory_session(&design, &condition, seed, 400.0, 0.4, Some(6));
        let mut scaled = s.clone();
        for b in &mut scaled.blocks {
            for t in b.trials.as_mut().unwrap() {
                t.d_req *= c;
                t.d_moved *= c;
            }
        }
        let cfg = PipelineConfig::default();
        let a = run_pipeline(&s, &design, &cfg).unwrap();
        let b = run_pipeline(&scaled, &design, &cfg).unwrap();
        prop_assert_eq!(a.excluded_trials, b.excluded_trials);
        for (x, y) in a.metrics.rows.iter().zip(&b.metrics.rows) {
            let (mx, my) = (x.metrics.mpo.unwrap(), y.metrics.mpo.unwrap());
            prop_assert!((mx - my).abs() <= 1e-12 * mx.max(1e-300) || mx == my);
            prop_assert_eq!(x.metrics.power_class, y.metrics.power_class);
            match (x.metrics.ump, y.metrics.ump) {
                (Some(u), Some(v)) => prop_assert!(rel_close(v, u, 1e-12)),
                (None, None) => {}
                other => prop_assert!(false, "ump definedness changed: {other:?}"),
            }
        }
        Ok(())
    })
}

fn quick_opts() -> SynthOptions {
    SynthOptions {
        rate: 500.0,
        trial_s: 0.4,
        ..SynthOptions::default()
    }
}

pub fn block_file_order(cases: u32) -> Result<(), String> {
    run(cases, (small_design(), any::<u64>()), |((k, seed), shuffle)| {
        let (design, condition) = reach_condition(k);
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::default();
        let plan = random_plan(&design, &condition, seed, Some(4), &cfg).unwrap();
        let fx = gen_session(&design, &condition, &plan, seed, dir.path(), &quick_opts()).unwrap();
        let baseline = run_pipeline(&load_session(&fx.config_path, None).unwrap(), &design, &cfg).unwrap();

        // Rename every block's files to a permuted set of names.
        let mut config = fx.config.clone();
        let n = config.blocks.len();
        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..n).collect();
            let mut s = shuffle;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                p.swap(i, (s >> 33) as usize % (i + 1));
            }
            p
        };
        for (i, b) in config.blocks.iter_mut().enumerate() {
            let j = perm[i];
            for (field, tag) in [(&mut b.tb_csv, "tb"), (&mut b.fcr_csv, "fcr")] {
                let new = format!("moved_{j}_{tag}.csv");
                std::fs::rename(dir.path().join(&*field), dir.path().join(&new)).unwrap();
                *field = new;
            }
            let t = b.trials_csv.as_mut().unwrap();
            let new = format!("moved_{j}_trials.csv");
            std::fs::rename(dir.path().join(&*t), dir.path().join(&new)).unwrap();
            *t = new;
        }
        let path = dir.path().join("moved.json");
        std::fs::write(&path, config.to_json()).unwrap();
        let moved = run_pipeline(&load_session(&path, None).unwrap(), &design, &cfg).unwrap();
        prop_assert!(moved.metrics == baseline.metrics);
        Ok(())
    })
}

pub fn fixtures_validate(cases: u32) -> Result<(), String> {
    run(cases, (0usize..11, 0u64..1000), |(k, seed)| {
        let all = all_conditions();
        let (design, condition) = &all[k % all.len()];
        let cfg = PipelineConfig::default();
        let plan = random_plan(design, condition, seed, Some(5), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOptions {
            rate: if design.is_timed() { 100.0 } else { 200.0 },
            trial_s: 0.5,
            ..SynthOptions::default()
        };
        let fx = gen_session(design, condition, &plan, seed, dir.path(), &opts).unwrap();
        let s = load_session(&fx.config_path, None).unwrap();
        let report = validate_design(&s, design);
        prop_assert!(report.is_ok(), "{report}");
        Ok(())
    })
}

pub fn fixtures_match_oracle(cases: u32) -> Result<(), String> {
    run(cases, (small_design(), any::<bool>()), |((k, seed), windows)| {
        let (design, condition) = reach_condition(k);
        let cfg = PipelineConfig::default();
        let plan = random_plan(&design, &condition, seed, Some(3), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOptions {
            trial_windows: windows,
            ..quick_opts()
        };
        let fx = gen_session(&design, &condition, &plan, seed, dir.path(), &opts).unwrap();
        let out = run_pipeline(&load_session(&fx.config_path, None).unwrap(), &design, &cfg).unwrap();
        prop_assert_eq!(out.excluded_trials, fx.excluded_trials);
        prop_assert_eq!(out.metrics.len(), fx.expected.len());
        for (got, want) in out.metrics.rows.iter().zip(&fx.expected.rows) {
            prop_assert_eq!((got.block, got.trial, &got.muscle), (want.block, want.trial, &want.muscle));
            prop_assert!(rel_close(got.metrics.rp, want.metrics.rp, 1e-9));
            prop_assert_eq!(got.metrics.mpo, want.metrics.mpo);
            prop_assert_eq!(got.metrics.power_class, want.metrics.power_class);
            match (got.metrics.ump, want.metrics.ump) {
                (Some(u), Some(v)) => prop_assert!(rel_close(u, v, 1e-9)),
                (None, None) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }
        Ok(())
    })
}

fn analyze_args(config: &Path, out: &Path) -> AnalyzeArgs {
    let default = PipelineConfig::default();
    AnalyzeArgs {
        sessions: SessionArgs {
            configs: vec![config.to_path_buf()],
            data_root: None,
        },
        out: out.to_path_buf(),
        pipeline: PipelineArgs {
            filter_order: default.filter.order,
            cutoff_hz: default.filter.cutoff_hz,
            filter_design: DesignArg::ImpulseInvariant,
            avg_window: default.avg_window,
            target_rate: default.target_rate,
            window_s: default.window_s,
            min_peak_height: default.min_peak_height,
            trial_spikiness: true,
        },
        stats: StatsArgs {
            pairing: PairingArg::Trials,
            bonferroni_m: None,
            measure: None,
            legacy_unit_scale: false,
        },
        hist_edges: None,
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("looptrace_points")] {
        let mut entries: Vec<_> = std::fs::read_dir(&sub).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_file()).collect();
        entries.sort();
        for p in entries {
            out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
        }
    }
    out
}

pub fn analyze_byte_determinism(cases: u32) -> Result<(), String> {
    run(cases, small_design(), |(k, seed)| {
        let (design, condition) = reach_condition(k);
        let dir = tempfile::tempdir().unwrap();
        let plan = random_plan(&design, &condition, seed, Some(4), &PipelineConfig::default()).unwrap();
        let fx = gen_session(&design, &condition, &plan, seed, &dir.path().join("fx"), &quick_opts()).unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        cmd_analyze(&analyze_args(&fx.config_path, &a)).unwrap();
        cmd_analyze(&analyze_args(&fx.config_path, &b)).unwrap();
        let (da, db) = (dir_bytes(&a), dir_bytes(&b));
        prop_assert_eq!(da.len(), 5 + fx.config.blocks.len());
        prop_assert!(da == db);
        Ok(())
    })
}

pub fn outputs_round_trip(cases: u32) -> Result<(), String> {
    run(cases, small_design(), |(k, seed)| {
        let (design, condition) = reach_condition(k);
        let dir = tempfile::tempdir().unwrap();
        let plan = random_plan(&design, &condition, seed, Some(4), &PipelineConfig::default()).unwrap();
        let fx = gen_session(&design, &condition, &plan, seed, &dir.path().join("fx"), &quick_opts()).unwrap();
        let out = dir.path().join("out");
        cmd_analyze(&analyze_args(&fx.config_path, &out)).unwrap();

        let rows = read_metrics_csv(&out.join("metrics.csv")).unwrap();
        prop_assert_eq!(rows.len(), fx.expected.len());
        let hist = read_histogram_csv(&out.join("ump_histogram.csv")).unwrap();
        let defined = rows.iter().filter(|r| r.metrics.ump.is_some()).count();
        prop_assert_eq!(hist.iter().map(|h| h.count).sum::<usize>(), defined);
        let table = read_loop_table(&out.join("looptrace_table.csv")).unwrap();
        prop_assert_eq!(table.len(), fx.config.blocks.len());
        for r in &table {
            prop_assert!((r.fractions.sum() - 1.0).abs() < 1e-7);
            let (x, y) = read_points_csv(&out.join("looptrace_points").join(format!("{}_block{}.csv", r.condition, r.block))).unwrap();
            let q = quadrant_fractions(&lt(x, y)).unwrap().fractions;
            prop_assert!((q.pp - r.fractions.pp).abs() < 1e-8);
        }
        let tests = read_ttests(&out.join("ttests.csv")).unwrap();
        let n_blocks = fx.config.blocks.len();
        prop_assert_eq!(tests.len(), 2 * n_blocks * (n_blocks - 1) / 2);
        let corr = read_correlations(&out.join("correlations.csv")).unwrap();
        prop_assert_eq!(corr.len(), 3);
        Ok(())
    })
}
