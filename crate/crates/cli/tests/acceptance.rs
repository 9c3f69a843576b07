//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p stc-cli --test acceptance`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use statrs::function::erf::erfc;

use stc_core::array::{
    angle_grid, array_factor, column_coefficients, find_peak, ArrayGeometry, SteeringPlan,
};
use stc_core::codebook::{design_by_shift, strongest_code, wrap_pi, ModulationScheme};
use stc_core::codes::{Alphabet, CellState, TimeCode, DEFAULT_ENUMERATION_CAP};
use stc_core::harmonics::{constellation_map, harmonic_coefficient, oracle_coefficient};
use stc_core::linksim::{
    angular_sweep, build_codebook, rng_stream, run_link, spectrum_estimate, synthesize_rx_waveform,
    ChannelModel, LinkConfig,
};
use stc_core::Complex64;

const TAU: f64 = 3.74e-3;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_code(rng: &mut impl Rng, len: usize, alphabet: Alphabet) -> TimeCode {
    let states = alphabet.states();
    let bits: Vec<CellState> = (0..len)
        .map(|_| states[rng.random_range(0..states.len())])
        .collect();
    TimeCode::new(bits, TAU, alphabet).unwrap()
}

fn closed_form_matches_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_stream(101, 0);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let len = [4, 8, 11, 16][rng.random_range(0..4)];
        let alphabet = if i % 2 == 0 {
            Alphabet::Binary
        } else {
            Alphabet::Ternary
        };
        let code = random_code(&mut rng, len, alphabet);
        let l = len as i64;
        let n = rng.random_range(-2 * l..=2 * l);
        let err = (harmonic_coefficient(&code, n)
            - oracle_coefficient(&code, n, 16 * len).unwrap())
        .norm();
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("code {code} n={n}: error {err:e}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("10000 codes, max error {worst:.2e}, {elapsed:.2?}"))
}

fn shift_theorem() -> Outcome {
    let mut rng = rng_stream(202, 0);
    let (mut phase_worst, mut mag_worst) = (0.0f64, 0.0f64);
    let mut checked = 0;
    while checked < 1000 {
        let len = rng.random_range(2..=16usize);
        let alphabet = if rng.random() {
            Alphabet::Binary
        } else {
            Alphabet::Ternary
        };
        let code = random_code(&mut rng, len, alphabet);
        let l = len as i64;
        let n = rng.random_range(-2 * l..=2 * l);
        let s = rng.random_range(-2 * l..=2 * l);
        let c0 = harmonic_coefficient(&code, n);
        if c0.norm() < 1e-6 {
            continue;
        }
        let c1 = harmonic_coefficient(&code.rotate(s), n);
        let expected = 2.0 * PI * (n * s) as f64 / len as f64;
        let dphase = wrap_pi(c1.arg() - c0.arg() - expected).abs();
        let dmag = (c1.norm() - c0.norm()).abs();
        phase_worst = phase_worst.max(dphase);
        mag_worst = mag_worst.max(dmag);
        ensure(dphase <= 1e-9 && dmag <= 1e-12, || {
            format!("code {code} n={n} s={s}: phase {dphase:e} magnitude {dmag:e}")
        })?;
        checked += 1;
    }
    Ok(format!(
        "1000 triples, phase {phase_worst:.1e} rad, magnitude {mag_worst:.1e}"
    ))
}

fn steering_law() -> Outcome {
    let start = Instant::now();
    let base = strongest_code(8, 1, Alphabet::Binary, TAU).map_err(|e| e.to_string())?;
    let geom = ArrayGeometry::default();
    let grid = angle_grid(-90.0, 90.0, 0.1);
    let mut found = Vec::new();
    for (s, expected) in [(1, 14.4775), (2, 30.0)] {
        let plan = SteeringPlan {
            base: base.clone(),
            shift: s,
            harmonic: 1,
        };
        let pattern = array_factor(&column_coefficients(&plan, 8), &geom, &grid)
            .map_err(|e| e.to_string())?;
        let peak = find_peak(&pattern).map_err(|e| e.to_string())?.angle_deg;
        ensure((peak - expected).abs() <= 0.5, || {
            format!("s={s}: peak at {peak:.3} deg")
        })?;
        found.push(format!("s={s} -> {peak:.2} deg"));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{}, {elapsed:.2?}", found.join(", ")))
}

/// Received record of one code repeated on every column for `periods` periods.
fn single_code_record(cfg: &LinkConfig, code: &str, periods: usize) -> Vec<Complex64> {
    let code = TimeCode::parse(code, cfg.bit_duration, Alphabet::Binary).unwrap();
    let schedules = vec![vec![code; periods]; cfg.geometry.columns];
    synthesize_rx_waveform(&schedules, cfg).unwrap()
}

fn harmonic_comb() -> Outcome {
    let mut notes = Vec::new();
    for (name, cfg) in [
        ("fast", LinkConfig::fast_profile(2, 8)),
        ("reference", LinkConfig::reference_profile(2, 8)),
    ] {
        let spacing = cfg.harmonic_spacing();
        let psd = spectrum_estimate(
            &single_code_record(&cfg, "00000001", 25),
            cfg.sample_rate,
            cfg.code_period(),
        )
        .map_err(|e| e.to_string())?;
        let lines: Vec<f64> = (-4..=4)
            .map(|k| {
                psd.peak_near(cfg.f_offset + k as f64 * spacing, 0.3 * spacing)
                    .0
            })
            .collect();
        for w in lines.windows(2) {
            let d = w[1] - w[0];
            ensure((d - 33.42).abs() <= 0.2, || {
                format!("{name}: line spacing {d:.4} Hz")
            })?;
        }
        let mean = (lines[8] - lines[0]) / 8.0;

        let psd = spectrum_estimate(
            &single_code_record(&cfg, "11111111", 25),
            cfg.sample_rate,
            cfg.code_period(),
        )
        .map_err(|e| e.to_string())?;
        let carrier = psd.power_at(cfg.f_offset);
        let mut weakest_gap = f64::INFINITY;
        for k in (-8..=8).filter(|&k| k != 0) {
            let gap = carrier - psd.power_at(cfg.f_offset + k as f64 * spacing);
            weakest_gap = weakest_gap.min(gap);
            ensure(gap >= 100.0, || {
                format!("{name}: harmonic {k} only {gap:.1} dB down")
            })?;
        }
        notes.push(format!(
            "{name}: spacing {mean:.4} Hz, constant code >= {weakest_gap:.0} dB down"
        ));
    }
    Ok(notes.join("; "))
}

fn codebook_exactness() -> Outcome {
    let mut notes = Vec::new();
    for (order, len) in [(2usize, 8usize), (4, 8), (8, 8), (16, 16)] {
        let base = strongest_code(len, 1, Alphabet::Binary, TAU).map_err(|e| e.to_string())?;
        let scheme = ModulationScheme::new(order, 1, 0.0).unwrap();
        let book = design_by_shift(&base, &scheme).map_err(|e| e.to_string())?;
        let step = 2.0 * PI / order as f64;
        // Recompute every entry with the integration oracle.
        let coeffs: Vec<Complex64> = book
            .entries()
            .iter()
            .map(|e| oracle_coefficient(&e.code, 1, 64 * len).unwrap())
            .collect();
        let mut phase_worst = 0.0f64;
        for k in 0..order {
            let next = coeffs[(k + 1) % order];
            let d = wrap_pi(next.arg() - coeffs[k].arg() - step).abs();
            phase_worst = phase_worst.max(d);
        }
        let mags: Vec<f64> = coeffs.iter().map(|c| c.norm()).collect();
        let spread = mags.iter().copied().fold(f64::MIN, f64::max)
            - mags.iter().copied().fold(f64::MAX, f64::min);
        ensure(phase_worst <= 1e-9 && spread <= 1e-12, || {
            format!("M={order}: phase error {phase_worst:e}, spread {spread:e}")
        })?;
        notes.push(format!("M={order} {:.1} deg", step.to_degrees()));
    }
    Ok(notes.join(", "))
}

fn q(x: f64) -> f64 {
    0.5 * erfc(x / 2f64.sqrt())
}

fn end_to_end_modulation() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for (order, len) in [(2usize, 8usize), (4, 8), (8, 8), (16, 16)] {
        let mut cfg = LinkConfig::fast_profile(order, len);
        cfg.data_symbols = 1000;
        cfg.seed = 11;
        let run = run_link(&cfg).map_err(|e| e.to_string())?;
        let r = &run.report;
        ensure(r.ser == 0.0 && r.evm_pct < 1.0, || {
            format!("M={order}: SER {} EVM {}%", r.ser, r.evm_pct)
        })?;
    }
    notes.push("noiseless SER 0 for M=2,4,8,16".to_string());

    for es_n0 in [15.0, 9.0] {
        let mut cfg = LinkConfig::fast_profile(4, 8);
        cfg.data_symbols = 10_000;
        cfg.pilot_count = 64;
        cfg.seed = 20240601;
        cfg.channel = ChannelModel::Awgn { es_n0_db: es_n0 };
        let r = run_link(&cfg).map_err(|e| e.to_string())?.report;
        let gamma = 10f64.powf(r.post_filter_snr_db / 10.0);
        let qv = q(gamma.sqrt());
        let p = 2.0 * qv - qv * qv;
        let n = cfg.data_symbols as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        let errors = r.ser * n;
        ensure((errors - n * p).abs() <= 3.0 * sigma, || {
            format!(
                "Es/N0 {es_n0} dB: {errors} errors, expected {:.2} +/- {:.2} at {:.2} dB",
                n * p,
                3.0 * sigma,
                r.post_filter_snr_db
            )
        })?;
        notes.push(format!(
            "{es_n0} dB: {errors} errors vs {:.2} expected",
            n * p
        ));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    notes.push(format!("{elapsed:.2?}"));
    Ok(notes.join(", "))
}

fn steering_with_modulation() -> Outcome {
    let mut cfg = LinkConfig::fast_profile(4, 8);
    cfg.data_symbols = 200;
    cfg.pilot_count = 16;
    cfg.seed = 7;
    let book = build_codebook(&cfg).map_err(|e| e.to_string())?;
    let angles = angle_grid(-90.0, 90.0, 0.5);
    let clean = angular_sweep(2, &book, &cfg, &angles).map_err(|e| e.to_string())?;
    let peak = clean
        .iter()
        .max_by(|a, b| a.power_db.total_cmp(&b.power_db))
        .unwrap();
    ensure((peak.angle_deg - 30.0).abs() <= 1.0, || {
        format!("peak at {} deg", peak.angle_deg)
    })?;
    let ser = peak.report.as_ref().map(|r| r.ser);
    ensure(ser == Some(0.0), || format!("SER at peak {ser:?}"))?;

    cfg.channel = ChannelModel::Awgn { es_n0_db: 10.0 };
    let noisy = angular_sweep(2, &book, &cfg, &angles).map_err(|e| e.to_string())?;
    let at_peak = noisy
        .iter()
        .find(|p| p.angle_deg == peak.angle_deg)
        .and_then(|p| p.report.as_ref())
        .map(|r| r.evm_pct)
        .ok_or("no report at the peak")?;
    let mut lowest_off_peak = f64::INFINITY;
    for p in noisy
        .iter()
        .filter(|p| (p.angle_deg - peak.angle_deg).abs() >= 20.0)
    {
        let evm = p.report.as_ref().map_or(f64::INFINITY, |r| r.evm_pct);
        lowest_off_peak = lowest_off_peak.min(evm);
        ensure(evm > at_peak, || {
            format!(
                "EVM {evm:.2}% at {} deg vs {at_peak:.2}% at the peak",
                p.angle_deg
            )
        })?;
    }
    Ok(format!(
        "peak {} deg, noisy EVM {at_peak:.2}% at peak, >= {lowest_off_peak:.2}% off-peak",
        peak.angle_deg
    ))
}

fn enumeration_properties() -> Outcome {
    let map = constellation_map(11, 1, Alphabet::Binary, TAU, DEFAULT_ENUMERATION_CAP)
        .map_err(|e| e.to_string())?;
    ensure(map.points.len() == 2048, || {
        format!("{} points", map.points.len())
    })?;
    let points: Vec<Complex64> = map.points.iter().map(|(_, c)| *c).collect();
    let rot = Complex64::from_polar(1.0, 2.0 * PI / 11.0);
    let mut worst = 0.0f64;
    for p in &points {
        let r = p * rot;
        let d = points
            .iter()
            .map(|q| (q - r).norm())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
        ensure(d <= 1e-12, || {
            format!("rotated point {r} unmatched by {d:e}")
        })?;
    }
    Ok(format!("2048 points, worst rotation mismatch {worst:.1e}"))
}

fn configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

fn stc(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_stc"))
        .args(args)
        .env_remove("STC_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("stc {args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn determinism() -> Outcome {
    let files = configs();
    for path in &files {
        let cfg: LinkConfig =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).map_err(|e| e.to_string())?;
        let a = run_link(&cfg).map_err(|e| e.to_string())?.report;
        let b = run_link(&cfg).map_err(|e| e.to_string())?.report;
        let ja = serde_json::to_string_pretty(&a).unwrap();
        let jb = serde_json::to_string_pretty(&b).unwrap();
        ensure(ja == jb && a.spectrum == b.spectrum, || {
            format!("{} differs between runs", path.display())
        })?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let outputs = [
        "report.json",
        "spectrum.csv",
        "constellation.csv",
        "codebook.json",
    ];
    for path in &files {
        let stem = path.file_stem().unwrap().to_string_lossy();
        let first = dir.path().join(format!("{stem}-1"));
        let second = dir.path().join(format!("{stem}-2"));
        let replay = dir.path().join(format!("{stem}-replay"));
        let config = path.to_str().unwrap();
        stc(&[
            "linksim",
            "--config",
            config,
            "--out",
            first.to_str().unwrap(),
        ])?;
        stc(&[
            "linksim",
            "--config",
            config,
            "--out",
            second.to_str().unwrap(),
        ])?;
        stc(&[
            "replay",
            "--manifest",
            first.join("manifest.json").to_str().unwrap(),
            "--out",
            replay.to_str().unwrap(),
        ])?;
        for f in outputs {
            let original = fs::read(first.join(f)).map_err(|e| e.to_string())?;
            ensure(original == fs::read(second.join(f)).unwrap(), || {
                format!("{stem}/{f} differs between runs")
            })?;
            ensure(original == fs::read(replay.join(f)).unwrap(), || {
                format!("{stem}/{f} differs on replay")
            })?;
        }
    }
    Ok(format!(
        "{} bundled configs, reports and replays byte-identical",
        files.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("closed form matches oracle", closed_form_matches_oracle),
        ("shift theorem", shift_theorem),
        ("steering law", steering_law),
        ("harmonic comb", harmonic_comb),
        ("codebook exactness", codebook_exactness),
        ("end-to-end modulation", end_to_end_modulation),
        ("modulation with steering", steering_with_modulation),
        ("enumeration properties", enumeration_properties),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
