//! Pipelines behind the CLI verbs and the file emitter.

use std::path::{Path, PathBuf};
use std::time::Instant;

use plaplab_core::estimate::{blowup_study, estimate_sweep, fubini_diagnostic, BlowupOptions, EstimateReport};
use plaplab_core::grid::{Grid, Rank};
use plaplab_core::io::{csv_table, field_csv, ksweep_csv, FieldEnvelope};
use plaplab_core::maximal::{ap_constant, build_weight, localized_source, maximal_function, CellMask};
use plaplab_core::operators::derive_exponents;
use plaplab_core::solver::{approximation_study, solve_weak, ApproxRecord, SolveOptions, StudyOptions};
use plaplab_core::whitney::{whitney_decompose, OutsideRule, WhitneyCheck};
use plaplab_core::{BoxField, Domain, Exponents, Field};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, ForcingSpec, Violation};
use crate::manifest::{RunManifest, StageTiming, MANIFEST_NAME};
use crate::plot::{loglog, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Verb {
    /// One weak solve of the configured problem.
    Solve,
    /// Approximation sequence over `k_schedule`.
    Ksweep,
    /// Weighted vs unweighted energies for `f = |x|^-alpha e_1`.
    Blowup,
    /// Whitney property suite on named and random masks.
    Whitney,
    /// Weight construction and maximal-function suite.
    Weights,
    /// Local estimate report along `k_schedule`.
    Report,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Solve => "solve",
            Verb::Ksweep => "ksweep",
            Verb::Blowup => "blowup",
            Verb::Whitney => "whitney",
            Verb::Weights => "weights",
            Verb::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// One file a stage wants written.
#[derive(Debug, Clone)]
pub struct Output {
    pub name: String,
    pub format: Format,
    pub contents: Vec<u8>,
}

impl Output {
    fn new(name: &str, format: Format, contents: impl Into<Vec<u8>>) -> Self {
        Output { name: name.into(), format, contents: contents.into() }
    }

    fn json<T: Serialize>(name: &str, value: &T) -> Self {
        Output::new(name, Format::Json, serde_json::to_string_pretty(value).expect("report serialises") + "\n")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config ({} violations)", .0.len())]
    Invalid(Vec<Violation>),
    #[error("{}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
}

/// A module rejection, tagged with the config entry that caused it.
#[derive(Debug)]
struct StageError {
    path: &'static str,
    error: plaplab_core::Error,
}

trait At<T> {
    fn at(self, path: &'static str) -> Result<T, StageError>;
}

impl<T> At<T> for plaplab_core::Result<T> {
    fn at(self, path: &'static str) -> Result<T, StageError> {
        self.map_err(|error| StageError { path, error })
    }
}

struct StageOutcome {
    outputs: Vec<Output>,
    invariants_ok: bool,
    summary: String,
}

/// Runs `verb` and writes its outputs plus `manifest.json` into `out`.
///
/// Module rejections do not abort: the manifest is still written, flagged incomplete, and
/// names the config entry involved.
pub fn run_experiment(
    config: &ExperimentConfig,
    verb: Verb,
    formats: &[Format],
    out: &Path,
) -> Result<(RunManifest, String), RunError> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(RunError::Invalid(violations));
    }
    std::fs::create_dir_all(out).map_err(|e| RunError::Io { path: out.into(), message: e.to_string() })?;
    let canonical = serde_json::to_string(config).expect("config serialises");
    let mut manifest = RunManifest::new(verb.name(), &canonical, config.rng_seed);

    let start = Instant::now();
    let outcome = match verb {
        Verb::Solve => solve_stage(config),
        Verb::Ksweep => ksweep_stage(config),
        Verb::Blowup => blowup_stage(config),
        Verb::Whitney => Ok(whitney_stage(config)),
        Verb::Weights => weights_stage(config),
        Verb::Report => report_stage(config),
    };
    manifest.timings.push(StageTiming { stage: verb.name().into(), seconds: start.elapsed().as_secs_f64() });

    let summary = match outcome {
        Ok(stage) => {
            manifest.invariants_passed = stage.invariants_ok;
            let t = Instant::now();
            emit_outputs(&stage.outputs, formats, out, &mut manifest)?;
            manifest.timings.push(StageTiming { stage: "emit".into(), seconds: t.elapsed().as_secs_f64() });
            stage.summary
        }
        Err(e) => {
            manifest.complete = false;
            manifest.invariants_passed = false;
            let msg = format!("{}: {}", e.path, e.error);
            manifest.failures.push(msg.clone());
            msg
        }
    };
    let path = out.join(MANIFEST_NAME);
    std::fs::write(&path, manifest.to_json()).map_err(|e| RunError::Io { path, message: e.to_string() })?;
    Ok((manifest, summary))
}

/// Writes the outputs whose format was requested and lists them in `manifest`.
pub fn emit_outputs(
    outputs: &[Output],
    formats: &[Format],
    dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    for o in outputs.iter().filter(|o| formats.contains(&o.format)) {
        let path = dir.join(&o.name);
        std::fs::write(&path, &o.contents).map_err(|e| RunError::Io { path: path.clone(), message: e.to_string() })?;
        manifest.record_file(&o.name, &o.contents);
    }
    Ok(())
}

fn exponents(c: &ExperimentConfig) -> Result<Exponents, StageError> {
    derive_exponents(c.exponents.p, c.exponents.r, c.exponents.eps).at("exponents")
}

fn solve_options(c: &ExperimentConfig) -> SolveOptions {
    SolveOptions { tol: c.tol, max_iters: c.max_iters }
}

fn load_forcing(spec: &ForcingSpec, rank: Rank, dom: &Domain, path: &'static str) -> Result<Field, StageError> {
    if let Some(profile) = spec.profile() {
        return Ok(profile.field(rank, dom));
    }
    let ForcingSpec::File { path: file } = spec else { unreachable!("profiles handled above") };
    let text = std::fs::read_to_string(file)
        .map_err(|e| plaplab_core::Error::Format(format!("{}: {e}", file.display())))
        .at(path)?;
    let field = FieldEnvelope::from_json(&text).and_then(|env| env.into_field(dom)).at(path)?;
    if field.rank != rank {
        return Err(plaplab_core::Error::Mismatch(format!(
            "{} holds {:?} data, expected {rank:?}",
            file.display(),
            field.rank
        )))
        .at(path);
    }
    Ok(field)
}

fn data(c: &ExperimentConfig) -> Result<(Domain, Exponents, Field, Field), StageError> {
    let dom = c.domain().at("domain")?;
    let exps = exponents(c)?;
    let f = load_forcing(&c.forcing.f, Rank::Gradient, &dom, "forcing.f")?;
    let g = load_forcing(&c.forcing.g, Rank::Scalar, &dom, "forcing.g")?;
    Ok((dom, exps, f, g))
}

fn solve_stage(c: &ExperimentConfig) -> Result<StageOutcome, StageError> {
    let (dom, exps, f, g) = data(c)?;
    let (u, rep) = solve_weak(&f, &g, &exps, &dom, &solve_options(c), None).at("forcing")?;
    let monotone = rep.energy_history.windows(2).all(|w| w[1] <= w[0] + rep.energy_noise);
    let env =
        FieldEnvelope::new(&u, &dom).with_meta("quantity", "u".into()).with_meta("residual", rep.residual_norm.into());
    Ok(StageOutcome {
        summary: format!(
            "solve: {} iterations, residual {:e}, energy {:e}, converged {}",
            rep.iterations, rep.residual_norm, rep.final_energy, rep.converged
        ),
        invariants_ok: rep.converged && monotone,
        outputs: vec![
            Output::new("solution.csv", Format::Csv, field_csv(&u, &dom)),
            Output::new("solution.json", Format::Json, env.to_json()),
            Output::json("solve_report.json", &rep),
        ],
    })
}

fn energy_plot(title: &str, records: &[ApproxRecord]) -> String {
    loglog(
        title,
        "k",
        "gradient energy on Omega_R",
        &[
            Series { name: "unweighted", points: records.iter().map(|r| (r.k, r.e_p_unweighted)).collect() },
            Series { name: "weighted", points: records.iter().map(|r| (r.k, r.e_p_weighted)).collect() },
        ],
    )
}

fn ksweep_stage(c: &ExperimentConfig) -> Result<StageOutcome, StageError> {
    let (dom, exps, f, g) = data(c)?;
    let opts = StudyOptions { solve: solve_options(c), ball_radius: None };
    let rep = approximation_study(&f, &g, &exps, &dom, &c.k_schedule, c.delta, c.radius, &opts).at("k_schedule")?;
    Ok(StageOutcome {
        summary: format!("ksweep: {} levels, all converged {}", rep.records.len(), rep.all_converged()),
        invariants_ok: rep.all_converged(),
        outputs: vec![
            Output::new("ksweep.csv", Format::Csv, ksweep_csv(&rep.records)),
            Output::json("ksweep.json", &rep),
            Output::new("ksweep.svg", Format::Svg, energy_plot("k-sweep", &rep.records)),
        ],
    })
}

fn blowup_stage(c: &ExperimentConfig) -> Result<StageOutcome, StageError> {
    let dom = c.domain().at("domain")?;
    let exps = exponents(c)?;
    let opts = BlowupOptions {
        k_schedule: c.k_schedule.clone(),
        delta: c.delta,
        radius: c.radius,
        solve: solve_options(c),
        thresholds: c.thresholds(),
    };
    let rep = blowup_study(c.blowup_alpha, &exps, &dom, &opts).at("blowup_alpha")?;
    let converged = rep.records.iter().all(|r| r.outcome == plaplab_core::solver::ApproxOutcome::Converged);
    let v = &rep.verdicts;
    Ok(StageOutcome {
        summary: format!(
            "blowup: unweighted_divergent {} (growth {:.3}), weighted_bounded {} (last change {:.3})",
            v.unweighted_divergent, v.unweighted_growth, v.weighted_bounded, v.weighted_last_change
        ),
        invariants_ok: converged,
        outputs: vec![
            Output::new("blowup.csv", Format::Csv, ksweep_csv(&rep.records)),
            Output::json("blowup.json", &rep),
            Output::new("blowup.svg", Format::Svg, energy_plot(&format!("alpha = {}", rep.alpha), &rep.records)),
        ],
    })
}

fn report_stage(c: &ExperimentConfig) -> Result<StageOutcome, StageError> {
    let (dom, exps, f, g) = data(c)?;
    let opts = StudyOptions { solve: solve_options(c), ball_radius: None };
    let (reports, records) = estimate_sweep(&f, &g, &exps, &dom, &c.k_schedule, c.delta, c.radius, &opts).at("R")?;
    let rows: Vec<Vec<String>> = reports.iter().map(EstimateReport::csv_row).collect();
    let finite = reports.iter().all(|r| r.empirical_constant.is_finite());
    let converged = records.iter().all(|r| r.outcome == plaplab_core::solver::ApproxOutcome::Converged);
    let k = |r: &EstimateReport| r.meta.k.unwrap_or(f64::NAN);
    let svg = loglog(
        "local estimate",
        "k",
        "value",
        &[
            Series { name: "lhs_total", points: reports.iter().map(|r| (k(r), r.lhs_total)).collect() },
            Series { name: "rhs_total", points: reports.iter().map(|r| (k(r), r.rhs_total)).collect() },
            Series {
                name: "empirical_constant",
                points: reports.iter().map(|r| (k(r), r.empirical_constant)).collect(),
            },
        ],
    );
    #[derive(Serialize)]
    struct Doc<'a> {
        reports: &'a [EstimateReport],
        records: &'a [ApproxRecord],
    }
    let constants: Vec<String> = reports.iter().map(|r| format!("{:.4e}", r.empirical_constant)).collect();
    Ok(StageOutcome {
        summary: format!("report: empirical constants [{}]", constants.join(", ")),
        invariants_ok: finite && converged,
        outputs: vec![
            Output::new("estimates.csv", Format::Csv, csv_table(&EstimateReport::COLUMNS, &rows)),
            Output::json("estimates.json", &Doc { reports: &reports, records: &records }),
            Output::new("estimates.svg", Format::Svg, svg),
        ],
    })
}

/// Named and seeded random masks of the Whitney suite.
pub fn whitney_masks(cells: usize, random: usize, seed: u64) -> Vec<(String, Grid<f64>, CellMask, OutsideRule)> {
    let n = cells;
    let square = Grid { dim: 2, nx: n, ny: n, h: 1.0 / n as f64, lo: [0.0, 0.0] };
    let line = Grid { dim: 1, nx: 2 * n, ny: 1, h: 0.5 / n as f64, lo: [0.0, 0.0] };
    let mut masks = vec![
        ("interval".to_string(), line.clone(), CellMask::from_fn(2 * n, 1, |_, _| true), OutsideRule::Complement),
        ("half-plane".to_string(), square.clone(), CellMask::from_fn(n, n, |_, iy| iy >= n / 2), OutsideRule::Universe),
        (
            "square".to_string(),
            square.clone(),
            CellMask::from_fn(n, n, |ix, iy| (n / 4..3 * n / 4).contains(&ix) && (n / 4..3 * n / 4).contains(&iy)),
            OutsideRule::Complement,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = (n / 8).max(1);
    let per = n.div_ceil(block);
    let mut made = 0;
    while made < random {
        let blocks: Vec<bool> = (0..per * per).map(|_| rng.gen_bool(0.5)).collect();
        let mut mask = CellMask::from_fn(n, n, |ix, iy| blocks[(iy / block) * per + ix / block]);
        // keep one complement cell so the box is never all of O
        mask.members[0] = false;
        if mask.is_empty() {
            continue;
        }
        masks.push((format!("random-{made}"), square.clone(), mask, OutsideRule::Universe));
        made += 1;
    }
    masks
}

#[derive(Serialize)]
struct WhitneyRow {
    mask: String,
    check: Option<WhitneyCheck>,
    error: Option<String>,
}

fn whitney_stage(c: &ExperimentConfig) -> StageOutcome {
    let masks = whitney_masks(c.whitney.cells, c.whitney.random_masks, c.rng_seed);
    let mut rows = Vec::new();
    let mut svg = None;
    for (name, grid, mask, rule) in &masks {
        let built = whitney_decompose(grid, mask, None, *rule).and_then(|mut w| {
            w.partition_of_unity()?;
            Ok(w)
        });
        match built {
            Ok(w) => {
                if name == "square" {
                    svg = Some((w.to_svg(), w.summary()));
                }
                rows.push(WhitneyRow { mask: name.clone(), check: Some(w.check()), error: None });
            }
            Err(e) => rows.push(WhitneyRow { mask: name.clone(), check: None, error: Some(e.to_string()) }),
        }
    }
    let header = [
        "mask",
        "pass",
        "cubes",
        "floor_clipped",
        "disjoint",
        "covers",
        "separation_violations",
        "min_dist_ratio",
        "max_dist_ratio",
        "size_ratio_violations",
        "max_neighbors",
        "neighbor_bound",
        "inflation_violations",
        "partition_sum_error",
        "gradient_constant",
    ];
    let mut all = true;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| match &r.check {
            Some(ch) => {
                let pass = ch.pass(1e-12);
                all &= pass;
                let part = ch.partition.as_ref();
                vec![
                    r.mask.clone(),
                    pass.to_string(),
                    ch.cubes.to_string(),
                    ch.floor_clipped.to_string(),
                    ch.disjoint.to_string(),
                    ch.covers.to_string(),
                    ch.separation_violations.to_string(),
                    format!("{:e}", ch.min_dist_ratio),
                    format!("{:e}", ch.max_dist_ratio),
                    ch.size_ratio_violations.to_string(),
                    ch.max_neighbors.to_string(),
                    ch.neighbor_bound.to_string(),
                    ch.inflation_violations_unclipped.to_string(),
                    part.map_or(String::new(), |p| format!("{:e}", p.sum_error)),
                    part.map_or(String::new(), |p| format!("{:e}", p.gradient_constant)),
                ]
            }
            None => {
                all = false;
                let mut row = vec![r.mask.clone(), "false".into()];
                row.resize(header.len(), String::new());
                row
            }
        })
        .collect();
    let passed = table.iter().filter(|r| r[1] == "true").count();
    let mut outputs =
        vec![Output::new("whitney.csv", Format::Csv, csv_table(&header, &table)), Output::json("whitney.json", &rows)];
    if let Some((svg, cubes)) = svg {
        outputs.push(Output::json("whitney_square.json", &cubes));
        outputs.push(Output::new("whitney_square.svg", Format::Svg, svg));
    }
    StageOutcome { summary: format!("whitney: {passed}/{} masks pass", table.len()), invariants_ok: all, outputs }
}

#[derive(Serialize)]
struct WeightsSuite {
    metadata: plaplab_core::maximal::WeightMetadata,
    constant_fixed_point: bool,
    dominates_source: bool,
    ap_exponent: f64,
    ap_constant: f64,
    ap_constant_4x_samples: f64,
    ap_relative_change: f64,
    fubini: plaplab_core::estimate::FubiniReport,
}

fn weights_stage(c: &ExperimentConfig) -> Result<StageOutcome, StageError> {
    let (dom, exps, f, g) = data(c)?;
    let weight = build_weight(&f, &g, &exps, c.delta, c.radius, &dom).at("delta")?;
    let grid = dom.grid();
    let source = localized_source(&f, &g, &exps, c.radius, &dom).at("R")?;
    let mh = weight.maximal.clone().expect("built weights keep M h");
    let dominates = mh.values.iter().zip(&source.values).all(|(m, s)| m >= s);
    let level = 0.5 * (source.max() + source.min()) + 0.25;
    let constant = maximal_function(grid, &BoxField::constant(grid, level)).at("domain")?;
    let fixed = constant.values.iter().all(|&v| v == level);

    let samples = c.weights.ball_samples;
    let a1 = ap_constant(grid, &weight.field, exps.p, samples, c.rng_seed).at("weights.ball_samples")?;
    let a4 = ap_constant(grid, &weight.field, exps.p, 4 * samples, c.rng_seed).at("weights.ball_samples")?;
    let shifted = weight.maximal_shifted().expect("built weights keep M h");
    let fubini =
        fubini_diagnostic(&source.values, &shifted.values, grid.cell_measure(), exps.eps, 1.0, c.weights.lambda_points)
            .at("weights.lambda_points")?;
    let suite = WeightsSuite {
        metadata: weight.metadata(),
        constant_fixed_point: fixed,
        dominates_source: dominates,
        ap_exponent: exps.p,
        ap_constant: a1,
        ap_constant_4x_samples: a4,
        ap_relative_change: (a4 - a1).abs() / a1,
        fubini,
    };
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            let x = grid.center(i);
            vec![
                i.to_string(),
                format!("{:e}", x[0]),
                format!("{:e}", x[1]),
                format!("{:e}", source.values[i]),
                format!("{:e}", mh.values[i]),
                format!("{:e}", weight.field.values[i]),
            ]
        })
        .collect();
    Ok(StageOutcome {
        summary: format!(
            "weights: omega in [{:.4e}, {:.4e}], A_{} ~ {:.4} ({:.4} with 4x samples), M(c) = c {fixed}, MF >= F {dominates}",
            weight.field.min(),
            weight.field.max(),
            exps.p,
            a1,
            a4
        ),
        invariants_ok: fixed && dominates && a1.is_finite(),
        outputs: vec![
            Output::new("weight.csv", Format::Csv, csv_table(&["cell", "x", "y", "h", "M_h", "omega"], &rows)),
            Output::json("weights.json", &suite),
        ],
    })
}
