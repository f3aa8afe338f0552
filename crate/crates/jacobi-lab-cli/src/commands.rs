use std::time::Instant;

use jacobi_lab::glueing::{glue, pair_lderivative, restrict_boundary};
use jacobi_lab::io::{CurveOutput, IndexAnswer, IndexQuery, ProblemFile, SubspaceFile};
use jacobi_lab::lderiv::{jacobi_curve, VariationBasis};
use jacobi_lab::linearization::{builtin, moving_frame, uniform_grid, RandomLq, BUILTIN_NAMES};
use jacobi_lab::morse::{conjugate_points, verify, MorseReport, Verdict};
use jacobi_lab::symplectic::{fiber_plane, plane_distance};
use jacobi_lab::{Fields, Problem};
use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::{Failure, Format, Options};

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    command: &'a str,
    config: &'a Options,
    result: R,
}

fn json<R: Serialize>(command: &str, opts: &Options, result: R) -> Result<String, Failure> {
    let env = Envelope {
        command,
        config: opts,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env)
        .map_err(|e| Failure::Numerical(format!("cannot serialize output: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn csv<R: Serialize>(rows: &[R]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Failure::Numerical(format!("cannot write csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Failure::Numerical(format!("cannot write csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Failure::Numerical(e.to_string()))
}

fn read(opts: &Options) -> Result<String, Failure> {
    let path = opts
        .problem
        .as_ref()
        .ok_or_else(|| Failure::Validation("pass --problem".into()))?;
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))
}

fn load_problem(opts: &Options) -> Result<Problem, Failure> {
    let file = match &opts.builtin {
        Some(name) => ProblemFile::Builtin {
            name: name.clone(),
            horizon: None,
        },
        None => ProblemFile::from_json(&read(opts)?)?,
    };
    let prob = file.build(opts.t_max)?;
    info!(
        "problem {} (n = {}, k = {}, T = {})",
        prob.name, prob.n, prob.k, prob.horizon
    );
    Ok(prob)
}

fn frame(prob: &Problem, grid: &[f64], opts: &Options) -> Result<Fields, Failure> {
    Ok(moving_frame(prob, grid, opts.quadrature_order)?)
}

#[derive(Serialize)]
struct ProblemRow {
    name: &'static str,
    n: Option<usize>,
    k: Option<usize>,
}

pub fn problems(opts: &Options) -> Result<String, Failure> {
    let rows: Vec<ProblemRow> = BUILTIN_NAMES
        .iter()
        .map(|name| {
            let p = builtin::<f64>(name, 1.0, None).ok();
            ProblemRow {
                name,
                n: p.as_ref().map(|p| p.n),
                k: p.as_ref().map(|p| p.k),
            }
        })
        .collect();
    match opts.format {
        Format::Json => json("problems", opts, rows),
        Format::Csv => csv(&rows),
    }
}

pub fn indices(command: &str, opts: &Options) -> Result<String, Failure> {
    let mut query: IndexQuery = serde_json::from_str(&read(opts)?)
        .map_err(|e| Failure::Validation(format!("index query: {e}")))?;
    query.seed = query.seed.or(Some(opts.seed));
    let answer: IndexAnswer = query.evaluate(opts.tol)?;
    match opts.format {
        Format::Json => json(command, opts, answer),
        Format::Csv => csv(&[answer]),
    }
}

pub fn jacobi_run(command: &str, opts: &Options) -> Result<String, Failure> {
    let prob = load_problem(opts)?;
    let f = frame(&prob, &uniform_grid(prob.horizon, opts.grid), opts)?;
    let curve = jacobi_curve(&f, &VariationBasis::full(&f), opts.tol)?;
    let conjugate = conjugate_points(&curve, &fiber_plane(prob.n), opts.tol)?;
    debug!("{} conjugate points", conjugate.len());
    match opts.format {
        Format::Json => json(command, opts, CurveOutput::new(&curve, conjugate)),
        Format::Csv => csv(&conjugate),
    }
}

#[derive(Serialize)]
struct GlueOutput {
    split: f64,
    horizon: f64,
    /// Pair planes are expressed in the moving frame.
    first: SubspaceFile,
    second: SubspaceFile,
    direct: SubspaceFile,
    glued: SubspaceFile,
    residual: f64,
    boundary_residual: f64,
}

#[derive(Serialize)]
struct GlueRow {
    split: f64,
    horizon: f64,
    residual: f64,
    boundary_residual: f64,
}

pub fn glue_demo(command: &str, opts: &Options, split: f64) -> Result<String, Failure> {
    let prob = load_problem(opts)?;
    let horizon = prob.horizon;
    if split.is_nan() || split <= 0.0 || split >= horizon {
        return Err(Failure::Validation(format!(
            "--split must lie strictly inside (0, {horizon})"
        )));
    }
    if opts.grid < 2 {
        return Err(Failure::Validation(
            "glue demo needs --grid of at least 2".into(),
        ));
    }
    let n1 = ((opts.grid as f64 * split / horizon).round() as usize).clamp(1, opts.grid - 1);
    let n2 = opts.grid - n1;
    let mut grid = uniform_grid(split, n1);
    grid.extend((1..=n2).map(|j| split + (horizon - split) * j as f64 / n2 as f64));
    let f = frame(&prob, &grid, opts)?;
    let pair = |from: usize, to: usize| -> Result<_, Failure> {
        let s = f.slice(from, to)?;
        Ok(pair_lderivative(&s, &VariationBasis::full(&s), opts.tol)?)
    };
    let (first, second, direct) = (pair(0, n1)?, pair(n1, opts.grid)?, pair(0, opts.grid)?);
    let glued = glue(&first, &second, opts.tol)?;
    let residual = plane_distance(&glued.plane, &direct.plane)?;
    let curve = jacobi_curve(&f, &VariationBasis::full(&f), opts.tol)?;
    let end = restrict_boundary(&glued, &prob.n0_tangent, opts.tol)?;
    let boundary_residual = plane_distance(&end, curve.end())?;
    if residual > 1e-6 {
        warn!("glued and direct pair planes differ by {residual:e}");
    }
    match opts.format {
        Format::Json => json(
            command,
            opts,
            GlueOutput {
                split,
                horizon,
                first: SubspaceFile::from_subspace(&first.plane),
                second: SubspaceFile::from_subspace(&second.plane),
                direct: SubspaceFile::from_subspace(&direct.plane),
                glued: SubspaceFile::from_subspace(&glued.plane),
                residual,
                boundary_residual,
            },
        ),
        Format::Csv => csv(&[GlueRow {
            split,
            horizon,
            residual,
            boundary_residual,
        }]),
    }
}

#[derive(Serialize)]
struct Timing {
    moving_frame_s: f64,
    verify_s: f64,
}

#[derive(Serialize)]
struct MorseOutput {
    #[serde(flatten)]
    report: MorseReport,
    consistent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<Timing>,
}

#[derive(Serialize)]
struct MorseRow {
    instance: Option<usize>,
    name: String,
    n: usize,
    horizon: f64,
    intervals: usize,
    piecewise: i64,
    leray: i64,
    brute: usize,
    kernel_dim: usize,
    kernel_dim_via_curve: usize,
    codim_image: usize,
    certificate: Verdict,
    conjugate_count: usize,
    consistent: bool,
}

impl MorseRow {
    fn new(instance: Option<usize>, name: &str, r: &MorseReport) -> Self {
        Self {
            instance,
            name: name.to_string(),
            n: r.n,
            horizon: r.horizon,
            intervals: r.intervals,
            piecewise: r.piecewise,
            leray: r.leray,
            brute: r.brute,
            kernel_dim: r.kernel_dim,
            kernel_dim_via_curve: r.kernel_dim_via_curve,
            codim_image: r.codim_image,
            certificate: r.certificate,
            conjugate_count: r.conjugate.len(),
            consistent: r.consistent(),
        }
    }
}

pub fn morse_verify(command: &str, opts: &Options) -> Result<String, Failure> {
    let prob = load_problem(opts)?;
    let start = Instant::now();
    let f = frame(&prob, &uniform_grid(prob.horizon, opts.grid), opts)?;
    let framed = start.elapsed().as_secs_f64();
    let report = verify(&f, &VariationBasis::full(&f), opts.seed, opts.tol)?;
    let total = start.elapsed().as_secs_f64();
    let consistent = report.consistent();
    if !consistent {
        warn!(
            "index formulas disagree: piecewise {} leray {} brute {}",
            report.piecewise, report.leray, report.brute
        );
    }
    match opts.format {
        Format::Json => json(
            command,
            opts,
            MorseOutput {
                report,
                consistent,
                timing: opts.timing.then_some(Timing {
                    moving_frame_s: framed,
                    verify_s: total - framed,
                }),
            },
        ),
        Format::Csv => csv(&[MorseRow::new(None, &prob.name, &report)]),
    }
}

#[derive(Serialize)]
struct SweepOutput {
    instances: Vec<MorseRow>,
    all_consistent: bool,
}

pub fn morse_sweep(command: &str, opts: &Options, count: usize) -> Result<String, Failure> {
    let run_one = |i: usize| -> Result<MorseRow, Failure> {
        // One stream of the seeded generator per instance.
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        let mut prob = RandomLq::default().sample::<f64, _>(&mut rng)?;
        if let Some(t) = opts.t_max {
            prob = prob.with_horizon(t);
        }
        let f = frame(&prob, &uniform_grid(prob.horizon, opts.grid), opts)?;
        let report = verify(
            &f,
            &VariationBasis::full(&f),
            opts.seed.wrapping_add(i as u64),
            opts.tol,
        )
        .map_err(|e| Failure::from(e).with_context(&format!("instance {i} ({})", prob.name)))?;
        debug!("instance {i}: {}", prob.name);
        Ok(MorseRow::new(Some(i), &prob.name, &report))
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Validation(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<Vec<_>, _>>()
    })?;
    let all_consistent = rows.iter().all(|r| r.consistent);
    info!("{count} instances, all consistent: {all_consistent}");
    match opts.format {
        Format::Json => json(
            command,
            opts,
            SweepOutput {
                instances: rows,
                all_consistent,
            },
        ),
        Format::Csv => csv(&rows),
    }
}

impl Failure {
    fn with_context(self, ctx: &str) -> Self {
        match self {
            Failure::Validation(m) => Failure::Validation(format!("{ctx}: {m}")),
            Failure::Numerical(m) => Failure::Numerical(format!("{ctx}: {m}")),
        }
    }
}
