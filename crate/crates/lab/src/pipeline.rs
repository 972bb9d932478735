//! Command pipelines. Each writes its tables, then `summary.csv`, `report.txt` and
//! `manifest.toml`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use holonomy_core::circle::{compose, dist_c0, invert, CircleMap};
use holonomy_core::cocycle::{bunching_report, BunchingReport, CocycleGenerator};
use holonomy_core::conjugacy::{
    build_conjugacy, conjugacy_residual, constant_reduction, cycle_scan, intertwining_residual, CycleRecord,
    FieldOptions, FieldValue, IntertwiningSamples, Partner, Reduction, CYCLE_SCALES,
};
use holonomy_core::holonomy::{holonomy_property_residuals, HolonomySolver, PropertySamples};
use holonomy_core::metric::{build_invariant_metric, metric_residuals, MetricFamily, MetricOptions, MetricSamples};
use holonomy_core::torus::{Side, TorusPoint};
use holonomy_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::output::{fmt_f64, summary_table, BunchingFlags, FileEntry, Gate, RunManifest, StageTiming, Table};
use crate::report::emit_report;
use crate::{ExperimentConfig, LabError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Synth,
    Holonomy,
    Conjugacy,
    Cycles,
    Metric,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Holonomy => "holonomy",
            Command::Conjugacy => "conjugacy",
            Command::Cycles => "cycles",
            Command::Metric => "metric",
        }
    }
}

// independent random streams, so adding samples to one stage leaves the others unchanged
const STREAM_BUNCHING: u64 = 1;
const STREAM_PAIRS: u64 = 2;
const STREAM_PROPERTIES: u64 = 3;
const STREAM_INTERTWINING: u64 = 4;
const STREAM_CENTERS: u64 = 5;
const STREAM_METRIC: u64 = 6;

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    manifest: RunManifest,
}

impl<'a> Run<'a> {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stream);
        rng
    }

    fn stage<T>(&mut self, stage: &'static str, f: impl FnOnce() -> holonomy_core::Result<T>) -> Result<T, LabError> {
        let start = Instant::now();
        let out = f();
        self.time(stage, start);
        out.map_err(|source| LabError::Stage { stage, source })
    }

    /// Adds the time since `start` to `stage`; repeated calls accumulate.
    fn time(&mut self, stage: &str, start: Instant) {
        let seconds = start.elapsed().as_secs_f64();
        match self.manifest.timings.iter_mut().find(|t| t.stage == stage) {
            Some(t) => t.seconds += seconds,
            None => self.manifest.timings.push(StageTiming { stage: stage.into(), seconds }),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), LabError> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|source| LabError::Io { path, source })?;
        self.manifest.files.push(FileEntry::new(name, contents.as_bytes()));
        Ok(())
    }

    fn gate(&mut self, g: Gate) {
        self.manifest.gates.push(g);
    }

    fn verdict(&mut self, v: String) {
        self.manifest.verdicts.push(v);
    }

    fn bunching(&mut self, gen: &CocycleGenerator, record: bool) -> Result<BunchingReport, LabError> {
        let mut rng = self.rng(STREAM_BUNCHING);
        let r = self.cfg.fiber.r;
        let rep = self.stage("bunching", || bunching_report(gen, r, &mut rng))?;
        if record {
            self.manifest.bunching = Some(BunchingFlags {
                lambda: rep.lambda,
                sigma: rep.sigma,
                beta: rep.beta,
                theta: rep.theta,
                e1: rep.e1_ok,
                e3: rep.e3_ok,
                e3prime: rep.e3prime_ok,
            });
        }
        Ok(rep)
    }

    fn solver<'g>(&mut self, gen: &'g CocycleGenerator, rep: &BunchingReport) -> Result<HolonomySolver<'g>, LabError> {
        let hcfg = self.cfg.holonomy_config();
        self.stage("holonomy", || HolonomySolver::new(gen, rep, hcfg))
    }

    fn lattice(&self) -> impl Iterator<Item = TorusPoint> {
        let m = self.cfg.grid.base_resolution;
        (0..m * m).map(move |idx| TorusPoint::new((idx / m) as f64 / m as f64, (idx % m) as f64 / m as f64))
    }

    fn fiber_ts(&self) -> Vec<f64> {
        let k = self.cfg.grid.fiber_samples;
        (0..k).map(|j| j as f64 / k as f64).collect()
    }
}

/// Runs `command` and writes its outputs into `out`, which is created if missing.
///
/// Gate failures are reported through [`RunManifest::passed`], not as errors.
pub fn run_experiment(cfg: &ExperimentConfig, command: Command, out: &Path) -> Result<RunManifest, LabError> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|source| LabError::Io { path: out.to_path_buf(), source })?;
    let start = Instant::now();
    let mut run = Run { cfg, out, manifest: RunManifest::new(command.name(), cfg.clone()) };
    match command {
        Command::Synth => synth(&mut run)?,
        Command::Holonomy => holonomy(&mut run)?,
        Command::Conjugacy => conjugacy(&mut run)?,
        Command::Cycles => cycles(&mut run)?,
        Command::Metric => metric(&mut run)?,
    }
    let summary = summary_table(&run.manifest.gates).to_csv();
    run.write("summary.csv", &summary)?;
    let report = emit_report(&run.manifest);
    run.write("report.txt", &report)?;
    run.manifest.wall_seconds = start.elapsed().as_secs_f64();
    let manifest = run.manifest;
    let path = out.join("manifest.toml");
    fs::write(&path, manifest.to_toml()).map_err(|source| LabError::Io { path, source })?;
    Ok(manifest)
}

fn synth(run: &mut Run) -> Result<(), LabError> {
    let cfg = run.cfg;
    let a = cfg.generator_a()?;
    let b = cfg.generator_b()?;
    let ts = run.fiber_ts();
    let points: Vec<TorusPoint> = run.lattice().collect();

    let mut table = Table::new(&["cocycle", "x1", "x2", "t", "image", "log_deriv"]);
    for (label, gen) in [("a", Some(&a)), ("b", b.as_ref())] {
        let Some(gen) = gen else { continue };
        for &x in &points {
            let map = run.stage("synth", || gen.factor(x))?;
            for &t in &ts {
                let (v, l) = map.eval_log(t);
                table.push_mixed(&[label], &[x.x1(), x.x2(), t, v, l]);
            }
        }
    }
    run.write("generator.csv", &table.to_csv())?;

    let mut bt = Table::new(&["cocycle", "name", "value"]);
    for (label, gen) in [("a", Some(&a)), ("b", b.as_ref())] {
        let Some(gen) = gen else { continue };
        let rep = run.bunching(gen, label == "a")?;
        let bools = |ok: bool| if ok { 1.0 } else { 0.0 };
        let rows = [
            ("lambda", rep.lambda),
            ("sigma", rep.sigma),
            ("beta", rep.beta),
            ("holder_constant", rep.holder_constant.unwrap_or(f64::NAN)),
            ("theta", rep.theta),
            ("q", rep.q),
            ("r", rep.r),
            ("rho", rep.rho),
            ("eta", rep.eta_fit.map_or(f64::NAN, |f| f.eta)),
            ("k_const", rep.eta_fit.map_or(f64::NAN, |f| f.k_const)),
            ("e1", bools(rep.e1_ok)),
            ("e3", bools(rep.e3_ok)),
            ("e3prime", bools(rep.e3prime_ok)),
        ];
        for (name, v) in rows {
            bt.push(vec![label.into(), name.into(), fmt_f64(v)]);
        }
        if label == "a" {
            run.gate(Gate::flag("bunching_e1", rep.e1_ok));
        }
    }
    run.write("bunching.csv", &bt.to_csv())?;

    // the synthesized family is evaluated in closed form; this recomputes it on the grid
    if let (Some(b), Some(phi)) = (&b, &cfg.phi) {
        let n = a.grid_size();
        let tol = cfg.tolerances.inversion;
        let worst = run.stage("synth", || {
            points.iter().try_fold(0.0f64, |m, &x| {
                let fx = a.base.apply_f(x, 1);
                let phi_inv = invert(&phi.diffeo(x, n)?, tol)?;
                let rebuilt = compose(&phi.diffeo(fx, n)?, &compose(&b.value(x)?, &phi_inv)?)?;
                Ok(m.max(dist_c0(&a.value(x)?, &rebuilt, tol)?.1))
            })
        })?;
        run.gate(Gate::at_most("synthesis", worst, cfg.gates.synthesis));
    }
    Ok(())
}

fn holonomy(run: &mut Run) -> Result<(), LabError> {
    let cfg = run.cfg;
    let a = cfg.generator_a()?;
    let rep = run.bunching(&a, true)?;
    let solver = run.solver(&a, &rep)?;
    let half = 0.5 * a.base.r_loc();

    let mut rng = run.rng(STREAM_PAIRS);
    let mut table = Table::new(&[
        "side",
        "x1",
        "x2",
        "ell",
        "truncation",
        "measured_theta",
        "fitted_theta",
        "tail_bound",
        "dC0_to_Id",
    ]);
    let (mut max_theta, mut max_window, mut max_tail) = (0.0f64, 0.0f64, 0.0f64);
    for side in [Side::Stable, Side::Unstable] {
        for _ in 0..cfg.samples.pairs {
            let x = TorusPoint::random(&mut rng);
            let ell = rng.gen_range(-half..half);
            let h = run.stage("holonomy", || solver.local(x, side, ell))?;
            max_theta = max_theta.max(h.fitted_theta);
            max_window = max_window.max(h.measured_theta);
            max_tail = max_tail.max(h.tail_bound);
            table.push(vec![
                side.label().into(),
                fmt_f64(x.x1()),
                fmt_f64(x.x2()),
                fmt_f64(ell),
                h.truncation.to_string(),
                fmt_f64(h.measured_theta),
                fmt_f64(h.fitted_theta),
                fmt_f64(h.tail_bound),
                fmt_f64(h.dist_to_id()),
            ]);
        }
    }
    run.write("holonomy.csv", &table.to_csv())?;
        let theta_gate = Gate::at_most("holonomy_theta", max_theta, rep.theta + cfg.gates.theta_margin);
    let tail_gate = Gate::at_most("holonomy_tail", max_tail, cfg.tolerances.holonomy);
    run.verdict(format!("largest stopping-window ratio {max_window:.4}, bunching rate {:.4}", rep.theta));
    run.gate(theta_gate);
    run.gate(tail_gate);

    let spec = PropertySamples {
        triples: cfg.samples.triples,
        h2_pairs: cfg.samples.h2_pairs,
        h2_max_n: cfg.samples.h2_max_n,
        ..PropertySamples::default()
    };
    let mut rng = run.rng(STREAM_PROPERTIES);
    let props = run.stage("properties", || holonomy_property_residuals(&solver, &spec, &mut rng))?;
    let g = &cfg.gates;
    run.gate(Gate::at_most("h1_composition", props.h1_composition, g.h1));
    run.gate(Gate::at_most("h1_inverse", props.h1_inverse, g.h1));
    run.gate(Gate::at_most("h2", props.h2, g.h2));
    if props.h3_slope.is_finite() {
        run.gate(Gate::at_least("h3_slope", props.h3_slope, g.h3_slope));
    } else {
        run.verdict("H3 not fitted: every sampled holonomy is the identity".into());
    }
    let mut modulus = Table::new(&["delta", "omega"]);
    for &(d, w) in &props.h5_modulus {
        modulus.push_mixed(&[], &[d, w]);
    }
    run.write("holonomy_modulus.csv", &modulus.to_csv())?;
    Ok(())
}

/// The cycle whose weights under `A` and `B` differ most in size.
fn worst_mismatch(ca: &[CycleRecord], cb: &[CycleRecord]) -> Option<(CycleRecord, CycleRecord)> {
    ca.iter()
        .zip(cb)
        .max_by(|p, q| (p.0.obstruction - p.1.obstruction).abs().total_cmp(&(q.0.obstruction - q.1.obstruction).abs()))
        .map(|(a, b)| (*a, *b))
}

fn cycle_rows(table: &mut Table, label: &str, cycles: &[CycleRecord]) {
    for c in cycles {
        table.push(vec![
            label.into(),
            fmt_f64(c.center.x1()),
            fmt_f64(c.center.x2()),
            fmt_f64(c.scale),
            fmt_f64(c.obstruction),
            fmt_f64(c.error_bound),
            c.obstructed().to_string(),
        ]);
    }
}

const CYCLE_HEADER: [&str; 7] = ["cocycle", "x1", "x2", "scale", "obstruction", "error_bound", "obstructed"];

fn centers(run: &Run) -> Vec<TorusPoint> {
    let mut rng = run.rng(STREAM_CENTERS);
    std::iter::once(TorusPoint::ORIGIN)
        .chain((0..run.cfg.samples.cycle_centers).map(|_| TorusPoint::random(&mut rng)))
        .collect()
}

fn conjugacy(run: &mut Run) -> Result<(), LabError> {
    let cfg = run.cfg;
    let a = cfg.generator_a()?;
    let b = cfg.generator_b()?.ok_or_else(|| LabError::ConfigInvalid {
        path: "cocycle.b".into(),
        msg: "the conjugacy command needs a partner cocycle".into(),
    })?;
    let rep_a = run.bunching(&a, true)?;
    let rep_b = run.bunching(&b, false)?;
    let sa = run.solver(&a, &rep_a)?;
    let sb = run.solver(&b, &rep_b)?;
    let n = a.grid_size();
    let x0 = TorusPoint::ORIGIN;
    let phi_x0 = match &cfg.phi {
        Some(phi) => run.stage("conjugacy", || FieldValue::from_map(&phi.at(x0), n))?,
        None => FieldValue::identity(n),
    };
    let opts = FieldOptions {
        resolution: cfg.grid.base_resolution,
        max_leg: None,
        spot_checks: cfg.samples.spot_checks,
    };

    let start = Instant::now();
    let built = build_conjugacy(&sa, Partner::Cocycle(&sb), x0, phi_x0, opts);
    run.time("conjugacy", start);
    let (field, checks) = match built {
        Ok(v) => v,
        Err(Error::PathIndependenceViolated { residual, bound }) => {
            let cs = centers(run);
            let ca = run.stage("cycles", || cycle_scan(&sa, &cs, &CYCLE_SCALES))?;
            let cb = run.stage("cycles", || cycle_scan(&sb, &cs, &CYCLE_SCALES))?;
            let mut table = Table::new(&CYCLE_HEADER);
            cycle_rows(&mut table, "a", &ca);
            cycle_rows(&mut table, "b", &cb);
            run.write("cycles.csv", &table.to_csv())?;
            let mut v = format!(
                "Obstructed: path independence violated, residual {residual:.3e} against bound {bound:.3e}"
            );
            if let Some((wa, wb)) = worst_mismatch(&ca, &cb) {
                v.push_str(&format!(
                    "; worst cycle at {} scale {:+.3}: |w_A| = {:.3e}, |w_B| = {:.3e}",
                    wa.center, wa.scale, wa.obstruction, wb.obstruction
                ));
            }
            run.verdict(v);
            let g = cfg.gates.path_independence;
            run.gate(Gate::at_most("path_independence", residual, g));
            return Ok(());
        }
        Err(source) => return Err(LabError::Stage { stage: "conjugacy", source }),
    };

    let mut pi = Table::new(&["x1", "x2", "y1", "y2", "residual", "bound"]);
    for c in &checks {
        pi.push_mixed(&[], &[c.x.x1(), c.x.x2(), c.y.x1(), c.y.x2(), c.residual, c.bound]);
    }
    run.write("path_independence.csv", &pi.to_csv())?;
    let pi_max = checks.iter().fold(0.0f64, |m, c| m.max(c.residual));

    let residual = run.stage("conjugacy", || conjugacy_residual(&sa, Partner::Cocycle(&sb), &field))?;
    let truth: Option<Vec<f64>> = run
        .cfg
        .phi
        .as_ref()
        .map(|phi| (0..field.len()).map(|idx| field.value(idx).dist_to_map(&phi.at(field.point(idx)))).collect());
    let ts = run.fiber_ts();
    let mut points = Table::new(&["x1", "x2", "error", "conjugacy_residual", "ground_truth_dist"]);
    let mut values = Table::new(&["x1", "x2", "t", "phi"]);
    for idx in 0..field.len() {
        let x = field.point(idx);
        let v = field.value(idx);
        let gt = truth.as_ref().map_or(f64::NAN, |t| t[idx]);
        points.push_mixed(&[], &[x.x1(), x.x2(), v.error, residual.per_point[idx], gt]);
        for &t in &ts {
            values.push_mixed(&[], &[x.x1(), x.x2(), t, v.value.apply(t)]);
        }
    }
    run.write("conjugacy_points.csv", &points.to_csv())?;
    run.write("conjugacy_field.csv", &values.to_csv())?;

    let spec = IntertwiningSamples { pairs: cfg.samples.intertwining_pairs, truncate_a: false };
    let mut rng = run.rng(STREAM_INTERTWINING);
    let inter = run.stage("intertwining", || intertwining_residual(&sa, Partner::Cocycle(&sb), &field, spec, &mut rng))?;

    let g = &cfg.gates;
    if let Some(t) = &truth {
        run.gate(Gate::at_most("ground_truth", t.iter().fold(0.0, |m: f64, d| m.max(*d)), g.ground_truth));
    }
    run.gate(Gate::at_most("conjugacy", residual.max, g.conjugacy));
    run.gate(Gate::at_most("intertwining", inter.max, g.intertwining));
    run.gate(Gate::at_most("path_independence", pi_max, g.path_independence));
    Ok(())
}

fn cycles(run: &mut Run) -> Result<(), LabError> {
    let cfg = run.cfg;
    let a = cfg.generator_a()?;
    let rep = run.bunching(&a, true)?;
    let sa = run.solver(&a, &rep)?;
    let n = a.grid_size();
    let cs = centers(run);
    let scan = run.stage("cycles", || cycle_scan(&sa, &cs, &CYCLE_SCALES))?;
    let mut table = Table::new(&CYCLE_HEADER);
    cycle_rows(&mut table, "a", &scan);
    run.write("cycles.csv", &table.to_csv())?;
    run.gate(Gate::flag("cycles_unobstructed", scan.iter().all(|c| !c.obstructed())));

    let opts = FieldOptions {
        resolution: cfg.grid.base_resolution,
        max_leg: None,
        spot_checks: cfg.samples.spot_checks,
    };
    let x0 = TorusPoint::ORIGIN;
    let phi_x0 = match &cfg.phi {
        Some(phi) => run.stage("reduction", || FieldValue::from_map(&phi.at(x0), n))?,
        None => FieldValue::identity(n),
    };
    let reduction = run.stage("reduction", || constant_reduction(&sa, x0, phi_x0, opts))?;
    match reduction {
        Reduction::Reduced { b_const, field, .. } => {
            let mut bt = Table::new(&["t", "b_const"]);
            for t in run.fiber_ts() {
                bt.push_mixed(&[], &[t, b_const.value.apply(t)]);
            }
            run.write("reduction.csv", &bt.to_csv())?;
            run.verdict(format!(
                "Reduced: constant value at d_C0 {:.3e} from the identity, certified error {:.3e}",
                b_const.dist_to_id(),
                b_const.error
            ));
            let partner = Partner::Constant(&b_const.value);
            let spec = IntertwiningSamples { pairs: cfg.samples.intertwining_pairs, truncate_a: false };
            let mut rng = run.rng(STREAM_INTERTWINING);
            let pp = run.stage("reduction", || intertwining_residual(&sa, partner, &field, spec, &mut rng))?;
            let res = run.stage("reduction", || conjugacy_residual(&sa, partner, &field))?;
            let g = &cfg.gates;
            run.gate(Gate::at_most("reduction_holonomy", pp.max, g.reduction));
            run.gate(Gate::at_most("reduction_conjugacy", res.max, g.conjugacy));
        }
        Reduction::Obstructed { worst, .. } => {
            run.verdict(format!(
                "Obstructed: worst cycle at {} scale {:+.3}, weight {:.3e} against error bound {:.3e}",
                worst.center, worst.scale, worst.obstruction, worst.error_bound
            ));
            run.gate(Gate::flag("constant_reduction", false));
        }
    }
    Ok(())
}

/// `max_x sup_t |log ρ_x − oracle_x − c|` over the spread, with `c` the mean difference.
fn oracle_relative(fam: &MetricFamily, oracle: impl Fn(TorusPoint, f64) -> f64) -> f64 {
    let mut diffs = Vec::new();
    for idx in 0..fam.len() {
        let x = fam.point(idx);
        for (j, l) in fam.log_rho(idx).iter().enumerate() {
            diffs.push(l - oracle(x, fam.fiber_point(j)));
        }
    }
    let c = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.iter().fold(0.0f64, |m, d| m.max((d - c).abs())) / fam.spread()
}

fn metric(run: &mut Run) -> Result<(), LabError> {
    let cfg = run.cfg;
    let a = cfg.generator_a()?;
    let opts = MetricOptions {
        resolution: cfg.grid.metric_resolution,
        fiber_n: cfg.grid.metric_fiber,
        n_avg: cfg.averaging.n,
        ..MetricOptions::default()
    };
    let start = Instant::now();
    let built = build_invariant_metric(&a, opts);
    run.time("metric", start);
    let fam = match built {
        Ok(f) => f,
        Err(Error::Unbounded { detail }) => {
            run.verdict(format!("Unbounded: {detail}"));
            run.gate(Gate::flag("bounded", false));
            return Ok(());
        }
        Err(source) => return Err(LabError::Stage { stage: "metric", source }),
    };

    let mut table = Table::new(&["x1", "x2", "t", "log_rho"]);
    let mut heat = Table::new(&["x1", "x2", "log_rho_min", "log_rho_max"]);
    for idx in 0..fam.len() {
        let x = fam.point(idx);
        let logs = fam.log_rho(idx);
        for (j, &l) in logs.iter().enumerate() {
            table.push_mixed(&[], &[x.x1(), x.x2(), fam.fiber_point(j), l]);
        }
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        heat.push_mixed(&[], &[x.x1(), x.x2(), lo, hi]);
    }
    run.write("metric.csv", &table.to_csv())?;
    run.write("metric_heatmap.csv", &heat.to_csv())?;

    let rep = run.bunching(&a, true)?;
    let solver = run.solver(&a, &rep)?;
    let spec = MetricSamples { holonomy_pairs: cfg.samples.metric_holonomy_pairs, ..MetricSamples::default() };
    let mut rng = run.rng(STREAM_METRIC);
    let res = run.stage("metric", || metric_residuals(&fam, &solver, &spec, &mut rng))?;
    let g = &cfg.gates;
    run.gate(Gate::at_most("telescoping_gap", res.telescoping_gap, g.telescoping));
    run.gate(Gate::at_most("metric_telescoping", (res.isometry - res.telescoping_bound).abs(), g.telescoping));
    run.gate(Gate::at_most("metric_holonomy", res.holonomy_relative, g.metric_relative));
    run.verdict(format!(
        "invariance residual {:.3e}, telescoping bound {:.3e} at N = {}",
        res.isometry,
        res.telescoping_bound,
        fam.n_avg()
    ));

    // a rotation-valued inner cocycle preserves Lebesgue, so ρ_x = (Φ_x)_* Leb up to a constant
    if let Some((inner, phi)) = a.family.ground_truth() {
        if inner.is_rotation_valued() {
            let rel = oracle_relative(&fam, |x, t| 2.0 * phi.at(x).inverse().eval_log(t).1);
            run.gate(Gate::at_most("metric_oracle", rel, g.metric_relative));
        }
    }
    Ok(())
}
