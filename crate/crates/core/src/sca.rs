//! Alternating accuracy/resource loop.
//!
//! Each iteration first re-optimizes the local accuracy `eta` (together with
//! `tau_l` and `tau_h`) for fixed resources, then re-optimizes all resources for fixed
//! `eta` through a convex inner approximation of the exact constraints built
//! at the current point. Every accepted iterate is feasible for the exact
//! problem and never increases the completion time.

use crate::model::{
    achievable_rate, check_feasibility, energy_breakdown, total_completion_time, Allocation, ConstraintKind, Mode,
    ModelError, ProblemInstance,
};
use crate::surrogates::{
    add_linear, BilinearLower, BilinearSquareUpper, BilinearUpper, Denominator, FdmaRateLower, NomaRateLower,
    RatioUpper, Slot, SurrogateError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use wpfl_solver::{solve, Arg, ConvexProgram, Expr, SolveStatus, SolverError, SolverOptions, SolverResult};

/// `eta` is kept inside `[ETA_MIN, ETA_MAX]` by every subproblem.
pub const ETA_MIN: f64 = 1e-4;
pub const ETA_MAX: f64 = 1.0 - 1e-4;
/// Starting local accuracy of the constructive initialization.
pub const ETA_INIT: f64 = 0.5;
/// Harvest-time headroom of the constructive initialization.
pub const HARVEST_MARGIN: f64 = 1.05;
/// Times the initialization may halve transmit powers to meet a source cap.
pub const MAX_TX_HALVINGS: usize = 30;
/// Relative tolerance used when accepting iterates against the exact problem.
pub const ACCEPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScaError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error("no feasible point: {detail}")]
    Infeasible { binding: ConstraintKind, detail: String },
    #[error("anchor leaves device {device} a negative energy margin ({margin:e} J) for training")]
    AnchorInfeasible { device: usize, margin: f64 },
    #[error("iteration {iteration}: {source}")]
    Solver { iteration: usize, source: SolverError },
}

/// Variables held at fixed values for the whole run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Frozen {
    pub tau_s: Option<f64>,
    pub eta: Option<f64>,
    pub beam_power: Option<Vec<f64>>,
    pub bandwidth: Option<Vec<f64>>,
}

impl Frozen {
    pub fn none() -> Self {
        Self::default()
    }

    fn apply(&self, alloc: &mut Allocation) {
        if let Some(t) = self.tau_s {
            alloc.tau_s = t;
        }
        if let Some(e) = self.eta {
            alloc.eta = e;
        }
        if let Some(p) = &self.beam_power {
            alloc.beam_power = p.clone();
        }
        if let (Some(b), Some(slot)) = (&self.bandwidth, alloc.bandwidth.as_mut()) {
            slot.clone_from(b);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Relative objective change that ends the loop.
    pub eps: f64,
    pub max_iter: usize,
    /// Seeds a ±10 % multiplicative jitter of the initial point when set.
    pub seed: Option<u64>,
    /// The accuracy step runs on every `accuracy_every`-th iteration.
    pub accuracy_every: usize,
    pub solver: SolverOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { eps: 1e-3, max_iter: 100, seed: None, accuracy_every: 1, solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    IterationCap,
}

/// Outcome of one subproblem solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub status: SolveStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    /// False when the solver point was rejected and the anchor kept.
    pub accepted: bool,
}

impl StepDiagnostics {
    fn from_result(r: &SolverResult, accepted: bool) -> Self {
        Self {
            status: r.status,
            kkt_residual: r.kkt_residual,
            iterations: r.iterations,
            wall_time_s: r.wall_time_s,
            accepted,
        }
    }

    fn skipped() -> Self {
        Self { status: SolveStatus::Optimal, kkt_residual: 0.0, iterations: 0, wall_time_s: 0.0, accepted: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Point the surrogates of this iteration were built at.
    pub anchor: Allocation,
    pub allocation: Allocation,
    pub objective: f64,
    pub accuracy: Option<StepDiagnostics>,
    pub resource: StepDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub mode: Mode,
    pub initial: Allocation,
    pub initial_objective: f64,
    pub iterations: Vec<IterationRecord>,
    pub status: RunStatus,
}

impl Trace {
    pub fn final_allocation(&self) -> &Allocation {
        self.iterations.last().map_or(&self.initial, |r| &r.allocation)
    }

    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map_or(self.initial_objective, |r| r.objective)
    }

    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }

    /// Objective sequence including the initial point.
    pub fn objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective).chain(self.iterations.iter().map(|r| r.objective)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// One row per iterate, starting with the initial point as `k = 0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,objective,eta,tau_h,tau_s,tau_l,tau_c\n");
        let rows = std::iter::once((0, &self.initial, self.initial_objective))
            .chain(self.iterations.iter().map(|r| (r.k, &r.allocation, r.objective)));
        for (k, a, o) in rows {
            let _ = writeln!(out, "{k},{o},{},{},{},{},{}", a.eta, a.tau_h, a.tau_s, a.tau_l, a.tau_c);
        }
        out
    }
}

fn objective(instance: &ProblemInstance, alloc: &Allocation) -> Result<f64, ScaError> {
    Ok(total_completion_time(alloc, &instance.learning)?)
}

/// Sets `tau_l`, `tau_c` and `tau_h` to the smallest values that make the
/// rest of `alloc` feasible (times `HARVEST_MARGIN` for `tau_h`), moving beam
/// power around when the source energy cap binds and beams are not frozen.
fn complete_times(instance: &ProblemInstance, alloc: &mut Allocation, beams_frozen: bool) -> Result<(), ScaError> {
    let sys = &instance.system;
    let eta_loc = instance.learning.local_rounds(alloc.eta);
    alloc.tau_l = instance
        .devices
        .iter()
        .zip(&alloc.cpu_freq)
        .map(|(d, f)| eta_loc * d.c * d.r * alloc.tau_s / f)
        .fold(0.0, f64::max);
    let mut tau_c: f64 = 0.0;
    for n in 0..instance.n() {
        let rate = achievable_rate(instance, alloc, n)?;
        tau_c = tau_c.max(sys.s_model / rate);
    }
    alloc.tau_c = tau_c;
    alloc.tau_h = 1.0;
    let e = energy_breakdown(instance, alloc);
    // harvest time each device needs per watt of beam power
    let need: Vec<f64> =
        (0..instance.n()).map(|n| e.consumed(n) / (sys.phi * instance.devices[n].h)).collect();
    let tau_for = |p: &[f64]| need.iter().zip(p).map(|(w, p)| w / p).fold(0.0, f64::max);
    alloc.tau_h = HARVEST_MARGIN * tau_for(&alloc.beam_power);
    if !sys.e_max.is_finite() {
        return Ok(());
    }
    let source = |a: &Allocation| a.beam_power.iter().sum::<f64>() * a.tau_h;
    if source(alloc) <= sys.e_max {
        return Ok(());
    }
    let minimum: f64 = need.iter().sum();
    if beams_frozen || minimum > sys.e_max {
        return Err(ScaError::Infeasible {
            binding: ConstraintKind::SourceEnergy,
            detail: format!(
                "the source energy cap E_max = {:e} J is below the {:e} J the devices need per round",
                sys.e_max,
                if beams_frozen { source(alloc) / HARVEST_MARGIN } else { minimum }
            ),
        });
    }
    // beam power proportional to need equalizes harvest times and minimizes source energy
    alloc.beam_power = need.iter().map(|w| sys.p0 * w / minimum).collect();
    let margin = HARVEST_MARGIN.min(sys.e_max / minimum);
    alloc.tau_h = margin * minimum / sys.p0;
    Ok(())
}

/// Constructive feasible starting point honouring `frozen`.
pub fn init_with(instance: &ProblemInstance, frozen: &Frozen, jitter: Option<u64>) -> Result<Allocation, ScaError> {
    instance.validate()?;
    let sys = &instance.system;
    let n = instance.n() as f64;
    let min_rate = instance.devices.iter().map(|d| d.r).fold(f64::INFINITY, f64::min);
    let mut alloc = Allocation {
        beam_power: vec![sys.p0 / n; instance.n()],
        tx_power: instance.devices.iter().map(|d| d.p_max).collect(),
        cpu_freq: instance.devices.iter().map(|d| d.f_min).collect(),
        bandwidth: (sys.mode == Mode::Fdma).then(|| vec![sys.b / n; instance.n()]),
        tau_h: 0.0,
        tau_s: sys.d0 / min_rate,
        tau_l: 0.0,
        tau_c: 0.0,
        eta: ETA_INIT,
    };
    frozen.apply(&mut alloc);
    if let Some(seed) = jitter {
        jitter_point(instance, &mut alloc, frozen, seed);
    }
    // under a tight source cap, quieter uploads cost less energy per bit
    let mut halvings = 0;
    loop {
        let mut trial = alloc.clone();
        match complete_times(instance, &mut trial, frozen.beam_power.is_some()) {
            Ok(()) => {
                alloc = trial;
                break;
            }
            Err(ScaError::Infeasible { binding: ConstraintKind::SourceEnergy, .. }) if halvings < MAX_TX_HALVINGS => {
                alloc.tx_power.iter_mut().for_each(|p| *p *= 0.5);
                halvings += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let report = check_feasibility(instance, &alloc, 1e-12);
    if let Some(worst) = report.violations().next() {
        return Err(ScaError::Infeasible {
            binding: worst.kind,
            detail: format!("initial point violates {} by {:e}", worst.kind, worst.relative_violation()),
        });
    }
    Ok(alloc)
}

/// Feasible starting point of the unconstrained scheme.
pub fn init_feasible(instance: &ProblemInstance) -> Result<Allocation, ScaError> {
    init_with(instance, &Frozen::none(), None)
}

fn jitter_point(instance: &ProblemInstance, alloc: &mut Allocation, frozen: &Frozen, seed: u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut wiggle = || rng.random_range(0.9..=1.1);
    for (p, d) in alloc.tx_power.iter_mut().zip(&instance.devices) {
        *p = (*p * wiggle()).min(d.p_max);
    }
    for (f, d) in alloc.cpu_freq.iter_mut().zip(&instance.devices) {
        *f = (*f * wiggle()).clamp(d.f_min, d.f_max);
    }
    if frozen.eta.is_none() {
        alloc.eta = (alloc.eta * wiggle()).clamp(ETA_MIN, ETA_MAX);
    }
    if frozen.beam_power.is_none() {
        alloc.beam_power.iter_mut().for_each(|p| *p *= wiggle());
        let total: f64 = alloc.beam_power.iter().sum();
        let p0 = instance.system.p0;
        if total > p0 {
            alloc.beam_power.iter_mut().for_each(|p| *p *= p0 / total);
        }
    }
    if frozen.bandwidth.is_none() {
        if let Some(b) = alloc.bandwidth.as_mut() {
            b.iter_mut().for_each(|v| *v *= wiggle());
            let total: f64 = b.iter().sum();
            let cap = instance.system.b;
            if total > cap {
                b.iter_mut().for_each(|v| *v *= cap / total);
            }
        }
    }
}

/// Result of the accuracy subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyUpdate {
    pub eta: f64,
    pub tau_l: f64,
    pub tau_h: f64,
    pub objective: f64,
    pub diagnostics: StepDiagnostics,
}

/// Energy each device spends outside training and harvesting.
fn fixed_spend(instance: &ProblemInstance, alloc: &Allocation) -> Vec<f64> {
    instance
        .devices
        .iter()
        .enumerate()
        .map(|(n, d)| alloc.tx_power[n] * alloc.tau_c + (d.q_s + d.q_r) * d.r * alloc.tau_s)
        .collect()
}

/// Energy left for training at each device once the other phases are paid.
pub fn training_margins(instance: &ProblemInstance, alloc: &Allocation) -> Vec<f64> {
    let phi = instance.system.phi;
    let spend = fixed_spend(instance, alloc);
    instance
        .devices
        .iter()
        .enumerate()
        .map(|(n, d)| phi * alloc.tau_h * alloc.beam_power[n] * d.h - spend[n])
        .collect()
}

/// Convexified accuracy subproblem at `anchor`, over `(eta, tau_l, tau_h)`.
///
/// The harvest time rides along because it is the only resource that pays
/// for local training linearly once the beam powers are fixed.
pub fn accuracy_program(instance: &ProblemInstance, anchor: &Allocation) -> Result<ConvexProgram, ScaError> {
    let lp = &instance.learning;
    let sys = &instance.system;
    let margins = training_margins(instance, anchor);
    if let Some((device, &margin)) = margins.iter().enumerate().find(|(_, m)| **m < 0.0) {
        return Err(ScaError::AnchorInfeasible { device, margin });
    }
    let spend = fixed_spend(instance, anchor);
    let eta0 = anchor.eta.clamp(ETA_MIN, ETA_MAX);
    let iota = anchor.tau_s + anchor.tau_c;
    let tau_l0 = anchor.tau_l.max(1e-12);
    let tau_h0 = anchor.tau_h.max(1e-12);
    let scale = 1.0 / objective(instance, anchor)?.max(f64::MIN_POSITIVE);
    let mut p = ConvexProgram::new();
    let eta = p.add_variable("eta", ETA_MIN, ETA_MAX, eta0);
    let tau = p.add_variable("tau_l", 0.0, f64::INFINITY, tau_l0);
    let harvest = p.add_variable("tau_h", 0.0, f64::INFINITY, tau_h0);
    let j = RatioUpper::new(tau_l0, eta0, Denominator::OneMinus)?;
    let jh = RatioUpper::new(tau_h0, eta0, Denominator::OneMinus)?;
    p.set_objective(
        Expr::new()
            .reciprocal(scale * lp.a * iota, Arg::one_minus(eta))
            .terms_from(j.expr(scale * lp.a, Slot::Var(tau), Slot::Var(eta)))
            .terms_from(jh.expr(scale * lp.a, Slot::Var(harvest), Slot::Var(eta))),
    );
    for (n, d) in instance.devices.iter().enumerate() {
        let f = anchor.cpu_freq[n];
        let work = lp.nu * d.c * d.r * anchor.tau_s;
        let gain = sys.phi * anchor.beam_power[n] * d.h;
        p.add_constraint(
            format!("energy[{n}]"),
            Expr::new().neg_log(work * d.zeta * f * f, Arg::var(eta)).linear(harvest, -gain).constant(spend[n]),
        );
        p.add_constraint(format!("local time[{n}]"), Expr::new().neg_log(work / f, Arg::var(eta)).linear(tau, -1.0));
    }
    if sys.e_max.is_finite() {
        let total: f64 = anchor.beam_power.iter().sum();
        p.add_constraint("source energy", Expr::new().linear(harvest, total).constant(-sys.e_max));
    }
    Ok(p)
}

/// Re-optimizes `(eta, tau_l, tau_h)` for the other resources of `anchor`;
/// keeps the anchor values when the solve does not improve the exact objective.
pub fn accuracy_step(
    instance: &ProblemInstance,
    anchor: &Allocation,
    opts: &SolverOptions,
) -> Result<AccuracyUpdate, ScaError> {
    let current = objective(instance, anchor)?;
    let keep = |diagnostics| AccuracyUpdate {
        eta: anchor.eta,
        tau_l: anchor.tau_l,
        tau_h: anchor.tau_h,
        objective: current,
        diagnostics,
    };
    if instance.learning.a == 0.0 {
        return Ok(keep(StepDiagnostics::skipped()));
    }
    let program = accuracy_program(instance, anchor)?;
    let start = [anchor.eta.clamp(ETA_MIN, ETA_MAX), anchor.tau_l.max(1e-12), anchor.tau_h.max(1e-12)];
    let result = solve(&program, &start, opts).map_err(|source| ScaError::Solver { iteration: 0, source })?;
    if result.status == SolveStatus::Infeasible {
        return Ok(keep(StepDiagnostics::from_result(&result, false)));
    }
    let mut trial = anchor.clone();
    trial.eta = result.point[0];
    trial.tau_l = result.point[1];
    trial.tau_h = result.point[2];
    let value = objective(instance, &trial)?;
    if value <= current && check_feasibility(instance, &trial, ACCEPT_TOL).feasible {
        Ok(AccuracyUpdate {
            eta: trial.eta,
            tau_l: trial.tau_l,
            tau_h: trial.tau_h,
            objective: value,
            diagnostics: StepDiagnostics::from_result(&result, true),
        })
    } else {
        Ok(keep(StepDiagnostics::from_result(&result, false)))
    }
}

/// Which program coordinates hold each decision variable.
#[derive(Debug, Clone)]
struct Layout {
    beam: Vec<Slot>,
    tx: Vec<Slot>,
    cpu: Vec<Slot>,
    bandwidth: Vec<Slot>,
    tau_h: Slot,
    tau_s: Slot,
    tau_l: Slot,
    tau_c: Slot,
}

impl Layout {
    fn read(&self, x: &[f64], anchor: &Allocation) -> Allocation {
        let values = |slots: &[Slot]| slots.iter().map(|s| s.value(x)).collect::<Vec<_>>();
        Allocation {
            beam_power: values(&self.beam),
            tx_power: values(&self.tx),
            cpu_freq: values(&self.cpu),
            bandwidth: anchor.bandwidth.as_ref().map(|_| values(&self.bandwidth)),
            tau_h: self.tau_h.value(x),
            tau_s: self.tau_s.value(x),
            tau_l: self.tau_l.value(x),
            tau_c: self.tau_c.value(x),
            eta: anchor.eta,
        }
    }
}

trait ExprExt {
    fn terms_from(self, other: Expr) -> Expr;
}

impl ExprExt for Expr {
    fn terms_from(mut self, other: Expr) -> Expr {
        self.constant += other.constant;
        self.terms.extend(other.terms);
        self
    }
}

fn var_scale(v: f64, fallback: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        v
    } else {
        fallback
    }
}

/// Convex resource subproblem at a fixed anchor.
#[derive(Debug, Clone)]
pub struct ResourceProgram {
    pub program: ConvexProgram,
    /// Program coordinates of the anchor.
    pub start: Vec<f64>,
    layout: Layout,
    anchor: Allocation,
}

impl ResourceProgram {
    /// Allocation at program point `x`; frozen values and `eta` come from the anchor.
    pub fn allocation(&self, x: &[f64]) -> Allocation {
        self.layout.read(x, &self.anchor)
    }
}

/// Convex resource subproblem at `anchor` for fixed `anchor.eta`.
pub fn resource_program(
    instance: &ProblemInstance,
    anchor: &Allocation,
    frozen: &Frozen,
) -> Result<ResourceProgram, ScaError> {
    let sys = &instance.system;
    let lp = &instance.learning;
    let n_dev = instance.n();
    let eta_loc = lp.local_rounds(anchor.eta);
    let mut p = ConvexProgram::new();
    let mut start = Vec::new();
    let mut add = |p: &mut ConvexProgram, name: String, lo: f64, hi: f64, x0: f64, fallback: f64| {
        start.push(x0);
        Slot::Var(p.add_variable(name, lo, hi, var_scale(x0, fallback)))
    };

    let beam: Vec<Slot> = match &frozen.beam_power {
        Some(v) => v.iter().map(|&x| Slot::Fixed(x)).collect(),
        None => (0..n_dev)
            .map(|n| add(&mut p, format!("P[{n}]"), 0.0, sys.p0, anchor.beam_power[n], sys.p0 / n_dev as f64))
            .collect(),
    };
    let tx: Vec<Slot> = (0..n_dev)
        .map(|n| {
            let d = &instance.devices[n];
            add(&mut p, format!("p[{n}]"), 0.0, d.p_max, anchor.tx_power[n], d.p_max)
        })
        .collect();
    let cpu: Vec<Slot> = (0..n_dev)
        .map(|n| {
            let d = &instance.devices[n];
            add(&mut p, format!("f[{n}]"), d.f_min, d.f_max, anchor.cpu_freq[n], d.f_max)
        })
        .collect();
    let bandwidth: Vec<Slot> = match (sys.mode, &frozen.bandwidth) {
        (Mode::Noma, _) => Vec::new(),
        (Mode::Fdma, Some(v)) => v.iter().map(|&x| Slot::Fixed(x)).collect(),
        // a lone device always takes the whole band
        (Mode::Fdma, None) if n_dev == 1 => vec![Slot::Fixed(sys.b)],
        (Mode::Fdma, None) => {
            let b0 = anchor.bandwidth.as_ref().expect("FDMA allocation carries bandwidth");
            (0..n_dev).map(|n| add(&mut p, format!("b[{n}]"), 0.0, sys.b, b0[n], sys.b / n_dev as f64)).collect()
        }
    };
    let min_rate = instance.devices.iter().map(|d| d.r).fold(f64::INFINITY, f64::min);
    let tau_h = add(&mut p, "tau_h".into(), 0.0, f64::INFINITY, anchor.tau_h, 1.0);
    let tau_s = match frozen.tau_s {
        Some(t) => Slot::Fixed(t),
        None => add(&mut p, "tau_s".into(), sys.d0 / min_rate, f64::INFINITY, anchor.tau_s, sys.d0 / min_rate),
    };
    let tau_l = add(&mut p, "tau_l".into(), 0.0, f64::INFINITY, anchor.tau_l, 1.0);
    let tau_c = add(&mut p, "tau_c".into(), 0.0, f64::INFINITY, anchor.tau_c, 1.0);
    let layout = Layout { beam, tx, cpu, bandwidth, tau_h, tau_s, tau_l, tau_c };

    // round time relative to the anchor's
    let round0 = anchor.round_time();
    let mut obj = Expr::new();
    for slot in [tau_h, tau_s, tau_l, tau_c] {
        obj = add_linear(obj, 1.0 / round0, slot);
    }
    p.set_objective(obj);

    let s_tilde = sys.s_model * std::f64::consts::LN_2;
    for (n, d) in instance.devices.iter().enumerate() {
        let (beam_n, tx_n, cpu_n) = (layout.beam[n], layout.tx[n], layout.cpu[n]);
        // energy balance
        let mut row = add_linear(Expr::new(), (d.q_r + d.q_s) * d.r, tau_s);
        let train = eta_loc * d.zeta * d.c * d.r;
        row = match tau_s {
            Slot::Fixed(t) => row.square(train * t, cpu_n.arg()),
            Slot::Var(_) => {
                row.terms_from(BilinearSquareUpper::new(anchor.tau_s, anchor.cpu_freq[n])?.expr(train, tau_s, cpu_n))
            }
        };
        row = row.terms_from(BilinearUpper::new(anchor.tx_power[n], anchor.tau_c)?.expr(1.0, tx_n, tau_c));
        let gain = sys.phi * d.h;
        row = match beam_n {
            Slot::Fixed(pw) => add_linear(row, -gain * pw, tau_h),
            Slot::Var(_) => row.terms_from(
                BilinearLower::new(anchor.tau_h, anchor.beam_power[n])?.negated_expr(gain, tau_h, beam_n),
            ),
        };
        p.add_constraint(format!("energy[{n}]"), row);

        // local training time
        let cycles = eta_loc * d.c * d.r;
        let row = match tau_s {
            Slot::Fixed(t) => Expr::new().reciprocal(cycles * t, cpu_n.arg()),
            Slot::Var(_) => {
                RatioUpper::new(anchor.tau_s, anchor.cpu_freq[n], Denominator::Direct)?.expr(cycles, tau_s, cpu_n)
            }
        };
        p.add_constraint(format!("local time[{n}]"), add_linear(row, -1.0, tau_l));

        // upload
        let row = match sys.mode {
            Mode::Fdma => {
                let bw = layout.bandwidth[n];
                let base = Expr::new().reciprocal(s_tilde, tau_c.arg());
                match bw {
                    Slot::Fixed(b) => base.neg_log(b, Arg { var: tx_n.var(), offset: 1.0, slope: d.h / (sys.n0 * b) }),
                    Slot::Var(_) => {
                        let b0 = anchor.bandwidth.as_ref().expect("FDMA allocation carries bandwidth")[n];
                        base.terms_from(FdmaRateLower::new(b0, anchor.tx_power[n], d.h, sys.n0)?.negated_expr(1.0, bw, tx_n))
                    }
                }
            }
            Mode::Noma => {
                let gains: Vec<f64> = instance.devices.iter().map(|d| d.h).collect();
                let s_hat = s_tilde / sys.b;
                let bound = NomaRateLower::new(n, &anchor.tx_power, anchor.tau_c, &gains, sys.n0, sys.b)?;
                Expr::new().constant(s_hat).terms_from(bound.negated_expr(1.0, &layout.tx, tau_c))
            }
        };
        p.add_constraint(format!("upload[{n}]"), row);
    }

    if frozen.beam_power.is_none() {
        let row = layout.beam.iter().fold(Expr::new().constant(-sys.p0), |e, &s| add_linear(e, 1.0, s));
        p.add_constraint("beam budget", row);
    }
    if sys.mode == Mode::Fdma && frozen.bandwidth.is_none() && n_dev > 1 {
        let row = layout.bandwidth.iter().fold(Expr::new().constant(-sys.b), |e, &s| add_linear(e, 1.0, s));
        p.add_constraint("bandwidth", row);
    }
    if sys.e_max.is_finite() {
        let mut row = Expr::new().constant(-sys.e_max);
        for (n, &slot) in layout.beam.iter().enumerate() {
            row = match slot {
                Slot::Fixed(pw) => add_linear(row, pw, tau_h),
                Slot::Var(_) => row.terms_from(BilinearUpper::new(anchor.beam_power[n], anchor.tau_h)?.expr(1.0, slot, tau_h)),
            };
        }
        p.add_constraint("source energy", row);
    }
    Ok(ResourceProgram { program: p, start, layout, anchor: anchor.clone() })
}

/// Result of the resource subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceUpdate {
    pub allocation: Allocation,
    pub objective: f64,
    pub diagnostics: StepDiagnostics,
}

/// Text dump of the resource subproblem built at `anchor`.
pub fn dump_resource_program(instance: &ProblemInstance, anchor: &Allocation, frozen: &Frozen) -> Result<String, ScaError> {
    Ok(resource_program(instance, anchor, frozen)?.program.dump())
}

/// Re-optimizes every non-frozen resource for fixed `anchor.eta`.
///
/// The solver point is accepted only if it is feasible for the exact problem
/// and does not raise the completion time; otherwise the anchor is returned.
pub fn resource_step(
    instance: &ProblemInstance,
    anchor: &Allocation,
    frozen: &Frozen,
    opts: &SolverOptions,
) -> Result<ResourceUpdate, ScaError> {
    let current = objective(instance, anchor)?;
    let rp = resource_program(instance, anchor, frozen)?;
    let result = solve(&rp.program, &rp.start, opts).map_err(|source| ScaError::Solver { iteration: 0, source })?;
    let keep = |r: &SolverResult| ResourceUpdate {
        allocation: anchor.clone(),
        objective: current,
        diagnostics: StepDiagnostics::from_result(r, false),
    };
    if result.status == SolveStatus::Infeasible {
        return Ok(keep(&result));
    }
    let trial = rp.allocation(&result.point);
    let value = objective(instance, &trial)?;
    if value <= current && check_feasibility(instance, &trial, ACCEPT_TOL).feasible {
        Ok(ResourceUpdate { allocation: trial, objective: value, diagnostics: StepDiagnostics::from_result(&result, true) })
    } else {
        Ok(keep(&result))
    }
}

/// Runs the alternating loop from the constructive initialization.
pub fn run(instance: &ProblemInstance, opts: &RunOptions) -> Result<Trace, ScaError> {
    run_frozen(instance, &Frozen::none(), opts)
}

/// [`run`] with some variables held fixed.
pub fn run_frozen(instance: &ProblemInstance, frozen: &Frozen, opts: &RunOptions) -> Result<Trace, ScaError> {
    let initial = init_with(instance, frozen, opts.seed)?;
    let initial_objective = objective(instance, &initial)?;
    let mut trace =
        Trace { mode: instance.system.mode, initial: initial.clone(), initial_objective, iterations: Vec::new(), status: RunStatus::IterationCap };
    let mut current = initial;
    let mut prev = initial_objective;
    let every = opts.accuracy_every.max(1);
    for k in 1..=opts.max_iter {
        let accuracy = if frozen.eta.is_none() && (k - 1) % every == 0 {
            let up = accuracy_step(instance, &current, &opts.solver).map_err(|e| with_iteration(e, k))?;
            current.eta = up.eta;
            current.tau_l = up.tau_l;
            current.tau_h = up.tau_h;
            Some(up.diagnostics)
        } else {
            None
        };
        let anchor = current.clone();
        let up = resource_step(instance, &anchor, frozen, &opts.solver).map_err(|e| with_iteration(e, k))?;
        current = up.allocation;
        trace.iterations.push(IterationRecord {
            k,
            anchor,
            allocation: current.clone(),
            objective: up.objective,
            accuracy,
            resource: up.diagnostics,
        });
        let change = if prev == 0.0 { 0.0 } else { (up.objective - prev).abs() / prev };
        prev = up.objective;
        if change <= opts.eps {
            trace.status = RunStatus::Converged;
            break;
        }
    }
    Ok(trace)
}

fn with_iteration(e: ScaError, k: usize) -> ScaError {
    match e {
        ScaError::Solver { source, .. } => ScaError::Solver { iteration: k, source },
        other => other,
    }
}
