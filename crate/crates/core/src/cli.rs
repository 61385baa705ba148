//! Command-line front end. Exit codes: 0 success, 1 failed verification or
//! unmet `--require-settled`, 2 invalid arguments or parameters.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Complex;
use serde_json::json;

use crate::cartpole::{nondimensionalize, CartpoleController, PhysicalCart};
use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::linear_compare::{reference_gains, pole_place, LinearGains};
use crate::sim::{
    classify, integrate, sweep, CartLoop, ControllerSet, QuarticLoop, SweepGrid, SweepSettings,
    DEFAULT_DT, DEFAULT_HOLD, DEFAULT_MAX_CELLS, DEFAULT_SETTLE_EPS, DEFAULT_T_MAX_CART, DEFAULT_T_MAX_QUARTIC,
};
use crate::verify::{run_suite, Suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "matchctl", version, about = "Matching controllers for underactuated mechanical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SystemArg {
    Cartpole,
    Quartic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ControllerArg {
    Nonlinear,
    Linear,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ControllersArg {
    Both,
    Linear,
    Nonlinear,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one closed-loop trajectory and write it as CSV.
    Simulate {
        #[arg(long, value_enum, default_value = "cartpole")]
        system: SystemArg,
        #[arg(long, value_enum, default_value = "nonlinear")]
        controller: ControllerArg,
        #[arg(long, allow_hyphen_values = true)]
        theta0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        thetadot0: Option<f64>,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        x0: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        xdot0: f64,
        #[arg(long, allow_hyphen_values = true)]
        y0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        ydot0: Option<f64>,
        #[arg(long, allow_hyphen_values = true, default_value_t = DEFAULT_DT)]
        dt: f64,
        /// defaults to 20 for the cart and 500 for the quartic system
        #[arg(long)]
        tmax: Option<f64>,
        /// controller parameters as JSON
        #[arg(long)]
        params: Option<PathBuf>,
        /// linear gains `k_theta,k_x,k_thetadot,k_xdot`
        #[arg(long, allow_hyphen_values = true)]
        gains: Option<String>,
        /// CSV destination; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
        /// exit 1 unless the trajectory settles
        #[arg(long)]
        require_settled: bool,
    },
    /// Classify a grid of initial conditions under the linear and nonlinear laws.
    Sweep {
        #[arg(long, allow_hyphen_values = true, default_value = "-1.5:1.5:100")]
        theta0: Axis,
        #[arg(long, allow_hyphen_values = true, default_value = "-1.5:1.5:100")]
        thetadot0: Axis,
        #[arg(long, value_enum, default_value = "both")]
        controllers: ControllersArg,
        #[arg(long, allow_hyphen_values = true, default_value_t = DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = DEFAULT_T_MAX_CART)]
        tmax: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_CELLS)]
        max_cells: usize,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        gains: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run numerical self-checks and print residuals as JSON.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = crate::verify::DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Scaled coupling constant and validity report for a physical cart.
    Gains {
        #[arg(long = "M", default_value_t = PhysicalCart::lab().base_mass)]
        base_mass: f64,
        #[arg(long = "m", default_value_t = PhysicalCart::lab().pendulum_mass)]
        pendulum_mass: f64,
        #[arg(long = "l", default_value_t = PhysicalCart::lab().length)]
        length: f64,
        #[arg(long = "I", default_value_t = PhysicalCart::lab().inertia)]
        inertia: f64,
        #[arg(long = "g", default_value_t = PhysicalCart::lab().gravity)]
        gravity: f64,
    },
    /// Linear gains placing the closed-loop poles.
    Poleplace {
        #[arg(long, default_value_t = crate::cartpole::DEFAULT_B)]
        b: f64,
        /// four poles, e.g. `-5,-6,-2,-2` or `-1+2i,-1-2i,-3,-4`
        #[arg(long, allow_hyphen_values = true)]
        poles: String,
    },
}

/// Parses and runs a command line, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate {
            system,
            controller,
            theta0,
            thetadot0,
            x0,
            xdot0,
            y0,
            ydot0,
            dt,
            tmax,
            params,
            gains,
            out,
            require_settled,
        } => {
            let traj = match system {
                SystemArg::Cartpole => {
                    if y0.is_some() || ydot0.is_some() {
                        return Err(Error::InvalidArgument("--y0/--ydot0 apply to the quartic system only".into()));
                    }
                    let ctrl = load_controller(params.as_deref())?;
                    let s0 = [theta0.unwrap_or(0.0), x0, thetadot0.unwrap_or(0.0), xdot0];
                    let tmax = tmax.unwrap_or(DEFAULT_T_MAX_CART);
                    match controller {
                        ControllerArg::Nonlinear => integrate(&CartLoop::nonlinear(ctrl), s0, dt, tmax)?,
                        ControllerArg::Linear => {
                            integrate(&CartLoop::linear(load_gains(gains.as_deref())?, ctrl), s0, dt, tmax)?
                        }
                        ControllerArg::None => integrate(&CartLoop::open(ctrl), s0, dt, tmax)?,
                    }
                }
                SystemArg::Quartic => {
                    if theta0.is_some() || thetadot0.is_some() || params.is_some() || gains.is_some() {
                        return Err(Error::InvalidArgument(
                            "--theta0/--thetadot0/--params/--gains apply to the cartpole system only".into(),
                        ));
                    }
                    let controlled = match controller {
                        ControllerArg::Nonlinear => true,
                        ControllerArg::None => false,
                        ControllerArg::Linear => {
                            return Err(Error::InvalidArgument(
                                "the quartic linearization is not controllable; use nonlinear or none".into(),
                            ))
                        }
                    };
                    let s0 = [x0, y0.unwrap_or(0.0), xdot0, ydot0.unwrap_or(0.0)];
                    integrate(&QuarticLoop { controlled }, s0, dt, tmax.unwrap_or(DEFAULT_T_MAX_QUARTIC))?
                }
            };
            let outcome = classify(&traj, DEFAULT_SETTLE_EPS, DEFAULT_HOLD);
            write_output(out.as_deref(), |w| traj.write_csv(w))?;
            let summary = json!({
                "controller": traj.meta.controller,
                "dt": traj.meta.dt,
                "samples": traj.samples.len(),
                "final_state": traj.last().state,
                "outcome": outcome,
            });
            print_summary(out.is_some(), &summary)?;
            Ok(if require_settled && !outcome.is_settled() { EXIT_FAILED } else { EXIT_OK })
        }
        Command::Sweep { theta0, thetadot0, controllers, dt, tmax, max_cells, params, gains, out } => {
            let ctrl = load_controller(params.as_deref())?;
            let k = load_gains(gains.as_deref())?;
            let set = match controllers {
                ControllersArg::Both => ControllerSet::Both,
                ControllersArg::Linear => ControllerSet::Linear,
                ControllersArg::Nonlinear => ControllerSet::Nonlinear,
            };
            let settings = SweepSettings { dt, t_max: tmax, max_cells, ..SweepSettings::default() };
            let result = sweep(SweepGrid { theta0, thetadot0 }, settings, &ctrl, &k, set)?;
            write_output(out.as_deref(), |w| result.write_csv(w))?;
            print_summary(out.is_some(), &json!({ "grid": result.grid, "stats": result.stats() }))?;
            Ok(EXIT_OK)
        }
        Command::Verify { suite, samples, seed, tol, params } => {
            if samples == 0 || !(tol > 0.0) {
                return Err(Error::InvalidArgument("need --samples > 0 and --tol > 0".into()));
            }
            let ctrl = load_controller(params.as_deref())?;
            let report = run_suite(suite, &ctrl, &VerifyOptions { samples, seed, tol })?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.pass { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Gains { base_mass, pendulum_mass, length, inertia, gravity } => {
            let cart = PhysicalCart { base_mass, pendulum_mass, length, inertia, gravity };
            let b = nondimensionalize(&cart)?;
            let ctrl = CartpoleController { b, ..CartpoleController::reference() };
            let v = ctrl.validity();
            let report = json!({
                "b": (b * 1000.0).round() / 1000.0,
                "b_exact": b,
                "time_scale": cart.time_scale(),
                "controller": {
                    "sigma0": ctrl.sigma0, "mu0": ctrl.mu0, "r": ctrl.r, "w1": ctrl.w1, "phi": ctrl.phi.to_string(),
                },
                "validity": { "ok": v.ok, "cos2_bound": v.cos2_bound, "theta_max": v.theta_max },
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(EXIT_OK)
        }
        Command::Poleplace { b, poles } => {
            let requested = parse_poles(&poles)?;
            let k = pole_place(b, &requested)?;
            let eig = k.closed_loop_eigenvalues(b);
            let as_pairs = |v: &[Complex<f64>]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
            let report = json!({
                "b": b,
                "gains": k,
                "requested_poles": as_pairs(&requested),
                "achieved_eigenvalues": as_pairs(&eig),
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(EXIT_OK)
        }
    }
}

fn load_controller(params: Option<&Path>) -> Result<CartpoleController> {
    match params {
        Some(p) => CartpoleController::from_json_file(p),
        None => Ok(CartpoleController::reference()),
    }
}

fn load_gains(spec: Option<&str>) -> Result<LinearGains> {
    let Some(spec) = spec else { return Ok(reference_gains()) };
    let k: Vec<f64> = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("bad gains {spec:?}")))?;
    let k: [f64; 4] =
        k.try_into().map_err(|_| Error::InvalidArgument(format!("expected four gains, got {spec:?}")))?;
    if k.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite gain in {spec:?}")));
    }
    Ok(LinearGains::from_array(k))
}

/// Parses `a`, `bi`, `a+bi` or `a-bi` (also with `j`).
pub fn parse_complex(s: &str) -> Result<Complex<f64>> {
    let bad = || Error::InvalidArgument(format!("bad complex number {s:?}"));
    let t = s.trim().replace(' ', "");
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return t.parse::<f64>().map(|re| Complex::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    // split at the last sign that is not leading and not an exponent sign
    let split = (1..bytes.len()).rev().find(|&i| {
        (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
    });
    let imag = |p: &str| -> Result<f64> {
        match p {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => p.parse().map_err(|_| bad()),
        }
    };
    let z = match split {
        Some(i) => Complex::new(body[..i].parse().map_err(|_| bad())?, imag(&body[i..])?),
        None => Complex::new(0.0, imag(body)?),
    };
    if z.re.is_finite() && z.im.is_finite() { Ok(z) } else { Err(bad()) }
}

pub fn parse_poles(s: &str) -> Result<[Complex<f64>; 4]> {
    let v = s.split(',').map(parse_complex).collect::<Result<Vec<_>>>()?;
    v.try_into().map_err(|_| Error::InvalidArgument(format!("expected four poles, got {s:?}")))
}

fn write_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// JSON summary goes to stdout when the data went to a file, else to stderr.
fn print_summary(data_in_file: bool, summary: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    if data_in_file {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}
