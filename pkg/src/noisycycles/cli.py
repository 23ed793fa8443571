"""Command line front end: CSV in, CSV/JSON out.

Subcommands
-----------
simulate
    Integrate one of the oscillator models (full SDE, linear phase and
    deviation model, its leading-order variant, or the reduced model of a
    decomposed cycle) and write trajectory tables.
analyze
    Estimate an autocovariance, averaged periodogram, smoothed density, or
    kurtosis from a column of a CSV file.
decompose
    Detect a limit cycle of a preset (or plugged-in) ODE and export the
    cycle together with its comoving frame.
formula
    Evaluate a closed-form autocovariance or spectral-density template on
    a grid.
fit
    Least-squares fit of a template to a curve file; writes JSON.
validate
    Run the acceptance suite and print a pass/fail table.

Exit status is 0 on success, 1 on usage errors (bad flags, malformed
input files), 2 on numerical failures (divergence, no convergence).

A JSON config file (``--config``) may supply any long flag; values given
on the command line win.  The default seed may also be set through the
``NOISYCYCLES_SEED`` environment variable.  Heavy imports happen after
flag validation, so ``--threads`` can cap the numerical thread pools of
the whole run.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

__all__ = ["RunConfig", "build_parser", "run", "main"]

SEED_ENV_VAR = "NOISYCYCLES_SEED"

_FMT = "%.17g"

_HOPF_DEFAULTS = {"r": 1.0, "alpha": math.tau, "lambda_": math.tau}


@dataclass
class RunConfig:
    """A validated invocation: subcommand plus its merged option set."""

    subcommand: str
    options: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None


class _Parser(argparse.ArgumentParser):
    # the contract reserves status 2 for numerical failures, so usage
    # errors (argparse's default 2) are remapped to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_hopf_flags(p):
    p.add_argument("--r", type=float, help="cycle radius (default 1)")
    p.add_argument("--alpha", type=float, help="angular frequency on the cycle")
    p.add_argument("--alpha0", type=float, help="rotation rate off the cycle (default alpha)")
    p.add_argument("--lambda", dest="lambda_", type=float, help="radial relaxation rate")
    p.add_argument("--sigma", type=float, help="noise amplitude")
    p.add_argument("--nsr", type=float, help="noise-to-signal ratio; alternative to --sigma")


def build_parser() -> _Parser:
    top = _Parser(prog="noisycycles", description=__doc__.splitlines()[0])
    top.add_argument("--config", help="JSON file supplying defaults for any long flag")
    top.add_argument("--threads", type=int,
                     help="cap numerical thread pools (give before the subcommand)")
    sub = top.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    sub.required = True

    p = sub.add_parser("simulate", help="integrate an oscillator model", parents=[])
    p.add_argument(
        "--model",
        choices=["hopf-exact", "hopf-linear", "hopf-leading", "reduced"],
    )
    _add_hopf_flags(p)
    p.add_argument("--system", choices=["hopf", "van-der-pol"],
                   help="preset ODE for --model reduced (default hopf)")
    p.add_argument("--mu", type=float, help="van der Pol stiffness (default 1)")
    p.add_argument("--dt", type=float, help="integrator step (default 1e-3)")
    p.add_argument("--steps", type=int, help="number of steps")
    p.add_argument("--periods", type=float, help="horizon in cycle periods; alternative to --steps")
    p.add_argument("--paths", type=int, help="ensemble size (default 1)")
    p.add_argument("--seed", type=int, help=f"RNG seed (default ${SEED_ENV_VAR} or 0)")
    p.add_argument("--record-every", dest="record_every", type=int,
                   help="thin the output to every k-th step (default: about 100 rows per period)")
    p.add_argument("--initial", help="comma separated initial state")
    p.add_argument("--grid-size", dest="grid_size", type=int,
                   help="cycle grid for --model reduced (default 1024)")
    p.add_argument("--substeps", type=int, help="frame substeps for --model reduced")
    p.add_argument("--scheme", choices=["strong-rk15", "euler-maruyama"],
                   help="integration scheme for hopf-exact (default strong-rk15)")
    p.add_argument("--output", help="trajectory CSV; multi-path runs get _NNN suffixes")

    p = sub.add_parser("decompose", help="detect a limit cycle and build its frame")
    p.add_argument("--system", choices=["hopf", "van-der-pol"])
    p.add_argument("--plugin", help="module.path:object naming an SdeSystem (or factory)")
    _add_hopf_flags(p)
    p.add_argument("--mu", type=float, help="van der Pol stiffness (default 1)")
    p.add_argument("--guess", help="comma separated starting point (presets have defaults)")
    p.add_argument("--grid-size", dest="grid_size", type=int, help="samples along the cycle (default 1024)")
    p.add_argument("--substeps", type=int, help="frame integration substeps per grid cell")
    p.add_argument("--transient", type=float, help="settle time before cycle detection")
    p.add_argument("--output", help="combined cycle and frame CSV")

    p = sub.add_parser("analyze", help="estimate statistics from a CSV column")
    p.add_argument("--what", choices=["acv", "psd", "kde", "kurtosis"])
    p.add_argument("--input", help="CSV file with the series")
    p.add_argument("--column", help="column name (default: first non-time column)")
    p.add_argument("--dt", type=float, help="sample spacing override (else from the t column)")
    p.add_argument("--max-lag", dest="max_lag", type=float, help="largest lag for --what acv")
    p.add_argument("--segments", type=int,
                   help="split the series into k segments and average periodograms (default 1)")
    p.add_argument("--grid-size", dest="grid_size", type=int, help="kde grid size (default 512)")
    p.add_argument("--bandwidth", type=float, help="kde bandwidth (default: Silverman)")
    p.add_argument("--output", help="estimate CSV (default: stdout)")

    p = sub.add_parser("formula", help="evaluate a closed-form template")
    p.add_argument("--template", choices=["acv", "psd"])
    _add_hopf_flags(p)
    p.add_argument("--umax", type=float, help="largest lag (acv; default 5 periods)")
    p.add_argument("--du", type=float, help="lag spacing (default umax/500)")
    p.add_argument("--wmax", type=float, help="largest frequency (psd; default 4 alpha)")
    p.add_argument("--dw", type=float, help="frequency spacing (default wmax/500)")
    p.add_argument("--output", help="curve CSV (default: stdout)")

    p = sub.add_parser("fit", help="fit a template to a curve file")
    p.add_argument("--target", choices=["acv", "psd"])
    p.add_argument("--input", help="curve CSV (x in the first column, y in the second)")
    p.add_argument("--xcol", help="x column name (default: first column)")
    p.add_argument("--ycol", help="y column name (default: second column)")
    p.add_argument("--initial", help="starting point r,alpha,lambda,sigma (default: automatic)")
    p.add_argument("--output", help="FitResult JSON (default: stdout)")

    p = sub.add_parser("validate", help="run the acceptance suite")
    p.add_argument("--nino", help="monthly Nino 3.4 anomaly CSV for the data-dependent check")

    return top


def _load_config_layer(path, parser, namespace):
    """Fill flags absent from the command line with config-file values."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        parser.error(f"{path}: invalid JSON ({exc})")
    if not isinstance(doc, dict):
        parser.error(f"{path}: config must be a JSON object")
    known = set(vars(namespace))
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if dest == "lambda":
            dest = "lambda_"
        if dest not in known:
            parser.error(f"{path}: unknown config key {key!r} for this subcommand")
        if getattr(namespace, dest) is None:
            setattr(namespace, dest, value)


def _floats(text, flag, parser):
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        parser.error(f"{flag} expects comma separated numbers, got {text!r}")


def _require(options, parser, *names):
    for name in names:
        if options.get(name) is None:
            parser.error(f"--{name.rstrip('_').replace('_', '-')} is required here")


def _seed(options):
    if options.get("seed") is not None:
        return int(options["seed"])
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _hopf_params(options, parser):
    """Build model parameters from flags; --sigma and --nsr conflict."""
    from .hopf import HopfParams, sigma_for_nsr

    r = options.get("r")
    alpha = options.get("alpha")
    lam = options.get("lambda_")
    r = _HOPF_DEFAULTS["r"] if r is None else float(r)
    alpha = _HOPF_DEFAULTS["alpha"] if alpha is None else float(alpha)
    lam = _HOPF_DEFAULTS["lambda_"] if lam is None else float(lam)
    alpha0 = alpha if options.get("alpha0") is None else float(options["alpha0"])
    sigma, nsr = options.get("sigma"), options.get("nsr")
    if sigma is not None and nsr is not None:
        parser.error("--sigma and --nsr are mutually exclusive")
    if nsr is not None:
        sigma = sigma_for_nsr(float(nsr), lam, r)
    return HopfParams(
        alpha=alpha, alpha0=alpha0, lambda_=lam, r=r,
        sigma=0.0 if sigma is None else float(sigma),
    )


def _csv_text(labels, columns):
    import numpy as np

    data = np.column_stack(columns)
    lines = [",".join(labels)]
    lines += [",".join(_FMT % v for v in row) for row in data]
    return "\n".join(lines) + "\n"


def _emit_curve(options, xlabel, ylabel, x, y):
    if options.get("output"):
        from .csvio import write_curve

        write_curve(options["output"], xlabel, ylabel, x, y)
    else:
        sys.stdout.write(_csv_text((xlabel, ylabel), (x, y)))


def _indexed(path, k, width):
    root, ext = os.path.splitext(path)
    return f"{root}_{k:0{width}d}{ext}"


def _auto_thin(period, dt):
    return max(1, int(round(period / (100.0 * dt))))


def _steps(options, period, dt, parser):
    steps, periods = options.get("steps"), options.get("periods")
    if (steps is None) == (periods is None):
        parser.error("exactly one of --steps / --periods is required")
    if steps is None:
        steps = int(round(float(periods) * period / dt))
    return int(steps)


def _preset_system(options, parser):
    """Noise-free ODE for cycle detection, with its default starting point."""
    from .presets import van_der_pol

    name = options.get("system") or "hopf"
    if name == "van-der-pol":
        mu = 1.0 if options.get("mu") is None else float(options["mu"])
        if options.get("nsr") is not None:
            parser.error("--nsr needs the hopf preset; give --sigma for van-der-pol")
        return van_der_pol(mu), (2.0, 0.0)
    from .hopf import HopfParams, hopf_system

    p = _hopf_params(options, parser)
    quiet = HopfParams(alpha=p.alpha, alpha0=p.alpha0, lambda_=p.lambda_, r=p.r, sigma=0.0)
    return hopf_system(quiet), (0.3 * p.r, 0.0)


def _cmd_simulate(options, parser):
    _require(options, parser, "model", "output")
    from .sde import IntegratorConfig, Scheme, integrate_ensemble, path_seed

    model = options["model"]
    dt = 1e-3 if options.get("dt") is None else float(options["dt"])
    paths = 1 if options.get("paths") is None else int(options["paths"])
    if paths < 1:
        parser.error(f"--paths must be >= 1, got {paths}")
    seed = _seed(options)
    width = max(3, len(str(paths - 1)))

    if model == "reduced":
        _write_reduced(options, parser, dt, paths, seed, width)
        return
    from .csvio import write_phase_path, write_trajectory
    from .hopf import hopf_system, simulate_hopf_linear

    params = _hopf_params(options, parser)
    period = 2.0 * 3.141592653589793 / params.alpha
    n_steps = _steps(options, period, dt, parser)
    thin = options.get("record_every") or _auto_thin(period, dt)
    initial = None
    if options.get("initial") is not None:
        initial = _floats(options["initial"], "--initial", parser)

    if model == "hopf-exact":
        scheme = Scheme.EULER_MARUYAMA if options.get("scheme") == "euler-maruyama" \
            else Scheme.STRONG_RK15
        config = IntegratorConfig(
            dt=dt, n_steps=n_steps, scheme=scheme, seed=seed,
            initial_state=initial if initial is not None else (params.r, 0.0),
        )
        ens = integrate_ensemble(
            hopf_system(params), config, n_paths=paths, record_every=thin,
            channel_labels=("x", "y"),
        )
        for k, tr in enumerate(ens):
            out = options["output"] if paths == 1 else _indexed(options["output"], k, width)
            write_trajectory(out, tr)
        return

    leading = model == "hopf-leading"
    for k in range(paths):
        config = IntegratorConfig(
            dt=dt, n_steps=n_steps,
            seed=seed if paths == 1 else path_seed(seed, k),
            initial_state=initial if initial is not None else (0.0, 0.0),
        )
        lp = simulate_hopf_linear(
            params, config, leading_order=leading, record_every=thin
        )
        out = options["output"] if paths == 1 else _indexed(options["output"], k, width)
        write_phase_path(out, lp)


def _write_reduced(options, parser, dt, paths, seed, width):
    from .csvio import write_trajectory
    from .frame import build_frame, find_limit_cycle, reconstruct, reduce, simulate_reduced
    from .sde import IntegratorConfig

    sigma, nsr = options.get("sigma"), options.get("nsr")
    if sigma is not None and nsr is not None:
        parser.error("--sigma and --nsr are mutually exclusive")
    if (options.get("system") or "hopf") == "hopf":
        sigma = _hopf_params(options, parser).sigma
    elif sigma is None:
        parser.error("--model reduced needs --sigma (or --nsr with the hopf preset)")

    system, guess = _preset_system(options, parser)
    grid_size = 1024 if options.get("grid_size") is None else int(options["grid_size"])
    substeps = 1 if options.get("substeps") is None else int(options["substeps"])
    cycle = find_limit_cycle(system, guess, grid_size=grid_size)
    frame = build_frame(cycle, substeps=substeps)
    model = reduce(cycle, frame, float(sigma))

    n_steps = _steps(options, cycle.period, dt, parser)
    thin = options.get("record_every") or _auto_thin(cycle.period, dt)
    initial = None
    if options.get("initial") is not None:
        initial = _floats(options["initial"], "--initial", parser)
    config = IntegratorConfig(
        dt=dt, n_steps=n_steps, seed=seed,
        initial_state=initial if initial is not None else tuple([0.0] * cycle.dimension),
    )
    taus, z0s = simulate_reduced(
        model, cycle, config, record_every=thin,
        n_paths=None if paths == 1 else paths,
    )
    if paths == 1:
        taus, z0s = taus[None], z0s[None]
    labels = ("x", "v") if (options.get("system") or "hopf") == "van-der-pol" else ("x", "y")
    for k in range(paths):
        tr = reconstruct(
            cycle, frame, taus[k], z0s[k], dt=dt * thin, channel_labels=labels
        )
        out = options["output"] if paths == 1 else _indexed(options["output"], k, width)
        write_trajectory(out, tr)


def _cmd_decompose(options, parser):
    _require(options, parser, "output")
    from .csvio import write_cycle_frame
    from .frame import build_frame, find_limit_cycle

    if options.get("plugin"):
        system, guess = _load_plugin(options, parser)
    else:
        if not options.get("system"):
            parser.error("--system or --plugin is required")
        system, guess = _preset_system(options, parser)
    if options.get("guess") is not None:
        guess = _floats(options["guess"], "--guess", parser)
    if guess is None:
        parser.error("--guess is required with --plugin")
    grid_size = 1024 if options.get("grid_size") is None else int(options["grid_size"])
    substeps = 1 if options.get("substeps") is None else int(options["substeps"])
    kw = {}
    if options.get("transient") is not None:
        kw["transient_time"] = float(options["transient"])
    cycle = find_limit_cycle(system, guess, grid_size=grid_size, **kw)
    frame = build_frame(cycle, substeps=substeps)
    write_cycle_frame(options["output"], cycle, frame)


def _load_plugin(options, parser):
    import importlib

    from .sde import SdeSystem

    spec = options["plugin"]
    module_name, _, attr = spec.partition(":")
    if not attr:
        parser.error(f"--plugin expects module.path:object, got {spec!r}")
    try:
        obj = getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as exc:
        parser.error(f"cannot load plugin {spec!r}: {exc}")
    if callable(obj) and not isinstance(obj, SdeSystem):
        obj = obj()
    if not isinstance(obj, SdeSystem):
        parser.error(f"plugin {spec!r} is not an SdeSystem")
    return obj, None


def _cmd_analyze(options, parser):
    _require(options, parser, "what", "input")
    from .csvio import read_column

    what = options["what"]
    values, inferred_dt = read_column(options["input"], column=options.get("column"))
    dt = options.get("dt") if options.get("dt") is not None else inferred_dt

    if what in ("acv", "psd") and dt is None:
        parser.error("--dt is required when the file has no uniform t column")

    if what == "acv":
        _require(options, parser, "max_lag")
        from .analysis import sample_acv

        est = sample_acv(values, float(dt), float(options["max_lag"]))
        _emit_curve(options, "lag", "acv", est.lags, est.values)
    elif what == "psd":
        from .analysis import averaged_periodogram

        segments = 1 if options.get("segments") is None else int(options["segments"])
        if segments < 1 or values.size // segments < 2:
            parser.error(f"--segments must cut the series into usable pieces, got {segments}")
        length = values.size // segments
        rows = values[: segments * length].reshape(segments, length)
        est = averaged_periodogram(rows, float(dt))
        _emit_curve(options, "omega", "psd", est.omegas, est.values)
    elif what == "kde":
        from .analysis import kde

        grid_size = 512 if options.get("grid_size") is None else int(options["grid_size"])
        est = kde(values, grid_size=grid_size, bandwidth=options.get("bandwidth"))
        _emit_curve(options, "x", "density", est.grid, est.density)
    else:
        from .analysis import kurtosis

        b2 = kurtosis(values)
        _emit_curve(options, "sample_size", "kurtosis", [float(values.size)], [b2])


def _cmd_formula(options, parser):
    _require(options, parser, "template")
    import numpy as np

    params = _hopf_params(options, parser)
    period = 2.0 * np.pi / params.alpha
    if options["template"] == "acv":
        from .analysis import acv_formula

        umax = 5.0 * period if options.get("umax") is None else float(options["umax"])
        du = umax / 500.0 if options.get("du") is None else float(options["du"])
        u = np.arange(0.0, umax + 0.5 * du, du)
        _emit_curve(options, "lag", "acv", u, acv_formula(params, u))
    else:
        from .analysis import psd_formula

        wmax = 4.0 * params.alpha if options.get("wmax") is None else float(options["wmax"])
        dw = wmax / 500.0 if options.get("dw") is None else float(options["dw"])
        w = np.arange(0.0, wmax + 0.5 * dw, dw)
        _emit_curve(options, "omega", "psd", w, psd_formula(params, w))


def _cmd_fit(options, parser):
    _require(options, parser, "target", "input")
    from .analysis import AcvEstimate, PsdEstimate
    from .csvio import read_curve, write_fit_json
    from .fitting import FitProblem, FitTarget, fit

    x, y, _ = read_curve(
        options["input"], xlabel=options.get("xcol"), ylabel=options.get("ycol")
    )
    target = FitTarget(options["target"])
    curve = AcvEstimate(x, y) if target is FitTarget.ACV else PsdEstimate(x, y)
    initial = None
    if options.get("initial") is not None:
        vals = _floats(options["initial"], "--initial", parser)
        if len(vals) != 4:
            parser.error("--initial expects r,alpha,lambda,sigma")
        from .hopf import HopfParams

        initial = HopfParams(
            alpha=vals[1], alpha0=vals[1], lambda_=vals[2], r=vals[0], sigma=vals[3]
        )
    result = fit(FitProblem(target=target, curve=curve, initial=initial))
    if options.get("output"):
        write_fit_json(options["output"], result)
    else:
        json.dump(result.to_dict(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


def _cmd_validate(options, parser):
    from .validation import run_all

    results = run_all(nino_path=options.get("nino"))
    width = max(len(r.name) for r in results)
    failed = 0
    skipped = 0
    for r in results:
        status = "SKIP" if r.skipped else ("PASS" if r.passed else "FAIL")
        if status == "FAIL":
            failed += 1
        if status == "SKIP":
            skipped += 1
        print(f"{r.index:>3}  {r.name:<{width}}  {status}  {r.detail}")
    ran = len(results) - skipped
    print(f"\n{ran - failed} of {ran} criteria passed" + (f", {skipped} skipped" if skipped else ""))
    return 1 if failed else 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "decompose": _cmd_decompose,
    "analyze": _cmd_analyze,
    "formula": _cmd_formula,
    "fit": _cmd_fit,
    "validate": _cmd_validate,
}


def run(argv=None) -> int:
    parser = build_parser()
    namespace = parser.parse_args(argv)
    if namespace.config:
        _load_config_layer(namespace.config, parser, namespace)

    options = {k: v for k, v in vars(namespace).items() if k not in ("config",)}
    config = RunConfig(subcommand=options.pop("subcommand"), options=options)

    if options.get("threads") is not None:
        n = str(int(options["threads"]))
        # caps pools created after this point; heavy imports are deferred
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = n

    from .exceptions import ConfigError, NumericsError

    try:
        code = _HANDLERS[config.subcommand](config.options, parser)
    except ConfigError as exc:
        print(f"noisycycles {config.subcommand}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"noisycycles {config.subcommand}: error: {exc}", file=sys.stderr)
        return 1
    except NumericsError as exc:
        print(f"noisycycles {config.subcommand}: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0 if code is None else int(code)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
