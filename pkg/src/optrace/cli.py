"""Command-line front end: ``optrace {density,simulate,critical,phase-diagram,psi}``.

Every option can also come from ``--config FILE``: plain ``key=value`` lines
(``#`` comments allowed) where ``key`` is the long option without dashes.
Repeatable options take comma-separated values; flags take true/false.
Options given on the command line replace the file's value.

Exit codes: 0 success (including "no transition"), 2 usage or domain
errors, 3 numerical failures.
"""

import argparse
import math
import sys

import numpy as np

from . import __version__
from . import analytic, convolve, csvio, modality, montecarlo, psi, svg
from .core import CorrelationScale, interior_grid, make_params
from .errors import NumericalError, OptraceError

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


class UsageError(Exception):
    pass


# --- argument parsing -------------------------------------------------------

def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="FILE", help="key=value file with default options")
    p.add_argument("--out", metavar="CSV", help="CSV output path (default: standard output)")
    p.add_argument("--svg", metavar="FILE", help="also write an SVG plot")
    p.add_argument("--threads", type=int, help="worker threads (default: $OPTRACE_THREADS or CPU count)")
    p.add_argument("--seed", type=int, help="random seed (default: fresh, recorded in the output)")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="optrace", description=(
        "Weight densities of two identically distributed options, their "
        "unimodal/bimodal transition and the (mu, 1/chi) phase diagram."))
    parser.add_argument("--version", action="version", version=f"optrace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("density", parents=[common], help="evaluate a weight density on a grid")
    d.add_argument("model", choices=["european", "european-correlated", "asian-mu0",
                                     "asian-neg-mu", "beta-limit"])
    d.add_argument("--alpha", type=float, action="append", help="effective maturity (repeatable)")
    d.add_argument("--chi", type=float, help="correlation scale chi")
    d.add_argument("--mu", type=float, help="drift index")
    d.add_argument("--method", help="asian-neg-mu: exact|approx; beta-limit: closed|convolution")
    d.add_argument("--points", type=int, default=2001, help="grid size on (0, 1), odd")
    d.add_argument("--with-asymptotic", action="store_true",
                   help="asian-mu0: add the large-weight asymptotic form")
    d.set_defaults(func=cmd_density)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo weight histograms")
    s.add_argument("--style", choices=["european", "asian"], default="asian")
    s.add_argument("--mu", type=float, default=0.0)
    s.add_argument("--chi", type=float, help="correlation scale (default: independent)")
    s.add_argument("--alpha", type=float, action="append", help="maturity (repeatable)")
    s.add_argument("--steps", type=int, action="append",
                   help="step count N with alpha = N dt / 2 (repeatable, shared paths)")
    s.add_argument("--dt", type=float, default=0.01, help="step length used with --steps")
    s.add_argument("--n-steps", type=int, default=256, help="steps per path used with --alpha")
    s.add_argument("--paths", type=int, default=1_000_000)
    s.add_argument("--bins", type=int, default=200)
    s.add_argument("--fit", action="store_true", help="append effective-maturity fits")
    s.add_argument("--overlay", action="store_true",
                   help="add the closed-form density and a chi-square test")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("critical", parents=[common], help="critical maturity of a density family")
    c.add_argument("family", choices=["european", "european-correlated", "asian-mu0", "asian-mc"])
    c.add_argument("--chi", type=float)
    c.add_argument("--mu", type=float, default=0.0)
    c.add_argument("--tol", type=float, default=1e-7, help="bisection tolerance in alpha")
    c.add_argument("--paths", type=int, default=1_000_000)
    c.add_argument("--alpha-max", type=float, default=2.5, help="asian-mc: largest maturity")
    c.add_argument("--alpha-step", type=float, default=0.025, help="asian-mc: checkpoint spacing")
    c.add_argument("--n-steps", type=int, default=512, help="asian-mc: steps up to alpha-max")
    c.set_defaults(func=cmd_critical)

    ph = sub.add_parser("phase-diagram", parents=[common], help="sweep the (mu, 1/chi) plane")
    ph.add_argument("--mu", type=float, action="append", help="drift index (repeatable)")
    ph.add_argument("--inv-chi", type=float, action="append", help="1/chi, 0 = independent")
    ph.add_argument("--paths", type=int, default=100_000)
    ph.add_argument("--dt", type=float, default=0.05)
    ph.add_argument("--alpha-max", type=float, default=20.0)
    ph.set_defaults(func=cmd_phase_diagram)

    q = sub.add_parser("psi", parents=[common], help="exact and approximate tau density, mu <= 0")
    q.add_argument("--mu", type=float, default=-1.0)
    q.add_argument("--alpha", type=float, action="append")
    q.add_argument("--tp-min", type=float, default=0.1)
    q.add_argument("--tp-max", type=float, default=1e3)
    q.add_argument("--per-decade", type=int, default=10)
    q.set_defaults(func=cmd_psi)
    return parser


def read_config(path):
    """Parse a ``key=value`` file into an ordered list of (key, value)."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{n}: expected key=value")
            items.append((key.strip().replace("_", "-"), val.strip()))
    return items


def _config_tokens(subparser, items, given):
    actions = {a.option_strings[0]: a for a in subparser._actions if a.option_strings}
    tokens = []
    for key, val in items:
        opt = "--" + key
        if opt not in actions:
            raise UsageError(f"unknown config key {key!r}")
        if opt in given or opt == "--config":
            continue
        act = actions[opt]
        if act.nargs == 0:
            if val.lower() in ("1", "true", "yes", "on"):
                tokens.append(opt)
            elif val.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"config key {key!r} takes true or false")
        elif isinstance(act, argparse._AppendAction):
            for v in val.split(","):
                tokens += [opt, v.strip()]
        else:
            tokens += [opt, val]
    return tokens


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        given = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
        try:
            extra = _config_tokens(sub, read_config(args.config), given)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except UsageError as exc:
            parser.error(str(exc))
        i = argv.index(args.command)
        args = parser.parse_args(argv[:i + 1] + extra + argv[i + 1:])
    return args


# --- output helpers ---------------------------------------------------------

def _emit_table(args, meta, fields, rows):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            csvio.write_table(fh, meta, fields, rows)
    else:
        csvio.write_table(sys.stdout, meta, fields, rows)


def _emit_svg(args, text):
    if args.svg:
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(text)


def _require(cond, message):
    if not cond:
        raise UsageError(message)


def _chi(value):
    return CorrelationScale() if value is None else CorrelationScale(value)


def _seed(args):
    return montecarlo.fresh_seed() if args.seed is None else args.seed


def _label(a):
    return f"alpha={a:g}"


# --- commands ---------------------------------------------------------------

def cmd_density(args):
    model = args.model
    _require(args.points >= 3 and args.points % 2 == 1, "--points must be an odd integer >= 3")
    grid = interior_grid(args.points)
    meta = {"model": model, "version": __version__, "points": args.points}
    series, tails = {}, {}
    alphas = args.alpha or []

    if model == "beta-limit":
        _require(args.mu is not None and args.mu > 0, "beta-limit needs --mu > 0")
        _require(not alphas, "beta-limit takes no --alpha")
        method = args.method or "closed"
        _require(method in ("closed", "convolution"), "beta-limit --method is closed or convolution")
        if method == "closed":
            curve = analytic.beta_curve(args.mu, n=args.points)
            series[f"mu={args.mu:g}"] = (curve.grid, curve.values)
            tails[f"mu={args.mu:g}"] = curve.tail_mass
        else:
            series[f"mu={args.mu:g}"] = (grid, convolve.beta_limit_from_psi(grid, args.mu))
        meta.update(mu=args.mu, method=method)
    else:
        _require(alphas, f"{model} needs at least one --alpha")
        if model in ("european", "european-correlated"):
            _require(model == "european" or args.chi is not None, "european-correlated needs --chi")
            _require(args.mu is None, "the European weight does not depend on --mu")
            chi = _chi(args.chi)
            meta["chi"] = chi.chi
            for a in alphas:
                curve = analytic.european_curve(a, chi, n=args.points)
                series[_label(a)] = (curve.grid, curve.values)
                tails[_label(a)] = curve.tail_mass
        elif model == "asian-mu0":
            _require(args.mu in (None, 0.0), "asian-mu0 is for mu = 0")
            meta["mu"] = 0.0
            for a in alphas:
                curve = analytic.asian_mu0_curve(a, n=args.points)
                series[_label(a)] = (curve.grid, curve.values)
            if args.with_asymptotic:
                right = grid[grid > 0.5]
                w = np.concatenate([1.0 - right[::-1], right])
                for a in alphas:
                    half = analytic.asian_weight_asymptotic(right, a)
                    series["asymptotic " + _label(a)] = (w, np.concatenate([half[::-1], half]))
        else:
            _require(args.mu is not None and args.mu < 0, "asian-neg-mu needs --mu < 0")
            method = args.method or "exact"
            _require(method in ("exact", "approx"), "asian-neg-mu --method is exact or approx")
            meta.update(mu=args.mu, method=method)
            for a in alphas:
                curve = convolve.asian_negative_mu_curve(args.mu, a, method, n=args.points)
                series[_label(a)] = (curve.grid, curve.values)
                tails[_label(a)] = curve.tail_mass
        meta["alpha"] = tuple(alphas)
    for k, v in tails.items():
        if v is not None:
            meta[f"tail_mass[{k.partition('=')[2]}]"] = v

    rows = [(lab, a, b) for lab, (w, p) in series.items() for a, b in zip(w, p)]
    _emit_table(args, meta, ["series", "w", "density"], rows)
    styles = {k: ("dashed" if k.startswith("asymptotic") else "line") for k in series}
    _emit_svg(args, svg.line_plot([(k, w, p, styles[k]) for k, (w, p) in series.items()],
                                  "w", "P(w)", f"{model} weight density"))
    return EXIT_OK


def _closed_form(style, mu, chi, alpha):
    """(cdf on [0, 1] or None, density on (0, 1)) of the simulated weight, if known."""
    if style == "european":
        return (lambda e: analytic.european_weight_cdf(e, alpha, chi),
                lambda w: analytic.correlated_european_weight_density(w, alpha, chi))
    if not chi.independent:
        return None, None
    if mu == 0:
        return None, lambda w: analytic.asian_mu0_weight_density(w, alpha)
    if mu < 0:
        return None, lambda w: convolve.asian_weight_density_negative_mu(
            w, make_params(math.sqrt(2.0), mu=mu), alpha)
    return None, None


def cmd_simulate(args):
    _require(bool(args.alpha) != bool(args.steps), "give either --alpha or --steps")
    _require(args.paths >= 1, "--paths must be positive")
    seed = _seed(args)
    chi = _chi(args.chi)
    hists = []
    if args.alpha:
        for a in args.alpha:
            cfg = montecarlo.WalkConfig(mu=args.mu, chi=chi, n_steps=args.n_steps, alpha_target=a,
                                        n_paths=args.paths, seed=seed, n_bins=args.bins)
            hists.append(montecarlo.run_race(cfg, args.style, args.threads))
    else:
        steps = sorted(set(args.steps))
        cfg = montecarlo.WalkConfig(mu=args.mu, chi=chi, n_steps=steps[-1], dt=args.dt,
                                    n_paths=args.paths, seed=seed, n_bins=args.bins)
        hists = montecarlo.simulate_checkpoints(cfg, [0.5 * n * args.dt for n in steps],
                                                args.style, args.threads)

    meta = {"model": f"mc-{args.style}", "version": __version__, "mu": args.mu, "chi": chi.chi,
            "paths": args.paths, "seed": seed, "bins": args.bins}
    rows, plot = [], []
    for h in hists:
        a = h.params["alpha"]
        lab = _label(a)
        key = f"{a:g}"
        meta[f"n_steps[{key}]"] = h.params["n_steps"]
        meta[f"dt[{key}]"] = h.params["dt"]
        meta[f"rejected[{key}]"] = h.rejected
        m, se = montecarlo.sample_mean(h)
        meta[f"mean[{key}]"] = (m, se)
        dens, err = h.density(), h.density_stderr()
        extra = None
        if args.overlay:
            cdf, pdf = _closed_form(args.style, args.mu, chi, a)
            _require(pdf is not None, "no closed form to overlay for these parameters")
            if cdf is not None:
                extra = np.diff(cdf(h.bin_edges)) / h.widths
                stat, dof, p = montecarlo.chi_square_gof(h, cdf)
                meta[f"gof[{key}].chi2"] = stat
                meta[f"gof[{key}].dof"] = dof
                meta[f"gof[{key}].p"] = p
            else:
                extra = np.asarray(pdf(h.centers), float)
            plot.append(("closed form " + lab, h.centers, extra, "line"))
        if args.fit:
            at, res = montecarlo.fit_effective_maturity(h)
            meta[f"fit[{key}].alpha_tilde"] = at
            meta[f"fit[{key}].residual"] = res
            plot.append(("fit " + lab, h.centers,
                         analytic.european_weight_density(h.centers, at), "dashed"))
        plot.append(("MC " + lab, h.centers, dens, "points"))
        for i in range(len(h.counts)):
            row = [lab, h.bin_edges[i], h.bin_edges[i + 1], int(h.counts[i]), dens[i], err[i]]
            if args.overlay:
                row.append(extra[i])
            rows.append(row)
    fields = ["series", "bin_lo", "bin_hi", "count", "density", "stderr"]
    if args.overlay:
        fields.append("closed_form")
    _emit_table(args, meta, fields, rows)
    _emit_svg(args, svg.line_plot(plot, "w", "P(w)", f"simulated {args.style} weight, mu={args.mu:g}"))
    return EXIT_OK


def cmd_critical(args):
    fam = args.family
    chi = _chi(args.chi)
    meta = {"family": fam, "version": __version__}
    if fam in ("european", "european-correlated"):
        _require(fam == "european" or args.chi is not None, "european-correlated needs --chi")
        hi = 10.0 * max(1.0, analytic.critical_maturity_european(chi))
        est = modality.critical_maturity(
            lambda a: (lambda w: analytic.correlated_european_weight_density(w, a, chi)),
            (0.01, hi), tol=args.tol)
        meta["chi"] = chi.chi
    elif fam == "asian-mu0":
        est = modality.critical_maturity(
            lambda a: (lambda w: analytic.asian_mu0_weight_density(w, a)), (0.5, 4.0),
            tol=max(args.tol, 1e-6))
        meta["mu"] = 0.0
    else:
        seed = _seed(args)
        budget = {"n_paths": args.paths, "alpha_hi": args.alpha_max,
                  "alpha_step": args.alpha_step, "n_steps_max": args.n_steps, "seed": seed}
        est = modality.critical_maturity_mc(args.mu, chi, budget, args.threads)
        meta.update(mu=args.mu, chi=chi.chi, paths=args.paths, seed=seed)
        d = est.details
        _emit_svg(args, svg.line_plot(
            [("criterion", d["alphas"], d["criterion"]),
             ("+2 s.e.", d["alphas"], d["criterion"] + 2 * d["criterion_se"], "dashed"),
             ("-2 s.e.", d["alphas"], d["criterion"] - 2 * d["criterion_se"], "dashed"),
             ("zero", d["alphas"], np.zeros_like(d["alphas"]), "dashed")],
            "alpha", "centre curvature indicator", f"mu={args.mu:g}"))
    ci = est.ci or (None, None)
    meta["bracket"] = est.bracket
    for k, v in meta.items():
        print(f"{k}={csvio.format_value(v)}")
    if est.ci:
        print(f"ci={csvio.format_value(est.ci)}")
        print(f"conclusive={csvio.format_value(est.conclusive)}")
    print(f"alpha_c={csvio.format_value(est.alpha_c)}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            csvio.write_table(fh, meta, ["family", "alpha_c", "ci_lo", "ci_hi", "conclusive"],
                              [(fam, est.alpha_c, ci[0], ci[1], est.conclusive)])
    return EXIT_OK


DEFAULT_PHASE_MU = (-1.0, 0.0, 0.5, 0.8, 1.2, 2.0)
DEFAULT_PHASE_INV_CHI = (0.0, 0.5, 1.0)


def cmd_phase_diagram(args):
    mus = args.mu or list(DEFAULT_PHASE_MU)
    invs = args.inv_chi or list(DEFAULT_PHASE_INV_CHI)
    _require(all(r >= 0 for r in invs), "--inv-chi must be >= 0")
    seed = _seed(args)
    sched = [a for a in modality.DEFAULT_CELL_BUDGET["alphas"] if a < args.alpha_max]
    budget = {"n_paths": args.paths, "dt": args.dt, "seed": seed,
              "alphas": tuple(sched) + (args.alpha_max,)}
    pd = modality.phase_diagram(mus, invs, budget, args.threads)
    meta = {"model": "phase-diagram", "version": __version__, "paths": args.paths,
            "dt": args.dt, "alpha_max": args.alpha_max, "seed": seed}
    for r, b in pd.boundary().items():
        meta[f"boundary[{r:g}]"] = b
    rows = []
    cells = {}
    for (m, r), cell in sorted(pd.cells.items()):
        rows.append((m, r, cell.verdict, cell.alpha_c, cell.n_c, cell.details["transition_class"],
                     cell.final_class, cell.converged))
        text = cell.verdict if cell.alpha_c is None else f"alpha_c={cell.alpha_c:.2f}"
        cells[(r, m)] = (cell.verdict, text)
    _emit_table(args, meta, ["mu", "inv_chi", "class", "alpha_c", "n_c", "transition_class",
                             "final_class", "converged"], rows)
    _emit_svg(args, svg.cell_grid(pd.inv_chi_grid, pd.mu_grid, cells,
                                  title="transition verdicts"))
    return EXIT_OK


def cmd_psi(args):
    _require(args.mu <= 0, "psi compares exact and approximate forms for mu <= 0")
    _require(0 < args.tp_min < args.tp_max, "need 0 < --tp-min < --tp-max")
    alphas = args.alpha or [20.0, 30.0, 50.0]
    n = int(round(args.per_decade * math.log10(args.tp_max / args.tp_min))) + 1
    tp = np.logspace(math.log10(args.tp_min), math.log10(args.tp_max), n)
    # sigma = sqrt(2) makes tau and tau' coincide
    params = make_params(math.sqrt(2.0), mu=args.mu)
    series = {}
    for a in alphas:
        series[f"exact {_label(a)}"] = psi.psi_exact_negative_mu(tp, params, a).value
        if args.mu < 0:
            series[f"approx {_label(a)}"] = psi.psi_approx_negative_mu(tp, params, a).value
    meta = {"model": "psi", "version": __version__, "mu": args.mu, "alpha": tuple(alphas)}
    rows = [(k, t, v) for k, vals in series.items() for t, v in zip(tp, vals)]
    _emit_table(args, meta, ["series", "tau_prime", "density"], rows)
    _emit_svg(args, svg.line_plot(
        [(k, tp, v, "line" if k.startswith("exact") else "dashed") for k, v in series.items()],
        "tau'", "Psi", f"tau density, mu={args.mu:g}", logx=True, logy=True))
    return EXIT_OK


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"optrace: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"optrace: numerical failure: {exc}", file=sys.stderr)
        for k, v in exc.diagnostics.items():
            print(f"  {k} = {v!r}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OptraceError, ValueError) as exc:
        print(f"optrace: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
