"""CLI entry point for trade-design."""

import json
import logging
from pathlib import Path

import click

from trade_design.models import CommandResult

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_VERIFY = 3
EXIT_INFEASIBLE = 4

CONSTRUCT_KINDS = ["any", "discrete", "garble", "us-unique", "fb", "negative"]


def _configure_logging(verbose: bool) -> None:
    from rich.console import Console
    from rich.logging import RichHandler

    handler = RichHandler(console=Console(stderr=True), show_path=False)
    root = logging.getLogger("trade_design")
    root.handlers = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def _fail(message: str, code: int):
    click.echo(f"❌ Error: {message}", err=True)
    raise SystemExit(code)


def _finish(result: CommandResult, message: str = "") -> None:
    """Print the summary of a CommandResult and exit with its status."""
    document = {**result.summary, "artifacts": list(result.artifacts)}
    click.echo(json.dumps(document, indent=2, default=str))
    if result.status != EXIT_OK:
        _fail(message or "command failed", result.status)


def _floats(text: str, option: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers: {text!r}", param_hint=option)


def _parse_target(ctx, param, value):
    if value is None:
        return None
    numbers = _floats(value, "--target")
    if len(numbers) != 2:
        raise click.BadParameter("target needs two numbers: pi_b,pi_s")
    return tuple(numbers)


def _parse_grid(ctx, param, value):
    if value is None:
        return None
    grid = _floats(value, "--lambda-grid")
    if not grid:
        raise click.BadParameter("lambda grid is empty")
    return tuple(grid)


def _load_env(path: Path):
    from trade_design.environment import EnvironmentDocumentError, load_environment_file

    try:
        return load_environment_file(path)
    except EnvironmentDocumentError as e:
        _fail(str(e), EXIT_INPUT)


@click.group()
@click.version_option(version="1.0.0")
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    help="Settings file (default: ./trade-design.toml when present)",
)
@click.option("--tol", type=float, help="Override the verification tolerance")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging on stderr")
@click.pass_context
def cli(ctx, config_path, tol, verbose):
    """Trade Design - information design for bilateral trade."""
    from dataclasses import replace

    from trade_design.config import SettingsError, load_settings

    _configure_logging(verbose)
    try:
        settings = load_settings(config_path)
    except SettingsError as e:
        _fail(str(e), EXIT_INPUT)
    if tol is not None:
        settings = replace(settings, tolerance=tol)
    ctx.obj = settings


@cli.command()
@click.argument("env_path", type=click.Path(path_type=Path))
@click.option("--svg", "svg_path", type=click.Path(path_type=Path), help="Write a figure")
@click.option(
    "--csv", "csv_path", type=click.Path(path_type=Path), help="Write region vertices"
)
@click.option(
    "--lambda-grid",
    callback=_parse_grid,
    help="Welfare weights for the negative envelope, e.g. 1,2,5,10",
)
@click.pass_obj
def regions(settings, env_path, svg_path, csv_path, lambda_grid):
    """Compute the implementable-payoff regions of an environment."""
    from trade_design.environment import surplus
    from trade_design.exporters import CSVExporter, SVGExporter
    from trade_design.geometry import (
        EmptyRegionError,
        pi_hat_s,
        region_all,
        region_fb,
        region_negative,
        region_us,
        s_lambda,
        seller_floor_fb,
        seller_floor_us,
        seller_guarantee,
    )

    env = _load_env(env_path)
    try:
        if env.gains_from_trade:
            certificate = seller_floor_us(env, settings.search)
            fb, fb_prices = seller_floor_fb(env)
            drawn = [region_all(env), region_us(env, certificate.value), region_fb(env)]
            summary = {
                "environment": env.name,
                "gains_from_trade": True,
                "S": surplus(env),
                "floors": [seller_guarantee(env), certificate.value, fb],
                "floor_us_exact": certificate.exact,
                "floor_us_method": certificate.method,
                "floor_us_lower_bound": certificate.lower_bound,
                "p_star": certificate.p_star,
                "fb_prices": list(fb_prices),
            }
        else:
            region = region_negative(env, lambda_grid or settings.lambda_grid)
            drawn = [region]
            hat = pi_hat_s(env)
            summary = {
                "environment": env.name,
                "gains_from_trade": False,
                "S_1": s_lambda(env, 1.0),
                "floor": seller_guarantee(env),
                "pi_hat_s": hat,
                "efficient_trade_profitable": hat > 0,
                "max_pi_b": max(v.pi_b for v in region.vertices),
            }
    except (EmptyRegionError, ValueError) as e:
        _fail(str(e), EXIT_INPUT)

    summary["regions"] = {
        r.kind: {
            "vertices": [[v.pi_b, v.pi_s] for v in r.vertices],
            "labels": dict(r.labels),
        }
        for r in drawn
    }
    result = CommandResult(summary=summary)
    if svg_path is not None:
        exporter = SVGExporter(title=env.name)
        exporter.export_to_file(exporter.export_regions(drawn), svg_path)
        result.artifacts.append(str(svg_path))
    if csv_path is not None:
        exporter = CSVExporter()
        for r in drawn:
            out = csv_path
            if len(drawn) > 1:
                out = csv_path.with_name(f"{csv_path.stem}-{r.kind}{csv_path.suffix}")
            exporter.export_to_file(exporter.export_region(r), out)
            result.artifacts.append(str(out))
    _finish(result)


@cli.group()
def icd():
    """Incentive-compatible distribution tools."""
    pass


@icd.command("check")
@click.argument("env_path", type=click.Path(path_type=Path))
@click.option("--belief", help="Comma-separated weights (default: the prior)")
@click.pass_obj
def icd_check(settings, env_path, belief):
    """Check whether a belief keeps the seller indifferent on its support."""
    from trade_design.icd import is_icd, seller_opt_prices

    env = _load_env(env_path)
    try:
        candidate = env.prior if belief is None else env.belief(_floats(belief, "--belief"))
    except ValueError as e:
        _fail(str(e), EXIT_INPUT)
    ok, constant = is_icd(env, candidate, tol=settings.tolerance)
    summary = {
        "is_icd": ok,
        "constant": constant,
        "optimal_prices": list(seller_opt_prices(env, candidate)),
    }
    _finish(CommandResult(summary=summary))


@icd.command("decompose")
@click.argument("env_path", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), help="Write the components")
def icd_decompose_cmd(env_path, out):
    """Split the prior into ICD components."""
    from trade_design.exporters import JSONExporter
    from trade_design.geometry import seller_floor_fb
    from trade_design.icd import icd_decompose

    env = _load_env(env_path)
    try:
        decomposition = icd_decompose(env)
        fb, _ = seller_floor_fb(env)
    except ValueError as e:
        _fail(str(e), EXIT_INPUT)
    result = CommandResult(
        summary={
            "components": [
                {
                    "weight": c.weight,
                    "probs": list(c.belief.weights),
                    "constant": c.constant,
                }
                for c in decomposition.components
            ],
            "weighted_profit": sum(c.weight * c.constant for c in decomposition.components),
            "floor_fb": fb,
        }
    )
    if out is not None:
        exporter = JSONExporter()
        exporter.export_to_file(exporter.export_decomposition(decomposition), out)
        result.artifacts.append(str(out))
    _finish(result)


@icd.command("pstar")
@click.argument("env_path", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), help="Write the witness ICD")
@click.option(
    "--cdf-csv", type=click.Path(path_type=Path), help="Write the witness CDF table"
)
def icd_pstar(env_path, out, cdf_csv):
    """Seller-worst price under affine costs."""
    from trade_design.exporters import CSVExporter, JSONExporter
    from trade_design.icd import NonAffineCostError, UnboundedSupportError, affine_p_star

    env = _load_env(env_path)
    if not env.gains_from_trade:
        _fail("pstar needs gains from trade", EXIT_INPUT)
    try:
        star = affine_p_star(env)
    except NonAffineCostError as e:
        _fail(f"{e}; costs of {env.name or 'this environment'} are not affine", EXIT_INPUT)
    except UnboundedSupportError as e:
        _fail(str(e), EXIT_INPUT)

    result = CommandResult(
        summary={
            "p_star": star.p_star,
            "pi_us": star.pi_us,
            "clamped": star.clamped,
            "witness": {
                "v_lo": star.witness.v_lo,
                "v_hi": star.witness.v_hi,
                "atom_mass": star.witness.atom_mass,
            },
        }
    )
    if out is not None:
        exporter = JSONExporter()
        exporter.export_to_file(exporter.export_affine_icd(star.witness, star), out)
        result.artifacts.append(str(out))
    if cdf_csv is not None:
        exporter = CSVExporter()
        exporter.export_to_file(exporter.export_cdf_table(star.witness.sample()), cdf_csv)
        result.artifacts.append(str(cdf_csv))
    _finish(result)


@icd.command("binary")
@click.argument("env_path", type=click.Path(path_type=Path))
def icd_binary(env_path):
    """Solve the two-point floor equation."""
    from trade_design.icd import binary_p

    env = _load_env(env_path)
    try:
        root = binary_p(env)
    except ValueError as e:
        _fail(str(e), EXIT_INPUT)
    _finish(CommandResult(summary={"p": root.p, "pi_us": root.pi_us, "method": root.method}))


def _write_documents(out_dir: Path, structure, profile, trembles=None) -> list:
    from trade_design.exporters import JSONExporter

    out_dir.mkdir(parents=True, exist_ok=True)
    exporter = JSONExporter()
    written = [out_dir / "structure.json", out_dir / "profile.json"]
    exporter.export_to_file(exporter.export_structure(structure), written[0])
    exporter.export_to_file(exporter.export_profile(profile, structure), written[1])
    if trembles is not None:
        written.append(out_dir / "trembles.json")
        exporter.export_to_file(exporter.export_trembles(trembles), written[2])
    return [str(p) for p in written]


@cli.command()
@click.argument("kind", type=click.Choice(CONSTRUCT_KINDS))
@click.argument("env_path", type=click.Path(path_type=Path))
@click.option("--target", callback=_parse_target, help="Target payoffs pi_b,pi_s")
@click.option("--beta", type=float, default=1.0, show_default=True, help="fb mixing weight")
@click.option("--welfare-weight", type=float, default=1.0, show_default=True)
@click.option("--tie-share", type=float, default=1.0, show_default=True)
@click.option("--epsilon", type=float, help="Approximation radius for discrete")
@click.option(
    "--base",
    type=click.Choice(["revelation", "witness"]),
    default="revelation",
    show_default=True,
    help="Structure that garble starts from",
)
@click.option(
    "--out-dir",
    type=click.Path(path_type=Path),
    default=Path("."),
    show_default=True,
    help="Where structure/profile documents go",
)
@click.option("--verify", is_flag=True, help="Run the verifiers on the result")
@click.pass_obj
def construct(
    settings,
    kind,
    env_path,
    target,
    beta,
    welfare_weight,
    tie_share,
    epsilon,
    base,
    out_dir,
    verify,
):
    """Build an information structure and equilibrium profile."""
    from trade_design.equilibrium import (
        payoffs,
        verify_price_independent,
        verify_sequential,
        verify_wpbe,
    )
    from trade_design.exporters import JSONExporter
    from trade_design.geometry import EmptyRegionError
    from trade_design.structures import (
        ConstructionError,
        InfeasibleTargetError,
        construct_any,
        construct_discrete,
        construct_fb,
        construct_negative,
        construct_us_unique,
        finite_floor_witness,
        full_revelation_to_buyer,
        garble_to_target,
    )

    env = _load_env(env_path)
    tol = settings.tolerance
    if kind in ("any", "discrete", "garble", "us-unique") and target is None:
        _fail(f"construct {kind} needs --target", EXIT_INPUT)

    trembles = None
    extra = {}
    try:
        if kind == "any":
            structure, profile = construct_any(
                env, target, tol=tol, sentinel_fraction=settings.sentinel_fraction
            )
        elif kind == "discrete":
            built = construct_discrete(
                env, target, epsilon=epsilon or settings.epsilon, tol=tol
            )
            structure, profile, trembles = built.structure, built.profile, built.trembles
            extra = {"case": built.case, "eta": built.eta, "sigma_h": built.sigma_h}
        elif kind == "garble":
            if base == "witness":
                witness = finite_floor_witness(env, search_config=settings.search)
                start = (witness.structure, witness.profile)
            else:
                start = full_revelation_to_buyer(env)
            garbled = garble_to_target(env, start[0], start[1], target, tol=tol)
            structure, profile = garbled.structure, garbled.profile
            extra = garbled.diagnostics
        elif kind == "us-unique":
            structure, profile = construct_us_unique(env, target, tol=tol)
        elif kind == "fb":
            structure, profile = construct_fb(env, beta)
        else:
            structure, profile = construct_negative(env, welfare_weight, tie_share)
    except InfeasibleTargetError as e:
        _fail(str(e), EXIT_INFEASIBLE)
    except (ConstructionError, EmptyRegionError) as e:
        _fail(str(e), EXIT_VERIFY)
    except ValueError as e:
        _fail(str(e), EXIT_INPUT)

    achieved = payoffs(env, structure, profile)
    summary = {
        "kind": kind,
        "payoffs": {"pi_b": achieved.pi_b, "pi_s": achieved.pi_s},
        "classes": sorted(structure.class_tags),
        **extra,
    }
    if target is not None:
        summary["target"] = {"pi_b": target[0], "pi_s": target[1]}
    result = CommandResult(summary=summary)
    result.artifacts = _write_documents(out_dir, structure, profile, trembles)

    if verify:
        if trembles is not None:
            report = verify_sequential(
                env, structure, profile, trembles, settings.n_list, tol=tol
            )
        else:
            report = verify_wpbe(env, structure, profile, tol=tol)
        if kind in ("garble", "us-unique", "fb"):
            ok, gap = verify_price_independent(structure, profile, tol)
            report.price_independent, report.price_independent_gap = ok, gap
        summary["verification"] = JSONExporter().serialize_report(report)
        if not report.ok:
            result.status = EXIT_VERIFY
    _finish(result, "constructed profile failed verification")


@cli.command()
@click.argument("env_path", type=click.Path(path_type=Path))
@click.argument("structure_path", type=click.Path(path_type=Path))
@click.argument("profile_path", type=click.Path(path_type=Path))
@click.option(
    "--trembles",
    "trembles_path",
    type=click.Path(path_type=Path),
    help="Tremble document for the sequential check",
)
@click.option("--price-independent", is_flag=True, help="Also check belief form")
@click.pass_obj
def verify(settings, env_path, structure_path, profile_path, trembles_path, price_independent):
    """Check a structure and profile against the equilibrium conditions."""
    from trade_design.documents import (
        load_document,
        parse_profile,
        parse_structure,
        parse_trembles,
    )
    from trade_design.equilibrium import (
        payoffs,
        verify_price_independent,
        verify_sequential,
        verify_wpbe,
    )
    from trade_design.exporters import JSONExporter

    env = _load_env(env_path)
    tol = settings.tolerance
    try:
        structure = parse_structure(load_document(structure_path))
        profile = parse_profile(load_document(profile_path), structure)
        trembles = (
            parse_trembles(load_document(trembles_path)) if trembles_path else None
        )
        if trembles is not None:
            report = verify_sequential(
                env, structure, profile, trembles, settings.n_list, tol=tol
            )
        else:
            report = verify_wpbe(env, structure, profile, tol=tol)
        achieved = payoffs(env, structure, profile)
    except ValueError as e:
        _fail(str(e), EXIT_INPUT)

    if price_independent:
        ok, gap = verify_price_independent(structure, profile, tol)
        report.price_independent, report.price_independent_gap = ok, gap

    summary = JSONExporter().serialize_report(report)
    summary["payoffs"] = {"pi_b": achieved.pi_b, "pi_s": achieved.pi_s}
    result = CommandResult(status=EXIT_OK if report.ok else EXIT_VERIFY, summary=summary)
    _finish(
        result,
        f"profile violates equilibrium conditions (buyer gap {report.buyer_gap:.3g}, "
        f"seller gap {report.seller_gap:.3g}, Bayes gap {report.bayes_gap:.3g})",
    )


@cli.command()
@click.argument("joint_path", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), help="Write the environment")
def reduce(joint_path, out):
    """Reduce a joint (value, cost) law to an environment document."""
    from trade_design.environment import (
        EnvironmentDocumentError,
        load_joint_document,
        serialize_environment,
    )
    from trade_design.exporters import JSONExporter

    try:
        env = load_joint_document(joint_path.read_text(), name=joint_path.stem)
    except OSError as e:
        _fail(f"cannot read {joint_path}: {e}", EXIT_INPUT)
    except EnvironmentDocumentError as e:
        _fail(str(e), EXIT_INPUT)
    result = CommandResult(summary=serialize_environment(env))
    if out is not None:
        exporter = JSONExporter()
        exporter.export_to_file(exporter.export_environment(env), out)
        result.artifacts.append(str(out))
    _finish(result)


if __name__ == "__main__":
    cli()
