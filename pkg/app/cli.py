"""
Command-line frontend: one subcommand per experiment.

Usage:
    python -m app.cli profile --nonlinearity cubic --omega 1
    python -m app.cli collide --config collide.json --out runs/collide --set FIT_TOL=1e-9

Exit codes: 0 success, 2 numerical failure (failure.json written), 3 configuration error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import BaseModel, ValidationError

from app.config.settings import apply_overrides, settings
from app.core.commands import COMMANDS, CommandResult, execute
from app.core.errors import ConfigError, FitLost, NonFinite, SolitonLabError
from app.models.run_manifest import RunManifest
from app.utils.output_writer import (
    config_hash,
    jsonable,
    prepare_output_dir,
    relative_names,
    write_csv,
    write_json,
    write_manifest,
)

logger = logging.getLogger(__name__)

NONLINEARITY_KINDS = ("cubic", "cubic_quintic", "triple_power")


class LabArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises ConfigError instead of exiting."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: error: {message}")


def build_parser() -> LabArgumentParser:
    parser = LabArgumentParser(
        prog="soliton-lab",
        description="Soliton collisions in a multi-power nonlinear Schroedinger equation",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, command in COMMANDS.items():
        sub = subparsers.add_parser(name, help=command.help, description=command.help)
        sub.add_argument("--config", type=Path, help="JSON config file")
        sub.add_argument("--out", type=str, help=f"Output directory (default {settings.OUTPUT_DIR}/{name})")
        sub.add_argument("--threads", type=int, help="Worker processes for sweeps")
        sub.add_argument("--seed", type=int, help="Seed for random initial data and property checks")
        sub.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE", help="Override a numerical setting"
        )
        sub.add_argument("--nonlinearity", choices=NONLINEARITY_KINDS, help="Nonlinearity preset")
        sub.add_argument("--omega", type=float, help="Soliton frequency")
        if "v" in command.config_model.model_fields:
            sub.add_argument("--v", type=float, help="Half-speed of the solitons")
    return parser


def parse_overrides(items: Sequence[str]) -> Dict[str, str]:
    overrides = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
        overrides[key.strip()] = value.strip()
    return overrides


def load_config(name: str, args: argparse.Namespace) -> BaseModel:
    """Config file contents with flag values layered on top."""
    model = COMMANDS[name].config_model
    data: Dict[str, Any] = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise ConfigError(f"Cannot read config file {args.config}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {args.config} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {args.config} must hold a JSON object")

    fields = model.model_fields
    if args.nonlinearity is not None:
        data["nonlinearity"] = {**data.get("nonlinearity", {}), "kind": args.nonlinearity}
    if args.omega is not None:
        data["omega"] = args.omega
    if getattr(args, "v", None) is not None:
        data["v"] = args.v
    if args.seed is not None and "seed" in fields:
        data["seed"] = args.seed
    if args.threads is not None and "max_workers" in fields:
        data["max_workers"] = args.threads

    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid {name} config: {e}", detail={"errors": jsonable(e.errors(include_url=False))}) from e


def _failure_payload(error: SolitonLabError, directory: Path) -> List[Path]:
    payload = error.to_dict()
    paths = []
    if isinstance(error, FitLost) and error.last_state is not None:
        payload["last_state"] = {**error.last_state.as_row(), **error.last_state.params.as_dict()}
    if isinstance(error, NonFinite) and error.trajectory is not None:
        for observer, rows in error.trajectory.observations.items():
            if rows:
                paths.append(write_csv(directory / f"partial_{observer}.csv", rows))
    paths.insert(0, write_json(directory / "failure.json", payload))
    return paths


def run(name: str, args: argparse.Namespace) -> int:
    config = load_config(name, args)
    directory = prepare_output_dir(args.out, name)
    dump = config.model_dump(mode="json", by_alias=True)
    manifest = RunManifest(
        command=name,
        config_hash=config_hash(dump),
        config=dump,
        seed=dump.get("seed", settings.SEED),
        overrides=jsonable(args.applied_overrides),
    )
    logger.info(f"Run {manifest.run_id}: {name} -> {directory}")

    try:
        result: CommandResult = execute(name, config)
    except SolitonLabError as e:
        logger.error(f"{name} failed: {e.code}: {e.message}")
        paths = _failure_payload(e, directory)
        manifest.finish(outputs=relative_names(paths, directory), error=e.to_dict())
        write_manifest(directory, manifest)
        print(json.dumps(jsonable(e.to_dict()), indent=2, sort_keys=True), file=sys.stderr)
        return e.exit_code

    paths = result.write(directory)
    manifest.finish(outputs=relative_names(paths, directory))
    write_manifest(directory, manifest)
    print(json.dumps(jsonable(result.summary), indent=2, sort_keys=True))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    parser = build_parser()
    previous: Dict[str, Any] = {}
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            # --help
            return int(e.code or 0)
        overrides = parse_overrides(args.set)
        if args.seed is not None:
            overrides.setdefault("SEED", str(args.seed))
        previous = {key: getattr(settings, key) for key in overrides if hasattr(settings, key)}
        args.applied_overrides = apply_overrides(overrides)
        return run(args.command, args)
    except ConfigError as e:
        print(f"{e.message}", file=sys.stderr)
        return e.exit_code
    finally:
        for key, value in previous.items():
            setattr(settings, key, value)


if __name__ == "__main__":
    sys.exit(main())
