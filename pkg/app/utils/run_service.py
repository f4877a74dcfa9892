"""Runs started through the HTTP service: registry bookkeeping and optional outputs."""

import logging
from pathlib import Path

from fastapi.concurrency import run_in_threadpool
from pydantic import BaseModel

from app.config.settings import settings
from app.core.commands import execute
from app.core.errors import SolitonLabError
from app.models.api_models import CommandResponse
from app.models.run_manifest import RunManifest, run_registry
from app.utils.output_writer import config_hash, jsonable, prepare_output_dir, relative_names, write_manifest

logger = logging.getLogger(__name__)


def start_manifest(command: str, config: BaseModel) -> RunManifest:
    dump = config.model_dump(mode="json", by_alias=True)
    manifest = RunManifest(
        command=command,
        config_hash=config_hash(dump),
        config=dump,
        seed=dump.get("seed", settings.SEED),
    )
    return run_registry.register(manifest)


async def run_command(
    command: str,
    config: BaseModel,
    save: bool = False,
    include_tables: bool = False,
) -> CommandResponse:
    """
    Execute a subcommand off the event loop and record its manifest.

    Args:
        command: Subcommand name
        config: Validated config model
        save: Write the outputs under OUTPUT_DIR/<command>/<run id>
        include_tables: Return the CSV tables as rows

    Returns:
        CommandResponse with the report summary
    """
    manifest = start_manifest(command, config)
    logger.info(f"[{command}] Run {manifest.run_id} started")
    try:
        result = await run_in_threadpool(execute, command, config)
    except SolitonLabError as e:
        manifest.finish(error=e.to_dict())
        logger.warning(f"[{command}] Run {manifest.run_id} failed: {e.code}: {e.message}")
        raise

    outputs, output_dir = [], None
    if save:
        directory = prepare_output_dir(str(Path(settings.OUTPUT_DIR) / command / manifest.run_id), command)
        paths = await run_in_threadpool(result.write, directory)
        outputs = relative_names(paths, directory)
        output_dir = str(directory)
    manifest.finish(outputs=outputs)
    if save:
        write_manifest(Path(output_dir), manifest)
    logger.info(f"[{command}] Run {manifest.run_id} finished")

    return CommandResponse(
        run_id=manifest.run_id,
        command=command,
        summary=jsonable(result.summary),
        tables=jsonable(result.tables) if include_tables else None,
        outputs=outputs,
        output_dir=output_dir,
    )
