"""Command-line front end, file formats, result logs and SVG rendering."""

from .app import EXIT_FLAGGED, EXIT_INVALID, EXIT_OK, ConfigError, RunConfig, build_parser, main, resolve_environment, run
from .io import (
    FORMAT_VERSION,
    STREAM_COLUMNS,
    FormatError,
    environment_from_dict,
    environment_to_dict,
    load_environment,
    load_log,
    load_sensor_stream,
    log_hash,
    parse_sensor_stream,
    save_environment,
    save_sensor_stream,
    stream_to_csv,
)
from .svg import render_svg

__all__ = [
    "EXIT_FLAGGED",
    "EXIT_INVALID",
    "EXIT_OK",
    "FORMAT_VERSION",
    "STREAM_COLUMNS",
    "ConfigError",
    "FormatError",
    "RunConfig",
    "build_parser",
    "environment_from_dict",
    "environment_to_dict",
    "load_environment",
    "load_log",
    "load_sensor_stream",
    "log_hash",
    "main",
    "parse_sensor_stream",
    "render_svg",
    "resolve_environment",
    "run",
    "save_environment",
    "save_sensor_stream",
    "stream_to_csv",
]
