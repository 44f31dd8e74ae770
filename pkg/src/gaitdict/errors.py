"""Exception types that the CLI maps to distinct exit codes."""


class ConfigError(Exception):
    """Bad run configuration: unknown names, out-of-range values, unreadable config file."""


class DataError(Exception):
    """Bad on-disk data: missing files, malformed CSVs, duplicate dictionary keys."""
