"""Exception types shared across the package.

The CLI maps these onto distinct exit codes (config=2, format/io=3, numeric=4);
plain ValueError is reserved for contract violations at call sites.
"""


class ConfigError(Exception):
    """Bad or unknown configuration key/value."""


class FormatError(Exception):
    """Checkpoint/video file could not be parsed: bad magic, truncation,
    or shapes inconsistent with the header or a target spec."""


class NumericError(Exception):
    """A computation produced NaN/Inf or diverged."""
