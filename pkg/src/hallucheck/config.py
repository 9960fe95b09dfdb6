"""Scan configuration: defaults, the flat config-file format, and digests.

The config file is plain text, one ``key = value`` per line, ``#`` comments.
Documented keys: threshold, keywords (comma-separated), tier-low,
tier-doubtful, tier-high, rate-ms, exhaustive, scan-all. Values given on the
command line override file values; the effective configuration is digested
into every report so results are attributable to their settings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .matching import DEFAULT_KEYWORDS, DEFAULT_THRESHOLD, DEFAULT_TOP_K


@dataclass(frozen=True)
class ScanConfig:
    """Effective settings for scanning and triage."""

    threshold: float = DEFAULT_THRESHOLD
    keywords: tuple[str, ...] = DEFAULT_KEYWORDS
    scan_all: bool = False  # bypass the keyword prefilter
    top_k: int = DEFAULT_TOP_K
    tier_low: int = 1
    tier_doubtful: int = 3
    tier_high: int = 4
    rate_ms: int = 1000
    exhaustive: bool = False  # keep triaging a paper after its first HalluCitation
    online: bool = False
    cache_dir: str | None = None

    def validate(self) -> "ScanConfig":
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if not self.keywords and not self.scan_all:
            raise ConfigError("keywords must be nonempty unless scan-all is set")
        if not 0 < self.tier_low <= self.tier_doubtful <= self.tier_high:
            raise ConfigError(
                "tier boundaries must satisfy 0 < tier-low <= tier-doubtful <= tier-high"
            )
        if self.rate_ms < 0:
            raise ConfigError("rate-ms must be >= 0")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        return self

    def digest(self) -> str:
        """Stable sha256 over the canonical key=value rendering."""
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                rendered = ",".join(value)
            elif isinstance(value, bool):
                rendered = "true" if value else "false"
            else:
                rendered = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{f.name}={rendered}")
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


_FILE_KEYS = {
    "threshold": lambda v: ("threshold", float(v)),
    "keywords": lambda v: (
        "keywords",
        tuple(part.strip() for part in v.split(",") if part.strip()),
    ),
    "tier-low": lambda v: ("tier_low", _parse_int("tier-low", v)),
    "tier-doubtful": lambda v: ("tier_doubtful", _parse_int("tier-doubtful", v)),
    "tier-high": lambda v: ("tier_high", _parse_int("tier-high", v)),
    "rate-ms": lambda v: ("rate_ms", _parse_int("rate-ms", v)),
    "exhaustive": lambda v: ("exhaustive", _parse_bool("exhaustive", v)),
    "scan-all": lambda v: ("scan_all", _parse_bool("scan-all", v)),
}


def load_config_file(path: str | Path) -> ScanConfig:
    """Parse a flat key=value config file into a ScanConfig."""
    overrides = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected key = value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        parser = _FILE_KEYS.get(key)
        if parser is None:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        try:
            field_name, parsed = parser(value)
        except ConfigError as exc:
            raise ConfigError(f"line {line_no}: {exc}") from None
        except ValueError:
            raise ConfigError(f"line {line_no}: bad value for {key}: {value!r}") from None
        overrides[field_name] = parsed
    return ScanConfig(**overrides).validate()


def apply_overrides(config: ScanConfig, **overrides) -> ScanConfig:
    """Overlay non-None command-line values on a config."""
    effective = {k: v for k, v in overrides.items() if v is not None}
    if not effective:
        return config.validate()
    return replace(config, **effective).validate()
