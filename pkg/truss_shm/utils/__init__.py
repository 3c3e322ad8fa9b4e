import csv
import hashlib
import io
import itertools
import json
import numbers
from collections.abc import Iterable, Iterator, Mapping, Sequence
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, TypeVar, Union

import arrow
from rapidfuzz import process

from truss_shm.constants import Client

T = TypeVar("T")

# Minimum rapidfuzz score for a "did you mean" suggestion
SUGGESTION_CUTOFF = 60


def chunked(items: Sequence[T], size: int) -> Iterator[list[T]]:
    """Split `items` into consecutive lists of at most `size` elements, keeping their order."""
    size = max(1, size)
    iterator = iter(items)
    while chunk := list(itertools.islice(iterator, size)):
        yield chunk


def suggest(name: str, choices: Iterable[str]) -> Optional[str]:
    """Return the entry of `choices` closest to `name`, or None when nothing is close enough."""
    choices = list(choices)
    if not choices:
        return None
    match = process.extractOne(name, choices, score_cutoff=SUGGESTION_CUTOFF)
    return match[0] if match else None


def humanize_seconds(seconds: float) -> str:
    """
    Human readable duration such as `in 3 minutes`, stripped of its leading `in`.

    Sub-second durations are given in milliseconds since arrow rounds them to "instantly".
    """
    if seconds < 1:
        return f"{seconds * 1000:.0f} ms"
    now = arrow.utcnow()
    return now.shift(seconds=seconds).humanize(now, granularity=["hour", "minute", "second"])[3:]


def canonical_json(data: Any) -> str:
    """Sorted-key compact JSON, the form hashed for fingerprints."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(config: Mapping[str, Any]) -> str:
    """Short SHA-256 of an effective configuration."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()[:16]


def output_header(config: Mapping[str, Any], seed: int) -> list[str]:
    """
    Comment lines heading every output file.

    The first line names the tool version, the configuration hash and the seed,
    the second echoes the configuration itself.
    """
    return [
        f"# {Client.name} {Client.version} config={config_hash(config)} seed={seed}",
        f"# config {canonical_json(config)}",
    ]


def format_number(value: Any) -> str:
    """Shortest exact text of a number; fractions as their float value, None as an empty cell."""
    if value is None:
        return ""
    if isinstance(value, numbers.Integral):
        # bools included
        return str(int(value))
    if isinstance(value, numbers.Real):
        # numpy scalars repr as `np.float64(...)` on numpy 2
        value = float(value)
        return f"{value:g}" if value.is_integer() and abs(value) < 1e15 else repr(value)
    return str(value)


def write_csv(
    rows: Sequence[Sequence[Any]],
    path: Union[str, Path, None],
    config: Mapping[str, Any],
    seed: int,
    extra_header: Sequence[str] = (),
) -> str:
    """
    Render `rows` as CSV under the reproducibility header and write it to `path`.

    Returns the text; with `path` None nothing is written.
    """
    buffer = io.StringIO()
    for line in (*output_header(config, seed), *extra_header):
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    for row in rows:
        writer.writerow([format_number(value) for value in row])
    text = buffer.getvalue()
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    return text
