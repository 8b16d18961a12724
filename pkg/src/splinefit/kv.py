"""Reading and writing of UTF-8 ``key=value`` files (manifests, CLI configs)."""

from .errors import ParseError


def read_kv(path):
    """Parse a key=value file into an ordered dict of strings.

    Blank lines and lines starting with ``#`` are ignored.  Raises
    :class:`ParseError` (with the line number) on lines without ``=``
    or with duplicate keys.
    """
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", line=lineno)
            key, value = line.split("=", 1)
            key = key.strip()
            if key in out:
                raise ParseError(f"duplicate key {key!r}", line=lineno)
            out[key] = value.strip()
    return out


def write_kv(path, pairs):
    """Write key/value pairs in the given order, one ``key=value`` per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in pairs:
            fh.write(f"{key}={value}\n")
