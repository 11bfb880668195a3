"""Atomic file output: write to a sibling temp file, then rename."""

import contextlib
import os
import tempfile
from pathlib import Path

from .errors import WriteError


@contextlib.contextmanager
def atomic_open(path, mode="w", **kwargs):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException as exc:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        if isinstance(exc, OSError):
            raise WriteError(f"cannot write {path}: {exc}") from exc
        raise


def write_text(path, text):
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
