"""Object label bank.

One hundred everyday object and animal names used to populate scenes.  The
list is curated so no name shares a token with the command grammar's
keywords, keeping parsing unambiguous.
"""

from __future__ import annotations

from importlib import resources


def _load_names() -> tuple[str, ...]:
    text = resources.files("trajlang").joinpath("data/object_names.txt").read_text()
    names = tuple(line.strip() for line in text.splitlines() if line.strip())
    if len(names) != len(set(names)):
        raise ValueError("object name bank contains duplicates")
    return names


OBJECT_NAMES: tuple[str, ...] = _load_names()
